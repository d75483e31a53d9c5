//! Time stepping of the damped wave equation for one transverse Fourier mode,
//!
//! ```text
//!     u_tt - u_xx + k_m^2 u + W(x) u_t = 0    on (-b, b),   u(+-b) = 0,
//! ```
//!
//! with `k_m = 2 pi m / b`. The implicit midpoint rule is applied to the
//! first-order system in `(u, v)`. Eliminating `u^{n+1}` leaves one real
//! tridiagonal system per step,
//!
//! ```text
//!     (I + dt^2/4 A + dt/2 W) v^{n+1} = (I - dt^2/4 A - dt/2 W) v^n - dt A u^n,
//! ```
//!
//! where `A = -D^2 + k_m^2`. The discrete energy obeys
//! `E^{n+1} - E^n = -dt <W vbar, vbar>` exactly, `vbar` the step average.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Tridiagonal, TridiagonalLu};
use crate::model::Damping;
use crate::numerics::{fit_line, fit_loglog};
use crate::quasimode::Quasimode;

/// Largest `dt * omega` accepted for the dominant frequency of the data.
pub const MAX_PHASE_STEP: f64 = 0.5;

/// Displacement and velocity of mode `m` on the interior nodes
/// `x_j = -b + (j + 1) dx`, `dx = 2b / n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveState {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub m: u64,
    pub b: f64,
    pub dx: f64,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: Vec<Complex64>, v: Vec<Complex64>, m: u64, b: f64) -> Result<Self> {
        if u.len() != v.len() || u.len() < 2 {
            return Err(Error::Domain("u and v need the same length (at least 2)".into()));
        }
        let dx = 2.0 * b / (u.len() + 1) as f64;
        Ok(Self { u, v, m, b, dx, t: 0.0 })
    }

    /// Samples `u0`, `u1` at the `n - 1` interior nodes.
    pub fn from_fn(
        n: usize,
        b: f64,
        m: u64,
        u0: impl Fn(f64) -> Complex64,
        u1: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let dx = 2.0 * b / n as f64;
        let xs: Vec<f64> = (1..n).map(|j| -b + j as f64 * dx).collect();
        Self::new(xs.iter().map(|&x| u0(x)).collect(), xs.iter().map(|&x| u1(x)).collect(), m, b)
    }

    /// `u0 = u~`, `u1 = i q u~` for a quasimode, interpolated linearly onto
    /// `n` intervals of `(-b, b)`.
    pub fn from_quasimode(qm: &Quasimode, b: f64, n: usize) -> Result<Self> {
        let full = qm.full_profile();
        let x0 = full[0].0;
        let dxq = qm.dx;
        let sample = |x: f64| -> Complex64 {
            let s = (x - x0) / dxq;
            if s < 0.0 || s >= (full.len() - 1) as f64 {
                return Complex64::new(0.0, 0.0);
            }
            let k = s.floor() as usize;
            let f = s - k as f64;
            full[k].1 * (1.0 - f) + full[k + 1].1 * f
        };
        let iq = Complex64::new(0.0, 1.0) * qm.q;
        Self::from_fn(n, b, qm.m, sample, |x| iq * sample(x))
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.m as f64 / self.b
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.b + (j + 1) as f64 * self.dx
    }

    /// `<A u, u>`: `||u_x||^2 + k_m^2 ||u||^2` with zero boundary values.
    pub fn stiffness(&self, u: &[Complex64]) -> f64 {
        let k2 = self.wavenumber().powi(2);
        let n = u.len();
        let mut grad = u[0].norm_sqr() + u[n - 1].norm_sqr();
        grad += u.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>();
        let mass: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        (grad / (self.dx * self.dx) + k2 * mass) * self.dx
    }

    /// `E = (<A u, u> + ||v||^2) / 2`.
    pub fn energy(&self) -> f64 {
        let kinetic: f64 = self.v.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx;
        0.5 * (self.stiffness(&self.u) + kinetic)
    }

    /// `sqrt(<A u, u> / ||u||^2)`, or the same for `v` when `u` vanishes.
    pub fn dominant_frequency(&self) -> f64 {
        let pick = if self.u.iter().any(|z| z.norm_sqr() > 0.0) { &self.u } else { &self.v };
        let mass: f64 = pick.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx;
        if mass == 0.0 {
            return 0.0;
        }
        (self.stiffness(pick) / mass).sqrt()
    }

    /// Squared `H^2 x H^1` norm of the 2D data `u(x) e^{i k y}`:
    /// `||(A + 1) u||^2 + <(A + 1) v, v>`.
    pub fn data_norm_sq(&self) -> f64 {
        let k2 = self.wavenumber().powi(2);
        let n = self.u.len();
        let inv = 1.0 / (self.dx * self.dx);
        let mut h2 = 0.0;
        for j in 0..n {
            let left = if j > 0 { self.u[j - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if j + 1 < n { self.u[j + 1] } else { Complex64::new(0.0, 0.0) };
            let au = (self.u[j] * 2.0 - left - right) * inv + self.u[j] * (k2 + 1.0);
            h2 += au.norm_sqr();
        }
        let vv: f64 = self.v.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx;
        h2 * self.dx + self.stiffness(&self.v) + vv
    }

    pub fn scale(&mut self, factor: f64) {
        self.u.iter_mut().chain(self.v.iter_mut()).for_each(|z| *z *= factor);
    }
}

/// Energies sampled along a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub m: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Largest `|E^{n+1} - E^n + dt <W vbar, vbar>| / E^0` over all steps.
    pub dissipation_defect: f64,
}

impl EnergyTrace {
    /// Sum of traces sampled at identical times.
    pub fn superpose(traces: &[EnergyTrace]) -> Result<EnergyTrace> {
        let first = traces.first().ok_or_else(|| Error::Domain("no traces".into()))?;
        if traces.iter().any(|t| t.times != first.times) {
            return Err(Error::Domain("traces sampled at different times".into()));
        }
        let energies = (0..first.times.len()).map(|k| traces.iter().map(|t| t.energies[k]).sum()).collect();
        Ok(EnergyTrace {
            m: first.m,
            dt: first.dt,
            times: first.times.clone(),
            energies,
            dissipation_defect: traces.iter().map(|t| t.dissipation_defect).fold(0.0, f64::max),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "energy"])?;
        for (t, e) in self.times.iter().zip(&self.energies) {
            w.write_record(&[t.to_string(), e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `t, energy` rows as written by [`EnergyTrace::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let (mut times, mut energies) = (Vec::new(), Vec::new());
        for row in r.deserialize() {
            let (t, e): (f64, f64) = row?;
            times.push(t);
            energies.push(e);
        }
        let dt = match times.as_slice() {
            [t0, t1, ..] => t1 - t0,
            _ => 0.0,
        };
        Ok(Self {
            m: 0,
            dt,
            times,
            energies,
            dissipation_defect: 0.0,
        })
    }

    /// Energies at `times` by linear interpolation of `log E`; `times` must
    /// lie inside the sampled range.
    pub fn resample(&self, times: &[f64]) -> Result<EnergyTrace> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(Error::Domain("empty trace".into())),
        };
        let mut energies = Vec::with_capacity(times.len());
        for &t in times {
            if t < first || t > last + 1e-9 * last.abs().max(1.0) {
                return Err(Error::Domain(format!("t = {t} outside the sampled range [{first}, {last}]")));
            }
            let k = self.times.partition_point(|s| *s <= t).clamp(1, self.times.len() - 1);
            let (t0, t1) = (self.times[k - 1], self.times[k]);
            let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let (e0, e1) = (self.energies[k - 1], self.energies[k]);
            energies.push(if e0 > 0.0 && e1 > 0.0 {
                (e0.ln() * (1.0 - f) + e1.ln() * f).exp()
            } else {
                e0 * (1.0 - f) + e1 * f
            });
        }
        Ok(EnergyTrace {
            m: self.m,
            dt: self.dt,
            times: times.to_vec(),
            energies,
            dissipation_defect: self.dissipation_defect,
        })
    }
}

/// Step controls for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
    /// Relative energy increase per step tolerated before failing.
    pub growth_tol: f64,
}

impl StepOptions {
    pub fn new(dt: f64, horizon: f64, stride: usize) -> Self {
        Self {
            dt,
            horizon,
            stride: stride.max(1),
            growth_tol: 1e-10,
        }
    }
}

/// Advances `state` to the horizon; returns the energy trace.
pub fn evolve(state: &mut WaveState, damping: &dyn Damping, opts: StepOptions) -> Result<EnergyTrace> {
    if !(opts.dt > 0.0) || !(opts.horizon > 0.0) {
        return Err(Error::Domain("dt and horizon must be positive".into()));
    }
    let omega = state.dominant_frequency();
    if opts.dt * omega > MAX_PHASE_STEP {
        return Err(Error::Precondition(format!(
            "dt = {} does not resolve the data frequency {omega:.3} (dt omega must be <= {MAX_PHASE_STEP})",
            opts.dt
        )));
    }
    let n = state.u.len();
    let dt = opts.dt;
    let inv = 1.0 / (state.dx * state.dx);
    let k2 = state.wavenumber().powi(2);
    let w: Vec<f64> = (0..n).map(|j| damping.value_unchecked(state.x(j))).collect();

    let c = 0.25 * dt * dt;
    let diag: Vec<Complex64> = w
        .iter()
        .map(|&wj| Complex64::new(1.0 + c * (2.0 * inv + k2) + 0.5 * dt * wj, 0.0))
        .collect();
    let off = vec![Complex64::new(-c * inv, 0.0); n - 1];
    let lhs: TridiagonalLu = Tridiagonal::new(off.clone(), diag, off).factor()?;

    let apply_a = |u: &[Complex64], out: &mut [Complex64]| {
        for j in 0..n {
            let left = if j > 0 { u[j - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if j + 1 < n { u[j + 1] } else { Complex64::new(0.0, 0.0) };
            out[j] = (u[j] * 2.0 - left - right) * inv + u[j] * k2;
        }
    };

    let steps = (opts.horizon / dt).round() as usize;
    let e0 = state.energy();
    let mut times = vec![state.t];
    let mut energies = vec![e0];
    let mut defect: f64 = 0.0;
    let mut au = vec![Complex64::new(0.0, 0.0); n];
    let mut av = vec![Complex64::new(0.0, 0.0); n];
    let mut e_prev = e0;
    for step in 1..=steps {
        apply_a(&state.u, &mut au);
        apply_a(&state.v, &mut av);
        let mut rhs: Vec<Complex64> = (0..n)
            .map(|j| state.v[j] * (1.0 - 0.5 * dt * w[j]) - av[j] * c - au[j] * dt)
            .collect();
        lhs.solve_in_place(&mut rhs);
        let v_new = rhs;
        let mut dissipated = 0.0;
        for j in 0..n {
            let vbar = 0.5 * (v_new[j] + state.v[j]);
            state.u[j] += vbar * dt;
            dissipated += w[j] * vbar.norm_sqr();
        }
        dissipated *= dt * state.dx;
        state.v = v_new;
        state.t += dt;

        let e = state.energy();
        if e0 > 0.0 {
            defect = defect.max((e - e_prev + dissipated).abs() / e0);
        }
        if e > e_prev * (1.0 + opts.growth_tol) && e - e_prev > 1e-14 * e0 {
            return Err(Error::Instability {
                step,
                increase: (e - e_prev) / e_prev,
            });
        }
        e_prev = e;
        if step % opts.stride == 0 || step == steps {
            times.push(state.t);
            energies.push(e);
        }
    }
    Ok(EnergyTrace {
        m: state.m,
        dt,
        times,
        energies,
        dissipation_defect: defect,
    })
}

/// Evolves independent modes in parallel and sums their energies.
pub fn evolve_modes(states: Vec<WaveState>, damping: &(dyn Damping + Sync), opts: StepOptions) -> Result<(EnergyTrace, Vec<EnergyTrace>)> {
    let traces: Vec<EnergyTrace> = states
        .into_par_iter()
        .map(|mut s| evolve(&mut s, damping, opts))
        .collect::<Result<_>>()?;
    Ok((EnergyTrace::superpose(&traces)?, traces))
}

/// Power-law fit of an energy trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// `alpha = -slope / 2` of `log E` against `log t`.
    pub exponent: f64,
    pub window: (f64, f64),
    pub r2: f64,
    /// `r^2` of `log E` against `t`, the exponential model.
    pub exponential_r2: f64,
    /// Set when `r2 < 0.9` or the exponential model fits better.
    pub inconclusive: bool,
}

/// Fits `E ~ t^{-2 alpha}` on `[T/10, T]`, `T` the final time of the trace.
pub fn fit_decay(trace: &EnergyTrace) -> Result<DecayFit> {
    let horizon = *trace.times.last().ok_or_else(|| Error::Fit("empty trace".into()))?;
    let start = 0.1 * horizon;
    let (ts, es): (Vec<f64>, Vec<f64>) = trace
        .times
        .iter()
        .zip(&trace.energies)
        .filter(|(t, e)| **t >= start * (1.0 - 1e-12) && **t > 0.0 && **e > 0.0)
        .map(|(t, e)| (*t, *e))
        .unzip();
    if ts.len() < 3 {
        return Err(Error::Fit("fewer than three samples in the fit window".into()));
    }
    let window = (ts[0], *ts.last().unwrap());
    if window.1 / window.0 < 10.0 * (1.0 - 1e-6) {
        return Err(Error::Fit(format!(
            "fit window [{}, {}] spans less than a decade",
            window.0, window.1
        )));
    }
    let power = fit_loglog(&ts, &es)?;
    let logs: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let exponential = fit_line(&ts, &logs)?;
    Ok(DecayFit {
        exponent: -0.5 * power.slope,
        window,
        r2: power.r2,
        exponential_r2: exponential.r2,
        inconclusive: power.r2 < 0.9 || exponential.r2 > power.r2,
    })
}

/// Exponential rate `-d log E / dt` fitted on `[t0, t1]`, with its `r^2`.
pub fn exponential_rate(trace: &EnergyTrace, t0: f64, t1: f64) -> Result<(f64, f64)> {
    let (ts, logs): (Vec<f64>, Vec<f64>) = trace
        .times
        .iter()
        .zip(&trace.energies)
        .filter(|(t, e)| **t >= t0 && **t <= t1 && **e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .unzip();
    let fit = fit_line(&ts, &logs)?;
    Ok((-fit.slope, fit.r2))
}
