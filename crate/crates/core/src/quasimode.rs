//! Quasimodes of the reduced stationary operator
//!
//! ```text
//!     P u = -u'' + i q W u + (4 pi^2 m^2 / b^2 - q^2) u     on (-b, b),
//! ```
//!
//! built from an eigenfunction `v` of the model problem: `u = phi v` on
//! `(0, b)`, extended oddly (Dirichlet) or evenly (Neumann), with
//! `q = 1/h^2 + lambda^2/2` and `m = b / (2 pi h^2)`.
//!
//! The grid is uniform with step `dx = t ds`, `t = h^{2/(beta+2)}`, and has a
//! node at `x = a`, so the right half is sampled exactly on the rescaled
//! half-line grid. On `(0, a)` derivatives are taken analytically; on
//! `(a, b)` a fourth-order compact stencil is used.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::cap::CapSolver;
use crate::eigen::{left_derivative, left_solution, EigenSolution, Scaling};
use crate::error::{Error, Result};
use crate::model::{transverse_index, BoundaryCondition, Cutoff, Damping, DampingProfile};
use crate::numerics::{compact_second_derivative, first_derivative, local_slopes, simpson};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `(q, m)` with `q = 1/h^2 + lambda^2/2`, `m = b / (2 pi h^2)`.
pub fn ansatz_params(eig: &EigenSolution, b: f64) -> Result<(Complex64, u64)> {
    let m = transverse_index(eig.h, b);
    let mr = m.round();
    if mr < 1.0 || (m - mr).abs() > 1e-6 * m {
        return Err(Error::Config(vec![format!(
            "b / (2 pi h^2) = {m} is not an integer; pick h with select_h"
        )]));
    }
    Ok((1.0 / (eig.h * eig.h) + 0.5 * eig.lambda * eig.lambda, mr as u64))
}

/// Leading terms of `q`: `Re q ~ 1/h^2 + pi^2 l^2 h^2 / a^2` and
/// `Im q ~ (2 pi l Im C / a) h^{(2 beta + 6)/(beta + 2)}`.
pub fn ansatz_leading(eig: &EigenSolution) -> Complex64 {
    let h = eig.h;
    let re = 1.0 / (h * h) + (PI * eig.l * h / eig.a).powi(2);
    let im = 2.0 * PI * eig.l * eig.c_h.im / eig.a * h.powf((2.0 * eig.beta + 6.0) / (eig.beta + 2.0));
    Complex64::new(re, im)
}

/// `P u` on a uniform grid with a compact fourth-order `u''`; `kappa` is the
/// constant `4 pi^2 m^2 / b^2 - q^2`.
pub fn apply_reduced(
    u: &[Complex64],
    x0: f64,
    dx: f64,
    q: Complex64,
    kappa: Complex64,
    damping: &dyn Damping,
) -> Vec<Complex64> {
    let d2 = compact_second_derivative(u, dx);
    u.iter()
        .zip(&d2)
        .enumerate()
        .map(|(j, (v, v2))| -v2 + (I * q * damping.value_unchecked(x0 + j as f64 * dx) + kappa) * v)
        .collect()
}

fn l2_sq(f: &[Complex64], dx: f64) -> f64 {
    let w: Vec<f64> = f.iter().map(|z| z.norm_sqr()).collect();
    simpson(&w, dx)
}

/// A sampled quasimode on `[0, b]`; `u(x_j)`, `x_j = j dx`, vanishes for
/// `x_j > b - delta` and beyond the last node.
#[derive(Debug, Clone, Serialize)]
pub struct Quasimode {
    pub beta: f64,
    pub h: f64,
    pub l: f64,
    pub bc: BoundaryCondition,
    pub lambda: Complex64,
    pub q: Complex64,
    pub m: u64,
    pub dx: f64,
    /// Index of the node at `x = a`.
    pub junction: usize,
    /// `phi v` on `[0, b]`.
    #[serde(skip)]
    pub u: Vec<Complex64>,
    /// `v` on `[0, b]` without the cutoff.
    #[serde(skip)]
    pub v: Vec<Complex64>,
    /// `P u` on `[0, b]`.
    #[serde(skip)]
    pub residual_field: Vec<Complex64>,
    /// `||P u|| / ||u||` on `(0, b)`.
    pub residual: f64,
    /// `||u||^2_{(a + sigma, b)} / ||u||^2_{(0, b)}`.
    pub tail: f64,
    /// Relative mismatch of value and slope at `a` between the two halves.
    pub glue_mismatch: f64,
}

impl Quasimode {
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    /// Odd (Dirichlet) or even (Neumann) extension to `[-b, b]`, as `(x, u)`.
    pub fn full_profile(&self) -> Vec<(f64, Complex64)> {
        let sign = match self.bc {
            BoundaryCondition::Dirichlet => -1.0,
            BoundaryCondition::Neumann => 1.0,
        };
        let n = self.u.len();
        let mut out = Vec::with_capacity(2 * n - 1);
        for j in (1..n).rev() {
            out.push((-self.x(j), sign * self.u[j]));
        }
        for j in 0..n {
            out.push((self.x(j), self.u[j]));
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        l2_sq(&self.u, self.dx)
    }

    /// `||v||^2_{(0,b)} / ||phi v||^2_{(0,b)}` and the bound `1 + sigma^beta / (sigma^beta - h^2)`.
    pub fn mass_bound(&self, profile: &DampingProfile) -> (f64, f64) {
        let ratio = l2_sq(&self.v, self.dx) / self.norm_sq();
        let s = profile.sigma.powf(profile.beta);
        (ratio, 1.0 + s / (s - self.h * self.h))
    }

    /// `int (x - a)_+^beta |v|^2` against `Im(lambda^2) int |v|^2`, and their relative gap.
    pub fn energy_identity(&self, profile: &DampingProfile) -> (f64, f64, f64) {
        // Integrate from the junction so a jump of the weight at `a` sits on the boundary.
        let weighted: Vec<f64> = self.v[self.junction..]
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let w = if profile.beta == 0.0 { 1.0 } else { profile.power_part(profile.a + k as f64 * self.dx) };
                w * z.norm_sqr()
            })
            .collect();
        let lhs = simpson(&weighted, self.dx);
        let rhs = (self.lambda * self.lambda).im * l2_sq(&self.v, self.dx);
        (lhs, rhs, (lhs - rhs).abs() / rhs.abs().max(lhs.abs()))
    }

    /// Residual of the separated 2D field `u(x) sin(2 pi m y / b)` on a
    /// coarse tensor grid over `(0, b) x (0, b)`, relative to the field,
    /// next to the 1D value on the same coarse `x` nodes.
    pub fn lift_2d_check(&self, x_stride: usize, points_per_period: usize) -> (f64, f64) {
        let b = 2.0 * PI * self.h * self.h * self.m as f64;
        let k = 2.0 * PI * self.m as f64 / b;
        let ny = self.m as usize * points_per_period.max(4);
        let dy = b / ny as f64;
        let dxc = self.dx * x_stride.max(1) as f64;
        let (mut num, mut den, mut num1, mut den1) = (0.0, 0.0, 0.0, 0.0);
        // Trapezoid in y over whole periods, rectangle rule on the coarse x nodes.
        for j in (0..self.u.len()).step_by(x_stride.max(1)) {
            let r = self.residual_field[j];
            let u = self.u[j];
            for i in 0..ny {
                let s = (k * i as f64 * dy).sin();
                num += (r * s).norm_sqr() * dy * dxc;
                den += (u * s).norm_sqr() * dy * dxc;
            }
            num1 += r.norm_sqr() * dxc;
            den1 += u.norm_sqr() * dxc;
        }
        ((num / den).sqrt(), (num1 / den1).sqrt())
    }

    /// Central difference of the extended profile at `x = 0`, relative to `max |u| / dx`.
    pub fn slope_at_origin(&self) -> f64 {
        let full = self.full_profile();
        let c = self.u.len() - 1;
        let d = (full[c + 1].1 - full[c - 1].1) / (2.0 * self.dx);
        let peak = self.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        d.norm() * self.dx / peak
    }
}

/// Builds quasimodes for a fixed geometry.
#[derive(Debug, Clone)]
pub struct QuasimodeBuilder {
    pub profile: DampingProfile,
    pub cutoff: Cutoff,
    /// Grid step in the rescaled variable `(x - a) / t`.
    pub step: f64,
    pub points_per_period: f64,
}

impl QuasimodeBuilder {
    pub fn new(profile: DampingProfile, cutoff: Cutoff, step: f64) -> Self {
        Self {
            profile,
            cutoff,
            step,
            points_per_period: 20.0,
        }
    }

    /// Glue `v_l` and `B F((x - a)/t)`, apply the cutoff, and evaluate the residual.
    pub fn glue_and_extend(&self, eig: &EigenSolution, cap: &CapSolver) -> Result<Quasimode> {
        let p = &self.profile;
        if (eig.beta - p.beta).abs() > 1e-12 || (eig.a - p.a).abs() > 1e-12 {
            return Err(Error::Precondition("eigenvalue computed for another profile".into()));
        }
        let threshold = p.sigma.powf(p.beta / 2.0);
        if !(eig.h < threshold) {
            return Err(Error::Precondition(format!(
                "h = {} must be below sigma^(beta/2) = {threshold}",
                eig.h
            )));
        }
        let (q, m) = ansatz_params(eig, p.b)?;
        let h = eig.h;
        let t = Scaling { beta: p.beta }.layer(h);
        let n_a = (p.a / (t * self.step)).ceil() as usize;
        let dx = p.a / n_a as f64;
        // One local period of exp(i lambda x / h) and the layer width t must both be resolved.
        let period = 2.0 * PI * h / eig.lambda.norm();
        let needed = period.min(t) / self.points_per_period;
        if dx > needed {
            return Err(Error::Resolution(format!(
                "dx = {dx:.3e} exceeds {needed:.3e} (20 points per period / layer)"
            )));
        }
        let n = (p.b / dx).floor() as usize;
        if n < n_a + 8 {
            return Err(Error::Resolution("too few nodes beyond x = a".into()));
        }
        let ds = dx / t;
        let right_len = n - n_a;
        // Solve on at least the solver's own truncation length, then keep what the grid needs.
        let solve_len = right_len.max((cap.length / ds).ceil() as usize);
        let right = cap.solve_on(eig.eta, solve_len as f64 * ds, solve_len)?;

        let lam = eig.lambda;
        let mut v = Vec::with_capacity(n + 1);
        for j in 0..=n_a {
            v.push(left_solution(lam, h, p.a, j as f64 * dx, eig.bc));
        }
        let b_glue = v[n_a] / right.f0;
        for k in 1..=right_len {
            v.push(b_glue * right.samples[k]);
        }
        let u: Vec<Complex64> = v
            .iter()
            .enumerate()
            .map(|(j, z)| self.cutoff.value(j as f64 * dx) * z)
            .collect();

        let glue_value = (v[n_a] - b_glue * right.f0).norm();
        let dleft = left_derivative(lam, h, p.a, p.a, eig.bc);
        let dright = b_glue * first_derivative(&right.samples[..6], ds)[0] / t;
        let scale = v[n_a].norm().max(dleft.norm());
        let glue_mismatch = glue_value.max((dleft - dright).norm()) / scale;

        // kappa = 1/h^4 - q^2 exactly, since m = b/(2 pi h^2).
        let kappa = -lam * lam / (h * h) - lam.powi(4) / 4.0;
        let k2 = (lam / h) * (lam / h);
        let mut residual_field = Vec::with_capacity(n + 1);
        for (j, uj) in u.iter().enumerate().take(n_a + 1) {
            let x = j as f64 * dx;
            // phi = 1 and W = 0 on (0, a); v_l'' = -(lambda/h)^2 v_l.
            let d2 = -k2 * left_solution(lam, h, p.a, x, eig.bc);
            residual_field.push(-d2 + kappa * uj);
        }
        // At x = a the one-sided closure would straddle the jump of W'' (or W for beta = 0).
        let right_field = apply_reduced(&u[n_a..], p.a, dx, q, kappa, &self.profile);
        residual_field.extend(&right_field[1..]);

        let norm = l2_sq(&u, dx);
        let residual = (l2_sq(&residual_field, dx) / norm).sqrt();
        let start = ((p.a + p.sigma) / dx).ceil() as usize;
        let tail = if start + 4 < u.len() {
            let frac = start as f64 * dx - (p.a + p.sigma);
            let piece = frac * u[start].norm_sqr();
            (l2_sq(&u[start..], dx) + piece) / norm
        } else {
            0.0
        };
        Ok(Quasimode {
            beta: p.beta,
            h,
            l: eig.l,
            bc: eig.bc,
            lambda: lam,
            q,
            m,
            dx,
            junction: n_a,
            u,
            v,
            residual_field,
            residual,
            tail,
            glue_mismatch,
        })
    }
}

/// `||P u|| / ||u||` for a stored quasimode.
pub fn residual_norm(qm: &Quasimode) -> f64 {
    qm.residual
}

/// `||u||^2` on `(a + sigma, b)` relative to `(0, b)`.
pub fn tail_mass(qm: &Quasimode) -> f64 {
    qm.tail
}

/// One CSV row of a quasimode sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasimodeRow {
    pub h: f64,
    pub m: u64,
    pub re_q: f64,
    pub im_q: f64,
    pub residual: f64,
    pub tail: f64,
    /// Log-log slope of the residual against `Re q` over the window ending here.
    pub residual_slope: Option<f64>,
    /// Log-log slope of `|Im q|` against `Re q` over the window ending here.
    pub im_q_slope: Option<f64>,
}

/// Rows ordered by increasing `Re q`, with trailing-window slopes.
pub fn sweep_rows(modes: &[Quasimode]) -> Vec<QuasimodeRow> {
    let mut sorted: Vec<&Quasimode> = modes.iter().collect();
    sorted.sort_by(|a, b| a.q.re.total_cmp(&b.q.re));
    let re: Vec<f64> = sorted.iter().map(|m| m.q.re).collect();
    let res: Vec<f64> = sorted.iter().map(|m| m.residual).collect();
    let im: Vec<f64> = sorted.iter().map(|m| m.q.im.abs()).collect();
    let rs = local_slopes(&re, &res);
    let is = local_slopes(&re, &im);
    sorted
        .iter()
        .enumerate()
        .map(|(k, m)| QuasimodeRow {
            h: m.h,
            m: m.m,
            re_q: m.q.re,
            im_q: m.q.im,
            residual: m.residual,
            tail: m.tail,
            residual_slope: k.checked_sub(1).map(|i| rs[i]),
            im_q_slope: k.checked_sub(1).map(|i| is[i]),
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[QuasimodeRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "m", "re_q", "im_q", "residual", "tail_mass", "residual_slope", "im_q_slope"])?;
    let opt = |v: Option<f64>| v.map(|s| s.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record(&[
            r.h.to_string(),
            r.m.to_string(),
            r.re_q.to_string(),
            r.im_q.to_string(),
            r.residual.to_string(),
            r.tail.to_string(),
            opt(r.residual_slope),
            opt(r.im_q_slope),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(x, Re u, Im u)` on `[-b, b]`.
pub fn write_profile_csv<W: Write>(out: W, qm: &Quasimode, stride: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "re_u", "im_u"])?;
    for (x, z) in qm.full_profile().into_iter().step_by(stride.max(1)) {
        w.write_record(&[x.to_string(), z.re.to_string(), z.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::EigenProblem;
    use crate::model::{select_h, Join, UniformDamping};

    fn setup(beta: f64, bc: BoundaryCondition, m: u64) -> (QuasimodeBuilder, CapSolver, EigenSolution) {
        let profile = DampingProfile::new(beta, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        let cutoff = Cutoff::new(&profile, 0.1).unwrap();
        let cap = CapSolver::new(beta, None, 4000).unwrap();
        let l = if bc == BoundaryCondition::Dirichlet { 1.0 } else { 0.5 };
        let p = EigenProblem::new(cap.clone(), 1.0, l, bc).unwrap();
        let eig = p.find(select_h(m, 2.0).unwrap()).unwrap();
        (QuasimodeBuilder::new(profile, cutoff, 5e-3), cap, eig)
    }

    #[test]
    fn exact_eigenfunction_has_small_residual() {
        // W = 0, u = sin(pi k x / b') on (0, b') with b' the half-length.
        let (len, k, m) = (2.0, 3.0, 5.0);
        let n = 4000;
        let dx = len / n as f64;
        let u: Vec<Complex64> = (0..=n)
            .map(|j| Complex64::new((PI * k * j as f64 * dx / len).sin(), 0.0))
            .collect();
        let q = ((PI * k / len).powi(2) + (2.0 * PI * m / len).powi(2)).sqrt();
        let kappa = Complex64::new((2.0 * PI * m / len).powi(2) - q * q, 0.0);
        let w = UniformDamping { level: 0.0, b: len };
        let r = apply_reduced(&u, 0.0, dx, Complex64::new(q, 0.0), kappa, &w);
        let rel = (l2_sq(&r, dx) / l2_sq(&u, dx)).sqrt();
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn ansatz_synthetic_real() {
        let (_, _, mut eig) = setup(1.0, BoundaryCondition::Dirichlet, 200);
        eig.lambda = Complex64::new(0.0, 0.0);
        let (q, m) = ansatz_params(&eig, 2.0).unwrap();
        assert_eq!(m, 200);
        assert_eq!(q, Complex64::new(1.0 / (eig.h * eig.h), 0.0));
        eig.h *= 1.01;
        assert!(ansatz_params(&eig, 2.0).is_err());
    }

    #[test]
    fn dirichlet_mode_is_glued_and_odd() {
        let (builder, cap, eig) = setup(1.0, BoundaryCondition::Dirichlet, 3200);
        let qm = builder.glue_and_extend(&eig, &cap).unwrap();
        assert!(qm.glue_mismatch < 1e-8, "{}", qm.glue_mismatch);
        assert!(qm.u[0].norm() < 1e-14);
        assert_eq!(*qm.u.last().unwrap(), Complex64::new(0.0, 0.0));
        let full = qm.full_profile();
        let n = full.len();
        for i in 0..n / 2 {
            assert_eq!(full[i].1, -full[n - 1 - i].1);
        }
        assert!(qm.residual.is_finite() && qm.residual < 1e-5, "{}", qm.residual);
        let (ratio, bound) = qm.mass_bound(&builder.profile);
        assert!(ratio <= bound);
        let (_, _, gap) = qm.energy_identity(&builder.profile);
        assert!(gap < 1e-7, "{gap}");
        let (two_d, one_d) = qm.lift_2d_check(16, 8);
        assert!((two_d - one_d).abs() < 1e-10 * one_d.max(1e-300), "{two_d} vs {one_d}");
    }

    #[test]
    fn neumann_mode_is_even() {
        let (builder, cap, eig) = setup(1.0, BoundaryCondition::Neumann, 200);
        let qm = builder.glue_and_extend(&eig, &cap).unwrap();
        assert!(qm.slope_at_origin() < 1e-14);
        // One-sided fourth-order slope at 0 vanishes to grid order as well.
        let d = first_derivative(&qm.u[..40], qm.dx)[0];
        assert!(d.norm() * qm.dx < 1e-9, "{d}");
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        let (mut builder, cap, eig) = setup(1.0, BoundaryCondition::Dirichlet, 200);
        builder.step = 0.2;
        assert!(matches!(builder.glue_and_extend(&eig, &cap), Err(Error::Resolution(_))));
    }
}
