//! End-to-end measurements built from the solver modules. Each function
//! returns raw measurements; pass/fail thresholds are applied by callers.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::cap::{default_length, neumann_ground_default, solve_f, CapSolver};
use crate::eigen::{EigenProblem, EigenSolution};
use crate::error::{Error, Result};
use crate::model::{select_h, BoundaryCondition, Cutoff, DampingProfile, Join, RunConfig, UniformDamping};
use crate::numerics::{fit_loglog, geomspace, local_slopes, LineFit};
use crate::quasimode::{ansatz_params, sweep_rows, Quasimode, QuasimodeBuilder, QuasimodeRow};
use crate::resolvent::{self, RateFit, ScanOptions};
use crate::wave::{self, DecayFit, EnergyTrace, StepOptions, WaveState};

/// Strip, damping and cutoff widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    pub a: f64,
    pub sigma: f64,
    pub b: f64,
    pub delta: f64,
}

impl Geometry {
    pub fn of(cfg: &RunConfig) -> Self {
        Self {
            a: cfg.a,
            sigma: cfg.sigma,
            b: cfg.b,
            delta: cfg.delta,
        }
    }

    pub fn profile(&self, beta: f64) -> Result<DampingProfile> {
        DampingProfile::new(beta, self.a, self.sigma, self.b, Join::ConstantLevel)
    }

    pub fn cutoff(&self, beta: f64) -> Result<Cutoff> {
        Cutoff::new(&self.profile(beta)?, self.delta)
    }
}

/// `e^{-i pi/6} Ai(0) / Ai'(0)`, the half-line value at `beta = 1`, `eta = 0`.
pub fn airy_f0() -> Complex64 {
    let ai0 = 1.0 / (3f64.powf(2.0 / 3.0) * gamma(2.0 / 3.0));
    let dai0 = -1.0 / (3f64.powf(1.0 / 3.0) * gamma(1.0 / 3.0));
    Complex64::from_polar(1.0, -PI / 6.0) * (ai0 / dai0)
}

/// `-a'_1`, minus the first zero of `Ai'`: the lowest Neumann level of
/// `-d^2/dx^2 + x` on the half-line. Maclaurin series of `Ai` and bisection.
pub fn airy_neumann_level() -> f64 {
    let mut c = [0.0f64; 80];
    c[0] = 1.0 / (3f64.powf(2.0 / 3.0) * gamma(2.0 / 3.0));
    c[1] = -1.0 / (3f64.powf(1.0 / 3.0) * gamma(1.0 / 3.0));
    for n in 3..c.len() {
        c[n] = c[n - 3] / (n * (n - 1)) as f64;
    }
    let dai = |x: f64| c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, ck)| acc * x + k as f64 * ck);
    let (mut lo, mut hi) = (0.8, 1.2);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if dai(-lo).signum() == dai(-mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapMeasurement {
    pub f0: Complex64,
    pub seconds: f64,
}

/// `F(0)` for `beta = 1`, `eta = 0` on the default truncation.
pub fn cap_airy(n: usize) -> Result<CapMeasurement> {
    let start = Instant::now();
    let ground = neumann_ground_default(1.0)?;
    let sol = solve_f(Complex64::new(0.0, 0.0), 1.0, default_length(1.0, ground.lambda_tilde_1), n)?;
    Ok(CapMeasurement {
        f0: sol.f0,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Eigenvalue family for one `beta` over a range of `h` below `h0`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenScaling {
    pub beta: f64,
    pub h0: f64,
    pub solutions: Vec<EigenSolution>,
    /// Fit of `|lambda_h - pi l h / a|` against `h`.
    pub fit: LineFit,
    pub c_max: f64,
    pub c_bound: f64,
    pub seconds: f64,
}

/// Admissibility threshold of `problem` on a fine logarithmic grid.
pub fn admissible_h0(problem: &EigenProblem) -> Result<f64> {
    problem
        .admissible_h0(&geomspace(1e-5, 1.0, 500))
        .ok_or_else(|| Error::Domain("no admissible h on [1e-5, 1]".into()))
}

/// Sweep `h` over `[h0 10^-3.5, h0 10^-1.5]` (12 points) unless `hs` is given.
pub fn eigen_scaling(
    beta: f64,
    a: f64,
    l: f64,
    bc: BoundaryCondition,
    cap_points: usize,
    hs: Option<&[f64]>,
) -> Result<EigenScaling> {
    let start = Instant::now();
    let problem = EigenProblem::new(CapSolver::new(beta, None, cap_points)?, a, l, bc)?;
    let h0 = admissible_h0(&problem)?;
    let hs = match hs {
        Some(h) => h.to_vec(),
        None => geomspace(h0 * 10f64.powf(-3.5), h0 * 10f64.powf(-1.5), 12),
    };
    let solutions = problem.sweep(&hs)?;
    let dev: Vec<f64> = solutions.iter().map(|s| (s.lambda - PI * l * s.h / a).norm()).collect();
    let fit = fit_loglog(&hs, &dev)?;
    Ok(EigenScaling {
        beta,
        h0,
        c_max: solutions.iter().map(|s| s.c_h.norm()).fold(0.0, f64::max),
        c_bound: problem.c_bound(),
        solutions,
        fit,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Quasimodes for every `m` in the configuration.
#[derive(Debug, Clone, Serialize)]
pub struct QuasimodeSweep {
    pub beta: f64,
    #[serde(skip)]
    pub modes: Vec<Quasimode>,
    pub rows: Vec<QuasimodeRow>,
    /// Fit of the relative residual against `Re q`.
    pub residual_fit: LineFit,
    pub residual_local: Vec<f64>,
    pub seconds: f64,
}

pub fn quasimode_sweep(cfg: &RunConfig) -> Result<QuasimodeSweep> {
    let start = Instant::now();
    let profile = cfg.profile()?;
    let cap = CapSolver::new(cfg.beta, cfg.grid.cap_length, cfg.grid.cap_points)?;
    let problem = EigenProblem::new(cap.clone(), cfg.a, cfg.l, cfg.bc)?
        .with_tolerances(cfg.tolerances.newton, cfg.tolerances.glue);
    let hs = cfg.h_values()?;
    let eigs = problem.sweep(&hs)?;
    let builder = QuasimodeBuilder::new(profile, cfg.cutoff()?, cfg.grid.quasimode_step);
    let mut modes: Vec<Quasimode> = eigs
        .iter()
        .map(|e| builder.glue_and_extend(e, &cap))
        .collect::<Result<_>>()?;
    modes.sort_by(|x, y| x.q.re.total_cmp(&y.q.re));
    let re: Vec<f64> = modes.iter().map(|m| m.q.re).collect();
    let res: Vec<f64> = modes.iter().map(|m| m.residual).collect();
    Ok(QuasimodeSweep {
        beta: cfg.beta,
        rows: sweep_rows(&modes),
        residual_fit: fit_loglog(&re, &res)?,
        residual_local: local_slopes(&re, &res),
        modes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `Im q` against `Re q` from the eigenvalues alone.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyPlacement {
    pub beta: f64,
    pub m: Vec<u64>,
    pub q: Vec<Complex64>,
    pub fit: LineFit,
    pub local: Vec<f64>,
}

pub fn frequency_placement(
    beta: f64,
    a: f64,
    b: f64,
    l: f64,
    bc: BoundaryCondition,
    m_list: &[u64],
    cap_points: usize,
) -> Result<FrequencyPlacement> {
    let problem = EigenProblem::new(CapSolver::new(beta, None, cap_points)?, a, l, bc)?;
    let hs: Vec<f64> = m_list.iter().map(|&m| select_h(m, b)).collect::<Result<_>>()?;
    let eigs = problem.sweep(&hs)?;
    let q: Vec<Complex64> = eigs.iter().map(|e| ansatz_params(e, b).map(|p| p.0)).collect::<Result<_>>()?;
    let re: Vec<f64> = q.iter().map(|z| z.re).collect();
    let im: Vec<f64> = q.iter().map(|z| z.im.abs()).collect();
    Ok(FrequencyPlacement {
        beta,
        m: m_list.to_vec(),
        fit: fit_loglog(&re, &im)?,
        local: local_slopes(&re, &im),
        q,
    })
}

/// Frequency placement over `h` in `[h0 10^-4, h0 10^-2]` (10 points), with
/// `h0` the admissibility threshold.
pub fn frequency_placement_default(
    beta: f64,
    a: f64,
    b: f64,
    l: f64,
    bc: BoundaryCondition,
    cap_points: usize,
) -> Result<FrequencyPlacement> {
    let problem = EigenProblem::new(CapSolver::new(beta, None, cap_points)?, a, l, bc)?;
    let h0 = admissible_h0(&problem)?;
    let ms = m_for_h_range(b, h0 * 1e-4, h0 * 1e-2, 10);
    frequency_placement(beta, a, b, l, bc, &ms, cap_points)
}

/// `m` values whose `h = sqrt(b / 2 pi m)` are spread geometrically over `[h_lo, h_hi]`.
pub fn m_for_h_range(b: f64, h_lo: f64, h_hi: f64, count: usize) -> Vec<u64> {
    let mut ms: Vec<u64> = geomspace(h_lo, h_hi, count)
        .into_iter()
        .map(|h| (b / (2.0 * PI * h * h)).round().max(1.0) as u64)
        .collect();
    ms.sort_unstable();
    ms.dedup();
    ms
}

/// Tail mass and mass bound over an `h` sweep.
#[derive(Debug, Clone, Serialize)]
pub struct TailDecay {
    pub h: Vec<f64>,
    pub tail: Vec<f64>,
    /// Local slopes of `log tail` against `log h`, ordered by decreasing `h`.
    pub local: Vec<f64>,
    pub mass_ratio: Vec<f64>,
    pub mass_bound: Vec<f64>,
}

pub fn tail_decay(cfg: &RunConfig) -> Result<TailDecay> {
    let sweep = quasimode_sweep(cfg)?;
    let profile = cfg.profile()?;
    // Decreasing h.
    let h: Vec<f64> = sweep.modes.iter().map(|m| m.h).collect();
    let tail: Vec<f64> = sweep.modes.iter().map(|m| m.tail).collect();
    let (mass_ratio, mass_bound) = sweep.modes.iter().map(|m| m.mass_bound(&profile)).unzip();
    Ok(TailDecay {
        local: local_slopes(&h, &tail),
        h,
        tail,
        mass_ratio,
        mass_bound,
    })
}

/// Real-axis scan with the configured frequency grid.
pub fn resolvent_scan(cfg: &RunConfig) -> Result<RateFit> {
    let opts = ScanOptions {
        n_min: cfg.grid.resolvent_points,
        m_window: cfg.resolvent.m_window,
        ..ScanOptions::default()
    };
    let qs = geomspace(cfg.resolvent.q_min, cfg.resolvent.q_max, cfg.resolvent.q_count);
    resolvent::scan_and_fit(&qs, &cfg.profile()?, cfg.a, &opts)
}

/// Relative errors of the undamped norm against `1 / dist(E, spectrum)` on
/// `n` and `2n` intervals.
pub fn undamped_control(b: f64, m: u64, n: usize) -> Result<(f64, f64)> {
    let w = UniformDamping { level: 0.0, b };
    let km = 2.0 * PI * m as f64 / b;
    // Shift midway between the 3rd and 4th Dirichlet levels of (-b, b).
    let e = 0.5 * ((3.0 * PI / (2.0 * b)).powi(2) + (4.0 * PI / (2.0 * b)).powi(2));
    let q = (e + km * km).sqrt();
    let exact = resolvent::undamped_norm(q, m, b);
    let coarse = resolvent::resolvent_norm_at_shift(m, e, &w, n)?.norm;
    let fine = resolvent::resolvent_norm_at_shift(m, e, &w, 2 * n)?.norm;
    Ok(((coarse - exact).abs() / exact, (fine - exact).abs() / exact))
}

/// Energy decay of quasimode data against `2 Im q`.
#[derive(Debug, Clone, Serialize)]
pub struct QuasimodeDecay {
    pub beta: f64,
    pub h: f64,
    pub q: Complex64,
    pub measured_rate: f64,
    pub expected_rate: f64,
    pub r2: f64,
    pub trace: EnergyTrace,
}

impl QuasimodeDecay {
    pub fn relative_error(&self) -> f64 {
        (self.measured_rate - self.expected_rate).abs() / self.expected_rate
    }
}

/// Evolves `(u~, i q u~)` with `dt = phase / Re q` until the energy has
/// dropped by a factor `e^{-fraction}` at the quasimode's rate.
pub fn quasimode_decay(
    beta: f64,
    geometry: Geometry,
    h_target: f64,
    n: usize,
    phase: f64,
    fraction: f64,
) -> Result<QuasimodeDecay> {
    let profile = geometry.profile(beta)?;
    let cap = CapSolver::new(beta, None, 8000)?;
    let problem = EigenProblem::new(cap.clone(), geometry.a, 1.0, BoundaryCondition::Dirichlet)?;
    let m = (geometry.b / (2.0 * PI * h_target * h_target)).round().max(1.0) as u64;
    let eig = problem.find(select_h(m, geometry.b)?)?;
    let qm = QuasimodeBuilder::new(profile.clone(), geometry.cutoff(beta)?, 5e-3).glue_and_extend(&eig, &cap)?;
    let mut state = WaveState::from_quasimode(&qm, geometry.b, n)?;
    let horizon = fraction / (2.0 * qm.q.im);
    let trace = wave::evolve(&mut state, &profile, StepOptions::new(phase / qm.q.re, horizon, 20))?;
    let (rate, r2) = wave::exponential_rate(&trace, 0.0, horizon)?;
    Ok(QuasimodeDecay {
        beta,
        h: qm.h,
        q: qm.q,
        measured_rate: rate,
        expected_rate: 2.0 * qm.q.im,
        r2,
        trace,
    })
}

/// Quasimode decay for the first `count` entries of `m_list` (ascending)
/// whose eigenvalue branch exists; returns the runs and the skipped `m`.
pub fn decay_on_branch(
    beta: f64,
    geometry: Geometry,
    m_list: &[u64],
    n: usize,
    phase: f64,
    fraction: f64,
    count: usize,
) -> Result<(Vec<QuasimodeDecay>, Vec<u64>)> {
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for m in ms {
        if runs.len() == count {
            break;
        }
        match quasimode_decay(beta, geometry, select_h(m, geometry.b)?, n, phase, fraction) {
            Ok(d) => runs.push(d),
            Err(Error::NewtonDivergence { .. } | Error::Inadmissible { .. }) => skipped.push(m),
            Err(e) => return Err(e),
        }
    }
    if runs.is_empty() {
        return Err(Error::Domain("no configured m has an eigenvalue on the branch".into()));
    }
    Ok((runs, skipped))
}

/// Decay of superposed quasimodes plus a strip bump.
#[derive(Debug, Clone, Serialize)]
pub struct MultimodeDecay {
    pub beta: f64,
    pub h: Vec<f64>,
    pub fit: DecayFit,
    /// `[(beta + 2)/(beta + 4) - 0.15, (beta + 2)/(beta + 3) + 0.15]`.
    pub band: (f64, f64),
    pub trace: EnergyTrace,
}

impl MultimodeDecay {
    pub fn in_band(&self) -> bool {
        !self.fit.inconclusive && self.fit.exponent >= self.band.0 && self.fit.exponent <= self.band.1
    }
}

/// Quasimodes at `hs` and a bump on the undamped strip, each normalized to
/// unit `H^2 x H^1` norm, evolved to `horizon` with `dt = phase / frequency`
/// per mode, resampled on `samples` common times and fitted.
pub fn multimode_decay(
    beta: f64,
    geometry: Geometry,
    hs: &[f64],
    n: usize,
    phase: f64,
    horizon: f64,
    samples: usize,
) -> Result<MultimodeDecay> {
    let profile = geometry.profile(beta)?;
    let cap = CapSolver::new(beta, None, 8000)?;
    let problem = EigenProblem::new(cap.clone(), geometry.a, 1.0, BoundaryCondition::Dirichlet)?;
    let builder = QuasimodeBuilder::new(profile.clone(), geometry.cutoff(beta)?, 5e-3);
    let mut states = Vec::with_capacity(hs.len() + 1);
    let mut used = Vec::with_capacity(hs.len());
    for &h in hs {
        let m = (geometry.b / (2.0 * PI * h * h)).round().max(1.0) as u64;
        let eig = problem.find(select_h(m, geometry.b)?)?;
        used.push(eig.h);
        states.push(WaveState::from_quasimode(&builder.glue_and_extend(&eig, &cap)?, geometry.b, n)?);
    }
    let m_low = states.iter().map(|s| s.m).min().unwrap_or(1);
    states.push(WaveState::from_fn(
        n,
        geometry.b,
        m_low,
        |x| Complex64::new(strip_bump(x, geometry.a), 0.0),
        |_| Complex64::new(0.0, 0.0),
    )?);
    for s in &mut states {
        let norm = s.data_norm_sq().sqrt();
        s.scale(1.0 / norm);
    }
    let grid: Vec<f64> = (0..=samples).map(|k| horizon * k as f64 / samples as f64).collect();
    let traces: Vec<EnergyTrace> = states
        .into_par_iter()
        .map(|mut s| {
            // A whole number of steps, so the last sample lands on the horizon.
            let steps = (horizon * s.dominant_frequency() / phase).ceil();
            let dt = horizon / steps;
            let stride = ((steps / (4 * samples) as f64).floor() as usize).max(1);
            wave::evolve(&mut s, &profile, StepOptions::new(dt, horizon, stride))?.resample(&grid)
        })
        .collect::<Result<_>>()?;
    let trace = EnergyTrace::superpose(&traces)?;
    Ok(MultimodeDecay {
        beta,
        h: used,
        fit: wave::fit_decay(&trace)?,
        band: ((beta + 2.0) / (beta + 4.0) - 0.15, (beta + 2.0) / (beta + 3.0) + 0.15),
        trace,
    })
}

fn strip_bump(x: f64, a: f64) -> f64 {
    let s = x / (0.6 * a);
    if s.abs() < 1.0 {
        (1.0 - s * s).powi(4)
    } else {
        0.0
    }
}

/// Largest relative energy drift of an undamped run.
pub fn undamped_drift(b: f64, n: usize, m: u64, dt: f64, horizon: f64) -> Result<f64> {
    let w = UniformDamping { level: 0.0, b };
    let mut s = WaveState::from_fn(n, b, m, |x| Complex64::new(strip_bump(x, 0.5 * b), 0.0), |_| Complex64::new(0.0, 0.0))?;
    let trace = wave::evolve(&mut s, &w, StepOptions::new(dt, horizon, 10))?;
    let e0 = trace.energies[0];
    Ok(trace.energies.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max))
}

/// Exponential fit of `log E` for uniform damping `level`: `(rate, r^2)`.
pub fn gcc_control(b: f64, level: f64, n: usize, m: u64, dt: f64, horizon: f64) -> Result<(f64, f64, EnergyTrace)> {
    let w = UniformDamping { level, b };
    let mut s = WaveState::from_fn(n, b, m, |x| Complex64::new(strip_bump(x, 0.5 * b), 0.0), |_| Complex64::new(0.0, 0.0))?;
    let trace = wave::evolve(&mut s, &w, StepOptions::new(dt, horizon, 10))?;
    let (rate, r2) = wave::exponential_rate(&trace, 0.0, horizon)?;
    Ok((rate, r2, trace))
}

/// One Newton-vs-secant comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    pub beta: f64,
    pub l: f64,
    pub bc: BoundaryCondition,
    pub h: f64,
    pub mu_newton: Complex64,
    pub mu_secant: Complex64,
}

impl CrossCheck {
    pub fn difference(&self) -> f64 {
        (self.mu_newton - self.mu_secant).norm()
    }
}

/// `count` random `(beta, l, h)` with `beta` in `[0, 2.5]`, `l` in
/// `{1, 2}` (Dirichlet) or `{1/2, 3/2}` (Neumann), and `h` log-uniform in
/// `[10^-3, 0.2] h0`. Triples whose branch leaves `|mu| < 1` are redrawn.
pub fn cross_validate(seed: u64, count: usize, cap_points: usize) -> Result<Vec<CrossCheck>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 20 * count {
            return Err(Error::Domain("could not draw admissible triples".into()));
        }
        let beta = rng.random_range(0.0..2.5);
        let bc = if rng.random_bool(0.5) { BoundaryCondition::Dirichlet } else { BoundaryCondition::Neumann };
        let l = match bc {
            BoundaryCondition::Dirichlet => rng.random_range(1..=2) as f64,
            BoundaryCondition::Neumann => rng.random_range(0..=1) as f64 + 0.5,
        };
        let problem = EigenProblem::new(CapSolver::new(beta, None, cap_points)?, 1.0, l, bc)?;
        let h0 = admissible_h0(&problem)?;
        let h = h0 * 10f64.powf(rng.random_range(-3.0..(0.2f64).log10()));
        let Ok((mu_newton, _, _)) = problem.newton(h, Complex64::new(0.0, 0.0)) else {
            continue;
        };
        let x0 = problem.lambda(Complex64::new(0.0, 0.0), h);
        let x1 = problem.lambda(Complex64::new(0.05, 0.05), h);
        let (root, _) = problem.secant_root(h, x0, x1)?;
        out.push(CrossCheck {
            beta,
            l,
            bc,
            h,
            mu_newton,
            mu_secant: problem.mu_of_lambda(root, h),
        });
    }
    Ok(out)
}
