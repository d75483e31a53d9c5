//! Half-line complex absorbing potential problem
//!
//! ```text
//!     -F'' + i x^beta F - eta F = 0   on (0, inf),   F'(0) = 1,
//! ```
//!
//! truncated to `[0, L]` with the outgoing (decaying) WKB impedance
//! `F'(L) + theta F(L) = 0`, `theta = sqrt(i L^beta - eta)`, `Re theta > 0`.
//! The primary route is a tridiagonal second-order discretization solved at
//! `n` and `2n` intervals and Richardson-extrapolated to fourth order; an
//! independent backward RK4 shooting route is kept for cross-checks.
//!
//! Also hosts the Neumann ground level `lambda_1` of `-d^2/dx^2 + x^beta`,
//! which fixes the admissible disk `|eta| <= lambda_1 / 2`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::lowest_eigenvalue;
use crate::numerics::{compact_second_derivative, first_derivative, simpson};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn potential(x: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        1.0
    } else {
        x.powf(beta)
    }
}

/// Lowest Neumann level of `-d^2/dx^2 + x^beta` on the half-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeumannSpectrumResult {
    pub beta: f64,
    pub lambda_tilde_1: f64,
    pub length: f64,
    pub points: usize,
    /// True for `beta = 0`, where the value is the bottom of the essential
    /// spectrum of `-d^2/dx^2 + 1` rather than an eigenvalue.
    pub essential: bool,
}

impl NeumannSpectrumResult {
    /// Radius of the admissible disk for the spectral parameter.
    pub fn admissible_radius(&self) -> f64 {
        0.5 * self.lambda_tilde_1
    }

    /// Rayleigh quotient `(|u'|^2 + |x^{beta/2} u|^2) / |u|^2` of uniform
    /// samples on `[0, (len - 1) dx]`; never below `lambda_tilde_1`.
    pub fn rayleigh_quotient(&self, u: &[f64], dx: f64) -> f64 {
        let du: Vec<f64> = first_derivative(
            &u.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>(),
            dx,
        )
        .iter()
        .map(|z| z.re * z.re)
        .collect();
        let weighted: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(j, v)| potential(j as f64 * dx, self.beta) * v * v)
            .collect();
        let mass: Vec<f64> = u.iter().map(|v| v * v).collect();
        (simpson(&du, dx) + simpson(&weighted, dx)) / simpson(&mass, dx)
    }
}

fn neumann_level(beta: f64, length: f64, n: usize) -> f64 {
    let dx = length / n as f64;
    let inv = 1.0 / (dx * dx);
    // Unknowns x_0..x_{n-1}; Dirichlet at x_n = L.
    let diag: Vec<f64> = (0..n).map(|j| 2.0 * inv + potential(j as f64 * dx, beta)).collect();
    let mut off = vec![inv * inv; n - 1];
    off[0] = 2.0 * inv * inv;
    lowest_eigenvalue(&diag, &off, 1e-15)
}

/// Smallest Neumann level of `-d^2/dx^2 + x^beta` on `(0, L)` with a
/// Dirichlet wall at `L`, Richardson-extrapolated from `n` and `2n`.
pub fn neumann_ground(beta: f64, length: f64, n: usize) -> Result<NeumannSpectrumResult> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta = {beta} must be >= 0")));
    }
    if beta == 0.0 {
        return Ok(NeumannSpectrumResult {
            beta,
            lambda_tilde_1: 1.0,
            length,
            points: n,
            essential: true,
        });
    }
    if n < 100 || !(length > 0.0) {
        return Err(Error::Domain(format!("need n >= 100 and L > 0 (n = {n}, L = {length})")));
    }
    let coarse = neumann_level(beta, length, n);
    let fine = neumann_level(beta, length, 2 * n);
    let value = (4.0 * fine - coarse) / 3.0;
    if !(value > 0.0) {
        return Err(Error::Discretization(format!(
            "computed Neumann ground level {value} is not positive"
        )));
    }
    Ok(NeumannSpectrumResult {
        beta,
        lambda_tilde_1: value,
        length,
        points: n,
        essential: false,
    })
}

/// Default Neumann computation for a given `beta`.
pub fn neumann_ground_default(beta: f64) -> Result<NeumannSpectrumResult> {
    // Ground state decays like exp(-2/(beta+2) x^{(beta+2)/2}); put the wall
    // where its square is below 1e-16.
    let length = if beta > 0.0 {
        let p = 0.5 * (beta + 2.0);
        (37.0 * p / 2.0).powf(1.0 / p).max(8.0)
    } else {
        40.0
    };
    neumann_ground(beta, length, 6000)
}

pub fn check_eta_admissible(eta: Complex64, ground: &NeumannSpectrumResult) -> bool {
    eta.norm() <= ground.admissible_radius()
}

/// Default truncation length: the larger of `10 lambda_1^{1/beta}` and the
/// point where the WKB envelope `exp(-Re int theta)` drops below `e^{-21}`.
pub fn default_length(beta: f64, lambda_tilde_1: f64) -> f64 {
    if beta == 0.0 {
        return 40.0;
    }
    let p = 0.5 * (beta + 2.0);
    let decay = (21.0 * p / std::f64::consts::FRAC_1_SQRT_2).powf(1.0 / p);
    (10.0 * lambda_tilde_1.powf(1.0 / beta)).max(decay)
}

/// Sampled solution of the half-line problem.
#[derive(Debug, Clone, Serialize)]
pub struct CapSolution {
    pub eta: Complex64,
    pub beta: f64,
    /// `F(j dx)`, `j = 0..=n`.
    #[serde(skip)]
    pub samples: Vec<Complex64>,
    pub dx: f64,
    pub f0: Complex64,
    pub length: f64,
    pub n: usize,
    /// `max |-F'' + (i x^beta - eta) F| / max |F|` with a compact fourth-order `F''`.
    pub residual: f64,
    /// `|F(L)| / max |F|`.
    pub tail_ratio: f64,
    /// `|F'(0) - 1|` measured from the samples.
    pub slope_error: f64,
}

impl CapSolution {
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn derivative(&self) -> Vec<Complex64> {
        first_derivative(&self.samples, self.dx)
    }

    /// `conj(F(0)) + int |F'|^2 + i int x^beta |F|^2 - eta int |F|^2`,
    /// returned with its relative size.
    pub fn energy_identity(&self) -> (Complex64, f64) {
        let d = self.derivative();
        let grad: Vec<f64> = d.iter().map(|z| z.norm_sqr()).collect();
        let weighted: Vec<f64> = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, z)| potential(self.x(j), self.beta) * z.norm_sqr())
            .collect();
        let mass: Vec<f64> = self.samples.iter().map(|z| z.norm_sqr()).collect();
        let g = simpson(&grad, self.dx);
        let w = simpson(&weighted, self.dx);
        let m = simpson(&mass, self.dx);
        let value = self.f0.conj() + g + I * w - self.eta * m;
        let scale = self.f0.norm() + g + w + self.eta.norm() * m;
        (value, value.norm() / scale)
    }

    /// `(x, Re F, Im F)` rows.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re_f", "im_f"])?;
        for (j, z) in self.samples.iter().enumerate().step_by(stride.max(1)) {
            w.write_record(&[self.x(j).to_string(), z.re.to_string(), z.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reusable half-line solver for a fixed `beta`.
#[derive(Debug, Clone)]
pub struct CapSolver {
    pub beta: f64,
    pub length: f64,
    pub n: usize,
    pub spectrum: NeumannSpectrumResult,
    pub tail_tol: f64,
    /// Skip the admissibility test (used by the disk survey and diagnostics).
    pub enforce_admissible: bool,
}

impl CapSolver {
    pub fn new(beta: f64, length: Option<f64>, n: usize) -> Result<Self> {
        let spectrum = neumann_ground_default(beta)?;
        Ok(Self::with_spectrum(beta, length, n, spectrum))
    }

    pub fn with_spectrum(beta: f64, length: Option<f64>, n: usize, spectrum: NeumannSpectrumResult) -> Self {
        let length = length.unwrap_or_else(|| default_length(beta, spectrum.lambda_tilde_1));
        Self {
            beta,
            length,
            n,
            spectrum,
            tail_tol: 1e-8,
            enforce_admissible: true,
        }
    }

    pub fn impedance(&self, eta: Complex64, length: f64) -> Complex64 {
        let z = I * potential(length, self.beta) - eta;
        let t = z.sqrt();
        if t.re < 0.0 {
            -t
        } else {
            t
        }
    }

    fn check(&self, eta: Complex64) -> Result<()> {
        if self.enforce_admissible && !check_eta_admissible(eta, &self.spectrum) {
            return Err(Error::Inadmissible {
                modulus: eta.norm(),
                radius: self.spectrum.admissible_radius(),
            });
        }
        Ok(())
    }

    /// Second-order solve on `n` intervals of `[0, length]`.
    ///
    /// Elimination runs from the impedance end and carries `q_j = p_j - 1`,
    /// where `p_j = F_{j-1} / F_j`, so the diagonal `2 + dx^2 c_j` is never
    /// formed: adding `dx^2 c_j` to 2 would discard about half the digits of
    /// `eta` and make `F(0)` jump by ~1e-9 between neighbouring `eta`.
    fn solve_raw(&self, eta: Complex64, length: f64, n: usize) -> Result<Vec<Complex64>> {
        let dx = length / n as f64;
        let dx2 = dx * dx;
        let eps = |j: usize| dx2 * (I * potential(j as f64 * dx, self.beta) - eta);
        // Ghost points: F'(0) = 1 and F'(L) = -theta F(L); the end rows are halved.
        let mut q = vec![Complex64::new(0.0, 0.0); n + 1];
        q[n] = 0.5 * eps(n) + dx * self.impedance(eta, length);
        for j in (1..n).rev() {
            q[j] = eps(j) + q[j + 1] / (1.0 + q[j + 1]);
        }
        let lead = 0.5 * eps(0) + q[1] / (1.0 + q[1]);
        if let Some(j) = q.iter().position(|z| (1.0 + z).norm() == 0.0 || !z.is_finite()) {
            return Err(Error::Singular(j));
        }
        if lead.norm() == 0.0 {
            return Err(Error::Singular(0));
        }
        let mut f = Vec::with_capacity(n + 1);
        f.push(-dx / lead);
        for j in 1..=n {
            let prev = f[j - 1];
            f.push(prev / (1.0 + q[j]));
        }
        Ok(f)
    }

    /// Fourth-order samples on `n` intervals of `[0, length]`.
    pub fn solve_on(&self, eta: Complex64, length: f64, n: usize) -> Result<CapSolution> {
        self.check(eta)?;
        if n < 16 {
            return Err(Error::Domain(format!("grid too small: n = {n}")));
        }
        let coarse = self.solve_raw(eta, length, n)?;
        let fine = self.solve_raw(eta, length, 2 * n)?;
        let samples: Vec<Complex64> = coarse
            .iter()
            .enumerate()
            .map(|(j, c)| (4.0 * fine[2 * j] - c) / 3.0)
            .collect();
        self.finish(eta, samples, length, n)
    }

    fn finish(&self, eta: Complex64, samples: Vec<Complex64>, length: f64, n: usize) -> Result<CapSolution> {
        let dx = length / n as f64;
        let peak = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tail_ratio = samples[n].norm() / peak;
        if tail_ratio > self.tail_tol {
            return Err(Error::Truncation {
                ratio: tail_ratio,
                tol: self.tail_tol,
            });
        }
        let d2 = compact_second_derivative(&samples, dx);
        let residual = samples
            .iter()
            .zip(&d2)
            .enumerate()
            .map(|(j, (f, f2))| (-f2 + (I * potential(j as f64 * dx, self.beta) - eta) * f).norm())
            .fold(0.0, f64::max)
            / peak;
        let slope_error = (first_derivative(&samples[..6], dx)[0] - 1.0).norm();
        Ok(CapSolution {
            eta,
            beta: self.beta,
            f0: samples[0],
            samples,
            dx,
            length,
            n,
            residual,
            tail_ratio,
            slope_error,
        })
    }

    pub fn solve(&self, eta: Complex64) -> Result<CapSolution> {
        self.solve_on(eta, self.length, self.n)
    }

    /// `F(0, eta)` without keeping the samples.
    pub fn f0(&self, eta: Complex64) -> Result<Complex64> {
        self.check(eta)?;
        let coarse = self.solve_raw(eta, self.length, self.n)?;
        let fine = self.solve_raw(eta, self.length, 2 * self.n)?;
        Ok((4.0 * fine[0] - coarse[0]) / 3.0)
    }

    /// Independent route: classical RK4 from `L` down to 0 with the same
    /// impedance condition, normalized afterwards so that `F'(0) = 1`.
    pub fn shoot(&self, eta: Complex64, steps: usize) -> Result<CapSolution> {
        self.check(eta)?;
        let length = self.length;
        let step = length / steps as f64;
        let c = |x: f64| I * potential(x, self.beta) - eta;
        let rhs = |x: f64, y: [Complex64; 2]| [y[1], c(x) * y[0]];
        let mut y = [Complex64::new(1.0, 0.0), -self.impedance(eta, length)];
        let mut out = vec![Complex64::new(0.0, 0.0); steps + 1];
        let mut slopes = vec![Complex64::new(0.0, 0.0); steps + 1];
        out[steps] = y[0];
        slopes[steps] = y[1];
        let hh = -step;
        for k in (0..steps).rev() {
            let x = (k + 1) as f64 * step;
            let k1 = rhs(x, y);
            let k2 = rhs(x + 0.5 * hh, [y[0] + 0.5 * hh * k1[0], y[1] + 0.5 * hh * k1[1]]);
            let k3 = rhs(x + 0.5 * hh, [y[0] + 0.5 * hh * k2[0], y[1] + 0.5 * hh * k2[1]]);
            let k4 = rhs(x + hh, [y[0] + hh * k3[0], y[1] + hh * k3[1]]);
            for i in 0..2 {
                y[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            out[k] = y[0];
            slopes[k] = y[1];
        }
        let scale = 1.0 / slopes[0];
        let samples: Vec<Complex64> = out.iter().map(|z| z * scale).collect();
        self.finish(eta, samples, length, steps)
    }

    /// Truncation check at fixed spacing: `|f0(L, n) - f0(2L, 2n)|`.
    pub fn self_convergence(&self, eta: Complex64) -> Result<f64> {
        let a = self.f0(eta)?;
        let doubled = Self {
            length: 2.0 * self.length,
            n: 2 * self.n,
            ..self.clone()
        };
        let b = doubled.f0(eta)?;
        Ok((a - b).norm())
    }

    /// Discretization check at fixed truncation: `|f0(L, n) - f0(L, 2n)|`.
    pub fn refinement_change(&self, eta: Complex64) -> Result<f64> {
        let a = self.f0(eta)?;
        let refined = Self {
            n: 2 * self.n,
            ..self.clone()
        };
        Ok((a - refined.f0(eta)?).norm())
    }
}

/// `solve_F(eta, beta, L, n)`: one-shot convenience wrapper.
pub fn solve_f(eta: Complex64, beta: f64, length: f64, n: usize) -> Result<CapSolution> {
    CapSolver::new(beta, Some(length), n)?.solve(eta)
}

/// Bounds and smoothness of `F(0, eta)` over the admissible disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskSurvey {
    pub radius: f64,
    pub min_modulus: f64,
    pub max_modulus: f64,
    /// `max(max |F0|, 1 / min |F0|)`.
    pub bound: f64,
    /// Largest second-difference quotient `|F0(eta+d) - 2F0(eta) + F0(eta-d)| / d^2`
    /// over both real and imaginary directions.
    pub max_second_difference: f64,
    /// Winding number of `F0` around 0 along the disk boundary.
    pub winding: i64,
}

/// Samples `F(0, eta)` on a polar grid of the closed admissible disk.
pub fn survey_disk(solver: &CapSolver, rings: usize, spokes: usize) -> Result<DiskSurvey> {
    let radius = solver.spectrum.admissible_radius();
    let mut min_modulus = f64::INFINITY;
    let mut max_modulus: f64 = 0.0;
    let mut max_second_difference: f64 = 0.0;
    let d = 0.02 * radius;
    let inner = CapSolver {
        enforce_admissible: false,
        ..solver.clone()
    };
    let mut boundary = Vec::with_capacity(spokes);
    for r in 0..=rings {
        let rho = radius * r as f64 / rings as f64;
        let count = if r == 0 { 1 } else { spokes };
        for k in 0..count {
            let eta = Complex64::from_polar(rho, 2.0 * std::f64::consts::PI * k as f64 / count as f64);
            let f = inner.f0(eta)?;
            min_modulus = min_modulus.min(f.norm());
            max_modulus = max_modulus.max(f.norm());
            if r == rings {
                boundary.push(f);
            }
            for dir in [Complex64::new(d, 0.0), Complex64::new(0.0, d)] {
                let fp = inner.f0(eta + dir)?;
                let fm = inner.f0(eta - dir)?;
                max_second_difference = max_second_difference.max((fp - 2.0 * f + fm).norm() / (d * d));
            }
        }
    }
    let mut turn = 0.0;
    for k in 0..boundary.len() {
        let a = boundary[k];
        let b = boundary[(k + 1) % boundary.len()];
        turn += (b / a).arg();
    }
    Ok(DiskSurvey {
        radius,
        min_modulus,
        max_modulus,
        bound: max_modulus.max(1.0 / min_modulus),
        max_second_difference,
        winding: (turn / (2.0 * std::f64::consts::PI)).round() as i64,
    })
}
