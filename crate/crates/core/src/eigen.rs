//! Eigenvalues of the model problem on `(0, inf)`:
//!
//! ```text
//!     -h^2 v'' + i (x - a)_+^beta v = lambda^2 v,   v(0) = 0  or  v'(0) = 0.
//! ```
//!
//! On `(0, a)` the solution is a pair of exponentials; on `(a, inf)` it is the
//! rescaled half-line profile `F((x - a) / t)` with `t = h^{2/(beta+2)}`.
//! Writing `lambda = pi l h / a + C h t` with `C = A1 + mu`, matching value and
//! slope at `a` is a scalar equation `G(mu, h) = 0` with `G(0, 0) = 0` and
//! `dG/dmu(0, 0) = -2ia`; it is solved by Newton's method in `mu`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::cap::CapSolver;
use crate::error::{Error, Result};
use crate::model::BoundaryCondition;
use crate::numerics::exp_remainder;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `-exp(-2i lambda a / h)` (Dirichlet) or `+exp(-2i lambda a / h)` (Neumann).
pub fn reflection_coeff(lambda: Complex64, h: f64, a: f64, bc: BoundaryCondition) -> Complex64 {
    let e = (-2.0 * I * lambda * a / h).exp();
    match bc {
        BoundaryCondition::Dirichlet => -e,
        BoundaryCondition::Neumann => e,
    }
}

/// `exp(i lambda (x - a) / h) + Ref exp(-i lambda (x - a) / h)` on `[0, a]`.
pub fn left_solution(lambda: Complex64, h: f64, a: f64, x: f64, bc: BoundaryCondition) -> Complex64 {
    let r = reflection_coeff(lambda, h, a, bc);
    let k = I * lambda / h;
    (k * (x - a)).exp() + r * (-k * (x - a)).exp()
}

/// Derivative of [`left_solution`] in `x`.
pub fn left_derivative(lambda: Complex64, h: f64, a: f64, x: f64, bc: BoundaryCondition) -> Complex64 {
    let r = reflection_coeff(lambda, h, a, bc);
    let k = I * lambda / h;
    k * ((k * (x - a)).exp() - r * (-k * (x - a)).exp())
}

/// Scaling exponents for a given `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub beta: f64,
}

impl Scaling {
    /// `t = h^{2/(beta+2)}`, the width of the transition layer.
    pub fn layer(&self, h: f64) -> f64 {
        h.powf(2.0 / (self.beta + 2.0))
    }

    /// `(beta + 4) / (beta + 2)`, the order of the correction to `pi l h / a`.
    pub fn correction_order(&self) -> f64 {
        (self.beta + 4.0) / (self.beta + 2.0)
    }

    /// `eta = lambda^2 / h^{2 beta/(beta+2)}`.
    pub fn eta(&self, lambda: Complex64, h: f64) -> Complex64 {
        lambda * lambda / h.powf(2.0 * self.beta / (self.beta + 2.0))
    }
}

/// One eigenvalue of the model problem with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenSolution {
    pub beta: f64,
    pub a: f64,
    pub h: f64,
    pub l: f64,
    pub bc: BoundaryCondition,
    /// `F(0)` at `eta = 0`.
    pub f0: Complex64,
    /// Leading coefficient `pi l F(0) / a^2`.
    pub a1: Complex64,
    pub mu: Complex64,
    /// `A1 + mu`.
    pub c_h: Complex64,
    pub lambda: Complex64,
    /// Gluing constant `v_l(a) / F(0, eta)`.
    pub b_glue: Complex64,
    pub eta: Complex64,
    /// `F(0, eta)` at the root.
    pub f0_eta: Complex64,
    pub iterations: usize,
    /// `|G(mu_h, h)|` relative to the size of its terms.
    pub newton_residual: f64,
    /// Relative value mismatch at `a`.
    pub glue_value: f64,
    /// Relative slope mismatch at `a`, with `F'(0)` measured from the samples.
    pub glue_slope: f64,
}

impl EigenSolution {
    pub fn reflection(&self) -> Complex64 {
        reflection_coeff(self.lambda, self.h, self.a, self.bc)
    }

    /// `|lambda_h - pi l h / a|`.
    pub fn correction(&self) -> f64 {
        (self.lambda - PI * self.l * self.h / self.a).norm()
    }
}

/// Solver for the eigenvalue branch through `mu = 0` for fixed `(beta, a, l, bc)`.
#[derive(Debug, Clone)]
pub struct EigenProblem {
    pub a: f64,
    pub l: f64,
    pub bc: BoundaryCondition,
    pub cap: CapSolver,
    pub f0: Complex64,
    pub newton_tol: f64,
    pub glue_tol: f64,
    pub max_iterations: usize,
}

impl EigenProblem {
    pub fn new(cap: CapSolver, a: f64, l: f64, bc: BoundaryCondition) -> Result<Self> {
        bc.check_index(l)?;
        if !(a > 0.0) {
            return Err(Error::Domain(format!("a = {a} must be > 0")));
        }
        let f0 = cap.f0(Complex64::new(0.0, 0.0))?;
        Ok(Self {
            a,
            l,
            bc,
            cap,
            f0,
            newton_tol: 1e-12,
            glue_tol: 1e-8,
            max_iterations: 40,
        })
    }

    pub fn with_tolerances(mut self, newton_tol: f64, glue_tol: f64) -> Self {
        self.newton_tol = newton_tol;
        self.glue_tol = glue_tol;
        self
    }

    pub fn beta(&self) -> f64 {
        self.cap.beta
    }

    fn scaling(&self) -> Scaling {
        Scaling { beta: self.beta() }
    }

    pub fn a1(&self) -> Complex64 {
        PI * self.l * self.f0 / (self.a * self.a)
    }

    /// `pi |l| |F(0)| / a^2 + 1`, the bound on `|C_h|`.
    pub fn c_bound(&self) -> f64 {
        PI * self.l.abs() * self.f0.norm() / (self.a * self.a) + 1.0
    }

    pub fn lambda(&self, mu: Complex64, h: f64) -> Complex64 {
        let t = self.scaling().layer(h);
        h * (PI * self.l / self.a + (self.a1() + mu) * t)
    }

    pub fn eta(&self, mu: Complex64, h: f64) -> Complex64 {
        let t = self.scaling().layer(h);
        let k = PI * self.l / self.a + (self.a1() + mu) * t;
        t * t * k * k
    }

    /// Inverse of [`Self::lambda`].
    pub fn mu_of_lambda(&self, lambda: Complex64, h: f64) -> Complex64 {
        let t = self.scaling().layer(h);
        (lambda / h - PI * self.l / self.a) / t - self.a1()
    }

    /// The matching function with the exponential kept exact:
    ///
    /// `G = (pi l i/a + i C t)(2 - 2iaCt + g) F(0, eta) - 2 A1 i a - 2 i a mu + g / t`
    ///
    /// with `g = exp(-2iaCt) - 1 + 2iaCt`. At `h = 0` this reduces to
    /// `(2 pi l i / a) F(0) - 2 A1 i a - 2 i a mu`.
    pub fn evaluate_g(&self, mu: Complex64, h: f64) -> Result<Complex64> {
        if h < 0.0 {
            return Err(Error::Domain(format!("h = {h} must be >= 0")));
        }
        let a = self.a;
        let k0 = PI * self.l / a;
        let a1 = self.a1();
        if h == 0.0 {
            return Ok(2.0 * I * k0 * self.f0 - 2.0 * I * a * (a1 + mu));
        }
        let t = self.scaling().layer(h);
        let c = a1 + mu;
        let f = self.cap.f0(self.eta(mu, h))?;
        let z = -2.0 * I * a * c * t;
        let g = exp_remainder(z);
        Ok(I * (k0 + c * t) * (2.0 + z + g) * f - 2.0 * I * a * c + g / t)
    }

    /// `dG/dmu` from the four-point holomorphic difference, whose
    /// second-order error terms cancel between the real and imaginary steps.
    pub fn g_derivative(&self, mu: Complex64, h: f64, step: f64) -> Result<Complex64> {
        let e = Complex64::new(step, 0.0);
        let ie = Complex64::new(0.0, step);
        let re = self.evaluate_g(mu + e, h)? - self.evaluate_g(mu - e, h)?;
        let im = self.evaluate_g(mu + ie, h)? - self.evaluate_g(mu - ie, h)?;
        Ok((re - I * im) / (4.0 * step))
    }

    /// Raw compatibility `D(lambda) = v_l'(a) F(0, eta) - v_l(a) / t`, with
    /// the reflection coefficient evaluated directly.
    pub fn raw_compatibility(&self, lambda: Complex64, h: f64) -> Result<Complex64> {
        let sc = self.scaling();
        let t = sc.layer(h);
        let f = self.cap.f0(sc.eta(lambda, h))?;
        let vl = left_solution(lambda, h, self.a, self.a, self.bc);
        let dvl = left_derivative(lambda, h, self.a, self.a, self.bc);
        Ok(dvl * f - vl / t)
    }

    /// Secant iteration on [`Self::raw_compatibility`] from two starting values.
    pub fn secant_root(&self, h: f64, mut x0: Complex64, mut x1: Complex64) -> Result<(Complex64, usize)> {
        let mut f0 = self.raw_compatibility(x0, h)?;
        let mut f1 = self.raw_compatibility(x1, h)?;
        for it in 1..=self.max_iterations {
            let denom = f1 - f0;
            if denom.norm() == 0.0 {
                return Ok((x1, it));
            }
            let x2 = x1 - f1 * (x1 - x0) / denom;
            let converged = (x2 - x1).norm() <= 1e-15 * x2.norm();
            x0 = x1;
            f0 = f1;
            x1 = x2;
            if converged {
                return Ok((x1, it));
            }
            f1 = self.raw_compatibility(x1, h)?;
            if f1.norm() == 0.0 {
                return Ok((x1, it));
            }
        }
        Err(Error::NewtonDivergence {
            iterations: self.max_iterations,
            mu_modulus: self.mu_of_lambda(x1, h).norm(),
            residual: f1.norm(),
        })
    }

    /// Size of the individual terms of `G`; residuals are measured relative to it.
    pub fn g_scale(&self) -> f64 {
        1.0 + 2.0 * (PI * self.l / self.a).abs() * self.f0.norm()
    }

    /// Newton iteration on `mu -> G(mu, h)`; returns `(mu, iterations, |G| / scale)`.
    pub fn newton(&self, h: f64, mu0: Complex64) -> Result<(Complex64, usize, f64)> {
        let mut mu = mu0;
        let mut gval = self.evaluate_g(mu, h)?;
        let scale = self.g_scale();
        for it in 1..=self.max_iterations {
            let d = self.g_derivative(mu, h, 1e-4)?;
            let step = gval / d;
            mu -= step;
            if !(mu.norm() < 1.0) {
                return Err(Error::NewtonDivergence {
                    iterations: it,
                    mu_modulus: mu.norm(),
                    residual: gval.norm() / scale,
                });
            }
            gval = self.evaluate_g(mu, h)?;
            let small_step = step.norm() <= 1e-10 * (1.0 + mu.norm());
            if gval.norm() <= 1e-3 * self.newton_tol * scale || (small_step && gval.norm() <= self.newton_tol * scale) {
                return Ok((mu, it, gval.norm() / scale));
            }
        }
        let residual = gval.norm() / scale;
        if residual <= self.newton_tol {
            return Ok((mu, self.max_iterations, residual));
        }
        Err(Error::NewtonDivergence {
            iterations: self.max_iterations,
            mu_modulus: mu.norm(),
            residual,
        })
    }

    /// Eigenvalue at `h`, Newton-started from `mu0`.
    pub fn find_from(&self, h: f64, mu0: Complex64) -> Result<EigenSolution> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Domain(format!("h = {h} must lie in (0, 1)")));
        }
        let (mu, iterations, residual) = self.newton(h, mu0)?;
        if residual > self.newton_tol {
            return Err(Error::NewtonDivergence {
                iterations,
                mu_modulus: mu.norm(),
                residual,
            });
        }
        let lambda = self.lambda(mu, h);
        let eta = self.eta(mu, h);
        let sol = self.cap.solve(eta)?;
        let t = self.scaling().layer(h);
        let vl = left_solution(lambda, h, self.a, self.a, self.bc);
        let dvl = left_derivative(lambda, h, self.a, self.a, self.bc);
        let b_glue = vl / sol.f0;
        let scale = vl.norm().max(dvl.norm());
        let glue_value = (vl - b_glue * sol.f0).norm() / scale;
        // The half-line solution is normalized by F'(0) = 1.
        let glue_slope = (dvl - b_glue / t).norm() / scale;
        if glue_value.max(glue_slope) > self.glue_tol {
            return Err(Error::Inconsistent {
                residual: glue_value.max(glue_slope),
                tol: self.glue_tol,
            });
        }
        let a1 = self.a1();
        Ok(EigenSolution {
            beta: self.beta(),
            a: self.a,
            h,
            l: self.l,
            bc: self.bc,
            f0: self.f0,
            a1,
            mu,
            c_h: a1 + mu,
            lambda,
            b_glue,
            eta,
            f0_eta: sol.f0,
            iterations,
            newton_residual: residual,
            glue_value,
            glue_slope,
        })
    }

    pub fn find(&self, h: f64) -> Result<EigenSolution> {
        self.find_from(h, Complex64::new(0.0, 0.0))
    }

    /// Solve along `hs` by continuation: start at the smallest `h` from
    /// `mu = 0` and seed each larger `h` with the previous root. Results come
    /// back in the order of `hs`.
    pub fn sweep(&self, hs: &[f64]) -> Result<Vec<EigenSolution>> {
        let mut order: Vec<usize> = (0..hs.len()).collect();
        order.sort_by(|&i, &j| hs[i].total_cmp(&hs[j]));
        let mut out: Vec<Option<EigenSolution>> = vec![None; hs.len()];
        let mut seed = Complex64::new(0.0, 0.0);
        for i in order {
            let sol = self.find_from(hs[i], seed)?;
            seed = sol.mu;
            out[i] = Some(sol);
        }
        Ok(out.into_iter().map(|s| s.expect("every index visited")).collect())
    }

    /// Largest `h` in `grid` such that `eta(mu, h)` stays admissible on the
    /// whole circle `|mu| = 1` (and hence, by the maximum principle applied
    /// to the polynomial `eta`, on the disk), together with every smaller grid point.
    pub fn admissible_h0(&self, grid: &[f64]) -> Option<f64> {
        let radius = self.cap.spectrum.admissible_radius();
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut best = None;
        for h in sorted {
            let ok = (0..64).all(|k| {
                let mu = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 64.0);
                self.eta(mu, h).norm() <= radius
            });
            if !ok {
                break;
            }
            best = Some(h);
        }
        best
    }

    /// Largest `h` in `grid` reached by continuation from the smallest grid
    /// point with the root staying inside `|mu| < 1`.
    pub fn branch_h0(&self, grid: &[f64]) -> Option<f64> {
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut seed = Complex64::new(0.0, 0.0);
        let mut best = None;
        for h in sorted {
            match self.newton(h, seed) {
                Ok((mu, _, _)) => {
                    seed = mu;
                    best = Some(h);
                }
                Err(_) => break,
            }
        }
        best
    }

    /// Working threshold: the smaller of [`Self::admissible_h0`] and [`Self::branch_h0`].
    pub fn h0(&self, grid: &[f64]) -> Option<f64> {
        match (self.admissible_h0(grid), self.branch_h0(grid)) {
            (Some(x), Some(y)) => Some(x.min(y)),
            _ => None,
        }
    }

    /// Distinct roots of `G(., h)` in `|mu| < 1` reached by Newton from `starts`.
    pub fn roots_in_disk(&self, h: f64, starts: &[Complex64]) -> Vec<Complex64> {
        let mut found: Vec<Complex64> = Vec::new();
        for &s in starts {
            if let Ok((mu, _, res)) = self.newton(h, s) {
                if res <= self.newton_tol && !found.iter().any(|r| (r - mu).norm() < 1e-8) {
                    found.push(mu);
                }
            }
        }
        found
    }
}

/// One row per solution: `h, re/im lambda, re/im C_h, iterations, residuals`.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[EigenSolution]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "h",
        "re_lambda",
        "im_lambda",
        "re_c",
        "im_c",
        "newton_iterations",
        "newton_residual",
        "glue_value",
        "glue_slope",
    ])?;
    for s in rows {
        w.write_record(&[
            s.h.to_string(),
            s.lambda.re.to_string(),
            s.lambda.im.to_string(),
            s.c_h.re.to_string(),
            s.c_h.im.to_string(),
            s.iterations.to_string(),
            s.newton_residual.to_string(),
            s.glue_value.to_string(),
            s.glue_slope.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
