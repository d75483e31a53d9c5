//! Resolvent norms of the reduced operator on the real frequency axis.
//!
//! For transverse mode `m` the operator is
//! `-d^2/dx^2 + i q W + k_m^2 - q^2` on `(-b, b)` with Dirichlet ends,
//! `k_m = 2 pi m / b`, discretized by second-order differences. Its inverse
//! norm is `1 / sigma_min`, found by inverse iteration on `A^* A`.
//!
//! For each frequency on a grid the scan takes the worst transverse mode near
//! resonance and the worst nearby shift `E = q^2 - k_m^2`, then fits the
//! growth exponent of the resulting envelope.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::model::Damping;
use crate::numerics::{fit_loglog, local_slopes, LineFit};
use crate::quasimode::Quasimode;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Points per local wavelength required of every grid.
pub const POINTS_PER_WAVELENGTH: f64 = 20.0;

/// Largest local wavenumber of the mode-`m` problem at frequency `q`:
/// `sqrt(|q^2 - k_m^2| + q max W)`.
pub fn local_wavenumber(q: f64, kappa: f64, w_max: f64) -> f64 {
    (kappa.abs() + q.abs() * w_max).sqrt()
}

fn max_damping(damping: &dyn Damping, samples: usize) -> f64 {
    let b = damping.half_width();
    (0..=samples)
        .map(|k| damping.value_unchecked(-b + 2.0 * b * k as f64 / samples as f64))
        .fold(0.0, f64::max)
}

/// Interior-node matrix of `-d^2 + i q W + kappa` on `count` nodes
/// `x_first + j dx`, with zero values one step beyond both ends.
pub fn assemble_on_grid(q: f64, kappa: f64, damping: &dyn Damping, x_first: f64, dx: f64, count: usize) -> Tridiagonal {
    let inv = 1.0 / (dx * dx);
    let diag = (0..count)
        .map(|j| {
            let x = x_first + j as f64 * dx;
            Complex64::new(2.0 * inv + kappa, 0.0) + I * q * damping.value_unchecked(x)
        })
        .collect();
    let off = vec![Complex64::new(-inv, 0.0); count.saturating_sub(1)];
    Tridiagonal::new(off.clone(), diag, off)
}

/// Mode-`m` operator at real `q` on `n` intervals of `(-b, b)`.
pub fn assemble_reduced_operator(q: f64, m: u64, damping: &dyn Damping, n: usize) -> Result<Tridiagonal> {
    let km = 2.0 * PI * m as f64 / damping.half_width();
    assemble_shifted(q, (q - km) * (q + km), damping, n)
}

/// The same operator written as `-d^2 + i q W - E` with `E = q^2 - k_m^2`
/// passed directly, which avoids cancelling `k_m^2` against `q^2`.
pub fn assemble_shifted(q: f64, shift: f64, damping: &dyn Damping, n: usize) -> Result<Tridiagonal> {
    let b = damping.half_width();
    let dx = 2.0 * b / n as f64;
    let k = local_wavenumber(q, shift, max_damping(damping, 2000));
    if k * dx > 2.0 * PI / POINTS_PER_WAVELENGTH {
        return Err(Error::Resolution(format!(
            "n = {n} gives {:.1} points per local wavelength (need {POINTS_PER_WAVELENGTH})",
            2.0 * PI / (k * dx)
        )));
    }
    Ok(assemble_on_grid(q, -shift, damping, -b + dx, dx, n - 1))
}

/// Grid size needed to resolve the mode-`m` problem at `(q, shift)`.
pub fn required_intervals(q: f64, shift: f64, damping: &dyn Damping) -> usize {
    let k = local_wavenumber(q, shift, max_damping(damping, 2000));
    // 5% headroom for the neighbouring transverse modes, whose q is slightly larger.
    (1.05 * 2.0 * damping.half_width() * k * POINTS_PER_WAVELENGTH / (2.0 * PI)).ceil() as usize
}

/// Smallest singular value of a tridiagonal matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularEstimate {
    pub sigma_min: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Obtained from a dense SVD after the iteration stalled.
    pub dense: bool,
}

/// Largest dimension for which the dense SVD fallback is attempted.
pub const DENSE_LIMIT: usize = 800;

/// Inverse iteration on `A^* A` with both factorizations reused.
pub fn smallest_singular_value(a: &Tridiagonal, rel_tol: f64, max_iterations: usize) -> Result<SingularEstimate> {
    let n = a.dim();
    let lu = a.factor()?;
    let lu_h = a.adjoint().factor()?;
    // No symmetry about the midpoint, so odd and even modes are both present.
    let mut x: Vec<Complex64> = (0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) / n as f64;
            Complex64::new(1.0 + t + 0.3 * (7.3 * t).sin(), 0.2 * (3.1 * t).cos())
        })
        .collect();
    let mut last = 0.0;
    for it in 1..=max_iterations {
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|z| *z /= norm);
        let mut y = x.clone();
        lu_h.solve_in_place(&mut y);
        lu.solve_in_place(&mut y);
        // Rayleigh quotient of (A^* A)^{-1}; its error is quadratic in the residual.
        let rho = x.iter().zip(&y).map(|(u, v)| (u.conj() * v).re).sum::<f64>();
        let resid = x.iter().zip(&y).map(|(u, v)| (v - rho * u).norm_sqr()).sum::<f64>().sqrt() / rho;
        last = rho;
        x = y;
        if resid * resid <= rel_tol {
            return Ok(SingularEstimate {
                sigma_min: 1.0 / rho.sqrt(),
                iterations: it,
                converged: true,
                dense: false,
            });
        }
    }
    if n <= DENSE_LIMIT {
        let sv = a.to_dense().singular_values();
        let s = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(SingularEstimate {
            sigma_min: s,
            iterations: max_iterations,
            converged: true,
            dense: true,
        });
    }
    Ok(SingularEstimate {
        sigma_min: 1.0 / last.sqrt(),
        iterations: max_iterations,
        converged: false,
        dense: false,
    })
}

/// Dense reference value of `sigma_min`, for cross-checks on small grids.
pub fn dense_sigma_min(a: &Tridiagonal) -> f64 {
    let m: DMatrix<Complex64> = a.to_dense();
    m.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// One resolvent evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventSample {
    pub q: f64,
    pub m: u64,
    /// `q^2 - k_m^2`.
    pub shift: f64,
    pub norm: f64,
    pub n: usize,
    pub converged: bool,
}

pub fn resolvent_norm(q: f64, m: u64, damping: &dyn Damping, n: usize) -> Result<ResolventSample> {
    let km = 2.0 * PI * m as f64 / damping.half_width();
    sample_at(q, m, (q - km) * (q + km), damping, n)
}

/// Norm for mode `m` at the frequency `q = sqrt(shift + k_m^2)`.
pub fn resolvent_norm_at_shift(m: u64, shift: f64, damping: &dyn Damping, n: usize) -> Result<ResolventSample> {
    let km = 2.0 * PI * m as f64 / damping.half_width();
    sample_at((shift + km * km).sqrt(), m, shift, damping, n)
}

fn sample_at(q: f64, m: u64, shift: f64, damping: &dyn Damping, n: usize) -> Result<ResolventSample> {
    sample_with(q, m, shift, damping, n, 1e-12, 400)
}

/// Iteration cap for the coarse safeguard sweep. Power iteration approaches
/// the norm from below, so a truncated run still gives a valid lower bound.
const COARSE_ITERATIONS: usize = 40;

fn sample_with(q: f64, m: u64, shift: f64, damping: &dyn Damping, n: usize, tol: f64, iterations: usize) -> Result<ResolventSample> {
    let op = assemble_shifted(q, shift, damping, n)?;
    let est = smallest_singular_value(&op, tol, iterations)?;
    Ok(ResolventSample {
        q,
        m,
        shift,
        norm: 1.0 / est.sigma_min,
        n,
        converged: est.converged,
    })
}

/// Norm at `n` and `2n` and their relative difference.
pub fn resolvent_norm_refined(q: f64, m: u64, damping: &dyn Damping, n: usize) -> Result<(ResolventSample, f64)> {
    let coarse = resolvent_norm(q, m, damping, n)?;
    let fine = resolvent_norm(q, m, damping, 2 * n)?;
    let change = (fine.norm - coarse.norm).abs() / fine.norm;
    Ok((fine, change))
}

/// Undamped reference: `1 / min_k |(pi k / 2b)^2 + k_m^2 - q^2|`.
pub fn undamped_norm(q: f64, m: u64, b: f64) -> f64 {
    let km = 2.0 * PI * m as f64 / b;
    let shift = q * q - km * km;
    let k_near = (2.0 * b * shift.max(0.0).sqrt() / PI).round().max(1.0) as i64;
    let dist = (k_near - 2..=k_near + 2)
        .filter(|&k| k >= 1)
        .map(|k| ((PI * k as f64 / (2.0 * b)).powi(2) - shift).abs())
        .fold(f64::INFINITY, f64::min);
    1.0 / dist
}

/// Eigenvalue of `-d^2 + i q W` near `guess` by Rayleigh-quotient iteration.
pub fn strip_resonance(q: f64, damping: &dyn Damping, n: usize, guess: f64) -> Result<Complex64> {
    let b = damping.half_width();
    let dx = 2.0 * b / n as f64;
    let a = assemble_on_grid(q, 0.0, damping, -b + dx, dx, n - 1);
    let mut shift = Complex64::new(guess, 0.0);
    let mut x: Vec<Complex64> = (1..n)
        .map(|j| Complex64::new((PI * j as f64 / (2.0 * n as f64)).sin().max(1e-3), 0.0))
        .collect();
    for _ in 0..60 {
        let mut shifted = a.clone();
        shifted.diag.iter_mut().for_each(|d| *d -= shift);
        let y = match shifted.solve(&x) {
            Ok(y) => y,
            Err(Error::Singular(_)) => return Ok(shift),
            Err(e) => return Err(e),
        };
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x = y.into_iter().map(|z| z / norm).collect();
        let ax = a.matvec(&x);
        let rq: Complex64 = x.iter().zip(&ax).map(|(u, v)| u.conj() * v).sum();
        if (rq - shift).norm() <= 1e-13 * rq.norm().max(1.0) {
            return Ok(rq);
        }
        shift = rq;
    }
    Ok(shift)
}

/// Controls of the real-axis scan. Shifts `E = q^2 - k_m^2` are searched in
/// `[shift_lo, shift_hi] (pi / 2a)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub n_min: usize,
    /// Transverse candidates on each side of `round(b q / 2 pi)`.
    pub m_window: u64,
    pub shift_lo: f64,
    pub shift_hi: f64,
    pub coarse: usize,
    /// Multiplies every grid size; 2 gives the grid-doubling check.
    pub grid_factor: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n_min: 4000,
            m_window: 3,
            shift_lo: 0.2,
            shift_hi: 3.0,
            coarse: 8,
            grid_factor: 1,
        }
    }
}

/// Worst resolvent norm for transverse mode `m` over shifts in the window,
/// refined around `resonance` (see [`strip_resonance`]).
pub fn peak_for_mode(
    m: u64,
    res: Complex64,
    damping: &dyn Damping,
    a: f64,
    n: usize,
    opts: &ScanOptions,
) -> Result<ResolventSample> {
    let unit = (PI / (2.0 * a)).powi(2);
    let (lo, hi) = (opts.shift_lo * unit, opts.shift_hi * unit);
    let km = 2.0 * PI * m as f64 / damping.half_width();
    let eval = |e: f64| resolvent_norm_at_shift(m, e, damping, n);
    // The coarse sweep only guards against a missed peak; a loose tolerance suffices.
    let mut best = sample_with((lo + km * km).sqrt(), m, lo, damping, n, 1e-6, COARSE_ITERATIONS)?;
    for k in 1..=opts.coarse {
        let e = lo + (hi - lo) * k as f64 / opts.coarse as f64;
        let s = sample_with((e + km * km).sqrt(), m, e, damping, n, 1e-6, COARSE_ITERATIONS)?;
        if s.norm > best.norm {
            best = s;
        }
    }
    // Near an isolated resonance sigma_min^2 ~ (E - Re mu)^2 + (Im mu)^2, so
    // successive parabolic interpolation on 1/norm^2 converges in a few steps.
    let width = res.im.abs().max(1e-9 * unit);
    let (lo_b, hi_b) = ((res.re - 6.0 * width).max(lo), (res.re + 6.0 * width).min(hi));
    if lo_b < hi_b {
        let centre = res.re.clamp(lo_b, hi_b);
        let mut pts: Vec<ResolventSample> = Vec::with_capacity(12);
        for e in [centre - 0.5 * width, centre, centre + 0.5 * width] {
            pts.push(eval(e.clamp(lo_b, hi_b))?);
        }
        for _ in 0..10 {
            pts.sort_by(|x, y| y.norm.total_cmp(&x.norm));
            let [p0, p1, p2] = [pts[0], pts[1], pts[2]];
            let f = |s: &ResolventSample| 1.0 / (s.norm * s.norm);
            let (x0, x1, x2) = (p0.shift, p1.shift, p2.shift);
            let (d1, d2) = ((f(&p1) - f(&p0)) / (x1 - x0), (f(&p2) - f(&p0)) / (x2 - x0));
            let curvature = (d2 - d1) / (x2 - x1);
            if !(curvature > 0.0) || !curvature.is_finite() {
                break;
            }
            // Vertex of the parabola through the three best points.
            let next = (0.5 * (x0 + x1) - 0.5 * d1 / curvature).clamp(lo_b, hi_b);
            if pts.iter().any(|s| (s.shift - next).abs() <= 1e-7 * width) {
                break;
            }
            let s = eval(next)?;
            let done = (next - x0).abs() <= 1e-4 * width;
            pts.push(s);
            if done {
                break;
            }
        }
        for s in pts {
            if s.norm > best.norm {
                best = s;
            }
        }
    }
    Ok(best)
}

/// Worst norm over `m` within `opts.m_window` of `round(b q0 / 2 pi)`. When
/// an edge mode beats every interior one by more than 0.1% the window is
/// widened once. Since `q` grows with `m` at fixed shift, ties tilt slightly
/// towards the upper edge.
pub fn peak_norm(q0: f64, damping: &dyn Damping, a: f64, n: usize, opts: &ScanOptions) -> Result<ResolventSample> {
    let b = damping.half_width();
    let centre = (b * q0 / (2.0 * PI)).round() as i64;
    // The shift window is the same for every m, so one resonance serves all.
    let res = strip_resonance(q0, damping, n, (PI / (2.0 * a)).powi(2))?;
    let visit = |lo: i64, hi: i64| -> Result<Vec<ResolventSample>> {
        (lo.max(1)..=hi).map(|m| peak_for_mode(m as u64, res, damping, a, n, opts)).collect()
    };
    let argmax = |v: &[ResolventSample]| v.iter().copied().max_by(|x, y| x.norm.total_cmp(&y.norm));
    let w = opts.m_window as i64;
    let mut samples = visit(centre - w, centre + w)?;
    let interior = argmax(&samples.iter().copied().filter(|s| (s.m as i64 - centre).abs() < w).collect::<Vec<_>>());
    if let (Some(b), Some(i)) = (argmax(&samples), interior) {
        if b.norm > 1.001 * i.norm {
            samples.extend(visit(centre - 2 * w, centre - w - 1)?);
            samples.extend(visit(centre + w + 1, centre + 2 * w)?);
        }
    }
    let best = argmax(&samples);
    best.ok_or_else(|| Error::Domain("empty transverse window".into()))
}

/// Growth exponent of the worst-case resolvent norm along the real axis.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub samples: Vec<ResolventSample>,
    pub fit: LineFit,
    pub local_slopes: Vec<f64>,
}

impl RateFit {
    pub fn exponent(&self) -> f64 {
        self.fit.slope
    }
}

/// Scan `q_grid` in parallel and fit `log norm` against `log q`. The grid
/// size grows with `q` as needed to keep the local wavelength resolved.
pub fn scan_and_fit(
    q_grid: &[f64],
    damping: &dyn Damping,
    a: f64,
    opts: &ScanOptions,
) -> Result<RateFit> {
    if q_grid.len() < 3 {
        return Err(Error::Fit("need at least three frequencies".into()));
    }
    let span = q_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / q_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if span.log10() < 1.5 - 1e-9 {
        return Err(Error::Fit(format!("frequency grid spans {:.2} decades, need 1.5", span.log10())));
    }
    let samples: Vec<ResolventSample> = q_grid
        .par_iter()
        .map(|&q| {
            let needed = required_intervals(q, opts.shift_hi * (PI / (2.0 * a)).powi(2), damping);
            peak_norm(q, damping, a, opts.grid_factor * opts.n_min.max(needed), opts)
        })
        .collect::<Result<_>>()?;
    let qs: Vec<f64> = samples.iter().map(|s| s.q).collect();
    let norms: Vec<f64> = samples.iter().map(|s| s.norm).collect();
    let fit = fit_loglog(&qs, &norms)?;
    Ok(RateFit {
        local_slopes: local_slopes(&qs, &norms),
        samples,
        fit,
    })
}

/// Lower bound `||u|| / ||A u||` from a stored quasimode, with `A` the
/// mode-`m` operator at `Re q` discretized on the quasimode's own grid, next
/// to the norm of that same discrete resolvent.
pub fn quasimode_lower_bound(qm: &Quasimode, damping: &dyn Damping) -> Result<(f64, f64)> {
    let full = qm.full_profile();
    let count = full.len();
    let u: Vec<Complex64> = full.iter().map(|p| p.1).collect();
    let q = qm.q.re;
    // k_m = 1/h^2, so k_m^2 - q^2 = -d (2/h^2 + d) with d = q - 1/h^2.
    let d = q - 1.0 / (qm.h * qm.h);
    let kappa = -d * (2.0 / (qm.h * qm.h) + d);
    let a = assemble_on_grid(q, kappa, damping, full[0].0, qm.dx, count);
    let au = a.matvec(&u);
    let un = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let aun = au.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let est = smallest_singular_value(&a, 1e-12, 400)?;
    Ok((un / aun, 1.0 / est.sigma_min))
}

/// Cutoff exponent `gamma = beta / (beta + 2)` of the upper-bound argument,
/// the solution of `2 - gamma = gamma (1 + 4 / beta)`.
pub fn balancing_exponent(beta: f64) -> f64 {
    beta / (beta + 2.0)
}

/// Rows `q, m, shift, norm, local slope`.
pub fn write_scan_csv<W: Write>(out: W, fit: &RateFit) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q", "m", "shift", "norm", "n", "local_slope"])?;
    for (k, s) in fit.samples.iter().enumerate() {
        let slope = k.checked_sub(1).map(|i| fit.local_slopes[i].to_string()).unwrap_or_default();
        w.write_record(&[
            s.q.to_string(),
            s.m.to_string(),
            s.shift.to_string(),
            s.norm.to_string(),
            s.n.to_string(),
            slope,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DampingProfile, Join, UniformDamping};

    #[test]
    fn undamped_norm_matches_formula() {
        let w = UniformDamping { level: 0.0, b: 2.0 };
        let m = 30;
        let km = 2.0 * PI * m as f64 / 2.0;
        // Shift midway between the 3rd and 4th Dirichlet levels.
        let e = 0.5 * ((3.0 * PI / 4.0).powi(2) + (4.0 * PI / 4.0).powi(2));
        let q = (e + km * km).sqrt();
        let exact = undamped_norm(q, m, 2.0);
        let mut errors = Vec::new();
        for n in [2000, 4000] {
            let s = resolvent_norm(q, m, &w, n).unwrap();
            errors.push((s.norm - exact).abs() / exact);
        }
        assert!(errors[1] < 1e-5, "{errors:?}");
        // Second order: halving dx quarters the error.
        let ratio = errors[0] / errors[1];
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn hermitian_part_is_independent_of_damping() {
        let p = DampingProfile::new(1.0, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        let w0 = UniformDamping { level: 0.0, b: 2.0 };
        let a = assemble_reduced_operator(40.0, 12, &p, 400).unwrap();
        let b = assemble_reduced_operator(40.0, 12, &w0, 400).unwrap();
        for i in 0..a.dim() {
            assert!((a.diag[i].re - b.diag[i].re).abs() < 1e-12);
        }
        assert_eq!(a.lower, b.lower);
    }

    #[test]
    fn zero_frequency_is_positive_definite() {
        let p = DampingProfile::new(2.0, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        let a = assemble_reduced_operator(0.0, 3, &p, 300).unwrap();
        let km2 = (2.0 * PI * 3.0 / 2.0f64).powi(2);
        assert!(a.diag.iter().all(|d| d.im == 0.0));
        let s = smallest_singular_value(&a, 1e-13, 2000).unwrap();
        assert!(s.sigma_min >= km2 * (1.0 - 1e-9));
    }

    #[test]
    fn inverse_iteration_matches_dense_svd() {
        let p = DampingProfile::new(1.0, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        let a = assemble_reduced_operator(30.0, 9, &p, 300).unwrap();
        let s = smallest_singular_value(&a, 1e-13, 2000).unwrap();
        let d = dense_sigma_min(&a);
        assert!((s.sigma_min - d).abs() < 1e-8 * d, "{} vs {d}", s.sigma_min);
    }

    #[test]
    fn under_resolution_is_reported() {
        let p = DampingProfile::new(1.0, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        assert!(matches!(assemble_reduced_operator(5000.0, 1, &p, 200), Err(Error::Resolution(_))));
    }

    #[test]
    fn balancing_identity() {
        for beta in [0.5, 1.0, 2.0, 3.0, 7.0] {
            let g = balancing_exponent(beta);
            assert!((2.0 - g - g * (1.0 + 4.0 / beta)).abs() < 1e-14);
        }
    }

    #[test]
    fn peak_tracks_the_strip_resonance() {
        let p = DampingProfile::new(1.0, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        let opts = ScanOptions::default();
        let res = strip_resonance(1e4, &p, 4000, (PI / 2.0).powi(2)).unwrap();
        let s = peak_norm(1e4, &p, 1.0, 4000, &opts).unwrap();
        let centre = (2.0 * 1e4 / (2.0 * PI)).round() as i64;
        assert!((s.m as i64 - centre).abs() <= 2 * opts.m_window as i64);
        // Near-normal resonance: the peak is 1 / Im mu to within a percent.
        assert!((s.norm * res.im.abs() - 1.0).abs() < 0.01, "{} {}", s.norm, res.im);
        assert!((s.shift - res.re).abs() < 0.1 * res.im.abs());
    }

    #[test]
    fn scan_rejects_short_grids_and_writes_csv() {
        let p = DampingProfile::new(2.0, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        let opts = ScanOptions { m_window: 1, ..ScanOptions::default() };
        assert!(matches!(scan_and_fit(&[100.0, 200.0, 300.0], &p, 1.0, &opts), Err(Error::Fit(_))));
        let fit = scan_and_fit(&[100.0, 1000.0, 4000.0], &p, 1.0, &opts).unwrap();
        let mut out = Vec::new();
        write_scan_csv(&mut out, &fit).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("q,m,shift,norm,n,local_slope"));
    }
}
