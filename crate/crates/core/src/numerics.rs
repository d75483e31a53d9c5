//! Quadrature, finite differences and regression helpers on uniform grids.

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;

/// Composite Simpson rule on uniformly spaced samples.
///
/// An odd number of intervals is closed with Simpson's 3/8 rule on the last
/// three, so the rule stays fourth order for any `len >= 4`.
pub fn simpson(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dx * (values[0] + values[1]),
        3 => dx / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals % 2 == 0 { (n - 1, false) } else { (n - 4, true) };
            let mut total = 0.0;
            if even_end > 0 {
                let mut acc = values[0] + values[even_end];
                for (k, v) in values[1..even_end].iter().enumerate() {
                    acc += if k % 2 == 0 { 4.0 * v } else { 2.0 * v };
                }
                total = acc * dx / 3.0;
            }
            if tail {
                let f = &values[n - 4..];
                total += 3.0 * dx / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3]);
            }
            total
        }
    }
}

/// Fourth-order first derivative of uniform samples (one-sided at the ends).
pub fn first_derivative(f: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 5, "first_derivative needs at least 5 samples");
    let s = 1.0 / (12.0 * dx);
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * s;
    for j in 2..n - 2 {
        d[j] = (-f[j + 2] + 8.0 * f[j + 1] - 8.0 * f[j - 1] + f[j - 2]) * s;
    }
    d[n - 2] = -(-3.0 * f[n - 1] - 10.0 * f[n - 2] + 18.0 * f[n - 3] - 6.0 * f[n - 4] + f[n - 5]) * s;
    d[n - 1] = -(-25.0 * f[n - 1] + 48.0 * f[n - 2] - 36.0 * f[n - 3] + 16.0 * f[n - 4] - 3.0 * f[n - 5]) * s;
    d
}

/// Fourth-order compact (Padé) second derivative of uniform samples.
///
/// Interior: `f''[j-1]/10 + f''[j] + f''[j+1]/10 = 6/5 (f[j+1] - 2 f[j] + f[j-1]) / dx^2`,
/// closed by explicit fourth-order one-sided formulas at both ends.
pub fn compact_second_derivative(f: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 6, "compact_second_derivative needs at least 6 samples");
    let s = 1.0 / (12.0 * dx * dx);
    let left = (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]) * s;
    let right = (45.0 * f[n - 1] - 154.0 * f[n - 2] + 214.0 * f[n - 3] - 156.0 * f[n - 4]
        + 61.0 * f[n - 5]
        - 10.0 * f[n - 6])
        * s;
    let m = n - 2;
    let tenth = Complex64::new(0.1, 0.0);
    let mut rhs: Vec<Complex64> = (1..n - 1)
        .map(|j| (f[j + 1] - 2.0 * f[j] + f[j - 1]) * (1.2 / (dx * dx)))
        .collect();
    rhs[0] -= tenth * left;
    rhs[m - 1] -= tenth * right;
    let system = Tridiagonal::new(vec![tenth; m - 1], vec![Complex64::new(1.0, 0.0); m], vec![tenth; m - 1]);
    // Diagonally dominant and constant: never singular.
    let interior = system.solve(&rhs).expect("compact stencil matrix is nonsingular");
    let mut out = Vec::with_capacity(n);
    out.push(left);
    out.extend(interior);
    out.push(right);
    out
}

/// `exp(z) - 1 - z` without cancellation for small `|z|`.
pub fn exp_remainder(z: Complex64) -> Complex64 {
    if z.norm() > 0.5 {
        return z.exp() - 1.0 - z;
    }
    let mut term = z * z * 0.5;
    let mut sum = term;
    for k in 3..40 {
        term *= z / k as f64;
        sum += term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`, built from `exp(-1/t)`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let e = 1.0 / t - 1.0 / (1.0 - t);
        if e > 700.0 {
            0.0
        } else if e < -700.0 {
            1.0
        } else {
            1.0 / (1.0 + e.exp())
        }
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let e = 1.0 / t - 1.0 / (1.0 - t);
    if e.abs() > 700.0 {
        return 0.0;
    }
    let r = e.exp();
    (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) * r / ((1.0 + r) * (1.0 + r))
}

/// Ordinary least-squares line with a 95% confidence interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    pub slope_ci95: (f64, f64),
    pub samples: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Fit(format!("length mismatch {} vs {}", n, y.len())));
    }
    if n < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(u, v)| (v - intercept - slope * u).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let (slope_stderr, half) = if n > 2 {
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(1.96);
        (se, t * se)
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        r2,
        slope_stderr,
        slope_ci95: (slope - half, slope + half),
        samples: n,
    })
}

/// Line fit of `ln y` against `ln x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|v| *v <= 0.0) {
        return Err(Error::Fit("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Consecutive log-log slopes `d ln y / d ln x`.
pub fn local_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (ys[1].ln() - ys[0].ln()) / (xs[1].ln() - xs[0].ln()))
        .collect()
}

/// `n` points geometrically spaced from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (r * k as f64).exp()).collect()
}
