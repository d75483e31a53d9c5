//! Tridiagonal linear algebra.
//!
//! Every discretization in this crate is a three-point stencil, so the only
//! dense kernels needed are a pivoted tridiagonal LU (the `gttrf`/`gttrs`
//! pair) and Sturm-sequence bisection for symmetric tridiagonal spectra.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A complex tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// Subdiagonal, length `n - 1`.
    pub lower: Vec<Complex64>,
    /// Main diagonal, length `n`.
    pub diag: Vec<Complex64>,
    /// Superdiagonal, length `n - 1`.
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<Complex64>, diag: Vec<Complex64>, upper: Vec<Complex64>) -> Self {
        let n = diag.len();
        assert!(n >= 1, "empty tridiagonal matrix");
        assert_eq!(lower.len(), n - 1);
        assert_eq!(upper.len(), n - 1);
        Self { lower, diag, upper }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y: Vec<Complex64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n - 1 {
            y[i] += self.upper[i] * x[i + 1];
            y[i + 1] += self.lower[i] * x[i];
        }
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            lower: self.upper.iter().map(|z| z.conj()).collect(),
            diag: self.diag.iter().map(|z| z.conj()).collect(),
            upper: self.lower.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn factor(&self) -> Result<TridiagonalLu> {
        TridiagonalLu::new(self.clone())
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let lu = self.factor()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        Ok(x)
    }

    /// Dense copy, for small cross-checks.
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.upper[i];
                m[(i + 1, i)] = self.lower[i];
            }
        }
        m
    }
}

/// LU factorization of a tridiagonal matrix with partial pivoting.
///
/// Row interchanges create one extra superdiagonal of fill (`upper2`).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
    upper2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    pub fn new(matrix: Tridiagonal) -> Result<Self> {
        let Tridiagonal {
            mut lower,
            mut diag,
            mut upper,
        } = matrix;
        let n = diag.len();
        let mut upper2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if diag[i].norm_sqr() >= lower[i].norm_sqr() {
                if diag[i].norm_sqr() == 0.0 {
                    return Err(Error::Singular(i));
                }
                let fact = lower[i] / diag[i];
                lower[i] = fact;
                diag[i + 1] -= fact * upper[i];
            } else {
                let fact = diag[i] / lower[i];
                diag[i] = lower[i];
                lower[i] = fact;
                let temp = upper[i];
                upper[i] = diag[i + 1];
                diag[i + 1] = temp - fact * diag[i + 1];
                if i + 2 < n {
                    upper2[i] = upper[i + 1];
                    upper[i + 1] = -fact * upper[i + 1];
                }
                swapped[i] = true;
            }
        }
        if diag[n - 1].norm_sqr() == 0.0 {
            return Err(Error::Singular(n - 1));
        }
        Ok(Self {
            lower,
            diag,
            upper,
            upper2,
            swapped,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.lower[i] * b[i];
            } else {
                let t = b[i];
                b[i + 1] -= self.lower[i] * t;
            }
        }
        b[n - 1] /= self.diag[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.upper[n - 2] * b[n - 1]) / self.diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.upper[i] * b[i + 1] - self.upper2[i] * b[i + 2]) / self.diag[i];
        }
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal
/// matrix with diagonal `diag` and squared off-diagonal products `offdiag_sq`.
pub fn sturm_count(diag: &[f64], offdiag_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..diag.len() {
        if i > 0 {
            let prev = if q == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { q };
            q = diag[i] - x - offdiag_sq[i - 1] / prev;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric(-izable) tridiagonal matrix by bisection.
///
/// `offdiag_sq[i]` is the product `a[i][i+1] * a[i+1][i]`, which must be
/// nonnegative; this admits the unsymmetric ghost-point Neumann row.
pub fn lowest_eigenvalue(diag: &[f64], offdiag_sq: &[f64], rel_tol: f64) -> f64 {
    assert_eq!(offdiag_sq.len() + 1, diag.len());
    let n = diag.len();
    let radius = |i: usize| -> f64 {
        let left = if i > 0 { offdiag_sq[i - 1].sqrt() } else { 0.0 };
        let right = if i + 1 < n { offdiag_sq[i].sqrt() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    while hi - lo > rel_tol * (lo.abs().max(hi.abs()).max(1e-300)) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, offdiag_sq, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solves_against_dense_reference() {
        // Zero leading diagonal forces a pivot on the first step.
        let a = Tridiagonal::new(
            vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.2, 0.0), c(4.0, -1.0)],
            vec![c(0.0, 0.0), c(1.0, 1.0), c(-2.0, 0.0), c(0.5, 0.5), c(3.0, 0.0)],
            vec![c(2.0, 0.0), c(0.0, -1.0), c(1.5, 0.0), c(-0.7, 0.3)],
        );
        let x_true: Vec<Complex64> = (0..5).map(|i| c(i as f64 - 1.5, 0.3 * i as f64)).collect();
        let b = a.matvec(&x_true);
        let x = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-12, "{u} vs {v}");
        }
        let ah = a.adjoint();
        let bh = ah.matvec(&x_true);
        let xh = ah.solve(&bh).unwrap();
        for (u, v) in xh.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = Tridiagonal::new(vec![c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0)]);
        assert!(matches!(a.factor(), Err(Error::Singular(0))));
    }

    #[test]
    fn one_by_one() {
        let a = Tridiagonal::new(vec![], vec![c(2.0, 0.0)], vec![]);
        assert_eq!(a.solve(&[c(4.0, 2.0)]).unwrap(), vec![c(2.0, 1.0)]);
    }

    #[test]
    fn lowest_eigenvalue_of_discrete_laplacian() {
        let n = 50;
        let diag = vec![2.0; n];
        let off = vec![1.0; n - 1];
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let got = lowest_eigenvalue(&diag, &off, 1e-14);
        assert!((got - exact).abs() < 1e-12);
        assert_eq!(sturm_count(&diag, &off, 4.0), n);
    }
}
