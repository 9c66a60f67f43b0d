//! Dense complex Hermitian helpers.
//!
//! Every matrix handled by the allocators is at most 4x4, so all routines
//! here are plain dense operations on `nalgebra::DMatrix<Complex64>`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Relative self-adjointness tolerance accepted by [`HermitianPsd::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues down to `-PSD_TOL * trace / dim` are treated as zero.
pub const PSD_TOL: f64 = 1e-9;

/// `(M + M^H) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `v^H M v`, real part.
pub fn quad_form(m: &CMat, v: &CVec) -> f64 {
    (v.adjoint() * m * v)[(0, 0)].re
}

/// `Re tr(A B)` without forming the product.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Outer product `u v^H`.
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Lower Cholesky factor `L` with `L L^H = (M + M^H)/2`, or `None` if the
/// matrix is not numerically positive definite.
pub fn cholesky(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let h = hermitize(m);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d.is_finite() && d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Natural-log determinant of a Hermitian positive-definite matrix.
pub fn ln_det_pd(m: &CMat) -> Option<f64> {
    let l = cholesky(m)?;
    Some((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Base-2 log-determinant of a Hermitian positive-definite matrix.
pub fn log2_det_pd(m: &CMat) -> Option<f64> {
    ln_det_pd(m).map(|v| v / std::f64::consts::LN_2)
}

/// Inverse and natural log-determinant in one factorization.
pub fn inverse_ln_det(m: &CMat) -> Option<(CMat, f64)> {
    let l = cholesky(m)?;
    let n = l.nrows();
    let ld = (0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    let linv = l.solve_lower_triangular(&identity(n))?;
    Some((hermitize(&(linv.adjoint() * linv)), ld))
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitize(m));
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigh(m).0[0]
}

/// Apply `f` to the eigenvalues of a Hermitian matrix.
pub fn spectral_map(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let d = CMat::from_diagonal(&DVector::from_iterator(
        n,
        vals.iter().map(|&v| Complex64::new(f(v), 0.0)),
    ));
    hermitize(&(&vecs * d * vecs.adjoint()))
}

/// Principal square root of a PSD matrix (negative eigenvalues clipped).
pub fn sqrt_psd(m: &CMat) -> CMat {
    spectral_map(m, |v| v.max(0.0).sqrt())
}

/// Inverse principal square root of a positive-definite matrix.
pub fn inv_sqrt_pd(m: &CMat) -> CMat {
    spectral_map(m, |v| 1.0 / v.sqrt())
}

/// Orthonormal basis of the orthogonal complement of `v` (n x (n-1)).
///
/// Returns the identity when `v` is zero.
pub fn orth_complement(v: &CVec) -> CMat {
    let n = v.len();
    let nv = norm_sqr(v).sqrt();
    if nv == 0.0 {
        return identity(n);
    }
    let u = v.unscale(nv);
    let basis = complete_basis(&u);
    basis.columns(1, n - 1).into_owned()
}

/// Unitary matrix whose first column is the unit vector `u`.
pub fn complete_basis(u: &CVec) -> CMat {
    let n = u.len();
    let mut cols: Vec<CVec> = vec![u.clone()];
    // Gram-Schmidt against the canonical basis, most orthogonal candidates first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[a].norm_sqr().total_cmp(&u[b].norm_sqr()));
    for &k in &order {
        if cols.len() == n {
            break;
        }
        let mut w = CVec::zeros(n);
        w[k] = C1;
        for _ in 0..2 {
            for c in &cols {
                let proj = (c.adjoint() * &w)[(0, 0)];
                w -= c * proj;
            }
        }
        let nw = norm_sqr(&w).sqrt();
        if nw > 1e-8 {
            cols.push(w.unscale(nw));
        }
    }
    CMat::from_columns(&cols)
}

/// Complex Hermitian positive-semidefinite matrix.
///
/// Construction validates self-adjointness and the numerical PSD floor; the
/// stored matrix is always exactly Hermitian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "crate::serde_cplx::MatrixRepr",
    into = "crate::serde_cplx::MatrixRepr"
)]
pub struct HermitianPsd(CMat);

impl HermitianPsd {
    pub fn new(m: CMat) -> Result<Self, ModelError> {
        if m.nrows() != m.ncols() {
            return Err(ModelError::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ModelError::NonFinite("matrix entry"));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let asym = (&m - m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(ModelError::NotHermitian(asym));
        }
        let h = hermitize(&m);
        let n = h.nrows();
        if n > 0 {
            let tr = trace_re(&h);
            let floor = -PSD_TOL * (tr.abs() / n as f64).max(f64::MIN_POSITIVE);
            let lmin = min_eigenvalue(&h);
            if lmin < floor {
                return Err(ModelError::NotPsd(lmin));
            }
        }
        Ok(Self(h))
    }

    /// Symmetrize and clip negative eigenvalues. Returns the clipped magnitude too.
    pub fn project(m: &CMat) -> (Self, f64) {
        let (vals, vecs) = eigh(m);
        let clipped = vals.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>();
        if clipped == 0.0 {
            return (Self(hermitize(m)), 0.0);
        }
        let d = CMat::from_diagonal(&DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| Complex64::new(v.max(0.0), 0.0)),
        ));
        (Self(hermitize(&(&vecs * d * vecs.adjoint()))), clipped)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        assert!(s >= 0.0);
        Self(identity(n).scale(s))
    }

    /// `p * u u^H / ||u||^2`.
    pub fn rank_one(u: &CVec, p: f64) -> Self {
        assert!(p >= 0.0);
        let n2 = norm_sqr(u);
        if n2 == 0.0 {
            return Self::zeros(u.len());
        }
        Self(hermitize(&outer(u, u).scale(p / n2)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.0)
    }

    pub fn quad(&self, v: &CVec) -> f64 {
        quad_form(&self.0, v)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(hermitize(&(&self.0 + &other.0)))
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(s >= 0.0);
        Self(self.0.scale(s))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == C0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_det_matches_product_of_eigenvalues() {
        let m = CMat::from_row_slice(2, 2, &[c(3.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(2.0, 0.0)]);
        // det = 6 - |1+i|^2 = 4
        assert!((ln_det_pd(&m).unwrap() - 4f64.ln()).abs() < 1e-14);
        assert!((log2_det_pd(&m).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_matrix_has_no_log_det() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(ln_det_pd(&m).is_none());
    }

    #[test]
    fn rejects_non_hermitian_and_indefinite() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            HermitianPsd::new(m),
            Err(ModelError::NotHermitian(_))
        ));
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(HermitianPsd::new(m), Err(ModelError::NotPsd(_))));
    }

    #[test]
    fn orth_complement_is_orthonormal_and_orthogonal() {
        let v = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.2, 0.0)]);
        let p = orth_complement(&v);
        assert_eq!(p.ncols(), 2);
        let g = p.adjoint() * &p;
        assert!((g - identity(2)).norm() < 1e-12);
        assert!((p.adjoint() * &v).norm() < 1e-12);
    }

    #[test]
    fn sqrt_and_inverse_sqrt_are_consistent() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.3, 0.4), c(0.3, -0.4), c(1.0, 0.0)]);
        let s = sqrt_psd(&m);
        assert!((&s * &s - &m).norm() < 1e-12);
        let is = inv_sqrt_pd(&m);
        assert!((&is * &m * &is - identity(2)).norm() < 1e-12);
    }
}
