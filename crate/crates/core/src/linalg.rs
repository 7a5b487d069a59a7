//! Small dense complex linear-algebra helpers shared by the factor and
//! propagator modules.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(k: usize) -> CMat {
    CMat::identity(k, k)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// ‖U†U − I‖_max
pub fn unitarity_residual(m: &CMat) -> f64 {
    let k = m.nrows();
    if k != m.ncols() {
        return f64::INFINITY;
    }
    max_abs_diff(&(m.adjoint() * m), &identity(k))
}

/// ‖H − H†‖_max
pub fn hermiticity_residual(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    max_abs_diff(m, &m.adjoint())
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// If `m` is `z·I` to within `tol`, returns `z`.
pub fn scalar_value(m: &CMat, tol: f64) -> Option<Complex64> {
    let k = m.nrows();
    if k == 0 || k != m.ncols() {
        return None;
    }
    let z = m[(0, 0)];
    let dev = max_abs_diff(m, &(identity(k) * z));
    (dev <= tol).then_some(z)
}

/// Kronecker product `a ⊗ b`, with `a` acting on the slower index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// `e·σ` for a (not necessarily normalized) real 3-vector.
pub fn pauli_dot(e: [f64; 3]) -> CMat {
    pauli_x() * c(e[0], 0.) + pauli_y() * c(e[1], 0.) + pauli_z() * c(e[2], 0.)
}

/// Eigen-decomposition `H = V diag(λ) V†` of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let eig = h.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `f(H)` for Hermitian `H` through its spectral decomposition.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| f(l)),
    ));
    &vecs * d * vecs.adjoint()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    hermitian_function(h, |l| (-I * l * t).exp())
}

/// Spectral data of a unitary: `U = V diag(e^{iφ}) V†` with phases in (−π, π].
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    pub phases: Vec<f64>,
    pub vectors: CMat,
}

/// Folds an angle into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

impl UnitaryEigen {
    /// Decomposes a unitary (more generally, normal) matrix via its complex
    /// Schur form, which is diagonal for normal matrices.
    pub fn new(u: &CMat) -> Result<Self> {
        let res = unitarity_residual(u);
        if res > 1e-10 {
            return Err(Error::NotUnitary { residual: res });
        }
        let k = u.nrows();
        let (q, t) = u.clone().schur().unpack();
        let mut off = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    off = off.max(t[(i, j)].norm());
                }
            }
        }
        if off > 1e-9 {
            return Err(Error::DecompositionUnavailable(format!(
                "Schur form not diagonal (off-diagonal {off:.3e})"
            )));
        }
        let phases = (0..k).map(|i| wrap_phase(t[(i, i)].arg())).collect();
        Ok(Self { phases, vectors: q })
    }

    /// `U^t` on the principal branch (eigenphases in (−π, π]).
    pub fn power(&self, t: f64) -> CMat {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.phases.len(),
            self.phases.iter().map(|&p| (I * p * t).exp()),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }

    /// The Hermitian generator `B` with `U = e^{iB}` on the principal branch.
    pub fn log_hermitian(&self) -> CMat {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.phases.len(),
            self.phases.iter().map(|&p| c(p, 0.)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }
}

/// Numerical rank of the columns of `m` (singular values above `tol·σ_max`).
pub fn numerical_rank(m: &CMat, tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_is_rotation() {
        // exp(-i φ σ_x) = cos φ I − i sin φ σ_x
        let phi = 0.37;
        let u = expm_hermitian(&pauli_x(), phi);
        let expected = identity(2) * c(phi.cos(), 0.) - pauli_x() * (I * phi.sin());
        assert!(max_abs_diff(&u, &expected) < 1e-14);
    }

    #[test]
    fn unitary_power_interpolates() {
        let u = expm_hermitian(&pauli_dot([0.3, -0.2, 0.9]), 1.1);
        let eig = UnitaryEigen::new(&u).unwrap();
        assert!(max_abs_diff(&eig.power(1.0), &u) < 1e-12);
        let half = eig.power(0.5);
        assert!(max_abs_diff(&(&half * &half), &u) < 1e-12);
        assert!(max_abs_diff(&eig.power(0.0), &identity(2)) < 1e-12);
    }

    #[test]
    fn unitary_eigen_on_degenerate_matrix() {
        let u = identity(3) * c(0., 1.);
        let eig = UnitaryEigen::new(&u).unwrap();
        for p in eig.phases {
            assert!((p - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let m = identity(2) * c(1.1, 0.);
        assert!(matches!(UnitaryEigen::new(&m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn kron_dimensions_and_values() {
        let k = kron(&pauli_z(), &identity(2));
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(2, 2)], c(-1., 0.));
        assert_eq!(k[(1, 1)], c(1., 0.));
    }

    #[test]
    fn wrap_phase_branch() {
        assert!((wrap_phase(PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
