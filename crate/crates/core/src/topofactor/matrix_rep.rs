use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::covering::{DeckElement, DeckGroup, FreeWord};
use crate::error::{Error, Result};
use crate::linalg::{
    commutator, expm_hermitian, hermiticity_residual, identity, max_abs, max_abs_diff, pauli_dot, scalar_value,
    unitarity_residual, CMat,
};

/// Unitarity and relation tolerance for generator matrices.
pub const MATRIX_TOL: f64 = 1e-12;
/// Commutator tolerance for the factor–potential compatibility check.
pub const COMMUTE_TOL: f64 = 1e-10;

/// A unitary representation Γ of a covering group on `W = ℂᵏ`.
#[derive(Debug, Clone)]
pub struct MatrixRep {
    group: DeckGroup,
    generators: Vec<CMat>,
    dim: usize,
    certificate: Vec<u64>,
}

impl MatrixRep {
    pub fn new(group: DeckGroup, generators: Vec<CMat>) -> Result<Self> {
        let expected = match &group {
            DeckGroup::Integers => 1,
            DeckGroup::Symmetric { n } => n.saturating_sub(1),
            DeckGroup::Free { rank, .. } => *rank as usize,
            DeckGroup::Semidirect { .. } => {
                return Err(Error::Unsupported(
                    "semidirect deck groups carry twisted representations; use TwistedRepTable".into(),
                ))
            }
        };
        if generators.len() != expected {
            return Err(Error::invalid(format!(
                "{} needs {expected} generator matrices, got {}",
                group.name(),
                generators.len()
            )));
        }
        let dim = generators.first().map(|g| g.nrows()).unwrap_or(1);
        for g in &generators {
            if g.shape() != (dim, dim) {
                return Err(Error::invalid("generator matrices must be square and of equal size"));
            }
            let r = unitarity_residual(g);
            if r > MATRIX_TOL {
                return Err(Error::NotUnitary { residual: r });
            }
        }
        if let DeckGroup::Symmetric { n } = group {
            let id = identity(dim);
            for (i, s) in generators.iter().enumerate() {
                if max_abs_diff(&(s * s), &id) > MATRIX_TOL {
                    return Err(Error::RelationViolated(format!("Γ(s{})² ≠ I", i + 1)));
                }
            }
            for i in 0..n.saturating_sub(1) {
                for j in i + 1..n.saturating_sub(1) {
                    let prod = &generators[i] * &generators[j];
                    let rel = if j == i + 1 {
                        &prod * &prod * &prod
                    } else {
                        &prod * &prod
                    };
                    if max_abs_diff(&rel, &id) > MATRIX_TOL {
                        return Err(Error::RelationViolated(format!(
                            "Coxeter relation between s{} and s{}",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(Self {
            group,
            generators,
            dim,
            certificate: Vec::new(),
        })
    }

    /// Single-generator ℤ representation.
    pub fn ring(gamma1: CMat) -> Result<Self> {
        Self::new(DeckGroup::Integers, vec![gamma1])
    }

    /// Γ₁ = exp(−4πi μλ/ħ e·σ) for a neutral spin-½ particle with magnetic
    /// moment μ encircling a line charge of density λ along `axis`.
    pub fn aharonov_casher(mu_lambda: f64, axis: [f64; 3], hbar: f64) -> Result<Self> {
        let norm = (axis[0].powi(2) + axis[1].powi(2) + axis[2].powi(2)).sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("wire axis must be nonzero"));
        }
        let e = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let angle = 4.0 * std::f64::consts::PI * mu_lambda / hbar;
        Self::ring(expm_hermitian(&pauli_dot(e), angle))
    }

    pub fn group(&self) -> &DeckGroup {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    /// Hashes of potential samples that passed `check_commutes`.
    pub fn certificate(&self) -> &[u64] {
        &self.certificate
    }

    pub fn is_trivial(&self) -> bool {
        let id = identity(self.dim);
        self.generators.iter().all(|g| max_abs_diff(g, &id) <= MATRIX_TOL)
    }

    /// True when every generator is a multiple of the identity, i.e. the
    /// representation is a character times I.
    pub fn is_scalar(&self) -> bool {
        self.generators.iter().all(|g| scalar_value(g, MATRIX_TOL).is_some())
    }

    fn word_matrix(&self, w: &FreeWord) -> CMat {
        w.letters().iter().fold(identity(self.dim), |acc, &l| {
            let g = &self.generators[l.unsigned_abs() as usize - 1];
            if l > 0 {
                acc * g
            } else {
                acc * g.adjoint()
            }
        })
    }

    /// `Γ_σ`
    pub fn evaluate(&self, sigma: &DeckElement) -> Result<CMat> {
        self.group.check(sigma)?;
        Ok(match sigma {
            DeckElement::Winding(k) => {
                let g = if *k >= 0 {
                    self.generators[0].clone()
                } else {
                    self.generators[0].adjoint()
                };
                (0..k.unsigned_abs()).fold(identity(self.dim), |acc, _| acc * &g)
            }
            DeckElement::Perm(p) => p
                .adjacent_transpositions()
                .iter()
                .fold(identity(self.dim), |acc, &i| acc * &self.generators[i]),
            DeckElement::Word(w) => self.word_matrix(w),
            DeckElement::Semidirect { .. } => unreachable!("rejected at construction"),
        })
    }

    /// `U Γ U⁻¹` for unitary `U`.
    pub fn conjugate(&self, u: &CMat) -> Result<Self> {
        let r = unitarity_residual(u);
        if r > 1e-10 {
            return Err(Error::NotUnitary { residual: r });
        }
        let gens = self.generators.iter().map(|g| u * g * u.adjoint()).collect();
        let mut out = Self::new(self.group.clone(), gens)?;
        out.certificate.clear();
        Ok(out)
    }

    /// Whether `other = U self U⁻¹` on every generator, for the supplied `U`.
    pub fn is_conjugate_via(&self, other: &Self, u: &CMat, tol: f64) -> bool {
        self.group == other.group
            && self.dim == other.dim
            && self
                .generators
                .iter()
                .zip(&other.generators)
                .all(|(g, h)| max_abs_diff(&(u * g * u.adjoint()), h) <= tol)
    }

    /// Records the samples in the commutation certificate after a passing check.
    pub fn certify(&mut self, potential_samples: &[CMat]) -> Result<bool> {
        let ok = check_commutes(self, potential_samples)?;
        if ok {
            self.certificate.extend(potential_samples.iter().map(hash_matrix));
        }
        Ok(ok)
    }
}

pub(crate) fn hash_matrix(m: &CMat) -> u64 {
    let mut h = DefaultHasher::new();
    m.shape().hash(&mut h);
    for z in m.iter() {
        z.re.to_bits().hash(&mut h);
        z.im.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Largest commutator entry `max_{g,i} ‖[Γ_g, V(q_i)]‖_max`.
pub fn commutation_residual(factor: &MatrixRep, potential_samples: &[CMat]) -> Result<f64> {
    let mut worst = 0.0f64;
    for v in potential_samples {
        if v.shape() != (factor.dim(), factor.dim()) {
            return Err(Error::invalid(format!(
                "potential sample is {:?}, factor acts on dimension {}",
                v.shape(),
                factor.dim()
            )));
        }
        let h = hermiticity_residual(v);
        if h > 1e-12 {
            return Err(Error::NotHermitian { residual: h });
        }
        for g in factor.generators() {
            worst = worst.max(max_abs(&commutator(g, v)));
        }
    }
    Ok(worst)
}

/// True iff every generator commutes with every potential sample to 1e−10.
pub fn check_commutes(factor: &MatrixRep, potential_samples: &[CMat]) -> Result<bool> {
    Ok(commutation_residual(factor, potential_samples)? <= COMMUTE_TOL)
}

/// Checks covariance `V*(σq̂) = Γ_σ V*(q̂) Γ_σ⁻¹` of a cover-side potential.
///
/// `sheets[s][j]` is V* at base grid point `j` on consecutive sheet `s`; the
/// factor must be a ℤ representation.
pub fn check_covariant_potential(sheets: &[Vec<CMat>], factor: &MatrixRep, tol: f64) -> Result<bool> {
    Ok(covariance_residual(sheets, factor)? <= tol)
}

pub fn covariance_residual(sheets: &[Vec<CMat>], factor: &MatrixRep) -> Result<f64> {
    if factor.group() != &DeckGroup::Integers {
        return Err(Error::Unsupported(
            "covariant potentials are checked on ring covers".into(),
        ));
    }
    if sheets.len() < 2 {
        return Err(Error::InsufficientData("need at least two sheets".into()));
    }
    let n = sheets[0].len();
    if sheets.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("sheets sampled at different base points"));
    }
    let g = &factor.generators()[0];
    let mut worst = 0.0f64;
    for pair in sheets.windows(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            if a.shape() != g.shape() || b.shape() != g.shape() {
                return Err(Error::invalid("sample dimension mismatch"));
            }
            worst = worst.max(max_abs_diff(b, &(g * a * g.adjoint())));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::Permutation;
    use crate::linalg::{c, pauli_x, pauli_z, UnitaryEigen};
    use std::f64::consts::PI;

    #[test]
    fn scalar_factor_commutes_with_anything() {
        let g = MatrixRep::ring(identity(2) * c(0.0, 1.0)).unwrap();
        let v = pauli_dot([0.3, 0.1, -2.0]) + identity(2) * c(0.5, 0.0);
        assert!(check_commutes(&g, &[v, pauli_x()]).unwrap());
    }

    #[test]
    fn full_turn_spin_factor_is_minus_identity() {
        // exp(−iπ e·σ) = −I for unit e
        let g = MatrixRep::ring(expm_hermitian(&pauli_dot([0.0, 0.6, 0.8]), PI)).unwrap();
        assert!(g.is_scalar());
        assert!(check_commutes(&g, &[pauli_x(), pauli_z()]).unwrap());
    }

    #[test]
    fn quarter_turn_about_z_fails_with_sigma_x() {
        // Γ = exp(−i π/2 σ_z) = −iσ_z, [−iσ_z, σ_x] = 2σ_y, max entry 2
        let g = MatrixRep::ring(expm_hermitian(&pauli_z(), PI / 2.0)).unwrap();
        let r = commutation_residual(&g, &[pauli_x()]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        assert!(!check_commutes(&g, &[pauli_x()]).unwrap());
    }

    #[test]
    fn non_hermitian_sample_rejected() {
        let g = MatrixRep::ring(identity(2)).unwrap();
        let bad = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(check_commutes(&g, &[bad]), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn non_unitary_generator_rejected() {
        assert!(matches!(
            MatrixRep::ring(identity(2) * c(1.1, 0.0)),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn permutation_rep_of_s3() {
        // natural 3-dim permutation representation
        let perm_matrix =
            |p: &Permutation| CMat::from_fn(3, 3, |i, j| if p.apply(j) == i { c(1., 0.) } else { c(0., 0.) });
        let gens = (0..2)
            .map(|i| perm_matrix(&Permutation::transposition(3, i, i + 1)))
            .collect();
        let rep = MatrixRep::new(DeckGroup::Symmetric { n: 3 }, gens).unwrap();
        for p in Permutation::all(3) {
            let m = rep.evaluate(&DeckElement::Perm(p.clone())).unwrap();
            assert!(max_abs_diff(&m, &perm_matrix(&p)) < 1e-15);
        }
    }

    #[test]
    fn broken_coxeter_relation_rejected() {
        let gens = vec![pauli_x(), pauli_z()];
        assert!(matches!(
            MatrixRep::new(DeckGroup::Symmetric { n: 3 }, gens),
            Err(Error::RelationViolated(_))
        ));
    }

    #[test]
    fn covariant_potential_checks() {
        let n = 16;
        let gamma = expm_hermitian(&pauli_x(), 0.7);
        let rep = MatrixRep::ring(gamma.clone()).unwrap();
        let eig = UnitaryEigen::new(&gamma).unwrap();
        // V*(θ) = Γ^{θ/2π} σ_z Γ^{−θ/2π}
        let sheets: Vec<Vec<CMat>> = (0..3)
            .map(|s| {
                (0..n)
                    .map(|j| {
                        let t = s as f64 + j as f64 / n as f64;
                        eig.power(t) * pauli_z() * eig.power(-t)
                    })
                    .collect()
            })
            .collect();
        assert!(check_covariant_potential(&sheets, &rep, 1e-12).unwrap());

        // sheet-independent σ_z with a quarter-turn about x is not covariant
        let quarter = MatrixRep::ring(expm_hermitian(&pauli_x(), PI / 2.0)).unwrap();
        let flat = vec![vec![pauli_z(); n]; 3];
        assert!(!check_covariant_potential(&flat, &quarter, 1e-9).unwrap());

        // projectable V* with a scalar factor
        let scalar = MatrixRep::ring(identity(2) * c(-1., 0.)).unwrap();
        assert!(check_covariant_potential(&flat, &scalar, 1e-12).unwrap());
    }

    #[test]
    fn certificate_records_samples() {
        let mut g = MatrixRep::ring(identity(2) * c(0., 1.)).unwrap();
        assert!(g.certify(&[pauli_x(), pauli_z()]).unwrap());
        assert_eq!(g.certificate().len(), 2);
    }
}
