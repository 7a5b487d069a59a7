use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use super::matrix_rep::{commutation_residual, COMMUTE_TOL, MATRIX_TOL};
use super::TopFactor;
use crate::error::{Error, Result};
use crate::linalg::{hermiticity_residual, identity, numerical_rank, scalar_value, CMat};

/// Default cap on product length when generating Alg({V(q_i)}).
pub const DEFAULT_WORD_LENGTH_CAP: usize = 6;
/// Singular-value threshold for the algebra span rank.
pub const SPAN_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DynamicsClass {
    /// Immediate dynamics (trivial factor).
    C0,
    /// Character-twisted dynamics.
    C1,
    /// Matrix-valued or twisted-representation dynamics.
    C2,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub label: DynamicsClass,
    pub compatible: bool,
    pub verdict: String,
    pub commutation_residual: f64,
    pub algebra_span_dim: usize,
    pub value_dim: usize,
    pub algebra_is_full: bool,
}

fn vectorize(m: &CMat) -> DVector<Complex64> {
    DVector::from_iterator(m.len(), m.iter().copied())
}

/// Dimension of the unital algebra generated by `samples`, computed as the
/// linear span of all products of at most `cap` samples.
pub fn algebra_span_dim(samples: &[CMat], cap: usize) -> Result<usize> {
    let k = samples
        .first()
        .map(|m| m.nrows())
        .ok_or_else(|| Error::InsufficientData("at least one potential sample required".into()))?;
    if samples.iter().any(|m| m.shape() != (k, k)) {
        return Err(Error::invalid("potential samples of different dimension"));
    }
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let add = |m: &CMat, basis: &mut Vec<DVector<Complex64>>| -> Option<CMat> {
        let mut v = vectorize(m);
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return None;
        }
        // two passes of Gram–Schmidt
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > SPAN_RANK_TOL * norm0 {
            v /= Complex64::from(norm);
            basis.push(v.clone());
            Some(CMat::from_iterator(k, k, v.iter().copied()))
        } else {
            None
        }
    };
    let mut frontier: Vec<CMat> = add(&identity(k), &mut basis).into_iter().collect();
    for _ in 0..cap {
        if basis.len() == k * k || frontier.is_empty() {
            break;
        }
        let mut next = Vec::new();
        for f in &frontier {
            for v in samples {
                if let Some(m) = add(&(f * v), &mut basis) {
                    next.push(m);
                }
            }
        }
        frontier = next;
    }
    let stacked = CMat::from_columns(&basis);
    Ok(numerical_rank(&stacked, SPAN_RANK_TOL))
}

/// Places a factor in C0 / C1 / C2 and decides compatibility with the
/// supplied potential samples.
///
/// A non-scalar factor is compatible only if it commutes with every sample;
/// when the samples generate all of End(W) that can never happen.
pub fn classify_dynamics(
    factor: &TopFactor,
    potential_samples: &[CMat],
    word_length_cap: usize,
) -> Result<Classification> {
    if potential_samples.is_empty() {
        return Err(Error::InsufficientData("at least one potential sample required".into()));
    }
    for v in potential_samples {
        let h = hermiticity_residual(v);
        if h > 1e-12 {
            return Err(Error::NotHermitian { residual: h });
        }
    }
    let k = potential_samples[0].nrows();
    let span = algebra_span_dim(potential_samples, word_length_cap)?;
    let full = span == k * k;

    let (label, scalar, residual) = match factor {
        TopFactor::Character(ch) => {
            let label = if ch.is_trivial() {
                DynamicsClass::C0
            } else {
                DynamicsClass::C1
            };
            (label, true, 0.0)
        }
        TopFactor::Matrix(rep) => {
            let residual = commutation_residual(rep, potential_samples)?;
            let label = if rep.is_trivial() {
                DynamicsClass::C0
            } else if rep.is_scalar() {
                DynamicsClass::C1
            } else {
                DynamicsClass::C2
            };
            (label, rep.is_scalar(), residual)
        }
        TopFactor::Twisted(table) => {
            if table.dim() != k {
                return Err(Error::invalid("factor and potential act on different spaces"));
            }
            let mut residual = 0.0f64;
            let mut scalar = true;
            for e in table.elements() {
                let g = &table.entry(e).expect("element in table").gamma;
                scalar &= scalar_value(g, MATRIX_TOL).is_some();
                for v in potential_samples {
                    residual = residual.max(crate::linalg::max_abs(&crate::linalg::commutator(g, v)));
                }
            }
            (DynamicsClass::C2, scalar, residual)
        }
    };

    let (compatible, verdict) = if scalar {
        (
            true,
            match label {
                DynamicsClass::C0 => "immediate dynamics".to_string(),
                _ => "given by a character; compatible with every potential".to_string(),
            },
        )
    } else if residual > COMMUTE_TOL {
        (
            false,
            format!(
                "incompatible: factor does not commute with every V(q) (residual {residual:.3e}){}",
                if full {
                    "; potential samples generate End(W), so only characters are admissible"
                } else {
                    ""
                }
            ),
        )
    } else if full {
        (
            false,
            "incompatible: potential samples generate End(W), so only characters are admissible".into(),
        )
    } else {
        (
            true,
            "not given by a character; commutes with every sampled V(q)".to_string(),
        )
    };

    Ok(Classification {
        label,
        compatible,
        verdict,
        commutation_residual: residual,
        algebra_span_dim: span,
        value_dim: k,
        algebra_is_full: full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, expm_hermitian, pauli_dot, pauli_x, pauli_z};
    use crate::topofactor::{Character, MatrixRep};

    #[test]
    fn antiperiodic_character_is_c1() {
        let f = TopFactor::Character(Character::ring(std::f64::consts::PI));
        let v = CMat::from_element(1, 1, c(0.3, 0.0));
        let cl = classify_dynamics(&f, &[v], 6).unwrap();
        assert_eq!(cl.label, DynamicsClass::C1);
        assert!(cl.compatible);
    }

    #[test]
    fn trivial_is_c0() {
        let f = TopFactor::Matrix(MatrixRep::ring(identity(2)).unwrap());
        let cl = classify_dynamics(&f, &[pauli_x()], 6).unwrap();
        assert_eq!(cl.label, DynamicsClass::C0);
    }

    #[test]
    fn spin_rotation_with_zero_potential_is_c2() {
        let f = TopFactor::Matrix(MatrixRep::aharonov_casher(0.1, [0., 0., 1.], 1.0).unwrap());
        let cl = classify_dynamics(&f, &[CMat::zeros(2, 2)], 6).unwrap();
        assert_eq!(cl.label, DynamicsClass::C2);
        assert!(cl.compatible);
        assert_eq!(cl.algebra_span_dim, 1);
    }

    #[test]
    fn pauli_pair_generates_everything() {
        assert_eq!(algebra_span_dim(&[pauli_x(), pauli_z()], 6).unwrap(), 4);
        assert_eq!(algebra_span_dim(&[pauli_z()], 6).unwrap(), 2);
        // cap 1 only reaches span{I, σx, σz}
        assert_eq!(algebra_span_dim(&[pauli_x(), pauli_z()], 1).unwrap(), 3);
    }

    #[test]
    fn commuting_diagonal_potential_admits_matrix_factor() {
        let g = MatrixRep::ring(expm_hermitian(&pauli_z(), 0.4)).unwrap();
        let v = pauli_dot([0., 0., 0.7]) + identity(2) * c(1.0, 0.0);
        let cl = classify_dynamics(&TopFactor::Matrix(g), &[v], 6).unwrap();
        assert_eq!(cl.label, DynamicsClass::C2);
        assert!(cl.compatible);
        assert!(!cl.algebra_is_full);
    }
}
