use num_complex::Complex64;

use super::character::Character;
use super::matrix_rep::MatrixRep;
use crate::error::{Error, Result};
use crate::linalg::{commutator, max_abs, CMat};

/// Fixed, generic weights for combining commuting generators before a single
/// Schur decomposition.
const MIX: [f64; 6] = [
    1.0,
    0.577_215_664_9,
    0.412_310_562_6,
    0.141_421_356_2,
    0.271_828_182_8,
    0.161_803_398_9,
];

/// One isotypic piece `(γ^{(i)}, W^{(i)})` of `Γ_σ = Σ γ_σ^{(i)} P_{W^{(i)}}`.
#[derive(Debug, Clone)]
pub struct CharacterSector {
    pub character: Character,
    /// Orthonormal basis of `W^{(i)}` as columns.
    pub basis: CMat,
}

impl CharacterSector {
    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }
}

/// Simultaneous eigendecomposition of commuting unitary generators into
/// character sectors.
pub fn decompose_by_character(rep: &MatrixRep) -> Result<Vec<CharacterSector>> {
    let gens = rep.generators();
    let k = rep.dim();
    for (i, a) in gens.iter().enumerate() {
        for b in &gens[i + 1..] {
            let r = max_abs(&commutator(a, b));
            if r > 1e-10 {
                return Err(Error::DecompositionUnavailable(format!(
                    "generators do not commute (residual {r:.3e})"
                )));
            }
        }
    }
    let mut mixed = CMat::zeros(k, k);
    for (i, g) in gens.iter().enumerate() {
        mixed += g * Complex64::from(MIX[i % MIX.len()] * (1.0 + i as f64 / 7.0));
    }
    let (q, t) = mixed.schur().unpack();
    for i in 0..k {
        for j in 0..k {
            if i != j && t[(i, j)].norm() > 1e-9 {
                return Err(Error::DecompositionUnavailable("generators are not normal".into()));
            }
        }
    }

    let mut groups: Vec<(Vec<Complex64>, Vec<usize>)> = Vec::new();
    for col in 0..k {
        let v = q.column(col).into_owned();
        let values: Vec<Complex64> = gens
            .iter()
            .map(|g| {
                let gv = g * &v;
                v.dotc(&gv)
            })
            .collect();
        for (g, gamma) in gens.iter().zip(&values) {
            let resid = (g * &v - &v * *gamma).norm();
            if resid > 1e-9 {
                return Err(Error::DecompositionUnavailable(format!(
                    "accidental degeneracy left a mixed eigenvector (residual {resid:.3e})"
                )));
            }
        }
        match groups
            .iter_mut()
            .find(|(vals, _)| vals.iter().zip(&values).all(|(a, b)| (a - b).norm() < 1e-8))
        {
            Some((_, cols)) => cols.push(col),
            None => groups.push((values, vec![col])),
        }
    }

    groups
        .into_iter()
        .map(|(values, cols)| {
            let values: Vec<Complex64> = values.iter().map(|v| v / v.norm()).collect();
            let character = Character::new(rep.group().clone(), values)?;
            let basis = CMat::from_columns(&cols.iter().map(|&c| q.column(c)).collect::<Vec<_>>());
            Ok(CharacterSector { character, basis })
        })
        .collect()
}
