use std::sync::Arc;

use num_complex::Complex64;
use serde_json::json;

use super::finite::FiniteGroup;
use crate::covering::{DeckElement, DeckGroup, FreeWord};
use crate::error::{Error, Result};

/// Tolerance on |γ| = 1 and on group relations.
pub const UNIMODULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum CharacterDomain {
    Deck(DeckGroup),
    Finite(Arc<FiniteGroup>),
}

impl CharacterDomain {
    pub fn name(&self) -> String {
        match self {
            CharacterDomain::Deck(g) => g.name(),
            CharacterDomain::Finite(g) => g.name().to_string(),
        }
    }
}

/// A one-dimensional unitary representation γ of a covering group.
///
/// Stored as its values on the standard generators; every other value follows
/// from `γ_{στ} = γ_σ γ_τ`.
#[derive(Debug, Clone)]
pub struct Character {
    domain: CharacterDomain,
    values: Vec<Complex64>,
    /// Twist angle for ℤ characters, kept unreduced so that e.g. a flux
    /// `Φ` and `Φ + 2π` remain distinguishable as gauges.
    beta: Option<f64>,
}

fn check_unimodular(values: &[Complex64]) -> Result<()> {
    for v in values {
        let m = v.norm();
        if (m - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::NonUnimodular { modulus: m });
        }
    }
    Ok(())
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

fn check_coxeter(values: &[Complex64]) -> Result<()> {
    let one = Complex64::new(1.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        if !close(v * v, one, 1e-10) {
            return Err(Error::RelationViolated(format!("s{}² ≠ 1 (value {v})", i + 1)));
        }
    }
    for (i, w) in values.windows(2).enumerate() {
        if !close((w[0] * w[1]).powi(3), one, 1e-10) {
            return Err(Error::RelationViolated(format!("(s{} s{})³ ≠ 1", i + 1, i + 2)));
        }
    }
    Ok(())
}

impl Character {
    /// Builds a character from its values on the generators of `deck`.
    ///
    /// Values must be unimodular and satisfy the group's relations.
    pub fn new(deck: DeckGroup, generator_values: Vec<Complex64>) -> Result<Self> {
        let expected = match &deck {
            DeckGroup::Integers => 1,
            DeckGroup::Symmetric { n } => n.saturating_sub(1),
            DeckGroup::Free { rank, .. } => *rank as usize,
            DeckGroup::Semidirect { n, rank, .. } => n.saturating_sub(1) + *rank as usize,
        };
        if generator_values.len() != expected {
            return Err(Error::invalid(format!(
                "{} needs {expected} generator values, got {}",
                deck.name(),
                generator_values.len()
            )));
        }
        check_unimodular(&generator_values)?;
        match &deck {
            DeckGroup::Symmetric { .. } => check_coxeter(&generator_values)?,
            DeckGroup::Semidirect { n, .. } => check_coxeter(&generator_values[..n - 1])?,
            _ => {}
        }
        let beta = match deck {
            DeckGroup::Integers => Some(generator_values[0].arg()),
            _ => None,
        };
        Ok(Self {
            domain: CharacterDomain::Deck(deck),
            values: generator_values,
            beta,
        })
    }

    /// The ℤ character `γ_k = e^{ikβ}`.
    pub fn ring(beta: f64) -> Self {
        Self {
            domain: CharacterDomain::Deck(DeckGroup::Integers),
            values: vec![Complex64::from_polar(1.0, beta)],
            beta: Some(beta),
        }
    }

    /// Character of a finite permutation group; consistency is checked over
    /// the whole Cayley graph.
    pub fn on_finite(group: Arc<FiniteGroup>, generator_values: Vec<Complex64>) -> Result<Self> {
        if generator_values.len() != group.generators().len() {
            return Err(Error::invalid("one value per generator required"));
        }
        check_unimodular(&generator_values)?;
        let vals = finite_values(&group, &generator_values);
        for (i, g, j) in group.cayley_edges() {
            if !close(vals[j], vals[i] * generator_values[g], 1e-10) {
                return Err(Error::RelationViolated(format!(
                    "generator values are not a homomorphism on {}",
                    group.name()
                )));
            }
        }
        Ok(Self {
            domain: CharacterDomain::Finite(group),
            values: generator_values,
            beta: None,
        })
    }

    pub fn domain(&self) -> &CharacterDomain {
        &self.domain
    }

    pub fn generator_values(&self) -> &[Complex64] {
        &self.values
    }

    /// Twist angle β of a ℤ character (`γ₁ = e^{iβ}`).
    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn is_trivial(&self) -> bool {
        self.values
            .iter()
            .all(|v| close(*v, Complex64::new(1.0, 0.0), UNIMODULAR_TOL))
    }

    fn word_value(&self, w: &FreeWord, offset: usize) -> Complex64 {
        w.letters().iter().fold(Complex64::new(1.0, 0.0), |acc, &l| {
            let v = self.values[offset + l.unsigned_abs() as usize - 1];
            if l > 0 {
                acc * v
            } else {
                acc * v.conj()
            }
        })
    }

    /// `γ_σ`
    pub fn evaluate(&self, sigma: &DeckElement) -> Result<Complex64> {
        match &self.domain {
            CharacterDomain::Deck(g) => {
                g.check(sigma)?;
                Ok(match sigma {
                    DeckElement::Winding(k) => match self.beta {
                        Some(b) => Complex64::from_polar(1.0, *k as f64 * b),
                        None => self.values[0].powi(*k as i32),
                    },
                    DeckElement::Perm(p) => p
                        .adjacent_transpositions()
                        .iter()
                        .fold(Complex64::new(1.0, 0.0), |acc, &i| acc * self.values[i]),
                    DeckElement::Word(w) => self.word_value(w, 0),
                    DeckElement::Semidirect { perm, words } => {
                        let offset = perm.degree() - 1;
                        let perm_part = perm
                            .adjacent_transpositions()
                            .iter()
                            .fold(Complex64::new(1.0, 0.0), |acc, &i| acc * self.values[i]);
                        words.iter().fold(perm_part, |acc, w| acc * self.word_value(w, offset))
                    }
                })
            }
            CharacterDomain::Finite(g) => {
                let DeckElement::Perm(p) = sigma else {
                    return Err(Error::MixedGroups(format!("{sigma:?} not in {}", g.name())));
                };
                let i = g
                    .index_of(p)
                    .ok_or_else(|| Error::MixedGroups(format!("{p:?} not in {}", g.name())))?;
                Ok(g.word_of(i)
                    .iter()
                    .fold(Complex64::new(1.0, 0.0), |acc, &gi| acc * self.values[gi]))
            }
        }
    }

    /// JSON table row: group name and generator values as `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "group": self.domain.name(),
            "generator_values": self.values.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
            "beta": self.beta,
        })
    }
}

fn finite_values(group: &FiniteGroup, gen_values: &[Complex64]) -> Vec<Complex64> {
    (0..group.order())
        .map(|i| {
            group
                .word_of(i)
                .iter()
                .fold(Complex64::new(1.0, 0.0), |acc, &g| acc * gen_values[g])
        })
        .collect()
}

/// All characters of a finite group.
///
/// The number of characters equals the order `m` of the abelianization,
/// and every character takes values in the m-th roots of unity, so the
/// candidates are the tuples in `(ℤ_m)^r` over the `r` generators.
pub fn enumerate_characters(group: &Arc<FiniteGroup>) -> Result<Vec<Character>> {
    let m = group.abelianization_order();
    let r = group.generators().len();
    let candidates = (m as f64).powi(r as i32);
    if candidates > 1e6 {
        return Err(Error::Unsupported(format!(
            "{candidates:e} candidate generator assignments"
        )));
    }
    let roots: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / m as f64))
        .collect();
    let mut out = Vec::new();
    let mut digits = vec![0usize; r];
    loop {
        let values: Vec<Complex64> = digits.iter().map(|&d| roots[d]).collect();
        if let Ok(ch) = Character::on_finite(group.clone(), values) {
            out.push(ch);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == r {
                return Ok(out);
            }
            digits[pos] += 1;
            if digits[pos] < m {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}
