//! Covering spaces, deck-group actions, lifts and projections.
//!
//! Four covers are supported: the real line over the ring S¹, the
//! two-particle ring (identical particles, exchange plus per-particle
//! windings), an abstract cover of a base with free fundamental group, and
//! the N-particle cover `M̂ᴺ∖Δ` of `ᴺM` whose deck group is the semidirect
//! product `S_N ⋉ Cov(M̂, M)ᴺ`. Only the deck algebra of the last two is
//! materialized; there is no geometric grid on them.

mod deck;
mod perm;
mod word;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use deck::{DeckElement, DeckGroup};
pub use perm::Permutation;
pub use word::{FreeWord, DEFAULT_MAX_WORD_LEN};

use crate::error::{Error, Result};

/// Default number of deck translates materialized on each side of sheet 0.
pub const DEFAULT_SHEET_WINDOW: i64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverKind {
    Ring { circumference: f64 },
    TwoParticleRing { circumference: f64 },
    AbstractFreeCover { rank: u32 },
    NFermionCover { n: usize, rank: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringSpace {
    pub kind: CoverKind,
    pub sheet_window: i64,
    pub word_cap: usize,
}

/// A point of ℝ written as (sheet, angle) with the angle in `[0, 2π)`.
///
/// Keeping the sheet index separate avoids floating-point drift across many
/// windings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingPoint {
    pub sheet: i64,
    pub angle: f64,
}

impl RingPoint {
    /// Normalizes an arbitrary lifted coordinate.
    pub fn from_lifted(theta: f64) -> Self {
        let sheet = (theta / TAU).floor();
        let mut angle = theta - sheet * TAU;
        let mut sheet = sheet as i64;
        if angle >= TAU {
            angle -= TAU;
            sheet += 1;
        }
        if angle < 0.0 {
            angle = 0.0;
        }
        Self { sheet, angle }
    }

    pub fn lifted(&self) -> f64 {
        self.sheet as f64 * TAU + self.angle
    }
}

/// A point in a free cover: a base label plus the deck element reaching its sheet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FreePoint {
    pub base: u32,
    pub sheet: FreeWord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CoverPoint {
    Ring(RingPoint),
    RingTuple(Vec<RingPoint>),
    Free(FreePoint),
    FreeTuple(Vec<FreePoint>),
}

/// A point of the base space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum BasePoint {
    Angle(f64),
    /// Unordered configuration of angles, stored sorted.
    AngleSet(Vec<f64>),
    Free(u32),
    /// Unordered configuration of base labels, stored sorted.
    FreeSet(Vec<u32>),
}

impl CoveringSpace {
    pub fn new(kind: CoverKind) -> Self {
        Self {
            kind,
            sheet_window: DEFAULT_SHEET_WINDOW,
            word_cap: DEFAULT_MAX_WORD_LEN,
        }
    }

    pub fn ring() -> Self {
        Self::new(CoverKind::Ring { circumference: TAU })
    }

    pub fn two_particle_ring() -> Self {
        Self::new(CoverKind::TwoParticleRing { circumference: TAU })
    }

    pub fn with_sheet_window(mut self, window: i64) -> Result<Self> {
        if window < 3 {
            return Err(Error::invalid("sheet window must be at least 3"));
        }
        self.sheet_window = window;
        Ok(self)
    }

    pub fn deck_group(&self) -> DeckGroup {
        match self.kind {
            CoverKind::Ring { .. } => DeckGroup::Integers,
            CoverKind::TwoParticleRing { .. } => DeckGroup::Semidirect {
                n: 2,
                rank: 1,
                word_cap: self.word_cap,
            },
            CoverKind::AbstractFreeCover { rank } => DeckGroup::Free {
                rank,
                word_cap: self.word_cap,
            },
            CoverKind::NFermionCover { n, rank } => DeckGroup::Semidirect {
                n,
                rank,
                word_cap: self.word_cap,
            },
        }
    }

    fn check_ring_point(&self, p: &RingPoint) -> Result<()> {
        if !(0.0..TAU).contains(&p.angle) {
            return Err(Error::invalid(format!("angle {} outside [0, 2π)", p.angle)));
        }
        if p.sheet.abs() > self.sheet_window {
            return Err(Error::OutOfWindow {
                sheet: p.sheet,
                window: self.sheet_window,
            });
        }
        Ok(())
    }

    fn shift_ring(&self, p: &RingPoint, k: i64) -> Result<RingPoint> {
        self.check_ring_point(p)?;
        let out = RingPoint {
            sheet: p.sheet + k,
            angle: p.angle,
        };
        self.check_ring_point(&out)?;
        Ok(out)
    }

    /// `σ q̂`
    pub fn deck_apply(&self, sigma: &DeckElement, qhat: &CoverPoint) -> Result<CoverPoint> {
        let group = self.deck_group();
        group.check(sigma)?;
        match (qhat, sigma) {
            (CoverPoint::Ring(p), DeckElement::Winding(k)) => Ok(CoverPoint::Ring(self.shift_ring(p, *k)?)),
            (CoverPoint::RingTuple(ps), DeckElement::Semidirect { perm, words }) => {
                if ps.len() != perm.degree() {
                    return Err(Error::invalid("tuple length does not match deck group"));
                }
                // (σq̂)_i = σ^(p⁻¹(i)) q̂_{p⁻¹(i)}
                let pinv = perm.inverse();
                let out = (0..ps.len())
                    .map(|i| {
                        let j = pinv.apply(i);
                        self.shift_ring(&ps[j], words[j].exponent_sum(1))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CoverPoint::RingTuple(out))
            }
            (CoverPoint::Free(p), DeckElement::Word(w)) => {
                let sheet = w.mul(&p.sheet);
                sheet.check_cap(self.word_cap)?;
                Ok(CoverPoint::Free(FreePoint { base: p.base, sheet }))
            }
            (CoverPoint::FreeTuple(ps), DeckElement::Semidirect { perm, words }) => {
                if ps.len() != perm.degree() {
                    return Err(Error::invalid("tuple length does not match deck group"));
                }
                let pinv = perm.inverse();
                let out = (0..ps.len())
                    .map(|i| {
                        let j = pinv.apply(i);
                        let sheet = words[j].mul(&ps[j].sheet);
                        sheet.check_cap(self.word_cap)?;
                        Ok(FreePoint {
                            base: ps[j].base,
                            sheet,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CoverPoint::FreeTuple(out))
            }
            _ => Err(Error::MixedGroups(format!(
                "cannot apply {sigma:?} to a point of this cover"
            ))),
        }
    }

    pub fn deck_compose(&self, s1: &DeckElement, s2: &DeckElement) -> Result<DeckElement> {
        self.deck_group().compose(s1, s2)
    }

    /// `π(q̂)`
    pub fn project(&self, qhat: &CoverPoint) -> BasePoint {
        match qhat {
            CoverPoint::Ring(p) => BasePoint::Angle(p.angle),
            CoverPoint::RingTuple(ps) => {
                let mut a: Vec<f64> = ps.iter().map(|p| p.angle).collect();
                a.sort_by(f64::total_cmp);
                BasePoint::AngleSet(a)
            }
            CoverPoint::Free(p) => BasePoint::Free(p.base),
            CoverPoint::FreeTuple(ps) => {
                let mut b: Vec<u32> = ps.iter().map(|p| p.base).collect();
                b.sort_unstable();
                BasePoint::FreeSet(b)
            }
        }
    }

    /// Checks freeness of the action on sample points: `σq̂ = q̂` only for the identity.
    pub fn check_free_action(&self, elements: &[DeckElement], points: &[CoverPoint]) -> Result<bool> {
        for s in elements {
            for q in points {
                let moved = match self.deck_apply(s, q) {
                    Ok(m) => m,
                    Err(Error::OutOfWindow { .. }) => continue,
                    Err(e) => return Err(e),
                };
                if moved == *q && !s.is_identity() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Tests whether cover-side velocity samples descend to the base.
///
/// `sheets[s][j]` is v̂ at base grid point `j` on consecutive sheet `s`.
/// The deck action on ring velocities is trivial, so the field is projectable
/// iff it agrees across sheets.
pub fn is_projectable_field(sheets: &[Vec<f64>], tol: f64) -> Result<bool> {
    Ok(sheet_deviation(sheets)? <= tol)
}

fn sheet_deviation(sheets: &[Vec<f64>]) -> Result<f64> {
    if sheets.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} sheet(s) materialized, need at least 2",
            sheets.len()
        )));
    }
    let n = sheets[0].len();
    if sheets.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("sheets sampled on different grids"));
    }
    let mut dev = 0.0f64;
    for pair in sheets.windows(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            dev = dev.max((a - b).abs());
        }
    }
    Ok(dev)
}

/// Projects a deck-invariant cover density to the base and normalizes it so
/// that `Σ ρ_j Δθ = 1`.
pub fn project_density(sheets: &[Vec<f64>], dtheta: f64) -> Result<Vec<f64>> {
    let dev = sheet_deviation(sheets)?;
    let scale = sheets.iter().flatten().fold(1.0f64, |m, &x| m.max(x.abs()));
    if dev > 1e-9 * scale {
        return Err(Error::NonProjectable { residual: dev });
    }
    let base = &sheets[0];
    let mass: f64 = base.iter().sum::<f64>() * dtheta;
    if !(mass > 0.0) {
        return Err(Error::invalid("density has no mass"));
    }
    Ok(base.iter().map(|x| x / mass).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_pt(sheet: i64, angle: f64) -> CoverPoint {
        CoverPoint::Ring(RingPoint { sheet, angle })
    }

    #[test]
    fn ring_winding_shifts_sheet() {
        let s = CoveringSpace::ring();
        let out = s.deck_apply(&DeckElement::Winding(1), &ring_pt(0, 0.5)).unwrap();
        let CoverPoint::Ring(p) = out else { panic!() };
        assert!((p.lifted() - (0.5 + TAU)).abs() < 1e-15);
        let same = s.deck_apply(&DeckElement::Winding(0), &ring_pt(2, 1.0)).unwrap();
        assert_eq!(same, ring_pt(2, 1.0));
    }

    #[test]
    fn ring_window_overflow() {
        let s = CoveringSpace::ring();
        let r = s.deck_apply(&DeckElement::Winding(2), &ring_pt(2, 0.1));
        assert!(matches!(r, Err(Error::OutOfWindow { sheet: 4, window: 3 })));
    }

    #[test]
    fn nfermion_swap_with_word() {
        // σ = (swap, (a₁, ε)), q̂ = (x̂₁, x̂₂) → (x̂₂, a₁x̂₁)
        let s = CoveringSpace::new(CoverKind::NFermionCover { n: 2, rank: 1 });
        let x1 = FreePoint {
            base: 10,
            sheet: FreeWord::identity(),
        };
        let x2 = FreePoint {
            base: 20,
            sheet: FreeWord::identity(),
        };
        let sigma = DeckElement::Semidirect {
            perm: Permutation::transposition(2, 0, 1),
            words: vec![FreeWord::generator(1), FreeWord::identity()],
        };
        let out = s
            .deck_apply(&sigma, &CoverPoint::FreeTuple(vec![x1.clone(), x2.clone()]))
            .unwrap();
        let a1x1 = FreePoint {
            base: 10,
            sheet: FreeWord::generator(1),
        };
        assert_eq!(out, CoverPoint::FreeTuple(vec![x2, a1x1]));
    }

    #[test]
    fn projection_is_deck_invariant() {
        let s = CoveringSpace::two_particle_ring();
        let q = CoverPoint::RingTuple(vec![
            RingPoint { sheet: 0, angle: 0.3 },
            RingPoint { sheet: 1, angle: 2.0 },
        ]);
        let sigma = DeckElement::Semidirect {
            perm: Permutation::transposition(2, 0, 1),
            words: vec![FreeWord::power(1, -1), FreeWord::generator(1)],
        };
        let moved = s.deck_apply(&sigma, &q).unwrap();
        assert_eq!(s.project(&moved), s.project(&q));
    }

    #[test]
    fn action_is_free_on_samples() {
        let s = CoveringSpace::ring();
        let elems: Vec<_> = (-2..=2).map(DeckElement::Winding).collect();
        let pts: Vec<_> = (0..8).map(|j| ring_pt(0, j as f64 * 0.7)).collect();
        assert!(s.check_free_action(&elems, &pts).unwrap());
    }

    #[test]
    fn projectable_requires_two_sheets() {
        assert!(matches!(
            is_projectable_field(&[vec![1.0, 2.0]], 1e-9),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn quadratic_phase_is_not_projectable() {
        // ψ = e^{iθ²}: v̂ = 2θ shifts by 4π per sheet
        let n = 16;
        let sheets: Vec<Vec<f64>> = (0..3)
            .map(|s| {
                (0..n)
                    .map(|j| 2.0 * (s as f64 * TAU + j as f64 * TAU / n as f64))
                    .collect()
            })
            .collect();
        assert!(!is_projectable_field(&sheets, 1e-9).unwrap());
        // eigenstate e^{i(n + β/2π)θ} has constant velocity
        let constant = vec![vec![1.3; n]; 3];
        assert!(is_projectable_field(&constant, 1e-9).unwrap());
    }

    #[test]
    fn density_projection() {
        let n = 32;
        let dtheta = TAU / n as f64;
        let uniform = vec![vec![5.0; n]; 3];
        let rho = project_density(&uniform, dtheta).unwrap();
        let mass: f64 = rho.iter().sum::<f64>() * dtheta;
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(rho.iter().all(|&r| (r - 1.0 / TAU).abs() < 1e-12));

        // |γ| = 1.1 grows the density by 1.21 per sheet
        let grown: Vec<Vec<f64>> = (0..3).map(|s| vec![1.21f64.powi(s); n]).collect();
        assert!(matches!(
            project_density(&grown, dtheta),
            Err(Error::NonProjectable { .. })
        ));
    }

    #[test]
    fn ring_point_normalization() {
        let p = RingPoint::from_lifted(-0.5);
        assert_eq!(p.sheet, -1);
        assert!((p.lifted() + 0.5).abs() < 1e-15);
        let q = RingPoint::from_lifted(3.0 * TAU + 0.25);
        assert_eq!(q.sheet, 3);
        assert!((q.angle - 0.25).abs() < 1e-12);
    }
}
