use rand::Rng;
use serde::{Deserialize, Serialize};

use super::perm::Permutation;
use super::word::{FreeWord, DEFAULT_MAX_WORD_LEN};
use crate::error::{Error, Result};

/// The covering groups supported here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeckGroup {
    /// ℤ, the deck group of ℝ → S¹.
    Integers,
    /// S_N, generated by adjacent transpositions.
    Symmetric { n: usize },
    /// Free group F_g on `rank` generators.
    Free { rank: u32, word_cap: usize },
    /// S_N ⋉ F_g^N, the deck group of the N-particle cover of ᴺM.
    Semidirect { n: usize, rank: u32, word_cap: usize },
}

impl DeckGroup {
    pub fn free(rank: u32) -> Self {
        DeckGroup::Free {
            rank,
            word_cap: DEFAULT_MAX_WORD_LEN,
        }
    }

    pub fn semidirect(n: usize, rank: u32) -> Self {
        DeckGroup::Semidirect {
            n,
            rank,
            word_cap: DEFAULT_MAX_WORD_LEN,
        }
    }

    pub fn name(&self) -> String {
        match self {
            DeckGroup::Integers => "Z".into(),
            DeckGroup::Symmetric { n } => format!("S{n}"),
            DeckGroup::Free { rank, .. } => format!("F{rank}"),
            DeckGroup::Semidirect { n, rank, .. } => format!("S{n}⋉F{rank}^{n}"),
        }
    }

    pub fn identity(&self) -> DeckElement {
        match self {
            DeckGroup::Integers => DeckElement::Winding(0),
            DeckGroup::Symmetric { n } => DeckElement::Perm(Permutation::identity(*n)),
            DeckGroup::Free { .. } => DeckElement::Word(FreeWord::identity()),
            DeckGroup::Semidirect { n, .. } => DeckElement::Semidirect {
                perm: Permutation::identity(*n),
                words: vec![FreeWord::identity(); *n],
            },
        }
    }

    /// Number of generators in the standard presentation.
    pub fn generators(&self) -> Vec<DeckElement> {
        match self {
            DeckGroup::Integers => vec![DeckElement::Winding(1)],
            DeckGroup::Symmetric { n } => (0..n.saturating_sub(1))
                .map(|i| DeckElement::Perm(Permutation::transposition(*n, i, i + 1)))
                .collect(),
            DeckGroup::Free { rank, .. } => (1..=*rank as i32)
                .map(|j| DeckElement::Word(FreeWord::generator(j)))
                .collect(),
            DeckGroup::Semidirect { n, rank, .. } => {
                let mut gens: Vec<DeckElement> = (0..n.saturating_sub(1))
                    .map(|i| DeckElement::Semidirect {
                        perm: Permutation::transposition(*n, i, i + 1),
                        words: vec![FreeWord::identity(); *n],
                    })
                    .collect();
                for j in 1..=*rank as i32 {
                    let mut words = vec![FreeWord::identity(); *n];
                    words[0] = FreeWord::generator(j);
                    gens.push(DeckElement::Semidirect {
                        perm: Permutation::identity(*n),
                        words,
                    });
                }
                gens
            }
        }
    }

    fn word_cap(&self) -> usize {
        match self {
            DeckGroup::Free { word_cap, .. } | DeckGroup::Semidirect { word_cap, .. } => *word_cap,
            _ => usize::MAX,
        }
    }

    /// Checks that `e` is an element of this group.
    pub fn check(&self, e: &DeckElement) -> Result<()> {
        let ok = match (self, e) {
            (DeckGroup::Integers, DeckElement::Winding(_)) => true,
            (DeckGroup::Symmetric { n }, DeckElement::Perm(p)) => p.degree() == *n,
            (DeckGroup::Free { rank, word_cap }, DeckElement::Word(w)) => {
                w.check_cap(*word_cap)?;
                w.max_generator() <= *rank
            }
            (DeckGroup::Semidirect { n, rank, word_cap }, DeckElement::Semidirect { perm, words }) => {
                for w in words {
                    w.check_cap(*word_cap)?;
                }
                perm.degree() == *n && words.len() == *n && words.iter().all(|w| w.max_generator() <= *rank)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::MixedGroups(format!(
                "{e:?} is not an element of {}",
                self.name()
            )))
        }
    }

    /// Group product `s1 · s2`.
    pub fn compose(&self, s1: &DeckElement, s2: &DeckElement) -> Result<DeckElement> {
        self.check(s1)?;
        self.check(s2)?;
        let out = match (s1, s2) {
            (DeckElement::Winding(a), DeckElement::Winding(b)) => DeckElement::Winding(a + b),
            (DeckElement::Perm(p), DeckElement::Perm(q)) => DeckElement::Perm(p.compose(q)),
            (DeckElement::Word(u), DeckElement::Word(v)) => DeckElement::Word(u.mul(v)),
            (DeckElement::Semidirect { perm: p1, words: w1 }, DeckElement::Semidirect { perm: p2, words: w2 }) => {
                // (p₁,σ̃₁)(p₂,σ̃₂) = (p₁p₂, p₂⁻¹σ̃₁p₂ · σ̃₂), (p₂⁻¹σ̃₁p₂)^(i) = σ₁^(p₂(i))
                let words = (0..w1.len()).map(|i| w1[p2.apply(i)].mul(&w2[i])).collect();
                DeckElement::Semidirect {
                    perm: p1.compose(p2),
                    words,
                }
            }
            _ => unreachable!("membership checked above"),
        };
        if let DeckElement::Word(w) = &out {
            w.check_cap(self.word_cap())?;
        }
        if let DeckElement::Semidirect { words, .. } = &out {
            for w in words {
                w.check_cap(self.word_cap())?;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, s: &DeckElement) -> Result<DeckElement> {
        self.check(s)?;
        Ok(match s {
            DeckElement::Winding(k) => DeckElement::Winding(-k),
            DeckElement::Perm(p) => DeckElement::Perm(p.inverse()),
            DeckElement::Word(w) => DeckElement::Word(w.inverse()),
            DeckElement::Semidirect { perm, words } => {
                // (p,σ̃)⁻¹ = (p⁻¹, τ̃) with τ^(i) = (σ^(p⁻¹(i)))⁻¹
                let pinv = perm.inverse();
                let words = (0..words.len()).map(|i| words[pinv.apply(i)].inverse()).collect();
                DeckElement::Semidirect { perm: pinv, words }
            }
        })
    }

    /// A random element with word length (or |winding|) at most `max_len`.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> DeckElement {
        let random_word = |rng: &mut R, rank: u32| {
            let len = rng.random_range(0..=max_len);
            let letters: Vec<i32> = (0..len)
                .map(|_| {
                    let g = rng.random_range(1..=rank as i32);
                    if rng.random_bool(0.5) {
                        g
                    } else {
                        -g
                    }
                })
                .collect();
            FreeWord::reduce(letters).expect("nonzero letters")
        };
        let random_perm = |rng: &mut R, n: usize| {
            let mut images: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                images.swap(i, j);
            }
            Permutation::new(images).expect("shuffle is a bijection")
        };
        match self {
            DeckGroup::Integers => {
                let m = max_len as i64;
                DeckElement::Winding(rng.random_range(-m..=m))
            }
            DeckGroup::Symmetric { n } => DeckElement::Perm(random_perm(rng, *n)),
            DeckGroup::Free { rank, .. } => DeckElement::Word(random_word(rng, *rank)),
            DeckGroup::Semidirect { n, rank, .. } => DeckElement::Semidirect {
                perm: random_perm(rng, *n),
                words: (0..*n).map(|_| random_word(rng, *rank)).collect(),
            },
        }
    }
}

/// An element of one of the supported covering groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DeckElement {
    /// Integer winding number (ℤ).
    Winding(i64),
    /// Permutation (S_N).
    Perm(Permutation),
    /// Reduced free-group word (F_g).
    Word(FreeWord),
    /// Pair `(p, σ̃)` with `σ̃ = (σ^(1), …, σ^(N))`.
    Semidirect { perm: Permutation, words: Vec<FreeWord> },
}

impl DeckElement {
    pub fn is_identity(&self) -> bool {
        match self {
            DeckElement::Winding(k) => *k == 0,
            DeckElement::Perm(p) => p.is_identity(),
            DeckElement::Word(w) => w.is_empty(),
            DeckElement::Semidirect { perm, words } => perm.is_identity() && words.iter().all(FreeWord::is_empty),
        }
    }
}
