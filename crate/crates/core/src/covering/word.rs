use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on reduced word length.
pub const DEFAULT_MAX_WORD_LEN: usize = 64;

/// A reduced word in the free group on generators `a₁ … a_g`.
///
/// Letter `+j` stands for `a_j`, `−j` for `a_j⁻¹` (`j ≥ 1`). Adjacent
/// `a_j a_j⁻¹` pairs never occur.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct FreeWord {
    letters: Vec<i32>,
}

impl FreeWord {
    /// Builds a word from letters that must already be reduced.
    pub fn new(letters: Vec<i32>) -> Result<Self> {
        if letters.contains(&0) {
            return Err(Error::invalid("letter 0 is not a generator"));
        }
        if let Some(position) = letters.windows(2).position(|w| w[0] == -w[1]) {
            return Err(Error::NonReducedWord { position });
        }
        Ok(Self { letters })
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn reduce(letters: impl IntoIterator<Item = i32>) -> Result<Self> {
        let mut stack: Vec<i32> = Vec::new();
        for l in letters {
            if l == 0 {
                return Err(Error::invalid("letter 0 is not a generator"));
            }
            if stack.last() == Some(&-l) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Ok(Self { letters: stack })
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn generator(j: i32) -> Self {
        assert!(j != 0);
        Self { letters: vec![j] }
    }

    /// `a_j^m`
    pub fn power(j: i32, m: i64) -> Self {
        assert!(j > 0);
        let l = if m >= 0 { j } else { -j };
        Self {
            letters: vec![l; m.unsigned_abs() as usize],
        }
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Largest generator index used.
    pub fn max_generator(&self) -> u32 {
        self.letters.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0)
    }

    /// Exponent sum of `a_j` (image in the abelianization).
    pub fn exponent_sum(&self, j: i32) -> i64 {
        self.letters
            .iter()
            .map(|&l| {
                if l == j {
                    1
                } else if l == -j {
                    -1
                } else {
                    0
                }
            })
            .sum()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut letters = self.letters.clone();
        for &l in &other.letters {
            if letters.last() == Some(&-l) {
                letters.pop();
            } else {
                letters.push(l);
            }
        }
        Self { letters }
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|l| -l).collect(),
        }
    }

    pub(crate) fn check_cap(&self, cap: usize) -> Result<()> {
        if self.len() > cap {
            Err(Error::WordTooLong { len: self.len(), cap })
        } else {
            Ok(())
        }
    }
}

impl TryFrom<Vec<i32>> for FreeWord {
    type Error = Error;
    fn try_from(v: Vec<i32>) -> Result<Self> {
        FreeWord::new(v)
    }
}

impl From<FreeWord> for Vec<i32> {
    fn from(w: FreeWord) -> Self {
        w.letters
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "ε");
        }
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, "·")?;
            }
            if *l > 0 {
                write!(f, "a{l}")?;
            } else {
                write!(f, "a{}⁻¹", -l)?;
            }
        }
        Ok(())
    }
}
