use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A permutation of `{0, .., n-1}`; `images[i]` is the image of `i`.
///
/// Products follow function composition: `(p * q)(i) = p(q(i))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::invalid(format!("{images:?} is not a bijection")));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    /// The transposition swapping `a` and `b`.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(a, b);
        Self { images }
    }

    /// The n-cycle `i ↦ i+1 mod n`.
    pub fn cycle(n: usize) -> Self {
        Self {
            images: (0..n).map(|i| (i + 1) % n).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.degree(), other.degree(), "permutation degree mismatch");
        Self {
            images: other.images.iter().map(|&j| self.images[j]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.degree()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Self { images: inv }
    }

    /// +1 for even, −1 for odd permutations.
    pub fn sign(&self) -> i32 {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut transpositions = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.images[i];
                len += 1;
            }
            transpositions += len - 1;
        }
        if transpositions % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Indices `i₁ … i_k` with `self = s_{i₁} ∘ … ∘ s_{i_k}`, where `s_i`
    /// swaps `i` and `i+1`. The word has minimal length (number of inversions).
    pub fn adjacent_transpositions(&self) -> Vec<usize> {
        let mut p = self.images.clone();
        let mut right_factors = Vec::new();
        while let Some(i) = (0..p.len().saturating_sub(1)).find(|&i| p[i] > p[i + 1]) {
            // p ∘ s_i has one inversion fewer.
            p.swap(i, i + 1);
            right_factors.push(i);
        }
        right_factors.reverse();
        right_factors
    }

    /// All permutations of degree `n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..n).collect();
        loop {
            out.push(Self { images: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.images
    }
}
