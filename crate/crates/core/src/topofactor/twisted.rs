use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix_rep::{MatrixRep, MATRIX_TOL};
use crate::covering::{DeckElement, DeckGroup, Permutation};
use crate::error::{Error, Result};
use crate::linalg::{identity, kron, max_abs_diff, unitarity_residual, CMat};

/// Caps for the N-particle tensor factor.
pub const MAX_PARTICLES: usize = 3;
pub const MAX_VALUE_DIM: usize = 3;

/// `P_p (v₁ ⊗ … ⊗ v_N) = v_{p(1)} ⊗ … ⊗ v_{p(N)}` on `W^{⊗N}`.
///
/// With this convention `P_p (⊗ A_i) P_p⁻¹ = ⊗ A_{p(i)}`.
pub fn permutation_operator(p: &Permutation, w_dim: usize) -> CMat {
    let n = p.degree();
    let total = w_dim.pow(n as u32);
    let digits = |mut idx: usize| {
        let mut d = vec![0usize; n];
        for s in (0..n).rev() {
            d[s] = idx % w_dim;
            idx /= w_dim;
        }
        d
    };
    let index = |d: &[usize]| d.iter().fold(0usize, |acc, &x| acc * w_dim + x);
    let mut m = CMat::zeros(total, total);
    for col in 0..total {
        let d = digits(col);
        let out: Vec<usize> = (0..n).map(|s| d[p.apply(s)]).collect();
        m[(index(&out), col)] = 1.0.into();
    }
    m
}

/// Topological factor of N particles with single-particle factor Γ:
/// `Γ_σ(q̂) = sgn(p) ⊗_slots Γ_{σ^(i)}`.
///
/// `slots[s]` names the particle index whose single-particle factor sits in
/// tensor slot `s` (the bookkeeping `i_q̂`); `None` means slot `s` holds
/// particle `s`.
pub fn nfermion_factor(
    n: usize,
    w_dim: usize,
    generator_matrices: &[CMat],
    sigma: &DeckElement,
    slots: Option<&Permutation>,
) -> Result<CMat> {
    if n == 0 || n > MAX_PARTICLES || w_dim == 0 || w_dim > MAX_VALUE_DIM {
        return Err(Error::DimensionCap(format!(
            "N = {n}, dim W = {w_dim}; caps are N ≤ {MAX_PARTICLES}, dim W ≤ {MAX_VALUE_DIM}"
        )));
    }
    let single = MatrixRep::new(
        DeckGroup::free(generator_matrices.len() as u32),
        generator_matrices.to_vec(),
    )?;
    if single.dim() != w_dim {
        return Err(Error::invalid("generator matrices do not act on W"));
    }
    let DeckElement::Semidirect { perm, words } = sigma else {
        return Err(Error::MixedGroups(format!(
            "{sigma:?} is not an N-particle deck element"
        )));
    };
    if perm.degree() != n || words.len() != n {
        return Err(Error::MixedGroups("deck element has the wrong particle number".into()));
    }
    let order = match slots {
        Some(s) if s.degree() != n => return Err(Error::invalid("slot map has wrong degree")),
        Some(s) => s.clone(),
        None => Permutation::identity(n),
    };
    let mut acc = identity(1);
    for s in 0..n {
        let w = &words[order.apply(s)];
        acc = kron(&acc, &single.evaluate(&DeckElement::Word(w.clone()))?);
    }
    Ok(acc * num_complex::Complex64::from(perm.sign() as f64))
}

#[derive(Debug, Clone)]
pub struct TwistedEntry {
    pub gamma: CMat,
    pub holonomy: CMat,
}

/// A finite table of a (holonomy-)twisted representation: `Γ_σ` and the
/// holonomy `h_σ` of a loop whose lift runs from q̂ to σq̂, for every σ in a
/// ball around the identity.
#[derive(Debug, Clone)]
pub struct TwistedRepTable {
    group: DeckGroup,
    dim: usize,
    elements: Vec<DeckElement>,
    entries: Vec<TwistedEntry>,
    index: HashMap<DeckElement, usize>,
}

/// Elements reachable from the identity by at most `radius` generator steps.
fn ball(group: &DeckGroup, radius: usize) -> Result<Vec<DeckElement>> {
    let mut steps = group.generators();
    let inverses = steps.iter().map(|g| group.inverse(g)).collect::<Result<Vec<_>>>()?;
    steps.extend(inverses);
    let id = group.identity();
    let mut seen = HashMap::from([(id.clone(), 0usize)]);
    let mut out = vec![id.clone()];
    let mut queue = VecDeque::from([(id, 0usize)]);
    while let Some((e, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for s in &steps {
            let next = group.compose(&e, s)?;
            if !seen.contains_key(&next) {
                seen.insert(next.clone(), out.len());
                out.push(next.clone());
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok(out)
}

impl TwistedRepTable {
    fn from_fn(
        group: DeckGroup,
        dim: usize,
        radius: usize,
        f: impl Fn(&DeckElement) -> Result<TwistedEntry>,
    ) -> Result<Self> {
        let elements = ball(&group, radius)?;
        let entries = elements.iter().map(&f).collect::<Result<Vec<_>>>()?;
        let index = elements.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        Ok(Self {
            group,
            dim,
            elements,
            entries,
            index,
        })
    }

    /// An ordinary representation viewed as a twisted one with trivial holonomy.
    pub fn from_matrix_rep(rep: &MatrixRep, radius: usize) -> Result<Self> {
        let dim = rep.dim();
        Self::from_fn(rep.group().clone(), dim, radius, |e| {
            Ok(TwistedEntry {
                gamma: rep.evaluate(e)?,
                holonomy: identity(dim),
            })
        })
    }

    /// The N-particle factor over `S_N ⋉ F_gᴺ`, with permutation holonomy.
    pub fn nfermion(n: usize, w_dim: usize, generator_matrices: &[CMat], radius: usize) -> Result<Self> {
        let group = DeckGroup::semidirect(n, generator_matrices.len() as u32);
        let dim = w_dim.pow(n as u32);
        Self::from_fn(group, dim, radius, |e| {
            let DeckElement::Semidirect { perm, .. } = e else {
                unreachable!()
            };
            Ok(TwistedEntry {
                gamma: nfermion_factor(n, w_dim, generator_matrices, e, None)?,
                holonomy: permutation_operator(perm, w_dim),
            })
        })
    }

    pub fn group(&self) -> &DeckGroup {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[DeckElement] {
        &self.elements
    }

    pub fn entry(&self, sigma: &DeckElement) -> Option<&TwistedEntry> {
        self.index.get(sigma).map(|&i| &self.entries[i])
    }

    /// Overwrites one entry (used to build negative controls).
    pub fn set_gamma(&mut self, sigma: &DeckElement, gamma: CMat) -> Result<()> {
        let i = *self
            .index
            .get(sigma)
            .ok_or_else(|| Error::invalid("element not in table"))?;
        if gamma.shape() != (self.dim, self.dim) {
            return Err(Error::invalid("entry dimension mismatch"));
        }
        self.entries[i].gamma = gamma;
        Ok(())
    }

    /// Largest unitarity residual over all stored Γ_σ.
    pub fn unitarity_residual(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| unitarity_residual(&e.gamma))
            .fold(0.0, f64::max)
    }

    pub fn is_well_formed(&self) -> bool {
        self.unitarity_residual() <= MATRIX_TOL
            && self
                .entries
                .iter()
                .all(|e| unitarity_residual(&e.holonomy) <= MATRIX_TOL)
    }
}

/// Largest residual `‖Γ_{σ₁σ₂} − h₂ Γ_{σ₁} h₂⁻¹ Γ_{σ₂}‖_max` over `samples`
/// seeded random pairs whose product lies in the table.
pub fn verify_twisted_law(table: &TwistedRepTable, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = table.len();
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut attempts = 0usize;
    while done < samples {
        attempts += 1;
        if attempts > samples.saturating_mul(1000).max(10_000) {
            return Err(Error::InsufficientData(
                "too few table pairs with products inside the table".into(),
            ));
        }
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let prod = table.group.compose(&table.elements[i], &table.elements[j])?;
        let Some(&k) = table.index.get(&prod) else {
            continue;
        };
        let (a, b, ab) = (&table.entries[i], &table.entries[j], &table.entries[k]);
        let h = &b.holonomy;
        let predicted = h * &a.gamma * h.adjoint() * &b.gamma;
        worst = worst.max(max_abs_diff(&ab.gamma, &predicted));
        done += 1;
    }
    Ok(worst)
}
