use std::collections::{HashMap, VecDeque};

use crate::covering::Permutation;
use crate::error::{Error, Result};

/// Largest group order handled by brute-force enumeration.
pub const MAX_FINITE_ORDER: usize = 10_000;

/// A finite group presented by permutation generators.
///
/// Every element is enumerated together with a word in the generators
/// reaching it, so homomorphisms can be evaluated by walking the word.
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    name: String,
    generators: Vec<Permutation>,
    elements: Vec<Permutation>,
    words: Vec<Vec<usize>>,
    index: HashMap<Permutation, usize>,
}

impl FiniteGroup {
    pub fn from_generators(name: impl Into<String>, generators: Vec<Permutation>) -> Result<Self> {
        let degree = generators
            .first()
            .map(Permutation::degree)
            .ok_or_else(|| Error::invalid("a finite group needs at least one generator"))?;
        if generators.iter().any(|g| g.degree() != degree) {
            return Err(Error::invalid("generators act on different sets"));
        }
        let id = Permutation::identity(degree);
        let mut elements = vec![id.clone()];
        let mut words = vec![Vec::new()];
        let mut index = HashMap::from([(id, 0usize)]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for (gi, g) in generators.iter().enumerate() {
                let next = elements[i].compose(g);
                if index.contains_key(&next) {
                    continue;
                }
                if elements.len() >= MAX_FINITE_ORDER {
                    return Err(Error::Unsupported(format!("group order exceeds {MAX_FINITE_ORDER}")));
                }
                let mut w = words[i].clone();
                w.push(gi);
                index.insert(next.clone(), elements.len());
                elements.push(next);
                words.push(w);
                queue.push_back(elements.len() - 1);
            }
        }
        Ok(Self {
            name: name.into(),
            generators,
            elements,
            words,
            index,
        })
    }

    /// S_N with Coxeter generators `s_i = (i, i+1)`.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("S_N needs N ≥ 2"));
        }
        let gens = (0..n - 1).map(|i| Permutation::transposition(n, i, i + 1)).collect();
        Self::from_generators(format!("S{n}"), gens)
    }

    /// ℤ_n generated by an n-cycle.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("Z_n needs n ≥ 1"));
        }
        Self::from_generators(format!("Z{n}"), vec![Permutation::cycle(n.max(1))])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn index_of(&self, p: &Permutation) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Generator indices whose product (left to right) is element `i`.
    pub fn word_of(&self, i: usize) -> &[usize] {
        &self.words[i]
    }

    /// The commutator subgroup [G, G], closed by brute force.
    pub fn commutator_subgroup(&self) -> Vec<Permutation> {
        let mut commutators: Vec<Permutation> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for a in &self.elements {
            for b in &self.elements {
                let c = a.compose(b).compose(&a.inverse()).compose(&b.inverse());
                if seen.insert(c.clone()) {
                    commutators.push(c);
                }
            }
        }
        // closure under products
        let mut members = commutators.clone();
        let mut set: std::collections::HashSet<Permutation> = members.iter().cloned().collect();
        let mut frontier = members.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for x in &frontier {
                for c in &commutators {
                    let y = x.compose(c);
                    if set.insert(y.clone()) {
                        next.push(y);
                    }
                }
            }
            members.extend(next.iter().cloned());
            frontier = next;
        }
        members
    }

    /// |G / [G, G]|, the number of characters.
    pub fn abelianization_order(&self) -> usize {
        self.order() / self.commutator_subgroup().len()
    }

    /// All generator-indexed edges `(i, g, j)` with `elements[i] · gens[g] = elements[j]`.
    pub(crate) fn cayley_edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.elements.iter().enumerate().flat_map(move |(i, e)| {
            self.generators
                .iter()
                .enumerate()
                .map(move |(gi, g)| (i, gi, self.index[&e.compose(g)]))
        })
    }
}
