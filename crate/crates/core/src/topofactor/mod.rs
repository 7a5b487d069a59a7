//! Topological factors: characters, matrix-valued representations and
//! twisted representations of a covering group.

mod character;
mod classify;
mod decompose;
mod finite;
mod matrix_rep;
mod twisted;

pub use character::{enumerate_characters, Character, CharacterDomain, UNIMODULAR_TOL};
pub use classify::{
    algebra_span_dim, classify_dynamics, Classification, DynamicsClass, DEFAULT_WORD_LENGTH_CAP, SPAN_RANK_TOL,
};
pub use decompose::{decompose_by_character, CharacterSector};
pub use finite::{FiniteGroup, MAX_FINITE_ORDER};
pub use matrix_rep::{
    check_commutes, check_covariant_potential, commutation_residual, covariance_residual, MatrixRep, COMMUTE_TOL,
    MATRIX_TOL,
};
pub use twisted::{
    nfermion_factor, permutation_operator, verify_twisted_law, TwistedEntry, TwistedRepTable, MAX_PARTICLES,
    MAX_VALUE_DIM,
};

/// Any of the three kinds of topological factor.
#[derive(Debug, Clone)]
pub enum TopFactor {
    Character(Character),
    Matrix(MatrixRep),
    Twisted(TwistedRepTable),
}
