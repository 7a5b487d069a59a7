//! Time evolution of twisted-periodic wave functions on the ring.
//!
//! A wave function ψ on the covering line with `ψ(θ + 2π) = Γ ψ(θ)` is stored
//! through its gauge-fixed periodic part `χ(θ) = Γ^{-θ/2π} ψ(θ)`. The twist
//! then lives entirely in the kinetic operator, which acts on the
//! eigen-sector of Γ with phase φ through shifted wavenumbers `n + φ/2π`.

mod dense;
mod fft;
mod io;
mod pair;
mod reference;
mod splitstep;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covering::DeckGroup;
use crate::error::{Error, Result};
use crate::linalg::{hermiticity_residual, identity, max_abs, CMat, UnitaryEigen, I};
use crate::topofactor::{decompose_by_character, CharacterDomain, CharacterSector, MatrixRep, TopFactor, COMMUTE_TOL};

pub use dense::{crank_nicolson, dense_hamiltonian, eigenstate, spectrum, SpectrumSource};
pub use fft::{bin_wavenumber, shifted_wavenumbers};
pub use io::{read_state, state_from_json, state_to_json, write_state, STATE_SCHEMA};
pub use pair::{step_two_particle, ExchangeSector, PairPotential, TwoParticleGrid, TwoParticleStep};
pub use reference::UngaugedCoverReference;
pub use splitstep::{gauge_map, gauge_map_inverse, step_splitstep, step_vector_potential, SplitStep};

pub(crate) use fft::Fft1;

/// Default number of grid points per dimension.
pub const DEFAULT_N_POINTS: usize = 256;
/// Default time step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Tolerance on the per-step norm change.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on the 3-sheet twist reconstruction.
pub const TWIST_TOL: f64 = 1e-9;
/// Hermiticity tolerance for potential samples.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Physical constants and ring geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
    pub radius: f64,
    pub charge: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            radius: 1.0,
            charge: 1.0,
        }
    }
}

impl Units {
    /// `ħ / (m R²)`: angular velocity per unit wavenumber.
    pub fn kappa(&self) -> f64 {
        self.hbar / (self.mass * self.radius * self.radius)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("radius", self.radius)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.charge.is_finite() {
            return Err(Error::invalid("charge must be finite"));
        }
        Ok(())
    }

    /// Kinetic energy of shifted wavenumber `k`.
    pub fn kinetic_energy(&self, k: f64) -> f64 {
        0.5 * self.hbar * self.kappa() * k * k
    }
}

/// The periodicity matrix Γ = Γ_{winding 1} of a ring factor, with its
/// eigen-sectors.
///
/// For scalar twists the phase β is kept unreduced, so that e.g. β and
/// β + 2π select different but gauge-equivalent wavenumber shifts.
#[derive(Debug, Clone)]
pub struct Twist {
    generator: CMat,
    phases: Vec<f64>,
    vectors: CMat,
    scalar_beta: Option<f64>,
}

impl Twist {
    pub fn trivial(k: usize) -> Self {
        Self::scalar(0.0, k)
    }

    /// `Γ = e^{iβ} I_k`.
    pub fn scalar(beta: f64, k: usize) -> Self {
        Self {
            generator: identity(k) * Complex64::from_polar(1.0, beta),
            phases: vec![beta; k],
            vectors: identity(k),
            scalar_beta: Some(beta),
        }
    }

    /// A matrix twist; eigenphases on the principal branch.
    pub fn matrix(gamma: &CMat) -> Result<Self> {
        let eig = UnitaryEigen::new(gamma)?;
        Ok(Self {
            generator: gamma.clone(),
            phases: eig.phases,
            vectors: eig.vectors,
            scalar_beta: None,
        })
    }

    /// The twist of a ring factor (deck group ℤ).
    pub fn from_factor(factor: &TopFactor, k: usize) -> Result<Self> {
        match factor {
            TopFactor::Character(ch) => match (ch.domain(), ch.beta()) {
                (CharacterDomain::Deck(DeckGroup::Integers), Some(beta)) => Ok(Self::scalar(beta, k)),
                _ => Err(Error::Unsupported("ring grids need a character of ℤ".into())),
            },
            TopFactor::Matrix(rep) => {
                if !matches!(rep.group(), DeckGroup::Integers) {
                    return Err(Error::Unsupported("ring grids need a representation of ℤ".into()));
                }
                if rep.dim() != k {
                    return Err(Error::invalid(format!(
                        "factor acts on dimension {} but the state has {k} components",
                        rep.dim()
                    )));
                }
                Self::matrix(&rep.generators()[0])
            }
            TopFactor::Twisted(_) => Err(Error::Unsupported(
                "twisted representation tables are not evolved on ring grids".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    /// Γ
    pub fn generator(&self) -> &CMat {
        &self.generator
    }

    /// Eigenphases φ_c of Γ (β for every component of a scalar twist).
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Orthonormal eigenvectors of Γ as columns.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    /// β if the twist is a scalar.
    pub fn beta(&self) -> Option<f64> {
        self.scalar_beta
    }

    pub fn is_trivial(&self) -> bool {
        self.phases.iter().all(|&p| p == 0.0)
    }

    /// True when the eigenbasis is the standard basis.
    pub(crate) fn diagonal(&self) -> bool {
        self.scalar_beta.is_some()
    }

    /// `Γ^s = W diag(e^{i s φ}) W†`.
    pub fn power(&self, s: f64) -> CMat {
        let k = self.dim();
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            k,
            self.phases.iter().map(|&p| (I * p * s).exp()),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }

    /// Hermitian `B` with `Γ = e^{iB}` on the chosen branch.
    pub fn log_generator(&self) -> CMat {
        let k = self.dim();
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            k,
            self.phases.iter().map(|&p| Complex64::from(p)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }

    pub(crate) fn same_as(&self, other: &Twist) -> bool {
        self.phases == other.phases && self.vectors == other.vectors
    }
}

/// A potential on the ring grid.
#[derive(Debug, Clone)]
pub enum Potential {
    Free,
    /// Real scalar `V(θ_j)`.
    Scalar(Vec<f64>),
    /// Hermitian `V(θ_j)`; must commute with Γ.
    Matrix(Vec<CMat>),
    /// Covariant cover-side field `V*(θ) = Γ^{θ/2π} V₀(θ) Γ^{-θ/2π}`, stored
    /// through its periodic part `V₀`.
    Covariant(Vec<CMat>),
}

/// Potential as seen by χ: a periodic field.
pub(crate) enum ChiPotential {
    None,
    Scalar(Vec<f64>),
    Matrix(Vec<CMat>),
}

impl Potential {
    pub fn scalar_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Potential::Scalar((0..n).map(|j| f(grid_angle(n, j))).collect())
    }

    pub fn matrix_fn(n: usize, f: impl Fn(f64) -> CMat) -> Self {
        Potential::Matrix((0..n).map(|j| f(grid_angle(n, j))).collect())
    }

    /// Builds a covariant potential from cover-side samples `V*(θ_j)` on the
    /// fundamental sheet.
    pub fn covariant_from_cover(twist: &Twist, sheet0: &[CMat]) -> Self {
        let n = sheet0.len();
        Potential::Covariant(
            sheet0
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let s = grid_angle(n, j) / TAU;
                    twist.power(-s) * v * twist.power(s)
                })
                .collect(),
        )
    }

    /// Cover-side value `V*(θ)` on sheet `sheet` for a covariant potential,
    /// or the lift of a base potential.
    pub fn cover_value(&self, twist: &Twist, j: usize, sheet: i64) -> CMat {
        let k = twist.dim();
        match self {
            Potential::Free => CMat::zeros(k, k),
            Potential::Scalar(v) => identity(k) * Complex64::from(v[j]),
            Potential::Matrix(v) => v[j].clone(),
            Potential::Covariant(v0) => {
                let s = grid_angle(v0.len(), j) / TAU + sheet as f64;
                twist.power(s) * &v0[j] * twist.power(-s)
            }
        }
    }

    pub fn n_points(&self) -> Option<usize> {
        match self {
            Potential::Free => None,
            Potential::Scalar(v) => Some(v.len()),
            Potential::Matrix(v) | Potential::Covariant(v) => Some(v.len()),
        }
    }

    /// Base samples `V(q_j)` as k×k matrices (for classification).
    pub fn samples(&self, k: usize) -> Vec<CMat> {
        match self {
            Potential::Free => vec![CMat::zeros(k, k)],
            Potential::Scalar(v) => v.iter().map(|&x| identity(k) * Complex64::from(x)).collect(),
            Potential::Matrix(v) | Potential::Covariant(v) => v.clone(),
        }
    }

    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        if let Some(len) = self.n_points() {
            if len != n {
                return Err(Error::invalid(format!(
                    "potential has {len} samples, grid has {n} points"
                )));
            }
        }
        match self {
            Potential::Free => {}
            Potential::Scalar(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("potential contains non-finite values"));
                }
            }
            Potential::Matrix(v) | Potential::Covariant(v) => {
                for m in v {
                    if m.shape() != (k, k) {
                        return Err(Error::invalid(format!(
                            "potential sample is {:?}, expected {k}×{k}",
                            m.shape()
                        )));
                    }
                    let h = hermiticity_residual(m);
                    if h > HERMITIAN_TOL {
                        return Err(Error::NotHermitian { residual: h });
                    }
                }
            }
        }
        Ok(())
    }

    /// The periodic field acting on χ. A base matrix potential must commute
    /// with Γ; a covariant one is already periodic in this frame.
    pub(crate) fn chi_frame(&self, twist: &Twist, n: usize) -> Result<ChiPotential> {
        let k = twist.dim();
        self.validate(n, k)?;
        Ok(match self {
            Potential::Free => ChiPotential::None,
            Potential::Scalar(v) => ChiPotential::Scalar(v.clone()),
            Potential::Matrix(v) => {
                if !twist.diagonal() {
                    let g = twist.generator();
                    let r = v.iter().map(|m| max_abs(&(g * m - m * g))).fold(0.0, f64::max);
                    if r > COMMUTE_TOL {
                        return Err(Error::Incompatible { residual: r });
                    }
                }
                ChiPotential::Matrix(v.clone())
            }
            Potential::Covariant(v0) => ChiPotential::Matrix(v0.clone()),
        })
    }
}

pub(crate) fn grid_angle(n: usize, j: usize) -> f64 {
    TAU * j as f64 / n as f64
}

pub(crate) fn check_n_points(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("n_points must be a power of two ≥ 8, got {n}")));
    }
    Ok(())
}

/// Gauge-fixed periodic grid representation of a twisted wave function.
#[derive(Debug, Clone)]
pub struct WaveGrid {
    n: usize,
    chi: Vec<Vec<Complex64>>,
    twist: Twist,
    units: Units,
}

impl WaveGrid {
    /// Wraps periodic data χ (one vector per component) and normalizes it.
    pub fn from_chi(chi: Vec<Vec<Complex64>>, twist: Twist, units: Units) -> Result<Self> {
        units.validate()?;
        let k = chi.len();
        if k == 0 || k != twist.dim() {
            return Err(Error::invalid(format!(
                "{k} components supplied for a {}-dimensional twist",
                twist.dim()
            )));
        }
        let n = chi[0].len();
        check_n_points(n)?;
        if chi.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("components of different length"));
        }
        if chi.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("non-finite wave-function values"));
        }
        let mut g = Self { n, chi, twist, units };
        g.normalize()?;
        Ok(g)
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> usize {
        self.chi.len()
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        grid_angle(self.n, j)
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.theta(j)).collect()
    }

    /// The stored periodic part χ.
    pub fn chi(&self) -> &[Vec<Complex64>] {
        &self.chi
    }

    pub(crate) fn chi_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.chi
    }

    pub fn twist(&self) -> &Twist {
        &self.twist
    }

    pub fn units(&self) -> &Units {
        &self.units
    }

    /// `Σ |χ|² Δθ`
    pub fn norm_sq(&self) -> f64 {
        self.chi.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() * self.dtheta()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let ns = self.norm_sq();
        if !(ns > 0.0 && ns.is_finite()) {
            return Err(Error::invalid("wave function has zero or non-finite norm"));
        }
        let s = 1.0 / ns.sqrt();
        for z in self.chi.iter_mut().flatten() {
            *z *= s;
        }
        Ok(())
    }

    /// `|ψ(θ_j)|² = |χ(θ_j)|²` (Γ is unitary).
    pub fn density(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.chi.iter().map(|c| c[j].norm_sqr()).sum())
            .collect()
    }

    /// ψ on the translate `[2πs, 2π(s+1))` of the base grid.
    pub fn psi_on_sheet(&self, sheet: i64) -> Vec<Vec<Complex64>> {
        let k = self.components();
        let mut out = vec![vec![Complex64::default(); self.n]; k];
        for j in 0..self.n {
            let s = self.theta(j) / TAU + sheet as f64;
            let g = self.twist.power(s);
            for a in 0..k {
                out[a][j] = (0..k).map(|b| g[(a, b)] * self.chi[b][j]).sum();
            }
        }
        out
    }

    /// Largest deviation from `ψ(θ + 2πm) = Γ^m ψ(θ)` over the sheets −1, 0, 1,
    /// with Γ^m formed by repeated multiplication of Γ.
    pub fn twist_residual(&self) -> f64 {
        let sheets: Vec<_> = (-1..=1).map(|s| self.psi_on_sheet(s)).collect();
        let g = self.twist.generator();
        let g2 = g * g;
        let k = self.components();
        let mut r = 0.0f64;
        for (lo, hi, m) in [(0, 1, g), (1, 2, g), (0, 2, &g2)] {
            for j in 0..self.n {
                for a in 0..k {
                    let expected: Complex64 = (0..k).map(|b| m[(a, b)] * sheets[lo][b][j]).sum();
                    r = r.max((sheets[hi][a][j] - expected).norm());
                }
            }
        }
        r
    }

    /// `⟨self, other⟩ = Σ χ̄ χ' Δθ`.
    pub fn inner(&self, other: &WaveGrid) -> Complex64 {
        self.chi
            .iter()
            .flatten()
            .zip(other.chi.iter().flatten())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.dtheta()
    }

    /// L² distance `‖χ − χ'‖`.
    pub fn l2_distance(&self, other: &WaveGrid) -> f64 {
        (self
            .chi
            .iter()
            .flatten()
            .zip(other.chi.iter().flatten())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * self.dtheta())
        .sqrt()
    }

    /// Largest pointwise difference of the stored values.
    pub fn max_abs_diff(&self, other: &WaveGrid) -> f64 {
        self.chi
            .iter()
            .flatten()
            .zip(other.chi.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn with_chi(&self, chi: Vec<Vec<Complex64>>, twist: Twist) -> Self {
        Self {
            n: self.n,
            chi,
            twist,
            units: self.units,
        }
    }
}

/// Input to [`twist_embed`].
#[derive(Debug, Clone, Copy)]
pub enum EmbedInput<'a> {
    /// Strictly periodic data, taken as χ.
    Periodic(&'a [Vec<Complex64>]),
    /// ψ sampled on the fundamental sheet `[0, 2π)` of the cover.
    CoverSheet(&'a [Vec<Complex64>]),
}

/// Builds a normalized gauge-fixed grid for a ring factor.
pub fn twist_embed(input: EmbedInput<'_>, factor: &TopFactor, units: Units) -> Result<WaveGrid> {
    let data = match input {
        EmbedInput::Periodic(d) | EmbedInput::CoverSheet(d) => d,
    };
    let k = data.len();
    let twist = Twist::from_factor(factor, k)?;
    let chi = match input {
        EmbedInput::Periodic(d) => d.to_vec(),
        EmbedInput::CoverSheet(d) => {
            let n = d.first().map_or(0, Vec::len);
            let mut chi = vec![vec![Complex64::default(); n]; k];
            for j in 0..n {
                let g = twist.power(-grid_angle(n, j) / TAU);
                for a in 0..k {
                    chi[a][j] = (0..k).map(|b| g[(a, b)] * d[b][j]).sum();
                }
            }
            chi
        }
    };
    WaveGrid::from_chi(chi, twist, units)
}

/// One character sector of a matrix-twisted grid.
#[derive(Debug, Clone)]
pub struct SectorGrid {
    pub sector: CharacterSector,
    /// Sector amplitudes `W^{(i)†} χ`, with the scalar twist of the sector.
    /// Not renormalized: the sector norms sum to one.
    pub grid: WaveGrid,
    pub weight: f64,
}

/// Splits a matrix-twisted state into decoupled scalar-twisted sectors.
pub fn split_sectors(state: &WaveGrid, rep: &MatrixRep) -> Result<Vec<SectorGrid>> {
    let dev = crate::linalg::max_abs_diff(&rep.generators()[0], state.twist().generator());
    if dev > 1e-12 {
        return Err(Error::invalid("representation does not match the state's twist"));
    }
    let sectors = decompose_by_character(rep)?;
    let n = state.n_points();
    let k = state.components();
    sectors
        .into_iter()
        .map(|sector| {
            let d = sector.basis.ncols();
            let beta = sector.character.beta().unwrap_or(0.0);
            let mut chi = vec![vec![Complex64::default(); n]; d];
            for j in 0..n {
                for a in 0..d {
                    chi[a][j] = (0..k).map(|b| sector.basis[(b, a)].conj() * state.chi()[b][j]).sum();
                }
            }
            let grid = state.with_chi(chi, Twist::scalar(beta, d));
            let weight = grid.norm_sq();
            Ok(SectorGrid { sector, grid, weight })
        })
        .collect()
}

/// Reassembles `χ = Σ W^{(i)} χ^{(i)}` from sector grids.
pub fn merge_sectors(sectors: &[SectorGrid], twist: Twist) -> Result<WaveGrid> {
    let first = sectors.first().ok_or_else(|| Error::invalid("no sectors to merge"))?;
    let n = first.grid.n_points();
    let k = twist.dim();
    let mut chi = vec![vec![Complex64::default(); n]; k];
    for s in sectors {
        for j in 0..n {
            for a in 0..k {
                chi[a][j] += (0..s.sector.basis.ncols())
                    .map(|b| s.sector.basis[(a, b)] * s.grid.chi()[b][j])
                    .sum::<Complex64>();
            }
        }
    }
    Ok(first.grid.with_chi(chi, twist))
}

/// Gaussian `exp(-(θ-θ₀)²/4σ² + i k₀ (θ-θ₀))` as χ data (unnormalized).
///
/// The envelope is summed over periodic images so that it is smooth across
/// the antipode of θ₀; the phase is smooth there only for integer k₀.
pub fn gaussian_packet(n: usize, center: f64, sigma: f64, k0: f64) -> Vec<Complex64> {
    let images = (1.0 + 6.0 * sigma / TAU).ceil() as i32;
    (0..n)
        .map(|j| {
            let th = grid_angle(n, j);
            let mut d = (th - center).rem_euclid(TAU);
            if d >= PI {
                d -= TAU;
            }
            let env: f64 = (-images..=images)
                .map(|m| {
                    let x = d + TAU * m as f64;
                    (-x * x / (4.0 * sigma * sigma)).exp()
                })
                .sum();
            Complex64::from_polar(env, k0 * d)
        })
        .collect()
}

/// `e^{i m θ}` on the grid.
pub fn plane_wave(n: usize, m: i64) -> Vec<Complex64> {
    (0..n)
        .map(|j| Complex64::from_polar(1.0, m as f64 * grid_angle(n, j)))
        .collect()
}
