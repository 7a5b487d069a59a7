use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_n_points, fft::shifted_wavenumbers, grid_angle, Fft1, Units, NORM_TOL};
use crate::error::{Error, Result};
use crate::linalg::I;

/// Tolerance on exchange (anti)symmetry of initial data.
pub const EXCHANGE_TOL: f64 = 1e-10;

/// Character of the exchange group S₂ carried by the pair wave function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeSector {
    Boson,
    Fermion,
}

impl ExchangeSector {
    pub fn sign(self) -> f64 {
        match self {
            ExchangeSector::Boson => 1.0,
            ExchangeSector::Fermion => -1.0,
        }
    }
}

/// Two identical particles on one ring: χ(θ₁, θ₂) on an n×n torus grid,
/// row-major with θ₁ the slow index. Each coordinate carries the ring twist β.
#[derive(Debug, Clone)]
pub struct TwoParticleGrid {
    n: usize,
    values: Vec<Complex64>,
    sector: ExchangeSector,
    beta: f64,
    units: Units,
}

impl TwoParticleGrid {
    /// Wraps and normalizes data that is (anti)symmetric under
    /// `θ₁ ↔ θ₂` to [`EXCHANGE_TOL`] relative to its largest value.
    pub fn new(n: usize, values: Vec<Complex64>, sector: ExchangeSector, beta: f64, units: Units) -> Result<Self> {
        check_n_points(n)?;
        units.validate()?;
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                n * n,
                values.len()
            )));
        }
        let mut g = Self {
            n,
            values,
            sector,
            beta,
            units,
        };
        let scale = g.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::invalid("pair wave function has zero or non-finite norm"));
        }
        let r = g.exchange_residual() / scale;
        if r > EXCHANGE_TOL {
            return Err(Error::invalid(format!(
                "initial data is not in the {sector:?} sector (residual {r:.3e})"
            )));
        }
        let s = 1.0 / g.norm_sq().sqrt();
        for z in &mut g.values {
            *z *= s;
        }
        Ok(g)
    }

    /// `f(θ₁, θ₂) ± f(θ₂, θ₁)`, normalized.
    pub fn from_fn(
        n: usize,
        sector: ExchangeSector,
        beta: f64,
        units: Units,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let sign = sector.sign();
        let values = (0..n * n)
            .map(|i| {
                let (a, b) = (grid_angle(n, i / n), grid_angle(n, i % n));
                f(a, b) + f(b, a) * sign
            })
            .collect();
        Self::new(n, values, sector, beta, units)
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn sector(&self) -> ExchangeSector {
        self.sector
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn units(&self) -> &Units {
        &self.units
    }

    pub fn value(&self, i1: usize, i2: usize) -> Complex64 {
        self.values[i1 * self.n + i2]
    }

    pub fn norm_sq(&self) -> f64 {
        let d = TAU / self.n as f64;
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * d * d
    }

    /// `max |χ(θ₂, θ₁) ∓ χ(θ₁, θ₂)|`
    pub fn exchange_residual(&self) -> f64 {
        let s = self.sector.sign();
        let n = self.n;
        let mut r = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                r = r.max((self.value(j, i) - self.value(i, j) * s).norm());
            }
        }
        r
    }

    /// `max |χ(θ, θ)|`
    pub fn diagonal_max(&self) -> f64 {
        (0..self.n).map(|i| self.value(i, i).norm()).fold(0.0, f64::max)
    }

    /// `|ψ|²` on the grid.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Pair potential `V(θ₁, θ₂)` on the torus grid, row-major.
#[derive(Debug, Clone)]
pub struct PairPotential {
    values: Vec<f64>,
}

impl PairPotential {
    pub fn free(n: usize) -> Self {
        Self {
            values: vec![0.0; n * n],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// `U(θ₁) + U(θ₂) + W(θ₁ − θ₂)`.
    pub fn from_parts(n: usize, external: impl Fn(f64) -> f64, interaction: impl Fn(f64) -> f64) -> Self {
        let values = (0..n * n)
            .map(|i| {
                let (a, b) = (grid_angle(n, i / n), grid_angle(n, i % n));
                external(a) + external(b) + interaction(a - b)
            })
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max |V(θ₁, θ₂) − V(θ₂, θ₁)|`
    pub fn swap_asymmetry(&self, n: usize) -> f64 {
        let mut r = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                r = r.max((self.values[i * n + j] - self.values[j * n + i]).abs());
            }
        }
        r
    }
}

/// Strang stepper for a [`TwoParticleGrid`].
#[derive(Debug)]
pub struct TwoParticleStep {
    n: usize,
    half: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    fft: Fft1,
    row: Vec<Complex64>,
}

impl TwoParticleStep {
    /// Refuses swap-asymmetric potentials, which would leak between sectors.
    pub fn new(n: usize, beta: f64, potential: &PairPotential, units: Units, dt: f64) -> Result<Self> {
        check_n_points(n)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if potential.values.len() != n * n {
            return Err(Error::invalid("pair potential size does not match the grid"));
        }
        let asym = potential.swap_asymmetry(n);
        if asym > 1e-12 {
            return Err(Error::invalid(format!(
                "pair potential is not swap-symmetric (residual {asym:.3e})"
            )));
        }
        let tau = dt / (2.0 * units.hbar);
        let half = potential.values.iter().map(|&v| (-I * v * tau).exp()).collect();
        let ks = shifted_wavenumbers(n, beta / TAU);
        let kappa = units.kappa();
        let mut kinetic = Vec::with_capacity(n * n);
        for &k1 in &ks {
            for &k2 in &ks {
                kinetic.push((-I * (0.5 * kappa * (k1 * k1 + k2 * k2) * dt)).exp());
            }
        }
        Ok(Self {
            n,
            half,
            kinetic,
            fft: Fft1::new(n),
            row: vec![Complex64::default(); n],
        })
    }

    fn fft2(&mut self, v: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for r in v.chunks_mut(n) {
            if inverse {
                self.fft.inverse(r);
            } else {
                self.fft.forward(r);
            }
        }
        for col in 0..n {
            for r in 0..n {
                self.row[r] = v[r * n + col];
            }
            if inverse {
                self.fft.inverse(&mut self.row);
            } else {
                self.fft.forward(&mut self.row);
            }
            for r in 0..n {
                v[r * n + col] = self.row[r];
            }
        }
    }

    pub fn step(&mut self, state: &mut TwoParticleGrid) -> Result<()> {
        if state.n != self.n {
            return Err(Error::invalid("state does not match the stepper grid"));
        }
        let before = state.norm_sq();
        let mut v = std::mem::take(&mut state.values);
        for (z, h) in v.iter_mut().zip(&self.half) {
            *z *= h;
        }
        self.fft2(&mut v, false);
        for (z, p) in v.iter_mut().zip(&self.kinetic) {
            *z *= p;
        }
        self.fft2(&mut v, true);
        for (z, h) in v.iter_mut().zip(&self.half) {
            *z *= h;
        }
        state.values = v;
        let drift = (state.norm_sq() - before).abs() / before;
        if drift > NORM_TOL {
            return Err(Error::Numerics {
                invariant: "norm conservation".into(),
                residual: drift,
                threshold: NORM_TOL,
            });
        }
        Ok(())
    }
}

/// One Strang step of a two-particle state.
pub fn step_two_particle(state: &TwoParticleGrid, potential: &PairPotential, dt: f64) -> Result<TwoParticleGrid> {
    let mut s = TwoParticleStep::new(state.n, state.beta, potential, state.units, dt)?;
    let mut out = state.clone();
    s.step(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(a: f64, b: f64) -> Complex64 {
        let d1 = a - 2.0;
        let d2 = b - 4.0;
        Complex64::from_polar((-(d1 * d1 + d2 * d2) / 0.5).exp(), 1.0 * a - 0.5 * b)
    }

    #[test]
    fn fermion_diagonal_node_persists() {
        let n = 32;
        let mut g = TwoParticleGrid::from_fn(n, ExchangeSector::Fermion, 0.0, Units::default(), gauss).unwrap();
        let pot = PairPotential::from_parts(n, |t| 0.3 * t.cos(), |d| 0.2 * d.cos());
        let mut s = TwoParticleStep::new(n, 0.0, &pot, Units::default(), 1e-3).unwrap();
        for _ in 0..200 {
            s.step(&mut g).unwrap();
        }
        assert!(g.diagonal_max() < 1e-9);
        assert!(g.exchange_residual() < 1e-9);
    }

    #[test]
    fn asymmetric_potential_refused() {
        let n = 16;
        let pot = PairPotential::from_parts(n, |t| t.cos(), |d| d.sin());
        assert!(TwoParticleStep::new(n, 0.0, &pot, Units::default(), 1e-3).is_err());
    }

    #[test]
    fn non_symmetric_data_refused() {
        let n = 16;
        let vals: Vec<Complex64> = (0..n * n).map(|i| Complex64::from(i as f64)).collect();
        assert!(TwoParticleGrid::new(n, vals, ExchangeSector::Boson, 0.0, Units::default()).is_err());
    }
}
