//! Sampling from |ψ|² and statistical checks of equivariance.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bohm::{integrate_trajectories, FieldSeries, TrajectoryStatus};
use crate::error::{Error, Result};
use crate::propagator::{Potential, WaveGrid};

/// Default number of histogram bins for the total-variation metric.
pub const DEFAULT_BINS: usize = 64;
/// Smallest ensemble accepted by [`verify_equivariance`].
pub const MIN_SAMPLES: usize = 1000;
/// Largest fraction of node-halted trajectories for a valid report.
pub const MAX_HALTED_FRACTION: f64 = 0.01;

/// Periodic density on a uniform grid over [0, 2π), interpolated linearly
/// between grid points (including the wrap-around cell).
#[derive(Debug, Clone)]
pub struct GridDensity {
    rho: Vec<f64>,
    dtheta: f64,
    cum: Vec<f64>,
    total: f64,
}

impl GridDensity {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        let n = rho.len();
        if n < 2 {
            return Err(Error::invalid("density needs at least two grid points"));
        }
        if rho.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::invalid("density must be finite and non-negative"));
        }
        let dtheta = TAU / n as f64;
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for j in 0..n {
            acc += 0.5 * (rho[j] + rho[(j + 1) % n]) * dtheta;
            cum.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("density vanishes everywhere"));
        }
        Ok(Self {
            rho,
            dtheta,
            cum,
            total: acc,
        })
    }

    pub fn from_state(state: &WaveGrid) -> Result<Self> {
        Self::new(state.density())
    }

    /// Unnormalized mass of `[0, 2π)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    fn cell(&self, j: usize) -> (f64, f64) {
        let n = self.rho.len();
        (self.rho[j], (self.rho[(j + 1) % n] - self.rho[j]) / self.dtheta)
    }

    /// Normalized cumulative distribution on [0, 2π].
    pub fn cdf(&self, theta: f64) -> f64 {
        let n = self.rho.len();
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= TAU {
            return 1.0;
        }
        let j = ((theta / self.dtheta).floor() as usize).min(n - 1);
        let x = theta - j as f64 * self.dtheta;
        let (r0, s) = self.cell(j);
        (self.cum[j] + r0 * x + 0.5 * s * x * x) / self.total
    }

    /// Probability of each of `bins` equal bins of [0, 2π).
    pub fn bin_probabilities(&self, bins: usize) -> Vec<f64> {
        (0..bins)
            .map(|b| self.cdf(TAU * (b + 1) as f64 / bins as f64) - self.cdf(TAU * b as f64 / bins as f64))
            .collect()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = self.rho.len();
        let u = rng.random::<f64>() * self.total;
        let j = (self.cum.partition_point(|&c| c <= u).max(1) - 1).min(n - 1);
        let r = u - self.cum[j];
        let (r0, s) = self.cell(j);
        // root of r0 x + s x²/2 = r, in a form stable for s → 0
        let disc = (r0 * r0 + 2.0 * s * r).max(0.0);
        let denom = r0 + disc.sqrt();
        let x = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        (j as f64 * self.dtheta + x.clamp(0.0, self.dtheta)).min(TAU - f64::EPSILON * TAU)
    }
}

/// `n` i.i.d. draws from `|ψ|²`, deterministic per seed.
pub fn sample_density(state: &WaveGrid, n: usize, seed: u64) -> Result<Vec<f64>> {
    let d = GridDensity::from_state(state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| d.sample(&mut rng)).collect())
}

/// Histogram of angles in [0, 2π) as fractions.
pub fn histogram(samples: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &x in samples {
        let b = ((x.rem_euclid(TAU) / TAU * bins as f64) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    let n = samples.len().max(1) as f64;
    h.iter().map(|c| c / n).collect()
}

/// Total variation between the sample histogram and the binned density.
pub fn total_variation(samples: &[f64], density: &GridDensity, bins: usize) -> f64 {
    let p = histogram(samples, bins);
    let q = density.bin_probabilities(bins);
    0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Kolmogorov–Smirnov distance, with the circle cut at θ = 0.
pub fn ks_distance(samples: &[f64], density: &GridDensity) -> f64 {
    let mut xs: Vec<f64> = samples.iter().map(|x| x.rem_euclid(TAU)).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = density.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Pearson χ² statistic and p-value against the binned density.
pub fn chi_square_gof(samples: &[f64], density: &GridDensity, bins: usize) -> (f64, f64) {
    let n = samples.len() as f64;
    let obs = histogram(samples, bins);
    let exp = density.bin_probabilities(bins);
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (o, e) in obs.iter().zip(&exp) {
        if e * n > 0.0 {
            stat += (o * n - e * n).powi(2) / (e * n);
            dof += 1;
        }
    }
    let p = ChiSquared::new((dof.max(2) - 1) as f64)
        .map(|d| d.sf(stat))
        .unwrap_or(0.0);
    (stat, p)
}

/// Monte-Carlo band for the total-variation check.
pub fn tv_threshold(bins: usize, n: usize) -> f64 {
    0.03 + 2.0 * (bins as f64 / n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct EquivarianceOptions {
    pub n_samples: usize,
    pub t_final: f64,
    pub dt: f64,
    pub checkpoints: usize,
    pub seed: u64,
    pub bins: usize,
    /// Transport with the sign-flipped velocity (negative control).
    pub negate_velocity: bool,
}

impl Default for EquivarianceOptions {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            t_final: 0.5,
            dt: 5e-3,
            checkpoints: 5,
            seed: 0,
            bins: DEFAULT_BINS,
            negate_velocity: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointStat {
    pub t: f64,
    pub active: usize,
    pub total_variation: f64,
    pub ks: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub n_samples: usize,
    pub seed: u64,
    pub bins: usize,
    pub dt: f64,
    pub threshold: f64,
    pub negated_velocity: bool,
    pub checkpoints: Vec<CheckpointStat>,
    pub halted: usize,
    pub left_resolution: usize,
    pub halted_fraction: f64,
    /// False when too many trajectories stopped at nodes.
    pub valid: bool,
    pub pass: bool,
}

impl EnsembleReport {
    pub fn max_tv(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.total_variation).fold(0.0, f64::max)
    }
}

/// Samples `|ψ₀|²`, transports the ensemble along Bohmian trajectories and
/// compares it with `|ψ_t|²` at evenly spaced checkpoints (including t = 0).
pub fn verify_equivariance(
    state: &WaveGrid,
    potential: &Potential,
    opts: &EquivarianceOptions,
) -> Result<EnsembleReport> {
    if opts.n_samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "at least {MIN_SAMPLES} samples required, got {}",
            opts.n_samples
        )));
    }
    if opts.checkpoints == 0 || opts.bins < 2 {
        return Err(Error::invalid("need at least one checkpoint and two bins"));
    }
    if !(opts.t_final > 0.0 && opts.dt > 0.0) {
        return Err(Error::invalid("t_final and dt must be positive"));
    }
    let steps = (opts.t_final / opts.dt).round() as usize;
    if steps == 0 || (steps as f64 * opts.dt - opts.t_final).abs() > 1e-9 * opts.t_final {
        return Err(Error::invalid("t_final must be a whole number of steps"));
    }
    let mut series = FieldSeries::evolve(state, potential, opts.dt, steps)?;
    if opts.negate_velocity {
        series = series.negated();
    }
    let q0 = sample_density(state, opts.n_samples, opts.seed)?;
    let trajs = integrate_trajectories(&series, &q0);
    let halted = trajs
        .iter()
        .filter(|t| matches!(t.status, TrajectoryStatus::HaltedAtNode { .. }))
        .count();
    let left = trajs
        .iter()
        .filter(|t| matches!(t.status, TrajectoryStatus::LeftResolution { .. }))
        .count();
    let threshold = tv_threshold(opts.bins, opts.n_samples);
    let mut stats = Vec::with_capacity(opts.checkpoints + 1);
    for c in 0..=opts.checkpoints {
        let s = (c * steps + opts.checkpoints / 2) / opts.checkpoints;
        let positions: Vec<f64> = trajs.iter().filter_map(|t| t.positions.get(s).copied()).collect();
        let density = GridDensity::new(series.density(s).to_vec())?;
        let tv = total_variation(&positions, &density, opts.bins);
        stats.push(CheckpointStat {
            t: s as f64 * opts.dt,
            active: positions.len(),
            total_variation: tv,
            ks: ks_distance(&positions, &density),
            pass: tv <= threshold,
        });
    }
    let halted_fraction = halted as f64 / opts.n_samples as f64;
    let valid = halted_fraction <= MAX_HALTED_FRACTION;
    let pass = valid && stats.iter().all(|c| c.pass);
    Ok(EnsembleReport {
        n_samples: opts.n_samples,
        seed: opts.seed,
        bins: opts.bins,
        dt: opts.dt,
        threshold,
        negated_velocity: opts.negate_velocity,
        checkpoints: stats,
        halted,
        left_resolution: left,
        halted_fraction,
        valid,
        pass,
    })
}
