//! GRW spontaneous collapses on the ring, with the Gaussian profile taken in
//! the wrapped geodesic distance.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bohm::csv_err;
use crate::ensemble::GridDensity;
use crate::error::{Error, Result};
use crate::output::write_atomic;
use crate::propagator::{Potential, SplitStep, TwoParticleGrid, WaveGrid, TWIST_TOL};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_WIDTH: f64 = 0.3;
/// Full propagation steps between refreshes of the thinning bound.
pub const BOUND_REFRESH_STEPS: usize = 100;
/// Widths above this are treated as a constant profile.
pub const CONSTANT_PROFILE_WIDTH: f64 = 1e3;
/// Collapse centers are drawn on a grid this many times finer than the state grid.
const CENTER_REFINEMENT: usize = 4;

/// Geodesic distance on the unit circle.
pub fn ring_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

/// `exp(−d(x, θ)²/2a²)`, or 1 for `a` beyond [`CONSTANT_PROFILE_WIDTH`].
pub fn collapse_profile(x: f64, theta: f64, a: f64) -> f64 {
    if a > CONSTANT_PROFILE_WIDTH {
        return 1.0;
    }
    let d = ring_distance(x, theta);
    (-d * d / (2.0 * a * a)).exp()
}

fn check_params(lambda: f64, a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("collapse width must be positive, got {a}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "collapse rate must be non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// `r(x|ψ) = ⟨ψ|Λ(x)ψ⟩` for one particle.
pub fn collapse_rate(state: &WaveGrid, x: f64, lambda: f64, a: f64) -> Result<f64> {
    check_params(lambda, a)?;
    let dt = state.dtheta();
    Ok(lambda
        * state
            .density()
            .iter()
            .enumerate()
            .map(|(j, r)| r * collapse_profile(x, state.theta(j), a))
            .sum::<f64>()
        * dt)
}

/// `ψ → Λ(x)^{1/2}ψ / ‖Λ(x)^{1/2}ψ‖`. Returns the new state and the
/// pre-normalization norm `√r(x|ψ)`.
pub fn apply_collapse(state: &WaveGrid, x: f64, lambda: f64, a: f64) -> Result<(WaveGrid, f64)> {
    let r = collapse_rate(state, x, lambda, a)?;
    if !(r > f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!("collapse impossible at x = {x}: zero rate")));
    }
    let mut out = state.clone();
    let mult: Vec<f64> = (0..state.n_points())
        .map(|j| (lambda * collapse_profile(x, state.theta(j), a)).sqrt())
        .collect();
    for c in out.chi_mut() {
        for (z, m) in c.iter_mut().zip(&mult) {
            *z *= m;
        }
    }
    out.normalize()?;
    Ok((out, r.sqrt()))
}

/// Multiplier `Λ(x)^{1/2}` for two identical particles on an n×n grid.
pub fn pair_collapse_multiplier(n: usize, x: f64, lambda: f64, a: f64) -> Vec<f64> {
    let f: Vec<f64> = (0..n)
        .map(|j| collapse_profile(x, TAU * j as f64 / n as f64, a))
        .collect();
    (0..n * n).map(|i| (lambda * (f[i / n] + f[i % n])).sqrt()).collect()
}

/// `r(x|ψ)` for two identical particles: the sum of the one-particle rates.
pub fn collapse_rate_pair(state: &TwoParticleGrid, x: f64, lambda: f64, a: f64) -> Result<f64> {
    check_params(lambda, a)?;
    let n = state.n_points();
    let d = TAU / n as f64;
    let m = pair_collapse_multiplier(n, x, lambda, a);
    Ok(state
        .values()
        .iter()
        .zip(&m)
        .map(|(z, m)| z.norm_sqr() * m * m)
        .sum::<f64>()
        * d
        * d)
}

pub fn apply_collapse_pair(state: &TwoParticleGrid, x: f64, lambda: f64, a: f64) -> Result<(TwoParticleGrid, f64)> {
    let r = collapse_rate_pair(state, x, lambda, a)?;
    if !(r > f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!("collapse impossible at x = {x}: zero rate")));
    }
    let n = state.n_points();
    let m = pair_collapse_multiplier(n, x, lambda, a);
    let values = state.values().iter().zip(&m).map(|(z, m)| z * m).collect();
    let out = TwoParticleGrid::new(n, values, state.sector(), state.beta(), *state.units())?;
    Ok((out, r.sqrt()))
}

/// `r(x_i|ψ)` on a grid of `m` evenly spaced centers.
pub fn rate_profile(state: &WaveGrid, m: usize, lambda: f64, a: f64) -> Result<Vec<f64>> {
    check_params(lambda, a)?;
    let rho = state.density();
    let dt = state.dtheta();
    Ok((0..m)
        .map(|i| {
            let x = TAU * i as f64 / m as f64;
            lambda
                * rho
                    .iter()
                    .enumerate()
                    .map(|(j, r)| r * collapse_profile(x, state.theta(j), a))
                    .sum::<f64>()
                * dt
        })
        .collect())
}

/// Draws a collapse center from `r(x|ψ)/∫r`.
pub fn sample_collapse_center<R: Rng + ?Sized>(state: &WaveGrid, lambda: f64, a: f64, rng: &mut R) -> Result<f64> {
    let r = rate_profile(state, CENTER_REFINEMENT * state.n_points(), lambda, a)?;
    Ok(GridDensity::new(r)?.sample(rng))
}

/// `∫ r(x|ψ) dx`
pub fn total_rate(state: &WaveGrid, lambda: f64, a: f64) -> Result<f64> {
    check_params(lambda, a)?;
    // Σ_x f(x, θ_j) is the same for every grid point θ_j
    let n = state.n_points();
    let dt = state.dtheta();
    let ring: f64 = (0..n).map(|i| collapse_profile(state.theta(i), 0.0, a)).sum::<f64>() * dt;
    Ok(lambda * ring * state.norm_sq())
}

/// `2π · max_x r(x|ψ)` over the state grid.
fn rate_bound(state: &WaveGrid, lambda: f64, a: f64) -> Result<f64> {
    let r = rate_profile(state, state.n_points(), lambda, a)?;
    Ok(TAU * r.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseEvent {
    pub time: f64,
    pub center: f64,
    pub pre_norm: f64,
    pub post_norm: f64,
    /// Particle index for distinguishable particles; `None` for identical ones.
    pub label: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GrwOptions {
    pub lambda: f64,
    pub a: f64,
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    /// Skip the twist-residual check at event boundaries.
    pub allow_aperiodic: bool,
}

impl Default for GrwOptions {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            a: DEFAULT_WIDTH,
            t_final: 1.0,
            dt: 1e-3,
            seed: 0,
            allow_aperiodic: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrwRun {
    pub events: Vec<CollapseEvent>,
    pub final_state: WaveGrid,
    pub bound_refreshes: usize,
    pub stale_retries: usize,
    pub rejected_candidates: usize,
    /// Largest twist residual seen at an event boundary.
    pub max_twist_residual: f64,
    pub log: Vec<String>,
}

struct Propagation<'a> {
    potential: &'a Potential,
    full: SplitStep,
}

impl Propagation<'_> {
    fn advance(&mut self, state: &mut WaveGrid, h: f64) -> Result<()> {
        if h <= 0.0 {
            return Ok(());
        }
        if (h - self.full.dt()).abs() <= 1e-14 * self.full.dt() {
            self.full.step(state)
        } else {
            SplitStep::new(state.twist(), self.potential, state.n_points(), *state.units(), h)?.step(state)
        }
    }
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    loop {
        let u: f64 = rng.random();
        let e = -(1.0 - u).ln();
        if e > 0.0 {
            return e / rate;
        }
    }
}

/// Schrödinger evolution interrupted by GRW collapses, simulated by thinning
/// against a grid-sup bound on the total rate.
pub fn simulate_grw(state: &WaveGrid, potential: &Potential, opts: &GrwOptions) -> Result<GrwRun> {
    check_params(opts.lambda, opts.a)?;
    if !(opts.t_final >= 0.0 && opts.t_final.is_finite() && opts.dt > 0.0) {
        return Err(Error::invalid("t_final must be non-negative and dt positive"));
    }
    let check_twist = |s: &WaveGrid| -> Result<f64> {
        let r = s.twist_residual();
        if !opts.allow_aperiodic && r > TWIST_TOL {
            return Err(Error::Numerics {
                invariant: "twist residual at collapse".into(),
                residual: r,
                threshold: TWIST_TOL,
            });
        }
        Ok(r)
    };
    let mut prop = Propagation {
        potential,
        full: SplitStep::new(state.twist(), potential, state.n_points(), *state.units(), opts.dt)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut log = Vec::new();
    let mut events = Vec::new();
    let mut cur = state.clone();
    let mut t = 0.0;
    let mut bound = rate_bound(&cur, opts.lambda, opts.a)?;
    let mut next = t + exponential(&mut rng, bound);
    let mut snapshot = (t, cur.clone());
    let mut full_steps = 0usize;
    let (mut refreshes, mut stale, mut rejected) = (0usize, 0usize, 0usize);
    let mut max_twist = check_twist(&cur)?;
    let eps = 1e-12 * opts.t_final.max(1.0);
    while t < opts.t_final - eps {
        let end = (t + opts.dt).min(opts.t_final);
        if next <= end {
            prop.advance(&mut cur, next - t)?;
            t = next;
            let rate = total_rate(&cur, opts.lambda, opts.a)?;
            if rate > bound * (1.0 + 1e-12) {
                log.push(format!(
                    "t = {t:.6}: rate {rate:.6e} exceeds bound {bound:.6e}; bound refreshed, step retried"
                ));
                stale += 1;
                (t, cur) = snapshot.clone();
                bound = rate_bound(&cur, opts.lambda, opts.a)?.max(rate * 1.05);
                next = t + exponential(&mut rng, bound);
                continue;
            }
            if rng.random::<f64>() * bound < rate {
                let x = sample_collapse_center(&cur, opts.lambda, opts.a, &mut rng)?;
                let (post, pre_norm) = apply_collapse(&cur, x, opts.lambda, opts.a)?;
                cur = post;
                max_twist = max_twist.max(check_twist(&cur)?);
                events.push(CollapseEvent {
                    time: t,
                    center: x,
                    pre_norm,
                    post_norm: cur.norm_sq().sqrt(),
                    label: None,
                });
                snapshot = (t, cur.clone());
            } else {
                rejected += 1;
            }
            next = t + exponential(&mut rng, bound);
            continue;
        }
        let full = end - t >= opts.dt * (1.0 - 1e-12);
        prop.advance(&mut cur, end - t)?;
        t = end;
        if full {
            full_steps += 1;
            if full_steps.is_multiple_of(BOUND_REFRESH_STEPS) {
                bound = rate_bound(&cur, opts.lambda, opts.a)?;
                next = t + exponential(&mut rng, bound);
                snapshot = (t, cur.clone());
                refreshes += 1;
            }
        }
    }
    max_twist = max_twist.max(check_twist(&cur)?);
    Ok(GrwRun {
        events,
        final_state: cur,
        bound_refreshes: refreshes,
        stale_retries: stale,
        rejected_candidates: rejected,
        max_twist_residual: max_twist,
        log,
    })
}

/// Event log as CSV with columns `t,x,pre_norm,post_norm,label`.
pub fn events_csv(events: &[CollapseEvent]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "x", "pre_norm", "post_norm", "label"])
        .map_err(csv_err)?;
    for e in events {
        let label = e.label.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([
            e.time.to_string(),
            e.center.to_string(),
            e.pre_norm.to_string(),
            e.post_norm.to_string(),
            label,
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_events_csv(events: &[CollapseEvent], path: &Path) -> Result<()> {
    write_atomic(path, &events_csv(events)?)
}

/// `∫ exp(−d²/2a²) dx` over the ring, in closed form up to the wrap-around.
pub fn wrapped_profile_mass(a: f64) -> f64 {
    if a > CONSTANT_PROFILE_WIDTH {
        return TAU;
    }
    (TAU).sqrt() * a * statrs::function::erf::erf(PI / (a * 2f64.sqrt()))
}
