//! Scenario-driven batch runs: subcommand dispatch, invariant checks, output
//! files and the run manifest.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bohm::{integrate_trajectories, trajectories_csv, FieldSeries, TrajectoryStatus};
use crate::ensemble::{sample_density, verify_equivariance, EquivarianceOptions};
use crate::error::{Error, ErrorKind, Result};
use crate::grw::{events_csv, simulate_grw, GrwOptions};
use crate::linalg::{identity, CMat};
use crate::output::write_atomic;
use crate::propagator::{
    gauge_map, spectrum, state_to_json, Potential, SpectrumSource, SplitStep, Twist, TwoParticleStep, WaveGrid,
};
use crate::scenario::{FactorSpec, PotentialSpec, Scenario, SpaceSpec};
use crate::topofactor::{classify_dynamics, verify_twisted_law, TopFactor, DEFAULT_WORD_LENGTH_CAP};

pub const MANIFEST_SCHEMA: &str = "topobohm.manifest/v1";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_PHYSICS: i32 = 3;
pub const EXIT_NUMERICS: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Spectrum,
    Trajectories,
    Equivariance,
    AbCompare,
    Classify,
    TwistedCheck,
    Grw,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Spectrum => "spectrum",
            Command::Trajectories => "trajectories",
            Command::Equivariance => "equivariance",
            Command::AbCompare => "ab-compare",
            Command::Classify => "classify",
            Command::TwistedCheck => "twisted-check",
            Command::Grw => "grw",
        }
    }
}

/// Command-line values that replace the corresponding scenario fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub flux: Option<f64>,
    pub charge: Option<f64>,
    pub n_points: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub n_levels: Option<usize>,
    pub n_samples: Option<usize>,
    pub negate_velocity: bool,
    pub allow_aperiodic: bool,
    pub lambda: Option<f64>,
    pub width: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) -> Result<()> {
        if let Some(v) = self.seed {
            s.seed = Some(v);
        }
        if let Some(beta) = self.beta {
            s.factor = FactorSpec::Character { beta };
        }
        if let Some(flux) = self.flux {
            s.factor = FactorSpec::Flux { flux };
        }
        if let Some(v) = self.charge {
            s.units.charge = v;
        }
        if let Some(v) = self.n_points {
            s.numerics.n_points = v;
        }
        if let Some(v) = self.dt {
            s.numerics.dt = v;
        }
        if let Some(v) = self.t_final {
            s.numerics.t_final = v;
        }
        if let Some(v) = self.n_levels {
            s.numerics.n_levels = v;
        }
        if let Some(v) = self.n_samples {
            s.ensemble.n_samples = v;
        }
        s.ensemble.negate_velocity |= self.negate_velocity;
        s.grw.allow_aperiodic |= self.allow_aperiodic;
        if let Some(v) = self.lambda {
            s.grw.lambda = v;
        }
        if let Some(v) = self.width {
            s.grw.a = v;
        }
        s.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub id: String,
    /// `None` when the measured value was not finite.
    pub value: Option<f64>,
    pub threshold: f64,
    /// `"le"`: value must not exceed threshold; `"ge"`: value must reach it.
    pub comparison: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureRecord {
    pub class: String,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub status: String,
    pub failure: Option<FailureRecord>,
    pub checks: Vec<CheckRecord>,
    pub outputs: Vec<OutputRecord>,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub error: Option<Error>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Input => EXIT_SCHEMA,
        ErrorKind::Physics => EXIT_PHYSICS,
        ErrorKind::Numerics => EXIT_NUMERICS,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

struct Ctx<'a> {
    out: &'a Path,
    checks: Vec<CheckRecord>,
    outputs: Vec<OutputRecord>,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.out.join(name), bytes)?;
        self.outputs.push(OutputRecord {
            path: name.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn record(&mut self, id: &str, value: f64, threshold: f64, le: bool) -> bool {
        let pass = if le { value <= threshold } else { value >= threshold };
        self.checks.push(CheckRecord {
            id: id.into(),
            value: value.is_finite().then_some(value),
            threshold,
            comparison: if le { "le" } else { "ge" }.into(),
            pass,
        });
        pass
    }

    /// Records the check and fails the run if `value > threshold`.
    fn require(&mut self, id: &str, value: f64, threshold: f64) -> Result<()> {
        if self.record(id, value, threshold, true) {
            Ok(())
        } else {
            Err(Error::Numerics {
                invariant: id.into(),
                residual: value,
                threshold,
            })
        }
    }
}

fn require_seed(s: &Scenario) -> Result<u64> {
    s.seed.ok_or_else(|| Error::Schema {
        path: "seed".into(),
        message: "this subcommand is randomized and needs an explicit seed".into(),
    })
}

/// Runs `command` on `scenario`, writing outputs and `manifest.json` into `out`.
/// The manifest is written on failure too.
pub fn run(command: Command, scenario: &Scenario, out: &Path) -> RunOutcome {
    let start = Instant::now();
    let mut ctx = Ctx {
        out,
        checks: Vec::new(),
        outputs: Vec::new(),
    };
    let result = std::fs::create_dir_all(out)
        .map_err(Error::from)
        .and_then(|_| scenario.validate())
        .and_then(|_| dispatch(command, scenario, &mut ctx));
    let config = serde_json::to_vec(scenario).expect("scenario serializes");
    let (exit, failure) = match &result {
        Ok(()) => (EXIT_OK, None),
        Err(e) => {
            let code = exit_code(e);
            (
                code,
                Some(FailureRecord {
                    class: class_of(code).into(),
                    exit_code: code,
                    message: e.to_string(),
                }),
            )
        }
    };
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(&config),
        seed: scenario.seed,
        status: if exit == EXIT_OK { "success" } else { "failed" }.into(),
        failure,
        checks: ctx.checks,
        outputs: ctx.outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let mut exit_code = exit;
    let mut error = result.err();
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = write_atomic(&out.join(MANIFEST_FILE), text.as_bytes()) {
        if error.is_none() {
            exit_code = EXIT_SCHEMA;
            error = Some(e);
        }
    }
    RunOutcome {
        exit_code,
        manifest,
        error,
    }
}

/// Manifest for a run that failed before a scenario could be built, for
/// instance on a schema violation. Returns the exit code.
pub fn record_failure(command: Command, raw_config: &[u8], err: &Error, out: &Path) -> i32 {
    let code = exit_code(err);
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(raw_config),
        seed: None,
        status: "failed".into(),
        failure: Some(FailureRecord {
            class: class_of(code).into(),
            exit_code: code,
            message: err.to_string(),
        }),
        checks: Vec::new(),
        outputs: Vec::new(),
        wall_time_s: 0.0,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let _ = std::fs::create_dir_all(out)
        .map_err(Error::from)
        .and_then(|_| write_atomic(&out.join(MANIFEST_FILE), text.as_bytes()));
    code
}

fn class_of(code: i32) -> &'static str {
    match code {
        EXIT_PHYSICS => "physics",
        EXIT_NUMERICS => "numerics",
        _ => "schema",
    }
}

fn dispatch(command: Command, s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    match command {
        Command::Evolve => match s.space {
            SpaceSpec::Ring => evolve(s, ctx),
            SpaceSpec::TwoParticleRing { .. } => evolve_pair(s, ctx),
        },
        Command::Spectrum => run_spectrum(s, ctx),
        Command::Trajectories => trajectories(s, ctx),
        Command::Equivariance => equivariance(s, ctx),
        Command::AbCompare => ab_compare(s, ctx),
        Command::Classify => classify(s, ctx),
        Command::TwistedCheck => twisted_check(s, ctx),
        Command::Grw => grw(s, ctx),
    }
}

fn ring_setup(s: &Scenario) -> Result<(Twist, Potential, WaveGrid)> {
    if !matches!(s.space, SpaceSpec::Ring) {
        return Err(Error::Schema {
            path: "space.kind".into(),
            message: "this subcommand runs on a single-particle ring".into(),
        });
    }
    let twist = s.twist()?;
    let pot = s.ring_potential(&twist)?;
    let state = s.initial_state(&twist, &pot)?;
    Ok((twist, pot, state))
}

#[derive(Serialize)]
struct EvolveReport {
    steps: usize,
    t_final: f64,
    norm_drift: f64,
    max_twist_residual: f64,
}

fn evolve(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let (twist, pot, mut state) = ring_setup(s)?;
    let steps = s.numerics.steps()?;
    let mut stepper = SplitStep::new(&twist, &pot, s.numerics.n_points, s.units, s.numerics.dt)?;
    let n0 = state.norm_sq();
    let mut twist_res = state.twist_residual();
    for i in 0..steps {
        stepper.step(&mut state)?;
        if (i + 1) % 100 == 0 {
            twist_res = twist_res.max(state.twist_residual());
        }
    }
    twist_res = twist_res.max(state.twist_residual());
    let drift = (state.norm_sq() - n0).abs();
    let tol = &s.numerics.tolerances;
    ctx.require("norm_drift", drift, tol.norm_drift)?;
    ctx.require("twist_residual", twist_res, tol.twist_residual)?;
    if s.outputs.state {
        ctx.write_json("final_state.json", &state_to_json(&state))?;
    }
    ctx.write_json(
        "evolve_report.json",
        &EvolveReport {
            steps,
            t_final: steps as f64 * s.numerics.dt,
            norm_drift: drift,
            max_twist_residual: twist_res,
        },
    )
}

#[derive(Serialize)]
struct PairReport {
    steps: usize,
    norm_drift: f64,
    max_exchange_residual: f64,
    max_diagonal: f64,
}

fn evolve_pair(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let mut state = s.initial_pair_state()?;
    let pot = s.pair_potential();
    let steps = s.numerics.steps()?;
    let n = s.numerics.n_points;
    let mut stepper = TwoParticleStep::new(n, state.beta(), &pot, s.units, s.numerics.dt)?;
    let fermion = state.sector() == crate::propagator::ExchangeSector::Fermion;
    let n0 = state.norm_sq();
    let (mut ex, mut diag) = (state.exchange_residual(), 0.0f64);
    for _ in 0..steps {
        stepper.step(&mut state)?;
        ex = ex.max(state.exchange_residual());
        if fermion {
            diag = diag.max(state.diagonal_max());
        }
    }
    let drift = (state.norm_sq() - n0).abs();
    let tol = &s.numerics.tolerances;
    ctx.require("norm_drift", drift, tol.norm_drift)?;
    ctx.require("exchange_residual", ex, tol.exchange_residual)?;
    if fermion {
        ctx.require("diagonal_node", diag, tol.exchange_residual)?;
    }
    ctx.write_json(
        "pair_report.json",
        &PairReport {
            steps,
            norm_drift: drift,
            max_exchange_residual: ex,
            max_diagonal: diag,
        },
    )
}

/// Free-ring levels `ħκ(m + s)²/2` for every shift `s`, lowest first.
fn free_levels(shifts: &[f64], hbar_kappa: f64, count: usize) -> Vec<f64> {
    let mut e: Vec<f64> = shifts
        .iter()
        .flat_map(|s| (-(count as i64) - 2..=count as i64 + 2).map(move |m| 0.5 * hbar_kappa * (m as f64 + s).powi(2)))
        .collect();
    e.sort_by(f64::total_cmp);
    e.truncate(count);
    e
}

fn max_level_error(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300).max(if *b == 0.0 { 1.0 } else { 0.0 }))
        .fold(0.0, f64::max)
}

#[derive(Serialize)]
struct SpectrumReport {
    source: String,
    levels: Vec<f64>,
    analytic: Option<Vec<f64>>,
}

fn spectrum_csv(levels: &[f64]) -> String {
    let mut out = String::from("level,energy\n");
    for (i, e) in levels.iter().enumerate() {
        let _ = writeln!(out, "{i},{e:.17e}");
    }
    out
}

fn run_spectrum(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let n = s.numerics.n_points;
    let (source, twist) = match s.factor {
        FactorSpec::Flux { flux } => (
            SpectrumSource::Flux {
                flux,
                charge: s.units.charge,
            },
            Twist::trivial(s.components()),
        ),
        _ => {
            let t = s.twist()?;
            (SpectrumSource::Twist(t.clone()), t)
        }
    };
    let pot = s.ring_potential(&twist)?;
    let levels = spectrum(&source, &pot, n, &s.units, s.numerics.n_levels)?;
    let analytic = if matches!(pot, Potential::Free) {
        let shifts: Vec<f64> = match &source {
            SpectrumSource::Flux { flux, charge } => {
                vec![-charge * flux / (TAU * s.units.hbar); twist.dim()]
            }
            SpectrumSource::Twist(t) => t.phases().iter().map(|p| p / TAU).collect(),
        };
        let want = free_levels(&shifts, s.units.hbar * s.units.kappa(), levels.len());
        ctx.require(
            "free_spectrum_relative_error",
            max_level_error(&levels, &want),
            s.numerics.tolerances.free_spectrum,
        )?;
        Some(want)
    } else {
        None
    };
    if s.outputs.csv {
        ctx.write("spectrum.csv", spectrum_csv(&levels).as_bytes())?;
    }
    ctx.write_json(
        "spectrum.json",
        &SpectrumReport {
            source: match source {
                SpectrumSource::Flux { .. } => "flux".into(),
                SpectrumSource::Twist(_) => "twist".into(),
            },
            levels,
            analytic,
        },
    )
}

#[derive(Serialize)]
struct TrajectorySummary {
    count: usize,
    completed: usize,
    halted_at_node: usize,
    left_resolution: usize,
    final_positions: Vec<f64>,
    final_windings: Vec<i64>,
}

fn starts(s: &Scenario, state: &WaveGrid, sample: bool) -> Result<Vec<f64>> {
    if let Some(v) = &s.trajectories.starts {
        return Ok(v.clone());
    }
    let c = s.trajectories.count;
    if sample {
        sample_density(state, c, require_seed(s)?)
    } else {
        Ok((0..c).map(|i| TAU * (i as f64 + 0.5) / c as f64).collect())
    }
}

fn trajectories(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let (_, pot, state) = ring_setup(s)?;
    let q0 = starts(s, &state, true)?;
    let series = FieldSeries::evolve(&state, &pot, s.numerics.dt, s.numerics.steps()?)?;
    let trajs = integrate_trajectories(&series, &q0);
    let count = |f: fn(&TrajectoryStatus) -> bool| trajs.iter().filter(|t| f(&t.status)).count();
    let summary = TrajectorySummary {
        count: trajs.len(),
        completed: count(|s| matches!(s, TrajectoryStatus::Completed)),
        halted_at_node: count(|s| matches!(s, TrajectoryStatus::HaltedAtNode { .. })),
        left_resolution: count(|s| matches!(s, TrajectoryStatus::LeftResolution { .. })),
        final_positions: trajs.iter().map(|t| t.final_position()).collect(),
        final_windings: trajs.iter().map(|t| t.final_winding()).collect(),
    };
    if s.outputs.csv {
        ctx.write("trajectories.csv", trajectories_csv(&trajs)?.as_bytes())?;
    }
    ctx.write_json("trajectories.json", &summary)
}

fn equivariance(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let (_, pot, state) = ring_setup(s)?;
    let opts = EquivarianceOptions {
        n_samples: s.ensemble.n_samples,
        t_final: s.numerics.t_final,
        dt: s.numerics.dt,
        checkpoints: s.ensemble.checkpoints,
        seed: require_seed(s)?,
        bins: s.ensemble.bins,
        negate_velocity: s.ensemble.negate_velocity,
    };
    let report = verify_equivariance(&state, &pot, &opts)?;
    ctx.write_json("equivariance.json", &report)?;
    ctx.record(
        "halted_fraction",
        report.halted_fraction,
        crate::ensemble::MAX_HALTED_FRACTION,
        true,
    );
    if opts.negate_velocity {
        ctx.record("negative_control_tv", report.max_tv(), report.threshold, false);
        Ok(())
    } else {
        if !report.valid {
            return Err(Error::Numerics {
                invariant: "halted_fraction".into(),
                residual: report.halted_fraction,
                threshold: crate::ensemble::MAX_HALTED_FRACTION,
            });
        }
        ctx.require("equivariance_tv", report.max_tv(), report.threshold)
    }
}

#[derive(Serialize)]
struct AbReport {
    flux: f64,
    charge: f64,
    beta: f64,
    trajectories: usize,
    max_trajectory_deviation: f64,
    spectrum_vector_potential: Vec<f64>,
    spectrum_twisted: Vec<f64>,
    spectrum_shifted_flux: Vec<f64>,
    max_spectrum_deviation: f64,
    flux_periodicity_deviation: f64,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn ab_compare(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let FactorSpec::Flux { flux } = s.factor else {
        return Err(Error::Schema {
            path: "factor.kind".into(),
            message: "ab-compare needs a flux factor (or --flux)".into(),
        });
    };
    if !matches!(s.space, SpaceSpec::Ring) {
        return Err(Error::Schema {
            path: "space.kind".into(),
            message: "ab-compare runs on a single-particle ring".into(),
        });
    }
    let charge = s.units.charge;
    let n = s.numerics.n_points;
    let k = s.components();
    let plain = Twist::trivial(k);
    let pot = s.ring_potential(&plain)?;
    let state_a = s.initial_state(&plain, &pot)?;
    let twisted = gauge_map(&state_a, flux, charge)?;
    let beta = twisted.twist().beta().unwrap_or(0.0);
    let steps = s.numerics.steps()?;
    let q0 = starts(s, &state_a, false)?;
    let series_a = FieldSeries::evolve_vector_potential(&state_a, flux / TAU, &pot, s.numerics.dt, steps)?;
    let series_t = FieldSeries::evolve(&twisted, &pot, s.numerics.dt, steps)?;
    let ta = integrate_trajectories(&series_a, &q0);
    let tt = integrate_trajectories(&series_t, &q0);
    let dev = ta
        .iter()
        .zip(&tt)
        .map(|(a, b)| {
            if a.status != b.status || a.positions.len() != b.positions.len() {
                return f64::INFINITY;
            }
            max_diff(&a.unwrapped(), &b.unwrapped())
        })
        .fold(0.0, f64::max);
    let levels = s.numerics.n_levels;
    let spec_a = spectrum(&SpectrumSource::Flux { flux, charge }, &pot, n, &s.units, levels)?;
    let spec_t = spectrum(
        &SpectrumSource::Twist(twisted.twist().clone()),
        &pot,
        n,
        &s.units,
        levels,
    )?;
    let period = TAU * s.units.hbar / charge;
    let spec_p = spectrum(
        &SpectrumSource::Flux {
            flux: flux + period,
            charge,
        },
        &pot,
        n,
        &s.units,
        levels,
    )?;
    let report = AbReport {
        flux,
        charge,
        beta,
        trajectories: q0.len(),
        max_trajectory_deviation: dev,
        max_spectrum_deviation: max_diff(&spec_a, &spec_t),
        flux_periodicity_deviation: max_diff(&spec_a, &spec_p),
        spectrum_vector_potential: spec_a,
        spectrum_twisted: spec_t,
        spectrum_shifted_flux: spec_p,
    };
    ctx.write_json("ab_compare.json", &report)?;
    let tol = &s.numerics.tolerances;
    ctx.require(
        "gauge_trajectory_deviation",
        report.max_trajectory_deviation,
        tol.gauge_trajectory,
    )?;
    ctx.require(
        "gauge_spectrum_deviation",
        report.max_spectrum_deviation,
        tol.gauge_spectrum,
    )?;
    ctx.require(
        "flux_periodicity",
        report.flux_periodicity_deviation,
        tol.gauge_spectrum,
    )
}

fn classify(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let factor = s.top_factor()?;
    let dim = match &factor {
        TopFactor::Character(_) => s.components(),
        TopFactor::Matrix(m) => m.dim(),
        TopFactor::Twisted(t) => t.dim(),
    };
    let twist = match &factor {
        TopFactor::Twisted(_) => Twist::trivial(s.components()),
        f => Twist::from_factor(f, s.components())?,
    };
    let pot = s.ring_potential(&twist)?;
    let mut samples = pot.samples(s.components());
    if samples[0].nrows() == 1 && dim > 1 {
        // a scalar potential acts as a multiple of the identity
        samples = samples
            .iter()
            .map(|v| identity(dim) * Complex64::from(v[(0, 0)].re))
            .collect();
    }
    if matches!(s.potential, PotentialSpec::Free) {
        samples = vec![CMat::zeros(dim, dim)];
    }
    let c = classify_dynamics(&factor, &samples, DEFAULT_WORD_LENGTH_CAP)?;
    ctx.write_json("classification.json", &c)?;
    ctx.record(
        "commutation_residual",
        c.commutation_residual,
        crate::topofactor::COMMUTE_TOL,
        true,
    );
    if c.compatible {
        Ok(())
    } else {
        Err(Error::Incompatible {
            residual: c.commutation_residual,
        })
    }
}

#[derive(Serialize)]
struct TwistedReport {
    n_particles: usize,
    value_dim: usize,
    table_size: usize,
    samples: usize,
    seed: u64,
    residual: f64,
    corrupted_residual: Option<f64>,
}

fn twisted_check(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let FactorSpec::Nfermion { n_particles, .. } = &s.factor else {
        return Err(Error::Schema {
            path: "factor.kind".into(),
            message: "twisted-check needs an nfermion factor".into(),
        });
    };
    let seed = require_seed(s)?;
    let TopFactor::Twisted(table) = s.top_factor()? else {
        unreachable!("nfermion factors build twisted tables")
    };
    let residual = verify_twisted_law(&table, s.twisted.samples, seed)?;
    let corrupted_residual = if s.twisted.corrupt {
        let mut bad = table.clone();
        let sigma = bad.elements()[1].clone();
        let g = bad.entry(&sigma).expect("element is in the table").gamma.clone();
        bad.set_gamma(&sigma, g * Complex64::from_polar(1.0, 0.5))?;
        Some(verify_twisted_law(&bad, s.twisted.samples, seed)?)
    } else {
        None
    };
    ctx.write_json(
        "twisted_check.json",
        &TwistedReport {
            n_particles: *n_particles,
            value_dim: table.dim(),
            table_size: table.len(),
            samples: s.twisted.samples,
            seed,
            residual,
            corrupted_residual,
        },
    )?;
    ctx.require("twisted_composition", residual, s.numerics.tolerances.twisted_law)?;
    if let Some(r) = corrupted_residual {
        if !ctx.record("corruption_detected", r, 1e-6, false) {
            return Err(Error::Numerics {
                invariant: "corruption_detected".into(),
                residual: r,
                threshold: 1e-6,
            });
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GrwReport {
    lambda: f64,
    a: f64,
    t_final: f64,
    events: usize,
    bound_refreshes: usize,
    stale_retries: usize,
    rejected_candidates: usize,
    max_twist_residual: f64,
    log: Vec<String>,
}

fn grw(s: &Scenario, ctx: &mut Ctx<'_>) -> Result<()> {
    let (_, pot, state) = ring_setup(s)?;
    let opts = GrwOptions {
        lambda: s.grw.lambda,
        a: s.grw.a,
        t_final: s.numerics.t_final,
        dt: s.numerics.dt,
        seed: require_seed(s)?,
        allow_aperiodic: s.grw.allow_aperiodic,
    };
    let run = simulate_grw(&state, &pot, &opts)?;
    if s.outputs.csv {
        ctx.write("events.csv", &events_csv(&run.events)?)?;
    }
    if s.outputs.state {
        ctx.write_json("final_state.json", &state_to_json(&run.final_state))?;
    }
    ctx.write_json(
        "grw_report.json",
        &GrwReport {
            lambda: opts.lambda,
            a: opts.a,
            t_final: opts.t_final,
            events: run.events.len(),
            bound_refreshes: run.bound_refreshes,
            stale_retries: run.stale_retries,
            rejected_candidates: run.rejected_candidates,
            max_twist_residual: run.max_twist_residual,
            log: run.log,
        },
    )?;
    if opts.allow_aperiodic {
        ctx.record(
            "grw_twist_residual",
            run.max_twist_residual,
            s.numerics.tolerances.twist_residual,
            true,
        );
        Ok(())
    } else {
        ctx.require(
            "grw_twist_residual",
            run.max_twist_residual,
            s.numerics.tolerances.twist_residual,
        )
    }
}

/// Reads a manifest back, rejecting unknown fields.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let m: Manifest = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(Error::Schema {
            path: "schema".into(),
            message: format!("expected {MANIFEST_SCHEMA}"),
        });
    }
    Ok(m)
}

/// Output directory, falling back to `topobohm-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from("topobohm-out"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{InitialSpec, Numerics, Trig};

    fn small() -> Scenario {
        Scenario {
            numerics: Numerics {
                n_points: 64,
                dt: 1e-3,
                t_final: 0.05,
                n_levels: 8,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn free_level_table() {
        let l = free_levels(&[0.0], 1.0, 5);
        assert_eq!(l, vec![0.0, 0.5, 0.5, 2.0, 2.0]);
        assert!(max_level_error(&[0.0, 0.5], &[0.0, 0.5]) == 0.0);
    }

    #[test]
    fn spectrum_run_succeeds_and_manifest_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario {
            factor: FactorSpec::Character { beta: 0.0 },
            ..small()
        };
        let a = run(Command::Spectrum, &s, dir.path());
        assert_eq!(a.exit_code, 0, "{:?}", a.error);
        let b = run(Command::Spectrum, &s, dir.path());
        let strip = |mut m: Manifest| {
            m.wall_time_s = 0.0;
            m
        };
        assert_eq!(strip(a.manifest), strip(b.manifest.clone()));
        let back = read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(strip(back), strip(b.manifest));
    }

    #[test]
    fn exit_classes() {
        let dir = tempfile::tempdir().unwrap();
        // missing seed on a randomized subcommand
        assert_eq!(run(Command::Grw, &small(), dir.path()).exit_code, EXIT_SCHEMA);
        // non-commuting factor and potential
        let s = Scenario {
            factor: FactorSpec::AharonovCasher {
                mu_lambda: 0.125,
                axis: [0.0, 0.0, 1.0],
            },
            potential: PotentialSpec::Pauli(crate::scenario::PauliSpec {
                x: Trig {
                    constant: 1.0,
                    ..Default::default()
                },
                ..Default::default()
            }),
            ..small()
        };
        let out = run(Command::Evolve, &s, dir.path());
        assert_eq!(out.exit_code, EXIT_PHYSICS);
        assert_eq!(out.manifest.status, "failed");
        // the gauge comparison itself succeeds
        let s = Scenario {
            factor: FactorSpec::Flux { flux: 1.0 },
            initial: InitialSpec::Gaussian {
                center: 1.0,
                sigma: 0.5,
                k0: 1.0,
                spinor: None,
            },
            ..small()
        };
        assert_eq!(run(Command::AbCompare, &s, dir.path()).exit_code, EXIT_OK);
        // an unreachable tolerance is a numerics failure naming the invariant
        let mut s = Scenario {
            factor: FactorSpec::Character { beta: 0.3 },
            ..small()
        };
        s.numerics.tolerances.free_spectrum = 0.0;
        let out = run(Command::Spectrum, &s, dir.path());
        assert_eq!(out.exit_code, EXIT_NUMERICS);
        assert!(out
            .manifest
            .failure
            .unwrap()
            .message
            .contains("free_spectrum_relative_error"));
    }

    #[test]
    fn overrides_replace_fields() {
        let mut s = small();
        Overrides {
            flux: Some(2.0),
            seed: Some(7),
            n_points: Some(128),
            ..Default::default()
        }
        .apply(&mut s)
        .unwrap();
        assert_eq!(s.factor, FactorSpec::Flux { flux: 2.0 });
        assert_eq!(s.seed, Some(7));
        assert_eq!(s.numerics.n_points, 128);
        assert!(Overrides {
            n_points: Some(100),
            ..Default::default()
        }
        .apply(&mut s)
        .is_err());
    }
}
