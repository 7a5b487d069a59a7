use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topobohm::runner::{self, Command, Overrides};
use topobohm::scenario::Scenario;

/// Twisted-ring quantum dynamics, Bohmian trajectories and GRW collapses.
#[derive(Parser)]
#[command(name = "topobohm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split-step evolution with norm and twist checks.
    Evolve(Opts),
    /// Lowest levels of the ring Hamiltonian.
    Spectrum(Opts),
    /// Bohmian trajectories from given or sampled starting points.
    Trajectories(Opts),
    /// Compare a transported |ψ₀|² ensemble with |ψ_t|².
    Equivariance(Opts),
    /// Vector-potential gauge against the twisted gauge.
    AbCompare(Opts),
    /// Dynamics class of a factor against the potential.
    Classify(Opts),
    /// Composition law of an N-particle twisted factor table.
    TwistedCheck(Opts),
    /// Schrödinger evolution with GRW collapses.
    Grw(Opts),
}

#[derive(Args)]
struct Opts {
    /// Scenario JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "TOPOBOHM_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ring character e^{iβ}.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Flux Φ through the ring.
    #[arg(long, allow_hyphen_values = true)]
    flux: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    charge: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    n_levels: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// Transport the ensemble with the sign-flipped velocity.
    #[arg(long)]
    negate_velocity: bool,
    /// Skip the twist-residual check at collapse events.
    #[arg(long)]
    allow_aperiodic: bool,
    /// GRW collapse rate λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// GRW collapse width a.
    #[arg(long)]
    width: Option<f64>,
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            beta: self.beta,
            flux: self.flux,
            charge: self.charge,
            n_points: self.n_points,
            dt: self.dt,
            t_final: self.t_final,
            n_levels: self.n_levels,
            n_samples: self.n_samples,
            negate_velocity: self.negate_velocity,
            allow_aperiodic: self.allow_aperiodic,
            lambda: self.lambda,
            width: self.width,
        }
    }
}

fn load(opts: &Opts, raw: &mut Vec<u8>) -> topobohm::Result<Scenario> {
    let mut s = match &opts.config {
        Some(p) => {
            *raw = std::fs::read(p)?;
            Scenario::from_json_str(&String::from_utf8_lossy(raw))?
        }
        None => Scenario::default(),
    };
    opts.overrides().apply(&mut s)?;
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::Evolve(o) => (Command::Evolve, o),
        Cmd::Spectrum(o) => (Command::Spectrum, o),
        Cmd::Trajectories(o) => (Command::Trajectories, o),
        Cmd::Equivariance(o) => (Command::Equivariance, o),
        Cmd::AbCompare(o) => (Command::AbCompare, o),
        Cmd::Classify(o) => (Command::Classify, o),
        Cmd::TwistedCheck(o) => (Command::TwistedCheck, o),
        Cmd::Grw(o) => (Command::Grw, o),
    };
    let out = runner::resolve_out_dir(opts.out.clone());
    let mut raw = Vec::new();
    let scenario = match load(&opts, &mut raw) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(runner::record_failure(command, &raw, &e, &out) as u8);
        }
    };
    let outcome = runner::run(command, &scenario, &out);
    for c in &outcome.manifest.checks {
        println!(
            "{:<32} {:>12.3e} {} {:>10.3e}  {}",
            c.id,
            c.value.unwrap_or(f64::NAN),
            if c.comparison == "le" { "<=" } else { ">=" },
            c.threshold,
            if c.pass { "ok" } else { "FAILED" }
        );
    }
    match &outcome.error {
        None => println!("{} finished; outputs in {}", command.name(), out.display()),
        Some(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(outcome.exit_code as u8)
}
