//! Versioned JSON scenario configs and their translation into domain objects.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, pauli_x, pauli_y, pauli_z, CMat};
use crate::propagator::{
    eigenstate, gaussian_packet, plane_wave, ExchangeSector, PairPotential, Potential, Twist, TwoParticleGrid, Units,
    WaveGrid,
};
use crate::topofactor::{Character, MatrixRep, TopFactor};

pub const SCENARIO_SCHEMA: &str = "topobohm.scenario/v1";

/// Row-major complex matrix, entries as `[re, im]`.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_from_json(m: &MatrixJson, path: &str) -> Result<CMat> {
    let k = m.len();
    if k == 0 || m.iter().any(|r| r.len() != k) {
        return Err(Error::Schema {
            path: path.into(),
            message: "matrix must be square and non-empty".into(),
        });
    }
    Ok(CMat::from_fn(k, k, |i, j| Complex64::new(m[i][j][0], m[i][j][1])))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    #[default]
    Ring,
    TwoParticleRing {
        sector: ExchangeSector,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    #[default]
    Trivial,
    /// `γ(σ₁) = e^{iβ}`.
    Character { beta: f64 },
    /// Flux Φ through the ring, carried as the character `β = −eΦ/ħ`.
    Flux { flux: f64 },
    /// Unitary generator `Γ₁`.
    Matrix { generator: MatrixJson },
    /// Spin-½ factor `exp(−4πi μλ/ħ e·σ)`.
    AharonovCasher {
        mu_lambda: f64,
        #[serde(default = "default_axis")]
        axis: [f64; 3],
    },
    /// N-particle twisted factor over `S_N ⋉ F_gᴺ`, one matrix per free generator.
    Nfermion {
        n_particles: usize,
        generators: Vec<MatrixJson>,
    },
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// `c + Σ_m a_m cos(mθ) + b_m sin(mθ)`, with `m` starting at 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trig {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl Trig {
    pub fn eval(&self, theta: f64) -> f64 {
        let c: f64 = self
            .cos
            .iter()
            .enumerate()
            .map(|(m, a)| a * ((m + 1) as f64 * theta).cos())
            .sum();
        let s: f64 = self
            .sin
            .iter()
            .enumerate()
            .map(|(m, b)| b * ((m + 1) as f64 * theta).sin())
            .sum();
        self.constant + c + s
    }

    fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.cos.iter().chain(&self.sin).all(|x| *x == 0.0)
    }
}

/// `V(θ) = v₀ + v_x σ_x + v_y σ_y + v_z σ_z`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliSpec {
    #[serde(default)]
    pub identity: Trig,
    #[serde(default)]
    pub x: Trig,
    #[serde(default)]
    pub y: Trig,
    #[serde(default)]
    pub z: Trig,
}

impl PauliSpec {
    pub fn eval(&self, theta: f64) -> CMat {
        identity(2) * Complex64::from(self.identity.eval(theta))
            + pauli_x() * Complex64::from(self.x.eval(theta))
            + pauli_y() * Complex64::from(self.y.eval(theta))
            + pauli_z() * Complex64::from(self.z.eval(theta))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Free,
    Trig(Trig),
    Tabulated {
        values: Vec<f64>,
    },
    Pauli(PauliSpec),
    /// Cover-side `V*` on the fundamental sheet, continued by `V*(σq̂) = Γ V*(q̂) Γ⁻¹`.
    Covariant(PauliSpec),
    /// Two particles: `U(θ₁) + U(θ₂) + W(θ₁ − θ₂)`.
    Pair {
        external: Trig,
        interaction: Trig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Gaussian packet; `spinor` gives the component amplitudes.
    Gaussian {
        center: f64,
        sigma: f64,
        #[serde(default)]
        k0: f64,
        #[serde(default)]
        spinor: Option<Vec<[f64; 2]>>,
    },
    PlaneWave {
        m: i64,
        #[serde(default)]
        spinor: Option<Vec<[f64; 2]>>,
    },
    Eigenstate {
        index: usize,
    },
    /// Product of two packets, (anti)symmetrized.
    PairGaussian {
        centers: [f64; 2],
        sigma: f64,
        #[serde(default)]
        k0: [f64; 2],
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Gaussian {
            center: 1.0,
            sigma: 0.5,
            k0: 2.0,
            spinor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_points: usize,
    pub dt: f64,
    pub t_final: f64,
    pub n_levels: usize,
    pub tolerances: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n_points: 256,
            dt: 1e-3,
            t_final: 1.0,
            n_levels: 8,
            tolerances: Tolerances::default(),
        }
    }
}

/// Thresholds of the invariant checks a run performs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub norm_drift: f64,
    pub twist_residual: f64,
    pub exchange_residual: f64,
    /// Relative error of free-ring levels against the closed form.
    pub free_spectrum: f64,
    pub gauge_trajectory: f64,
    pub gauge_spectrum: f64,
    pub twisted_law: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm_drift: 1e-7,
            twist_residual: 1e-9,
            exchange_residual: 1e-9,
            free_spectrum: 1e-8,
            gauge_trajectory: 1e-6,
            gauge_spectrum: 1e-10,
            twisted_law: 1e-12,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            ("norm_drift", self.norm_drift),
            ("twist_residual", self.twist_residual),
            ("exchange_residual", self.exchange_residual),
            ("free_spectrum", self.free_spectrum),
            ("gauge_trajectory", self.gauge_trajectory),
            ("gauge_spectrum", self.gauge_spectrum),
            ("twisted_law", self.twisted_law),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(schema_err(
                    &format!("numerics.tolerances.{name}"),
                    "must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }
}

impl Numerics {
    /// Whole number of steps covering `t_final`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_final >= 0.0) {
            return Err(Error::Schema {
                path: "numerics.dt".into(),
                message: "dt must be positive and t_final non-negative".into(),
            });
        }
        let s = (self.t_final / self.dt).round();
        if (s * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(Error::Schema {
                path: "numerics.t_final".into(),
                message: "t_final must be a whole number of steps".into(),
            });
        }
        Ok(s as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub checkpoints: usize,
    pub bins: usize,
    pub negate_velocity: bool,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            checkpoints: 4,
            bins: 64,
            negate_velocity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySpec {
    /// Explicit starting angles; sampled from |ψ₀|² when absent.
    pub starts: Option<Vec<f64>>,
    pub count: usize,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            starts: None,
            count: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrwSpec {
    pub lambda: f64,
    pub a: f64,
    pub allow_aperiodic: bool,
}

impl Default for GrwSpec {
    fn default() -> Self {
        Self {
            lambda: crate::grw::DEFAULT_LAMBDA,
            a: crate::grw::DEFAULT_WIDTH,
            allow_aperiodic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistedSpec {
    pub samples: usize,
    pub radius: usize,
    /// Also verify that a deliberately corrupted table entry is detected.
    pub corrupt: bool,
}

impl Default for TwistedSpec {
    fn default() -> Self {
        Self {
            samples: 1000,
            radius: 3,
            corrupt: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub state: bool,
    pub csv: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { state: true, csv: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    #[serde(default)]
    pub space: SpaceSpec,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub factor: FactorSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub trajectories: TrajectorySpec,
    #[serde(default)]
    pub grw: GrwSpec,
    #[serde(default)]
    pub twisted: TwistedSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema: SCENARIO_SCHEMA.into(),
            space: SpaceSpec::default(),
            units: Units::default(),
            factor: FactorSpec::default(),
            potential: PotentialSpec::default(),
            initial: InitialSpec::default(),
            numerics: Numerics::default(),
            seed: None,
            ensemble: EnsembleSpec::default(),
            trajectories: TrajectorySpec::default(),
            grw: GrwSpec::default(),
            twisted: TwistedSpec::default(),
            outputs: OutputSpec::default(),
        }
    }
}

fn schema_err(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

impl Scenario {
    /// Parses and validates a scenario; errors carry the offending field path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(schema_err(
                "schema",
                format!("expected {SCENARIO_SCHEMA}, got {}", self.schema),
            ));
        }
        let n = self.numerics.n_points;
        if n < 8 || !n.is_power_of_two() {
            return Err(schema_err("numerics.n_points", "must be a power of two ≥ 8"));
        }
        self.numerics.steps()?;
        self.numerics.tolerances.validate()?;
        if let PotentialSpec::Tabulated { values } = &self.potential {
            if values.len() != n {
                return Err(schema_err("potential.values", format!("expected {n} values")));
            }
        }
        let two = matches!(self.space, SpaceSpec::TwoParticleRing { .. });
        if two != matches!(self.initial, InitialSpec::PairGaussian { .. }) {
            return Err(schema_err(
                "initial.kind",
                "pair_gaussian goes with two_particle_ring and only there",
            ));
        }
        if two && !matches!(self.potential, PotentialSpec::Free | PotentialSpec::Pair { .. }) {
            return Err(schema_err(
                "potential.kind",
                "two-particle rings take free or pair potentials",
            ));
        }
        if !two && matches!(self.potential, PotentialSpec::Pair { .. }) {
            return Err(schema_err("potential.kind", "pair potentials need a two_particle_ring"));
        }
        Ok(())
    }

    /// The topological factor on the ring's deck group ℤ, or the N-particle table.
    pub fn top_factor(&self) -> Result<TopFactor> {
        Ok(match &self.factor {
            FactorSpec::Trivial => TopFactor::Character(Character::ring(0.0)),
            FactorSpec::Character { beta } => TopFactor::Character(Character::ring(*beta)),
            FactorSpec::Flux { flux } => {
                TopFactor::Character(Character::ring(-self.units.charge * flux / self.units.hbar))
            }
            FactorSpec::Matrix { generator } => {
                TopFactor::Matrix(MatrixRep::ring(matrix_from_json(generator, "factor.generator")?)?)
            }
            FactorSpec::AharonovCasher { mu_lambda, axis } => {
                TopFactor::Matrix(MatrixRep::aharonov_casher(*mu_lambda, *axis, self.units.hbar)?)
            }
            FactorSpec::Nfermion {
                n_particles,
                generators,
            } => {
                let gens = generators
                    .iter()
                    .enumerate()
                    .map(|(i, g)| matrix_from_json(g, &format!("factor.generators[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                let w = gens.first().map(|g| g.nrows()).unwrap_or(0);
                TopFactor::Twisted(crate::topofactor::TwistedRepTable::nfermion(
                    *n_particles,
                    w,
                    &gens,
                    self.twisted.radius,
                )?)
            }
        })
    }

    /// Components of the wave function implied by factor and potential.
    pub fn components(&self) -> usize {
        match (&self.factor, &self.potential) {
            (FactorSpec::Matrix { generator }, _) => generator.len().max(1),
            (FactorSpec::AharonovCasher { .. }, _) => 2,
            (_, PotentialSpec::Pauli(_) | PotentialSpec::Covariant(_)) => 2,
            _ => 1,
        }
    }

    pub fn twist(&self) -> Result<Twist> {
        Twist::from_factor(&self.top_factor()?, self.components())
    }

    pub fn ring_potential(&self, twist: &Twist) -> Result<Potential> {
        let n = self.numerics.n_points;
        Ok(match &self.potential {
            PotentialSpec::Free => Potential::Free,
            PotentialSpec::Trig(t) if t.is_zero() => Potential::Free,
            PotentialSpec::Trig(t) => Potential::scalar_fn(n, |th| t.eval(th)),
            PotentialSpec::Tabulated { values } => Potential::Scalar(values.clone()),
            PotentialSpec::Pauli(p) => Potential::matrix_fn(n, |th| p.eval(th)),
            PotentialSpec::Covariant(p) => {
                let sheet0: Vec<CMat> = (0..n).map(|j| p.eval(TAU * j as f64 / n as f64)).collect();
                Potential::covariant_from_cover(twist, &sheet0)
            }
            PotentialSpec::Pair { .. } => {
                return Err(schema_err("potential.kind", "pair potential on a one-particle ring"))
            }
        })
    }

    pub fn pair_potential(&self) -> PairPotential {
        let n = self.numerics.n_points;
        match &self.potential {
            PotentialSpec::Pair { external, interaction } => {
                PairPotential::from_parts(n, |t| external.eval(t), |d| interaction.eval(d))
            }
            _ => PairPotential::free(n),
        }
    }

    fn spinor(&self, spinor: &Option<Vec<[f64; 2]>>, k: usize) -> Result<Vec<Complex64>> {
        match spinor {
            None => {
                let mut v = vec![Complex64::default(); k];
                v[0] = Complex64::from(1.0);
                Ok(v)
            }
            Some(s) if s.len() == k => Ok(s.iter().map(|p| Complex64::new(p[0], p[1])).collect()),
            Some(_) => Err(schema_err("initial.spinor", format!("expected {k} amplitudes"))),
        }
    }

    /// Initial ring state in the gauge-fixed representation of `twist`.
    pub fn initial_state(&self, twist: &Twist, potential: &Potential) -> Result<WaveGrid> {
        let n = self.numerics.n_points;
        let k = twist.dim();
        let profile = match &self.initial {
            InitialSpec::Gaussian {
                center,
                sigma,
                k0,
                spinor,
            } => {
                if !(*sigma > 0.0) {
                    return Err(schema_err("initial.sigma", "must be positive"));
                }
                (gaussian_packet(n, *center, *sigma, *k0), self.spinor(spinor, k)?)
            }
            InitialSpec::PlaneWave { m, spinor } => (plane_wave(n, *m), self.spinor(spinor, k)?),
            InitialSpec::Eigenstate { index } => {
                return eigenstate(twist, potential, n, &self.units, *index);
            }
            InitialSpec::PairGaussian { .. } => {
                return Err(schema_err("initial.kind", "pair_gaussian on a one-particle ring"))
            }
        };
        let (f, s) = profile;
        let chi = s.iter().map(|a| f.iter().map(|z| z * a).collect()).collect();
        WaveGrid::from_chi(chi, twist.clone(), self.units)
    }

    pub fn initial_pair_state(&self) -> Result<TwoParticleGrid> {
        let (SpaceSpec::TwoParticleRing { sector }, InitialSpec::PairGaussian { centers, sigma, k0 }) =
            (&self.space, &self.initial)
        else {
            return Err(schema_err(
                "space.kind",
                "expected a two_particle_ring with pair_gaussian",
            ));
        };
        let n = self.numerics.n_points;
        let beta = match self.top_factor()? {
            TopFactor::Character(c) => c.beta().unwrap_or(0.0),
            _ => return Err(schema_err("factor.kind", "two-particle rings take scalar factors")),
        };
        let u = gaussian_packet(n, centers[0], *sigma, k0[0]);
        let v = gaussian_packet(n, centers[1], *sigma, k0[1]);
        let values: Vec<Complex64> = (0..n * n)
            .map(|i| {
                let (a, b) = (i / n, i % n);
                u[a] * v[b] + u[b] * v[a] * sector.sign()
            })
            .collect();
        TwoParticleGrid::new(n, values, *sector, beta, self.units)
    }
}
