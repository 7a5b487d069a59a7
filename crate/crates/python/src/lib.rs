//! Python bindings for the `topobohm` crate.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use topobohm::bohm::{integrate_trajectories, FieldSeries};
use topobohm::ensemble::{sample_density, verify_equivariance, EquivarianceOptions};
use topobohm::grw::{simulate_grw, GrwOptions};
use topobohm::linalg::{identity, pauli_x, pauli_y, pauli_z};
use topobohm::propagator::{
    self, crank_nicolson, gaussian_packet, state_from_json, state_to_json, Potential, SpectrumSource, SplitStep, Twist,
    Units, WaveGrid,
};
use topobohm::runner::{self, Command};
use topobohm::scenario::Scenario;
use topobohm::topofactor::{
    classify_dynamics, enumerate_characters, FiniteGroup, MatrixRep, TopFactor, DEFAULT_WORD_LENGTH_CAP,
};
use topobohm::{Error, ErrorKind};

create_exception!(
    topobohm_py,
    TopobohmError,
    PyException,
    "Base class for topobohm errors."
);
create_exception!(
    topobohm_py,
    PhysicsError,
    TopobohmError,
    "Physically inadmissible input."
);
create_exception!(
    topobohm_py,
    NumericsError,
    TopobohmError,
    "A numerical invariant was breached."
);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Input => PyValueError::new_err(msg),
        ErrorKind::Physics => PhysicsError::new_err(msg),
        ErrorKind::Numerics => NumericsError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for topobohm::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Serializes through JSON into plain Python dicts and lists.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| to_py(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn scalar_potential(values: Option<Vec<f64>>) -> Potential {
    values.map_or(Potential::Free, Potential::Scalar)
}

/// Gauge-fixed wave function on an n-point ring grid.
#[pyclass(name = "WaveGrid", module = "topobohm_py", skip_from_py_object)]
#[derive(Clone)]
struct PyWaveGrid {
    inner: WaveGrid,
}

#[pymethods]
impl PyWaveGrid {
    /// Normalized Gaussian packet on a scalar ring twist e^{iβ}.
    #[staticmethod]
    #[pyo3(signature = (n_points, center, sigma, k0 = 0.0, beta = 0.0))]
    fn gaussian(n_points: usize, center: f64, sigma: f64, k0: f64, beta: f64) -> PyResult<Self> {
        let chi = gaussian_packet(n_points, center, sigma, k0);
        let mut inner = WaveGrid::from_chi(vec![chi], Twist::scalar(beta, 1), Units::default()).py_err()?;
        inner.normalize().py_err()?;
        Ok(Self { inner })
    }

    /// Builds a state from one list of periodic samples per component.
    #[staticmethod]
    #[pyo3(signature = (chi, beta = 0.0))]
    fn from_chi(chi: Vec<Vec<Complex64>>, beta: f64) -> PyResult<Self> {
        let k = chi.len();
        let twist = Twist::scalar(beta, k);
        Ok(Self {
            inner: WaveGrid::from_chi(chi, twist, Units::default()).py_err()?,
        })
    }

    /// Lowest-but-`index` eigenstate of the ring Hamiltonian.
    #[staticmethod]
    #[pyo3(signature = (n_points, index, beta = 0.0, potential = None))]
    fn eigenstate(n_points: usize, index: usize, beta: f64, potential: Option<Vec<f64>>) -> PyResult<Self> {
        let inner = propagator::eigenstate(
            &Twist::scalar(beta, 1),
            &scalar_potential(potential),
            n_points,
            &Units::default(),
            index,
        )
        .py_err()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| to_py(e.into()))?;
        Ok(Self {
            inner: state_from_json(&value).py_err()?,
        })
    }

    fn to_json(&self) -> String {
        state_to_json(&self.inner).to_string()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn components(&self) -> usize {
        self.inner.components()
    }

    /// Scalar twist angle, `None` for a matrix twist.
    #[getter]
    fn beta(&self) -> Option<f64> {
        self.inner.twist().beta()
    }

    fn thetas(&self) -> Vec<f64> {
        self.inner.thetas()
    }

    fn chi(&self) -> Vec<Vec<Complex64>> {
        self.inner.chi().to_vec()
    }

    fn psi_on_sheet(&self, sheet: i64) -> Vec<Vec<Complex64>> {
        self.inner.psi_on_sheet(sheet)
    }

    fn density(&self) -> Vec<f64> {
        self.inner.density()
    }

    fn norm_sq(&self) -> f64 {
        self.inner.norm_sq()
    }

    fn twist_residual(&self) -> f64 {
        self.inner.twist_residual()
    }

    fn l2_distance(&self, other: &PyWaveGrid) -> f64 {
        self.inner.l2_distance(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "WaveGrid(n_points={}, components={}, beta={:?})",
            self.inner.n_points(),
            self.inner.components(),
            self.inner.twist().beta()
        )
    }
}

/// Strang split-step evolution; `potential` holds V at the grid points.
#[pyfunction]
#[pyo3(signature = (state, dt, steps, potential = None))]
fn evolve(state: &PyWaveGrid, dt: f64, steps: usize, potential: Option<Vec<f64>>) -> PyResult<PyWaveGrid> {
    let s = &state.inner;
    let pot = scalar_potential(potential);
    let mut out = s.clone();
    SplitStep::new(s.twist(), &pot, s.n_points(), *s.units(), dt)
        .and_then(|mut p| p.run(&mut out, steps))
        .py_err()?;
    Ok(PyWaveGrid { inner: out })
}

/// Dense Crank–Nicolson reference propagator.
#[pyfunction(name = "crank_nicolson")]
#[pyo3(signature = (state, dt, steps, potential = None))]
fn py_crank_nicolson(state: &PyWaveGrid, dt: f64, steps: usize, potential: Option<Vec<f64>>) -> PyResult<PyWaveGrid> {
    let inner = crank_nicolson(&state.inner, &scalar_potential(potential), dt, steps).py_err()?;
    Ok(PyWaveGrid { inner })
}

/// Lowest levels of the ring Hamiltonian, twisted by `beta` or threaded by `flux`.
#[pyfunction(name = "spectrum")]
#[pyo3(signature = (n_points = 256, n_levels = 8, beta = None, flux = None, charge = 1.0, potential = None))]
fn py_spectrum(
    n_points: usize,
    n_levels: usize,
    beta: Option<f64>,
    flux: Option<f64>,
    charge: f64,
    potential: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let source = match (beta, flux) {
        (Some(_), Some(_)) => return Err(PyValueError::new_err("give either beta or flux, not both")),
        (_, Some(flux)) => SpectrumSource::Flux { flux, charge },
        (b, None) => SpectrumSource::Twist(Twist::scalar(b.unwrap_or(0.0), 1)),
    };
    propagator::spectrum(
        &source,
        &scalar_potential(potential),
        n_points,
        &Units::default(),
        n_levels,
    )
    .py_err()
}

/// Maps a vector-potential-gauge state to the twisted gauge.
#[pyfunction(name = "gauge_map")]
fn py_gauge_map(state: &PyWaveGrid, flux: f64, charge: f64) -> PyResult<PyWaveGrid> {
    let inner = propagator::gauge_map(&state.inner, flux, charge).py_err()?;
    Ok(PyWaveGrid { inner })
}

/// Bohmian trajectories from `starts`; each is a dict of times, positions,
/// windings and status.
#[pyfunction]
#[pyo3(signature = (state, starts, dt, steps, potential = None))]
fn trajectories<'py>(
    py: Python<'py>,
    state: &PyWaveGrid,
    starts: Vec<f64>,
    dt: f64,
    steps: usize,
    potential: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let series = FieldSeries::evolve(&state.inner, &scalar_potential(potential), dt, steps).py_err()?;
    to_object(py, &integrate_trajectories(&series, &starts))
}

/// Draws `n` positions from |ψ|².
#[pyfunction]
fn sample(state: &PyWaveGrid, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    sample_density(&state.inner, n, seed).py_err()
}

/// Transports a |ψ₀|² ensemble and compares it with |ψ_t|².
#[pyfunction]
#[pyo3(signature = (state, seed, n_samples = 10_000, t_final = 0.5, dt = 5e-3, checkpoints = 5, bins = 64, negate_velocity = false, potential = None))]
#[allow(clippy::too_many_arguments)]
fn equivariance<'py>(
    py: Python<'py>,
    state: &PyWaveGrid,
    seed: u64,
    n_samples: usize,
    t_final: f64,
    dt: f64,
    checkpoints: usize,
    bins: usize,
    negate_velocity: bool,
    potential: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = EquivarianceOptions {
        n_samples,
        t_final,
        dt,
        checkpoints,
        seed,
        bins,
        negate_velocity,
    };
    let report = verify_equivariance(&state.inner, &scalar_potential(potential), &opts).py_err()?;
    to_object(py, &report)
}

/// Schrödinger evolution interrupted by GRW collapses.
///
/// Returns `(events, final_state)`.
#[pyfunction]
#[pyo3(signature = (state, seed, t_final, dt = 1e-3, lam = 1.0, a = 0.3, potential = None))]
#[allow(clippy::too_many_arguments)]
fn grw<'py>(
    py: Python<'py>,
    state: &PyWaveGrid,
    seed: u64,
    t_final: f64,
    dt: f64,
    lam: f64,
    a: f64,
    potential: Option<Vec<f64>>,
) -> PyResult<(Bound<'py, PyAny>, PyWaveGrid)> {
    let opts = GrwOptions {
        lambda: lam,
        a,
        t_final,
        dt,
        seed,
        allow_aperiodic: false,
    };
    let run = simulate_grw(&state.inner, &scalar_potential(potential), &opts).py_err()?;
    Ok((to_object(py, &run.events)?, PyWaveGrid { inner: run.final_state }))
}

/// Number of characters of the symmetric (`"symmetric"`) or cyclic
/// (`"cyclic"`) group of degree n.
#[pyfunction]
fn count_characters(group: &str, n: usize) -> PyResult<usize> {
    let g = match group {
        "symmetric" => FiniteGroup::symmetric(n),
        "cyclic" => FiniteGroup::cyclic(n),
        other => return Err(PyValueError::new_err(format!("unknown group `{other}`"))),
    }
    .py_err()?;
    Ok(enumerate_characters(&Arc::new(g)).py_err()?.len())
}

/// Classifies the Aharonov–Casher factor against
/// `V(θ) = v0·I + vx·σx + vy·σy + vz·σz` with constant coefficients.
#[pyfunction]
#[pyo3(signature = (mu_lambda, pauli = [1.0, 0.0, 0.0, 0.0], axis = [0.0, 0.0, 1.0]))]
fn classify_aharonov_casher<'py>(
    py: Python<'py>,
    mu_lambda: f64,
    pauli: [f64; 4],
    axis: [f64; 3],
) -> PyResult<Bound<'py, PyAny>> {
    let rep = MatrixRep::aharonov_casher(mu_lambda, axis, 1.0).py_err()?;
    let v =
        identity(2).scale(pauli[0]) + pauli_x().scale(pauli[1]) + pauli_y().scale(pauli[2]) + pauli_z().scale(pauli[3]);
    let c = classify_dynamics(&TopFactor::Matrix(rep), &[v], DEFAULT_WORD_LENGTH_CAP).py_err()?;
    to_object(py, &c)
}

/// Runs a CLI subcommand on a scenario JSON string and returns
/// `(exit_code, manifest)`; outputs are written to `out_dir`.
#[pyfunction]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    scenario_json: &str,
    out_dir: PathBuf,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let cmd = match command {
        "evolve" => Command::Evolve,
        "spectrum" => Command::Spectrum,
        "trajectories" => Command::Trajectories,
        "equivariance" => Command::Equivariance,
        "ab-compare" => Command::AbCompare,
        "classify" => Command::Classify,
        "twisted-check" => Command::TwistedCheck,
        "grw" => Command::Grw,
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    };
    let (code, manifest) = match Scenario::from_json_str(scenario_json) {
        Ok(s) => {
            let outcome = runner::run(cmd, &s, &out_dir);
            (outcome.exit_code, outcome.manifest)
        }
        Err(e) => {
            let code = runner::record_failure(cmd, scenario_json.as_bytes(), &e, &out_dir);
            let m = runner::read_manifest(&out_dir.join(runner::MANIFEST_FILE)).py_err()?;
            (code, m)
        }
    };
    Ok((code, to_object(py, &manifest)?))
}

#[pymodule]
fn topobohm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("TopobohmError", py.get_type::<TopobohmError>())?;
    m.add("PhysicsError", py.get_type::<PhysicsError>())?;
    m.add("NumericsError", py.get_type::<NumericsError>())?;
    m.add_class::<PyWaveGrid>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(py_crank_nicolson, m)?)?;
    m.add_function(wrap_pyfunction!(py_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(py_gauge_map, m)?)?;
    m.add_function(wrap_pyfunction!(trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(equivariance, m)?)?;
    m.add_function(wrap_pyfunction!(grw, m)?)?;
    m.add_function(wrap_pyfunction!(count_characters, m)?)?;
    m.add_function(wrap_pyfunction!(classify_aharonov_casher, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
