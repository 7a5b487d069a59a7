//! Bohmian velocity fields and trajectories on the ring.
//!
//! Velocities are evaluated from the gauge-fixed χ: with `Γ = e^{iB}`,
//! `dθ/dt = κ [Im(χ, ∂χ) + (χ, Bχ)/2π] / (χ, χ)` where `κ = ħ/(mR²)`, which is
//! the cover-side formula `κ Im(ψ, ∂ψ)/(ψ, ψ)` written in terms of χ.

mod pair;

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::{is_projectable_field, RingPoint};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::output::write_atomic;
use crate::propagator::{Potential, SplitStep, Twist, WaveGrid};

pub use pair::{
    integrate_pair_trajectories, integrate_pair_trajectory, PairFieldSeries, PairSpectralField, PairTrajectory,
};

/// Relative density below which the velocity is treated as undefined.
pub const NODE_EPS: f64 = 1e-12;

/// Largest angular displacement accepted in one integration step.
const MAX_STEP_ANGLE: f64 = PI / 2.0;

pub(crate) struct Basis1 {
    pub e: Vec<Complex64>,
    pub d: Vec<Complex64>,
}

/// Trigonometric interpolation basis `e^{imθ}` (and its derivative) for the
/// FFT bins of an n-point grid. The Nyquist bin enters as `cos(nθ/2)`, which
/// keeps the interpolant real for real data.
pub(crate) fn trig_basis(n: usize, theta: f64) -> Basis1 {
    let half = n / 2;
    let z = Complex64::from_polar(1.0, theta);
    let mut e = vec![Complex64::default(); n];
    let mut d = vec![Complex64::default(); n];
    let mut p = Complex64::new(1.0, 0.0);
    for m in 0..half {
        e[m] = p;
        d[m] = Complex64::new(0.0, m as f64) * p;
        if m > 0 {
            e[n - m] = p.conj();
            d[n - m] = Complex64::new(0.0, -(m as f64)) * p.conj();
        }
        p *= z;
    }
    e[half] = Complex64::from(p.re);
    d[half] = Complex64::from(-(half as f64) * p.im);
    Basis1 { e, d }
}

/// Band-limited interpolant of χ and its velocity field.
#[derive(Debug, Clone)]
pub struct SpectralField {
    n: usize,
    coeffs: Vec<Vec<Complex64>>,
    generator: CMat,
    kappa: f64,
    node_threshold: f64,
}

impl SpectralField {
    /// Field of a twisted grid.
    pub fn new(state: &WaveGrid) -> Self {
        Self::with_generator(state, state.twist().log_generator())
    }

    /// Field of an untwisted grid in a constant vector potential
    /// `a_const = Φ/2π`: the kinetic momentum is shifted by `−e a_const/ħ`.
    pub fn vector_potential(state: &WaveGrid, a_const: f64) -> Self {
        let u = state.units();
        let k = state.components();
        let b = crate::linalg::identity(k) * Complex64::from(-TAU * u.charge * a_const / u.hbar);
        Self::with_generator(state, b)
    }

    fn with_generator(state: &WaveGrid, generator: CMat) -> Self {
        let n = state.n_points();
        let mut fft = crate::propagator::Fft1::new(n);
        let coeffs = state
            .chi()
            .iter()
            .map(|c| {
                let mut buf = c.clone();
                fft.forward(&mut buf);
                buf.iter().map(|z| z / n as f64).collect()
            })
            .collect();
        let max_density = state.density().into_iter().fold(0.0, f64::max);
        Self {
            n,
            coeffs,
            generator,
            kappa: state.units().kappa(),
            node_threshold: NODE_EPS * max_density,
        }
    }

    /// χ(θ) and ∂χ(θ), one entry per component.
    pub fn evaluate(&self, theta: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let b = trig_basis(self.n, theta);
        let mut v = Vec::with_capacity(self.coeffs.len());
        let mut dv = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            let mut s = Complex64::default();
            let mut ds = Complex64::default();
            for ((ci, e), d) in c.iter().zip(&b.e).zip(&b.d) {
                s += ci * e;
                ds += ci * d;
            }
            v.push(s);
            dv.push(ds);
        }
        (v, dv)
    }

    /// `|ψ(θ)|²` from the interpolant.
    pub fn density_at(&self, theta: f64) -> f64 {
        self.evaluate(theta).0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Bohmian angular velocity at θ, or `None` at a node.
    pub fn velocity_at(&self, theta: f64) -> Option<f64> {
        let (chi, dchi) = self.evaluate(theta);
        let rho: f64 = chi.iter().map(|z| z.norm_sqr()).sum();
        if !(rho > self.node_threshold) {
            return None;
        }
        let k = chi.len();
        let mut current = 0.0;
        let mut gauge = 0.0;
        for a in 0..k {
            current += (chi[a].conj() * dchi[a]).im;
            for b in 0..k {
                gauge += (chi[a].conj() * self.generator[(a, b)] * chi[b]).re;
            }
        }
        Some(self.kappa * (current + gauge / TAU) / rho)
    }
}

/// Velocity samples on the base grid.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityField {
    pub theta: Vec<f64>,
    pub velocity: Vec<f64>,
    /// True where the density is below the node threshold; the velocity
    /// there is reported as NaN.
    pub node: Vec<bool>,
}

impl VelocityField {
    pub fn node_count(&self) -> usize {
        self.node.iter().filter(|&&b| b).count()
    }
}

pub fn velocity_field(state: &WaveGrid) -> VelocityField {
    field_on_grid(&SpectralField::new(state), state)
}

/// Velocity field of an untwisted state in the vector potential `a_const`.
pub fn velocity_field_vector_potential(state: &WaveGrid, a_const: f64) -> VelocityField {
    field_on_grid(&SpectralField::vector_potential(state, a_const), state)
}

fn field_on_grid(f: &SpectralField, state: &WaveGrid) -> VelocityField {
    let theta = state.thetas();
    let vals: Vec<Option<f64>> = theta.iter().map(|&t| f.velocity_at(t)).collect();
    VelocityField {
        velocity: vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        node: vals.iter().map(Option::is_none).collect(),
        theta,
    }
}

/// Cover-side velocity `κ Im(ψ̂, ∂ψ̂)/(ψ̂, ψ̂)` on the given sheets, computed
/// from the reconstructed ψ̂ and its derivative.
pub fn cover_velocity(state: &WaveGrid, sheets: &[i64]) -> Vec<Vec<f64>> {
    let field = SpectralField::new(state);
    let twist: &Twist = state.twist();
    let b = twist.log_generator() * Complex64::new(0.0, 1.0 / TAU);
    let kappa = state.units().kappa();
    let k = state.components();
    sheets
        .iter()
        .map(|&s| {
            (0..state.n_points())
                .map(|j| {
                    let th = state.theta(j);
                    let (chi, dchi) = field.evaluate(th);
                    let g = twist.power(th / TAU + s as f64);
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for a in 0..k {
                        let mut psi = Complex64::default();
                        let mut dpsi = Complex64::default();
                        for c in 0..k {
                            psi += g[(a, c)] * chi[c];
                            let bchi: Complex64 = (0..k).map(|e| b[(c, e)] * chi[e]).sum();
                            dpsi += g[(a, c)] * (dchi[c] + bchi);
                        }
                        num += (psi.conj() * dpsi).im;
                        den += psi.norm_sqr();
                    }
                    kappa * num / den
                })
                .collect()
        })
        .collect()
}

/// Deck-invariance of the cover-side velocity over sheets −1, 0, 1.
pub fn velocity_is_projectable(state: &WaveGrid, tol: f64) -> Result<bool> {
    is_projectable_field(&cover_velocity(state, &[-1, 0, 1]), tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Completed,
    HaltedAtNode { t: f64 },
    LeftResolution { t: f64 },
}

impl TrajectoryStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TrajectoryStatus::Completed => "completed",
            TrajectoryStatus::HaltedAtNode { .. } => "halted_at_node",
            TrajectoryStatus::LeftResolution { .. } => "left_resolution",
        }
    }
}

/// A trajectory on the ring: reduced angles in [0, 2π) with the number of
/// full turns made since the start.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub windings: Vec<i64>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    /// Continuous angle `θ + 2π·winding`.
    pub fn unwrapped(&self) -> Vec<f64> {
        self.positions
            .iter()
            .zip(&self.windings)
            .map(|(p, w)| p + TAU * *w as f64)
            .collect()
    }

    pub fn final_position(&self) -> f64 {
        *self.positions.last().expect("trajectory has a start")
    }

    pub fn final_winding(&self) -> i64 {
        *self.windings.last().expect("trajectory has a start")
    }
}

/// Velocity fields at every half step of a run.
#[derive(Debug, Clone)]
pub struct FieldSeries {
    dt: f64,
    fields: Vec<SpectralField>,
    densities: Vec<Vec<f64>>,
    sign: f64,
}

impl FieldSeries {
    /// Evolves `state` for `steps` steps of `dt`, recording fields at
    /// `t = i·dt/2`. Mid-step fields come from a separate half step from the
    /// preceding full-step state.
    pub fn evolve(state: &WaveGrid, potential: &Potential, dt: f64, steps: usize) -> Result<Self> {
        let n = state.n_points();
        let units = *state.units();
        let mut full = SplitStep::new(state.twist(), potential, n, units, dt)?;
        let mut half = SplitStep::new(state.twist(), potential, n, units, dt / 2.0)?;
        Self::run(state, dt, steps, &mut full, &mut half, SpectralField::new)
    }

    /// Same as [`FieldSeries::evolve`] for an untwisted state in the vector
    /// potential `a_const`.
    pub fn evolve_vector_potential(
        state: &WaveGrid,
        a_const: f64,
        potential: &Potential,
        dt: f64,
        steps: usize,
    ) -> Result<Self> {
        if !state.twist().is_trivial() {
            return Err(Error::invalid("vector-potential runs use untwisted states"));
        }
        let n = state.n_points();
        let k = state.components();
        let units = *state.units();
        let mut full = SplitStep::vector_potential(a_const, potential, n, k, units, dt)?;
        let mut half = SplitStep::vector_potential(a_const, potential, n, k, units, dt / 2.0)?;
        Self::run(state, dt, steps, &mut full, &mut half, |s| {
            SpectralField::vector_potential(s, a_const)
        })
    }

    fn run(
        state: &WaveGrid,
        dt: f64,
        steps: usize,
        full: &mut SplitStep,
        half: &mut SplitStep,
        field: impl Fn(&WaveGrid) -> SpectralField,
    ) -> Result<Self> {
        let mut cur = state.clone();
        let mut fields = Vec::with_capacity(2 * steps + 1);
        let mut densities = Vec::with_capacity(steps + 1);
        fields.push(field(&cur));
        densities.push(cur.density());
        for _ in 0..steps {
            let mut mid = cur.clone();
            half.step(&mut mid)?;
            fields.push(field(&mid));
            full.step(&mut cur)?;
            fields.push(field(&cur));
            densities.push(cur.density());
        }
        Ok(Self {
            dt,
            fields,
            densities,
            sign: 1.0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        (self.fields.len() - 1) / 2
    }

    /// Grid density `|ψ|²` after `step` full steps.
    pub fn density(&self, step: usize) -> &[f64] {
        &self.densities[step]
    }

    /// Field at time `i·dt/2`.
    pub fn field(&self, i: usize) -> &SpectralField {
        &self.fields[i]
    }

    /// Reverses every velocity. Only useful as a deliberately wrong
    /// dynamics for negative controls.
    pub fn negated(mut self) -> Self {
        self.sign = -self.sign;
        self
    }

    fn velocity(&self, i: usize, theta: f64) -> Option<f64> {
        self.fields[i].velocity_at(theta).map(|v| self.sign * v)
    }
}

/// RK4 integration of `dθ/dt = v(θ, t)` from `q0` through the whole series.
pub fn integrate_trajectory(series: &FieldSeries, q0: f64) -> Trajectory {
    let dt = series.dt;
    let start = RingPoint::from_lifted(q0);
    let mut x = start.angle;
    let mut times = vec![0.0];
    let mut positions = vec![x];
    let mut windings = vec![0i64];
    let mut status = TrajectoryStatus::Completed;
    for i in 0..series.steps() {
        let t = i as f64 * dt;
        let k = (|| {
            let k1 = series.velocity(2 * i, x)?;
            let k2 = series.velocity(2 * i + 1, x + 0.5 * dt * k1)?;
            let k3 = series.velocity(2 * i + 1, x + 0.5 * dt * k2)?;
            let k4 = series.velocity(2 * i + 2, x + dt * k3)?;
            Some((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
        })();
        let Some(v) = k else {
            status = TrajectoryStatus::HaltedAtNode { t };
            break;
        };
        let dx = v * dt;
        if !dx.is_finite() || dx.abs() > MAX_STEP_ANGLE {
            status = TrajectoryStatus::LeftResolution { t };
            break;
        }
        x += dx;
        let p = RingPoint::from_lifted(x);
        times.push((i + 1) as f64 * dt);
        positions.push(p.angle);
        windings.push(p.sheet);
    }
    Trajectory {
        times,
        positions,
        windings,
        status,
    }
}

/// Integrates many trajectories in parallel; output order follows `q0s`.
pub fn integrate_trajectories(series: &FieldSeries, q0s: &[f64]) -> Vec<Trajectory> {
    q0s.par_iter().map(|&q| integrate_trajectory(series, q)).collect()
}

/// Lifts a base trajectory to the cover starting at `q0_hat`.
pub fn lift_trajectory(traj: &Trajectory, q0_hat: RingPoint) -> Result<Vec<RingPoint>> {
    let start = traj.positions[0];
    let dev = (q0_hat.angle - start).abs();
    if dev > 1e-12 && (TAU - dev) > 1e-12 {
        return Err(Error::invalid(format!(
            "cover point projects to {} but the trajectory starts at {start}",
            q0_hat.angle
        )));
    }
    let u = traj.unwrapped();
    for (i, w) in u.windows(2).enumerate() {
        if (w[1] - w[0]).abs() >= PI {
            return Err(Error::invalid(format!(
                "trajectory jumps by {:.3} between samples {i} and {}",
                w[1] - w[0],
                i + 1
            )));
        }
    }
    let base = q0_hat.lifted();
    Ok(u.iter().map(|x| RingPoint::from_lifted(base + (x - u[0]))).collect())
}

/// Trajectories as CSV with columns `trajectory,t,theta,winding,status`.
pub fn trajectories_csv(trajs: &[Trajectory]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trajectory", "t", "theta", "winding", "status"])
        .map_err(csv_err)?;
    for (id, tr) in trajs.iter().enumerate() {
        for ((t, p), wn) in tr.times.iter().zip(&tr.positions).zip(&tr.windings) {
            w.write_record([
                id.to_string(),
                format!("{t:.10e}"),
                format!("{p:.16e}"),
                wn.to_string(),
                tr.status.label().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_trajectories_csv(trajs: &[Trajectory], path: &Path) -> Result<()> {
    write_atomic(path, trajectories_csv(trajs)?.as_bytes())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{gauge_map, gaussian_packet, plane_wave, Units};

    fn grid(chi: Vec<Complex64>, beta: f64) -> WaveGrid {
        WaveGrid::from_chi(vec![chi], Twist::scalar(beta, 1), Units::default()).unwrap()
    }

    #[test]
    fn antiperiodic_ground_state_moves_at_one_half() {
        let g = grid(plane_wave(32, 0), PI);
        let f = velocity_field(&g);
        assert!(f.velocity.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn real_packet_is_at_rest() {
        let g = grid(gaussian_packet(64, 3.0, 0.4, 0.0), 0.0);
        let f = velocity_field(&g);
        // compare the current ρv: far tails carry rounding-level phase noise
        for (v, rho) in f.velocity.iter().zip(g.density()) {
            assert!(v.is_nan() || (v * rho).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolant_reproduces_grid_and_plane_waves() {
        let g = grid(plane_wave(16, 3), 0.0);
        let f = SpectralField::new(&g);
        for th in [0.1, 1.234, 5.9] {
            let (v, dv) = f.evaluate(th);
            let expected = Complex64::from_polar(1.0 / TAU.sqrt(), 3.0 * th);
            assert!((v[0] - expected).norm() < 1e-13);
            assert!((dv[0] - expected * Complex64::new(0.0, 3.0)).norm() < 1e-12);
        }
        let packet = grid(gaussian_packet(64, 2.0, 0.5, 1.0), 0.0);
        let f = SpectralField::new(&packet);
        for j in [0, 7, 33] {
            let (v, _) = f.evaluate(packet.theta(j));
            assert!((v[0] - packet.chi()[0][j]).norm() < 1e-13);
        }
    }

    #[test]
    fn gauge_images_share_velocity() {
        let n = 64;
        let flux = 1.3;
        let a = grid(gaussian_packet(n, 2.0, 0.5, 1.0), 0.0);
        let va = velocity_field_vector_potential(&a, flux / TAU);
        let t = gauge_map(&a, flux, 1.0).unwrap();
        let vt = velocity_field(&t);
        for (x, y) in va.velocity.iter().zip(&vt.velocity) {
            if x.is_finite() {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_velocity_trajectory_winds_half_turn() {
        let g = grid(plane_wave(32, 0), PI);
        let s = FieldSeries::evolve(&g, &Potential::Free, TAU / 400.0, 400).unwrap();
        let tr = integrate_trajectory(&s, 0.0);
        assert_eq!(tr.status, TrajectoryStatus::Completed);
        assert!((tr.final_position() - PI).abs() < 1e-9);
    }

    #[test]
    fn full_turns_counted_and_lifts_differ_by_deck_shift() {
        let g = grid(plane_wave(32, 1), 0.0);
        let s = FieldSeries::evolve(&g, &Potential::Free, 0.05, 200).unwrap();
        let tr = integrate_trajectory(&s, 1.0);
        // v = 1, t = 10
        assert_eq!(tr.final_winding(), ((1.0 + 10.0) / TAU).floor() as i64);
        let a = lift_trajectory(&tr, RingPoint { sheet: 0, angle: 1.0 }).unwrap();
        let b = lift_trajectory(&tr, RingPoint { sheet: 1, angle: 1.0 }).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((q.lifted() - p.lifted() - TAU).abs() < 1e-12);
        }
        let last = a.last().unwrap();
        assert!((last.lifted() - 11.0).abs() < 1e-9);
    }

    #[test]
    fn node_halts() {
        // cos θ has nodes at π/2 and 3π/2
        let chi: Vec<Complex64> = (0..32)
            .map(|j| Complex64::from((TAU * j as f64 / 32.0).cos()))
            .collect();
        let g = grid(chi, 0.0);
        let s = FieldSeries::evolve(&g, &Potential::Free, 1e-3, 2).unwrap();
        let tr = integrate_trajectory(&s, PI / 2.0);
        assert!(matches!(tr.status, TrajectoryStatus::HaltedAtNode { .. }));
    }

    #[test]
    fn lift_rejects_wrong_start() {
        let g = grid(plane_wave(16, 0), 0.0);
        let s = FieldSeries::evolve(&g, &Potential::Free, 0.01, 3).unwrap();
        let tr = integrate_trajectory(&s, 1.0);
        assert!(lift_trajectory(&tr, RingPoint { sheet: 0, angle: 2.0 }).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = grid(plane_wave(16, 1), 0.0);
        let s = FieldSeries::evolve(&g, &Potential::Free, 0.01, 3).unwrap();
        let trs = integrate_trajectories(&s, &[0.5, 1.5]);
        let text = trajectories_csv(&trs).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trajectory,t,theta,winding,status");
        assert_eq!(lines.len(), 1 + 2 * 4);
    }
}
