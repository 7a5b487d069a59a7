use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{trig_basis, TrajectoryStatus, MAX_STEP_ANGLE, NODE_EPS};
use crate::covering::RingPoint;
use crate::error::Result;
use crate::propagator::{Fft1, PairPotential, TwoParticleGrid, TwoParticleStep};

/// Band-limited interpolant of a pair wave function on the torus.
#[derive(Debug, Clone)]
pub struct PairSpectralField {
    n: usize,
    coeffs: Vec<Complex64>,
    beta: f64,
    kappa: f64,
    node_threshold: f64,
}

impl PairSpectralField {
    pub fn new(state: &TwoParticleGrid) -> Self {
        let n = state.n_points();
        let mut fft = Fft1::new(n);
        let mut c = state.values().to_vec();
        for r in c.chunks_mut(n) {
            fft.forward(r);
        }
        let mut col = vec![Complex64::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = c[i * n + j];
            }
            fft.forward(&mut col);
            for i in 0..n {
                c[i * n + j] = col[i];
            }
        }
        let s = 1.0 / (n * n) as f64;
        for z in &mut c {
            *z *= s;
        }
        let max_density = state.density().into_iter().fold(0.0, f64::max);
        Self {
            n,
            coeffs: c,
            beta: state.beta(),
            kappa: state.units().kappa(),
            node_threshold: NODE_EPS * max_density,
        }
    }

    /// χ, ∂₁χ, ∂₂χ at (θ₁, θ₂).
    pub fn evaluate(&self, t1: f64, t2: f64) -> (Complex64, Complex64, Complex64) {
        let n = self.n;
        let b1 = trig_basis(n, t1);
        let b2 = trig_basis(n, t2);
        let mut v = Complex64::default();
        let mut d1 = Complex64::default();
        let mut d2 = Complex64::default();
        for i in 0..n {
            let row = &self.coeffs[i * n..(i + 1) * n];
            let mut r = Complex64::default();
            let mut dr = Complex64::default();
            for ((c, e), d) in row.iter().zip(&b2.e).zip(&b2.d) {
                r += c * e;
                dr += c * d;
            }
            v += b1.e[i] * r;
            d1 += b1.d[i] * r;
            d2 += b1.e[i] * dr;
        }
        (v, d1, d2)
    }

    /// Velocities of both particles, or `None` at a node.
    pub fn velocity_at(&self, t1: f64, t2: f64) -> Option<[f64; 2]> {
        let (v, d1, d2) = self.evaluate(t1, t2);
        let rho = v.norm_sqr();
        if !(rho > self.node_threshold) {
            return None;
        }
        let shift = self.beta / TAU;
        Some([
            self.kappa * ((v.conj() * d1).im / rho + shift),
            self.kappa * ((v.conj() * d2).im / rho + shift),
        ])
    }
}

/// Pair fields at every half step of a run.
#[derive(Debug, Clone)]
pub struct PairFieldSeries {
    dt: f64,
    fields: Vec<PairSpectralField>,
}

impl PairFieldSeries {
    pub fn evolve(state: &TwoParticleGrid, potential: &PairPotential, dt: f64, steps: usize) -> Result<Self> {
        let n = state.n_points();
        let units = *state.units();
        let mut full = TwoParticleStep::new(n, state.beta(), potential, units, dt)?;
        let mut half = TwoParticleStep::new(n, state.beta(), potential, units, dt / 2.0)?;
        let mut cur = state.clone();
        let mut fields = vec![PairSpectralField::new(&cur)];
        for _ in 0..steps {
            let mut mid = cur.clone();
            half.step(&mut mid)?;
            fields.push(PairSpectralField::new(&mid));
            full.step(&mut cur)?;
            fields.push(PairSpectralField::new(&cur));
        }
        Ok(Self { dt, fields })
    }

    pub fn steps(&self) -> usize {
        (self.fields.len() - 1) / 2
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    pub windings: Vec<[i64; 2]>,
    pub status: TrajectoryStatus,
}

impl PairTrajectory {
    /// Smallest ring distance between the two particles over the run.
    pub fn min_separation(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| {
                let d = (p[0] - p[1]).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn integrate_pair_trajectory(series: &PairFieldSeries, q0: [f64; 2]) -> PairTrajectory {
    let dt = series.dt;
    let mut x = [RingPoint::from_lifted(q0[0]).angle, RingPoint::from_lifted(q0[1]).angle];
    let mut times = vec![0.0];
    let mut positions = vec![x];
    let mut windings = vec![[0i64; 2]];
    let mut status = TrajectoryStatus::Completed;
    let vel = |i: usize, p: [f64; 2]| series.fields[i].velocity_at(p[0], p[1]);
    let add = |p: [f64; 2], k: [f64; 2], h: f64| [p[0] + h * k[0], p[1] + h * k[1]];
    for i in 0..series.steps() {
        let t = i as f64 * dt;
        let k = (|| {
            let k1 = vel(2 * i, x)?;
            let k2 = vel(2 * i + 1, add(x, k1, 0.5 * dt))?;
            let k3 = vel(2 * i + 1, add(x, k2, 0.5 * dt))?;
            let k4 = vel(2 * i + 2, add(x, k3, dt))?;
            Some([
                (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0,
                (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0,
            ])
        })();
        let Some(v) = k else {
            status = TrajectoryStatus::HaltedAtNode { t };
            break;
        };
        let dx = [v[0] * dt, v[1] * dt];
        if dx.iter().any(|d| !d.is_finite() || d.abs() > MAX_STEP_ANGLE) {
            status = TrajectoryStatus::LeftResolution { t };
            break;
        }
        x = add(x, dx, 1.0);
        let p = [RingPoint::from_lifted(x[0]), RingPoint::from_lifted(x[1])];
        times.push((i + 1) as f64 * dt);
        positions.push([p[0].angle, p[1].angle]);
        windings.push([p[0].sheet, p[1].sheet]);
    }
    PairTrajectory {
        times,
        positions,
        windings,
        status,
    }
}

pub fn integrate_pair_trajectories(series: &PairFieldSeries, q0s: &[[f64; 2]]) -> Vec<PairTrajectory> {
    q0s.par_iter().map(|&q| integrate_pair_trajectory(series, q)).collect()
}
