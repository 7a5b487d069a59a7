use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{
    check_n_points, fft::shifted_wavenumbers, ChiPotential, Fft1, Potential, Twist, Units, WaveGrid, NORM_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, CMat, I};

#[derive(Debug)]
enum HalfPotential {
    None,
    Scalar(Vec<Complex64>),
    /// Row-major k×k blocks, one per grid point.
    Matrix(Vec<Complex64>),
}

/// Strang splitting `e^{-iV dt/2ħ} e^{-iT dt/ħ} e^{-iV dt/2ħ}` for a fixed
/// twist, potential and time step.
///
/// The kinetic factor is diagonal in Fourier space for each eigen-sector of
/// Γ, with wavenumbers shifted by φ/2π.
#[derive(Debug)]
pub struct SplitStep {
    n: usize,
    k: usize,
    dt: f64,
    twist: Twist,
    basis: Option<CMat>,
    kinetic: Vec<Vec<Complex64>>,
    half: HalfPotential,
    fft: Fft1,
}

impl SplitStep {
    /// Stepper for a twisted grid.
    pub fn new(twist: &Twist, potential: &Potential, n: usize, units: Units, dt: f64) -> Result<Self> {
        let shifts: Vec<f64> = twist.phases().iter().map(|p| p / TAU).collect();
        Self::build(twist.clone(), potential, n, units, dt, shifts)
    }

    /// Stepper for an untwisted grid in a constant vector potential with
    /// `∮A = 2π a_const`; wavenumbers become `n − e a_const/ħ`.
    pub fn vector_potential(
        a_const: f64,
        potential: &Potential,
        n: usize,
        k: usize,
        units: Units,
        dt: f64,
    ) -> Result<Self> {
        let shift = -units.charge * a_const / units.hbar;
        Self::build(Twist::trivial(k), potential, n, units, dt, vec![shift; k])
    }

    fn build(twist: Twist, potential: &Potential, n: usize, units: Units, dt: f64, shifts: Vec<f64>) -> Result<Self> {
        check_n_points(n)?;
        units.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let k = twist.dim();
        let tau = dt / (2.0 * units.hbar);
        let half = match potential.chi_frame(&twist, n)? {
            ChiPotential::None => HalfPotential::None,
            ChiPotential::Scalar(v) => HalfPotential::Scalar(v.iter().map(|&x| (-I * x * tau).exp()).collect()),
            ChiPotential::Matrix(v) => {
                let mut flat = Vec::with_capacity(n * k * k);
                for m in &v {
                    let u = expm_hermitian(m, tau);
                    for a in 0..k {
                        for b in 0..k {
                            flat.push(u[(a, b)]);
                        }
                    }
                }
                HalfPotential::Matrix(flat)
            }
        };
        let kappa = units.kappa();
        let kinetic = shifts
            .iter()
            .map(|&s| {
                shifted_wavenumbers(n, s)
                    .into_iter()
                    .map(|kk| (-I * (0.5 * kappa * kk * kk * dt)).exp())
                    .collect()
            })
            .collect();
        let basis = (!twist.diagonal()).then(|| twist.vectors().clone());
        Ok(Self {
            n,
            k,
            dt,
            twist,
            basis,
            kinetic,
            half,
            fft: Fft1::new(n),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn apply_half_potential(&self, chi: &mut [Vec<Complex64>]) {
        match &self.half {
            HalfPotential::None => {}
            HalfPotential::Scalar(e) => {
                for comp in chi.iter_mut() {
                    for (z, f) in comp.iter_mut().zip(e) {
                        *z *= f;
                    }
                }
            }
            HalfPotential::Matrix(flat) => {
                let k = self.k;
                let mut buf = vec![Complex64::default(); k];
                for j in 0..self.n {
                    let u = &flat[j * k * k..(j + 1) * k * k];
                    for a in 0..k {
                        buf[a] = (0..k).map(|b| u[a * k + b] * chi[b][j]).sum();
                    }
                    for a in 0..k {
                        chi[a][j] = buf[a];
                    }
                }
            }
        }
    }

    fn rotate(&self, chi: &mut [Vec<Complex64>], inverse: bool) {
        let Some(w) = &self.basis else { return };
        let k = self.k;
        let mut buf = vec![Complex64::default(); k];
        for j in 0..self.n {
            for a in 0..k {
                buf[a] = (0..k)
                    .map(|b| {
                        let m = if inverse { w[(b, a)].conj() } else { w[(a, b)] };
                        m * chi[b][j]
                    })
                    .sum();
            }
            for a in 0..k {
                chi[a][j] = buf[a];
            }
        }
    }

    fn apply_kinetic(&mut self, chi: &mut [Vec<Complex64>]) {
        self.rotate(chi, true);
        for (comp, phase) in chi.iter_mut().zip(&self.kinetic) {
            self.fft.forward(comp);
            for (z, p) in comp.iter_mut().zip(phase) {
                *z *= p;
            }
            self.fft.inverse(comp);
        }
        self.rotate(chi, false);
    }

    /// Advances `state` by one step of length `dt`.
    pub fn step(&mut self, state: &mut WaveGrid) -> Result<()> {
        if state.n_points() != self.n || state.components() != self.k {
            return Err(Error::invalid("state does not match the stepper grid"));
        }
        if !state.twist().same_as(&self.twist) {
            return Err(Error::invalid("state twist differs from the stepper twist"));
        }
        let before = state.norm_sq();
        let chi = state.chi_mut();
        self.apply_half_potential(chi);
        self.apply_kinetic(chi);
        self.apply_half_potential(chi);
        let after = state.norm_sq();
        let drift = (after - before).abs() / before;
        if drift > NORM_TOL {
            return Err(Error::Numerics {
                invariant: "norm conservation".into(),
                residual: drift,
                threshold: NORM_TOL,
            });
        }
        Ok(())
    }

    /// Advances `state` by `steps` steps.
    pub fn run(&mut self, state: &mut WaveGrid, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }
}

/// One Strang step of a twisted grid.
pub fn step_splitstep(state: &WaveGrid, potential: &Potential, dt: f64) -> Result<WaveGrid> {
    let mut s = SplitStep::new(state.twist(), potential, state.n_points(), *state.units(), dt)?;
    let mut out = state.clone();
    s.step(&mut out)?;
    Ok(out)
}

fn require_untwisted(state: &WaveGrid) -> Result<()> {
    if !state.twist().is_trivial() {
        return Err(Error::invalid(
            "the vector-potential representation uses untwisted periodic states",
        ));
    }
    Ok(())
}

/// One Strang step of an untwisted grid in the constant vector potential
/// `a_const = Φ/2π`, using the charge configured in the state's units.
pub fn step_vector_potential(state: &WaveGrid, a_const: f64, potential: &Potential, dt: f64) -> Result<WaveGrid> {
    require_untwisted(state)?;
    let mut s = SplitStep::vector_potential(
        a_const,
        potential,
        state.n_points(),
        state.components(),
        *state.units(),
        dt,
    )?;
    let mut out = state.clone();
    s.step(&mut out)?;
    Ok(out)
}

fn multiply_phase(chi: &[Vec<Complex64>], n: usize, rate: f64) -> Vec<Vec<Complex64>> {
    chi.iter()
        .map(|comp| {
            comp.iter()
                .enumerate()
                .map(|(j, z)| z * Complex64::from_polar(1.0, rate * super::grid_angle(n, j)))
                .collect()
        })
        .collect()
}

/// Removes a constant vector potential by the gauge change
/// `ψ' = e^{-ie g/ħ} ψ` with `g(θ) = Φθ/2π`; the result is twisted by
/// `γ = e^{-ieΦ/ħ}`.
pub fn gauge_map(state_a: &WaveGrid, flux: f64, charge: f64) -> Result<WaveGrid> {
    require_untwisted(state_a)?;
    let hbar = state_a.units().hbar;
    let n = state_a.n_points();
    let beta = -charge * flux / hbar;
    // ψ' on the fundamental sheet
    let psi = multiply_phase(state_a.chi(), n, -charge * flux / (TAU * hbar));
    // gauge-fixed storage of the twisted function
    let chi = multiply_phase(&psi, n, -beta / TAU);
    Ok(state_a.with_chi(chi, Twist::scalar(beta, state_a.components())))
}

/// Inverse of [`gauge_map`].
pub fn gauge_map_inverse(state: &WaveGrid, flux: f64, charge: f64) -> Result<WaveGrid> {
    let hbar = state.units().hbar;
    let beta = -charge * flux / hbar;
    match state.twist().beta() {
        Some(b) if (b - beta).abs() <= 1e-12 * beta.abs().max(1.0) => {}
        _ => {
            return Err(Error::invalid(format!(
                "state twist does not match flux {flux} at charge {charge}"
            )))
        }
    }
    let n = state.n_points();
    let psi = multiply_phase(state.chi(), n, beta / TAU);
    let chi = multiply_phase(&psi, n, charge * flux / (TAU * hbar));
    Ok(state.with_chi(chi, Twist::trivial(state.components())))
}
