use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;

use super::{check_n_points, fft::shifted_wavenumbers, ChiPotential, Potential, Twist, Units, WaveGrid};
use crate::error::{Error, Result};
use crate::linalg::{hermiticity_residual, identity, CMat, I};

/// Non-Hermiticity above which the dense discretization is rejected.
const SYMMETRY_TOL: f64 = 1e-10;

/// What fixes the boundary behaviour of the ring Hamiltonian.
#[derive(Debug, Clone)]
pub enum SpectrumSource {
    /// A twist of the gauge-fixed representation.
    Twist(Twist),
    /// An untwisted ring threaded by flux Φ, seen by charge `e`.
    Flux { flux: f64, charge: f64 },
}

/// Dense grid Hamiltonian in the eigenbasis of Γ, index `c·n + j`.
///
/// The kinetic block of each sector is the circulant
/// `T_{jl} = n⁻¹ Σ_b E(k_b) e^{i m_b (θ_j − θ_l)}`, summed directly.
fn dense_in_sectors(shifts: &[f64], basis: &CMat, potential: ChiPotential, n: usize, units: &Units) -> CMat {
    let k = shifts.len();
    let mut h = CMat::zeros(n * k, n * k);
    for (c, &s) in shifts.iter().enumerate() {
        let energies: Vec<f64> = shifted_wavenumbers(n, s)
            .into_iter()
            .map(|kk| units.kinetic_energy(kk))
            .collect();
        let row: Vec<Complex64> = (0..n)
            .map(|d| {
                energies
                    .iter()
                    .enumerate()
                    .map(|(b, &e)| {
                        let ph = TAU * ((b * d) % n) as f64 / n as f64;
                        Complex64::from_polar(e, ph)
                    })
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect();
        for j in 0..n {
            for l in 0..n {
                h[(c * n + j, c * n + l)] = row[(j + n - l) % n];
            }
        }
    }
    match potential {
        ChiPotential::None => {}
        ChiPotential::Scalar(v) => {
            for c in 0..k {
                for j in 0..n {
                    h[(c * n + j, c * n + j)] += v[j];
                }
            }
        }
        ChiPotential::Matrix(v) => {
            for (j, m) in v.iter().enumerate() {
                let mp = basis.adjoint() * m * basis;
                for a in 0..k {
                    for b in 0..k {
                        h[(a * n + j, b * n + j)] += mp[(a, b)];
                    }
                }
            }
        }
    }
    h
}

/// Dense Hamiltonian acting on χ, expressed in the eigenbasis of Γ
/// (index `c·n + j`).
pub fn dense_hamiltonian(twist: &Twist, potential: &Potential, n: usize, units: &Units) -> Result<CMat> {
    check_n_points(n)?;
    let chi = potential.chi_frame(twist, n)?;
    let shifts: Vec<f64> = twist.phases().iter().map(|p| p / TAU).collect();
    Ok(dense_in_sectors(&shifts, twist.vectors(), chi, n, units))
}

/// Lowest `n_levels` eigenvalues of the discretized Hamiltonian, by dense
/// Hermitian diagonalization.
pub fn spectrum(
    source: &SpectrumSource,
    potential: &Potential,
    n: usize,
    units: &Units,
    n_levels: usize,
) -> Result<Vec<f64>> {
    check_n_points(n)?;
    units.validate()?;
    if n_levels == 0 || n_levels > n / 4 {
        return Err(Error::invalid(format!(
            "n_levels must lie in 1..={}, got {n_levels}",
            n / 4
        )));
    }
    let h = match source {
        SpectrumSource::Twist(t) => dense_hamiltonian(t, potential, n, units)?,
        SpectrumSource::Flux { flux, charge } => {
            let t = Twist::trivial(1);
            let chi = potential.chi_frame(&t, n)?;
            let shift = -charge * flux / (TAU * units.hbar);
            dense_in_sectors(&[shift], t.vectors(), chi, n, units)
        }
    };
    let r = hermiticity_residual(&h);
    if r > SYMMETRY_TOL {
        return Err(Error::Numerics {
            invariant: "Hermitian discretization".into(),
            residual: r,
            threshold: SYMMETRY_TOL,
        });
    }
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(n_levels);
    Ok(vals)
}

/// Eigenstate number `index` (ascending energy) of the dense Hamiltonian.
pub fn eigenstate(twist: &Twist, potential: &Potential, n: usize, units: &Units, index: usize) -> Result<WaveGrid> {
    let h = dense_hamiltonian(twist, potential, n, units)?;
    if index >= h.nrows() {
        return Err(Error::invalid(format!("eigenstate index {index} out of range")));
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let v = eig.eigenvectors.column(order[index]);
    let k = twist.dim();
    let w = twist.vectors();
    let chi = (0..k)
        .map(|a| (0..n).map(|j| (0..k).map(|c| w[(a, c)] * v[c * n + j]).sum()).collect())
        .collect();
    WaveGrid::from_chi(chi, twist.clone(), *units)
}

fn to_sector_vector(state: &WaveGrid) -> DVector<Complex64> {
    let n = state.n_points();
    let k = state.components();
    let w = state.twist().vectors();
    DVector::from_fn(n * k, |i, _| {
        let (c, j) = (i / n, i % n);
        (0..k).map(|b| w[(b, c)].conj() * state.chi()[b][j]).sum()
    })
}

fn from_sector_vector(state: &WaveGrid, v: &DVector<Complex64>) -> Vec<Vec<Complex64>> {
    let n = state.n_points();
    let k = state.components();
    let w = state.twist().vectors();
    (0..k)
        .map(|a| (0..n).map(|j| (0..k).map(|c| w[(a, c)] * v[c * n + j]).sum()).collect())
        .collect()
}

/// Crank–Nicolson reference evolution with the dense Hamiltonian:
/// `(1 + iH dt/2ħ) χ_{m+1} = (1 − iH dt/2ħ) χ_m`.
pub fn crank_nicolson(state: &WaveGrid, potential: &Potential, dt: f64, steps: usize) -> Result<WaveGrid> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let n = state.n_points();
    let h = dense_hamiltonian(state.twist(), potential, n, state.units())?;
    let dim = h.nrows();
    let a = identity(dim) + &h * (I * dt / (2.0 * state.units().hbar));
    let b = identity(dim) - &h * (I * dt / (2.0 * state.units().hbar));
    let lu = a.lu();
    let m = lu.solve(&b).ok_or_else(|| Error::Numerics {
        invariant: "Crank–Nicolson system solvable".into(),
        residual: f64::INFINITY,
        threshold: 0.0,
    })?;
    let mut v = to_sector_vector(state);
    for _ in 0..steps {
        v = &m * v;
    }
    Ok(state.with_chi(from_sector_vector(state, &v), state.twist().clone()))
}
