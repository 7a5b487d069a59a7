use num_complex::Complex64;

use super::{fft::shifted_wavenumbers, Fft1, Potential, WaveGrid};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, identity, max_abs_diff, CMat, I};

/// Plain periodic split-step on `S` consecutive sheets of the cover, with no
/// gauge fixing.
///
/// ψ itself is stored on `[0, 2πS)` and evolved with the lifted potential.
/// This is only consistent when `Γ^S = I`. Nothing enforces the twist here,
/// so its residual measures whether the dynamics preserves it on its own.
pub struct UngaugedCoverReference {
    sheets: usize,
    n: usize,
    k: usize,
    gamma: CMat,
    psi: Vec<Vec<Complex64>>,
    half: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    fft: Fft1,
}

impl UngaugedCoverReference {
    pub fn new(state: &WaveGrid, potential: &Potential, sheets: usize, dt: f64) -> Result<Self> {
        if sheets < 2 {
            return Err(Error::invalid("at least two sheets are needed"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let n = state.n_points();
        let k = state.components();
        let twist = state.twist();
        potential.validate(n, k)?;
        let gamma = twist.generator().clone();
        let mut gs = identity(k);
        for _ in 0..sheets {
            gs = &gs * &gamma;
        }
        let dev = max_abs_diff(&gs, &identity(k));
        if dev > 1e-10 {
            return Err(Error::invalid(format!(
                "Γ^{sheets} differs from I by {dev:.3e}; the {sheets}-sheet domain is not periodic"
            )));
        }
        let total = n * sheets;
        let mut psi = vec![vec![Complex64::default(); total]; k];
        for s in 0..sheets {
            let p = state.psi_on_sheet(s as i64);
            for a in 0..k {
                psi[a][s * n..(s + 1) * n].copy_from_slice(&p[a]);
            }
        }
        let units = state.units();
        let tau = dt / (2.0 * units.hbar);
        let mut half = Vec::with_capacity(total * k * k);
        for s in 0..sheets {
            for j in 0..n {
                let u = expm_hermitian(&potential.cover_value(twist, j, s as i64), tau);
                for a in 0..k {
                    for b in 0..k {
                        half.push(u[(a, b)]);
                    }
                }
            }
        }
        let kappa = units.kappa();
        let kinetic = shifted_wavenumbers(total, 0.0)
            .into_iter()
            .map(|m| {
                let kk = m / sheets as f64;
                (-I * (0.5 * kappa * kk * kk * dt)).exp()
            })
            .collect();
        Ok(Self {
            sheets,
            n,
            k,
            gamma,
            psi,
            half,
            kinetic,
            fft: Fft1::new(total),
        })
    }

    fn apply_half(&mut self) {
        let k = self.k;
        let mut buf = vec![Complex64::default(); k];
        for j in 0..self.psi[0].len() {
            let u = &self.half[j * k * k..(j + 1) * k * k];
            for a in 0..k {
                buf[a] = (0..k).map(|b| u[a * k + b] * self.psi[b][j]).sum();
            }
            for a in 0..k {
                self.psi[a][j] = buf[a];
            }
        }
    }

    pub fn step(&mut self) {
        self.apply_half();
        for comp in self.psi.iter_mut() {
            self.fft.forward(comp);
            for (z, p) in comp.iter_mut().zip(&self.kinetic) {
                *z *= p;
            }
            self.fft.inverse(comp);
        }
        self.apply_half();
    }

    pub fn run(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// `max |ψ(θ + 2π) − Γ ψ(θ)|` over all stored sheets.
    pub fn twist_residual(&self) -> f64 {
        let (n, k, s) = (self.n, self.k, self.sheets);
        let mut r = 0.0f64;
        for sheet in 0..s {
            let next = (sheet + 1) % s;
            for j in 0..n {
                for a in 0..k {
                    let g: Complex64 = (0..k).map(|b| self.gamma[(a, b)] * self.psi[b][sheet * n + j]).sum();
                    r = r.max((self.psi[a][next * n + j] - g).norm());
                }
            }
        }
        r
    }

    /// ψ on sheet `s` of the stored window.
    pub fn psi_on_sheet(&self, s: usize) -> Vec<Vec<Complex64>> {
        self.psi
            .iter()
            .map(|c| c[s * self.n..(s + 1) * self.n].to_vec())
            .collect()
    }
}
