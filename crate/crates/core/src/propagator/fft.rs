use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse FFT pair of fixed length; the inverse is normalized.
pub(crate) struct Fft1 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::default(); len],
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }
}

impl std::fmt::Debug for Fft1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft1({})", self.n)
    }
}

/// Integer wavenumber carried by FFT bin `b`, in the symmetric window
/// `[-n/2, n/2)`.
pub fn bin_wavenumber(n: usize, b: usize) -> i64 {
    if b < n / 2 {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// Shifted wavenumbers `m + shift` for each FFT bin.
///
/// Each bin stands for a whole alias class `m + n·ℤ` on the grid; the
/// representative is chosen so that `m + shift` lies in `[-n/2, n/2)`. Shifts
/// that differ by an integer therefore produce the same multiset of values.
pub fn shifted_wavenumbers(n: usize, shift: f64) -> Vec<f64> {
    let nf = n as f64;
    (0..n)
        .map(|b| {
            let m = b as f64;
            let p = ((-nf / 2.0 - shift - m) / nf).ceil();
            m + nf * p + shift
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut f = Fft1::new(16);
        let orig: Vec<Complex64> = (0..16).map(|j| Complex64::new(j as f64, -(j as f64).sin())).collect();
        let mut buf = orig.clone();
        f.forward(&mut buf);
        f.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unshifted_window_is_symmetric() {
        let k = shifted_wavenumbers(8, 0.0);
        assert_eq!(k, vec![0., 1., 2., 3., -4., -3., -2., -1.]);
        for b in 0..8 {
            assert_eq!(k[b], bin_wavenumber(8, b) as f64);
        }
    }

    #[test]
    fn integer_shift_permutes_values() {
        let mut a = shifted_wavenumbers(16, 0.3);
        let mut b = shifted_wavenumbers(16, 1.3);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(a.iter().all(|&k| (-8.0..8.0).contains(&k)));
    }

    #[test]
    fn half_shift_is_symmetric() {
        let mut k = shifted_wavenumbers(8, 0.5);
        k.sort_by(f64::total_cmp);
        assert_eq!(k, vec![-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]);
    }
}
