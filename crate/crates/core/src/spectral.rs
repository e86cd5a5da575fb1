//! Fourier machinery on the periodic unit interval.
//!
//! All multipliers follow one convention: the Nyquist mode of an even grid has
//! wavenumber zero. The first-derivative matrix is then real and skew with the
//! exact shift as its exponential. The elliptic inverse agrees with composing
//! two derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumbers = (0..n)
            .map(|k| {
                if 2 * k == n {
                    0.0
                } else if 2 * k < n {
                    2.0 * PI * k as f64
                } else {
                    2.0 * PI * (k as f64 - n as f64)
                }
            })
            .collect();
        Self {
            n,
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Angular wavenumber 2πk of each FFT bin (Nyquist set to zero).
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Applies the Fourier multiplier `symbol(ξ)` to a real periodic sequence in place.
    pub fn apply<F>(&self, values: &mut [f64], symbol: F)
    where
        F: Fn(f64) -> Complex64,
    {
        debug_assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (c, &xi) in buf.iter_mut().zip(&self.wavenumbers) {
            *c *= symbol(xi);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for (v, c) in values.iter_mut().zip(&buf) {
            *v = c.re * scale;
        }
    }

    pub fn derivative(&self, values: &mut [f64]) {
        self.apply(values, |xi| Complex64::new(0.0, xi));
    }

    /// Exact translation x ↦ x − shift.
    pub fn shift(&self, values: &mut [f64], shift: f64) {
        self.apply(values, |xi| Complex64::from_polar(1.0, -xi * shift));
    }

    /// Solves u − d·u'' = rhs.
    pub fn elliptic_solve(&self, values: &mut [f64], diffusivity: f64) {
        self.apply(values, |xi| Complex64::new(1.0 / (1.0 + diffusivity * xi * xi), 0.0));
    }

    /// Dense first-derivative matrix entry (row i, column j), matching [`Spectral::derivative`].
    pub fn derivative_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let n = self.n as f64;
        let diff = i as isize - j as isize;
        let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        if self.n % 2 == 0 {
            PI * sign / (PI * diff as f64 / n).tan()
        } else {
            PI * sign / (PI * diff as f64 / n).sin()
        }
    }
}
