//! Uniform periodic grid on the square [-L, L)^2 with spectral differentiation.
//!
//! Sample points along each axis are x_i = -L + i*h with h = 2L/n and n a
//! power of two, so h*n == 2L holds exactly in binary floating point.
//! Integrals are the periodic trapezoid rule h^2 * sum, which is spectrally
//! accurate for fields that decay below rounding at the boundary. Derivatives
//! multiply by i*k in frequency space with wavenumbers k_j = pi*j_signed/L.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Index convention: `values[(i, j)]` samples the point (x1_i, x2_j), so the
/// first axis is the first coordinate. Arrays are kept in standard layout.
#[derive(Clone)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
    spacing: f64,
    coords: Arc<Vec<f64>>,
    freq: Arc<Vec<f64>>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid2D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }
}

impl Grid2D {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadResolution(n));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::BadHalfWidth(half_width));
        }
        let spacing = 2.0 * half_width / n as f64;
        let coords: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * spacing).collect();
        let freq: Vec<f64> = (0..n)
            .map(|j| {
                let signed = if j < n / 2 { j as isize } else { j as isize - n as isize };
                std::f64::consts::PI * signed as f64 / half_width
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n);
        let fft_inv = planner.plan_fft_inverse(n);
        Ok(Grid2D {
            n,
            half_width,
            spacing,
            coords: Arc::new(coords),
            freq: Arc::new(freq),
            fft_fwd,
            fft_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Axis sample coordinates (identical for both axes).
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Wavenumbers in FFT storage order; antisymmetric except the Nyquist
    /// entry at index n/2, which carries the negative sign.
    pub fn freq(&self) -> &[f64] {
        &self.freq
    }

    pub(crate) fn check_shape<T>(&self, a: &Array2<T>) -> Result<()> {
        if a.dim() == (self.n, self.n) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { expected: (self.n, self.n), got: a.dim() })
        }
    }

    /// Periodic trapezoid rule h^2 * sum with pairwise summation.
    pub fn integrate(&self, values: &Array2<f64>) -> Result<f64> {
        self.check_shape(values)?;
        let flat = values.as_slice().expect("standard layout");
        Ok(self.spacing * self.spacing * pairwise_sum(flat))
    }

    pub(crate) fn integrate_unchecked(&self, values: &Array2<f64>) -> f64 {
        let flat = values.as_slice().expect("standard layout");
        self.spacing * self.spacing * pairwise_sum(flat)
    }

    /// Unnormalized forward 2-D FFT (both axes).
    pub(crate) fn fft2(&self, values: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = values.clone();
        self.fft2_inplace(&mut out, true);
        out
    }

    /// Inverse 2-D FFT including the 1/n^2 normalization.
    pub(crate) fn ifft2(&self, values: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = values.clone();
        self.fft2_inplace(&mut out, false);
        out
    }

    fn fft2_inplace(&self, a: &mut Array2<Complex64>, forward: bool) {
        let fft = if forward { &self.fft_fwd } else { &self.fft_inv };
        fft2_both_axes(fft.as_ref(), a);
        if !forward {
            let scale = 1.0 / (self.n * self.n) as f64;
            a.mapv_inplace(|v| v * scale);
        }
    }

    /// First-derivative multipliers: the wavenumbers with the Nyquist entry
    /// zeroed, which keeps derivatives of real fields real.
    pub(crate) fn deriv_freq(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.freq[j]
        }
    }

    /// Spectral gradient (d/dx1, d/dx2).
    pub fn spectral_gradient(
        &self,
        values: &Array2<Complex64>,
    ) -> Result<(Array2<Complex64>, Array2<Complex64>)> {
        self.check_shape(values)?;
        let hat = self.fft2(values);
        Ok(self.gradient_from_hat(&hat))
    }

    pub(crate) fn gradient_from_hat(
        &self,
        hat: &Array2<Complex64>,
    ) -> (Array2<Complex64>, Array2<Complex64>) {
        let n = self.n;
        let mut d1 = hat.clone();
        let mut d2 = hat.clone();
        for i in 0..n {
            let k1 = Complex64::new(0.0, self.deriv_freq(i));
            for j in 0..n {
                let k2 = Complex64::new(0.0, self.deriv_freq(j));
                let v = hat[(i, j)];
                d1[(i, j)] = k1 * v;
                d2[(i, j)] = k2 * v;
            }
        }
        self.fft2_inplace(&mut d1, false);
        self.fft2_inplace(&mut d2, false);
        (d1, d2)
    }

    /// Laplacian as the exact square of the first-derivative multipliers,
    /// so that <-Lap u, u> = int |grad u|^2 holds to rounding on the grid.
    pub(crate) fn laplacian_from_hat(&self, hat: &Array2<Complex64>) -> Array2<Complex64> {
        let n = self.n;
        let mut lap = hat.clone();
        for i in 0..n {
            let k1 = self.deriv_freq(i);
            for j in 0..n {
                let k2 = self.deriv_freq(j);
                lap[(i, j)] *= -(k1 * k1 + k2 * k2);
            }
        }
        self.fft2_inplace(&mut lap, false);
        lap
    }

    /// Gradient of the modulus via Re(conj(u) grad u)/|u|, guarded where the
    /// modulus is below 1e-12 of its peak (the guarded samples contribute 0).
    pub fn modulus_gradient(
        &self,
        values: &Array2<Complex64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_shape(values)?;
        let (d1, d2) = self.spectral_gradient(values)?;
        let peak = values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        let floor = 1e-12 * peak;
        let n = self.n;
        let mut g1 = Array2::zeros((n, n));
        let mut g2 = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let u = values[(i, j)];
                let m = u.norm();
                if m > floor {
                    g1[(i, j)] = (u.conj() * d1[(i, j)]).re / m;
                    g2[(i, j)] = (u.conj() * d2[(i, j)]).re / m;
                }
            }
        }
        Ok((g1, g2))
    }

    /// Fraction of the mass sum(w) carried by the outer 10% of the square
    /// (samples with max(|x1|,|x2|) >= 0.9 L). `w` must be non-negative.
    pub(crate) fn outer_annulus_fraction(&self, w: &Array2<f64>) -> f64 {
        let cut = 0.9 * self.half_width;
        let mut outer = 0.0;
        let mut total = 0.0;
        for i in 0..self.n {
            let x1 = self.coords[i].abs();
            for j in 0..self.n {
                let v = w[(i, j)];
                total += v;
                if x1 >= cut || self.coords[j].abs() >= cut {
                    outer += v;
                }
            }
        }
        if total > 0.0 {
            outer / total
        } else {
            0.0
        }
    }

    /// Evaluate the band-limited interpolant of `values` on the tensor grid
    /// xs x ys. The Nyquist line is dropped: for fields decayed below
    /// rounding at the band edge this is below 1e-12 of the peak.
    pub(crate) fn fourier_eval_tensor(
        &self,
        values: &Array2<Complex64>,
        xs: &[f64],
        ys: &[f64],
    ) -> Array2<Complex64> {
        let n = self.n;
        let hat = self.fft2(values);
        let e1 = self.eval_matrix(xs);
        let e2 = self.eval_matrix(ys);
        // t[m1, q] = sum_m2 hat[m1, m2] * e2[q, m2]
        let mut t = Array2::<Complex64>::zeros((n, ys.len()));
        for m1 in 0..n {
            let hat_row = hat.row(m1);
            let hat_row = hat_row.as_slice().expect("standard layout");
            for (q, e2_row) in e2.rows().into_iter().enumerate() {
                let e2_row = e2_row.as_slice().expect("standard layout");
                let mut acc = Complex64::ZERO;
                for m2 in 0..n {
                    acc += hat_row[m2] * e2_row[m2];
                }
                t[(m1, q)] = acc;
            }
        }
        // out[p, :] = sum_m1 e1[p, m1] * t[m1, :]
        let mut out = Array2::<Complex64>::zeros((xs.len(), ys.len()));
        for p in 0..xs.len() {
            let mut acc = vec![Complex64::ZERO; ys.len()];
            for m1 in 0..n {
                let c = e1[(p, m1)];
                let t_row = t.row(m1);
                let t_row = t_row.as_slice().expect("standard layout");
                for q in 0..ys.len() {
                    acc[q] += c * t_row[q];
                }
            }
            for q in 0..ys.len() {
                out[(p, q)] = acc[q];
            }
        }
        out
    }

    fn eval_matrix(&self, xs: &[f64]) -> Array2<Complex64> {
        let n = self.n;
        let scale = 1.0 / n as f64;
        let mut e = Array2::<Complex64>::zeros((xs.len(), n));
        for (p, &x) in xs.iter().enumerate() {
            let shifted = x + self.half_width;
            for m in 0..n {
                if m == n / 2 {
                    continue;
                }
                let phase = self.freq[m] * shifted;
                e[(p, m)] = Complex64::new(0.0, phase).exp() * scale;
            }
        }
        e
    }
}

/// Applies a 1-D transform along both axes of a square array (unnormalized).
pub(crate) fn fft2_both_axes(fft: &dyn Fft<f64>, a: &mut Array2<Complex64>) {
    let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
    for mut row in a.rows_mut() {
        let slice = row.as_slice_mut().expect("standard layout");
        fft.process_with_scratch(slice, &mut scratch);
    }
    let mut t = a.t().as_standard_layout().into_owned();
    for mut row in t.rows_mut() {
        let slice = row.as_slice_mut().expect("standard layout");
        fft.process_with_scratch(slice, &mut scratch);
    }
    a.assign(&t.t());
}

/// Pairwise (cascade) summation: deterministic and accurate to ~log2(n) ulps.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        s
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}
