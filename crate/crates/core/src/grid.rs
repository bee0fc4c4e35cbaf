//! Uniform periodic lattices on the torus and their wavenumber tables.

use std::f64::consts::PI;

use crate::SpectralError;

/// A `dim`-dimensional uniform periodic lattice with period `length` on every axis.
///
/// Samples are stored row-major: axis 0 varies slowest. The wavenumber table of
/// each axis uses the signed FFT convention `0, 1, .., n/2, -(n/2 - 1), .., -1`
/// scaled by `2π / length`; the Nyquist index keeps the positive sign.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    n: Vec<usize>,
    length: f64,
    wavenumbers: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

impl TorusGrid {
    /// Builds a grid with the same point count `n` on every axis and period `2π`.
    pub fn square(dim: usize, n: usize) -> Result<Self, SpectralError> {
        Self::new(vec![n; dim], 2.0 * PI)
    }

    pub fn new(n: Vec<usize>, length: f64) -> Result<Self, SpectralError> {
        if !(2..=3).contains(&n.len()) {
            return Err(SpectralError::InvalidGrid(format!(
                "dimension must be 2 or 3, got {}",
                n.len()
            )));
        }
        if let Some(bad) = n.iter().find(|&&m| m < 8 || !m.is_power_of_two()) {
            return Err(SpectralError::InvalidGrid(format!(
                "axis point count must be a power of two >= 8, got {bad}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!(
                "period must be positive and finite, got {length}"
            )));
        }
        let scale = 2.0 * PI / length;
        let wavenumbers = n
            .iter()
            .map(|&m| (0..m).map(|i| signed_index(i, m) as f64 * scale).collect())
            .collect();
        let mut strides = vec![1; n.len()];
        for a in (0..n.len() - 1).rev() {
            strides[a] = strides[a + 1] * n[a + 1];
        }
        Ok(Self {
            n,
            length,
            wavenumbers,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    /// Per-axis point counts.
    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of real-space samples.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Measure of the torus, `length^dim`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim() as i32)
    }

    /// Quadrature weight of one sample (uniform trapezoid rule).
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Scaled wavenumbers of one axis, in FFT index order.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Largest retained integer frequency per axis under the 2/3 rule.
    pub fn band_limit(&self, axis: usize) -> usize {
        self.n[axis] / 3
    }

    /// Splits a flat index into per-axis indices.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in 0..self.dim() {
            out[a] = flat / self.strides[a];
            flat %= self.strides[a];
        }
    }

    /// Signed integer frequency of every axis at a flat index.
    pub fn frequency(&self, flat: usize) -> Vec<i64> {
        let mut idx = vec![0; self.dim()];
        self.unravel(flat, &mut idx);
        idx.iter()
            .zip(&self.n)
            .map(|(&i, &m)| signed_index(i, m))
            .collect()
    }

    /// Physical coordinate of sample `i` along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.length * i as f64 / self.n[axis] as f64
    }

    /// Coordinates of every sample, as `dim` flat arrays.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        let mut idx = vec![0; self.dim()];
        let mut out = vec![Vec::with_capacity(self.len()); self.dim()];
        for flat in 0..self.len() {
            self.unravel(flat, &mut idx);
            for a in 0..self.dim() {
                out[a].push(self.coordinate(a, idx[a]));
            }
        }
        out
    }

    /// Same period, every axis count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self, SpectralError> {
        Self::new(self.n.iter().map(|&m| m * factor).collect(), self.length)
    }
}

/// Signed FFT frequency of index `i` on an axis of `n` points (Nyquist positive).
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT index of signed frequency `k` on an axis of `n` points.
pub fn wrap_index(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}
