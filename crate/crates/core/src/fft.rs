//! Multidimensional complex FFT built from per-axis rustfft plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized forward/inverse DFT over a row-major array of `shape`.
pub struct FftNd {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    scratch_len: usize,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("shape", &self.shape).finish()
    }
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward: Vec<_> = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse: Vec<_> = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = forward
            .iter()
            .chain(&inverse)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            shape: shape.to_vec(),
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// In-place `X_k = Σ_j x_j e^{-2πi jk/n}` over every axis.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// In-place `x_j = Σ_k X_k e^{+2πi jk/n}` over every axis (no 1/N factor).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len());
        let zero = Complex64::new(0.0, 0.0);
        let mut scratch = vec![zero; self.scratch_len];
        let dim = self.shape.len();
        // Contiguous last axis: one batched call.
        plans[dim - 1].process_with_scratch(data, &mut scratch);

        let mut lines = vec![zero; self.len()];
        for axis in (0..dim - 1).rev() {
            let n = self.shape[axis];
            let stride: usize = self.shape[axis + 1..].iter().product();
            let block = n * stride;
            for chunk in data.chunks_mut(block) {
                // Transpose the (n × stride) block so each line is contiguous.
                let buf = &mut lines[..block];
                for i in 0..n {
                    for j in 0..stride {
                        buf[j * n + i] = chunk[i * stride + j];
                    }
                }
                plans[axis].process_with_scratch(buf, &mut scratch);
                for i in 0..n {
                    for j in 0..stride {
                        chunk[i * stride + j] = buf[j * n + i];
                    }
                }
            }
        }
    }
}
