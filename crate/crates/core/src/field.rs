//! Real-space and Fourier-space field containers.

use num_complex::Complex64;

use crate::grid::TorusGrid;
use crate::SpectralError;

/// Real samples of a scalar quantity on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; for values produced by trusted transforms.
    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x)` at every grid point; `x` has one entry per axis.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let coords = grid.coordinates();
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                for (a, c) in coords.iter().enumerate() {
                    x[a] = c[i];
                }
                f(&x)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Trapezoid-rule integral over the torus.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Root-mean-square of the samples.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Trapezoid-rule L² norm.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &ScalarField) -> Result<Self, SpectralError> {
        self.check_grid(other.grid())?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + scale * b)
                .collect(),
        })
    }

    /// L² norm of `self - other`.
    pub fn l2_distance(&self, other: &ScalarField) -> Result<f64, SpectralError> {
        Ok(self.axpy(-1.0, other)?.l2_norm())
    }

    /// Circular shift by `offset` samples along every axis.
    pub fn shifted(&self, offset: &[usize]) -> Self {
        let g = &self.grid;
        let mut idx = vec![0; g.dim()];
        let mut values = vec![0.0; g.len()];
        for (flat, &v) in self.values.iter().enumerate() {
            g.unravel(flat, &mut idx);
            let mut target = 0;
            for a in 0..g.dim() {
                target += ((idx[a] + offset[a]) % g.shape()[a]) * g.strides()[a];
            }
            values[target] = v;
        }
        Self {
            grid: g.clone(),
            values,
        }
    }

    pub(crate) fn check_grid(&self, other: &TorusGrid) -> Result<(), SpectralError> {
        if &self.grid != other {
            return Err(SpectralError::GridMismatch);
        }
        Ok(())
    }
}

/// `dim` scalar components sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self, SpectralError> {
        let first = components.first().ok_or(SpectralError::GridMismatch)?;
        if components.len() != first.grid().dim() {
            return Err(SpectralError::ArityMismatch(format!(
                "vector field needs {} components, got {}",
                first.grid().dim(),
                components.len()
            )));
        }
        for c in &components[1..] {
            c.check_grid(first.grid())?;
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let comps = (0..grid.dim())
            .map(|a| ScalarField::from_fn(grid, |x| f(x)[a]))
            .collect();
        Self { components: comps }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, a: usize) -> &ScalarField {
        &self.components[a]
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Trapezoid-rule L² norm of the magnitude.
    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn axpy(&self, scale: f64, other: &VectorField) -> Result<Self, SpectralError> {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.axpy(scale, b))
            .collect::<Result<_, _>>()?;
        Ok(Self { components })
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.map(|v| scale * v)).collect(),
        }
    }

    pub fn l2_distance(&self, other: &VectorField) -> Result<f64, SpectralError> {
        Ok(self.axpy(-1.0, other)?.l2_norm())
    }

    pub fn shifted(&self, offset: &[usize]) -> Self {
        Self {
            components: self.components.iter().map(|c| c.shifted(offset)).collect(),
        }
    }
}

/// Pointwise `dim × dim` tensor samples, entries stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    dim: usize,
    entries: Vec<ScalarField>,
}

impl TensorField {
    pub fn new(dim: usize, entries: Vec<ScalarField>) -> Result<Self, SpectralError> {
        if entries.len() != dim * dim {
            return Err(SpectralError::ArityMismatch(format!(
                "tensor of dimension {dim} needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        for e in &entries[1..] {
            e.check_grid(entries[0].grid())?;
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TorusGrid {
        self.entries[0].grid()
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    /// Pointwise trace.
    pub fn trace(&self) -> ScalarField {
        let mut values = vec![0.0; self.grid().len()];
        for i in 0..self.dim {
            for (acc, v) in values.iter_mut().zip(self.entry(i, i).values()) {
                *acc += v;
            }
        }
        ScalarField::from_raw(self.grid().clone(), values)
    }
}

/// Fourier-series coefficients of a real field.
///
/// Coefficients are normalized so that `f(x) = Σ_k coeff(k) e^{i k·x}`; the
/// layout follows the FFT index order of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of the signed integer frequency `k`.
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        let mut flat = 0;
        for (a, &ka) in k.iter().enumerate() {
            flat += crate::grid::wrap_index(ka, self.grid.shape()[a]) * self.grid.strides()[a];
        }
        self.coeffs[flat]
    }

    /// Largest violation of `coeff(-k) = conj(coeff(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let mut idx = vec![0; g.dim()];
        let mut worst: f64 = 0.0;
        for flat in 0..g.len() {
            g.unravel(flat, &mut idx);
            let mut neg = 0;
            for a in 0..g.dim() {
                neg += ((g.shape()[a] - idx[a]) % g.shape()[a]) * g.strides()[a];
            }
            worst = worst.max((self.coeffs[flat] - self.coeffs[neg].conj()).norm());
        }
        worst
    }
}
