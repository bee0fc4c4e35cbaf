//! Fourier transforms and spectral operators on the periodic torus.
//!
//! [`Spectral`] owns the FFT plans for a grid together with a twice-refined
//! "padded" grid. Pointwise products of fields living in the 2/3-rule band are
//! formed on the padded grid, where products of up to three band-limited
//! factors carry no aliasing, and then truncated back to the band. That makes
//! the truncated product an exact Galerkin projection.

use num_complex::Complex64;

use crate::fft::FftNd;
use crate::field::{ScalarField, SpectralField, TensorField, VectorField};
use crate::grid::{signed_index, wrap_index, TorusGrid};
use crate::SpectralError;

/// Relative tolerance on the mean of inputs that must be mean-free.
pub const TOL_MEAN: f64 = 1e-10;

/// Relative size below which Fourier coefficients count as round-off in
/// [`Spectral::frac_laplacian`].
pub const NOISE_FLOOR: f64 = 16.0 * f64::EPSILON;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which derivative to take in [`Spectral::differentiate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    Grad,
    Div,
    SymGrad,
}

#[derive(Debug, Clone, Copy)]
pub enum DiffInput<'a> {
    Scalar(&'a ScalarField),
    Vector(&'a VectorField),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffOutput {
    Scalar(ScalarField),
    Vector(VectorField),
    Tensor(TensorField),
}

/// FFT plans and wavenumber tables for one grid plus its padded companion.
#[derive(Debug)]
pub struct Spectral {
    grid: TorusGrid,
    fft: FftNd,
    padded: TorusGrid,
    padded_fft: FftNd,
    /// Wavenumber of each axis at every flat index, Nyquist zeroed (odd derivatives).
    k_odd: Vec<Vec<f64>>,
    /// |k|² at every flat index (Nyquist kept).
    k2: Vec<f64>,
    /// Flat indices inside the 2/3-rule band.
    band: Vec<usize>,
    in_band: Vec<bool>,
    /// Padded-grid flat index of each band mode, and of its negative.
    band_pad: Vec<usize>,
    band_pad_neg: Vec<usize>,
    /// Per axis: padded destinations (index, weight) of every n-grid index.
    pad_map: Vec<Vec<Vec<(usize, f64)>>>,
}

impl Spectral {
    pub fn new(grid: &TorusGrid) -> Self {
        let dim = grid.dim();
        let padded = grid.refined(2).expect("refining a valid grid");
        let len = grid.len();
        let mut k_odd = vec![vec![0.0; len]; dim];
        let mut k2 = vec![0.0; len];
        let mut in_band = vec![false; len];
        let mut band = Vec::new();
        let mut band_pad = Vec::new();
        let mut band_pad_neg = Vec::new();
        let mut idx = vec![0; dim];
        for flat in 0..len {
            grid.unravel(flat, &mut idx);
            let mut inside = true;
            let mut pad = 0;
            let mut pad_neg = 0;
            for a in 0..dim {
                let n = grid.shape()[a];
                let k = signed_index(idx[a], n);
                let kw = grid.wavenumbers(a)[idx[a]];
                k2[flat] += kw * kw;
                if 2 * idx[a] != n {
                    k_odd[a][flat] = kw;
                }
                if k.unsigned_abs() as usize > grid.band_limit(a) {
                    inside = false;
                }
                pad += wrap_index(k, 2 * n) * padded.strides()[a];
                pad_neg += wrap_index(-k, 2 * n) * padded.strides()[a];
            }
            in_band[flat] = inside;
            if inside {
                band.push(flat);
                band_pad.push(pad);
                band_pad_neg.push(pad_neg);
            }
        }
        let pad_map = grid
            .shape()
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|i| {
                        if 2 * i == n {
                            // Nyquist: split evenly between ±n/2 so the interpolant stays real.
                            vec![(n / 2, 0.5), (wrap_index(-(n as i64) / 2, 2 * n), 0.5)]
                        } else {
                            vec![(wrap_index(signed_index(i, n), 2 * n), 1.0)]
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            fft: FftNd::new(grid.shape()),
            padded_fft: FftNd::new(padded.shape()),
            grid: grid.clone(),
            padded,
            k_odd,
            k2,
            band,
            in_band,
            band_pad,
            band_pad_neg,
            pad_map,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn padded_grid(&self) -> &TorusGrid {
        &self.padded
    }

    pub(crate) fn band(&self) -> &[usize] {
        &self.band
    }

    pub(crate) fn k2(&self) -> &[f64] {
        &self.k2
    }

    pub(crate) fn k_odd(&self, axis: usize) -> &[f64] {
        &self.k_odd[axis]
    }

    pub fn is_in_band(&self, flat: usize) -> bool {
        self.in_band[flat]
    }

    fn check(&self, grid: &TorusGrid) -> Result<(), SpectralError> {
        if grid != &self.grid {
            return Err(SpectralError::GridMismatch);
        }
        Ok(())
    }

    // ---- transforms -------------------------------------------------------

    pub(crate) fn forward_raw(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    pub(crate) fn inverse_raw(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.fft.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Fourier coefficients of a real field.
    pub fn forward(&self, f: &ScalarField) -> Result<SpectralField, SpectralError> {
        self.check(f.grid())?;
        SpectralField::new(self.grid.clone(), self.forward_raw(f.values()))
    }

    /// Real field with the given coefficients (imaginary round-off dropped).
    pub fn inverse(&self, fhat: &SpectralField) -> Result<ScalarField, SpectralError> {
        self.check(fhat.grid())?;
        Ok(ScalarField::from_raw(
            self.grid.clone(),
            self.inverse_raw(fhat.coeffs()),
        ))
    }

    fn apply_multiplier(
        &self,
        f: &ScalarField,
        m: impl Fn(usize) -> Complex64,
    ) -> Result<ScalarField, SpectralError> {
        self.check(f.grid())?;
        let mut c = self.forward_raw(f.values());
        c.iter_mut().enumerate().for_each(|(i, v)| *v *= m(i));
        Ok(ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&c)))
    }

    // ---- operators --------------------------------------------------------

    /// Multiplier `|k|^{2s}` at flat index `i`; the zero mode maps to zero.
    pub(crate) fn frac_symbol(&self, i: usize, s: f64) -> f64 {
        if self.k2[i] == 0.0 {
            0.0
        } else {
            self.k2[i].powf(s)
        }
    }

    /// Fractional Laplacian `Λ^{2s} f`, Fourier multiplier `|k|^{2s}`.
    ///
    /// Coefficients below [`NOISE_FLOOR`] times the largest one are dropped
    /// first: they are transform round-off, and the multiplier would amplify
    /// them by up to `|k_max|^{2s}`.
    pub fn frac_laplacian(&self, f: &ScalarField, s: f64) -> Result<ScalarField, SpectralError> {
        check_order(s, false)?;
        self.check(f.grid())?;
        let mut c = self.forward_raw(f.values());
        let cut = NOISE_FLOOR * c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (i, v) in c.iter_mut().enumerate() {
            *v = if v.norm() <= cut { ZERO } else { *v * self.frac_symbol(i, s) };
        }
        Ok(ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&c)))
    }

    /// Zero-mean solution of `Δg = f`.
    pub fn inv_laplacian_zero_mean(&self, f: &ScalarField) -> Result<ScalarField, SpectralError> {
        self.check(f.grid())?;
        let mean = f.mean();
        let tol = TOL_MEAN * f.rms().max(f64::MIN_POSITIVE);
        if mean.abs() > tol {
            return Err(SpectralError::MeanNotZero { mean, tol });
        }
        self.apply_multiplier(f, |i| {
            if self.k2[i] == 0.0 {
                ZERO
            } else {
                Complex64::new(-1.0 / self.k2[i], 0.0)
            }
        })
    }

    pub fn grad(&self, f: &ScalarField) -> Result<VectorField, SpectralError> {
        self.check(f.grid())?;
        let c = self.forward_raw(f.values());
        let comps = (0..self.grid.dim())
            .map(|a| {
                let d: Vec<Complex64> = c
                    .iter()
                    .zip(&self.k_odd[a])
                    .map(|(v, &k)| I * k * v)
                    .collect();
                ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&d))
            })
            .collect();
        VectorField::new(comps)
    }

    pub fn div(&self, u: &VectorField) -> Result<ScalarField, SpectralError> {
        self.check(u.grid())?;
        let mut acc = vec![ZERO; self.grid.len()];
        for (a, comp) in u.components().iter().enumerate() {
            let c = self.forward_raw(comp.values());
            for ((t, v), &k) in acc.iter_mut().zip(&c).zip(&self.k_odd[a]) {
                *t += I * k * v;
            }
        }
        Ok(ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&acc)))
    }

    /// Full velocity gradient, entry `(i, j) = ∂_j u_i`.
    pub fn velocity_gradient(&self, u: &VectorField) -> Result<TensorField, SpectralError> {
        self.check(u.grid())?;
        let d = self.grid.dim();
        let mut entries = Vec::with_capacity(d * d);
        for comp in u.components() {
            let c = self.forward_raw(comp.values());
            for j in 0..d {
                let dc: Vec<Complex64> = c
                    .iter()
                    .zip(&self.k_odd[j])
                    .map(|(v, &k)| I * k * v)
                    .collect();
                entries.push(ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&dc)));
            }
        }
        TensorField::new(d, entries)
    }

    /// Symmetric gradient `½(∇u + ∇uᵀ)`.
    pub fn sym_grad(&self, u: &VectorField) -> Result<TensorField, SpectralError> {
        let g = self.velocity_gradient(u)?;
        let d = g.dim();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let v = g
                    .entry(i, j)
                    .values()
                    .iter()
                    .zip(g.entry(j, i).values())
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                entries.push(ScalarField::from_raw(self.grid.clone(), v));
            }
        }
        TensorField::new(d, entries)
    }

    pub fn differentiate(
        &self,
        input: DiffInput<'_>,
        kind: DiffKind,
    ) -> Result<DiffOutput, SpectralError> {
        match (input, kind) {
            (DiffInput::Scalar(f), DiffKind::Grad) => Ok(DiffOutput::Vector(self.grad(f)?)),
            (DiffInput::Vector(u), DiffKind::Div) => Ok(DiffOutput::Scalar(self.div(u)?)),
            (DiffInput::Vector(u), DiffKind::SymGrad) => Ok(DiffOutput::Tensor(self.sym_grad(u)?)),
            (DiffInput::Scalar(_), k) => Err(SpectralError::ArityMismatch(format!(
                "{k:?} needs a vector field"
            ))),
            (DiffInput::Vector(_), k) => Err(SpectralError::ArityMismatch(format!(
                "{k:?} needs a scalar field"
            ))),
        }
    }

    /// Helmholtz split `u = pu + ∇g` with `div pu = 0` and `mean(g) = 0`.
    ///
    /// `pu` keeps the mean of `u`.
    pub fn helmholtz(&self, u: &VectorField) -> Result<(VectorField, ScalarField), SpectralError> {
        self.check(u.grid())?;
        let d = self.grid.dim();
        let coeffs: Vec<Vec<Complex64>> = u
            .components()
            .iter()
            .map(|c| self.forward_raw(c.values()))
            .collect();
        let mut g = vec![ZERO; self.grid.len()];
        for (i, gi) in g.iter_mut().enumerate() {
            if self.k2[i] == 0.0 {
                continue;
            }
            // div u / Δ = (i k·û) / (-|k|²)
            let mut divu = ZERO;
            for a in 0..d {
                divu += I * self.k_odd[a][i] * coeffs[a][i];
            }
            *gi = -divu / self.k2[i];
        }
        let pu = (0..d)
            .map(|a| {
                let c: Vec<Complex64> = coeffs[a]
                    .iter()
                    .zip(&g)
                    .zip(&self.k_odd[a])
                    .map(|((v, gi), &k)| v - I * k * gi)
                    .collect();
                ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&c))
            })
            .collect();
        Ok((
            VectorField::new(pu)?,
            ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&g)),
        ))
    }

    /// `(Σ_k (1+|k|²)^s |f̂(k)|² |𝕋|)^{1/2}`; equals the L² norm at `s = 0`.
    pub fn sobolev_norm(&self, f: &ScalarField, s: f64) -> Result<f64, SpectralError> {
        self.check(f.grid())?;
        Ok(self.sobolev_norm_coeffs(&self.forward_raw(f.values()), s))
    }

    pub(crate) fn sobolev_norm_coeffs(&self, c: &[Complex64], s: f64) -> f64 {
        let sum: f64 = c
            .iter()
            .zip(&self.k2)
            .map(|(v, &k2)| (1.0 + k2).powf(s) * v.norm_sqr())
            .sum();
        (sum * self.grid.volume()).sqrt()
    }

    /// Zeroes every coefficient with some `|k_axis| > n_axis / 3`.
    pub fn dealias(&self, fhat: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.check(fhat.grid())?;
        let mut out = fhat.clone();
        self.truncate(out.coeffs_mut());
        Ok(out)
    }

    pub(crate) fn truncate(&self, c: &mut [Complex64]) {
        for (v, &inside) in c.iter_mut().zip(&self.in_band) {
            if !inside {
                *v = ZERO;
            }
        }
    }

    /// Band projection of the product `a·b`, free of aliasing for band-limited inputs.
    pub fn dealiased_product(
        &self,
        a: &ScalarField,
        b: &ScalarField,
    ) -> Result<ScalarField, SpectralError> {
        self.check(a.grid())?;
        self.check(b.grid())?;
        let ca = self.band_coeffs(a.values());
        let cb = self.band_coeffs(b.values());
        let [pa, pb]: [Vec<f64>; 2] = self.to_padded_band(&[&ca, &cb]).try_into().unwrap();
        let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let c = self.from_padded_band(&[&prod]).pop().unwrap();
        Ok(ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&c)))
    }

    /// Band projection of `φ³`, free of aliasing for band-limited `φ`.
    pub fn dealiased_cube(&self, phi: &ScalarField) -> Result<ScalarField, SpectralError> {
        self.check(phi.grid())?;
        let c = self.band_coeffs(phi.values());
        let p = self.to_padded_band(&[&c]).pop().unwrap();
        let cube: Vec<f64> = p.iter().map(|x| x * x * x).collect();
        let c = self.from_padded_band(&[&cube]).pop().unwrap();
        Ok(ScalarField::from_raw(self.grid.clone(), self.inverse_raw(&c)))
    }

    /// Coefficients of a real field projected onto the band.
    pub(crate) fn band_coeffs(&self, values: &[f64]) -> Vec<Complex64> {
        let mut c = self.forward_raw(values);
        self.truncate(&mut c);
        c
    }

    // ---- padded grid ------------------------------------------------------

    /// Values on the padded grid of band-limited coefficient arrays.
    ///
    /// Fields are transformed two at a time, packed as real and imaginary parts.
    pub(crate) fn to_padded_band(&self, fields: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let plen = self.padded.len();
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let mut buf = vec![ZERO; plen];
            for (b, &flat) in self.band.iter().enumerate() {
                let mut v = pair[0][flat];
                if let Some(second) = pair.get(1) {
                    v += I * second[flat];
                }
                buf[self.band_pad[b]] = v;
            }
            self.padded_fft.inverse(&mut buf);
            out.push(buf.iter().map(|c| c.re).collect());
            if pair.len() == 2 {
                out.push(buf.iter().map(|c| c.im).collect());
            }
        }
        out
    }

    /// Band-truncated coefficients (n-grid layout) of real padded-grid samples.
    pub(crate) fn from_padded_band(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let plen = self.padded.len();
        let scale = 1.0 / plen as f64;
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let mut buf: Vec<Complex64> = match pair {
                [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
                [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                _ => unreachable!(),
            };
            self.padded_fft.forward(&mut buf);
            let mut first = vec![ZERO; self.grid.len()];
            let mut second = vec![ZERO; self.grid.len()];
            for (b, &flat) in self.band.iter().enumerate() {
                let z = buf[self.band_pad[b]] * scale;
                if pair.len() == 2 {
                    let zn = buf[self.band_pad_neg[b]].conj() * scale;
                    first[flat] = 0.5 * (z + zn);
                    second[flat] = -0.5 * I * (z - zn);
                } else {
                    first[flat] = z;
                }
            }
            out.push(first);
            if pair.len() == 2 {
                out.push(second);
            }
        }
        out
    }

    /// Trigonometric interpolant of arbitrary coefficients on the padded grid.
    pub(crate) fn to_padded_full(&self, c: &[Complex64]) -> Vec<f64> {
        let plen = self.padded.len();
        let dim = self.grid.dim();
        let mut buf = vec![ZERO; plen];
        let mut idx = vec![0; dim];
        for (flat, &v) in c.iter().enumerate() {
            if v == ZERO {
                continue;
            }
            self.grid.unravel(flat, &mut idx);
            // Cartesian product of per-axis destinations.
            let mut dests: Vec<(usize, f64)> = vec![(0, 1.0)];
            for a in 0..dim {
                let stride = self.padded.strides()[a];
                dests = dests
                    .iter()
                    .flat_map(|&(off, w)| {
                        self.pad_map[a][idx[a]]
                            .iter()
                            .map(move |&(j, wj)| (off + j * stride, w * wj))
                    })
                    .collect();
            }
            for (d, w) in dests {
                buf[d] += v * w;
            }
        }
        self.padded_fft.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Samples of a real field interpolated onto the padded grid.
    pub fn interpolate_padded(&self, f: &ScalarField) -> Result<Vec<f64>, SpectralError> {
        self.check(f.grid())?;
        Ok(self.to_padded_full(&self.forward_raw(f.values())))
    }

    /// Trapezoid sum of padded-grid samples.
    pub(crate) fn padded_integral(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.padded.cell_volume()
    }

    /// Resamples onto another grid of the same period, keeping only modes inside
    /// the target's 2/3-rule band.
    pub fn resample(&self, f: &ScalarField, target: &Spectral) -> Result<ScalarField, SpectralError> {
        self.check(f.grid())?;
        if (target.grid.length() - self.grid.length()).abs() > 0.0 || target.grid.dim() != self.grid.dim() {
            return Err(SpectralError::GridMismatch);
        }
        let src = self.forward_raw(f.values());
        let mut dst = vec![ZERO; target.grid.len()];
        for &flat in &target.band {
            let k = target.grid.frequency(flat);
            let mut from = 0;
            let mut ok = true;
            for (a, &ka) in k.iter().enumerate() {
                let n = self.grid.shape()[a] as i64;
                if 2 * ka.abs() >= n {
                    ok = false;
                    break;
                }
                from += wrap_index(ka, n as usize) * self.grid.strides()[a];
            }
            if ok {
                dst[flat] = src[from];
            }
        }
        Ok(ScalarField::from_raw(target.grid.clone(), target.inverse_raw(&dst)))
    }
}

pub(crate) fn check_order(s: f64, allow_zero: bool) -> Result<(), SpectralError> {
    if !s.is_finite() || s < 0.0 || (!allow_zero && s == 0.0) {
        return Err(SpectralError::InvalidOrder(s));
    }
    Ok(())
}
