//! Initial-data presets.

use std::f64::consts::PI;

use qinsch::{ScalarField, Spectral, TorusGrid, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed used when the configuration asks for noise without naming one.
pub const DEFAULT_SEED: u64 = 20240917;

/// Smooth zero-mean noise with `max |noise| = 1`, limited to `|k| ≤ n/8`.
pub fn band_noise(grid: &TorusGrid, seed: u64) -> ScalarField {
    let sp = Spectral::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white = ScalarField::new(
        grid.clone(),
        (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("finite samples");
    let mut c = sp.forward(&white).expect("same grid");
    let scale = 2.0 * PI / grid.length();
    let kmax = (grid.shape()[0] / 8) as f64;
    for (flat, v) in c.coeffs_mut().iter_mut().enumerate() {
        let k = grid.frequency(flat);
        let k2: f64 = k.iter().map(|&x| (x as f64 * scale).powi(2)).sum();
        if k2 == 0.0 || k2.sqrt() > kmax * scale {
            *v = 0.0.into();
        }
    }
    let f = sp.inverse(&c).expect("same grid");
    let m = f.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    f.map(|v| v / m)
}

pub fn spinodal(grid: &TorusGrid, mean: f64, amp: f64, seed: u64) -> ScalarField {
    band_noise(grid, seed).map(|v| mean + amp * v)
}

/// `amplitude · cos(k x₁)`.
pub fn single_mode(grid: &TorusGrid, k: f64, amplitude: f64) -> ScalarField {
    let w = 2.0 * PI / grid.length();
    ScalarField::from_fn(grid, |x| amplitude * (k * w * x[0]).cos())
}

/// `0.1 cos x₁ + 0.05 cos x₂`, scaled to the period.
pub fn two_mode(grid: &TorusGrid) -> ScalarField {
    let w = 2.0 * PI / grid.length();
    ScalarField::from_fn(grid, |x| 0.1 * (w * x[0]).cos() + 0.05 * (w * x[1]).cos())
}

/// A band of phase +1 across the middle of the torus in `x₁`, projected onto
/// the dealiasing band.
pub fn tanh_stripe(grid: &TorusGrid, width: f64) -> ScalarField {
    let l = grid.length();
    let raw = ScalarField::from_fn(grid, |x| {
        ((0.25 * l - (x[0] - 0.5 * l).abs()) / (2f64.sqrt() * width)).tanh()
    });
    let sp = Spectral::new(grid);
    let c = sp.dealias(&sp.forward(&raw).expect("same grid")).expect("same grid");
    sp.inverse(&c).expect("same grid")
}

/// Taylor–Green vortex `amp·(sin x₁ cos x₂, -cos x₁ sin x₂[, 0])` (times `cos x₃` in 3D).
pub fn taylor_green(grid: &TorusGrid, amp: f64) -> VectorField {
    let w = 2.0 * PI / grid.length();
    let dim = grid.dim();
    VectorField::from_fn(grid, |x| {
        let z = if dim == 3 { (w * x[2]).cos() } else { 1.0 };
        let mut v = vec![
            amp * (w * x[0]).sin() * (w * x[1]).cos() * z,
            -amp * (w * x[0]).cos() * (w * x[1]).sin() * z,
        ];
        if dim == 3 {
            v.push(0.0);
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_seeded_normalized_and_mean_free() {
        let g = TorusGrid::square(2, 32).unwrap();
        let a = band_noise(&g, 7);
        let b = band_noise(&g, 7);
        assert_eq!(a, b);
        assert_ne!(a, band_noise(&g, 8));
        assert!(a.mean().abs() < 1e-15);
        let m = a.values().iter().fold(0.0f64, |x, v| x.max(v.abs()));
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        let g = TorusGrid::square(2, 16).unwrap();
        let sp = Spectral::new(&g);
        assert!(sp.div(&taylor_green(&g, 1.0)).unwrap().l2_norm() < 1e-12);
    }
}
