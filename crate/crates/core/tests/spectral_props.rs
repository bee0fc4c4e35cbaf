use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use qinsch::grid::signed_index;
use qinsch::{ScalarField, Spectral, TorusGrid, VectorField};

const N: usize = 16;

fn field(vals: Vec<f64>) -> ScalarField {
    ScalarField::new(TorusGrid::square(2, N).unwrap(), vals).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, N * N)
}

/// `Σ (1+|k|²)^s |f̂(k)|² |𝕋|` from a direct O(N⁴) DFT.
fn sobolev_by_dense_dft(f: &ScalarField, s: f64) -> f64 {
    let v = f.values();
    let mut acc = 0.0;
    for a in 0..N {
        for b in 0..N {
            let (k0, k1) = (signed_index(a, N) as f64, signed_index(b, N) as f64);
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..N {
                for j in 0..N {
                    let arg = -2.0 * PI * (a * i + b * j) as f64 / N as f64;
                    re += v[i * N + j] * arg.cos();
                    im += v[i * N + j] * arg.sin();
                }
            }
            let c2 = (re * re + im * im) / (N * N * N * N) as f64;
            acc += (1.0 + k0 * k0 + k1 * k1).powf(s) * c2;
        }
    }
    (acc * (2.0 * PI).powi(2)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval(v in values()) {
        let f = field(v);
        let sp = Spectral::new(f.grid());
        let spec: f64 = sp.forward(&f).unwrap().coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * f.grid().volume();
        let phys: f64 = f.values().iter().map(|x| x * x).sum::<f64>() * f.grid().cell_volume();
        prop_assert!((spec - phys).abs() <= 1e-10 * phys);
    }

    #[test]
    fn forward_inverse_round_trip(v in values()) {
        let f = field(v);
        let sp = Spectral::new(f.grid());
        let back = sp.inverse(&sp.forward(&f).unwrap()).unwrap();
        prop_assert!(back.l2_distance(&f).unwrap() <= 1e-13 * f.l2_norm().max(1.0));
        prop_assert!(sp.forward(&f).unwrap().hermitian_defect() < 1e-14);
    }

    #[test]
    fn sobolev_norm_matches_dense_dft(v in values(), s in 0.0..2.5f64) {
        let f = field(v);
        let sp = Spectral::new(f.grid());
        let want = sobolev_by_dense_dft(&f, s);
        prop_assert!((sp.sobolev_norm(&f, s).unwrap() - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn helmholtz_splits_orthogonally(a in values(), b in values()) {
        let u = VectorField::new(vec![field(a), field(b)]).unwrap();
        let sp = Spectral::new(u.grid());
        let u = VectorField::new(u.components().iter().map(|c| sp.inverse(&sp.dealias(&sp.forward(c).unwrap()).unwrap()).unwrap()).collect()).unwrap();
        let (pu, g) = sp.helmholtz(&u).unwrap();
        let grad = sp.grad(&g).unwrap();
        let scale = u.l2_norm().max(1e-300);
        prop_assert!(pu.axpy(1.0, &grad).unwrap().l2_distance(&u).unwrap() <= 1e-12 * scale);
        prop_assert!(sp.div(&pu).unwrap().l2_norm() <= 1e-11 * scale);
        let inner: f64 = pu.components().iter().zip(grad.components())
            .map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| p * q).sum::<f64>())
            .sum::<f64>() * u.grid().cell_volume();
        prop_assert!(inner.abs() <= 1e-11 * scale * scale);
        prop_assert!(g.mean().abs() <= 1e-14);
    }

    #[test]
    fn fractional_powers_compose(v in values(), a in 0.1..1.2f64, b in 0.1..1.2f64) {
        let f = field(v);
        let sp = Spectral::new(f.grid());
        let f = sp.inverse(&sp.dealias(&sp.forward(&f).unwrap()).unwrap()).unwrap();
        let two = sp.frac_laplacian(&sp.frac_laplacian(&f, a).unwrap(), b).unwrap();
        let one = sp.frac_laplacian(&f, a + b).unwrap();
        prop_assert!(two.l2_distance(&one).unwrap() <= 1e-10 * one.l2_norm().max(1e-300));
    }

    #[test]
    fn inverse_laplacian_inverts_laplacian(v in values()) {
        let f = field(v);
        let f = f.map(|x| x - f.mean());
        let sp = Spectral::new(f.grid());
        let g = sp.inv_laplacian_zero_mean(&f).unwrap();
        let lap = sp.div(&sp.grad(&g).unwrap()).unwrap();
        // The Nyquist row carries no derivative; compare in the dealiased band.
        let fb = sp.inverse(&sp.dealias(&sp.forward(&f).unwrap()).unwrap()).unwrap();
        let lb = sp.inverse(&sp.dealias(&sp.forward(&lap).unwrap()).unwrap()).unwrap();
        prop_assert!(lb.l2_distance(&fb).unwrap() <= 1e-12 * f.l2_norm().max(1.0));
    }
}

#[test]
fn sobolev_of_single_mode() {
    let g = TorusGrid::square(2, 16).unwrap();
    let sp = Spectral::new(&g);
    let f = ScalarField::from_fn(&g, |x| (3.0 * x[1]).sin());
    assert_relative_eq!(
        sp.sobolev_norm(&f, 1.5).unwrap(),
        10f64.powf(0.75) * 2.0 * PI / 2f64.sqrt(),
        max_relative = 1e-13
    );
}
