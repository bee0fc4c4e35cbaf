//! `apply_lk_inverse` against a dense per-mode solve in Cartesian components.

use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64 as C;
use proptest::prelude::*;
use qinsch::stepper::{apply_lk_inverse, LinearBlock, Stacked};
use qinsch::{PhysParams, ScalarField, Spectral, TorusGrid, VectorField};

const N: usize = 16;

fn mode(g: &TorusGrid, k: [i64; 2], c: C) -> ScalarField {
    ScalarField::from_fn(g, |x| {
        let arg = k[0] as f64 * x[0] + k[1] as f64 * x[1];
        (c * C::new(0.0, arg).exp()).re
    })
}

fn coeff(sp: &Spectral, f: &ScalarField, k: [i64; 2]) -> C {
    // A real field carries half the complex amplitude in the +k coefficient.
    2.0 * sp.forward(f).unwrap().coeff(&k)
}

/// Unknowns `(u₁, u₂, p, φ, μ)` for one nonzero mode `k`.
fn dense(p: &PhysParams, b: &LinearBlock, k: [i64; 2], rhs: [C; 5]) -> [C; 5] {
    let kv = [k[0] as f64, k[1] as f64];
    let k2 = kv[0] * kv[0] + kv[1] * kv[1];
    let i = C::new(0.0, 1.0);
    let re = |x: f64| C::new(x, 0.0);
    let cp = 1.0 - p.alpha() * b.phi_bar;
    let frac = k2.powf(p.s());
    let mut m = Matrix5::<C>::zeros();
    for a in 0..2 {
        for c in 0..2 {
            let diag = if a == c { b.rho_bar / b.h + b.eta_bar * k2 } else { 0.0 };
            m[(a, c)] = re(diag + b.eta_bar * kv[a] * kv[c] / 3.0);
        }
        m[(a, 2)] = i * kv[a] * cp;
        m[(a, 4)] = i * kv[a] * b.phi_bar;
        m[(2, a)] = i * kv[a];
        m[(3, a)] = i * kv[a] * b.phi_bar;
    }
    m[(2, 2)] = re(p.delta());
    m[(2, 4)] = re(p.alpha() * k2);
    m[(3, 3)] = re(1.0 / b.h);
    m[(3, 4)] = re(k2);
    m[(4, 2)] = re(-p.alpha());
    m[(4, 3)] = re(-(frac - 0.5 * p.kappa()));
    m[(4, 4)] = re(1.0);
    let x = m.lu().solve(&Vector5::from(rhs)).expect("nonsingular mode");
    [x[0], x[1], x[2], x[3], x[4]]
}

fn solve_mode(p: &PhysParams, b: &LinearBlock, k: [i64; 2], rhs: [C; 5]) -> [C; 5] {
    let g = TorusGrid::square(2, N).unwrap();
    let sp = Spectral::new(&g);
    let st = Stacked {
        u: VectorField::new(vec![mode(&g, k, rhs[0]), mode(&g, k, rhs[1])]).unwrap(),
        p: mode(&g, k, rhs[2]),
        phi: mode(&g, k, rhs[3]),
        mu: mode(&g, k, rhs[4]),
    };
    let x = apply_lk_inverse(&sp, p, b, &st).unwrap();
    [
        coeff(&sp, x.u.component(0), k),
        coeff(&sp, x.u.component(1), k),
        coeff(&sp, &x.p, k),
        coeff(&sp, &x.phi, k),
        coeff(&sp, &x.mu, k),
    ]
}

fn cplx() -> impl Strategy<Value = C> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_dense_per_mode_solve(
        k0 in -5i64..=5, k1 in -5i64..=5,
        eps in -0.9..0.0f64, nu in 0.5..3.0f64, s in 1.0..2.0f64, delta in prop_oneof![Just(0.0), 1e-6..1e-2f64],
        h in 1e-3..1e-1f64, rho_bar in 0.2..1.5f64, eta_bar in 0.2..3.0f64, phi_bar in -0.9..0.9f64,
        rhs in proptest::array::uniform5(cplx()),
    ) {
        prop_assume!(k0 != 0 || k1 != 0);
        let p = PhysParams::from_epsilon(eps).unwrap().with_nu(nu).unwrap().with_s(s).unwrap().with_delta(delta).unwrap();
        let b = LinearBlock { h, rho_bar, eta_bar, phi_bar };
        let got = solve_mode(&p, &b, [k0, k1], rhs);
        let want = dense(&p, &b, [k0, k1], rhs);
        let scale = want.iter().map(|c| c.norm()).fold(1.0, f64::max);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).norm() <= 1e-11 * scale, "{:?} vs {:?}", got, want);
        }
    }
}

#[test]
fn zero_rhs_gives_zero() {
    let g = TorusGrid::square(2, 8).unwrap();
    let sp = Spectral::new(&g);
    let z = ScalarField::zeros(&g);
    let st = Stacked {
        u: VectorField::zeros(&g),
        p: z.clone(),
        phi: z.clone(),
        mu: z,
    };
    let b = LinearBlock {
        h: 0.01,
        rho_bar: 0.75,
        eta_bar: 1.0,
        phi_bar: 0.1,
    };
    let x = apply_lk_inverse(&sp, &PhysParams::from_epsilon(-0.5).unwrap(), &b, &st).unwrap();
    assert_eq!(x.u.l2_norm() + x.p.l2_norm() + x.phi.l2_norm() + x.mu.l2_norm(), 0.0);
}

#[test]
fn momentum_only_mode_with_resting_phase() {
    // φ ≡ 0, ε = 0: û = f̂/(ρ̄/h + η̄|k|²) for a transverse forcing.
    let p = PhysParams::from_epsilon(0.0).unwrap();
    let b = LinearBlock {
        h: 0.01,
        rho_bar: 1.0,
        eta_bar: 1.0,
        phi_bar: 0.0,
    };
    let f = C::new(0.3, -0.2);
    let x = solve_mode(&p, &b, [0, 2], [f, C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)]);
    let want = f / (100.0 + 4.0);
    assert!((x[0] - want).norm() < 1e-13);
    assert!(x[1].norm() < 1e-13 && x[2].norm() < 1e-13);
}

#[test]
fn cahn_hilliard_only_multiplier() {
    let p = PhysParams::from_epsilon(0.0).unwrap().with_s(1.6).unwrap();
    let b = LinearBlock {
        h: 0.01,
        rho_bar: 1.0,
        eta_bar: 1.0,
        phi_bar: 0.0,
    };
    let z = C::new(0.0, 0.0);
    let x = solve_mode(&p, &b, [2, 0], [z, z, z, C::new(1.0, 0.0), z]);
    let want = 1.0 / (100.0 + 4.0 * (2f64.powf(3.2) - 0.5));
    assert!((x[3].re - want).abs() < 1e-13 && x[3].im.abs() < 1e-13);
    assert!((want - 1.0 / (100.0 + 4.0 * (9.18959 - 0.5))).abs() < 1e-8);
}

#[test]
fn mean_mode_is_a_pure_mass_update() {
    let g = TorusGrid::square(2, 8).unwrap();
    let sp = Spectral::new(&g);
    let p = PhysParams::from_epsilon(-0.5).unwrap();
    let b = LinearBlock {
        h: 0.02,
        rho_bar: 0.8,
        eta_bar: 1.3,
        phi_bar: 0.2,
    };
    let st = Stacked {
        u: VectorField::new(vec![ScalarField::constant(&g, 0.4), ScalarField::constant(&g, -0.1)]).unwrap(),
        p: ScalarField::constant(&g, 5.0),
        phi: ScalarField::constant(&g, 2.0),
        mu: ScalarField::constant(&g, 7.0),
    };
    let x = apply_lk_inverse(&sp, &p, &b, &st).unwrap();
    assert!((x.u.component(0).mean() - 0.02 * 0.4 / 0.8).abs() < 1e-15);
    assert!((x.u.component(1).mean() + 0.02 * 0.1 / 0.8).abs() < 1e-15);
    assert!((x.phi.mean() - 0.04).abs() < 1e-15);
    assert!(x.p.l2_norm() < 1e-15 && x.mu.l2_norm() < 1e-15);
}
