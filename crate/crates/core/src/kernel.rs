//! Galerkin residual evaluation and per-mode linear solves shared by the
//! quasi-incompressible stepper and the model H solver.
//!
//! Unknowns are band-limited coefficient arrays in the FFT layout of the base
//! grid. Nonlinear terms are evaluated on the padded grid and projected back
//! onto the band, so every inner product used by the energy balance is exact.

use num_complex::Complex64 as C64;

use crate::constitutive::PhysParams;
use crate::spectral::Spectral;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Band coefficients of `(u, φ, p₀, μ_p⁰)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Unknowns {
    pub u: Vec<Vec<C64>>,
    pub phi: Vec<C64>,
    pub p: Vec<C64>,
    pub mu: Vec<C64>,
}

impl Unknowns {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            u: vec![vec![ZERO; len]; dim],
            phi: vec![ZERO; len],
            p: vec![ZERO; len],
            mu: vec![ZERO; len],
        }
    }

    /// Largest relative change between two iterates, field by field.
    pub fn relative_update(&self, prev: &Unknowns) -> f64 {
        let norm = |a: &[C64]| a.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let diff = |a: &[C64], b: &[C64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>()
        };
        let u_norm: f64 = self.u.iter().map(|c| norm(c)).sum();
        let u_diff: f64 = self.u.iter().zip(&prev.u).map(|(a, b)| diff(a, b)).sum();
        let pairs = [
            (u_norm, u_diff),
            (norm(&self.phi), diff(&self.phi, &prev.phi)),
            (norm(&self.p), diff(&self.p, &prev.p)),
            (norm(&self.mu), diff(&self.mu, &prev.mu)),
        ];
        let scale = pairs.iter().map(|p| p.0).fold(0.0, f64::max).sqrt();
        let floor = (1e-6 * scale).max(1e-300);
        pairs
            .iter()
            .map(|&(n, d)| d.sqrt() / n.sqrt().max(floor))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        let ok = |a: &[C64]| a.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        self.u.iter().all(|c| ok(c)) && ok(&self.phi) && ok(&self.p) && ok(&self.mu)
    }
}

/// Right-hand side `ℱ` of the per-mode linear system, one entry per equation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Rhs {
    pub u: Vec<Vec<C64>>,
    /// Constraint row; zero during time stepping.
    pub p: Vec<C64>,
    pub phi: Vec<C64>,
    pub mu: Vec<C64>,
}

/// Spatial means that define the constant-coefficient operator `ℒ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBlock {
    pub h: f64,
    pub rho_bar: f64,
    pub eta_bar: f64,
    pub phi_bar: f64,
}

/// Optional forcing, as band coefficients.
#[derive(Debug, Clone, Default)]
pub(crate) struct Sources {
    pub u: Option<Vec<Vec<C64>>>,
    pub phi: Option<Vec<C64>>,
}

/// Data frozen at the old time level.
#[derive(Debug, Clone)]
pub(crate) struct Frozen {
    pub block: LinearBlock,
    pub phi_k: Vec<C64>,
    /// Padded samples of `ρ_k - ρ̄` and `η_k - η̄`.
    rho_fluct: Vec<f64>,
    eta_fluct: Vec<f64>,
    /// `P[ρ_k u_k]/h`.
    mom_const: Vec<Vec<C64>>,
}

impl Frozen {
    pub fn new(sp: &Spectral, p: &PhysParams, phi_k: &[C64], u_k: &[Vec<C64>], h: f64) -> Self {
        let mut inputs: Vec<&[C64]> = vec![phi_k];
        inputs.extend(u_k.iter().map(|c| c.as_slice()));
        let pads = sp.to_padded_band(&inputs);
        let phi_pad = &pads[0];
        let rho: Vec<f64> = phi_pad.iter().map(|&f| p.rho(f)).collect();
        let eta: Vec<f64> = phi_pad.iter().map(|&f| p.eta(f)).collect();
        let npad = rho.len() as f64;
        let rho_bar = rho.iter().sum::<f64>() / npad;
        let eta_bar = eta.iter().sum::<f64>() / npad;
        let momenta: Vec<Vec<f64>> = pads[1..]
            .iter()
            .map(|u| u.iter().zip(&rho).map(|(a, r)| a * r / h).collect())
            .collect();
        let refs: Vec<&[f64]> = momenta.iter().map(|m| m.as_slice()).collect();
        Self {
            block: LinearBlock {
                h,
                rho_bar,
                eta_bar,
                phi_bar: phi_k[0].re,
            },
            phi_k: phi_k.to_vec(),
            rho_fluct: rho.iter().map(|r| r - rho_bar).collect(),
            eta_fluct: eta.iter().map(|e| e - eta_bar).collect(),
            mom_const: sp.from_padded_band(&refs),
        }
    }
}

fn derivative(sp: &Spectral, c: &[C64], axis: usize) -> Vec<C64> {
    c.iter()
        .zip(sp.k_odd(axis))
        .map(|(v, &k)| I * k * v)
        .collect()
}

fn divergence(sp: &Spectral, comps: &[Vec<C64>]) -> Vec<C64> {
    let mut out = vec![ZERO; comps[0].len()];
    for (a, c) in comps.iter().enumerate() {
        for ((o, v), &k) in out.iter_mut().zip(c).zip(sp.k_odd(a)) {
            *o += I * k * v;
        }
    }
    out
}

/// Evaluates `ℱ(ω)`: every term of the discrete equations that is not in `ℒ`.
pub(crate) fn evaluate(
    sp: &Spectral,
    p: &PhysParams,
    fr: &Frozen,
    w: &Unknowns,
    src: &Sources,
) -> Rhs {
    let d = w.u.len();
    let LinearBlock { h, phi_bar, .. } = fr.block;
    let eps = p.epsilon();
    let alpha = p.alpha();
    let damp = -p.momentum_damping_coeff();

    // Stage 1: values and first derivatives on the padded grid.
    let mut inputs: Vec<Vec<C64>> = Vec::with_capacity(3 + d * (d + 4));
    inputs.extend(w.u.iter().cloned());
    inputs.push(w.phi.clone());
    inputs.push(w.p.clone());
    for a in 0..d {
        for j in 0..d {
            inputs.push(derivative(sp, &w.u[a], j));
        }
    }
    for j in 0..d {
        inputs.push(derivative(sp, &w.phi, j));
        inputs.push(derivative(sp, &w.p, j));
        inputs.push(derivative(sp, &w.mu, j));
    }
    let refs: Vec<&[C64]> = inputs.iter().map(|v| v.as_slice()).collect();
    let pad = sp.to_padded_band(&refs);
    let u = &pad[..d];
    let phi = &pad[d];
    let pr = &pad[d + 1];
    let du = |a: usize, j: usize| &pad[d + 2 + a * d + j];
    let base = d + 2 + d * d;
    let dphi = |j: usize| &pad[base + 3 * j];
    let dp = |j: usize| &pad[base + 3 * j + 1];
    let dmu = |j: usize| &pad[base + 3 * j + 2];
    let npad = phi.len();

    // Stage 2: band projection of φu, for transport and the band divergence of ρu.
    let phi_u: Vec<Vec<f64>> = u
        .iter()
        .map(|ua| ua.iter().zip(phi).map(|(x, f)| x * f).collect())
        .collect();
    let refs: Vec<&[f64]> = phi_u.iter().map(|v| v.as_slice()).collect();
    let p_phi_u = sp.from_padded_band(&refs);
    let div_phi_u = divergence(sp, &p_phi_u);
    let div_u = divergence(sp, &w.u);
    let d_band_c: Vec<C64> = div_phi_u
        .iter()
        .zip(&div_u)
        .map(|(a, b)| 0.5 * eps * a + (1.0 + 0.5 * eps) * b)
        .collect();
    let d_band = sp.to_padded_band(&[&d_band_c]).pop().unwrap();

    // Stage 3: pointwise momentum terms, stress fluctuation and cube.
    let mut mom = vec![vec![0.0; npad]; d];
    let n_sym = d * (d + 1) / 2;
    let mut tau = vec![vec![0.0; npad]; n_sym];
    let mut cube = vec![0.0; npad];
    for q in 0..npad {
        let f = phi[q];
        let rho = p.rho(f);
        let mut div = 0.0;
        let mut grad_rho_u = 0.0;
        for j in 0..d {
            div += du(j, j)[q];
            grad_rho_u += dphi(j)[q] * u[j][q];
        }
        let d_full = 0.5 * eps * grad_rho_u + rho * div;
        let skew = 0.5 * (d_full - d_band[q]);
        let df = f - phi_bar;
        for a in 0..d {
            let mut adv = 0.0;
            for j in 0..d {
                adv += u[j][q] * du(a, j)[q];
            }
            mom[a][q] = -fr.rho_fluct[q] * u[a][q] / h - rho * adv - skew * u[a][q]
                + alpha * df * dp(a)[q]
                - df * dmu(a)[q]
                + damp * pr[q] * u[a][q];
        }
        let e = fr.eta_fluct[q];
        let mut t = 0;
        for i in 0..d {
            for j in i..d {
                let mut v = du(i, j)[q] + du(j, i)[q];
                if i == j {
                    v -= 2.0 / 3.0 * div;
                }
                tau[t][q] = e * v;
                t += 1;
            }
        }
        cube[q] = f * f * f;
    }
    let mut outs: Vec<&[f64]> = mom.iter().map(|v| v.as_slice()).collect();
    outs.extend(tau.iter().map(|v| v.as_slice()));
    outs.push(&cube);
    let proj = sp.from_padded_band(&outs);
    let sym_index = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * d - i * (i + 1) / 2 + j
    };

    let len = w.phi.len();
    let mut rhs_u = Vec::with_capacity(d);
    for a in 0..d {
        let mut f = vec![ZERO; len];
        for &flat in sp.band() {
            let mut v = fr.mom_const[a][flat] + proj[a][flat];
            for j in 0..d {
                v += I * sp.k_odd(j)[flat] * proj[d + sym_index(a, j)][flat];
            }
            f[flat] = v;
        }
        if let Some(s) = &src.u {
            for &flat in sp.band() {
                f[flat] += s[a][flat];
            }
        }
        rhs_u.push(f);
    }
    let cube_c = &proj[d + n_sym];
    let half_kappa = 0.5 * p.kappa();
    let mut rhs_phi = vec![ZERO; len];
    let mut rhs_mu = vec![ZERO; len];
    for &flat in sp.band() {
        rhs_phi[flat] =
            fr.phi_k[flat] / h - div_phi_u[flat] + phi_bar * div_u[flat];
        rhs_mu[flat] = cube_c[flat] - half_kappa * fr.phi_k[flat];
    }
    if let Some(s) = &src.phi {
        for &flat in sp.band() {
            rhs_phi[flat] += s[flat];
        }
    }
    Rhs {
        u: rhs_u,
        p: vec![ZERO; len],
        phi: rhs_phi,
        mu: rhs_mu,
    }
}

/// Mean of `P[φ³]` from band coefficients.
pub(crate) fn mean_cube(sp: &Spectral, phi: &[C64]) -> f64 {
    let pad = sp.to_padded_band(&[phi]).pop().unwrap();
    pad.iter().map(|f| f * f * f).sum::<f64>() / pad.len() as f64
}

/// Gaussian elimination with partial pivoting on a small dense system.
pub(crate) fn solve_dense<const N: usize>(mut m: [[C64; N]; N], mut b: [C64; N]) -> [C64; N] {
    for col in 0..N {
        let piv = (col..N)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .unwrap();
        assert!(m[piv][col].norm() > 0.0, "singular per-mode block");
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            if f == ZERO {
                continue;
            }
            for c in col..N {
                let v = m[col][c];
                m[row][c] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [ZERO; N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for c in row + 1..N {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// The per-mode matrix acting on `(k̂·û, p̂, φ̂, μ̂)` for a nonzero wavevector.
pub(crate) fn longitudinal_matrix(
    p: &PhysParams,
    b: &LinearBlock,
    k2: f64,
    frac: f64,
) -> [[C64; 4]; 4] {
    let kk = k2.sqrt();
    let alpha = p.alpha();
    let cp = 1.0 - alpha * b.phi_bar;
    let a = b.rho_bar / b.h + 4.0 / 3.0 * b.eta_bar * k2;
    let bb = frac - 0.5 * p.kappa();
    let r = |x: f64| C64::new(x, 0.0);
    let ik = I * kk;
    [
        [r(a), ik * cp, ZERO, ik * b.phi_bar],
        [ik, r(p.delta()), ZERO, r(alpha * k2)],
        [ik * b.phi_bar, ZERO, r(1.0 / b.h), r(k2)],
        [ZERO, r(-alpha), r(-bb), r(1.0)],
    ]
}

/// Applies `ℒ⁻¹` mode by mode. `frac[flat] = |k|^{2s}`.
pub(crate) fn solve_quasi(
    sp: &Spectral,
    p: &PhysParams,
    b: &LinearBlock,
    frac: &[f64],
    rhs: &Rhs,
) -> Unknowns {
    let d = rhs.u.len();
    let len = rhs.phi.len();
    let mut out = Unknowns::zeros(d, len);
    let k2s = sp.k2();
    let mut khat = vec![0.0; d];
    for &flat in sp.band() {
        let k2 = k2s[flat];
        if k2 == 0.0 {
            for a in 0..d {
                out.u[a][flat] = b.h * rhs.u[a][flat] / b.rho_bar;
            }
            out.phi[flat] = b.h * rhs.phi[flat];
            continue;
        }
        let kk = k2.sqrt();
        let mut fa = ZERO;
        for a in 0..d {
            khat[a] = sp.k_odd(a)[flat] / kk;
            fa += khat[a] * rhs.u[a][flat];
        }
        let m = longitudinal_matrix(p, b, k2, frac[flat]);
        let x = solve_dense(m, [fa, rhs.p[flat], rhs.phi[flat], rhs.mu[flat]]);
        let trans = b.rho_bar / b.h + b.eta_bar * k2;
        for a in 0..d {
            out.u[a][flat] = (rhs.u[a][flat] - khat[a] * fa) / trans + khat[a] * x[0];
        }
        out.p[flat] = x[1];
        out.phi[flat] = x[2];
        out.mu[flat] = x[3];
    }
    out
}

/// Leray-projected solve for matched densities: `div u = 0`, no pressure damping.
pub(crate) fn solve_incompressible(
    sp: &Spectral,
    p: &PhysParams,
    b: &LinearBlock,
    frac: &[f64],
    rhs: &Rhs,
) -> Unknowns {
    let d = rhs.u.len();
    let len = rhs.phi.len();
    let mut out = Unknowns::zeros(d, len);
    let k2s = sp.k2();
    let half_kappa = 0.5 * p.kappa();
    let mut khat = vec![0.0; d];
    for &flat in sp.band() {
        let k2 = k2s[flat];
        if k2 == 0.0 {
            for a in 0..d {
                out.u[a][flat] = b.h * rhs.u[a][flat] / b.rho_bar;
            }
            out.phi[flat] = b.h * rhs.phi[flat];
            continue;
        }
        let kk = k2.sqrt();
        let mut fa = ZERO;
        for a in 0..d {
            khat[a] = sp.k_odd(a)[flat] / kk;
            fa += khat[a] * rhs.u[a][flat];
        }
        let visc = b.rho_bar / b.h + b.eta_bar * k2;
        for a in 0..d {
            out.u[a][flat] = (rhs.u[a][flat] - khat[a] * fa) / visc;
        }
        let bb = frac[flat] - half_kappa;
        let phi = (rhs.phi[flat] - k2 * rhs.mu[flat]) / (1.0 / b.h + k2 * bb);
        let mu = rhs.mu[flat] + bb * phi;
        out.phi[flat] = phi;
        out.mu[flat] = mu;
        out.p[flat] = fa / (I * kk) - b.phi_bar * mu;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solver_matches_hand_solution() {
        let r = |x: f64| C64::new(x, 0.0);
        let m = [[r(0.0), r(2.0)], [r(3.0), r(1.0)]];
        let x = solve_dense(m, [r(4.0), r(5.0)]);
        assert!((x[0] - r(1.0)).norm() < 1e-15);
        assert!((x[1] - r(2.0)).norm() < 1e-15);
    }
}
