//! Physical parameters, constitutive closures, energy and dissipation.
//!
//! All integrals of nonlinear quantities are trapezoid sums on the padded grid
//! of the [`Spectral`] context. For band-limited fields these are exact, and they
//! are the same sums the time stepper uses, so the discrete energy balance
//! closes to round-off.

use thiserror::Error;

use crate::field::{ScalarField, TensorField, VectorField};
use crate::spectral::Spectral;
use crate::SpectralError;

/// Lower clamp applied to the affine viscosity.
pub const ETA_MIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("epsilon must lie in (-1, 0], got {0}")]
    Epsilon(f64),
    #[error("alpha must lie in [0, 1), got {0}")]
    Alpha(f64),
    #[error("viscosity ratio nu must be positive, got {0}")]
    Nu(f64),
    #[error("kappa must be positive, got {0}")]
    Kappa(f64),
    #[error("fractional order s must be >= 1, got {0}")]
    Order(f64),
    #[error("delta must be non-negative, got {0}")]
    Delta(f64),
}

/// Density contrast, viscosity ratio and free-energy parameters.
///
/// `alpha` and `zeta` are always derived from `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    epsilon: f64,
    alpha: f64,
    zeta: f64,
    nu: f64,
    kappa: f64,
    s: f64,
    delta: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self::from_epsilon(0.0).expect("defaults are valid")
    }
}

impl PhysParams {
    pub const DEFAULT_NU: f64 = 1.0;
    pub const DEFAULT_KAPPA: f64 = 1.0;
    pub const DEFAULT_S: f64 = 1.6;
    pub const DEFAULT_DELTA: f64 = 1e-6;

    /// Parameters with relative density difference `epsilon` and default
    /// `nu = 1`, `kappa = 1`, `s = 1.6`, `delta = 1e-6`.
    pub fn from_epsilon(epsilon: f64) -> Result<Self, ParamError> {
        if !(epsilon.is_finite() && epsilon > -1.0 && epsilon <= 0.0) {
            return Err(ParamError::Epsilon(epsilon));
        }
        // -0.0 would make alpha = +0.0 but 1/alpha signs awkward downstream.
        let epsilon = if epsilon == 0.0 { 0.0 } else { epsilon };
        let alpha = -epsilon / (2.0 + epsilon);
        Ok(Self {
            epsilon,
            alpha: if alpha == 0.0 { 0.0 } else { alpha },
            zeta: 1.0 + alpha,
            nu: Self::DEFAULT_NU,
            kappa: Self::DEFAULT_KAPPA,
            s: Self::DEFAULT_S,
            delta: Self::DEFAULT_DELTA,
        })
    }

    /// Same as [`from_epsilon`](Self::from_epsilon) with `epsilon = -2α/(1+α)`.
    pub fn from_alpha(alpha: f64) -> Result<Self, ParamError> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(ParamError::Alpha(alpha));
        }
        Self::from_epsilon(-2.0 * alpha / (1.0 + alpha))
    }

    pub fn with_nu(mut self, nu: f64) -> Result<Self, ParamError> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(ParamError::Nu(nu));
        }
        self.nu = nu;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self, ParamError> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(ParamError::Kappa(kappa));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn with_s(mut self, s: f64) -> Result<Self, ParamError> {
        if !(s.is_finite() && s >= 1.0) {
            return Err(ParamError::Order(s));
        }
        self.s = s;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self, ParamError> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(ParamError::Delta(delta));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True when `s <= 3/2`: runnable, but outside the regime where the
    /// existence and limit estimates are known to hold.
    pub fn outside_analysis_hypotheses(&self) -> bool {
        self.s <= 1.5
    }

    /// `εδ/(2α)` in the regular form `-δ/(1+α)`.
    pub fn mass_source_coeff(&self) -> f64 {
        -self.delta / (1.0 + self.alpha)
    }

    /// `εδ/(4α)` in the regular form `-δ/(2(1+α))`.
    pub fn momentum_damping_coeff(&self) -> f64 {
        -self.delta / (2.0 * (1.0 + self.alpha))
    }

    /// Pointwise density `ρ(φ) = (ε/2)φ + ε/2 + 1`.
    pub fn rho(&self, phi: f64) -> f64 {
        0.5 * self.epsilon * phi + 0.5 * self.epsilon + 1.0
    }

    /// Pointwise affine viscosity before clamping.
    pub fn eta_affine(&self, phi: f64) -> f64 {
        0.5 * (self.nu - 1.0) * phi + 0.5 * (self.nu + 1.0)
    }

    pub fn eta(&self, phi: f64) -> f64 {
        self.eta_affine(phi).max(ETA_MIN)
    }

    pub fn potential(&self) -> Potential {
        Potential { kappa: self.kappa }
    }
}

/// Quartic double well `F = Φ - (κ/2)φ²` with convex part `Φ = φ⁴/4 + 1/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub kappa: f64,
}

impl Potential {
    pub fn convex(&self, phi: f64) -> f64 {
        0.25 * phi.powi(4) + 0.25
    }
    pub fn convex_prime(&self, phi: f64) -> f64 {
        phi * phi * phi
    }
    pub fn convex_second(&self, phi: f64) -> f64 {
        3.0 * phi * phi
    }
    pub fn f(&self, phi: f64) -> f64 {
        self.convex(phi) - 0.5 * self.kappa * phi * phi
    }
    pub fn f_prime(&self, phi: f64) -> f64 {
        self.convex_prime(phi) - self.kappa * phi
    }
}

/// Density field with its companion `ζρ = 1 - αφ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub rho: ScalarField,
    pub zeta_rho: ScalarField,
    /// Set when some sample has `ρ <= 0`.
    pub nonpositive: bool,
}

pub fn density(phi: &ScalarField, p: &PhysParams) -> Density {
    let rho = phi.map(|v| p.rho(v));
    let zeta_rho = phi.map(|v| 1.0 - p.alpha * v);
    let nonpositive = rho.min() <= 0.0;
    Density {
        rho,
        zeta_rho,
        nonpositive,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Viscosity {
    pub eta: ScalarField,
    /// Number of samples raised to [`ETA_MIN`].
    pub clamped: usize,
}

pub fn viscosity(phi: &ScalarField, p: &PhysParams) -> Viscosity {
    let clamped = phi
        .values()
        .iter()
        .filter(|&&v| p.eta_affine(v) < ETA_MIN)
        .count();
    Viscosity {
        eta: phi.map(|v| p.eta(v)),
        clamped,
    }
}

/// Newtonian stress `2η(φ)𝔻u - (2/3)η(φ)(div u)I` from a velocity gradient.
///
/// `grad_u` may be the full gradient or its symmetric part; only the
/// symmetric part and the trace enter. The 2/3 coefficient is used in every
/// dimension.
pub fn stress(
    phi: &ScalarField,
    grad_u: &TensorField,
    p: &PhysParams,
) -> Result<TensorField, SpectralError> {
    phi.check_grid(grad_u.grid())?;
    let d = grad_u.dim();
    let eta = viscosity(phi, p).eta;
    let div = grad_u.trace();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let vals = (0..phi.values().len())
                .map(|q| {
                    let sym = 0.5 * (grad_u.entry(i, j).values()[q] + grad_u.entry(j, i).values()[q]);
                    let e = eta.values()[q];
                    let iso = if i == j { 2.0 / 3.0 * e * div.values()[q] } else { 0.0 };
                    2.0 * e * sym - iso
                })
                .collect();
            entries.push(ScalarField::from_raw(phi.grid().clone(), vals));
        }
    }
    TensorField::new(d, entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalPotential {
    /// `μ = F'(φ) + Λ^{2s}φ`, cubic term dealiased.
    pub mu: ScalarField,
    /// `|𝕋|⁻¹∫F'(φ)dx`.
    pub mean: f64,
}

pub fn chemical_potential(
    sp: &Spectral,
    phi: &ScalarField,
    p: &PhysParams,
) -> Result<ChemicalPotential, SpectralError> {
    let cube = sp.dealiased_cube(phi)?;
    let frac = sp.frac_laplacian(phi, p.s)?;
    let fprime = cube.axpy(-p.kappa, phi)?;
    let mean = fprime.mean();
    Ok(ChemicalPotential {
        mu: fprime.axpy(1.0, &frac)?,
        mean,
    })
}

/// Terms of the total energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    /// `∫½ρ|u|²`
    pub kinetic: f64,
    /// `∫F(φ)`
    pub potential: f64,
    /// `½‖Λ^s φ‖²`
    pub fractional: f64,
    pub total: f64,
}

pub fn total_energy(
    sp: &Spectral,
    u: &VectorField,
    phi: &ScalarField,
    p: &PhysParams,
) -> Result<EnergyReport, SpectralError> {
    phi.check_grid(sp.grid())?;
    phi.check_grid(u.grid())?;
    let phi_c = sp.forward_raw(phi.values());
    let phi_pad = sp.to_padded_full(&phi_c);
    let mut speed2 = vec![0.0; phi_pad.len()];
    for comp in u.components() {
        let up = sp.to_padded_full(&sp.forward_raw(comp.values()));
        for (s, v) in speed2.iter_mut().zip(&up) {
            *s += v * v;
        }
    }
    let kinetic_density: Vec<f64> = phi_pad
        .iter()
        .zip(&speed2)
        .map(|(&f, &u2)| 0.5 * p.rho(f) * u2)
        .collect();
    let pot = p.potential();
    let f_density: Vec<f64> = phi_pad.iter().map(|&f| pot.f(f)).collect();
    let kinetic = sp.padded_integral(&kinetic_density);
    let potential = sp.padded_integral(&f_density);
    let fractional = 0.5 * fractional_seminorm_sq(sp, &phi_c, p.s);
    Ok(EnergyReport {
        kinetic,
        potential,
        fractional,
        total: kinetic + potential + fractional,
    })
}

/// `‖Λ^s f‖²` from Fourier coefficients.
pub(crate) fn fractional_seminorm_sq(sp: &Spectral, c: &[num_complex::Complex64], s: f64) -> f64 {
    let sum: f64 = c
        .iter()
        .enumerate()
        .map(|(i, v)| sp.frac_symbol(i, s) * v.norm_sqr())
        .sum();
    sum * sp.grid().volume()
}

/// Viscous, chemical and pressure-damping dissipation rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dissipation {
    /// `∫(2η𝔻u:𝔻u - (2/3)η(div u)²)`
    pub visc: f64,
    /// `‖∇μ_p⁰‖²`
    pub mu: f64,
    /// `δ‖p₀‖²`
    pub pressure: f64,
}

impl Dissipation {
    pub fn sum(&self) -> f64 {
        self.visc + self.mu + self.pressure
    }
}

/// Dissipation with viscosity evaluated at `phi_eta`.
pub fn dissipation(
    sp: &Spectral,
    u: &VectorField,
    phi_eta: &ScalarField,
    mu_p0: &ScalarField,
    p0: &ScalarField,
    p: &PhysParams,
) -> Result<Dissipation, SpectralError> {
    for f in [phi_eta, mu_p0, p0] {
        f.check_grid(sp.grid())?;
    }
    phi_eta.check_grid(u.grid())?;
    let d = u.dim();
    let eta: Vec<f64> = sp
        .to_padded_full(&sp.forward_raw(phi_eta.values()))
        .into_iter()
        .map(|f| p.eta(f))
        .collect();
    let coeffs: Vec<_> = u.components().iter().map(|c| sp.forward_raw(c.values())).collect();
    let mut grads = Vec::with_capacity(d * d);
    for c in &coeffs {
        for j in 0..d {
            let dc: Vec<_> = c
                .iter()
                .zip(sp.k_odd(j))
                .map(|(v, &k)| num_complex::Complex64::new(0.0, k) * v)
                .collect();
            grads.push(sp.to_padded_full(&dc));
        }
    }
    let visc_density: Vec<f64> = (0..eta.len())
        .map(|q| {
            let mut dd = 0.0;
            let mut div = 0.0;
            for i in 0..d {
                div += grads[i * d + i][q];
                for j in 0..d {
                    let s = 0.5 * (grads[i * d + j][q] + grads[j * d + i][q]);
                    dd += s * s;
                }
            }
            eta[q] * (2.0 * dd - 2.0 / 3.0 * div * div)
        })
        .collect();
    let mu_c = sp.forward_raw(mu_p0.values());
    let grad_mu_sq: f64 = mu_c
        .iter()
        .zip(sp.k2())
        .map(|(v, &k2)| k2 * v.norm_sqr())
        .sum::<f64>()
        * sp.grid().volume();
    Ok(Dissipation {
        visc: sp.padded_integral(&visc_density),
        mu: grad_mu_sq,
        pressure: p.delta * p0.l2_norm().powi(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;

    fn sp(n: usize) -> Spectral {
        Spectral::new(&TorusGrid::square(2, n).unwrap())
    }

    #[test]
    fn derived_ratios() {
        let p = PhysParams::from_epsilon(-0.5).unwrap();
        assert!((p.alpha() - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.zeta() - 4.0 / 3.0).abs() < 1e-15);
        let q = PhysParams::from_alpha(1.0 / 3.0).unwrap();
        assert!((q.epsilon() + 0.5).abs() < 1e-15);
        let z = PhysParams::from_epsilon(0.0).unwrap();
        assert_eq!(z.alpha(), 0.0);
        assert_eq!(z.zeta(), 1.0);
        assert!(PhysParams::from_epsilon(-1.0).is_err());
        assert!(PhysParams::from_epsilon(0.1).is_err());
        assert!(PhysParams::from_alpha(1.0).is_err());
        assert!(z.with_s(0.9).is_err());
        assert!(z.with_s(1.0).unwrap().outside_analysis_hypotheses());
        assert!(!z.outside_analysis_hypotheses());
    }

    #[test]
    fn regular_delta_coefficients_match_singular_forms() {
        let p = PhysParams::from_epsilon(-0.3).unwrap().with_delta(0.2).unwrap();
        let (e, a, d) = (p.epsilon(), p.alpha(), p.delta());
        assert!((p.mass_source_coeff() - e * d / (2.0 * a)).abs() < 1e-15);
        assert!((p.momentum_damping_coeff() - e * d / (4.0 * a)).abs() < 1e-15);
        let m = PhysParams::from_epsilon(0.0).unwrap();
        assert!(m.mass_source_coeff().is_finite());
    }

    #[test]
    fn density_examples() {
        let g = TorusGrid::square(2, 8).unwrap();
        let p = PhysParams::from_epsilon(-0.5).unwrap();
        let d = density(&ScalarField::constant(&g, 1.0), &p);
        assert!(d.rho.values().iter().all(|&r| r == 0.5));
        let d = density(&ScalarField::constant(&g, -1.0), &p);
        assert!(d.rho.values().iter().all(|&r| r == 1.0));
        let d = density(&ScalarField::constant(&g, 0.0), &p);
        assert!(d.rho.values().iter().all(|&r| r == 0.75));
        for (r, z) in d.rho.values().iter().zip(d.zeta_rho.values()) {
            assert!((p.zeta() * r - z).abs() < 1e-15);
        }
        assert!(!d.nonpositive);
        let far = density(&ScalarField::constant(&g, 4.0), &p);
        assert!(far.nonpositive);
    }

    #[test]
    fn viscosity_examples_and_clamp() {
        let g = TorusGrid::square(2, 8).unwrap();
        let p = PhysParams::from_epsilon(0.0).unwrap().with_nu(2.0).unwrap();
        for (phi, eta) in [(1.0, 2.0), (-1.0, 1.0), (0.0, 1.5)] {
            let v = viscosity(&ScalarField::constant(&g, phi), &p);
            assert!(v.eta.values().iter().all(|&e| e == eta));
            assert_eq!(v.clamped, 0);
        }
        let v = viscosity(&ScalarField::constant(&g, -5.0), &p);
        assert_eq!(v.clamped, g.len());
        assert!(v.eta.values().iter().all(|&e| e == ETA_MIN));
    }

    #[test]
    fn stress_examples() {
        let s = sp(16);
        let g = s.grid().clone();
        let p = PhysParams::from_epsilon(0.0).unwrap().with_nu(2.0).unwrap();
        let phi = ScalarField::zeros(&g);

        let zero = s.velocity_gradient(&VectorField::zeros(&g)).unwrap();
        let st = stress(&phi, &zero, &p).unwrap();
        assert!(st.entries().iter().all(|e| e.l2_norm() == 0.0));

        let u = VectorField::from_fn(&g, |x| vec![x[1].sin(), 0.0]);
        let st = stress(&phi, &s.sym_grad(&u).unwrap(), &p).unwrap();
        let want = ScalarField::from_fn(&g, |x| 1.5 * x[1].cos());
        assert!(st.entry(0, 1).l2_distance(&want).unwrap() < 1e-12);
        assert!(st.entry(1, 0).l2_distance(&want).unwrap() < 1e-12);
        assert!(st.entry(0, 0).l2_norm() < 1e-12 && st.entry(1, 1).l2_norm() < 1e-12);

        let u = VectorField::from_fn(&g, |x| vec![x[0].sin(), 0.0]);
        let st = stress(&phi, &s.velocity_gradient(&u).unwrap(), &p).unwrap();
        let s11 = ScalarField::from_fn(&g, |x| 2.0 * x[0].cos());
        let s22 = ScalarField::from_fn(&g, |x| -x[0].cos());
        assert!(st.entry(0, 0).l2_distance(&s11).unwrap() < 1e-12);
        assert!(st.entry(1, 1).l2_distance(&s22).unwrap() < 1e-12);
    }

    #[test]
    fn chemical_potential_examples() {
        let s = sp(16);
        let g = s.grid().clone();
        let p = PhysParams::from_epsilon(0.0).unwrap();
        for c in [0.0, 1.0] {
            let mu = chemical_potential(&s, &ScalarField::constant(&g, c), &p).unwrap();
            assert!(mu.mu.values().iter().all(|v| v.abs() < 1e-14));
        }
        let a = 0.7;
        for order in [1.0, 1.6, 2.2] {
            let p = p.with_s(order).unwrap();
            let phi = ScalarField::from_fn(&g, |x| a * x[0].cos());
            let mu = chemical_potential(&s, &phi, &p).unwrap();
            let want = ScalarField::from_fn(&g, |x| (a * x[0].cos()).powi(3));
            assert!(mu.mu.l2_distance(&want).unwrap() < 1e-12);
            // mean of a³cos³ is zero
            assert!(mu.mean.abs() < 1e-15);
        }
        let mu = chemical_potential(&s, &ScalarField::constant(&g, 0.5), &p).unwrap();
        assert!((mu.mean - (0.125 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn energy_examples() {
        let s = sp(16);
        let g = s.grid().clone();
        let area = (2.0 * PI).powi(2);
        let p = PhysParams::from_epsilon(-0.5).unwrap();
        let zero = VectorField::zeros(&g);
        let e = total_energy(&s, &zero, &ScalarField::constant(&g, 1.0), &p).unwrap();
        assert!(e.total.abs() < 1e-14);
        let e = total_energy(&s, &zero, &ScalarField::zeros(&g), &p).unwrap();
        assert!((e.total - area / 4.0).abs() < 1e-12);
        let u = VectorField::from_fn(&g, |x| vec![x[1].sin(), 0.0]);
        let e = total_energy(&s, &u, &ScalarField::zeros(&g), &p).unwrap();
        assert!((e.kinetic - 0.5 * 0.75 * area / 2.0).abs() < 1e-12);
        assert!((e.total - 0.5 * 0.75 * area / 2.0 - area / 4.0).abs() < 1e-12);
    }

    #[test]
    fn dissipation_examples() {
        let s = sp(16);
        let g = s.grid().clone();
        let p = PhysParams::from_epsilon(0.0).unwrap().with_nu(2.0).unwrap();
        let z = ScalarField::zeros(&g);
        let d = dissipation(&s, &VectorField::zeros(&g), &z, &z, &z, &p).unwrap();
        assert_eq!(d, Dissipation::default());
        let u = VectorField::from_fn(&g, |x| vec![x[1].sin(), 0.0]);
        let d = dissipation(&s, &u, &z, &z, &z, &p).unwrap();
        assert!((d.visc - 1.5 * (2.0 * PI).powi(2) / 2.0).abs() < 1e-12);
    }
}
