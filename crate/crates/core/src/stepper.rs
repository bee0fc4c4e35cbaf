//! Implicit time stepping for the δ-regularized quasi-incompressible system.
//!
//! One step solves backward-Euler momentum, mass and Cahn–Hilliard equations
//! with the convex part of the potential implicit and the concave part
//! averaged between time levels. The coupled nonlinear system is solved by
//! Picard iteration `ω ← ℒ⁻¹ℱ(ω)`, where `ℒ` has constant (spatial-mean)
//! coefficients and is inverted mode by mode.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::constitutive::{
    density, dissipation, total_energy, viscosity, Dissipation, EnergyReport, PhysParams,
};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::kernel::{self, Frozen, Rhs, Sources, Unknowns};
use crate::spectral::{Spectral, TOL_MEAN};
use crate::SpectralError;

pub use crate::kernel::LinearBlock;

/// One time slice of the quasi-incompressible system.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    pub t: f64,
    pub u: VectorField,
    pub phi: ScalarField,
    /// Mean-free pressure.
    pub p0: ScalarField,
    /// Mean-free part of the chemical potential.
    pub mu_p0: ScalarField,
    /// Mean of the chemical potential.
    pub mu_bar: f64,
}

impl MixtureState {
    /// State with the given velocity and order parameter and zero pressure and
    /// chemical potential.
    pub fn new(t: f64, u: VectorField, phi: ScalarField) -> Result<Self, SpectralError> {
        phi.check_grid(u.grid())?;
        let g = phi.grid().clone();
        Ok(Self {
            t,
            u,
            phi,
            p0: ScalarField::zeros(&g),
            mu_p0: ScalarField::zeros(&g),
            mu_bar: 0.0,
        })
    }

    pub fn at_rest(phi: ScalarField) -> Self {
        let u = VectorField::zeros(phi.grid());
        Self::new(0.0, u, phi).expect("same grid")
    }

    pub fn grid(&self) -> &TorusGrid {
        self.phi.grid()
    }

    /// Checks the mean-free invariants of `p0` and `mu_p0`.
    pub fn check_means(&self) -> Result<(), SpectralError> {
        for f in [&self.p0, &self.mu_p0] {
            let tol = TOL_MEAN * f.rms().max(1.0);
            if f.mean().abs() > tol {
                return Err(SpectralError::MeanNotZero {
                    mean: f.mean(),
                    tol,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    /// Relative-update stopping threshold.
    pub tol: f64,
    pub max_iter: usize,
    /// Factor applied to the step after a failed solve.
    pub dt_backoff: f64,
    pub max_backoffs: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            dt_backoff: 0.5,
            max_backoffs: 10,
        }
    }
}

impl PicardSettings {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(StepError::InvalidSettings(format!("tol = {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(StepError::InvalidSettings("max_iter = 0".into()));
        }
        if !(self.dt_backoff > 0.0 && self.dt_backoff < 1.0) {
            return Err(StepError::InvalidSettings(format!(
                "dt_backoff = {}",
                self.dt_backoff
            )));
        }
        Ok(())
    }
}

/// Per-step solver telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    pub picard_iters: usize,
    /// Final relative Picard update.
    pub residual: f64,
    /// `‖div u + δp₀ - αΔμ_p⁰‖_{L²}` of the new state.
    pub constraint_residual: f64,
    pub energy_before: EnergyReport,
    pub energy_after: EnergyReport,
    /// Dissipation of the new state with viscosity frozen at the old level.
    pub dissipation: Dissipation,
    /// `½∫ρ_k|u - u_k|²`.
    pub kinetic_jump: f64,
    /// `E_after + ½∫ρ_k|u-u_k|² + h·D - E_before`; non-positive for an exact solve.
    pub energy_defect: f64,
    /// Samples where the viscosity clamp fired.
    pub eta_clamped: usize,
    /// Set when the new density has a non-positive sample.
    pub rho_nonpositive: bool,
}

impl StepDiagnostics {
    /// Tolerance on `energy_defect`: `1e-8·max(1, |E_before|)`.
    pub fn energy_tol(&self) -> f64 {
        1e-8 * self.energy_before.total.abs().max(1.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("Picard iteration did not converge: {iters} iterations, last update {residual:e}")]
    PicardDiverged { iters: usize, residual: f64 },
    #[error("time step exhausted at t = {t} after {backoffs} back-offs (dt = {dt:e})")]
    DtExhausted { t: f64, dt: f64, backoffs: usize },
    #[error("invalid step size {0}")]
    InvalidStep(f64),
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("trajectory window is not uniform in time")]
    NonUniformWindow,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Space-time forcing added to the right-hand sides, evaluated at the new time level.
pub trait Forcing {
    fn momentum(&self, _t: f64, _grid: &TorusGrid) -> Option<VectorField> {
        None
    }
    fn phase(&self, _t: f64, _grid: &TorusGrid) -> Option<ScalarField> {
        None
    }
}

/// Uniform time schedule for [`QuasiStepper::run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `record_every`-th state (the initial and final states are always kept).
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub states: Vec<MixtureState>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub backoffs: usize,
}

/// Time stepper bound to a grid, parameters and Picard settings.
#[derive(Debug)]
pub struct QuasiStepper {
    sp: Spectral,
    params: PhysParams,
    settings: PicardSettings,
    frac: Vec<f64>,
}

impl QuasiStepper {
    pub fn new(grid: &TorusGrid, params: PhysParams, settings: PicardSettings) -> Result<Self, StepError> {
        settings.validate()?;
        let sp = Spectral::new(grid);
        let frac = (0..grid.len()).map(|i| sp.frac_symbol(i, params.s())).collect();
        Ok(Self {
            sp,
            params,
            settings,
            frac,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn settings(&self) -> &PicardSettings {
        &self.settings
    }

    /// Projects a state onto the dealiasing band, where the scheme lives.
    pub fn project(&self, state: &MixtureState) -> Result<MixtureState, StepError> {
        let c = self.coeffs(state)?;
        Ok(self.to_state(state.t, &c, state.mu_bar))
    }

    fn coeffs(&self, s: &MixtureState) -> Result<Unknowns, StepError> {
        let g = self.sp.grid();
        for f in [&s.phi, &s.p0, &s.mu_p0] {
            f.check_grid(g)?;
        }
        s.u.component(0).check_grid(g)?;
        let mut p = self.sp.band_coeffs(s.p0.values());
        let mut mu = self.sp.band_coeffs(s.mu_p0.values());
        p[0] = C64::new(0.0, 0.0);
        mu[0] = C64::new(0.0, 0.0);
        Ok(Unknowns {
            u: s.u.components().iter().map(|c| self.sp.band_coeffs(c.values())).collect(),
            phi: self.sp.band_coeffs(s.phi.values()),
            p,
            mu,
        })
    }

    fn to_state(&self, t: f64, c: &Unknowns, mu_bar: f64) -> MixtureState {
        let g = self.sp.grid();
        let f = |v: &[C64]| ScalarField::from_raw(g.clone(), self.sp.inverse_raw(v));
        MixtureState {
            t,
            u: VectorField::new(c.u.iter().map(|v| f(v)).collect()).expect("consistent arity"),
            phi: f(&c.phi),
            p0: f(&c.p),
            mu_p0: f(&c.mu),
            mu_bar,
        }
    }

    /// One implicit step of size `h` from `prev`.
    pub fn step(&self, prev: &MixtureState, h: f64) -> Result<(MixtureState, StepDiagnostics), StepError> {
        self.step_forced(prev, h, None)
    }

    pub fn step_forced(
        &self,
        prev: &MixtureState,
        h: f64,
        forcing: Option<&dyn Forcing>,
    ) -> Result<(MixtureState, StepDiagnostics), StepError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(StepError::InvalidStep(h));
        }
        let sp = &self.sp;
        let old = self.coeffs(prev)?;
        let t_new = prev.t + h;
        let fr = Frozen::new(sp, &self.params, &old.phi, &old.u, h);
        let src = self.sources(forcing, t_new)?;

        let mut w = old.clone();
        let mut residual = f64::INFINITY;
        let mut iters = 0;
        while iters < self.settings.max_iter {
            iters += 1;
            let rhs = kernel::evaluate(sp, &self.params, &fr, &w, &src);
            let next = kernel::solve_quasi(sp, &self.params, &fr.block, &self.frac, &rhs);
            if !next.is_finite() {
                return Err(StepError::PicardDiverged { iters, residual });
            }
            residual = next.relative_update(&w);
            w = next;
            if residual <= self.settings.tol {
                break;
            }
        }
        if !(residual <= self.settings.tol) {
            return Err(StepError::PicardDiverged { iters, residual });
        }

        let mu_bar = kernel::mean_cube(sp, &w.phi) - self.params.kappa() * w.phi[0].re;
        let old_state = self.to_state(prev.t, &old, prev.mu_bar);
        let state = self.to_state(t_new, &w, mu_bar);
        let diag = self.diagnose(&old_state, &state, h, iters, residual)?;
        Ok((state, diag))
    }

    fn sources(&self, forcing: Option<&dyn Forcing>, t: f64) -> Result<Sources, StepError> {
        let Some(f) = forcing else {
            return Ok(Sources::default());
        };
        let g = self.sp.grid();
        let u = match f.momentum(t, g) {
            Some(v) => {
                v.component(0).check_grid(g)?;
                Some(v.components().iter().map(|c| self.sp.band_coeffs(c.values())).collect())
            }
            None => None,
        };
        let phi = match f.phase(t, g) {
            Some(s) => {
                s.check_grid(g)?;
                Some(self.sp.band_coeffs(s.values()))
            }
            None => None,
        };
        Ok(Sources { u, phi })
    }

    fn diagnose(
        &self,
        old: &MixtureState,
        new: &MixtureState,
        h: f64,
        picard_iters: usize,
        residual: f64,
    ) -> Result<StepDiagnostics, StepError> {
        let sp = &self.sp;
        let p = &self.params;
        let energy_before = total_energy(sp, &old.u, &old.phi, p)?;
        let energy_after = total_energy(sp, &new.u, &new.phi, p)?;
        let jump = new.u.axpy(-1.0, &old.u)?;
        let kinetic_jump = total_energy(sp, &jump, &old.phi, p)?.kinetic;
        let diss = dissipation(sp, &new.u, &old.phi, &new.mu_p0, &new.p0, p)?;
        let energy_defect =
            energy_after.total + kinetic_jump + h * diss.sum() - energy_before.total;
        Ok(StepDiagnostics {
            t: new.t,
            dt: h,
            picard_iters,
            residual,
            constraint_residual: constraint_residual(sp, new, p)?,
            energy_before,
            energy_after,
            dissipation: diss,
            kinetic_jump,
            energy_defect,
            eta_clamped: viscosity(&old.phi, p).clamped,
            rho_nonpositive: density(&new.phi, p).nonpositive,
        })
    }

    /// Integrates from `initial` to `schedule.t_end`.
    ///
    /// The initial state is band-projected first. A step whose Picard solve
    /// fails is retried with smaller substeps covering the same interval.
    /// `observer` sees every accepted (sub)step.
    pub fn run(
        &self,
        initial: &MixtureState,
        schedule: Schedule,
        forcing: Option<&dyn Forcing>,
        mut observer: impl FnMut(&MixtureState, &StepDiagnostics),
    ) -> Result<RunOutput, StepError> {
        if !(schedule.dt > 0.0 && schedule.dt.is_finite()) {
            return Err(StepError::InvalidStep(schedule.dt));
        }
        let every = schedule.record_every.max(1);
        let steps = steps_in(schedule.t_end - initial.t, schedule.dt);
        let mut state = self.project(initial)?;
        let t0 = state.t;
        let mut out = RunOutput {
            states: vec![state.clone()],
            diagnostics: Vec::with_capacity(steps),
            backoffs: 0,
        };
        for k in 0..steps {
            let target = t0 + (k + 1) as f64 * schedule.dt;
            let mut h = schedule.dt;
            let mut depth = 0;
            while target - state.t > 1e-12 * schedule.dt {
                let h_try = h.min(target - state.t);
                match self.step_forced(&state, h_try, forcing) {
                    Ok((mut next, diag)) => {
                        if (target - next.t).abs() <= 1e-12 * schedule.dt {
                            next.t = target;
                        }
                        observer(&next, &diag);
                        out.diagnostics.push(diag);
                        state = next;
                    }
                    Err(StepError::PicardDiverged { .. }) => {
                        depth += 1;
                        out.backoffs += 1;
                        if depth > self.settings.max_backoffs {
                            return Err(StepError::DtExhausted {
                                t: state.t,
                                dt: h_try,
                                backoffs: depth - 1,
                            });
                        }
                        h *= self.settings.dt_backoff;
                    }
                    Err(e) => return Err(e),
                }
            }
            if (k + 1) % every == 0 || k + 1 == steps {
                out.states.push(state.clone());
            }
        }
        Ok(out)
    }
}

/// Number of whole steps of size `dt` in `span`, tolerant of round-off.
pub fn steps_in(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let r = span / dt;
    let n = r.round();
    if (r - n).abs() < 1e-9 {
        n as usize
    } else {
        r.ceil() as usize
    }
}

/// `‖div u + δp₀ - αΔμ_p⁰‖_{L²}`.
pub fn constraint_residual(sp: &Spectral, s: &MixtureState, p: &PhysParams) -> Result<f64, SpectralError> {
    let div = sp.div(&s.u)?;
    let mut c = sp.forward_raw(div.values());
    let pc = sp.forward_raw(s.p0.values());
    let mc = sp.forward_raw(s.mu_p0.values());
    for (i, v) in c.iter_mut().enumerate() {
        *v += p.delta() * pc[i] + p.alpha() * sp.k2()[i] * mc[i];
    }
    let sum: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    Ok((sum * sp.grid().volume()).sqrt())
}

/// `p₁ = ζp₀ + ∂ₜ𝔾(u)` at the middle state, with a centered difference in time.
pub fn reconstruct_p1(
    sp: &Spectral,
    window: [&MixtureState; 3],
    p: &PhysParams,
) -> Result<ScalarField, StepError> {
    let [a, b, c] = window;
    let h1 = b.t - a.t;
    let h2 = c.t - b.t;
    if !(h1 > 0.0) || (h1 - h2).abs() > 1e-9 * h1.max(h2) {
        return Err(StepError::NonUniformWindow);
    }
    let (_, ga) = sp.helmholtz(&a.u)?;
    let (_, gc) = sp.helmholtz(&c.u)?;
    let dg = gc.axpy(-1.0, &ga)?.map(|v| v / (2.0 * h1));
    Ok(b.p0.map(|v| p.zeta() * v).axpy(1.0, &dg)?)
}

/// Right-hand side of the linear block in real space: one field per equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Stacked {
    pub u: VectorField,
    /// Constraint row, or the pressure in a solution.
    pub p: ScalarField,
    pub phi: ScalarField,
    pub mu: ScalarField,
}

/// Solves the constant-coefficient per-mode system `ℒω = rhs`.
///
/// Rows: momentum with mass `ρ̄/h` and mean-viscosity stress, the constraint
/// `div u + δp₀ - αΔμ = r_p`, Cahn–Hilliard with `φ̄` transport, and the
/// chemical potential with the averaged concave part. Inputs are projected onto
/// the band first.
pub fn apply_lk_inverse(
    sp: &Spectral,
    p: &PhysParams,
    block: &LinearBlock,
    rhs: &Stacked,
) -> Result<Stacked, SpectralError> {
    let g = sp.grid();
    for f in [&rhs.p, &rhs.phi, &rhs.mu] {
        f.check_grid(g)?;
    }
    rhs.u.component(0).check_grid(g)?;
    let frac: Vec<f64> = (0..g.len()).map(|i| sp.frac_symbol(i, p.s())).collect();
    let r = Rhs {
        u: rhs.u.components().iter().map(|c| sp.band_coeffs(c.values())).collect(),
        p: sp.band_coeffs(rhs.p.values()),
        phi: sp.band_coeffs(rhs.phi.values()),
        mu: sp.band_coeffs(rhs.mu.values()),
    };
    let x = kernel::solve_quasi(sp, p, block, &frac, &r);
    let f = |v: &[C64]| ScalarField::from_raw(g.clone(), sp.inverse_raw(v));
    Ok(Stacked {
        u: VectorField::new(x.u.iter().map(|v| f(v)).collect())?,
        p: f(&x.p),
        phi: f(&x.phi),
        mu: f(&x.mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_in_tolerates_round_off() {
        assert_eq!(steps_in(0.2, 1e-3), 200);
        assert_eq!(steps_in(0.0, 1e-3), 0);
        assert_eq!(steps_in(0.25, 0.1), 3);
    }

    #[test]
    fn invalid_settings_rejected() {
        let s = PicardSettings {
            max_iter: 0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = PicardSettings {
            tol: 0.0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }
}
