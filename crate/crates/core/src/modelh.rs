//! Matched-density (model H) reference solver.
//!
//! Uses the same Galerkin residual as the quasi-incompressible stepper with
//! `ε = α = δ = 0`, but inverts the linear part with a Leray projection and a
//! 2×2 Cahn–Hilliard solve per mode.

use num_complex::Complex64 as C64;

use crate::constitutive::{dissipation, total_energy, Dissipation, EnergyReport, PhysParams};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::kernel::{self, Frozen, Sources, Unknowns};
use crate::spectral::Spectral;
use crate::stepper::{steps_in, PicardSettings, StepError};
use crate::SpectralError;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelHState {
    pub t: f64,
    /// Divergence-free velocity.
    pub u: VectorField,
    pub phi: ScalarField,
    /// Mean-free pressure.
    pub p: ScalarField,
    /// Chemical potential including its mean.
    pub mu: ScalarField,
}

impl ModelHState {
    pub fn new(t: f64, u: VectorField, phi: ScalarField) -> Result<Self, SpectralError> {
        phi.check_grid(u.grid())?;
        let g = phi.grid().clone();
        Ok(Self {
            t,
            u,
            phi,
            p: ScalarField::zeros(&g),
            mu: ScalarField::zeros(&g),
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.phi.grid()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelHDiagnostics {
    pub picard_iters: usize,
    pub residual: f64,
    /// `‖div u‖_{L²}` of the new state.
    pub div_norm: f64,
    pub energy_before: EnergyReport,
    pub energy_after: EnergyReport,
    pub dissipation: Dissipation,
    /// `E_after + ½‖u - u_k‖² + h·D - E_before`.
    pub energy_defect: f64,
}

#[derive(Debug)]
pub struct ModelHSolver {
    sp: Spectral,
    params: PhysParams,
    settings: PicardSettings,
    frac: Vec<f64>,
}

impl ModelHSolver {
    /// Only `nu`, `kappa` and `s` are taken from `params`; densities are matched
    /// and there is no pressure damping.
    pub fn new(grid: &TorusGrid, params: &PhysParams, settings: PicardSettings) -> Result<Self, StepError> {
        settings.validate()?;
        let matched = PhysParams::from_epsilon(0.0)
            .and_then(|p| p.with_nu(params.nu()))
            .and_then(|p| p.with_kappa(params.kappa()))
            .and_then(|p| p.with_s(params.s()))
            .and_then(|p| p.with_delta(0.0))
            .expect("parameters already validated");
        let sp = Spectral::new(grid);
        let frac = (0..grid.len()).map(|i| sp.frac_symbol(i, matched.s())).collect();
        Ok(Self {
            sp,
            params: matched,
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

    fn coeffs(&self, s: &ModelHState) -> Result<Unknowns, StepError> {
        let g = self.sp.grid();
        for f in [&s.phi, &s.p, &s.mu] {
            f.check_grid(g)?;
        }
        s.u.component(0).check_grid(g)?;
        let mut p = self.sp.band_coeffs(s.p.values());
        let mut mu = self.sp.band_coeffs(s.mu.values());
        p[0] = C64::new(0.0, 0.0);
        mu[0] = C64::new(0.0, 0.0);
        // Leray-project the velocity so the initial data is admissible.
        let mut u: Vec<Vec<C64>> = s.u.components().iter().map(|c| self.sp.band_coeffs(c.values())).collect();
        let d = u.len();
        for &flat in self.sp.band() {
            let k2 = self.sp.k2()[flat];
            if k2 == 0.0 {
                continue;
            }
            let mut dot = C64::new(0.0, 0.0);
            for (a, ua) in u.iter().enumerate() {
                dot += self.sp.k_odd(a)[flat] * ua[flat];
            }
            for (a, ua) in u.iter_mut().enumerate().take(d) {
                ua[flat] -= self.sp.k_odd(a)[flat] * dot / k2;
            }
        }
        Ok(Unknowns {
            u,
            phi: self.sp.band_coeffs(s.phi.values()),
            p,
            mu,
        })
    }

    fn to_state(&self, t: f64, c: &Unknowns, mu_bar: f64) -> ModelHState {
        let g = self.sp.grid();
        let f = |v: &[C64]| ScalarField::from_raw(g.clone(), self.sp.inverse_raw(v));
        ModelHState {
            t,
            u: VectorField::new(c.u.iter().map(|v| f(v)).collect()).expect("consistent arity"),
            phi: f(&c.phi),
            p: f(&c.p),
            mu: f(&c.mu).map(|v| v + mu_bar),
        }
    }

    /// Band projection and Leray projection of a state.
    pub fn project(&self, state: &ModelHState) -> Result<ModelHState, StepError> {
        let c = self.coeffs(state)?;
        let mu_bar = state.mu.mean();
        Ok(self.to_state(state.t, &c, mu_bar))
    }

    pub fn step_modelh(&self, prev: &ModelHState, h: f64) -> Result<(ModelHState, ModelHDiagnostics), StepError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(StepError::InvalidStep(h));
        }
        let sp = &self.sp;
        let old = self.coeffs(prev)?;
        let fr = Frozen::new(sp, &self.params, &old.phi, &old.u, h);
        let src = Sources::default();
        let mut w = old.clone();
        let mut residual = f64::INFINITY;
        let mut iters = 0;
        while iters < self.settings.max_iter {
            iters += 1;
            let rhs = kernel::evaluate(sp, &self.params, &fr, &w, &src);
            let next = kernel::solve_incompressible(sp, &self.params, &fr.block, &self.frac, &rhs);
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
        let old_state = self.to_state(prev.t, &old, prev.mu.mean());
        let state = self.to_state(prev.t + h, &w, mu_bar);

        let p = &self.params;
        let energy_before = total_energy(sp, &old_state.u, &old_state.phi, p)?;
        let energy_after = total_energy(sp, &state.u, &state.phi, p)?;
        let jump = state.u.axpy(-1.0, &old_state.u)?;
        let kinetic_jump = total_energy(sp, &jump, &old_state.phi, p)?.kinetic;
        let zero = ScalarField::zeros(sp.grid());
        let mu_p0 = state.mu.map(|v| v - mu_bar);
        let diss = dissipation(sp, &state.u, &old_state.phi, &mu_p0, &zero, p)?;
        let diag = ModelHDiagnostics {
            picard_iters: iters,
            residual,
            div_norm: sp.div(&state.u)?.l2_norm(),
            energy_before,
            energy_after,
            dissipation: diss,
            energy_defect: energy_after.total + kinetic_jump + h * diss.sum() - energy_before.total,
        };
        Ok((state, diag))
    }

    /// Steps from `initial` to `t_end`, calling `observer` after each step.
    pub fn run(
        &self,
        initial: &ModelHState,
        dt: f64,
        t_end: f64,
        mut observer: impl FnMut(&ModelHState, &ModelHDiagnostics),
    ) -> Result<ModelHState, StepError> {
        let steps = steps_in(t_end - initial.t, dt);
        let mut state = self.project(initial)?;
        let t0 = state.t;
        for k in 0..steps {
            let (mut next, diag) = self.step_modelh(&state, dt)?;
            next.t = t0 + (k + 1) as f64 * dt;
            observer(&next, &diag);
            state = next;
        }
        Ok(state)
    }
}

/// Model H trajectory on a grid refined by 2 per axis with step `dt/4`,
/// returned on the coarse grid at every coarse time `k·dt`.
///
/// Coarse times are multiples of the fine step, so no time interpolation is
/// needed; fields are resampled by spectral truncation to the coarse band.
pub fn refine_reference(
    coarse: &TorusGrid,
    params: &PhysParams,
    settings: PicardSettings,
    initial: &ModelHState,
    dt: f64,
    t_end: f64,
) -> Result<Vec<ModelHState>, StepError> {
    let coarse_sp = Spectral::new(coarse);
    let fine_grid = coarse.refined(2)?;
    let fine = ModelHSolver::new(&fine_grid, params, settings)?;
    let up = |f: &ScalarField| coarse_sp.resample(f, &fine.sp);
    let up_u = |u: &VectorField| -> Result<VectorField, SpectralError> {
        VectorField::new(u.components().iter().map(up).collect::<Result<_, _>>()?)
    };
    let fine_init = ModelHState {
        t: initial.t,
        u: up_u(&initial.u)?,
        phi: up(&initial.phi)?,
        p: up(&initial.p)?,
        mu: up(&initial.mu)?,
    };
    let down = |s: &ModelHState| -> Result<ModelHState, SpectralError> {
        let d = |f: &ScalarField| fine.sp.resample(f, &coarse_sp);
        Ok(ModelHState {
            t: s.t,
            u: VectorField::new(s.u.components().iter().map(d).collect::<Result<_, _>>()?)?,
            phi: d(&s.phi)?,
            p: d(&s.p)?,
            mu: d(&s.mu)?,
        })
    };
    let steps = steps_in(t_end - initial.t, dt);
    let mut state = fine.project(&fine_init)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(down(&state)?);
    let h = dt / 4.0;
    for k in 0..steps {
        for _ in 0..4 {
            state = fine.step_modelh(&state, h)?.0;
        }
        state.t = initial.t + (k + 1) as f64 * dt;
        out.push(down(&state)?);
    }
    Ok(out)
}
