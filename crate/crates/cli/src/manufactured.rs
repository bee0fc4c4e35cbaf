//! Manufactured-solution order study for the phase subsystem.
//!
//! With `α = δ = 0` and `u₀ = 0`, the target `φ*(t, x) = A e^{-t} cos(x₁)`
//! solves the forced system when the Cahn–Hilliard source is
//! `∂ₜφ* - Δμ*`, `μ* = P[φ*³] - κφ* + Λ^{2s}φ*`. The capillary force of a
//! one-dimensional profile is a gradient, so the velocity stays at rest.

use qinsch::stepper::{Forcing, Schedule};
use qinsch::{MixtureState, PhysParams, PicardSettings, QuasiStepper, ScalarField, Spectral, StepError, TorusGrid, VectorField};

use crate::CliError;

pub const DEFAULT_DTS: [f64; 3] = [0.025, 0.0125, 0.00625];
pub const AMPLITUDE: f64 = 0.5;

struct Source {
    sp: Spectral,
    kappa: f64,
    s: f64,
}

impl Source {
    fn exact(&self, t: f64) -> ScalarField {
        let w = 2.0 * std::f64::consts::PI / self.sp.grid().length();
        let a = AMPLITUDE * (-t).exp();
        ScalarField::from_fn(self.sp.grid(), |x| a * (w * x[0]).cos())
    }

    fn eval(&self, t: f64) -> Result<ScalarField, qinsch::SpectralError> {
        let phi = self.exact(t);
        let mu = self
            .sp
            .dealiased_cube(&phi)?
            .axpy(-self.kappa, &phi)?
            .axpy(1.0, &self.sp.frac_laplacian(&phi, self.s)?)?;
        let lap_mu = self.sp.div(&self.sp.grad(&mu)?)?;
        // ∂ₜφ* = -φ*
        phi.map(|v| -v).axpy(-1.0, &lap_mu)
    }
}

impl Forcing for Source {
    fn phase(&self, t: f64, _grid: &TorusGrid) -> Option<ScalarField> {
        self.eval(t).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedReport {
    pub dts: Vec<f64>,
    /// `‖φ_N - φ*(T)‖_{L²}` per step size.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log dt`.
    pub order: f64,
}

impl ManufacturedReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (dt, e) in self.dts.iter().zip(&self.errors) {
            s.push_str(&format!("dt = {dt:<10} error = {e:.6e}\n"));
        }
        s.push_str(&format!("observed order = {:.4}\n", self.order));
        s
    }
}

/// Runs the forced problem to `t_end` for each step size. `base` supplies
/// `nu`, `kappa` and `s`; the density ratio and `δ` are set to zero.
pub fn manufactured_order(
    grid: &TorusGrid,
    base: &PhysParams,
    settings: PicardSettings,
    dts: &[f64],
    t_end: f64,
) -> Result<ManufacturedReport, CliError> {
    if dts.len() < 2 || dts.iter().any(|&d| !(d > 0.0 && d < t_end)) {
        return Err(CliError::Usage("--dts needs at least two step sizes in (0, t_end)".into()));
    }
    let p = PhysParams::from_epsilon(0.0)
        .and_then(|p| p.with_nu(base.nu()))
        .and_then(|p| p.with_kappa(base.kappa()))
        .and_then(|p| p.with_s(base.s()))
        .and_then(|p| p.with_delta(0.0))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let stepper = QuasiStepper::new(grid, p, settings).map_err(solver("manufactured setup"))?;
    let src = Source {
        sp: Spectral::new(grid),
        kappa: p.kappa(),
        s: p.s(),
    };
    // A failed source evaluation would silently drop the forcing.
    src.eval(0.0).map_err(|e| solver("manufactured source")(e.into()))?;
    let exact = src.exact(t_end);
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let init = MixtureState::new(0.0, VectorField::zeros(grid), src.exact(0.0))
            .map_err(|e| solver("manufactured init")(e.into()))?;
        let schedule = Schedule {
            dt,
            t_end,
            record_every: usize::MAX,
        };
        let out = stepper
            .run(&init, schedule, Some(&src), |_, _| {})
            .map_err(solver(&format!("manufactured dt = {dt}")))?;
        let last = out.states.last().expect("run keeps the final state");
        errors.push(last.phi.l2_distance(&exact).map_err(|e| solver("manufactured error")(e.into()))?);
    }
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (order, _) = qinsch::relent::fit_line(&lx, &ly);
    Ok(ManufacturedReport {
        dts: dts.to_vec(),
        errors,
        order,
    })
}

fn solver(context: &str) -> impl Fn(StepError) -> CliError + '_ {
    move |e| CliError::Solver(format!("{context}: {e}"))
}
