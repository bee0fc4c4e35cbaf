//! Relative energy between a quasi-incompressible and a model H solution, and
//! the density-ratio sweep that measures how fast it vanishes as `α → 0`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::constitutive::{fractional_seminorm_sq, PhysParams};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::modelh::{refine_reference, ModelHSolver, ModelHState};
use crate::spectral::Spectral;
use crate::stepper::{MixtureState, PicardSettings, QuasiStepper, Schedule, StepError};
use crate::SpectralError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelError {
    #[error("time stamps differ: {weak} vs {strong}")]
    TimeMismatch { weak: f64, strong: f64 },
    #[error("alphas must lie in (0, 1) and be strictly decreasing")]
    BadAlphas,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Terms of the relative energy of `(φ_α, u_α)` with respect to `(φ, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelEnergyReport {
    pub t: f64,
    /// `½∫ρ(φ_α)|u_α - u|²`
    pub kinetic_part: f64,
    /// `½‖Λ^s(φ_α - φ)‖²`
    pub fractional_part: f64,
    /// `∫(Φ(φ_α) - Φ'(φ)(φ_α - φ) - Φ(φ))`
    pub bregman_part: f64,
    pub total: f64,
}

/// Relative energy from raw fields; the density uses `phi_w`.
pub fn relative_energy_fields(
    sp: &Spectral,
    u_w: &VectorField,
    phi_w: &ScalarField,
    u_s: &VectorField,
    phi_s: &ScalarField,
    p: &PhysParams,
) -> Result<RelEnergyReport, SpectralError> {
    let g = sp.grid();
    for f in [phi_w, phi_s] {
        f.check_grid(g)?;
    }
    u_w.component(0).check_grid(g)?;
    u_s.component(0).check_grid(g)?;
    let cw = sp.forward_raw(phi_w.values());
    let cs = sp.forward_raw(phi_s.values());
    let fw = sp.to_padded_full(&cw);
    let fs = sp.to_padded_full(&cs);
    let mut du2 = vec![0.0; fw.len()];
    for (a, b) in u_w.components().iter().zip(u_s.components()) {
        let diff = a.axpy(-1.0, b)?;
        let pd = sp.to_padded_full(&sp.forward_raw(diff.values()));
        for (acc, v) in du2.iter_mut().zip(&pd) {
            *acc += v * v;
        }
    }
    let pot = p.potential();
    let kin: Vec<f64> = fw.iter().zip(&du2).map(|(&f, &d)| 0.5 * p.rho(f) * d).collect();
    let breg: Vec<f64> = fw
        .iter()
        .zip(&fs)
        .map(|(&a, &b)| pot.convex(a) - pot.convex_prime(b) * (a - b) - pot.convex(b))
        .collect();
    let dphi: Vec<_> = cw.iter().zip(&cs).map(|(a, b)| a - b).collect();
    let kinetic_part = sp.padded_integral(&kin);
    let bregman_part = sp.padded_integral(&breg);
    let fractional_part = 0.5 * fractional_seminorm_sq(sp, &dphi, p.s());
    Ok(RelEnergyReport {
        t: 0.0,
        kinetic_part,
        fractional_part,
        bregman_part,
        total: kinetic_part + fractional_part + bregman_part,
    })
}

/// Relative energy of a quasi-incompressible state with respect to a model H state.
pub fn relative_energy(
    sp: &Spectral,
    weak: &MixtureState,
    strong: &ModelHState,
    p: &PhysParams,
) -> Result<RelEnergyReport, RelError> {
    if (weak.t - strong.t).abs() > 1e-9 * weak.t.abs().max(1.0) {
        return Err(RelError::TimeMismatch {
            weak: weak.t,
            strong: strong.t,
        });
    }
    let mut r = relative_energy_fields(sp, &weak.u, &weak.phi, &strong.u, &strong.phi, p)?;
    r.t = weak.t;
    Ok(r)
}

/// `∫‖φ(t)‖²_{H^{s+γ/2}} dt` by the trapezoid rule over the given samples.
pub fn hs_gamma_diagnostic<'a>(
    sp: &Spectral,
    samples: impl IntoIterator<Item = (f64, &'a ScalarField)>,
    gamma: f64,
    s: f64,
) -> Result<f64, SpectralError> {
    let mut acc = HsAccumulator::new(s + 0.5 * gamma);
    for (t, phi) in samples {
        acc.push(sp, t, phi)?;
    }
    Ok(acc.value())
}

/// Streaming form of [`hs_gamma_diagnostic`].
#[derive(Debug, Clone)]
pub struct HsAccumulator {
    order: f64,
    last: Option<(f64, f64)>,
    total: f64,
}

impl HsAccumulator {
    pub fn new(order: f64) -> Self {
        Self {
            order,
            last: None,
            total: 0.0,
        }
    }

    pub fn push(&mut self, sp: &Spectral, t: f64, phi: &ScalarField) -> Result<(), SpectralError> {
        let v = sp.sobolev_norm(phi, self.order)?.powi(2);
        if let Some((t0, v0)) = self.last {
            self.total += 0.5 * (t - t0) * (v + v0);
        }
        self.last = Some((t, v));
        Ok(())
    }

    pub fn value(&self) -> f64 {
        self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiBoundReport {
    pub min: f64,
    pub max: f64,
    pub theta: f64,
    /// `-1-θ < min` and `max < 1+θ`.
    pub pass: bool,
}

impl PhiBoundReport {
    pub fn empty(theta: f64) -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            theta,
            pass: true,
        }
    }

    pub fn update(&mut self, phi: &ScalarField) {
        self.min = self.min.min(phi.min());
        self.max = self.max.max(phi.max());
        self.pass = self.min > -1.0 - self.theta && self.max < 1.0 + self.theta;
    }
}

pub fn phi_bound_check<'a>(trajectory: impl IntoIterator<Item = &'a ScalarField>, theta: f64) -> PhiBoundReport {
    let mut r = PhiBoundReport::empty(theta);
    for phi in trajectory {
        r.update(phi);
    }
    r
}

/// Amplitude of the perturbation used for ill-prepared data.
pub const ILL_PREPARED_AMP: f64 = 0.05;

/// How the model H reference is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Twice the resolution and a quarter of the step, resampled.
    Refined,
    /// Same grid and step as the sweep runs.
    SameResolution,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: TorusGrid,
    /// Supplies `nu`, `kappa`, `s` and `delta`; the density ratio is overridden per run.
    pub base: PhysParams,
    pub settings: PicardSettings,
    pub dt: f64,
    pub t_end: f64,
    pub phi0: ScalarField,
    /// Divergence-free initial velocity.
    pub u0: VectorField,
    pub reference: Reference,
    /// Run the quasi solver with `α = 0` regardless of the ladder (control experiment).
    pub force_alpha_zero: bool,
    /// When false, each run starts from `φ₀ + √α·ILL_PREPARED_AMP·cos(x₂)`, so
    /// the initial relative energy is of order `α`.
    pub well_prepared: bool,
    /// Order `γ` of the higher-regularity diagnostic.
    pub gamma: f64,
    pub theta: f64,
}

/// Outcome of an `α` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub alphas: Vec<f64>,
    /// Sup over output times of the relative energy, per `α`.
    pub sup_rel_energy: Vec<f64>,
    /// Least-squares slope of `log sup E_rel` against `log α`.
    pub fitted_slope: f64,
    pub r_squared: f64,
    /// `sup E_rel(α_i) / sup E_rel(α_{i+1})`.
    pub halving_ratios: Vec<f64>,
    /// Per `α`: `∫‖∇μ_{p,α} - ∇μ‖²dt` and `‖u_α - u‖²_{L²H¹}`.
    pub dissipation_gaps: Vec<(f64, f64)>,
    /// Per `α`: time-integrated `H^{s+γ/2}` norm squared of `φ_α`.
    pub hs_gamma: Vec<f64>,
    pub phi_bounds: Vec<PhiBoundReport>,
    /// Set when the sweep aborted; the lists then cover the completed runs.
    pub failure: Option<String>,
}

impl RateReport {
    /// Fits below `R² = 0.9` are flagged rather than rejected.
    pub fn poor_fit(&self) -> bool {
        !(self.r_squared >= 0.9)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,sup_rel_energy,grad_mu_gap,velocity_gap,hs_gamma,phi_min,phi_max\n");
        for i in 0..self.sup_rel_energy.len() {
            let (gm, gu) = self.dissipation_gaps[i];
            let b = self.phi_bounds[i];
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{},{}",
                self.alphas[i], self.sup_rel_energy[i], gm, gu, self.hs_gamma[i], b.min, b.max
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "alpha sweep ({} runs)", self.sup_rel_energy.len());
        for (a, e) in self.alphas.iter().zip(&self.sup_rel_energy) {
            let _ = writeln!(s, "  alpha = {a:<8}  sup E_rel = {e:.6e}");
        }
        let _ = writeln!(s, "fitted slope = {:.4}  (R^2 = {:.4})", self.fitted_slope, self.r_squared);
        if self.poor_fit() {
            let _ = writeln!(s, "warning: poor linear fit");
        }
        for (i, r) in self.halving_ratios.iter().enumerate() {
            let _ = writeln!(s, "ratio {}/{} = {:.4}", i, i + 1, r);
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "sweep aborted: {f}");
        }
        s
    }
}

/// Least-squares line through `(x, y)`: returns `(slope, R²)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Runs the model H reference once, then the quasi-incompressible solver for
/// each `α`, measuring the relative energy at every step.
pub fn alpha_sweep(cfg: &SweepConfig, alphas: &[f64]) -> Result<RateReport, RelError> {
    if alphas.is_empty()
        || alphas.iter().any(|&a| !(a > 0.0 && a < 1.0))
        || alphas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(RelError::BadAlphas);
    }
    let reference = build_reference(cfg)?;
    let mut report = RateReport {
        alphas: alphas.to_vec(),
        sup_rel_energy: Vec::new(),
        fitted_slope: f64::NAN,
        r_squared: f64::NAN,
        halving_ratios: Vec::new(),
        dissipation_gaps: Vec::new(),
        hs_gamma: Vec::new(),
        phi_bounds: Vec::new(),
        failure: None,
    };
    for &alpha in alphas {
        match sweep_run(cfg, alpha, &reference) {
            Ok(r) => {
                report.sup_rel_energy.push(r.sup);
                report.dissipation_gaps.push(r.gaps);
                report.hs_gamma.push(r.hs);
                report.phi_bounds.push(r.bounds);
            }
            Err(e) => {
                report.failure = Some(format!("alpha = {alpha}: {e}"));
                break;
            }
        }
    }
    let m = report.sup_rel_energy.len();
    let lx: Vec<f64> = alphas[..m].iter().map(|a| a.ln()).collect();
    let ly: Vec<f64> = report.sup_rel_energy.iter().map(|e| e.ln()).collect();
    let (slope, r2) = fit_line(&lx, &ly);
    report.fitted_slope = slope;
    report.r_squared = r2;
    report.halving_ratios = report
        .sup_rel_energy
        .windows(2)
        .map(|w| w[0] / w[1])
        .collect();
    Ok(report)
}

fn build_reference(cfg: &SweepConfig) -> Result<Vec<ModelHState>, RelError> {
    let init = ModelHState::new(0.0, cfg.u0.clone(), cfg.phi0.clone())?;
    match cfg.reference {
        Reference::Refined => Ok(refine_reference(
            &cfg.grid, &cfg.base, cfg.settings, &init, cfg.dt, cfg.t_end,
        )?),
        Reference::SameResolution => {
            let solver = ModelHSolver::new(&cfg.grid, &cfg.base, cfg.settings)?;
            let mut out = vec![solver.project(&init)?];
            solver.run(&init, cfg.dt, cfg.t_end, |s, _| out.push(s.clone()))?;
            Ok(out)
        }
    }
}

struct RunResult {
    sup: f64,
    gaps: (f64, f64),
    hs: f64,
    bounds: PhiBoundReport,
}

fn sweep_run(cfg: &SweepConfig, alpha: f64, reference: &[ModelHState]) -> Result<RunResult, RelError> {
    let a = if cfg.force_alpha_zero { 0.0 } else { alpha };
    let p = PhysParams::from_alpha(a)
        .and_then(|p| p.with_nu(cfg.base.nu()))
        .and_then(|p| p.with_kappa(cfg.base.kappa()))
        .and_then(|p| p.with_s(cfg.base.s()))
        .and_then(|p| p.with_delta(cfg.base.delta()))
        .map_err(|e| RelError::Step(StepError::InvalidSettings(e.to_string())))?;
    let stepper = QuasiStepper::new(&cfg.grid, p, cfg.settings)?;
    let sp = stepper.spectral();
    let phi0 = if cfg.well_prepared {
        cfg.phi0.clone()
    } else {
        let w = 2.0 * std::f64::consts::PI / cfg.grid.length();
        let amp = alpha.sqrt() * ILL_PREPARED_AMP;
        cfg.phi0.axpy(1.0, &ScalarField::from_fn(&cfg.grid, |x| amp * (w * x[1]).cos()))?
    };
    let init = MixtureState::new(0.0, cfg.u0.clone(), phi0)?;
    let init = stepper.project(&init)?;

    let mut sup = relative_energy(sp, &init, &reference[0], &p)?.total;
    let mut hs = HsAccumulator::new(cfg.base.s() + 0.5 * cfg.gamma);
    hs.push(sp, init.t, &init.phi)?;
    let mut bounds = PhiBoundReport::empty(cfg.theta);
    bounds.update(&init.phi);
    let mut gaps = GapAccumulator::default();
    gaps.push(sp, &init, &reference[0])?;

    let mut failure: Option<RelError> = None;
    let mut k = 0;
    let schedule = Schedule {
        dt: cfg.dt,
        t_end: cfg.t_end,
        record_every: usize::MAX,
    };
    let res = stepper.run(&init, schedule, None, |state, _| {
        if failure.is_some() {
            return;
        }
        // Sub-steps from back-offs land between reference times; skip them.
        let Some(r) = reference.get(k + 1).filter(|r| (r.t - state.t).abs() <= 1e-9) else {
            return;
        };
        k += 1;
        let step = (|| -> Result<(), RelError> {
            sup = sup.max(relative_energy(sp, state, r, &p)?.total);
            hs.push(sp, state.t, &state.phi)?;
            bounds.update(&state.phi);
            gaps.push(sp, state, r)?;
            Ok(())
        })();
        if let Err(e) = step {
            failure = Some(e);
        }
    });
    res?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunResult {
        sup,
        gaps: gaps.value(),
        hs: hs.value(),
        bounds,
    })
}

#[derive(Default)]
struct GapAccumulator {
    last: Option<(f64, f64, f64)>,
    mu: f64,
    u: f64,
}

impl GapAccumulator {
    fn push(&mut self, sp: &Spectral, w: &MixtureState, s: &ModelHState) -> Result<(), SpectralError> {
        let gw = sp.grad(&w.mu_p0)?;
        let gs = sp.grad(&s.mu)?;
        let gmu = gw.l2_distance(&gs)?.powi(2);
        let du = w.u.axpy(-1.0, &s.u)?;
        let h1: f64 = du
            .components()
            .iter()
            .map(|c| sp.sobolev_norm(c, 1.0).map(|n| n * n))
            .sum::<Result<f64, _>>()?;
        if let Some((t0, m0, u0)) = self.last {
            let dt = w.t - t0;
            self.mu += 0.5 * dt * (gmu + m0);
            self.u += 0.5 * dt * (h1 + u0);
        }
        self.last = Some((w.t, gmu, h1));
        Ok(())
    }

    fn value(&self) -> (f64, f64) {
        (self.mu, self.u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 2.0).collect();
        let (s, r2) = fit_line(&x, &y);
        assert!((s - 1.5).abs() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_bounds() {
        let g = TorusGrid::square(2, 8).unwrap();
        let z = ScalarField::zeros(&g);
        let r = phi_bound_check([&z], 0.5);
        assert!(r.pass && r.min == 0.0 && r.max == 0.0);
        let c = ScalarField::constant(&g, 1.6);
        assert!(!phi_bound_check([&c], 0.5).pass);
    }
}
