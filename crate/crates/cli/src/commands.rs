//! Implementations behind the `run`, `sweep-alpha` and `verify` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qinsch::constitutive::{chemical_potential, density};
use qinsch::relent::{alpha_sweep, PhiBoundReport, Reference, SweepConfig};
use qinsch::stepper::Schedule;
use qinsch::{
    MixtureState, ModelHSolver, ModelHState, PhysParams, PicardSettings, QuasiStepper, RateReport, ScalarField,
    Spectral, SpectralError, StepDiagnostics, TorusGrid, VectorField,
};

use crate::checkpoint::write_checkpoint;
use crate::config::Config;
use crate::diagnostics::{csv_row, CSV_HEADER};
use crate::init;
use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "QINSCH_OUTPUT_DIR";

/// Output directory after applying the environment override.
pub fn output_dir(cfg: &Config) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => cfg.output.dir.clone(),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn spectral_err(context: &str) -> impl Fn(SpectralError) -> CliError + '_ {
    move |e| CliError::Solver(format!("{context}: {e}"))
}

fn h1_norm(sp: &Spectral, u: &VectorField) -> Result<f64, SpectralError> {
    let mut acc = 0.0;
    for c in u.components() {
        acc += sp.sobolev_norm(c, 1.0)?.powi(2);
    }
    Ok(acc.sqrt())
}

/// Everything a run reports besides its files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub csv: String,
    pub final_state: MixtureState,
    /// Every accepted step, sub-steps included.
    pub diagnostics: Vec<StepDiagnostics>,
    pub backoffs: usize,
    pub max_mass_drift: f64,
    pub max_rho_drift: f64,
    /// Largest `constraint_residual / (10·tol·(1+‖u‖_{H¹}))`.
    pub max_constraint_ratio: f64,
    /// Largest `energy_defect / energy_tol`.
    pub max_defect_ratio: f64,
    /// Steps with `E_after > E_before`.
    pub energy_increases: usize,
    /// Largest `|μ̄ - mean F'(φ)|`.
    pub max_mu_bar_gap: f64,
    pub bounds: PhiBoundReport,
}

/// Integrates `cfg`. With `out_dir`, writes `diagnostics.csv` and checkpoints there.
pub fn run_simulation(cfg: &Config, out_dir: Option<&Path>) -> Result<RunSummary, CliError> {
    let grid = cfg.torus();
    let p = cfg.params;
    let stepper = QuasiStepper::new(&grid, p, cfg.picard).map_err(|e| CliError::Solver(format!("setup: {e}")))?;
    let sp = stepper.spectral();
    let raw = MixtureState::new(0.0, cfg.initial_u(&grid), cfg.initial_phi(&grid))
        .map_err(spectral_err("initial data"))?;
    let init = stepper.project(&raw).map_err(|e| CliError::Solver(format!("initial data: {e}")))?;

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut csv = String::new();
    let _ = writeln!(csv, "{CSV_HEADER}");
    let _ = writeln!(csv, "{}", csv_row(sp, &init, None, &p).map_err(spectral_err("diagnostics"))?);

    let mass0 = init.phi.mean();
    let rho0 = density(&init.phi, &p).rho.mean();
    let mut summary = RunSummary {
        csv: String::new(),
        final_state: init.clone(),
        diagnostics: Vec::new(),
        backoffs: 0,
        max_mass_drift: 0.0,
        max_rho_drift: 0.0,
        max_constraint_ratio: 0.0,
        max_defect_ratio: f64::NEG_INFINITY,
        energy_increases: 0,
        max_mu_bar_gap: 0.0,
        bounds: PhiBoundReport::empty(cfg.theta),
    };
    summary.bounds.update(&init.phi);

    let every = cfg.output.every.max(1);
    let ck_every = cfg.output.checkpoint_every;
    let alpha = p.alpha();
    let mut count = 0usize;
    let mut failure: Option<CliError> = None;
    let schedule = Schedule {
        dt: cfg.dt,
        t_end: cfg.t_end,
        record_every: usize::MAX,
    };
    let out = stepper.run(&init, schedule, None, |state, d| {
        if failure.is_some() {
            return;
        }
        count += 1;
        let res = (|| -> Result<(), CliError> {
            summary.max_mass_drift = summary.max_mass_drift.max((state.phi.mean() - mass0).abs());
            summary.max_rho_drift = summary
                .max_rho_drift
                .max((density(&state.phi, &p).rho.mean() - rho0).abs());
            let h1 = h1_norm(sp, &state.u).map_err(spectral_err("diagnostics"))?;
            let ctol = 10.0 * cfg.picard.tol * (1.0 + h1);
            summary.max_constraint_ratio = summary.max_constraint_ratio.max(d.constraint_residual / ctol);
            summary.max_defect_ratio = summary.max_defect_ratio.max(d.energy_defect / d.energy_tol());
            if d.energy_after.total > d.energy_before.total {
                summary.energy_increases += 1;
            }
            let cp = chemical_potential(sp, &state.phi, &p).map_err(spectral_err("diagnostics"))?;
            summary.max_mu_bar_gap = summary.max_mu_bar_gap.max((state.mu_bar - cp.mean).abs());
            summary.bounds.update(&state.phi);
            summary.diagnostics.push(d.clone());
            if count % every == 0 {
                let _ = writeln!(csv, "{}", csv_row(sp, state, Some(d), &p).map_err(spectral_err("diagnostics"))?);
            }
            if let Some(dir) = out_dir {
                if ck_every > 0 && count % ck_every == 0 {
                    let path = dir.join(format!("checkpoint_{count:06}.bin"));
                    fs::write(&path, write_checkpoint(state, alpha)).map_err(io_err(&path))?;
                }
            }
            Ok(())
        })();
        if let Err(e) = res {
            failure = Some(e);
        }
    });
    let out = out.map_err(|e| CliError::Solver(format!("run: {e}")))?;
    if let Some(e) = failure {
        return Err(e);
    }
    summary.backoffs = out.backoffs;
    summary.final_state = out.states.last().cloned().expect("run keeps the final state");
    if let Some(dir) = out_dir {
        let path = dir.join("diagnostics.csv");
        fs::write(&path, &csv).map_err(io_err(&path))?;
        let path = dir.join("final.bin");
        fs::write(&path, write_checkpoint(&summary.final_state, alpha)).map_err(io_err(&path))?;
    }
    summary.csv = csv;
    Ok(summary)
}

/// Largest L² gaps in `(u, φ, μ)` between the quasi stepper at `α = δ = 0`
/// and the model H solver over `steps` steps of size `dt`.
pub fn reduction_gap(
    grid: &TorusGrid,
    base: &PhysParams,
    settings: PicardSettings,
    u0: &VectorField,
    phi0: &ScalarField,
    dt: f64,
    steps: usize,
) -> Result<[f64; 3], CliError> {
    let solver = |e: qinsch::StepError| CliError::Solver(format!("reduction: {e}"));
    let p = PhysParams::from_epsilon(0.0)
        .and_then(|p| p.with_nu(base.nu()))
        .and_then(|p| p.with_kappa(base.kappa()))
        .and_then(|p| p.with_s(base.s()))
        .and_then(|p| p.with_delta(0.0))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let quasi = QuasiStepper::new(grid, p, settings).map_err(solver)?;
    let mh = ModelHSolver::new(grid, &p, settings).map_err(solver)?;
    let mut q = quasi
        .project(&MixtureState::new(0.0, u0.clone(), phi0.clone()).map_err(spectral_err("reduction"))?)
        .map_err(solver)?;
    let mut m = mh
        .project(&ModelHState::new(0.0, u0.clone(), phi0.clone()).map_err(spectral_err("reduction"))?)
        .map_err(solver)?;
    let mut gap = [0.0f64; 3];
    for _ in 0..steps {
        q = quasi.step(&q, dt).map_err(solver)?.0;
        m = mh.step_modelh(&m, dt).map_err(solver)?.0;
        let mu_q = q.mu_p0.map(|v| v + q.mu_bar);
        let d = [
            q.u.l2_distance(&m.u).map_err(spectral_err("reduction"))?,
            q.phi.l2_distance(&m.phi).map_err(spectral_err("reduction"))?,
            mu_q.l2_distance(&m.mu).map_err(spectral_err("reduction"))?,
        ];
        for (g, v) in gap.iter_mut().zip(d) {
            *g = g.max(v);
        }
    }
    Ok(gap)
}

/// Builds the sweep setup from a run configuration.
pub fn sweep_config(cfg: &Config, reference: Reference, well_prepared: bool) -> SweepConfig {
    let grid = cfg.torus();
    SweepConfig {
        phi0: cfg.initial_phi(&grid),
        u0: cfg.initial_u(&grid),
        grid,
        base: cfg.params,
        settings: cfg.picard,
        dt: cfg.dt,
        t_end: cfg.t_end,
        reference,
        force_alpha_zero: false,
        well_prepared,
        gamma: 1.0,
        theta: cfg.theta,
    }
}

/// Runs the sweep and writes `rate_report.csv` and `summary.txt` into `out_dir`.
pub fn sweep_alpha(sc: &SweepConfig, alphas: &[f64], out_dir: Option<&Path>) -> Result<RateReport, CliError> {
    let report = alpha_sweep(sc, alphas).map_err(|e| match e {
        qinsch::relent::RelError::BadAlphas => CliError::Usage(e.to_string()),
        e => CliError::Solver(format!("sweep: {e}")),
    })?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("rate_report.csv");
        fs::write(&path, report.to_csv()).map_err(io_err(&path))?;
        let path = dir.join("summary.txt");
        fs::write(&path, report.summary()).map_err(io_err(&path))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Invariant suites over one run of `cfg`, a repeat run, and a short
/// `α = 0` comparison against the model H solver.
pub fn verify(cfg: &Config) -> Result<Vec<SuiteResult>, CliError> {
    let run = run_simulation(cfg, None)?;
    let mut rows = Vec::new();
    let mut push = |name, pass, detail: String| rows.push(SuiteResult { name, pass, detail });

    push(
        "energy inequality",
        run.max_defect_ratio <= 1.0,
        format!("max defect / tol = {:.3e}", run.max_defect_ratio),
    );
    push(
        "energy decrease",
        run.energy_increases == 0,
        format!("{} steps increased E", run.energy_increases),
    );
    push(
        "mass conservation",
        run.max_mass_drift <= 1e-11 && run.max_rho_drift <= 1e-11,
        format!("phi drift {:.2e}, rho drift {:.2e}", run.max_mass_drift, run.max_rho_drift),
    );
    push(
        "constraint",
        run.max_constraint_ratio <= 1.0,
        format!("max residual / tol = {:.3e}", run.max_constraint_ratio),
    );
    let mu_tol = 1e-10 * run.final_state.mu_bar.abs().max(1.0);
    push(
        "mu_bar identity",
        run.max_mu_bar_gap <= mu_tol,
        format!("max gap {:.2e}", run.max_mu_bar_gap),
    );
    push(
        "phi bound",
        run.bounds.pass,
        format!(
            "phi in [{:.4}, {:.4}], theta = {}",
            run.bounds.min, run.bounds.max, run.bounds.theta
        ),
    );

    let grid = cfg.torus();
    let u0 = match cfg.init.u_preset {
        crate::config::UPreset::Zero => init::taylor_green(&grid, 0.1),
        crate::config::UPreset::TaylorGreen => cfg.initial_u(&grid),
    };
    let gap = reduction_gap(&grid, &cfg.params, cfg.picard, &u0, &cfg.initial_phi(&grid), cfg.dt, 10)?;
    push(
        "alpha = 0 reduction",
        gap.iter().all(|&g| g <= 1e-9),
        format!("u {:.2e}, phi {:.2e}, mu {:.2e}", gap[0], gap[1], gap[2]),
    );

    let again = run_simulation(cfg, None)?;
    push(
        "determinism",
        again.csv == run.csv,
        format!("{} CSV bytes", run.csv.len()),
    );

    let bytes = write_checkpoint(&run.final_state, cfg.params.alpha());
    let back = crate::checkpoint::read_checkpoint(&bytes).map(|(s, _)| s);
    push(
        "checkpoint round trip",
        back.as_ref() == Ok(&run.final_state),
        format!("{} bytes", bytes.len()),
    );
    Ok(rows)
}

pub fn format_table(rows: &[SuiteResult]) -> String {
    let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{:<w$}  {}  {}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    s
}
