//! Diagnostics CSV rows.

use std::fmt::Write as _;

use qinsch::constitutive::{density, dissipation, total_energy};
use qinsch::stepper::constraint_residual;
use qinsch::{MixtureState, PhysParams, Spectral, SpectralError, StepDiagnostics};

pub const CSV_HEADER: &str = "t,E_total,E_kin,E_free,E_frac,D_visc,D_mu,D_p,mass_phi,mass_rho,phi_min,phi_max,constraint_residual,picard_iters,energy_defect";

/// One diagnostics row. Without step telemetry (the initial state) the
/// dissipation uses the state's own viscosity, and iterations and defect are 0.
pub fn csv_row(
    sp: &Spectral,
    state: &MixtureState,
    step: Option<&StepDiagnostics>,
    p: &PhysParams,
) -> Result<String, SpectralError> {
    let (energy, diss, constraint, iters, defect) = match step {
        Some(d) => (
            d.energy_after,
            d.dissipation,
            d.constraint_residual,
            d.picard_iters,
            d.energy_defect,
        ),
        None => (
            total_energy(sp, &state.u, &state.phi, p)?,
            dissipation(sp, &state.u, &state.phi, &state.mu_p0, &state.p0, p)?,
            constraint_residual(sp, state, p)?,
            0,
            0.0,
        ),
    };
    let rho = density(&state.phi, p).rho;
    let mut s = String::new();
    let _ = write!(
        s,
        "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
        state.t,
        energy.total,
        energy.kinetic,
        energy.potential,
        energy.fractional,
        diss.visc,
        diss.mu,
        diss.pressure,
        state.phi.integral(),
        rho.integral(),
        state.phi.min(),
        state.phi.max(),
        constraint,
        iters,
        defect
    );
    Ok(s)
}
