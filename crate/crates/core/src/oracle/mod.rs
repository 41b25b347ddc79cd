//! Exact small-system references: dense Lindblad integration, unrestricted
//! wavefunction Monte Carlo and the closed-form single-spin solution, plus
//! the ensemble comparisons built on them.

mod analytic;
pub mod checks;
mod dense;
mod hamiltonian;
mod wfmc;

pub use analytic::single_spin_analytic;
pub use dense::{
    integrate_master_equation, lindblad_rhs, DenseDensityMatrix, MasterEquation,
    HERMITICITY_TOLERANCE, POSITIVITY_TOLERANCE, TRACE_TOLERANCE,
};
pub use hamiltonian::MAX_SITES;
pub use wfmc::{full_wfmc_trajectory, FullSample, FullStateVector, FullTrajectory, JumpOperator};
