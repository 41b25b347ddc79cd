//! Gutzwiller Monte Carlo trajectories: mean-field non-Hermitian drift on the
//! product manifold, interrupted by local σ^- jumps.

mod params;
mod rng;
mod step;
mod trajectory;

pub use params::{InitialState, ModelParams, StepConfig, TrajectoryConfig};
pub use rng::{RngStream, RNG_ALGORITHM};
pub use step::{
    advance, apply_jump, deterministic_step, is_dark_state, jump_probabilities,
    local_effective_hamiltonian, mean_field, GutzwillerStepper, Matrix2, MeanField,
    DARK_STATE_TOLERANCE,
};
pub use trajectory::{run_trajectory, Observer, ResumeRecord, Trajectory, TrajectoryOutcome};
