//! Gutzwiller Monte Carlo simulation of the dissipative XYZ spin model on
//! periodic two-dimensional lattices.
//!
//! Quantum trajectories of the Lindblad dynamics are confined to
//! site-factorized wavefunctions: each site evolves under a mean-field
//! non-Hermitian Hamiltonian built from its neighbors' Bloch vectors and
//! decays by local σ^- jumps. An exact small-system oracle (dense master
//! equation and unrestricted wavefunction Monte Carlo) validates the
//! trajectory machinery.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod state;

pub use error::{Error, Result};
