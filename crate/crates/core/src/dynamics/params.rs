use crate::error::{Error, Result};
use crate::state::{init_all_plus_x, ProductState};

use super::step::is_dark_state;

/// Couplings of the XYZ Hamiltonian and the decay rate, all in units of γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(jx: f64, jy: f64, jz: f64, gamma: f64) -> Result<Self> {
        let p = ModelParams { jx, jy, jz, gamma };
        p.validate()?;
        Ok(p)
    }

    /// J_x = 0.9, J_z = 1, γ = 1 with the given J_y.
    pub fn with_jy(jy: f64) -> Self {
        ModelParams {
            jx: 0.9,
            jy,
            jz: 1.0,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("jx", self.jx), ("jy", self.jy), ("jz", self.jz)] {
            if !v.is_finite() {
                return Err(Error::config(name, format!("must be finite, got {v}")));
            }
        }
        // γ = 0 is allowed: trajectories then never jump.
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::config(
                "gamma",
                format!("must be non-negative, got {}", self.gamma),
            ));
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::with_jy(1.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub max_jump_prob: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: 0.01,
            max_jump_prob: 0.05,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.max_jump_prob > 0.0 && self.max_jump_prob < 0.5) {
            return Err(Error::config(
                "max_jump_prob",
                format!("must lie in (0, 0.5), got {}", self.max_jump_prob),
            ));
        }
        Ok(())
    }

    /// Rejects step sizes whose worst-case single-site jump probability γ·dt
    /// exceeds the ceiling.
    pub fn validate_for(&self, params: &ModelParams) -> Result<()> {
        self.validate()?;
        let worst = params.gamma * self.dt;
        if worst > self.max_jump_prob {
            return Err(Error::config(
                "dt",
                format!(
                    "gamma*dt = {worst} exceeds max_jump_prob = {}",
                    self.max_jump_prob
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    PlusX,
    MinusX,
    Snapshot(ProductState),
}

impl InitialState {
    pub fn name(&self) -> &'static str {
        match self {
            InitialState::PlusX => "plus_x",
            InitialState::MinusX => "minus_x",
            InitialState::Snapshot(_) => "snapshot",
        }
    }

    /// Builds the initial product state for `n` sites.
    pub fn build(&self, n: usize) -> Result<ProductState> {
        let state = match self {
            InitialState::PlusX => init_all_plus_x(n, false),
            InitialState::MinusX => init_all_plus_x(n, true),
            InitialState::Snapshot(s) => {
                if s.len() != n {
                    return Err(Error::config(
                        "initial_state",
                        format!("snapshot has {} sites, lattice has {n}", s.len()),
                    ));
                }
                if s.max_norm_deviation() > 1e-10 {
                    return Err(Error::config("initial_state", "snapshot spinors are not normalized"));
                }
                s.clone()
            }
        };
        if is_dark_state(&state) {
            return Err(Error::config(
                "initial_state",
                "the all-down state is a fixed point of the product-state dynamics for every \
                 coupling (artificial dark state); start with a finite xy magnetization",
            ));
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub t_total: f64,
    pub burn_in: f64,
    pub sample_interval: f64,
    pub seed: u64,
    pub initial_state: InitialState,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            t_total: 2000.0,
            burn_in: 200.0,
            sample_interval: 1.0,
            seed: 1,
            initial_state: InitialState::PlusX,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self, step: &StepConfig) -> Result<()> {
        if !(self.t_total > 0.0) || !self.t_total.is_finite() {
            return Err(Error::config("t_total", format!("must be positive, got {}", self.t_total)));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_total) {
            return Err(Error::config(
                "burn_in",
                format!("must satisfy 0 <= burn_in < t_total, got {}", self.burn_in),
            ));
        }
        if !(self.sample_interval >= step.dt * (1.0 - 1e-9)) {
            return Err(Error::config(
                "sample_interval",
                format!("must be at least dt = {}, got {}", step.dt, self.sample_interval),
            ));
        }
        Ok(())
    }

    pub fn total_steps(&self, dt: f64) -> u64 {
        (self.t_total / dt).round() as u64
    }

    pub fn sample_stride(&self, dt: f64) -> u64 {
        ((self.sample_interval / dt).round() as u64).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Spinor;

    #[test]
    fn step_ceiling() {
        let p = ModelParams::with_jy(1.2);
        assert!(StepConfig::default().validate_for(&p).is_ok());
        let big = StepConfig {
            dt: 1.0,
            max_jump_prob: 0.05,
        };
        assert!(matches!(big.validate_for(&p), Err(Error::Config { .. })));
        let bad = StepConfig {
            dt: 0.01,
            max_jump_prob: 0.5,
        };
        assert!(bad.validate().is_err());
        let neg = StepConfig {
            dt: -0.01,
            max_jump_prob: 0.05,
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn trajectory_config_bounds() {
        let step = StepConfig::default();
        let mut t = TrajectoryConfig::default();
        assert!(t.validate(&step).is_ok());
        t.burn_in = t.t_total;
        assert!(t.validate(&step).is_err());
        t.burn_in = 0.0;
        t.sample_interval = 0.001;
        assert!(t.validate(&step).is_err());
        assert!(ModelParams::new(0.9, 1.2, 1.0, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn dark_initial_state_rejected() {
        let down = ProductState::uniform(4, Spinor::DOWN);
        assert!(InitialState::Snapshot(down).build(4).is_err());
        assert!(InitialState::Snapshot(init_all_plus_x(3, false)).build(4).is_err());
        assert!(InitialState::MinusX.build(4).is_ok());
    }
}
