use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::state::{bloch_components, ProductState, Spinor, MIN_NORM};

use super::params::{ModelParams, StepConfig};

/// `|s_x|` and `|s_y|` bound below which every site counts as spin-down.
pub const DARK_STATE_TOLERANCE: f64 = 1e-12;

pub type Matrix2 = [[Complex64; 2]; 2];

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Sum of the neighbors' Bloch vectors seen by one site.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanField {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

pub fn mean_field(i: usize, state: &ProductState, geometry: &LatticeGeometry) -> MeanField {
    let mut b = MeanField::default();
    for &j in geometry.neighbors(i) {
        let s = state.spinor(j).bloch();
        b.bx += s.x;
        b.by += s.y;
        b.bz += s.z;
    }
    b
}

/// Single-site effective Hamiltonian in the (up, down) basis:
/// `J_x b_x σ^x + J_y b_y σ^y + J_z b_z σ^z - i γ/2 σ^+σ^-`.
pub fn local_effective_hamiltonian(b: &MeanField, p: &ModelParams) -> Matrix2 {
    let a = p.jx * b.bx;
    let c = p.jy * b.by;
    let z = p.jz * b.bz;
    [
        [Complex64::new(z, -0.5 * p.gamma), Complex64::new(a, -c)],
        [Complex64::new(a, c), Complex64::new(-z, 0.0)],
    ]
}

/// Jump probabilities `γ dt |up_i|²` evaluated on `state`.
pub fn jump_probabilities(state: &ProductState, p: &ModelParams, dt: f64) -> Vec<f64> {
    state
        .up_amplitudes()
        .iter()
        .map(|u| p.gamma * dt * u.norm_sqr())
        .collect()
}

/// Applies σ^- to site `i` and renormalizes: the site ends exactly spin-down.
pub fn apply_jump(i: usize, state: &mut ProductState) -> Result<()> {
    if state.up[i] == Complex64::new(0.0, 0.0) {
        return Err(Error::Logic(format!(
            "quantum jump on site {i} whose spin-up amplitude is zero"
        )));
    }
    state.set_spinor(i, Spinor::DOWN);
    Ok(())
}

/// True when every site is spin-down to within [`DARK_STATE_TOLERANCE`]: a
/// fixed point of the product-state dynamics for any coupling.
pub fn is_dark_state(state: &ProductState) -> bool {
    state.spinors().all(|s| {
        let b = s.bloch();
        b.x.abs() < DARK_STATE_TOLERANCE && b.y.abs() < DARK_STATE_TOLERANCE && b.z < 0.0
    })
}

/// Reusable integrator for one lattice and parameter set.
#[derive(Debug, Clone)]
pub struct GutzwillerStepper {
    geometry: LatticeGeometry,
    params: ModelParams,
    config: StepConfig,
    sx: Vec<f64>,
    sy: Vec<f64>,
    sz: Vec<f64>,
    k_up: [Vec<Complex64>; 4],
    k_down: [Vec<Complex64>; 4],
    stage_up: Vec<Complex64>,
    stage_down: Vec<Complex64>,
    frozen: Vec<bool>,
}

impl GutzwillerStepper {
    pub fn new(geometry: &LatticeGeometry, params: ModelParams, config: StepConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let n = geometry.site_count();
        let zeros = || vec![Complex64::new(0.0, 0.0); n];
        Ok(GutzwillerStepper {
            geometry: geometry.clone(),
            params,
            config,
            sx: vec![0.0; n],
            sy: vec![0.0; n],
            sz: vec![0.0; n],
            k_up: [zeros(), zeros(), zeros(), zeros()],
            k_down: [zeros(), zeros(), zeros(), zeros()],
            stage_up: zeros(),
            stage_down: zeros(),
            frozen: vec![false; n],
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &StepConfig {
        &self.config
    }

    fn check_len(&self, state: &ProductState) -> Result<()> {
        if state.len() != self.geometry.site_count() {
            return Err(Error::InvalidArgument(format!(
                "state has {} sites, lattice has {}",
                state.len(),
                self.geometry.site_count()
            )));
        }
        Ok(())
    }

    /// One RK4 step of the no-jump drift for all sites not marked frozen,
    /// followed by renormalization.
    fn rk4(&mut self, state: &mut ProductState) -> Result<()> {
        let dt = self.config.dt;
        let Self {
            geometry,
            params,
            sx,
            sy,
            sz,
            k_up,
            k_down,
            stage_up,
            stage_down,
            frozen,
            ..
        } = self;
        let mut field = FieldScratch { sx, sy, sz };
        for k in 0..4 {
            let (up, down): (&[Complex64], &[Complex64]) = if k == 0 {
                (&state.up, &state.down)
            } else {
                let h = if k == 3 { dt } else { 0.5 * dt };
                for i in 0..state.len() {
                    stage_up[i] = state.up[i] + k_up[k - 1][i] * h;
                    stage_down[i] = state.down[i] + k_down[k - 1][i] * h;
                }
                (stage_up, stage_down)
            };
            derivative(geometry, params, frozen, &mut field, up, down, &mut k_up[k], &mut k_down[k]);
        }

        let w = dt / 6.0;
        for i in 0..state.len() {
            if frozen[i] {
                continue;
            }
            let ku = k_up[0][i] + (k_up[1][i] + k_up[2][i]) * 2.0 + k_up[3][i];
            let kd = k_down[0][i] + (k_down[1][i] + k_down[2][i]) * 2.0 + k_down[3][i];
            let u = state.up[i] + ku * w;
            let d = state.down[i] + kd * w;
            let norm = (u.norm_sqr() + d.norm_sqr()).sqrt();
            if !(norm > MIN_NORM) {
                return Err(Error::StepSize(format!(
                    "spinor norm {norm:e} on site {i} after a drift step of dt = {dt}"
                )));
            }
            let inv = 1.0 / norm;
            state.up[i] = u * inv;
            state.down[i] = d * inv;
        }
        Ok(())
    }

    /// Deterministic (no-jump) evolution of every site over one step.
    pub fn deterministic_step(&mut self, state: &mut ProductState) -> Result<()> {
        self.check_len(state)?;
        self.frozen.iter_mut().for_each(|f| *f = false);
        self.rk4(state)
    }

    /// One trajectory step. Jump probabilities come from the pre-step state
    /// and one uniform variate is drawn per site in site order; jumped sites
    /// are set to spin-down and held there while the others drift. Indices of
    /// jumped sites are appended to `jumps`.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        state: &mut ProductState,
        rng: &mut R,
        jumps: &mut Vec<usize>,
    ) -> Result<()> {
        self.check_len(state)?;
        let scale = self.params.gamma * self.config.dt;
        let mut any = false;
        for i in 0..state.len() {
            let p = scale * state.up[i].norm_sqr();
            if p > self.config.max_jump_prob {
                return Err(Error::config(
                    "dt",
                    format!(
                        "jump probability {p} on site {i} exceeds max_jump_prob = {}",
                        self.config.max_jump_prob
                    ),
                ));
            }
            let u: f64 = rng.random();
            let jump = u < p;
            self.frozen[i] = jump;
            any |= jump;
        }
        if any {
            for i in 0..state.len() {
                if self.frozen[i] {
                    apply_jump(i, state)?;
                    jumps.push(i);
                }
            }
        }
        self.rk4(state)
    }
}

struct FieldScratch<'a> {
    sx: &'a mut [f64],
    sy: &'a mut [f64],
    sz: &'a mut [f64],
}

/// `dψ_i/dt = -i h_i(Ψ) ψ_i` for every unfrozen site, with mean fields taken
/// from the normalized Bloch vectors of the stage amplitudes `(up, down)`.
#[allow(clippy::too_many_arguments)]
fn derivative(
    geometry: &LatticeGeometry,
    p: &ModelParams,
    frozen: &[bool],
    field: &mut FieldScratch<'_>,
    up: &[Complex64],
    down: &[Complex64],
    k_up: &mut [Complex64],
    k_down: &mut [Complex64],
) {
    let n = up.len();
    for i in 0..n {
        let b = bloch_components(up[i], down[i]);
        field.sx[i] = b.x;
        field.sy[i] = b.y;
        field.sz[i] = b.z;
    }
    let half_gamma = 0.5 * p.gamma;
    for i in 0..n {
        if frozen[i] {
            k_up[i] = Complex64::new(0.0, 0.0);
            k_down[i] = Complex64::new(0.0, 0.0);
            continue;
        }
        let (mut bx, mut by, mut bz) = (0.0, 0.0, 0.0);
        for &j in geometry.neighbors(i) {
            bx += field.sx[j];
            by += field.sy[j];
            bz += field.sz[j];
        }
        let h00 = Complex64::new(p.jz * bz, -half_gamma);
        let h01 = Complex64::new(p.jx * bx, -p.jy * by);
        let h10 = Complex64::new(p.jx * bx, p.jy * by);
        let h11 = Complex64::new(-p.jz * bz, 0.0);
        let (u, d) = (up[i], down[i]);
        k_up[i] = -I * (h00 * u + h01 * d);
        k_down[i] = -I * (h10 * u + h11 * d);
    }
}

pub fn deterministic_step(
    state: &ProductState,
    geometry: &LatticeGeometry,
    params: &ModelParams,
    dt: f64,
) -> Result<ProductState> {
    let mut stepper = GutzwillerStepper::new(
        geometry,
        *params,
        StepConfig {
            dt,
            ..StepConfig::default()
        },
    )?;
    let mut out = state.clone();
    stepper.deterministic_step(&mut out)?;
    Ok(out)
}

pub fn advance<R: Rng + ?Sized>(
    state: &ProductState,
    geometry: &LatticeGeometry,
    params: &ModelParams,
    config: &StepConfig,
    rng: &mut R,
) -> Result<(ProductState, Vec<usize>)> {
    let mut stepper = GutzwillerStepper::new(geometry, *params, *config)?;
    let mut out = state.clone();
    let mut jumps = Vec::new();
    stepper.advance(&mut out, rng, &mut jumps)?;
    Ok((out, jumps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::state::init_all_plus_x;
    use num_complex::Complex64 as C;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn params(jx: f64, jy: f64, jz: f64, gamma: f64) -> ModelParams {
        ModelParams { jx, jy, jz, gamma }
    }

    fn y_state() -> Spinor {
        Spinor::new(C::new(FRAC_1_SQRT_2, 0.0), C::new(0.0, FRAC_1_SQRT_2))
    }

    #[test]
    fn mean_field_examples() {
        let g = build_lattice(4, 4).unwrap();
        let b = mean_field(5, &init_all_plus_x(16, false), &g);
        assert!((b.bx - 4.0).abs() < 1e-14 && b.by.abs() < 1e-14 && b.bz.abs() < 1e-14);

        let down = ProductState::uniform(16, Spinor::DOWN);
        assert_eq!(mean_field(5, &down, &g), MeanField { bx: 0.0, by: 0.0, bz: -4.0 });

        let g = build_lattice(2, 1).unwrap();
        let s = ProductState::from_spinors(&[Spinor::UP, y_state()]);
        let b = mean_field(0, &s, &g);
        assert!(b.bx.abs() < 1e-15 && (b.by - 1.0).abs() < 1e-15 && b.bz.abs() < 1e-15);
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let p = params(0.9, 1.2, 1.0, 1.0);
        let h = local_effective_hamiltonian(&MeanField::default(), &p);
        assert_eq!(h[0][0], C::new(0.0, -0.5));
        assert_eq!(h[1][1], C::new(0.0, 0.0));
        assert_eq!(h[0][1], C::new(0.0, 0.0));

        let h = local_effective_hamiltonian(&MeanField { bx: 4.0, by: 0.0, bz: 0.0 }, &p);
        assert!((h[0][1] - C::new(3.6, 0.0)).norm() < 1e-14);
        assert!((h[1][0] - C::new(3.6, 0.0)).norm() < 1e-14);

        let h = local_effective_hamiltonian(&MeanField { bx: 0.0, by: 0.0, bz: -4.0 }, &p);
        assert_eq!(h[0][0], C::new(-4.0, -0.5));
        assert_eq!(h[1][1], C::new(4.0, 0.0));
        // h·(0,1) = (0, 4): the down state is an eigenvector.
        let hv0 = h[0][0] * C::new(0.0, 0.0) + h[0][1] * C::new(1.0, 0.0);
        assert_eq!(hv0, C::new(0.0, 0.0));
    }

    #[test]
    fn dark_state_is_stationary() {
        let g = build_lattice(4, 4).unwrap();
        let down = ProductState::uniform(16, Spinor::DOWN);
        for p in [params(0.9, 1.7, 1.0, 1.0), params(-2.0, 3.0, 0.5, 0.3)] {
            let next = deterministic_step(&down, &g, &p, 0.01).unwrap();
            for (a, b) in next.bloch_vectors().iter().zip(down.bloch_vectors()) {
                assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12 && (a.z - b.z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isotropic_unitary_keeps_aligned_state() {
        let g = build_lattice(4, 4).unwrap();
        let s = init_all_plus_x(16, false);
        let mut state = s.clone();
        for _ in 0..100 {
            state = deterministic_step(&state, &g, &params(0.7, 0.7, 0.7, 0.0), 0.01).unwrap();
        }
        for b in state.bloch_vectors() {
            assert!((b.x - 1.0).abs() < 1e-12 && b.y.abs() < 1e-12 && b.z.abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_no_jump_evolution() {
        // Conditional no-jump state of a decaying spin starting in +x:
        // ψ ∝ (e^{-γt/2}, 1) so s_x = sech(γt/2), s_z = -tanh(γt/2).
        let g = build_lattice(1, 1).unwrap();
        let gamma = 0.8;
        let p = params(0.0, 0.0, 0.0, gamma);
        let dt = 0.01;
        let mut state = init_all_plus_x(1, false);
        for step in 1..=300 {
            state = deterministic_step(&state, &g, &p, dt).unwrap();
            let t = step as f64 * dt;
            let b = state.spinor(0).bloch();
            assert!((b.x - 1.0 / (0.5 * gamma * t).cosh()).abs() < 1e-10);
            assert!((b.z + (0.5 * gamma * t).tanh()).abs() < 1e-10);
            assert!(b.y.abs() < 1e-14);
        }
    }

    #[test]
    fn jump_probability_examples() {
        let p = params(0.9, 1.2, 1.0, 1.0);
        let s = ProductState::from_spinors(&[Spinor::UP, Spinor::DOWN, Spinor::plus_x()]);
        let probs = jump_probabilities(&s, &p, 0.01);
        assert!((probs[0] - 0.01).abs() < 1e-15);
        assert_eq!(probs[1], 0.0);
        assert!((probs[2] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn jump_examples() {
        let mut s = ProductState::from_spinors(&[Spinor::UP, Spinor::plus_x(), y_state()]);
        let before = s.bloch_vectors();
        apply_jump(0, &mut s).unwrap();
        apply_jump(1, &mut s).unwrap();
        assert_eq!(s.spinor(0), Spinor::DOWN);
        assert_eq!(s.spinor(1), Spinor::DOWN);
        assert_eq!(s.bloch_vectors()[2], before[2]);
        assert!(matches!(apply_jump(0, &mut s), Err(Error::Logic(_))));
    }

    #[test]
    fn ceiling_is_enforced() {
        let g = build_lattice(1, 1).unwrap();
        let p = params(0.0, 0.0, 0.0, 1.0);
        let cfg = StepConfig { dt: 0.1, max_jump_prob: 0.05 };
        let s = ProductState::from_spinors(&[Spinor::UP]);
        let mut rng = crate::dynamics::RngStream::new(1, 0).rng();
        assert!(matches!(advance(&s, &g, &p, &cfg, &mut rng), Err(Error::Config { .. })));
    }

    #[test]
    fn advance_leaves_dark_state_alone() {
        let g = build_lattice(3, 3).unwrap();
        let p = params(0.9, 1.2, 1.0, 1.0);
        let mut state = ProductState::uniform(9, Spinor::DOWN);
        let mut stepper = GutzwillerStepper::new(&g, p, StepConfig::default()).unwrap();
        let mut rng = crate::dynamics::RngStream::new(5, 0).rng();
        let mut jumps = Vec::new();
        for _ in 0..50 {
            stepper.advance(&mut state, &mut rng, &mut jumps).unwrap();
        }
        assert!(jumps.is_empty());
        assert!(is_dark_state(&state));
    }
}
