use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{ModelParams, RngStream, StepConfig, TrajectoryConfig};
use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::state::{BlochVector, ProductState, MIN_NORM};

use super::hamiltonian::{XyzOperator, MAX_SITES};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// Unrestricted 2^N-component wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct FullStateVector {
    n_sites: usize,
    amps: Vec<Complex64>,
}

impl FullStateVector {
    pub fn new(n_sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_sites > MAX_SITES {
            return Err(Error::DimensionCap {
                sites: n_sites,
                cap: MAX_SITES,
            });
        }
        if amps.len() != 1 << n_sites {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes for {n_sites} sites",
                amps.len()
            )));
        }
        Ok(FullStateVector { n_sites, amps })
    }

    /// Tensor product of the site spinors.
    pub fn from_product(state: &ProductState) -> Result<Self> {
        let n = state.len();
        if n > MAX_SITES {
            return Err(Error::DimensionCap { sites: n, cap: MAX_SITES });
        }
        let amps = (0..1usize << n)
            .map(|a| {
                (0..n).fold(Complex64::new(1.0, 0.0), |acc, j| {
                    let s = state.spinor(j);
                    acc * if (a >> j) & 1 == 0 { s.up } else { s.down }
                })
            })
            .collect();
        Ok(FullStateVector { n_sites: n, amps })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr().sqrt();
        if !(norm > MIN_NORM) {
            return Err(Error::StepSize(format!("state norm collapsed to {norm:e}")));
        }
        let inv = 1.0 / norm;
        self.amps.iter_mut().for_each(|z| *z *= inv);
        Ok(())
    }

    /// ⟨n_j⟩ = probability that site `j` is spin-up.
    pub fn up_population(&self, site: usize) -> f64 {
        let m = 1 << site;
        self.amps
            .iter()
            .enumerate()
            .filter(|(a, _)| a & m == 0)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    pub fn bloch(&self, site: usize) -> BlochVector {
        let m = 1 << site;
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for (a, &amp) in self.amps.iter().enumerate() {
            if a & m == 0 {
                // conj(ψ_up) ψ_down summed over the rest of the lattice.
                let c = amp.conj() * self.amps[a | m];
                x += 2.0 * c.re;
                y += 2.0 * c.im;
                z += amp.norm_sqr();
            } else {
                z -= amp.norm_sqr();
            }
        }
        BlochVector::new(x, y, z)
    }

    /// ⟨σ_i^x σ_j^x⟩ for `i != j`.
    pub fn xx(&self, i: usize, j: usize) -> f64 {
        let m = (1 << i) | (1 << j);
        self.amps
            .iter()
            .enumerate()
            .map(|(a, z)| (z.conj() * self.amps[a ^ m]).re)
            .sum()
    }
}

/// Expectation values recorded from an unrestricted trajectory or a
/// density matrix: per-site Bloch vectors and the ⟨σ^x σ^x⟩ matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSample {
    pub time: f64,
    pub bloch: Vec<BlochVector>,
    /// Row-major N×N, with ones on the diagonal.
    pub xx: Vec<f64>,
    pub burn_in: bool,
}

impl FullSample {
    pub fn from_state(psi: &FullStateVector, time: f64, burn_in: bool) -> Self {
        let n = psi.n_sites;
        let mut xx = vec![1.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = psi.xx(i, j);
                xx[i * n + j] = v;
                xx[j * n + i] = v;
            }
        }
        FullSample {
            time,
            bloch: (0..n).map(|j| psi.bloch(j)).collect(),
            xx,
            burn_in,
        }
    }

    pub fn from_density(rho: &super::DenseDensityMatrix, time: f64, burn_in: bool) -> Self {
        let n = rho.n_sites();
        let mut xx = vec![1.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rho.xx(i, j);
                xx[i * n + j] = v;
                xx[j * n + i] = v;
            }
        }
        FullSample {
            time,
            bloch: (0..n).map(|j| rho.bloch(j)).collect(),
            xx,
            burn_in,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.bloch.len()
    }

    /// Σ_{j≠l} ⟨σ_j^x σ_l^x⟩ / (N(N-1)).
    pub fn structure_factor_k0(&self) -> f64 {
        let n = self.n_sites();
        if n < 2 {
            return f64::NAN;
        }
        let total: f64 = self.xx.iter().sum::<f64>() - n as f64;
        total / (n * (n - 1)) as f64
    }
}

/// Which operator a quantum jump applies. Anything but `Lowering` is wrong
/// on purpose and exists to check that the oracle comparison notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpOperator {
    #[default]
    Lowering,
    /// σ^x in place of σ^-.
    CorruptSigmaX,
}

/// Wavefunction Monte Carlo on the full 2^N Hilbert space with the same
/// step contract as the product-state engine: first-order jump
/// probabilities from the pre-step state, one uniform per site in site
/// order, and no drift during a step in which a jump happened.
#[derive(Debug, Clone)]
pub struct FullTrajectory {
    op: XyzOperator,
    config: StepConfig,
    jump: JumpOperator,
    psi: FullStateVector,
    rng: ChaCha8Rng,
    step: u64,
    total_jumps: u64,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
    jumped: Vec<bool>,
}

impl FullTrajectory {
    pub fn new(
        geometry: &LatticeGeometry,
        params: &ModelParams,
        config: StepConfig,
        psi0: FullStateVector,
        stream: RngStream,
    ) -> Result<Self> {
        config.validate_for(params)?;
        let op = XyzOperator::new(geometry, params)?;
        if psi0.n_sites != op.n_sites {
            return Err(Error::InvalidArgument(format!(
                "state has {} sites, lattice has {}",
                psi0.n_sites, op.n_sites
            )));
        }
        let d = op.dim;
        let n = op.n_sites;
        Ok(FullTrajectory {
            op,
            config,
            jump: JumpOperator::Lowering,
            psi: psi0,
            rng: stream.rng(),
            step: 0,
            total_jumps: 0,
            k: [vec![ZERO; d], vec![ZERO; d], vec![ZERO; d], vec![ZERO; d]],
            stage: vec![ZERO; d],
            jumped: vec![false; n],
        })
    }

    pub fn with_jump_operator(mut self, jump: JumpOperator) -> Self {
        self.jump = jump;
        self
    }

    pub fn state(&self) -> &FullStateVector {
        &self.psi
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn total_jumps(&self) -> u64 {
        self.total_jumps
    }

    /// `out = -i H_eff ψ` with `H_eff = H - i γ/2 Σ_j n_j`.
    fn drift(op: &XyzOperator, psi: &[Complex64], out: &mut [Complex64]) {
        let half_gamma = 0.5 * op.gamma;
        for (a, o) in out.iter_mut().enumerate() {
            *o = psi[a] * Complex64::new(op.diag[a], -half_gamma * op.n_up[a] as f64);
        }
        for &(first, mask) in &op.bond_masks {
            for a in 0..psi.len() {
                out[a ^ mask] += psi[a] * op.flip_coefficient(a, first, mask);
            }
        }
        out.iter_mut().for_each(|z| *z *= MINUS_I);
    }

    fn apply_jump(&mut self, site: usize) -> bool {
        let m = 1 << site;
        let amps = &mut self.psi.amps;
        match self.jump {
            JumpOperator::Lowering => {
                for a in 0..amps.len() {
                    if a & m == 0 {
                        amps[a | m] = amps[a];
                        amps[a] = ZERO;
                    }
                }
            }
            JumpOperator::CorruptSigmaX => {
                for a in 0..amps.len() {
                    if a & m == 0 {
                        amps.swap(a, a | m);
                    }
                }
            }
        }
        self.psi.norm_sqr() > MIN_NORM * MIN_NORM
    }

    /// Advances one step and returns the number of jumps applied.
    pub fn step(&mut self) -> Result<u64> {
        self.step += 1;
        let n = self.op.n_sites;
        let scale = self.op.gamma * self.config.dt;
        let mut any = false;
        for j in 0..n {
            let p = scale * self.psi.up_population(j);
            if p > self.config.max_jump_prob {
                return Err(Error::config(
                    "dt",
                    format!("jump probability {p} on site {j} exceeds max_jump_prob"),
                ));
            }
            let u: f64 = self.rng.random();
            self.jumped[j] = u < p;
            any |= self.jumped[j];
        }
        if any {
            let mut count = 0;
            for j in 0..n {
                if !self.jumped[j] {
                    continue;
                }
                let before = self.psi.clone();
                if self.apply_jump(j) {
                    self.psi.normalize()?;
                    count += 1;
                } else {
                    // A later jump in the same step can annihilate the state
                    // (its conditional probability is zero); it is dropped.
                    self.psi = before;
                }
            }
            self.total_jumps += count;
            return Ok(count);
        }

        let dt = self.config.dt;
        let d = self.op.dim;
        Self::drift(&self.op, &self.psi.amps, &mut self.k[0]);
        for s in 1..4 {
            let h = if s == 3 { dt } else { 0.5 * dt };
            for a in 0..d {
                self.stage[a] = self.psi.amps[a] + self.k[s - 1][a] * h;
            }
            let (_, tail) = self.k.split_at_mut(s);
            Self::drift(&self.op, &self.stage, &mut tail[0]);
        }
        let w = dt / 6.0;
        for a in 0..d {
            let k = self.k[0][a] + (self.k[1][a] + self.k[2][a]) * 2.0 + self.k[3][a];
            self.psi.amps[a] += k * w;
        }
        self.psi.normalize()?;
        Ok(0)
    }
}

/// Runs one unrestricted trajectory, emitting a [`FullSample`] every
/// `sample_interval` together with the jumps since the previous sample.
pub fn full_wfmc_trajectory<F: FnMut(&FullSample, u64)>(
    psi0: FullStateVector,
    geometry: &LatticeGeometry,
    params: &ModelParams,
    traj_config: &TrajectoryConfig,
    step_config: &StepConfig,
    stream: u64,
    mut observer: F,
) -> Result<u64> {
    traj_config.validate(step_config)?;
    let mut traj = FullTrajectory::new(
        geometry,
        params,
        *step_config,
        psi0,
        RngStream::new(traj_config.seed, stream),
    )?;
    let end = traj_config.total_steps(step_config.dt);
    let stride = traj_config.sample_stride(step_config.dt);
    let burn_in = traj_config.burn_in;
    observer(&FullSample::from_state(traj.state(), 0.0, burn_in > 0.0), 0);
    let mut pending = 0;
    while traj.step_index() < end {
        pending += traj.step()?;
        if traj.step_index() % stride == 0 {
            let t = traj.time();
            observer(&FullSample::from_state(traj.state(), t, t < burn_in), pending);
            pending = 0;
        }
    }
    Ok(traj.total_jumps())
}
