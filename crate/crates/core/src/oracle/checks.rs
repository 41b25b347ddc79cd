//! Ensemble-versus-reference comparisons used by `oracle-check` and the tests.

use rayon::prelude::*;

use crate::dynamics::{ModelParams, RngStream, StepConfig, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeGeometry};
use crate::observables::ScalarStat;
use crate::state::{init_all_plus_x, BlochVector, ProductState};

use super::analytic::single_spin_analytic;
use super::dense::{DenseDensityMatrix, MasterEquation};
use super::wfmc::{FullSample, FullStateVector, FullTrajectory, JumpOperator};

/// Ensemble deviations are accepted up to this many standard errors.
pub const SIGMA_TOLERANCE: f64 = 3.0;
/// Absolute slack for observables whose ensemble spread is exactly zero.
const ROUNDOFF: f64 = 1e-9;

/// Local observables compared at each checkpoint: ⟨σ_0^x⟩, ⟨σ_0^y⟩,
/// ⟨σ_0^z⟩ and, with two or more sites, ⟨σ_0^x σ_1^x⟩.
pub fn observable_names(n_sites: usize) -> Vec<&'static str> {
    let mut v = vec!["sx_0", "sy_0", "sz_0"];
    if n_sites >= 2 {
        v.push("xx_01");
    }
    v
}

fn observables_of(bloch0: BlochVector, xx01: Option<f64>) -> Vec<f64> {
    let mut v = vec![bloch0.x, bloch0.y, bloch0.z];
    v.extend(xx01);
    v
}

fn full_observables(s: &FullSample) -> Vec<f64> {
    let n = s.n_sites();
    observables_of(s.bloch[0], (n >= 2).then(|| s.xx[1]))
}

/// Ensemble statistics of every observable at every checkpoint.
#[derive(Debug, Clone)]
pub struct EnsembleSeries {
    pub names: Vec<&'static str>,
    pub times: Vec<f64>,
    /// `stats[checkpoint][observable]`
    pub stats: Vec<Vec<ScalarStat>>,
    pub trajectories: usize,
}

/// Exact values of the same observables on the same checkpoints.
#[derive(Debug, Clone)]
pub struct ReferenceSeries {
    pub names: Vec<&'static str>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub geometry: LatticeGeometry,
    pub params: ModelParams,
    pub step: StepConfig,
    pub initial: ProductState,
    pub checkpoints: Vec<f64>,
    pub trajectories: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    fn checkpoint_steps(&self) -> Result<Vec<u64>> {
        let mut prev = 0;
        self.checkpoints
            .iter()
            .map(|&t| {
                let s = (t / self.step.dt).round() as u64;
                if !(t > 0.0) || s < prev {
                    return Err(Error::InvalidArgument(
                        "checkpoints must be positive and ascending".into(),
                    ));
                }
                prev = s;
                Ok(s)
            })
            .collect()
    }

    fn aggregate(&self, per_traj: Vec<Vec<Vec<f64>>>) -> EnsembleSeries {
        let names = observable_names(self.geometry.site_count());
        let mut stats = vec![vec![ScalarStat::default(); names.len()]; self.checkpoints.len()];
        for traj in &per_traj {
            for (c, obs) in traj.iter().enumerate() {
                for (o, &v) in obs.iter().enumerate() {
                    stats[c][o].push(v);
                }
            }
        }
        EnsembleSeries {
            names,
            times: self.checkpoints.clone(),
            stats,
            trajectories: per_traj.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trajectories < 2 {
            return Err(Error::config("trajectories", "need at least two trajectories"));
        }
        if self.trajectories > u32::MAX as usize {
            return Err(Error::config("trajectories", "too many trajectories"));
        }
        Ok(())
    }
}

/// Product-state (Gutzwiller) trajectory ensemble. Trajectory `k` uses
/// random stream `(seed, k)`.
pub fn gutzwiller_ensemble(spec: &EnsembleSpec) -> Result<EnsembleSeries> {
    spec.validate()?;
    let steps = spec.checkpoint_steps()?;
    let per_traj = (0..spec.trajectories)
        .into_par_iter()
        .map(|k| {
            let stream = RngStream::for_task(spec.seed, 0, k as u32);
            let mut traj =
                Trajectory::new(&spec.geometry, spec.params, spec.step, spec.initial.clone(), stream)?;
            let mut out = Vec::with_capacity(steps.len());
            for &s in &steps {
                while traj.step_index() < s {
                    traj.step()?;
                }
                let st = traj.state();
                let b0 = st.spinor(0).bloch();
                let xx = (st.len() >= 2).then(|| b0.x * st.spinor(1).bloch().x);
                out.push(observables_of(b0, xx));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(spec.aggregate(per_traj))
}

/// Unrestricted wavefunction Monte Carlo ensemble on the same streams.
pub fn full_wfmc_ensemble(spec: &EnsembleSpec, jump: JumpOperator) -> Result<EnsembleSeries> {
    spec.validate()?;
    let steps = spec.checkpoint_steps()?;
    let psi0 = FullStateVector::from_product(&spec.initial)?;
    let per_traj = (0..spec.trajectories)
        .into_par_iter()
        .map(|k| {
            let stream = RngStream::for_task(spec.seed, 0, k as u32);
            let mut traj =
                FullTrajectory::new(&spec.geometry, &spec.params, spec.step, psi0.clone(), stream)?
                    .with_jump_operator(jump);
            let mut out = Vec::with_capacity(steps.len());
            for &s in &steps {
                while traj.step_index() < s {
                    traj.step()?;
                }
                out.push(full_observables(&FullSample::from_state(traj.state(), traj.time(), false)));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(spec.aggregate(per_traj))
}

/// Dense master-equation values at the ensemble checkpoints.
pub fn exact_reference(spec: &EnsembleSpec) -> Result<ReferenceSeries> {
    let rho0 = DenseDensityMatrix::from_product(&spec.initial)?;
    let me = MasterEquation::new(&spec.geometry, &spec.params)?;
    let rhos = me.integrate_checkpoints(&rho0, &spec.checkpoints, spec.step.dt)?;
    Ok(ReferenceSeries {
        names: observable_names(spec.geometry.site_count()),
        times: spec.checkpoints.clone(),
        values: rhos
            .iter()
            .zip(&spec.checkpoints)
            .map(|(r, &t)| full_observables(&FullSample::from_density(r, t, false)))
            .collect(),
    })
}

/// One ensemble observable compared with its reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub observable: &'static str,
    pub time: f64,
    pub reference: f64,
    pub mean: f64,
    pub standard_error: f64,
}

impl Comparison {
    pub fn deviation(&self) -> f64 {
        (self.mean - self.reference).abs()
    }

    /// Deviation in units of the standard error.
    pub fn z_score(&self) -> f64 {
        let d = self.deviation();
        if d <= ROUNDOFF {
            0.0
        } else {
            d / self.standard_error
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.deviation() <= sigmas * self.standard_error + ROUNDOFF
    }
}

pub fn compare(ensemble: &EnsembleSeries, reference: &ReferenceSeries) -> Vec<Comparison> {
    let mut out = Vec::new();
    for (c, &t) in ensemble.times.iter().enumerate() {
        for (o, &name) in ensemble.names.iter().enumerate() {
            let s = ensemble.stats[c][o];
            out.push(Comparison {
                observable: name,
                time: t,
                reference: reference.values[c][o],
                mean: s.mean,
                standard_error: s.standard_error(),
            });
        }
    }
    out
}

/// Outcome of one oracle invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_deviation: f64,
    pub max_z: f64,
    pub tolerance: String,
    pub detail: String,
}

impl CheckResult {
    fn from_comparisons(name: &'static str, cmp: &[Comparison], sigmas: f64) -> Self {
        let failures: Vec<String> = cmp
            .iter()
            .filter(|c| !c.within(sigmas))
            .map(|c| format!("{}@t={}", c.observable, c.time))
            .collect();
        CheckResult {
            name,
            passed: failures.is_empty(),
            max_deviation: cmp.iter().map(Comparison::deviation).fold(0.0, f64::max),
            max_z: cmp.iter().map(Comparison::z_score).fold(0.0, f64::max),
            tolerance: format!("{sigmas} standard errors"),
            detail: if failures.is_empty() {
                format!("{} comparisons", cmp.len())
            } else {
                format!("outside tolerance: {}", failures.join(" "))
            },
        }
    }

    /// One `key=value` line suitable for machine parsing.
    pub fn report_line(&self) -> String {
        format!(
            "check={} status={} max_abs_deviation={:.6e} max_z={:.3} tolerance=\"{}\" detail=\"{}\"",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.max_deviation,
            self.max_z,
            self.tolerance,
            self.detail
        )
    }
}

/// Checkpoints `{1, 2, 5, 10}/γ` that fall inside `(0, t]`, plus `t` itself.
pub fn default_checkpoints(t: f64, gamma: f64) -> Vec<f64> {
    let mut v: Vec<f64> = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|c| c / gamma)
        .filter(|&c| c < t - 1e-9)
        .collect();
    v.push(t);
    v
}

/// Lattice used for an `n`-site oracle comparison.
pub fn oracle_lattice(n: usize) -> Result<LatticeGeometry> {
    match n {
        1 => build_lattice(1, 1),
        2 => build_lattice(2, 1),
        4 => build_lattice(2, 2),
        _ => Err(Error::config("sites", format!("oracle checks support 1, 2 or 4 sites, got {n}"))),
    }
}

/// Decoupled spin ensemble against the closed-form decay, at every `0.5/γ`
/// up to `t`. The dense integrator is held to the same solution at 1e-8.
pub fn check_single_spin(gamma: f64, t: f64, trajectories: usize, seed: u64, step: StepConfig) -> Result<CheckResult> {
    let params = ModelParams { jx: 0.0, jy: 0.0, jz: 0.0, gamma };
    let n_points = ((t * gamma) / 0.5).floor().max(1.0) as usize;
    let checkpoints: Vec<f64> = (1..=n_points).map(|k| k as f64 * 0.5 / gamma).collect();
    let spec = EnsembleSpec {
        geometry: build_lattice(1, 1)?,
        params,
        step,
        initial: init_all_plus_x(1, false),
        checkpoints: checkpoints.clone(),
        trajectories,
        seed,
    };
    let ens = gutzwiller_ensemble(&spec)?;
    let x0 = BlochVector::new(1.0, 0.0, 0.0);
    let reference = ReferenceSeries {
        names: observable_names(1),
        times: checkpoints.clone(),
        values: checkpoints
            .iter()
            .map(|&tc| observables_of(single_spin_analytic(tc, x0, gamma), None))
            .collect(),
    };
    let mut result = CheckResult::from_comparisons("analytic_single_spin", &compare(&ens, &reference), SIGMA_TOLERANCE);
    let dense = exact_reference(&spec)?;
    let dense_dev = dense
        .values
        .iter()
        .zip(&reference.values)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    if dense_dev > 1e-8 {
        result.passed = false;
        result.detail = format!("{}; dense integrator off by {dense_dev:e}", result.detail);
    }
    Ok(result)
}

/// Full wavefunction Monte Carlo against the dense master equation.
pub fn check_unraveling(
    n_sites: usize,
    params: ModelParams,
    t: f64,
    trajectories: usize,
    seed: u64,
    step: StepConfig,
    jump: JumpOperator,
) -> Result<CheckResult> {
    let geometry = oracle_lattice(n_sites)?;
    let spec = EnsembleSpec {
        initial: init_all_plus_x(n_sites, false),
        checkpoints: default_checkpoints(t, params.gamma),
        geometry,
        params,
        step,
        trajectories,
        seed,
    };
    let ens = full_wfmc_ensemble(&spec, jump)?;
    let exact = exact_reference(&spec)?;
    Ok(CheckResult::from_comparisons("unraveling_exactness", &compare(&ens, &exact), SIGMA_TOLERANCE))
}

/// XXZ couplings (`J_y = J_x`): the exact two-site state relaxes to all-down,
/// and a 4×4 product-state trajectory gets trapped there before `200/γ`.
pub fn check_xxz_dark_state(params: ModelParams, seed: u64, step: StepConfig) -> Result<CheckResult> {
    let xxz = ModelParams { jy: params.jx, ..params };
    let g2 = build_lattice(2, 1)?;
    let rho0 = DenseDensityMatrix::from_product(&init_all_plus_x(2, false))?;
    let t_relax = 30.0 / xxz.gamma;
    let rho = MasterEquation::new(&g2, &xxz)?
        .integrate_checkpoints(&rho0, &[t_relax], step.dt)?
        .pop()
        .expect("one checkpoint");
    let missing = 1.0 - rho.all_down_population();

    let g4 = build_lattice(4, 4)?;
    let mut traj = Trajectory::new(&g4, xxz, step, init_all_plus_x(16, false), RngStream::new(seed, 0))?;
    let horizon = (200.0 / xxz.gamma / step.dt).round() as u64;
    while traj.trapped_at().is_none() && traj.step_index() < horizon {
        traj.step()?;
    }
    let trapped = traj.trapped_at();
    let passed = missing < 1e-9 && trapped.is_some();
    Ok(CheckResult {
        name: "xxz_dark_state",
        passed,
        max_deviation: missing,
        max_z: 0.0,
        tolerance: format!("exact all-down deficit < 1e-9 at t={t_relax}; 4x4 trap before t=200/gamma"),
        detail: match trapped {
            Some(t) => format!("4x4 trapped_at={t}"),
            None => "4x4 trajectory never trapped".into(),
        },
    })
}

/// Product-state ensemble against the exact solution. The residual is the
/// approximation error of the product ansatz and must not vanish.
pub fn measure_gutzwiller_gap(
    n_sites: usize,
    params: ModelParams,
    t: f64,
    trajectories: usize,
    seed: u64,
    step: StepConfig,
) -> Result<(CheckResult, Vec<Comparison>)> {
    let geometry = oracle_lattice(n_sites)?;
    let spec = EnsembleSpec {
        initial: init_all_plus_x(n_sites, false),
        checkpoints: default_checkpoints(t, params.gamma),
        geometry,
        params,
        step,
        trajectories,
        seed,
    };
    let cmp = compare(&gutzwiller_ensemble(&spec)?, &exact_reference(&spec)?);
    let mut r = CheckResult::from_comparisons("gutzwiller_gap", &cmp, SIGMA_TOLERANCE);
    r.passed = r.max_z > SIGMA_TOLERANCE;
    r.tolerance = format!("max_z must exceed {SIGMA_TOLERANCE}");
    r.detail = format!("{} comparisons", cmp.len());
    Ok((r, cmp))
}
