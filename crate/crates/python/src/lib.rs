//! Python bindings for the Gutzwiller Monte Carlo engine.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gwmc_core::cli::{cmd_oracle_check, default_workers, OracleConfig};
use gwmc_core::dynamics::{
    run_trajectory as core_run_trajectory, InitialState, ModelParams, RngStream, StepConfig,
    Trajectory as CoreTrajectory, TrajectoryConfig,
};
use gwmc_core::lattice::{build_lattice, LatticeGeometry};
use gwmc_core::observables::{
    correlation_profile, instantaneous_structure_factor, magnetization, mf_structure_factor,
    mf_transition_point, Sample, StructureFactorAccumulator, WaveVector,
};
use gwmc_core::oracle::{single_spin_analytic as core_single_spin, JumpOperator};
use gwmc_core::state::BlochVector;
use gwmc_core::Error;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn initial_state(name: &str) -> PyResult<InitialState> {
    match name {
        "plus_x" | "+x" => Ok(InitialState::PlusX),
        "minus_x" | "-x" => Ok(InitialState::MinusX),
        other => Err(PyValueError::new_err(format!("unknown initial state {other:?}"))),
    }
}

fn triple(b: BlochVector) -> (f64, f64, f64) {
    (b.x, b.y, b.z)
}

/// Periodic rectangular lattice with nearest-neighbour bonds.
#[pyclass(name = "Lattice", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLattice {
    inner: LatticeGeometry,
}

#[pymethods]
impl PyLattice {
    #[new]
    fn new(width: usize, height: usize) -> PyResult<Self> {
        Ok(PyLattice { inner: build_lattice(width, height).map_err(to_py)? })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn site_count(&self) -> usize {
        self.inner.site_count()
    }

    fn neighbors(&self, site: usize) -> PyResult<Vec<usize>> {
        if site >= self.inner.site_count() {
            return Err(PyValueError::new_err("site index out of range"));
        }
        Ok(self.inner.neighbors(site).to_vec())
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        self.inner.bonds().to_vec()
    }

    fn min_image_offset(&self, i: usize, j: usize) -> PyResult<(i64, i64)> {
        let n = self.inner.site_count();
        if i >= n || j >= n {
            return Err(PyValueError::new_err("site index out of range"));
        }
        Ok(self.inner.min_image_offset(i, j))
    }

    fn __repr__(&self) -> String {
        format!("Lattice({}, {})", self.inner.width(), self.inner.height())
    }
}

/// Couplings `jx`, `jy`, `jz` and decay rate `gamma`.
#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (jx = 0.9, jy = 1.2, jz = 1.0, gamma = 1.0))]
    fn new(jx: f64, jy: f64, jz: f64, gamma: f64) -> PyResult<Self> {
        Ok(PyModelParams { inner: ModelParams::new(jx, jy, jz, gamma).map_err(to_py)? })
    }

    #[getter]
    fn jx(&self) -> f64 {
        self.inner.jx
    }

    #[getter]
    fn jy(&self) -> f64 {
        self.inner.jy
    }

    #[getter]
    fn jz(&self) -> f64 {
        self.inner.jz
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("ModelParams(jx={}, jy={}, jz={}, gamma={})", p.jx, p.jy, p.jz, p.gamma)
    }
}

/// A single stepwise Gutzwiller trajectory.
#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: CoreTrajectory,
}

#[pymethods]
impl PyTrajectory {
    #[new]
    #[pyo3(signature = (lattice, params, seed = 1, stream = 0, initial = "plus_x", dt = 0.01, max_jump_prob = 0.05))]
    fn new(
        lattice: &PyLattice,
        params: &PyModelParams,
        seed: u64,
        stream: u64,
        initial: &str,
        dt: f64,
        max_jump_prob: f64,
    ) -> PyResult<Self> {
        let state = initial_state(initial)?
            .build(lattice.inner.site_count())
            .map_err(to_py)?;
        let step = StepConfig { dt, max_jump_prob };
        let inner = CoreTrajectory::new(&lattice.inner, params.inner, step, state, RngStream::new(seed, stream))
            .map_err(to_py)?;
        Ok(PyTrajectory { inner })
    }

    /// Advances `steps` time steps.
    #[pyo3(signature = (steps = 1))]
    fn step(&mut self, steps: u64) -> PyResult<()> {
        for _ in 0..steps {
            self.inner.step().map_err(to_py)?;
        }
        Ok(())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn trapped_at(&self) -> Option<f64> {
        self.inner.trapped_at()
    }

    #[getter]
    fn total_jumps(&self) -> u64 {
        self.inner.total_jumps()
    }

    /// Per-site Bloch vectors `(x, y, z)`.
    fn bloch(&self) -> Vec<(f64, f64, f64)> {
        self.inner.state().bloch_vectors().into_iter().map(triple).collect()
    }

    fn magnetization(&self) -> (f64, f64, f64) {
        triple(self.inner.state().magnetization())
    }
}

fn trajectory_config(t_total: f64, burn_in: f64, sample_interval: f64, seed: u64, initial: &str) -> PyResult<TrajectoryConfig> {
    Ok(TrajectoryConfig {
        t_total,
        burn_in,
        sample_interval,
        seed,
        initial_state: initial_state(initial)?,
    })
}

/// Runs one trajectory and returns rows `(time, mx, my, mz, sxx_inst, jumps)`.
#[pyfunction]
#[pyo3(signature = (lattice, params, t_total, burn_in = 0.0, sample_interval = 1.0, seed = 1, initial = "plus_x", dt = 0.01))]
#[allow(clippy::too_many_arguments)]
fn run_trajectory(
    py: Python<'_>,
    lattice: &PyLattice,
    params: &PyModelParams,
    t_total: f64,
    burn_in: f64,
    sample_interval: f64,
    seed: u64,
    initial: &str,
    dt: f64,
) -> PyResult<Vec<(f64, f64, f64, f64, f64, u64)>> {
    let tc = trajectory_config(t_total, burn_in, sample_interval, seed, initial)?;
    let step = StepConfig { dt, ..StepConfig::default() };
    let g = &lattice.inner;
    let p = params.inner;
    py.detach(|| {
        let mut rows = Vec::new();
        let mut sx = Vec::new();
        core_run_trajectory(g, &p, &tc, &step, 0, &mut |s: &Sample, jumps| {
            let m = magnetization(s);
            sx.clear();
            sx.extend(s.sx());
            let sxx = instantaneous_structure_factor(&sx, g, WaveVector::ZERO);
            rows.push((s.time, m.x, m.y, m.z, sxx, jumps));
        })
        .map(|_| rows)
    })
    .map_err(to_py)
}

/// Time-averaged S^xx(0) after burn-in with its batch-means standard error.
#[pyfunction]
#[pyo3(signature = (lattice, params, t_total, burn_in = 200.0, sample_interval = 1.0, seed = 1, initial = "plus_x"))]
fn structure_factor(
    py: Python<'_>,
    lattice: &PyLattice,
    params: &PyModelParams,
    t_total: f64,
    burn_in: f64,
    sample_interval: f64,
    seed: u64,
    initial: &str,
) -> PyResult<(f64, f64)> {
    let tc = trajectory_config(t_total, burn_in, sample_interval, seed, initial)?;
    let g = &lattice.inner;
    let p = params.inner;
    py.detach(|| {
        let mut acc = StructureFactorAccumulator::new(g, WaveVector::ZERO)?;
        core_run_trajectory(g, &p, &tc, &StepConfig::default(), 0, &mut |s: &Sample, _| {
            acc.push(s);
        })?;
        acc.estimate().map(|e| (e.value, e.standard_error))
    })
    .map_err(to_py)
}

/// Instantaneous structure factor of one set of x components.
#[pyfunction]
#[pyo3(signature = (sx, lattice, kx = 0.0, ky = 0.0))]
fn instantaneous_sxx(sx: Vec<f64>, lattice: &PyLattice, kx: f64, ky: f64) -> PyResult<f64> {
    if sx.len() != lattice.inner.site_count() {
        return Err(PyValueError::new_err("one value per lattice site expected"));
    }
    Ok(instantaneous_structure_factor(&sx, &lattice.inner, WaveVector { kx, ky }))
}

/// Correlation ⟨σ^x σ^x⟩ per minimum-image distance class as rows
/// `(dx, dy, distance, mean, stderr)`.
#[pyfunction]
#[pyo3(signature = (lattice, params, t_total, burn_in = 200.0, sample_interval = 1.0, seed = 1))]
fn correlations(
    py: Python<'_>,
    lattice: &PyLattice,
    params: &PyModelParams,
    t_total: f64,
    burn_in: f64,
    sample_interval: f64,
    seed: u64,
) -> PyResult<Vec<(i64, i64, f64, f64, f64)>> {
    let tc = trajectory_config(t_total, burn_in, sample_interval, seed, "plus_x")?;
    let g = &lattice.inner;
    let p = params.inner;
    py.detach(|| {
        let mut samples = Vec::new();
        core_run_trajectory(g, &p, &tc, &StepConfig::default(), 0, &mut |s: &Sample, _| {
            if !s.burn_in {
                samples.push(s.clone());
            }
        })?;
        let profile = correlation_profile(&samples, g)?;
        Ok(profile
            .classes
            .iter()
            .map(|c| (c.class.dx, c.class.dy, c.class.distance, c.mean, c.standard_error))
            .collect())
    })
    .map_err(to_py)
}

/// Closed-form single-site mean-field S^xx(0).
#[pyfunction]
fn mean_field_sxx(params: &PyModelParams) -> f64 {
    mf_structure_factor(&params.inner)
}

/// Smallest `jy` with a nonzero mean-field order, or None.
#[pyfunction]
#[pyo3(signature = (jx = 0.9, jz = 1.0, gamma = 1.0))]
fn mean_field_transition(jx: f64, jz: f64, gamma: f64) -> Option<f64> {
    mf_transition_point(jx, jz, gamma)
}

/// Exact Bloch vector of a single decaying spin at time `t`.
#[pyfunction]
#[pyo3(signature = (t, initial = (1.0, 0.0, 0.0), gamma = 1.0))]
fn single_spin_analytic(t: f64, initial: (f64, f64, f64), gamma: f64) -> (f64, f64, f64) {
    triple(core_single_spin(t, BlochVector::new(initial.0, initial.1, initial.2), gamma))
}

/// Runs the oracle checks and returns `(passed, report_lines)`.
#[pyfunction]
#[pyo3(signature = (sites = 2, params = None, t = 10.0, trajectories = 4000, seed = 1))]
fn oracle_check(
    py: Python<'_>,
    sites: usize,
    params: Option<&PyModelParams>,
    t: f64,
    trajectories: usize,
    seed: u64,
) -> PyResult<(bool, Vec<String>)> {
    let cfg = OracleConfig {
        sites,
        model: params.map(|p| p.inner).unwrap_or_default(),
        t,
        trajectories,
        seed,
        step: StepConfig::default(),
        workers: default_workers(),
        jump: JumpOperator::Lowering,
    };
    py.detach(|| cmd_oracle_check(&cfg))
        .map(|r| (r.passed(), r.lines()))
        .map_err(to_py)
}

#[pymodule]
fn gwmc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(structure_factor, m)?)?;
    m.add_function(wrap_pyfunction!(instantaneous_sxx, m)?)?;
    m.add_function(wrap_pyfunction!(correlations, m)?)?;
    m.add_function(wrap_pyfunction!(mean_field_sxx, m)?)?;
    m.add_function(wrap_pyfunction!(mean_field_transition, m)?)?;
    m.add_function(wrap_pyfunction!(single_spin_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
