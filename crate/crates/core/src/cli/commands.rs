use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dynamics::{
    run_trajectory, ModelParams, ResumeRecord, RngStream, StepConfig, Trajectory, RNG_ALGORITHM,
};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeGeometry};
use crate::observables::{
    batch_means, instantaneous_structure_factor, magnetization, mf_structure_factor,
    mf_transition_point, ClassCorrelation, CorrelationAccumulator, CorrelationProfile, Sample,
    ScalarStat, StructureFactorAccumulator, WaveVector, DEFAULT_BATCHES,
};
use crate::oracle::checks::{
    check_single_spin, check_unraveling, check_xxz_dark_state, measure_gutzwiller_gap, CheckResult,
};
use crate::oracle::{
    full_wfmc_trajectory, DenseDensityMatrix, FullSample, FullStateVector, JumpOperator,
    MasterEquation,
};
use crate::state::{BlochVector, ProductState};

use super::config::{Engine, RunConfig};
use super::output::{fmt_num, write_kv, CsvWriter};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SERIES_HEADER: &[&str] = &["time", "Mx", "My", "Mz", "Sxx_inst", "jumps_this_interval"];
pub const SWEEP_HEADER: &[&str] = &[
    "jy",
    "L",
    "Sxx_k0",
    "Sxx_stderr",
    "Mx_abs_mean",
    "sample_count",
    "trajectories",
];
pub const CORRELATION_HEADER: &[&str] =
    &["dx", "dy", "distance", "corr_xx", "stderr", "pair_count", "axis_flag"];
pub const AXIS_HEADER: &[&str] = &["axis", "distance", "corr_xx", "stderr", "pair_count"];
pub const MF_HEADER: &[&str] = &["jy", "Sxx_mf"];

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

fn metadata(command: &str, cfg: &RunConfig, info: Vec<(String, String)>) -> Vec<(String, String)> {
    let mut pairs = vec![("command".to_string(), command.to_string())];
    pairs.extend(cfg.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
    pairs.push(("code_version".into(), CODE_VERSION.into()));
    pairs.push(("rng_algorithm".into(), RNG_ALGORITHM.into()));
    pairs.extend(info);
    pairs
}

fn info(k: &str, v: impl Into<String>) -> (String, String) {
    (k.to_string(), v.into())
}

/// One row of a time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub time: f64,
    pub magnetization: BlochVector,
    pub sxx: f64,
    pub jumps: f64,
}

impl SeriesRow {
    fn fields(&self) -> Vec<String> {
        let m = self.magnetization;
        vec![
            fmt_num(self.time),
            fmt_num(m.x),
            fmt_num(m.y),
            fmt_num(m.z),
            fmt_num(self.sxx),
            fmt_num(self.jumps),
        ]
    }

    fn add(&mut self, other: &SeriesRow) {
        self.magnetization.x += other.magnetization.x;
        self.magnetization.y += other.magnetization.y;
        self.magnetization.z += other.magnetization.z;
        self.sxx += other.sxx;
        self.jumps += other.jumps;
    }
}

/// Ensemble average of equally sampled series; jump counts are summed.
fn average_series(runs: &[Vec<SeriesRow>]) -> Vec<SeriesRow> {
    let m = runs.len() as f64;
    let mut out = runs[0].clone();
    for run in &runs[1..] {
        for (acc, r) in out.iter_mut().zip(run) {
            acc.add(r);
        }
    }
    for r in &mut out {
        r.magnetization.x /= m;
        r.magnetization.y /= m;
        r.magnetization.z /= m;
        r.sxx /= m;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub series_path: PathBuf,
    pub meta_path: PathBuf,
    pub rows: Vec<SeriesRow>,
    /// Trap time of a single trajectory, or of none.
    pub trapped_at: Option<f64>,
    pub trapped_trajectories: usize,
    pub total_jumps: u64,
    /// S^xx(0) averaged after burn-in with its standard error.
    pub sxx: Option<(f64, f64)>,
}

struct GutzwillerRun {
    rows: Vec<SeriesRow>,
    post_burn_in_sxx: Vec<f64>,
    trajectory: Trajectory,
}

fn run_gutzwiller(
    cfg: &RunConfig,
    geometry: &LatticeGeometry,
    mut traj: Trajectory,
    emit_current: bool,
) -> Result<GutzwillerRun> {
    let n = geometry.site_count();
    let mut rows = Vec::new();
    let mut post = Vec::new();
    let mut sx = Vec::with_capacity(n);
    let mut observer = |s: &Sample, jumps: u64| {
        let sxx = if n >= 2 {
            sx.clear();
            sx.extend(s.sx());
            instantaneous_structure_factor(&sx, geometry, WaveVector::ZERO)
        } else {
            f64::NAN
        };
        if !s.burn_in {
            post.push(sxx);
        }
        rows.push(SeriesRow {
            time: s.time,
            magnetization: magnetization(s),
            sxx,
            jumps: jumps as f64,
        });
    };
    traj.run_to(
        (cfg.t_total / cfg.step.dt).round() as u64,
        ((cfg.sample_interval / cfg.step.dt).round() as u64).max(1),
        cfg.burn_in,
        emit_current,
        &mut observer,
    )?;
    Ok(GutzwillerRun {
        rows,
        post_burn_in_sxx: post,
        trajectory: traj,
    })
}

fn time_average(values: &[f64]) -> Option<(f64, f64)> {
    if values.iter().any(|v| v.is_nan()) {
        return None;
    }
    batch_means(values, DEFAULT_BATCHES).ok()
}

fn ensemble_average(means: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let s: ScalarStat = means.into_iter().filter(|v| !v.is_nan()).collect();
    (s.count >= 2).then(|| (s.mean, s.standard_error()))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn full_row(s: &FullSample, jumps: f64) -> SeriesRow {
    let n = s.n_sites() as f64;
    let mut m = BlochVector::default();
    for b in &s.bloch {
        m.x += b.x / n;
        m.y += b.y / n;
        m.z += b.z / n;
    }
    SeriesRow {
        time: s.time,
        magnetization: m,
        sxx: s.structure_factor_k0(),
        jumps,
    }
}

fn post_burn_in(rows: &[SeriesRow], burn_in: f64) -> Vec<f64> {
    rows.iter().filter(|r| r.time >= burn_in).map(|r| r.sxx).collect()
}

/// Time series of `M_x, M_y, M_z` and the instantaneous S^xx(0). With more
/// than one trajectory every column is the ensemble average at each time.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let geometry = cfg.geometry()?;
    let tc = cfg.trajectory_config()?;
    let n = geometry.site_count();
    let pool = thread_pool(cfg.workers)?;
    let m = cfg.trajectories;

    let (rows, trapped, total_jumps, sxx, averaging) = match cfg.engine {
        Engine::Gutzwiller => {
            let initial = tc.initial_state.build(n)?;
            let runs = pool.install(|| {
                (0..m)
                    .into_par_iter()
                    .map(|k| {
                        let stream = RngStream::for_task(cfg.seed, 0, k as u32);
                        let traj =
                            Trajectory::new(&geometry, cfg.model, cfg.step, initial.clone(), stream)?;
                        run_gutzwiller(cfg, &geometry, traj, true)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            if m == 1 {
                write_checkpoint(cfg, &runs[0].trajectory)?;
            }
            let trapped: Vec<Option<f64>> = runs.iter().map(|r| r.trajectory.trapped_at()).collect();
            let jumps = runs.iter().map(|r| r.trajectory.total_jumps()).sum();
            let sxx = if m == 1 {
                time_average(&runs[0].post_burn_in_sxx)
            } else {
                ensemble_average(runs.iter().map(|r| mean(&r.post_burn_in_sxx)))
            };
            let series: Vec<Vec<SeriesRow>> = runs.into_iter().map(|r| r.rows).collect();
            (average_series(&series), trapped, jumps, sxx, if m == 1 { "time" } else { "ensemble" })
        }
        Engine::FullWfmc => {
            let psi0 = FullStateVector::from_product(&tc.initial_state.build(n)?)?;
            let runs = pool.install(|| {
                (0..m)
                    .into_par_iter()
                    .map(|k| {
                        let mut rows = Vec::new();
                        let stream = RngStream::for_task(cfg.seed, 0, k as u32).stream;
                        let jumps = full_wfmc_trajectory(
                            psi0.clone(),
                            &geometry,
                            &cfg.model,
                            &tc,
                            &cfg.step,
                            stream,
                            |s, j| rows.push(full_row(s, j as f64)),
                        )?;
                        Ok((rows, jumps))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let jumps = runs.iter().map(|r| r.1).sum();
            let sxx = if m == 1 {
                time_average(&post_burn_in(&runs[0].0, cfg.burn_in))
            } else {
                ensemble_average(runs.iter().map(|r| mean(&post_burn_in(&r.0, cfg.burn_in))))
            };
            let series: Vec<Vec<SeriesRow>> = runs.into_iter().map(|r| r.0).collect();
            (average_series(&series), vec![None; m], jumps, sxx, if m == 1 { "time" } else { "ensemble" })
        }
        Engine::Exact => {
            let rho0 = DenseDensityMatrix::from_product(&tc.initial_state.build(n)?)?;
            let me = MasterEquation::new(&geometry, &cfg.model)?;
            let stride = tc.sample_stride(cfg.step.dt);
            let end = tc.total_steps(cfg.step.dt);
            let times: Vec<f64> = (1..=end / stride)
                .map(|k| (k * stride) as f64 * cfg.step.dt)
                .collect();
            let mut rows = vec![full_row(&FullSample::from_density(&rho0, 0.0, false), f64::NAN)];
            for (rho, &t) in me.integrate_checkpoints(&rho0, &times, cfg.step.dt)?.iter().zip(&times) {
                rows.push(full_row(&FullSample::from_density(rho, t, false), f64::NAN));
            }
            let sxx = post_burn_in(&rows, cfg.burn_in);
            let sxx = (!sxx.is_empty() && !sxx[0].is_nan()).then(|| (mean(&sxx), 0.0));
            (rows, vec![None], 0, sxx, "exact")
        }
    };

    let series_path = cfg.prefixed("_series.csv");
    let mut csv = CsvWriter::create(&series_path, SERIES_HEADER)?;
    for r in &rows {
        csv.row(&r.fields())?;
    }
    csv.finish()?;

    let trapped_count = trapped.iter().filter(|t| t.is_some()).count();
    let trapped_at = if m == 1 { trapped[0] } else { None };
    let mut extra = vec![info("averaging", averaging)];
    if m == 1 {
        extra.push(info("trapped_at", trapped_at.map_or("none".into(), fmt_num)));
    } else {
        extra.push(info("trapped_trajectories", trapped_count.to_string()));
    }
    extra.push(info("total_jumps", total_jumps.to_string()));
    if let Some((v, se)) = sxx {
        extra.push(info("sxx_k0", fmt_num(v)));
        extra.push(info("sxx_stderr", fmt_num(se)));
    }
    let meta_path = cfg.prefixed("_meta.txt");
    write_kv(&meta_path, &metadata("run", cfg, extra))?;
    Ok(RunReport {
        series_path,
        meta_path,
        rows,
        trapped_at,
        trapped_trajectories: trapped_count,
        total_jumps,
        sxx,
    })
}

fn write_checkpoint(cfg: &RunConfig, traj: &Trajectory) -> Result<()> {
    let f = fs::File::create(cfg.prefixed("_state.csv"))?;
    traj.state().write_snapshot(std::io::BufWriter::new(f))?;
    fs::write(cfg.prefixed("_resume.txt"), traj.checkpoint().to_kv())?;
    Ok(())
}

/// Continues a single Gutzwiller trajectory from the checkpoint written by
/// a previous run with prefix `from`, up to `cfg.t_total`. The series holds
/// only the samples after the checkpoint.
pub fn cmd_resume(cfg: &RunConfig, from: &Path) -> Result<RunReport> {
    cfg.validate()?;
    if cfg.engine != Engine::Gutzwiller || cfg.trajectories != 1 {
        return Err(Error::config(
            "resume_from",
            "only single gutzwiller trajectories can be resumed",
        ));
    }
    let with_suffix = |s: &str| {
        let mut p = from.as_os_str().to_owned();
        p.push(s);
        PathBuf::from(p)
    };
    let state_path = with_suffix("_state.csv");
    let state = ProductState::read_snapshot(BufReader::new(fs::File::open(&state_path).map_err(
        |e| Error::config("resume_from", format!("cannot open {}: {e}", state_path.display())),
    )?))?;
    let record = ResumeRecord::from_kv(&fs::read_to_string(with_suffix("_resume.txt")).map_err(|e| {
        Error::config("resume_from", format!("cannot read resume record: {e}"))
    })?)?;
    if record.seed != cfg.seed {
        return Err(Error::config(
            "seed",
            format!("checkpoint was written with seed {}, got {}", record.seed, cfg.seed),
        ));
    }
    let geometry = cfg.geometry()?;
    let traj = Trajectory::resume(&geometry, cfg.model, cfg.step, state, &record)?;
    let run = run_gutzwiller(cfg, &geometry, traj, false)?;
    write_checkpoint(cfg, &run.trajectory)?;

    let series_path = cfg.prefixed("_series.csv");
    let mut csv = CsvWriter::create(&series_path, SERIES_HEADER)?;
    for r in &run.rows {
        csv.row(&r.fields())?;
    }
    csv.finish()?;
    let trapped_at = run.trajectory.trapped_at();
    let total_jumps = run.trajectory.total_jumps();
    let meta_path = cfg.prefixed("_meta.txt");
    write_kv(
        &meta_path,
        &metadata(
            "run",
            cfg,
            vec![
                info("averaging", "time"),
                info("resumed_from_step", record.step.to_string()),
                info("trapped_at", trapped_at.map_or("none".into(), fmt_num)),
                info("total_jumps", total_jumps.to_string()),
            ],
        ),
    )?;
    Ok(RunReport {
        series_path,
        meta_path,
        rows: run.rows,
        trapped_at,
        trapped_trajectories: usize::from(trapped_at.is_some()),
        total_jumps,
        sxx: time_average(&run.post_burn_in_sxx),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub jy: f64,
    pub size: usize,
    pub sxx: f64,
    pub sxx_stderr: f64,
    pub mx_abs_mean: f64,
    pub sample_count: usize,
    pub trajectories: usize,
}

impl SweepRow {
    fn fields(&self) -> Vec<String> {
        vec![
            fmt_num(self.jy),
            self.size.to_string(),
            fmt_num(self.sxx),
            fmt_num(self.sxx_stderr),
            fmt_num(self.mx_abs_mean),
            self.sample_count.to_string(),
            self.trajectories.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub summary_path: PathBuf,
    pub meta_path: PathBuf,
    pub rows: Vec<SweepRow>,
}

struct PointTask {
    point: usize,
    trajectory: usize,
}

struct TaskResult {
    sxx: Vec<f64>,
    mx_abs: ScalarStat,
}

/// Sweep points as `(jy, L)`, ordered by `L` and then `jy`.
pub fn sweep_points(cfg: &RunConfig) -> Result<Vec<(f64, usize)>> {
    if cfg.sweep_jy.is_empty() && cfg.sweep_sizes.is_empty() {
        return Err(Error::config("sweep_jy", "empty value list: give sweep_jy and/or sweep_sizes"));
    }
    let jys = if cfg.sweep_jy.is_empty() { vec![cfg.model.jy] } else { cfg.sweep_jy.clone() };
    let sizes = if cfg.sweep_sizes.is_empty() {
        if cfg.width != cfg.height {
            return Err(Error::config("sweep_sizes", "needed when the base lattice is not square"));
        }
        vec![cfg.width]
    } else {
        cfg.sweep_sizes.clone()
    };
    if let Some(&l) = sizes.iter().find(|&&l| l < 2) {
        return Err(Error::config("sweep_sizes", format!("sizes must be at least 2, got {l}")));
    }
    Ok(sizes
        .iter()
        .flat_map(|&l| jys.iter().map(move |&jy| (jy, l)))
        .collect())
}

/// S^xx(0) and ⟨|M_x|⟩ on an L×L grid of (jy, L) points. Every
/// (point, trajectory) task has its own random stream, and rows come out in
/// point order whatever the worker count.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.engine != Engine::Gutzwiller {
        return Err(Error::config("engine", "sweeps run the gutzwiller engine only"));
    }
    let points = sweep_points(cfg)?;
    if points.len() > u32::MAX as usize {
        return Err(Error::config("sweep_jy", "too many sweep points"));
    }
    let tc = cfg.trajectory_config()?;
    let m = cfg.trajectories;
    let tasks: Vec<PointTask> = (0..points.len())
        .flat_map(|point| (0..m).map(move |trajectory| PointTask { point, trajectory }))
        .collect();
    let geometries = points
        .iter()
        .map(|&(_, l)| build_lattice(l, l))
        .collect::<Result<Vec<_>>>()?;
    for (&(jy, _), g) in points.iter().zip(&geometries) {
        let params = ModelParams { jy, ..cfg.model };
        params.validate()?;
        tc.initial_state.build(g.site_count())?;
    }

    let pool = thread_pool(cfg.workers)?;
    let results = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let (jy, _) = points[task.point];
                let g = &geometries[task.point];
                let params = ModelParams { jy, ..cfg.model };
                let mut sf = StructureFactorAccumulator::new(g, WaveVector::ZERO)?;
                let mut mx_abs = ScalarStat::default();
                let stream = RngStream::for_task(cfg.seed, task.point as u32, task.trajectory as u32);
                run_trajectory(g, &params, &tc, &cfg.step, stream.stream, &mut |s: &Sample, _| {
                    sf.push(s);
                    if !s.burn_in {
                        mx_abs.push(magnetization(s).x.abs());
                    }
                })?;
                Ok(TaskResult {
                    sxx: sf.values().to_vec(),
                    mx_abs,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::with_capacity(points.len());
    for (p, &(jy, size)) in points.iter().enumerate() {
        let chunk = &results[p * m..(p + 1) * m];
        let (sxx, se) = if m == 1 {
            batch_means(&chunk[0].sxx, DEFAULT_BATCHES)?
        } else {
            let s: ScalarStat = chunk.iter().map(|r| mean(&r.sxx)).collect();
            (s.mean, s.standard_error())
        };
        let mx = chunk
            .iter()
            .fold(ScalarStat::default(), |acc, r| acc.merge(&r.mx_abs));
        rows.push(SweepRow {
            jy,
            size,
            sxx,
            sxx_stderr: se,
            mx_abs_mean: mx.mean,
            sample_count: chunk.iter().map(|r| r.sxx.len()).sum(),
            trajectories: m,
        });
    }

    let summary_path = cfg.prefixed("_sweep.csv");
    let mut csv = CsvWriter::create(&summary_path, SWEEP_HEADER)?;
    for r in &rows {
        csv.row(&r.fields())?;
    }
    csv.finish()?;
    let meta_path = cfg.prefixed("_meta.txt");
    write_kv(
        &meta_path,
        &metadata(
            "sweep",
            cfg,
            vec![info("averaging", if m == 1 { "time" } else { "ensemble" })],
        ),
    )?;
    Ok(SweepReport {
        summary_path,
        meta_path,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub correlation_path: PathBuf,
    pub axis_path: PathBuf,
    pub meta_path: PathBuf,
    pub profile: CorrelationProfile,
}

fn combine_profiles(profiles: &[CorrelationProfile]) -> CorrelationProfile {
    let merge = |pick: fn(&CorrelationProfile) -> &Vec<ClassCorrelation>| -> Vec<ClassCorrelation> {
        pick(&profiles[0])
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s: ScalarStat = profiles.iter().map(|p| pick(p)[i].mean).collect();
                ClassCorrelation {
                    class: c.class,
                    mean: s.mean,
                    standard_error: s.standard_error(),
                }
            })
            .collect()
    };
    CorrelationProfile {
        classes: merge(|p| &p.classes),
        x_axis: merge(|p| &p.x_axis),
        y_axis: merge(|p| &p.y_axis),
        sample_count: profiles.iter().map(|p| p.sample_count).sum(),
    }
}

/// ⟨σ_i^x σ_j^x⟩ per minimum-image distance class, plus the axis-resolved
/// profiles in `<prefix>_axis.csv`.
pub fn cmd_correlate(cfg: &RunConfig) -> Result<CorrelationReport> {
    cfg.validate()?;
    if cfg.engine != Engine::Gutzwiller {
        return Err(Error::config("engine", "correlations run the gutzwiller engine only"));
    }
    let geometry = cfg.geometry()?;
    let tc = cfg.trajectory_config()?;
    tc.initial_state.build(geometry.site_count())?;
    CorrelationAccumulator::new(&geometry).map_err(|e| Error::config("width", e.to_string()))?;
    let pool = thread_pool(cfg.workers)?;
    let profiles = pool.install(|| {
        (0..cfg.trajectories)
            .into_par_iter()
            .map(|k| {
                let mut acc = CorrelationAccumulator::new(&geometry)?;
                let stream = RngStream::for_task(cfg.seed, 0, k as u32);
                run_trajectory(&geometry, &cfg.model, &tc, &cfg.step, stream.stream, &mut |s: &Sample, _| {
                    acc.push(s)
                })?;
                acc.profile()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let profile = if profiles.len() == 1 {
        profiles.into_iter().next().expect("one profile")
    } else {
        combine_profiles(&profiles)
    };

    let correlation_path = cfg.prefixed("_corr.csv");
    let mut csv = CsvWriter::create(&correlation_path, CORRELATION_HEADER)?;
    for c in &profile.classes {
        csv.row(&[
            c.class.dx.to_string(),
            c.class.dy.to_string(),
            fmt_num(c.class.distance),
            fmt_num(c.mean),
            fmt_num(c.standard_error),
            c.class.pair_count.to_string(),
            u8::from(c.class.axis).to_string(),
        ])?;
    }
    csv.finish()?;
    let axis_path = cfg.prefixed("_axis.csv");
    let mut csv = CsvWriter::create(&axis_path, AXIS_HEADER)?;
    for (name, list) in [("x", &profile.x_axis), ("y", &profile.y_axis)] {
        for c in list {
            csv.row(&[
                name.to_string(),
                fmt_num(c.class.distance),
                fmt_num(c.mean),
                fmt_num(c.standard_error),
                c.class.pair_count.to_string(),
            ])?;
        }
    }
    csv.finish()?;
    let meta_path = cfg.prefixed("_meta.txt");
    write_kv(
        &meta_path,
        &metadata(
            "correlate",
            cfg,
            vec![
                info("averaging", if cfg.trajectories == 1 { "time" } else { "ensemble" }),
                info("sample_count", profile.sample_count.to_string()),
            ],
        ),
    )?;
    Ok(CorrelationReport {
        correlation_path,
        axis_path,
        meta_path,
        profile,
    })
}

/// Default `jy` grid of the mean-field curve: 1.0 to 2.5 in steps of 0.01.
pub fn default_mf_grid() -> Vec<f64> {
    (0..=150).map(|k| 1.0 + k as f64 * 0.01).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfCurveReport {
    pub curve_path: PathBuf,
    pub meta_path: PathBuf,
    pub rows: Vec<(f64, f64)>,
    pub transition_point: Option<f64>,
}

/// Closed-form mean-field S^xx(0) over `sweep_jy` (or the default grid).
pub fn cmd_mf_curve(cfg: &RunConfig) -> Result<MfCurveReport> {
    cfg.model.validate()?;
    let grid = if cfg.sweep_jy.is_empty() { default_mf_grid() } else { cfg.sweep_jy.clone() };
    let rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&jy| (jy, mf_structure_factor(&ModelParams { jy, ..cfg.model })))
        .collect();
    let curve_path = cfg.prefixed("_mf.csv");
    let mut csv = CsvWriter::create(&curve_path, MF_HEADER)?;
    for &(jy, s) in &rows {
        csv.row(&[fmt_num(jy), fmt_num(s)])?;
    }
    csv.finish()?;
    let transition_point = mf_transition_point(cfg.model.jx, cfg.model.jz, cfg.model.gamma);
    let meta_path = cfg.prefixed("_meta.txt");
    write_kv(
        &meta_path,
        &metadata(
            "mf-curve",
            cfg,
            vec![
                info("transition_point", transition_point.map_or("none".into(), fmt_num)),
                info("no_transition", transition_point.is_none().to_string()),
            ],
        ),
    )?;
    Ok(MfCurveReport {
        curve_path,
        meta_path,
        rows,
        transition_point,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub sites: usize,
    pub model: ModelParams,
    pub t: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub step: StepConfig,
    pub workers: usize,
    pub jump: JumpOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<CheckResult>,
    /// Measured product-state approximation error (two or more sites).
    pub gap: Option<CheckResult>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        let mut v: Vec<String> = self.checks.iter().map(CheckResult::report_line).collect();
        if let Some(g) = &self.gap {
            v.push(format!("measure{}", &g.report_line()["check".len()..]));
        }
        v.push(format!("overall={}", if self.passed() { "PASS" } else { "FAIL" }));
        v
    }
}

/// Runs the oracle invariants: single-spin decay against its closed form,
/// unraveling exactness of the full wavefunction Monte Carlo against the
/// dense master equation, and the XXZ dark state.
pub fn cmd_oracle_check(cfg: &OracleConfig) -> Result<OracleReport> {
    if ![1, 2, 4].contains(&cfg.sites) {
        return Err(Error::config("sites", format!("must be 1, 2 or 4, got {}", cfg.sites)));
    }
    cfg.model.validate()?;
    cfg.step.validate_for(&cfg.model)?;
    if !(cfg.model.gamma > 0.0) {
        return Err(Error::config("gamma", "oracle checks need a positive decay rate"));
    }
    if !(cfg.t > 0.0) {
        return Err(Error::config("t_total", format!("must be positive, got {}", cfg.t)));
    }
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        let mut checks = vec![
            check_single_spin(cfg.model.gamma, cfg.t, cfg.trajectories, cfg.seed, cfg.step)?,
            check_unraveling(cfg.sites, cfg.model, cfg.t, cfg.trajectories, cfg.seed, cfg.step, cfg.jump)?,
        ];
        checks.push(check_xxz_dark_state(cfg.model, cfg.seed, cfg.step)?);
        let gap = if cfg.sites >= 2 {
            Some(measure_gutzwiller_gap(cfg.sites, cfg.model, cfg.t, cfg.trajectories, cfg.seed, cfg.step)?.0)
        } else {
            None
        };
        Ok(OracleReport { checks, gap })
    })
}
