use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::observables::Sample;
use crate::state::{ProductState, Spinor};

use super::params::{ModelParams, StepConfig, TrajectoryConfig};
use super::rng::{RngStream, RNG_ALGORITHM};
use super::step::{is_dark_state, GutzwillerStepper};

/// Receives samples as a trajectory runs, together with the number of jumps
/// since the previous sample.
pub trait Observer {
    fn observe(&mut self, sample: &Sample, jumps: u64);
}

impl<F: FnMut(&Sample, u64)> Observer for F {
    fn observe(&mut self, sample: &Sample, jumps: u64) {
        self(sample, jumps)
    }
}

/// A single Gutzwiller trajectory: state, random stream and clock.
#[derive(Debug, Clone)]
pub struct Trajectory {
    stepper: GutzwillerStepper,
    state: ProductState,
    stream: RngStream,
    rng: ChaCha8Rng,
    step: u64,
    trapped_at: Option<f64>,
    total_jumps: u64,
    pending_jumps: u64,
    jump_buf: Vec<usize>,
    sample: Sample,
}

/// Everything besides the product state needed to continue a trajectory
/// bit-for-bit. Serialized as `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ResumeRecord {
    pub step: u64,
    pub dt: f64,
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
    pub trapped_at: Option<f64>,
    pub total_jumps: u64,
    pub pending_jumps: u64,
    /// Free-form accumulator partials carried along by the caller.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub trapped_at: Option<f64>,
    pub total_jumps: u64,
    pub final_state: ProductState,
}

impl Trajectory {
    pub fn new(
        geometry: &LatticeGeometry,
        params: ModelParams,
        step_config: StepConfig,
        initial: ProductState,
        stream: RngStream,
    ) -> Result<Self> {
        step_config.validate_for(&params)?;
        if initial.len() != geometry.site_count() {
            return Err(Error::InvalidArgument(format!(
                "initial state has {} sites, lattice has {}",
                initial.len(),
                geometry.site_count()
            )));
        }
        let n = geometry.site_count();
        let mut traj = Trajectory {
            stepper: GutzwillerStepper::new(geometry, params, step_config)?,
            state: initial,
            stream,
            rng: stream.rng(),
            step: 0,
            trapped_at: None,
            total_jumps: 0,
            pending_jumps: 0,
            jump_buf: Vec::new(),
            sample: Sample {
                time: 0.0,
                bloch: Vec::with_capacity(n),
                burn_in: false,
            },
        };
        traj.check_trap();
        Ok(traj)
    }

    pub fn resume(
        geometry: &LatticeGeometry,
        params: ModelParams,
        step_config: StepConfig,
        state: ProductState,
        record: &ResumeRecord,
    ) -> Result<Self> {
        if (record.dt - step_config.dt).abs() > 0.0 {
            return Err(Error::config(
                "dt",
                format!("checkpoint was written with dt = {}, got {}", record.dt, step_config.dt),
            ));
        }
        let stream = RngStream::new(record.seed, record.stream);
        let mut traj = Trajectory::new(geometry, params, step_config, state, stream)?;
        traj.rng = stream.rng_at(record.word_pos);
        traj.step = record.step;
        traj.trapped_at = record.trapped_at;
        traj.total_jumps = record.total_jumps;
        traj.pending_jumps = record.pending_jumps;
        Ok(traj)
    }

    pub fn checkpoint(&self) -> ResumeRecord {
        ResumeRecord {
            step: self.step,
            dt: self.dt(),
            seed: self.stream.seed,
            stream: self.stream.stream,
            word_pos: self.rng.get_word_pos(),
            trapped_at: self.trapped_at,
            total_jumps: self.total_jumps,
            pending_jumps: self.pending_jumps,
            extra: BTreeMap::new(),
        }
    }

    pub fn state(&self) -> &ProductState {
        &self.state
    }

    pub fn into_state(self) -> ProductState {
        self.state
    }

    pub fn dt(&self) -> f64 {
        self.stepper.config().dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt()
    }

    pub fn trapped_at(&self) -> Option<f64> {
        self.trapped_at
    }

    pub fn total_jumps(&self) -> u64 {
        self.total_jumps
    }

    fn check_trap(&mut self) {
        if self.trapped_at.is_none() && is_dark_state(&self.state) {
            let n = self.state.len();
            self.state = ProductState::uniform(n, Spinor::DOWN);
            self.trapped_at = Some(self.time());
        }
    }

    /// Advances one time step. Once trapped in the all-down state the clock
    /// still moves but no integration or random draws happen.
    pub fn step(&mut self) -> Result<()> {
        self.step += 1;
        if self.trapped_at.is_some() {
            return Ok(());
        }
        self.jump_buf.clear();
        self.stepper
            .advance(&mut self.state, &mut self.rng, &mut self.jump_buf)?;
        let jumps = self.jump_buf.len() as u64;
        self.total_jumps += jumps;
        self.pending_jumps += jumps;
        self.check_trap();
        Ok(())
    }

    fn emit<O: Observer + ?Sized>(&mut self, burn_in: f64, observer: &mut O) {
        let t = self.time();
        self.sample.time = t;
        self.sample.burn_in = t < burn_in;
        self.state.bloch_into(&mut self.sample.bloch);
        observer.observe(&self.sample, self.pending_jumps);
        self.pending_jumps = 0;
    }

    /// Runs to step `end_step`, emitting a sample at every multiple of
    /// `stride` after the current step (and at the current step when
    /// `emit_current` is set and it is a multiple of `stride`).
    pub fn run_to<O: Observer + ?Sized>(
        &mut self,
        end_step: u64,
        stride: u64,
        burn_in: f64,
        emit_current: bool,
        observer: &mut O,
    ) -> Result<()> {
        let stride = stride.max(1);
        if emit_current && self.step % stride == 0 {
            self.emit(burn_in, observer);
        }
        while self.step < end_step {
            if self.trapped_at.is_some() {
                let next = (self.step / stride + 1) * stride;
                self.step = next.min(end_step);
            } else {
                self.step()?;
            }
            if self.step % stride == 0 {
                self.emit(burn_in, observer);
            }
        }
        Ok(())
    }
}

/// Runs one trajectory from its configured initial state on random stream
/// `(seed, stream)`, emitting a sample every `sample_interval`.
pub fn run_trajectory<O: Observer + ?Sized>(
    geometry: &LatticeGeometry,
    params: &ModelParams,
    traj_config: &TrajectoryConfig,
    step_config: &StepConfig,
    stream: u64,
    observer: &mut O,
) -> Result<TrajectoryOutcome> {
    params.validate()?;
    step_config.validate_for(params)?;
    traj_config.validate(step_config)?;
    let initial = traj_config.initial_state.build(geometry.site_count())?;
    let mut traj = Trajectory::new(
        geometry,
        *params,
        *step_config,
        initial,
        RngStream::new(traj_config.seed, stream),
    )?;
    traj.run_to(
        traj_config.total_steps(step_config.dt),
        traj_config.sample_stride(step_config.dt),
        traj_config.burn_in,
        true,
        observer,
    )?;
    Ok(TrajectoryOutcome {
        trapped_at: traj.trapped_at,
        total_jumps: traj.total_jumps,
        final_state: traj.into_state(),
    })
}

impl ResumeRecord {
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        line("rng_algorithm", RNG_ALGORITHM.to_string());
        line("step", self.step.to_string());
        line("dt", format!("{:?}", self.dt));
        line("time", format!("{:?}", self.step as f64 * self.dt));
        line("seed", self.seed.to_string());
        line("stream", self.stream.to_string());
        line("word_pos", self.word_pos.to_string());
        line(
            "trapped_at",
            self.trapped_at
                .map(|t| format!("{t:?}"))
                .unwrap_or_else(|| "none".into()),
        );
        line("total_jumps", self.total_jumps.to_string());
        line("pending_jumps", self.pending_jumps.to_string());
        for (k, v) in &self.extra {
            line(&format!("extra.{k}"), v.clone());
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut extra = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("resume record line without '=': {line}")))?;
            let (k, v) = (k.trim(), v.trim());
            match k.strip_prefix("extra.") {
                Some(rest) => {
                    extra.insert(rest.to_string(), v.to_string());
                }
                None => {
                    map.insert(k.to_string(), v.to_string());
                }
            }
        }
        let get = |k: &str| -> Result<&String> {
            map.get(k)
                .ok_or_else(|| Error::Parse(format!("resume record is missing `{k}`")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse()
                .map_err(|e| Error::Parse(format!("resume record `{k}`: {e}")))
        }
        if let Some(alg) = map.get("rng_algorithm") {
            if alg != RNG_ALGORITHM {
                return Err(Error::Parse(format!("unsupported rng algorithm `{alg}`")));
            }
        }
        let trapped = get("trapped_at")?;
        Ok(ResumeRecord {
            step: num("step", get("step")?)?,
            dt: num("dt", get("dt")?)?,
            seed: num("seed", get("seed")?)?,
            stream: num("stream", get("stream")?)?,
            word_pos: num("word_pos", get("word_pos")?)?,
            trapped_at: if trapped == "none" {
                None
            } else {
                Some(num("trapped_at", trapped)?)
            },
            total_jumps: num("total_jumps", get("total_jumps")?)?,
            pending_jumps: num("pending_jumps", get("pending_jumps")?)?,
            extra,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InitialState;
    use crate::lattice::build_lattice;

    fn collect(
        g: &LatticeGeometry,
        p: &ModelParams,
        t: &TrajectoryConfig,
        stream: u64,
    ) -> (Vec<Sample>, Vec<u64>, TrajectoryOutcome) {
        let mut samples = Vec::new();
        let mut jumps = Vec::new();
        let out = run_trajectory(g, p, t, &StepConfig::default(), stream, &mut |s: &Sample, j| {
            samples.push(s.clone());
            jumps.push(j);
        })
        .unwrap();
        (samples, jumps, out)
    }

    #[test]
    fn sampling_grid_and_burn_in() {
        let g = build_lattice(3, 3).unwrap();
        let t = TrajectoryConfig {
            t_total: 10.0,
            burn_in: 2.5,
            sample_interval: 0.5,
            seed: 3,
            initial_state: InitialState::PlusX,
        };
        let (samples, jumps, out) = collect(&g, &ModelParams::with_jy(1.2), &t, 0);
        assert_eq!(samples.len(), 21);
        for (k, s) in samples.iter().enumerate() {
            assert!((s.time - 0.5 * k as f64).abs() < 1e-9);
            assert_eq!(s.burn_in, s.time < 2.5);
            assert_eq!(s.bloch.len(), 9);
        }
        assert_eq!(jumps[0], 0);
        assert_eq!(jumps.iter().sum::<u64>(), out.total_jumps);
    }

    #[test]
    fn identical_seeds_reproduce() {
        let g = build_lattice(4, 4).unwrap();
        let t = TrajectoryConfig {
            t_total: 20.0,
            burn_in: 0.0,
            ..TrajectoryConfig::default()
        };
        let p = ModelParams::with_jy(1.7);
        let (a, ja, _) = collect(&g, &p, &t, 0);
        let (b, jb, _) = collect(&g, &p, &t, 0);
        let (c, _, _) = collect(&g, &p, &t, 1);
        assert_eq!(a, b);
        assert_eq!(ja, jb);
        assert_ne!(a, c);
    }

    #[test]
    fn resume_continues_bit_for_bit() {
        let g = build_lattice(4, 4).unwrap();
        let p = ModelParams::with_jy(1.5);
        let step = StepConfig::default();
        let init = crate::state::init_all_plus_x(16, false);
        let stream = RngStream::new(11, 2);

        let mut whole = Vec::new();
        let mut t1 = Trajectory::new(&g, p, step, init.clone(), stream).unwrap();
        t1.run_to(3000, 100, 0.0, true, &mut |s: &Sample, j| whole.push((s.clone(), j)))
            .unwrap();

        let mut parts = Vec::new();
        let mut t2 = Trajectory::new(&g, p, step, init, stream).unwrap();
        t2.run_to(1234, 100, 0.0, true, &mut |s: &Sample, j| parts.push((s.clone(), j)))
            .unwrap();
        let record = ResumeRecord::from_kv(&t2.checkpoint().to_kv()).unwrap();
        let mut snap = Vec::new();
        t2.state().write_snapshot(&mut snap).unwrap();
        let state = ProductState::read_snapshot(&snap[..]).unwrap();
        let mut t3 = Trajectory::resume(&g, p, step, state, &record).unwrap();
        t3.run_to(3000, 100, 0.0, false, &mut |s: &Sample, j| parts.push((s.clone(), j)))
            .unwrap();

        assert_eq!(whole, parts);
        assert_eq!(t1.state(), t3.state());
    }

    #[test]
    fn xxz_traps_in_dark_state() {
        let g = build_lattice(4, 4).unwrap();
        let p = ModelParams {
            jx: 0.9,
            jy: 0.9,
            jz: 1.0,
            gamma: 1.0,
        };
        let t = TrajectoryConfig {
            t_total: 200.0,
            burn_in: 0.0,
            ..TrajectoryConfig::default()
        };
        let (samples, _, out) = collect(&g, &p, &t, 0);
        let trapped = out.trapped_at.expect("XXZ trajectory should reach the all-down state");
        assert!(trapped < 200.0);
        let last = samples.last().unwrap();
        assert!(last.bloch.iter().all(|b| b.z == -1.0 && b.x == 0.0 && b.y == 0.0));
    }

    #[test]
    fn resume_record_rejects_garbage() {
        assert!(ResumeRecord::from_kv("step=1\n").is_err());
        assert!(ResumeRecord::from_kv("nonsense").is_err());
    }
}
