//! Flat `key=value` configuration shared by the config files, command-line
//! overrides and the metadata written next to every CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::{InitialState, ModelParams, StepConfig, TrajectoryConfig};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeGeometry};
use crate::oracle::MAX_SITES;
use crate::state::ProductState;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GWMC_WORKERS";

/// Keys written to metadata files that describe results rather than inputs.
/// Config parsing skips them so a metadata file can be fed back as a config.
pub const INFO_KEYS: &[&str] = &[
    "command",
    "code_version",
    "rng_algorithm",
    "averaging",
    "trapped_at",
    "trapped_trajectories",
    "total_jumps",
    "sample_count",
    "sxx_k0",
    "sxx_stderr",
    "transition_point",
    "no_transition",
    "resumed_from_step",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Gutzwiller,
    FullWfmc,
    Exact,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Gutzwiller => "gutzwiller",
            Engine::FullWfmc => "fullwfmc",
            Engine::Exact => "exact",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gutzwiller" => Ok(Engine::Gutzwiller),
            "fullwfmc" => Ok(Engine::FullWfmc),
            "exact" => Ok(Engine::Exact),
            _ => Err(Error::config(
                "engine",
                format!("expected gutzwiller, fullwfmc or exact, got `{s}`"),
            )),
        }
    }
}

/// Initial state as written in a config: `plus_x`, `minus_x` or
/// `snapshot:<path>` pointing at a state CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    PlusX,
    MinusX,
    Snapshot(PathBuf),
}

impl fmt::Display for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::PlusX => f.write_str("plus_x"),
            InitialSpec::MinusX => f.write_str("minus_x"),
            InitialSpec::Snapshot(p) => write!(f, "snapshot:{}", p.display()),
        }
    }
}

impl FromStr for InitialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus_x" | "+x" => Ok(InitialSpec::PlusX),
            "minus_x" | "-x" => Ok(InitialSpec::MinusX),
            _ => match s.strip_prefix("snapshot:") {
                Some(p) if !p.is_empty() => Ok(InitialSpec::Snapshot(PathBuf::from(p))),
                _ => Err(Error::config(
                    "initial_state",
                    format!("expected plus_x, minus_x or snapshot:<path>, got `{s}`"),
                )),
            },
        }
    }
}

impl InitialSpec {
    pub fn resolve(&self) -> Result<InitialState> {
        Ok(match self {
            InitialSpec::PlusX => InitialState::PlusX,
            InitialSpec::MinusX => InitialState::MinusX,
            InitialSpec::Snapshot(p) => {
                let f = fs::File::open(p).map_err(|e| {
                    Error::config("initial_state", format!("cannot open {}: {e}", p.display()))
                })?;
                InitialState::Snapshot(ProductState::read_snapshot(BufReader::new(f))?)
            }
        })
    }
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

/// Comma-separated list; an empty value gives an empty list.
pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_field(key, s))
        .collect()
}

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// ignored; later duplicates override earlier ones.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(n, l)| {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got `{l}`", n + 1)))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

pub fn read_kv_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_kv(&text)
}

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Everything needed to reproduce a run, sweep or correlation measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub width: usize,
    pub height: usize,
    pub model: ModelParams,
    pub t_total: f64,
    pub burn_in: f64,
    pub sample_interval: f64,
    pub seed: u64,
    pub initial: InitialSpec,
    pub step: StepConfig,
    pub engine: Engine,
    pub workers: usize,
    pub trajectories: usize,
    pub out: PathBuf,
    /// `jy` values of a sweep; empty outside sweeps.
    pub sweep_jy: Vec<f64>,
    /// Linear sizes `L` (L×L lattices) of a sweep; empty outside sweeps.
    pub sweep_sizes: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrajectoryConfig::default();
        RunConfig {
            width: 6,
            height: 6,
            model: ModelParams::default(),
            t_total: t.t_total,
            burn_in: t.burn_in,
            sample_interval: t.sample_interval,
            seed: t.seed,
            initial: InitialSpec::PlusX,
            step: StepConfig::default(),
            engine: Engine::Gutzwiller,
            workers: default_workers(),
            trajectories: 1,
            out: PathBuf::from("gwmc"),
            sweep_jy: Vec::new(),
            sweep_sizes: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Sets one field from its textual value. Result keys are skipped.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "width" => self.width = parse_field(key, value)?,
            "height" => self.height = parse_field(key, value)?,
            "jx" => self.model.jx = parse_field(key, value)?,
            "jy" => self.model.jy = parse_field(key, value)?,
            "jz" => self.model.jz = parse_field(key, value)?,
            "gamma" => self.model.gamma = parse_field(key, value)?,
            "t_total" => self.t_total = parse_field(key, value)?,
            "burn_in" => self.burn_in = parse_field(key, value)?,
            "sample_interval" => self.sample_interval = parse_field(key, value)?,
            "seed" => self.seed = parse_field(key, value)?,
            "initial_state" => self.initial = value.parse()?,
            "dt" => self.step.dt = parse_field(key, value)?,
            "max_jump_prob" => self.step.max_jump_prob = parse_field(key, value)?,
            "engine" => self.engine = value.parse()?,
            "workers" => self.workers = parse_field(key, value)?,
            "trajectories" => self.trajectories = parse_field(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "sweep_jy" => self.sweep_jy = parse_list(key, value)?,
            "sweep_sizes" => self.sweep_sizes = parse_list(key, value)?,
            _ if INFO_KEYS.contains(&key) => {}
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in read_kv_file(path)? {
            cfg.apply(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Every input field in a fixed order, formatted for [`RunConfig::apply`].
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let num = |x: f64| x.to_string();
        let list = |xs: &[f64]| xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",");
        vec![
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("jx", num(self.model.jx)),
            ("jy", num(self.model.jy)),
            ("jz", num(self.model.jz)),
            ("gamma", num(self.model.gamma)),
            ("t_total", num(self.t_total)),
            ("burn_in", num(self.burn_in)),
            ("sample_interval", num(self.sample_interval)),
            ("seed", self.seed.to_string()),
            ("initial_state", self.initial.to_string()),
            ("dt", num(self.step.dt)),
            ("max_jump_prob", num(self.step.max_jump_prob)),
            ("engine", self.engine.to_string()),
            ("workers", self.workers.to_string()),
            ("trajectories", self.trajectories.to_string()),
            ("out", self.out.display().to_string()),
            ("sweep_jy", list(&self.sweep_jy)),
            (
                "sweep_sizes",
                self.sweep_sizes.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","),
            ),
        ]
    }

    pub fn geometry(&self) -> Result<LatticeGeometry> {
        build_lattice(self.width, self.height)
            .map_err(|e| Error::config("width", e.to_string()))
    }

    pub fn trajectory_config(&self) -> Result<TrajectoryConfig> {
        Ok(TrajectoryConfig {
            t_total: self.t_total,
            burn_in: self.burn_in,
            sample_interval: self.sample_interval,
            seed: self.seed,
            initial_state: self.initial.resolve()?,
        })
    }

    /// Checks every field without touching the file system.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::config("width", "must be at least 1"));
        }
        if self.height == 0 {
            return Err(Error::config("height", "must be at least 1"));
        }
        self.model.validate()?;
        self.step.validate_for(&self.model)?;
        TrajectoryConfig {
            t_total: self.t_total,
            burn_in: self.burn_in,
            sample_interval: self.sample_interval,
            seed: self.seed,
            initial_state: InitialState::PlusX,
        }
        .validate(&self.step)?;
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.trajectories == 0 || self.trajectories > u32::MAX as usize {
            return Err(Error::config("trajectories", "must be between 1 and 2^32 - 1"));
        }
        if self.engine != Engine::Gutzwiller && self.width * self.height > MAX_SITES {
            return Err(Error::config(
                "engine",
                format!(
                    "engine {} needs at most {MAX_SITES} sites, lattice has {}",
                    self.engine,
                    self.width * self.height
                ),
            ));
        }
        Ok(())
    }

    pub fn prefixed(&self, suffix: &str) -> PathBuf {
        let mut s = self.out.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    }
}

/// Returns the value of `key` in a parsed key-value list (last occurrence).
pub fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Metadata map from a `<prefix>_meta.txt` file.
pub fn read_metadata(path: &Path) -> Result<BTreeMap<String, String>> {
    Ok(read_kv_file(path)?.into_iter().collect())
}
