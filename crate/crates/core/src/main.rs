use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gwmc_core::cli::{
    cmd_correlate, cmd_mf_curve, cmd_oracle_check, cmd_resume, cmd_run, cmd_sweep, default_workers,
    fmt_num, OracleConfig, RunConfig,
};
use gwmc_core::oracle::JumpOperator;
use gwmc_core::Result;

#[derive(Parser)]
#[command(name = "gwmc", version, about = "Gutzwiller Monte Carlo for the dissipative XYZ model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-trajectory (or ensemble) time series of the magnetization.
    Run {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Continue from the checkpoint written under this output prefix.
        #[arg(long)]
        resume_from: Option<PathBuf>,
    },
    /// Time-averaged S^xx(0) over a grid of J_y values and lattice sizes.
    Sweep {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Comma-separated J_y values.
        #[arg(long)]
        jy_values: Option<String>,
        /// Comma-separated linear lattice sizes L (L×L lattices).
        #[arg(long)]
        sizes: Option<String>,
    },
    /// Correlation ⟨σ_i^x σ_j^x⟩ versus minimum-image distance.
    Correlate {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Closed-form single-site mean-field S^xx(0) versus J_y.
    MfCurve {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Comma-separated J_y values (default: 1.0 to 2.5 in steps of 0.01).
        #[arg(long)]
        jy_values: Option<String>,
    },
    /// Compare the trajectory engines against exact small-system references.
    OracleCheck {
        /// Number of sites: 1, 2 (2×1) or 4 (2×2).
        #[arg(long, default_value_t = 2)]
        sites: usize,
        #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
        jx: f64,
        #[arg(long, default_value_t = 1.2, allow_negative_numbers = true)]
        jy: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        jz: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        gamma: f64,
        /// Final comparison time.
        #[arg(long = "t", default_value_t = 10.0)]
        t: f64,
        #[arg(long, default_value_t = 4000)]
        trajectories: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 0.05)]
        max_jump_prob: f64,
        #[arg(long)]
        workers: Option<usize>,
        /// Also write the report to `<out>_oracle.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace σ^- by σ^x in the full wavefunction jumps (detector check).
        #[arg(long, hide = true)]
        corrupt_jump: bool,
    },
}

/// Configuration file plus per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value configuration file (metadata files are accepted too).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    jx: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    jy: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    jz: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    t_total: Option<f64>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    sample_interval: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_jump_prob: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// plus_x, minus_x or snapshot:<path>
    #[arg(long)]
    initial_state: Option<String>,
    /// gutzwiller, fullwfmc or exact
    #[arg(long)]
    engine: Option<String>,
    /// Worker threads (default: $GWMC_WORKERS or the number of CPUs).
    #[arg(long)]
    workers: Option<usize>,
    /// Independent trajectories; more than one switches to ensemble averaging.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn build(&self, extra: &[(&str, &Option<String>)]) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let num = |v: Option<f64>| v.map(|x| x.to_string());
        let overrides = [
            ("jx", num(self.jx)),
            ("jy", num(self.jy)),
            ("jz", num(self.jz)),
            ("gamma", num(self.gamma)),
            ("width", self.width.map(|v| v.to_string())),
            ("height", self.height.map(|v| v.to_string())),
            ("t_total", num(self.t_total)),
            ("burn_in", num(self.burn_in)),
            ("sample_interval", num(self.sample_interval)),
            ("dt", num(self.dt)),
            ("max_jump_prob", num(self.max_jump_prob)),
            ("seed", self.seed.map(|v| v.to_string())),
            ("initial_state", self.initial_state.clone()),
            ("engine", self.engine.clone()),
            ("workers", self.workers.map(|v| v.to_string())),
            ("trajectories", self.trajectories.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in overrides.iter() {
            if let Some(v) = v {
                cfg.apply(k, v)?;
            }
        }
        for (k, v) in extra {
            if let Some(v) = v {
                cfg.apply(k, v)?;
            }
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { opts, resume_from } => {
            let cfg = opts.build(&[])?;
            let report = match resume_from {
                Some(from) => cmd_resume(&cfg, &from)?,
                None => cmd_run(&cfg)?,
            };
            println!("series={}", report.series_path.display());
            println!("meta={}", report.meta_path.display());
            if let Some(t) = report.trapped_at {
                println!("trapped_at={}", fmt_num(t));
            }
            if let Some((v, se)) = report.sxx {
                println!("sxx_k0={} sxx_stderr={}", fmt_num(v), fmt_num(se));
            }
        }
        Command::Sweep { opts, jy_values, sizes } => {
            let cfg = opts.build(&[("sweep_jy", &jy_values), ("sweep_sizes", &sizes)])?;
            if jy_values.as_deref().is_some_and(|s| s.trim().is_empty()) {
                return Err(gwmc_core::Error::Config {
                    field: "sweep_jy".into(),
                    reason: "empty value list".into(),
                });
            }
            let report = cmd_sweep(&cfg)?;
            println!("summary={}", report.summary_path.display());
        }
        Command::Correlate { opts } => {
            let report = cmd_correlate(&opts.build(&[])?)?;
            println!("correlations={}", report.correlation_path.display());
            println!("axis={}", report.axis_path.display());
        }
        Command::MfCurve { opts, jy_values } => {
            let report = cmd_mf_curve(&opts.build(&[("sweep_jy", &jy_values)])?)?;
            println!("curve={}", report.curve_path.display());
            match report.transition_point {
                Some(t) => println!("transition_point={}", fmt_num(t)),
                None => println!("transition_point=none no_transition=true"),
            }
        }
        Command::OracleCheck {
            sites,
            jx,
            jy,
            jz,
            gamma,
            t,
            trajectories,
            seed,
            dt,
            max_jump_prob,
            workers,
            out,
            corrupt_jump,
        } => {
            let cfg = OracleConfig {
                sites,
                model: gwmc_core::dynamics::ModelParams { jx, jy, jz, gamma },
                t,
                trajectories,
                seed,
                step: gwmc_core::dynamics::StepConfig { dt, max_jump_prob },
                workers: workers.unwrap_or_else(default_workers),
                jump: if corrupt_jump { JumpOperator::CorruptSigmaX } else { JumpOperator::Lowering },
            };
            let report = cmd_oracle_check(&cfg)?;
            let lines = report.lines();
            for l in &lines {
                println!("{l}");
            }
            if let Some(prefix) = out {
                let mut p = prefix.into_os_string();
                p.push("_oracle.txt");
                std::fs::write(PathBuf::from(p), lines.join("\n") + "\n")?;
            }
            if !report.passed() {
                let failed: Vec<&str> =
                    report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                eprintln!("violated invariants: {}", failed.join(", "));
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
