//! `lrpr` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrpr_core::altmin::{run, RunConfig, RunOutcome};
use lrpr_core::init::RankMode;
use lrpr_core::model::generate_ground_truth;
use lrpr_core::sensing::{measure, NoiseSpec};
use lrpr_core::{Field, Scalar, C64};
use serde::{Deserialize, Serialize};

use crate::acceptance::{run_criteria_with, CRITERIA};
use crate::clock::StdClock;
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, Experiment, Instance};
use crate::io::{
    create_dir, create_file, read_json, write_json, write_measurements, write_trajectory_csv,
    GroundTruthFile, InitFile,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lrpr",
    version,
    about = "Low rank phase retrieval by alternating minimization"
)]
pub struct Cli {
    /// Master seed for ground truth, sensing and noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// `real` or `complex`.
    #[arg(long, global = true)]
    pub field: Option<Field>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one instance; writes trajectory.csv and report.json.
    Run(RunArgs),
    /// Run an experiment file; writes trials.csv and summary.json.
    Sweep { file: PathBuf },
    /// Run the acceptance suite. Exits 2 if any criterion fails.
    Oracle {
        /// Criteria to run, all by default.
        #[arg(long = "only", value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Write a ground truth and its measurements.
    Gen(InstanceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankArg {
    Known,
    Threshold,
}

/// Instance flags. Unset flags fall back to the config file, then to the
/// reference instance n=60, q=120, r=2, κ=2, m0=150, m1=60, T=25.
#[derive(Debug, Clone, Default, Args)]
pub struct InstanceArgs {
    /// JSON file with `instance` and optional `config` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long)]
    pub m1: Option<usize>,
    #[arg(long = "T")]
    pub iters: Option<usize>,
    /// Relative noise level; 0 for noiseless.
    #[arg(long)]
    pub eps_snr: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// `threshold` estimates the rank with the true ω = 1.3 σ_min² / q.
    #[arg(long, value_enum)]
    pub rank_mode: Option<RankArg>,
}

/// Layout of the `run` and `gen` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub instance: Instance,
    #[serde(default)]
    pub config: Option<RunConfig>,
}

impl InstanceArgs {
    fn resolve(&self, field: Option<Field>) -> Result<(Instance, Option<RunConfig>)> {
        let (mut inst, cfg) = match &self.config {
            Some(path) => {
                let f: RunFile = read_json(path)?;
                (f.instance, f.config)
            }
            None => (crate::acceptance::reference_instance(Field::Real), None),
        };
        inst.n = self.n.unwrap_or(inst.n);
        inst.q = self.q.unwrap_or(inst.q);
        inst.r = self.r.unwrap_or(inst.r);
        inst.kappa = self.kappa.unwrap_or(inst.kappa);
        inst.m0 = self.m0.unwrap_or(inst.m0);
        inst.m1 = self.m1.unwrap_or(inst.m1);
        inst.iters = self.iters.unwrap_or(inst.iters);
        inst.field = field.unwrap_or(inst.field);
        if let Some(eps) = self.eps_snr {
            inst.noise = if eps == 0.0 {
                NoiseSpec::NONE
            } else {
                NoiseSpec::bounded(eps)
            };
        }
        inst.plan()?;
        Ok((inst, cfg))
    }
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    instance: &'a Instance,
    seed: u64,
    r_hat: usize,
    converged: Option<bool>,
    final_sef: Option<f64>,
    final_matdist_rel: Option<f64>,
    mu: f64,
    total_time_ms: f64,
    warnings: usize,
    trajectory_csv: PathBuf,
    report_json: PathBuf,
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<()> {
    let (inst, file_cfg) = args.instance.resolve(cli.field)?;
    let seed = cli.seed.unwrap_or(0);
    let mut cfg =
        file_cfg.unwrap_or_else(|| inst.default_config(args.rank_mode == Some(RankArg::Threshold)));
    if args.instance.iters.is_some() {
        cfg.iters = inst.iters;
    }
    match args.rank_mode {
        Some(RankArg::Known) => cfg.rank_mode = RankMode::KnownRank(inst.r),
        Some(RankArg::Threshold) => cfg.rank_mode = RankMode::Threshold(inst.true_omega()),
        None => {}
    }
    cfg.seed = seed;
    match inst.field {
        Field::Real => run_as::<f64>(cli, &inst, &cfg),
        Field::Complex => run_as::<C64>(cli, &inst, &cfg),
    }
}

fn run_as<T: Scalar>(cli: &Cli, inst: &Instance, cfg: &RunConfig) -> Result<()> {
    let gt = generate_ground_truth::<T>(inst.n, inst.q, inst.r, inst.kappa, cfg.seed)?;
    let ms = measure(&gt, inst.plan()?, inst.noise, cfg.seed)?;
    let clock = StdClock::new();
    let outcome = run(Some(&gt), &ms, cfg, &clock);
    create_dir(&cli.out)?;
    let csv_path = cli.out.join("trajectory.csv");
    let json_path = cli.out.join("report.json");
    let report = match &outcome {
        Ok(RunOutcome { report, .. }) => report,
        Err(f) => &f.report,
    };
    write_trajectory_csv(report, create_file(&csv_path)?)?;
    write_json(&json_path, report)?;
    if let Ok(o) = &outcome {
        write_json(&cli.out.join("init.json"), &InitFile::from_init(&o.init))?;
    }
    let summary = RunSummary {
        instance: inst,
        seed: cfg.seed,
        r_hat: report.summary.r_hat,
        converged: report.summary.converged,
        final_sef: report.final_sef(),
        final_matdist_rel: report.final_matdist_rel(),
        mu: gt.mu(),
        total_time_ms: report.summary.total_time_ms,
        warnings: report.warnings.len(),
        trajectory_csv: csv_path,
        report_json: json_path,
    };
    if cli.json {
        println!("{}", serde_json::to_string(&summary).expect("plain data"));
    } else {
        println!(
            "r_hat {} | final SEF {} | final matdist_rel {} | converged {:?} | {:.0} ms",
            summary.r_hat,
            opt(summary.final_sef),
            opt(summary.final_matdist_rel),
            summary.converged,
            summary.total_time_ms
        );
        println!(
            "wrote {} and {}",
            summary.trajectory_csv.display(),
            summary.report_json.display()
        );
    }
    match outcome {
        Ok(_) => Ok(()),
        Err(f) => Err(HarnessError::Run(f.to_string())),
    }
}

fn cmd_sweep(cli: &Cli, file: &Path) -> Result<()> {
    let mut e: Experiment = read_json(file)?;
    if let Some(seed) = cli.seed {
        e.seed = seed;
    }
    if let Some(field) = cli.field {
        e.base.instance.field = field;
    }
    let res = run_experiment(&e)?;
    create_dir(&cli.out)?;
    let csv_path = cli.out.join("trials.csv");
    res.write_csv(create_file(&csv_path)?)?;
    write_json(&cli.out.join("summary.json"), &res.summary)?;
    if cli.json {
        println!(
            "{}",
            serde_json::to_string(&res.summary).expect("plain data")
        );
    } else {
        for p in &res.summary.points {
            println!(
                "value {} | success {:.2} | median SEF {} | median matdist_rel {} | failed {}",
                opt(p.value),
                p.success_fraction,
                opt(p.median_sef),
                opt(p.median_matdist_rel),
                p.failed
            );
        }
        if let Some(s) = res.summary.loglog_slope {
            println!("log-log slope {s:.3}");
        }
        println!("wrote {}", csv_path.display());
    }
    Ok(())
}

fn cmd_oracle(cli: &Cli, only: &[u8]) -> Result<bool> {
    let ids = if only.is_empty() {
        CRITERIA.to_vec()
    } else {
        only.to_vec()
    };
    let results = run_criteria_with(&ids, |r| {
        if !cli.json {
            println!("{r}");
        }
    });
    if cli.json {
        let rows: Vec<_> = results
            .iter()
            .map(|r| serde_json::json!({"id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail}))
            .collect();
        println!("{}", serde_json::Value::Array(rows));
    }
    Ok(results.iter().all(|r| r.passed))
}

fn cmd_gen(cli: &Cli, args: &InstanceArgs) -> Result<()> {
    let (inst, _) = args.resolve(cli.field)?;
    let seed = cli.seed.unwrap_or(0);
    match inst.field {
        Field::Real => gen_as::<f64>(cli, &inst, seed),
        Field::Complex => gen_as::<C64>(cli, &inst, seed),
    }
}

fn gen_as<T: Scalar>(cli: &Cli, inst: &Instance, seed: u64) -> Result<()> {
    let gt = generate_ground_truth::<T>(inst.n, inst.q, inst.r, inst.kappa, seed)?;
    let ms = measure(&gt, inst.plan()?, inst.noise, seed)?;
    create_dir(&cli.out)?;
    let gt_path = cli.out.join("ground_truth.json");
    let meta_path = cli.out.join("measurements.json");
    write_json(&gt_path, &GroundTruthFile::from_truth(&gt))?;
    write_measurements(&ms, &meta_path, &cli.out.join("y.bin"))?;
    if cli.json {
        println!(
            "{}",
            serde_json::json!({"ground_truth": gt_path, "measurements": meta_path, "kappa": gt.kappa(), "mu": gt.mu()})
        );
    } else {
        println!("wrote {} and {}", gt_path.display(), meta_path.display());
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3e}"))
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run(args) => cmd_run(cli, args).map(|_| EXIT_OK),
        Command::Sweep { file } => cmd_sweep(cli, file).map(|_| EXIT_OK),
        Command::Oracle { only } => {
            cmd_oracle(cli, only).map(|ok| if ok { EXIT_OK } else { EXIT_RUNTIME })
        }
        Command::Gen(args) => cmd_gen(cli, args).map(|_| EXIT_OK),
    }
}

/// Parses `args` (program name first) and runs. Returns the exit code.
pub fn main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
