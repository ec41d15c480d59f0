//! Seeded Monte Carlo experiments over a grid of one instance parameter.

use std::io::Write;

use lrpr_core::altmin::{run, Clock, RunConfig, RunReport};
use lrpr_core::init::{omega_for, RankMode};
use lrpr_core::model::generate_ground_truth;
use lrpr_core::sensing::{measure, NoiseSpec, SamplePlan};
use lrpr_core::{Field, Scalar, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::StdClock;
use crate::error::{HarnessError, Result};
use crate::io::sci;

/// A synthetic problem: ground truth shape plus measurement budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub kappa: f64,
    pub field: Field,
    pub m0: usize,
    pub m1: usize,
    #[serde(rename = "T")]
    pub iters: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
}

impl Instance {
    pub fn plan(&self) -> Result<SamplePlan> {
        Ok(SamplePlan::new(self.m0, self.m1, self.iters)?)
    }

    /// `ω = 1.3 σ_min² / q` for the generated truth, whose smallest singular
    /// value is exactly `1/κ`.
    pub fn true_omega(&self) -> f64 {
        omega_for(1.0 / self.kappa, self.q)
    }

    /// Default run configuration: known rank, or threshold estimation with
    /// the true `ω`.
    pub fn default_config(&self, estimate_rank: bool) -> RunConfig {
        let mode = if estimate_rank {
            RankMode::Threshold(self.true_omega())
        } else {
            RankMode::KnownRank(self.r)
        };
        RunConfig::new(self.iters, mode, self.r, self.kappa)
    }
}

/// Final outcome of one seeded run.
#[derive(Debug, Clone)]
pub struct Trial {
    pub seed: u64,
    pub mu: f64,
    pub report: std::result::Result<RunReport, String>,
    pub wall_time_ms: f64,
}

impl Trial {
    pub fn final_sef(&self) -> Option<f64> {
        self.report.as_ref().ok().and_then(|r| r.final_sef())
    }

    pub fn final_matdist_rel(&self) -> Option<f64> {
        self.report
            .as_ref()
            .ok()
            .and_then(|r| r.final_matdist_rel())
    }

    pub fn r_hat(&self) -> Option<usize> {
        self.report.as_ref().ok().map(|r| r.summary.r_hat)
    }

    pub fn succeeded(&self, tol: f64) -> bool {
        self.final_matdist_rel().is_some_and(|d| d <= tol)
    }
}

/// Generate the truth and measurements for `seed` and run. Truth, sensing
/// and noise draw from separate seeded streams, so one seed fixes the trial.
pub fn run_trial(inst: &Instance, cfg: &RunConfig, seed: u64) -> Trial {
    match inst.field {
        Field::Real => run_trial_as::<f64>(inst, cfg, seed),
        Field::Complex => run_trial_as::<C64>(inst, cfg, seed),
    }
}

fn run_trial_as<T: Scalar>(inst: &Instance, cfg: &RunConfig, seed: u64) -> Trial {
    let clock = StdClock::new();
    let mut mu = f64::NAN;
    let report = (|| -> Result<RunReport> {
        let gt = generate_ground_truth::<T>(inst.n, inst.q, inst.r, inst.kappa, seed)?;
        mu = gt.mu();
        let ms = measure(&gt, inst.plan()?, inst.noise, seed)?;
        let cfg = RunConfig {
            seed,
            ..cfg.clone()
        };
        run(Some(&gt), &ms, &cfg, &clock)
            .map(|o| o.report)
            .map_err(|f| HarnessError::Run(f.to_string()))
    })()
    .map_err(|e| e.to_string());
    Trial {
        seed,
        mu,
        report,
        wall_time_ms: clock.now_ms(),
    }
}

/// Runs `seeds` concurrently; the result keeps the order of `seeds`.
pub fn run_trials(inst: &Instance, cfg: &RunConfig, seeds: &[u64]) -> Vec<Trial> {
    seeds.par_iter().map(|&s| run_trial(inst, cfg, s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    PhaseTransition,
    NoiseSweep,
    OracleSuite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    M0,
    M1,
    EpsSnr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Base {
    pub instance: Instance,
    /// Full run configuration. When absent, defaults for the instance are
    /// used with `T` taken from the instance.
    #[serde(default)]
    pub config: Option<RunConfig>,
    /// With no explicit config: estimate the rank with the true `ω` instead
    /// of passing it in.
    #[serde(default)]
    pub estimate_rank: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub base: Base,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    pub trials: usize,
    /// Success means final `matdist_rel ≤ success_tol`.
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    /// Trial `i` at every grid point uses seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
}

fn default_success_tol() -> f64 {
    lrpr_core::altmin::DEFAULT_SUCCESS_TOL
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.success_tol > 0.0) {
            return bad(format!(
                "success_tol must be positive, got {}",
                self.success_tol
            ));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep has no values".into());
            }
            if s.values.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("sweep values must be strictly increasing".into());
            }
            let allowed = match self.kind {
                ExperimentKind::PhaseTransition => {
                    matches!(s.param, SweepParam::M0 | SweepParam::M1)
                }
                ExperimentKind::NoiseSweep => s.param == SweepParam::EpsSnr,
                _ => false,
            };
            if !allowed {
                return bad(format!("{:?} cannot sweep {:?}", self.kind, s.param));
            }
            if s.param != SweepParam::EpsSnr
                && s.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0)
            {
                return bad("sample counts must be positive integers".into());
            }
        } else if matches!(
            self.kind,
            ExperimentKind::PhaseTransition | ExperimentKind::NoiseSweep
        ) {
            return bad(format!("{:?} needs a sweep", self.kind));
        }
        self.base.instance.plan()?;
        Ok(())
    }

    /// `(value, instance)` per grid point; a single point without a sweep.
    pub fn grid(&self) -> Vec<(Option<f64>, Instance)> {
        let base = self.base.instance;
        match &self.sweep {
            None => vec![(None, base)],
            Some(s) => s
                .values
                .iter()
                .map(|&v| {
                    let mut inst = base;
                    match s.param {
                        SweepParam::M0 => inst.m0 = v as usize,
                        SweepParam::M1 => inst.m1 = v as usize,
                        SweepParam::EpsSnr => inst.noise = NoiseSpec::bounded(v),
                    }
                    (Some(v), inst)
                })
                .collect(),
        }
    }

    pub fn config_for(&self, inst: &Instance) -> RunConfig {
        self.base
            .config
            .clone()
            .unwrap_or_else(|| inst.default_config(self.base.estimate_rank))
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.trials as u64)
            .map(|i| self.seed.wrapping_add(i))
            .collect()
    }
}

/// One CSV row: a trial at a grid point with enough parameters to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub kind: ExperimentKind,
    pub param: Option<SweepParam>,
    pub value: Option<f64>,
    pub instance: Instance,
    pub seed: u64,
    pub mu: f64,
    pub r_hat: Option<usize>,
    pub final_sef: Option<f64>,
    pub final_matdist_rel: Option<f64>,
    pub success: bool,
    pub error: Option<String>,
    pub wall_time_ms: f64,
}

pub const ROW_HEADER: [&str; 21] = [
    "kind",
    "param",
    "value",
    "n",
    "q",
    "r",
    "kappa",
    "field",
    "m0",
    "m1",
    "T",
    "noise",
    "eps_snr",
    "seed",
    "mu",
    "r_hat",
    "final_sef",
    "final_matdist_rel",
    "success",
    "error",
    "wall_time_ms",
];

impl TrialRow {
    fn record(&self) -> Vec<String> {
        let i = &self.instance;
        vec![
            variant_name(&self.kind),
            self.param.as_ref().map(variant_name).unwrap_or_default(),
            sci(self.value),
            i.n.to_string(),
            i.q.to_string(),
            i.r.to_string(),
            sci(Some(i.kappa)),
            i.field.to_string(),
            i.m0.to_string(),
            i.m1.to_string(),
            i.iters.to_string(),
            variant_name(&i.noise.kind),
            sci(Some(i.noise.eps_snr)),
            self.seed.to_string(),
            sci(Some(self.mu)),
            self.r_hat.map(|r| r.to_string()).unwrap_or_default(),
            sci(self.final_sef),
            sci(self.final_matdist_rel),
            self.success.to_string(),
            self.error.clone().unwrap_or_default(),
            sci(Some(self.wall_time_ms)),
        ]
    }
}

/// Serialized name of a unit enum variant.
fn variant_name<V: Serialize>(v: &V) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub value: Option<f64>,
    pub trials: usize,
    pub failed: usize,
    pub success_fraction: f64,
    pub median_sef: Option<f64>,
    pub median_matdist_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub param: Option<SweepParam>,
    pub success_tol: f64,
    pub points: Vec<PointSummary>,
    /// Success fractions after a centered 3-point running median.
    pub smoothed_success: Vec<f64>,
    pub smoothed_success_monotone: bool,
    /// Median final `matdist_rel` non-decreasing along the sweep.
    pub median_matdist_monotone: bool,
    /// Least-squares slope of `log median matdist_rel` against
    /// `log value`, for noise sweeps.
    pub loglog_slope: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
    /// Full reports, grid-major.
    pub trials: Vec<Vec<Trial>>,
}

impl ExperimentResult {
    /// RFC 4180 CSV with [`ROW_HEADER`].
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(ROW_HEADER)?;
        for row in &self.rows {
            csv.write_record(row.record())?;
        }
        csv.flush().map_err(|e| HarnessError::Csv(e.into()))?;
        Ok(())
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

/// Centered running median with window 3, shrinking at the ends.
pub fn smooth_median3(v: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(v.len());
            let mut w = v[lo..hi].to_vec();
            median(&mut w).expect("window is non-empty")
        })
        .collect()
}

pub fn weakly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs every trial at every grid point. Trial errors become failed rows.
/// Rows come out grid-major then seed order, independent of scheduling.
pub fn run_experiment(e: &Experiment) -> Result<ExperimentResult> {
    e.validate()?;
    if e.kind == ExperimentKind::OracleSuite {
        return Err(HarnessError::Invalid(
            "oracle suites run through the acceptance runner".into(),
        ));
    }
    let seeds = e.seeds();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut all = Vec::new();
    for (value, inst) in e.grid() {
        inst.plan()?;
        let cfg = e.config_for(&inst);
        let trials = run_trials(&inst, &cfg, &seeds);
        let mut sefs: Vec<f64> = trials.iter().filter_map(Trial::final_sef).collect();
        let mut mds: Vec<f64> = trials.iter().filter_map(Trial::final_matdist_rel).collect();
        let successes = trials.iter().filter(|t| t.succeeded(e.success_tol)).count();
        points.push(PointSummary {
            value,
            trials: trials.len(),
            failed: trials.iter().filter(|t| t.report.is_err()).count(),
            success_fraction: successes as f64 / trials.len() as f64,
            median_sef: median(&mut sefs),
            median_matdist_rel: median(&mut mds),
        });
        for t in &trials {
            rows.push(TrialRow {
                kind: e.kind,
                param: e.sweep.as_ref().map(|s| s.param),
                value,
                instance: inst,
                seed: t.seed,
                mu: t.mu,
                r_hat: t.r_hat(),
                final_sef: t.final_sef(),
                final_matdist_rel: t.final_matdist_rel(),
                success: t.succeeded(e.success_tol),
                error: t.report.as_ref().err().cloned(),
                wall_time_ms: t.wall_time_ms,
            });
        }
        all.push(trials);
    }
    let fractions: Vec<f64> = points.iter().map(|p| p.success_fraction).collect();
    let smoothed_success = smooth_median3(&fractions);
    let medians: Vec<Option<f64>> = points.iter().map(|p| p.median_matdist_rel).collect();
    let median_matdist_monotone =
        medians.iter().all(Option::is_some) && medians.windows(2).all(|w| w[0] <= w[1]);
    let loglog_slope = match (e.kind, medians.iter().all(|m| m.is_some_and(|v| v > 0.0))) {
        (ExperimentKind::NoiseSweep, true) => {
            let x: Vec<f64> = points
                .iter()
                .map(|p| p.value.unwrap_or(f64::NAN).ln())
                .collect();
            let y: Vec<f64> = medians.iter().map(|m| m.unwrap_or(f64::NAN).ln()).collect();
            ls_slope(&x, &y)
        }
        _ => None,
    };
    Ok(ExperimentResult {
        rows,
        summary: Summary {
            kind: e.kind,
            param: e.sweep.as_ref().map(|s| s.param),
            success_tol: e.success_tol,
            smoothed_success_monotone: weakly_increasing(&smoothed_success),
            smoothed_success,
            points,
            median_matdist_monotone,
            loglog_slope,
        },
        trials: all,
    })
}
