//! The alternating-minimization outer loop: per-column projected PR for the
//! right factor, QR normalization, phase estimation, least-squares update of
//! the column span, QR.

mod noise;
mod report;
mod run;
mod steps;

pub use noise::{compute_noise_floor, noise_floor_crossing, NoiseFloor};
pub use report::{FinalSummary, IterationRecord, Provenance, RunReport, RunWarning};
pub use run::{run, Clock, FactoredEstimate, NoClock, RunFailure, RunOutcome};
pub use steps::{
    conjugate_gradient, estimate_phases, orthonormalize_b, orthonormalize_u, update_b, update_u,
    CgReport, NormalOperator,
};

use alloc::format;

use crate::init::RankMode;
use crate::pr::PrConfig;
use crate::sensing::SamplePlan;
use crate::{Error, Result};

/// Which measurement partitions the iterations draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PartitionMode {
    /// Iteration `t` uses partition `t` for B and `T + t` for U.
    #[default]
    Fresh,
    /// Every iteration reuses partitions `1` and `T + 1`. Saves samples but
    /// breaks the independence between iterations.
    Reuse,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RunConfig {
    /// Outer iterations. `0` runs the initialization only.
    #[cfg_attr(feature = "serde", serde(rename = "T"))]
    pub iters: usize,
    pub t_pr_base: usize,
    pub t_pr_growth: usize,
    pub rank_mode: RankMode,
    pub ls_tol: f64,
    pub ls_max_iters: usize,
    pub rwf_step: f64,
    pub trunc_const: f64,
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub partitions: PartitionMode,
    /// Start each column's PR from the previous estimate expressed in the new
    /// basis.
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub warm_start: bool,
    /// Condition number used by the initialization's truncation. Falls back
    /// to the ground truth's when absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub kappa: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mu: Option<f64>,
    /// Overrides `9 κ² μ²` in the initialization.
    #[cfg_attr(feature = "serde", serde(default))]
    pub yu_trunc_const: Option<f64>,
    /// `converged` threshold on the final SE_F.
    #[cfg_attr(feature = "serde", serde(default = "default_success_tol"))]
    pub success_tol: f64,
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

#[cfg(feature = "serde")]
fn default_success_tol() -> f64 {
    DEFAULT_SUCCESS_TOL
}

pub const DEFAULT_LS_TOL: f64 = 1e-10;
pub const DEFAULT_LS_MAX_ITERS: usize = 200;
pub const DEFAULT_SUCCESS_TOL: f64 = 1e-6;

/// `10 + ceil(2 log₂(r κ))`.
pub fn default_t_pr_base(r: usize, kappa: f64) -> usize {
    let l = libm::ceil(2.0 * libm::log2(r as f64 * kappa));
    10 + if l > 0.0 { l as usize } else { 0 }
}

impl RunConfig {
    /// Defaults for an instance of rank `r` and condition number `kappa`.
    pub fn new(iters: usize, rank_mode: RankMode, r: usize, kappa: f64) -> Self {
        let pr = PrConfig::default();
        Self {
            iters,
            t_pr_base: default_t_pr_base(r, kappa),
            t_pr_growth: 1,
            rank_mode,
            ls_tol: DEFAULT_LS_TOL,
            ls_max_iters: DEFAULT_LS_MAX_ITERS,
            rwf_step: pr.step,
            trunc_const: pr.trunc_const,
            seed: 0,
            partitions: PartitionMode::Fresh,
            warm_start: true,
            kappa: None,
            mu: None,
            yu_trunc_const: None,
            success_tol: DEFAULT_SUCCESS_TOL,
        }
    }

    /// Inner PR iterations for outer iteration `t` (1-based).
    pub fn t_pr(&self, t: usize) -> usize {
        self.t_pr_base + self.t_pr_growth * t
    }

    pub fn pr_config(&self, t: usize) -> PrConfig {
        PrConfig {
            iters: self.t_pr(t),
            step: self.rwf_step,
            trunc_const: self.trunc_const,
        }
    }

    /// `(τ_B, τ_U)` for outer iteration `t` (1-based).
    pub fn partitions_for(&self, plan: &SamplePlan, t: usize) -> (usize, usize) {
        match self.partitions {
            PartitionMode::Fresh => (plan.b_partition(t), plan.u_partition(t)),
            PartitionMode::Reuse => (plan.b_partition(1), plan.u_partition(1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_pr_base == 0 {
            return Err(Error::Parameter("t_pr_base must be >= 1".into()));
        }
        if !(self.ls_tol > 0.0 && self.ls_tol < 1.0) {
            return Err(Error::Parameter(format!(
                "ls_tol must lie in (0, 1), got {}",
                self.ls_tol
            )));
        }
        if self.ls_max_iters == 0 {
            return Err(Error::Parameter("ls_max_iters must be >= 1".into()));
        }
        if !(self.success_tol > 0.0) {
            return Err(Error::Parameter(format!(
                "success_tol must be positive, got {}",
                self.success_tol
            )));
        }
        if let Some(c) = self.yu_trunc_const {
            if !(c > 0.0) {
                return Err(Error::Parameter(format!(
                    "yu_trunc_const must be positive, got {c}"
                )));
            }
        }
        self.pr_config(1).validate()
    }

    /// Checks that `plan` holds every partition the run will touch.
    pub fn validate_against(&self, plan: &SamplePlan) -> Result<()> {
        self.validate()?;
        match self.partitions {
            PartitionMode::Fresh if self.iters > plan.iters => Err(Error::PartitionOutOfRange {
                tau: plan.u_partition(self.iters),
                max: plan.last_partition(),
            }),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests;
