use alloc::vec::Vec;

use crate::sensing::{NoiseSpec, SamplePlan};
use crate::Field;

use super::RunConfig;

/// One trajectory row. Row `0` is the initialization.
///
/// `se2` and `sef` measure the basis produced by the row's iteration, while
/// `matdist_rel` measures the estimate `X̂ = U B̂` formed inside that
/// iteration from the previous row's basis. Metrics are `None` without a
/// ground truth, and the subspace errors are also `None` when the detected
/// rank differs from the true one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iter: usize,
    pub se2: Option<f64>,
    pub sef: Option<f64>,
    pub matdist_rel: Option<f64>,
    /// Inner PR iterations, `0` for the initialization row.
    pub t_pr_used: usize,
    pub wall_time_ms: f64,
    pub ls_iters: usize,
    pub ls_rel_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FinalSummary {
    /// Final SE_F within `success_tol`. `None` without a ground truth.
    pub converged: Option<bool>,
    pub r_hat: usize,
    /// Incoherence of the final right factor `Bᴴ`, `None` for init-only runs.
    pub mu_estimate: Option<f64>,
    pub total_time_ms: f64,
    /// Iterations completed before returning.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub config: RunConfig,
    pub master_seed: u64,
    pub plan: SamplePlan,
    pub noise: NoiseSpec,
    pub n: usize,
    pub q: usize,
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum RunWarning {
    /// The U least squares stopped above `ls_tol`.
    LsNotConverged {
        iter: usize,
        rel_residual: f64,
    },
    RankMismatch {
        r_hat: usize,
        rank: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    pub trajectory: Vec<IterationRecord>,
    #[cfg_attr(feature = "serde", serde(rename = "final"))]
    pub summary: FinalSummary,
    pub provenance: Provenance,
    pub warnings: Vec<RunWarning>,
}

impl RunReport {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.trajectory.last()
    }

    pub fn sef_trajectory(&self) -> Vec<Option<f64>> {
        self.trajectory.iter().map(|r| r.sef).collect()
    }

    pub fn final_matdist_rel(&self) -> Option<f64> {
        self.last().and_then(|r| r.matdist_rel)
    }

    pub fn final_sef(&self) -> Option<f64> {
        self.last().and_then(|r| r.sef)
    }
}
