use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::init::{default_trunc_const, spectral_init_with, SpectralInit};
use crate::metrics;
use crate::model::{assemble_x, incoherence_mu, GroundTruth};
use crate::sensing::MeasurementSet;
use crate::{Error, Result, Scalar};

use super::report::{FinalSummary, IterationRecord, Provenance, RunReport, RunWarning};
use super::steps::{orthonormalize_b, orthonormalize_u, phases_with, update_b, update_u_with};
use super::RunConfig;

/// Millisecond time source. The core crate has no clock of its own.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Reports zero for every timing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// The iterate of one B-step. `x_hat = u · b_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredEstimate<T: Scalar> {
    /// Basis the B-step projected onto.
    pub u: DMatrix<T>,
    pub b_hat: DMatrix<T>,
    /// Orthonormal rows, `b_hat = R_B b`.
    pub b: DMatrix<T>,
    pub x_hat: DMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome<T: Scalar> {
    pub report: RunReport,
    /// Final basis.
    pub u: DMatrix<T>,
    /// Last B-step, `None` when no iteration ran.
    pub estimate: Option<FactoredEstimate<T>>,
    pub init: SpectralInit<T>,
}

/// A run that stopped on an error, with everything logged up to that point.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub report: Box<RunReport>,
}

impl core::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "run failed after {} iterations: {}",
            self.report.summary.iterations, self.error
        )
    }
}

struct Metrics<'a, T: Scalar> {
    gt: &'a GroundTruth<T>,
    x_star: DMatrix<T>,
    x_norm: f64,
}

impl<T: Scalar> Metrics<'_, T> {
    fn subspace(&self, u: &DMatrix<T>) -> Result<(Option<f64>, Option<f64>)> {
        if u.ncols() != self.gt.rank() {
            return Ok((None, None));
        }
        Ok((
            Some(metrics::se2(self.gt.u_star(), u)?),
            Some(metrics::sef(self.gt.u_star(), u)?),
        ))
    }

    fn matdist_rel(&self, x_hat: &DMatrix<T>) -> Result<Option<f64>> {
        if self.x_norm == 0.0 {
            return Ok(None);
        }
        Ok(Some(metrics::matdist(&self.x_star, x_hat)? / self.x_norm))
    }
}

struct State<T: Scalar> {
    trajectory: Vec<IterationRecord>,
    warnings: Vec<RunWarning>,
    r_hat: usize,
    estimate: Option<FactoredEstimate<T>>,
    started: f64,
}

/// Spectral initialization followed by `cfg.iters` outer iterations.
///
/// With a ground truth, subspace and matrix errors are logged for every row;
/// it also supplies `κ` and `μ` to the initialization unless `cfg` sets them.
/// Deterministic: equal inputs give bit-identical reports apart from timings.
pub fn run<T: Scalar, C: Clock + ?Sized>(
    gt: Option<&GroundTruth<T>>,
    ms: &MeasurementSet<T>,
    cfg: &RunConfig,
    clock: &C,
) -> core::result::Result<RunOutcome<T>, RunFailure> {
    let mut state = State {
        trajectory: Vec::with_capacity(cfg.iters + 1),
        warnings: Vec::new(),
        r_hat: 0,
        estimate: None,
        started: clock.now_ms(),
    };
    match drive(gt, ms, cfg, clock, &mut state) {
        Ok((u, init)) => {
            let (report, estimate) = finish(gt, ms, cfg, clock, state);
            Ok(RunOutcome {
                report,
                u,
                estimate,
                init,
            })
        }
        Err(error) => {
            let (report, _) = finish(gt, ms, cfg, clock, state);
            Err(RunFailure {
                error,
                report: Box::new(report),
            })
        }
    }
}

fn drive<T: Scalar, C: Clock + ?Sized>(
    gt: Option<&GroundTruth<T>>,
    ms: &MeasurementSet<T>,
    cfg: &RunConfig,
    clock: &C,
    state: &mut State<T>,
) -> Result<(DMatrix<T>, SpectralInit<T>)> {
    cfg.validate_against(ms.plan())?;
    let metrics = match gt {
        Some(gt) => {
            if (gt.n(), gt.q()) != (ms.n(), ms.q()) {
                return Err(Error::ShapeMismatch {
                    expected: (gt.n(), gt.q()),
                    found: (ms.n(), ms.q()),
                });
            }
            let x_star = assemble_x(gt);
            let x_norm = x_star.norm();
            Some(Metrics { gt, x_star, x_norm })
        }
        None => None,
    };

    let t0 = clock.now_ms();
    let trunc = init_trunc_const(gt, cfg)?;
    let init = spectral_init_with(ms, trunc, cfg.rank_mode)?;
    state.r_hat = init.r_hat;
    if let Some(gt) = gt {
        if init.r_hat != gt.rank() {
            state.warnings.push(RunWarning::RankMismatch {
                r_hat: init.r_hat,
                rank: gt.rank(),
            });
        }
    }
    let mut u = init.u0.clone();
    let (se2, sef) = match &metrics {
        Some(m) => m.subspace(&u)?,
        None => (None, None),
    };
    state.trajectory.push(IterationRecord {
        iter: 0,
        se2,
        sef,
        matdist_rel: None,
        t_pr_used: 0,
        wall_time_ms: clock.now_ms() - t0,
        ls_iters: 0,
        ls_rel_residual: None,
    });

    let y_of = |tau: usize| (0..ms.q()).map(|k| ms.y(tau, k)).collect::<Vec<_>>();
    let mut cached: Option<(usize, Vec<DMatrix<T>>)> = None;
    for t in 1..=cfg.iters {
        let t0 = clock.now_ms();
        let (tau_b, tau_u) = cfg.partitions_for(ms.plan(), t);
        let pr = cfg.pr_config(t);
        let warm = if cfg.warm_start {
            state.estimate.as_ref().map(|e| &e.x_hat)
        } else {
            None
        };
        let (b_hat, x_hat) = update_b(&u, ms, tau_b, &pr, warm)?;
        let (r_b, b) = orthonormalize_b(&b_hat)?;

        if cached.as_ref().map(|(tau, _)| *tau) != Some(tau_u) {
            cached = Some((tau_u, ms.partition_matrices(tau_u)?));
        }
        let a_u = &cached.as_ref().expect("filled above").1;
        let c_hat = phases_with(&x_hat, a_u);
        // Û = U R_B reproduces X̂ exactly, so it is the natural CG start.
        let x0 = &u * &r_b;
        let (u_hat, cg) = update_u_with(
            a_u,
            &y_of(tau_u),
            &c_hat,
            &b,
            Some(x0),
            cfg.ls_tol,
            cfg.ls_max_iters,
        )?;
        if !cg.converged {
            state.warnings.push(RunWarning::LsNotConverged {
                iter: t,
                rel_residual: cg.rel_residual,
            });
        }
        let (u_next, _) = orthonormalize_u(&u_hat)?;

        let (se2, sef, matdist_rel) = match &metrics {
            Some(m) => {
                let (se2, sef) = m.subspace(&u_next)?;
                (se2, sef, m.matdist_rel(&x_hat)?)
            }
            None => (None, None, None),
        };
        state.estimate = Some(FactoredEstimate {
            u: core::mem::replace(&mut u, u_next),
            b_hat,
            b,
            x_hat,
        });
        state.trajectory.push(IterationRecord {
            iter: t,
            se2,
            sef,
            matdist_rel,
            t_pr_used: pr.iters,
            wall_time_ms: clock.now_ms() - t0,
            ls_iters: cg.iters,
            ls_rel_residual: Some(cg.rel_residual),
        });
    }
    Ok((u, init))
}

fn init_trunc_const<T: Scalar>(gt: Option<&GroundTruth<T>>, cfg: &RunConfig) -> Result<f64> {
    if let Some(c) = cfg.yu_trunc_const {
        return Ok(c);
    }
    let kappa = cfg.kappa.or(gt.map(|g| g.kappa()));
    let mu = cfg.mu.or(gt.map(|g| g.mu()));
    match (kappa, mu) {
        (Some(k), Some(m)) if k >= 1.0 && m >= 1.0 - 1e-9 && k.is_finite() && m.is_finite() => {
            Ok(default_trunc_const(k, m))
        }
        (Some(k), Some(m)) => Err(Error::Parameter(alloc::format!(
            "kappa and mu must be finite and >= 1, got {k} and {m}"
        ))),
        _ => Err(Error::Parameter(
            "initialization needs kappa and mu (or yu_trunc_const) when no ground truth is given"
                .into(),
        )),
    }
}

fn finish<T: Scalar, C: Clock + ?Sized>(
    gt: Option<&GroundTruth<T>>,
    ms: &MeasurementSet<T>,
    cfg: &RunConfig,
    clock: &C,
    state: State<T>,
) -> (RunReport, Option<FactoredEstimate<T>>) {
    let final_sef = state.trajectory.last().and_then(|r| r.sef);
    // A run with a ground truth but no comparable subspace has not converged.
    let converged = gt.map(|_| final_sef.is_some_and(|sef| sef <= cfg.success_tol));
    let mu_estimate = state
        .estimate
        .as_ref()
        .and_then(|e| incoherence_mu(&e.b.adjoint()).ok());
    let summary = FinalSummary {
        converged,
        r_hat: state.r_hat,
        mu_estimate,
        total_time_ms: clock.now_ms() - state.started,
        iterations: state.trajectory.len().saturating_sub(1),
    };
    let report = RunReport {
        trajectory: state.trajectory,
        summary,
        provenance: Provenance {
            config: cfg.clone(),
            master_seed: ms.master_seed(),
            plan: *ms.plan(),
            noise: *ms.noise(),
            n: ms.n(),
            q: ms.q(),
            field: T::FIELD,
        },
        warnings: state.warnings,
    };
    (report, state.estimate)
}
