use lrpr_core::altmin::{compute_noise_floor, run, NoClock, PartitionMode, RunConfig, RunReport};
use lrpr_core::init::RankMode;
use lrpr_core::metrics::dist;
use lrpr_core::model::{assemble_x, generate_ground_truth, GroundTruth};
use lrpr_core::pr::{pr_solve, PrConfig, PrInit, PrProblem};
use lrpr_core::sensing::{measure, MeasurementSet, NoiseSpec, SamplePlan};
use lrpr_core::{Scalar, C64};

fn setup<T: Scalar>(
    (n, q, r): (usize, usize, usize),
    (m0, m1, t): (usize, usize, usize),
    noise: NoiseSpec,
    seed: u64,
) -> (GroundTruth<T>, MeasurementSet<T>, RunConfig) {
    let gt = generate_ground_truth::<T>(n, q, r, 2.0, seed).unwrap();
    let ms = measure(&gt, SamplePlan::new(m0, m1, t).unwrap(), noise, seed).unwrap();
    let cfg = RunConfig::new(t, RankMode::KnownRank(r), r, 2.0);
    (gt, ms, cfg)
}

fn run_report<T: Scalar>(
    gt: &GroundTruth<T>,
    ms: &MeasurementSet<T>,
    cfg: &RunConfig,
) -> RunReport {
    run(Some(gt), ms, cfg, &NoClock).unwrap().report
}

#[test]
fn desk_scale_real_run_reaches_solver_precision() {
    let (gt, ms, cfg) = setup::<f64>((60, 120, 2), (150, 60, 25), NoiseSpec::NONE, 3);
    let rep = run_report(&gt, &ms, &cfg);
    assert_eq!(rep.trajectory.len(), 26);
    assert!(
        rep.final_matdist_rel().unwrap() <= 1e-8,
        "{:?}",
        rep.final_matdist_rel()
    );
    assert_eq!(rep.summary.converged, Some(true));
    assert!(rep.warnings.is_empty(), "{:?}", rep.warnings);
}

/// `matdist(X*, X̂) ≤ 3 · SE_F · σ_max`, with `X̂` paired against the basis
/// it was built from (the previous row's).
fn check_coupling<T: Scalar>(seed: u64) {
    let (gt, ms, cfg) = setup::<T>((60, 120, 2), (150, 60, 12), NoiseSpec::NONE, seed);
    let rep = run_report(&gt, &ms, &cfg);
    let x_norm = assemble_x(&gt).norm();
    for w in rep.trajectory.windows(2) {
        let md = w[1].matdist_rel.unwrap() * x_norm;
        let bound = 3.0 * w[0].sef.unwrap() * gt.sigma_max();
        // Below ~1e-13 both sides are rounding noise.
        assert!(
            md <= bound.max(1e-13),
            "iter {}: {md:e} > {bound:e}",
            w[1].iter
        );
    }
}

#[test]
fn matdist_is_bounded_by_subspace_error() {
    for seed in 0..3 {
        check_coupling::<f64>(seed);
        check_coupling::<C64>(seed);
    }
}

#[test]
fn single_column_rank_one_matches_direct_pr() {
    let tol = 1e-10;
    for seed in 0..5 {
        let (gt, ms, cfg) = setup::<f64>((20, 1, 1), (400, 100, 20), NoiseSpec::NONE, seed);
        let out = run(Some(&gt), &ms, &cfg, &NoClock).unwrap();
        let x = assemble_x(&gt).column(0).into_owned();
        let lrpr =
            dist(&x, &out.estimate.unwrap().x_hat.column(0).into_owned()).unwrap() / x.norm();
        let a = ms.sensing(0, 0).unwrap();
        let p = PrProblem::new(ms.y(0, 0), &a).unwrap();
        let pr = PrConfig {
            iters: 500,
            ..PrConfig::default()
        };
        let direct = pr_solve(&p, &pr, PrInit::Auto).unwrap();
        let rwf = dist(&x, &direct).unwrap() / x.norm();
        assert!(
            (lrpr - rwf).abs() <= 10.0 * tol,
            "seed {seed}: {lrpr:e} vs {rwf:e}"
        );
    }
}

#[test]
fn reuse_mode_runs_past_the_fresh_budget() {
    let (gt, ms, mut cfg) = setup::<f64>((30, 60, 2), (150, 60, 1), NoiseSpec::NONE, 4);
    cfg.iters = 10;
    assert!(run(Some(&gt), &ms, &cfg, &NoClock).is_err());
    cfg.partitions = PartitionMode::Reuse;
    let rep = run_report(&gt, &ms, &cfg);
    assert_eq!(rep.trajectory.len(), 11);
    assert!(rep.final_sef().unwrap() < rep.trajectory[0].sef.unwrap());
}

fn last5(rep: &RunReport) -> Vec<f64> {
    let sef: Vec<f64> = rep.trajectory.iter().map(|r| r.sef.unwrap()).collect();
    sef[sef.len() - 5..].to_vec()
}

#[test]
fn noisy_run_plateaus_near_noise_floor() {
    for seed in 0..3 {
        let (gt, ms, cfg) =
            setup::<f64>((60, 120, 2), (150, 60, 25), NoiseSpec::bounded(1e-3), seed);
        let rep = run_report(&gt, &ms, &cfg);
        let tail = last5(&rep);
        let (lo, hi) = tail
            .iter()
            .fold((f64::MAX, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        assert!(hi <= 2.0 * lo, "seed {seed}: spread {tail:?}");
        let floor = compute_noise_floor(&ms, &gt, None).unwrap();
        let plateau = tail.iter().sum::<f64>() / 5.0;
        assert!(
            plateau <= 10.0 * floor.value && plateau >= floor.value / 10.0,
            "seed {seed}: plateau {plateau:e}, floor {:e} (frobenius {:e}, column {:e})",
            floor.value,
            floor.frobenius_term,
            floor.column_term
        );
    }
}
