use alloc::vec::Vec;

use crate::model::{assemble_x, GroundTruth};
use crate::sensing::MeasurementSet;
use crate::{Error, Result, Scalar};

/// Error level below which the per-iteration contraction can no longer be
/// resolved from noisy measurements.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseFloor {
    /// `max(frobenius_term, column_term)`.
    pub value: f64,
    /// `‖V‖_F / (ε_v √m σ_max)`, worst partition.
    pub frobenius_term: f64,
    /// `max_k ‖v_k‖ / (√m ‖x*_k‖)`, worst partition.
    pub column_term: f64,
    pub eps_v: f64,
    /// Zero columns of the truth, left out of `column_term`.
    pub excluded_columns: Vec<usize>,
}

/// Noise floor over the update partitions `1..=2T`, with `m = m1` and
/// `ε_v = 0.01 / κ` unless given.
pub fn compute_noise_floor<T: Scalar>(
    ms: &MeasurementSet<T>,
    gt: &GroundTruth<T>,
    eps_v: Option<f64>,
) -> Result<NoiseFloor> {
    if (gt.n(), gt.q()) != (ms.n(), ms.q()) {
        return Err(Error::ShapeMismatch {
            expected: (gt.n(), gt.q()),
            found: (ms.n(), ms.q()),
        });
    }
    let eps_v = eps_v.unwrap_or(0.01 / gt.kappa());
    if !(eps_v > 0.0) || !eps_v.is_finite() {
        return Err(Error::Parameter(alloc::format!(
            "eps_v must be positive, got {eps_v}"
        )));
    }
    let x = assemble_x(gt);
    let col_norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let excluded_columns: Vec<usize> = (0..ms.q()).filter(|&k| col_norms[k] == 0.0).collect();
    let sqrt_m = libm::sqrt(ms.plan().m1 as f64);

    let mut frobenius_term: f64 = 0.0;
    let mut column_term: f64 = 0.0;
    for tau in 1..=ms.plan().last_partition() {
        let norms = ms.noise_norms(tau);
        let frob = libm::sqrt(norms.iter().map(|v| v * v).sum::<f64>());
        frobenius_term = frobenius_term.max(frob / (eps_v * sqrt_m * gt.sigma_max()));
        for (k, &v) in norms.iter().enumerate() {
            if col_norms[k] > 0.0 {
                column_term = column_term.max(v / (sqrt_m * col_norms[k]));
            }
        }
    }
    Ok(NoiseFloor {
        value: frobenius_term.max(column_term),
        frobenius_term,
        column_term,
        eps_v,
        excluded_columns,
    })
}

/// Smallest `t ≥ 0` with `0.2^t δ₀ < floor`, i.e. the first iteration whose
/// error bound sits below the noise floor. `None` for a zero floor.
pub fn noise_floor_crossing(floor: f64, delta0: f64) -> Option<usize> {
    if !(floor > 0.0) || !(delta0 > 0.0) {
        return None;
    }
    let mut bound = delta0;
    let mut t = 0;
    while bound >= floor {
        bound *= 0.2;
        t += 1;
    }
    Some(t)
}
