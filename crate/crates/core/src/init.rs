//! Truncated spectral initialization of the column span and data-driven
//! rank estimation.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::linalg;
use crate::sensing::MeasurementSet;
use crate::{Error, Result, Scalar};

/// How many leading eigenvectors of `Y_U` to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RankMode {
    /// Largest `j` with `λ_j − λ_n ≥ ω`.
    Threshold(f64),
    KnownRank(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInit<T: Scalar> {
    pub y_u: DMatrix<T>,
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    pub r_hat: usize,
    /// `n x r_hat`, orthonormal columns.
    pub u0: DMatrix<T>,
}

/// `ω = 1.3 σ_min² / q`.
pub fn omega_for(sigma_min: f64, q: usize) -> f64 {
    1.3 * sigma_min * sigma_min / q as f64
}

/// Default truncation constant `9 κ² μ²`.
pub fn default_trunc_const(kappa: f64, mu: f64) -> f64 {
    9.0 * kappa * kappa * mu * mu
}

/// `Y_U = (1/mq) Σ_k Σ_i y_ik² a_ik a_ikᴴ 1{y_ik² ≤ 9κ²μ² (1/mq) Σ y²}` over
/// the initialization partition.
pub fn build_yu<T: Scalar>(ms: &MeasurementSet<T>, kappa: f64, mu: f64) -> Result<DMatrix<T>> {
    check_oracle(kappa, mu)?;
    build_yu_with(ms, default_trunc_const(kappa, mu))
}

/// [`build_yu`] with an explicit truncation constant in place of `9κ²μ²`.
/// `f64::INFINITY` disables truncation.
pub fn build_yu_with<T: Scalar>(ms: &MeasurementSet<T>, trunc_const: f64) -> Result<DMatrix<T>> {
    if !(trunc_const > 0.0) {
        return Err(Error::Parameter(format!(
            "truncation constant must be positive, got {trunc_const}"
        )));
    }
    let n = ms.n();
    let q = ms.q();
    let m = ms.plan().m0;
    let total = (m * q) as f64;
    let mean_sq = (0..q)
        .flat_map(|k| ms.y(0, k).iter())
        .map(|v| v * v)
        .sum::<f64>()
        / total;
    let threshold = trunc_const * mean_sq;
    let mut yu = DMatrix::<T>::zeros(n, n);
    for (_, y, a) in ms.batch(0)? {
        let mut weighted = a.clone();
        for (mut col, &v) in weighted.column_iter_mut().zip(y) {
            let w = if v * v <= threshold {
                v * v / total
            } else {
                0.0
            };
            col.iter_mut().for_each(|e| *e = e.scale(w));
        }
        yu.gemm(T::one(), &weighted, &a.adjoint(), T::one());
    }
    Ok((&yu + yu.adjoint()).unscale(2.0))
}

/// `max { j : λ_j − λ_n ≥ ω }` (1-based), `0` when no eigenvalue qualifies.
/// `eigenvalues` must be sorted non-increasingly.
pub fn estimate_rank(eigenvalues: &[f64], omega: f64) -> usize {
    let Some(&smallest) = eigenvalues.last() else {
        return 0;
    };
    eigenvalues
        .iter()
        .rposition(|&l| l - smallest >= omega)
        .map_or(0, |j| j + 1)
}

pub fn spectral_init<T: Scalar>(
    ms: &MeasurementSet<T>,
    kappa: f64,
    mu: f64,
    mode: RankMode,
) -> Result<SpectralInit<T>> {
    check_oracle(kappa, mu)?;
    spectral_init_with(ms, default_trunc_const(kappa, mu), mode)
}

/// [`spectral_init`] with an explicit truncation constant.
pub fn spectral_init_with<T: Scalar>(
    ms: &MeasurementSet<T>,
    trunc_const: f64,
    mode: RankMode,
) -> Result<SpectralInit<T>> {
    let n = ms.n();
    if let RankMode::KnownRank(r) = mode {
        if r == 0 || r > n {
            return Err(Error::Dimension(format!("known rank {r} outside 1..={n}")));
        }
    }
    if let RankMode::Threshold(omega) = mode {
        if !(omega > 0.0) {
            return Err(Error::Parameter(format!(
                "omega must be positive, got {omega}"
            )));
        }
    }
    let y_u = build_yu_with(ms, trunc_const)?;
    if y_u.iter().all(|v| v.is_zero()) {
        return Err(Error::DegenerateData(
            "all initialization measurements are zero".into(),
        ));
    }
    let (eigenvalues, vectors) = linalg::hermitian_eigen(&y_u);
    let r_hat = match mode {
        RankMode::KnownRank(r) => r,
        RankMode::Threshold(omega) => estimate_rank(&eigenvalues, omega),
    };
    if r_hat == 0 {
        return Err(Error::NoRankDetected);
    }
    let u0 = vectors.columns(0, r_hat).into_owned();
    Ok(SpectralInit {
        y_u,
        eigenvalues,
        r_hat,
        u0,
    })
}

fn check_oracle(kappa: f64, mu: f64) -> Result<()> {
    // μ is measured and can land a few ulps below 1.
    if !(kappa >= 1.0) || !(mu >= 1.0 - 1e-9) || !kappa.is_finite() || !mu.is_finite() {
        return Err(Error::Parameter(format!(
            "kappa and mu must be finite and >= 1, got {kappa} and {mu}"
        )));
    }
    Ok(())
}
