//! Phase-invariant distances and subspace errors.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Dyn, Storage, Vector};

use crate::linalg;
use crate::{Error, Result, Scalar};

const BASIS_TOL: f64 = 1e-8;

/// `min_θ ‖x* − e^{−jθ} x̂‖`.
///
/// The minimizing rotation is `phase(⟨x̂, x*⟩)`, so the distance is evaluated
/// as the residual at that rotation. This equals
/// `√(‖x*‖² + ‖x̂‖² − 2|⟨x̂, x*⟩|)` but does not lose half the digits to
/// cancellation when the two vectors nearly agree.
pub fn dist<T, S1, S2>(x_star: &Vector<T, Dyn, S1>, x_hat: &Vector<T, Dyn, S2>) -> Result<f64>
where
    T: Scalar,
    S1: Storage<T, Dyn>,
    S2: Storage<T, Dyn>,
{
    if x_star.len() != x_hat.len() {
        return Err(Error::LengthMismatch {
            expected: x_star.len(),
            found: x_hat.len(),
        });
    }
    Ok(dist_unchecked(x_star, x_hat))
}

fn dist_unchecked<T, S1, S2>(x_star: &Vector<T, Dyn, S1>, x_hat: &Vector<T, Dyn, S2>) -> f64
where
    T: Scalar,
    S1: Storage<T, Dyn>,
    S2: Storage<T, Dyn>,
{
    let z = x_hat.dotc(x_star).phase();
    libm::sqrt(
        x_star
            .iter()
            .zip(x_hat.iter())
            .map(|(&a, &b)| (a - z * b).modulus_squared())
            .sum::<f64>(),
    )
}

/// Per-column phase-invariant distances.
pub fn column_dists<T: Scalar>(x_star: &DMatrix<T>, x_hat: &DMatrix<T>) -> Result<Vec<f64>> {
    check_same_shape(x_star, x_hat)?;
    Ok(x_star
        .column_iter()
        .zip(x_hat.column_iter())
        .map(|(a, b)| dist_unchecked(&a, &b))
        .collect())
}

/// `√(Σ_k dist(x*_k, x̂_k)²)`.
pub fn matdist<T: Scalar>(x_star: &DMatrix<T>, x_hat: &DMatrix<T>) -> Result<f64> {
    let sq = column_dists(x_star, x_hat)?
        .iter()
        .map(|d| d * d)
        .sum::<f64>();
    Ok(libm::sqrt(sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SubspaceNorm {
    Spectral,
    Frobenius,
}

/// `‖(I − U1 U1ᴴ) U2‖` in the spectral (SE₂) or Frobenius (SE_F) norm.
pub fn subspace_error<T: Scalar>(
    u1: &DMatrix<T>,
    u2: &DMatrix<T>,
    mode: SubspaceNorm,
) -> Result<f64> {
    check_same_shape(u1, u2)?;
    linalg::check_orthonormal_columns(u1, BASIS_TOL)?;
    linalg::check_orthonormal_columns(u2, BASIS_TOL)?;
    let residual = u2 - u1 * (u1.adjoint() * u2);
    Ok(match mode {
        SubspaceNorm::Spectral => linalg::spectral_norm(&residual).min(1.0),
        SubspaceNorm::Frobenius => residual.norm().min(libm::sqrt(u1.ncols() as f64)),
    })
}

pub fn se2<T: Scalar>(u1: &DMatrix<T>, u2: &DMatrix<T>) -> Result<f64> {
    subspace_error(u1, u2, SubspaceNorm::Spectral)
}

pub fn sef<T: Scalar>(u1: &DMatrix<T>, u2: &DMatrix<T>) -> Result<f64> {
    subspace_error(u1, u2, SubspaceNorm::Frobenius)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aligned<T: Scalar> {
    pub x_hat: DMatrix<T>,
    /// Columns with `⟨x*_k, x̂_k⟩ = 0`; these are left unrotated.
    pub zero_overlap: Vec<usize>,
}

/// Rotate each column of `x_hat` by its optimal unit-modulus factor so that
/// `‖X* − X̂‖_F = matdist(X*, X̂)`.
pub fn phase_align_columns<T: Scalar>(
    x_star: &DMatrix<T>,
    x_hat: &DMatrix<T>,
) -> Result<Aligned<T>> {
    check_same_shape(x_star, x_hat)?;
    let mut out = x_hat.clone();
    let mut zero_overlap = Vec::new();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        let ip = col.dotc(&x_star.column(k));
        if ip.modulus() == 0.0 {
            zero_overlap.push(k);
            continue;
        }
        let z = ip.phase();
        col.iter_mut().for_each(|v| *v *= z);
    }
    Ok(Aligned {
        x_hat: out,
        zero_overlap,
    })
}

/// Summary errors of an estimate against the truth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorReport {
    pub se2: f64,
    pub sef: f64,
    /// `matdist(X*, X̂) / ‖X*‖_F`
    pub matdist_rel: f64,
    pub per_column_dist: Vec<f64>,
}

pub fn error_report<T: Scalar>(
    u_star: &DMatrix<T>,
    u: &DMatrix<T>,
    x_star: &DMatrix<T>,
    x_hat: &DMatrix<T>,
) -> Result<ErrorReport> {
    let per_column_dist = column_dists(x_star, x_hat)?;
    let md = libm::sqrt(per_column_dist.iter().map(|d| d * d).sum::<f64>());
    Ok(ErrorReport {
        se2: se2(u_star, u)?,
        sef: sef(u_star, u)?,
        matdist_rel: md / x_star.norm(),
        per_column_dist,
    })
}

fn check_same_shape<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            found: b.shape(),
        });
    }
    Ok(())
}
