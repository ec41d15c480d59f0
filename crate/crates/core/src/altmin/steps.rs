//! The individual steps of one AltMin iteration.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::linalg::{self, RANK_RTOL};
use crate::pr::{pr_solve, PrConfig, PrInit, PrProblem};
use crate::sensing::MeasurementSet;
use crate::{Error, Result, Scalar};

/// Solve the `q` projected `r`-dimensional PR problems of partition `tau`:
/// `b̂_k = PR(y_k, Uᴴ A_k)`. Returns `(B̂, X̂ = U B̂)`.
///
/// When `warm` holds the previous `X̂`, column `k` starts from `Uᴴ x̂_k`
/// (the previous estimate expressed in the current basis); otherwise, or when
/// that projection is zero, the solver's own spectral start is used.
pub fn update_b<T: Scalar>(
    u: &DMatrix<T>,
    ms: &MeasurementSet<T>,
    tau: usize,
    pr: &PrConfig,
    warm: Option<&DMatrix<T>>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let (n, r) = u.shape();
    if n != ms.n() {
        return Err(Error::ShapeMismatch {
            expected: (ms.n(), r),
            found: (n, r),
        });
    }
    let m = ms.plan().partition_len(tau)?;
    if m < r {
        return Err(Error::UnderDetermined { m, d: r });
    }
    if let Some(w) = warm {
        if w.shape() != (n, ms.q()) {
            return Err(Error::ShapeMismatch {
                expected: (n, ms.q()),
                found: w.shape(),
            });
        }
    }
    let uh = u.adjoint();
    let mut b_hat = DMatrix::<T>::zeros(r, ms.q());
    for (k, y, a) in ms.batch(tau)? {
        let projected = &uh * &a;
        let problem = PrProblem::new(y, &projected)?;
        let init = match warm {
            Some(w) => {
                let b0 = &uh * w.column(k);
                if b0.norm() > 0.0 {
                    PrInit::Given(b0)
                } else {
                    PrInit::Auto
                }
            }
            None => PrInit::Auto,
        };
        let b = pr_solve(&problem, pr, init)?;
        b_hat.set_column(k, &b);
    }
    let x_hat = u * &b_hat;
    Ok((b_hat, x_hat))
}

/// `B̂ = R_B B` with `B` having orthonormal rows and `R_B` a lower-triangular
/// matrix with positive real diagonal.
pub fn orthonormalize_b<T: Scalar>(b_hat: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let (r, q) = b_hat.shape();
    if q < r {
        return Err(Error::Dimension(alloc::format!(
            "B̂ is {r}x{q}; full row rank needs q >= r"
        )));
    }
    let (qf, rf) = linalg::qr_positive(&b_hat.adjoint())?;
    let rank = linalg::triangular_rank(&rf, RANK_RTOL);
    if rank < r {
        return Err(Error::RankCollapse { rank, expected: r });
    }
    Ok((rf.adjoint(), qf.adjoint()))
}

/// `Û = U R_U` with orthonormal `U` and upper-triangular positive-diagonal
/// `R_U`.
pub fn orthonormalize_u<T: Scalar>(u_hat: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let r = u_hat.ncols();
    let (u, r_u) = linalg::qr_positive(u_hat)?;
    let rank = linalg::triangular_rank(&r_u, RANK_RTOL);
    if rank < r {
        return Err(Error::RankCollapse { rank, expected: r });
    }
    Ok((u, r_u))
}

/// `ĉ_ik = phase(a_ikᴴ x̂_k)` for partition `tau`, as an `m x q` matrix.
pub fn estimate_phases<T: Scalar>(
    x_hat: &DMatrix<T>,
    ms: &MeasurementSet<T>,
    tau: usize,
) -> Result<DMatrix<T>> {
    if x_hat.shape() != (ms.n(), ms.q()) {
        return Err(Error::ShapeMismatch {
            expected: (ms.n(), ms.q()),
            found: x_hat.shape(),
        });
    }
    let a = ms.partition_matrices(tau)?;
    Ok(phases_with(x_hat, &a))
}

pub(crate) fn phases_with<T: Scalar>(x_hat: &DMatrix<T>, a: &[DMatrix<T>]) -> DMatrix<T> {
    let m = a.first().map_or(0, |a| a.ncols());
    let mut c = DMatrix::<T>::zeros(m, a.len());
    for (k, ak) in a.iter().enumerate() {
        let z = ak.adjoint() * x_hat.column(k);
        c.set_column(k, &z.map(|v| v.phase()));
    }
    c
}

/// Normal-equation operator of the U least squares,
/// `W ↦ Σ_k A_k (A_kᴴ W b_k) b_kᴴ`, applied without forming the `nr x nr`
/// system.
pub struct NormalOperator<'a, T: Scalar> {
    a: &'a [DMatrix<T>],
    b: &'a DMatrix<T>,
}

impl<'a, T: Scalar> NormalOperator<'a, T> {
    /// `a[k]` is the `n x m` sensing matrix of column `k`, `b` is `r x q`.
    pub fn new(a: &'a [DMatrix<T>], b: &'a DMatrix<T>) -> Result<Self> {
        if a.len() != b.ncols() {
            return Err(Error::LengthMismatch {
                expected: b.ncols(),
                found: a.len(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn apply(&self, w: &DMatrix<T>) -> DMatrix<T> {
        let n = w.nrows();
        let mut out = DMatrix::<T>::zeros(n, self.b.nrows());
        for (ak, bk) in self.a.iter().zip(self.b.column_iter()) {
            let wb = w * bk;
            let z = ak.adjoint() * wb;
            let g = ak * z;
            out.gerc(T::one(), &g, &bk, T::one());
        }
        out
    }

    /// `Σ_k A_k (ĉ_k ⊙ y_k) b_kᴴ`.
    pub fn rhs(&self, c_hat: &DMatrix<T>, y: &[&[f64]]) -> DMatrix<T> {
        let n = self.a.first().map_or(0, |a| a.nrows());
        let mut out = DMatrix::<T>::zeros(n, self.b.nrows());
        for (k, (ak, bk)) in self.a.iter().zip(self.b.column_iter()).enumerate() {
            let target = c_hat
                .column(k)
                .iter()
                .zip(y[k])
                .map(|(c, &v)| c.scale(v))
                .collect::<Vec<_>>();
            let g = ak * nalgebra::DVector::from_vec(target);
            out.gerc(T::one(), &g, &bk, T::one());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CgReport {
    pub iters: usize,
    /// `‖rhs − Op(Û)‖_F / ‖rhs‖_F` at exit.
    pub rel_residual: f64,
    /// `rel_residual ≤ ls_tol`.
    pub converged: bool,
}

/// Residuals below this multiple of `‖rhs‖` are at rounding level and stop
/// CG regardless of the requested reduction.
const CG_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Conjugate gradient on a self-adjoint positive semi-definite operator over
/// `n x r` matrices.
///
/// Stops once the residual has dropped by `tol` relative to its starting
/// value, and never requires more than `tol ‖rhs‖`, so warm starts near the
/// solution still gain `tol` in accuracy.
pub fn conjugate_gradient<T: Scalar, F>(
    op: F,
    rhs: &DMatrix<T>,
    x0: DMatrix<T>,
    tol: f64,
    max_iters: usize,
) -> (DMatrix<T>, CgReport)
where
    F: Fn(&DMatrix<T>) -> DMatrix<T>,
{
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        let zero = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        return (
            zero,
            CgReport {
                iters: 0,
                rel_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut x = x0;
    let mut r = rhs - op(&x);
    let r0 = r.norm();
    let target = (tol * r0.min(rhs_norm)).max(CG_FLOOR * rhs_norm);
    let mut rr = r.norm_squared();
    let mut p = r.clone();
    let mut iters = 0;
    while libm::sqrt(rr) > target && iters < max_iters {
        let ap = op(&p);
        let pap = p.dotc(&ap).real();
        if !(pap > 0.0) {
            break;
        }
        let alpha = T::from_real(rr / pap);
        x += &p * alpha;
        r -= &ap * alpha;
        let rr_new = r.norm_squared();
        let beta = T::from_real(rr_new / rr);
        p = &r + p * beta;
        rr = rr_new;
        iters += 1;
    }
    let rel_residual = libm::sqrt(rr) / rhs_norm;
    (
        x,
        CgReport {
            iters,
            rel_residual,
            converged: rel_residual <= tol,
        },
    )
}

/// `Û = argmin_Ũ Σ_k ‖ĉ_k ⊙ y_k − A_kᴴ Ũ b_k‖²` over partition `tau`,
/// solved by CG on the normal equations. `x0` defaults to zero.
pub fn update_u<T: Scalar>(
    ms: &MeasurementSet<T>,
    tau: usize,
    c_hat: &DMatrix<T>,
    b: &DMatrix<T>,
    x0: Option<DMatrix<T>>,
    ls_tol: f64,
    ls_max_iters: usize,
) -> Result<(DMatrix<T>, CgReport)> {
    let a = ms.partition_matrices(tau)?;
    let y: Vec<&[f64]> = (0..ms.q()).map(|k| ms.y(tau, k)).collect();
    update_u_with(&a, &y, c_hat, b, x0, ls_tol, ls_max_iters)
}

pub(crate) fn update_u_with<T: Scalar>(
    a: &[DMatrix<T>],
    y: &[&[f64]],
    c_hat: &DMatrix<T>,
    b: &DMatrix<T>,
    x0: Option<DMatrix<T>>,
    ls_tol: f64,
    ls_max_iters: usize,
) -> Result<(DMatrix<T>, CgReport)> {
    let n = a.first().map_or(0, |a| a.nrows());
    let m = a.first().map_or(0, |a| a.ncols());
    if c_hat.shape() != (m, a.len()) {
        return Err(Error::ShapeMismatch {
            expected: (m, a.len()),
            found: c_hat.shape(),
        });
    }
    let op = NormalOperator::new(a, b)?;
    let rhs = op.rhs(c_hat, y);
    let x0 = match x0 {
        Some(x) if x.shape() == rhs.shape() => x,
        Some(x) => {
            return Err(Error::ShapeMismatch {
                expected: rhs.shape(),
                found: x.shape(),
            })
        }
        None => DMatrix::zeros(n, b.nrows()),
    };
    Ok(conjugate_gradient(
        |w| op.apply(w),
        &rhs,
        x0,
        ls_tol,
        ls_max_iters,
    ))
}
