//! Synthetic rank-`r` ground truths `X* = U* diag(σ) V*ᴴ`.
//!
//! Incoherence of the right factor is measured on each instance rather than
//! enforced by the generator.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix};

use crate::linalg::{self, column_orthonormality_defect};
use crate::rng::{self, Domain};
use crate::{Error, Field, Result, Scalar};

/// Orthonormality tolerance for stored factors.
const FACTOR_TOL: f64 = 1e-10;
/// Orthonormality tolerance for caller-provided bases.
const INPUT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T: Scalar> {
    u_star: DMatrix<T>,
    sigma: Vec<f64>,
    v_star: DMatrix<T>,
}

impl<T: Scalar> GroundTruth<T> {
    /// Validate and wrap explicit factors.
    pub fn from_parts(u_star: DMatrix<T>, sigma: Vec<f64>, v_star: DMatrix<T>) -> Result<Self> {
        let (n, r) = u_star.shape();
        let (q, rv) = v_star.shape();
        if r == 0 || r != rv || r != sigma.len() || r > n.min(q) {
            return Err(Error::Dimension(format!(
                "U* is {n}x{r}, V* is {q}x{rv}, sigma has {} entries",
                sigma.len()
            )));
        }
        if !sigma.windows(2).all(|w| w[0] >= w[1]) || !(sigma[r - 1] > 0.0) {
            return Err(Error::Parameter(
                "sigma must be positive and non-increasing".into(),
            ));
        }
        for m in [&u_star, &v_star] {
            let deviation = column_orthonormality_defect(m);
            if !(deviation <= FACTOR_TOL) {
                return Err(Error::NotOrthonormal { deviation });
            }
        }
        Ok(Self {
            u_star,
            sigma,
            v_star,
        })
    }

    pub fn n(&self) -> usize {
        self.u_star.nrows()
    }

    pub fn q(&self) -> usize {
        self.v_star.nrows()
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn field(&self) -> Field {
        T::FIELD
    }

    pub fn u_star(&self) -> &DMatrix<T> {
        &self.u_star
    }

    pub fn v_star(&self) -> &DMatrix<T> {
        &self.v_star
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma[0]
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma[self.rank() - 1]
    }

    /// Measured condition number `σ_max / σ_min`.
    pub fn kappa(&self) -> f64 {
        self.sigma_max() / self.sigma_min()
    }

    /// Measured right incoherence, see [`incoherence_mu`].
    pub fn mu(&self) -> f64 {
        mu_unchecked(&self.v_star)
    }

    /// `B̃ = diag(σ) V*ᴴ`, the `r x q` coefficient matrix of `X*` in `U*`.
    pub fn b_tilde(&self) -> DMatrix<T> {
        let mut b = self.v_star.adjoint();
        for (i, &s) in self.sigma.iter().enumerate() {
            b.row_mut(i).iter_mut().for_each(|x| *x = x.scale(s));
        }
        b
    }
}

/// Draw `U*`, `V*` by positive-diagonal QR of i.i.d. Gaussian matrices and
/// space the singular values linearly from 1 down to `1 / kappa_target`.
pub fn generate_ground_truth<T: Scalar>(
    n: usize,
    q: usize,
    r: usize,
    kappa_target: f64,
    seed: u64,
) -> Result<GroundTruth<T>> {
    if r == 0 || r > n.min(q) {
        return Err(Error::Dimension(format!(
            "rank {r} must lie in 1..=min({n}, {q})"
        )));
    }
    if !(kappa_target >= 1.0) || !kappa_target.is_finite() {
        return Err(Error::Parameter(format!(
            "kappa_target must be a finite value >= 1, got {kappa_target}"
        )));
    }
    let u_star = random_basis::<T>(n, r, seed, 0)?;
    let v_star = random_basis::<T>(q, r, seed, 1)?;
    let sigma = linear_spectrum(r, kappa_target);
    GroundTruth::from_parts(u_star, sigma, v_star)
}

fn random_basis<T: Scalar>(
    rows: usize,
    cols: usize,
    seed: u64,
    which: usize,
) -> Result<DMatrix<T>> {
    let mut rng = rng::stream(seed, Domain::GroundTruth, which, 0);
    let g = DMatrix::from_fn(rows, cols, |_, _| T::gaussian(&mut rng));
    let (q, _) = linalg::qr_positive(&g)?;
    Ok(q)
}

fn linear_spectrum(r: usize, kappa: f64) -> Vec<f64> {
    if r == 1 {
        return alloc::vec![1.0];
    }
    let last = 1.0 / kappa;
    (0..r)
        .map(|i| {
            if i == r - 1 {
                last
            } else {
                1.0 + (last - 1.0) * i as f64 / (r - 1) as f64
            }
        })
        .collect()
}

/// Smallest `μ` with `max_k ‖V*ᴴ e_k‖ ≤ μ √(r/q)`.
pub fn incoherence_mu<T: Scalar>(v_star: &DMatrix<T>) -> Result<f64> {
    if v_star.ncols() == 0 || v_star.ncols() > v_star.nrows() {
        return Err(Error::Dimension(format!(
            "expected a tall basis, got {}x{}",
            v_star.nrows(),
            v_star.ncols()
        )));
    }
    linalg::check_orthonormal_columns(v_star, INPUT_TOL)?;
    Ok(mu_unchecked(v_star))
}

fn mu_unchecked<T: Scalar>(v: &DMatrix<T>) -> f64 {
    let (q, r) = v.shape();
    let max_row = v.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
    ComplexField::sqrt(q as f64 / r as f64) * max_row
}

/// `X* = U* diag(σ) V*ᴴ`.
pub fn assemble_x<T: Scalar>(gt: &GroundTruth<T>) -> DMatrix<T> {
    &gt.u_star * gt.b_tilde()
}
