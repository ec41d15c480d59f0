//! Gaussian sensing ensembles, phaseless measurement with sample splitting,
//! and bounded additive noise.
//!
//! Sensing matrices are never stored. `A_k^(τ)` is a pure function of
//! `(master_seed, k, τ)` and is regenerated whenever a solver needs it.

use alloc::format;
use alloc::vec::Vec;
use core::marker::PhantomData;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::model::{assemble_x, GroundTruth};
use crate::rng::{self, Domain};
use crate::{Error, Field, Result, Scalar};

/// Per-column sample budget. Partition `0` feeds the initialization,
/// partitions `1..=T` the B-updates and `T+1..=2T` the U-updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplePlan {
    pub m0: usize,
    pub m1: usize,
    #[cfg_attr(feature = "serde", serde(rename = "T"))]
    pub iters: usize,
}

impl SamplePlan {
    pub fn new(m0: usize, m1: usize, iters: usize) -> Result<Self> {
        let plan = Self { m0, m1, iters };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m0 == 0 || self.m1 == 0 || self.iters == 0 {
            return Err(Error::Parameter(format!(
                "sample plan needs m0, m1, T >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `m0 + 2 T m1`.
    pub fn m_total(&self) -> usize {
        self.m0 + 2 * self.iters * self.m1
    }

    /// Largest partition index, `2T`.
    pub fn last_partition(&self) -> usize {
        2 * self.iters
    }

    pub fn partition_len(&self, tau: usize) -> Result<usize> {
        match tau {
            0 => Ok(self.m0),
            t if t <= self.last_partition() => Ok(self.m1),
            _ => Err(Error::PartitionOutOfRange {
                tau,
                max: self.last_partition(),
            }),
        }
    }

    /// Partition read by the B-update of (1-based) iteration `t`.
    pub fn b_partition(&self, t: usize) -> usize {
        t
    }

    /// Partition read by the phase estimate and U-update of iteration `t`.
    pub fn u_partition(&self, t: usize) -> usize {
        self.iters + t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseKind {
    #[default]
    None,
    /// Gaussian direction rescaled so that `‖v_k‖ = eps_snr ‖x*_k‖`.
    BoundedGaussianShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub eps_snr: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        kind: NoiseKind::None,
        eps_snr: 0.0,
    };

    pub fn bounded(eps_snr: f64) -> Self {
        Self {
            kind: NoiseKind::BoundedGaussianShape,
            eps_snr,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.kind == NoiseKind::None || self.eps_snr == 0.0
    }
}

/// `n x m` matrix whose columns are the sensing vectors `a_i` of column `k`
/// in partition `tau`.
pub fn gen_sensing<T: Scalar>(
    n: usize,
    m: usize,
    master_seed: u64,
    k: usize,
    tau: usize,
) -> DMatrix<T> {
    let mut rng = rng::stream(master_seed, Domain::Sensing, k, tau);
    DMatrix::from_fn(n, m, |_, _| T::gaussian(&mut rng))
}

/// Phaseless measurements of every column in every partition.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet<T: Scalar> {
    n: usize,
    q: usize,
    plan: SamplePlan,
    master_seed: u64,
    noise: NoiseSpec,
    /// `y[tau][k]`
    y: Vec<Vec<Vec<f64>>>,
    /// `noise_norms[tau][k]`
    noise_norms: Vec<Vec<f64>>,
    _field: PhantomData<fn() -> T>,
}

impl<T: Scalar> MeasurementSet<T> {
    /// Rebuild a set from stored payloads, e.g. after loading them from disk.
    pub fn from_raw(
        n: usize,
        plan: SamplePlan,
        master_seed: u64,
        noise: NoiseSpec,
        y: Vec<Vec<Vec<f64>>>,
        noise_norms: Vec<Vec<f64>>,
    ) -> Result<Self> {
        plan.validate()?;
        if n == 0 {
            return Err(Error::Dimension("signal dimension must be positive".into()));
        }
        let parts = plan.last_partition() + 1;
        if y.len() != parts {
            return Err(Error::LengthMismatch {
                expected: parts,
                found: y.len(),
            });
        }
        if noise_norms.len() != parts {
            return Err(Error::LengthMismatch {
                expected: parts,
                found: noise_norms.len(),
            });
        }
        let q = y[0].len();
        if q == 0 {
            return Err(Error::Dimension("no columns".into()));
        }
        for (tau, (cols, norms)) in y.iter().zip(&noise_norms).enumerate() {
            let m = plan.partition_len(tau)?;
            if cols.len() != q || norms.len() != q {
                return Err(Error::LengthMismatch {
                    expected: q,
                    found: cols.len().min(norms.len()),
                });
            }
            if let Some(bad) = cols.iter().find(|c| c.len() != m) {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: bad.len(),
                });
            }
        }
        Ok(Self {
            n,
            q,
            plan,
            master_seed,
            noise,
            y,
            noise_norms,
            _field: PhantomData,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn plan(&self) -> &SamplePlan {
        &self.plan
    }

    pub fn field(&self) -> Field {
        T::FIELD
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// Panics when `tau` or `k` is out of range.
    pub fn y(&self, tau: usize, k: usize) -> &[f64] {
        &self.y[tau][k]
    }

    /// Realized `‖v_k‖` of partition `tau`, one entry per column.
    pub fn noise_norms(&self, tau: usize) -> &[f64] {
        &self.noise_norms[tau]
    }

    pub fn sensing(&self, k: usize, tau: usize) -> Result<DMatrix<T>> {
        let m = self.plan.partition_len(tau)?;
        Ok(gen_sensing(self.n, m, self.master_seed, k, tau))
    }

    /// Stream `(k, y_k^(τ), A_k^(τ))` for `k = 0..q`, regenerating each
    /// sensing matrix on the fly.
    pub fn batch(&self, tau: usize) -> Result<Batch<'_, T>> {
        let m = self.plan.partition_len(tau)?;
        Ok(Batch {
            ms: self,
            tau,
            m,
            k: 0,
        })
    }

    /// All sensing matrices of one partition, materialized.
    pub fn partition_matrices(&self, tau: usize) -> Result<Vec<DMatrix<T>>> {
        Ok(self.batch(tau)?.map(|(_, _, a)| a).collect())
    }
}

pub struct Batch<'a, T: Scalar> {
    ms: &'a MeasurementSet<T>,
    tau: usize,
    m: usize,
    k: usize,
}

impl<'a, T: Scalar> Iterator for Batch<'a, T> {
    type Item = (usize, &'a [f64], DMatrix<T>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.k >= self.ms.q {
            return None;
        }
        let k = self.k;
        self.k += 1;
        let a = gen_sensing(self.ms.n, self.m, self.ms.master_seed, k, self.tau);
        Some((k, self.ms.y[self.tau][k].as_slice(), a))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.ms.q - self.k;
        (left, Some(left))
    }
}

impl<T: Scalar> ExactSizeIterator for Batch<'_, T> {}

/// Measure the ground truth's assembled matrix.
pub fn measure<T: Scalar>(
    gt: &GroundTruth<T>,
    plan: SamplePlan,
    noise: NoiseSpec,
    master_seed: u64,
) -> Result<MeasurementSet<T>> {
    measure_matrix(&assemble_x(gt), plan, noise, master_seed)
}

/// `y_k^(τ) = |A_k^(τ)ᴴ x_k| + v_k^(τ)` for every column of `x` and every
/// partition of `plan`. Noisy values are not clamped at zero.
pub fn measure_matrix<T: Scalar>(
    x: &DMatrix<T>,
    plan: SamplePlan,
    noise: NoiseSpec,
    master_seed: u64,
) -> Result<MeasurementSet<T>> {
    plan.validate()?;
    if !(noise.eps_snr >= 0.0) || !noise.eps_snr.is_finite() {
        return Err(Error::Parameter(format!(
            "eps_snr must be finite and >= 0, got {}",
            noise.eps_snr
        )));
    }
    let (n, q) = x.shape();
    if n == 0 || q == 0 {
        return Err(Error::Dimension(format!("cannot measure a {n}x{q} matrix")));
    }
    let parts = plan.last_partition() + 1;
    let mut y = Vec::with_capacity(parts);
    let mut noise_norms = Vec::with_capacity(parts);
    for tau in 0..parts {
        let m = plan.partition_len(tau)?;
        let mut ys = Vec::with_capacity(q);
        let mut norms = Vec::with_capacity(q);
        for k in 0..q {
            let xk = x.column(k);
            let a = gen_sensing::<T>(n, m, master_seed, k, tau);
            let mut yk: Vec<f64> = (a.adjoint() * xk).iter().map(|z| z.modulus()).collect();
            let mut realized = 0.0;
            if !noise.is_noiseless() {
                let target = noise.eps_snr * xk.norm();
                if target > 0.0 {
                    let v = noise_direction(m, master_seed, k, tau);
                    let scale = target / v.norm();
                    for (yi, vi) in yk.iter_mut().zip(v.iter()) {
                        *yi += vi * scale;
                    }
                    realized = (v * scale).norm();
                }
            }
            ys.push(yk);
            norms.push(realized);
        }
        y.push(ys);
        noise_norms.push(norms);
    }
    MeasurementSet::from_raw(n, plan, master_seed, noise, y, noise_norms)
}

fn noise_direction(m: usize, master_seed: u64, k: usize, tau: usize) -> DVector<f64> {
    let mut rng = rng::stream(master_seed, Domain::Noise, k, tau);
    DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng))
}
