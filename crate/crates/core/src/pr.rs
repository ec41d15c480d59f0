//! Standard phase retrieval: recover `g ∈ F^d` from `y_i ≈ |a_iᴴ g|`.
//!
//! These are the inner engines of the B-update. RWF handles the real field,
//! AltMin-TSI either field; [`pr_solve`] picks RWF for real data and
//! AltMin-TSI for complex data. Both tolerate bounded additive noise on `y`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, LeastSquares};
use crate::{Error, Field, Result, Scalar};

/// `y` with the `d x m` matrix whose columns are the sensing vectors.
#[derive(Debug, Clone, Copy)]
pub struct PrProblem<'a, T: Scalar> {
    pub y: &'a [f64],
    pub a: &'a DMatrix<T>,
}

impl<'a, T: Scalar> PrProblem<'a, T> {
    pub fn new(y: &'a [f64], a: &'a DMatrix<T>) -> Result<Self> {
        let (d, m) = a.shape();
        if d == 0 || m == 0 {
            return Err(Error::Dimension(format!("empty sensing matrix {d}x{m}")));
        }
        if y.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: y.len(),
            });
        }
        Ok(Self { y, a })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn len(&self) -> usize {
        self.a.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `‖ |Aᴴ x| − y ‖`
    pub fn amplitude_residual(&self, x: &DVector<T>) -> f64 {
        let sq = (self.a.adjoint() * x)
            .iter()
            .zip(self.y)
            .map(|(z, y)| {
                let e = z.modulus() - y;
                e * e
            })
            .sum::<f64>();
        libm::sqrt(sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrConfig {
    /// Exact number of iterations; there is no early stopping.
    pub iters: usize,
    /// RWF step size, ignored by AltMin-TSI.
    pub step: f64,
    /// Samples with `y_i² > trunc_const · mean(y²)` are left out of the
    /// spectral initializer.
    pub trunc_const: f64,
}

impl Default for PrConfig {
    fn default() -> Self {
        Self {
            iters: 30,
            step: 1.0,
            trunc_const: 9.0,
        }
    }
}

impl PrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::Parameter("PR iteration count must be >= 1".into()));
        }
        if !(self.step > 0.0) || !(self.trunc_const > 0.0) {
            return Err(Error::Parameter(format!(
                "step and trunc_const must be positive, got {} and {}",
                self.step, self.trunc_const
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrInit<T: Scalar> {
    /// Truncated spectral initialization, see [`tsi_init`].
    Auto,
    Given(DVector<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStart<T: Scalar> {
    pub x: DVector<T>,
    /// Every sample was truncated and the untruncated matrix was used.
    pub fallback: bool,
}

/// Top eigenvector of `(1/m) Σ y_i² a_i a_iᴴ 1{y_i² ≤ c · mean(y²)}`, scaled
/// to norm `√mean(y²)`. The largest-magnitude entry is made positive real.
pub fn tsi_init<T: Scalar>(p: &PrProblem<'_, T>, trunc_const: f64) -> Result<SpectralStart<T>> {
    let (d, m) = p.a.shape();
    if m < 2 {
        return Err(Error::UnderDetermined { m, d: 2 });
    }
    let mean_sq = p.y.iter().map(|v| v * v).sum::<f64>() / m as f64;
    if mean_sq == 0.0 {
        return Ok(SpectralStart {
            x: DVector::zeros(d),
            fallback: false,
        });
    }
    let threshold = trunc_const * mean_sq;
    let mut weights: Vec<f64> =
        p.y.iter()
            .map(|&v| if v * v <= threshold { v * v } else { 0.0 })
            .collect();
    let fallback = weights.iter().all(|&w| w == 0.0);
    if fallback {
        weights = p.y.iter().map(|v| v * v).collect();
    }
    let mut weighted = p.a.clone();
    for (mut col, &w) in weighted.column_iter_mut().zip(&weights) {
        col.iter_mut().for_each(|v| *v = v.scale(w / m as f64));
    }
    let mut ymat = weighted * p.a.adjoint();
    ymat = (&ymat + ymat.adjoint()).unscale(2.0);
    let (_, vectors) = linalg::hermitian_eigen(&ymat);
    let mut x: DVector<T> = vectors.column(0).into_owned();
    normalize_sign(&mut x);
    x *= T::from_real(libm::sqrt(mean_sq) / x.norm());
    Ok(SpectralStart { x, fallback })
}

/// Rotate `x` so that its largest-magnitude entry is positive real.
pub(crate) fn normalize_sign<T: Scalar>(x: &mut DVector<T>) {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, v) in x.iter().enumerate() {
        let m = v.modulus();
        if m > best_mod {
            best = i;
            best_mod = m;
        }
    }
    if best_mod > 0.0 {
        let z = x[best].phase().conjugate();
        x.iter_mut().for_each(|v| *v *= z);
        x[best] = T::from_real(x[best].real());
    }
}

fn start<T: Scalar>(p: &PrProblem<'_, T>, cfg: &PrConfig, init: PrInit<T>) -> Result<DVector<T>> {
    match init {
        PrInit::Auto => Ok(tsi_init(p, cfg.trunc_const)?.x),
        PrInit::Given(x) if x.len() == p.dim() => Ok(x),
        PrInit::Given(x) => Err(Error::LengthMismatch {
            expected: p.dim(),
            found: x.len(),
        }),
    }
}

/// Reshaped Wirtinger flow on the amplitude loss, real field only:
/// `x ← x − (step/m) Σ_i (a_iᵀx − y_i sign(a_iᵀx)) a_i`.
pub fn rwf_solve<T: Scalar>(
    p: &PrProblem<'_, T>,
    cfg: &PrConfig,
    init: PrInit<T>,
) -> Result<DVector<T>> {
    if T::FIELD != Field::Real {
        return Err(Error::UnsupportedField {
            solver: "RWF",
            field: T::FIELD,
        });
    }
    cfg.validate()?;
    let mut x = start(p, cfg, init)?;
    let scale = T::from_real(cfg.step / p.len() as f64);
    for _ in 0..cfg.iters {
        let mut z = p.a.adjoint() * &x;
        for (zi, &yi) in z.iter_mut().zip(p.y) {
            *zi -= zi.phase().scale(yi);
        }
        x -= (p.a * z) * scale;
    }
    Ok(x)
}

/// AltMin-TSI: alternate `c ← phase(Aᴴx)` and the phase-fixed least squares
/// `x ← argmin ‖Aᴴx − c ⊙ y‖`. Works for both fields.
pub fn altmin_tsi_solve<T: Scalar>(
    p: &PrProblem<'_, T>,
    cfg: &PrConfig,
    init: PrInit<T>,
) -> Result<DVector<T>> {
    altmin_tsi_inner(p, cfg, init, None)
}

/// [`altmin_tsi_solve`] that also returns `‖ |Aᴴx| − y ‖` after every
/// iteration.
pub fn altmin_tsi_solve_traced<T: Scalar>(
    p: &PrProblem<'_, T>,
    cfg: &PrConfig,
    init: PrInit<T>,
) -> Result<(DVector<T>, Vec<f64>)> {
    let mut trace = Vec::with_capacity(cfg.iters);
    let x = altmin_tsi_inner(p, cfg, init, Some(&mut trace))?;
    Ok((x, trace))
}

fn altmin_tsi_inner<T: Scalar>(
    p: &PrProblem<'_, T>,
    cfg: &PrConfig,
    init: PrInit<T>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<DVector<T>> {
    cfg.validate()?;
    let at = p.a.adjoint();
    let ls = LeastSquares::new(&at)?;
    let mut x = start(p, cfg, init)?;
    for _ in 0..cfg.iters {
        let mut target = &at * &x;
        for (zi, &yi) in target.iter_mut().zip(p.y) {
            *zi = zi.phase().scale(yi);
        }
        x = ls.solve(&target);
        if let Some(t) = trace.as_deref_mut() {
            t.push(p.amplitude_residual(&x));
        }
    }
    Ok(x)
}

/// RWF for real problems, AltMin-TSI for complex ones.
pub fn pr_solve<T: Scalar>(
    p: &PrProblem<'_, T>,
    cfg: &PrConfig,
    init: PrInit<T>,
) -> Result<DVector<T>> {
    match T::FIELD {
        Field::Real => rwf_solve(p, cfg, init),
        Field::Complex => altmin_tsi_solve(p, cfg, init),
    }
}
