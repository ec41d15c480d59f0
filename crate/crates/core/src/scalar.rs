use core::fmt;
use core::str::FromStr;

use nalgebra::{Complex, ComplexField};
use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex<f64>;

/// Field of the signal and of the sensing vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Field {
    Real,
    Complex,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => f.write_str("real"),
            Field::Complex => f.write_str("complex"),
        }
    }
}

impl FromStr for Field {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" | "Real" => Ok(Field::Real),
            "complex" | "Complex" => Ok(Field::Complex),
            other => Err(crate::Error::Parameter(alloc::format!(
                "unknown field `{other}`"
            ))),
        }
    }
}

/// Element type of signals and sensing matrices: `f64` or [`C64`].
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + fmt::Debug + Send + Sync + 'static
{
    const FIELD: Field;

    /// Standard Gaussian draw: N(0, 1) for reals, re and im each N(0, 1/2)
    /// for complex values.
    fn gaussian<R: RngCore + ?Sized>(rng: &mut R) -> Self;

    fn from_parts(re: f64, im: f64) -> Self;

    /// `z / |z|`, with `phase(0) = 1`.
    #[inline]
    fn phase(self) -> Self {
        let m = self.modulus();
        if m == 0.0 {
            Self::one()
        } else {
            self.unscale(m)
        }
    }
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    #[inline]
    fn gaussian<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    #[inline]
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    #[inline]
    fn phase(self) -> Self {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl Scalar for C64 {
    const FIELD: Field = Field::Complex;

    #[inline]
    fn gaussian<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
    }

    #[inline]
    fn from_parts(re: f64, im: f64) -> Self {
        Complex::new(re, im)
    }
}
