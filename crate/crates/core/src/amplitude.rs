use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A phase-space point or field amplitude in √photon units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    /// Checked constructor rejecting NaN and infinite components.
    pub fn try_new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() {
            return Err(Error::Domain {
                name: "re",
                value: re,
                domain: "finite",
            });
        }
        if !im.is_finite() {
            return Err(Error::Domain {
                name: "im",
                value: im,
                domain: "finite",
            });
        }
        Ok(Self { re, im })
    }

    pub const fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }

    pub fn from_polar(modulus: f64, phase: f64) -> Self {
        let (s, c) = phase.sin_cos();
        Self {
            re: modulus * c,
            im: modulus * s,
        }
    }

    /// `|z|²`, i.e. the mean photon number of a coherent field with this amplitude.
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Argument in `(-π, π]`.
    pub fn arg(self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Add for ComplexAmplitude {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for ComplexAmplitude {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for ComplexAmplitude {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul<f64> for ComplexAmplitude {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.re * rhs, self.im * rhs)
    }
}

impl fmt::Display for ComplexAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im < 0.0 {
            write!(f, "{}-{}i", self.re, -self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_finite() {
        assert!(ComplexAmplitude::try_new(f64::NAN, 0.0).is_err());
        assert!(ComplexAmplitude::try_new(0.0, f64::INFINITY).is_err());
        assert!(ComplexAmplitude::try_new(0.3, -0.1).is_ok());
    }

    #[test]
    fn polar_round_trip() {
        let z = ComplexAmplitude::from_polar(0.67, 2.0);
        assert!((z.norm() - 0.67).abs() < 1e-15);
        assert!((z.arg() - 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn modulus_squared_is_nonnegative(re in -1e6f64..1e6, im in -1e6f64..1e6) {
            let z = ComplexAmplitude::new(re, im);
            prop_assert!(z.norm_sqr() >= 0.0);
            prop_assert!((z.norm_sqr() - z.norm() * z.norm()).abs() <= 1e-9 * z.norm_sqr().max(1.0));
        }
    }
}
