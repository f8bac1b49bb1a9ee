//! Named initial-data profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum InitialData {
    /// `exp(1 - 1/(1 - s^2))` for `|s| < 1`, `s = (x - center)/half_width`.
    Bump { center: f64, half_width: f64 },
    /// `exp(-((x - center)/width)^2)`.
    Gaussian { center: f64, width: f64 },
    /// `x exp(-(x/width)^2)`.
    OddGaussian { width: f64 },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialData::Bump { center, half_width } => half_width > 0.0 && center - half_width >= 0.0 && center.is_finite(),
            InitialData::Gaussian { center, width } => width > 0.0 && center.is_finite(),
            InitialData::OddGaussian { width } => width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid initial data {self:?}")))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            InitialData::Bump { center, half_width } => {
                let s = (x - center) / half_width;
                if s.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
            InitialData::Gaussian { center, width } => (-((x - center) / width).powi(2)).exp(),
            InitialData::OddGaussian { width } => x * (-(x / width).powi(2)).exp(),
        }
    }

    /// Right end beyond which the profile is below `1e-16` of its scale.
    pub fn extent(&self) -> f64 {
        match *self {
            InitialData::Bump { center, half_width } => center + half_width,
            InitialData::Gaussian { center, width } => center.max(0.0) + 6.1 * width,
            InitialData::OddGaussian { width } => 6.5 * width,
        }
    }

    /// Samples on `[0, extent]` with the given step.
    pub fn sample(&self, step: f64) -> Result<WaveField> {
        self.validate()?;
        let grid = UniformGrid::covering(0.0, self.extent(), step)?;
        Ok(WaveField::from_real_fn(grid, |x| self.value(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_compact_and_peaks_at_one() {
        let b = InitialData::Bump { center: 3.0, half_width: 1.5 };
        assert_eq!(b.value(1.5), 0.0);
        assert_eq!(b.value(4.5), 0.0);
        assert!((b.value(3.0) - 1.0).abs() < 1e-15);
        let f = b.sample(1.0 / 32.0).unwrap();
        assert_eq!(f.values[0].re, 0.0);
    }

    #[test]
    fn bump_may_not_cross_the_origin() {
        assert!(InitialData::Bump { center: 1.0, half_width: 2.0 }.validate().is_err());
    }
}
