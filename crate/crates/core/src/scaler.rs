//! Min-max normalization fitted on a training window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training-window extrema. Values outside the window map outside `[0, 1]`; nothing is clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: f64,
    max: f64,
}

impl MinMaxScaler {
    pub fn fit(train: &[f64]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InsufficientData(
                "cannot fit a scaler on no data".into(),
            ));
        }
        let min = train.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = train.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NumericalError("non-finite training value".into()));
        }
        if max <= min {
            return Err(Error::DegenerateScale(min));
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }

    pub fn apply_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn invert_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.invert(x)).collect()
    }
}
