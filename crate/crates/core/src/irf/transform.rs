use std::fmt;

use serde::{Deserialize, Serialize};

/// Non-linear function of a shock added alongside its level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShockTransform {
    Identity,
    /// `|x|`, even in `x`: picks up sign asymmetries.
    AbsValue,
    /// Soft threshold at `b`, odd in `x`: picks up size effects.
    ThresholdShift { b: f64 },
}

impl ShockTransform {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ShockTransform::Identity => x,
            ShockTransform::AbsValue => x.abs(),
            ShockTransform::ThresholdShift { b } => {
                if x <= -b {
                    x + b
                } else if x >= b {
                    x - b
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_even(self) -> bool {
        matches!(self, ShockTransform::AbsValue)
    }

    pub fn is_odd(self) -> bool {
        !self.is_even()
    }
}

impl fmt::Display for ShockTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShockTransform::Identity => f.write_str("identity"),
            ShockTransform::AbsValue => f.write_str("abs_value"),
            ShockTransform::ThresholdShift { b } => write!(f, "threshold_shift({b})"),
        }
    }
}
