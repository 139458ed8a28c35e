use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::ShockKind;
use crate::stats::chi2_1_sf;

/// Restricted variances at or below this are treated as zero.
pub const MIN_RESTRICTED_VARIANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RestrictionKind {
    /// `Γ_s = 0`.
    GammaOnly,
    /// `δ ψ_s + A Γ_s = 0`, the plug-in response at one horizon.
    PluginIrf { delta: f64, a_hat: f64 },
    /// `ψ_s + Γ_s = 0`.
    ConditionalPos,
    /// `-ψ_s + Γ_s = 0`.
    ConditionalNeg,
}

/// Single linear restriction on a coefficient vector whose first six
/// entries are `(ψ_monetary, ψ_information, ψ_spread, Γ_monetary, Γ_information, Γ_spread)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub kind: RestrictionKind,
    pub shock: ShockKind,
    pub row: Vec<f64>,
}

/// Builds the restriction row padded with zeros to `width` coefficients.
pub fn build_restriction(kind: RestrictionKind, shock: ShockKind, width: usize) -> Result<Restriction> {
    if width < 6 {
        return Err(Error::UnknownLayout("transform".into()));
    }
    let (psi, gamma) = match kind {
        RestrictionKind::GammaOnly => (0.0, 1.0),
        RestrictionKind::PluginIrf { delta, a_hat } => (delta, a_hat),
        RestrictionKind::ConditionalPos => (1.0, 1.0),
        RestrictionKind::ConditionalNeg => (-1.0, 1.0),
    };
    let mut row = vec![0.0; width];
    row[shock.index()] = psi;
    row[3 + shock.index()] = gamma;
    if row.iter().all(|v| *v == 0.0) {
        return Err(Error::Invalid("restriction row is identically zero".into()));
    }
    Ok(Restriction { kind, shock, row })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub w: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `W = (R b)^2 / (R Ω R')`, referred to a chi-square with one degree of freedom.
pub fn wald_test(restriction: &Restriction, beta: &DVector<f64>, omega: &DMatrix<f64>) -> Result<WaldResult> {
    let k = beta.len();
    if restriction.row.len() > k || omega.shape() != (k, k) {
        return Err(Error::Invalid("restriction, coefficients and covariance disagree in size".into()));
    }
    let r = DVector::from_fn(k, |i, _| restriction.row.get(i).copied().unwrap_or(0.0));
    let rb = r.dot(beta);
    let var = (r.transpose() * omega * &r)[(0, 0)];
    if !(var > MIN_RESTRICTED_VARIANCE) {
        return Err(Error::DegenerateVariance(var));
    }
    let w = rb * rb / var;
    Ok(WaldResult {
        w,
        df: 1,
        p_value: chi2_1_sf(w),
    })
}

/// Colour class of a table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    None,
    Weak,
    Strong,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::None => "none",
            Band::Weak => "weak",
            Band::Strong => "strong",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Band::None),
            "weak" => Ok(Band::Weak),
            "strong" => Ok(Band::Strong),
            _ => Err(Error::Parse {
                what: "significance band",
                input: s.to_string(),
            }),
        }
    }
}

pub fn significance_band(p: f64) -> Band {
    if p <= 0.05 {
        Band::Strong
    } else if p <= 0.1 {
        Band::Weak
    } else {
        Band::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega6() -> DMatrix<f64> {
        let a = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1 + (i == j) as u8 as f64);
        &a * a.transpose()
    }

    #[test]
    fn restriction_rows() {
        let r = build_restriction(RestrictionKind::GammaOnly, ShockKind::Monetary, 8).unwrap();
        assert_eq!(r.row, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = build_restriction(RestrictionKind::ConditionalNeg, ShockKind::Spread, 6).unwrap();
        assert_eq!(r.row, vec![0.0, 0.0, -1.0, 0.0, 0.0, 1.0]);
        let r = build_restriction(RestrictionKind::ConditionalPos, ShockKind::Information, 6).unwrap();
        assert_eq!(r.row, vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let plug = build_restriction(
            RestrictionKind::PluginIrf { delta: 1.0, a_hat: 1.0 },
            ShockKind::Information,
            6,
        )
        .unwrap();
        assert_eq!(plug.row, r.row);
        assert!(matches!(
            build_restriction(RestrictionKind::GammaOnly, ShockKind::Monetary, 3),
            Err(Error::UnknownLayout(_))
        ));
    }

    #[test]
    fn wald_examples() {
        let one = Restriction {
            kind: RestrictionKind::GammaOnly,
            shock: ShockKind::Monetary,
            row: vec![1.0],
        };
        let res = wald_test(&one, &DVector::from_element(1, 2.0), &DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_eq!(res.w, 1.0);

        let r = build_restriction(RestrictionKind::GammaOnly, ShockKind::Spread, 6).unwrap();
        let omega = omega6();
        let null = wald_test(&r, &DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0]), &omega).unwrap();
        assert_eq!((null.w, null.p_value), (0.0, 1.0));

        let sd = omega[(5, 5)].sqrt();
        let beta = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.96 * sd]);
        let res = wald_test(&r, &beta, &omega).unwrap();
        assert!((res.w - 3.8416).abs() < 1e-9);
        assert!((res.p_value - 0.05).abs() < 1e-3);
    }

    #[test]
    fn degenerate_variance_is_an_error() {
        let r = build_restriction(RestrictionKind::GammaOnly, ShockKind::Monetary, 6).unwrap();
        let omega = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 0.0, 1.0, 1.0]));
        assert!(matches!(
            wald_test(&r, &DVector::from_element(6, 1.0), &omega),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn plugin_reduces_to_gamma_only_without_psi_uncertainty() {
        let mut omega = omega6();
        for j in 0..6 {
            omega[(0, j)] = 0.0;
            omega[(j, 0)] = 0.0;
        }
        let beta = DVector::from_vec(vec![0.7, -0.2, 0.1, 0.4, 0.3, -0.5]);
        let plug = build_restriction(
            RestrictionKind::PluginIrf { delta: 0.0, a_hat: 0.37 },
            ShockKind::Monetary,
            6,
        )
        .unwrap();
        let gamma = build_restriction(RestrictionKind::GammaOnly, ShockKind::Monetary, 6).unwrap();
        let a = wald_test(&plug, &beta, &omega).unwrap();
        let b = wald_test(&gamma, &beta, &omega).unwrap();
        assert!((a.w - b.w).abs() < 1e-12 * b.w);
    }

    #[test]
    fn bands() {
        assert_eq!(significance_band(0.5), Band::None);
        assert_eq!(significance_band(0.07), Band::Weak);
        assert_eq!(significance_band(0.01), Band::Strong);
        assert_eq!(significance_band(0.1), Band::Weak);
        assert_eq!(significance_band(0.05), Band::Strong);
    }
}
