use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::transform::ShockTransform;
use crate::error::{Error, Result};
use crate::lp::{hc3_cluster_cov_with, ols_fit};
use crate::panel::ShockSeries;
use crate::stats::{normal_two_sided_p, quantile_type1};

pub const DEFAULT_COVERAGE: f64 = 0.6;
pub const DEFAULT_SCALES: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];

/// Threshold `b` with roughly `coverage` of conference-month |x| at or below it.
pub fn threshold_from_quantile(shocks: &ShockSeries, coverage: f64) -> Result<f64> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Invalid(format!("coverage must lie in (0, 1), got {coverage}")));
    }
    let abs: Vec<f64> = shocks.conference_values().iter().map(|v| v.abs()).collect();
    if abs.is_empty() {
        return Err(Error::Invalid(format!("{} shock has no conference months", shocks.kind)));
    }
    Ok(quantile_type1(&abs, coverage))
}

/// Which months enter the average defining `A_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageOver {
    #[default]
    AllMonths,
    ConferenceMonths,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlugInEstimate {
    pub delta: f64,
    pub a_hat: f64,
}

/// `A_δ = mean of f(x + δ) - f(x)` over `values`.
pub fn estimate_a_values(values: &[f64], delta: f64, transform: ShockTransform) -> Result<PlugInEstimate> {
    if values.is_empty() {
        return Err(Error::Invalid("cannot average over an empty shock sample".into()));
    }
    let a_hat = match transform {
        ShockTransform::Identity => delta,
        f => values.iter().map(|&x| f.eval(x + delta) - f.eval(x)).sum::<f64>() / values.len() as f64,
    };
    Ok(PlugInEstimate { delta, a_hat })
}

pub fn estimate_a(
    shocks: &ShockSeries,
    delta: f64,
    transform: ShockTransform,
    over: AverageOver,
) -> Result<PlugInEstimate> {
    match over {
        AverageOver::AllMonths => estimate_a_values(shocks.values(), delta, transform),
        AverageOver::ConferenceMonths => estimate_a_values(&shocks.conference_values(), delta, transform),
    }
}

/// `ψ_h δ + Γ_h A_δ`; without Γ this is the linear response `ψ_h δ`.
pub fn unconditional_irf(psi: &[f64], gamma: Option<&[f64]>, est: PlugInEstimate) -> Vec<f64> {
    match gamma {
        None => psi.iter().map(|p| p * est.delta).collect(),
        Some(g) => psi.iter().zip(g).map(|(p, g)| p * est.delta + g * est.a_hat).collect(),
    }
}

/// Responses to a unit shock known to be non-negative (`Γ + ψ`) and
/// non-positive (`Γ - ψ`). With `flip_negative` the second curve is
/// multiplied by -1 for display.
pub fn conditional_irfs(
    transform: ShockTransform,
    psi: &[f64],
    gamma: &[f64],
    flip_negative: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if transform != ShockTransform::AbsValue {
        return Err(Error::NotSignSpecification);
    }
    let pos = psi.iter().zip(gamma).map(|(p, g)| g + p).collect();
    let sign = if flip_negative { -1.0 } else { 1.0 };
    let neg = psi.iter().zip(gamma).map(|(p, g)| sign * (g - p)).collect();
    Ok((pos, neg))
}

/// Normalization of the shock-size family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaledFormula {
    /// `(1/a) (ψ a σ + A_{aσ} a Γ)`.
    #[default]
    AsPrinted,
    /// `(ψ a σ + A_{aσ} Γ) / a`, the response per unit of shock scale.
    PerUnitScale,
}

/// One response per scale `a`, for shocks of size `a σ`.
pub fn scaled_irf_family(
    psi: &[f64],
    gamma: &[f64],
    shocks: &[f64],
    transform: ShockTransform,
    sigma: f64,
    scales: &[f64],
    formula: ScaledFormula,
) -> Result<Vec<(f64, Vec<f64>)>> {
    scales
        .iter()
        .map(|&a| {
            if a <= 0.0 || !a.is_finite() {
                return Err(Error::NonPositiveScale(a));
            }
            let est = estimate_a_values(shocks, a * sigma, transform)?;
            let curve = psi
                .iter()
                .zip(gamma)
                .map(|(p, g)| match formula {
                    ScaledFormula::AsPrinted => (p * a * sigma + est.a_hat * a * g) / a,
                    ScaledFormula::PerUnitScale => (p * a * sigma + est.a_hat * g) / a,
                })
                .collect();
            Ok((a, curve))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Check {
    pub coefficient: f64,
    pub se: f64,
    pub p_value: f64,
    /// `|coefficient| >= 0.1` or `p < 0.05`.
    pub flagged: bool,
}

pub const MIN_AR1_LEN: usize = 20;

/// No-intercept AR(1) slope with an HC3 standard error.
pub fn ar1_check(x: &[f64]) -> Result<Ar1Check> {
    if x.len() < MIN_AR1_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_AR1_LEN,
            got: x.len(),
        });
    }
    let n = x.len() - 1;
    let lag = DMatrix::from_column_slice(n, 1, &x[..n]);
    let y = DVector::from_column_slice(&x[1..]);
    let fit = ols_fit(&lag, &y)?;
    let ids: Vec<usize> = (0..n).collect();
    let omega = hc3_cluster_cov_with(&fit.xtx_inv, &lag, &fit.residuals, &fit.leverages, &ids)?;
    let coefficient = fit.beta[0];
    let se = omega[(0, 0)].sqrt();
    let p_value = if se > 0.0 {
        normal_two_sided_p(coefficient / se)
    } else if coefficient == 0.0 {
        1.0
    } else {
        0.0
    };
    let flagged = coefficient.abs() >= 0.1 || p_value < 0.05;
    Ok(Ar1Check {
        coefficient,
        se,
        p_value,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{CalendarMonth, ShockKind};
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn series(values: Vec<f64>, conference: Vec<bool>) -> ShockSeries {
        ShockSeries::new(ShockKind::Monetary, CalendarMonth::new(2002, 1).unwrap(), values, conference).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let s = series(vec![1.0, -2.0, 3.0, -4.0, 5.0, 0.0], vec![true, true, true, true, true, false]);
        assert_eq!(threshold_from_quantile(&s, 0.6).unwrap(), 3.0);
        let c = series(vec![-0.7, 0.7, 0.7], vec![true; 3]);
        for cov in [0.1, 0.5, 0.9] {
            assert_eq!(threshold_from_quantile(&c, cov).unwrap(), 0.7);
        }
        let none = series(vec![0.0; 4], vec![false; 4]);
        assert!(threshold_from_quantile(&none, 0.6).is_err());
        assert!(threshold_from_quantile(&c, 1.0).is_err());
    }

    #[test]
    fn threshold_of_normal_sample() {
        let v = normals(10_000, 1);
        let b = threshold_from_quantile(&series(v, vec![true; 10_000]), 0.6).unwrap();
        // P(|Z| <= b) = 0.6  <=>  b = Φ^{-1}(0.8).
        assert!((b - 0.841_621_233_572_914_3).abs() < 0.05, "{b}");
    }

    #[test]
    fn plug_in_examples() {
        let v = normals(500, 2);
        assert_eq!(estimate_a_values(&v, 0.7, ShockTransform::Identity).unwrap().a_hat, 0.7);
        assert_eq!(estimate_a_values(&[0.0; 10], 1.0, ShockTransform::AbsValue).unwrap().a_hat, 1.0);
        let big = normals(100_000, 3);
        let a = estimate_a_values(&big, 1.0, ShockTransform::AbsValue).unwrap().a_hat;
        // E|Z+1| - E|Z| = 2φ(1) + 2Φ(1) - 1 - sqrt(2/π).
        let analytic = 2.0 * 0.241_970_724_519_143_37 + 2.0 * 0.841_344_746_068_542_9 - 1.0
            - (2.0 / std::f64::consts::PI).sqrt();
        assert!((a - analytic).abs() < 0.01, "{a} vs {analytic}");
    }

    #[test]
    fn conference_only_average() {
        let s = series(vec![0.0, 2.0, 0.0, -2.0], vec![false, true, false, true]);
        let all = estimate_a(&s, 1.0, ShockTransform::AbsValue, AverageOver::AllMonths).unwrap();
        let conf = estimate_a(&s, 1.0, ShockTransform::AbsValue, AverageOver::ConferenceMonths).unwrap();
        assert_eq!(all.a_hat, 0.5);
        assert_eq!(conf.a_hat, 0.0);
    }

    #[test]
    fn unconditional_examples() {
        let psi = [0.5, -0.1, 0.3];
        let lin = unconditional_irf(&psi, Some(&[0.0; 3]), PlugInEstimate { delta: 1.0, a_hat: 0.9 });
        assert_eq!(lin, psi.to_vec());
        let v = unconditional_irf(&[0.5], Some(&[0.2]), PlugInEstimate { delta: 1.0, a_hat: 0.3687 });
        assert!((v[0] - 0.57374).abs() < 1e-12);
        let est = estimate_a_values(&normals(50, 4), 0.8, ShockTransform::Identity).unwrap();
        let twice = unconditional_irf(&psi, Some(&psi), est);
        for (t, p) in twice.iter().zip(psi) {
            assert!((t - 2.0 * p * 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_examples() {
        let (pos, neg) = conditional_irfs(ShockTransform::AbsValue, &[0.5], &[0.2], false).unwrap();
        assert!((pos[0] - 0.7).abs() < 1e-15 && (neg[0] + 0.3).abs() < 1e-15);
        let (pos, neg) = conditional_irfs(ShockTransform::AbsValue, &[0.5, -1.0], &[0.0, 0.0], false).unwrap();
        assert_eq!(pos, vec![0.5, -1.0]);
        assert_eq!(neg, vec![-0.5, 1.0]);
        let (_, flipped) = conditional_irfs(ShockTransform::AbsValue, &[0.5], &[0.2], true).unwrap();
        assert!((flipped[0] - 0.3).abs() < 1e-15);
        assert!(matches!(
            conditional_irfs(ShockTransform::ThresholdShift { b: 1.0 }, &[0.5], &[0.2], false),
            Err(Error::NotSignSpecification)
        ));
    }

    #[test]
    fn scaled_family_examples() {
        let shocks = normals(300, 5);
        let t = ShockTransform::ThresholdShift { b: 0.8 };
        let psi = [0.4, 0.2];
        let fam = scaled_irf_family(&psi, &[0.0, 0.0], &shocks, t, 1.3, &DEFAULT_SCALES, ScaledFormula::AsPrinted).unwrap();
        assert_eq!(fam.len(), 5);
        for (_, c) in &fam {
            assert!((c[0] - 0.4 * 1.3).abs() < 1e-12 && (c[1] - 0.2 * 1.3).abs() < 1e-12);
        }
        let gamma = [0.3, -0.2];
        let fam = scaled_irf_family(&psi, &gamma, &shocks, t, 1.3, &[1.0], ScaledFormula::AsPrinted).unwrap();
        let est = estimate_a_values(&shocks, 1.3, t).unwrap();
        let u = unconditional_irf(&psi, Some(&gamma), est);
        for (a, b) in fam[0].1.iter().zip(&u) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            scaled_irf_family(&psi, &gamma, &shocks, t, 1.0, &[0.5, 0.0], ScaledFormula::AsPrinted),
            Err(Error::NonPositiveScale(_))
        ));
    }

    #[test]
    fn scaled_family_in_the_dead_zone() {
        // Every |x| <= 0.2 and aσ <= b - 0.2, so f vanishes before and after the shift.
        let shocks: Vec<f64> = normals(200, 6).iter().map(|v| 0.2 * v.tanh()).collect();
        let t = ShockTransform::ThresholdShift { b: 2.0 };
        for formula in [ScaledFormula::AsPrinted, ScaledFormula::PerUnitScale] {
            let fam = scaled_irf_family(&[0.5], &[7.0], &shocks, t, 1.0, &DEFAULT_SCALES, formula).unwrap();
            for (a, c) in fam {
                assert!((c[0] - 0.5).abs() < 1e-15, "a={a}");
            }
        }
    }

    #[test]
    fn ar1_examples() {
        let w = ar1_check(&normals(10_000, 7)).unwrap();
        assert!(w.coefficient.abs() < 0.05);
        let flat = ar1_check(&[1.5; 30]).unwrap();
        assert!((flat.coefficient - 1.0).abs() < 1e-14);
        assert!(flat.flagged);
        let alt: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((ar1_check(&alt).unwrap().coefficient + 1.0).abs() < 1e-14);
        assert!(ar1_check(&[1.0; 19]).is_err());
    }
}
