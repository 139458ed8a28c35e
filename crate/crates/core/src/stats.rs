//! Small descriptive-statistics helpers shared across modules.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with denominator `n - 1`.
pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Median; even lengths take the midpoint of the two middle values.
/// Reorders `x`.
pub fn median_in_place(x: &mut [f64]) -> f64 {
    let n = x.len();
    assert!(n > 0, "median of an empty sample");
    let mid = n / 2;
    let (lower, upper, _) = x.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

pub fn median(x: &[f64]) -> f64 {
    median_in_place(&mut x.to_vec())
}

/// Inclusive empirical quantile: the `ceil(q n)`-th smallest value
/// (type 1 in Hyndman and Fan's numbering).
pub fn quantile_type1(x: &[f64], q: f64) -> f64 {
    assert!(!x.is_empty(), "quantile of an empty sample");
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    // Tolerance keeps e.g. 0.6 * 5 from rounding up to 4.
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    v[rank.min(n) - 1]
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Upper tail of the chi-square distribution with one degree of freedom,
/// `P(X > w) = erfc(sqrt(w / 2))`.
pub fn chi2_1_sf(w: f64) -> f64 {
    if w <= 0.0 {
        return 1.0;
    }
    statrs::function::erf::erfc((w / 2.0).sqrt())
}

/// Two-sided standard-normal p-value for a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn type1_quantile() {
        assert_eq!(quantile_type1(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.6), 3.0);
        assert_eq!(quantile_type1(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.61), 4.0);
        assert_eq!(quantile_type1(&[2.0; 7], 0.3), 2.0);
    }
}
