use super::dataset::Series;
use crate::error::{Error, Result};

const MIN_DESEASONALIZE_LEN: usize = 24;

/// Removes month-of-year effects from a monthly series.
///
/// The series is projected on twelve month dummies (no intercept) and the
/// residuals are returned with the grand mean added back, so the output keeps
/// the input's sample mean and is uncorrelated with every month dummy.
pub fn deseasonalize_monthly(series: &Series) -> Result<Series> {
    let n = series.len();
    if n < MIN_DESEASONALIZE_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_DESEASONALIZE_LEN,
            got: n,
        });
    }
    let mut sums = [0.0f64; 12];
    let mut counts = [0usize; 12];
    for (month, v) in series.iter() {
        sums[month.month_index()] += v;
        counts[month.month_index()] += 1;
    }
    // With n >= 24 every month of the year has at least two observations.
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let grand_mean = series.values().iter().sum::<f64>() / n as f64;
    let out = series
        .iter()
        .map(|(month, v)| v - means[month.month_index()] + grand_mean)
        .collect();
    Ok(series.with_values(out))
}

/// Maps each value `v` to `100 ln v`.
pub fn to_log_points(series: &Series) -> Result<Series> {
    let mut out = Vec::with_capacity(series.len());
    for (month, v) in series.iter() {
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::Domain {
                month: month.to_string(),
                value: v,
            });
        }
        out.push(100.0 * v.ln());
    }
    Ok(series.with_values(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::CalendarMonth;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn start() -> CalendarMonth {
        CalendarMonth::new(2003, 5).unwrap()
    }

    /// Brute-force dummy regression via the normal equations.
    fn dummy_regression_oracle(start: CalendarMonth, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let x = DMatrix::from_fn(n, 12, |i, j| {
            (start.offset(i as i64).month_index() == j) as u8 as f64
        });
        let yv = DVector::from_column_slice(y);
        let beta = (x.transpose() * &x)
            .try_inverse()
            .unwrap()
            * (x.transpose() * &yv);
        let resid = &yv - &x * beta;
        let mean = y.iter().sum::<f64>() / n as f64;
        resid.iter().map(|r| r + mean).collect()
    }

    #[test]
    fn constant_is_fixed_point() {
        let s = Series::new(start(), vec![3.25; 40]).unwrap();
        let d = deseasonalize_monthly(&s).unwrap();
        for v in d.values() {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_pattern_collapses_to_its_mean() {
        let pattern: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin() * 5.0 + i as f64).collect();
        let pattern_mean = pattern.iter().sum::<f64>() / 12.0;
        let values: Vec<f64> = pattern.iter().cycle().take(12 * 4).copied().collect();
        let s = Series::new(start(), values).unwrap();
        let d = deseasonalize_monthly(&s).unwrap();
        for v in d.values() {
            assert!((v - pattern_mean).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dummy_regression_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..67).map(|_| rng.random::<f64>() - 0.5).collect();
        let s = Series::new(start(), values.clone()).unwrap();
        let d = deseasonalize_monthly(&s).unwrap();
        let oracle = dummy_regression_oracle(start(), &values);
        for (a, b) in d.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        // The adjustment is one of twelve within-month mean deviations.
        let mut shifts: Vec<f64> = d
            .values()
            .iter()
            .zip(&values)
            .map(|(a, b)| a - b)
            .collect();
        shifts.sort_by(f64::total_cmp);
        shifts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert!(shifts.len() <= 12);
    }

    #[test]
    fn idempotent_and_mean_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..50).map(|i| rng.random::<f64>() + (i % 12) as f64).collect();
        let s = Series::new(start(), values.clone()).unwrap();
        let once = deseasonalize_monthly(&s).unwrap();
        let twice = deseasonalize_monthly(&once).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        let m0 = values.iter().sum::<f64>() / 50.0;
        let m1 = once.values().iter().sum::<f64>() / 50.0;
        assert!((m0 - m1).abs() < 1e-12);
    }

    #[test]
    fn short_series_rejected() {
        let s = Series::new(start(), vec![1.0; 23]).unwrap();
        assert!(matches!(
            deseasonalize_monthly(&s),
            Err(Error::InsufficientData { needed: 24, got: 23 })
        ));
    }

    #[test]
    fn log_points() {
        let s = Series::new(start(), vec![1.0, std::f64::consts::E, 2.0]).unwrap();
        let l = to_log_points(&s).unwrap();
        assert_eq!(l.values()[0], 0.0);
        assert!((l.values()[1] - 100.0).abs() < 1e-12);
        assert!((l.values()[2] - 100.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l.values()[2] - 69.314_718_055_994_53).abs() < 1e-10);
    }

    #[test]
    fn log_points_domain_error_names_month() {
        let s = Series::new(start(), vec![1.0, 0.0]).unwrap();
        match to_log_points(&s) {
            Err(Error::Domain { month, .. }) => assert_eq!(month, "2003-06"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
