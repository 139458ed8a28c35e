use nalgebra::{DMatrix, DVector};

use super::ols::ols_fit;
use crate::error::{Error, Result};

/// Leverages at or above `1 - LEVERAGE_LIMIT_GAP` make the HC3 rescaling undefined.
pub const LEVERAGE_LIMIT_GAP: f64 = 1e-12;

/// Cluster-robust sandwich with HC3 residuals `u_i / (1 - h_ii)`:
/// `(X'X)^{-1} [sum_c X_c' u_c u_c' X_c] (X'X)^{-1}`.
pub fn hc3_cluster_cov(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    leverages: &DVector<f64>,
    clusters: &[usize],
) -> Result<DMatrix<f64>> {
    let fit = ols_fit(x, &DVector::zeros(x.nrows()))?;
    hc3_cluster_cov_with(&fit.xtx_inv, x, residuals, leverages, clusters)
}

/// As [`hc3_cluster_cov`] with a precomputed `(X'X)^{-1}`.
pub fn hc3_cluster_cov_with(
    xtx_inv: &DMatrix<f64>,
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    leverages: &DVector<f64>,
    clusters: &[usize],
) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if residuals.len() != n || leverages.len() != n || clusters.len() != n {
        return Err(Error::Invalid("covariance inputs differ in length".into()));
    }
    let n_clusters = clusters.iter().max().map_or(0, |m| m + 1);
    let mut scores = DMatrix::<f64>::zeros(k, n_clusters);
    for i in 0..n {
        let h = leverages[i];
        if h >= 1.0 - LEVERAGE_LIMIT_GAP {
            return Err(Error::LeverageTooHigh { row: i, leverage: h });
        }
        let u = residuals[i] / (1.0 - h);
        let mut col = scores.column_mut(clusters[i]);
        col.axpy(u, &x.row(i).transpose(), 1.0);
    }
    let meat = &scores * scores.transpose();
    let omega = xtx_inv * meat * xtx_inv;
    Ok((&omega + omega.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 0);
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn dense_oracle(x: &DMatrix<f64>, u: &DVector<f64>, h: &DVector<f64>, clusters: &[usize]) -> DMatrix<f64> {
        let a = (x.transpose() * x).try_inverse().unwrap();
        let n = x.nrows();
        let ut = DVector::from_fn(n, |i, _| u[i] / (1.0 - h[i]));
        let mut meat = DMatrix::zeros(x.ncols(), x.ncols());
        for i in 0..n {
            for j in 0..n {
                if clusters[i] == clusters[j] {
                    meat += x.row(i).transpose() * x.row(j) * (ut[i] * ut[j]);
                }
            }
        }
        &a * meat * &a
    }

    #[test]
    fn singleton_clusters_with_zero_leverage_is_hc0() {
        let x = random(25, 3, 1);
        let u = DVector::from_iterator(25, random(25, 1, 2).iter().copied());
        let h = DVector::zeros(25);
        let ids: Vec<usize> = (0..25).collect();
        let omega = hc3_cluster_cov(&x, &u, &h, &ids).unwrap();
        let a = (x.transpose() * &x).try_inverse().unwrap();
        let mut meat = DMatrix::zeros(3, 3);
        for i in 0..25 {
            meat += x.row(i).transpose() * x.row(i) * u[i].powi(2);
        }
        assert!((omega - &a * meat * &a).amax() < 1e-12);
    }

    #[test]
    fn single_cluster_matches_dense_oracle() {
        let x = random(30, 4, 3);
        let y = DVector::from_iterator(30, random(30, 1, 4).iter().copied());
        let fit = ols_fit(&x, &y).unwrap();
        let ids = vec![0; 30];
        let omega = hc3_cluster_cov(&x, &fit.residuals, &fit.leverages, &ids).unwrap();
        let oracle = dense_oracle(&x, &fit.residuals, &fit.leverages, &ids);
        assert!((&omega - &oracle).amax() < 1e-12);
        assert_eq!(omega, omega.transpose());
    }

    #[test]
    fn duplicated_rows_match_the_duplicated_sandwich() {
        let x = random(10, 2, 5);
        let y = DVector::from_iterator(10, random(10, 1, 6).iter().copied());
        let ids: Vec<usize> = (0..10).map(|i| i % 3).collect();
        let fit = ols_fit(&x, &y).unwrap();

        let x2 = DMatrix::from_fn(20, 2, |i, j| x[(i % 10, j)]);
        let y2 = DVector::from_fn(20, |i, _| y[i % 10]);
        let ids2: Vec<usize> = (0..20).map(|i| ids[i % 10]).collect();
        let fit2 = ols_fit(&x2, &y2).unwrap();
        let omega2 = hc3_cluster_cov(&x2, &fit2.residuals, &fit2.leverages, &ids2).unwrap();

        // Doubling halves (X'X)^{-1} and every leverage and doubles each
        // cluster score, so Omega = A [sum_c X_c' v v' X_c] A with
        // v_i = u_i / (1 - h_i / 2).
        let a = (x.transpose() * &x).try_inverse().unwrap();
        let mut scores = vec![DVector::zeros(2); 3];
        for i in 0..10 {
            let v = fit.residuals[i] / (1.0 - fit.leverages[i] / 2.0);
            scores[ids[i]] += x.row(i).transpose() * v;
        }
        let meat = scores.iter().fold(DMatrix::zeros(2, 2), |m, s| m + s * s.transpose());
        let analytic = &a * meat * &a;
        assert!((omega2 - analytic).amax() < 1e-12);
    }

    #[test]
    fn leverage_of_one_is_rejected() {
        let x = random(5, 2, 7);
        let mut h = DVector::from_element(5, 0.2);
        h[3] = 1.0;
        let err = hc3_cluster_cov(&x, &DVector::zeros(5), &h, &[0, 0, 1, 1, 2]);
        assert!(matches!(err, Err(Error::LeverageTooHigh { row: 3, .. })));
    }
}
