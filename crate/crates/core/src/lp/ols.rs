use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Columns whose distance from the span of the preceding (unit-norm)
/// columns falls below this are treated as collinear.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Diagonal of the hat matrix.
    pub leverages: DVector<f64>,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn ssr(&self) -> f64 {
        self.residuals.norm_squared()
    }
}

/// Least squares by Householder QR on unit-norm columns.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("column {j}")).collect();
    ols_fit_named(x, y, &names)
}

/// As [`ols_fit`], naming offending columns in rank errors.
pub fn ols_fit_named(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Invalid("design and outcome differ in length".into()));
    }
    if n == 0 || k == 0 {
        return Err(Error::EmptyDesign);
    }
    if n < k {
        return Err(Error::RankDeficient {
            columns: vec![format!("{k} columns for {n} rows")],
        });
    }
    let scale: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let zero: Vec<String> = scale
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == 0.0 || !s.is_finite())
        .map(|(j, _)| names[j].clone())
        .collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient { columns: zero });
    }
    let mut xs = x.clone();
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        col /= scale[j];
    }
    let qr = xs.qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() < RANK_TOL)
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    let q = qr.q();
    let qty = q.transpose() * y;
    let gamma = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let beta = DVector::from_fn(k, |j, _| gamma[j] / scale[j]);
    let residuals = y - x * &beta;
    let leverages = DVector::from_fn(n, |i, _| q.row(i).norm_squared());
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Numerical("triangular inverse failed".into()))?;
    let mut xtx_inv = &r_inv * r_inv.transpose();
    for i in 0..k {
        for j in 0..k {
            xtx_inv[(i, j)] /= scale[i] * scale[j];
        }
    }
    Ok(OlsFit {
        beta,
        residuals,
        leverages,
        xtx_inv,
    })
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

    #[test]
    fn exact_fit_has_zero_residuals() {
        let x = random(30, 3, 1);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let fit = ols_fit(&x, &(&x * &b)).unwrap();
        assert!(fit.residuals.amax() < 1e-12);
        assert!((fit.beta - b).amax() < 1e-12);
    }

    #[test]
    fn intercept_only_gives_mean() {
        let y = DVector::from_vec(vec![1.0, 4.0, 2.5, 8.0]);
        let fit = ols_fit(&DMatrix::from_element(4, 1, 1.0), &y).unwrap();
        assert!((fit.beta[0] - 3.875).abs() < 1e-14);
        assert!((fit.leverages.sum() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matches_normal_equations() {
        let x = random(50, 4, 2);
        let y = DVector::from_iterator(50, random(50, 1, 3).iter().copied());
        let fit = ols_fit(&x, &y).unwrap();
        let xtx = x.transpose() * &x;
        let oracle = xtx.clone().try_inverse().unwrap() * (x.transpose() * &y);
        assert!((&fit.beta - oracle).amax() < 1e-8);
        assert!((&fit.xtx_inv - xtx.try_inverse().unwrap()).amax() < 1e-8);
        let hat = &x * &fit.xtx_inv * x.transpose();
        for i in 0..50 {
            assert!((hat[(i, i)] - fit.leverages[i]).abs() < 1e-10);
        }
        assert!((fit.leverages.sum() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn collinear_column_is_named() {
        let mut x = random(20, 3, 4);
        let c = x.column(0) * 2.0 - x.column(1);
        x.set_column(2, &c);
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        match ols_fit_named(&x, &DVector::zeros(20), &names) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["c".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
