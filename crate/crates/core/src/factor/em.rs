use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Floor applied to specific variances that collapse towards zero.
pub const HEYWOOD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Convergence threshold on the change in average log-likelihood.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-10,
        }
    }
}

/// Gaussian factor model with diagonal specific covariance.
#[derive(Debug, Clone)]
pub struct FactorModel {
    /// p x k loadings.
    pub loadings: DMatrix<f64>,
    pub specific_variances: DVector<f64>,
    /// T x k regression (Thomson) scores.
    pub scores: DMatrix<f64>,
    pub means: DVector<f64>,
    pub log_likelihood: f64,
    /// Log-likelihood after every EM iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Variables whose specific variance sits on the floor.
    pub heywood: Vec<bool>,
}

impl FactorModel {
    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn has_heywood_case(&self) -> bool {
        self.heywood.iter().any(|&h| h)
    }

    /// Model-implied covariance `ΛΛ' + Ψ`.
    pub fn implied_covariance(&self) -> DMatrix<f64> {
        &self.loadings * self.loadings.transpose()
            + DMatrix::from_diagonal(&self.specific_variances)
    }
}

/// Maximum-likelihood factor analysis fitted by expectation-maximization.
///
/// `data` is T x p; columns are centred internally. The log-likelihood is
/// non-decreasing across iterations apart from the effect of the Heywood
/// floor.
pub fn estimate_factor_mle(data: &DMatrix<f64>, k: usize, opts: EmOptions) -> Result<FactorModel> {
    let (t, p) = data.shape();
    if t < 30 {
        return Err(Error::InsufficientData { needed: 30, got: t });
    }
    if k == 0 || k >= p {
        return Err(Error::Invalid(format!(
            "number of factors must lie in 1..{p}, got {k}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("surprise data contain non-finite values".into()));
    }

    let means = DVector::from_iterator(p, data.column_iter().map(|c| c.mean()));
    let mut centred = data.clone();
    for (j, mut col) in centred.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let s = centred.transpose() * &centred / t as f64;

    let (mut lambda, mut psi) = initial_values(&s, k);
    let mut trace = Vec::new();
    let mut ll_prev = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let sigma_inv = inverse_spd(&(&lambda * lambda.transpose() + DMatrix::from_diagonal(&psi)))?;
        // E-step: beta = Λ' Σ^{-1}, second moment of the latent factors.
        let beta = lambda.transpose() * &sigma_inv;
        let beta_s = &beta * &s;
        let ezz = DMatrix::identity(k, k) - &beta * &lambda + &beta_s * beta.transpose();
        // M-step.
        let ezz_inv = inverse_spd(&ezz)?;
        lambda = beta_s.transpose() * ezz_inv;
        let lb_s = &lambda * &beta_s;
        psi = DVector::from_fn(p, |i, _| (s[(i, i)] - lb_s[(i, i)]).max(HEYWOOD_FLOOR));

        let ll = log_likelihood(&s, &lambda, &psi, t)?;
        trace.push(ll);
        if (ll - ll_prev).abs() < opts.tol * t as f64 {
            converged = true;
            break;
        }
        ll_prev = ll;
    }
    if !converged {
        log::warn!("factor EM did not converge after {iterations} iterations");
    }

    let heywood: Vec<bool> = psi.iter().map(|&v| v <= HEYWOOD_FLOOR).collect();
    if heywood.iter().any(|&h| h) {
        log::warn!("Heywood case: specific variance floored at {HEYWOOD_FLOOR:e}");
    }

    let sigma_inv = inverse_spd(&(&lambda * lambda.transpose() + DMatrix::from_diagonal(&psi)))?;
    let beta = lambda.transpose() * sigma_inv;
    let scores = &centred * beta.transpose();
    let log_likelihood = *trace.last().unwrap_or(&f64::NEG_INFINITY);

    Ok(FactorModel {
        loadings: lambda,
        specific_variances: psi,
        scores,
        means,
        log_likelihood,
        trace,
        iterations,
        converged,
        heywood,
    })
}

/// Principal-component start: top-k eigenvectors scaled by the excess of
/// their eigenvalues over the mean discarded eigenvalue.
fn initial_values(s: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    let p = s.nrows();
    let eig = s.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rest: f64 = order[k..].iter().map(|&i| eig.eigenvalues[i].max(0.0)).sum::<f64>()
        / (p - k) as f64;
    let mut lambda = DMatrix::zeros(p, k);
    for (j, &i) in order[..k].iter().enumerate() {
        let scale = (eig.eigenvalues[i] - rest).max(1e-8).sqrt();
        lambda.set_column(j, &(eig.eigenvectors.column(i) * scale));
    }
    let psi = DVector::from_fn(p, |i, _| {
        let common: f64 = lambda.row(i).iter().map(|v| v * v).sum();
        (s[(i, i)] - common).max(0.1 * s[(i, i)]).max(HEYWOOD_FLOOR)
    });
    (lambda, psi)
}

fn log_likelihood(s: &DMatrix<f64>, lambda: &DMatrix<f64>, psi: &DVector<f64>, t: usize) -> Result<f64> {
    let p = s.nrows();
    let sigma = lambda * lambda.transpose() + DMatrix::from_diagonal(psi);
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Numerical("implied covariance is not positive definite".into()))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = (chol.inverse() * s).trace();
    Ok(-0.5 * t as f64 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + trace))
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 0);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Columns centred and rotated so the sample covariance is exactly I.
    fn whitened(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut f = normal_matrix(rows, cols, seed);
        for mut col in f.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        let q = f.qr().q();
        q * (rows as f64).sqrt()
    }

    #[test]
    fn recovers_covariance_of_a_known_model() {
        let lambda0 = DMatrix::from_row_slice(
            8,
            3,
            &[
                0.9, 0.3, 0.1, 0.8, 0.5, 0.2, 0.6, 0.6, 0.3, 0.4, 0.1, 0.5, 0.2, -0.4, -0.9, 0.3,
                -0.3, -1.0, 0.1, -0.2, -0.8, -0.7, 0.5, 0.4,
            ],
        );
        let t = 2_000;
        let f = whitened(t, 3, 1);
        let e = normal_matrix(t, 8, 2) * 0.01;
        let data = &f * lambda0.transpose() + e;
        let model = estimate_factor_mle(&data, 3, EmOptions::default()).unwrap();
        let truth = &lambda0 * lambda0.transpose() + DMatrix::identity(8, 8) * 1e-4;
        let err = (model.implied_covariance() - truth).norm();
        assert!(err < 1e-2, "Frobenius error {err}");
    }

    #[test]
    fn likelihood_is_monotone() {
        let lambda0 = DMatrix::from_fn(6, 2, |i, j| ((i + 2 * j) as f64 * 0.37).sin());
        let data = normal_matrix(400, 2, 3) * lambda0.transpose() + normal_matrix(400, 6, 4) * 0.5;
        let model = estimate_factor_mle(&data, 2, EmOptions::default()).unwrap();
        for w in model.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        assert!(model.converged);
        assert!(!model.has_heywood_case());
    }

    #[test]
    fn one_factor_loading_ratio_matches_scale_ratio() {
        // Two perfectly correlated columns plus an independent third.
        let z = normal_matrix(200, 1, 5);
        let other = normal_matrix(200, 1, 6);
        let mut data = DMatrix::zeros(200, 3);
        data.set_column(0, &(z.column(0) * 2.0));
        data.set_column(1, &(z.column(0) * -3.0));
        data.set_column(2, &other.column(0));
        let model = estimate_factor_mle(&data, 1, EmOptions::default()).unwrap();
        let ratio = model.loadings[(1, 0)] / model.loadings[(0, 0)];
        assert!((ratio + 1.5).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn zero_variance_column_flags_heywood() {
        let mut data = normal_matrix(100, 5, 7);
        data.column_mut(3).fill(1.25);
        let model = estimate_factor_mle(&data, 2, EmOptions::default()).unwrap();
        assert!(model.heywood[3]);
        assert!(model.specific_variances[3] >= HEYWOOD_FLOOR);
    }

    #[test]
    fn rejects_short_samples() {
        let data = normal_matrix(29, 8, 8);
        assert!(matches!(
            estimate_factor_mle(&data, 3, EmOptions::default()),
            Err(Error::InsufficientData { needed: 30, got: 29 })
        ));
    }
}
