use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irf::ShockTransform;

/// Number of identified shocks.
pub const N_X: usize = 3;
const TOL: f64 = 1e-12;

/// Distribution of the identified shocks `x_t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShockLaw {
    #[default]
    Gaussian,
    /// Student t rescaled to unit variance; needs `df > 2`.
    ScaledT { df: f64 },
}

/// Block-recursive structural VAR in `w_t = (x_t, y_t, z_t)`:
///
/// `A0 w_t = a + sum_l A_l w_{t-l} + sum_l C_l f(x_{t-l}) + eta_t`.
///
/// `a0` is stored exactly as it multiplies `w_t`, so its off-diagonal
/// blocks hold the negated contemporaneous effects. `c[0]` is the
/// contemporaneous transform loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralModel {
    pub n_y: usize,
    pub n_z: usize,
    pub intercept: Vec<f64>,
    pub a0: Vec<Vec<f64>>,
    #[serde(default)]
    pub lags: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub c: Vec<Vec<Vec<f64>>>,
    pub transform: ShockTransform,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default)]
    pub shock_law: ShockLaw,
}

impl StructuralModel {
    /// Identity `A0`, no dynamics, identity covariance.
    pub fn canonical(n_y: usize, n_z: usize, n_lags: usize, n_c: usize) -> Self {
        let n = N_X + n_y + n_z;
        let eye = |n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect()
        };
        Self {
            n_y,
            n_z,
            intercept: vec![0.0; n],
            a0: eye(n),
            lags: vec![vec![vec![0.0; n]; n]; n_lags],
            c: vec![vec![vec![0.0; N_X]; n]; n_c],
            transform: ShockTransform::Identity,
            sigma: eye(n),
            shock_law: ShockLaw::Gaussian,
        }
    }

    pub fn dim(&self) -> usize {
        N_X + self.n_y + self.n_z
    }

    pub fn x_range(&self) -> Range<usize> {
        0..N_X
    }

    pub fn y_range(&self) -> Range<usize> {
        N_X..N_X + self.n_y
    }

    pub fn z_range(&self) -> Range<usize> {
        N_X + self.n_y..self.dim()
    }

    pub fn a0_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.a0, self.dim(), self.dim())
    }

    pub fn lag_matrix(&self, l: usize) -> DMatrix<f64> {
        to_matrix(&self.lags[l], self.dim(), self.dim())
    }

    pub fn c_matrix(&self, l: usize) -> DMatrix<f64> {
        to_matrix(&self.c[l], self.dim(), N_X)
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.sigma, self.dim(), self.dim())
    }

    pub fn intercept_vector(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.intercept.get(i).copied().unwrap_or(f64::NAN))
    }

    /// Companion matrix of `w_t = A0^{-1} sum_l A_l w_{t-l} + ...`.
    pub fn companion(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let l = self.lags.len().max(1);
        let a0_inv = self
            .a0_matrix()
            .try_inverse()
            .ok_or_else(|| Error::ModelViolations(vec!["A0 must be invertible".into()]))?;
        let mut f = DMatrix::zeros(n * l, n * l);
        for (i, _) in self.lags.iter().enumerate() {
            let block = &a0_inv * self.lag_matrix(i);
            f.view_mut((0, i * n), (n, n)).copy_from(&block);
        }
        for i in 1..l {
            f.view_mut((i * n, (i - 1) * n), (n, n)).fill_with_identity();
        }
        Ok(f)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        let f = self.companion()?;
        Ok(f.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

fn to_matrix(rows: &[Vec<f64>], n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |i, j| {
        rows.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN)
    })
}

fn block_is(m: &DMatrix<f64>, rows: Range<usize>, cols: Range<usize>, f: impl Fn(usize, usize) -> f64) -> bool {
    rows.clone()
        .all(|i| cols.clone().all(|j| (m[(i, j)] - f(i, j)).abs() <= TOL))
}

fn zero(_: usize, _: usize) -> f64 {
    0.0
}

fn eye(i: usize, j: usize) -> f64 {
    (i == j) as u8 as f64
}

/// Checks every structural restriction and returns all violations found.
pub fn validate_model(m: &StructuralModel) -> Result<()> {
    let mut v = Vec::new();
    let n = m.dim();
    let shape_ok = |rows: &[Vec<f64>], cols: usize| rows.len() == n && rows.iter().all(|r| r.len() == cols);
    if m.intercept.len() != n {
        v.push(format!("intercept must have {n} entries"));
    }
    if !shape_ok(&m.a0, n) {
        v.push(format!("A0 must be {n}x{n}"));
    }
    if !shape_ok(&m.sigma, n) {
        v.push(format!("Sigma must be {n}x{n}"));
    }
    for (l, a) in m.lags.iter().enumerate() {
        if !shape_ok(a, n) {
            v.push(format!("lag matrix {} must be {n}x{n}", l + 1));
        }
    }
    for (l, c) in m.c.iter().enumerate() {
        if !shape_ok(c, N_X) {
            v.push(format!("C lag {l} must be {n}x{N_X}"));
        }
    }
    if !v.is_empty() {
        return Err(Error::ModelViolations(v));
    }
    if [&m.intercept]
        .into_iter()
        .flatten()
        .chain(m.a0.iter().flatten())
        .chain(m.sigma.iter().flatten())
        .chain(m.lags.iter().flatten().flatten())
        .chain(m.c.iter().flatten().flatten())
        .any(|x| !x.is_finite())
    {
        return Err(Error::ModelViolations(vec!["coefficients must be finite".into()]));
    }

    let (xr, yr, zr) = (m.x_range(), m.y_range(), m.z_range());
    let a0 = m.a0_matrix();
    if !(block_is(&a0, xr.clone(), xr.clone(), eye)
        && block_is(&a0, yr.clone(), yr.clone(), eye)
        && block_is(&a0, zr.clone(), zr.clone(), eye))
    {
        v.push("A0 diagonal blocks must be identity".into());
    }
    if !block_is(&a0, xr.clone(), N_X..n, zero) {
        v.push("A0 upper-right must be zero".into());
    }
    if a0.clone().try_inverse().is_none() {
        v.push("A0 must be invertible".into());
    }
    for l in 0..m.lags.len() {
        let a = m.lag_matrix(l);
        if !block_is(&a, xr.clone(), 0..n, zero) {
            v.push(format!("first block-row of lag matrix {} must be zero", l + 1));
        }
        if !block_is(&a, zr.clone(), yr.clone(), zero) {
            v.push(format!("A32 block of lag matrix {} must be zero", l + 1));
        }
    }
    for l in 0..m.c.len() {
        if !block_is(&m.c_matrix(l), xr.clone(), 0..N_X, zero) {
            v.push(format!("first block-row of C lag {l} must be zero"));
        }
    }
    if m.intercept[..N_X].iter().any(|a| a.abs() > TOL) {
        v.push("x intercept must be zero".into());
    }
    let sigma = m.sigma_matrix();
    if !block_is(&sigma, xr.clone(), xr.clone(), eye) || !block_is(&sigma, xr.clone(), N_X..n, zero) {
        v.push("Sigma x-block must be identity and uncorrelated with the other innovations".into());
    }
    if (&sigma - sigma.transpose()).amax() > TOL {
        v.push("Sigma must be symmetric".into());
    } else {
        let min_eig = sigma.symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            v.push(format!("Sigma must be positive semi-definite (smallest eigenvalue {min_eig:e})"));
        }
    }
    if let ShockLaw::ScaledT { df } = m.shock_law {
        if !(df > 2.0) {
            v.push("scaled t shocks need df > 2".into());
        }
    }
    if let ShockTransform::ThresholdShift { b } = m.transform {
        if !(b >= 0.0) {
            v.push("threshold must be non-negative".into());
        }
    }
    if v.iter().all(|s| !s.starts_with("A0 must be invertible")) {
        let rho = m.spectral_radius()?;
        if !(rho < 1.0) {
            v.push(format!("companion spectral radius {rho:.6} must be below 1"));
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::ModelViolations(v))
    }
}

/// Symmetric square root of a positive semi-definite matrix.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Moore-Penrose inverse of a symmetric positive semi-definite matrix.
pub(crate) fn psd_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| if l > 1e-12 * top.max(1.0) { 1.0 / l } else { 0.0 }));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}
