use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::covariance::hc3_cluster_cov_with;
use super::design::{build_design, ClusterBy, Design, DesignOptions, LpSpec};
use super::frame::PanelFrame;
use super::ols::ols_fit_named;
use crate::error::{Error, Result};
use crate::panel::ShockKind;

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    pub cluster: ClusterBy,
    pub design: DesignOptions,
}

/// Estimated local projection. The first three coefficients are the
/// contemporaneous shock loadings, followed by the contemporaneous
/// transform loadings when the specification is non-linear.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    pub leverages: DVector<f64>,
    pub omega: DMatrix<f64>,
    pub columns: Vec<String>,
    pub n_obs: usize,
    pub n_params: usize,
    pub n_clusters: usize,
    pub has_transform: bool,
}

impl FitResult {
    pub fn psi_index(&self, shock: ShockKind) -> usize {
        shock.index()
    }

    pub fn gamma_index(&self, shock: ShockKind) -> Result<usize> {
        if self.has_transform {
            Ok(3 + shock.index())
        } else {
            Err(Error::UnknownLayout("transform".into()))
        }
    }

    pub fn psi(&self, shock: ShockKind) -> f64 {
        self.beta[self.psi_index(shock)]
    }

    pub fn gamma(&self, shock: ShockKind) -> Result<f64> {
        Ok(self.beta[self.gamma_index(shock)?])
    }

    pub fn se(&self, index: usize) -> f64 {
        self.omega[(index, index)].sqrt()
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.norm_squared()
    }

    /// Coefficients and covariance of the shock block (ψ, then Γ if present).
    pub fn shock_block(&self) -> ShockBlock {
        let m = if self.has_transform { 6 } else { 3 };
        ShockBlock {
            beta: self.beta.rows(0, m).iter().copied().collect(),
            omega: (0..m)
                .map(|i| (0..m).map(|j| self.omega[(i, j)]).collect())
                .collect(),
            n_obs: self.n_obs,
            n_params: self.n_params,
        }
    }
}

/// The part of a fit that downstream inference needs, in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockBlock {
    pub beta: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub n_obs: usize,
    pub n_params: usize,
}

impl ShockBlock {
    pub fn has_transform(&self) -> bool {
        self.beta.len() == 6
    }

    pub fn psi(&self, shock: ShockKind) -> f64 {
        self.beta[shock.index()]
    }

    pub fn gamma(&self, shock: ShockKind) -> Result<f64> {
        if !self.has_transform() {
            return Err(Error::UnknownLayout("transform".into()));
        }
        Ok(self.beta[3 + shock.index()])
    }

    pub fn beta_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta)
    }

    pub fn omega_matrix(&self) -> DMatrix<f64> {
        let m = self.beta.len();
        DMatrix::from_fn(m, m, |i, j| self.omega[i][j])
    }
}

/// OLS with the HC3 cluster-robust covariance on a prepared design.
pub fn fit_design(design: &Design, cluster: ClusterBy) -> Result<FitResult> {
    let ols = ols_fit_named(&design.x, &design.y, &design.columns)?;
    let clusters = design.clusters(cluster);
    let omega = hc3_cluster_cov_with(&ols.xtx_inv, &design.x, &ols.residuals, &ols.leverages, &clusters)?;
    let n_clusters = clusters.iter().max().map_or(0, |m| m + 1);
    Ok(FitResult {
        beta: ols.beta,
        residuals: ols.residuals,
        leverages: ols.leverages,
        omega,
        columns: design.columns.clone(),
        n_obs: design.n_obs(),
        n_params: design.n_params(),
        n_clusters,
        has_transform: design.has_transform,
    })
}

pub fn fit_lp(frame: &PanelFrame, spec: &LpSpec, opts: FitOptions) -> Result<FitResult> {
    let design = build_design(frame, spec, opts.design)?;
    fit_design(&design, opts.cluster)
}
