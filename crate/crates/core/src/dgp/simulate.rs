use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use super::model::{psd_pinv, psd_sqrt, validate_model, ShockLaw, StructuralModel, N_X};
use crate::error::{Error, Result};
use crate::irf::ShockTransform;
use crate::panel::{CalendarMonth, EuroControl, Outcome, PanelDataset, Series, ShockSet};
use crate::rng::stream_rng;

pub const BURN_IN: usize = 500;

/// Draws from a validated model, with the structural matrices split into
/// the blocks the recursion needs.
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    n_y: usize,
    n_z: usize,
    intercept: DVector<f64>,
    lags: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    transform: ShockTransform,
    law: ShockLaw,
    a0_yx: DMatrix<f64>,
    a0_yz: DMatrix<f64>,
    a0_zx: DMatrix<f64>,
    /// LU of the joint (y, z) block when z responds to y within the period.
    joint: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    z_sqrt: DMatrix<f64>,
    y_on_z: DMatrix<f64>,
    y_sqrt: DMatrix<f64>,
    t_dist: Option<(StudentT<f64>, f64)>,
}

/// Lagged values most recent first.
#[derive(Debug, Clone, Default)]
pub(crate) struct History {
    w: VecDeque<DVector<f64>>,
    fx: VecDeque<DVector<f64>>,
}

impl Engine {
    pub(crate) fn new(m: &StructuralModel) -> Result<Self> {
        validate_model(m)?;
        let (yr, zr) = (m.y_range(), m.z_range());
        let a0 = m.a0_matrix();
        let block = |mat: &DMatrix<f64>, r: std::ops::Range<usize>, c: std::ops::Range<usize>| {
            mat.view((r.start, c.start), (r.len(), c.len())).into_owned()
        };
        let a0_zy = block(&a0, zr.clone(), yr.clone());
        let a0_yz = block(&a0, yr.clone(), zr.clone());
        let joint = (a0_zy.amax() > 0.0).then(|| {
            let (ny, nz) = (m.n_y, m.n_z);
            let mut j = DMatrix::identity(ny + nz, ny + nz);
            j.view_mut((0, ny), (ny, nz)).copy_from(&a0_yz);
            j.view_mut((ny, 0), (nz, ny)).copy_from(&a0_zy);
            j.lu()
        });
        let sigma = m.sigma_matrix();
        let s22 = block(&sigma, yr.clone(), yr.clone());
        let s23 = block(&sigma, yr.clone(), zr.clone());
        let s33 = block(&sigma, zr.clone(), zr.clone());
        let y_on_z = &s23 * psd_pinv(&s33);
        let cond = &s22 - &y_on_z * s23.transpose();
        let cond = (&cond + cond.transpose()) * 0.5;
        let t_dist = match m.shock_law {
            ShockLaw::Gaussian => None,
            ShockLaw::ScaledT { df } => Some((
                StudentT::new(df).map_err(|e| Error::Invalid(format!("t distribution: {e}")))?,
                ((df - 2.0) / df).sqrt(),
            )),
        };
        Ok(Self {
            n_y: m.n_y,
            n_z: m.n_z,
            intercept: m.intercept_vector(),
            lags: (0..m.lags.len()).map(|l| m.lag_matrix(l)).collect(),
            c: (0..m.c.len()).map(|l| m.c_matrix(l)).collect(),
            transform: m.transform,
            law: m.shock_law,
            a0_yx: block(&a0, yr.clone(), 0..N_X),
            a0_yz,
            a0_zx: block(&a0, zr.clone(), 0..N_X),
            joint,
            z_sqrt: psd_sqrt(&s33),
            y_on_z,
            y_sqrt: psd_sqrt(&cond),
            t_dist,
        })
    }

    pub(crate) fn n_y(&self) -> usize {
        self.n_y
    }

    pub(crate) fn has_joint_block(&self) -> bool {
        self.joint.is_some()
    }

    pub(crate) fn draw_x<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(N_X, |_, _| match (&self.law, &self.t_dist) {
            (ShockLaw::ScaledT { .. }, Some((t, scale))) => t.sample(rng) * scale,
            _ => StandardNormal.sample(rng),
        })
    }

    fn normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    /// Innovation to the z block.
    pub(crate) fn draw_v<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        &self.z_sqrt * Self::normals(self.n_z, rng)
    }

    /// Innovation to the y block, drawn conditionally on `v`.
    pub(crate) fn draw_eps<R: Rng + ?Sized>(&self, v: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        &self.y_on_z * v + &self.y_sqrt * Self::normals(self.n_y, rng)
    }

    /// `a + sum_l A_l w_{t-l} + sum_l C_l f(x_{t-l})`, with the current
    /// `f(x_t)` in `fx`.
    fn systematic(&self, hist: &History, fx: &DVector<f64>) -> DVector<f64> {
        let mut r = self.intercept.clone();
        for (a, w) in self.lags.iter().zip(&hist.w) {
            r.gemv(1.0, a, w, 1.0);
        }
        for (l, c) in self.c.iter().enumerate() {
            let f = if l == 0 { Some(fx) } else { hist.fx.get(l - 1) };
            if let Some(f) = f {
                r.gemv(1.0, c, f, 1.0);
            }
        }
        r
    }

    /// Solves one period given the shocks; `common_z` overrides the z block
    /// for replicated countries. Returns the new `w_t` and records it.
    pub(crate) fn step(
        &self,
        hist: &mut History,
        x: &DVector<f64>,
        v: &DVector<f64>,
        eps: &DVector<f64>,
        common_z: Option<&DVector<f64>>,
    ) -> DVector<f64> {
        let (ny, nz) = (self.n_y, self.n_z);
        let fx = x.map(|v| self.transform.eval(v));
        let r = self.systematic(hist, &fx);
        let ry = r.rows(N_X, ny) + eps - &self.a0_yx * x;
        let rz = r.rows(N_X + ny, nz) + v - &self.a0_zx * x;
        let (y, z) = match (common_z, &self.joint) {
            (Some(z), _) => (ry - &self.a0_yz * z, z.clone()),
            (None, None) => (ry - &self.a0_yz * &rz, rz),
            (None, Some(lu)) => {
                let mut b = DVector::zeros(ny + nz);
                b.rows_mut(0, ny).copy_from(&ry);
                b.rows_mut(ny, nz).copy_from(&rz);
                let s = lu.solve(&b).expect("validated A0 is invertible");
                (s.rows(0, ny).into_owned(), s.rows(ny, nz).into_owned())
            }
        };
        let mut w = DVector::zeros(N_X + ny + nz);
        w.rows_mut(0, N_X).copy_from(x);
        w.rows_mut(N_X, ny).copy_from(&y);
        w.rows_mut(N_X + ny, nz).copy_from(&z);
        if !self.lags.is_empty() {
            hist.w.push_front(w.clone());
            hist.w.truncate(self.lags.len());
        }
        if self.c.len() > 1 {
            hist.fx.push_front(fx);
            hist.fx.truncate(self.c.len() - 1);
        }
        w
    }
}

/// Simulated shocks, replicated country outcomes and common controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub model: StructuralModel,
    pub seed: u64,
    pub burn_in: usize,
    /// T x 3.
    pub x: DMatrix<f64>,
    /// One T x n_y block per country.
    pub y: Vec<DMatrix<f64>>,
    /// T x n_z.
    pub z: DMatrix<f64>,
}

/// Simulates `t` periods after a burn-in of [`BURN_IN`]. Countries share `x`
/// and `z` and draw their own y innovations.
pub fn simulate(m: &StructuralModel, t: usize, n_countries: usize, seed: u64) -> Result<SimulatedPanel> {
    simulate_with_burn_in(m, t, n_countries, seed, BURN_IN)
}

pub fn simulate_with_burn_in(
    m: &StructuralModel,
    t: usize,
    n_countries: usize,
    seed: u64,
    burn_in: usize,
) -> Result<SimulatedPanel> {
    if n_countries == 0 || t == 0 {
        return Err(Error::Invalid("simulation needs at least one country and one period".into()));
    }
    let engine = Engine::new(m)?;
    if n_countries > 1 && engine.has_joint_block() {
        return Err(Error::ModelViolations(vec![
            "A0 z-on-y block must be zero when countries share z".into(),
        ]));
    }
    let mut x_rng = stream_rng(seed, 0);
    let mut v_rng = stream_rng(seed, 1);
    let mut country_rngs: Vec<_> = (0..n_countries).map(|k| stream_rng(seed, 2 + k as u64)).collect();
    let mut hists = vec![History::default(); n_countries];
    let (ny, nz) = (m.n_y, m.n_z);
    let mut x_out = DMatrix::zeros(t, N_X);
    let mut y_out = vec![DMatrix::zeros(t, ny); n_countries];
    let mut z_out = DMatrix::zeros(t, nz);
    for period in 0..burn_in + t {
        let x = engine.draw_x(&mut x_rng);
        let v = engine.draw_v(&mut v_rng);
        let mut z_common: Option<DVector<f64>> = None;
        for k in 0..n_countries {
            let eps = engine.draw_eps(&v, &mut country_rngs[k]);
            let w = engine.step(&mut hists[k], &x, &v, &eps, z_common.as_ref());
            if period >= burn_in {
                let row = period - burn_in;
                y_out[k].row_mut(row).copy_from(&w.rows(N_X, ny).transpose());
                if k == 0 {
                    x_out.row_mut(row).copy_from(&x.transpose());
                    z_out.row_mut(row).copy_from(&w.rows(N_X + ny, nz).transpose());
                }
            }
            if z_common.is_none() {
                z_common = Some(w.rows(N_X + ny, nz).into_owned());
            }
        }
    }
    let finite = x_out.iter().chain(z_out.iter()).chain(y_out.iter().flatten()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numerical("simulation produced non-finite values".into()));
    }
    Ok(SimulatedPanel {
        model: m.clone(),
        seed,
        burn_in,
        x: x_out,
        y: y_out,
        z: z_out,
    })
}

/// Label of simulated country `k` (zero based).
pub fn country_label(k: usize) -> String {
    format!("S{:02}", k + 1)
}

impl SimulatedPanel {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_countries(&self) -> usize {
        self.y.len()
    }

    /// Maps y onto the five outcomes and z onto the four euro controls.
    pub fn to_panel(&self, start: CalendarMonth) -> Result<(PanelDataset, ShockSet)> {
        if self.model.n_y != Outcome::ALL.len() || self.model.n_z != EuroControl::ALL.len() {
            return Err(Error::Invalid(format!(
                "panel export needs n_y = {} and n_z = {}, got {} and {}",
                Outcome::ALL.len(),
                EuroControl::ALL.len(),
                self.model.n_y,
                self.model.n_z
            )));
        }
        let column = |m: &DMatrix<f64>, j: usize| Series::new(start, m.column(j).iter().copied().collect());
        let mut countries = BTreeMap::new();
        for (k, y) in self.y.iter().enumerate() {
            let mut vars = BTreeMap::new();
            for o in Outcome::ALL {
                vars.insert(o, column(y, o.index())?);
            }
            countries.insert(country_label(k), vars);
        }
        let mut euro = BTreeMap::new();
        for (j, e) in EuroControl::ALL.into_iter().enumerate() {
            euro.insert(e, column(&self.z, j)?);
        }
        let rows: Vec<[f64; 3]> = self.x.row_iter().map(|r| [r[0], r[1], r[2]]).collect();
        Ok((PanelDataset::new(countries, euro), ShockSet::from_dense(start, &rows)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
        let n = data.nrows() as f64;
        let mut c = data.clone();
        for mut col in c.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        c.transpose() * &c / n
    }

    #[test]
    fn static_model_reproduces_implied_covariance() {
        let mut m = StructuralModel::canonical(2, 1, 0, 0);
        m.a0[3][0] = -0.5;
        m.a0[4][5] = 0.4;
        m.a0[5][1] = 0.3;
        m.sigma[3][3] = 2.0;
        m.sigma[3][4] = 0.5;
        m.sigma[4][3] = 0.5;
        m.sigma[3][5] = 0.6;
        m.sigma[5][3] = 0.6;
        m.sigma[5][5] = 1.5;
        let t = 200_000;
        let sim = simulate(&m, t, 1, 5).unwrap();
        let mut w = DMatrix::zeros(t, 6);
        w.columns_mut(0, 3).copy_from(&sim.x);
        w.columns_mut(3, 2).copy_from(&sim.y[0]);
        w.columns_mut(5, 1).copy_from(&sim.z);
        let a0_inv = m.a0_matrix().try_inverse().unwrap();
        let truth = &a0_inv * m.sigma_matrix() * a0_inv.transpose();
        let err = (covariance(&w) - &truth).amax();
        assert!(err < 0.03, "max error {err}\n{truth}");
    }

    #[test]
    fn arx_autocorrelation_matches_closed_form() {
        // y_t = 0.5 y_{t-1} + 0.8 x1_t + e_t, so var y = (0.64 + 1) / 0.75 and
        // the first autocorrelation is 0.5.
        let mut m = StructuralModel::canonical(1, 0, 1, 1);
        m.lags[0][3][3] = 0.5;
        m.c[0][3][0] = 0.8;
        let t = 200_000;
        let sim = simulate(&m, t, 1, 9).unwrap();
        let y: Vec<f64> = sim.y[0].column(0).iter().copied().collect();
        let mean = y.iter().sum::<f64>() / t as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
        let cov1 = y.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum::<f64>() / t as f64;
        assert!((var - 1.64 / 0.75).abs() < 0.05, "{var}");
        assert!((cov1 / var - 0.5).abs() < 0.01, "{}", cov1 / var);
    }

    #[test]
    fn countries_share_x_and_z() {
        let mut m = StructuralModel::canonical(5, 4, 1, 1);
        m.lags[0][3][3] = 0.3;
        m.lags[0][8][8] = 0.6;
        m.lags[0][8][0] = 0.2;
        m.c[0][4][1] = 1.0;
        let sim = simulate(&m, 50, 3, 1).unwrap();
        assert_eq!(sim.y.len(), 3);
        assert_ne!(sim.y[0], sim.y[1]);
        let (panel, shocks) = sim.to_panel(CalendarMonth::new(2000, 1).unwrap()).unwrap();
        assert_eq!(panel.n_countries(), 3);
        assert_eq!(shocks.len(), 50);
        assert_eq!(panel.countries().collect::<Vec<_>>(), ["S01", "S02", "S03"]);
        let v = panel.value("S02", Outcome::Cpi, CalendarMonth::new(2000, 3).unwrap()).unwrap();
        assert_eq!(v, sim.y[1][(2, 2)]);
        panel.check_complete().unwrap();
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let mut m = StructuralModel::canonical(2, 1, 2, 2);
        m.lags[1][3][4] = 0.2;
        m.c[1][4][2] = 0.7;
        m.transform = ShockTransform::AbsValue;
        m.shock_law = ShockLaw::ScaledT { df: 5.0 };
        let a = simulate(&m, 100, 2, 77).unwrap();
        let b = simulate(&m, 100, 2, 77).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, 100, 2, 78).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn shared_z_requires_recursive_contemporaneous_block() {
        let mut m = StructuralModel::canonical(1, 1, 0, 0);
        m.a0[4][3] = 0.5;
        assert!(simulate(&m, 10, 1, 0).is_ok());
        assert!(matches!(simulate(&m, 10, 2, 0), Err(Error::ModelViolations(_))));
    }

    #[test]
    fn scaled_t_shocks_have_unit_variance() {
        let mut m = StructuralModel::canonical(1, 0, 0, 0);
        m.shock_law = ShockLaw::ScaledT { df: 6.0 };
        let sim = simulate(&m, 100_000, 1, 3).unwrap();
        let c = covariance(&sim.x);
        assert!((c - DMatrix::identity(3, 3)).amax() < 0.05);
    }
}
