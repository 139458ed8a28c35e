use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use super::model::{StructuralModel, N_X};
use super::simulate::{Engine, History};
use crate::error::{Error, Result};
use crate::irf::{Flavor, IrfCurve, ShockTransform, SpecLabel};
use crate::panel::{Outcome, ShockKind};
use crate::rng::stream_rng;

const CHUNK: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub n_paths: usize,
    /// Periods simulated before the perturbation, drawing the initial state.
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            n_paths: 50_000,
            burn_in: 100,
            seed: 0,
        }
    }
}

/// Monte-Carlo mean response of every y variable, indexed `[h][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleIrf {
    pub shock_index: usize,
    pub delta: f64,
    pub n_paths: usize,
    pub mean: Vec<Vec<f64>>,
    /// Monte-Carlo standard error of `mean`.
    pub se: Vec<Vec<f64>>,
}

impl OracleIrf {
    pub fn horizons(&self) -> usize {
        self.mean.len()
    }

    /// Response path of y variable `j`.
    pub fn response(&self, j: usize) -> Vec<f64> {
        self.mean.iter().map(|r| r[j]).collect()
    }

    pub fn response_se(&self, j: usize) -> Vec<f64> {
        self.se.iter().map(|r| r[j]).collect()
    }

    /// One curve per outcome; needs the five-outcome layout.
    pub fn curves(&self, transform: ShockTransform) -> Result<Vec<IrfCurve>> {
        let n_y = self.mean.first().map_or(0, Vec::len);
        if n_y != Outcome::ALL.len() {
            return Err(Error::Invalid(format!("curves need {} y variables, got {n_y}", Outcome::ALL.len())));
        }
        Ok(Outcome::ALL
            .into_iter()
            .map(|o| IrfCurve {
                shock: ShockKind::ALL[self.shock_index],
                outcome: o,
                spec: SpecLabel::of(Some(transform)),
                flavor: Flavor::Unconditional,
                values: self.response(o.index()),
                delta: self.delta,
            })
            .collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_oracle_csv(std::slice::from_ref(self), writer)
    }
}

/// Columns `shock,variable,h,value,se,delta`, one block per oracle.
/// Variables are named after the outcomes when there are five of them and
/// `y1, y2, ...` otherwise.
pub fn write_oracle_csv<W: Write>(oracles: &[OracleIrf], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["shock", "variable", "h", "value", "se", "delta"])?;
    for o in oracles {
        let n_y = o.mean.first().map_or(0, Vec::len);
        let name = |j: usize| {
            if n_y == Outcome::ALL.len() {
                Outcome::ALL[j].name().to_string()
            } else {
                format!("y{}", j + 1)
            }
        };
        for j in 0..n_y {
            for h in 0..o.horizons() {
                w.write_record([
                    ShockKind::ALL[o.shock_index].name().to_string(),
                    name(j),
                    h.to_string(),
                    o.mean[h][j].to_string(),
                    o.se[h][j].to_string(),
                    o.delta.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Running mean and centred second moment.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        let n = self.n + other.n;
        if other.n == 0.0 {
            return self;
        }
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.n / n;
            self.m2[i] += other.m2[i] + d * d * self.n * other.n / n;
        }
        self.n = n;
        self
    }
}

/// Paired-path Monte-Carlo IRF: the mean of `y_{t+h}(x_t + delta e_i) - y_{t+h}(x_t)`
/// with both paths driven by the same draws, for `h = 0..=h_max`.
pub fn true_irf_oracle(
    m: &StructuralModel,
    shock_index: usize,
    delta: f64,
    h_max: usize,
    opts: OracleOptions,
) -> Result<OracleIrf> {
    if shock_index >= N_X {
        return Err(Error::Invalid(format!("shock index must be below {N_X}, got {shock_index}")));
    }
    if opts.n_paths < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: opts.n_paths,
        });
    }
    let engine = Engine::new(m)?;
    let n_y = engine.n_y();
    let width = (h_max + 1) * n_y;
    let path = |p: usize| -> Vec<f64> {
        let mut rng = stream_rng(opts.seed, p as u64);
        let mut base = History::default();
        for _ in 0..opts.burn_in {
            let x = engine.draw_x(&mut rng);
            let v = engine.draw_v(&mut rng);
            let eps = engine.draw_eps(&v, &mut rng);
            engine.step(&mut base, &x, &v, &eps, None);
        }
        let mut moved = base.clone();
        let mut out = Vec::with_capacity(width);
        for h in 0..=h_max {
            let x = engine.draw_x(&mut rng);
            let v = engine.draw_v(&mut rng);
            let eps = engine.draw_eps(&v, &mut rng);
            let mut xb = x.clone();
            if h == 0 {
                xb[shock_index] += delta;
            }
            let wa = engine.step(&mut base, &x, &v, &eps, None);
            let wb = engine.step(&mut moved, &xb, &v, &eps, None);
            out.extend((0..n_y).map(|j| wb[N_X + j] - wa[N_X + j]));
        }
        out
    };
    let n_chunks = opts.n_paths.div_ceil(CHUNK);
    let chunks: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut mom = Moments::new(width);
            for p in c * CHUNK..((c + 1) * CHUNK).min(opts.n_paths) {
                mom.push(&path(p));
            }
            mom
        })
        .collect();
    let total = chunks.iter().fold(Moments::new(width), |acc, c| acc.merge(c));
    let n = total.n;
    let reshape = |v: Vec<f64>| -> Vec<Vec<f64>> { v.chunks(n_y).map(<[f64]>::to_vec).collect() };
    let se: Vec<f64> = total.m2.iter().map(|s| (s.max(0.0) / (n - 1.0) / n).sqrt()).collect();
    Ok(OracleIrf {
        shock_index,
        delta,
        n_paths: opts.n_paths,
        mean: reshape(total.mean),
        se: reshape(se),
    })
}

/// Closed-form response of the y block to `delta` in shock `shock_index`
/// for a model that is linear in `x`, from powers of the companion matrix.
/// Indexed `[h][j]`.
pub fn analytic_linear_irf(
    m: &StructuralModel,
    shock_index: usize,
    delta: f64,
    h_max: usize,
) -> Result<Vec<Vec<f64>>> {
    super::model::validate_model(m)?;
    if shock_index >= N_X {
        return Err(Error::Invalid(format!("shock index must be below {N_X}, got {shock_index}")));
    }
    let has_c = (0..m.c.len()).any(|l| m.c_matrix(l).amax() > 0.0);
    if has_c && m.transform != ShockTransform::Identity {
        return Err(Error::Invalid(format!(
            "closed-form IRF needs a linear transform, model uses {}",
            m.transform
        )));
    }
    let n = m.dim();
    let f = m.companion()?;
    let a0_inv = m.a0_matrix().try_inverse().expect("validated A0 is invertible");
    let mut e = DVector::zeros(N_X);
    e[shock_index] = delta;
    let mut state = DVector::zeros(f.nrows());
    let mut out = Vec::with_capacity(h_max + 1);
    for h in 0..=h_max {
        let mut impulse = DVector::zeros(n);
        if h == 0 {
            impulse.rows_mut(0, N_X).copy_from(&e);
        }
        if h < m.c.len() {
            impulse += m.c_matrix(h) * &e;
        }
        let mut next: DVector<f64> = if h == 0 { DVector::zeros(f.nrows()) } else { &f * &state };
        let inj: DVector<f64> = &a0_inv * impulse;
        let mut top = next.rows_mut(0, n);
        top += &inj;
        state = next;
        out.push(state.rows(N_X, m.n_y).iter().copied().collect());
    }
    Ok(out)
}

/// `E|x + delta| - E|x|` for standard normal `x`.
pub fn abs_shift_moment(delta: f64) -> f64 {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    let n = Normal::standard();
    delta * (2.0 * n.cdf(delta) - 1.0) + 2.0 * n.pdf(delta) - 2.0 * n.pdf(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(n_paths: usize, seed: u64) -> OracleOptions {
        OracleOptions {
            n_paths,
            burn_in: 50,
            seed,
        }
    }

    /// Two y variables and one z with feedback through lags and impact.
    fn linear_model() -> StructuralModel {
        let mut m = StructuralModel::canonical(2, 1, 2, 2);
        m.a0[3][0] = -0.8;
        m.a0[4][1] = 0.4;
        m.a0[4][5] = -0.3;
        m.a0[5][2] = -0.5;
        m.a0[3][5] = -0.2;
        m.lags[0][3][3] = 0.5;
        m.lags[0][3][4] = 0.1;
        m.lags[1][4][4] = 0.3;
        m.lags[0][4][5] = 0.2;
        m.lags[0][5][5] = 0.6;
        m.lags[0][5][0] = 0.25;
        m.c[1][3][0] = 0.4;
        m.c[1][4][2] = -0.6;
        m
    }

    /// Direct recursion on the structural form, independent of the companion.
    fn recursion_oracle(m: &StructuralModel, i: usize, delta: f64, h_max: usize) -> Vec<Vec<f64>> {
        let a0_inv = m.a0_matrix().try_inverse().unwrap();
        let mut dw: Vec<DVector<f64>> = Vec::new();
        for h in 0..=h_max {
            let mut r = DVector::zeros(m.dim());
            for l in 1..=m.lags.len().min(h) {
                r += m.lag_matrix(l - 1) * &dw[h - l];
            }
            if h < m.c.len() {
                let mut e = DVector::zeros(N_X);
                e[i] = delta;
                r += m.c_matrix(h) * e;
            }
            if h == 0 {
                r[i] += delta;
            }
            dw.push(&a0_inv * r);
        }
        dw.iter().map(|w| w.rows(N_X, m.n_y).iter().copied().collect()).collect()
    }

    #[test]
    fn companion_irf_matches_structural_recursion() {
        let m = linear_model();
        for i in 0..3 {
            let a = analytic_linear_irf(&m, i, 1.5, 20).unwrap();
            let b = recursion_oracle(&m, i, 1.5, 20);
            for (ra, rb) in a.iter().zip(&b) {
                for (x, y) in ra.iter().zip(rb) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn oracle_matches_analytic_for_linear_models() {
        let m = linear_model();
        let o = true_irf_oracle(&m, 0, 1.0, 12, opts(200, 4)).unwrap();
        let a = analytic_linear_irf(&m, 0, 1.0, 12).unwrap();
        for h in 0..=12 {
            for j in 0..2 {
                let tol = 3.0 * o.se[h][j] + 1e-10;
                assert!((o.mean[h][j] - a[h][j]).abs() <= tol, "h={h} j={j}");
            }
        }
    }

    #[test]
    fn absolute_value_impact_matches_normal_moment() {
        assert!((abs_shift_moment(1.0) - 0.36875).abs() < 1e-5);
        let gamma = 0.5;
        let mut m = StructuralModel::canonical(1, 0, 0, 1);
        m.c[0][3][0] = gamma;
        m.transform = ShockTransform::AbsValue;
        let o = true_irf_oracle(&m, 0, 1.0, 2, opts(100_000, 8)).unwrap();
        let truth = gamma * abs_shift_moment(1.0);
        assert!((o.mean[0][0] - truth).abs() < 3.0 * o.se[0][0], "{} vs {truth}", o.mean[0][0]);
        assert!(o.se[0][0] < 0.01);
        assert_eq!(o.mean[1][0], 0.0);
    }

    #[test]
    fn zero_delta_gives_zero_curve() {
        let mut m = linear_model();
        m.transform = ShockTransform::AbsValue;
        let o = true_irf_oracle(&m, 1, 0.0, 10, opts(50, 1)).unwrap();
        assert!(o.mean.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_in_delta_and_antisymmetric_for_odd_transforms() {
        let m = linear_model();
        let one = true_irf_oracle(&m, 2, 1.0, 8, opts(100, 2)).unwrap();
        let two = true_irf_oracle(&m, 2, 2.0, 8, opts(100, 2)).unwrap();
        let neg = true_irf_oracle(&m, 2, -1.0, 8, opts(100, 2)).unwrap();
        for h in 0..=8 {
            for j in 0..2 {
                assert!((two.mean[h][j] - 2.0 * one.mean[h][j]).abs() < 1e-9);
                assert!((neg.mean[h][j] + one.mean[h][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reproducible_and_rejects_bad_index() {
        let mut m = linear_model();
        m.transform = ShockTransform::AbsValue;
        let a = true_irf_oracle(&m, 0, 1.0, 5, opts(2500, 3)).unwrap();
        let b = true_irf_oracle(&m, 0, 1.0, 5, opts(2500, 3)).unwrap();
        assert_eq!(a, b);
        assert!(true_irf_oracle(&m, 3, 1.0, 5, opts(10, 3)).is_err());
        assert!(analytic_linear_irf(&m, 0, 1.0, 5).is_err());
    }

    #[test]
    fn csv_has_one_row_per_variable_and_horizon() {
        let o = true_irf_oracle(&linear_model(), 0, 1.0, 3, opts(10, 1)).unwrap();
        let mut buf = Vec::new();
        o.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 4);
        assert!(text.lines().nth(1).unwrap().starts_with("monetary,y1,0,"));
    }
}
