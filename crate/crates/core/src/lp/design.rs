use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::frame::PanelFrame;
use crate::error::{Error, Result};
use crate::irf::ShockTransform;
use crate::panel::{EuroControl, Outcome, ShockKind};

/// Lags of the shocks (`p`), of the country outcome vector (`q`) and of the
/// euro-area controls (`r`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LagOrder {
    pub p: usize,
    pub q: usize,
    pub r: usize,
}

impl LagOrder {
    pub fn new(p: usize, q: usize, r: usize) -> Self {
        Self { p, q, r }
    }

    pub fn max(&self) -> usize {
        self.p.max(self.q).max(self.r)
    }
}

/// Deterministic trend terms: `I1 t + I1 I2 t^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrendSpec {
    pub i1: bool,
    pub i2: bool,
}

impl TrendSpec {
    pub const NONE: TrendSpec = TrendSpec { i1: false, i2: false };
    pub const LINEAR: TrendSpec = TrendSpec { i1: true, i2: false };
    pub const QUADRATIC: TrendSpec = TrendSpec { i1: true, i2: true };

    pub fn linear(&self) -> bool {
        self.i1
    }

    pub fn quadratic(&self) -> bool {
        self.i1 && self.i2
    }

    /// Number of trend columns actually present.
    pub fn n_terms(&self) -> usize {
        self.linear() as usize + self.quadratic() as usize
    }

    /// `"0"`, `"t"` or `"t2"`.
    pub fn label(&self) -> &'static str {
        match (self.linear(), self.quadratic()) {
            (false, _) => "0",
            (true, false) => "t",
            (true, true) => "t2",
        }
    }
}

impl FromStr for TrendSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(TrendSpec::NONE),
            "t" => Ok(TrendSpec::LINEAR),
            "t2" => Ok(TrendSpec::QUADRATIC),
            _ => Err(Error::Parse {
                what: "trend label",
                input: s.to_string(),
            }),
        }
    }
}

/// One local-projection regression: outcome, horizon, lags, trend and the
/// optional non-linear shock terms (one transform per shock).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpec {
    pub outcome: Outcome,
    pub horizon: usize,
    pub lags: LagOrder,
    pub trend: TrendSpec,
    pub transforms: Option<[ShockTransform; 3]>,
}

impl LpSpec {
    pub fn linear(outcome: Outcome, horizon: usize, lags: LagOrder, trend: TrendSpec) -> Self {
        Self {
            outcome,
            horizon,
            lags,
            trend,
            transforms: None,
        }
    }

    pub fn with_transforms(mut self, transforms: [ShockTransform; 3]) -> Self {
        self.transforms = Some(transforms);
        self
    }

    pub fn is_linear(&self) -> bool {
        self.transforms.is_none()
    }
}

/// How residual scores are grouped in the cluster-robust covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBy {
    #[default]
    Country,
    Month,
}

impl FromStr for ClusterBy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "country" => Ok(ClusterBy::Country),
            "month" => Ok(ClusterBy::Month),
            _ => Err(Error::Parse {
                what: "cluster dimension",
                input: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for ClusterBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterBy::Country => "country",
            ClusterBy::Month => "month",
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DesignOptions {
    /// Rows must also have every lag up to this order available, so that
    /// specifications with different lags share one sample.
    pub sample_lag: usize,
}

/// Stacked regression over eligible (country, month) rows.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub columns: Vec<String>,
    /// Index into `countries` for each row.
    pub row_country: Vec<usize>,
    /// Frame month index for each row.
    pub row_time: Vec<usize>,
    pub countries: Vec<String>,
    pub has_transform: bool,
}

impl Design {
    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    /// Dense cluster labels `0..G` for each row.
    pub fn clusters(&self, by: ClusterBy) -> Vec<usize> {
        match by {
            ClusterBy::Country => self.row_country.clone(),
            ClusterBy::Month => {
                let mut times = self.row_time.clone();
                times.sort_unstable();
                times.dedup();
                self.row_time
                    .iter()
                    .map(|t| times.binary_search(t).unwrap())
                    .collect()
            }
        }
    }
}

pub fn column_names(countries: &[String], spec: &LpSpec) -> Vec<String> {
    let LagOrder { p, q, r } = spec.lags;
    let mut names = Vec::new();
    let shock_block = |names: &mut Vec<String>, prefix: &str, lag: usize| {
        for s in ShockKind::ALL {
            names.push(format!("{prefix}[{s},{}]", lag_label(lag)));
        }
    };
    shock_block(&mut names, "x", 0);
    if spec.transforms.is_some() {
        shock_block(&mut names, "f", 0);
    }
    for i in 1..=p {
        shock_block(&mut names, "x", i);
    }
    if spec.transforms.is_some() {
        for i in 1..=p {
            shock_block(&mut names, "f", i);
        }
    }
    for i in 1..=q {
        for o in Outcome::ALL {
            names.push(format!("y[{o},{}]", lag_label(i)));
        }
    }
    for i in 1..=r {
        for e in EuroControl::ALL {
            names.push(format!("z[{e},{}]", lag_label(i)));
        }
    }
    if spec.trend.linear() {
        names.push("trend".into());
    }
    if spec.trend.quadratic() {
        names.push("trend2".into());
    }
    for c in countries {
        names.push(format!("alpha[{c}]"));
    }
    names
}

fn lag_label(i: usize) -> String {
    if i == 0 {
        "t".into()
    } else {
        format!("t-{i}")
    }
}

/// Builds the pooled design for `spec`, keeping every (country, month)
/// where all regressors and the `h`-step lead exist.
pub fn build_design(frame: &PanelFrame, spec: &LpSpec, opts: DesignOptions) -> Result<Design> {
    let LagOrder { p, q, r } = spec.lags;
    let s = opts.sample_lag;
    let (px, qy, rz) = (p.max(s), q.max(s), r.max(s));
    let first = px.max(qy).max(rz);
    let h = spec.horizon;
    let n_countries = frame.countries().len();

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut row_country = Vec::new();
    let mut row_time = Vec::new();
    let mut row = Vec::new();
    for k in 0..n_countries {
        for t in first..frame.len().saturating_sub(h) {
            let available = (0..=px).all(|i| {
                ShockKind::ALL
                    .iter()
                    .all(|&sk| frame.shock(sk, t - i).is_finite())
            }) && (1..=qy).all(|i| {
                Outcome::ALL
                    .iter()
                    .all(|&o| frame.outcome(k, o, t - i).is_finite())
            }) && (1..=rz).all(|i| {
                EuroControl::ALL
                    .iter()
                    .all(|&e| frame.control(e, t - i).is_finite())
            }) && frame.outcome(k, spec.outcome, t + h).is_finite();
            if !available {
                continue;
            }
            row.clear();
            push_shock_row(&mut row, frame, spec, t);
            for i in 1..=q {
                row.extend(Outcome::ALL.iter().map(|&o| frame.outcome(k, o, t - i)));
            }
            for i in 1..=r {
                row.extend(EuroControl::ALL.iter().map(|&e| frame.control(e, t - i)));
            }
            let tt = (t + 1) as f64;
            if spec.trend.linear() {
                row.push(tt);
            }
            if spec.trend.quadratic() {
                row.push(tt * tt);
            }
            data.extend_from_slice(&row);
            y.push(frame.outcome(k, spec.outcome, t + h));
            row_country.push(k);
            row_time.push(t);
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyDesign);
    }

    // Intercepts only for countries that contribute rows.
    let mut present: Vec<usize> = row_country.clone();
    present.dedup();
    let countries: Vec<String> = present.iter().map(|&k| frame.countries()[k].clone()).collect();
    let remap: Vec<Option<usize>> = (0..n_countries)
        .map(|k| present.iter().position(|&c| c == k))
        .collect();
    let row_country: Vec<usize> = row_country.iter().map(|&k| remap[k].unwrap()).collect();

    let n = y.len();
    let k_core = row.len();
    let k = k_core + countries.len();
    let x = DMatrix::from_fn(n, k, |i, j| {
        if j < k_core {
            data[i * k_core + j]
        } else {
            (row_country[i] == j - k_core) as u8 as f64
        }
    });
    Ok(Design {
        x,
        y: DVector::from_vec(y),
        columns: column_names(&countries, spec),
        row_country,
        row_time,
        countries,
        has_transform: spec.transforms.is_some(),
    })
}

fn push_shock_row(row: &mut Vec<f64>, frame: &PanelFrame, spec: &LpSpec, t: usize) {
    let level = |row: &mut Vec<f64>, lag: usize| {
        row.extend(ShockKind::ALL.iter().map(|&s| frame.shock(s, t - lag)));
    };
    let transformed = |row: &mut Vec<f64>, lag: usize, f: &[ShockTransform; 3]| {
        row.extend(
            ShockKind::ALL
                .iter()
                .map(|&s| f[s.index()].eval(frame.shock(s, t - lag))),
        );
    };
    level(row, 0);
    if let Some(f) = &spec.transforms {
        transformed(row, 0, f);
    }
    for i in 1..=spec.lags.p {
        level(row, i);
    }
    if let Some(f) = &spec.transforms {
        for i in 1..=spec.lags.p {
            transformed(row, i, f);
        }
    }
}
