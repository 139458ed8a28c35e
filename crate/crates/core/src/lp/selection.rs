use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{build_design, DesignOptions, LagOrder, LpSpec, TrendSpec};
use super::frame::PanelFrame;
use crate::error::{Error, Result};
use crate::panel::Outcome;

/// Candidate values for each of p, q and r.
pub const SELECTION_LAGS: [usize; 5] = [2, 3, 4, 5, 6];
/// Every grid point is fitted on the sample that supports this many lags.
pub const COMMON_SAMPLE_LAG: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Aic,
    Bic,
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            _ => Err(Error::Parse {
                what: "criterion",
                input: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        })
    }
}

/// What the information criterion counts as model size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `p + q + r + I1 + I1 I2 + 5`, one unit per lag block.
    #[default]
    Paper,
    /// Number of estimated coefficients.
    Coefficients,
}

impl FromStr for Penalty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Penalty::Paper),
            "coefficients" => Ok(Penalty::Coefficients),
            _ => Err(Error::Parse {
                what: "penalty",
                input: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub lags: LagOrder,
    pub trend: TrendSpec,
}

impl GridPoint {
    fn key(&self) -> (usize, usize, usize, bool, bool) {
        (self.lags.p, self.lags.q, self.lags.r, self.trend.i1, self.trend.i2)
    }
}

/// All of A^3 x B^2 in lexicographic (p, q, r, I1, I2) order.
pub fn selection_grid() -> Vec<GridPoint> {
    let mut grid = Vec::with_capacity(500);
    for p in SELECTION_LAGS {
        for q in SELECTION_LAGS {
            for r in SELECTION_LAGS {
                for i1 in [false, true] {
                    for i2 in [false, true] {
                        grid.push(GridPoint {
                            lags: LagOrder::new(p, q, r),
                            trend: TrendSpec { i1, i2 },
                        });
                    }
                }
            }
        }
    }
    grid
}

/// Residual sum of squares of one linear specification on the common sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFit {
    pub point: GridPoint,
    pub ssr: f64,
    pub n_obs: usize,
    pub n_params: usize,
}

impl GridFit {
    pub fn penalty_count(&self, penalty: Penalty) -> f64 {
        match penalty {
            Penalty::Paper => {
                let LagOrder { p, q, r } = self.point.lags;
                (p + q + r + self.point.trend.n_terms() + 5) as f64
            }
            Penalty::Coefficients => self.n_params as f64,
        }
    }

    /// `n ln(SSR / n) + c k`, with `c = 2` (AIC) or `ln n` (BIC).
    pub fn criterion(&self, criterion: Criterion, penalty: Penalty) -> f64 {
        let n = self.n_obs as f64;
        let c = match criterion {
            Criterion::Aic => 2.0,
            Criterion::Bic => n.ln(),
        };
        n * (self.ssr / n).ln() + c * self.penalty_count(penalty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub horizon: usize,
    pub point: GridPoint,
    pub value: f64,
    pub n_obs: usize,
}

/// Fits every grid point for `outcome` at horizon `h`.
///
/// Country intercepts are partialled out once; each grid point then needs
/// only a Cholesky solve on a sub-block of the Gram matrix of the largest
/// design.
pub fn grid_fits(frame: &PanelFrame, outcome: Outcome, h: usize) -> Result<Vec<GridFit>> {
    let top = COMMON_SAMPLE_LAG;
    let full = LpSpec::linear(outcome, h, LagOrder::new(top, top, top), TrendSpec::QUADRATIC);
    let design = build_design(frame, &full, DesignOptions { sample_lag: top })?;
    let n = design.n_obs();
    let n_countries = design.countries.len();
    let k = design.n_params() - n_countries;

    let mut x = design.x.columns(0, k).into_owned();
    let mut y = design.y.clone();
    demean_within(&mut x, &mut y, &design.row_country, n_countries);
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 {
            return Err(Error::InfeasibleGrid(format!(
                "column {} has no within-country variation",
                design.columns[j]
            )));
        }
        x.column_mut(j).unscale_mut(norm);
    }
    let gram = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let yy = y.norm_squared();

    let grid = selection_grid();
    grid.par_iter()
        .map(|point| {
            let idx = column_subset(point);
            let m = idx.len();
            let g = DMatrix::from_fn(m, m, |a, b| gram[(idx[a], idx[b])]);
            let c = DVector::from_fn(m, |a, _| xty[idx[a]]);
            let chol = g.cholesky().ok_or_else(|| {
                Error::InfeasibleGrid(format!("{point:?} is rank deficient on the common sample"))
            })?;
            let z = chol
                .l_dirty()
                .solve_lower_triangular(&c)
                .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
            Ok(GridFit {
                point: *point,
                ssr: (yy - z.norm_squared()).max(0.0),
                n_obs: n,
                n_params: m + n_countries,
            })
        })
        .collect()
}

/// Positions of a grid point's columns within the largest design.
fn column_subset(point: &GridPoint) -> Vec<usize> {
    let top = COMMON_SAMPLE_LAG;
    let LagOrder { p, q, r } = point.lags;
    let y_base = 3 + 3 * top;
    let z_base = y_base + 5 * top;
    let trend_base = z_base + 4 * top;
    let mut idx: Vec<usize> = (0..3 + 3 * p).collect();
    idx.extend(y_base..y_base + 5 * q);
    idx.extend(z_base..z_base + 4 * r);
    if point.trend.linear() {
        idx.push(trend_base);
    }
    if point.trend.quadratic() {
        idx.push(trend_base + 1);
    }
    idx
}

fn demean_within(x: &mut DMatrix<f64>, y: &mut DVector<f64>, groups: &[usize], n_groups: usize) {
    let mut counts = vec![0usize; n_groups];
    for &g in groups {
        counts[g] += 1;
    }
    let demean = |col: &mut [f64]| {
        let mut sums = vec![0.0; n_groups];
        for (v, &g) in col.iter().zip(groups) {
            sums[g] += v;
        }
        for (v, &g) in col.iter_mut().zip(groups) {
            *v -= sums[g] / counts[g] as f64;
        }
    };
    for mut col in x.column_iter_mut() {
        demean(col.as_mut_slice());
    }
    demean(y.as_mut_slice());
}

/// Minimizer over the grid; ties go to the lexicographically smallest point.
pub fn select_from(fits: &[GridFit], horizon: usize, criterion: Criterion, penalty: Penalty) -> Result<Selection> {
    let mut best: Option<Selection> = None;
    let mut sorted: Vec<&GridFit> = fits.iter().collect();
    sorted.sort_by_key(|f| f.point.key());
    for f in sorted {
        let value = f.criterion(criterion, penalty);
        if !value.is_finite() {
            continue;
        }
        if best.is_none_or(|b| value < b.value) {
            best = Some(Selection {
                horizon,
                point: f.point,
                value,
                n_obs: f.n_obs,
            });
        }
    }
    best.ok_or_else(|| Error::InfeasibleGrid("no grid point has a finite criterion".into()))
}

pub fn select_model(
    frame: &PanelFrame,
    outcome: Outcome,
    h: usize,
    criterion: Criterion,
    penalty: Penalty,
) -> Result<Selection> {
    select_from(&grid_fits(frame, outcome, h)?, h, criterion, penalty)
}

/// Per-horizon selections for one outcome, horizons `0..=max_horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTable {
    pub outcome: Outcome,
    pub selections: Vec<Selection>,
}

impl SelectionTable {
    pub fn compute(
        frame: &PanelFrame,
        outcome: Outcome,
        max_horizon: usize,
        criterion: Criterion,
        penalty: Penalty,
    ) -> Result<Self> {
        let selections = (0..=max_horizon)
            .map(|h| select_model(frame, outcome, h, criterion, penalty))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { outcome, selections })
    }

    /// Choice for horizon `h`; horizons past the table reuse the last column.
    pub fn get(&self, h: usize) -> GridPoint {
        let i = h.min(self.selections.len() - 1);
        self.selections[i].point
    }

    /// Rows `q, p, r, T`, one column per horizon.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["h".to_string()];
        header.extend(self.selections.iter().map(|s| s.horizon.to_string()));
        w.write_record(&header)?;
        let rows: [(&str, fn(&GridPoint) -> String); 4] = [
            ("q", |g| g.lags.q.to_string()),
            ("p", |g| g.lags.p.to_string()),
            ("r", |g| g.lags.r.to_string()),
            ("T", |g| g.trend.label().to_string()),
        ];
        for (name, cell) in rows {
            let mut record = vec![name.to_string()];
            record.extend(self.selections.iter().map(|s| cell(&s.point)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`SelectionTable::write_csv`]. Criterion
    /// values are not stored and come back as NaN.
    pub fn read_csv<R: Read>(outcome: Outcome, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
        if records.len() != 5 || &records[0][0] != "h" {
            return Err(Error::Invalid("selection table needs a header and rows q, p, r, T".into()));
        }
        let parse = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                what: "selection entry",
                input: s.to_string(),
            })
        };
        let mut selections = Vec::new();
        for col in 1..records[0].len() {
            let q = parse(&records[1][col])?;
            let p = parse(&records[2][col])?;
            let r = parse(&records[3][col])?;
            let trend: TrendSpec = records[4][col].parse()?;
            selections.push(Selection {
                horizon: parse(&records[0][col])?,
                point: GridPoint {
                    lags: LagOrder::new(p, q, r),
                    trend,
                },
                value: f64::NAN,
                n_obs: 0,
            });
        }
        if selections.is_empty() {
            return Err(Error::Invalid("selection table has no horizons".into()));
        }
        Ok(Self { outcome, selections })
    }
}
