use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::calendar::{CalendarMonth, MonthWindow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    Monetary,
    Information,
    Spread,
}

impl ShockKind {
    pub const ALL: [ShockKind; 3] = [ShockKind::Monetary, ShockKind::Information, ShockKind::Spread];

    pub fn name(self) -> &'static str {
        match self {
            ShockKind::Monetary => "monetary",
            ShockKind::Information => "information",
            ShockKind::Spread => "spread",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ShockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShockKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShockKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse {
                what: "shock kind",
                input: s.to_string(),
            })
    }
}

/// Monthly values of one identified shock. Months without a policy
/// conference carry zero and are flagged as filled.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSeries {
    pub kind: ShockKind,
    start: CalendarMonth,
    values: Vec<f64>,
    conference: Vec<bool>,
}

impl ShockSeries {
    pub fn new(
        kind: ShockKind,
        start: CalendarMonth,
        values: Vec<f64>,
        conference: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != conference.len() {
            return Err(Error::Invalid("shock values and flags differ in length".into()));
        }
        if values.is_empty() {
            return Err(Error::Invalid("shock series is empty".into()));
        }
        Ok(Self {
            kind,
            start,
            values,
            conference,
        })
    }

    /// A series where every month is treated as a conference month.
    pub fn dense(kind: ShockKind, start: CalendarMonth, values: Vec<f64>) -> Result<Self> {
        let flags = vec![true; values.len()];
        Self::new(kind, start, values, flags)
    }

    pub fn start(&self) -> CalendarMonth {
        self.start
    }

    pub fn window(&self) -> MonthWindow {
        MonthWindow {
            start: self.start,
            end: self.start.offset(self.values.len() as i64 - 1),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn conference_flags(&self) -> &[bool] {
        &self.conference
    }

    pub fn get(&self, month: CalendarMonth) -> Option<f64> {
        let k = month.months_since(self.start);
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied()
    }

    pub fn conference_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.conference)
            .filter_map(|(v, &c)| c.then_some(*v))
            .collect()
    }

    /// Values over the months of `window` that this series covers.
    pub fn values_in(&self, window: &MonthWindow) -> Vec<f64> {
        match self.window().intersect(window) {
            None => Vec::new(),
            Some(w) => {
                let from = w.start.months_since(self.start) as usize;
                self.values[from..from + w.len()].to_vec()
            }
        }
    }

    /// Largest deviation of the conference-month mean from 0 and of the
    /// standard deviation from 1.
    pub fn standardization_gap(&self) -> f64 {
        let v = self.conference_values();
        if v.len() < 2 {
            return f64::INFINITY;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        mean.abs().max((var.sqrt() - 1.0).abs())
    }
}

/// The three identified shocks on a common monthly calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSet {
    series: [ShockSeries; 3],
}

impl ShockSet {
    pub fn new(series: [ShockSeries; 3]) -> Result<Self> {
        let w = series[0].window();
        for (s, kind) in series.iter().zip(ShockKind::ALL) {
            if s.kind != kind {
                return Err(Error::Invalid("shock series out of order".into()));
            }
            if s.window() != w {
                return Err(Error::Invalid("shock series windows differ".into()));
            }
        }
        Ok(Self { series })
    }

    /// Builds a set where every month is a conference month.
    pub fn from_dense(start: CalendarMonth, values: &[[f64; 3]]) -> Result<Self> {
        let series = ShockKind::ALL.map(|k| {
            ShockSeries::dense(k, start, values.iter().map(|v| v[k.index()]).collect())
        });
        let [a, b, c] = series;
        Self::new([a?, b?, c?])
    }

    pub fn get(&self, kind: ShockKind) -> &ShockSeries {
        &self.series[kind.index()]
    }

    pub fn window(&self) -> MonthWindow {
        self.series[0].window()
    }

    pub fn start(&self) -> CalendarMonth {
        self.series[0].start
    }

    pub fn len(&self) -> usize {
        self.series[0].values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, month: CalendarMonth) -> Option<[f64; 3]> {
        let a = self.series[0].get(month)?;
        Some([a, self.series[1].get(month)?, self.series[2].get(month)?])
    }

    pub fn iter(&self) -> impl Iterator<Item = &ShockSeries> {
        self.series.iter()
    }

    pub fn restrict(&self, window: &MonthWindow) -> Result<ShockSet> {
        let w = self
            .window()
            .intersect(window)
            .ok_or_else(|| Error::Invalid(format!("shock series do not overlap {window}")))?;
        let from = w.start.months_since(self.start()) as usize;
        let cut = |s: &ShockSeries| ShockSeries {
            kind: s.kind,
            start: w.start,
            values: s.values[from..from + w.len()].to_vec(),
            conference: s.conference[from..from + w.len()].to_vec(),
        };
        Ok(ShockSet {
            series: [cut(&self.series[0]), cut(&self.series[1]), cut(&self.series[2])],
        })
    }

    /// Writes `month,monetary,information,spread`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["month", "monetary", "information", "spread"])?;
        for (i, month) in self.window().months().enumerate() {
            let s = &self.series;
            wtr.write_record([
                month.to_string(),
                s[0].values[i].to_string(),
                s[1].values[i].to_string(),
                s[2].values[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a monthly shock file. The file carries no flags, so a month
    /// counts as a conference month for a shock when its value is non-zero.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            month: CalendarMonth,
            monetary: f64,
            information: f64,
            spread: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut start = None;
        let mut expected: Option<CalendarMonth> = None;
        let mut values = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            if let Some(e) = expected {
                if row.month != e {
                    return Err(Error::Gap {
                        country: "shocks".into(),
                        variable: "shock".into(),
                        month: e.to_string(),
                    });
                }
            }
            start.get_or_insert(row.month);
            expected = Some(row.month.offset(1));
            values.push([row.monetary, row.information, row.spread]);
        }
        let start = start.ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        let series = ShockKind::ALL.map(|k| {
            let v: Vec<f64> = values.iter().map(|r| r[k.index()]).collect();
            let flags = v.iter().map(|x| *x != 0.0).collect();
            ShockSeries::new(k, start, v, flags)
        });
        let [a, b, c] = series;
        Self::new([a?, b?, c?])
    }
}

/// One policy conference with its three shock values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockEvent {
    pub date: NaiveDate,
    pub values: [f64; 3],
}

pub type ReassignmentMap = BTreeMap<NaiveDate, CalendarMonth>;

/// Places conference-level shocks on the monthly calendar of `window`.
///
/// Each event lands in the month of its date unless `reassign` maps the
/// date to another month. Months without an event get zero and the
/// filled flag; events outside the window are dropped.
pub fn assign_shocks_to_months(
    events: &[ShockEvent],
    window: MonthWindow,
    reassign: &ReassignmentMap,
) -> Result<ShockSet> {
    let n = window.len();
    let mut values = vec![[0.0f64; 3]; n];
    let mut occupied = vec![false; n];
    for event in events {
        let month = reassign
            .get(&event.date)
            .copied()
            .unwrap_or_else(|| CalendarMonth::of_date(event.date));
        if !window.contains(month) {
            continue;
        }
        let i = month.months_since(window.start) as usize;
        if occupied[i] {
            return Err(Error::ShockConflict {
                month: month.to_string(),
            });
        }
        occupied[i] = true;
        values[i] = event.values;
    }
    let series = ShockKind::ALL.map(|k| {
        ShockSeries::new(
            k,
            window.start,
            values.iter().map(|v| v[k.index()]).collect(),
            occupied.clone(),
        )
    });
    let [a, b, c] = series;
    ShockSet::new([a?, b?, c?])
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| Error::Parse {
        what: "date",
        input: s.to_string(),
    })
}

/// Reads `date,monetary,information,spread` with `YYYY-MM-DD` dates.
pub fn read_shock_events<R: Read>(reader: R) -> Result<Vec<ShockEvent>> {
    #[derive(Deserialize)]
    struct Row {
        date: String,
        monetary: f64,
        information: f64,
        spread: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(ShockEvent {
                date: parse_date(&row.date)?,
                values: [row.monetary, row.information, row.spread],
            })
        })
        .collect()
}

/// Reads `date,assign_to_month`.
pub fn read_reassignment_map<R: Read>(reader: R) -> Result<ReassignmentMap> {
    #[derive(Deserialize)]
    struct Row {
        date: String,
        assign_to_month: CalendarMonth,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok((parse_date(&row.date)?, row.assign_to_month))
        })
        .collect()
}
