use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::calendar::{CalendarMonth, MonthWindow};
use crate::error::{Error, Result};

/// Country-level outcome variables, in the fixed order used for lag vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reer,
    Unemployment,
    Cpi,
    IndustrialProduction,
    LongTermRate,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Reer,
        Outcome::Unemployment,
        Outcome::Cpi,
        Outcome::IndustrialProduction,
        Outcome::LongTermRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Reer => "reer",
            Outcome::Unemployment => "unemployment",
            Outcome::Cpi => "cpi",
            Outcome::IndustrialProduction => "industrial_production",
            Outcome::LongTermRate => "long_term_rate",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Parse {
                what: "outcome variable",
                input: s.to_string(),
            })
    }
}

/// Euro-area control series, common to every country.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EuroControl {
    Reer,
    Unemployment,
    Cpi,
    IndustrialProduction,
}

impl EuroControl {
    pub const ALL: [EuroControl; 4] = [
        EuroControl::Reer,
        EuroControl::Unemployment,
        EuroControl::Cpi,
        EuroControl::IndustrialProduction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EuroControl::Reer => "ea_reer",
            EuroControl::Unemployment => "ea_unemployment",
            EuroControl::Cpi => "ea_cpi",
            EuroControl::IndustrialProduction => "ea_industrial_production",
        }
    }
}

impl fmt::Display for EuroControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EuroControl {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EuroControl::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Parse {
                what: "euro-area control",
                input: s.to_string(),
            })
    }
}

/// Either kind of variable that can appear in the long-format panel file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VariableName {
    Outcome(Outcome),
    Euro(EuroControl),
}

impl FromStr for VariableName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse()
            .map(VariableName::Outcome)
            .or_else(|_| s.parse().map(VariableName::Euro))
            .map_err(|_| Error::Invalid(format!("unknown variable name {s:?}")))
    }
}

impl fmt::Display for VariableName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariableName::Outcome(o) => o.fmt(f),
            VariableName::Euro(e) => e.fmt(f),
        }
    }
}

/// A contiguous monthly series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    start: CalendarMonth,
    values: Vec<f64>,
}

impl Series {
    pub fn new(start: CalendarMonth, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("series must hold at least one value".into()));
        }
        Ok(Self { start, values })
    }

    pub fn start(&self) -> CalendarMonth {
        self.start
    }

    pub fn end(&self) -> CalendarMonth {
        self.start.offset(self.values.len() as i64 - 1)
    }

    pub fn window(&self) -> MonthWindow {
        MonthWindow {
            start: self.start,
            end: self.end(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, month: CalendarMonth) -> Option<f64> {
        let k = month.months_since(self.start);
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CalendarMonth, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.start.offset(i as i64), v))
    }

    /// Keeps only the months inside `window`; `None` when nothing remains.
    pub fn restrict(&self, window: &MonthWindow) -> Option<Series> {
        let w = self.window().intersect(window)?;
        let from = w.start.months_since(self.start) as usize;
        Some(Series {
            start: w.start,
            values: self.values[from..from + w.len()].to_vec(),
        })
    }

    pub fn with_values(&self, values: Vec<f64>) -> Series {
        debug_assert_eq!(values.len(), self.values.len());
        Series {
            start: self.start,
            values,
        }
    }
}

/// One row of the long-format panel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub country: String,
    pub month: CalendarMonth,
    pub variable: String,
    pub value: f64,
}

/// Country label written for euro-area control rows.
pub const EURO_AREA_LABEL: &str = "EA";

/// Unbalanced country-month panel plus the common euro-area controls.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PanelDataset {
    countries: BTreeMap<String, BTreeMap<Outcome, Series>>,
    euro: BTreeMap<EuroControl, Series>,
}

impl PanelDataset {
    pub fn new(
        countries: BTreeMap<String, BTreeMap<Outcome, Series>>,
        euro: BTreeMap<EuroControl, Series>,
    ) -> Self {
        Self { countries, euro }
    }

    /// Builds a dataset from long-format rows, rejecting duplicates and gaps.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = PanelRow>,
    {
        let mut grouped: BTreeMap<(String, VariableName), BTreeMap<CalendarMonth, f64>> =
            BTreeMap::new();
        for row in rows {
            let variable: VariableName = row.variable.parse()?;
            if !row.value.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite value for ({}, {}, {})",
                    row.country, row.month, row.variable
                )));
            }
            let country = match variable {
                VariableName::Outcome(_) => row.country.clone(),
                VariableName::Euro(_) => EURO_AREA_LABEL.to_string(),
            };
            let cell = grouped.entry((country, variable)).or_default();
            match cell.entry(row.month) {
                Entry::Occupied(_) => {
                    return Err(Error::DuplicateObservation {
                        country: row.country,
                        month: row.month.to_string(),
                        variable: row.variable,
                    })
                }
                Entry::Vacant(slot) => {
                    slot.insert(row.value);
                }
            }
        }

        let mut dataset = PanelDataset::default();
        for ((country, variable), observations) in grouped {
            let series = contiguous_series(&country, variable, &observations)?;
            match variable {
                VariableName::Outcome(o) => {
                    dataset.countries.entry(country).or_default().insert(o, series);
                }
                VariableName::Euro(e) => {
                    dataset.euro.insert(e, series);
                }
            }
        }
        Ok(dataset)
    }

    pub fn to_rows(&self) -> Vec<PanelRow> {
        let mut rows = Vec::new();
        for (country, vars) in &self.countries {
            for (outcome, series) in vars {
                rows.extend(series.iter().map(|(month, value)| PanelRow {
                    country: country.clone(),
                    month,
                    variable: outcome.name().to_string(),
                    value,
                }));
            }
        }
        for (control, series) in &self.euro {
            rows.extend(series.iter().map(|(month, value)| PanelRow {
                country: EURO_AREA_LABEL.to_string(),
                month,
                variable: control.name().to_string(),
                value,
            }));
        }
        rows
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize::<PanelRow>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for row in self.to_rows() {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.countries.keys().map(String::as_str)
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn series(&self, country: &str, outcome: Outcome) -> Option<&Series> {
        self.countries.get(country)?.get(&outcome)
    }

    pub fn euro(&self, control: EuroControl) -> Option<&Series> {
        self.euro.get(&control)
    }

    pub fn value(&self, country: &str, outcome: Outcome, month: CalendarMonth) -> Option<f64> {
        self.series(country, outcome)?.get(month)
    }

    pub fn euro_value(&self, control: EuroControl, month: CalendarMonth) -> Option<f64> {
        self.euro.get(&control)?.get(month)
    }

    /// Months over which all five outcomes of `country` are observed.
    pub fn country_window(&self, country: &str) -> Option<MonthWindow> {
        let vars = self.countries.get(country)?;
        if vars.len() != Outcome::ALL.len() {
            return None;
        }
        let mut it = vars.values().map(Series::window);
        let first = it.next()?;
        it.try_fold(first, |acc, w| acc.intersect(&w))
    }

    /// Span from the earliest to the latest observed month of any series.
    pub fn window(&self) -> Option<MonthWindow> {
        let all = self
            .countries
            .values()
            .flat_map(|v| v.values())
            .chain(self.euro.values());
        let mut span: Option<MonthWindow> = None;
        for s in all {
            let w = s.window();
            span = Some(match span {
                None => w,
                Some(acc) => MonthWindow {
                    start: acc.start.min(w.start),
                    end: acc.end.max(w.end),
                },
            });
        }
        span
    }

    /// Checks the invariants the estimation stages rely on: every country
    /// carries all five outcomes with a common overlap, and the euro controls
    /// cover the union of the country windows.
    pub fn check_complete(&self) -> Result<()> {
        if self.countries.is_empty() {
            return Err(Error::IncompletePanel("no countries".into()));
        }
        let mut union: Option<MonthWindow> = None;
        for (country, vars) in &self.countries {
            if let Some(missing) = Outcome::ALL.iter().find(|o| !vars.contains_key(o)) {
                return Err(Error::IncompletePanel(format!(
                    "country {country} lacks variable {missing}"
                )));
            }
            let w = self.country_window(country).ok_or_else(|| {
                Error::IncompletePanel(format!("country {country} has no common window"))
            })?;
            union = Some(match union {
                None => w,
                Some(u) => MonthWindow {
                    start: u.start.min(w.start),
                    end: u.end.max(w.end),
                },
            });
        }
        let union = union.expect("at least one country");
        for control in EuroControl::ALL {
            let series = self.euro.get(&control).ok_or_else(|| {
                Error::IncompletePanel(format!("euro-area control {control} is missing"))
            })?;
            let w = series.window();
            if w.start > union.start || w.end < union.end {
                return Err(Error::IncompletePanel(format!(
                    "euro-area control {control} covers {w}, countries need {union}"
                )));
            }
        }
        Ok(())
    }

    /// Keeps only observations inside `window`; series left empty are dropped,
    /// and countries left without any series are removed.
    pub fn restrict(&self, window: &MonthWindow) -> PanelDataset {
        let countries = self
            .countries
            .iter()
            .filter_map(|(c, vars)| {
                let kept: BTreeMap<_, _> = vars
                    .iter()
                    .filter_map(|(o, s)| s.restrict(window).map(|s| (*o, s)))
                    .collect();
                (!kept.is_empty()).then(|| (c.clone(), kept))
            })
            .collect();
        let euro = self
            .euro
            .iter()
            .filter_map(|(e, s)| s.restrict(window).map(|s| (*e, s)))
            .collect();
        PanelDataset { countries, euro }
    }

    /// Replaces every series of `outcome` with `f(series)`.
    pub fn map_outcome<F>(&mut self, outcome: Outcome, mut f: F) -> Result<()>
    where
        F: FnMut(&Series) -> Result<Series>,
    {
        for vars in self.countries.values_mut() {
            if let Some(s) = vars.get_mut(&outcome) {
                *s = f(s)?;
            }
        }
        Ok(())
    }

    pub fn map_euro<F>(&mut self, control: EuroControl, mut f: F) -> Result<()>
    where
        F: FnMut(&Series) -> Result<Series>,
    {
        if let Some(s) = self.euro.get_mut(&control) {
            *s = f(s)?;
        }
        Ok(())
    }
}

fn contiguous_series(
    country: &str,
    variable: VariableName,
    observations: &BTreeMap<CalendarMonth, f64>,
) -> Result<Series> {
    let (&start, _) = observations.iter().next().expect("non-empty group");
    let mut values = Vec::with_capacity(observations.len());
    let mut expected = start;
    for (&month, &value) in observations {
        if month != expected {
            return Err(Error::Gap {
                country: country.to_string(),
                variable: variable.to_string(),
                month: expected.to_string(),
            });
        }
        values.push(value);
        expected = expected.offset(1);
    }
    Series::new(start, values)
}
