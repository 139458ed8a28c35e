use std::io::Read;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column order of the surprise file after the date.
pub const INSTRUMENTS: [&str; 8] = [
    "ois1y",
    "ois2y",
    "ois5y",
    "ois10y",
    "it2y_spread",
    "it5y_spread",
    "it10y_spread",
    "stoxx50",
];

/// Event-level high-frequency surprises, one row per policy conference.
#[derive(Debug, Clone, PartialEq)]
pub struct SurprisePanel {
    dates: Vec<NaiveDate>,
    data: DMatrix<f64>,
}

impl SurprisePanel {
    pub fn new(dates: Vec<NaiveDate>, data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() != INSTRUMENTS.len() {
            return Err(Error::Invalid(format!(
                "surprise panel needs {} columns, got {}",
                INSTRUMENTS.len(),
                data.ncols()
            )));
        }
        if data.nrows() != dates.len() {
            return Err(Error::Invalid("surprise rows and dates differ in length".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("surprise panel has missing or non-finite cells".into()));
        }
        Ok(Self { dates, data })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Reads `date,ois1y,...,stoxx50`; the header must match exactly.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let expected: Vec<&str> = std::iter::once("date").chain(INSTRUMENTS).collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Invalid(format!(
                "surprise header must be {}",
                expected.join(",")
            )));
        }
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|_| Error::Parse {
                what: "date",
                input: record[0].to_string(),
            })?;
            dates.push(date);
            for cell in record.iter().skip(1) {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    what: "surprise value",
                    input: cell.to_string(),
                })?;
                values.push(v);
            }
        }
        let data = DMatrix::from_row_slice(dates.len(), INSTRUMENTS.len(), &values);
        Self::new(dates, data)
    }
}
