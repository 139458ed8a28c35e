use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::wald::{significance_band, Band, WaldResult};
use crate::error::{Error, Result};
use crate::panel::{Outcome, ShockKind};
use crate::svg::SvgDoc;

/// The six families of hypotheses reported as significance tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFamily {
    /// `Γ = 0` with the absolute-value transform.
    SignGamma,
    /// `Γ = 0` with the threshold transform.
    SizeGamma,
    /// Plug-in response, absolute-value transform.
    SignPlugin,
    /// Plug-in response, threshold transform.
    SizePlugin,
    ConditionalPos,
    ConditionalNeg,
}

impl TestFamily {
    pub const ALL: [TestFamily; 6] = [
        TestFamily::SignGamma,
        TestFamily::SizeGamma,
        TestFamily::SignPlugin,
        TestFamily::SizePlugin,
        TestFamily::ConditionalPos,
        TestFamily::ConditionalNeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFamily::SignGamma => "sign_gamma",
            TestFamily::SizeGamma => "size_gamma",
            TestFamily::SignPlugin => "sign_plugin",
            TestFamily::SizePlugin => "size_plugin",
            TestFamily::ConditionalPos => "conditional_pos",
            TestFamily::ConditionalNeg => "conditional_neg",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TestFamily::SignGamma => "Significance of the non-linear component, sign specification",
            TestFamily::SizeGamma => "Significance of the non-linear component, size specification",
            TestFamily::SignPlugin => "Significance of the plug-in IRF, sign specification",
            TestFamily::SizePlugin => "Significance of the plug-in IRF, size specification",
            TestFamily::ConditionalPos => "Significance of the conditional IRF, positive shock",
            TestFamily::ConditionalNeg => "Significance of the conditional IRF, negative shock",
        }
    }
}

impl fmt::Display for TestFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TestFamily::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse {
                what: "test family",
                input: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub outcome: Outcome,
    pub shock: ShockKind,
    pub h: usize,
    pub w: f64,
    pub p: f64,
    pub band: Band,
}

impl TableCell {
    pub fn new(outcome: Outcome, shock: ShockKind, h: usize, result: WaldResult) -> Self {
        Self {
            outcome,
            shock,
            h,
            w: result.w,
            p: result.p_value,
            band: significance_band(result.p_value),
        }
    }
}

/// Complete outcome x shock x horizon grid of test results.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceTable {
    pub family: TestFamily,
    pub max_horizon: usize,
    cells: BTreeMap<(Outcome, ShockKind, usize), TableCell>,
}

pub const TABLE_HEADER: [&str; 6] = ["outcome", "shock", "h", "W", "p", "band"];

impl SignificanceTable {
    /// Requires a cell for every outcome, shock and `h` in `0..=max_horizon`.
    pub fn new(family: TestFamily, max_horizon: usize, cells: Vec<TableCell>) -> Result<Self> {
        let map: BTreeMap<_, _> = cells.into_iter().map(|c| ((c.outcome, c.shock, c.h), c)).collect();
        for o in Outcome::ALL {
            for s in ShockKind::ALL {
                for h in 0..=max_horizon {
                    if !map.contains_key(&(o, s, h)) {
                        return Err(Error::MissingCell {
                            outcome: o.name().into(),
                            shock: s.name().into(),
                            horizon: h,
                        });
                    }
                }
            }
        }
        Ok(Self {
            family,
            max_horizon,
            cells: map,
        })
    }

    pub fn cell(&self, outcome: Outcome, shock: ShockKind, h: usize) -> Option<&TableCell> {
        self.cells.get(&(outcome, shock, h))
    }

    pub fn cells(&self) -> impl Iterator<Item = &TableCell> {
        self.cells.values()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TABLE_HEADER)?;
        for c in self.cells.values() {
            w.write_record([
                c.outcome.name().to_string(),
                c.shock.name().to_string(),
                c.h.to_string(),
                c.w.to_string(),
                c.p.to_string(),
                c.band.name().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(family: TestFamily, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        if rdr.headers()?.iter().collect::<Vec<_>>() != TABLE_HEADER {
            return Err(Error::Invalid(format!("table header must be {}", TABLE_HEADER.join(","))));
        }
        let mut cells = Vec::new();
        let mut max_h = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::Parse {
                    what: "table value",
                    input: rec[i].to_string(),
                })
            };
            let h: usize = rec[2].parse().map_err(|_| Error::Parse {
                what: "horizon",
                input: rec[2].to_string(),
            })?;
            max_h = max_h.max(h);
            cells.push(TableCell {
                outcome: rec[0].parse()?,
                shock: rec[1].parse()?,
                h,
                w: num(3)?,
                p: num(4)?,
                band: rec[5].parse()?,
            });
        }
        Self::new(family, max_h, cells)
    }

    /// Coloured grid: white, yellow and green for the three bands, split
    /// into two horizon panels like a printed table.
    pub fn to_svg(&self) -> String {
        let per_panel = self.max_horizon.div_ceil(2) + usize::from(self.max_horizon % 2 == 0);
        let panels: Vec<Vec<usize>> = (0..=self.max_horizon)
            .collect::<Vec<_>>()
            .chunks(per_panel.max(1))
            .map(|c| c.to_vec())
            .collect();
        let (cell_w, cell_h, label_w, top) = (26.0, 16.0, 150.0, 40.0);
        let rows = Outcome::ALL.len() * ShockKind::ALL.len();
        let panel_h = cell_h * (rows + 1) as f64 + 20.0;
        let width = label_w + cell_w * per_panel as f64 + 20.0;
        let height = top + panel_h * panels.len() as f64;
        let mut doc = SvgDoc::new(width, height);
        doc.text(10.0, 20.0, 12.0, "start", self.family.title());
        for (pi, hs) in panels.iter().enumerate() {
            let y0 = top + pi as f64 * panel_h;
            doc.text(label_w - 6.0, y0 + cell_h - 4.0, 10.0, "end", "h=");
            for (ci, h) in hs.iter().enumerate() {
                let x = label_w + ci as f64 * cell_w;
                doc.text(x + cell_w / 2.0, y0 + cell_h - 4.0, 10.0, "middle", &h.to_string());
            }
            for (oi, o) in Outcome::ALL.iter().enumerate() {
                for (si, s) in ShockKind::ALL.iter().enumerate() {
                    let row = oi * 3 + si;
                    let y = y0 + cell_h * (row + 1) as f64;
                    if si == 0 {
                        doc.text(6.0, y + cell_h - 4.0, 10.0, "start", outcome_label(*o));
                    }
                    doc.text(label_w - 6.0, y + cell_h - 4.0, 10.0, "end", shock_label(*s));
                    for (ci, h) in hs.iter().enumerate() {
                        let band = self.cells[&(*o, *s, *h)].band;
                        let x = label_w + ci as f64 * cell_w;
                        doc.rect(x, y, cell_w, cell_h, band_colour(band), "#888888");
                    }
                }
            }
        }
        doc.finish()
    }
}

pub fn band_colour(band: Band) -> &'static str {
    match band {
        Band::None => "#ffffff",
        Band::Weak => "#ffff80",
        Band::Strong => "#80c080",
    }
}

pub fn outcome_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Reer => "REER",
        Outcome::Unemployment => "Unemp.",
        Outcome::Cpi => "CPI",
        Outcome::IndustrialProduction => "Industry",
        Outcome::LongTermRate => "LT Rate",
    }
}

pub fn shock_label(s: ShockKind) -> &'static str {
    match s {
        ShockKind::Monetary => "Monetary",
        ShockKind::Information => "Information",
        ShockKind::Spread => "Spread",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(max_h: usize, p: impl Fn(Outcome, ShockKind, usize) -> f64) -> Vec<TableCell> {
        let mut cells = Vec::new();
        for o in Outcome::ALL {
            for s in ShockKind::ALL {
                for h in 0..=max_h {
                    let pv = p(o, s, h);
                    cells.push(TableCell::new(o, s, h, WaldResult { w: 0.0, df: 1, p_value: pv }));
                }
            }
        }
        cells
    }

    #[test]
    fn all_null_table_is_white() {
        let t = SignificanceTable::new(TestFamily::SignGamma, 25, full(25, |_, _, _| 1.0)).unwrap();
        assert!(t.cells().all(|c| c.band == Band::None));
        let svg = t.to_svg();
        assert!(!svg.contains(band_colour(Band::Strong)));
        assert_eq!(svg.matches(band_colour(Band::None)).count(), 15 * 26);
    }

    #[test]
    fn single_green_cell_is_localized() {
        let cells = full(25, |o, s, h| {
            if (o, s, h) == (Outcome::Cpi, ShockKind::Spread, 7) {
                0.03
            } else {
                0.9
            }
        });
        let t = SignificanceTable::new(TestFamily::SizeGamma, 25, cells).unwrap();
        let green: Vec<_> = t.cells().filter(|c| c.band == Band::Strong).collect();
        assert_eq!(green.len(), 1);
        assert_eq!((green[0].outcome, green[0].shock, green[0].h), (Outcome::Cpi, ShockKind::Spread, 7));
        assert_eq!(t.to_svg().matches(band_colour(Band::Strong)).count(), 1);
    }

    #[test]
    fn missing_cell_is_named() {
        let mut cells = full(3, |_, _, _| 0.5);
        cells.retain(|c| !(c.outcome == Outcome::LongTermRate && c.shock == ShockKind::Information && c.h == 2));
        match SignificanceTable::new(TestFamily::ConditionalNeg, 3, cells) {
            Err(Error::MissingCell { outcome, shock, horizon }) => {
                assert_eq!((outcome.as_str(), shock.as_str(), horizon), ("long_term_rate", "information", 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = SignificanceTable::new(TestFamily::SignPlugin, 4, full(4, |_, s, h| 0.02 * (h + s.index()) as f64)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"outcome,shock,h,W,p,band\n"));
        let back = SignificanceTable::read_csv(TestFamily::SignPlugin, buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }
}
