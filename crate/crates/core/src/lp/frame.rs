use crate::error::{Error, Result};
use crate::panel::{CalendarMonth, EuroControl, Outcome, PanelDataset, ShockKind, ShockSet};

/// Panel and shocks aligned on one monthly axis, missing cells as NaN.
#[derive(Debug, Clone)]
pub struct PanelFrame {
    start: CalendarMonth,
    len: usize,
    countries: Vec<String>,
    /// `outcomes[k][j][t]`
    outcomes: Vec<[Vec<f64>; 5]>,
    controls: [Vec<f64>; 4],
    shocks: [Vec<f64>; 3],
}

impl PanelFrame {
    pub fn new(panel: &PanelDataset, shocks: &ShockSet) -> Result<Self> {
        if panel.n_countries() == 0 {
            return Err(Error::IncompletePanel("no countries".into()));
        }
        let mut start = shocks.start();
        let mut end = shocks.window().end;
        for c in panel.countries() {
            for o in Outcome::ALL {
                if let Some(s) = panel.series(c, o) {
                    start = start.min(s.start());
                    end = end.max(s.end());
                }
            }
        }
        for e in EuroControl::ALL {
            if let Some(s) = panel.euro(e) {
                start = start.min(s.start());
                end = end.max(s.end());
            }
        }
        let len = (end.months_since(start) + 1) as usize;
        let months: Vec<CalendarMonth> = (0..len).map(|i| start.offset(i as i64)).collect();
        let countries: Vec<String> = panel.countries().map(str::to_string).collect();
        let outcomes = countries
            .iter()
            .map(|c| {
                Outcome::ALL.map(|o| {
                    months
                        .iter()
                        .map(|&m| panel.value(c, o, m).unwrap_or(f64::NAN))
                        .collect()
                })
            })
            .collect();
        let controls = EuroControl::ALL.map(|e| {
            months
                .iter()
                .map(|&m| panel.euro_value(e, m).unwrap_or(f64::NAN))
                .collect()
        });
        let shocks = ShockKind::ALL.map(|k| {
            let s = shocks.get(k);
            months.iter().map(|&m| s.get(m).unwrap_or(f64::NAN)).collect()
        });
        Ok(Self {
            start,
            len,
            countries,
            outcomes,
            controls,
            shocks,
        })
    }

    pub fn start(&self) -> CalendarMonth {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn month(&self, t: usize) -> CalendarMonth {
        self.start.offset(t as i64)
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn outcome(&self, country: usize, outcome: Outcome, t: usize) -> f64 {
        self.outcomes[country][outcome.index()][t]
    }

    pub fn control(&self, control: EuroControl, t: usize) -> f64 {
        self.controls[control as usize][t]
    }

    pub fn shock(&self, kind: ShockKind, t: usize) -> f64 {
        self.shocks[kind.index()][t]
    }

    /// Shock values over the frame, NaN where the shock calendar ends.
    pub fn shock_values(&self, kind: ShockKind) -> &[f64] {
        &self.shocks[kind.index()]
    }
}
