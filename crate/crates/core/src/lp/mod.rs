//! Pooled-panel local projections: design construction, OLS with a
//! cluster-robust HC3 covariance, and information-criterion lag selection.

mod covariance;
mod design;
mod fit;
mod frame;
mod ols;
mod selection;

pub use covariance::{hc3_cluster_cov, hc3_cluster_cov_with, LEVERAGE_LIMIT_GAP};
pub use design::{build_design, column_names, ClusterBy, Design, DesignOptions, LagOrder, LpSpec, TrendSpec};
pub use fit::{fit_design, fit_lp, FitOptions, FitResult, ShockBlock};
pub use frame::PanelFrame;
pub use ols::{ols_fit, ols_fit_named, OlsFit};
pub use selection::{
    grid_fits, select_from, select_model, selection_grid, Criterion, GridFit, GridPoint, Penalty, Selection,
    SelectionTable, COMMON_SAMPLE_LAG, SELECTION_LAGS,
};

#[cfg(test)]
pub(crate) mod testutil {
    use std::collections::BTreeMap;

    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::panel::{CalendarMonth, EuroControl, Outcome, PanelDataset, Series, ShockSet};
    use crate::rng::stream_rng;

    /// Random-walk-free toy panel; country `k` starts `offsets[k]` months late.
    pub fn toy_panel(offsets: &[usize], len: usize, seed: u64) -> (PanelDataset, ShockSet) {
        let start = CalendarMonth::new(2000, 1).unwrap();
        let mut rng = stream_rng(seed, 0);
        let mut countries = BTreeMap::new();
        for (k, &off) in offsets.iter().enumerate() {
            let mut vars = BTreeMap::new();
            for o in Outcome::ALL {
                let mut v = 0.0;
                let values: Vec<f64> = (0..len - off)
                    .map(|_| {
                        v = 0.5 * v + rng.sample::<f64, _>(StandardNormal);
                        v
                    })
                    .collect();
                vars.insert(o, Series::new(start.offset(off as i64), values).unwrap());
            }
            countries.insert(format!("C{k}"), vars);
        }
        let mut euro = BTreeMap::new();
        for e in EuroControl::ALL {
            let values: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
            euro.insert(e, Series::new(start, values).unwrap());
        }
        let shocks: Vec<[f64; 3]> = (0..len)
            .map(|_| [0; 3].map(|_| rng.sample(StandardNormal)))
            .collect();
        (
            PanelDataset::new(countries, euro),
            ShockSet::from_dense(start, &shocks).unwrap(),
        )
    }
}
