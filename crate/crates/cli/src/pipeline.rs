//! The pipeline stages. Each stage reads its inputs from the configuration
//! or from files written by earlier stages into the output directory, so
//! any stage can be rerun on its own.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nlproj::dgp::{simulate, true_irf_oracle, write_oracle_csv, OracleOptions};
use nlproj::factor::{
    estimate_factor_mle, identify_factors, EmOptions, IdentificationReport, IdentifyOptions, SignRestrictionMatrix,
    SurprisePanel,
};
use nlproj::inference::{build_restriction, wald_test, RestrictionKind, SignificanceTable, TableCell, TestFamily};
use nlproj::irf::{
    ar1_check, conditional_irfs, estimate_a_values, scaled_irf_family, threshold_from_quantile, unconditional_irf,
    write_irf_csv, AverageOver, Flavor, IrfCurve, PlugInEstimate, ShockTransform, SpecLabel, MIN_AR1_LEN,
};
use nlproj::lp::{
    fit_lp, grid_fits, select_from, ClusterBy, Criterion, FitOptions, LagOrder, LpSpec, PanelFrame, Penalty,
    SelectionTable, ShockBlock, TrendSpec,
};
use nlproj::panel::{
    assign_shocks_to_months, deseasonalize_monthly, read_reassignment_map, read_shock_events, to_log_points,
    CalendarMonth, MonthWindow, Outcome, PanelDataset, ReassignmentMap, Series, ShockEvent, ShockKind, ShockSet,
    VariableName,
};
use nlproj::stats;
use nlproj::symmetry::{histogram, histogram_svg, symmetry_report, BootstrapOptions, HISTOGRAM_BINS};
use serde::{Deserialize, Serialize};

use crate::config::{InputConfig, PipelineConfig, ShockSource, TransformConfig};
use crate::error::{CliError, CliResult};
use crate::figures::{grid_svg, Band, Cell, Line, BLUE, FAMILY, GREEN, RED};

/// Selection tables stop here; longer horizons reuse the last column.
pub const SELECTION_MAX_H: usize = 24;

pub const SHOCKS_FILE: &str = "shocks.csv";
pub const IDENTIFICATION_FILE: &str = "identification.json";
pub const FITS_FILE: &str = "fits.json";
pub const IRF_FILE: &str = "irf.csv";
pub const BANDS_FILE: &str = "linear_bands.csv";
pub const SYMMETRY_FILE: &str = "symmetry.json";
pub const SELECTION_DIR: &str = "selection";
pub const FIGURES_DIR: &str = "figures";
pub const TABLES_DIR: &str = "tables";
pub const SIMULATED_DIR: &str = "simulated";

/// Two-sided normal quantiles for the 68% and 90% bands.
const Z68: f64 = 0.994_457_883_209_753_2;
const Z90: f64 = 1.644_853_626_951_472_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Identify,
    Estimate,
    Infer,
    Symmetry,
    Simulate,
    RunAll,
}

pub fn run(stage: Stage, cfg: &PipelineConfig) -> CliResult<()> {
    match stage {
        Stage::Identify => run_identify(cfg),
        Stage::Estimate => run_estimate(cfg),
        Stage::Infer => run_infer(cfg),
        Stage::Symmetry => run_symmetry(cfg),
        Stage::Simulate => run_simulate(cfg),
        Stage::RunAll => run_all(cfg),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    File::create(path).map(BufWriter::new).map_err(io)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    serde_json::from_reader(open(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn require_input(cfg: &PipelineConfig) -> CliResult<&InputConfig> {
    cfg.input
        .as_ref()
        .ok_or_else(|| CliError::Config("no [input] section and nothing to simulate".into()))
}

// ---------------------------------------------------------------- identify

#[derive(Debug, Serialize)]
struct FactorSummary {
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    heywood: Vec<bool>,
}

#[derive(Debug, Serialize)]
struct ShockDiagnostics {
    shock: ShockKind,
    conference_months: usize,
    /// `max(|mean|, |sd - 1|)` over conference months.
    standardization_gap: f64,
    ar1_coefficient: Option<f64>,
    ar1_p_value: Option<f64>,
    ar1_flagged: bool,
}

#[derive(Debug, Serialize)]
struct IdentifyRecord {
    source: &'static str,
    window: MonthWindow,
    n_events: Option<usize>,
    factor_model: Option<FactorSummary>,
    identification: Option<IdentificationReport>,
    shocks: Vec<ShockDiagnostics>,
}

/// Smallest window holding every event month.
fn event_span(events: &[ShockEvent], reassign: &ReassignmentMap) -> CliResult<MonthWindow> {
    let months: Vec<CalendarMonth> = events
        .iter()
        .map(|e| reassign.get(&e.date).copied().unwrap_or_else(|| CalendarMonth::of_date(e.date)))
        .collect();
    let start = months.iter().min().ok_or_else(|| CliError::Data("no shock events".into()))?;
    let end = months.iter().max().expect("non-empty");
    Ok(MonthWindow::new(*start, *end)?)
}

fn diagnostics(shocks: &ShockSet) -> Vec<ShockDiagnostics> {
    shocks
        .iter()
        .map(|s| {
            let ar1 = (s.values().len() >= MIN_AR1_LEN).then(|| ar1_check(s.values()).ok()).flatten();
            if let Some(a) = ar1.filter(|a| a.flagged) {
                log::warn!(
                    "{} shock looks autocorrelated: AR(1) coefficient {:.3}, p = {:.3}",
                    s.kind,
                    a.coefficient,
                    a.p_value
                );
            }
            ShockDiagnostics {
                shock: s.kind,
                conference_months: s.conference_values().len(),
                standardization_gap: s.standardization_gap(),
                ar1_coefficient: ar1.map(|a| a.coefficient),
                ar1_p_value: ar1.map(|a| a.p_value),
                ar1_flagged: ar1.is_some_and(|a| a.flagged),
            }
        })
        .collect()
}

pub fn run_identify(cfg: &PipelineConfig) -> CliResult<()> {
    let input = require_input(cfg)?;
    let source = input.shock_source()?;
    let window = cfg.window()?;
    let reassign = match &input.reassignment {
        Some(p) => read_reassignment_map(open(p)?)?,
        None => ReassignmentMap::new(),
    };

    let (shocks, mut record) = match source {
        ShockSource::Surprises(path) => {
            let panel = SurprisePanel::read_csv(open(&path)?)?;
            log::info!("estimating a three-factor model on {} events", panel.len());
            let model = estimate_factor_mle(panel.data(), 3, EmOptions::default())?;
            let id = identify_factors(
                &model,
                &SignRestrictionMatrix::three_shock(),
                IdentifyOptions {
                    n_draws: cfg.n_draws,
                    seed: cfg.seed,
                },
            )?;
            log::info!("acceptance rate {:.4}", id.acceptance_rate());
            let events: Vec<ShockEvent> = panel
                .dates()
                .iter()
                .enumerate()
                .map(|(i, d)| ShockEvent {
                    date: *d,
                    values: [id.factors[(i, 0)], id.factors[(i, 1)], id.factors[(i, 2)]],
                })
                .collect();
            let w = match window {
                Some(w) => w,
                None => event_span(&events, &reassign)?,
            };
            let shocks = assign_shocks_to_months(&events, w, &reassign)?;
            let record = IdentifyRecord {
                source: "surprises",
                window: w,
                n_events: Some(events.len()),
                factor_model: Some(FactorSummary {
                    log_likelihood: model.log_likelihood,
                    iterations: model.iterations,
                    converged: model.converged,
                    heywood: model.heywood.clone(),
                }),
                identification: Some(id.report()),
                shocks: Vec::new(),
            };
            (shocks, record)
        }
        ShockSource::Events(path) => {
            let events = read_shock_events(open(&path)?)?;
            let w = match window {
                Some(w) => w,
                None => event_span(&events, &reassign)?,
            };
            let shocks = assign_shocks_to_months(&events, w, &reassign)?;
            let record = IdentifyRecord {
                source: "events",
                window: w,
                n_events: Some(events.len()),
                factor_model: None,
                identification: None,
                shocks: Vec::new(),
            };
            (shocks, record)
        }
        ShockSource::Shocks(path) => {
            log::info!("monthly shocks supplied; identification skipped");
            let mut shocks = ShockSet::read_csv(open(&path)?)?;
            if let Some(w) = window {
                shocks = shocks.restrict(&w)?;
            }
            let record = IdentifyRecord {
                source: "shocks",
                window: shocks.window(),
                n_events: None,
                factor_model: None,
                identification: None,
                shocks: Vec::new(),
            };
            (shocks, record)
        }
    };
    record.shocks = diagnostics(&shocks);

    let mut w = create(&cfg.out.join(SHOCKS_FILE))?;
    shocks.write_csv(&mut w)?;
    write_json(&cfg.out.join(IDENTIFICATION_FILE), &record)
}

// ---------------------------------------------------------------- estimate

/// Per-shock quantities shared by the curves and the plug-in tests.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShockParams {
    pub shock: ShockKind,
    pub delta: f64,
    /// Standard deviation of the averaging sample.
    pub sigma: f64,
    pub threshold: f64,
    pub a_sign: f64,
    pub a_size: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub outcome: Outcome,
    pub horizon: usize,
    pub spec: SpecLabel,
    pub lags: LagOrder,
    pub trend: TrendSpec,
    pub block: ShockBlock,
}

/// Everything the inference stage needs, written by the estimation stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitStore {
    pub horizon: usize,
    pub criterion: Criterion,
    pub penalty: Penalty,
    pub cluster: ClusterBy,
    pub average_over: AverageOver,
    pub shocks: Vec<ShockParams>,
    pub fits: Vec<FitRecord>,
}

impl FitStore {
    pub fn read(out: &Path) -> CliResult<Self> {
        read_json(&out.join(FITS_FILE))
    }

    pub fn params(&self, shock: ShockKind) -> CliResult<ShockParams> {
        self.shocks
            .iter()
            .find(|p| p.shock == shock)
            .copied()
            .ok_or_else(|| CliError::Data(format!("{FITS_FILE} has no parameters for the {shock} shock")))
    }

    fn index(&self) -> BTreeMap<(Outcome, usize, SpecLabel), &ShockBlock> {
        self.fits.iter().map(|f| ((f.outcome, f.horizon, f.spec), &f.block)).collect()
    }
}

fn apply_transforms(panel: &mut PanelDataset, transforms: &TransformConfig) -> CliResult<()> {
    let (logs, deseason) = transforms.parsed()?;
    let mut apply = |v: VariableName, f: fn(&Series) -> nlproj::Result<Series>| match v {
        VariableName::Outcome(o) => panel.map_outcome(o, f),
        VariableName::Euro(e) => panel.map_euro(e, f),
    };
    for v in logs {
        apply(v, to_log_points)?;
    }
    for v in deseason {
        apply(v, deseasonalize_monthly)?;
    }
    Ok(())
}

fn load_panel(cfg: &PipelineConfig) -> CliResult<PanelDataset> {
    let input = require_input(cfg)?;
    let path = input
        .panel
        .as_ref()
        .ok_or_else(|| CliError::Config("input.panel is required for estimation".into()))?;
    let mut panel = PanelDataset::read_csv(open(path)?)?;
    let transforms = cfg.transforms.clone().unwrap_or_else(TransformConfig::standard);
    apply_transforms(&mut panel, &transforms)?;
    if let Some(w) = cfg.window()? {
        panel = panel.restrict(&w);
        if panel.n_countries() == 0 {
            return Err(CliError::Data(format!("panel is empty after restricting to {w}")));
        }
    }
    panel.check_complete()?;
    Ok(panel)
}

fn load_shocks(cfg: &PipelineConfig) -> CliResult<ShockSet> {
    let shocks = ShockSet::read_csv(open(&cfg.out.join(SHOCKS_FILE))?)?;
    match cfg.window()? {
        Some(w) => Ok(shocks.restrict(&w)?),
        None => Ok(shocks),
    }
}

fn averaging_sample(shocks: &ShockSet, kind: ShockKind, over: AverageOver) -> Vec<f64> {
    match over {
        AverageOver::AllMonths => shocks.get(kind).values().to_vec(),
        AverageOver::ConferenceMonths => shocks.get(kind).conference_values(),
    }
}

fn write_selection(dir: &Path, table: &SelectionTable, criterion: Criterion) -> CliResult<()> {
    let path = dir.join(format!("{}_{criterion}.csv", table.outcome.name()));
    let mut w = create(&path)?;
    table.write_csv(&mut w)?;
    Ok(())
}

pub fn run_estimate(cfg: &PipelineConfig) -> CliResult<()> {
    let panel = load_panel(cfg)?;
    let shocks = load_shocks(cfg)?;
    let frame = PanelFrame::new(&panel, &shocks)?;
    log::info!("{} countries over {} months", frame.countries().len(), frame.len());

    let over = cfg.plugin.average_over;
    let mut params = Vec::new();
    for kind in ShockKind::ALL {
        let sample = averaging_sample(&shocks, kind, over);
        let sigma = stats::sd(&sample);
        let delta = cfg.plugin.delta.map_or(sigma, |d| d[kind.index()]);
        let threshold = threshold_from_quantile(shocks.get(kind), cfg.coverage)?;
        let a_sign = estimate_a_values(&sample, delta, ShockTransform::AbsValue)?.a_hat;
        let a_size = estimate_a_values(&sample, delta, ShockTransform::ThresholdShift { b: threshold })?.a_hat;
        params.push(ShockParams {
            shock: kind,
            delta,
            sigma,
            threshold,
            a_sign,
            a_size,
        });
    }
    let thresholds = ShockKind::ALL.map(|k| ShockTransform::ThresholdShift {
        b: params[k.index()].threshold,
    });

    let sel_dir = cfg.out.join(SELECTION_DIR);
    let max_sel = cfg.horizon.min(SELECTION_MAX_H);
    let opts = FitOptions {
        cluster: cfg.cluster,
        ..FitOptions::default()
    };
    let mut fits = Vec::new();
    for outcome in Outcome::ALL {
        log::info!("selecting and fitting {outcome}");
        let mut aic = Vec::new();
        let mut bic = Vec::new();
        for h in 0..=max_sel {
            let grid = grid_fits(&frame, outcome, h)?;
            aic.push(select_from(&grid, h, Criterion::Aic, cfg.penalty)?);
            bic.push(select_from(&grid, h, Criterion::Bic, cfg.penalty)?);
        }
        let aic = SelectionTable {
            outcome,
            selections: aic,
        };
        let bic = SelectionTable {
            outcome,
            selections: bic,
        };
        write_selection(&sel_dir, &aic, Criterion::Aic)?;
        write_selection(&sel_dir, &bic, Criterion::Bic)?;
        let chosen = match cfg.criterion {
            Criterion::Aic => &aic,
            Criterion::Bic => &bic,
        };

        for h in 0..=cfg.horizon {
            let point = chosen.get(h);
            let base = LpSpec::linear(outcome, h, point.lags, point.trend);
            for (spec, lp) in [
                (SpecLabel::Linear, base),
                (SpecLabel::Sign, base.with_transforms([ShockTransform::AbsValue; 3])),
                (SpecLabel::Size, base.with_transforms(thresholds)),
            ] {
                let fit = fit_lp(&frame, &lp, opts)?;
                fits.push(FitRecord {
                    outcome,
                    horizon: h,
                    spec,
                    lags: point.lags,
                    trend: point.trend,
                    block: fit.shock_block(),
                });
            }
        }
    }

    let store = FitStore {
        horizon: cfg.horizon,
        criterion: cfg.criterion,
        penalty: cfg.penalty,
        cluster: cfg.cluster,
        average_over: over,
        shocks: params,
        fits,
    };
    write_json(&cfg.out.join(FITS_FILE), &store)?;
    emit_curves(cfg, &store, &shocks)
}

/// Coefficient paths over horizons for one (outcome, spec, shock).
fn paths(
    index: &BTreeMap<(Outcome, usize, SpecLabel), &ShockBlock>,
    store: &FitStore,
    outcome: Outcome,
    spec: SpecLabel,
    shock: ShockKind,
) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut psi = Vec::new();
    let mut gamma = Vec::new();
    for h in 0..=store.horizon {
        let block = index.get(&(outcome, h, spec)).ok_or_else(|| nlproj::Error::MissingCell {
            outcome: outcome.name().into(),
            shock: shock.name().into(),
            horizon: h,
        })?;
        psi.push(block.psi(shock));
        if spec != SpecLabel::Linear {
            gamma.push(block.gamma(shock)?);
        }
    }
    Ok((psi, gamma))
}

#[derive(Debug, Serialize)]
struct BandRow {
    outcome: Outcome,
    shock: ShockKind,
    h: usize,
    value: f64,
    se: f64,
    lo68: f64,
    hi68: f64,
    lo90: f64,
    hi90: f64,
}

fn curve(outcome: Outcome, shock: ShockKind, spec: SpecLabel, flavor: Flavor, values: Vec<f64>, delta: f64) -> IrfCurve {
    IrfCurve {
        shock,
        outcome,
        spec,
        flavor,
        values,
        delta,
    }
}

fn emit_curves(cfg: &PipelineConfig, store: &FitStore, shocks: &ShockSet) -> CliResult<()> {
    let index = store.index();
    let mut all = Vec::new();
    let mut bands = Vec::new();
    let mut fig1 = BTreeMap::new();
    let mut fig2 = BTreeMap::new();
    let mut fig3 = BTreeMap::new();
    let mut fig4 = BTreeMap::new();
    let mut fig5 = BTreeMap::new();
    let mut csv2 = Vec::new();
    let mut csv3 = Vec::new();
    let mut csv4 = Vec::new();
    let mut csv5 = Vec::new();

    for outcome in Outcome::ALL {
        for shock in ShockKind::ALL {
            let p = store.params(shock)?;
            let (psi_lin, _) = paths(&index, store, outcome, SpecLabel::Linear, shock)?;
            let (psi_sign, gamma_sign) = paths(&index, store, outcome, SpecLabel::Sign, shock)?;
            let (psi_size, gamma_size) = paths(&index, store, outcome, SpecLabel::Size, shock)?;

            let linear = unconditional_irf(&psi_lin, None, PlugInEstimate { delta: p.delta, a_hat: p.delta });
            let sign = unconditional_irf(&psi_sign, Some(&gamma_sign), PlugInEstimate { delta: p.delta, a_hat: p.a_sign });
            let size = unconditional_irf(&psi_size, Some(&gamma_size), PlugInEstimate { delta: p.delta, a_hat: p.a_size });
            let (pos, neg) = conditional_irfs(ShockTransform::AbsValue, &psi_sign, &gamma_sign, cfg.plugin.flip_negative)?;
            let sample = averaging_sample(shocks, shock, store.average_over);
            let family = scaled_irf_family(
                &psi_size,
                &gamma_size,
                &sample,
                ShockTransform::ThresholdShift { b: p.threshold },
                p.sigma,
                &cfg.plugin.scales,
                cfg.plugin.scaled_formula,
            )?;

            let mut lo68 = Vec::new();
            let mut hi68 = Vec::new();
            let mut lo90 = Vec::new();
            let mut hi90 = Vec::new();
            for (h, v) in linear.iter().enumerate() {
                let block = index[&(outcome, h, SpecLabel::Linear)];
                let se = p.delta.abs() * block.omega[shock.index()][shock.index()].max(0.0).sqrt();
                lo68.push(v - Z68 * se);
                hi68.push(v + Z68 * se);
                lo90.push(v - Z90 * se);
                hi90.push(v + Z90 * se);
                bands.push(BandRow {
                    outcome,
                    shock,
                    h,
                    value: *v,
                    se,
                    lo68: v - Z68 * se,
                    hi68: v + Z68 * se,
                    lo90: v - Z90 * se,
                    hi90: v + Z90 * se,
                });
            }

            let key = (outcome, shock);
            let line = |values: &Vec<f64>, colour, dashed| Line {
                values: values.clone(),
                colour,
                dashed,
            };
            fig1.insert(
                key,
                Cell {
                    bands: vec![
                        Band {
                            lo: lo90,
                            hi: hi90,
                            colour: BLUE,
                            opacity: 0.15,
                        },
                        Band {
                            lo: lo68,
                            hi: hi68,
                            colour: BLUE,
                            opacity: 0.3,
                        },
                    ],
                    lines: vec![line(&linear, BLUE, false)],
                },
            );
            fig2.insert(
                key,
                Cell {
                    bands: Vec::new(),
                    lines: vec![line(&linear, RED, true), line(&sign, BLUE, false)],
                },
            );
            fig3.insert(
                key,
                Cell {
                    bands: Vec::new(),
                    lines: vec![line(&pos, BLUE, false), line(&neg, RED, false)],
                },
            );
            fig4.insert(
                key,
                Cell {
                    bands: Vec::new(),
                    lines: vec![line(&linear, RED, true), line(&size, GREEN, false)],
                },
            );
            fig5.insert(
                key,
                Cell {
                    bands: Vec::new(),
                    lines: family
                        .iter()
                        .enumerate()
                        .map(|(i, (_, c))| line(c, FAMILY[i % FAMILY.len()], false))
                        .collect(),
                },
            );

            let lin_c = curve(outcome, shock, SpecLabel::Linear, Flavor::Unconditional, linear, p.delta);
            let sign_c = curve(outcome, shock, SpecLabel::Sign, Flavor::Unconditional, sign, p.delta);
            let size_c = curve(outcome, shock, SpecLabel::Size, Flavor::Unconditional, size, p.delta);
            let pos_c = curve(outcome, shock, SpecLabel::Sign, Flavor::ConditionalPos, pos, 1.0);
            let neg_c = curve(outcome, shock, SpecLabel::Sign, Flavor::ConditionalNeg, neg, 1.0);
            let fam_c: Vec<IrfCurve> = family
                .into_iter()
                .map(|(a, c)| curve(outcome, shock, SpecLabel::Size, Flavor::Scaled(a), c, a * p.sigma))
                .collect();

            csv2.extend([lin_c.clone(), sign_c.clone()]);
            csv3.extend([pos_c.clone(), neg_c.clone()]);
            csv4.extend([lin_c.clone(), size_c.clone()]);
            csv5.extend(fam_c.iter().cloned());
            all.extend([lin_c, sign_c, size_c, pos_c, neg_c]);
            all.extend(fam_c);
        }
    }

    let mut w = create(&cfg.out.join(IRF_FILE))?;
    write_irf_csv(&all, &mut w)?;
    drop(w);

    let write_bands = |path: &Path| -> CliResult<()> {
        let file = create(path)?;
        let mut w = csv_writer(file);
        for row in &bands {
            w.serialize(row).map_err(nlproj::Error::from)?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    write_bands(&cfg.out.join(BANDS_FILE))?;

    let dir = cfg.out.join(FIGURES_DIR);
    write_bands(&dir.join("figure_1_linear.csv"))?;
    write_text(
        &dir.join("figure_1_linear.svg"),
        &grid_svg("Linear impulse responses, 68% and 90% bands", &[("linear", BLUE)], &fig1),
    )?;
    for (stem, title, legend, cells, curves) in [
        (
            "figure_2_sign",
            "Sign specification against the linear response",
            vec![("linear", RED), ("sign", BLUE)],
            &fig2,
            &csv2,
        ),
        (
            "figure_3_conditional",
            "Conditional responses to positive and negative shocks",
            vec![("positive", BLUE), ("negative", RED)],
            &fig3,
            &csv3,
        ),
        (
            "figure_4_size",
            "Size specification against the linear response",
            vec![("linear", RED), ("size", GREEN)],
            &fig4,
            &csv4,
        ),
    ] {
        let mut w = create(&dir.join(format!("{stem}.csv")))?;
        write_irf_csv(curves, &mut w)?;
        write_text(&dir.join(format!("{stem}.svg")), &grid_svg(title, &legend, cells))?;
    }
    let labels: Vec<String> = cfg.plugin.scales.iter().map(|a| format!("a={a}")).collect();
    let legend: Vec<(&str, &str)> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), FAMILY[i % FAMILY.len()]))
        .collect();
    let mut w = create(&dir.join("figure_5_scaled.csv"))?;
    write_irf_csv(&csv5, &mut w)?;
    write_text(
        &dir.join("figure_5_scaled.svg"),
        &grid_svg("Size specification by shock scale", &legend, &fig5),
    )
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

// ---------------------------------------------------------------- infer

pub fn run_infer(cfg: &PipelineConfig) -> CliResult<()> {
    let store = FitStore::read(&cfg.out)?;
    let index = store.index();
    let dir = cfg.out.join(TABLES_DIR);
    for family in TestFamily::ALL {
        let spec = match family {
            TestFamily::SizeGamma | TestFamily::SizePlugin => SpecLabel::Size,
            _ => SpecLabel::Sign,
        };
        let mut cells = Vec::new();
        for outcome in Outcome::ALL {
            for shock in ShockKind::ALL {
                let p = store.params(shock)?;
                let kind = match family {
                    TestFamily::SignGamma | TestFamily::SizeGamma => RestrictionKind::GammaOnly,
                    TestFamily::SignPlugin => RestrictionKind::PluginIrf {
                        delta: p.delta,
                        a_hat: p.a_sign,
                    },
                    TestFamily::SizePlugin => RestrictionKind::PluginIrf {
                        delta: p.delta,
                        a_hat: p.a_size,
                    },
                    TestFamily::ConditionalPos => RestrictionKind::ConditionalPos,
                    TestFamily::ConditionalNeg => RestrictionKind::ConditionalNeg,
                };
                for h in 0..=store.horizon {
                    let block = index.get(&(outcome, h, spec)).ok_or_else(|| nlproj::Error::MissingCell {
                        outcome: outcome.name().into(),
                        shock: shock.name().into(),
                        horizon: h,
                    })?;
                    let r = build_restriction(kind, shock, block.beta.len())?;
                    let result = wald_test(&r, &block.beta_vector(), &block.omega_matrix())?;
                    cells.push(TableCell::new(outcome, shock, h, result));
                }
            }
        }
        let table = SignificanceTable::new(family, store.horizon, cells)?;
        let mut w = create(&dir.join(format!("{}.csv", family.name())))?;
        table.write_csv(&mut w)?;
        write_text(&dir.join(format!("{}.svg", family.name())), &table.to_svg())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- symmetry

#[derive(Debug, Serialize)]
struct HistogramRow {
    shock: ShockKind,
    bin: usize,
    lower: f64,
    upper: f64,
    count: usize,
}

pub fn run_symmetry(cfg: &PipelineConfig) -> CliResult<()> {
    let shocks = load_shocks(cfg)?;
    let series: Vec<(ShockKind, Vec<f64>)> = ShockKind::ALL
        .iter()
        .map(|k| (*k, shocks.get(*k).values().to_vec()))
        .collect();
    let report = symmetry_report(
        &series,
        BootstrapOptions {
            replications: cfg.bootstrap,
            seed: cfg.seed,
        },
    )?;
    write_json(&cfg.out.join(SYMMETRY_FILE), &report)?;
    write_text(&cfg.out.join("symmetry_histogram.svg"), &histogram_svg(&series))?;

    let path = cfg.out.join("symmetry_histogram.csv");
    let mut w = csv_writer(create(&path)?);
    for (kind, x) in &series {
        let (lo, hi, counts) = histogram(x, HISTOGRAM_BINS);
        let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
        for (i, c) in counts.iter().enumerate() {
            w.serialize(HistogramRow {
                shock: *kind,
                bin: i,
                lower: lo + i as f64 * width,
                upper: lo + (i + 1) as f64 * width,
                count: *c,
            })
            .map_err(nlproj::Error::from)?;
        }
    }
    w.flush().map_err(|source| CliError::Io { path, source })
}

// ---------------------------------------------------------------- simulate

pub fn simulated_paths(out: &Path) -> (PathBuf, PathBuf) {
    let dir = out.join(SIMULATED_DIR);
    (dir.join("panel.csv"), dir.join("shocks.csv"))
}

pub fn run_simulate(cfg: &PipelineConfig) -> CliResult<()> {
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("no [simulate] section".into()))?;
    let model = sim.load_model()?;
    let dir = cfg.out.join(SIMULATED_DIR);

    let oracles = (0..3)
        .map(|i| {
            true_irf_oracle(
                &model,
                i,
                sim.delta,
                cfg.horizon,
                OracleOptions {
                    n_paths: sim.oracle_paths,
                    burn_in: sim.oracle_burn_in,
                    seed: cfg.seed,
                },
            )
        })
        .collect::<nlproj::Result<Vec<_>>>()?;
    let mut w = create(&dir.join("oracle.csv"))?;
    write_oracle_csv(&oracles, &mut w)?;
    drop(w);

    let panel = simulate(&model, sim.periods, sim.countries, cfg.seed)?;
    if model.n_y == Outcome::ALL.len() && model.n_z == nlproj::panel::EuroControl::ALL.len() {
        let (data, shocks) = panel.to_panel(sim.start)?;
        let (panel_path, shocks_path) = simulated_paths(&cfg.out);
        let mut w = create(&panel_path)?;
        data.write_csv(&mut w)?;
        let mut w = create(&shocks_path)?;
        shocks.write_csv(&mut w)?;
    } else {
        log::info!(
            "model has {} y and {} z variables; only the oracle is written",
            model.n_y,
            model.n_z
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- run-all

/// Runs every stage in order. Without an `[input]` section the simulated
/// panel and shocks feed the later stages, untransformed.
pub fn run_all(cfg: &PipelineConfig) -> CliResult<()> {
    let mut cfg = cfg.clone();
    if cfg.simulate.is_some() {
        run_simulate(&cfg)?;
        if cfg.input.is_none() {
            let (panel, shocks) = simulated_paths(&cfg.out);
            cfg.input = Some(InputConfig {
                panel: Some(panel),
                shocks: Some(shocks),
                ..InputConfig::default()
            });
            cfg.transforms.get_or_insert_with(TransformConfig::default);
        }
    }
    require_input(&cfg)?;
    run_identify(&cfg)?;
    run_estimate(&cfg)?;
    run_infer(&cfg)?;
    run_symmetry(&cfg)
}
