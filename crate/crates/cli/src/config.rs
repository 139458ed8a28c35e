use std::path::{Path, PathBuf};

use nlproj::dgp::StructuralModel;
use nlproj::irf::{AverageOver, ScaledFormula, DEFAULT_COVERAGE, DEFAULT_SCALES};
use nlproj::lp::{ClusterBy, Criterion, Penalty};
use nlproj::panel::{CalendarMonth, MonthWindow, VariableName};
use nlproj::symmetry::DEFAULT_BOOTSTRAP;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_HORIZON: usize = 25;
pub const DEFAULT_DRAWS: usize = 100_000;

/// Everything a pipeline run needs. Relative paths are resolved against
/// the directory holding the configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_criterion")]
    pub criterion: Criterion,
    #[serde(default)]
    pub penalty: Penalty,
    #[serde(default)]
    pub cluster: ClusterBy,
    /// `YYYY-MM:YYYY-MM`, inclusive.
    #[serde(default)]
    pub window: Option<String>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub input: Option<InputConfig>,
    /// Absent means the standard treatment for real data.
    #[serde(default)]
    pub transforms: Option<TransformConfig>,
    #[serde(default)]
    pub plugin: PluginConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub panel: Option<PathBuf>,
    /// High-frequency surprises, one row per conference.
    pub surprises: Option<PathBuf>,
    /// Monthly shock series, used as is.
    pub shocks: Option<PathBuf>,
    /// Conference-level shock values to be placed on the monthly calendar.
    pub events: Option<PathBuf>,
    pub reassignment: Option<PathBuf>,
}

/// Where the monthly shocks come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShockSource {
    Surprises(PathBuf),
    Shocks(PathBuf),
    Events(PathBuf),
}

impl InputConfig {
    pub fn shock_source(&self) -> CliResult<ShockSource> {
        let given: Vec<ShockSource> = [
            self.surprises.clone().map(ShockSource::Surprises),
            self.shocks.clone().map(ShockSource::Shocks),
            self.events.clone().map(ShockSource::Events),
        ]
        .into_iter()
        .flatten()
        .collect();
        match given.len() {
            1 => Ok(given.into_iter().next().unwrap()),
            0 => Err(CliError::Config(
                "no shock input: set one of input.surprises, input.shocks or input.events".into(),
            )),
            _ => Err(CliError::Config(
                "input.surprises, input.shocks and input.events are mutually exclusive".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    /// Variables mapped to `100 ln v`.
    #[serde(default)]
    pub log_points: Vec<String>,
    /// Variables with month-of-year effects removed, after any log transform.
    #[serde(default)]
    pub deseasonalize: Vec<String>,
}

impl TransformConfig {
    pub fn standard() -> Self {
        Self {
            log_points: ["reer", "cpi", "industrial_production", "ea_reer", "ea_cpi", "ea_industrial_production"]
                .map(String::from)
                .to_vec(),
            deseasonalize: ["unemployment", "ea_unemployment"].map(String::from).to_vec(),
        }
    }

    pub fn parsed(&self) -> CliResult<(Vec<VariableName>, Vec<VariableName>)> {
        let parse = |names: &[String]| {
            names
                .iter()
                .map(|n| n.parse::<VariableName>().map_err(|e| CliError::Config(e.to_string())))
                .collect::<CliResult<Vec<_>>>()
        };
        Ok((parse(&self.log_points)?, parse(&self.deseasonalize)?))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginConfig {
    /// Shock size per shock; defaults to one standard deviation of the
    /// averaging sample.
    #[serde(default)]
    pub delta: Option<[f64; 3]>,
    #[serde(default)]
    pub average_over: AverageOver,
    #[serde(default)]
    pub scaled_formula: ScaledFormula,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    #[serde(default)]
    pub flip_negative: bool,
}

impl Default for PluginConfig {
    fn default() -> Self {
        Self {
            delta: None,
            average_over: AverageOver::default(),
            scaled_formula: ScaledFormula::default(),
            scales: default_scales(),
            flip_negative: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub model: Option<StructuralModel>,
    /// TOML or JSON file holding the model, by extension.
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default = "default_countries")]
    pub countries: usize,
    #[serde(default = "default_start")]
    pub start: CalendarMonth,
    #[serde(default = "default_oracle_paths")]
    pub oracle_paths: usize,
    #[serde(default = "default_oracle_burn_in")]
    pub oracle_burn_in: usize,
    /// Size of the oracle perturbation.
    #[serde(default = "default_oracle_delta")]
    pub delta: f64,
}

impl SimulateConfig {
    pub fn load_model(&self) -> CliResult<StructuralModel> {
        match (&self.model, &self.model_file) {
            (Some(m), None) => Ok(m.clone()),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                if path.extension().is_some_and(|e| e == "json") {
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
                } else {
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
                }
            }
            (None, None) => Err(CliError::Config("simulate needs either model or model_file".into())),
            (Some(_), Some(_)) => Err(CliError::Config("simulate.model and simulate.model_file are mutually exclusive".into())),
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn default_criterion() -> Criterion {
    Criterion::Aic
}
fn default_coverage() -> f64 {
    DEFAULT_COVERAGE
}
fn default_draws() -> usize {
    DEFAULT_DRAWS
}
fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}
fn default_scales() -> Vec<f64> {
    DEFAULT_SCALES.to_vec()
}
fn default_periods() -> usize {
    300
}
fn default_countries() -> usize {
    5
}
fn default_start() -> CalendarMonth {
    CalendarMonth::new(2000, 1).expect("valid month")
}
fn default_oracle_paths() -> usize {
    20_000
}
fn default_oracle_burn_in() -> usize {
    100
}
fn default_oracle_delta() -> f64 {
    1.0
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub criterion: Option<Criterion>,
    pub window: Option<String>,
    pub out: Option<PathBuf>,
    pub penalty: Option<Penalty>,
    pub cluster: Option<ClusterBy>,
}

pub fn parse_window(s: &str) -> CliResult<MonthWindow> {
    let bad = || CliError::Config(format!("window must look like YYYY-MM:YYYY-MM, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let start: CalendarMonth = a.parse().map_err(|_| bad())?;
    let end: CalendarMonth = b.parse().map_err(|_| bad())?;
    MonthWindow::new(start, end).map_err(|e| CliError::Config(e.to_string()))
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn apply(&mut self, o: Overrides) -> CliResult<()> {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.criterion {
            self.criterion = v;
        }
        if let Some(v) = o.window {
            self.window = Some(v);
        }
        if let Some(v) = o.out {
            self.out = v;
        }
        if let Some(v) = o.penalty {
            self.penalty = v;
        }
        if let Some(v) = o.cluster {
            self.cluster = v;
        }
        self.validate()
    }

    pub fn window(&self) -> CliResult<Option<MonthWindow>> {
        self.window.as_deref().map(parse_window).transpose()
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        if let Some(input) = &mut self.input {
            for p in [
                &mut input.panel,
                &mut input.surprises,
                &mut input.shocks,
                &mut input.events,
                &mut input.reassignment,
            ]
            .into_iter()
            .flatten()
            {
                fix(p);
            }
        }
        if let Some(sim) = &mut self.simulate {
            if let Some(p) = &mut sim.model_file {
                fix(p);
            }
        }
    }

    fn validate(&self) -> CliResult<()> {
        self.window()?;
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(CliError::Config(format!("coverage must lie in (0, 1), got {}", self.coverage)));
        }
        if self.bootstrap == 0 {
            return Err(CliError::Config("bootstrap needs at least one replication".into()));
        }
        if let Some(d) = self.plugin.delta {
            if d.iter().any(|v| !v.is_finite() || *v == 0.0) {
                return Err(CliError::Config("plugin.delta entries must be finite and non-zero".into()));
            }
        }
        if self.plugin.scales.is_empty() {
            return Err(CliError::Config("plugin.scales must not be empty".into()));
        }
        if let Some(sim) = &self.simulate {
            if sim.periods == 0 || sim.countries == 0 {
                return Err(CliError::Config("simulate.periods and simulate.countries must be positive".into()));
            }
            if sim.oracle_paths == 0 {
                return Err(CliError::Config("simulate.oracle_paths must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = PipelineConfig::from_toml(
            "[input]\npanel = \"data/panel.csv\"\nshocks = \"/abs/shocks.csv\"\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(cfg.horizon, 25);
        assert_eq!(cfg.criterion, Criterion::Aic);
        assert_eq!(cfg.coverage, 0.6);
        assert_eq!(cfg.out, PathBuf::from("/cfg/out"));
        let input = cfg.input.unwrap();
        assert_eq!(input.panel.clone().unwrap(), PathBuf::from("/cfg/data/panel.csv"));
        assert_eq!(input.shock_source().unwrap(), ShockSource::Shocks("/abs/shocks.csv".into()));
    }

    #[test]
    fn shock_inputs_are_exclusive() {
        let both = InputConfig {
            surprises: Some("a".into()),
            shocks: Some("b".into()),
            ..Default::default()
        };
        assert!(matches!(both.shock_source(), Err(CliError::Config(_))));
        assert!(matches!(InputConfig::default().shock_source(), Err(CliError::Config(_))));
    }

    #[test]
    fn window_parsing() {
        let w = parse_window("2002-01:2019-12").unwrap();
        assert_eq!(w.len(), 18 * 12);
        assert!(parse_window("2002-01:2001-12").is_err());
        assert!(parse_window("2002-01").is_err());
        assert_eq!(parse_window("2002M01:2019M12").unwrap(), w);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(PipelineConfig::from_toml("horizn = 3", Path::new(".")).is_err());
        assert!(PipelineConfig::from_toml("coverage = 1.5", Path::new(".")).is_err());
        assert!(PipelineConfig::from_toml("criterion = \"hqc\"", Path::new(".")).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = PipelineConfig::from_toml("seed = 4\ncriterion = \"aic\"", Path::new(".")).unwrap();
        cfg.apply(Overrides {
            seed: Some(9),
            criterion: Some(Criterion::Bic),
            window: Some("2005-01:2006-12".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.criterion, Criterion::Bic);
        assert_eq!(cfg.window().unwrap().unwrap().len(), 24);
        assert!(cfg
            .apply(Overrides {
                window: Some("junk".into()),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn inline_model_parses() {
        let m = StructuralModel::canonical(5, 4, 1, 0);
        let mut sim = toml::Table::new();
        sim.insert("model".into(), toml::Value::try_from(&m).unwrap());
        let mut root = toml::Table::new();
        root.insert("simulate".into(), sim.into());
        let text = toml::to_string(&root).unwrap();
        let cfg = PipelineConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.simulate.unwrap().load_model().unwrap(), m);
    }

    #[test]
    fn standard_transforms_name_known_variables() {
        let (logs, deseason) = TransformConfig::standard().parsed().unwrap();
        assert_eq!(logs.len(), 6);
        assert_eq!(deseason.len(), 2);
    }
}
