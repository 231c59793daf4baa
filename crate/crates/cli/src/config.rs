//! TOML experiment configuration: schema, command-line overrides, and
//! conversion into library types.
//!
//! Every run is described by one document. Unknown keys anywhere in it are
//! rejected, and keys that do not apply to the selected variant (say, a
//! `fraction` on a `positive_drift` strategy) are rejected too, so a config
//! never silently means something other than what it says.

use std::fmt;
use std::path::{Path, PathBuf};

use longrun::{
    Extrapolation, MarketModel, NoiseSpec, PiecewiseLinear, RealMap, Strategy,
};
use serde::Deserialize;
use toml::value::{Table, Value};

/// Failure classes, mapped to process exit codes.
///
/// `Config` means the run was rejected while it was being assembled: the
/// document did not parse, a field was invalid, or a derived grid was
/// malformed. Nothing has been simulated yet (exit code 2). `Runtime` means
/// the assembled run itself failed partway through (exit code 3); partial
/// analysis outputs are removed and an error report is left behind.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

/// Library error during the assembly phase: still a config rejection.
pub fn build_err(e: longrun::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Library error once the analysis is underway.
pub fn run_err(e: longrun::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed for every stream the run draws. Default 1.
    pub seed: Option<u64>,
    /// Output directory. Default `longrun-out`, overridable with `--out`.
    pub out: Option<PathBuf>,
    pub model: Option<ModelConfig>,
    pub strategy: Option<StrategyConfig>,
    pub simulate: Option<SimulateBlock>,
    pub ergodic: Option<ErgodicBlock>,
    pub scgf: Option<ScgfBlock>,
    pub gdpf: Option<GdpfBlock>,
    pub utility: Option<UtilityBlock>,
    pub verify: Option<VerifyBlock>,
    #[serde(alias = "drift-check")]
    pub drift_check: Option<DriftCheckBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    StableAr,
    ClampedCir,
    DriftedWalk,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Mean-reversion weight for `stable_ar` / `clamped_cir`.
    pub alpha: Option<f64>,
    /// Per-step drift for `drifted_walk`.
    pub m: Option<f64>,
    /// Volatility scale for `clamped_cir`.
    pub sigma0: Option<f64>,
    /// Volatility clamp bounds for `clamped_cir`.
    pub c_lo: Option<f64>,
    pub c_hi: Option<f64>,
    /// Start state; model-specific default when omitted.
    pub x0: Option<f64>,
    /// Display name for `custom` models.
    pub name: Option<String>,
    pub drift: Option<MapConfig>,
    pub vol: Option<MapConfig>,
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Affine,
    ClampedSqrtVol,
    Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub kind: MapKind,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub sigma0: Option<f64>,
    pub c_lo: Option<f64>,
    pub c_hi: Option<f64>,
    /// Table knots, as parallel coordinate lists.
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    /// `clamp` (default) or `linear` continuation outside the knots.
    pub extrapolation: Option<ExtrapolationKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrapolationKind {
    Clamp,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Density samples `[x, mass]` for tabulated noise.
    pub points: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    PositiveDrift,
    Constant,
    Full,
    Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub fraction: Option<f64>,
    /// Interval rows `[lo, hi, fraction]`; first match wins.
    pub rows: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub horizon: u64,
    pub paths: Option<usize>,
    pub checkpoints: Option<Vec<u64>>,
    pub record_states: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicBlock {
    pub length: Option<u64>,
    pub burn_in: Option<u64>,
    pub batch_length: Option<u64>,
    /// Also write the transition-pair occupation histogram.
    pub histogram: Option<bool>,
    pub histogram_half_width: Option<f64>,
    pub histogram_bins: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScgfBlock {
    pub t: Option<u64>,
    pub paths: Option<usize>,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub theta_points: Option<usize>,
    pub ess_min: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub x_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdpfBlock {
    pub t_grid: Option<Vec<u64>>,
    pub paths: Option<usize>,
    /// Growth threshold rate; omitted means half the measured growth.
    pub b: Option<f64>,
    pub v0: Option<f64>,
    pub ergodic_length: Option<u64>,
    pub scgf_t: Option<u64>,
    pub scgf_paths: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityBlock {
    pub alpha: f64,
    pub t_grid: Option<Vec<u64>>,
    pub paths: Option<usize>,
    pub v0: Option<f64>,
    pub ess_min: Option<f64>,
    pub probe_alpha0: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    pub x_max: Option<f64>,
    pub annulus_lo: Option<f64>,
    pub grid_points: Option<usize>,
    pub eta: Option<f64>,
    pub density_tail_mass: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftCheckBlock {
    pub q_grid: Option<Vec<f64>>,
    pub delta_grid: Option<Vec<f64>>,
    pub x_max: Option<f64>,
    pub grid_points: Option<usize>,
}

// ---------------------------------------------------------------------------
// Loading and overrides
// ---------------------------------------------------------------------------

/// The effective document (for the echo) plus its typed view.
pub struct LoadedConfig {
    pub doc: Table,
    pub cfg: ExperimentConfig,
}

/// Read the config file (if any), apply `--set` overrides and the `--seed` /
/// `--out` shorthands, and deserialize the result.
pub fn load(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<LoadedConfig, CliError> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| {
            CliError::config(format!("cannot read config {}: {e}", p.display()))
        })?),
        None => None,
    };

    let untouched = overrides.is_empty() && seed.is_none() && out.is_none();
    if untouched {
        if let (Some(text), Some(p)) = (&text, path) {
            // Deserialize straight from the source so rejections carry line
            // and column positions.
            let cfg: ExperimentConfig = toml::from_str(text)
                .map_err(|e| CliError::config(format!("config {}: {e}", p.display())))?;
            let doc: Table = text
                .parse()
                .map_err(|e| CliError::config(format!("config {}: {e}", p.display())))?;
            return Ok(LoadedConfig { doc, cfg });
        }
    }

    let mut doc: Table = match (&text, path) {
        (Some(text), Some(p)) => text
            .parse()
            .map_err(|e| CliError::config(format!("config {}: {e}", p.display())))?,
        _ => Table::new(),
    };
    for spec in overrides {
        apply_override(&mut doc, spec)?;
    }
    if let Some(s) = seed {
        doc.insert("seed".into(), int_value("--seed", s)?);
    }
    if let Some(o) = out {
        let s = o.to_str().ok_or_else(|| {
            CliError::config("--out path is not valid UTF-8, so it cannot be echoed")
        })?;
        doc.insert("out".into(), Value::String(s.to_string()));
    }
    let cfg: ExperimentConfig = Value::Table(doc.clone())
        .try_into()
        .map_err(|e| CliError::config(format!("config: {e}")))?;
    Ok(LoadedConfig { doc, cfg })
}

fn int_value(what: &str, v: u64) -> Result<Value, CliError> {
    i64::try_from(v).map(Value::Integer).map_err(|_| {
        CliError::config(format!(
            "{what} {v} does not fit the config integer range (max {})",
            i64::MAX
        ))
    })
}

/// Apply one `key.path=value` override to the document. The value is parsed
/// as a TOML value; anything that does not parse (a bare word, say) is taken
/// as a string.
pub fn apply_override(doc: &mut Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{spec}' must look like key=value")))?;
    let mut parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("override key '{key}' has an empty segment")));
    }
    let last = parts.pop().expect("split always yields at least one part");
    let mut cur = doc;
    for part in parts {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::config(format!("override '{key}': '{part}' is not a table"))
            })?;
    }
    cur.insert(last.to_string(), parse_value(raw));
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

// ---------------------------------------------------------------------------
// Conversion into library types
// ---------------------------------------------------------------------------

/// Reject fields that were set but play no role for the chosen variant.
fn reject_stray(kind: &str, strays: &[(&str, bool)]) -> Result<(), CliError> {
    for (name, present) in strays {
        if *present {
            return Err(CliError::config(format!(
                "field '{name}' does not apply to kind = \"{kind}\""
            )));
        }
    }
    Ok(())
}

fn require<T: Copy>(kind: &str, name: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::config(format!("kind = \"{kind}\" requires field '{name}'")))
}

impl ModelConfig {
    pub fn build(&self) -> Result<MarketModel, CliError> {
        let custom_only = [
            ("name", self.name.is_some()),
            ("drift", self.drift.is_some()),
            ("vol", self.vol.is_some()),
            ("noise", self.noise.is_some()),
        ];
        let model = match self.kind {
            ModelKind::StableAr => {
                reject_stray(
                    "stable_ar",
                    &[
                        ("m", self.m.is_some()),
                        ("sigma0", self.sigma0.is_some()),
                        ("c_lo", self.c_lo.is_some()),
                        ("c_hi", self.c_hi.is_some()),
                    ],
                )?;
                reject_stray("stable_ar", &custom_only)?;
                MarketModel::stable_ar(require("stable_ar", "alpha", self.alpha)?)
                    .map_err(build_err)?
            }
            ModelKind::ClampedCir => {
                reject_stray("clamped_cir", &[("m", self.m.is_some())])?;
                reject_stray("clamped_cir", &custom_only)?;
                MarketModel::clamped_cir(
                    require("clamped_cir", "alpha", self.alpha)?,
                    require("clamped_cir", "sigma0", self.sigma0)?,
                    require("clamped_cir", "c_lo", self.c_lo)?,
                    require("clamped_cir", "c_hi", self.c_hi)?,
                )
                .map_err(build_err)?
            }
            ModelKind::DriftedWalk => {
                reject_stray(
                    "drifted_walk",
                    &[
                        ("alpha", self.alpha.is_some()),
                        ("sigma0", self.sigma0.is_some()),
                        ("c_lo", self.c_lo.is_some()),
                        ("c_hi", self.c_hi.is_some()),
                    ],
                )?;
                reject_stray("drifted_walk", &custom_only)?;
                MarketModel::drifted_walk(require("drifted_walk", "m", self.m)?)
                    .map_err(build_err)?
            }
            ModelKind::Custom => {
                reject_stray(
                    "custom",
                    &[
                        ("alpha", self.alpha.is_some()),
                        ("m", self.m.is_some()),
                        ("sigma0", self.sigma0.is_some()),
                        ("c_lo", self.c_lo.is_some()),
                        ("c_hi", self.c_hi.is_some()),
                    ],
                )?;
                let drift = self
                    .drift
                    .as_ref()
                    .ok_or_else(|| CliError::config("kind = \"custom\" requires a [model.drift] table"))?
                    .build("model.drift")?;
                let vol = self
                    .vol
                    .as_ref()
                    .ok_or_else(|| CliError::config("kind = \"custom\" requires a [model.vol] table"))?
                    .build("model.vol")?;
                let noise = match &self.noise {
                    Some(n) => n.build()?,
                    None => NoiseSpec::standard_gaussian(),
                };
                let name = self.name.clone().unwrap_or_else(|| "custom".to_string());
                MarketModel::custom(name, drift, vol, noise, self.x0.unwrap_or(0.0))
                    .map_err(build_err)?
            }
        };
        match (self.kind, self.x0) {
            (ModelKind::Custom, _) | (_, None) => Ok(model),
            (_, Some(x0)) => model.with_x0(x0).map_err(build_err),
        }
    }
}

impl MapConfig {
    fn build(&self, at: &str) -> Result<RealMap, CliError> {
        let table_only = [
            ("x", self.x.is_some()),
            ("y", self.y.is_some()),
            ("extrapolation", self.extrapolation.is_some()),
        ];
        match self.kind {
            MapKind::Affine => {
                reject_stray(
                    "affine",
                    &[
                        ("sigma0", self.sigma0.is_some()),
                        ("c_lo", self.c_lo.is_some()),
                        ("c_hi", self.c_hi.is_some()),
                    ],
                )?;
                reject_stray("affine", &table_only)?;
                Ok(RealMap::Affine {
                    slope: require_at(at, "affine", "slope", self.slope)?,
                    intercept: require_at(at, "affine", "intercept", self.intercept)?,
                })
            }
            MapKind::ClampedSqrtVol => {
                reject_stray(
                    "clamped_sqrt_vol",
                    &[("slope", self.slope.is_some()), ("intercept", self.intercept.is_some())],
                )?;
                reject_stray("clamped_sqrt_vol", &table_only)?;
                Ok(RealMap::ClampedSqrtVol {
                    sigma0: require_at(at, "clamped_sqrt_vol", "sigma0", self.sigma0)?,
                    c_lo: require_at(at, "clamped_sqrt_vol", "c_lo", self.c_lo)?,
                    c_hi: require_at(at, "clamped_sqrt_vol", "c_hi", self.c_hi)?,
                })
            }
            MapKind::Table => {
                reject_stray(
                    "table",
                    &[
                        ("slope", self.slope.is_some()),
                        ("intercept", self.intercept.is_some()),
                        ("sigma0", self.sigma0.is_some()),
                        ("c_lo", self.c_lo.is_some()),
                        ("c_hi", self.c_hi.is_some()),
                    ],
                )?;
                let xs = self
                    .x
                    .clone()
                    .ok_or_else(|| CliError::config(format!("{at}: table map requires 'x'")))?;
                let ys = self
                    .y
                    .clone()
                    .ok_or_else(|| CliError::config(format!("{at}: table map requires 'y'")))?;
                let extrap = match self.extrapolation.unwrap_or(ExtrapolationKind::Clamp) {
                    ExtrapolationKind::Clamp => Extrapolation::Clamp,
                    ExtrapolationKind::Linear => Extrapolation::Linear,
                };
                PiecewiseLinear::new(xs, ys, extrap)
                    .map(RealMap::Table)
                    .map_err(|e| CliError::config(format!("{at}: {e}")))
            }
        }
    }
}

fn require_at<T: Copy>(at: &str, kind: &str, name: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::config(format!("{at}: kind = \"{kind}\" requires field '{name}'")))
}

impl NoiseConfig {
    fn build(&self) -> Result<NoiseSpec, CliError> {
        match self.kind {
            NoiseKind::Gaussian => {
                reject_stray("gaussian", &[("points", self.points.is_some())])?;
                NoiseSpec::gaussian(self.mean.unwrap_or(0.0), self.sd.unwrap_or(1.0))
                    .map_err(build_err)
            }
            NoiseKind::Table => {
                reject_stray(
                    "table",
                    &[("mean", self.mean.is_some()), ("sd", self.sd.is_some())],
                )?;
                let pts: Vec<(f64, f64)> = self
                    .points
                    .as_ref()
                    .ok_or_else(|| CliError::config("tabulated noise requires 'points'"))?
                    .iter()
                    .map(|&[x, m]| (x, m))
                    .collect();
                NoiseSpec::tabulated(&pts).map_err(build_err)
            }
        }
    }
}

impl StrategyConfig {
    pub fn build(&self) -> Result<Strategy, CliError> {
        match self.kind {
            StrategyKind::PositiveDrift => {
                reject_stray(
                    "positive_drift",
                    &[("fraction", self.fraction.is_some()), ("rows", self.rows.is_some())],
                )?;
                Ok(Strategy::PositiveDriftIndicator)
            }
            StrategyKind::Full => {
                reject_stray(
                    "full",
                    &[("fraction", self.fraction.is_some()), ("rows", self.rows.is_some())],
                )?;
                Ok(Strategy::FullInvest)
            }
            StrategyKind::Constant => {
                reject_stray("constant", &[("rows", self.rows.is_some())])?;
                Strategy::constant(require("constant", "fraction", self.fraction)?)
                    .map_err(build_err)
            }
            StrategyKind::Table => {
                reject_stray("table", &[("fraction", self.fraction.is_some())])?;
                let rows: Vec<(f64, f64, f64)> = self
                    .rows
                    .as_ref()
                    .ok_or_else(|| CliError::config("kind = \"table\" requires 'rows'"))?
                    .iter()
                    .map(|&[lo, hi, f]| (lo, hi, f))
                    .collect();
                Strategy::table(rows).map_err(build_err)
            }
        }
    }
}

impl ExperimentConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("longrun-out"))
    }

    /// The `[model]` table, which every analysis command needs.
    pub fn require_model(&self) -> Result<MarketModel, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::config("this command requires a [model] table"))?
            .build()
    }

    /// The `[strategy]` table; invest-on-positive-drift when omitted.
    pub fn strategy_or_default(&self) -> Result<Strategy, CliError> {
        match &self.strategy {
            Some(s) => s.build(),
            None => Ok(Strategy::PositiveDriftIndicator),
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive. Values within a
/// billionth of a step of zero are snapped to exactly zero, so symmetric
/// grids contain the origin exactly.
pub fn linspace(lo: f64, hi: f64, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::config(format!(
            "{what} needs finite bounds with min < max, got [{lo}, {hi}]"
        )));
    }
    if n < 2 {
        return Err(CliError::config(format!("{what} needs at least 2 points, got {n}")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let v = if i + 1 == n { hi } else { lo + i as f64 * step };
            if v.abs() < step * 1e-9 {
                0.0
            } else {
                v
            }
        })
        .collect())
}

/// Strictly increasing positive horizons; rejected here so grid mistakes
/// fail before any simulation starts.
pub fn check_t_grid(grid: &[u64], what: &str) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::config(format!("{what} must not be empty")));
    }
    if grid[0] == 0 {
        return Err(CliError::config(format!("{what} horizons start at 1")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config(format!("{what} must be strictly increasing")));
    }
    Ok(())
}
