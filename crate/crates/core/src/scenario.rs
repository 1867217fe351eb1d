//! JSON experiment configs and the runners behind the `masim` CLI.
//!
//! A [`ScenarioConfig`] describes the carrier, moving region, transmit array,
//! receiver, eavesdroppers, power budget and optimizer. Each runner computes
//! its experiment, writes CSV (or JSON) files under an output directory and
//! returns an [`ExperimentReport`] that lists every file with its SHA-256
//! digest. The report is also written as `report.json`.
//!
//! CSV files have a single header line, `\n` line endings and floats in
//! `{:.16e}` form (17 significant digits). Given the same config and seed the
//! CSV bytes do not depend on the number of worker threads.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::beamforming::{beam_pattern, focus_map, zf_weights, CartesianGrid, LinkBudget, DB_FLOOR};
use crate::channel::{point_response, steering_vector, AmplitudeModel, CarrierSpec, ChannelSpec, Direction, PolarLocation};
use crate::error::{Error, Result};
use crate::geometry::{make_ula, make_upa, ArrayLayout, Dim, MovingRegion, PlacementConstraints, Point};
use crate::optimize::{
    alternating_apv_awv, beam_nulling_optimize, evaluate_objective, exhaustive_search, greedy_sequential_placement,
    pso_optimize, ObjectiveSpec, OptimizationResult, OptimizerParams, WeightRule,
};

pub const DEFAULT_NOISE_POWER_DBM: f64 = -80.0;
pub const DEFAULT_TX_POWER_DBM: f64 = 20.0;
pub const DEFAULT_MIN_SPACING_WAVELENGTHS: f64 = 0.5;
/// Spacing of conventional (fixed) arrays unless the config says otherwise.
pub const DEFAULT_ARRAY_SPACING_WAVELENGTHS: f64 = 0.5;
pub const DEFAULT_ANTENNA_COUNTS: [usize; 5] = [4, 8, 16, 36, 64];
pub const DEFAULT_POWERS_DBM: [f64; 2] = [20.0, 30.0];
pub const DEFAULT_RESOLUTION_DEG: f64 = 0.1;
pub const DEFAULT_FOCUS_SAMPLES: usize = 200;
pub const DEFAULT_FOCUS_PADDING_M: f64 = 2.5;

pub const BEAMPATTERN_HEADER: &str = "theta_deg,gain_db";
pub const FOCUSMAP_HEADER: &str = "x_m,y_m,gain_db";
pub const SECRECY_HEADER: &str = "m,power_dbm,rs_ma,rs_sparse,rs_dense";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier: CarrierConfig,
    pub region: RegionConfig,
    pub tx_array: TxArrayConfig,
    pub rx: UserLocation,
    #[serde(default)]
    pub eavesdroppers: Vec<UserLocation>,
    /// Accepted and echoed; none of the transmit-side experiments use them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jammers: Vec<UserLocation>,
    #[serde(default)]
    pub budget: BudgetConfig,
    /// Amplitude model of the near-field channels seen by the optimizer.
    #[serde(default)]
    pub amplitude: AmplitudeModel,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub beampattern: BeampatternConfig,
    #[serde(default)]
    pub focusmap: FocusmapConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierConfig {
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub dim: Dim,
    pub extent_wavelengths: f64,
    #[serde(default = "default_min_spacing")]
    pub min_spacing_wavelengths: f64,
}

fn default_min_spacing() -> f64 {
    DEFAULT_MIN_SPACING_WAVELENGTHS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayMode {
    Ma,
    Ula,
    Upa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxArrayConfig {
    pub mode: ArrayMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_wavelengths: Option<f64>,
}

/// A far-field direction (`{"theta_deg"}` or `{"ux", "uy"}`) or a polar
/// location (`{"d_m", "phi_rad"}`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "RawLocation")]
pub enum UserLocation {
    Direction(Direction),
    Polar(PolarLocation),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLocation {
    theta_deg: Option<f64>,
    ux: Option<f64>,
    uy: Option<f64>,
    d_m: Option<f64>,
    phi_rad: Option<f64>,
}

impl TryFrom<RawLocation> for UserLocation {
    type Error = String;

    fn try_from(r: RawLocation) -> std::result::Result<Self, String> {
        let located = match (r.theta_deg, r.ux, r.uy, r.d_m, r.phi_rad) {
            (Some(theta_deg), None, None, None, None) => Direction::axis(theta_deg).map(UserLocation::Direction),
            (None, Some(ux), Some(uy), None, None) => {
                let d = Direction::Planar { ux, uy };
                d.validate().map(|_| UserLocation::Direction(d))
            }
            (None, None, None, Some(d_m), Some(phi_rad)) => PolarLocation::new(d_m, phi_rad).map(UserLocation::Polar),
            _ => return Err("expected {theta_deg}, {ux, uy} or {d_m, phi_rad}".into()),
        };
        located.map_err(|e| e.to_string())
    }
}

impl UserLocation {
    fn direction(&self) -> Option<Direction> {
        match self {
            UserLocation::Direction(d) => Some(*d),
            UserLocation::Polar(_) => None,
        }
    }

    fn polar(&self) -> Option<PolarLocation> {
        match self {
            UserLocation::Polar(p) => Some(*p),
            UserLocation::Direction(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            noise_power_dbm: DEFAULT_NOISE_POWER_DBM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gradient,
    Greedy,
    Pso,
    Alternating,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    NullDepth,
    Secrecy,
    Leakage,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Each experiment has its own default when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Overrides `params.seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Only read by the `optimize` command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveKind>,
    pub weight_rule: WeightRule,
    pub params: OptimizerParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeampatternConfig {
    /// Must divide 180.
    pub resolution_deg: f64,
}

impl Default for BeampatternConfig {
    fn default() -> Self {
        BeampatternConfig {
            resolution_deg: DEFAULT_RESOLUTION_DEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocusmapConfig {
    /// Region sizes to compare; `None` uses `region.extent_wavelengths`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extents_wavelengths: Option<Vec<f64>>,
    pub nx: usize,
    pub ny: usize,
    /// Margin around the bounding box of the receiver and eavesdroppers.
    pub padding_m: f64,
    /// Amplitude model of the heat map itself.
    pub amplitude: AmplitudeModel,
}

impl Default for FocusmapConfig {
    fn default() -> Self {
        FocusmapConfig {
            extents_wavelengths: None,
            nx: DEFAULT_FOCUS_SAMPLES,
            ny: DEFAULT_FOCUS_SAMPLES,
            padding_m: DEFAULT_FOCUS_PADDING_M,
            amplitude: AmplitudeModel::Unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub antenna_counts: Vec<usize>,
    pub powers_dbm: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            antenna_counts: DEFAULT_ANTENNA_COUNTS.to_vec(),
            powers_dbm: DEFAULT_POWERS_DBM.to_vec(),
        }
    }
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub beampattern_fpa: String,
    pub beampattern_ma: String,
    /// `{extent}` is replaced by the extent in wavelengths.
    pub focusmap: String,
    pub secrecy: String,
    pub optimize: String,
    pub report: String,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            beampattern_fpa: "beampattern_fpa.csv".into(),
            beampattern_ma: "beampattern_ma.csv".into(),
            focusmap: "focusmap_A{extent}.csv".into(),
            secrecy: "secrecy_sweep.csv".into(),
            optimize: "optimize_result.json".into(),
            report: "report.json".into(),
        }
    }
}

/// Reads and validates a config file. Parse and schema errors name the
/// offending field path.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." || path == "?" { "(root)".to_string() } else { path };
        Error::config(field, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

fn positive(value: f64, field: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {value}")))
    }
}

fn finite(value: f64, field: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {value}")))
    }
}

fn relative_file(name: &str, field: &str) -> Result<()> {
    let p = Path::new(name);
    if name.is_empty() || p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return Err(Error::config(field, format!("must be a relative path inside the output directory, got {name:?}")));
    }
    Ok(())
}

fn near_square(m: usize) -> (usize, usize) {
    let rows = (1..=m).take_while(|r| r * r <= m).filter(|r| m % r == 0).max().unwrap_or(1);
    (rows, m / rows)
}

impl ScenarioConfig {
    /// Checks every invariant that does not depend on the experiment.
    pub fn validate(&self) -> Result<()> {
        positive(self.carrier.frequency_hz, "carrier.frequency_hz")?;
        positive(self.region.extent_wavelengths, "region.extent_wavelengths")?;
        let s = self.region.min_spacing_wavelengths;
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::config(
                "region.min_spacing_wavelengths",
                format!("must be non-negative and finite, got {s}"),
            ));
        }
        let tx = &self.tx_array;
        if let Some(sp) = tx.spacing_wavelengths {
            positive(sp, "tx_array.spacing_wavelengths")?;
        }
        for (v, field) in [(tx.n, "tx_array.n"), (tx.rows, "tx_array.rows"), (tx.cols, "tx_array.cols")] {
            if v == Some(0) {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        match tx.mode {
            ArrayMode::Ma | ArrayMode::Ula => {
                if tx.n.is_none() {
                    return Err(Error::config("tx_array.n", "required for modes \"ma\" and \"ula\""));
                }
                if tx.rows.is_some() || tx.cols.is_some() {
                    return Err(Error::config("tx_array", "rows and cols only apply to mode \"upa\""));
                }
                if tx.mode == ArrayMode::Ula && self.region.dim != Dim::One {
                    return Err(Error::config("tx_array.mode", "a ULA needs a 1D region"));
                }
            }
            ArrayMode::Upa => {
                if self.region.dim != Dim::Two {
                    return Err(Error::config("tx_array.mode", "a UPA needs a 2D region"));
                }
                match (tx.rows, tx.cols, tx.n) {
                    (Some(r), Some(c), n) => {
                        if n.is_some_and(|n| n != r * c) {
                            return Err(Error::config("tx_array.n", "must equal rows × cols"));
                        }
                    }
                    (None, None, Some(_)) => {}
                    _ => return Err(Error::config("tx_array", "mode \"upa\" needs rows and cols, or n")),
                }
            }
        }
        let b = &self.budget;
        finite(b.tx_power_dbm, "budget.tx_power_dbm")?;
        finite(b.noise_power_dbm, "budget.noise_power_dbm")?;
        self.optimizer
            .params
            .validate()
            .map_err(|e| Error::config("optimizer.params", e.to_string()))?;
        let r = self.beampattern.resolution_deg;
        positive(r, "beampattern.resolution_deg")?;
        let steps = (180.0 / r).round();
        if steps < 1.0 || (steps * r - 180.0).abs() > 1e-9 {
            return Err(Error::config("beampattern.resolution_deg", format!("must divide 180, got {r}")));
        }
        let f = &self.focusmap;
        if let Some(extents) = &f.extents_wavelengths {
            if extents.is_empty() {
                return Err(Error::config("focusmap.extents_wavelengths", "must not be empty"));
            }
            for (i, &e) in extents.iter().enumerate() {
                positive(e, &format!("focusmap.extents_wavelengths[{i}]"))?;
            }
            if extents.len() > 1 && !self.outputs.focusmap.contains("{extent}") {
                return Err(Error::config("outputs.focusmap", "needs an {extent} placeholder for several extents"));
            }
        }
        if f.nx == 0 || f.ny == 0 {
            return Err(Error::config("focusmap", "nx and ny must be at least 1"));
        }
        if !(f.padding_m >= 0.0 && f.padding_m.is_finite()) {
            return Err(Error::config("focusmap.padding_m", "must be non-negative and finite"));
        }
        if self.sweep.antenna_counts.is_empty() {
            return Err(Error::config("sweep.antenna_counts", "must not be empty"));
        }
        if let Some(i) = self.sweep.antenna_counts.iter().position(|&m| m == 0) {
            return Err(Error::config(format!("sweep.antenna_counts[{i}]"), "must be at least 1"));
        }
        if self.sweep.powers_dbm.is_empty() {
            return Err(Error::config("sweep.powers_dbm", "must not be empty"));
        }
        for (i, &p) in self.sweep.powers_dbm.iter().enumerate() {
            finite(p, &format!("sweep.powers_dbm[{i}]"))?;
        }
        let o = &self.outputs;
        for (name, field) in [
            (&o.beampattern_fpa, "outputs.beampattern_fpa"),
            (&o.beampattern_ma, "outputs.beampattern_ma"),
            (&o.focusmap, "outputs.focusmap"),
            (&o.secrecy, "outputs.secrecy"),
            (&o.optimize, "outputs.optimize"),
            (&o.report, "outputs.report"),
        ] {
            relative_file(name, field)?;
        }
        Ok(())
    }

    /// Applies command-line overrides for the seed and candidate-grid density.
    pub fn apply_overrides(&mut self, seed: Option<u64>, grid_points_per_wavelength: Option<f64>) -> Result<()> {
        if let Some(seed) = seed {
            self.optimizer.seed = Some(seed);
        }
        if let Some(g) = grid_points_per_wavelength {
            positive(g, "--grid")?;
            self.optimizer.params.grid_points_per_wavelength = Some(g);
        }
        Ok(())
    }

    pub fn carrier(&self) -> Result<CarrierSpec> {
        CarrierSpec::from_frequency(self.carrier.frequency_hz)
    }

    pub fn seed(&self) -> u64 {
        self.optimizer.seed.unwrap_or(self.optimizer.params.seed)
    }

    /// Optimizer parameters with the resolved seed.
    pub fn params(&self) -> OptimizerParams {
        OptimizerParams {
            seed: self.seed(),
            ..self.optimizer.params
        }
    }

    pub fn constraints(&self, extent_wavelengths: f64, carrier: &CarrierSpec) -> Result<PlacementConstraints> {
        let lambda = carrier.wavelength_m;
        PlacementConstraints::new(
            MovingRegion::new(self.region.dim, extent_wavelengths * lambda)?,
            self.region.min_spacing_wavelengths * lambda,
        )
    }

    fn budget_at(&self, tx_power_dbm: f64) -> LinkBudget {
        LinkBudget {
            tx_power_dbm,
            noise_power_dbm: self.budget.noise_power_dbm,
        }
    }

    fn array_spacing_m(&self, carrier: &CarrierSpec) -> f64 {
        self.tx_array.spacing_wavelengths.unwrap_or(DEFAULT_ARRAY_SPACING_WAVELENGTHS) * carrier.wavelength_m
    }

    fn element_count(&self) -> usize {
        let tx = &self.tx_array;
        tx.n.unwrap_or_else(|| tx.rows.unwrap_or(1) * tx.cols.unwrap_or(1))
    }

    /// The conventional array described by `tx_array`, or a λ/2-style
    /// reference array of the same size for mode `"ma"`.
    fn reference_layout(&self, carrier: &CarrierSpec) -> Result<ArrayLayout> {
        let spacing = self.array_spacing_m(carrier);
        let tx = &self.tx_array;
        match self.region.dim {
            Dim::One => make_ula(self.element_count(), spacing, 0.0),
            Dim::Two => {
                let (rows, cols) = match (tx.rows, tx.cols) {
                    (Some(r), Some(c)) => (r, c),
                    _ => near_square(self.element_count()),
                };
                make_upa(rows, cols, spacing)
            }
        }
    }

    fn require_dim(&self, dim: Dim, experiment: &str) -> Result<()> {
        if self.region.dim != dim {
            return Err(Error::config(
                "region.dim",
                format!("{experiment} needs a {}D region", if dim == Dim::One { 1 } else { 2 }),
            ));
        }
        Ok(())
    }

    fn axis_directions(&self, experiment: &str) -> Result<(Direction, Vec<Direction>)> {
        let needs = |field: String| Error::config(field, format!("{experiment} needs a {{theta_deg}} direction"));
        let rx = match self.rx.direction() {
            Some(d @ Direction::Axis { .. }) => d,
            _ => return Err(needs("rx".into())),
        };
        let eves = self
            .eavesdroppers
            .iter()
            .enumerate()
            .map(|(i, e)| match e.direction() {
                Some(d @ Direction::Axis { .. }) => Ok(d),
                _ => Err(needs(format!("eavesdroppers[{i}]"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((rx, eves))
    }

    fn polar_locations(&self, experiment: &str) -> Result<(PolarLocation, Vec<PolarLocation>)> {
        let needs = |field: String| Error::config(field, format!("{experiment} needs a {{d_m, phi_rad}} location"));
        let rx = self.rx.polar().ok_or_else(|| needs("rx".into()))?;
        let eves = self
            .eavesdroppers
            .iter()
            .enumerate()
            .map(|(i, e)| e.polar().ok_or_else(|| needs(format!("eavesdroppers[{i}]"))))
            .collect::<Result<Vec<_>>>()?;
        Ok((rx, eves))
    }

    fn method_or(&self, default: Method) -> Method {
        self.optimizer.method.unwrap_or(default)
    }
}

fn checked_objective(spec: ObjectiveSpec) -> Result<ObjectiveSpec> {
    spec.validate().map_err(|e| Error::config("eavesdroppers", e.to_string()))?;
    Ok(spec)
}

fn check_method(method: Method, spec: &ObjectiveSpec) -> Result<()> {
    if method == Method::Gradient && !matches!(spec, ObjectiveSpec::NullDepth { .. }) {
        return Err(Error::config(
            "optimizer.method",
            "gradient only optimizes the null_depth objective; use greedy, pso, alternating or exhaustive",
        ));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    method: Method,
    spec: &ObjectiveSpec,
    n: usize,
    init: &ArrayLayout,
    rule: WeightRule,
    carrier: &CarrierSpec,
    constraints: &PlacementConstraints,
    params: &OptimizerParams,
) -> Result<OptimizationResult> {
    match method {
        Method::Gradient => beam_nulling_optimize(spec, n, carrier, constraints, params),
        Method::Greedy => greedy_sequential_placement(spec, n, carrier, constraints, params),
        Method::Pso => pso_optimize(spec, n, carrier, constraints, params),
        Method::Exhaustive => exhaustive_search(spec, n, carrier, constraints, params),
        Method::Alternating => alternating_apv_awv(spec, init, carrier, constraints, params, rule),
    }
}

/// `{:.16e}`: 17 significant digits, locale-free.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub resolved: serde_json::Value,
    pub summary: serde_json::Value,
    pub files: Vec<FileDigest>,
    pub wall_clock_s: f64,
}

struct OutputWriter<'a> {
    dir: &'a Path,
    files: Vec<FileDigest>,
}

impl<'a> OutputWriter<'a> {
    fn new(dir: &'a Path) -> Self {
        OutputWriter { dir, files: Vec::new() }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.dir.join(name), bytes)?;
        self.files.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn finish(self, config: &ScenarioConfig, experiment: &str, resolved: serde_json::Value, summary: serde_json::Value, started: Instant) -> Result<ExperimentReport> {
        let report = ExperimentReport {
            experiment: experiment.to_string(),
            seed: config.seed(),
            config: config.clone(),
            resolved,
            summary,
            files: self.files,
            wall_clock_s: started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        write_file(&self.dir.join(&config.outputs.report), text.as_bytes())?;
        Ok(report)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn resolved_common(config: &ScenarioConfig, carrier: &CarrierSpec, method: Option<Method>) -> serde_json::Value {
    let params = config.params();
    json!({
        "wavelength_m": carrier.wavelength_m,
        "extent_m": config.region.extent_wavelengths * carrier.wavelength_m,
        "min_spacing_m": config.region.min_spacing_wavelengths * carrier.wavelength_m,
        "tx_power_dbm": config.budget.tx_power_dbm,
        "noise_power_dbm": config.budget.noise_power_dbm,
        "method": method,
        "grid_points_per_wavelength": params.grid_density(config.region.dim),
        "optimizer_params": params,
        "prng": "ChaCha8, one stream per multistart or swarm",
    })
}

fn db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Both far-field patterns of the beam-pattern experiment, in dB relative to
/// the full array gain `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternRun {
    pub theta_grid_deg: Vec<f64>,
    pub fpa_layout: ArrayLayout,
    pub fpa_db: Vec<f64>,
    /// `|wᴴa(θ₀)|² / n` for the zero-forcing ULA.
    pub fpa_retained_fraction: f64,
    pub ma: OptimizationResult,
    pub ma_db: Vec<f64>,
    /// `|wᴴa(θ₀)|²` for the movable array.
    pub ma_target_gain: f64,
    /// Per eavesdropper, relative to the full array gain.
    pub ma_eve_gains_db: Vec<f64>,
    pub method: Method,
}

fn theta_grid(resolution_deg: f64) -> Vec<f64> {
    let steps = (180.0 / resolution_deg).round() as usize;
    (0..=steps).map(|i| 180.0 * i as f64 / steps as f64).collect()
}

/// Zero-forcing on a fixed ULA versus beam nulling with a movable array.
///
/// With no eavesdroppers there is nothing to null; the movable array keeps
/// the reference ULA and both patterns are the MRT pattern.
pub fn compute_beampattern(config: &ScenarioConfig) -> Result<BeampatternRun> {
    config.require_dim(Dim::One, "beampattern")?;
    if config.tx_array.mode == ArrayMode::Upa {
        return Err(Error::config("tx_array.mode", "beampattern uses \"ma\" or \"ula\""));
    }
    let (rx, eves) = config.axis_directions("beampattern")?;
    let carrier = config.carrier()?;
    let n = config.element_count();
    let grid = theta_grid(config.beampattern.resolution_deg);
    let params = config.params();
    let constraints = config.constraints(config.region.extent_wavelengths, &carrier)?;

    let fpa_layout = config.reference_layout(&carrier)?;
    let a0 = steering_vector(&fpa_layout, &rx, &carrier)?;
    let nulls = eves
        .iter()
        .map(|e| steering_vector(&fpa_layout, e, &carrier))
        .collect::<Result<Vec<_>>>()?;
    let w_fpa = zf_weights(&a0, &nulls)?;
    let fpa_pattern = beam_pattern(&fpa_layout, &w_fpa, &grid, &carrier)?;
    let fpa_retained_fraction = w_fpa.response(a0.entries()).norm_sqr() / n as f64;

    let method = config.method_or(Method::Gradient);
    let ma = if eves.is_empty() {
        let spec = ObjectiveSpec::NullDepth { target: rx, nulls: vec![] };
        let weights = crate::optimize::target_weights(&spec, &fpa_layout, &carrier)?;
        OptimizationResult {
            layout: fpa_layout.clone(),
            weights,
            objective_value: 0.0,
            iterations: 0,
            converged: true,
            trace: None,
        }
    } else {
        let spec = checked_objective(ObjectiveSpec::NullDepth { target: rx, nulls: eves.clone() })?;
        check_method(method, &spec)?;
        let init = fpa_layout.clone();
        run_method(method, &spec, n, &init, config.optimizer.weight_rule, &carrier, &constraints, &params)?
    };
    let ma_pattern = beam_pattern(&ma.layout, &ma.weights, &grid, &carrier)?;
    let ma_target_gain = ma
        .weights
        .response(steering_vector(&ma.layout, &rx, &carrier)?.entries())
        .norm_sqr();
    let ma_eve_gains_db = eves
        .iter()
        .map(|e| {
            let a = steering_vector(&ma.layout, e, &carrier)?;
            Ok(db(ma.weights.response(a.entries()).norm_sqr() / n as f64))
        })
        .collect::<Result<Vec<_>>>()?;

    let to_full_gain = |p: &crate::beamforming::BeamPattern| -> Vec<f64> {
        let offset = db(p.peak_gain / n as f64);
        p.gains_db.iter().map(|g| (g + offset).max(DB_FLOOR)).collect()
    };
    Ok(BeampatternRun {
        fpa_db: to_full_gain(&fpa_pattern),
        ma_db: to_full_gain(&ma_pattern),
        theta_grid_deg: grid,
        fpa_layout,
        fpa_retained_fraction,
        ma,
        ma_target_gain,
        ma_eve_gains_db,
        method,
    })
}

fn pattern_csv(theta: &[f64], gains_db: &[f64]) -> String {
    csv(
        BEAMPATTERN_HEADER,
        theta
            .iter()
            .zip(gains_db)
            .map(|(t, g)| format!("{},{}", format_float(*t), format_float(*g))),
    )
}

pub fn run_beampattern(config: &ScenarioConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let started = Instant::now();
    let run = compute_beampattern(config)?;
    let carrier = config.carrier()?;
    let mut out = OutputWriter::new(out_dir);
    out.write(&config.outputs.beampattern_fpa, pattern_csv(&run.theta_grid_deg, &run.fpa_db).as_bytes())?;
    out.write(&config.outputs.beampattern_ma, pattern_csv(&run.theta_grid_deg, &run.ma_db).as_bytes())?;
    let mut resolved = resolved_common(config, &carrier, Some(run.method));
    resolved["theta_grid"] = json!({
        "start_deg": 0.0,
        "stop_deg": 180.0,
        "points": run.theta_grid_deg.len(),
    });
    resolved["fpa_spacing_m"] = json!(config.array_spacing_m(&carrier));
    resolved["gain_reference"] = json!("dB relative to the full array gain n");
    let summary = json!({
        "n": config.element_count(),
        "fpa_retained_fraction": run.fpa_retained_fraction,
        "fpa_target_gain_db": db(run.fpa_retained_fraction),
        "ma_objective_value": run.ma.objective_value,
        "ma_target_gain": run.ma_target_gain,
        "ma_eve_gains_db": run.ma_eve_gains_db,
        "ma_iterations": run.ma.iterations,
        "ma_converged": run.ma.converged,
        "ma_positions_m": run.ma.layout.xs(),
    });
    out.finish(config, "beampattern", resolved, summary, started)
}

/// Heat map for one region size.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusmapPanel {
    pub extent_wavelengths: f64,
    pub result: OptimizationResult,
    pub points: Vec<Point>,
    pub gains_db: Vec<f64>,
    /// Samples within 3 dB of the map peak.
    pub focal_cell_count: usize,
    /// Gain at each eavesdropper relative to the map peak.
    pub eve_gains_db: Vec<f64>,
    pub rx_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocusmapRun {
    pub grid: CartesianGrid,
    pub panels: Vec<FocusmapPanel>,
    pub method: Method,
}

fn focus_grid(config: &ScenarioConfig, rx: &PolarLocation, eves: &[PolarLocation]) -> CartesianGrid {
    let pts: Vec<Point> = std::iter::once(rx).chain(eves).map(PolarLocation::to_point).collect();
    let pad = config.focusmap.padding_m;
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&Point) -> f64| pts.iter().map(pick).fold(init, f);
    CartesianGrid {
        x_min: fold(f64::min, f64::INFINITY, |p| p.x) - pad,
        x_max: fold(f64::max, f64::NEG_INFINITY, |p| p.x) + pad,
        y_min: fold(f64::min, f64::INFINITY, |p| p.y) - pad,
        y_max: fold(f64::max, f64::NEG_INFINITY, |p| p.y) + pad,
        nx: config.focusmap.nx,
        ny: config.focusmap.ny,
    }
}

fn focus_extents(config: &ScenarioConfig) -> Vec<f64> {
    config
        .focusmap
        .extents_wavelengths
        .clone()
        .unwrap_or_else(|| vec![config.region.extent_wavelengths])
}

/// Secrecy-optimized placement and its MRT heat map for each region size.
pub fn compute_focusmap(config: &ScenarioConfig) -> Result<FocusmapRun> {
    config.require_dim(Dim::Two, "focusmap")?;
    let (rx, eves) = config.polar_locations("focusmap")?;
    let carrier = config.carrier()?;
    let n = config.element_count();
    let params = config.params();
    let method = config.method_or(Method::Greedy);
    let spec = checked_objective(ObjectiveSpec::SecrecyRateNearField {
        rx,
        eves: eves.clone(),
        budget: config.budget_at(config.budget.tx_power_dbm),
        amplitude: config.amplitude,
    })?;
    check_method(method, &spec)?;
    let grid = focus_grid(config, &rx, &eves);
    let points = grid.points();
    let amp = config.focusmap.amplitude;
    let init = config.reference_layout(&carrier)?;

    let panels = focus_extents(config)
        .into_iter()
        .map(|extent| {
            let constraints = config.constraints(extent, &carrier)?;
            let result = run_method(method, &spec, n, &init, config.optimizer.weight_rule, &carrier, &constraints, &params)?;
            let map = focus_map(&result.layout, &result.weights, &points, &carrier, amp)?;
            let rel = |p: &PolarLocation| -> Result<f64> {
                let h = point_response(&result.layout, &p.to_point(), &carrier, amp)?;
                Ok(db(result.weights.response(h.entries()).norm_sqr() / map.peak_gain))
            };
            Ok(FocusmapPanel {
                extent_wavelengths: extent,
                focal_cell_count: map.focal_cell_count(),
                eve_gains_db: eves.iter().map(rel).collect::<Result<Vec<_>>>()?,
                rx_gain_db: rel(&rx)?,
                points: map.points,
                gains_db: map.gains_db,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FocusmapRun { grid, panels, method })
}

pub fn focusmap_file_name(template: &str, extent_wavelengths: f64) -> String {
    template.replace("{extent}", &format!("{extent_wavelengths}"))
}

pub fn run_focusmap(config: &ScenarioConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let started = Instant::now();
    let run = compute_focusmap(config)?;
    let carrier = config.carrier()?;
    let mut out = OutputWriter::new(out_dir);
    let mut panels = Vec::new();
    for p in &run.panels {
        let body = csv(
            FOCUSMAP_HEADER,
            p.points.iter().zip(&p.gains_db).map(|(pt, g)| {
                format!("{},{},{}", format_float(pt.x), format_float(pt.y), format_float(*g))
            }),
        );
        let name = focusmap_file_name(&config.outputs.focusmap, p.extent_wavelengths);
        out.write(&name, body.as_bytes())?;
        panels.push(json!({
            "extent_wavelengths": p.extent_wavelengths,
            "file": name,
            "secrecy_rate": p.result.objective_value,
            "focal_cell_count": p.focal_cell_count,
            "rx_gain_db": p.rx_gain_db,
            "eve_gains_db": p.eve_gains_db,
        }));
    }
    let mut resolved = resolved_common(config, &carrier, Some(run.method));
    resolved["focus_grid"] = serde_json::to_value(run.grid).expect("grid serializes");
    resolved["focus_amplitude"] = serde_json::to_value(config.focusmap.amplitude).expect("amplitude serializes");
    resolved["extents_wavelengths"] = json!(focus_extents(config));
    let summary = json!({ "n": config.element_count(), "panels": panels });
    out.finish(config, "focusmap", resolved, summary, started)
}

/// One row of the secrecy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub power_dbm: f64,
    pub rs_ma: f64,
    pub rs_sparse: f64,
    pub rs_dense: f64,
}

/// Fixed planar array used as a comparison point in the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpaArrangement {
    pub m: usize,
    pub rows: usize,
    pub cols: usize,
    pub sparse_spacing_m: f64,
    pub dense_spacing_m: f64,
}

/// Near-square `rows × cols = m` with rows the largest divisor not above
/// `√m`. The sparse spacing is `A/⌈√m⌉`, reduced when needed so the longer
/// side still fits in the region.
pub fn sweep_arrangement(m: usize, extent_m: f64, wavelength_m: f64) -> UpaArrangement {
    let (rows, cols) = near_square(m);
    let ceil_sqrt = (1..).find(|k: &usize| k * k >= m).unwrap_or(1);
    let mut sparse = extent_m / ceil_sqrt as f64;
    if cols > 1 {
        sparse = sparse.min(extent_m / (cols - 1) as f64);
    }
    UpaArrangement {
        m,
        rows,
        cols,
        sparse_spacing_m: sparse,
        dense_spacing_m: DEFAULT_ARRAY_SPACING_WAVELENGTHS * wavelength_m,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub rows: Vec<SweepRow>,
    pub arrangements: Vec<UpaArrangement>,
    pub method: Method,
}

/// Secrecy rate against antenna count for the movable array and the sparse
/// and dense fixed arrays, at each transmit power.
///
/// Greedy placement adds one antenna at a time, so a single greedy run with
/// the largest count yields every smaller count as a prefix; other methods
/// are re-run per count.
pub fn compute_secrecy_sweep(config: &ScenarioConfig) -> Result<SweepRun> {
    config.require_dim(Dim::Two, "secrecy")?;
    let (rx, eves) = config.polar_locations("secrecy")?;
    let carrier = config.carrier()?;
    let params = OptimizerParams {
        record_trace: true,
        ..config.params()
    };
    let method = config.method_or(Method::Greedy);
    let extent_m = config.region.extent_wavelengths * carrier.wavelength_m;
    let constraints = config.constraints(config.region.extent_wavelengths, &carrier)?;
    let counts = &config.sweep.antenna_counts;
    let max_m = *counts.iter().max().expect("validated non-empty");
    let arrangements: Vec<UpaArrangement> = counts
        .iter()
        .map(|&m| sweep_arrangement(m, extent_m, carrier.wavelength_m))
        .collect();

    let mut rows = Vec::with_capacity(counts.len() * config.sweep.powers_dbm.len());
    for &power in &config.sweep.powers_dbm {
        let spec = checked_objective(ObjectiveSpec::SecrecyRateNearField {
            rx,
            eves: eves.clone(),
            budget: config.budget_at(power),
            amplitude: config.amplitude,
        })?;
        check_method(method, &spec)?;
        let greedy_trace = if method == Method::Greedy {
            let r = greedy_sequential_placement(&spec, max_m, &carrier, &constraints, &params)?;
            Some(r.trace.expect("trace recording was requested"))
        } else {
            None
        };
        for arr in &arrangements {
            let m = arr.m;
            let rs_ma = match &greedy_trace {
                Some(trace) => trace[m - 1],
                None => {
                    let init = make_upa(arr.rows, arr.cols, arr.dense_spacing_m)?;
                    run_method(method, &spec, m, &init, config.optimizer.weight_rule, &carrier, &constraints, &params)?
                        .objective_value
                }
            };
            let sparse = make_upa(arr.rows, arr.cols, arr.sparse_spacing_m)?;
            let dense = make_upa(arr.rows, arr.cols, arr.dense_spacing_m)?;
            rows.push(SweepRow {
                m,
                power_dbm: power,
                rs_ma,
                rs_sparse: evaluate_objective(&spec, &sparse, &carrier, &constraints)?,
                rs_dense: evaluate_objective(&spec, &dense, &carrier, &constraints)?,
            });
        }
    }
    Ok(SweepRun {
        rows,
        arrangements,
        method,
    })
}

pub fn run_secrecy_sweep(config: &ScenarioConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let started = Instant::now();
    let run = compute_secrecy_sweep(config)?;
    let carrier = config.carrier()?;
    let mut out = OutputWriter::new(out_dir);
    let body = csv(
        SECRECY_HEADER,
        run.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.m,
                format_float(r.power_dbm),
                format_float(r.rs_ma),
                format_float(r.rs_sparse),
                format_float(r.rs_dense)
            )
        }),
    );
    out.write(&config.outputs.secrecy, body.as_bytes())?;
    let mut resolved = resolved_common(config, &carrier, Some(run.method));
    resolved["antenna_counts"] = json!(config.sweep.antenna_counts);
    resolved["powers_dbm"] = json!(config.sweep.powers_dbm);
    resolved["fixed_arrays"] = json!(run.arrangements);
    let summary = json!({ "rows": run.rows });
    out.finish(config, "secrecy", resolved, summary, started)
}

/// Output of the generic `optimize` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeRun {
    pub method: Method,
    pub objective: ObjectiveSpec,
    pub result: OptimizationResult,
}

fn build_objective(config: &ScenarioConfig) -> Result<ObjectiveSpec> {
    let kind = config.optimizer.objective.unwrap_or(match config.rx {
        UserLocation::Direction(_) => ObjectiveKind::NullDepth,
        UserLocation::Polar(_) => ObjectiveKind::Secrecy,
    });
    let budget = config.budget_at(config.budget.tx_power_dbm);
    let spec = match (kind, config.rx) {
        (ObjectiveKind::NullDepth, UserLocation::Direction(target)) => ObjectiveSpec::NullDepth {
            target,
            nulls: directions_only(config)?,
        },
        (ObjectiveKind::NullDepth, UserLocation::Polar(_)) => {
            return Err(Error::config("optimizer.objective", "null_depth needs a far-field rx direction"))
        }
        (ObjectiveKind::Secrecy, UserLocation::Direction(rx)) => ObjectiveSpec::SecrecyRateFarField {
            rx,
            eves: directions_only(config)?,
            budget,
        },
        (ObjectiveKind::Secrecy, UserLocation::Polar(rx)) => ObjectiveSpec::SecrecyRateNearField {
            rx,
            eves: config.polar_locations("a near-field objective")?.1,
            budget,
            amplitude: config.amplitude,
        },
        (ObjectiveKind::Leakage, rx) => {
            let channel = |u: &UserLocation| match u {
                UserLocation::Direction(d) => ChannelSpec::FarField(*d),
                UserLocation::Polar(p) => ChannelSpec::NearField {
                    location: *p,
                    amplitude: config.amplitude,
                },
            };
            ObjectiveSpec::LeakageMin {
                target: channel(&rx),
                eves: config.eavesdroppers.iter().map(channel).collect(),
            }
        }
    };
    checked_objective(spec)
}

fn directions_only(config: &ScenarioConfig) -> Result<Vec<Direction>> {
    config
        .eavesdroppers
        .iter()
        .enumerate()
        .map(|(i, e)| {
            e.direction()
                .ok_or_else(|| Error::config(format!("eavesdroppers[{i}]"), "must be a direction like rx"))
        })
        .collect()
}

/// Runs the configured optimizer on the configured objective.
pub fn compute_optimize(config: &ScenarioConfig) -> Result<OptimizeRun> {
    let carrier = config.carrier()?;
    let spec = build_objective(config)?;
    let default_method = match (&spec, config.region.dim) {
        (ObjectiveSpec::NullDepth { .. }, Dim::One) => Method::Gradient,
        _ => Method::Greedy,
    };
    let method = config.method_or(default_method);
    check_method(method, &spec)?;
    if config.tx_array.mode != ArrayMode::Ma && method != Method::Alternating {
        return Err(Error::config(
            "tx_array.mode",
            "a fixed array is only an initial layout for the alternating method; use \"ma\"",
        ));
    }
    let constraints = config.constraints(config.region.extent_wavelengths, &carrier)?;
    let init = config.reference_layout(&carrier)?;
    let result = run_method(
        method,
        &spec,
        config.element_count(),
        &init,
        config.optimizer.weight_rule,
        &carrier,
        &constraints,
        &config.params(),
    )?;
    Ok(OptimizeRun {
        method,
        objective: spec,
        result,
    })
}

pub fn run_optimize(config: &ScenarioConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let started = Instant::now();
    let run = compute_optimize(config)?;
    let carrier = config.carrier()?;
    let mut out = OutputWriter::new(out_dir);
    let mut text = serde_json::to_string_pretty(&run).expect("result serializes");
    text.push('\n');
    out.write(&config.outputs.optimize, text.as_bytes())?;
    let mut resolved = resolved_common(config, &carrier, Some(run.method));
    resolved["objective"] = serde_json::to_value(&run.objective).expect("objective serializes");
    let summary = json!({
        "objective_value": run.result.objective_value,
        "iterations": run.result.iterations,
        "converged": run.result.converged,
    });
    out.finish(config, "optimize", resolved, summary, started)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NULLING_CONFIG: &str = r#"{
        "carrier": {"frequency_hz": 29979245800.0},
        "region": {"dim": 1, "extent_wavelengths": 10},
        "tx_array": {"mode": "ma", "n": 8},
        "rx": {"theta_deg": 90},
        "eavesdroppers": [{"theta_deg": 80}, {"theta_deg": 100}, {"theta_deg": 150}],
        "optimizer": {"method": "gradient", "seed": 1, "params": {"multistarts": 8}}
    }"#;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "carrier": {"frequency_hz": 3e10},
            "region": {"dim": 2, "extent_wavelengths": 10},
            "tx_array": {"mode": "ma", "n": 4},
            "rx": {"d_m": 15.0, "phi_rad": 0.785}
        })
    }

    fn config_field(text: &str) -> (String, String) {
        match parse_config(text) {
            Err(Error::Config { field, message }) => (field, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let c = parse_config(&minimal().to_string()).unwrap();
        assert_eq!(c.budget.noise_power_dbm, -80.0);
        assert_eq!(c.region.min_spacing_wavelengths, 0.5);
        assert_eq!(c.optimizer.params, OptimizerParams::default());
        assert_eq!(c.sweep.antenna_counts, vec![4, 8, 16, 36, 64]);
        assert_eq!(c.sweep.powers_dbm, vec![20.0, 30.0]);
        assert_eq!(c.beampattern.resolution_deg, 0.1);
        assert!(c.eavesdroppers.is_empty());
        let carrier = c.carrier().unwrap();
        let k = c.constraints(10.0, &carrier).unwrap();
        assert!((k.min_spacing_m - carrier.wavelength_m / 2.0).abs() < 1e-18);
    }

    #[test]
    fn negative_extent_names_the_field() {
        let mut v = minimal();
        v["region"]["extent_wavelengths"] = serde_json::json!(-1);
        let (field, _) = config_field(&v.to_string());
        assert_eq!(field, "region.extent_wavelengths");
    }

    #[test]
    fn unknown_method_lists_allowed_methods() {
        let mut v = minimal();
        v["optimizer"] = serde_json::json!({"method": "annealing"});
        let (field, message) = config_field(&v.to_string());
        assert_eq!(field, "optimizer.method");
        for m in ["gradient", "greedy", "pso", "alternating", "exhaustive"] {
            assert!(message.contains(m), "{message}");
        }
    }

    #[test]
    fn missing_and_unknown_fields_are_reported() {
        let (field, message) = config_field(r#"{"region": {"dim": 1, "extent_wavelengths": 1}}"#);
        assert_eq!(field, "(root)");
        assert!(message.contains("carrier"), "{message}");
        let mut v = minimal();
        v["region"]["extnet"] = serde_json::json!(1);
        assert_eq!(config_field(&v.to_string()).0, "region.extnet");
        let mut v = minimal();
        v["rx"] = serde_json::json!({"d_m": 1.0});
        assert_eq!(config_field(&v.to_string()).0, "rx");
        let mut v = minimal();
        v["eavesdroppers"] = serde_json::json!([{"d_m": 10.0, "phi_rad": 0.7}, {"theta_deg": 200}]);
        assert_eq!(config_field(&v.to_string()).0, "eavesdroppers[1]");
        assert_eq!(config_field("{").0, "(root)");
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut c = parse_config(&minimal().to_string()).unwrap();
        c.apply_overrides(Some(7), Some(3.0)).unwrap();
        assert_eq!(c.seed(), 7);
        assert_eq!(c.params().grid_points_per_wavelength, Some(3.0));
        assert!(matches!(c.apply_overrides(None, Some(0.0)), Err(Error::Config { .. })));
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = parse_config(NULLING_CONFIG).unwrap();
        let again = parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn near_square_arrangements() {
        assert_eq!(near_square(64), (8, 8));
        assert_eq!(near_square(8), (2, 4));
        assert_eq!(near_square(36), (6, 6));
        assert_eq!(near_square(7), (1, 7));
        let a = sweep_arrangement(64, 1.0, 0.01);
        assert_eq!(a.sparse_spacing_m, 1.0 / 8.0);
        let a = sweep_arrangement(7, 1.0, 0.01);
        assert!(6.0 * a.sparse_spacing_m <= 1.0 + 1e-12);
    }

    #[test]
    fn theta_grid_hits_whole_degrees_exactly() {
        let g = theta_grid(0.1);
        assert_eq!(g.len(), 1801);
        assert_eq!(g[900], 90.0);
        assert_eq!(g[800], 80.0);
        assert_eq!(g[1500], 150.0);
        assert_eq!(g[1800], 180.0);
    }

    #[test]
    fn csv_format() {
        assert_eq!(format_float(90.0), "9.0000000000000000e1");
        assert_eq!(format_float(0.1).parse::<f64>().unwrap(), 0.1);
        let body = csv("a,b", ["1,2".to_string()]);
        assert_eq!(body, "a,b\n1,2\n");
    }

    #[test]
    fn beampattern_without_eavesdroppers_is_identical_mrt() {
        let mut v: serde_json::Value = serde_json::from_str(NULLING_CONFIG).unwrap();
        v["eavesdroppers"] = serde_json::json!([]);
        let c = parse_config(&v.to_string()).unwrap();
        let run = compute_beampattern(&c).unwrap();
        assert_eq!(run.fpa_db, run.ma_db);
        assert!(run.fpa_db[900].abs() < 1e-12);
    }

    #[test]
    fn beampattern_single_null_two_elements() {
        let text = r#"{
            "carrier": {"frequency_hz": 3e10},
            "region": {"dim": 1, "extent_wavelengths": 4},
            "tx_array": {"mode": "ma", "n": 2},
            "rx": {"theta_deg": 90},
            "eavesdroppers": [{"theta_deg": 0}]
        }"#;
        let run = compute_beampattern(&parse_config(text).unwrap()).unwrap();
        assert!(run.fpa_db[0] < -100.0, "{}", run.fpa_db[0]);
        assert!(run.ma_db[0] < -100.0, "{}", run.ma_db[0]);
        assert!(run.ma_eve_gains_db[0] < -100.0);
    }

    #[test]
    fn beampattern_rejects_planar_configs() {
        let c = parse_config(&minimal().to_string()).unwrap();
        match compute_beampattern(&c) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "region.dim"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_antenna_focus_map_is_flat() {
        let mut v = minimal();
        v["tx_array"]["n"] = serde_json::json!(1);
        v["eavesdroppers"] = serde_json::json!([{"d_m": 10.0, "phi_rad": 0.785}]);
        v["focusmap"] = serde_json::json!({"nx": 12, "ny": 9});
        let run = compute_focusmap(&parse_config(&v.to_string()).unwrap()).unwrap();
        assert_eq!(run.panels.len(), 1);
        assert_eq!(run.panels[0].gains_db.len(), 108);
        assert!(run.panels[0].gains_db.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn sweep_with_one_antenna_is_equal_across_schemes() {
        let mut v = minimal();
        v["eavesdroppers"] = serde_json::json!([{"d_m": 20.0, "phi_rad": 0.785}]);
        v["sweep"] = serde_json::json!({"antenna_counts": [1], "powers_dbm": [20]});
        let c = parse_config(&v.to_string()).unwrap();
        let run = compute_secrecy_sweep(&c).unwrap();
        let r = run.rows[0];
        // A farther eavesdropper gives a positive rate for any single element.
        assert!(r.rs_sparse > 0.0);
        assert_eq!(r.rs_sparse, r.rs_dense);
        assert!(r.rs_ma >= r.rs_sparse);
        // Positions only matter through sub-wavelength path-length changes.
        assert!(r.rs_ma - r.rs_dense < 1e-2 * r.rs_dense);
        let carrier = c.carrier().unwrap();
        let lambda = carrier.wavelength_m;
        let free = |d: f64| (lambda / (4.0 * std::f64::consts::PI * d)).powi(2);
        let scale = 10f64.powf(10.0);
        let dist = |d_m: f64| Point::ORIGIN.distance(&PolarLocation::new(d_m, 0.785).unwrap().to_point());
        let expect = ((1.0 + scale * free(dist(15.0))) / (1.0 + scale * free(dist(20.0)))).log2();
        assert!((r.rs_dense - expect).abs() < 1e-9 * expect, "{} vs {expect}", r.rs_dense);
    }

    #[test]
    fn greedy_prefix_matches_a_fresh_run() {
        let mut v = minimal();
        v["eavesdroppers"] = serde_json::json!([{"d_m": 10.0, "phi_rad": 0.785}]);
        let c = parse_config(&v.to_string()).unwrap();
        let carrier = c.carrier().unwrap();
        let k = c.constraints(10.0, &carrier).unwrap();
        let spec = build_objective(&c).unwrap();
        let long = greedy_sequential_placement(&spec, 5, &carrier, &k, &c.params()).unwrap();
        let short = greedy_sequential_placement(&spec, 3, &carrier, &k, &c.params()).unwrap();
        assert_eq!(&long.layout.positions()[..3], short.layout.positions());
        assert_eq!(long.trace.unwrap()[2], short.objective_value);
    }

    #[test]
    fn report_digests_match_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(NULLING_CONFIG).unwrap();
        v["beampattern"] = serde_json::json!({"resolution_deg": 1.0});
        let c = parse_config(&v.to_string()).unwrap();
        let report = run_beampattern(&c, dir.path()).unwrap();
        assert_eq!(report.files.len(), 2);
        for f in &report.files {
            let bytes = fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), f.sha256);
            let text = String::from_utf8(bytes).unwrap();
            assert!(text.starts_with("theta_deg,gain_db\n"));
            assert!(!text.contains('\r'));
            assert_eq!(text.lines().count(), 182);
        }
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn optimize_requires_a_matching_objective() {
        let mut v = minimal();
        v["optimizer"] = serde_json::json!({"method": "gradient"});
        let c = parse_config(&v.to_string()).unwrap();
        match compute_optimize(&c) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "optimizer.method"),
            other => panic!("{other:?}"),
        }
    }
}
