//! Config-file driven simulation runs.
//!
//! A scenario is a small TOML file: a `kind` naming one of six canned
//! analyses, an optional `output` directory name, and a `[params]` table
//! overriding that kind's declared parameters. [`validate_config`] parses and
//! normalizes a file into a [`Scenario`], filling defaults and rejecting
//! undeclared or out-of-range parameters with per-field diagnostics;
//! [`run_scenario`] executes one and writes a self-describing bundle: CSV
//! data, SVG views rendering exactly the CSV values, and a `metadata.json`
//! sidecar holding the normalized scenario, derived quantities, and the tool
//! version. Passing a sidecar back to `run` reproduces the bundle.
//!
//! Config files carry lab-bench units in the key names (`_mm`, `_um`, `_nm`,
//! `_deg`); everything is converted to meters and radians internally, and
//! emitted CSV columns name their units the same way.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::counts::{
    fit_counts, simulate_counts, write_counts_csv, AcquisitionProtocol, CountRecord, CountsError,
};
use crate::detection::{
    fringe_scan, phase_grid, phase_shift, CorrelationSamplingPlan, DetectionError, FringeScan,
    IrisConfig,
};
use crate::fitting::{wrap_phase, FitError, SinusoidFit};
use crate::interferometer::{InterferometerConfig, InterferometerError};
use crate::lg::{BeamParams, LgError};
use crate::pdc::{
    angular_widths, coefficient_table, coupling_amplitude_l0, coupling_amplitude_l1,
    coupling_l0_closed_form, coupling_l1_closed_form, PdcError, PdcParams,
};
use crate::plot::{matrix_svg, Plot, Series};

/// Iris diameter standing in for a point detector in sweep columns labeled
/// "point": small enough that the fitted shift matches the closed-form
/// point limit to well under a percent.
pub const POINT_IRIS_DIAMETER: f64 = 10e-6;

/// Sample count for the smooth fitted-sinusoid curves drawn in SVG views.
const DENSE_CURVE_SAMPLES: usize = 241;

/// Largest correlation-grid truncation weight a configuration may leave at
/// the boundary; mirrors the run-time guard in the detection module.
const TRUNCATION_WEIGHT_LIMIT: f64 = 1e-3;

/// What went wrong with a scenario. The variants map onto process exit
/// codes: configuration problems (2), numerical failures mid-run (3), and
/// filesystem trouble (1).
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    /// One or more config diagnostics, each naming the offending field and,
    /// when the source text is available, its line and column.
    Validation { diagnostics: Vec<String> },
    /// A module reported a numerical failure (non-convergence, degenerate
    /// fit, truncation too small) while the scenario was running.
    Numerical { message: String },
    /// Reading the config or writing the bundle failed.
    Io { message: String },
}

impl ScenarioError {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Validation { .. } => 2,
            ScenarioError::Numerical { .. } => 3,
            ScenarioError::Io { .. } => 1,
        }
    }

    /// Stable token naming the error class in `error.json`.
    pub fn kind_token(&self) -> &'static str {
        match self {
            ScenarioError::Validation { .. } => "validation",
            ScenarioError::Numerical { .. } => "numerical",
            ScenarioError::Io { .. } => "io",
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Validation { diagnostics } => {
                write!(f, "invalid scenario configuration")?;
                for diagnostic in diagnostics {
                    write!(f, "\n  {diagnostic}")?;
                }
                Ok(())
            }
            ScenarioError::Numerical { message } => write!(f, "numerical failure: {message}"),
            ScenarioError::Io { message } => write!(f, "io failure: {message}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<DetectionError> for ScenarioError {
    fn from(err: DetectionError) -> Self {
        ScenarioError::Numerical { message: err.to_string() }
    }
}

impl From<PdcError> for ScenarioError {
    fn from(err: PdcError) -> Self {
        ScenarioError::Numerical { message: err.to_string() }
    }
}

impl From<CountsError> for ScenarioError {
    fn from(err: CountsError) -> Self {
        ScenarioError::Numerical { message: err.to_string() }
    }
}

impl From<FitError> for ScenarioError {
    fn from(err: FitError) -> Self {
        ScenarioError::Numerical { message: err.to_string() }
    }
}

impl From<InterferometerError> for ScenarioError {
    fn from(err: InterferometerError) -> Self {
        ScenarioError::Numerical { message: err.to_string() }
    }
}

impl From<LgError> for ScenarioError {
    fn from(err: LgError) -> Self {
        ScenarioError::Numerical { message: err.to_string() }
    }
}

impl From<io::Error> for ScenarioError {
    fn from(err: io::Error) -> Self {
        ScenarioError::Io { message: err.to_string() }
    }
}

/// The six canned analyses. The serialized tokens are the stable external
/// vocabulary used in config files and `list-scenarios` output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Fringe-shift sweep over the iris offset x0 along the fringe axis,
    /// with a point-limit column and one column per finite iris diameter,
    /// emitted both with and without the angular-correlation average.
    #[serde(rename = "fig3_shift_vs_x0")]
    ShiftVsOffset,
    /// Fringe-shift sweep over the crystal rotation angle for a flat
    /// wavefront and each configured radius of curvature, emitted both with
    /// and without the angular-correlation average.
    #[serde(rename = "fig4_shift_vs_gamma")]
    ShiftVsRotation,
    /// One fringe scan pair P(phi) for charges +l and -l behind a displaced
    /// iris, with sinusoid fits and the fitted inter-charge shift.
    #[serde(rename = "fringe_scan")]
    FringeScanPair,
    /// Poisson coincidence-count datasets drawn from a fringe scan pair,
    /// with inverse-variance weighted fits recovering the shift.
    #[serde(rename = "counts_experiment")]
    CountsExperiment,
    /// Down-conversion overlap coefficients on an (l, l') grid, showing the
    /// anti-diagonal conservation pattern and the mode-weight ratio.
    #[serde(rename = "conservation_table")]
    ConservationTable,
    /// Exit-angle coupling amplitudes for charges 0 and 1 next to their
    /// closed forms.
    #[serde(rename = "coupling_curves")]
    CouplingCurves,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::ShiftVsOffset,
        ScenarioKind::ShiftVsRotation,
        ScenarioKind::FringeScanPair,
        ScenarioKind::CountsExperiment,
        ScenarioKind::ConservationTable,
        ScenarioKind::CouplingCurves,
    ];

    /// The config-file token for this kind.
    pub fn token(self) -> &'static str {
        match self {
            ScenarioKind::ShiftVsOffset => "fig3_shift_vs_x0",
            ScenarioKind::ShiftVsRotation => "fig4_shift_vs_gamma",
            ScenarioKind::FringeScanPair => "fringe_scan",
            ScenarioKind::CountsExperiment => "counts_experiment",
            ScenarioKind::ConservationTable => "conservation_table",
            ScenarioKind::CouplingCurves => "coupling_curves",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ScenarioKind::ShiftVsOffset => {
                "Fringe-shift sweep over iris offset x0: point and finite-iris columns, \
                 with and without the angular-correlation average."
            }
            ScenarioKind::ShiftVsRotation => {
                "Fringe-shift sweep over crystal rotation for flat and curved wavefronts, \
                 with and without the angular-correlation average."
            }
            ScenarioKind::FringeScanPair => {
                "Fringe scan P(phi) for charges +l and -l behind a displaced iris, \
                 with sinusoid fits and the fitted shift."
            }
            ScenarioKind::CountsExperiment => {
                "Poisson coincidence-count datasets drawn from a fringe scan pair, \
                 with weighted fits recovering the shift."
            }
            ScenarioKind::ConservationTable => {
                "Down-conversion overlap coefficients on an (l, l') grid, \
                 showing the anti-diagonal conservation pattern."
            }
            ScenarioKind::CouplingCurves => {
                "Exit-angle coupling amplitudes for charges 0 and 1 \
                 next to their closed forms."
            }
        }
    }

    /// Parameter names a config of this kind may set. Anything else in
    /// `[params]` is rejected during validation.
    pub fn declared_params(self) -> Vec<&'static str> {
        const SCAN: [&str; 11] = [
            "waist_mm",
            "wavelength_nm",
            "walk_off_mm",
            "path_balance",
            "pump_waist_um",
            "collection_waist_um",
            "weight_width_mm",
            "plan_n_radial",
            "plan_n_azimuthal",
            "plan_truncation",
            "phase_points",
        ];
        const PDC_ONLY: [&str; 4] =
            ["pump_waist_um", "collection_waist_um", "wavelength_nm", "weight_width_mm"];
        let mut names: Vec<&'static str> = match self {
            ScenarioKind::ShiftVsOffset
            | ScenarioKind::ShiftVsRotation
            | ScenarioKind::FringeScanPair
            | ScenarioKind::CountsExperiment => SCAN.to_vec(),
            ScenarioKind::ConservationTable | ScenarioKind::CouplingCurves => PDC_ONLY.to_vec(),
        };
        match self {
            ScenarioKind::ShiftVsOffset => names.extend([
                "shear_y_mm",
                "iris_diameters_mm",
                "x0_min_mm",
                "x0_max_mm",
                "n_points",
            ]),
            ScenarioKind::ShiftVsRotation => names.extend([
                "gamma_min_deg",
                "gamma_max_deg",
                "n_points",
                "radii_of_curvature_m",
                "iris_center_x_mm",
                "iris_center_y_mm",
                "iris_diameter_mm",
            ]),
            ScenarioKind::FringeScanPair => names.extend([
                "l",
                "shear_y_mm",
                "gamma_deg",
                "radius_of_curvature_m",
                "iris_center_x_mm",
                "iris_center_y_mm",
                "iris_diameter_mm",
                "correlations",
            ]),
            ScenarioKind::CountsExperiment => names.extend([
                "l",
                "shear_y_mm",
                "gamma_deg",
                "radius_of_curvature_m",
                "iris_center_x_mm",
                "iris_center_y_mm",
                "iris_diameter_mm",
                "correlations",
                "rate_per_minute",
                "n_acquisitions",
                "t_acquisition_s",
                "seed",
            ]),
            ScenarioKind::ConservationTable => names.push("l_max"),
            ScenarioKind::CouplingCurves => names.extend(["theta_max_pdc_widths", "n_points"]),
        }
        names
    }
}

/// The union of all scenario parameters, every one optional. Validation
/// checks that the set parameters are declared for the scenario's kind;
/// normalization fills that kind's defaults. Key names carry the config-file
/// unit (`_mm`, `_um`, `_nm`, `_deg`, `_s`); values without a unit suffix
/// are dimensionless.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Mode waist at the detection plane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    /// Crystal walk-off displacement D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk_off_mm: Option<f64>,
    /// Relative amplitude of the sheared replica, in (0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_balance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_waist_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collection_waist_um: Option<f64>,
    /// Width of the Gaussian weight on transverse mode displacements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_width_mm: Option<f64>,
    /// Radius of curvature at the detection plane; omit for a flat wavefront.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_of_curvature_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_n_radial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_n_azimuthal: Option<usize>,
    /// Correlation-grid radius in units of the weight width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_truncation: Option<f64>,
    /// Number of phase steps; the scan holds this many plus the 2 pi repeat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_points: Option<usize>,
    /// Replica displacement along the fringe-normal axis (pure shear).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_y_mm: Option<f64>,
    /// Crystal rotation; sets the shear through the device geometry.
    /// Mutually exclusive with `shear_y_mm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iris_center_x_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iris_center_y_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iris_diameter_mm: Option<f64>,
    /// Finite iris diameters for the offset sweep (a point column is always
    /// included as well).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iris_diameters_mm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_min_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_max_mm: Option<f64>,
    /// Sweep length (offset, rotation, or exit-angle points).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_min_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max_deg: Option<f64>,
    /// Curved-wavefront cases for the rotation sweep; the flat case is
    /// always included.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii_of_curvature_m: Option<Vec<f64>>,
    /// Topological charge of the scanned pair (+l and -l).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<i32>,
    /// Whether the fringe scan averages over angular correlations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlations: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_per_minute: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_acquisitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_acquisition_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Half-width of the coefficient grid (charges -l_max ..= l_max).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<u32>,
    /// Exit-angle sweep end, in units of the down-conversion angular width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max_pdc_widths: Option<f64>,
}

impl Params {
    /// Names of the parameters that are actually set.
    fn present(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let mut note = |name: &'static str, given: bool| {
            if given {
                names.push(name);
            }
        };
        note("waist_mm", self.waist_mm.is_some());
        note("wavelength_nm", self.wavelength_nm.is_some());
        note("walk_off_mm", self.walk_off_mm.is_some());
        note("path_balance", self.path_balance.is_some());
        note("pump_waist_um", self.pump_waist_um.is_some());
        note("collection_waist_um", self.collection_waist_um.is_some());
        note("weight_width_mm", self.weight_width_mm.is_some());
        note("radius_of_curvature_m", self.radius_of_curvature_m.is_some());
        note("plan_n_radial", self.plan_n_radial.is_some());
        note("plan_n_azimuthal", self.plan_n_azimuthal.is_some());
        note("plan_truncation", self.plan_truncation.is_some());
        note("phase_points", self.phase_points.is_some());
        note("shear_y_mm", self.shear_y_mm.is_some());
        note("gamma_deg", self.gamma_deg.is_some());
        note("iris_center_x_mm", self.iris_center_x_mm.is_some());
        note("iris_center_y_mm", self.iris_center_y_mm.is_some());
        note("iris_diameter_mm", self.iris_diameter_mm.is_some());
        note("iris_diameters_mm", self.iris_diameters_mm.is_some());
        note("x0_min_mm", self.x0_min_mm.is_some());
        note("x0_max_mm", self.x0_max_mm.is_some());
        note("n_points", self.n_points.is_some());
        note("gamma_min_deg", self.gamma_min_deg.is_some());
        note("gamma_max_deg", self.gamma_max_deg.is_some());
        note("radii_of_curvature_m", self.radii_of_curvature_m.is_some());
        note("l", self.l.is_some());
        note("correlations", self.correlations.is_some());
        note("rate_per_minute", self.rate_per_minute.is_some());
        note("n_acquisitions", self.n_acquisitions.is_some());
        note("t_acquisition_s", self.t_acquisition_s.is_some());
        note("seed", self.seed.is_some());
        note("l_max", self.l_max.is_some());
        note("theta_max_pdc_widths", self.theta_max_pdc_widths.is_some());
        names
    }
}

/// A normalized scenario: kind, optional output directory name, and the
/// kind's full parameter set with defaults filled. Serializes to the
/// `scenario` member of the metadata sidecar and deserializes back from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Directory name of the bundle under the output root; the kind token
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub params: Params,
}

impl Scenario {
    pub fn output_name(&self) -> &str {
        self.output.as_deref().unwrap_or_else(|| self.kind.token())
    }
}

/// What [`run_scenario`] produced: the bundle directory, the files inside it
/// in write order, and the metadata document.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub metadata: Value,
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

/// Defaults for every parameter the kind declares, leaving set values alone.
fn normalized(kind: ScenarioKind, mut p: Params) -> Params {
    match kind {
        ScenarioKind::ShiftVsOffset
        | ScenarioKind::ShiftVsRotation
        | ScenarioKind::FringeScanPair
        | ScenarioKind::CountsExperiment => {
            fill(&mut p.waist_mm, 0.85);
            fill(&mut p.wavelength_nm, 815.0);
            fill(&mut p.walk_off_mm, 4.18);
            fill(&mut p.path_balance, 1.0);
            fill(&mut p.pump_waist_um, 40.0);
            fill(&mut p.collection_waist_um, 31.0);
            fill(&mut p.weight_width_mm, 0.93);
            fill(&mut p.plan_n_radial, 8);
            fill(&mut p.plan_n_azimuthal, 16);
            fill(&mut p.plan_truncation, 2.0);
            fill(&mut p.phase_points, 16);
        }
        ScenarioKind::ConservationTable | ScenarioKind::CouplingCurves => {
            fill(&mut p.pump_waist_um, 40.0);
            fill(&mut p.collection_waist_um, 31.0);
            fill(&mut p.wavelength_nm, 815.0);
            fill(&mut p.weight_width_mm, 0.93);
        }
    }
    match kind {
        ScenarioKind::ShiftVsOffset => {
            fill(&mut p.shear_y_mm, 0.5);
            fill(&mut p.iris_diameters_mm, vec![1.5, 2.0]);
            fill(&mut p.x0_min_mm, 0.1);
            fill(&mut p.x0_max_mm, 0.8);
            fill(&mut p.n_points, 8);
        }
        ScenarioKind::ShiftVsRotation => {
            fill(&mut p.gamma_min_deg, 2.0);
            fill(&mut p.gamma_max_deg, 8.0);
            fill(&mut p.n_points, 7);
            fill(&mut p.radii_of_curvature_m, vec![3.0, 1.5]);
            fill(&mut p.iris_center_x_mm, 0.7);
            fill(&mut p.iris_center_y_mm, 0.0);
            fill(&mut p.iris_diameter_mm, 1.5);
        }
        ScenarioKind::FringeScanPair | ScenarioKind::CountsExperiment => {
            fill(&mut p.l, 1);
            if p.gamma_deg.is_none() {
                fill(&mut p.shear_y_mm, 0.5);
            }
            fill(&mut p.iris_center_x_mm, 0.7);
            fill(&mut p.iris_center_y_mm, 0.0);
            fill(&mut p.iris_diameter_mm, 1.5);
            fill(&mut p.correlations, false);
            if kind == ScenarioKind::CountsExperiment {
                fill(&mut p.rate_per_minute, 500.0);
                fill(&mut p.n_acquisitions, 25);
                fill(&mut p.t_acquisition_s, 40.0);
                fill(&mut p.seed, 1);
            }
        }
        ScenarioKind::ConservationTable => fill(&mut p.l_max, 3),
        ScenarioKind::CouplingCurves => {
            fill(&mut p.theta_max_pdc_widths, 3.0);
            fill(&mut p.n_points, 61);
        }
    }
    p
}

/// A fully-normalized scenario for `kind`: every declared parameter at its
/// default.
pub fn default_scenario(kind: ScenarioKind) -> Scenario {
    Scenario { kind, output: None, params: normalized(kind, Params::default()) }
}

/// First line and column (1-based) where `key` is assigned in the source
/// text, for diagnostics that outlive the TOML parser.
fn locate(source: &str, key: &str) -> Option<(usize, usize)> {
    for (index, line) in source.lines().enumerate() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some((index + 1, line.len() - trimmed.len() + 1));
            }
        }
    }
    None
}

struct Diagnostics<'a> {
    source: Option<&'a str>,
    out: Vec<String>,
}

impl<'a> Diagnostics<'a> {
    fn new(source: Option<&'a str>) -> Self {
        Self { source, out: Vec::new() }
    }

    fn push(&mut self, key: &str, message: impl fmt::Display) {
        match self.source.and_then(|s| locate(s, key)) {
            Some((line, column)) => {
                self.out.push(format!("line {line}, column {column}: `{key}` {message}"))
            }
            None => self.out.push(format!("`{key}` {message}")),
        }
    }

    fn check_positive(&mut self, key: &str, value: Option<f64>) {
        if let Some(v) = value {
            if !(v > 0.0) || !v.is_finite() {
                self.push(key, format!("must be positive and finite (got {v})"));
            }
        }
    }

    fn check_finite(&mut self, key: &str, value: Option<f64>) {
        if let Some(v) = value {
            if !v.is_finite() {
                self.push(key, format!("must be finite (got {v})"));
            }
        }
    }
}

/// Range and cross-field checks on a normalized parameter set. Every check
/// is conditional on the field being set, so it is safe to run for any kind.
fn check_ranges(kind: ScenarioKind, p: &Params, diags: &mut Diagnostics<'_>) {
    diags.check_positive("waist_mm", p.waist_mm);
    diags.check_positive("wavelength_nm", p.wavelength_nm);
    diags.check_positive("walk_off_mm", p.walk_off_mm);
    diags.check_positive("pump_waist_um", p.pump_waist_um);
    diags.check_positive("collection_waist_um", p.collection_waist_um);
    diags.check_positive("weight_width_mm", p.weight_width_mm);
    diags.check_positive("iris_diameter_mm", p.iris_diameter_mm);
    diags.check_positive("rate_per_minute", p.rate_per_minute);
    diags.check_positive("t_acquisition_s", p.t_acquisition_s);
    diags.check_finite("iris_center_x_mm", p.iris_center_x_mm);
    diags.check_finite("iris_center_y_mm", p.iris_center_y_mm);

    if let Some(b) = p.path_balance {
        if !(b > 0.0 && b <= 1.0) {
            diags.push("path_balance", format!("must lie in (0, 1] (got {b})"));
        }
    }
    if let (Some(shear), Some(walk_off)) = (p.shear_y_mm, p.walk_off_mm) {
        let limit = walk_off * std::f64::consts::FRAC_1_SQRT_2;
        if !shear.is_finite() || shear.abs() >= limit {
            diags.push(
                "shear_y_mm",
                format!("must stay below walk_off_mm/sqrt(2) = {limit:.4} in magnitude (got {shear})"),
            );
        }
    }
    for (key, gamma) in [
        ("gamma_deg", p.gamma_deg),
        ("gamma_min_deg", p.gamma_min_deg),
        ("gamma_max_deg", p.gamma_max_deg),
    ] {
        if let Some(g) = gamma {
            if !g.is_finite() || g.abs() >= 45.0 {
                diags.push(key, format!("must lie strictly inside (-45, 45) degrees (got {g})"));
            }
        }
    }
    if let (Some(lo), Some(hi)) = (p.gamma_min_deg, p.gamma_max_deg) {
        if lo.is_finite() && hi.is_finite() && !(lo < hi) {
            diags.push("gamma_min_deg", format!("must be below gamma_max_deg (got {lo} vs {hi})"));
        }
    }
    if let Some(x0) = p.x0_min_mm {
        if !(x0 > 0.0) || !x0.is_finite() {
            diags.push(
                "x0_min_mm",
                format!("must be positive (the point column diverges on axis; got {x0})"),
            );
        }
    }
    diags.check_positive("x0_max_mm", p.x0_max_mm);
    if let (Some(lo), Some(hi)) = (p.x0_min_mm, p.x0_max_mm) {
        if lo.is_finite() && hi.is_finite() && !(lo < hi) {
            diags.push("x0_min_mm", format!("must be below x0_max_mm (got {lo} vs {hi})"));
        }
    }
    if let Some(n) = p.n_points {
        if n < 2 {
            diags.push("n_points", format!("must be at least 2 (got {n})"));
        }
    }
    if let Some(n) = p.phase_points {
        if n < 8 {
            diags.push("phase_points", format!("must be at least 8 for stable fits (got {n})"));
        }
    }
    for (key, n) in [("plan_n_radial", p.plan_n_radial), ("plan_n_azimuthal", p.plan_n_azimuthal)] {
        if let Some(n) = n {
            if n < 1 {
                diags.push(key, format!("must be at least 1 (got {n})"));
            }
        }
    }
    if let Some(t) = p.plan_truncation {
        if !(t > 0.0) || !t.is_finite() {
            diags.push("plan_truncation", format!("must be positive and finite (got {t})"));
        } else if (-2.0 * t * t).exp() > TRUNCATION_WEIGHT_LIMIT {
            diags.push(
                "plan_truncation",
                format!(
                    "leaves boundary weight exp(-2 t^2) above {TRUNCATION_WEIGHT_LIMIT:.0e} (got {t}); increase it"
                ),
            );
        }
    }
    if let Some(ds) = &p.iris_diameters_mm {
        if ds.is_empty() {
            diags.push("iris_diameters_mm", "must list at least one diameter");
        }
        for &d in ds {
            if !(d > 0.0) || !d.is_finite() {
                diags.push(
                    "iris_diameters_mm",
                    format!("entries must be positive and finite (got {d})"),
                );
            }
        }
    }
    if let Some(rs) = &p.radii_of_curvature_m {
        for &r in rs {
            if r == 0.0 || !r.is_finite() {
                diags.push(
                    "radii_of_curvature_m",
                    format!("entries must be nonzero and finite (got {r})"),
                );
            }
        }
    }
    if let Some(r) = p.radius_of_curvature_m {
        if r == 0.0 || !r.is_finite() {
            diags.push(
                "radius_of_curvature_m",
                format!("must be nonzero and finite; omit it for a flat wavefront (got {r})"),
            );
        }
    }
    if let Some(l) = p.l {
        if l.unsigned_abs() > 6 {
            diags.push("l", format!("must have magnitude at most 6 (got {l})"));
        }
    }
    if let Some(l_max) = p.l_max {
        if l_max > 6 {
            diags.push("l_max", format!("must be at most 6 (got {l_max})"));
        }
    }
    if let Some(n) = p.n_acquisitions {
        if n < 1 {
            diags.push("n_acquisitions", format!("must be at least 1 (got {n})"));
        }
    }
    if let Some(widths) = p.theta_max_pdc_widths {
        if !(widths > 0.0) || !widths.is_finite() || widths > 10.0 {
            diags.push(
                "theta_max_pdc_widths",
                format!("must lie in (0, 10], the modeled exit-angle range (got {widths})"),
            );
        }
    }
    let _ = kind;
}

/// Undeclared-parameter, exclusivity, normalization, range, and output-name
/// checks; the single validation path shared by the TOML, JSON, and direct
/// API routes.
fn finish(mut scenario: Scenario, source: Option<&str>) -> Result<Scenario, ScenarioError> {
    let mut diags = Diagnostics::new(source);
    let declared = scenario.kind.declared_params();
    for name in scenario.params.present() {
        if !declared.contains(&name) {
            diags.push(
                name,
                format!("is not a declared parameter of `{}`", scenario.kind.token()),
            );
        }
    }
    if scenario.params.shear_y_mm.is_some() && scenario.params.gamma_deg.is_some() {
        diags.push("gamma_deg", "and `shear_y_mm` are mutually exclusive; set one");
    }
    if let Some(output) = &scenario.output {
        let clean = !output.is_empty()
            && output != ".."
            && output.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
        if !clean {
            diags.push(
                "output",
                format!("must be a plain directory name (letters, digits, '.', '_', '-'; got {output:?})"),
            );
        }
    }
    scenario.params = normalized(scenario.kind, scenario.params);
    check_ranges(scenario.kind, &scenario.params, &mut diags);
    if diags.out.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation { diagnostics: diags.out })
    }
}

/// Parses and normalizes a scenario from TOML text. Syntax errors, unknown
/// keys, and type mismatches surface with the parser's line/column context;
/// range problems are located by key.
pub fn scenario_from_toml(source: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = toml::from_str(source)
        .map_err(|err| ScenarioError::Validation { diagnostics: vec![err.to_string()] })?;
    finish(scenario, Some(source))
}

/// Parses and normalizes a scenario from JSON text: either a bare scenario
/// object or a full metadata sidecar (whose `scenario` member is used), so a
/// bundle can be re-run from its own metadata.
pub fn scenario_from_json(source: &str) -> Result<Scenario, ScenarioError> {
    let value: Value = serde_json::from_str(source)
        .map_err(|err| ScenarioError::Validation { diagnostics: vec![err.to_string()] })?;
    let scenario_value = match value.get("scenario") {
        Some(inner) => inner.clone(),
        None => value,
    };
    let scenario: Scenario = serde_json::from_value(scenario_value)
        .map_err(|err| ScenarioError::Validation { diagnostics: vec![err.to_string()] })?;
    finish(scenario, None)
}

/// Reads, parses, and normalizes a scenario file. `.json` files are treated
/// as metadata sidecars or bare scenario objects; everything else as TOML.
pub fn validate_config(path: &Path) -> Result<Scenario, ScenarioError> {
    let source = fs::read_to_string(path)
        .map_err(|err| ScenarioError::Io { message: format!("{}: {err}", path.display()) })?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        scenario_from_json(&source)
    } else {
        scenario_from_toml(&source)
    }
}

/// One line per scenario kind: token, summary, and the defaults it runs
/// with when `[params]` is empty.
pub fn list_scenarios() -> String {
    let mut text = String::new();
    for kind in ScenarioKind::ALL {
        let scenario = default_scenario(kind);
        let _ = writeln!(text, "{}", kind.token());
        let _ = writeln!(text, "    {}", kind.summary());
        let params = serde_json::to_value(&scenario.params).unwrap_or_default();
        let defaults = match params.as_object() {
            Some(map) => map
                .iter()
                .map(|(key, value)| format!("{key}={value}"))
                .collect::<Vec<_>>()
                .join(", "),
            None => String::new(),
        };
        let _ = writeln!(text, "    defaults: {defaults}");
        text.push('\n');
    }
    text
}

fn mm(value: f64) -> f64 {
    value * 1e-3
}

fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![start];
    }
    let step = (end - start) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { end } else { start + step * i as f64 }).collect()
}

/// "1.5" -> "1p5", "2" -> "2", "-3" -> "m3": value tokens safe inside CSV
/// column names and file names.
fn unit_label(value: f64) -> String {
    format!("{value}").replace('.', "p").replace('-', "m")
}

fn csv_text(header: &str, rows: &[Vec<f64>]) -> String {
    let mut text = String::with_capacity(header.len() + 1 + rows.len() * 24);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        for (index, value) in row.iter().enumerate() {
            if index > 0 {
                text.push(',');
            }
            let _ = write!(text, "{value}");
        }
        text.push('\n');
    }
    text
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), ScenarioError> {
    fs::write(dir.join(name), text)
        .map_err(|err| ScenarioError::Io { message: format!("writing {name}: {err}") })
}

fn beam_from(p: &Params, radius_of_curvature: Option<f64>) -> BeamParams {
    let mut beam =
        BeamParams::gaussian(p.wavelength_nm.unwrap() * 1e-9, mm(p.waist_mm.unwrap()));
    if let Some(radius) = radius_of_curvature {
        beam = beam.with_curvature(radius);
    }
    beam
}

fn pdc_from(p: &Params) -> PdcParams {
    PdcParams {
        pump_waist: p.pump_waist_um.unwrap() * 1e-6,
        collection_waist: p.collection_waist_um.unwrap() * 1e-6,
        wavelength: p.wavelength_nm.unwrap() * 1e-9,
        weight_width: mm(p.weight_width_mm.unwrap()),
    }
}

fn plan_from(p: &Params, enabled: bool) -> CorrelationSamplingPlan {
    CorrelationSamplingPlan {
        enabled,
        n_radial: p.plan_n_radial.unwrap(),
        n_azimuthal: p.plan_n_azimuthal.unwrap(),
        truncation: p.plan_truncation.unwrap(),
    }
}

/// Shear from rotation when `gamma_deg` is set, otherwise the idealized
/// pure-y shear.
fn config_from(p: &Params) -> Result<InterferometerConfig, ScenarioError> {
    let walk_off = mm(p.walk_off_mm.unwrap());
    let config = match p.gamma_deg {
        Some(gamma) => InterferometerConfig::from_rotation(walk_off, gamma.to_radians())?,
        None => InterferometerConfig::from_shear_y(walk_off, mm(p.shear_y_mm.unwrap()))?,
    };
    Ok(config.with_path_balance(p.path_balance.unwrap())?)
}

fn iris_from(p: &Params) -> Result<IrisConfig, ScenarioError> {
    Ok(IrisConfig::new(
        (mm(p.iris_center_x_mm.unwrap()), mm(p.iris_center_y_mm.unwrap())),
        mm(p.iris_diameter_mm.unwrap()),
    )?)
}

/// Fitted fringe shift between the +l and -l scans of one configuration.
fn charge_pair_shift(
    l: i32,
    beam: &BeamParams,
    config: &InterferometerConfig,
    phases: &[f64],
    iris: &IrisConfig,
    pdc: &PdcParams,
    plan: &CorrelationSamplingPlan,
) -> Result<f64, ScenarioError> {
    let plus = fringe_scan(l, beam, config, phases, iris, pdc, plan)?;
    let minus = fringe_scan(-l, beam, config, phases, iris, pdc, plan)?;
    Ok(phase_shift(&plus, &minus)?.delta_phase)
}

/// A + B cos(phi + C) sampled densely for the SVG fit curves.
fn dense_fit_curve(fit: &SinusoidFit) -> Vec<(f64, f64)> {
    (0..DENSE_CURVE_SAMPLES)
        .map(|i| {
            let phi = std::f64::consts::TAU * i as f64 / (DENSE_CURVE_SAMPLES - 1) as f64;
            (phi, fit.offset + fit.amplitude * (phi + fit.phase).cos())
        })
        .collect()
}

fn run_shift_vs_offset(p: &Params, dir: &Path) -> Result<(Vec<String>, Value), ScenarioError> {
    let beam = beam_from(p, None);
    let pdc = pdc_from(p);
    let config = config_from(p)?;
    let phases = phase_grid(p.phase_points.unwrap());
    let offsets_mm = linspace(p.x0_min_mm.unwrap(), p.x0_max_mm.unwrap(), p.n_points.unwrap());
    let finite_diameters_mm = p.iris_diameters_mm.clone().unwrap();

    let mut header = String::from("x0_mm,dphi_point_rad");
    let mut labels = vec![format!("point ({} um iris)", POINT_IRIS_DIAMETER * 1e6)];
    for &d in &finite_diameters_mm {
        let _ = write!(header, ",dphi_d{}mm_rad", unit_label(d));
        labels.push(format!("iris d = {d} mm"));
    }
    let mut diameters = vec![POINT_IRIS_DIAMETER];
    diameters.extend(finite_diameters_mm.iter().map(|&d| mm(d)));

    let mut files = Vec::new();
    for (suffix, enabled, title) in [
        ("plain", false, "Fringe shift vs iris offset (plain field)"),
        ("correlated", true, "Fringe shift vs iris offset (correlation averaged)"),
    ] {
        let plan = plan_from(p, enabled);
        let mut rows = Vec::with_capacity(offsets_mm.len());
        for &x0_mm in &offsets_mm {
            let mut row = Vec::with_capacity(1 + diameters.len());
            row.push(x0_mm);
            for &diameter in &diameters {
                let iris = IrisConfig::new((mm(x0_mm), 0.0), diameter)?;
                row.push(charge_pair_shift(1, &beam, &config, &phases, &iris, &pdc, &plan)?);
            }
            rows.push(row);
        }

        let csv_name = format!("shift_vs_x0_{suffix}.csv");
        write_text(dir, &csv_name, &csv_text(&header, &rows))?;
        files.push(csv_name);

        let mut plot = Plot::new(title, "iris offset x0 (mm)", "fringe shift (rad)");
        for (column, label) in labels.iter().enumerate() {
            let points = rows.iter().map(|row| (row[0], row[column + 1])).collect();
            plot.push(Series::line_and_markers(label.clone(), points));
        }
        let svg_name = format!("shift_vs_x0_{suffix}.svg");
        write_text(dir, &svg_name, &plot.to_svg())?;
        files.push(svg_name);
    }

    let shear = config.shear();
    let derived = json!({
        "shear_dx_m": shear.dx,
        "shear_dy_m": shear.dy,
        "point_iris_diameter_m": POINT_IRIS_DIAMETER,
        "phase_samples": phases.len(),
    });
    Ok((files, derived))
}

fn run_shift_vs_rotation(p: &Params, dir: &Path) -> Result<(Vec<String>, Value), ScenarioError> {
    let pdc = pdc_from(p);
    let phases = phase_grid(p.phase_points.unwrap());
    let gammas_deg =
        linspace(p.gamma_min_deg.unwrap(), p.gamma_max_deg.unwrap(), p.n_points.unwrap());
    let iris = iris_from(p)?;
    let walk_off = mm(p.walk_off_mm.unwrap());

    let mut curves: Vec<(String, String, Option<f64>)> =
        vec![("flat".into(), "flat wavefront".into(), None)];
    for &radius in p.radii_of_curvature_m.as_ref().unwrap() {
        curves.push((format!("R{}m", unit_label(radius)), format!("R = {radius} m"), Some(radius)));
    }
    let mut header = String::from("gamma_deg");
    for (token, _, _) in &curves {
        let _ = write!(header, ",dphi_{token}_rad");
    }

    let mut files = Vec::new();
    for (suffix, enabled, title) in [
        ("plain", false, "Fringe shift vs crystal rotation (plain field)"),
        ("correlated", true, "Fringe shift vs crystal rotation (correlation averaged)"),
    ] {
        let plan = plan_from(p, enabled);
        let mut rows = Vec::with_capacity(gammas_deg.len());
        for &gamma_deg in &gammas_deg {
            let config = InterferometerConfig::from_rotation(walk_off, gamma_deg.to_radians())?
                .with_path_balance(p.path_balance.unwrap())?;
            let mut row = Vec::with_capacity(1 + curves.len());
            row.push(gamma_deg);
            for (_, _, radius) in &curves {
                let beam = beam_from(p, *radius);
                row.push(charge_pair_shift(1, &beam, &config, &phases, &iris, &pdc, &plan)?);
            }
            rows.push(row);
        }

        let csv_name = format!("shift_vs_gamma_{suffix}.csv");
        write_text(dir, &csv_name, &csv_text(&header, &rows))?;
        files.push(csv_name);

        let mut plot = Plot::new(title, "crystal rotation (deg)", "fringe shift (rad)");
        for (column, (_, label, _)) in curves.iter().enumerate() {
            let points = rows.iter().map(|row| (row[0], row[column + 1])).collect();
            plot.push(Series::line_and_markers(label.clone(), points));
        }
        let svg_name = format!("shift_vs_gamma_{suffix}.svg");
        write_text(dir, &svg_name, &plot.to_svg())?;
        files.push(svg_name);
    }

    let derived = json!({
        "iris_center_m": [iris.center.0, iris.center.1],
        "iris_diameter_m": iris.diameter,
        "phase_samples": phases.len(),
    });
    Ok((files, derived))
}

/// The +l and -l scans shared by the fringe and counts kinds.
fn scan_pair(p: &Params) -> Result<(FringeScan, FringeScan), ScenarioError> {
    let l = p.l.unwrap();
    let beam = beam_from(p, p.radius_of_curvature_m);
    let pdc = pdc_from(p);
    let config = config_from(p)?;
    let plan = plan_from(p, p.correlations.unwrap());
    let iris = iris_from(p)?;
    let phases = phase_grid(p.phase_points.unwrap());
    let plus = fringe_scan(l, &beam, &config, &phases, &iris, &pdc, &plan)?;
    let minus = fringe_scan(-l, &beam, &config, &phases, &iris, &pdc, &plan)?;
    Ok((plus, minus))
}

fn run_fringe_scan(p: &Params, dir: &Path) -> Result<(Vec<String>, Value), ScenarioError> {
    let l = p.l.unwrap();
    let (plus, minus) = scan_pair(p)?;
    let shift = phase_shift(&plus, &minus)?;

    let mut files = Vec::new();
    for (scan, name) in [(&plus, "fringe_plus.csv"), (&minus, "fringe_minus.csv")] {
        let mut buffer = Vec::new();
        scan.write_csv(&mut buffer)?;
        write_text(dir, name, &String::from_utf8_lossy(&buffer))?;
        files.push(name.to_string());
    }

    let mut plot = Plot::new("Iris fringe scan", "phase (rad)", "detection probability");
    plot.push(Series::markers(format!("l = {l:+} samples"), plus.samples().to_vec()));
    plot.push(Series::line(format!("l = {l:+} fit"), dense_fit_curve(&shift.fit_plus)));
    plot.push(Series::markers(format!("l = {:+} samples", -l), minus.samples().to_vec()));
    plot.push(Series::line(format!("l = {:+} fit", -l), dense_fit_curve(&shift.fit_minus)));
    write_text(dir, "fringe_scan.svg", &plot.to_svg())?;
    files.push("fringe_scan.svg".to_string());

    let sigma = shift
        .fit_plus
        .phase_sigma()
        .hypot(shift.fit_minus.phase_sigma());
    let derived = json!({
        "fit_plus": shift.fit_plus.json_report(),
        "fit_minus": shift.fit_minus.json_report(),
        "delta_phase_rad": shift.delta_phase,
        "delta_phase_sigma_rad": sigma,
    });
    Ok((files, derived))
}

fn counts_series(records: &[CountRecord]) -> (Vec<(f64, f64)>, Vec<f64>) {
    let means = records.iter().map(|r| (r.phase, r.mean)).collect();
    let errors = records.iter().map(|r| r.std_error).collect();
    (means, errors)
}

fn run_counts_experiment(p: &Params, dir: &Path) -> Result<(Vec<String>, Value), ScenarioError> {
    let l = p.l.unwrap();
    let seed = p.seed.unwrap();
    let (plus, minus) = scan_pair(p)?;
    let noiseless = phase_shift(&plus, &minus)?;

    let protocol = AcquisitionProtocol {
        rate_scale: p.rate_per_minute.unwrap(),
        n_acquisitions: p.n_acquisitions.unwrap(),
        t_acquisition: p.t_acquisition_s.unwrap(),
        rng_seed: seed,
    };
    let records_plus = simulate_counts(&plus, &protocol)?;
    let records_minus =
        simulate_counts(&minus, &AcquisitionProtocol { rng_seed: seed.wrapping_add(1), ..protocol })?;

    let mut files = Vec::new();
    for (records, name) in
        [(&records_plus, "counts_plus.csv"), (&records_minus, "counts_minus.csv")]
    {
        let mut buffer = Vec::new();
        write_counts_csv(records, &mut buffer)?;
        write_text(dir, name, &String::from_utf8_lossy(&buffer))?;
        files.push(name.to_string());
    }

    let fit_plus = fit_counts(&records_plus)?;
    let fit_minus = fit_counts(&records_minus)?;
    let delta = wrap_phase(fit_plus.phase - fit_minus.phase);
    let sigma = fit_plus.phase_sigma().hypot(fit_minus.phase_sigma());

    let mut plot =
        Plot::new("Simulated coincidence counts", "phase (rad)", "counts per acquisition");
    let (means_plus, errors_plus) = counts_series(&records_plus);
    let (means_minus, errors_minus) = counts_series(&records_minus);
    plot.push(Series::markers(format!("l = {l:+} mean"), means_plus).with_y_errors(errors_plus));
    plot.push(Series::line(format!("l = {l:+} fit"), dense_fit_curve(&fit_plus)));
    plot.push(
        Series::markers(format!("l = {:+} mean", -l), means_minus).with_y_errors(errors_minus),
    );
    plot.push(Series::line(format!("l = {:+} fit", -l), dense_fit_curve(&fit_minus)));
    write_text(dir, "counts_experiment.svg", &plot.to_svg())?;
    files.push("counts_experiment.svg".to_string());

    let derived = json!({
        "counts_fit_plus": fit_plus.json_report(),
        "counts_fit_minus": fit_minus.json_report(),
        "delta_phase_rad": delta,
        "delta_phase_sigma_rad": sigma,
        "noiseless_delta_phase_rad": noiseless.delta_phase,
        "rng_seed_plus": seed,
        "rng_seed_minus": seed.wrapping_add(1),
    });
    Ok((files, derived))
}

fn run_conservation_table(p: &Params, dir: &Path) -> Result<(Vec<String>, Value), ScenarioError> {
    let pdc = pdc_from(p);
    let l_max = p.l_max.unwrap();
    let table = coefficient_table(l_max, &pdc)?;

    let mut buffer = Vec::new();
    table.write_csv(&mut buffer)?;
    write_text(dir, "coefficients.csv", &String::from_utf8_lossy(&buffer))?;

    let order = l_max as i32;
    let row_labels: Vec<String> = (-order..=order).map(|l| format!("l = {l}")).collect();
    let col_labels: Vec<String> = (-order..=order).map(|l| format!("l' = {l}")).collect();
    let values: Vec<Vec<f64>> = (-order..=order)
        .map(|l| {
            (-order..=order)
                .map(|l_prime| table.value(l, l_prime).map_or(0.0, |c| c.norm()))
                .collect()
        })
        .collect();
    let svg = matrix_svg("Down-conversion overlap magnitudes", &row_labels, &col_labels, &values);
    write_text(dir, "coefficients.svg", &svg)?;

    let widths = angular_widths(&pdc);
    let c00 = table.value(0, 0).map_or(0.0, |c| c.re);
    let mut derived = json!({
        "w_tilde_m": widths.w_tilde,
        "delta_pdc_rad": widths.delta_pdc,
        "delta_diff_rad": widths.delta_diff,
        "c00": c00,
    });
    if l_max >= 1 {
        let c1m1 = table.value(1, -1).map_or(0.0, |c| c.re);
        derived["ratio_c_1_m1_to_c00"] = json!(c1m1 / c00);
        derived["w_tilde_squared_m2"] = json!(widths.w_tilde * widths.w_tilde);
    }
    Ok((vec!["coefficients.csv".into(), "coefficients.svg".into()], derived))
}

fn run_coupling_curves(p: &Params, dir: &Path) -> Result<(Vec<String>, Value), ScenarioError> {
    let pdc = pdc_from(p);
    let widths = angular_widths(&pdc);
    let theta_max = p.theta_max_pdc_widths.unwrap() * widths.delta_pdc;
    let thetas = linspace(0.0, theta_max, p.n_points.unwrap());

    let mut rows = Vec::with_capacity(thetas.len());
    for &theta in &thetas {
        rows.push(vec![
            theta * 1e3,
            coupling_amplitude_l0(theta, &pdc)?,
            coupling_l0_closed_form(theta, &pdc),
            coupling_amplitude_l1(theta, &pdc)?,
            coupling_l1_closed_form(theta, &pdc),
        ]);
    }
    let header = "theta_mrad,c_l0_numeric,c_l0_closed,c_l1_numeric,c_l1_closed";
    write_text(dir, "coupling_curves.csv", &csv_text(header, &rows))?;

    let mut plot = Plot::new(
        "Exit-angle coupling amplitudes",
        "exit angle (mrad)",
        "normalized coupling",
    );
    let column = |index: usize| rows.iter().map(|row| (row[0], row[index])).collect::<Vec<_>>();
    plot.push(Series::markers("|l| = 0 numeric", column(1)));
    plot.push(Series::line("|l| = 0 closed form", column(2)));
    plot.push(Series::markers("|l| = 1 numeric", column(3)));
    plot.push(Series::line("|l| = 1 closed form", column(4)));
    write_text(dir, "coupling_curves.svg", &plot.to_svg())?;

    let derived = json!({
        "w_tilde_m": widths.w_tilde,
        "delta_pdc_rad": widths.delta_pdc,
        "delta_diff_rad": widths.delta_diff,
        "theta_max_rad": theta_max,
    });
    Ok((vec!["coupling_curves.csv".into(), "coupling_curves.svg".into()], derived))
}

fn dispatch(scenario: &Scenario, dir: &Path) -> Result<(Vec<String>, Value), ScenarioError> {
    match scenario.kind {
        ScenarioKind::ShiftVsOffset => run_shift_vs_offset(&scenario.params, dir),
        ScenarioKind::ShiftVsRotation => run_shift_vs_rotation(&scenario.params, dir),
        ScenarioKind::FringeScanPair => run_fringe_scan(&scenario.params, dir),
        ScenarioKind::CountsExperiment => run_counts_experiment(&scenario.params, dir),
        ScenarioKind::ConservationTable => run_conservation_table(&scenario.params, dir),
        ScenarioKind::CouplingCurves => run_coupling_curves(&scenario.params, dir),
    }
}

/// Runs a scenario and writes its bundle under `output_root/<output name>`.
///
/// The scenario is re-validated first, so hand-built [`Scenario`] values get
/// the same checks as parsed files. Sweeps run in a deterministic order and
/// files are written sequentially, finishing with `metadata.json`; on a
/// module failure a machine-readable `error.json` is left in the bundle
/// directory instead and the error is returned.
pub fn run_scenario(scenario: &Scenario, output_root: &Path) -> Result<RunReport, ScenarioError> {
    let scenario = finish(scenario.clone(), None)?;
    let dir = output_root.join(scenario.output_name());
    fs::create_dir_all(&dir)
        .map_err(|err| ScenarioError::Io { message: format!("{}: {err}", dir.display()) })?;

    match dispatch(&scenario, &dir) {
        Ok((mut files, derived)) => {
            let metadata = json!({
                "scenario": scenario,
                "derived": derived,
                "tool": { "name": "oamsim", "version": env!("CARGO_PKG_VERSION") },
            });
            let text = serde_json::to_string_pretty(&metadata)
                .map_err(|err| ScenarioError::Io { message: err.to_string() })?;
            write_text(&dir, "metadata.json", &(text + "\n"))?;
            files.push("metadata.json".to_string());
            Ok(RunReport { output_dir: dir, files, metadata })
        }
        Err(err) => {
            let record = json!({ "error": err.to_string(), "kind": err.kind_token() });
            if let Ok(text) = serde_json::to_string_pretty(&record) {
                let _ = fs::write(dir.join("error.json"), text + "\n");
            }
            Err(err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_fills_all_defaults() {
        let scenario = scenario_from_toml("kind = \"fringe_scan\"").unwrap();
        assert_eq!(scenario, default_scenario(ScenarioKind::FringeScanPair));
        assert_eq!(scenario.output_name(), "fringe_scan");
        let p = &scenario.params;
        assert_eq!(p.waist_mm, Some(0.85));
        assert_eq!(p.wavelength_nm, Some(815.0));
        assert_eq!(p.walk_off_mm, Some(4.18));
        assert_eq!(p.weight_width_mm, Some(0.93));
        assert_eq!(p.pump_waist_um, Some(40.0));
        assert_eq!(p.collection_waist_um, Some(31.0));
        assert_eq!(p.shear_y_mm, Some(0.5));
        assert_eq!(p.gamma_deg, None);
        assert_eq!(p.l, Some(1));
        assert_eq!(p.correlations, Some(false));
    }

    #[test]
    fn default_scenarios_validate_cleanly() {
        for kind in ScenarioKind::ALL {
            let scenario = default_scenario(kind);
            let normalized = finish(scenario.clone(), None).unwrap();
            assert_eq!(normalized, scenario, "normalization must be idempotent for {kind:?}");
        }
    }

    #[test]
    fn kind_tokens_are_stable() {
        let tokens: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.token()).collect();
        assert_eq!(
            tokens,
            [
                "fig3_shift_vs_x0",
                "fig4_shift_vs_gamma",
                "fringe_scan",
                "counts_experiment",
                "conservation_table",
                "coupling_curves",
            ]
        );
        for kind in ScenarioKind::ALL {
            let json = serde_json::to_value(kind).unwrap();
            assert_eq!(json, Value::String(kind.token().to_string()));
        }
    }

    #[test]
    fn unknown_kind_is_a_validation_error() {
        let err = scenario_from_toml("kind = \"fig5_mystery\"").unwrap_err();
        match err {
            ScenarioError::Validation { diagnostics } => {
                assert!(diagnostics[0].contains("unknown variant"), "got: {diagnostics:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn undeclared_parameter_names_field_and_location() {
        let source = "kind = \"fig3_shift_vs_x0\"\n\n[params]\ngamma_deg = 5.0\n";
        let err = scenario_from_toml(source).unwrap_err();
        match err {
            ScenarioError::Validation { diagnostics } => {
                assert_eq!(diagnostics.len(), 1);
                assert!(diagnostics[0].contains("line 4, column 1"), "got: {diagnostics:?}");
                assert!(diagnostics[0].contains("`gamma_deg`"), "got: {diagnostics:?}");
                assert!(diagnostics[0].contains("fig3_shift_vs_x0"), "got: {diagnostics:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn unknown_parameter_key_is_rejected_by_the_parser() {
        let source = "kind = \"fringe_scan\"\n[params]\nwaist_m = 0.8\n";
        let err = scenario_from_toml(source).unwrap_err();
        match err {
            ScenarioError::Validation { diagnostics } => {
                assert!(diagnostics[0].contains("waist_m"), "got: {diagnostics:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn out_of_range_values_collect_located_diagnostics() {
        let source = "kind = \"fringe_scan\"\n\n[params]\nwaist_mm = -0.85\nphase_points = 4\n";
        let err = scenario_from_toml(source).unwrap_err();
        match err {
            ScenarioError::Validation { diagnostics } => {
                assert_eq!(diagnostics.len(), 2, "got: {diagnostics:?}");
                assert!(diagnostics[0].contains("line 4, column 1"), "got: {diagnostics:?}");
                assert!(diagnostics[0].contains("`waist_mm` must be positive"));
                assert!(diagnostics[1].contains("line 5, column 1"), "got: {diagnostics:?}");
                assert!(diagnostics[1].contains("`phase_points`"));
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn shear_and_rotation_are_mutually_exclusive() {
        let source = "kind = \"fringe_scan\"\n[params]\nshear_y_mm = 0.5\ngamma_deg = 5.0\n";
        let err = scenario_from_toml(source).unwrap_err();
        match err {
            ScenarioError::Validation { diagnostics } => {
                assert!(diagnostics[0].contains("mutually exclusive"), "got: {diagnostics:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn rotation_alone_is_accepted_and_leaves_shear_unset() {
        let source = "kind = \"fringe_scan\"\n[params]\ngamma_deg = 5.0\n";
        let scenario = scenario_from_toml(source).unwrap();
        assert_eq!(scenario.params.gamma_deg, Some(5.0));
        assert_eq!(scenario.params.shear_y_mm, None);
    }

    #[test]
    fn truncation_below_the_weight_floor_is_rejected() {
        let source = "kind = \"fringe_scan\"\n[params]\nplan_truncation = 1.0\n";
        let err = scenario_from_toml(source).unwrap_err();
        match err {
            ScenarioError::Validation { diagnostics } => {
                assert!(diagnostics[0].contains("boundary weight"), "got: {diagnostics:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn output_name_must_be_a_plain_directory_name() {
        for bad in ["\"a/b\"", "\"..\"", "\"\""] {
            let source = format!("kind = \"coupling_curves\"\noutput = {bad}\n");
            let err = scenario_from_toml(&source).unwrap_err();
            assert!(
                matches!(err, ScenarioError::Validation { .. }),
                "output {bad} should be rejected"
            );
        }
        let source = "kind = \"coupling_curves\"\noutput = \"run-3.checks_ok\"\n";
        assert!(scenario_from_toml(source).is_ok());
    }

    #[test]
    fn json_sidecar_and_bare_object_both_round_trip() {
        let scenario = default_scenario(ScenarioKind::ShiftVsOffset);
        let bare = serde_json::to_string(&scenario).unwrap();
        assert_eq!(scenario_from_json(&bare).unwrap(), scenario);

        let sidecar = json!({
            "scenario": scenario,
            "derived": { "anything": 1 },
            "tool": { "name": "oamsim", "version": "0.0.0" },
        })
        .to_string();
        assert_eq!(scenario_from_json(&sidecar).unwrap(), scenario);
    }

    #[test]
    fn locate_reports_the_assignment_not_a_prefix_match() {
        let source = "kind = \"conservation_table\"\n[params]\nl_max = 3\n";
        assert_eq!(locate(source, "l_max"), Some((3, 1)));
        assert_eq!(locate(source, "l"), None);
    }

    #[test]
    fn list_scenarios_names_every_kind_with_defaults() {
        let listing = list_scenarios();
        for kind in ScenarioKind::ALL {
            assert!(listing.contains(kind.token()), "missing {}", kind.token());
        }
        assert!(listing.contains("waist_mm=0.85"));
        assert!(listing.contains("l_max=3"));
    }

    #[test]
    fn coupling_bundle_writes_csv_svg_and_sidecar() {
        let tmp = tempfile::tempdir().unwrap();
        let source = "kind = \"coupling_curves\"\n[params]\nn_points = 5\ntheta_max_pdc_widths = 2.0\n";
        let scenario = scenario_from_toml(source).unwrap();
        let report = run_scenario(&scenario, tmp.path()).unwrap();
        assert_eq!(
            report.files,
            ["coupling_curves.csv", "coupling_curves.svg", "metadata.json"]
        );
        let csv = fs::read_to_string(report.output_dir.join("coupling_curves.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "theta_mrad,c_l0_numeric,c_l0_closed,c_l1_numeric,c_l1_closed"
        );
        assert_eq!(lines.count(), 5);

        let metadata: Value =
            serde_json::from_str(&fs::read_to_string(report.output_dir.join("metadata.json")).unwrap())
                .unwrap();
        assert_eq!(metadata["scenario"]["kind"], "coupling_curves");
        assert_eq!(metadata["tool"]["name"], "oamsim");
        assert!(metadata["derived"]["delta_pdc_rad"].as_f64().unwrap() > 0.0);

        let reparsed = scenario_from_json(&metadata.to_string()).unwrap();
        assert_eq!(reparsed, scenario);
    }

    #[test]
    fn validation_failure_never_creates_an_output_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let mut scenario = default_scenario(ScenarioKind::CouplingCurves);
        scenario.params.theta_max_pdc_widths = Some(-1.0);
        let err = run_scenario(&scenario, tmp.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!tmp.path().join("coupling_curves").exists());
    }

    #[test]
    fn exit_codes_and_kind_tokens_follow_the_error_class() {
        let validation = ScenarioError::Validation { diagnostics: vec!["x".into()] };
        let numerical = ScenarioError::Numerical { message: "x".into() };
        let io_err = ScenarioError::Io { message: "x".into() };
        assert_eq!(
            [validation.exit_code(), numerical.exit_code(), io_err.exit_code()],
            [2, 3, 1]
        );
        assert_eq!(
            [validation.kind_token(), numerical.kind_token(), io_err.kind_token()],
            ["validation", "numerical", "io"]
        );
    }
}
