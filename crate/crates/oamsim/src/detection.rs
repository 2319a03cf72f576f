//! Local detection: intensity integrated over a displaced circular iris,
//! the incoherent average over down-conversion angular correlations, and
//! fringe scans P(φ, l) ready for sinusoid fitting.
//!
//! The iris is what makes the measurement local: a small aperture off the
//! vortex axis sees the two sheared replicas with a geometric phase offset
//! l·arctan(Δy/x₀), so the fringe phase read from a scan of φ carries the
//! sign of l. Angular correlations of the pair source smear the mode's
//! transverse position relative to the fixed iris; they enter as a
//! Gaussian-weighted incoherent average over displacements of the whole
//! two-replica field.

use crate::fitting::{fit_sinusoid, wrap_phase, FitError, SinusoidFit};
use crate::interferometer::{superpose, InterferometerConfig, InterferometerError};
use crate::lg::{analytic_total_power, eval_lg, BeamParams, LGModeSpec, LgError};
use crate::pdc::{translation_weight, PdcError, PdcParams};
use crate::quadrature::{
    check_refinement, gauss_legendre_on, DiskRule, NonConvergence, DEFAULT_RELATIVE_TOLERANCE,
};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::f64::consts::TAU;
use std::fmt;
use std::io::{self, Write};

/// Default radial × azimuthal resolution of the iris disk quadrature; the
/// convergence check compares against half this resolution.
pub const IRIS_RADIAL_NODES: usize = 64;
pub const IRIS_AZIMUTHAL_NODES: usize = 128;

/// A displacement-average plan whose boundary Gaussian weight exceeds this
/// fraction of the central weight truncates too much probability and is
/// rejected.
pub const TRUNCATION_WEIGHT_LIMIT: f64 = 1e-3;

/// Fewest samples a scan needs before its fringe phase is trusted.
pub const MIN_SCAN_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum DetectionError {
    InvalidIris { reason: &'static str },
    InvalidPlan { reason: &'static str },
    /// The Gaussian weight at the displacement-grid boundary is still
    /// significant: enlarging the truncation radius is required, not
    /// optional.
    TruncationTooSmall { boundary_weight: f64, limit: f64 },
    InvalidPhaseGrid { reason: &'static str },
    InvalidScan { reason: &'static str },
    ScanTooShort { got: usize, needed: usize },
    QuadratureNonConvergence(NonConvergence),
    Beam(LgError),
    Interferometer(InterferometerError),
    Pdc(PdcError),
    Fit(FitError),
}

impl fmt::Display for DetectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectionError::InvalidIris { reason } => write!(f, "invalid iris: {reason}"),
            DetectionError::InvalidPlan { reason } => write!(f, "invalid sampling plan: {reason}"),
            DetectionError::TruncationTooSmall { boundary_weight, limit } => write!(
                f,
                "displacement grid truncated while the boundary weight {boundary_weight:.3e} \
                 still exceeds {limit:.0e} of the center; increase the truncation radius"
            ),
            DetectionError::InvalidPhaseGrid { reason } => write!(f, "invalid phase grid: {reason}"),
            DetectionError::InvalidScan { reason } => write!(f, "invalid fringe scan: {reason}"),
            DetectionError::ScanTooShort { got, needed } => {
                write!(f, "fringe scan has {got} samples, phase extraction needs {needed}")
            }
            DetectionError::QuadratureNonConvergence(inner) => inner.fmt(f),
            DetectionError::Beam(e) => e.fmt(f),
            DetectionError::Interferometer(e) => e.fmt(f),
            DetectionError::Pdc(e) => e.fmt(f),
            DetectionError::Fit(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for DetectionError {}

impl From<NonConvergence> for DetectionError {
    fn from(e: NonConvergence) -> Self {
        DetectionError::QuadratureNonConvergence(e)
    }
}

impl From<LgError> for DetectionError {
    fn from(e: LgError) -> Self {
        DetectionError::Beam(e)
    }
}

impl From<InterferometerError> for DetectionError {
    fn from(e: InterferometerError) -> Self {
        DetectionError::Interferometer(e)
    }
}

impl From<PdcError> for DetectionError {
    fn from(e: PdcError) -> Self {
        DetectionError::Pdc(e)
    }
}

impl From<FitError> for DetectionError {
    fn from(e: FitError) -> Self {
        DetectionError::Fit(e)
    }
}

/// Circular aperture in the detection plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrisConfig {
    /// Center (x_i, y_i), meters.
    pub center: (f64, f64),
    /// Diameter d_i, meters.
    pub diameter: f64,
}

impl IrisConfig {
    pub fn new(center: (f64, f64), diameter: f64) -> Result<Self, DetectionError> {
        let iris = Self { center, diameter };
        iris.validate()?;
        Ok(iris)
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        if !self.center.0.is_finite() || !self.center.1.is_finite() {
            return Err(DetectionError::InvalidIris { reason: "center must be finite" });
        }
        if !(self.diameter > 0.0) || !self.diameter.is_finite() {
            return Err(DetectionError::InvalidIris { reason: "diameter must be positive and finite" });
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }
}

/// Polar sampling grid for the incoherent average over transverse
/// displacements of the mode, weighted by the Gaussian G(r) of width w_c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSamplingPlan {
    pub enabled: bool,
    pub n_radial: usize,
    pub n_azimuthal: usize,
    /// Radial truncation of the displacement grid, in multiples of w_c.
    pub truncation: f64,
}

impl Default for CorrelationSamplingPlan {
    /// 8 radial × 16 azimuthal displacement nodes out to 2·w_c: beyond that
    /// radius the Gaussian weight is below e⁻⁸ and the integrand is
    /// low-order.
    fn default() -> Self {
        Self { enabled: true, n_radial: 8, n_azimuthal: 16, truncation: 2.0 }
    }
}

impl CorrelationSamplingPlan {
    /// No displacement average: a single on-axis term, the uncorrelated
    /// idealization.
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    /// Same grid at doubled resolution, for convergence checks.
    pub fn doubled(&self) -> Self {
        Self { n_radial: 2 * self.n_radial, n_azimuthal: 2 * self.n_azimuthal, ..*self }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        if self.n_radial < 1 || self.n_azimuthal < 1 {
            return Err(DetectionError::InvalidPlan { reason: "node counts must be at least 1" });
        }
        if !(self.truncation > 0.0) || !self.truncation.is_finite() {
            return Err(DetectionError::InvalidPlan { reason: "truncation must be positive and finite" });
        }
        Ok(())
    }
}

/// One fringe: detection probability versus interferometer phase for a
/// single mode charge, with the full configuration snapshot that produced
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    l: i32,
    samples: Vec<(f64, f64)>,
    metadata: Value,
}

impl FringeScan {
    /// Validates the scan invariants: phases strictly increasing and
    /// spanning at least 2π, probabilities finite and non-negative.
    pub fn new(l: i32, samples: Vec<(f64, f64)>, metadata: Value) -> Result<Self, DetectionError> {
        if samples.is_empty() {
            return Err(DetectionError::InvalidScan { reason: "no samples" });
        }
        for pair in samples.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(DetectionError::InvalidScan { reason: "phases must increase strictly" });
            }
        }
        let span = samples[samples.len() - 1].0 - samples[0].0;
        if !(span >= TAU * (1.0 - 1e-12)) {
            return Err(DetectionError::InvalidScan { reason: "phases must span at least 2π" });
        }
        if samples.iter().any(|&(phi, p)| !phi.is_finite() || !p.is_finite() || p < 0.0) {
            return Err(DetectionError::InvalidScan {
                reason: "probabilities must be finite and non-negative",
            });
        }
        Ok(Self { l, samples, metadata })
    }

    pub fn l(&self) -> i32 {
        self.l
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn metadata(&self) -> &Value {
        &self.metadata
    }

    /// Unweighted sinusoid fit of the scan.
    pub fn fit(&self) -> Result<SinusoidFit, FitError> {
        fit_sinusoid(&self.samples, None)
    }

    /// CSV rows `phi_rad,P`, one per sample, shortest round-trip float
    /// formatting for byte-stable output.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "phi_rad,P")?;
        for &(phi, p) in &self.samples {
            writeln!(out, "{},{}", phi, p)?;
        }
        Ok(())
    }

    /// The configuration snapshot as a pretty-printed JSON sidecar.
    pub fn write_metadata<W: Write>(&self, mut out: W) -> io::Result<()> {
        let text = serde_json::to_string_pretty(&self.metadata)?;
        writeln!(out, "{text}")
    }
}

/// Phase grid of n+1 samples covering [0, 2π] inclusive, the natural input
/// for [`fringe_scan`].
pub fn phase_grid(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    (0..=n).map(|i| TAU * i as f64 / n as f64).collect()
}

fn iris_rules(iris: &IrisConfig) -> (DiskRule, DiskRule) {
    let coarse =
        DiskRule::new(iris.center, iris.radius(), IRIS_RADIAL_NODES / 2, IRIS_AZIMUTHAL_NODES / 2);
    let fine = DiskRule::new(iris.center, iris.radius(), IRIS_RADIAL_NODES, IRIS_AZIMUTHAL_NODES);
    (coarse, fine)
}

/// `scale` references the refinement check when the integral itself may sit
/// at an interference null; 0 falls back to the integral's own magnitude.
fn iris_power_checked(
    intensity: impl Fn(f64, f64) -> f64,
    coarse: &DiskRule,
    fine: &DiskRule,
    scale: f64,
) -> Result<f64, DetectionError> {
    let rough = coarse.integrate(&intensity);
    let refined = fine.integrate(&intensity);
    check_refinement(rough, refined, scale, DEFAULT_RELATIVE_TOLERANCE)?;
    Ok(refined)
}

/// Intensity integrated over the iris disk: a polar quadrature concentric
/// with the aperture, accepted only when halving the resolution moves the
/// result by less than [`DEFAULT_RELATIVE_TOLERANCE`].
pub fn iris_power(
    intensity: impl Fn(f64, f64) -> f64,
    iris: &IrisConfig,
) -> Result<f64, DetectionError> {
    iris.validate()?;
    let (coarse, fine) = iris_rules(iris);
    iris_power_checked(intensity, &coarse, &fine, 0.0)
}

/// Fraction of a single-replica mode's power the iris passes,
/// iris_power / total power. In [0, 1] up to quadrature tolerance.
pub fn collected_fraction(
    mode: LGModeSpec,
    beam: &BeamParams,
    iris: &IrisConfig,
) -> Result<f64, DetectionError> {
    beam.validate()?;
    let power = iris_power(|x, y| eval_lg(mode, beam, x, y).norm_sqr(), iris)?;
    Ok(power / analytic_total_power(mode, beam))
}

/// Displacement samples (sx, sy, weight) of the correlation average; the
/// weight combines the Gaussian G(r) with the polar quadrature element.
fn displacement_samples(
    plan: &CorrelationSamplingPlan,
    pdc: &PdcParams,
) -> Result<Vec<(f64, f64, f64)>, DetectionError> {
    if !plan.enabled {
        return Ok(vec![(0.0, 0.0, 1.0)]);
    }
    let r_max = plan.truncation * pdc.weight_width;
    let boundary_weight = translation_weight(r_max, pdc);
    if boundary_weight > TRUNCATION_WEIGHT_LIMIT {
        return Err(DetectionError::TruncationTooSmall {
            boundary_weight,
            limit: TRUNCATION_WEIGHT_LIMIT,
        });
    }
    let dtheta = TAU / plan.n_azimuthal as f64;
    let mut samples = Vec::with_capacity(plan.n_radial * plan.n_azimuthal);
    for (r, wr) in gauss_legendre_on(0.0, r_max, plan.n_radial) {
        let radial_weight = translation_weight(r, pdc) * r * wr * dtheta;
        for j in 0..plan.n_azimuthal {
            let theta = j as f64 * dtheta;
            samples.push((r * theta.cos(), r * theta.sin(), radial_weight));
        }
    }
    Ok(samples)
}

fn validate_phase_grid(grid: &[f64]) -> Result<(), DetectionError> {
    if grid.len() < 2 {
        return Err(DetectionError::InvalidPhaseGrid { reason: "needs at least two phases" });
    }
    if grid.iter().any(|phi| !phi.is_finite()) {
        return Err(DetectionError::InvalidPhaseGrid { reason: "phases must be finite" });
    }
    for pair in grid.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(DetectionError::InvalidPhaseGrid { reason: "phases must increase strictly" });
        }
    }
    if !(grid[grid.len() - 1] - grid[0] >= TAU * (1.0 - 1e-12)) {
        return Err(DetectionError::InvalidPhaseGrid { reason: "phases must span at least 2π" });
    }
    Ok(())
}

fn scan_metadata(
    l: i32,
    beam: &BeamParams,
    base: &InterferometerConfig,
    phase_count: usize,
    iris: &IrisConfig,
    pdc: &PdcParams,
    plan: &CorrelationSamplingPlan,
) -> Value {
    let shear = base.shear();
    json!({
        "mode": { "l": l, "p": 0 },
        "beam": {
            "wavelength_m": beam.wavelength,
            "waist_m": beam.waist,
            "radius_of_curvature_m": beam.radius_of_curvature,
            "amplitude_scale": beam.amplitude_scale,
        },
        "interferometer": {
            "walk_off_m": base.walk_off,
            "gamma_rad": base.gamma,
            "path_balance": base.path_balance,
            "shear_dx_m": shear.dx,
            "shear_dy_m": shear.dy,
        },
        "iris": {
            "center_m": [iris.center.0, iris.center.1],
            "diameter_m": iris.diameter,
        },
        "pdc": {
            "pump_waist_m": pdc.pump_waist,
            "collection_waist_m": pdc.collection_waist,
            "wavelength_m": pdc.wavelength,
            "weight_width_m": pdc.weight_width,
        },
        "correlation_plan": {
            "enabled": plan.enabled,
            "n_radial": plan.n_radial,
            "n_azimuthal": plan.n_azimuthal,
            "truncation_weight_widths": plan.truncation,
        },
        "phase_samples": phase_count,
    })
}

/// Detection probability versus interferometer phase for a charge-l input.
///
/// For each φ the two-replica output field is built at the base geometry,
/// then integrated over the iris. With the sampling plan enabled the whole
/// field is additionally translated through the plan's displacement grid and
/// the iris powers are averaged incoherently with the Gaussian weight
/// G(|s|), normalized by the summed weights: the angular-correlation
/// correction. Phases parallelize; the displacement sum runs in a fixed
/// order so results are bitwise reproducible. Every iris integral must pass
/// a resolution-refinement check referenced to the two-replica power
/// envelope, so exact destructive nulls cannot trip false non-convergence.
pub fn fringe_scan(
    l: i32,
    beam: &BeamParams,
    base: &InterferometerConfig,
    phases: &[f64],
    iris: &IrisConfig,
    pdc: &PdcParams,
    plan: &CorrelationSamplingPlan,
) -> Result<FringeScan, DetectionError> {
    beam.validate()?;
    base.validate()?;
    iris.validate()?;
    pdc.validate()?;
    plan.validate()?;
    validate_phase_grid(phases)?;
    let mode = LGModeSpec::charge(l);
    let displacements = displacement_samples(plan, pdc)?;
    let weight_total: f64 = displacements.iter().map(|&(_, _, w)| w).sum();
    let (coarse, fine) = iris_rules(iris);

    // Convergence scale per displacement: the incoherent sum of the two
    // replica powers over the iris. It bounds the fringe from above and is
    // φ-independent, so destructive nulls (whose own magnitude is pure
    // rounding noise) are checked against the fringe scale instead of
    // against themselves.
    let shear = base.shear();
    let balance_sq = base.path_balance * base.path_balance;
    let envelope = |x: f64, y: f64| {
        let direct = eval_lg(mode, beam, x, y).norm_sqr();
        let sheared = eval_lg(mode, beam, x - shear.dx, y - shear.dy).norm_sqr();
        2.0 * (direct + balance_sq * sheared)
    };
    let scales: Vec<f64> = displacements
        .iter()
        .map(|&(sx, sy, _)| fine.integrate(|x, y| envelope(x - sx, y - sy)))
        .collect();

    let samples: Result<Vec<(f64, f64)>, DetectionError> = phases
        .par_iter()
        .map(|&phi| {
            let out = superpose(mode, beam, &base.with_phase(phi))?;
            let mut weighted = 0.0;
            for (&(sx, sy, w), &scale) in displacements.iter().zip(&scales) {
                let power = iris_power_checked(
                    |x, y| out.intensity(x - sx, y - sy),
                    &coarse,
                    &fine,
                    scale,
                )?;
                weighted += w * power;
            }
            Ok((phi, weighted / weight_total))
        })
        .collect();
    FringeScan::new(l, samples?, scan_metadata(l, beam, base, phases.len(), iris, pdc, plan))
}

/// Fringe phases of an l = +|l| and an l = −|l| scan, and their wrapped
/// difference - the locally measurable signature of the mode's handedness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShiftResult {
    /// wrap(C₊ − C₋) in (−π, π].
    pub delta_phase: f64,
    pub fit_plus: SinusoidFit,
    pub fit_minus: SinusoidFit,
}

/// Fits both scans and returns the wrapped difference of their fringe
/// phases.
pub fn phase_shift(plus: &FringeScan, minus: &FringeScan) -> Result<PhaseShiftResult, DetectionError> {
    for scan in [plus, minus] {
        if scan.samples.len() < MIN_SCAN_SAMPLES {
            return Err(DetectionError::ScanTooShort {
                got: scan.samples.len(),
                needed: MIN_SCAN_SAMPLES,
            });
        }
    }
    let fit_plus = plus.fit()?;
    let fit_minus = minus.fit()?;
    Ok(PhaseShiftResult {
        delta_phase: wrap_phase(fit_plus.phase - fit_minus.phase),
        fit_plus,
        fit_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::point_probability;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const DETECTOR_WAIST: f64 = 0.85e-3;

    fn detector_beam() -> BeamParams {
        BeamParams::gaussian(815e-9, DETECTOR_WAIST)
    }

    fn iris(center_x: f64, diameter: f64) -> IrisConfig {
        IrisConfig::new((center_x, 0.0), diameter).unwrap()
    }

    #[test]
    fn iris_power_basics() {
        let zero = iris_power(|_, _| 0.0, &iris(0.3e-3, 1.5e-3)).unwrap();
        assert_eq!(zero, 0.0);
        let area = iris_power(|_, _| 1.0, &iris(0.0, 1.5e-3)).unwrap();
        assert_relative_eq!(area, std::f64::consts::PI * 0.75e-3 * 0.75e-3, max_relative = 1e-10);
    }

    #[test]
    fn huge_iris_collects_total_power() {
        let beam = detector_beam();
        let mode = LGModeSpec::charge(1);
        let wide = iris(0.0, 20.0 * DETECTOR_WAIST);
        let power = iris_power(|x, y| eval_lg(mode, &beam, x, y).norm_sqr(), &wide).unwrap();
        assert_relative_eq!(power, analytic_total_power(mode, &beam), max_relative = 1e-6);
        assert_relative_eq!(collected_fraction(mode, &beam, &wide).unwrap(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn iris_power_monotone_in_diameter() {
        let beam = detector_beam();
        let mode = LGModeSpec::charge(1);
        let mut last = 0.0;
        for d in [0.3e-3, 0.8e-3, 1.5e-3, 2.5e-3, 5.0e-3] {
            let p = iris_power(|x, y| eval_lg(mode, &beam, x, y).norm_sqr(), &iris(0.4e-3, d)).unwrap();
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn iris_power_flags_unresolvable_integrands() {
        // A grating far finer than the quadrature spacing cannot converge.
        let result = iris_power(|x, _| 1.0 + (x * 3.0e7).cos(), &iris(0.0, 1.5e-3));
        assert!(matches!(result, Err(DetectionError::QuadratureNonConvergence(_))));
    }

    #[test]
    fn collected_fractions_at_reference_geometry() {
        // Ring mode of the experiment's detection-plane size against the
        // 1.5 mm iris: about 45% on axis, dropping to about 30% at 0.8 mm
        // of iris offset.
        let beam = detector_beam();
        let mode = LGModeSpec::charge(1);
        let centered = collected_fraction(mode, &beam, &iris(0.0, 1.5e-3)).unwrap();
        let shifted = collected_fraction(mode, &beam, &iris(0.8e-3, 1.5e-3)).unwrap();
        assert_abs_diff_eq!(centered, 0.45, epsilon = 0.05);
        assert_abs_diff_eq!(shifted, 0.30, epsilon = 0.05);
        assert!(centered > shifted);
    }

    #[test]
    fn phase_grid_shape() {
        let grid = phase_grid(16);
        assert_eq!(grid.len(), 17);
        assert_eq!(grid[0], 0.0);
        assert_relative_eq!(grid[16], TAU, max_relative = 1e-15);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(phase_grid(0), vec![0.0]);
    }

    #[test]
    fn point_iris_scan_matches_closed_form() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let pin = iris(0.7e-3, 10e-6);
        let grid = phase_grid(16);
        let pdc = PdcParams::default();
        let scan = fringe_scan(
            1,
            &beam,
            &config,
            &grid,
            &pin,
            &pdc,
            &CorrelationSamplingPlan::disabled(),
        )
        .unwrap();
        let area = std::f64::consts::PI * 5e-6 * 5e-6;
        for &(phi, p) in scan.samples() {
            let reference = point_probability(1, DETECTOR_WAIST, 0.5e-3, phi, 0.7e-3).unwrap();
            assert_relative_eq!(p / area, reference, max_relative = 1e-3);
        }
    }

    #[test]
    fn zero_shear_scans_are_charge_blind() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_rotation(4.18e-3, 0.0).unwrap();
        let grid = phase_grid(8);
        let pdc = PdcParams::default();
        let plan = CorrelationSamplingPlan::disabled();
        let plus = fringe_scan(1, &beam, &config, &grid, &iris(0.7e-3, 1.5e-3), &pdc, &plan).unwrap();
        let minus = fringe_scan(-1, &beam, &config, &grid, &iris(0.7e-3, 1.5e-3), &pdc, &plan).unwrap();
        let scale = plus.samples().iter().map(|&(_, p)| p).fold(0.0, f64::max);
        for (a, b) in plus.samples().iter().zip(minus.samples()) {
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-10 * scale);
        }
    }

    #[test]
    fn correlation_average_reduces_the_phase_shift() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let grid = phase_grid(8);
        let pdc = PdcParams::default();
        let aperture = iris(0.7e-3, 1.5e-3);
        let shift = |plan: &CorrelationSamplingPlan| {
            let plus = fringe_scan(1, &beam, &config, &grid, &aperture, &pdc, plan).unwrap();
            let minus = fringe_scan(-1, &beam, &config, &grid, &aperture, &pdc, plan).unwrap();
            phase_shift(&plus, &minus).unwrap().delta_phase
        };
        let plain = shift(&CorrelationSamplingPlan::disabled());
        let corrected = shift(&CorrelationSamplingPlan::default());
        assert!(corrected.abs() < plain.abs(), "correlations must reduce |Δφ|: {corrected} vs {plain}");
        assert!(plain.abs() > 0.1, "geometry must produce a visible shift for the test to mean anything");
    }

    #[test]
    fn fitted_phases_are_antisymmetric_in_charge() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let grid = phase_grid(12);
        let pdc = PdcParams::default();
        let plan = CorrelationSamplingPlan::disabled();
        let aperture = iris(0.7e-3, 1.5e-3);
        let plus = fringe_scan(1, &beam, &config, &grid, &aperture, &pdc, &plan).unwrap();
        let minus = fringe_scan(-1, &beam, &config, &grid, &aperture, &pdc, &plan).unwrap();
        let result = phase_shift(&plus, &minus).unwrap();
        assert_abs_diff_eq!(result.fit_plus.phase, -result.fit_minus.phase, epsilon = 1e-6);
    }

    #[test]
    fn doubling_the_sampling_plan_is_converged() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let grid = phase_grid(8);
        let pdc = PdcParams::default();
        let aperture = iris(0.7e-3, 1.5e-3);
        let shift = |plan: &CorrelationSamplingPlan| {
            let plus = fringe_scan(1, &beam, &config, &grid, &aperture, &pdc, plan).unwrap();
            let minus = fringe_scan(-1, &beam, &config, &grid, &aperture, &pdc, plan).unwrap();
            phase_shift(&plus, &minus).unwrap().delta_phase
        };
        let default_plan = CorrelationSamplingPlan::default();
        let fine = shift(&default_plan.doubled());
        let coarse = shift(&default_plan);
        assert_abs_diff_eq!(coarse, fine, epsilon = 1e-3);
    }

    #[test]
    fn truncating_the_displacement_grid_too_early_errors() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let plan = CorrelationSamplingPlan { truncation: 1.5, ..CorrelationSamplingPlan::default() };
        let result = fringe_scan(
            1,
            &beam,
            &config,
            &phase_grid(8),
            &iris(0.7e-3, 1.5e-3),
            &PdcParams::default(),
            &plan,
        );
        assert!(matches!(result, Err(DetectionError::TruncationTooSmall { .. })));
    }

    #[test]
    fn identical_scans_have_zero_shift() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let scan = fringe_scan(
            1,
            &beam,
            &config,
            &phase_grid(8),
            &iris(0.7e-3, 1.5e-3),
            &PdcParams::default(),
            &CorrelationSamplingPlan::disabled(),
        )
        .unwrap();
        let result = phase_shift(&scan, &scan).unwrap();
        assert_eq!(result.delta_phase, 0.0);
    }

    #[test]
    fn short_scans_are_rejected_for_phase_extraction() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let scan = fringe_scan(
            1,
            &beam,
            &config,
            &phase_grid(4),
            &iris(0.7e-3, 1.5e-3),
            &PdcParams::default(),
            &CorrelationSamplingPlan::disabled(),
        )
        .unwrap();
        assert!(matches!(
            phase_shift(&scan, &scan),
            Err(DetectionError::ScanTooShort { got: 5, needed: 8 })
        ));
    }

    #[test]
    fn scan_invariants_are_enforced() {
        let meta = json!({});
        assert!(matches!(
            FringeScan::new(1, vec![], meta.clone()),
            Err(DetectionError::InvalidScan { .. })
        ));
        let not_increasing = vec![(0.0, 1.0), (0.0, 1.0), (TAU, 1.0)];
        assert!(FringeScan::new(1, not_increasing, meta.clone()).is_err());
        let short_span = vec![(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)];
        assert!(FringeScan::new(1, short_span, meta.clone()).is_err());
        let negative = vec![(0.0, 1.0), (3.0, -0.1), (TAU, 1.0)];
        assert!(FringeScan::new(1, negative, meta.clone()).is_err());
        let good = vec![(0.0, 1.0), (3.0, 0.5), (TAU, 1.0)];
        assert!(FringeScan::new(1, good, meta).is_ok());
    }

    #[test]
    fn grid_validation_rejects_bad_inputs() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let pdc = PdcParams::default();
        let plan = CorrelationSamplingPlan::disabled();
        let aperture = iris(0.7e-3, 1.5e-3);
        for bad in [vec![0.0], vec![0.0, 1.0, 0.5, TAU], vec![0.0, 1.0, 2.0, 3.0]] {
            assert!(matches!(
                fringe_scan(1, &beam, &config, &bad, &aperture, &pdc, &plan),
                Err(DetectionError::InvalidPhaseGrid { .. })
            ));
        }
    }

    #[test]
    fn scan_export_formats() {
        let beam = detector_beam();
        let config = InterferometerConfig::from_shear_y(4.18e-3, 0.5e-3).unwrap();
        let scan = fringe_scan(
            1,
            &beam,
            &config,
            &phase_grid(8),
            &iris(0.7e-3, 1.5e-3),
            &PdcParams::default(),
            &CorrelationSamplingPlan::disabled(),
        )
        .unwrap();
        let mut csv = Vec::new();
        scan.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("phi_rad,P\n"));
        assert_eq!(text.lines().count(), 10);
        let meta = scan.metadata();
        assert_eq!(meta["mode"]["l"], 1);
        assert_eq!(meta["iris"]["diameter_m"].as_f64().unwrap(), 1.5e-3);
        assert_eq!(meta["interferometer"]["shear_dx_m"].as_f64().unwrap(), 0.0);
        assert!(meta["beam"]["radius_of_curvature_m"].is_null());
        let mut sidecar = Vec::new();
        scan.write_metadata(&mut sidecar).unwrap();
        assert!(String::from_utf8(sidecar).unwrap().contains("\"weight_width_m\""));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn probabilities_stay_nonnegative_across_config_space(
            l in -3i32..=3,
            gamma_deg in -8.0..8.0f64,
            center_x in -1.0e-3..1.0e-3f64,
            center_y in -0.5e-3..0.5e-3f64,
            diameter in 0.2e-3..2.5e-3f64,
            curvature in proptest::option::of(1.0..5.0f64),
        ) {
            let mut beam = detector_beam();
            if let Some(r) = curvature {
                beam = beam.with_curvature(r);
            }
            let config = InterferometerConfig::from_rotation(4.18e-3, gamma_deg.to_radians()).unwrap();
            let aperture = IrisConfig::new((center_x, center_y), diameter).unwrap();
            let scan = fringe_scan(
                l,
                &beam,
                &config,
                &phase_grid(4),
                &aperture,
                &PdcParams::default(),
                &CorrelationSamplingPlan::disabled(),
            ).unwrap();
            prop_assert!(scan.samples().iter().all(|&(_, p)| p >= 0.0));
        }
    }
}
