//! Down-conversion mode structure: overlap coefficients of the pair amplitude
//! with Laguerre-Gauss detection modes, angular emission widths, and coupling
//! amplitudes versus photon exit angle.
//!
//! The pair amplitude at the crystal is a Gaussian pump of waist `w_p`
//! projected onto two conjugate collection modes of waist `w`, so every radial
//! integrand here carries the effective Gaussian `exp(−r²/w̃²)` with
//! `1/w̃² = 1/w_p² + 2/w²`. Azimuthal integration against `e^{i(l+l')φ}`
//! enforces orbital-angular-momentum conservation: coefficients with
//! `l + l' ≠ 0` vanish identically and the numeric quadrature reproduces that
//! suppression to the tolerance of the rule.
//!
//! Every integral is evaluated at two resolutions and must agree before it is
//! returned; disagreement surfaces as [`PdcError::NonConvergence`] instead of
//! a silently wrong number.

use crate::quadrature::{gauss_legendre_on, NonConvergence};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{self, Write};

/// Largest |l| the overlap quadrature is validated for.
pub const MAX_MODE_ORDER: i32 = 6;

/// Largest exit angle, in units of the down-conversion angular width, the
/// coupling quadratures accept.
pub const MAX_EXIT_ANGLE_WIDTHS: f64 = 10.0;

/// Relative tolerance on the two-resolution agreement of every integral.
const QUAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum PdcError {
    OrderOutOfRange { l: i32, l_prime: i32 },
    TableOrderOutOfRange { l_max: u32 },
    ExitAngleOutOfRange { theta: f64, max_theta: f64 },
    InvalidParams { reason: &'static str },
    NonConvergence(NonConvergence),
}

impl fmt::Display for PdcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PdcError::OrderOutOfRange { l, l_prime } => write!(
                f,
                "mode orders (l = {l}, l' = {l_prime}) outside the validated range |l| ≤ {MAX_MODE_ORDER}"
            ),
            PdcError::TableOrderOutOfRange { l_max } => {
                write!(f, "table order l_max = {l_max} exceeds the validated {MAX_MODE_ORDER}")
            }
            PdcError::ExitAngleOutOfRange { theta, max_theta } => {
                write!(f, "exit angle {theta:.3e} rad outside validated |θ| ≤ {max_theta:.3e} rad")
            }
            PdcError::InvalidParams { reason } => write!(f, "invalid down-conversion parameters: {reason}"),
            PdcError::NonConvergence(inner) => inner.fmt(f),
        }
    }
}

impl std::error::Error for PdcError {}

impl From<NonConvergence> for PdcError {
    fn from(e: NonConvergence) -> Self {
        PdcError::NonConvergence(e)
    }
}

/// Geometry of the down-conversion source and collection optics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdcParams {
    /// Pump waist w_p at the crystal, meters.
    pub pump_waist: f64,
    /// Collection-mode waist w at the crystal, meters.
    pub collection_waist: f64,
    /// Degenerate signal/idler wavelength λ, meters.
    pub wavelength: f64,
    /// Width w_c of the Gaussian weight exp(−2r²/w_c²) that converts angular
    /// correlations into transverse displacements at the detection plane,
    /// meters. Used directly; see [`weight_width_from_collimation`] for the
    /// alternative route through the collimating focal length.
    pub weight_width: f64,
}

impl Default for PdcParams {
    /// Reference geometry of the modeled experiment: 40 µm pump waist, 31 µm
    /// collection waist, 815 nm degenerate wavelength, 0.93 mm weight width.
    fn default() -> Self {
        Self { pump_waist: 40e-6, collection_waist: 31e-6, wavelength: 815e-9, weight_width: 0.93e-3 }
    }
}

impl PdcParams {
    pub fn validate(&self) -> Result<(), PdcError> {
        for (value, reason) in [
            (self.pump_waist, "pump waist must be positive and finite"),
            (self.collection_waist, "collection waist must be positive and finite"),
            (self.wavelength, "wavelength must be positive and finite"),
            (self.weight_width, "weight width must be positive and finite"),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PdcError::InvalidParams { reason });
            }
        }
        Ok(())
    }

    /// Effective Gaussian width of every radial integrand,
    /// 1/w̃² = 1/w_p² + 2/w².
    fn effective_width(&self) -> f64 {
        let inv2 = 1.0 / (self.pump_waist * self.pump_waist)
            + 2.0 / (self.collection_waist * self.collection_waist);
        inv2.sqrt().recip()
    }

    /// Radial truncation of the quadratures; the integrand envelope there is
    /// below e^{−100} of its peak for every supported mode order.
    fn radial_cutoff(&self) -> f64 {
        6.0 * self.pump_waist.max(self.collection_waist)
    }
}

/// Angular widths of the source as seen from the detection side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularWidths {
    /// Effective width w̃ with 1/w̃² = 1/w_p² + 2/w², meters.
    pub w_tilde: f64,
    /// Down-conversion angular width δ_PDC = λ/(π w̃), radians.
    pub delta_pdc: f64,
    /// Single-mode diffraction width δ_diff = λ/(π w), radians.
    pub delta_diff: f64,
}

pub fn angular_widths(params: &PdcParams) -> AngularWidths {
    let w_tilde = params.effective_width();
    AngularWidths {
        w_tilde,
        delta_pdc: params.wavelength / (PI * w_tilde),
        delta_diff: params.wavelength / (PI * params.collection_waist),
    }
}

/// The weight width implied by collimating the angular spread δ_PDC with a
/// lens of the given focal length. Exposed as the cross-check route; the
/// model itself uses [`PdcParams::weight_width`] directly.
pub fn weight_width_from_collimation(focal_length: f64, widths: &AngularWidths) -> f64 {
    focal_length * widths.delta_pdc
}

/// Gaussian weight G(r) = exp(−2r²/w_c²) of a transverse displacement r of
/// the down-converted mode at the detection plane.
pub fn translation_weight(r_shift: f64, params: &PdcParams) -> f64 {
    let wc2 = params.weight_width * params.weight_width;
    (-2.0 * r_shift * r_shift / wc2).exp()
}

/// ∫ r^{m+1} e^{−(r/w_eff)²} e^{inφ} e^{i k r cos φ} dr dφ at one resolution,
/// together with the positive envelope ∫ r^{m+1} e^{−(r/w_eff)²} dr · 2π used
/// as the convergence scale.
fn annular_integral(
    m: i32,
    w_eff: f64,
    n: i32,
    k: f64,
    r_max: f64,
    n_radial: usize,
    n_azimuthal: usize,
) -> (Complex64, f64) {
    let dphi = TAU / n_azimuthal as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut envelope = 0.0;
    for (r, wr) in gauss_legendre_on(0.0, r_max, n_radial) {
        let radial = r.powi(m + 1) * (-(r / w_eff) * (r / w_eff)).exp() * wr;
        let mut azimuthal = Complex64::new(0.0, 0.0);
        for j in 0..n_azimuthal {
            let phi = j as f64 * dphi;
            azimuthal += Complex64::from_polar(1.0, n as f64 * phi + k * r * phi.cos());
        }
        total += radial * azimuthal * dphi;
        envelope += radial * TAU;
    }
    (total, envelope)
}

/// Runs the annular integral through a resolution ladder until two successive
/// rules agree to [`QUAD_TOL`] relative to the envelope.
fn converged_annular_integral(m: i32, w_eff: f64, n: i32, k: f64, r_max: f64) -> Result<Complex64, PdcError> {
    let mut n_radial = 48;
    let mut n_azimuthal = 32;
    let (mut prev, mut prev_env) = annular_integral(m, w_eff, n, k, r_max, n_radial, n_azimuthal);
    let mut report = NonConvergence { achieved: f64::INFINITY, required: QUAD_TOL };
    while n_radial <= 768 {
        n_radial *= 2;
        n_azimuthal *= 2;
        let (current, env) = annular_integral(m, w_eff, n, k, r_max, n_radial, n_azimuthal);
        let scale = env.max(prev_env);
        let diff = (current - prev).norm();
        if scale == 0.0 || diff <= QUAD_TOL * scale {
            return Ok(current);
        }
        report = NonConvergence { achieved: diff / scale, required: QUAD_TOL };
        prev = current;
        prev_env = env;
    }
    Err(report.into())
}

/// Overlap coefficient c_{l,l'} of the pair amplitude with detection modes of
/// charges l and l': quadrature of
/// ∫ r dr e^{−r²/w_p²} e^{−2r²/w²} r^{|l|+|l'|} ∫ dφ e^{i(l+l')φ}.
/// Arbitrary units (SI meters inside); compare through ratios.
pub fn overlap_coefficient(l: i32, l_prime: i32, params: &PdcParams) -> Result<Complex64, PdcError> {
    params.validate()?;
    if l.abs() > MAX_MODE_ORDER || l_prime.abs() > MAX_MODE_ORDER {
        return Err(PdcError::OrderOutOfRange { l, l_prime });
    }
    converged_annular_integral(
        l.abs() + l_prime.abs(),
        params.effective_width(),
        l + l_prime,
        0.0,
        params.radial_cutoff(),
    )
}

/// All overlap coefficients with |l|, |l'| ≤ l_max, in deterministic
/// (l, l') order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    l_max: u32,
    values: BTreeMap<(i32, i32), Complex64>,
}

pub fn coefficient_table(l_max: u32, params: &PdcParams) -> Result<CoefficientTable, PdcError> {
    if l_max > MAX_MODE_ORDER as u32 {
        return Err(PdcError::TableOrderOutOfRange { l_max });
    }
    let order = l_max as i32;
    let pairs: Vec<(i32, i32)> = (-order..=order)
        .flat_map(|l| (-order..=order).map(move |l_prime| (l, l_prime)))
        .collect();
    let computed: Result<Vec<_>, PdcError> = pairs
        .par_iter()
        .map(|&(l, l_prime)| overlap_coefficient(l, l_prime, params).map(|c| ((l, l_prime), c)))
        .collect();
    Ok(CoefficientTable { l_max, values: computed?.into_iter().collect() })
}

impl CoefficientTable {
    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn value(&self, l: i32, l_prime: i32) -> Option<Complex64> {
        self.values.get(&(l, l_prime)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, i32, Complex64)> + '_ {
        self.values.iter().map(|(&(l, l_prime), &c)| (l, l_prime, c))
    }

    /// CSV rows `l,lprime,re,im,abs`, ascending in (l, l').
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "l,lprime,re,im,abs")?;
        for (l, l_prime, c) in self.iter() {
            writeln!(out, "{},{},{},{},{}", l, l_prime, c.re, c.im, c.norm())?;
        }
        Ok(())
    }
}

fn check_exit_angle(theta: f64, params: &PdcParams) -> Result<AngularWidths, PdcError> {
    params.validate()?;
    let widths = angular_widths(params);
    let max_theta = MAX_EXIT_ANGLE_WIDTHS * widths.delta_pdc;
    if !theta.is_finite() || theta.abs() > max_theta {
        return Err(PdcError::ExitAngleOutOfRange { theta, max_theta });
    }
    Ok(widths)
}

fn transverse_wavenumber(theta: f64, params: &PdcParams) -> f64 {
    TAU * theta / params.wavelength
}

/// Coupling amplitude of the fundamental pair mode at exit angle θ: the tilt
/// phase e^{i(2π/λ)θ r cos φ} integrated against the effective Gaussian,
/// normalized to 1 at θ = 0. Signed real; the azimuthal rule cancels the
/// imaginary part identically.
pub fn coupling_amplitude_l0(theta: f64, params: &PdcParams) -> Result<f64, PdcError> {
    check_exit_angle(theta, params)?;
    let w_eff = params.effective_width();
    let r_max = params.radial_cutoff();
    let tilted = converged_annular_integral(0, w_eff, 0, transverse_wavenumber(theta, params), r_max)?;
    let on_axis = converged_annular_integral(0, w_eff, 0, 0.0, r_max)?;
    Ok(tilted.re / on_axis.re)
}

/// Same as [`coupling_amplitude_l0`] for the |l| = 1 pair mode, whose
/// integrand carries the ring factor (√2·r/w_s)². The radial scale w_s is
/// read as the collection waist; it multiplies the integrand by a constant
/// and cancels in this normalized amplitude (see
/// [`coupling_integral_l1_with_radial_scale`] for the raw integral).
pub fn coupling_amplitude_l1(theta: f64, params: &PdcParams) -> Result<f64, PdcError> {
    check_exit_angle(theta, params)?;
    let w_eff = params.effective_width();
    let r_max = params.radial_cutoff();
    let tilted = converged_annular_integral(2, w_eff, 0, transverse_wavenumber(theta, params), r_max)?;
    let on_axis = converged_annular_integral(2, w_eff, 0, 0.0, r_max)?;
    Ok(tilted.re / on_axis.re)
}

/// Unnormalized |l| = 1 coupling integral with the ring factor (√2·r/w_s)²
/// written out, for callers that want the raw overlap at an explicit radial
/// scale w_s.
pub fn coupling_integral_l1_with_radial_scale(
    theta: f64,
    params: &PdcParams,
    w_s: f64,
) -> Result<Complex64, PdcError> {
    if !(w_s > 0.0) || !w_s.is_finite() {
        return Err(PdcError::InvalidParams { reason: "radial scale w_s must be positive and finite" });
    }
    check_exit_angle(theta, params)?;
    let raw = converged_annular_integral(
        2,
        params.effective_width(),
        0,
        transverse_wavenumber(theta, params),
        params.radial_cutoff(),
    )?;
    Ok(raw * (2.0 / (w_s * w_s)))
}

/// Closed form of [`coupling_amplitude_l0`]: exp(−w̃²k²/4) with k = 2πθ/λ.
/// The Hankel-transform oracle the quadrature is compared against.
pub fn coupling_l0_closed_form(theta: f64, params: &PdcParams) -> f64 {
    let widths = angular_widths(params);
    let k = transverse_wavenumber(theta, params);
    let kappa2 = widths.w_tilde * widths.w_tilde * k * k;
    (-kappa2 / 4.0).exp()
}

/// Closed form of [`coupling_amplitude_l1`]: exp(−w̃²k²/4)·(1 − w̃²k²/4).
/// Crosses zero at θ = δ_PDC and reaches its minimum −e⁻² at θ = √2·δ_PDC.
pub fn coupling_l1_closed_form(theta: f64, params: &PdcParams) -> f64 {
    let widths = angular_widths(params);
    let k = transverse_wavenumber(theta, params);
    let kappa2 = widths.w_tilde * widths.w_tilde * k * k;
    (-kappa2 / 4.0).exp() * (1.0 - kappa2 / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn angular_widths_match_hand_values() {
        // (1/40² + 2/31²)^{−1/2} µm and λ/(πw̃), λ/(πw) for λ = 815 nm.
        let widths = angular_widths(&PdcParams::default());
        assert_relative_eq!(widths.w_tilde, 1.9223073535e-5, max_relative = 1e-9);
        assert_relative_eq!(widths.delta_pdc, 1.3495373504e-2, max_relative = 1e-9);
        assert_relative_eq!(widths.delta_diff, 8.3684695884e-3, max_relative = 1e-9);
        assert!(widths.w_tilde < 31e-6);
        assert!(widths.delta_pdc > widths.delta_diff);
    }

    #[test]
    fn wide_pump_limit_of_effective_width() {
        let params = PdcParams { pump_waist: 1e3, ..PdcParams::default() };
        assert_relative_eq!(
            angular_widths(&params).w_tilde,
            31e-6 / 2.0f64.sqrt(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn collimation_route_for_weight_width() {
        let widths = angular_widths(&PdcParams::default());
        assert_relative_eq!(weight_width_from_collimation(0.1, &widths), 1.3495373504e-3, max_relative = 1e-9);
    }

    #[test]
    fn oam_conservation_suppresses_off_diagonal_coefficients() {
        let params = PdcParams::default();
        let c00 = overlap_coefficient(0, 0, &params).unwrap().norm();
        for l in -3..=3 {
            for l_prime in -3..=3 {
                if l + l_prime == 0 {
                    continue;
                }
                let c = overlap_coefficient(l, l_prime, &params).unwrap().norm();
                assert!(
                    c < 1e-8 * c00,
                    "c({l},{l_prime}) = {c:.3e} not suppressed against c00 = {c00:.3e}"
                );
            }
        }
    }

    #[test]
    fn swap_symmetry_is_exact() {
        let params = PdcParams::default();
        for (l, l_prime) in [(1, -1), (2, -2), (3, 1), (0, 2)] {
            assert_eq!(
                overlap_coefficient(l, l_prime, &params).unwrap(),
                overlap_coefficient(l_prime, l, &params).unwrap()
            );
        }
    }

    #[test]
    fn conserved_ratio_matches_gamma_integral_oracle() {
        // ∫r³e^{−r²/w̃²}dr / ∫re^{−r²/w̃²}dr = w̃², the Γ-function oracle for
        // the conserved pair against the fundamental.
        let params = PdcParams::default();
        let c11 = overlap_coefficient(1, -1, &params).unwrap();
        let c00 = overlap_coefficient(0, 0, &params).unwrap();
        let ratio = c11.re / c00.re;
        assert_relative_eq!(ratio, 3.6952655612e-10, max_relative = 1e-6);
        let w_tilde = angular_widths(&params).w_tilde;
        assert_relative_eq!(ratio, w_tilde * w_tilde, max_relative = 1e-6);
        assert_abs_diff_eq!(c11.im / c00.re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coefficient_table_is_complete_and_consistent() {
        let params = PdcParams::default();
        let table = coefficient_table(2, &params).unwrap();
        assert_eq!(table.iter().count(), 25);
        assert_eq!(table.value(1, -1).unwrap(), overlap_coefficient(1, -1, &params).unwrap());
        assert!(table.value(3, 0).is_none());
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("l,lprime,re,im,abs\n"));
        assert_eq!(text.lines().count(), 26);
    }

    #[test]
    fn fundamental_coupling_matches_gaussian_closed_form() {
        let params = PdcParams::default();
        let delta = angular_widths(&params).delta_pdc;
        assert_eq!(coupling_amplitude_l0(0.0, &params).unwrap(), 1.0);
        for i in 0..=12 {
            let theta = 3.0 * delta * i as f64 / 12.0;
            let numeric = coupling_amplitude_l0(theta, &params).unwrap();
            let closed = coupling_l0_closed_form(theta, &params);
            assert_relative_eq!(numeric, closed, max_relative = 1e-6);
        }
        assert_relative_eq!(
            coupling_amplitude_l0(delta, &params).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn ring_coupling_matches_its_closed_form_and_crosses_zero() {
        let params = PdcParams::default();
        let delta = angular_widths(&params).delta_pdc;
        assert_eq!(coupling_amplitude_l1(0.0, &params).unwrap(), 1.0);
        for i in 0..=12 {
            let theta = 3.0 * delta * i as f64 / 12.0;
            let numeric = coupling_amplitude_l1(theta, &params).unwrap();
            let closed = coupling_l1_closed_form(theta, &params);
            assert_abs_diff_eq!(numeric, closed, epsilon = 1e-6);
        }
        // Frozen value at δ/2: e^{−1/4}·(1 − 1/4).
        assert_relative_eq!(
            coupling_amplitude_l1(0.5 * delta, &params).unwrap(),
            0.584100587304,
            max_relative = 1e-6
        );
        // Zero crossing at δ_PDC, minimum −e⁻² at √2·δ_PDC.
        assert_abs_diff_eq!(coupling_amplitude_l1(delta, &params).unwrap(), 0.0, epsilon = 1e-6);
        assert_relative_eq!(
            coupling_amplitude_l1(2.0f64.sqrt() * delta, &params).unwrap(),
            -(-2.0f64).exp(),
            max_relative = 1e-5
        );
    }

    #[test]
    fn ring_coupling_monotonicity_and_ordering_against_fundamental() {
        // Decreasing up to √2·δ_PDC (not beyond: the closed form turns around
        // there), and strictly below the fundamental curve for θ > 0.
        let params = PdcParams::default();
        let delta = angular_widths(&params).delta_pdc;
        let mut previous = f64::INFINITY;
        for i in 0..=14 {
            let theta = 2.0f64.sqrt() * delta * i as f64 / 14.0;
            let value = coupling_amplitude_l1(theta, &params).unwrap();
            assert!(value < previous, "not decreasing at θ = {theta:.4e}");
            previous = value;
        }
        for i in 1..=9 {
            let theta = 3.0 * delta * i as f64 / 9.0;
            let ring = coupling_amplitude_l1(theta, &params).unwrap();
            let fundamental = coupling_amplitude_l0(theta, &params).unwrap();
            assert!(ring < fundamental, "ring curve not narrower at θ = {theta:.4e}");
        }
    }

    #[test]
    fn coupling_is_even_in_exit_angle() {
        let params = PdcParams::default();
        let delta = angular_widths(&params).delta_pdc;
        for i in 1..=5 {
            let theta = 2.0 * delta * i as f64 / 5.0;
            assert_relative_eq!(
                coupling_amplitude_l0(theta, &params).unwrap(),
                coupling_amplitude_l0(-theta, &params).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn radial_scale_cancels_in_normalized_ring_coupling() {
        let params = PdcParams::default();
        let delta = angular_widths(&params).delta_pdc;
        let theta = 0.7 * delta;
        let a = coupling_integral_l1_with_radial_scale(theta, &params, 31e-6).unwrap();
        let a0 = coupling_integral_l1_with_radial_scale(0.0, &params, 31e-6).unwrap();
        let b = coupling_integral_l1_with_radial_scale(theta, &params, 62e-6).unwrap();
        let b0 = coupling_integral_l1_with_radial_scale(0.0, &params, 62e-6).unwrap();
        assert_relative_eq!(a.re / a0.re, b.re / b0.re, max_relative = 1e-12);
        assert_relative_eq!(a.re / b.re, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn translation_weight_profile() {
        let params = PdcParams::default();
        assert_eq!(translation_weight(0.0, &params), 1.0);
        assert_relative_eq!(
            translation_weight(params.weight_width, &params),
            (-2.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn preconditions_are_enforced() {
        let params = PdcParams::default();
        assert!(matches!(
            overlap_coefficient(7, 0, &params),
            Err(PdcError::OrderOutOfRange { .. })
        ));
        assert!(matches!(coefficient_table(7, &params), Err(PdcError::TableOrderOutOfRange { .. })));
        let delta = angular_widths(&params).delta_pdc;
        assert!(matches!(
            coupling_amplitude_l0(11.0 * delta, &params),
            Err(PdcError::ExitAngleOutOfRange { .. })
        ));
        let bad = PdcParams { pump_waist: -1.0, ..params };
        assert!(matches!(overlap_coefficient(0, 0, &bad), Err(PdcError::InvalidParams { .. })));
        assert!(matches!(
            coupling_integral_l1_with_radial_scale(0.0, &params, 0.0),
            Err(PdcError::InvalidParams { .. })
        ));
    }
}
