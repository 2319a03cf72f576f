//! Quadrature primitives shared by the field integrals.
//!
//! Radial directions use Gauss-Legendre rules (nodes found by Newton iteration
//! on the Legendre recurrence, accurate to machine precision for the orders
//! used here). Azimuthal directions use the periodic trapezoid rule, which is
//! spectrally accurate for the trigonometric integrands this crate produces.
//! Convergence is always established by comparing two resolutions; the
//! comparison lives at the call sites, the error type lives here.

use std::f64::consts::TAU;
use std::fmt;

/// Relative tolerance under which a resolution refinement must leave an
/// integral before it is trusted.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-6;

/// A convergence-checked integral moved by more than the allowed relative
/// tolerance when its resolution was refined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonConvergence {
    /// Relative change observed under refinement.
    pub achieved: f64,
    /// Tolerance the change was required to stay under.
    pub required: f64,
}

impl fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "quadrature did not converge: relative change {:.3e} under refinement exceeds {:.3e}",
            self.achieved, self.required
        )
    }
}

impl std::error::Error for NonConvergence {}

/// Checks that refining a rule moved the result by at most `tol` relative to
/// the scale of the integral. `scale` guards integrals that are legitimately
/// near zero (interference nulls, conservation-suppressed coefficients): the
/// change is compared against it rather than against the tiny result itself.
pub fn check_refinement(coarse: f64, fine: f64, scale: f64, tol: f64) -> Result<(), NonConvergence> {
    let diff = (fine - coarse).abs();
    let scale = scale.abs().max(fine.abs()).max(coarse.abs());
    if scale == 0.0 || diff <= tol * scale {
        Ok(())
    } else {
        Err(NonConvergence { achieved: diff / scale, required: tol })
    }
}

/// Gauss-Legendre nodes and weights for ∫₋₁¹ f(x) dx, ascending by node.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    let mut rule = Vec::with_capacity(n);
    for k in 0..n {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre_and_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut p = x;
    for j in 2..=n {
        let next = ((2 * j - 1) as f64 * x * p - (j - 1) as f64 * prev) / j as f64;
        prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre nodes and weights mapped to ∫ₐᵇ f(x) dx.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Quadrature nodes (x, y, weight) covering a disk: Gauss-Legendre radially
/// (the weight absorbs the r Jacobian), uniform azimuthally. Node order is
/// fixed (radius-major, then azimuth), so sums over the rule are reproducible.
#[derive(Debug, Clone)]
pub struct DiskRule {
    nodes: Vec<(f64, f64, f64)>,
}

impl DiskRule {
    pub fn new(center: (f64, f64), radius: f64, n_radial: usize, n_azimuthal: usize) -> Self {
        assert!(radius > 0.0, "disk radius must be positive");
        let dphi = TAU / n_azimuthal as f64;
        let mut nodes = Vec::with_capacity(n_radial * n_azimuthal);
        for (r, wr) in gauss_legendre_on(0.0, radius, n_radial) {
            for j in 0..n_azimuthal {
                let phi = j as f64 * dphi;
                nodes.push((center.0 + r * phi.cos(), center.1 + r * phi.sin(), r * wr * dphi));
            }
        }
        Self { nodes }
    }

    pub fn nodes(&self) -> &[(f64, f64, f64)] {
        &self.nodes
    }

    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(x, y, w)| w * f(x, y)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_node_rule_is_midpoint() {
        let rule = gauss_legendre(1);
        assert_eq!(rule.len(), 1);
        assert_relative_eq!(rule[0].0, 0.0, epsilon = 1e-15);
        assert_relative_eq!(rule[0].1, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn five_node_rule_matches_reference_values() {
        // Abscissas and weights for n = 5 as tabulated everywhere.
        let rule = gauss_legendre(5);
        let nodes = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
        let weights = [
            0.23692688505618908,
            0.47862867049936647,
            0.5688888888888889,
            0.47862867049936647,
            0.23692688505618908,
        ];
        for (i, &(x, w)) in rule.iter().enumerate() {
            assert_relative_eq!(x, nodes[i], epsilon = 1e-14);
            assert_relative_eq!(w, weights[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn rule_is_exact_to_degree_2n_minus_1() {
        // n = 5 integrates x^8 and x^9 exactly on [-1, 1].
        let rule = gauss_legendre(5);
        let i8: f64 = rule.iter().map(|&(x, w)| w * x.powi(8)).sum();
        let i9: f64 = rule.iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert_relative_eq!(i8, 2.0 / 9.0, epsilon = 1e-14);
        assert!(i9.abs() < 1e-15);
    }

    #[test]
    fn mapped_rule_integrates_over_interval() {
        let rule = gauss_legendre_on(0.0, 2.0, 8);
        let integral: f64 = rule.iter().map(|&(x, w)| w * x * x).sum();
        assert_relative_eq!(integral, 8.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn disk_rule_recovers_area_and_moments() {
        let rule = DiskRule::new((0.0, 0.0), 1.0, 16, 32);
        assert_relative_eq!(rule.integrate(|_, _| 1.0), std::f64::consts::PI, epsilon = 1e-12);
        // ∫ x² over the unit disk = π/4; odd moments vanish.
        assert_relative_eq!(rule.integrate(|x, _| x * x), std::f64::consts::PI / 4.0, epsilon = 1e-12);
        assert!(rule.integrate(|x, y| x * y).abs() < 1e-15);
    }

    #[test]
    fn disk_rule_integrates_offset_gaussian() {
        // ∫ e^{−2r²/w²} over a disk of radius 5w centered on the beam:
        // (πw²/2)(1 − e^{−50}), i.e. πw²/2 to double precision.
        let w = 0.85e-3;
        let rule = DiskRule::new((0.3e-3, -0.2e-3), 5.0 * w, 64, 128);
        let got = rule.integrate(|x, y| {
            let r2 = (x - 0.3e-3).powi(2) + (y + 0.2e-3).powi(2);
            (-2.0 * r2 / (w * w)).exp()
        });
        assert_relative_eq!(got, std::f64::consts::PI * w * w / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn refinement_check_accepts_agreement_and_flags_drift() {
        assert!(check_refinement(1.0, 1.0 + 1e-9, 1.0, 1e-6).is_ok());
        assert!(check_refinement(0.0, 0.0, 0.0, 1e-6).is_ok());
        let err = check_refinement(1.0, 1.1, 1.1, 1e-6).unwrap_err();
        assert!(err.achieved > err.required);
    }
}
