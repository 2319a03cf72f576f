//! Least-squares sinusoid fitting of fringe scans, y ≈ A + B·cos(φ + C),
//! and phase arithmetic.
//!
//! The fringe period in φ is exactly 2π by construction, so the model is
//! linear in the reparameterization y = A + P·cos φ + Q·sin φ: the fit is a
//! 3×3 normal-equation solve with a global optimum and no initialization,
//! after which B = √(P² + Q²) and C = atan2(−Q, P). Uncertainties come from
//! the linear-fit covariance; the phase error is propagated by the delta
//! method.

use serde_json::{json, Value};
use std::f64::consts::{PI, TAU};
use std::fmt;

/// Fewest samples a fit accepts; three parameters plus one residual degree
/// of freedom.
pub const MIN_SAMPLES: usize = 4;

/// Fits with amplitude-to-offset ratio below this have no usable fringe and
/// their phase is reported as an error instead of a number.
pub const MIN_VISIBILITY: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    TooFewSamples { got: usize, needed: usize },
    /// The φ values are all congruent mod π (or numerically close to it), so
    /// the design matrix is rank-deficient and (P, Q) are not identifiable.
    DegeneratePhases,
    /// Amplitude-to-offset ratio below [`MIN_VISIBILITY`]; the phase C is
    /// meaningless on such data.
    NoFringe { visibility: f64 },
    WeightCountMismatch { samples: usize, weights: usize },
    InvalidWeight { index: usize, value: f64 },
    NonFiniteSample { index: usize },
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::TooFewSamples { got, needed } => {
                write!(f, "sinusoid fit needs at least {needed} samples, got {got}")
            }
            FitError::DegeneratePhases => {
                write!(f, "phase values are all congruent mod π; fringe parameters not identifiable")
            }
            FitError::NoFringe { visibility } => {
                write!(f, "no fringe: |B/A| = {visibility:.3e} below {MIN_VISIBILITY:.0e}")
            }
            FitError::WeightCountMismatch { samples, weights } => {
                write!(f, "{weights} weights for {samples} samples")
            }
            FitError::InvalidWeight { index, value } => {
                write!(f, "weight {index} must be positive and finite, got {value}")
            }
            FitError::NonFiniteSample { index } => write!(f, "sample {index} is not finite"),
        }
    }
}

impl std::error::Error for FitError {}

/// Result of fitting y = A + B·cos(φ + C).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    /// Offset A.
    pub offset: f64,
    /// Amplitude B ≥ 0.
    pub amplitude: f64,
    /// Phase C in (−π, π].
    pub phase: f64,
    /// Root-mean-square of the unweighted residuals.
    pub rms_residual: f64,
    /// B/A; in [0, 1] for non-negative data.
    pub visibility: f64,
    /// Covariance of (A, P, Q). For weighted fits the weights are taken as
    /// inverse variances and this is (XᵀWX)⁻¹; for unweighted fits it is
    /// scaled by the residual variance estimate RSS/(n − 3).
    covariance: [[f64; 3]; 3],
    /// Linear parameters P = B·cos C, Q = −B·sin C, kept for error
    /// propagation.
    p: f64,
    q: f64,
}

impl SinusoidFit {
    pub fn covariance(&self) -> &[[f64; 3]; 3] {
        &self.covariance
    }

    /// 1σ error of the offset A.
    pub fn offset_sigma(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }

    /// 1σ error of the amplitude B, delta method with gradient
    /// (0, P/B, Q/B).
    pub fn amplitude_sigma(&self) -> f64 {
        let b = self.amplitude;
        self.propagate([0.0, self.p / b, self.q / b])
    }

    /// 1σ error of the phase C, delta method with gradient
    /// (0, Q/B², −P/B²).
    pub fn phase_sigma(&self) -> f64 {
        let b2 = self.amplitude * self.amplitude;
        self.propagate([0.0, self.q / b2, -self.p / b2])
    }

    fn propagate(&self, g: [f64; 3]) -> f64 {
        let mut var = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                var += g[r] * self.covariance[r][c] * g[c];
            }
        }
        var.max(0.0).sqrt()
    }

    /// Fit report for serialization next to exported scan data.
    pub fn json_report(&self) -> Value {
        json!({
            "offset": self.offset,
            "amplitude": self.amplitude,
            "phase": self.phase,
            "phase_sigma": self.phase_sigma(),
            "visibility": self.visibility,
            "rms_residual": self.rms_residual,
            "covariance": self.covariance,
        })
    }
}

/// Wraps an angle to (−π, π]; −π maps to π.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Lower-triangular Cholesky factor of a symmetric 3×3 matrix, or `None` if
/// a pivot falls below 10⁻¹² of the trace (rank deficiency).
fn cholesky3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let floor = 1e-12 * (m[0][0] + m[1][1] + m[2][2]);
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut d = m[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > floor) {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..3 {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Some(l)
}

/// Solves L·Lᵀ·x = b given the Cholesky factor L.
fn solve3(l: &[[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let mut z = [0.0; 3];
    for i in 0..3 {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = z[i];
        for k in (i + 1)..3 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn inverse3(l: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let col = solve3(l, e);
        for i in 0..3 {
            inv[i][j] = col[i];
        }
    }
    inv
}

/// Exact linear least squares of y = A + P·cos φ + Q·sin φ over the samples,
/// reported as (A, B, C). Weights, when given, are inverse variances; with
/// uniform weights the parameters equal the unweighted fit.
pub fn fit_sinusoid(
    samples: &[(f64, f64)],
    weights: Option<&[f64]>,
) -> Result<SinusoidFit, FitError> {
    if samples.len() < MIN_SAMPLES {
        return Err(FitError::TooFewSamples { got: samples.len(), needed: MIN_SAMPLES });
    }
    if let Some(w) = weights {
        if w.len() != samples.len() {
            return Err(FitError::WeightCountMismatch { samples: samples.len(), weights: w.len() });
        }
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(FitError::InvalidWeight { index, value });
        }
    }
    if let Some((index, _)) =
        samples.iter().enumerate().find(|(_, (phi, y))| !phi.is_finite() || !y.is_finite())
    {
        return Err(FitError::NonFiniteSample { index });
    }

    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (i, &(phi, y)) in samples.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let row = [1.0, phi.cos(), phi.sin()];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += w * row[r] * row[c];
            }
            rhs[r] += w * row[r] * y;
        }
    }
    let chol = cholesky3(&m).ok_or(FitError::DegeneratePhases)?;
    let [a, p, q] = solve3(&chol, rhs);

    let mut rss = 0.0;
    for &(phi, y) in samples {
        let r = y - (a + p * phi.cos() + q * phi.sin());
        rss += r * r;
    }
    let rms_residual = (rss / samples.len() as f64).sqrt();

    let mut covariance = inverse3(&chol);
    if weights.is_none() {
        let sigma2 = rss / (samples.len() - 3) as f64;
        for row in covariance.iter_mut() {
            for entry in row.iter_mut() {
                *entry *= sigma2;
            }
        }
    }

    let amplitude = p.hypot(q);
    let visibility = amplitude / a;
    if !(visibility >= MIN_VISIBILITY) {
        return Err(FitError::NoFringe { visibility });
    }
    let phase = wrap_phase((-q).atan2(p));
    Ok(SinusoidFit { offset: a, amplitude, phase, rms_residual, visibility, covariance, p, q })
}
