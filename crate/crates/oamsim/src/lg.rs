//! Laguerre-Gauss modes with zero radial index: pointwise evaluation, sampled
//! complex fields, and grid power sums.
//!
//! The mode carrying topological charge `l` at waist `w` is
//!
//! ```text
//! ψ_{0,l}(x, y) = s · exp(−r²/w²) · r^{|l|} · exp(−i·l·φ) · exp(−iπr²/(λR))
//! ```
//!
//! with `r² = x² + y²`, `φ = atan2(y, x)`, amplitude scale `s`, and the last
//! factor present only for a finite radius of curvature `R`. The mode is
//! deliberately not normalized; every physical statement downstream is a
//! ratio or a fitted phase, so the overall scale cancels.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

/// Sign applied to the quadratic wavefront phase π r²/(λR): with the value
/// −1, a positive radius of curvature denotes a diverging beam. Flip this one
/// constant to flip the convention crate-wide.
pub const CURVATURE_PHASE_SIGN: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LgError {
    /// Only the p = 0 radial family is modeled.
    RadialIndexUnsupported { p: u32 },
    InvalidBeam { reason: &'static str },
    InvalidGrid { reason: &'static str },
    FieldLengthMismatch { expected: usize, got: usize },
    NonFiniteFieldValue { index: usize },
}

impl fmt::Display for LgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LgError::RadialIndexUnsupported { p } => {
                write!(f, "radial index p = {p} is not supported (only p = 0 modes are modeled)")
            }
            LgError::InvalidBeam { reason } => write!(f, "invalid beam parameters: {reason}"),
            LgError::InvalidGrid { reason } => write!(f, "invalid grid: {reason}"),
            LgError::FieldLengthMismatch { expected, got } => {
                write!(f, "field buffer holds {got} values but the grid has {expected} points")
            }
            LgError::NonFiniteFieldValue { index } => {
                write!(f, "field value at flat index {index} is not finite")
            }
        }
    }
}

impl std::error::Error for LgError {}

/// Mode indices of a Laguerre-Gauss beam. The radial index is carried so the
/// restriction to p = 0 is an explicit, checked statement rather than an
/// implicit assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LGModeSpec {
    l: i32,
    p: u32,
}

impl LGModeSpec {
    pub fn new(l: i32, p: u32) -> Result<Self, LgError> {
        if p != 0 {
            return Err(LgError::RadialIndexUnsupported { p });
        }
        Ok(Self { l, p })
    }

    /// The p = 0 mode with topological charge `l`.
    pub fn charge(l: i32) -> Self {
        Self { l, p: 0 }
    }

    pub fn l(&self) -> i32 {
        self.l
    }

    pub fn p(&self) -> u32 {
        self.p
    }
}

/// Beam parameters shared by every field evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    /// Wavelength λ in meters.
    pub wavelength: f64,
    /// Waist w in meters, as it appears in exp(−r²/w²).
    pub waist: f64,
    /// Radius of curvature R in meters; `None` is a flat (collimated)
    /// wavefront. Positive R diverges under [`CURVATURE_PHASE_SIGN`] = −1.
    pub radius_of_curvature: Option<f64>,
    /// Overall amplitude scale s.
    pub amplitude_scale: f64,
}

impl BeamParams {
    /// Flat-wavefront beam with unit amplitude scale.
    pub fn gaussian(wavelength: f64, waist: f64) -> Self {
        Self { wavelength, waist, radius_of_curvature: None, amplitude_scale: 1.0 }
    }

    pub fn with_curvature(mut self, radius: f64) -> Self {
        self.radius_of_curvature = Some(radius);
        self
    }

    pub fn validate(&self) -> Result<(), LgError> {
        if !(self.wavelength > 0.0) || !self.wavelength.is_finite() {
            return Err(LgError::InvalidBeam { reason: "wavelength must be positive and finite" });
        }
        if !(self.waist > 0.0) || !self.waist.is_finite() {
            return Err(LgError::InvalidBeam { reason: "waist must be positive and finite" });
        }
        if let Some(r) = self.radius_of_curvature {
            if r == 0.0 || !r.is_finite() {
                return Err(LgError::InvalidBeam {
                    reason: "radius of curvature must be nonzero and finite (use None for flat)",
                });
            }
        }
        if !self.amplitude_scale.is_finite() {
            return Err(LgError::InvalidBeam { reason: "amplitude scale must be finite" });
        }
        Ok(())
    }
}

/// The complex amplitude of the mode at a point, in the plane transverse to
/// propagation. Exact zero at the origin for |l| ≥ 1 (the vortex core).
pub fn eval_lg(mode: LGModeSpec, beam: &BeamParams, x: f64, y: f64) -> Complex64 {
    let r2 = x * x + y * y;
    let abs_l = mode.l.unsigned_abs();
    let modulus =
        beam.amplitude_scale * (-r2 / (beam.waist * beam.waist)).exp() * r2.sqrt().powi(abs_l as i32);
    let mut phase = -(mode.l as f64) * y.atan2(x);
    if let Some(r_curv) = beam.radius_of_curvature {
        phase += CURVATURE_PHASE_SIGN * PI * r2 / (beam.wavelength * r_curv);
    }
    Complex64::from_polar(modulus, phase)
}

/// Closed-form power of the mode over the whole plane,
/// ∫|ψ|² dA = s² · π · |l|! · (w²/2)^{|l|+1}.
pub fn analytic_total_power(mode: LGModeSpec, beam: &BeamParams) -> f64 {
    let half_w2 = beam.waist * beam.waist / 2.0;
    let mut moment = half_w2;
    for k in 1..=mode.l.unsigned_abs() {
        moment *= k as f64 * half_w2;
    }
    beam.amplitude_scale * beam.amplitude_scale * PI * moment
}

/// Uniform rectangular sampling grid. Samples sit at cell centers, so a
/// `nx × ny` grid spans `nx·dx × ny·dy` around `center` and a plain
/// value·area sum is the midpoint rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    center: (f64, f64),
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, center: (f64, f64)) -> Result<Self, LgError> {
        if nx < 2 || ny < 2 {
            return Err(LgError::InvalidGrid { reason: "need at least 2 samples per axis" });
        }
        if !(dx > 0.0) || !(dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return Err(LgError::InvalidGrid { reason: "spacings must be positive and finite" });
        }
        if !center.0.is_finite() || !center.1.is_finite() {
            return Err(LgError::InvalidGrid { reason: "center must be finite" });
        }
        Ok(Self { nx, ny, dx, dy, center })
    }

    /// Square grid of `n × n` cells spanning ±`half_span` around the origin.
    pub fn centered_square(n: usize, half_span: f64) -> Result<Self, LgError> {
        if !(half_span > 0.0) {
            return Err(LgError::InvalidGrid { reason: "half span must be positive" });
        }
        let d = 2.0 * half_span / n as f64;
        Self::new(n, n, d, d, (0.0, 0.0))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.center.0 + (ix as f64 + 0.5 - self.nx as f64 / 2.0) * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.center.1 + (iy as f64 + 0.5 - self.ny as f64 / 2.0) * self.dy
    }

    /// Half-extent of the sampled region from its center, per axis.
    pub fn half_extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.dx / 2.0, self.ny as f64 * self.dy / 2.0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A mode sampled on a grid. Row-major: the value at `(ix, iy)` sits at flat
/// index `iy * nx + ix` (y varies slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self, LgError> {
        if values.len() != grid.len() {
            return Err(LgError::FieldLengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LgError::NonFiniteFieldValue { index });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.grid.nx + ix]
    }

    /// CSV rows `x,y,re,im` (SI meters), row-major, shortest round-trip float
    /// formatting so a re-parse reproduces the exact f64 values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,re,im")?;
        for iy in 0..self.grid.ny {
            let y = self.grid.y(iy);
            for ix in 0..self.grid.nx {
                let v = self.value(ix, iy);
                writeln!(out, "{},{},{},{}", self.grid.x(ix), y, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Samples the mode over the grid. Warns (log target `oamsim::lg`) when the
/// grid does not reach 3w from the beam axis, since power sums on such a grid
/// truncate the mode tails.
pub fn render_field(mode: LGModeSpec, beam: &BeamParams, grid: &GridSpec) -> ComplexField {
    let (hx, hy) = grid.half_extent();
    if hx < 3.0 * beam.waist || hy < 3.0 * beam.waist {
        log::warn!(
            target: "oamsim::lg",
            "grid half-extent ({:.3e}, {:.3e}) m is smaller than 3w = {:.3e} m; mode tails are truncated",
            hx,
            hy,
            3.0 * beam.waist
        );
    }
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    values.par_chunks_mut(grid.nx).enumerate().for_each(|(iy, row)| {
        let y = grid.y(iy);
        for (ix, value) in row.iter_mut().enumerate() {
            *value = eval_lg(mode, beam, grid.x(ix), y);
        }
    });
    ComplexField { grid: *grid, values }
}

/// Midpoint-rule power sum Σ|ψ|²·dx·dy over the sampled region.
pub fn total_power(field: &ComplexField) -> f64 {
    let cell = field.grid.dx * field.grid.dy;
    field.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell
}
