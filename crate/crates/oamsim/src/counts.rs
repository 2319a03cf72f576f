//! Synthetic coincidence counting: turns ideal fringe probabilities into
//! Poisson-distributed count datasets that mimic the experimental
//! acquisition protocol, and fits them with statistically honest weights.
//!
//! Counts are normalized to the φ-averaged probability, so the protocol's
//! rate is the observed mean coincidence rate rather than an absolute
//! efficiency chain. The generator is ChaCha12 keyed by the protocol seed,
//! drawing in (φ, acquisition) order: datasets are bit-identical across
//! platforms and runs for a fixed seed.

use crate::detection::FringeScan;
use crate::fitting::{fit_sinusoid, FitError, SinusoidFit};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq)]
pub enum CountsError {
    InvalidProtocol { reason: &'static str },
}

impl fmt::Display for CountsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountsError::InvalidProtocol { reason } => write!(f, "invalid acquisition protocol: {reason}"),
        }
    }
}

impl std::error::Error for CountsError {}

/// The experiment's repetition scheme: repeated fixed-length acquisitions at
/// every phase setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionProtocol {
    /// Mean coincidence rate at the fringe average, counts per minute.
    pub rate_scale: f64,
    /// Acquisitions averaged per phase setting.
    pub n_acquisitions: usize,
    /// Length of one acquisition, seconds.
    pub t_acquisition: f64,
    /// Seed of the deterministic count generator.
    pub rng_seed: u64,
}

impl Default for AcquisitionProtocol {
    /// Reference acquisition protocol: about 500 coincidences per minute,
    /// 25 acquisitions of 40 s per phase setting.
    fn default() -> Self {
        Self { rate_scale: 500.0, n_acquisitions: 25, t_acquisition: 40.0, rng_seed: 1 }
    }
}

impl AcquisitionProtocol {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), CountsError> {
        if !(self.rate_scale > 0.0) || !self.rate_scale.is_finite() {
            return Err(CountsError::InvalidProtocol { reason: "rate_scale must be positive and finite" });
        }
        if self.n_acquisitions < 1 {
            return Err(CountsError::InvalidProtocol { reason: "n_acquisitions must be at least 1" });
        }
        if !(self.t_acquisition > 0.0) || !self.t_acquisition.is_finite() {
            return Err(CountsError::InvalidProtocol {
                reason: "t_acquisition must be positive and finite",
            });
        }
        Ok(())
    }

    /// Expected counts in one acquisition at probability `p`, where
    /// `mean_p` is the φ-average the rate is anchored to.
    fn expected_counts(&self, p: f64, mean_p: f64) -> f64 {
        if mean_p == 0.0 {
            return 0.0;
        }
        self.rate_scale * (self.t_acquisition / 60.0) * p / mean_p
    }
}

/// Counts accumulated at one phase setting.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    /// Interferometer phase φ, radians.
    pub phase: f64,
    /// Counts of each acquisition, in draw order.
    pub counts: Vec<u64>,
    /// Arithmetic mean of `counts`.
    pub mean: f64,
    /// Sample standard deviation over √n; 0 when all counts agree or n = 1.
    pub std_error: f64,
}

impl CountRecord {
    pub fn from_counts(phase: f64, counts: Vec<u64>) -> Self {
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<u64>() as f64 / n;
        let std_error = if counts.len() > 1 {
            let ss: f64 = counts.iter().map(|&c| (c as f64 - mean) * (c as f64 - mean)).sum();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Self { phase, counts, mean, std_error }
    }

    /// Variance of the mean used for fit weighting: the squared standard
    /// error, floored by the Poisson expectation max(mean, 1)/n so that
    /// degenerate records (all counts equal) still carry a finite weight.
    pub fn mean_variance(&self) -> f64 {
        let floor = self.mean.max(1.0) / self.counts.len() as f64;
        let var = self.std_error * self.std_error;
        if var > 0.0 {
            var
        } else {
            floor
        }
    }
}

/// Draws the synthetic dataset for a fringe scan: for each phase sample,
/// `n_acquisitions` Poisson counts with expectation
/// rate · (t/60) · P(φ)/mean(P). Deterministic for a fixed seed.
pub fn simulate_counts(
    scan: &FringeScan,
    protocol: &AcquisitionProtocol,
) -> Result<Vec<CountRecord>, CountsError> {
    protocol.validate()?;
    let samples = scan.samples();
    let mean_p = samples.iter().map(|&(_, p)| p).sum::<f64>() / samples.len() as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(protocol.rng_seed);
    let mut records = Vec::with_capacity(samples.len());
    for &(phi, p) in samples {
        let lambda = protocol.expected_counts(p, mean_p);
        let mut counts = Vec::with_capacity(protocol.n_acquisitions);
        if lambda == 0.0 {
            counts.resize(protocol.n_acquisitions, 0);
        } else {
            let draw = Poisson::new(lambda)
                .map_err(|_| CountsError::InvalidProtocol { reason: "expected counts not finite" })?;
            for _ in 0..protocol.n_acquisitions {
                counts.push(draw.sample(&mut rng) as u64);
            }
        }
        records.push(CountRecord::from_counts(phi, counts));
    }
    Ok(records)
}

/// Sinusoid fit of the record means, weighted by inverse variance of each
/// mean (see [`CountRecord::mean_variance`]).
pub fn fit_counts(records: &[CountRecord]) -> Result<SinusoidFit, FitError> {
    let samples: Vec<(f64, f64)> = records.iter().map(|r| (r.phase, r.mean)).collect();
    let weights: Vec<f64> = records.iter().map(|r| 1.0 / r.mean_variance()).collect();
    fit_sinusoid(&samples, Some(&weights))
}

/// CSV rows `phi_rad,acq_index,counts`, acquisition index 0-based, mirroring
/// what the coincidence electronics log would hold.
pub fn write_counts_csv<W: Write>(records: &[CountRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "phi_rad,acq_index,counts")?;
    for record in records {
        for (index, &c) in record.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", record.phase, index, c)?;
        }
    }
    Ok(())
}
