//! Attenuation fitting, noise floor and dynamic range.

use super::AnalysisError;
use crate::analysis::LogTrace;
use crate::fmath;
use alloc::vec::Vec;

/// Least-squares line through a log-trace region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    /// Slope in dB per km of distance; a uniform fiber gives minus its
    /// attenuation coefficient.
    pub slope_db_per_km: f64,
    /// Extrapolated trace value at z = 0, in dB.
    pub intercept_db: f64,
    pub n_bins_used: usize,
}

impl LinearFit {
    /// Fit value at distance `z_m`.
    pub fn value_at(&self, z_m: f64) -> f64 {
        self.intercept_db + self.slope_db_per_km * z_m / 1_000.0
    }
}

fn in_any(z: f64, ranges: &[(f64, f64)]) -> bool {
    ranges.iter().any(|&(lo, hi)| z >= lo && z <= hi)
}

/// Ordinary least squares of trace value against distance over
/// `region_m`, skipping sentinel/excluded bins and any `exclude_m` spans
/// (reflective events, gated regions). The intercept is reported at z = 0.
pub fn fit_attenuation(
    log: &LogTrace,
    region_m: (f64, f64),
    exclude_m: &[(f64, f64)],
) -> Result<LinearFit, AnalysisError> {
    const MIN_BINS: usize = 10;
    let (lo_m, hi_m) = region_m;
    if !(hi_m > lo_m) {
        return Err(AnalysisError::InvalidRegion { lo_m, hi_m });
    }
    let (k0, k1) = log.bin_range(lo_m, hi_m);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in k0..k1 {
        if !log.is_valid(k) {
            continue;
        }
        let z = log.distance_m(k);
        if in_any(z, exclude_m) {
            continue;
        }
        xs.push(z / 1_000.0);
        ys.push(log.values_db[k]);
    }
    if xs.len() < MIN_BINS {
        return Err(AnalysisError::InsufficientData {
            needed: MIN_BINS,
            got: xs.len(),
        });
    }

    // Centered form keeps the normal equations well conditioned far from
    // z = 0.
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - x_mean;
        sxx += dx * dx;
        sxy += dx * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateFit);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope_db_per_km: slope,
        intercept_db: y_mean - slope * x_mean,
        n_bins_used: xs.len(),
    })
}

/// Noise floor of the trace: the RMS of the linear-domain probabilities
/// over a tail region beyond the fiber end, expressed on the same
/// `5 log10(x / N0)` scale as the trace.
///
/// Empty bins count as zeros here (they are genuine measurements of the
/// floor), so for a dark-count tail with per-bin mean `mu` counts the RMS
/// of the counts converges to `sqrt(mu^2 + mu)`.
pub fn rms_noise_level(log: &LogTrace, tail_m: (f64, f64)) -> Result<f64, AnalysisError> {
    const MIN_BINS: usize = 100;
    let (lo_m, hi_m) = tail_m;
    if !(hi_m > lo_m) {
        return Err(AnalysisError::InvalidRegion { lo_m, hi_m });
    }
    let (k0, k1) = log.bin_range(lo_m, hi_m);
    let mut acc = 0.0;
    let mut used = 0usize;
    for k in k0..k1 {
        if log.excluded[k] {
            continue;
        }
        acc += log.linear[k] * log.linear[k];
        used += 1;
    }
    if used < MIN_BINS {
        return Err(AnalysisError::InsufficientData {
            needed: MIN_BINS,
            got: used,
        });
    }
    let rms = fmath::sqrt(acc / used as f64);
    Ok(5.0 * fmath::log10(rms / log.n0))
}

/// Dynamic range of the measurement: the trace intercept minus the noise
/// floor, both in dB. Pure subtraction, no hidden normalization.
#[inline]
pub fn dynamic_range(intercept_db: f64, rms_noise_db: f64) -> f64 {
    intercept_db - rms_noise_db
}
