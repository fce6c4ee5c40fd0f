//! Histograms, dead-time correction, log conversion and two-step stitching.

use super::AnalysisError;
use crate::fmath;
use crate::physics::SPEED_OF_LIGHT_M_PER_S;
use crate::simulator::PhotonEventStream;
use alloc::vec::Vec;

/// One histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceBin {
    pub counts: u64,
    /// Measured detection probability per pulse: `counts / n_pulses`.
    pub prob_per_pulse: f64,
    /// Dead-time corrected probability; equals `prob_per_pulse` until a
    /// correction is applied.
    pub corrected_prob: f64,
    /// Set when the correction denominator collapsed; the bin is unusable
    /// and `corrected_prob` falls back to the measured value.
    pub saturated: bool,
}

/// Histogram of photon delays across all pulses of an acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub bin_width_ps: u64,
    /// Delay of the left edge of bin 0 after the pulse launch.
    pub origin_delay_s: f64,
    pub n_pulses: u64,
    pub bins: Vec<TraceBin>,
}

impl Trace {
    pub fn bin_width_s(&self) -> f64 {
        self.bin_width_ps as f64 * 1e-12
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Left edge of bin `k` in seconds of delay.
    pub fn bin_start_s(&self, k: usize) -> f64 {
        self.origin_delay_s + k as f64 * self.bin_width_s()
    }

    /// Center of bin `k` in seconds of delay.
    pub fn bin_center_s(&self, k: usize) -> f64 {
        self.origin_delay_s + (k as f64 + 0.5) * self.bin_width_s()
    }

    /// Distance the center of bin `k` maps to: `z = c t / (2 n)`.
    pub fn distance_m(&self, k: usize, group_index: f64) -> f64 {
        SPEED_OF_LIGHT_M_PER_S * self.bin_center_s(k) / (2.0 * group_index)
    }
}

/// Histograms an event stream into bins of `bin_width_ps` covering one
/// pulse period.
pub fn bin_events(stream: &PhotonEventStream, bin_width_ps: u64) -> Result<Trace, AnalysisError> {
    if bin_width_ps == 0 {
        return Err(AnalysisError::ZeroBinWidth);
    }
    let period_ps = stream.header.period_ps();
    if bin_width_ps > period_ps {
        return Err(AnalysisError::BinWidthExceedsPeriod {
            bin_width_ps,
            period_ps,
        });
    }
    if stream.header.n_pulses == 0 {
        return Err(AnalysisError::ZeroPulses);
    }

    let n_bins = period_ps.div_ceil(bin_width_ps) as usize;
    let mut counts = alloc::vec![0u64; n_bins];
    for e in &stream.events {
        let k = ((e.timestamp_ps / bin_width_ps) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let n_pulses = stream.header.n_pulses as f64;
    let bins = counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n_pulses;
            TraceBin {
                counts: c,
                prob_per_pulse: p,
                corrected_prob: p,
                saturated: false,
            }
        })
        .collect();
    Ok(Trace {
        bin_width_ps,
        origin_delay_s: 0.0,
        n_pulses: stream.header.n_pulses,
        bins,
    })
}

/// Undoes the count loss caused by detector dead time.
///
/// A detection is recorded only if the detector was live, i.e. nothing
/// fired during the preceding dead window. In per-pulse probabilities that
/// happens with probability `1 - sum of measured probs over the window`,
/// so each bin is divided by exactly that factor:
///
/// ```text
/// corrected(k) = measured(k) / (1 - sum measured(k-w .. k-1))
/// ```
///
/// Bins closer than a window to the trace start use the history that
/// exists. When the estimated live probability drops below 10% the
/// correction is no longer trustworthy (and overshoots right after a
/// strong step), so the bin keeps its measured value and is flagged
/// saturated instead of corrected.
pub fn dead_time_correction(trace: &Trace, window_s: f64) -> Result<Trace, AnalysisError> {
    if !(window_s >= 0.0) || !window_s.is_finite() {
        return Err(AnalysisError::NegativeWindow { window_s });
    }
    let w_bins = fmath::round(window_s / trace.bin_width_s()) as usize;

    let mut prefix = Vec::with_capacity(trace.bins.len() + 1);
    prefix.push(0.0_f64);
    for b in &trace.bins {
        let last = *prefix.last().expect("non-empty");
        prefix.push(last + b.prob_per_pulse);
    }

    // Validity limit: when the estimated live probability falls below
    // this the detector spent over 90% of the window dead, the scale
    // factor exceeds 10, and right after a strong step the windowed
    // history overshoots and would ring. Flagging is more honest than
    // amplifying.
    const MIN_LIVE_PROBABILITY: f64 = 0.1;

    let mut out = trace.clone();
    for (k, b) in out.bins.iter_mut().enumerate() {
        let lo = k.saturating_sub(w_bins);
        let history = prefix[k] - prefix[lo];
        let live = 1.0 - history;
        if live >= MIN_LIVE_PROBABILITY {
            b.corrected_prob = b.prob_per_pulse / live;
            b.saturated = false;
        } else {
            b.corrected_prob = b.prob_per_pulse;
            b.saturated = true;
        }
    }
    Ok(out)
}

/// How the 0 dB reference of a log trace is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum N0Strategy {
    /// Mean corrected probability of the first `n` non-saturated bins: the
    /// count at the initial point of the trace.
    FirstValidBins(usize),
    /// Caller-supplied reference, e.g. the extrapolated fit value at z = 0.
    Explicit(f64),
}

impl Default for N0Strategy {
    fn default() -> Self {
        Self::FirstValidBins(10)
    }
}

/// Trace in single-pass-loss decibels against a distance axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTrace {
    /// Per-bin `5 log10(corrected / n0)`; negative infinity marks
    /// zero-count bins and NaN marks saturated ones.
    pub values_db: Vec<f64>,
    /// The corrected linear-domain probabilities the values derive from.
    pub linear: Vec<f64>,
    /// Bins excluded from fits and detection (saturated during correction).
    pub excluded: Vec<bool>,
    pub n0: f64,
    pub bin_width_ps: u64,
    pub origin_delay_s: f64,
    pub group_index: f64,
}

impl LogTrace {
    pub fn n_bins(&self) -> usize {
        self.values_db.len()
    }

    pub fn bin_width_s(&self) -> f64 {
        self.bin_width_ps as f64 * 1e-12
    }

    /// Distance of the center of bin `k`.
    pub fn distance_m(&self, k: usize) -> f64 {
        SPEED_OF_LIGHT_M_PER_S * (self.origin_delay_s + (k as f64 + 0.5) * self.bin_width_s())
            / (2.0 * self.group_index)
    }

    /// Width of one bin in meters of distance.
    pub fn bin_length_m(&self) -> f64 {
        SPEED_OF_LIGHT_M_PER_S * self.bin_width_s() / (2.0 * self.group_index)
    }

    /// Bins whose centers fall inside `[lo_m, hi_m]`, as a half-open index
    /// range clamped to the trace.
    pub fn bin_range(&self, lo_m: f64, hi_m: f64) -> (usize, usize) {
        let dz = self.bin_length_m();
        let z0 = self.distance_m(0);
        let lo = fmath::ceil((lo_m - z0) / dz).max(0.0) as usize;
        let hi = (fmath::floor((hi_m - z0) / dz) + 1.0).max(0.0) as usize;
        (lo.min(self.n_bins()), hi.min(self.n_bins()))
    }

    /// True for bins carrying a usable finite value.
    pub fn is_valid(&self, k: usize) -> bool {
        !self.excluded[k] && self.values_db[k].is_finite()
    }
}

/// Converts a corrected trace to `5 log10(N / N0)` against distance.
///
/// The factor 5 (rather than the power-ratio 10) renders the two-way
/// backscatter decay as single-pass loss, so a fiber attenuating at
/// `a` dB/km produces a slope of `-a` dB/km.
pub fn to_log_trace(
    trace: &Trace,
    n0_strategy: N0Strategy,
    group_index: f64,
) -> Result<LogTrace, AnalysisError> {
    if !(group_index > 1.0 && group_index < 2.0) {
        return Err(AnalysisError::InvalidGroupIndex { value: group_index });
    }
    let n0 = match n0_strategy {
        N0Strategy::Explicit(v) => v,
        N0Strategy::FirstValidBins(n) => {
            let mut acc = 0.0;
            let mut used = 0usize;
            for b in &trace.bins {
                if b.saturated {
                    continue;
                }
                acc += b.corrected_prob;
                used += 1;
                if used == n {
                    break;
                }
            }
            if used == 0 {
                return Err(AnalysisError::ZeroReference);
            }
            acc / used as f64
        }
    };
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(AnalysisError::ZeroReference);
    }

    let mut values_db = Vec::with_capacity(trace.bins.len());
    let mut linear = Vec::with_capacity(trace.bins.len());
    let mut excluded = Vec::with_capacity(trace.bins.len());
    for b in &trace.bins {
        linear.push(b.corrected_prob);
        excluded.push(b.saturated);
        if b.saturated {
            values_db.push(f64::NAN);
        } else {
            // log10(0) = -inf: the sentinel for empty bins falls out of the
            // arithmetic on its own.
            values_db.push(5.0 * fmath::log10(b.corrected_prob / n0));
        }
    }
    Ok(LogTrace {
        values_db,
        linear,
        excluded,
        n0,
        bin_width_ps: trace.bin_width_ps,
        origin_delay_s: trace.origin_delay_s,
        group_index,
    })
}

/// Result of joining a two-step acquisition pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Stitched {
    pub trace: Trace,
    /// Multiplier applied to step 2's corrected probabilities.
    pub scale: f64,
    /// First bin taken from step 2.
    pub splice_bin: usize,
}

/// Joins a near-section trace (step 1) and a gated far-section trace
/// (step 2) acquired at different launch powers.
///
/// Both traces must share the bin grid. Step 2 is rescaled so its mean
/// corrected probability over the overlap matches step 1's; the output
/// takes step 1's bins below the overlap midpoint and rescaled step 2
/// bins above it.
pub fn stitch_traces(
    step1: &Trace,
    step2: &Trace,
    overlap_m: (f64, f64),
    group_index: f64,
) -> Result<Stitched, AnalysisError> {
    if step1.bin_width_ps != step2.bin_width_ps {
        return Err(AnalysisError::BinWidthMismatch {
            a_ps: step1.bin_width_ps,
            b_ps: step2.bin_width_ps,
        });
    }
    if step1.origin_delay_s != step2.origin_delay_s {
        return Err(AnalysisError::OriginMismatch {
            a_s: step1.origin_delay_s,
            b_s: step2.origin_delay_s,
        });
    }
    if step1.n_bins() != step2.n_bins() {
        return Err(AnalysisError::LengthMismatch {
            a: step1.n_bins(),
            b: step2.n_bins(),
        });
    }
    if !(group_index > 1.0 && group_index < 2.0) {
        return Err(AnalysisError::InvalidGroupIndex { value: group_index });
    }
    let (lo_m, hi_m) = overlap_m;
    if !(hi_m > lo_m) {
        return Err(AnalysisError::InvalidRegion { lo_m, hi_m });
    }

    let mut sum1 = 0.0;
    let mut sum2 = 0.0;
    let mut used = 0usize;
    for k in 0..step1.n_bins() {
        let z = step1.distance_m(k, group_index);
        if z < lo_m || z > hi_m {
            continue;
        }
        if step1.bins[k].saturated || step2.bins[k].saturated {
            continue;
        }
        sum1 += step1.bins[k].corrected_prob;
        sum2 += step2.bins[k].corrected_prob;
        used += 1;
    }
    if used == 0 {
        return Err(AnalysisError::EmptyOverlap);
    }
    if sum1 <= 0.0 {
        return Err(AnalysisError::OverlapMeanZero { step: 1 });
    }
    if sum2 <= 0.0 {
        return Err(AnalysisError::OverlapMeanZero { step: 2 });
    }
    let scale = sum1 / sum2;

    let mid_m = 0.5 * (lo_m + hi_m);
    let dz = SPEED_OF_LIGHT_M_PER_S * step1.bin_width_s() / (2.0 * group_index);
    let z0 = step1.distance_m(0, group_index);
    let splice_bin = (fmath::ceil((mid_m - z0) / dz).max(0.0) as usize).min(step1.n_bins());

    let mut bins = Vec::with_capacity(step1.n_bins());
    bins.extend_from_slice(&step1.bins[..splice_bin]);
    for b in &step2.bins[splice_bin..] {
        let mut b = *b;
        b.corrected_prob *= scale;
        bins.push(b);
    }
    Ok(Stitched {
        trace: Trace {
            bin_width_ps: step1.bin_width_ps,
            origin_delay_s: step1.origin_delay_s,
            n_pulses: step1.n_pulses,
            bins,
        },
        scale,
        splice_bin,
    })
}
