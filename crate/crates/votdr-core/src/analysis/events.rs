//! Defect detection on log traces: reflective peaks with leading-edge
//! localization and lossy steps from two-sided slope fits.

use super::AnalysisError;
use crate::analysis::LogTrace;
use crate::fmath;
use alloc::vec::Vec;

/// The two OTDR defect classes.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Fresnel echo: a peak above the backscatter baseline.
    Reflective,
    /// Insertion loss: a downward step of the baseline.
    Lossy,
}

/// One detected defect.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedEvent {
    pub position_m: f64,
    pub kind: EventKind,
    /// Peak height above baseline (reflective) or step size (lossy), dB.
    pub magnitude_db: f64,
}

/// Tuning for [`detect_events`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventDetectionParams {
    /// Minimum peak excess over the local baseline, dB.
    pub reflect_threshold_db: f64,
    /// Minimum baseline step, dB.
    pub loss_threshold_db: f64,
    /// Width of the probe-pulse rectangle on this bin grid; sets the
    /// baseline filter width (5x) and run merging distance.
    pub pulse_width_bins: usize,
    /// Threshold fraction for leading-edge localization.
    pub edge_fraction: f64,
    /// Half-window of the two-sided fits used for lossy steps, in bins.
    pub loss_window_bins: usize,
    /// Noise floor in the trace's linear units. Local baselines are clamped
    /// up to this, so a feature must stand out against the floor as well as
    /// against its surroundings; regions whose signal does not clear the
    /// floor yield no lossy events. Zero disables the clamp.
    pub floor_linear: f64,
}

impl Default for EventDetectionParams {
    fn default() -> Self {
        Self {
            reflect_threshold_db: 5.0,
            loss_threshold_db: 0.3,
            pulse_width_bins: 1,
            edge_fraction: 0.5,
            loss_window_bins: 200,
            floor_linear: 0.0,
        }
    }
}

/// Median of up to 63 samples strided across `linear[lo..hi]`; exact for
/// windows that small, a robust subsample estimate for larger ones.
fn window_median(linear: &[f64], lo: usize, hi: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    let w = hi - lo;
    if w == 0 {
        return 0.0;
    }
    let stride = w.div_ceil(63);
    let mut i = lo;
    while i < hi {
        scratch.push(linear[i]);
        i += stride;
    }
    scratch.sort_by(|a, b| a.total_cmp(b));
    scratch[scratch.len() / 2]
}

/// Rolling median baseline of the linear trace.
fn median_baseline(linear: &[f64], window: usize) -> Vec<f64> {
    let n = linear.len();
    let half = window / 2;
    let mut scratch = Vec::with_capacity(64);
    (0..n)
        .map(|k| window_median(linear, k.saturating_sub(half), (k + half + 1).min(n), &mut scratch))
        .collect()
}

/// Least squares over `(distance, value)` of the valid bins in `range`,
/// evaluated at `z_eval`. Returns `None` with fewer than 5 valid bins.
fn side_fit_at(log: &LogTrace, range: core::ops::Range<usize>, z_eval: f64) -> Option<f64> {
    let mut n = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for k in range.clone() {
        if !log.is_valid(k) {
            continue;
        }
        n += 1.0;
        sx += log.distance_m(k);
        sy += log.values_db[k];
    }
    if n < 5.0 {
        return None;
    }
    let x_mean = sx / n;
    let y_mean = sy / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for k in range {
        if !log.is_valid(k) {
            continue;
        }
        let dx = log.distance_m(k) - x_mean;
        sxx += dx * dx;
        sxy += dx * (log.values_db[k] - y_mean);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(y_mean + slope * (z_eval - x_mean))
}

/// Scans a log trace for reflective peaks and lossy steps.
///
/// Reflective: bins exceeding a rolling-median baseline by the threshold
/// are merged into runs (gaps up to one pulse width); each run is reported
/// at its leading-edge position with the peak excess as magnitude. Lossy:
/// a downward step of the trend larger than the threshold, located by
/// contrasting least-squares fits on either side and suppressed near
/// reflective runs where the baseline is not trustworthy. Positions are
/// invariant under global amplitude scaling because every comparison is
/// relative to the local baseline.
pub fn detect_events(
    log: &LogTrace,
    params: &EventDetectionParams,
) -> Result<Vec<DetectedEvent>, AnalysisError> {
    if !(params.reflect_threshold_db > 0.0) {
        return Err(AnalysisError::InvalidThreshold {
            value: params.reflect_threshold_db,
        });
    }
    if !(params.loss_threshold_db > 0.0) {
        return Err(AnalysisError::InvalidThreshold {
            value: params.loss_threshold_db,
        });
    }
    if !(params.edge_fraction > 0.0 && params.edge_fraction < 1.0) {
        return Err(AnalysisError::InvalidFraction {
            value: params.edge_fraction,
        });
    }
    let n = log.n_bins();
    let pw = params.pulse_width_bins.max(1);
    let floor = params.floor_linear.max(0.0);
    let mut events = Vec::new();

    // Reflective peaks against a median baseline 5 pulse widths wide.
    let baseline = median_baseline(&log.linear, 5 * pw);
    let thr_lin = fmath::pow10(params.reflect_threshold_db / 5.0);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < n {
        let base = baseline[k].max(floor);
        // Saturated bins participate with their measured (understated)
        // values: a bin the dead-time correction gave up on is precisely
        // where a strong reflection lives, and skipping such bins would
        // split one peak into several.
        let candidate = base > 0.0 && log.linear[k] > base * thr_lin;
        if candidate {
            match runs.last_mut() {
                Some(run) if k - run.1 <= pw => run.1 = k,
                _ => runs.push((k, k)),
            }
        }
        k += 1;
    }
    for &(start, end) in &runs {
        let peak_bin = (start..=end)
            .max_by(|&a, &b| log.linear[a].total_cmp(&log.linear[b]))
            .expect("non-empty run");
        let base = baseline[peak_bin].max(floor);
        let magnitude_db = 5.0 * fmath::log10(log.linear[peak_bin] / base);
        let search = (4 * pw).max(16);
        // The edge is searched from the run's first bin, not its peak: a
        // strong reflection depletes the detector and the tallest sample
        // can sit on the dead-time recovery, a pulse width late. The
        // first bin over threshold is on the physical rise by
        // construction.
        let position_m = leading_edge_position(log, start, params.edge_fraction, search)
            .unwrap_or_else(|_| log.distance_m(start) - 0.5 * log.bin_length_m());
        events.push(DetectedEvent {
            position_m,
            kind: EventKind::Reflective,
            magnitude_db,
        });
    }

    // Lossy steps away from reflective runs.
    let w = params.loss_window_bins.max(10);
    if n > 2 * w {
        let near_reflective = |k: usize| {
            runs.iter()
                .any(|&(s, e)| k + w >= s && k <= e + w)
        };
        let mut prefix_v = Vec::with_capacity(n + 1);
        let mut prefix_l = Vec::with_capacity(n + 1);
        let mut prefix_c = Vec::with_capacity(n + 1);
        prefix_v.push(0.0f64);
        prefix_l.push(0.0f64);
        prefix_c.push(0u32);
        for k in 0..n {
            let valid = log.is_valid(k);
            prefix_v.push(prefix_v[k] + if valid { log.values_db[k] } else { 0.0 });
            prefix_l.push(prefix_l[k] + if valid { log.linear[k] } else { 0.0 });
            prefix_c.push(prefix_c[k] + u32::from(valid));
        }
        // Mean log value and mean linear value over the window's valid bins.
        let mean_of = |a: usize, b: usize| -> Option<(f64, f64)> {
            let c = prefix_c[b] - prefix_c[a];
            if (c as usize) * 4 < b - a {
                return None;
            }
            Some((
                (prefix_v[b] - prefix_v[a]) / c as f64,
                (prefix_l[b] - prefix_l[a]) / c as f64,
            ))
        };

        // Both side windows must sit clearly above the noise floor for a
        // step between them to be meaningful.
        let lin_floor = 4.0 * floor;
        let mut candidates: Vec<(usize, f64)> = Vec::new();
        for k in w..=(n - w) {
            if near_reflective(k) {
                continue;
            }
            if let (Some((left, left_lin)), Some((right, right_lin))) =
                (mean_of(k - w, k), mean_of(k, k + w))
            {
                let step = left - right;
                if step > params.loss_threshold_db && left_lin > lin_floor && right_lin > lin_floor
                {
                    candidates.push((k, step));
                }
            }
        }
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut taken: Vec<usize> = Vec::new();
        for (k, _) in candidates {
            if taken.iter().any(|&t| k.abs_diff(t) < w) {
                continue;
            }
            // Step position: the boundary between bins k-1 and k.
            let z = log.distance_m(k) - 0.5 * log.bin_length_m();
            let (left, right) = (
                side_fit_at(log, k - w..k, z),
                side_fit_at(log, k..k + w, z),
            );
            if let (Some(l), Some(r)) = (left, right) {
                let magnitude_db = l - r;
                if magnitude_db >= params.loss_threshold_db {
                    taken.push(k);
                    events.push(DetectedEvent {
                        position_m: z,
                        kind: EventKind::Lossy,
                        magnitude_db,
                    });
                }
            }
        }
    }

    events.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
    Ok(events)
}

/// Locates the leading edge of a reflective peak.
///
/// A baseline is taken as the median of the earliest quarter of the search
/// window before the peak; walking back from the peak, the first bin below
/// `baseline + fraction * (peak - baseline)` brackets the crossing, which
/// is then interpolated linearly between bin centers and converted to
/// distance. Saturated bins are skipped, so the crossing is bracketed by
/// valid data on both sides. An ideal step aligned to a bin boundary with
/// `fraction` 0.5 lands exactly on that boundary.
pub fn leading_edge_position(
    log: &LogTrace,
    peak_bin: usize,
    fraction: f64,
    search_bins: usize,
) -> Result<f64, AnalysisError> {
    if peak_bin >= log.n_bins() {
        return Err(AnalysisError::PeakOutOfRange {
            peak_bin,
            n_bins: log.n_bins(),
        });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(AnalysisError::InvalidFraction { value: fraction });
    }
    if peak_bin == 0 {
        return Err(AnalysisError::EdgeNotFound { peak_bin });
    }
    let search = search_bins.max(4);
    let w0 = peak_bin.saturating_sub(search);

    let quarter_hi = (w0 + (search / 4).max(1)).min(peak_bin);
    let mut scratch = Vec::with_capacity(64);
    let baseline = if quarter_hi > w0 {
        window_median(&log.linear, w0, quarter_hi, &mut scratch)
    } else {
        0.0
    };
    let peak_val = log.linear[peak_bin];
    if !(peak_val > baseline) {
        return Err(AnalysisError::EdgeNotFound { peak_bin });
    }
    let threshold = baseline + fraction * (peak_val - baseline);

    let mut k = peak_bin;
    let mut above = peak_bin;
    while k > w0 {
        k -= 1;
        // Saturated bins hold measured, not corrected, values; walking
        // through one would fake a crossing inside the artifact, so the
        // crossing is bracketed by the nearest valid bins instead.
        if log.excluded[k] {
            continue;
        }
        if log.linear[k] < threshold {
            let v0 = log.linear[k];
            let v1 = log.linear[above];
            let frac = (threshold - v0) / (v1 - v0);
            let z0 = log.distance_m(k);
            return Ok(z0 + frac * (log.distance_m(above) - z0));
        }
        above = k;
    }
    Err(AnalysisError::EdgeNotFound { peak_bin })
}
