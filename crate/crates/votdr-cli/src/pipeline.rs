//! The simulate and analyze passes shared by the subcommands.

use rayon::prelude::*;
use votdr_core::analysis::{
    bin_events, dead_time_correction, detect_events, dynamic_range, fit_attenuation,
    rms_noise_level, stitch_traces, to_log_trace, AnalysisError, AnalysisReport,
    EventDetectionParams, EventKind, LogTrace, N0Strategy, Trace,
};
use votdr_core::physics::SPEED_OF_LIGHT_M_PER_S;
use votdr_core::simulator::{Acquisition, PhotonEvent, PhotonEventStream, SimulationError};

use crate::config::{AnalysisSettings, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("simulation: {0}")]
    Sim(#[from] SimulationError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("two event files given, but the run config defines no analysis overlap region")]
    MissingOverlap,
    #[error("cannot start worker threads: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl PipelineError {
    /// Thread-pool failures are environment problems; everything else is
    /// a property of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::ThreadPool(_))
    }
}

/// Runs the acquisition, parallel over pulses. The event order (and so
/// the output bytes) does not depend on the worker count: each pulse is
/// seeded independently and results are concatenated in pulse order.
pub fn simulate(run: &RunConfig, threads: Option<usize>) -> Result<Vec<PhotonEvent>, PipelineError> {
    let acq = Acquisition::new(run.acquisition.clone())?;
    let n_pulses = run.acquisition.n_pulses;
    let collect = || -> Result<Vec<Vec<PhotonEvent>>, SimulationError> {
        (0..n_pulses)
            .into_par_iter()
            .map(|p| acq.pulse_events(p))
            .collect()
    };
    let per_pulse = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(collect),
        None => collect(),
    }?;
    Ok(per_pulse.into_iter().flatten().collect())
}

/// Where a stitched trace switched from the near to the far acquisition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StitchSummary {
    /// Multiplier applied to the far step's probabilities.
    pub scale: f64,
    pub splice_position_m: f64,
}

pub struct AnalysisOutcome {
    pub trace: Trace,
    pub log: LogTrace,
    pub report: AnalysisReport,
    pub stitch: Option<StitchSummary>,
}

/// Bins, corrects, optionally stitches, and characterizes one run.
///
/// All regions and thresholds come from `settings`, normally the snapshot
/// carried by the first event file. The noise floor measured over the
/// tail region doubles as the significance floor for event detection.
pub fn run_analysis(
    step1: &PhotonEventStream,
    step2: Option<&PhotonEventStream>,
    settings: &AnalysisSettings,
    bin_width_ps: u64,
) -> Result<AnalysisOutcome, PipelineError> {
    step1.validate()?;
    let gi = settings.group_index;

    let corrected = |s: &PhotonEventStream| -> Result<Trace, PipelineError> {
        let raw = bin_events(s, bin_width_ps)?;
        Ok(dead_time_correction(&raw, settings.correction_window_s)?)
    };

    let near = corrected(step1)?;
    let (trace, stitch) = match step2 {
        None => (near, None),
        Some(far_stream) => {
            far_stream.validate()?;
            let far = corrected(far_stream)?;
            let overlap = settings.overlap_m.ok_or(PipelineError::MissingOverlap)?;
            let stitched = stitch_traces(&near, &far, overlap, gi)?;
            let splice_position_m = SPEED_OF_LIGHT_M_PER_S
                * (stitched.trace.origin_delay_s
                    + (stitched.splice_bin as f64 + 0.5) * stitched.trace.bin_width_s())
                / (2.0 * gi);
            (
                stitched.trace,
                Some(StitchSummary {
                    scale: stitched.scale,
                    splice_position_m,
                }),
            )
        }
    };

    let log = to_log_trace(&trace, N0Strategy::default(), gi)?;
    let rms_noise_db = rms_noise_level(&log, settings.tail_region_m)?;
    let rms_floor = if rms_noise_db.is_finite() {
        log.n0 * 10.0_f64.powf(rms_noise_db / 5.0)
    } else {
        0.0
    };
    // In sparse regions the RMS floor can sit well below one count per
    // bin, and a lone dark-count doublet would then clear any relative
    // threshold. Raising the floor so a flagged bin needs at least a
    // handful of raw counts keeps Poisson flukes out of the event list.
    let thr_lin = 10.0_f64.powf(settings.reflect_threshold_db / 5.0);
    let quantum_floor = 5.0 / (thr_lin * trace.n_pulses as f64);
    let floor_linear = rms_floor.max(quantum_floor);

    let pulse_width_bins =
        ((step1.header.laser.pulse_width_s / trace.bin_width_s()).round() as usize).max(1);
    let params = EventDetectionParams {
        reflect_threshold_db: settings.reflect_threshold_db,
        loss_threshold_db: settings.loss_threshold_db,
        pulse_width_bins,
        floor_linear,
        ..EventDetectionParams::default()
    };
    let events = detect_events(&log, &params)?;

    // Fit the backscatter decay between features: reflective peaks and
    // their skirts bias the slope, lossy steps break the single line.
    let pw_m = pulse_width_bins as f64 * log.bin_length_m();
    let loss_w_m = params.loss_window_bins as f64 * log.bin_length_m();
    let exclude: Vec<(f64, f64)> = events
        .iter()
        .map(|e| match e.kind {
            EventKind::Reflective => (e.position_m - 2.0 * pw_m, e.position_m + 3.0 * pw_m),
            EventKind::Lossy => (e.position_m - loss_w_m, e.position_m + loss_w_m),
        })
        .collect();
    let fit = fit_attenuation(&log, settings.fit_region_m, &exclude)?;

    let report = AnalysisReport {
        slope_db_per_km: fit.slope_db_per_km,
        intercept_db: fit.intercept_db,
        rms_noise_db,
        dynamic_range_db: dynamic_range(fit.intercept_db, rms_noise_db),
        events,
    };

    Ok(AnalysisOutcome {
        trace,
        log,
        report,
        stitch,
    })
}
