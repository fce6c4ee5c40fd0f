//! Event-stream analysis: histogramming, dead-time correction, two-step
//! stitching, log-domain conversion, attenuation fitting, noise floor and
//! dynamic range estimation, and defect detection.
//!
//! All operations are pure functions over immutable inputs; given the same
//! trace they produce the same report, bit for bit.

mod events;
mod fit;
mod trace;

pub use events::{
    detect_events, leading_edge_position, DetectedEvent, EventDetectionParams, EventKind,
};
pub use fit::{dynamic_range, fit_attenuation, rms_noise_level, LinearFit};
pub use trace::{
    bin_events, dead_time_correction, stitch_traces, to_log_trace, LogTrace, N0Strategy,
    Stitched, Trace, TraceBin,
};

use core::fmt;

/// Domain failure in a trace-analysis operation.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    ZeroBinWidth,
    BinWidthExceedsPeriod { bin_width_ps: u64, period_ps: u64 },
    ZeroPulses,
    NegativeWindow { window_s: f64 },
    InvalidGroupIndex { value: f64 },
    ZeroReference,
    BinWidthMismatch { a_ps: u64, b_ps: u64 },
    OriginMismatch { a_s: f64, b_s: f64 },
    LengthMismatch { a: usize, b: usize },
    InvalidRegion { lo_m: f64, hi_m: f64 },
    EmptyOverlap,
    OverlapMeanZero { step: u8 },
    InsufficientData { needed: usize, got: usize },
    DegenerateFit,
    InvalidThreshold { value: f64 },
    InvalidFraction { value: f64 },
    PeakOutOfRange { peak_bin: usize, n_bins: usize },
    EdgeNotFound { peak_bin: usize },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroBinWidth => write!(f, "bin width must be at least 1 ps"),
            Self::BinWidthExceedsPeriod {
                bin_width_ps,
                period_ps,
            } => write!(
                f,
                "bin width {bin_width_ps} ps exceeds the pulse period {period_ps} ps"
            ),
            Self::ZeroPulses => write!(f, "acquisition contains no pulses"),
            Self::NegativeWindow { window_s } => {
                write!(f, "correction window must be non-negative, got {window_s} s")
            }
            Self::InvalidGroupIndex { value } => {
                write!(f, "group index must lie in (1, 2), got {value}")
            }
            Self::ZeroReference => write!(f, "reference level N0 must be positive"),
            Self::BinWidthMismatch { a_ps, b_ps } => {
                write!(f, "bin widths differ: {a_ps} ps vs {b_ps} ps")
            }
            Self::OriginMismatch { a_s, b_s } => {
                write!(f, "trace origins differ: {a_s} s vs {b_s} s")
            }
            Self::LengthMismatch { a, b } => {
                write!(f, "traces have different bin counts: {a} vs {b}")
            }
            Self::InvalidRegion { lo_m, hi_m } => {
                write!(f, "region [{lo_m}, {hi_m}] m is empty or reversed")
            }
            Self::EmptyOverlap => write!(f, "overlap region contains no valid bins"),
            Self::OverlapMeanZero { step } => {
                write!(f, "step {step} has zero mean signal over the overlap")
            }
            Self::InsufficientData { needed, got } => {
                write!(f, "need at least {needed} valid bins, got {got}")
            }
            Self::DegenerateFit => write!(f, "fit region has no spread in distance"),
            Self::InvalidThreshold { value } => {
                write!(f, "threshold must be positive, got {value} dB")
            }
            Self::InvalidFraction { value } => {
                write!(f, "edge fraction must lie in (0, 1), got {value}")
            }
            Self::PeakOutOfRange { peak_bin, n_bins } => {
                write!(f, "peak bin {peak_bin} outside trace of {n_bins} bins")
            }
            Self::EdgeNotFound { peak_bin } => write!(
                f,
                "no leading-edge crossing found below peak bin {peak_bin} within the search window"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AnalysisError {}

/// Summary of a full trace analysis.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub slope_db_per_km: f64,
    pub intercept_db: f64,
    pub rms_noise_db: f64,
    /// Always `intercept_db - rms_noise_db`.
    pub dynamic_range_db: f64,
    pub events: alloc::vec::Vec<DetectedEvent>,
}
