//! Run configuration: TOML schema, validation, defaulting, and conversion
//! into acquisition headers.
//!
//! The schema uses bench units (km, ns, ps, nm, dBm, us) and is converted
//! to SI on load. A resolved [`RunConfig`] carries every applied default,
//! so the snapshot embedded in an event file fully describes the run.

use serde::{Deserialize, Serialize};
use votdr_core::model::{
    DeadTimeMode, DetectorConfig, FiberPlan, FiberSegment, GateSchedule, LaserConfig, PointEvent,
};
use votdr_core::physics::SPEED_OF_LIGHT_M_PER_S;
use votdr_core::simulator::{AcquisitionHeader, PolarizationEvolution};

const DEFAULT_BIN_WIDTH_NS: f64 = 1.0;
const DEFAULT_REFLECT_THRESHOLD_DB: f64 = 5.0;
const DEFAULT_LOSS_THRESHOLD_DB: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Raw schema, as written by the user.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    n_pulses: Option<u64>,
    duration_s: Option<f64>,
    bin_width_ns: Option<f64>,
    /// Redraw the fading pattern every this many pulses; absent = frozen.
    polarization_resample_pulses: Option<u64>,
    #[serde(default, rename = "segment")]
    segments: Vec<RawSegment>,
    #[serde(default, rename = "event")]
    events: Vec<RawEvent>,
    link: Option<RawLink>,
    laser: RawLaser,
    detector: RawDetector,
    gate: Option<RawGate>,
    analysis: Option<RawAnalysis>,
    step1: Option<RawStep>,
    step2: Option<RawStep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    length_km: f64,
    attenuation_db_per_km: f64,
    backscatter_db: Option<f64>,
    group_index: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    position_km: f64,
    #[serde(default)]
    loss_db: f64,
    reflectance_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    end_reflectance_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    wavelength_nm: f64,
    peak_power_dbm: f64,
    pulse_width_ns: f64,
    repetition_rate_hz: f64,
    extinction_ratio_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    efficiency: f64,
    dark_rate_hz: f64,
    dead_time_ns: f64,
    dead_time_mode: Option<String>,
    jitter_ps: f64,
    polarization_visibility: Option<f64>,
    polarization_correlation_length_km: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    /// Blanked intervals after each launch, microseconds.
    off_windows_us: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    fit_region_km: Option<[f64; 2]>,
    tail_region_km: Option<[f64; 2]>,
    overlap_km: Option<[f64; 2]>,
    reflect_threshold_db: Option<f64>,
    loss_threshold_db: Option<f64>,
    correction_window_ns: Option<f64>,
}

/// Per-step overrides for the two-step protocol.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    peak_power_dbm: Option<f64>,
    n_pulses: Option<u64>,
    duration_s: Option<f64>,
    off_windows_us: Option<Vec<[f64; 2]>>,
    seed: Option<u64>,
}

// ---------------------------------------------------------------------------
// Resolved configuration.

/// Analysis parameters with all defaults applied, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    /// Group index used to render delays as distance.
    pub group_index: f64,
    pub bin_width_ps: u64,
    /// History window of the dead-time correction.
    pub correction_window_s: f64,
    pub fit_region_m: (f64, f64),
    pub tail_region_m: (f64, f64),
    /// Region shared by both steps of a gated pair, used for stitching.
    pub overlap_m: Option<(f64, f64)>,
    pub reflect_threshold_db: f64,
    pub loss_threshold_db: f64,
}

/// One fully resolved acquisition plus how to analyze it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub acquisition: AcquisitionHeader,
    pub analysis: AnalysisSettings,
}

/// Which override table of the config to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    One,
    Two,
}

/// A parsed config: the base run plus optional per-step overrides.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    base: RunConfig,
    step1: StepOverride,
    step2: StepOverride,
}

#[derive(Debug, Clone, Default)]
struct StepOverride {
    peak_power_dbm: Option<f64>,
    pulses: Option<PulseBudget>,
    off_windows_s: Option<Vec<(f64, f64)>>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
enum PulseBudget {
    Count(u64),
    Duration(f64),
}

impl LoadedConfig {
    /// The effective run for a step selection. `seed_flag` (from the
    /// command line) beats the override table's seed, which beats the base
    /// seed; a second step without any explicit seed uses base + 1 so the
    /// two acquisitions never share photon randomness.
    pub fn run_for(&self, step: Option<Step>, seed_flag: Option<u64>) -> RunConfig {
        let mut run = self.base.clone();
        let over = match step {
            None => None,
            Some(Step::One) => Some(&self.step1),
            Some(Step::Two) => Some(&self.step2),
        };
        if let Some(over) = over {
            if let Some(p) = over.peak_power_dbm {
                run.acquisition.laser.peak_power_dbm = p;
            }
            if let Some(budget) = over.pulses {
                run.acquisition.n_pulses = budget.resolve(&run.acquisition.laser);
            }
            if let Some(w) = &over.off_windows_s {
                run.acquisition.gate = GateSchedule::new(w.clone()).expect("validated on load");
            }
            run.acquisition.seed = over.seed.unwrap_or(if step == Some(Step::Two) {
                self.base.acquisition.seed.wrapping_add(1)
            } else {
                self.base.acquisition.seed
            });
        }
        if let Some(seed) = seed_flag {
            run.acquisition.seed = seed;
        }
        run
    }
}

impl PulseBudget {
    fn resolve(self, laser: &LaserConfig) -> u64 {
        match self {
            Self::Count(n) => n,
            Self::Duration(d_s) => (d_s * laser.repetition_rate_hz) as u64,
        }
    }
}

// ---------------------------------------------------------------------------
// Loading.

pub fn load_config(path: &std::path::Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<LoadedConfig, ConfigError> {
    if raw.segments.is_empty() {
        return Err(invalid("segment", "at least one [[segment]] is required"));
    }
    let segments: Vec<FiberSegment> = raw
        .segments
        .iter()
        .map(|s| {
            let defaults = FiberSegment::uniform(s.length_km * 1e3, s.attenuation_db_per_km);
            FiberSegment {
                backscatter_level_db: s.backscatter_db.unwrap_or(defaults.backscatter_level_db),
                group_index: s.group_index.unwrap_or(defaults.group_index),
                ..defaults
            }
        })
        .collect();
    let events: Vec<PointEvent> = raw
        .events
        .iter()
        .map(|e| PointEvent {
            position_m: e.position_km * 1e3,
            insertion_loss_db: e.loss_db,
            reflectance_db: e.reflectance_db,
        })
        .collect();
    let end_reflectance_db = raw.link.and_then(|l| l.end_reflectance_db);
    let plan = FiberPlan::new(segments, events, end_reflectance_db)
        .map_err(|e| invalid("segment/event", e.to_string()))?;

    let laser = LaserConfig {
        wavelength_m: raw.laser.wavelength_nm * 1e-9,
        peak_power_dbm: raw.laser.peak_power_dbm,
        pulse_width_s: raw.laser.pulse_width_ns * 1e-9,
        repetition_rate_hz: raw.laser.repetition_rate_hz,
        extinction_ratio_db: raw.laser.extinction_ratio_db,
    };
    laser
        .validate()
        .map_err(|e| invalid("laser", e.to_string()))?;

    // The pulse period must cover the round trip of the whole link.
    let round_trip_s: f64 = plan
        .segments
        .iter()
        .map(|s| 2.0 * s.length_m * s.group_index / SPEED_OF_LIGHT_M_PER_S)
        .sum();
    let max_rate_hz = 1.0 / round_trip_s;
    if laser.repetition_rate_hz > max_rate_hz {
        return Err(invalid(
            "laser.repetition_rate_hz",
            format!(
                "{} Hz exceeds the round-trip limit of {:.3} Hz for this plan",
                laser.repetition_rate_hz, max_rate_hz
            ),
        ));
    }

    let dead_time_mode = match raw.detector.dead_time_mode.as_deref() {
        None | Some("non-paralyzable") => DeadTimeMode::NonParalyzable,
        Some("paralyzable") => DeadTimeMode::Paralyzable,
        Some(other) => {
            return Err(invalid(
                "detector.dead_time_mode",
                format!("unknown mode {other:?}; use \"non-paralyzable\" or \"paralyzable\""),
            ))
        }
    };
    let detector = DetectorConfig {
        efficiency: raw.detector.efficiency,
        dark_rate_hz: raw.detector.dark_rate_hz,
        dead_time_s: raw.detector.dead_time_ns * 1e-9,
        dead_time_mode,
        jitter_sigma_s: raw.detector.jitter_ps * 1e-12,
        polarization_visibility: raw.detector.polarization_visibility.unwrap_or(0.0),
        polarization_correlation_length_m: raw
            .detector
            .polarization_correlation_length_km
            .unwrap_or(10.0)
            * 1e3,
    };
    detector
        .validate()
        .map_err(|e| invalid("detector", e.to_string()))?;

    let period_s = laser.period_s();
    let gate = match &raw.gate {
        None => GateSchedule::always_on(),
        Some(g) => {
            let windows: Vec<(f64, f64)> = g
                .off_windows_us
                .iter()
                .map(|w| (w[0] * 1e-6, w[1] * 1e-6))
                .collect();
            let gate = GateSchedule::new(windows)
                .map_err(|e| invalid("gate.off_windows_us", e.to_string()))?;
            check_gate_fits(&gate, period_s, "gate.off_windows_us")?;
            gate
        }
    };

    let polarization_evolution = match raw.polarization_resample_pulses {
        None => PolarizationEvolution::Static,
        Some(0) => {
            return Err(invalid(
                "polarization_resample_pulses",
                "must be at least 1",
            ))
        }
        Some(n) => PolarizationEvolution::Resample { every_pulses: n },
    };

    let budget = match (raw.n_pulses, raw.duration_s) {
        (Some(n), None) => PulseBudget::Count(n),
        (None, Some(d)) => PulseBudget::Duration(d),
        (None, None) => {
            return Err(invalid(
                "n_pulses/duration_s",
                "exactly one of n_pulses or duration_s is required; neither is set",
            ))
        }
        (Some(_), Some(_)) => {
            return Err(invalid(
                "n_pulses/duration_s",
                "exactly one of n_pulses or duration_s is required; both are set",
            ))
        }
    };
    let n_pulses = budget.resolve(&laser);
    if n_pulses == 0 {
        return Err(invalid(
            "n_pulses/duration_s",
            "the run must contain at least one pulse",
        ));
    }

    let analysis =
        resolve_analysis(raw.analysis, raw.bin_width_ns, &plan, &detector, period_s)?;

    let acquisition = AcquisitionHeader {
        plan,
        laser,
        detector,
        gate,
        polarization_evolution,
        n_pulses,
        seed: raw.seed.unwrap_or(0),
    };
    let base = RunConfig {
        acquisition,
        analysis,
    };

    let step1 = resolve_step(raw.step1, &base, "step1")?;
    let step2 = resolve_step(raw.step2, &base, "step2")?;
    Ok(LoadedConfig { base, step1, step2 })
}

fn check_gate_fits(gate: &GateSchedule, period_s: f64, field: &str) -> Result<(), ConfigError> {
    let edge = gate.last_edge_s();
    if edge > period_s {
        return Err(invalid(
            field,
            format!("window edge {edge:.3e} s is beyond the pulse period {period_s:.3e} s"),
        ));
    }
    Ok(())
}

fn resolve_step(
    raw: Option<RawStep>,
    base: &RunConfig,
    field: &str,
) -> Result<StepOverride, ConfigError> {
    let Some(raw) = raw else {
        return Ok(StepOverride::default());
    };
    let pulses = match (raw.n_pulses, raw.duration_s) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                field,
                "set at most one of n_pulses or duration_s in a step override",
            ))
        }
        (Some(n), None) => {
            if n == 0 {
                return Err(invalid(field, "n_pulses must be at least 1"));
            }
            Some(PulseBudget::Count(n))
        }
        (None, Some(d)) => Some(PulseBudget::Duration(d)),
        (None, None) => None,
    };
    if let Some(p) = raw.peak_power_dbm {
        let mut laser = base.acquisition.laser.clone();
        laser.peak_power_dbm = p;
        laser
            .validate()
            .map_err(|e| invalid(&format!("{field}.peak_power_dbm"), e.to_string()))?;
    }
    let off_windows_s = match raw.off_windows_us {
        None => None,
        Some(ws) => {
            let windows: Vec<(f64, f64)> =
                ws.iter().map(|w| (w[0] * 1e-6, w[1] * 1e-6)).collect();
            let gate = GateSchedule::new(windows.clone())
                .map_err(|e| invalid(&format!("{field}.off_windows_us"), e.to_string()))?;
            check_gate_fits(
                &gate,
                base.acquisition.period_s(),
                &format!("{field}.off_windows_us"),
            )?;
            Some(windows)
        }
    };
    Ok(StepOverride {
        peak_power_dbm: raw.peak_power_dbm,
        pulses,
        off_windows_s,
        seed: raw.seed,
    })
}

fn resolve_analysis(
    raw: Option<RawAnalysis>,
    bin_width_ns: Option<f64>,
    plan: &FiberPlan,
    detector: &DetectorConfig,
    period_s: f64,
) -> Result<AnalysisSettings, ConfigError> {
    let group_index = plan.segments[0].group_index;
    let span_m = SPEED_OF_LIGHT_M_PER_S * period_s / (2.0 * group_index);
    let length_m = plan.total_length_m();

    let raw = raw.unwrap_or(RawAnalysis {
        fit_region_km: None,
        tail_region_km: None,
        overlap_km: None,
        reflect_threshold_db: None,
        loss_threshold_db: None,
        correction_window_ns: None,
    });

    let region = |field: &str, km: [f64; 2]| -> Result<(f64, f64), ConfigError> {
        let (lo, hi) = (km[0] * 1e3, km[1] * 1e3);
        if !(lo >= 0.0 && hi > lo) {
            return Err(invalid(field, format!("invalid region {lo} m .. {hi} m")));
        }
        if hi > span_m {
            return Err(invalid(
                field,
                format!(
                    "region ends at {hi:.0} m but the trace spans only {span_m:.0} m at this repetition rate"
                ),
            ));
        }
        Ok((lo, hi))
    };

    let fit_region_m = match raw.fit_region_km {
        Some(km) => region("analysis.fit_region_km", km)?,
        None => (0.02 * length_m, 0.85 * length_m),
    };
    let tail_region_m = match raw.tail_region_km {
        Some(km) => region("analysis.tail_region_km", km)?,
        None => {
            let lo = (1.02 * length_m).min(0.9 * span_m);
            (lo, 0.98 * span_m)
        }
    };
    let overlap_m = match raw.overlap_km {
        Some(km) => Some(region("analysis.overlap_km", km)?),
        None => None,
    };

    let reflect_threshold_db = raw
        .reflect_threshold_db
        .unwrap_or(DEFAULT_REFLECT_THRESHOLD_DB);
    if !(reflect_threshold_db > 0.0) {
        return Err(invalid(
            "analysis.reflect_threshold_db",
            "must be positive",
        ));
    }
    let loss_threshold_db = raw.loss_threshold_db.unwrap_or(DEFAULT_LOSS_THRESHOLD_DB);
    if !(loss_threshold_db > 0.0) {
        return Err(invalid("analysis.loss_threshold_db", "must be positive"));
    }

    let bin_width_ns = match bin_width_ns {
        Some(ns) if ns > 0.0 => ns,
        Some(ns) => {
            return Err(invalid(
                "bin_width_ns",
                format!("must be positive, got {ns}"),
            ))
        }
        None => DEFAULT_BIN_WIDTH_NS,
    };
    let correction_window_s = match raw.correction_window_ns {
        Some(ns) if ns >= 0.0 => ns * 1e-9,
        Some(ns) => {
            return Err(invalid(
                "analysis.correction_window_ns",
                format!("must be non-negative, got {ns}"),
            ))
        }
        None => detector.dead_time_s,
    };

    Ok(AnalysisSettings {
        group_index,
        bin_width_ps: (bin_width_ns * 1e3).round().max(1.0) as u64,
        correction_window_s,
        fit_region_m,
        tail_region_m,
        overlap_m,
        reflect_threshold_db,
        loss_threshold_db,
    })
}
