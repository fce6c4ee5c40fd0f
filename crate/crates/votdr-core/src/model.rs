//! Validated description of the fiber link and the instrument probing it.
//!
//! All quantities are stored in SI units (meters, seconds, hertz) except for
//! the quantities that are conventionally quoted logarithmically, which carry
//! a `_db` or `_dbm` suffix. Loss and reflectance values are one-way unless
//! stated otherwise; the physics layer applies the two-way factors.

use alloc::vec::Vec;
use core::fmt;

/// Group index used when a segment does not specify one.
pub const DEFAULT_GROUP_INDEX: f64 = 1.468;

/// Rayleigh backscatter level relative to launched peak power for the
/// reference pulse width, typical of standard single-mode fiber at 1550 nm.
pub const DEFAULT_BACKSCATTER_LEVEL_DB: f64 = -52.0;

/// Pulse width the backscatter level is referenced to. The captured
/// backscatter power scales linearly with pulse width, so the effective
/// level for a pulse of width `t` is `backscatter_level_db +
/// 10*log10(t / REFERENCE_PULSE_WIDTH_S)`.
pub const REFERENCE_PULSE_WIDTH_S: f64 = 1e-6;

/// Default visibility of the polarization fading model.
pub const DEFAULT_POLARIZATION_VISIBILITY: f64 = 0.9;

/// Default correlation length of the polarization fading model.
pub const DEFAULT_POLARIZATION_CORRELATION_LENGTH_M: f64 = 5_000.0;

/// A uniform stretch of fiber.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSegment {
    /// Physical length of the segment in meters.
    pub length_m: f64,
    /// One-way attenuation in dB/km.
    pub attenuation_db_per_km: f64,
    /// Backscatter level in dB relative to launched peak power, referenced
    /// to [`REFERENCE_PULSE_WIDTH_S`].
    pub backscatter_level_db: f64,
    /// Group index of the fundamental mode.
    pub group_index: f64,
}

impl FiberSegment {
    /// Segment with the default backscatter level and group index.
    pub fn uniform(length_m: f64, attenuation_db_per_km: f64) -> Self {
        Self {
            length_m,
            attenuation_db_per_km,
            backscatter_level_db: DEFAULT_BACKSCATTER_LEVEL_DB,
            group_index: DEFAULT_GROUP_INDEX,
        }
    }

    fn validate(&self, index: usize) -> Result<(), ModelError> {
        if !(self.length_m > 0.0) || !self.length_m.is_finite() {
            return Err(ModelError::SegmentLength {
                index,
                value: self.length_m,
            });
        }
        if !(self.attenuation_db_per_km >= 0.0) || !self.attenuation_db_per_km.is_finite() {
            return Err(ModelError::SegmentAttenuation {
                index,
                value: self.attenuation_db_per_km,
            });
        }
        if !self.backscatter_level_db.is_finite() {
            return Err(ModelError::SegmentBackscatter {
                index,
                value: self.backscatter_level_db,
            });
        }
        if !(self.group_index > 1.0 && self.group_index < 2.0) {
            return Err(ModelError::GroupIndex {
                index,
                value: self.group_index,
            });
        }
        Ok(())
    }
}

/// A discrete feature along the fiber: a splice, connector or break.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEvent {
    /// Distance from the launch end in meters.
    pub position_m: f64,
    /// One-way insertion loss in dB, applied to everything passing the event.
    pub insertion_loss_db: f64,
    /// Power reflectance in dB (negative). `None` for a purely lossy splice.
    pub reflectance_db: Option<f64>,
}

impl PointEvent {
    /// Purely lossy splice.
    pub fn splice(position_m: f64, insertion_loss_db: f64) -> Self {
        Self {
            position_m,
            insertion_loss_db,
            reflectance_db: None,
        }
    }

    /// Reflective connector with optional loss.
    pub fn reflector(position_m: f64, reflectance_db: f64, insertion_loss_db: f64) -> Self {
        Self {
            position_m,
            insertion_loss_db,
            reflectance_db: Some(reflectance_db),
        }
    }
}

/// Complete description of the fiber under test.
///
/// Segments tile `[0, total_length]` in order with no gaps by construction;
/// point events live at positions inside that range and are kept sorted.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPlan {
    pub segments: Vec<FiberSegment>,
    pub events: Vec<PointEvent>,
    /// Reflectance of the far end in dB. `None` models an ideally
    /// terminated end that returns nothing.
    pub end_reflectance_db: Option<f64>,
}

impl FiberPlan {
    /// Builds a plan and validates it; point events are sorted by position.
    pub fn new(
        segments: Vec<FiberSegment>,
        mut events: Vec<PointEvent>,
        end_reflectance_db: Option<f64>,
    ) -> Result<Self, ModelError> {
        events.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
        let plan = Self {
            segments,
            events,
            end_reflectance_db,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Single uniform segment with an optional reflective far end.
    pub fn uniform(
        length_m: f64,
        attenuation_db_per_km: f64,
        end_reflectance_db: Option<f64>,
    ) -> Result<Self, ModelError> {
        Self::new(
            alloc::vec![FiberSegment::uniform(length_m, attenuation_db_per_km)],
            Vec::new(),
            end_reflectance_db,
        )
    }

    /// Total fiber length in meters.
    pub fn total_length_m(&self) -> f64 {
        self.segments.iter().map(|s| s.length_m).sum()
    }

    /// Checks every model invariant; deserialized plans must pass through
    /// this before being handed to the physics or simulation layers.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.segments.is_empty() {
            return Err(ModelError::NoSegments);
        }
        for (i, seg) in self.segments.iter().enumerate() {
            seg.validate(i)?;
        }
        let total = self.total_length_m();
        let mut last_pos = 0.0_f64;
        for (i, ev) in self.events.iter().enumerate() {
            if !ev.position_m.is_finite() || ev.position_m < 0.0 || ev.position_m > total {
                return Err(ModelError::EventPosition {
                    index: i,
                    value: ev.position_m,
                    total_length_m: total,
                });
            }
            if ev.position_m < last_pos {
                return Err(ModelError::EventsUnsorted { index: i });
            }
            last_pos = ev.position_m;
            if !(ev.insertion_loss_db >= 0.0) || !ev.insertion_loss_db.is_finite() {
                return Err(ModelError::EventLoss {
                    index: i,
                    value: ev.insertion_loss_db,
                });
            }
            if let Some(r) = ev.reflectance_db {
                if !(r <= 0.0) || !r.is_finite() {
                    return Err(ModelError::Reflectance { value: r });
                }
            }
        }
        if let Some(r) = self.end_reflectance_db {
            if !(r <= 0.0) || !r.is_finite() {
                return Err(ModelError::Reflectance { value: r });
            }
        }
        Ok(())
    }
}

/// Pulsed probe laser parameters.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    /// Vacuum wavelength in meters.
    pub wavelength_m: f64,
    /// Peak power of the pulse in dBm.
    pub peak_power_dbm: f64,
    /// Pulse width in seconds.
    pub pulse_width_s: f64,
    /// Pulse repetition rate in hertz.
    pub repetition_rate_hz: f64,
    /// Ratio of peak power to the residual light between pulses, in dB.
    /// `None` models a source with no measurable leakage.
    pub extinction_ratio_db: Option<f64>,
}

impl LaserConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.wavelength_m > 0.0) || !self.wavelength_m.is_finite() {
            return Err(ModelError::Wavelength {
                value: self.wavelength_m,
            });
        }
        if !self.peak_power_dbm.is_finite() {
            return Err(ModelError::PeakPower {
                value: self.peak_power_dbm,
            });
        }
        if !(self.pulse_width_s > 0.0) || !self.pulse_width_s.is_finite() {
            return Err(ModelError::PulseWidth {
                value: self.pulse_width_s,
            });
        }
        if !(self.repetition_rate_hz > 0.0) || !self.repetition_rate_hz.is_finite() {
            return Err(ModelError::RepetitionRate {
                value: self.repetition_rate_hz,
            });
        }
        // The pulse must fit inside its own period.
        if self.pulse_width_s * self.repetition_rate_hz >= 1.0 {
            return Err(ModelError::PulseWiderThanPeriod {
                pulse_width_s: self.pulse_width_s,
                repetition_rate_hz: self.repetition_rate_hz,
            });
        }
        if let Some(x) = self.extinction_ratio_db {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(ModelError::ExtinctionRatio { value: x });
            }
        }
        Ok(())
    }

    /// Pulse period in seconds.
    pub fn period_s(&self) -> f64 {
        1.0 / self.repetition_rate_hz
    }
}

/// How the detector behaves while recovering from a detection.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeadTimeMode {
    /// Recovery restarts only on accepted events.
    #[default]
    NonParalyzable,
    /// Every arrival, recorded or not, restarts the recovery window.
    Paralyzable,
}

/// Single-photon detector parameters.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Photon detection efficiency, 0 to 1.
    pub efficiency: f64,
    /// Dark count rate in hertz.
    pub dark_rate_hz: f64,
    /// Dead time after an accepted detection, in seconds.
    pub dead_time_s: f64,
    /// RMS timing jitter in seconds.
    pub jitter_sigma_s: f64,
    /// Depth of polarization fading: 0 freezes the detected fraction at
    /// one half, 1 lets it swing between zero and one.
    pub polarization_visibility: f64,
    /// Length scale over which the backscattered polarization decorrelates,
    /// in meters.
    pub polarization_correlation_length_m: f64,
    /// Dead-time recovery behavior.
    #[cfg_attr(feature = "serde", serde(default))]
    pub dead_time_mode: DeadTimeMode,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.efficiency >= 0.0 && self.efficiency <= 1.0) {
            return Err(ModelError::Efficiency {
                value: self.efficiency,
            });
        }
        if !(self.dark_rate_hz >= 0.0) || !self.dark_rate_hz.is_finite() {
            return Err(ModelError::DarkRate {
                value: self.dark_rate_hz,
            });
        }
        if !(self.dead_time_s >= 0.0) || !self.dead_time_s.is_finite() {
            return Err(ModelError::DeadTime {
                value: self.dead_time_s,
            });
        }
        if !(self.jitter_sigma_s >= 0.0) || !self.jitter_sigma_s.is_finite() {
            return Err(ModelError::Jitter {
                value: self.jitter_sigma_s,
            });
        }
        if !(self.polarization_visibility >= 0.0 && self.polarization_visibility <= 1.0) {
            return Err(ModelError::Visibility {
                value: self.polarization_visibility,
            });
        }
        if !(self.polarization_correlation_length_m > 0.0)
            || !self.polarization_correlation_length_m.is_finite()
        {
            return Err(ModelError::CorrelationLength {
                value: self.polarization_correlation_length_m,
            });
        }
        Ok(())
    }
}

/// Intervals within the pulse period during which the detector is blanked.
///
/// Off windows are half-open `[start, end)` in seconds from the pulse
/// launch; events falling inside any of them never fire. An empty schedule
/// leaves the detector armed for the whole period.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateSchedule {
    pub off_windows: Vec<(f64, f64)>,
}

impl GateSchedule {
    /// Schedule with the detector armed for the whole period.
    pub fn always_on() -> Self {
        Self::default()
    }

    /// Builds a schedule, sorting the windows and rejecting overlap.
    pub fn new(mut off_windows: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        off_windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let schedule = Self { off_windows };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut prev_end = 0.0_f64;
        for (i, &(start, end)) in self.off_windows.iter().enumerate() {
            if !(start >= 0.0 && end > start) || !end.is_finite() {
                return Err(ModelError::GateWindow {
                    index: i,
                    start,
                    end,
                });
            }
            if i > 0 && start < prev_end {
                return Err(ModelError::GateOverlap { index: i });
            }
            prev_end = end;
        }
        Ok(())
    }

    /// True when the detector is blanked at time `t`.
    pub fn is_off(&self, t_s: f64) -> bool {
        self.off_windows
            .iter()
            .any(|&(start, end)| t_s >= start && t_s < end)
    }

    /// Latest off-window edge, zero for an empty schedule.
    pub fn last_edge_s(&self) -> f64 {
        self.off_windows.last().map_or(0.0, |w| w.1)
    }

    /// Complement of the off windows within `[0, period)`, in time order.
    pub fn on_intervals(&self, period_s: f64) -> Vec<(f64, f64)> {
        let mut on = Vec::with_capacity(self.off_windows.len() + 1);
        let mut cursor = 0.0_f64;
        for &(start, end) in &self.off_windows {
            let start = start.min(period_s);
            if start > cursor {
                on.push((cursor, start));
            }
            cursor = cursor.max(end);
        }
        if cursor < period_s {
            on.push((cursor, period_s));
        }
        on
    }
}

/// Violation of a model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    NoSegments,
    SegmentLength { index: usize, value: f64 },
    SegmentAttenuation { index: usize, value: f64 },
    SegmentBackscatter { index: usize, value: f64 },
    GroupIndex { index: usize, value: f64 },
    EventPosition { index: usize, value: f64, total_length_m: f64 },
    EventsUnsorted { index: usize },
    EventLoss { index: usize, value: f64 },
    Reflectance { value: f64 },
    Wavelength { value: f64 },
    PeakPower { value: f64 },
    PulseWidth { value: f64 },
    RepetitionRate { value: f64 },
    PulseWiderThanPeriod { pulse_width_s: f64, repetition_rate_hz: f64 },
    ExtinctionRatio { value: f64 },
    Efficiency { value: f64 },
    DarkRate { value: f64 },
    DeadTime { value: f64 },
    Jitter { value: f64 },
    Visibility { value: f64 },
    CorrelationLength { value: f64 },
    GateWindow { index: usize, start: f64, end: f64 },
    GateOverlap { index: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoSegments => write!(f, "plan has no fiber segments"),
            Self::SegmentLength { index, value } => {
                write!(f, "segment {index}: length must be positive, got {value} m")
            }
            Self::SegmentAttenuation { index, value } => write!(
                f,
                "segment {index}: attenuation must be non-negative, got {value} dB/km"
            ),
            Self::SegmentBackscatter { index, value } => {
                write!(f, "segment {index}: backscatter level {value} dB is not finite")
            }
            Self::GroupIndex { index, value } => write!(
                f,
                "segment {index}: group index must lie in (1, 2), got {value}"
            ),
            Self::EventPosition {
                index,
                value,
                total_length_m,
            } => write!(
                f,
                "event {index}: position {value} m outside fiber of length {total_length_m} m"
            ),
            Self::EventsUnsorted { index } => {
                write!(f, "event {index}: events must be sorted by position")
            }
            Self::EventLoss { index, value } => write!(
                f,
                "event {index}: insertion loss must be non-negative, got {value} dB"
            ),
            Self::Reflectance { value } => write!(
                f,
                "reflectance must be a finite dB value <= 0, got {value} dB"
            ),
            Self::Wavelength { value } => {
                write!(f, "wavelength must be positive, got {value} m")
            }
            Self::PeakPower { value } => write!(f, "peak power {value} dBm is not finite"),
            Self::PulseWidth { value } => {
                write!(f, "pulse width must be positive, got {value} s")
            }
            Self::RepetitionRate { value } => {
                write!(f, "repetition rate must be positive, got {value} Hz")
            }
            Self::PulseWiderThanPeriod {
                pulse_width_s,
                repetition_rate_hz,
            } => write!(
                f,
                "pulse width {pulse_width_s} s does not fit in the {repetition_rate_hz} Hz period"
            ),
            Self::ExtinctionRatio { value } => write!(
                f,
                "extinction ratio must be a finite dB value >= 0, got {value} dB"
            ),
            Self::Efficiency { value } => {
                write!(f, "efficiency must lie in [0, 1], got {value}")
            }
            Self::DarkRate { value } => {
                write!(f, "dark rate must be non-negative, got {value} Hz")
            }
            Self::DeadTime { value } => {
                write!(f, "dead time must be non-negative, got {value} s")
            }
            Self::Jitter { value } => {
                write!(f, "jitter sigma must be non-negative, got {value} s")
            }
            Self::Visibility { value } => write!(
                f,
                "polarization visibility must lie in [0, 1], got {value}"
            ),
            Self::CorrelationLength { value } => write!(
                f,
                "polarization correlation length must be positive, got {value} m"
            ),
            Self::GateWindow { index, start, end } => write!(
                f,
                "gate window {index}: [{start}, {end}) s is not a valid interval"
            ),
            Self::GateOverlap { index } => {
                write!(f, "gate window {index} overlaps the previous window")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}
