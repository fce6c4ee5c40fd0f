//! Closed-form optics of the link: timing, noise and the expected
//! photon-detection rate as a function of delay after the pulse launch.
//!
//! Delay `t` after a launch maps to fiber distance through the two-way
//! transit `t = 2 n z / c`; everything the detector sees at delay `t` left
//! the fiber at distance `z(t)`. Powers are carried in watts internally and
//! converted from the dB quantities of the model at construction time.

use crate::fmath;
use crate::model::{
    DetectorConfig, FiberPlan, LaserConfig, ModelError, REFERENCE_PULSE_WIDTH_S,
};
use crate::polarization::PolarizationState;
use alloc::vec::Vec;
use core::f64::consts::LN_10;
use core::fmt;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Planck constant, J*s.
pub const PLANCK_CONSTANT_J_S: f64 = 6.626_070_15e-34;

/// Converts a dB ratio to the linear power ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    fmath::pow10(db / 10.0)
}

/// Converts a linear power ratio to dB.
#[inline]
pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * fmath::log10(ratio)
}

/// Converts dBm to watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * fmath::pow10(dbm / 10.0)
}

/// Converts watts to dBm.
#[inline]
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * fmath::log10(watts / 1e-3)
}

/// Domain violation in a physics computation.
#[derive(Debug, Clone, PartialEq)]
pub enum PhysicsError {
    NegativeLength { value: f64 },
    NonPositiveLength { value: f64 },
    GroupIndexRange { value: f64 },
    ZeroEfficiency,
    EfficiencyRange { value: f64 },
    NegativeDarkRate { value: f64 },
    NonPositiveWavelength { value: f64 },
    NegativeJitter { value: f64 },
    NonPositivePulseWidth { value: f64 },
    TimeOutOfRange { t_s: f64, period_s: f64 },
    Model(ModelError),
}

impl fmt::Display for PhysicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegativeLength { value } => {
                write!(f, "length must be non-negative, got {value} m")
            }
            Self::NonPositiveLength { value } => {
                write!(f, "length must be positive, got {value} m")
            }
            Self::GroupIndexRange { value } => {
                write!(f, "group index must lie in (1, 2), got {value}")
            }
            Self::ZeroEfficiency => write!(f, "detection efficiency must be positive"),
            Self::EfficiencyRange { value } => {
                write!(f, "efficiency must lie in (0, 1], got {value}")
            }
            Self::NegativeDarkRate { value } => {
                write!(f, "dark rate must be non-negative, got {value} Hz")
            }
            Self::NonPositiveWavelength { value } => {
                write!(f, "wavelength must be positive, got {value} m")
            }
            Self::NegativeJitter { value } => {
                write!(f, "jitter sigma must be non-negative, got {value} s")
            }
            Self::NonPositivePulseWidth { value } => {
                write!(f, "pulse width must be positive, got {value} s")
            }
            Self::TimeOutOfRange { t_s, period_s } => {
                write!(f, "time {t_s} s outside the pulse period [0, {period_s}) s")
            }
            Self::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<ModelError> for PhysicsError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PhysicsError {}

fn check_group_index(group_index: f64) -> Result<(), PhysicsError> {
    if group_index > 1.0 && group_index < 2.0 {
        Ok(())
    } else {
        Err(PhysicsError::GroupIndexRange { value: group_index })
    }
}

/// Two-way transit time of a fiber of the given length, in seconds.
pub fn round_trip_time(length_m: f64, group_index: f64) -> Result<f64, PhysicsError> {
    if !(length_m >= 0.0) || !length_m.is_finite() {
        return Err(PhysicsError::NegativeLength { value: length_m });
    }
    check_group_index(group_index)?;
    Ok(2.0 * length_m * group_index / SPEED_OF_LIGHT_M_PER_S)
}

/// Highest pulse rate that keeps at most one pulse in flight, in hertz.
pub fn max_repetition_rate(length_m: f64, group_index: f64) -> Result<f64, PhysicsError> {
    if !(length_m > 0.0) || !length_m.is_finite() {
        return Err(PhysicsError::NonPositiveLength { value: length_m });
    }
    Ok(1.0 / round_trip_time(length_m, group_index)?)
}

/// Noise equivalent power of a photon-counting detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nep {
    /// NEP in W/sqrt(Hz).
    pub watts_per_sqrt_hz: f64,
    /// The same value expressed as dBm/sqrt(Hz); negative infinity for a
    /// detector with no dark counts.
    pub dbm_per_sqrt_hz: f64,
}

/// NEP of a photon counter: the photon energy divided by the efficiency,
/// times the shot-noise bandwidth factor `sqrt(2 * dark_rate)`.
pub fn noise_equivalent_power(
    dark_rate_hz: f64,
    efficiency: f64,
    wavelength_m: f64,
) -> Result<Nep, PhysicsError> {
    if efficiency == 0.0 {
        return Err(PhysicsError::ZeroEfficiency);
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(PhysicsError::EfficiencyRange { value: efficiency });
    }
    if !(dark_rate_hz >= 0.0) || !dark_rate_hz.is_finite() {
        return Err(PhysicsError::NegativeDarkRate {
            value: dark_rate_hz,
        });
    }
    if !(wavelength_m > 0.0) || !wavelength_m.is_finite() {
        return Err(PhysicsError::NonPositiveWavelength {
            value: wavelength_m,
        });
    }
    let photon_energy_j = PLANCK_CONSTANT_J_S * SPEED_OF_LIGHT_M_PER_S / wavelength_m;
    let watts = photon_energy_j / efficiency * fmath::sqrt(2.0 * dark_rate_hz);
    Ok(Nep {
        watts_per_sqrt_hz: watts,
        dbm_per_sqrt_hz: watts_to_dbm(watts),
    })
}

/// One-sigma distance uncertainty caused by detector timing jitter.
pub fn distance_resolution(jitter_sigma_s: f64, group_index: f64) -> Result<f64, PhysicsError> {
    if !(jitter_sigma_s >= 0.0) || !jitter_sigma_s.is_finite() {
        return Err(PhysicsError::NegativeJitter {
            value: jitter_sigma_s,
        });
    }
    check_group_index(group_index)?;
    Ok(SPEED_OF_LIGHT_M_PER_S * jitter_sigma_s / (2.0 * group_index))
}

/// Smallest separation at which two features remain distinguishable, set by
/// the pulse width.
pub fn two_point_resolution(pulse_width_s: f64, group_index: f64) -> Result<f64, PhysicsError> {
    if !(pulse_width_s > 0.0) || !pulse_width_s.is_finite() {
        return Err(PhysicsError::NonPositivePulseWidth {
            value: pulse_width_s,
        });
    }
    check_group_index(group_index)?;
    Ok(SPEED_OF_LIGHT_M_PER_S * pulse_width_s / (2.0 * group_index))
}

/// A stretch of fiber with constant attenuation between two breakpoints
/// (segment boundaries or point events).
#[derive(Debug, Clone, Copy)]
struct Layer {
    z0_m: f64,
    z1_m: f64,
    delay0_s: f64,
    delay1_s: f64,
    /// dz/dt along the delay axis: c / (2 n).
    meters_per_second: f64,
    /// One-way attenuation in dB per meter.
    atten_db_per_m: f64,
    /// Received backscatter power at the layer start, watts.
    backscatter_w: f64,
}

impl Layer {
    fn backscatter_at(&self, z_m: f64) -> f64 {
        self.backscatter_w * db_to_linear(-2.0 * self.atten_db_per_m * (z_m - self.z0_m))
    }
}

/// Echo of the probe pulse off a discrete reflector: a rectangle of received
/// power lasting one pulse width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionWindow {
    pub delay_on_s: f64,
    pub delay_off_s: f64,
    pub power_w: f64,
    pub position_m: f64,
}

/// Expected detection rate of the instrument as a function of delay.
///
/// Precomputes the link budget of a plan/laser/detector triple so the rate
/// can be evaluated cheaply at millions of candidate times. The rate at
/// delay `t` is
///
/// ```text
/// rate(t) = efficiency * pol(z(t)) * (P_bs(t) + P_refl(t) + P_floor) / E_ph
///           + dark_rate
/// ```
///
/// where `P_bs` is the Rayleigh backscatter of the pulse, `P_refl` sums the
/// discrete-reflector rectangles and `P_floor` is the trace-wide backscatter
/// of the residual light leaking through the pulse carver, set by the
/// laser's extinction ratio.
#[derive(Debug, Clone)]
pub struct RateModel {
    layers: Vec<Layer>,
    reflections: Vec<ReflectionWindow>,
    floor_w: f64,
    photon_energy_j: f64,
    efficiency: f64,
    dark_rate_hz: f64,
    total_length_m: f64,
    total_delay_s: f64,
}

impl RateModel {
    pub fn new(
        plan: &FiberPlan,
        laser: &LaserConfig,
        detector: &DetectorConfig,
    ) -> Result<Self, PhysicsError> {
        plan.validate()?;
        laser.validate()?;
        detector.validate()?;

        let peak_w = dbm_to_watts(laser.peak_power_dbm);
        let width_scale = laser.pulse_width_s / REFERENCE_PULSE_WIDTH_S;
        let photon_energy_j = PLANCK_CONSTANT_J_S * SPEED_OF_LIGHT_M_PER_S / laser.wavelength_m;

        let mut layers = Vec::new();
        let mut reflections = Vec::new();
        let mut integrated_backscatter = 0.0;

        let mut z = 0.0_f64;
        let mut delay = 0.0_f64;
        let mut cum_loss_db = 0.0_f64;
        let mut events = plan.events.iter().peekable();

        let mut push_layer = |z0: f64,
                              z1: f64,
                              delay0: f64,
                              seg: &crate::model::FiberSegment,
                              cum_loss_db: f64|
         -> (f64, f64) {
            let span = z1 - z0;
            let atten_db_per_m = seg.attenuation_db_per_km / 1000.0;
            let meters_per_second = SPEED_OF_LIGHT_M_PER_S / (2.0 * seg.group_index);
            let delay1 = delay0 + span / meters_per_second;
            let scatter_lin = db_to_linear(seg.backscatter_level_db) * width_scale;
            let backscatter_w = peak_w * scatter_lin * db_to_linear(-2.0 * cum_loss_db);

            // Contribution of this layer to the floor integral: backscatter
            // per meter of continuous light, times the two-way loss profile.
            let per_meter = db_to_linear(seg.backscatter_level_db) * 2.0 * seg.group_index
                / (SPEED_OF_LIGHT_M_PER_S * REFERENCE_PULSE_WIDTH_S);
            let k_per_m = 2.0 * atten_db_per_m * LN_10 / 10.0;
            let profile_integral = if k_per_m > 0.0 {
                (1.0 - fmath::exp(-k_per_m * span)) / k_per_m
            } else {
                span
            };
            integrated_backscatter +=
                per_meter * db_to_linear(-2.0 * cum_loss_db) * profile_integral;

            layers.push(Layer {
                z0_m: z0,
                z1_m: z1,
                delay0_s: delay0,
                delay1_s: delay1,
                meters_per_second,
                atten_db_per_m,
                backscatter_w,
            });
            (delay1, cum_loss_db + atten_db_per_m * span)
        };

        for seg in &plan.segments {
            let seg_end = z + seg.length_m;
            while let Some(ev) = events.peek().copied() {
                if ev.position_m > seg_end {
                    break;
                }
                let ev = *events.next().expect("peeked");
                if ev.position_m > z {
                    let (d1, l1) = push_layer(z, ev.position_m, delay, seg, cum_loss_db);
                    delay = d1;
                    cum_loss_db = l1;
                    z = ev.position_m;
                }
                // The echo comes off the interface before the event's own
                // insertion loss applies.
                if let Some(r_db) = ev.reflectance_db {
                    reflections.push(ReflectionWindow {
                        delay_on_s: delay,
                        delay_off_s: delay + laser.pulse_width_s,
                        power_w: peak_w * db_to_linear(r_db) * db_to_linear(-2.0 * cum_loss_db),
                        position_m: z,
                    });
                }
                cum_loss_db += ev.insertion_loss_db;
            }
            if z < seg_end {
                let (d1, l1) = push_layer(z, seg_end, delay, seg, cum_loss_db);
                delay = d1;
                cum_loss_db = l1;
                z = seg_end;
            }
        }

        if let Some(r_db) = plan.end_reflectance_db {
            reflections.push(ReflectionWindow {
                delay_on_s: delay,
                delay_off_s: delay + laser.pulse_width_s,
                power_w: peak_w * db_to_linear(r_db) * db_to_linear(-2.0 * cum_loss_db),
                position_m: z,
            });
        }

        let floor_w = match laser.extinction_ratio_db {
            Some(x_db) => peak_w * db_to_linear(-x_db) * integrated_backscatter,
            None => 0.0,
        };

        Ok(Self {
            layers,
            reflections,
            floor_w,
            photon_energy_j,
            efficiency: detector.efficiency,
            dark_rate_hz: detector.dark_rate_hz,
            total_length_m: z,
            total_delay_s: delay,
        })
    }

    /// Fiber distance the backscatter received at delay `t` originated from;
    /// `None` beyond the far end.
    pub fn z_at_time(&self, t_s: f64) -> Option<f64> {
        if t_s < 0.0 || t_s > self.total_delay_s {
            return None;
        }
        let idx = self
            .layers
            .partition_point(|l| l.delay1_s < t_s)
            .min(self.layers.len() - 1);
        let l = &self.layers[idx];
        Some(l.z0_m + (t_s - l.delay0_s) * l.meters_per_second)
    }

    /// Two-way delay of light returning from distance `z`.
    pub fn delay_at(&self, z_m: f64) -> f64 {
        let z = z_m.clamp(0.0, self.total_length_m);
        let idx = self
            .layers
            .partition_point(|l| l.z1_m < z)
            .min(self.layers.len() - 1);
        let l = &self.layers[idx];
        l.delay0_s + (z - l.z0_m) / l.meters_per_second
    }

    /// Received Rayleigh backscatter power at delay `t`, watts.
    pub fn backscatter_power_w(&self, t_s: f64) -> f64 {
        if t_s < 0.0 || t_s > self.total_delay_s {
            return 0.0;
        }
        let idx = self
            .layers
            .partition_point(|l| l.delay1_s < t_s)
            .min(self.layers.len() - 1);
        let l = &self.layers[idx];
        let z = l.z0_m + (t_s - l.delay0_s) * l.meters_per_second;
        l.backscatter_at(z)
    }

    /// Received power from discrete reflectors at delay `t`, watts.
    pub fn reflected_power_w(&self, t_s: f64) -> f64 {
        self.reflections
            .iter()
            .filter(|r| t_s >= r.delay_on_s && t_s < r.delay_off_s)
            .map(|r| r.power_w)
            .sum()
    }

    /// Total optical power on the detector at delay `t`, watts.
    pub fn optical_power_w(&self, t_s: f64) -> f64 {
        self.backscatter_power_w(t_s) + self.reflected_power_w(t_s) + self.floor_w
    }

    /// Expected detection rate at delay `t` for the given polarization
    /// state, in hertz. Dark counts do not pass the polarizing optics, so
    /// they enter after the polarization factor.
    pub fn rate_hz(&self, t_s: f64, pol: PolarizationState<'_>) -> f64 {
        let z = self
            .z_at_time(t_s)
            .unwrap_or(self.total_length_m);
        self.efficiency * pol.factor(z) * self.optical_power_w(t_s) / self.photon_energy_j
            + self.dark_rate_hz
    }

    /// Upper bound of `rate_hz` over `[t0, t1]` for any polarization state
    /// whose factor never exceeds `max_pol_factor`.
    ///
    /// Backscatter never increases with delay, so its maximum sits at `t0`;
    /// every reflector rectangle overlapping the interval is added whole.
    pub fn max_rate_hz(&self, t0_s: f64, t1_s: f64, max_pol_factor: f64) -> f64 {
        let bs = self.backscatter_power_w(t0_s.max(0.0));
        let refl: f64 = self
            .reflections
            .iter()
            .filter(|r| r.delay_on_s < t1_s && r.delay_off_s > t0_s)
            .map(|r| r.power_w)
            .sum();
        self.efficiency * max_pol_factor * (bs + refl + self.floor_w) / self.photon_energy_j
            + self.dark_rate_hz
    }

    /// Expected number of detections in `[t0, t1]` per pulse for a constant
    /// polarization factor, integrating the rate in closed form.
    pub fn expected_counts(&self, t0_s: f64, t1_s: f64, pol_factor: f64) -> f64 {
        if t1_s <= t0_s {
            return 0.0;
        }
        let mut optical_integral = 0.0;
        for l in &self.layers {
            let a = t0_s.max(l.delay0_s);
            let b = t1_s.min(l.delay1_s);
            if b <= a {
                continue;
            }
            // In time the backscatter decays as exp(-k (t - delay0)).
            let k = 2.0 * l.atten_db_per_m * l.meters_per_second * LN_10 / 10.0;
            optical_integral += if k > 0.0 {
                l.backscatter_w / k
                    * (fmath::exp(-k * (a - l.delay0_s)) - fmath::exp(-k * (b - l.delay0_s)))
            } else {
                l.backscatter_w * (b - a)
            };
        }
        for r in &self.reflections {
            let overlap = (t1_s.min(r.delay_off_s) - t0_s.max(r.delay_on_s)).max(0.0);
            optical_integral += r.power_w * overlap;
        }
        optical_integral += self.floor_w * (t1_s - t0_s);
        self.efficiency * pol_factor * optical_integral / self.photon_energy_j
            + self.dark_rate_hz * (t1_s - t0_s)
    }

    pub fn reflection_windows(&self) -> &[ReflectionWindow] {
        &self.reflections
    }

    pub fn total_length_m(&self) -> f64 {
        self.total_length_m
    }

    /// Round-trip delay of the far end.
    pub fn total_delay_s(&self) -> f64 {
        self.total_delay_s
    }

    pub fn photon_energy_j(&self) -> f64 {
        self.photon_energy_j
    }

    /// Received power of the extinction floor, watts.
    pub fn floor_w(&self) -> f64 {
        self.floor_w
    }

    pub fn dark_rate_hz(&self) -> f64 {
        self.dark_rate_hz
    }
}

/// Expected detection rate at delay `t` after a pulse launch, in hertz.
///
/// Convenience wrapper that validates the configuration and builds a
/// [`RateModel`] for a single evaluation; use the model directly when
/// evaluating many times.
pub fn expected_detection_rate(
    plan: &FiberPlan,
    laser: &LaserConfig,
    detector: &DetectorConfig,
    t_s: f64,
    pol: PolarizationState<'_>,
) -> Result<f64, PhysicsError> {
    let period_s = laser.period_s();
    if !(t_s >= 0.0 && t_s < period_s) {
        return Err(PhysicsError::TimeOutOfRange { t_s, period_s });
    }
    Ok(RateModel::new(plan, laser, detector)?.rate_hz(t_s, pol))
}
