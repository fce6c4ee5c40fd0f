//! Monte-Carlo photon acquisition.
//!
//! Detections form an inhomogeneous Poisson process whose intensity is the
//! expected detection rate of the link. Each pulse is sampled by thinning:
//! candidate times are drawn from a homogeneous process at an upper-bound
//! rate and kept with probability `rate(t) / bound`. The pulse period is
//! pre-split into chunks (gate-on intervals, further cut at reflector edges
//! and layer boundaries) so the bound stays tight against the steeply
//! decaying backscatter and no time is wasted proposing candidates inside
//! gated-off windows.
//!
//! Detector effects apply in physical order: the gate suppresses detections
//! at the source, dead time removes events too close to an accepted one,
//! and timing jitter smears the recorded timestamps afterwards.
//!
//! Every pulse draws from its own counter-mode RNG stream derived from
//! `(seed, pulse index)`, so a pulse's events are reproducible in isolation
//! and independent of how pulses are scheduled across threads.

use crate::model::{
    DetectorConfig, DeadTimeMode, FiberPlan, GateSchedule, LaserConfig, ModelError,
};
use crate::physics::{PhysicsError, RateModel};
use crate::polarization::{PolarizationState, PolarizationTrack};
use alloc::vec::Vec;
use core::fmt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

/// RNG stream family for per-pulse photon sampling.
const DOMAIN_PULSE: u64 = 0;
/// RNG stream family for polarization-drift epochs.
const DOMAIN_POLARIZATION: u64 = 1;

/// Failure inside the sampling pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulationError {
    Model(ModelError),
    Physics(PhysicsError),
    /// The claimed envelope was below the true rate; the thinned sample
    /// would be biased, so the run aborts instead of silently clipping.
    RateExceedsBound {
        t_s: f64,
        rate_hz: f64,
        bound_hz: f64,
    },
    InvalidBound {
        value: f64,
    },
    UnsortedTimestamps {
        index: usize,
    },
    RepetitionTooFast {
        rate_hz: f64,
        limit_hz: f64,
    },
    GateBeyondPeriod {
        edge_s: f64,
        period_s: f64,
    },
    InvalidEvolution,
}

impl fmt::Display for SimulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Model(e) => write!(f, "{e}"),
            Self::Physics(e) => write!(f, "{e}"),
            Self::RateExceedsBound {
                t_s,
                rate_hz,
                bound_hz,
            } => write!(
                f,
                "rate {rate_hz} Hz at t = {t_s} s exceeds the sampling bound {bound_hz} Hz"
            ),
            Self::InvalidBound { value } => {
                write!(f, "sampling bound must be finite and non-negative, got {value}")
            }
            Self::UnsortedTimestamps { index } => {
                write!(f, "timestamps must be sorted, violation at index {index}")
            }
            Self::RepetitionTooFast { rate_hz, limit_hz } => write!(
                f,
                "repetition rate {rate_hz} Hz exceeds the one-pulse-in-flight limit {limit_hz} Hz"
            ),
            Self::GateBeyondPeriod { edge_s, period_s } => write!(
                f,
                "gate window edge {edge_s} s lies beyond the pulse period {period_s} s"
            ),
            Self::InvalidEvolution => {
                write!(f, "polarization resampling interval must be at least one pulse")
            }
        }
    }
}

impl From<ModelError> for SimulationError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}

impl From<PhysicsError> for SimulationError {
    fn from(e: PhysicsError) -> Self {
        Self::Physics(e)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimulationError {}

/// Draws one realization of an inhomogeneous Poisson process on
/// `[t0, t1)` by thinning a homogeneous process at `max_rate_hz`.
///
/// `max_rate_hz` must dominate `rate` on the whole interval; if a proposed
/// time reveals a higher rate the function fails rather than return a
/// biased sample. Returned times are strictly increasing.
pub fn sample_inhomogeneous_poisson<F, R>(
    rate: F,
    max_rate_hz: f64,
    t0_s: f64,
    t1_s: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SimulationError>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let mut out = Vec::new();
    sample_thinned(&rate, max_rate_hz, t0_s, t1_s, rng, &mut out)?;
    Ok(out)
}

fn sample_thinned<F, R>(
    rate: &F,
    bound_hz: f64,
    t0_s: f64,
    t1_s: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<(), SimulationError>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    if !bound_hz.is_finite() || bound_hz < 0.0 {
        return Err(SimulationError::InvalidBound { value: bound_hz });
    }
    if bound_hz == 0.0 || t1_s <= t0_s {
        return Ok(());
    }
    let gaps = Exp::new(bound_hz).expect("positive rate");
    let mut t = t0_s;
    loop {
        t += gaps.sample(rng);
        if t >= t1_s {
            return Ok(());
        }
        let r = rate(t);
        if r > bound_hz * (1.0 + 1e-9) {
            return Err(SimulationError::RateExceedsBound {
                t_s: t,
                rate_hz: r,
                bound_hz,
            });
        }
        if rng.random::<f64>() * bound_hz < r {
            out.push(t);
        }
    }
}

/// Applies detector dead time to a sorted list of arrival times.
///
/// Non-paralyzable: an accepted event blinds the detector for `dead_time_s`
/// and arrivals inside the blind window are dropped without extending it.
/// Paralyzable: every arrival, kept or not, restarts the blind window, so
/// an event survives only when a full dead time has elapsed since the
/// previous arrival.
pub fn apply_dead_time(
    times_s: &[f64],
    dead_time_s: f64,
    mode: DeadTimeMode,
) -> Result<Vec<f64>, SimulationError> {
    for (i, w) in times_s.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(SimulationError::UnsortedTimestamps { index: i + 1 });
        }
    }
    if dead_time_s <= 0.0 {
        return Ok(times_s.to_vec());
    }
    let mut kept = Vec::with_capacity(times_s.len());
    match mode {
        DeadTimeMode::NonParalyzable => {
            let mut last_kept = f64::NEG_INFINITY;
            for &t in times_s {
                if t - last_kept >= dead_time_s {
                    kept.push(t);
                    last_kept = t;
                }
            }
        }
        DeadTimeMode::Paralyzable => {
            let mut prev_arrival = f64::NEG_INFINITY;
            for &t in times_s {
                if t - prev_arrival >= dead_time_s {
                    kept.push(t);
                }
                prev_arrival = t;
            }
        }
    }
    Ok(kept)
}

/// Drops events falling inside gated-off windows.
pub fn apply_gate(times_s: &[f64], gate: &GateSchedule) -> Vec<f64> {
    times_s
        .iter()
        .copied()
        .filter(|&t| !gate.is_off(t))
        .collect()
}

/// Adds Gaussian timing jitter to each timestamp, clamps the result into
/// `[0, period]` and restores sorted order.
pub fn apply_jitter<R: Rng + ?Sized>(
    times_s: &mut Vec<f64>,
    jitter_sigma_s: f64,
    period_s: f64,
    rng: &mut R,
) {
    if jitter_sigma_s <= 0.0 {
        return;
    }
    let noise = Normal::new(0.0, jitter_sigma_s).expect("positive sigma");
    for t in times_s.iter_mut() {
        *t = (*t + noise.sample(rng)).clamp(0.0, period_s);
    }
    times_s.sort_by(|a, b| a.total_cmp(b));
}

/// One detected photon, tagged with the pulse that produced it.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PhotonEvent {
    pub pulse_index: u64,
    /// Delay after the pulse launch, in picoseconds.
    pub timestamp_ps: u64,
}

/// How the fading pattern evolves over an acquisition.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolarizationEvolution {
    /// One fading pattern frozen for the whole run: the worst case for
    /// trace ripple, appropriate for short acquisitions.
    #[default]
    Static,
    /// A fresh fading pattern every `every_pulses` pulses, modelling slow
    /// drift of the fiber's birefringence across a long acquisition.
    Resample { every_pulses: u64 },
}

/// Everything needed to reproduce an acquisition, stored alongside the
/// events in the on-disk format.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionHeader {
    pub plan: FiberPlan,
    pub laser: LaserConfig,
    pub detector: DetectorConfig,
    pub gate: GateSchedule,
    #[cfg_attr(feature = "serde", serde(default))]
    pub polarization_evolution: PolarizationEvolution,
    pub n_pulses: u64,
    pub seed: u64,
}

impl AcquisitionHeader {
    pub fn period_s(&self) -> f64 {
        self.laser.period_s()
    }

    /// Pulse period on the picosecond timestamp grid.
    pub fn period_ps(&self) -> u64 {
        crate::fmath::round(self.laser.period_s() * 1e12) as u64
    }

    /// Wall-clock duration of the acquisition.
    pub fn duration_s(&self) -> f64 {
        self.n_pulses as f64 * self.laser.period_s()
    }
}

/// A complete acquisition: metadata plus the detected photons in
/// `(pulse_index, timestamp)` order.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonEventStream {
    pub header: AcquisitionHeader,
    pub events: Vec<PhotonEvent>,
}

impl PhotonEventStream {
    /// Confirms events are sorted by pulse then timestamp and lie inside
    /// the acquisition's pulse count and period.
    pub fn validate(&self) -> Result<(), SimulationError> {
        let period_ps = self.header.period_ps();
        for (i, e) in self.events.iter().enumerate() {
            if e.pulse_index >= self.header.n_pulses || e.timestamp_ps >= period_ps {
                return Err(SimulationError::UnsortedTimestamps { index: i });
            }
            if i > 0 {
                let p = &self.events[i - 1];
                if (e.pulse_index, e.timestamp_ps) < (p.pulse_index, p.timestamp_ps) {
                    return Err(SimulationError::UnsortedTimestamps { index: i });
                }
            }
        }
        Ok(())
    }
}

/// Counter-mode RNG for stream `index` of a named stream family.
///
/// The 256-bit ChaCha key mixes the acquisition seed with the family tag;
/// the stream counter selects the index. Streams are statistically
/// independent, so pulses can be simulated in any order, in parallel, or
/// alone, with identical results.
pub fn domain_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// A gate-on span with a precomputed rate envelope.
#[derive(Debug, Clone, Copy)]
struct Chunk {
    t0_s: f64,
    t1_s: f64,
    bound_hz: f64,
}

/// Prepared simulation of one acquisition.
///
/// Construction validates the configuration and freezes the chunked rate
/// envelope and the polarization epochs; after that, [`pulse_events`] is a
/// pure function of the pulse index.
///
/// [`pulse_events`]: Acquisition::pulse_events
#[derive(Debug, Clone)]
pub struct Acquisition {
    header: AcquisitionHeader,
    model: RateModel,
    chunks: Vec<Chunk>,
    tracks: Vec<PolarizationTrack>,
}

impl Acquisition {
    pub fn new(header: AcquisitionHeader) -> Result<Self, SimulationError> {
        header.plan.validate()?;
        header.laser.validate()?;
        header.detector.validate()?;
        header.gate.validate()?;

        let model = RateModel::new(&header.plan, &header.laser, &header.detector)?;
        let period_s = header.period_s();
        if period_s < model.total_delay_s() {
            return Err(SimulationError::RepetitionTooFast {
                rate_hz: header.laser.repetition_rate_hz,
                limit_hz: 1.0 / model.total_delay_s(),
            });
        }
        let last_edge = header.gate.last_edge_s();
        if last_edge > period_s {
            return Err(SimulationError::GateBeyondPeriod {
                edge_s: last_edge,
                period_s,
            });
        }

        let n_epochs = match header.polarization_evolution {
            PolarizationEvolution::Static => 1,
            PolarizationEvolution::Resample { every_pulses } => {
                if every_pulses == 0 {
                    return Err(SimulationError::InvalidEvolution);
                }
                header.n_pulses.div_ceil(every_pulses).max(1)
            }
        };
        let tracks = (0..n_epochs)
            .map(|e| {
                let mut rng = domain_rng(header.seed, DOMAIN_POLARIZATION, e);
                PolarizationTrack::sample(
                    header.plan.total_length_m(),
                    header.detector.polarization_correlation_length_m,
                    header.detector.polarization_visibility,
                    &mut rng,
                )
            })
            .collect();

        let chunks = build_chunks(&model, &header, period_s);
        Ok(Self {
            header,
            model,
            chunks,
            tracks,
        })
    }

    pub fn header(&self) -> &AcquisitionHeader {
        &self.header
    }

    pub fn rate_model(&self) -> &RateModel {
        &self.model
    }

    /// Fading pattern in effect for a given pulse.
    pub fn track_for_pulse(&self, pulse_index: u64) -> &PolarizationTrack {
        let epoch = match self.header.polarization_evolution {
            PolarizationEvolution::Static => 0,
            PolarizationEvolution::Resample { every_pulses } => {
                (pulse_index / every_pulses) as usize
            }
        };
        &self.tracks[epoch.min(self.tracks.len() - 1)]
    }

    /// Average candidate proposals per pulse under the current envelope;
    /// a planning aid, not part of the sampled statistics.
    pub fn candidates_per_pulse(&self) -> f64 {
        self.chunks
            .iter()
            .map(|c| c.bound_hz * (c.t1_s - c.t0_s))
            .sum()
    }

    /// Simulates one pulse and returns its detected photons in timestamp
    /// order. Deterministic in `(header, pulse_index)`.
    pub fn pulse_events(&self, pulse_index: u64) -> Result<Vec<PhotonEvent>, SimulationError> {
        let mut rng = domain_rng(self.header.seed, DOMAIN_PULSE, pulse_index);
        let track = self.track_for_pulse(pulse_index);
        let pol = PolarizationState::Faded(track);

        let mut times = Vec::new();
        for c in &self.chunks {
            sample_thinned(
                &|t| self.model.rate_hz(t, pol),
                c.bound_hz,
                c.t0_s,
                c.t1_s,
                &mut rng,
                &mut times,
            )?;
        }

        let mut kept = apply_dead_time(
            &times,
            self.header.detector.dead_time_s,
            self.header.detector.dead_time_mode,
        )?;
        apply_jitter(
            &mut kept,
            self.header.detector.jitter_sigma_s,
            self.header.period_s(),
            &mut rng,
        );

        let period_ps = self.header.period_ps();
        Ok(kept
            .into_iter()
            .map(|t| PhotonEvent {
                pulse_index,
                timestamp_ps: (crate::fmath::round(t * 1e12) as u64).min(period_ps - 1),
            })
            .collect())
    }

    /// Simulates every pulse in order on the calling thread.
    pub fn run(&self) -> Result<PhotonEventStream, SimulationError> {
        let mut events = Vec::new();
        for p in 0..self.header.n_pulses {
            events.extend(self.pulse_events(p)?);
        }
        Ok(PhotonEventStream {
            header: self.header.clone(),
            events,
        })
    }
}

/// Splits the gate-on part of the period into chunks with tight rate
/// envelopes.
///
/// Cut points: reflector rectangle edges, the far-end delay and internal
/// layer boundaries (the rate is discontinuous at all of these), then long
/// backscatter spans are subdivided so the expected rate falls by at most
/// 0.5 dB across a chunk, keeping thinning acceptance above ~90%.
fn build_chunks(model: &RateModel, header: &AcquisitionHeader, period_s: f64) -> Vec<Chunk> {
    let max_pol = 0.5 * (1.0 + header.detector.polarization_visibility);

    let mut cuts: Vec<f64> = Vec::new();
    for r in model.reflection_windows() {
        cuts.push(r.delay_on_s);
        cuts.push(r.delay_off_s);
    }
    cuts.push(model.total_delay_s());
    // Layer boundaries, recovered by walking the plan's breakpoints.
    let mut z = 0.0;
    for seg in &header.plan.segments {
        z += seg.length_m;
        cuts.push(model.delay_at(z));
    }
    for ev in &header.plan.events {
        cuts.push(model.delay_at(ev.position_m));
    }
    cuts.retain(|&t| t > 0.0 && t < period_s);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let mut chunks = Vec::new();
    for (on0, on1) in header.gate.on_intervals(period_s) {
        let mut edges = alloc::vec![on0];
        edges.extend(cuts.iter().copied().filter(|&c| c > on0 && c < on1));
        edges.push(on1);
        for w in edges.windows(2) {
            subdivide_piece(model, w[0], w[1], max_pol, &mut chunks);
        }
    }
    chunks
}

fn subdivide_piece(
    model: &RateModel,
    t0_s: f64,
    t1_s: f64,
    max_pol: f64,
    chunks: &mut Vec<Chunk>,
) {
    const MAX_DECAY_DB: f64 = 0.5;
    let mut parts = 1usize;
    if t0_s < model.total_delay_s() {
        // Two-way decay rate in dB/s at the start of the piece; pieces never
        // straddle a layer boundary, so it is constant inside.
        let p0 = model.backscatter_power_w(t0_s);
        let span = (t1_s - t0_s).min(model.total_delay_s() - t0_s);
        if p0 > 0.0 && span > 0.0 {
            let p1 = model.backscatter_power_w(t0_s + span * (1.0 - 1e-12));
            if p1 > 0.0 {
                let decay_db = 10.0 * crate::fmath::log10(p0 / p1);
                if decay_db > MAX_DECAY_DB {
                    parts = crate::fmath::ceil((decay_db / MAX_DECAY_DB) * (t1_s - t0_s) / span)
                        .max(1.0) as usize;
                }
            }
        }
    }
    let step = (t1_s - t0_s) / parts as f64;
    for i in 0..parts {
        let a = t0_s + i as f64 * step;
        let b = if i + 1 == parts { t1_s } else { a + step };
        chunks.push(Chunk {
            t0_s: a,
            t1_s: b,
            bound_hz: model.max_rate_hz(a, b, max_pol),
        });
    }
}

/// Builds and runs an acquisition in one call.
pub fn simulate_acquisition(header: AcquisitionHeader) -> Result<PhotonEventStream, SimulationError> {
    Acquisition::new(header)?.run()
}
