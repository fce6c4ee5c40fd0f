//! Core engine for a photon-counting optical time-domain reflectometer.
//!
//! The crate models a fiber link probed by short laser pulses and a
//! single-photon detector that time-tags individual detection events. It is
//! split into four layers:
//!
//! * [`model`] holds the validated description of the link and instrument:
//!   fiber segments, point events (splices, connectors), laser, detector and
//!   gating schedule.
//! * [`physics`] provides the closed-form quantities derived from that
//!   description: round-trip time, repetition-rate ceiling, noise equivalent
//!   power, resolution limits and the expected detection rate as a function
//!   of delay.
//! * [`simulator`] draws time-tagged photon events from the expected rate via
//!   Poisson thinning and applies the detector artifacts (gating, dead time,
//!   timing jitter, polarization fading) in the order the hardware does.
//! * [`analysis`] turns event streams back into traces: histogramming,
//!   dead-time correction, logarithmic scaling, two-step trace stitching,
//!   attenuation fits, noise floors and event detection.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature and enable `libm` for float math on bare targets. All
//! randomness flows through caller-provided seeds, and simulation output is
//! bit-identical for a given seed regardless of how work is scheduled.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("votdr-core requires either the `std` or the `libm` feature");

mod fmath;

pub mod analysis;
pub mod model;
pub mod physics;
pub mod polarization;
pub mod simulator;
