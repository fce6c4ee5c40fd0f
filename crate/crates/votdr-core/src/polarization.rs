//! Polarization fading of the backscattered light.
//!
//! The detection chain is polarization sensitive, so the detected fraction of
//! the backscatter depends on the relative angle between the returning state
//! of polarization and the detector axis. Along the fiber that angle executes
//! a random walk, producing the slow amplitude ripple seen on real traces.

use crate::fmath;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Number of grid points per correlation length of the phase walk.
const GRID_POINTS_PER_CORRELATION_LENGTH: f64 = 10.0;

/// One frozen realization of the polarization angle along the fiber.
///
/// The phase `phi(z)` is a piecewise-linear random walk sampled on a grid of
/// step `correlation_length / 10`; the detected fraction at distance `z` is
/// `(1 + visibility * cos(phi(z))) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationTrack {
    step_m: f64,
    visibility: f64,
    phases: Vec<f64>,
}

impl PolarizationTrack {
    /// Draws a track covering `[0, total_length_m]`.
    ///
    /// The per-step phase variance is chosen so that the autocorrelation of
    /// `cos(phi)` decays by `1/e` over one correlation length: a Wiener phase
    /// gives `E[cos(dphi)] = exp(-var/2)`, so the variance accumulated over
    /// `correlation_length_m` must be 2.
    pub fn sample<R: Rng + ?Sized>(
        total_length_m: f64,
        correlation_length_m: f64,
        visibility: f64,
        rng: &mut R,
    ) -> Self {
        debug_assert!(total_length_m > 0.0);
        debug_assert!(correlation_length_m > 0.0);
        debug_assert!((0.0..=1.0).contains(&visibility));
        let step_m = correlation_length_m / GRID_POINTS_PER_CORRELATION_LENGTH;
        let n_points = (fmath::ceil(total_length_m / step_m) as usize).max(1) + 1;
        let step_sigma = fmath::sqrt(2.0 / GRID_POINTS_PER_CORRELATION_LENGTH);
        let walk = Normal::new(0.0, step_sigma).expect("finite sigma");
        let mut phases = Vec::with_capacity(n_points);
        let mut phi = rng.random_range(0.0..core::f64::consts::TAU);
        phases.push(phi);
        for _ in 1..n_points {
            phi += walk.sample(rng);
            phases.push(phi);
        }
        Self {
            step_m,
            visibility,
            phases,
        }
    }

    /// Detected fraction at distance `z`, in `[(1 - v)/2, (1 + v)/2]`.
    ///
    /// Positions outside the sampled range clamp to the nearest end.
    pub fn factor(&self, z_m: f64) -> f64 {
        let max_index = (self.phases.len() - 1) as f64;
        let pos = (z_m / self.step_m).clamp(0.0, max_index);
        let lo = fmath::floor(pos) as usize;
        let hi = (lo + 1).min(self.phases.len() - 1);
        let frac = pos - lo as f64;
        let phi = self.phases[lo] * (1.0 - frac) + self.phases[hi] * frac;
        0.5 * (1.0 + self.visibility * fmath::cos(phi))
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// Largest value `factor` can take.
    pub fn max_factor(&self) -> f64 {
        0.5 * (1.0 + self.visibility)
    }
}

/// Polarization state assumed when evaluating detection rates.
#[derive(Debug, Clone, Copy)]
pub enum PolarizationState<'a> {
    /// Polarization-independent detection: the full optical signal counts.
    Unpolarized,
    /// Polarization-sensitive detection against a frozen fading track.
    Faded(&'a PolarizationTrack),
}

impl PolarizationState<'_> {
    /// Detected fraction of the optical signal returning from distance `z`.
    pub fn factor(&self, z_m: f64) -> f64 {
        match self {
            Self::Unpolarized => 1.0,
            Self::Faded(track) => track.factor(z_m),
        }
    }

    /// Upper bound of `factor` over all distances.
    pub fn max_factor(&self) -> f64 {
        match self {
            Self::Unpolarized => 1.0,
            Self::Faded(track) => track.max_factor(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factor_stays_within_visibility_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let track = PolarizationTrack::sample(20_000.0, 5_000.0, 0.9, &mut rng);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=4000 {
            let z = i as f64 * 5.0;
            let f = track.factor(z);
            assert!((0.05..=0.95).contains(&f), "factor {f} escaped the band");
            lo = lo.min(f);
            hi = hi.max(f);
        }
        // A 4-correlation-length stretch should actually explore the band.
        assert!(hi - lo > 0.3, "track barely moved: [{lo}, {hi}]");
    }

    #[test]
    fn zero_visibility_pins_factor_at_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let track = PolarizationTrack::sample(1_000.0, 500.0, 0.0, &mut rng);
        for i in 0..=100 {
            assert_eq!(track.factor(i as f64 * 10.0), 0.5);
        }
    }

    #[test]
    fn correlation_decays_near_one_over_e_per_correlation_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let lc = 100.0;
        let track = PolarizationTrack::sample(2_000_000.0, lc, 1.0, &mut rng);
        // E[cos(phi(z+lc) - phi(z))] should be close to exp(-1).
        let mut acc = 0.0;
        let n = 15_000;
        for i in 0..n {
            let z = i as f64 * lc;
            let a = 2.0 * track.factor(z) - 1.0;
            let b = 2.0 * track.factor(z + lc) - 1.0;
            acc += a * b;
        }
        // E[cos a cos b] = E[cos(a-b)]/2 for a uniform common phase.
        let correlation = 2.0 * acc / n as f64;
        let expected = (-1.0_f64).exp();
        assert!(
            (correlation - expected).abs() < 0.05,
            "correlation {correlation} vs expected {expected}"
        );
    }

    #[test]
    fn unpolarized_state_passes_everything() {
        assert_eq!(PolarizationState::Unpolarized.factor(123.0), 1.0);
        assert_eq!(PolarizationState::Unpolarized.max_factor(), 1.0);
    }

    #[test]
    fn factor_clamps_beyond_track_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let track = PolarizationTrack::sample(100.0, 50.0, 0.9, &mut rng);
        assert_eq!(track.factor(1e9), track.factor(1e12));
        assert_eq!(track.factor(-5.0), track.factor(0.0));
    }
}
