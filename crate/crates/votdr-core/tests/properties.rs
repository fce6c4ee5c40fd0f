//! Randomized invariants over the model, sampler and analysis operations.

use proptest::prelude::*;
use votdr_core::analysis::{
    dead_time_correction, fit_attenuation, stitch_traces, to_log_trace, N0Strategy, Trace,
    TraceBin,
};
use votdr_core::model::{
    DeadTimeMode, DetectorConfig, FiberPlan, GateSchedule, LaserConfig,
};
use votdr_core::physics::{
    db_to_linear, linear_to_db, max_repetition_rate, noise_equivalent_power, round_trip_time,
    RateModel,
};
use votdr_core::polarization::{PolarizationState, PolarizationTrack};
use votdr_core::simulator::{
    apply_dead_time, apply_gate, apply_jitter, domain_rng, sample_inhomogeneous_poisson,
};

fn test_laser() -> LaserConfig {
    LaserConfig {
        wavelength_m: 1550e-9,
        peak_power_dbm: -30.0,
        pulse_width_s: 100e-9,
        repetition_rate_hz: 1_000.0,
        extinction_ratio_db: None,
    }
}

fn test_detector() -> DetectorConfig {
    DetectorConfig {
        efficiency: 0.15,
        dark_rate_hz: 100.0,
        dead_time_s: 0.0,
        dead_time_mode: DeadTimeMode::NonParalyzable,
        jitter_sigma_s: 0.0,
        polarization_visibility: 0.0,
        polarization_correlation_length_m: 1_000.0,
    }
}

/// A trace built from explicit per-bin probabilities.
fn trace_from(probs: &[f64], bin_width_ps: u64) -> Trace {
    Trace {
        bin_width_ps,
        origin_delay_s: 0.0,
        n_pulses: 1_000,
        bins: probs
            .iter()
            .map(|&p| TraceBin {
                counts: if p > 0.0 { 1 } else { 0 },
                prob_per_pulse: p,
                corrected_prob: p,
                saturated: false,
            })
            .collect(),
    }
}

fn sorted_times(max_len: usize, span_s: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..span_s, 0..max_len).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decibel_conversions_are_homomorphic(a in -100.0..100.0f64, b in -100.0..100.0f64) {
        let combined = db_to_linear(a + b);
        let product = db_to_linear(a) * db_to_linear(b);
        prop_assert!((combined / product - 1.0).abs() < 1e-12);
        prop_assert!((linear_to_db(db_to_linear(a)) - a).abs() < 1e-9);
    }

    #[test]
    fn round_trip_time_and_repetition_limit_are_inverses(
        length_m in 1.0..1e6f64,
        group_index in 1.1..1.9f64,
    ) {
        let rtt = round_trip_time(length_m, group_index).unwrap();
        let limit = max_repetition_rate(length_m, group_index).unwrap();
        prop_assert!((rtt * limit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detector_noise_floor_is_monotone(
        dark_a in 1.0..1e7f64,
        dark_b in 1.0..1e7f64,
        eff_a in 0.01..1.0f64,
        eff_b in 0.01..1.0f64,
        wavelength_m in 0.4e-6..2.0e-6f64,
    ) {
        let (lo, hi) = if dark_a <= dark_b { (dark_a, dark_b) } else { (dark_b, dark_a) };
        let n_lo = noise_equivalent_power(lo, 0.5, wavelength_m).unwrap();
        let n_hi = noise_equivalent_power(hi, 0.5, wavelength_m).unwrap();
        prop_assert!(n_lo.watts_per_sqrt_hz <= n_hi.watts_per_sqrt_hz);

        let (elo, ehi) = if eff_a <= eff_b { (eff_a, eff_b) } else { (eff_b, eff_a) };
        let n_elo = noise_equivalent_power(1_000.0, elo, wavelength_m).unwrap();
        let n_ehi = noise_equivalent_power(1_000.0, ehi, wavelength_m).unwrap();
        prop_assert!(n_elo.watts_per_sqrt_hz >= n_ehi.watts_per_sqrt_hz);
    }

    #[test]
    fn backscatter_rate_never_rises_along_a_plain_fiber(
        length_m in 100.0..100_000.0f64,
        alpha in 0.1..1.0f64,
        t_frac_a in 0.0..1.0f64,
        t_frac_b in 0.0..1.0f64,
    ) {
        let plan = FiberPlan::uniform(length_m, alpha, None).unwrap();
        let model = RateModel::new(&plan, &test_laser(), &test_detector()).unwrap();
        let span = model.total_delay_s();
        let (ta, tb) = if t_frac_a <= t_frac_b {
            (t_frac_a * span, t_frac_b * span)
        } else {
            (t_frac_b * span, t_frac_a * span)
        };
        let ra = model.rate_hz(ta, PolarizationState::Unpolarized);
        let rb = model.rate_hz(tb, PolarizationState::Unpolarized);
        prop_assert!(rb <= ra * (1.0 + 1e-12), "rate rose from {ra} to {rb}");
    }

    #[test]
    fn expected_counts_add_over_adjacent_intervals(
        length_m in 100.0..50_000.0f64,
        alpha in 0.1..1.0f64,
        cut_a in 0.0..1.0f64,
        cut_b in 0.0..1.0f64,
    ) {
        let plan = FiberPlan::uniform(length_m, alpha, Some(-40.0)).unwrap();
        let model = RateModel::new(&plan, &test_laser(), &test_detector()).unwrap();
        let span = 1.2 * model.total_delay_s();
        let (t1, t2) = if cut_a <= cut_b {
            (cut_a * span, cut_b * span)
        } else {
            (cut_b * span, cut_a * span)
        };
        let whole = model.expected_counts(0.0, span, 0.5);
        let parts = model.expected_counts(0.0, t1, 0.5)
            + model.expected_counts(t1, t2, 0.5)
            + model.expected_counts(t2, span, 0.5);
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1e-30));
    }

    #[test]
    fn fading_factor_stays_inside_the_visibility_band(
        visibility in 0.0..1.0f64,
        corr_m in 10.0..10_000.0f64,
        z in 0.0..30_000.0f64,
        seed in any::<u64>(),
    ) {
        let mut rng = domain_rng(seed, 3, 0);
        let track = PolarizationTrack::sample(20_000.0, corr_m, visibility, &mut rng);
        let f = track.factor(z);
        let lo = 0.5 * (1.0 - visibility) - 1e-12;
        let hi = 0.5 * (1.0 + visibility) + 1e-12;
        prop_assert!(f >= lo && f <= hi, "factor {f} outside [{lo}, {hi}]");
        prop_assert!(track.max_factor() >= f - 1e-12);
    }

    #[test]
    fn dead_time_output_keeps_the_minimum_gap(
        times in sorted_times(200, 1e-4),
        dead_us in 0.01..10.0f64,
    ) {
        let dead_s = dead_us * 1e-6;
        let kept = apply_dead_time(&times, dead_s, DeadTimeMode::NonParalyzable).unwrap();
        for pair in kept.windows(2) {
            prop_assert!(pair[1] - pair[0] >= dead_s);
        }
        // Every kept event is one of the arrivals.
        let mut it = times.iter();
        for k in &kept {
            prop_assert!(it.any(|t| t == k));
        }

        // An extending dead window can only reject more.
        let kept_p = apply_dead_time(&times, dead_s, DeadTimeMode::Paralyzable).unwrap();
        let mut it = kept.iter();
        for k in &kept_p {
            prop_assert!(it.any(|t| t == k), "paralyzable kept {k} that non-paralyzable dropped");
        }
    }

    #[test]
    fn gating_removes_exactly_the_blanked_events(
        times in sorted_times(200, 1e-4),
        edges in prop::collection::vec(0.0..1e-4f64, 2..6),
    ) {
        let mut edges = edges;
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let windows: Vec<(f64, f64)> = edges.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        prop_assume!(windows.iter().all(|(a, b)| b > a));
        let gate = GateSchedule::new(windows).unwrap();
        let kept = apply_gate(&times, &gate);
        let expected: Vec<f64> = times.iter().copied().filter(|&t| !gate.is_off(t)).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn jitter_preserves_count_order_and_range(
        times in sorted_times(200, 1e-4),
        sigma_ps in 0.0..2_000.0f64,
        seed in any::<u64>(),
    ) {
        let period_s = 1e-4;
        let mut jittered = times.clone();
        let mut rng = domain_rng(seed, 4, 1);
        apply_jitter(&mut jittered, sigma_ps * 1e-12, period_s, &mut rng);
        prop_assert_eq!(jittered.len(), times.len());
        for pair in jittered.windows(2) {
            prop_assert!(pair[1] >= pair[0]);
        }
        for t in &jittered {
            prop_assert!((0.0..=period_s).contains(t));
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed(
        rate in 1.0..1e6f64,
        seed in any::<u64>(),
    ) {
        let draw = || {
            let mut rng = domain_rng(seed, 0, 42);
            sample_inhomogeneous_poisson(|_| rate, rate, 0.0, 1e-4, &mut rng).unwrap()
        };
        let a = draw();
        let b = draw();
        prop_assert_eq!(&a, &b);
        for t in &a {
            prop_assert!((0.0..1e-4).contains(t));
        }
        for pair in a.windows(2) {
            prop_assert!(pair[1] >= pair[0]);
        }
    }

    #[test]
    fn log_conversion_is_invariant_under_amplitude_scaling(
        probs in prop::collection::vec(1e-6..0.1f64, 20..100),
        scale in 1e-3..1e3f64,
    ) {
        let base = trace_from(&probs, 10_000);
        let scaled_probs: Vec<f64> = probs.iter().map(|p| p * scale).collect();
        let scaled = trace_from(&scaled_probs, 10_000);
        let log_a = to_log_trace(&base, N0Strategy::default(), 1.468).unwrap();
        let log_b = to_log_trace(&scaled, N0Strategy::default(), 1.468).unwrap();
        for (a, b) in log_a.values_db.iter().zip(&log_b.values_db) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn attenuation_fit_recovers_an_exact_line(
        slope in -10.0..10.0f64,
        intercept in -50.0..50.0f64,
    ) {
        let bin_width_ps = 10_000u64;
        let n = 200usize;
        let probe = trace_from(&vec![1.0; n], bin_width_ps);
        let log_probe = to_log_trace(&probe, N0Strategy::Explicit(1.0), 1.468).unwrap();
        let probs: Vec<f64> = (0..n)
            .map(|k| {
                let z_km = log_probe.distance_m(k) / 1_000.0;
                db_to_linear(2.0 * (intercept + slope * z_km))
            })
            .collect();
        let trace = trace_from(&probs, bin_width_ps);
        let log = to_log_trace(&trace, N0Strategy::Explicit(1.0), 1.468).unwrap();
        let span = log.distance_m(n - 1) + 1.0;
        let fit = fit_attenuation(&log, (0.0, span), &[]).unwrap();
        prop_assert!((fit.slope_db_per_km - slope).abs() < 1e-6, "slope {}", fit.slope_db_per_km);
        prop_assert!((fit.intercept_db - intercept).abs() < 1e-6, "intercept {}", fit.intercept_db);
    }

    #[test]
    fn stitching_a_rescaled_copy_reproduces_step_one(
        probs in prop::collection::vec(0.01..0.1f64, 60..120),
        ratio in 1e-2..1e2f64,
    ) {
        let step1 = trace_from(&probs, 10_000);
        let attenuated: Vec<f64> = probs.iter().map(|p| p / ratio).collect();
        let step2 = trace_from(&attenuated, 10_000);
        let span_m = 1.0211e-1 * probs.len() as f64 * 10.0; // ~1.02 m per bin
        let overlap = (0.3 * span_m, 0.7 * span_m);
        let stitched = stitch_traces(&step1, &step2, overlap, 1.468).unwrap();
        prop_assert!((stitched.scale / ratio - 1.0).abs() < 1e-12);
        for (a, b) in stitched.trace.bins.iter().zip(&step1.bins) {
            prop_assert!((a.corrected_prob / b.corrected_prob - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_time_correction_never_lowers_a_bin(
        probs in prop::collection::vec(0.0..0.005f64, 10..200),
        window_bins in 0usize..20,
    ) {
        let trace = trace_from(&probs, 20_000);
        let window_s = window_bins as f64 * 20e-9;
        let corrected = dead_time_correction(&trace, window_s).unwrap();
        for (raw, fixed) in trace.bins.iter().zip(&corrected.bins) {
            prop_assert!(!fixed.saturated);
            prop_assert!(fixed.corrected_prob >= raw.prob_per_pulse);
            if window_bins == 0 {
                prop_assert_eq!(fixed.corrected_prob, raw.prob_per_pulse);
            }
        }
    }
}
