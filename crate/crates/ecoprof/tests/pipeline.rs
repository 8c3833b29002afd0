//! Cross-module pipeline tests: full-session orchestration against
//! hand-chained arithmetic, refinement behavior of the integrator, and
//! sampler-source sessions.

use ecoprof::hardware::{thermal_flags, HardwareProfile};
use ecoprof::metrics::{carbon_emissions, effective_parameters, ess, integrate_energy,
    quantization_factor, EmissionEstimate, EnergyQuantity, Precision, QuantizationSpec};
use ecoprof::region::lookup;
use ecoprof::report::{run_session, SessionConfig, SessionSource};
use ecoprof::sampling::{collect, SamplerSpec, SyntheticProfile, TraceSource};
use ecoprof::{water_footprint, PowerTrace};

fn assert_rel(actual: f64, expected: f64, rel: f64, what: &str) {
    let denom = expected.abs().max(1e-300);
    assert!(
        (actual - expected).abs() / denom <= rel,
        "{what}: expected {expected}, got {actual}"
    );
}

fn bursty_spec(seed: u64) -> SamplerSpec {
    SamplerSpec::Synthetic {
        profile: SyntheticProfile::Bursty {
            base_w: 20.0,
            burst_w: 200.0,
            burst_ms: 200.0,
            period_ms: 1000.0,
        },
        seed,
    }
}

#[test]
fn session_matches_hand_chained_operations() {
    let mut trace = collect(&bursty_spec(11), 60.0, 10.0).unwrap();
    // Heat the GPU over the limit for a stretch so the thermal path is
    // part of the comparison.
    for sample in trace.samples[100..300].iter_mut() {
        sample.gpu_temp_c = Some(88.0);
    }

    let mut config = SessionConfig::new(
        SessionSource::Trace(trace.clone()),
        13_000_000_000,
        QuantizationSpec::uniform(Precision::Fp16, 13_000_000_000),
    );
    config.device_descriptor = "NVIDIA A100-SXM4-40GB".into();
    config.region_override = Some("DE".into());
    config.sample_count = 480;
    let report = run_session(&config).unwrap();

    // Hand-chain the same pipeline from the public operations.
    let hardware = HardwareProfile::for_descriptor("NVIDIA A100-SXM4-40GB");
    let region = lookup("DE").unwrap();
    let measured = integrate_energy(&trace).unwrap();
    let thermal = thermal_flags(&trace, &hardware);
    let total = EnergyQuantity::new(measured.kwh() + thermal.cooling_energy_adjustment_kwh).unwrap();
    let emission = carbon_emissions(total, region.carbon_intensity, hardware.pue).unwrap();
    let duration_h = trace.duration_s() / 3600.0;
    let water = water_footprint(
        measured.kwh() / duration_h,
        duration_h,
        &region,
        hardware.cooling_overhead,
        hardware.infra_overhead,
    )
    .unwrap();
    let qf = quantization_factor(&config.quantization).unwrap();
    let effective = effective_parameters(config.model_params, qf).unwrap();
    let per_g = emission.co2_g / config.sample_count as f64;
    let score = ess(
        &effective,
        &EmissionEstimate {
            co2_kg: per_g / 1000.0,
            co2_g: per_g,
            carbon_intensity: region.carbon_intensity,
            pue: hardware.pue,
        },
    )
    .unwrap();

    assert!(!thermal.flagged_intervals.is_empty());
    assert_rel(report.totals.energy_kwh, total.kwh(), 1e-9, "energy");
    assert_rel(report.totals.co2_g, emission.co2_g, 1e-9, "co2");
    assert_rel(report.totals.water_l, water.liters, 1e-9, "water");
    assert_rel(
        report.thermal.cooling_energy_adjustment_kwh,
        thermal.cooling_energy_adjustment_kwh,
        1e-9,
        "thermal adjustment",
    );
    assert_rel(report.effective_params_m, effective.millions, 1e-12, "effective params");
    assert_rel(
        report.ess.unwrap().mp_per_g(),
        score.mp_per_g(),
        1e-9,
        "sustainability score",
    );
}

#[test]
fn sampler_source_equals_trace_source() {
    let spec = bursty_spec(29);
    let trace = collect(&spec, 30.0, 5.0).unwrap();

    let mut from_sampler = SessionConfig::new(
        SessionSource::Sampler { spec, duration_s: 30.0 },
        1_000_000_000,
        QuantizationSpec::uniform(Precision::Fp32, 1_000_000_000),
    );
    from_sampler.region_override = Some("US".into());
    let mut from_trace = from_sampler.clone();
    from_trace.source = SessionSource::Trace(trace);

    let a = run_session(&from_sampler).unwrap();
    let b = run_session(&from_trace).unwrap();
    assert_eq!(a, b);
}

#[test]
fn integration_error_shrinks_with_sampling_rate() {
    // Smooth profile with a known closed-form integral over [0, 60]:
    // mean * T + amp * (period / 2 pi) * (1 - cos(2 pi T / period)).
    let (mean, amp, period, span) = (50.0, 30.0, 7.3, 60.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let analytic_joules = mean * span + amp * (period / two_pi) * (1.0 - (two_pi * span / period).cos());
    let analytic_kwh = analytic_joules / 3.6e6;

    let profile = SyntheticProfile::Sine { mean_w: mean, amplitude_w: amp, period_s: period };
    let mut last_error = f64::INFINITY;
    for rate in [1.0, 2.0, 5.0, 100.0] {
        let spec = SamplerSpec::Synthetic { profile: profile.clone(), seed: 0 };
        let trace = collect(&spec, span, rate).unwrap();
        let error = (integrate_energy(&trace).unwrap().kwh() - analytic_kwh).abs();
        assert!(
            error <= last_error,
            "error grew from {last_error} to {error} at {rate} Hz"
        );
        last_error = error;
    }
}

#[test]
fn score_scales_with_quantization_factor_at_fixed_emissions() {
    // With one trace (fixed emissions), the score is proportional to the
    // quantization factor, so wider precisions rank higher.
    let trace = collect(&bursty_spec(5), 30.0, 5.0).unwrap();
    let mut scores = Vec::new();
    for precision in [Precision::Fp32, Precision::Fp16, Precision::Int8] {
        let mut config = SessionConfig::new(
            SessionSource::Trace(trace.clone()),
            7_000_000_000,
            QuantizationSpec::uniform(precision, 7_000_000_000),
        );
        config.region_override = Some("GLOBAL".into());
        let report = run_session(&config).unwrap();
        scores.push(report.ess.unwrap().mp_per_g());
    }
    assert!(scores[0] > scores[1] && scores[1] > scores[2]);
    assert_rel(scores[0] / scores[1], 2.0, 1e-9, "fp32/fp16 ratio");
    assert_rel(scores[1] / scores[2], 2.0, 1e-9, "fp16/int8 ratio");
}

#[test]
fn live_trace_feeds_the_pipeline() {
    struct FixedProbe;
    impl ecoprof::sampling::PowerProbe for FixedProbe {
        fn read(&mut self) -> ecoprof::Result<ecoprof::sampling::ProbeReading> {
            Ok(ecoprof::sampling::ProbeReading {
                power_w: 80.0,
                gpu_temp_c: Some(65.0),
                cpu_temp_c: Some(55.0),
            })
        }
    }
    let trace = ecoprof::sampling::collect_live(&mut FixedProbe, 0.05, 100.0, false).unwrap();
    assert_eq!(trace.source, TraceSource::Live);
    let mut config = SessionConfig::new(
        SessionSource::Trace(trace),
        1_000_000,
        QuantizationSpec::uniform(Precision::Fp32, 1_000_000),
    );
    config.region_override = Some("IS".into());
    let report = run_session(&config).unwrap();
    assert!(report.totals.energy_kwh > 0.0);
    assert!(report.thermal.flagged_intervals.is_empty());
}

#[test]
fn replayed_csv_reproduces_synthetic_session() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.csv");
    let spec = SamplerSpec::Synthetic {
        profile: SyntheticProfile::Sine { mean_w: 50.0, amplitude_w: 50.0, period_s: 600.0 },
        seed: 0,
    };
    let original = collect(&spec, 120.0, 5.0).unwrap();
    original.write_csv_path(&path).unwrap();
    let replayed = PowerTrace::from_csv_path(&path).unwrap();
    assert_eq!(replayed.samples, original.samples);

    let mut config = SessionConfig::new(
        SessionSource::Trace(original),
        2_000_000_000,
        QuantizationSpec::uniform(Precision::Int8, 2_000_000_000),
    );
    config.region_override = Some("FR".into());
    let mut replay_config = config.clone();
    replay_config.source = SessionSource::Trace(replayed);

    let a = run_session(&config).unwrap();
    let b = run_session(&replay_config).unwrap();
    assert_eq!(a, b);
}
