//! Core environmental cost formulas: carbon, energy integration, water,
//! effective parameters, the sustainability score, and quantization
//! savings projections.
//!
//! Every operation here is a pure function of its inputs. Units are fixed
//! at the type boundary: energy in kWh, power in W (traces) or kW (water),
//! durations in seconds or hours as named, emissions in kg/g CO2, water in
//! liters.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sampling::PowerTrace;

/// Joules per kilowatt-hour.
pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Non-negative energy amount in kilowatt-hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyQuantity {
    kilowatt_hours: f64,
}

impl EnergyQuantity {
    pub fn new(kilowatt_hours: f64) -> Result<Self> {
        if !kilowatt_hours.is_finite() || kilowatt_hours < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "energy must be a finite non-negative kWh value, got {kilowatt_hours}"
            )));
        }
        Ok(Self { kilowatt_hours })
    }

    pub fn kwh(&self) -> f64 {
        self.kilowatt_hours
    }
}

/// Carbon emission estimate with the factors that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionEstimate {
    pub co2_kg: f64,
    pub co2_g: f64,
    /// Grid carbon intensity used, kg CO2 per kWh.
    pub carbon_intensity: f64,
    /// Power usage effectiveness multiplier, >= 1.
    pub pue: f64,
}

/// Water consumption estimate with the factors that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterEstimate {
    pub liters: f64,
    /// Regional water intensity, L per kWh.
    pub water_intensity: f64,
    pub cooling_overhead: f64,
    pub infra_overhead: f64,
}

/// Numeric precision of model weights during inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fp32,
    Fp16,
    Int8,
    Int4,
}

impl Precision {
    pub const ALL: [Precision; 4] = [
        Precision::Fp32,
        Precision::Fp16,
        Precision::Int8,
        Precision::Int4,
    ];

    /// Bit width of one weight at this precision.
    pub fn bits(self) -> u32 {
        match self {
            Precision::Fp32 => 32,
            Precision::Fp16 => 16,
            Precision::Int8 => 8,
            Precision::Int4 => 4,
        }
    }

    /// Bit-width scaling coefficient applied to raw parameter counts.
    ///
    /// FP32 is the 1.0 reference; the remaining values scale linearly with
    /// bit width. The INT4 entry extends the same linear rule.
    pub fn quantization_factor(self) -> f64 {
        match self {
            Precision::Fp32 => 1.0,
            Precision::Fp16 => 0.5,
            Precision::Int8 => 0.25,
            Precision::Int4 => 0.125,
        }
    }

    /// Configured percentage of measured power/energy saved by running at
    /// this precision instead of full precision.
    pub fn power_savings_pct(self) -> f64 {
        match self {
            Precision::Fp32 => 0.0,
            Precision::Fp16 => 25.0,
            Precision::Int8 => 55.0,
            Precision::Int4 => 75.0,
        }
    }

    /// [`Self::power_savings_pct`] as a fraction.
    pub fn power_savings_factor(self) -> f64 {
        self.power_savings_pct() / 100.0
    }

    /// Reported accuracy retention at this precision, percent. Carried as
    /// configuration metadata, never computed.
    pub fn accuracy_retention_pct(self) -> f64 {
        match self {
            Precision::Fp32 => 100.0,
            Precision::Fp16 => 98.5,
            Precision::Int8 => 94.2,
            Precision::Int4 => 87.8,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Precision::Fp32 => "fp32",
            Precision::Fp16 => "fp16",
            Precision::Int8 => "int8",
            Precision::Int4 => "int4",
        };
        f.write_str(s)
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" => Ok(Precision::Fp32),
            "fp16" => Ok(Precision::Fp16),
            "int8" => Ok(Precision::Int8),
            "int4" => Ok(Precision::Int4),
            other => Err(Error::InvalidParameter(format!(
                "unknown precision '{other}' (expected fp32, fp16, int8, or int4)"
            ))),
        }
    }
}

/// One layer of a model: how many parameters it holds and at what precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub param_count: u64,
    pub precision: Precision,
}

/// Per-layer parameter counts and precisions for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub layers: Vec<LayerSpec>,
}

impl QuantizationSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// Single-layer spec: the whole model at one precision.
    pub fn uniform(precision: Precision, param_count: u64) -> Self {
        Self {
            layers: vec![LayerSpec {
                param_count,
                precision,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("layer list is empty".into()));
        }
        if self.layers.iter().any(|l| l.param_count == 0) {
            return Err(Error::InvalidSpec(
                "every layer must have a positive parameter count".into(),
            ));
        }
        Ok(())
    }

    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(|l| l.param_count).sum()
    }

    /// Highest-precision (widest bit-width) layer in the spec.
    pub fn baseline_precision(&self) -> Option<Precision> {
        self.layers.iter().map(|l| l.precision).max_by_key(|p| p.bits())
    }
}

/// Parameter count scaled by the quantization factor, in millions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub millions: f64,
    pub qf: f64,
}

/// Million effective parameters served per gram of CO2 emitted.
/// Higher is more sustainable. Always positive; an undefined score is an
/// error, never a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SustainabilityScore {
    ess: f64,
}

impl SustainabilityScore {
    pub fn new(ess: f64) -> Result<Self> {
        if !ess.is_finite() || ess <= 0.0 {
            return Err(Error::UndefinedScore(format!(
                "score must be a finite positive value, got {ess}"
            )));
        }
        Ok(Self { ess })
    }

    pub fn mp_per_g(&self) -> f64 {
        self.ess
    }
}

/// Projected energy/water savings from running at a lower precision.
///
/// Estimated values come from configured savings factors, not from
/// executing quantized inference. `accuracy_retention_pct` is reported
/// configuration metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationProjection {
    pub precision: Precision,
    pub estimated_energy_kwh: f64,
    pub energy_savings_pct: f64,
    pub estimated_water_l: f64,
    pub water_savings_pct: f64,
    pub accuracy_retention_pct: f64,
    /// True when the water figure is extrapolated from the energy factor
    /// rather than backed by a configured water entry.
    pub water_savings_extrapolated: bool,
}

/// Carbon emissions for a measured energy amount.
///
/// co2_kg = energy_kwh * carbon_intensity * pue, with co2_g kept exactly
/// 1000x the kg figure.
pub fn carbon_emissions(
    energy: EnergyQuantity,
    carbon_intensity: f64,
    pue: f64,
) -> Result<EmissionEstimate> {
    if !carbon_intensity.is_finite() || carbon_intensity <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "carbon intensity must be positive kg CO2/kWh, got {carbon_intensity}"
        )));
    }
    if !pue.is_finite() || pue < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "PUE must be >= 1.0, got {pue}"
        )));
    }
    let co2_kg = energy.kwh() * carbon_intensity * pue;
    Ok(EmissionEstimate {
        co2_kg,
        co2_g: co2_kg * 1000.0,
        carbon_intensity,
        pue,
    })
}

/// Trapezoidal integral of a power trace, in kWh.
///
/// Power samples are watts against timestamps in seconds, so the raw
/// integral is in joules and the result divides by 3.6e6.
pub fn integrate_energy(trace: &PowerTrace) -> Result<EnergyQuantity> {
    let samples = &trace.samples;
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "integration requires at least 2 samples, trace has {}",
            samples.len()
        )));
    }
    // Neumaier-compensated summation keeps long traces exact to a few ulp.
    let mut joules = 0.0;
    let mut compensation = 0.0;
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.timestamp_s <= a.timestamp_s {
            return Err(Error::MalformedTrace(format!(
                "timestamps must be strictly increasing ({} then {})",
                a.timestamp_s, b.timestamp_s
            )));
        }
        if a.power_w < 0.0 || b.power_w < 0.0 {
            return Err(Error::MalformedTrace(
                "negative power sample in trace".into(),
            ));
        }
        let term = 0.5 * (a.power_w + b.power_w) * (b.timestamp_s - a.timestamp_s);
        let updated = joules + term;
        compensation += if joules.abs() >= term.abs() {
            (joules - updated) + term
        } else {
            (term - updated) + joules
        };
        joules = updated;
    }
    EnergyQuantity::new((joules + compensation) / JOULES_PER_KWH)
}

/// Water footprint of a session.
///
/// liters = avg_power_kw * duration_h * water_intensity * cooling_overhead
/// * infra_overhead, with the region supplying the intensity coefficient.
pub fn water_footprint(
    avg_power_kw: f64,
    duration_h: f64,
    region: &crate::region::RegionProfile,
    cooling_overhead: f64,
    infra_overhead: f64,
) -> Result<WaterEstimate> {
    if !avg_power_kw.is_finite() || avg_power_kw < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "average power must be non-negative kW, got {avg_power_kw}"
        )));
    }
    if !duration_h.is_finite() || duration_h < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "duration must be non-negative hours, got {duration_h}"
        )));
    }
    if !(1.0..=1.4).contains(&cooling_overhead) {
        return Err(Error::InvalidParameter(format!(
            "cooling overhead must lie in [1.0, 1.4], got {cooling_overhead}"
        )));
    }
    if !(1.0..=1.2).contains(&infra_overhead) {
        return Err(Error::InvalidParameter(format!(
            "infrastructure overhead must lie in [1.0, 1.2], got {infra_overhead}"
        )));
    }
    let liters =
        avg_power_kw * duration_h * region.water_intensity * cooling_overhead * infra_overhead;
    Ok(WaterEstimate {
        liters,
        water_intensity: region.water_intensity,
        cooling_overhead,
        infra_overhead,
    })
}

/// Parameter-count-weighted average quantization factor across layers.
pub fn quantization_factor(spec: &QuantizationSpec) -> Result<f64> {
    spec.validate()?;
    let total: u64 = spec.total_params();
    let weighted: f64 = spec
        .layers
        .iter()
        .map(|l| l.param_count as f64 * l.precision.quantization_factor())
        .sum();
    Ok(weighted / total as f64)
}

/// Effective parameter count in millions: total * qf / 1e6.
pub fn effective_parameters(total_params: u64, qf: f64) -> Result<EffectiveParams> {
    if total_params == 0 {
        return Err(Error::InvalidParameter(
            "total parameter count must be positive".into(),
        ));
    }
    if !qf.is_finite() || qf <= 0.0 || qf > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "quantization factor must lie in (0, 1], got {qf}"
        )));
    }
    Ok(EffectiveParams {
        millions: total_params as f64 * qf / 1e6,
        qf,
    })
}

/// Sustainability score: million effective parameters per gram of CO2.
///
/// Emissions of exactly zero grams make the score undefined and return an
/// error; infinity is never produced.
pub fn ess(effective: &EffectiveParams, emissions: &EmissionEstimate) -> Result<SustainabilityScore> {
    if emissions.co2_g <= 0.0 {
        return Err(Error::UndefinedScore(format!(
            "emissions are {} g; the score requires positive emissions",
            emissions.co2_g
        )));
    }
    SustainabilityScore::new(effective.millions / emissions.co2_g)
}

/// Projected savings from running the measured workload at `target`.
///
/// Estimated energy is measured * (1 - factor). The reported percentages
/// are the configured table values; recomputing them from the estimated
/// figures recovers the same numbers to float precision.
pub fn quantization_projection(
    measured_energy: EnergyQuantity,
    baseline_water_l: f64,
    target: Precision,
) -> Result<QuantizationProjection> {
    if !baseline_water_l.is_finite() || baseline_water_l < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "baseline water must be non-negative liters, got {baseline_water_l}"
        )));
    }
    let factor = target.power_savings_factor();
    Ok(QuantizationProjection {
        precision: target,
        estimated_energy_kwh: measured_energy.kwh() * (1.0 - factor),
        energy_savings_pct: target.power_savings_pct(),
        estimated_water_l: baseline_water_l * (1.0 - factor),
        water_savings_pct: target.power_savings_pct(),
        accuracy_retention_pct: target.accuracy_retention_pct(),
        // Only INT4 lacks a configured water entry; its water projection
        // reuses the energy factor.
        water_savings_extrapolated: target == Precision::Int4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::RegionProfile;
    use crate::sampling::{PowerSample, PowerTrace, TraceSource};

    fn region(wi: f64) -> RegionProfile {
        RegionProfile {
            region_id: "TEST".into(),
            display_name: "Test".into(),
            water_intensity: wi,
            carbon_intensity: 0.4,
            provenance: "test fixture".into(),
        }
    }

    fn trace_of(points: &[(f64, f64)]) -> PowerTrace {
        let samples = points
            .iter()
            .map(|&(t, w)| PowerSample::new(t, w))
            .collect();
        PowerTrace {
            samples,
            source: TraceSource::Synthetic,
        }
    }

    fn assert_rel(actual: f64, expected: f64, rel: f64) {
        let denom = expected.abs().max(1e-300);
        assert!(
            (actual - expected).abs() / denom <= rel,
            "expected {expected}, got {actual}"
        );
    }

    #[test]
    fn carbon_direct_formula() {
        let e = EnergyQuantity::new(1.0).unwrap();
        let est = carbon_emissions(e, 0.5, 1.2).unwrap();
        assert_rel(est.co2_kg, 0.6, 1e-12);
        assert_eq!(est.co2_g, est.co2_kg * 1000.0);

        let est = carbon_emissions(EnergyQuantity::new(2.5).unwrap(), 0.4, 1.4).unwrap();
        assert_rel(est.co2_kg, 1.4, 1e-12);
    }

    #[test]
    fn carbon_zero_energy() {
        let est = carbon_emissions(EnergyQuantity::new(0.0).unwrap(), 0.4, 1.4).unwrap();
        assert_eq!(est.co2_kg, 0.0);
        assert_eq!(est.co2_g, 0.0);
    }

    #[test]
    fn carbon_rejects_bad_factors() {
        let e = EnergyQuantity::new(1.0).unwrap();
        assert!(carbon_emissions(e, 0.0, 1.2).is_err());
        assert!(carbon_emissions(e, -0.1, 1.2).is_err());
        assert!(carbon_emissions(e, 0.5, 0.99).is_err());
    }

    #[test]
    fn integrate_constant_power() {
        let t = trace_of(&[(0.0, 100.0), (1800.0, 100.0), (3600.0, 100.0)]);
        let e = integrate_energy(&t).unwrap();
        assert_rel(e.kwh(), 0.1, 1e-12);
    }

    #[test]
    fn integrate_linear_ramp_is_exact() {
        let t = trace_of(&[(0.0, 0.0), (3600.0, 100.0)]);
        let e = integrate_energy(&t).unwrap();
        assert_rel(e.kwh(), 0.05, 1e-12);
    }

    #[test]
    fn integrate_sine_against_analytic_integral() {
        // P(t) = 50 + 50 sin(2 pi t / 600) over 3600 s covers six whole
        // periods, so the sine term integrates to zero and the analytic
        // value is 50 W * 3600 s = 0.05 kWh.
        let rate = 5.0;
        let n = (3600.0 * rate) as usize + 1;
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                (t, 50.0 + 50.0 * (2.0 * std::f64::consts::PI * t / 600.0).sin())
            })
            .collect();
        let e = integrate_energy(&trace_of(&samples)).unwrap();
        assert_rel(e.kwh(), 0.05, 1e-3);
    }

    #[test]
    fn integrate_rejects_bad_traces() {
        assert!(matches!(
            integrate_energy(&trace_of(&[(0.0, 1.0)])),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            integrate_energy(&trace_of(&[(0.0, 1.0), (0.0, 2.0)])),
            Err(Error::MalformedTrace(_))
        ));
        assert!(matches!(
            integrate_energy(&trace_of(&[(1.0, 1.0), (0.5, 2.0)])),
            Err(Error::MalformedTrace(_))
        ));
        let mut t = trace_of(&[(0.0, 1.0), (1.0, 2.0)]);
        t.samples[1].power_w = -3.0;
        assert!(matches!(
            integrate_energy(&t),
            Err(Error::MalformedTrace(_))
        ));
    }

    #[test]
    fn water_direct_formula() {
        let w = water_footprint(0.3, 2.0, &region(1.8), 1.2, 1.1).unwrap();
        assert_rel(w.liters, 1.4256, 1e-12);
    }

    #[test]
    fn water_zero_power() {
        let w = water_footprint(0.0, 5.0, &region(4.8), 1.4, 1.2).unwrap();
        assert_eq!(w.liters, 0.0);
    }

    #[test]
    fn water_max_overheads_endpoint() {
        let w = water_footprint(1.0, 1.0, &region(4.8), 1.4, 1.2).unwrap();
        assert_rel(w.liters, 8.064, 1e-12);
    }

    #[test]
    fn water_rejects_out_of_range_overheads() {
        let r = region(2.0);
        assert!(water_footprint(1.0, 1.0, &r, 0.9, 1.0).is_err());
        assert!(water_footprint(1.0, 1.0, &r, 1.5, 1.0).is_err());
        assert!(water_footprint(1.0, 1.0, &r, 1.0, 1.3).is_err());
        assert!(water_footprint(-1.0, 1.0, &r, 1.0, 1.0).is_err());
    }

    #[test]
    fn qf_uniform_precisions() {
        let fp16 = QuantizationSpec::new(vec![
            LayerSpec { param_count: 10, precision: Precision::Fp16 },
            LayerSpec { param_count: 90, precision: Precision::Fp16 },
        ])
        .unwrap();
        assert_eq!(quantization_factor(&fp16).unwrap(), 0.5);

        let fp32 = QuantizationSpec::uniform(Precision::Fp32, 7);
        assert_eq!(quantization_factor(&fp32).unwrap(), 1.0);
    }

    #[test]
    fn qf_weighted_mixed() {
        let spec = QuantizationSpec::new(vec![
            LayerSpec { param_count: 500, precision: Precision::Fp32 },
            LayerSpec { param_count: 500, precision: Precision::Int8 },
        ])
        .unwrap();
        assert_rel(quantization_factor(&spec).unwrap(), 0.625, 1e-12);
    }

    #[test]
    fn qf_rejects_empty_spec() {
        let spec = QuantizationSpec { layers: vec![] };
        assert!(matches!(
            quantization_factor(&spec),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn effective_params_examples() {
        assert_rel(
            effective_parameters(7_000_000_000, 0.5).unwrap().millions,
            3500.0,
            1e-12,
        );
        assert_rel(effective_parameters(1_000_000, 1.0).unwrap().millions, 1.0, 1e-12);
        assert_rel(
            effective_parameters(4_000_000_000, 0.25).unwrap().millions,
            1000.0,
            1e-12,
        );
    }

    #[test]
    fn effective_params_rejects_bad_qf() {
        assert!(effective_parameters(100, 0.0).is_err());
        assert!(effective_parameters(100, 1.1).is_err());
        assert!(effective_parameters(0, 0.5).is_err());
    }

    #[test]
    fn ess_examples() {
        let eff = EffectiveParams { millions: 3500.0, qf: 0.5 };
        let em = EmissionEstimate { co2_kg: 0.016, co2_g: 16.0, carbon_intensity: 0.4, pue: 1.1 };
        assert_rel(ess(&eff, &em).unwrap().mp_per_g(), 218.75, 1e-12);

        let eff = EffectiveParams { millions: 100.0, qf: 1.0 };
        let em = EmissionEstimate { co2_kg: 0.1, co2_g: 100.0, carbon_intensity: 0.4, pue: 1.1 };
        assert_rel(ess(&eff, &em).unwrap().mp_per_g(), 1.0, 1e-12);
    }

    #[test]
    fn ess_zero_grams_is_error_not_infinity() {
        let eff = EffectiveParams { millions: 3500.0, qf: 0.5 };
        let em = EmissionEstimate { co2_kg: 0.0, co2_g: 0.0, carbon_intensity: 0.4, pue: 1.1 };
        assert!(matches!(ess(&eff, &em), Err(Error::UndefinedScore(_))));
    }

    #[test]
    fn projection_table_values() {
        let e = EnergyQuantity::new(1.0).unwrap();
        let p = quantization_projection(e, 2.0, Precision::Fp16).unwrap();
        assert_rel(p.estimated_energy_kwh, 0.75, 1e-12);
        assert_rel(p.energy_savings_pct, 25.0, 1e-12);
        assert_rel(p.accuracy_retention_pct, 98.5, 1e-12);
        assert!(!p.water_savings_extrapolated);

        let p = quantization_projection(e, 2.0, Precision::Int8).unwrap();
        assert_rel(p.energy_savings_pct, 55.0, 1e-12);
        assert_rel(p.accuracy_retention_pct, 94.2, 1e-12);

        let p = quantization_projection(e, 2.0, Precision::Fp32).unwrap();
        assert_eq!(p.energy_savings_pct, 0.0);
        assert_eq!(p.accuracy_retention_pct, 100.0);

        let p = quantization_projection(e, 2.0, Precision::Int4).unwrap();
        assert_rel(p.energy_savings_pct, 75.0, 1e-12);
        assert!(p.water_savings_extrapolated);
    }

    #[test]
    fn projection_never_exceeds_measured() {
        for precision in Precision::ALL {
            let e = EnergyQuantity::new(3.7).unwrap();
            let p = quantization_projection(e, 1.0, precision).unwrap();
            assert!(p.estimated_energy_kwh <= e.kwh());
        }
    }

    #[test]
    fn precision_parse_and_display() {
        for p in Precision::ALL {
            assert_eq!(p.to_string().parse::<Precision>().unwrap(), p);
        }
        assert!("fp64".parse::<Precision>().is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::sampling::{PowerSample, PowerTrace, TraceSource};
    use proptest::prelude::*;

    proptest! {
        // carbon_emissions(k * E) == k * carbon_emissions(E)
        #[test]
        fn carbon_is_linear_in_energy(e in 0.0f64..100.0, k in 0.0f64..50.0, ci in 0.01f64..1.5, pue in 1.0f64..1.8) {
            let base = carbon_emissions(EnergyQuantity::new(e).unwrap(), ci, pue).unwrap();
            let scaled = carbon_emissions(EnergyQuantity::new(k * e).unwrap(), ci, pue).unwrap();
            let expected = k * base.co2_kg;
            prop_assert!((scaled.co2_kg - expected).abs() <= 1e-9 * expected.abs().max(1e-12));
        }

        // Trapezoid is exact for a linear power profile on any grid.
        #[test]
        fn trapezoid_exact_for_linear_profiles(
            offsets in proptest::collection::vec(0.001f64..10.0, 1..40),
            w0 in 0.0f64..500.0,
            w1 in 0.0f64..500.0,
        ) {
            let mut ts = vec![0.0f64];
            for d in &offsets {
                ts.push(ts.last().unwrap() + d);
            }
            let span = *ts.last().unwrap();
            let samples: Vec<PowerSample> = ts
                .iter()
                .map(|&t| PowerSample::new(t, w0 + (w1 - w0) * t / span))
                .collect();
            let trace = PowerTrace { samples, source: TraceSource::Synthetic };
            let got = integrate_energy(&trace).unwrap().kwh();
            let expected = 0.5 * (w0 + w1) * span / JOULES_PER_KWH;
            prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1e-15));
        }

        // ess(k * effective) == k * ess(effective)
        #[test]
        fn ess_homogeneous_in_effective_params(m in 0.001f64..1e7, k in 0.001f64..1e3, g in 0.001f64..1e6) {
            let em = EmissionEstimate { co2_kg: g / 1000.0, co2_g: g, carbon_intensity: 0.4, pue: 1.1 };
            let base = ess(&EffectiveParams { millions: m, qf: 1.0 }, &em).unwrap().mp_per_g();
            let scaled = ess(&EffectiveParams { millions: k * m, qf: 1.0 }, &em).unwrap().mp_per_g();
            prop_assert!((scaled - k * base).abs() <= 1e-12 * (k * base).abs());
        }

        // Lowering any single layer's precision never increases the factor.
        #[test]
        fn qf_monotone_under_precision_downgrade(
            counts in proptest::collection::vec(1u64..1_000_000, 1..8),
            precs in proptest::collection::vec(0usize..4, 8),
            layer in 0usize..8,
        ) {
            let layers: Vec<LayerSpec> = counts
                .iter()
                .enumerate()
                .map(|(i, &c)| LayerSpec { param_count: c, precision: Precision::ALL[precs[i]] })
                .collect();
            let spec = QuantizationSpec::new(layers.clone()).unwrap();
            let before = quantization_factor(&spec).unwrap();

            let idx = layer % layers.len();
            let order = Precision::ALL;
            let pos = order.iter().position(|&p| p == layers[idx].precision).unwrap();
            if pos + 1 < order.len() {
                let mut lowered = layers;
                lowered[idx].precision = order[pos + 1];
                let after = quantization_factor(&QuantizationSpec::new(lowered).unwrap()).unwrap();
                prop_assert!(after <= before + 1e-15);
            }
        }

        // Water footprint strictly increases in each positive factor.
        #[test]
        fn water_monotone_in_each_factor(
            p in 0.1f64..10.0,
            h in 0.1f64..10.0,
            wi in 1.2f64..4.8,
            cool in 1.0f64..1.39,
            infra in 1.0f64..1.19,
        ) {
            let region = crate::region::RegionProfile {
                region_id: "T".into(),
                display_name: "T".into(),
                water_intensity: wi,
                carbon_intensity: 0.4,
                provenance: String::new(),
            };
            let base = water_footprint(p, h, &region, cool, infra).unwrap().liters;
            prop_assert!(water_footprint(p * 1.01, h, &region, cool, infra).unwrap().liters > base);
            prop_assert!(water_footprint(p, h * 1.01, &region, cool, infra).unwrap().liters > base);
            prop_assert!(water_footprint(p, h, &region, cool + 0.01, infra).unwrap().liters > base);
            prop_assert!(water_footprint(p, h, &region, cool, infra + 0.01).unwrap().liters > base);
        }

        // Savings percentages recovered from the projected energy match
        // the configured factors.
        #[test]
        fn savings_consistent_with_factors(kwh in 0.001f64..100.0, water in 0.001f64..100.0) {
            for precision in Precision::ALL {
                let p = quantization_projection(
                    EnergyQuantity::new(kwh).unwrap(),
                    water,
                    precision,
                ).unwrap();
                let expected = precision.power_savings_factor() * 100.0;
                let recovered_energy = 100.0 * (kwh - p.estimated_energy_kwh) / kwh;
                let recovered_water = 100.0 * (water - p.estimated_water_l) / water;
                prop_assert!((recovered_energy - expected).abs() <= 1e-12 * expected.max(1.0));
                prop_assert!((recovered_water - expected).abs() <= 1e-12 * expected.max(1.0));
                prop_assert_eq!(p.energy_savings_pct, precision.power_savings_pct());
                prop_assert_eq!(p.water_savings_pct, precision.power_savings_pct());
            }
        }
    }
}
