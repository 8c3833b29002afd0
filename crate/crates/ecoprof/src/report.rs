//! Session orchestration: run the full profiling pipeline over a trace,
//! normalize per inference, and emit versioned reports plus frontier
//! datasets.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hardware::{thermal_flags_with_factor, DeviceClass, HardwareProfile, ThermalFlagReport,
    DEFAULT_COOLING_ADJUSTMENT_FACTOR};
use crate::metrics::{carbon_emissions, effective_parameters, ess, integrate_energy,
    quantization_factor, quantization_projection, water_footprint, EmissionEstimate,
    EnergyQuantity, Precision, QuantizationProjection, QuantizationSpec, SustainabilityScore};
use crate::region::{detect_region, lookup, DetectionSignals, RegionProfile};
use crate::sampling::{collect, PowerTrace, SamplerSpec};

/// Version of the report JSON schema.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Collection rate used when a sampler source does not request one, Hz.
pub const DEFAULT_COLLECTION_RATE_HZ: f64 = 5.0;

/// Volume of one water bottle for practical-unit conversion, liters.
pub const BOTTLE_LITERS: f64 = 0.5;
/// Liters per US gallon.
pub const LITERS_PER_GALLON: f64 = 3.785411784;

/// Header of the frontier CSV emission.
pub const FRONTIER_CSV_HEADER: &str = "label,co2_kg_per_inference,ess_mp_per_g";

/// Header of the flat one-row-per-report CSV format.
pub const REPORT_CSV_HEADER: &str = "schema_version,label,total_energy_kwh,total_co2_kg,total_co2_g,total_water_l,duration_s,per_inference_energy_kwh,per_inference_co2_g,per_inference_water_l,ess_mp_per_g,effective_params_m,device_class,pue,cooling_overhead,infra_overhead,region_id,water_intensity_l_per_kwh,carbon_intensity_kg_per_kwh,flagged_intervals,cooling_energy_adjustment_kwh,sampling_rate_hz,trace_samples,sample_count,water_bottles,water_gallons";

/// Where a session's trace comes from.
#[derive(Debug, Clone)]
pub enum SessionSource {
    /// Collect from a sampler spec for a fixed duration.
    Sampler { spec: SamplerSpec, duration_s: f64 },
    /// Use an already-collected or replayed trace.
    Trace(PowerTrace),
}

/// Everything needed to run one profiling session.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Label used in reports and frontier datasets.
    pub label: String,
    pub source: SessionSource,
    /// Number of inferences performed during the session.
    pub sample_count: u64,
    pub device_descriptor: String,
    /// Fully specified region coefficients, bypassing the shipped table.
    pub region_profile: Option<RegionProfile>,
    /// Explicit region id; when absent the detection signals decide.
    pub region_override: Option<String>,
    pub detection_signals: DetectionSignals,
    /// Raw model parameter count.
    pub model_params: u64,
    pub quantization: QuantizationSpec,
    /// Collection rate for sampler sources, Hz.
    pub requested_rate_hz: Option<f64>,
    /// Descriptor-to-class rules checked before the built-in table.
    pub hardware_override_rules: Vec<(String, DeviceClass)>,
    /// Fraction of in-interval energy charged for hot thermal regimes.
    pub cooling_adjustment_factor: f64,
}

impl SessionConfig {
    pub fn new(source: SessionSource, model_params: u64, quantization: QuantizationSpec) -> Self {
        Self {
            label: "session".into(),
            source,
            sample_count: 1,
            device_descriptor: String::new(),
            region_profile: None,
            region_override: None,
            detection_signals: DetectionSignals::default(),
            model_params,
            quantization,
            requested_rate_hz: None,
            hardware_override_rules: Vec::new(),
            cooling_adjustment_factor: DEFAULT_COOLING_ADJUSTMENT_FACTOR,
        }
    }
}

/// Session-wide environmental totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy_kwh: f64,
    pub co2_kg: f64,
    pub co2_g: f64,
    pub water_l: f64,
    pub duration_s: f64,
}

/// Totals divided by the number of inferences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerInference {
    pub energy_kwh: f64,
    pub co2_g: f64,
    pub water_l: f64,
}

/// How the trace was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingInfo {
    /// Average achieved rate over the trace, Hz.
    pub rate_hz: f64,
    /// Number of samples in the trace.
    pub sample_count_trace: usize,
}

/// Water figures in everyday units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PracticalWater {
    pub bottles: f64,
    pub gallons: f64,
}

/// Complete per-inference environmental accounting for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub schema_version: u32,
    pub label: String,
    pub totals: Totals,
    pub per_inference: PerInference,
    /// Million effective parameters per gram of CO2, from the
    /// per-inference gram figure. Null when the session emitted zero
    /// grams; the reason lands in `warnings`.
    pub ess: Option<SustainabilityScore>,
    pub effective_params_m: f64,
    pub hardware: HardwareProfile,
    pub region: RegionProfile,
    pub thermal: ThermalFlagReport,
    pub projections: Vec<QuantizationProjection>,
    pub sampling: SamplingInfo,
    pub practical_water: PracticalWater,
    pub sample_count: u64,
    pub warnings: Vec<String>,
}

/// One point of the sustainability-vs-emissions frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub label: String,
    pub co2_kg_per_inference: f64,
    pub ess: f64,
}

/// Frontier points plus the count of reports excluded for lacking a
/// defined score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierDataset {
    pub points: Vec<FrontierPoint>,
    pub excluded: usize,
}

/// Output encodings for [`serialize_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParameter(format!(
                "unknown report format '{other}' (expected json or csv)"
            ))),
        }
    }
}

/// Run the full profiling pipeline for one session.
///
/// Steps: obtain the trace, classify hardware, resolve the region,
/// integrate energy, add the thermal cooling surcharge, convert to carbon
/// with the tier PUE, estimate water from average monitored power, derive
/// effective parameters and the sustainability score on per-inference
/// grams, project quantization savings for every precision below the
/// session baseline, and normalize totals by the inference count.
///
/// A session that emitted zero grams reports a null score with a warning
/// instead of failing.
pub fn run_session(config: &SessionConfig) -> Result<SessionReport> {
    if config.sample_count == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    if config.model_params == 0 {
        return Err(Error::InvalidParameter(
            "model parameter count must be at least 1".into(),
        ));
    }
    config.quantization.validate()?;

    let trace = match &config.source {
        SessionSource::Sampler { spec, duration_s } => {
            let rate = config
                .requested_rate_hz
                .unwrap_or(DEFAULT_COLLECTION_RATE_HZ);
            collect(spec, *duration_s, rate)?
        }
        SessionSource::Trace(trace) => trace.clone(),
    };

    let hardware = HardwareProfile::for_descriptor_with_rules(
        &config.device_descriptor,
        &config.hardware_override_rules,
    );
    let region = match &config.region_profile {
        Some(profile) => profile.clone(),
        None => {
            let region_id = match &config.region_override {
                Some(id) => id.clone(),
                None => detect_region(&config.detection_signals),
            };
            lookup(&region_id)?
        }
    };

    let measured = integrate_energy(&trace)?;
    let thermal = thermal_flags_with_factor(&trace, &hardware, config.cooling_adjustment_factor);
    let total_energy =
        EnergyQuantity::new(measured.kwh() + thermal.cooling_energy_adjustment_kwh)?;

    let emissions = carbon_emissions(total_energy, region.carbon_intensity, hardware.pue)?;

    let duration_s = trace.duration_s();
    let duration_h = duration_s / 3600.0;
    // The thermal surcharge feeds energy and carbon only; the water
    // pathway sees the monitored average power.
    let avg_power_kw = measured.kwh() / duration_h;
    let water = water_footprint(
        avg_power_kw,
        duration_h,
        &region,
        hardware.cooling_overhead,
        hardware.infra_overhead,
    )?;

    let qf = quantization_factor(&config.quantization)?;
    let effective = effective_parameters(config.model_params, qf)?;

    let n = config.sample_count as f64;
    let totals = Totals {
        energy_kwh: total_energy.kwh(),
        co2_kg: emissions.co2_kg,
        co2_g: emissions.co2_g,
        water_l: water.liters,
        duration_s,
    };
    let per_inference = PerInference {
        energy_kwh: totals.energy_kwh / n,
        co2_g: totals.co2_g / n,
        water_l: totals.water_l / n,
    };

    let mut warnings = Vec::new();
    let per_inference_emissions = EmissionEstimate {
        co2_kg: per_inference.co2_g / 1000.0,
        co2_g: per_inference.co2_g,
        carbon_intensity: region.carbon_intensity,
        pue: hardware.pue,
    };
    let score = match ess(&effective, &per_inference_emissions) {
        Ok(score) => Some(score),
        Err(Error::UndefinedScore(reason)) => {
            warnings.push(format!("sustainability score undefined: {reason}"));
            None
        }
        Err(other) => return Err(other),
    };

    let baseline = config
        .quantization
        .baseline_precision()
        .expect("spec validated non-empty");
    let projections: Vec<QuantizationProjection> = Precision::ALL
        .iter()
        .filter(|p| p.bits() < baseline.bits())
        .map(|&p| quantization_projection(total_energy, totals.water_l, p))
        .collect::<Result<_>>()?;

    Ok(SessionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        label: config.label.clone(),
        totals,
        per_inference,
        ess: score,
        effective_params_m: effective.millions,
        hardware,
        region,
        thermal,
        projections,
        sampling: SamplingInfo {
            rate_hz: trace.average_rate_hz(),
            sample_count_trace: trace.len(),
        },
        practical_water: practical_water_units(totals.water_l),
        sample_count: config.sample_count,
        warnings,
    })
}

/// Convert liters to everyday units: 0.5 L bottles and US gallons.
pub fn practical_water_units(liters: f64) -> PracticalWater {
    PracticalWater {
        bottles: liters / BOTTLE_LITERS,
        gallons: liters / LITERS_PER_GALLON,
    }
}

/// Build a plot-ready frontier dataset from session reports.
///
/// Reports without a defined score are excluded and counted. Points sort
/// by per-inference CO2 ascending, ties by label.
pub fn frontier_dataset(reports: &[SessionReport]) -> FrontierDataset {
    let mut points = Vec::new();
    let mut excluded = 0;
    for report in reports {
        match report.ess {
            Some(score) => points.push(FrontierPoint {
                label: report.label.clone(),
                co2_kg_per_inference: report.per_inference.co2_g / 1000.0,
                ess: score.mp_per_g(),
            }),
            None => excluded += 1,
        }
    }
    points.sort_by(|a, b| {
        a.co2_kg_per_inference
            .partial_cmp(&b.co2_kg_per_inference)
            .expect("emissions are finite")
            .then_with(|| a.label.cmp(&b.label))
    });
    FrontierDataset { points, excluded }
}

/// Render a frontier dataset as CSV.
pub fn frontier_csv(dataset: &FrontierDataset) -> String {
    let mut out = String::from(FRONTIER_CSV_HEADER);
    out.push('\n');
    for p in &dataset.points {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_escape(&p.label),
            p.co2_kg_per_inference,
            p.ess
        ));
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Serialize a report deterministically. JSON round-trips to an identical
/// report; CSV is one flat row under [`REPORT_CSV_HEADER`].
pub fn serialize_report(report: &SessionReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        ReportFormat::Csv => {
            let mut out = String::from(REPORT_CSV_HEADER);
            out.push('\n');
            out.push_str(&report_csv_row(report));
            out.push('\n');
            Ok(out.into_bytes())
        }
    }
}

/// Parse a report from its JSON serialization.
pub fn parse_report_json(bytes: &[u8]) -> Result<SessionReport> {
    Ok(serde_json::from_slice(bytes)?)
}

fn report_csv_row(r: &SessionReport) -> String {
    let ess = r.ess.map(|s| s.mp_per_g().to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.schema_version,
        csv_escape(&r.label),
        r.totals.energy_kwh,
        r.totals.co2_kg,
        r.totals.co2_g,
        r.totals.water_l,
        r.totals.duration_s,
        r.per_inference.energy_kwh,
        r.per_inference.co2_g,
        r.per_inference.water_l,
        ess,
        r.effective_params_m,
        r.hardware.device_class,
        r.hardware.pue,
        r.hardware.cooling_overhead,
        r.hardware.infra_overhead,
        r.region.region_id,
        r.region.water_intensity,
        r.region.carbon_intensity,
        r.thermal.flagged_intervals.len(),
        r.thermal.cooling_energy_adjustment_kwh,
        r.sampling.rate_hz,
        r.sampling.sample_count_trace,
        r.sample_count,
        r.practical_water.bottles,
        r.practical_water.gallons,
    )
}
