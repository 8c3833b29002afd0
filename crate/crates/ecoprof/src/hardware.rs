//! Hardware tier classification, tier PUE and overhead tables, and
//! thermal-regime flagging.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::JOULES_PER_KWH;
use crate::sampling::PowerTrace;

/// Execution hardware tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceClass {
    CpuOnly,
    DesktopGpu,
    DatacenterGpu,
}

impl fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DeviceClass::CpuOnly => "CPU_ONLY",
            DeviceClass::DesktopGpu => "DESKTOP_GPU",
            DeviceClass::DatacenterGpu => "DATACENTER_GPU",
        };
        f.write_str(s)
    }
}

/// Ordered classification rules: datacenter tokens are checked before
/// desktop tokens, so a descriptor matching both classifies as datacenter.
const DATACENTER_TOKENS: [&str; 4] = ["A100", "H100", "T4", "V100"];
const DESKTOP_TOKENS: [&str; 2] = ["RTX", "GTX"];

/// GPU temperature above which a regime is flagged, degrees C.
pub const GPU_THERMAL_LIMIT_C: f64 = 80.0;
/// CPU temperature above which a regime is flagged, degrees C.
pub const CPU_THERMAL_LIMIT_C: f64 = 85.0;

/// Default cooling surcharge: fraction of in-interval energy added to the
/// session energy budget. A configured default, not a measured value.
pub const DEFAULT_COOLING_ADJUSTMENT_FACTOR: f64 = 0.10;

/// Classify a device descriptor by case-insensitive substring matching
/// against the built-in rule table. Unknown descriptors fall through to
/// CPU-only.
pub fn classify_device(descriptor: &str) -> DeviceClass {
    classify_device_with_rules(descriptor, &[])
}

/// Like [`classify_device`], but user rules (pattern, class) are checked
/// first, in order.
pub fn classify_device_with_rules(
    descriptor: &str,
    rules: &[(String, DeviceClass)],
) -> DeviceClass {
    let haystack = descriptor.to_ascii_uppercase();
    for (pattern, class) in rules {
        if !pattern.is_empty() && haystack.contains(&pattern.to_ascii_uppercase()) {
            return *class;
        }
    }
    if DATACENTER_TOKENS.iter().any(|t| haystack.contains(t)) {
        return DeviceClass::DatacenterGpu;
    }
    if DESKTOP_TOKENS.iter().any(|t| haystack.contains(t)) {
        return DeviceClass::DesktopGpu;
    }
    DeviceClass::CpuOnly
}

/// Tier-specific power usage effectiveness.
pub fn pue_for(class: DeviceClass) -> f64 {
    match class {
        DeviceClass::CpuOnly => 1.1,
        DeviceClass::DesktopGpu => 1.2,
        DeviceClass::DatacenterGpu => 1.4,
    }
}

/// Tier-specific (cooling_overhead, infra_overhead) for the water pathway.
pub fn overheads_for(class: DeviceClass) -> (f64, f64) {
    match class {
        DeviceClass::CpuOnly => (1.0, 1.0),
        DeviceClass::DesktopGpu => (1.2, 1.0),
        DeviceClass::DatacenterGpu => (1.4, 1.2),
    }
}

/// Resolved hardware context for a profiled session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub device_class: DeviceClass,
    pub descriptor: String,
    pub pue: f64,
    pub cooling_overhead: f64,
    pub infra_overhead: f64,
    pub gpu_thermal_limit_c: f64,
    pub cpu_thermal_limit_c: f64,
}

impl HardwareProfile {
    pub fn for_descriptor(descriptor: &str) -> Self {
        Self::for_descriptor_with_rules(descriptor, &[])
    }

    pub fn for_descriptor_with_rules(descriptor: &str, rules: &[(String, DeviceClass)]) -> Self {
        Self::for_class(classify_device_with_rules(descriptor, rules), descriptor)
    }

    pub fn for_class(class: DeviceClass, descriptor: &str) -> Self {
        let (cooling_overhead, infra_overhead) = overheads_for(class);
        Self {
            device_class: class,
            descriptor: descriptor.to_string(),
            pue: pue_for(class),
            cooling_overhead,
            infra_overhead,
            gpu_thermal_limit_c: GPU_THERMAL_LIMIT_C,
            cpu_thermal_limit_c: CPU_THERMAL_LIMIT_C,
        }
    }
}

/// Temperature domain a flag applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermalDomain {
    Gpu,
    Cpu,
}

/// One maximal above-threshold interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlaggedInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub peak_temp_c: f64,
    pub domain: ThermalDomain,
}

/// Thermally inefficient regimes found in a trace, plus the cooling
/// energy surcharge they incur.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFlagReport {
    pub flagged_intervals: Vec<FlaggedInterval>,
    pub cooling_energy_adjustment_kwh: f64,
}

impl ThermalFlagReport {
    pub fn empty() -> Self {
        Self {
            flagged_intervals: Vec::new(),
            cooling_energy_adjustment_kwh: 0.0,
        }
    }
}

/// Flag thermally inefficient regimes with the default cooling surcharge.
pub fn thermal_flags(trace: &PowerTrace, profile: &HardwareProfile) -> ThermalFlagReport {
    thermal_flags_with_factor(trace, profile, DEFAULT_COOLING_ADJUSTMENT_FACTOR)
}

/// Flag maximal runs of consecutive samples whose GPU temperature exceeds
/// the GPU limit or CPU temperature exceeds the CPU limit. The cooling
/// adjustment is `factor` times the trapezoid-integrated energy inside the
/// union of flagged intervals; traces without temperature data yield an
/// empty report.
pub fn thermal_flags_with_factor(
    trace: &PowerTrace,
    profile: &HardwareProfile,
    factor: f64,
) -> ThermalFlagReport {
    let samples = &trace.samples;
    if samples.is_empty() {
        return ThermalFlagReport::empty();
    }

    let gpu_hot: Vec<bool> = samples
        .iter()
        .map(|s| s.gpu_temp_c.is_some_and(|t| t > profile.gpu_thermal_limit_c))
        .collect();
    let cpu_hot: Vec<bool> = samples
        .iter()
        .map(|s| s.cpu_temp_c.is_some_and(|t| t > profile.cpu_thermal_limit_c))
        .collect();

    let mut intervals = Vec::new();
    for (hot, domain) in [(&gpu_hot, ThermalDomain::Gpu), (&cpu_hot, ThermalDomain::Cpu)] {
        for (start, end) in maximal_runs(hot) {
            let peak = samples[start..=end]
                .iter()
                .filter_map(|s| match domain {
                    ThermalDomain::Gpu => s.gpu_temp_c,
                    ThermalDomain::Cpu => s.cpu_temp_c,
                })
                .fold(f64::NEG_INFINITY, f64::max);
            intervals.push(FlaggedInterval {
                start_s: samples[start].timestamp_s,
                end_s: samples[end].timestamp_s,
                peak_temp_c: peak,
                domain,
            });
        }
    }

    // Energy is counted once per sample pair even when both domains flag
    // the same span.
    let mut joules = 0.0;
    for i in 0..samples.len().saturating_sub(1) {
        let covered = (gpu_hot[i] && gpu_hot[i + 1]) || (cpu_hot[i] && cpu_hot[i + 1]);
        if covered {
            let (a, b) = (&samples[i], &samples[i + 1]);
            joules += 0.5 * (a.power_w + b.power_w) * (b.timestamp_s - a.timestamp_s);
        }
    }

    ThermalFlagReport {
        flagged_intervals: intervals,
        cooling_energy_adjustment_kwh: factor * joules / JOULES_PER_KWH,
    }
}

/// Maximal runs of consecutive true values, as inclusive index ranges.
fn maximal_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &flag) in flags.iter().enumerate() {
        match (flag, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - 1));
    }
    runs
}

/// Parse descriptor-to-class override rules from `pattern=class` lines.
/// Classes accept cpu_only, desktop_gpu, datacenter_gpu (case-insensitive);
/// blank lines and `#` comments are skipped.
pub fn parse_override_rules(text: &str) -> Result<Vec<(String, DeviceClass)>> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (pattern, class) = line.split_once('=').ok_or(Error::Parse {
            line: line_no,
            message: format!("expected pattern=class, got '{line}'"),
        })?;
        let pattern = pattern.trim();
        if pattern.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty pattern".into(),
            });
        }
        let class = match class.trim().to_ascii_lowercase().as_str() {
            "cpu_only" => DeviceClass::CpuOnly,
            "desktop_gpu" => DeviceClass::DesktopGpu,
            "datacenter_gpu" => DeviceClass::DatacenterGpu,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "unknown class '{other}' (expected cpu_only, desktop_gpu, or datacenter_gpu)"
                    ),
                })
            }
        };
        rules.push((pattern.to_string(), class));
    }
    Ok(rules)
}

pub fn load_override_rules(path: &Path) -> Result<Vec<(String, DeviceClass)>> {
    parse_override_rules(&std::fs::read_to_string(path)?)
}
