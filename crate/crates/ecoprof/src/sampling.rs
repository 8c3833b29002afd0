//! Power trace production and analysis: synthetic generation, file replay,
//! live probing, adaptive-rate policy, resampling, and the
//! sampling-frequency sensitivity study.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::metrics::{carbon_emissions, integrate_energy};

/// Slack added before flooring sample counts so spans like 10.0 * 5.0 do
/// not lose their final sample to float rounding.
const COUNT_EPS: f64 = 1e-9;

/// Temperature sanity band, degrees C.
const TEMP_MIN_C: f64 = -20.0;
const TEMP_MAX_C: f64 = 150.0;

/// Header of the trace CSV format.
pub const TRACE_CSV_HEADER: &str = "timestamp_s,power_w,gpu_temp_c,cpu_temp_c";

/// One power measurement, with optional temperature readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    /// Seconds from session start.
    pub timestamp_s: f64,
    /// Instantaneous power in watts.
    pub power_w: f64,
    pub gpu_temp_c: Option<f64>,
    pub cpu_temp_c: Option<f64>,
}

impl PowerSample {
    pub fn new(timestamp_s: f64, power_w: f64) -> Self {
        Self {
            timestamp_s,
            power_w,
            gpu_temp_c: None,
            cpu_temp_c: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.timestamp_s.is_finite() || self.timestamp_s < 0.0 {
            return Err(Error::MalformedTrace(format!(
                "timestamp must be non-negative seconds, got {}",
                self.timestamp_s
            )));
        }
        if !self.power_w.is_finite() || self.power_w < 0.0 {
            return Err(Error::MalformedTrace(format!(
                "power must be non-negative watts, got {}",
                self.power_w
            )));
        }
        for temp in [self.gpu_temp_c, self.cpu_temp_c].into_iter().flatten() {
            if !(TEMP_MIN_C..=TEMP_MAX_C).contains(&temp) {
                return Err(Error::MalformedTrace(format!(
                    "temperature {temp} C outside sanity band [{TEMP_MIN_C}, {TEMP_MAX_C}]"
                )));
            }
        }
        Ok(())
    }
}

/// Where a trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Live,
    Replay,
    Synthetic,
}

/// Ordered time series of power samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub samples: Vec<PowerSample>,
    pub source: TraceSource,
}

impl PowerTrace {
    /// Build a trace, validating sample sanity and strict timestamp order.
    pub fn new(samples: Vec<PowerSample>, source: TraceSource) -> Result<Self> {
        for sample in &samples {
            sample.validate()?;
        }
        for pair in samples.windows(2) {
            if pair[1].timestamp_s <= pair[0].timestamp_s {
                return Err(Error::MalformedTrace(format!(
                    "timestamps must be strictly increasing ({} then {})",
                    pair[0].timestamp_s, pair[1].timestamp_s
                )));
            }
        }
        Ok(Self { samples, source })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Span between first and last sample, seconds. Zero for traces with
    /// fewer than two samples.
    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.timestamp_s - a.timestamp_s,
            _ => 0.0,
        }
    }

    /// Average sampling rate over the trace span, Hz.
    pub fn average_rate_hz(&self) -> f64 {
        let span = self.duration_s();
        if span <= 0.0 || self.samples.len() < 2 {
            return 0.0;
        }
        (self.samples.len() - 1) as f64 / span
    }

    /// Write the trace in the documented CSV format.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for s in &self.samples {
            let gpu = s.gpu_temp_c.map(|t| t.to_string()).unwrap_or_default();
            let cpu = s.cpu_temp_c.map(|t| t.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", s.timestamp_s, s.power_w, gpu, cpu)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to Vec cannot fail");
        String::from_utf8(buf).expect("csv output is valid utf-8")
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    }

    /// Parse a trace from the documented CSV format. Errors name the
    /// offending line (1-based, header is line 1).
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut samples = Vec::new();
        let mut lines = reader.lines().enumerate();

        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty file, expected header".into(),
        })?;
        let header = header?;
        if header.trim_end() != TRACE_CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header '{TRACE_CSV_HEADER}', got '{header}'"),
            });
        }

        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse_f64 = |field: &str, name: &str| -> Result<f64> {
                field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid {name} '{field}'"),
                })
            };
            let parse_opt = |field: &str, name: &str| -> Result<Option<f64>> {
                if field.trim().is_empty() {
                    Ok(None)
                } else {
                    parse_f64(field, name).map(Some)
                }
            };
            let sample = PowerSample {
                timestamp_s: parse_f64(fields[0], "timestamp_s")?,
                power_w: parse_f64(fields[1], "power_w")?,
                gpu_temp_c: parse_opt(fields[2], "gpu_temp_c")?,
                cpu_temp_c: parse_opt(fields[3], "cpu_temp_c")?,
            };
            sample.validate().map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if let Some(prev) = samples.last() {
                let prev: &PowerSample = prev;
                if sample.timestamp_s <= prev.timestamp_s {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!(
                            "timestamps must be strictly increasing ({} then {})",
                            prev.timestamp_s, sample.timestamp_s
                        ),
                    });
                }
            }
            samples.push(sample);
        }
        Ok(Self {
            samples,
            source: TraceSource::Replay,
        })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Analytic power profile used for synthetic collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SyntheticProfile {
    Constant { watts: f64 },
    /// Linear ramp from start to end power over the collection duration.
    Ramp { start_w: f64, end_w: f64 },
    Sine { mean_w: f64, amplitude_w: f64, period_s: f64 },
    /// Base power with rectangular bursts. Each period places one burst of
    /// `burst_ms` at a seeded offset inside the period, so burst phase
    /// varies per period while staying deterministic for a given seed.
    Bursty { base_w: f64, burst_w: f64, burst_ms: f64, period_ms: f64 },
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        let non_negative = |w: f64, name: &str| -> Result<()> {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative watts, got {w}"
                )));
            }
            Ok(())
        };
        match *self {
            SyntheticProfile::Constant { watts } => non_negative(watts, "constant power"),
            SyntheticProfile::Ramp { start_w, end_w } => {
                non_negative(start_w, "ramp start")?;
                non_negative(end_w, "ramp end")
            }
            SyntheticProfile::Sine { mean_w, amplitude_w, period_s } => {
                non_negative(mean_w, "sine mean")?;
                non_negative(amplitude_w, "sine amplitude")?;
                if amplitude_w > mean_w {
                    return Err(Error::InvalidParameter(format!(
                        "sine amplitude {amplitude_w} exceeds mean {mean_w}; power would go negative"
                    )));
                }
                if period_s <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "sine period must be positive seconds, got {period_s}"
                    )));
                }
                Ok(())
            }
            SyntheticProfile::Bursty { base_w, burst_w, burst_ms, period_ms } => {
                non_negative(base_w, "bursty base")?;
                non_negative(burst_w, "bursty burst")?;
                if period_ms <= 0.0 || burst_ms < 0.0 || burst_ms >= period_ms {
                    return Err(Error::InvalidParameter(format!(
                        "burst length {burst_ms} ms must be shorter than the period {period_ms} ms"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluate the profile at time `t` within a collection of
    /// `duration_s` seconds. Deterministic for a fixed seed.
    pub fn power_at(&self, t: f64, duration_s: f64, seed: u64) -> f64 {
        match *self {
            SyntheticProfile::Constant { watts } => watts,
            SyntheticProfile::Ramp { start_w, end_w } => {
                if duration_s <= 0.0 {
                    start_w
                } else {
                    start_w + (end_w - start_w) * (t / duration_s)
                }
            }
            SyntheticProfile::Sine { mean_w, amplitude_w, period_s } => {
                mean_w + amplitude_w * (2.0 * std::f64::consts::PI * t / period_s).sin()
            }
            SyntheticProfile::Bursty { base_w, burst_w, burst_ms, period_ms } => {
                let period_s = period_ms / 1000.0;
                let burst_s = burst_ms / 1000.0;
                let index = (t / period_s).floor();
                let offset = t - index * period_s;
                let phase = burst_phase(seed, index as i64 as u64, period_s, burst_s);
                if offset >= phase && offset < phase + burst_s {
                    burst_w
                } else {
                    base_w
                }
            }
        }
    }
}

/// Deterministic burst start offset within one period: uniform over
/// [0, period - burst] keyed by (seed, period index).
fn burst_phase(seed: u64, period_index: u64, period_s: f64, burst_s: f64) -> f64 {
    let bits = splitmix64(seed ^ splitmix64(period_index));
    let u01 = (bits >> 11) as f64 / (1u64 << 53) as f64;
    u01 * (period_s - burst_s)
}

/// SplitMix64 finalizer; small, seedable, and stable across platforms.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How to obtain samples: replay a recorded trace file or evaluate a
/// synthetic profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplerSpec {
    Replay { path: PathBuf },
    Synthetic { profile: SyntheticProfile, seed: u64 },
}

/// One row of a sampling-frequency sensitivity table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub rate_hz: f64,
    pub estimated_co2_g: f64,
    /// Signed deviation from the finest requested rate, percent. The
    /// finest-rate row is 0 by definition.
    pub relative_error_pct: f64,
}

fn sample_count(duration_s: f64, rate_hz: f64) -> usize {
    (duration_s * rate_hz + COUNT_EPS).floor() as usize + 1
}

/// Produce a trace from a sampler at a uniform rate.
///
/// The trace has floor(duration_s * rate_hz) + 1 samples. Synthetic
/// profiles are evaluated analytically at the sample instants; replay
/// interpolates the source trace linearly at those instants.
pub fn collect(spec: &SamplerSpec, duration_s: f64, rate_hz: f64) -> Result<PowerTrace> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "collection duration must be positive seconds, got {duration_s}"
        )));
    }
    if !rate_hz.is_finite() || rate_hz <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sampling rate must be positive Hz, got {rate_hz}"
        )));
    }
    let n = sample_count(duration_s, rate_hz);
    match spec {
        SamplerSpec::Synthetic { profile, seed } => {
            profile.validate()?;
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 / rate_hz;
                    PowerSample::new(t, profile.power_at(t, duration_s, *seed))
                })
                .collect();
            PowerTrace::new(samples, TraceSource::Synthetic)
        }
        SamplerSpec::Replay { path } => {
            let source = PowerTrace::from_csv_path(path)?;
            if source.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "replay source {} has {} samples, need at least 2",
                    path.display(),
                    source.len()
                )));
            }
            let t0 = source.samples[0].timestamp_s;
            let span = source.duration_s();
            if duration_s > span + COUNT_EPS {
                return Err(Error::InvalidParameter(format!(
                    "requested {duration_s} s exceeds the {span} s replay source span"
                )));
            }
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 / rate_hz;
                    let mut s = interpolate(&source.samples, t0 + t);
                    s.timestamp_s = t;
                    s
                })
                .collect();
            PowerTrace::new(samples, TraceSource::Replay)
        }
    }
}

/// Linear interpolation at time `t` over a sorted sample slice. `t` is
/// clamped to the source span.
fn interpolate(samples: &[PowerSample], t: f64) -> PowerSample {
    let last = samples.len() - 1;
    if t <= samples[0].timestamp_s {
        return samples[0];
    }
    if t >= samples[last].timestamp_s {
        return samples[last];
    }
    let hi = samples.partition_point(|s| s.timestamp_s <= t);
    let (a, b) = (&samples[hi - 1], &samples[hi]);
    let frac = (t - a.timestamp_s) / (b.timestamp_s - a.timestamp_s);
    let lerp_opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x + (y - x) * frac),
        _ => None,
    };
    PowerSample {
        timestamp_s: t,
        power_w: a.power_w + (b.power_w - a.power_w) * frac,
        gpu_temp_c: lerp_opt(a.gpu_temp_c, b.gpu_temp_c),
        cpu_temp_c: lerp_opt(a.cpu_temp_c, b.cpu_temp_c),
    }
}

/// Lower and upper bounds of the adaptive sampling policy, Hz.
pub const ADAPTIVE_MIN_HZ: f64 = 1.0;
pub const ADAPTIVE_MAX_HZ: f64 = 5.0;
/// Rates the adaptive policy can pick.
pub const ADAPTIVE_RATES_HZ: [f64; 3] = [1.0, 2.0, 5.0];

/// Coefficient of variation below which 1 Hz suffices.
const CV_FLOOR: f64 = 0.05;
/// Coefficient of variation at or above which the 5 Hz ceiling applies.
const CV_CEIL: f64 = 0.25;

/// Pick a sampling rate for the next window from the power variability of
/// the recent one.
///
/// Windows with coefficient of variation <= 0.05 get 1 Hz, >= 0.25 get
/// 5 Hz, and values between interpolate linearly before snapping to the
/// nearest of {1, 2, 5} Hz (ties toward the lower rate). Degenerate
/// windows fall back to 1 Hz.
pub fn adaptive_rate(recent_window: &PowerTrace) -> f64 {
    let powers: Vec<f64> = recent_window.samples.iter().map(|s| s.power_w).collect();
    if powers.len() < 2 {
        return ADAPTIVE_MIN_HZ;
    }
    let n = powers.len() as f64;
    let mean = powers.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return ADAPTIVE_MIN_HZ;
    }
    let var = powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    let cv = var.sqrt() / mean;
    if cv <= CV_FLOOR {
        return ADAPTIVE_MIN_HZ;
    }
    if cv >= CV_CEIL {
        return ADAPTIVE_MAX_HZ;
    }
    let raw = ADAPTIVE_MIN_HZ
        + (cv - CV_FLOOR) / (CV_CEIL - CV_FLOOR) * (ADAPTIVE_MAX_HZ - ADAPTIVE_MIN_HZ);
    let mut best = ADAPTIVE_RATES_HZ[0];
    for &candidate in &ADAPTIVE_RATES_HZ[1..] {
        if (raw - candidate).abs() < (raw - best).abs() {
            best = candidate;
        }
    }
    best
}

/// Subsample a trace at a lower uniform rate via nearest-preceding-sample
/// selection (sample-and-hold), modelling what a slower sampler would have
/// observed. Power values are selected, never averaged; both endpoints of
/// the source span are preserved.
pub fn resample(trace: &PowerTrace, rate_hz: f64) -> Result<PowerTrace> {
    if !rate_hz.is_finite() || rate_hz <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "resample rate must be positive Hz, got {rate_hz}"
        )));
    }
    if trace.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "resampling requires at least 2 samples, trace has {}",
            trace.len()
        )));
    }
    let density = trace.average_rate_hz();
    if rate_hz > density + COUNT_EPS {
        return Err(Error::InvalidParameter(format!(
            "requested rate {rate_hz} Hz exceeds the source density {density} Hz"
        )));
    }
    let t0 = trace.samples[0].timestamp_s;
    let span = trace.duration_s();
    let n = sample_count(span, rate_hz);
    let mut samples = Vec::with_capacity(n + 1);
    for i in 0..n {
        let t = t0 + i as f64 / rate_hz;
        let idx = trace
            .samples
            .partition_point(|s| s.timestamp_s <= t)
            .saturating_sub(1);
        let held = &trace.samples[idx];
        samples.push(PowerSample {
            timestamp_s: t,
            ..*held
        });
    }
    let covered = t0 + (n - 1) as f64 / rate_hz;
    let last = *trace.samples.last().expect("len checked above");
    if covered + COUNT_EPS < last.timestamp_s {
        samples.push(last);
    }
    PowerTrace::new(samples, trace.source)
}

/// Emissions estimated at several sampling rates against the finest rate.
///
/// Each requested rate resamples the dense trace, integrates, and converts
/// to CO2 grams; errors are signed percentages relative to the finest
/// (highest) requested rate. Rows come back sorted by rate ascending.
pub fn sensitivity_analysis(
    dense_trace: &PowerTrace,
    rates: &[f64],
    carbon_intensity: f64,
    pue: f64,
) -> Result<Vec<SensitivityRow>> {
    if rates.is_empty() {
        return Err(Error::InvalidParameter(
            "sensitivity analysis needs at least one rate".into(),
        ));
    }
    let mut sorted: Vec<f64> = rates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("rates must not be NaN"));

    let mut grams = Vec::with_capacity(sorted.len());
    for &rate in &sorted {
        let coarse = resample(dense_trace, rate)?;
        let energy = integrate_energy(&coarse)?;
        let emission = carbon_emissions(energy, carbon_intensity, pue)?;
        grams.push(emission.co2_g);
    }
    let baseline = *grams.last().expect("rates checked non-empty");
    Ok(sorted
        .into_iter()
        .zip(grams)
        .map(|(rate_hz, co2)| SensitivityRow {
            rate_hz,
            estimated_co2_g: co2,
            relative_error_pct: if co2 == baseline {
                0.0
            } else {
                100.0 * (co2 - baseline) / baseline
            },
        })
        .collect())
}

/// One instantaneous reading from a hardware counter.
#[derive(Debug, Clone, Copy)]
pub struct ProbeReading {
    pub power_w: f64,
    pub gpu_temp_c: Option<f64>,
    pub cpu_temp_c: Option<f64>,
}

/// Source of live power readings. Concrete probes (NVML, RAPL, vendor
/// counters) are adapters implementing this trait; the profiler core only
/// needs something that yields readings on demand.
pub trait PowerProbe {
    fn read(&mut self) -> Result<ProbeReading>;

    /// Short description for diagnostics.
    fn describe(&self) -> String {
        "power probe".into()
    }
}

/// Collect a live trace by polling a probe for `duration_s` seconds.
///
/// With `adaptive` set, the rate is re-derived from the last ten samples
/// after every reading and clamped to the 1-5 Hz policy band; otherwise
/// the requested rate is used throughout.
pub fn collect_live(
    probe: &mut dyn PowerProbe,
    duration_s: f64,
    rate_hz: f64,
    adaptive: bool,
) -> Result<PowerTrace> {
    if duration_s <= 0.0 || rate_hz <= 0.0 {
        return Err(Error::InvalidParameter(
            "live collection needs positive duration and rate".into(),
        ));
    }
    let started = Instant::now();
    let mut rate = if adaptive {
        rate_hz.clamp(ADAPTIVE_MIN_HZ, ADAPTIVE_MAX_HZ)
    } else {
        rate_hz
    };
    let mut samples: Vec<PowerSample> = Vec::new();
    loop {
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed > duration_s {
            break;
        }
        let reading = probe.read()?;
        let mut timestamp = started.elapsed().as_secs_f64();
        if let Some(prev) = samples.last() {
            if timestamp <= prev.timestamp_s {
                timestamp = prev.timestamp_s + 1e-6;
            }
        }
        samples.push(PowerSample {
            timestamp_s: timestamp,
            power_w: reading.power_w.max(0.0),
            gpu_temp_c: reading.gpu_temp_c,
            cpu_temp_c: reading.cpu_temp_c,
        });
        if adaptive && samples.len() >= 2 {
            let tail = samples.len().saturating_sub(10);
            let window = PowerTrace {
                samples: samples[tail..].to_vec(),
                source: TraceSource::Live,
            };
            rate = adaptive_rate(&window);
        }
        let next = samples.len() as f64 / rate;
        let now = started.elapsed().as_secs_f64();
        if next > duration_s + COUNT_EPS {
            break;
        }
        if next > now {
            std::thread::sleep(Duration::from_secs_f64(next - now));
        }
    }
    PowerTrace::new(samples, TraceSource::Live)
}
