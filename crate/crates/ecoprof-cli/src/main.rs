//! Command-line front end for the ecoprof environmental inference
//! profiler.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/computation error.
//! Machine-readable output goes to stdout, diagnostics to stderr.

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use ecoprof::hardware::{classify_device_with_rules, load_override_rules, overheads_for, pue_for,
    DeviceClass, HardwareProfile};
use ecoprof::metrics::{quantization_projection, EnergyQuantity, Precision, QuantizationSpec};
use ecoprof::region::{list_regions, DetectionSignals, REGION_OVERRIDE_ENV};
use ecoprof::report::{practical_water_units, run_session, serialize_report, PracticalWater,
    ReportFormat, SessionConfig, SessionSource, DEFAULT_COLLECTION_RATE_HZ};
use ecoprof::sampling::{collect, sensitivity_analysis, PowerProbe, PowerTrace, SamplerSpec,
    SyntheticProfile};
use ecoprof::Error;

#[derive(Parser)]
#[command(
    name = "ecoprof",
    version,
    about = "Profile the environmental cost of ML inference: energy, carbon, water, thermal regime, and sustainability score"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile a live, wrapped, or simulated workload and emit a session report
    Monitor(MonitorArgs),
    /// Run the profiling pipeline over a recorded trace CSV
    Analyze(AnalyzeArgs),
    /// Project quantization savings for a measured energy/water baseline
    Estimate(EstimateArgs),
    /// Study how the sampling rate biases the emissions estimate
    Sensitivity(SensitivityArgs),
    /// List the shipped region database
    Regions(RegionsArgs),
    /// Classify a hardware descriptor and show its tier coefficients
    Hardware(HardwareArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("window").required(true).args(["duration", "wrap"])))]
struct MonitorArgs {
    /// Collection window in seconds
    #[arg(long)]
    duration: Option<f64>,
    /// Command to run (via `sh -c`) while sampling; its wall time sets the window
    #[arg(long)]
    wrap: Option<String>,
    /// Simulate a power source instead of probing hardware:
    /// constant:W | ramp:W0:W1 | sine:MEAN:AMP:PERIOD_S | bursty:BASE:BURST:BURST_MS:PERIOD_MS
    #[arg(long, value_parser = parse_profile)]
    simulate: Option<SyntheticProfile>,
    /// Seed for simulated profiles with stochastic jitter
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of inferences performed during the session
    #[arg(long = "samples", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[command(flatten)]
    metadata: SessionMetadata,
    /// Sampling rate in Hz (default 5)
    #[arg(long)]
    rate: Option<f64>,
    /// Write the report here as well as stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the collected trace CSV here (feeds `analyze`)
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace CSV recorded by `monitor --trace-out` or any compatible tool
    trace: PathBuf,
    /// Number of inferences performed during the session
    #[arg(long = "samples", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[command(flatten)]
    metadata: SessionMetadata,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct SessionMetadata {
    /// Hardware descriptor used for tier classification
    #[arg(long, default_value = "")]
    device: String,
    /// Region id (overrides detection and the ECO_REGION variable)
    #[arg(long)]
    region: Option<String>,
    /// Raw model parameter count
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    params: u64,
    /// Model precision
    #[arg(long, default_value = "fp32")]
    precision: String,
    /// Report label (used in frontier datasets)
    #[arg(long, default_value = "session")]
    label: String,
    /// key=value file of descriptor-to-class overrides checked before the built-in rules
    #[arg(long)]
    hardware_overrides: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Measured energy in kWh
    #[arg(long)]
    energy: f64,
    /// Measured water baseline in liters
    #[arg(long, default_value_t = 0.0)]
    water: f64,
    /// Precision the measurement was taken at
    #[arg(long)]
    from_precision: String,
    /// Precision to project down to (must be strictly lower)
    #[arg(long)]
    to_precision: String,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["trace", "simulate"])))]
struct SensitivityArgs {
    /// Dense trace CSV to study
    trace: Option<PathBuf>,
    /// Simulate the dense trace instead (same grammar as `monitor --simulate`)
    #[arg(long, value_parser = parse_profile)]
    simulate: Option<SyntheticProfile>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Duration of the simulated dense trace, seconds
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Rate of the simulated dense trace, Hz
    #[arg(long, default_value_t = 100.0)]
    dense_rate: f64,
    /// Comma-separated sampling rates to compare, e.g. 1,2,5
    #[arg(long, default_value = "1,2,5")]
    rates: String,
    /// Carbon intensity, kg CO2/kWh
    #[arg(long, default_value_t = 0.475)]
    ci: f64,
    /// Power usage effectiveness
    #[arg(long, default_value_t = 1.0)]
    pue: f64,
}

#[derive(Args)]
struct RegionsArgs {
    /// Output format: table or csv
    #[arg(long, default_value = "table")]
    format: String,
}

#[derive(Args)]
struct HardwareArgs {
    /// Hardware descriptor to classify
    descriptor: String,
    #[arg(long, default_value = "table")]
    format: String,
    #[arg(long)]
    hardware_overrides: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Monitor(args) => cmd_monitor(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Sensitivity(args) => cmd_sensitivity(args),
        Command::Regions(args) => cmd_regions(args),
        Command::Hardware(args) => cmd_hardware(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn parse_profile(text: &str) -> Result<SyntheticProfile, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str, name: &str| -> Result<f64, String> {
        s.parse::<f64>().map_err(|_| format!("invalid {name} '{s}'"))
    };
    let profile = match parts.as_slice() {
        ["constant", w] => SyntheticProfile::Constant { watts: num(w, "wattage")? },
        ["ramp", w0, w1] => SyntheticProfile::Ramp {
            start_w: num(w0, "start wattage")?,
            end_w: num(w1, "end wattage")?,
        },
        ["sine", mean, amp, period] => SyntheticProfile::Sine {
            mean_w: num(mean, "mean wattage")?,
            amplitude_w: num(amp, "amplitude")?,
            period_s: num(period, "period")?,
        },
        ["bursty", base, burst, burst_ms, period_ms] => SyntheticProfile::Bursty {
            base_w: num(base, "base wattage")?,
            burst_w: num(burst, "burst wattage")?,
            burst_ms: num(burst_ms, "burst length")?,
            period_ms: num(period_ms, "period")?,
        },
        _ => {
            return Err(format!(
                "unrecognized profile '{text}' (expected constant:W, ramp:W0:W1, \
                 sine:MEAN:AMP:PERIOD_S, or bursty:BASE:BURST:BURST_MS:PERIOD_MS)"
            ))
        }
    };
    profile.validate().map_err(|e| e.to_string())?;
    Ok(profile)
}

fn parse_format(text: &str) -> Result<ReportFormat, CliError> {
    ReportFormat::from_str(text).map_err(|e| usage(e.to_string()))
}

fn build_session_config(
    source: SessionSource,
    samples: u64,
    metadata: &SessionMetadata,
    rate: Option<f64>,
) -> Result<SessionConfig, CliError> {
    let precision: Precision = metadata
        .precision
        .parse()
        .map_err(|e: Error| usage(e.to_string()))?;
    let mut config = SessionConfig::new(
        source,
        metadata.params,
        QuantizationSpec::uniform(precision, metadata.params),
    );
    config.label = metadata.label.clone();
    config.sample_count = samples;
    config.device_descriptor = metadata.device.clone();
    config.requested_rate_hz = rate;
    config.detection_signals = DetectionSignals::from_env();
    config.region_override = metadata
        .region
        .clone()
        .or_else(|| std::env::var(REGION_OVERRIDE_ENV).ok().filter(|s| !s.is_empty()));
    if let Some(path) = &metadata.hardware_overrides {
        config.hardware_override_rules = load_override_rules(path)?;
    }
    Ok(config)
}

fn emit_report(
    config: &SessionConfig,
    format: ReportFormat,
    out: Option<&PathBuf>,
) -> Result<(), CliError> {
    let report = run_session(config)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    let bytes = serialize_report(&report, format)?;
    if let Some(path) = out {
        std::fs::write(path, &bytes).map_err(Error::from)?;
    }
    std::io::stdout().write_all(&bytes).map_err(Error::from)?;
    Ok(())
}

/// Try to open a live hardware power probe. None are bundled; vendor
/// adapters plug in through the PowerProbe trait.
fn open_live_probe() -> Option<Box<dyn PowerProbe>> {
    None
}

fn cmd_monitor(args: MonitorArgs) -> Result<(), CliError> {
    let format = parse_format(&args.format)?;
    let rate = args.rate.unwrap_or(DEFAULT_COLLECTION_RATE_HZ);
    if rate <= 0.0 {
        return Err(usage(format!("sampling rate must be positive, got {rate}")));
    }

    let trace = match &args.simulate {
        Some(profile) => {
            let duration = match (args.duration, &args.wrap) {
                (Some(d), _) => d,
                (None, Some(cmd)) => run_wrapped(cmd)?,
                (None, None) => unreachable!("clap group requires one"),
            };
            let spec = SamplerSpec::Synthetic {
                profile: profile.clone(),
                seed: args.seed,
            };
            collect(&spec, duration, rate)?
        }
        None => match open_live_probe() {
            Some(mut probe) => {
                let duration = match (args.duration, &args.wrap) {
                    (Some(d), _) => d,
                    (None, Some(cmd)) => run_wrapped(cmd)?,
                    (None, None) => unreachable!("clap group requires one"),
                };
                ecoprof::sampling::collect_live(probe.as_mut(), duration, rate, args.rate.is_none())?
            }
            None => {
                return Err(CliError::Data(Error::ProbeUnavailable(
                    "no hardware power counters detected on this system; re-run with \
                     --simulate PROFILE (e.g. --simulate constant:100) or record a trace \
                     elsewhere and use `ecoprof analyze`"
                        .into(),
                )))
            }
        },
    };

    if let Some(path) = &args.trace_out {
        trace.write_csv_path(path)?;
    }
    let config = build_session_config(
        SessionSource::Trace(trace),
        args.samples,
        &args.metadata,
        args.rate,
    )?;
    emit_report(&config, format, args.out.as_ref())
}

/// Run a command via `sh -c`, forwarding its output to stderr, and return
/// its wall time in seconds.
fn run_wrapped(command: &str) -> Result<f64, CliError> {
    let started = std::time::Instant::now();
    let output = std::process::Command::new("sh")
        .arg("-c")
        .arg(command)
        .output()
        .map_err(Error::from)?;
    let elapsed = started.elapsed().as_secs_f64();
    let mut stderr = std::io::stderr();
    let _ = stderr.write_all(&output.stdout);
    let _ = stderr.write_all(&output.stderr);
    if !output.status.success() {
        eprintln!("warning: wrapped command exited with {}", output.status);
    }
    // Guarantee a non-degenerate collection window even for instant commands.
    Ok(elapsed.max(0.001))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let format = parse_format(&args.format)?;
    let trace = PowerTrace::from_csv_path(&args.trace)?;
    let config = build_session_config(
        SessionSource::Trace(trace),
        args.samples,
        &args.metadata,
        None,
    )?;
    emit_report(&config, format, args.out.as_ref())
}

#[derive(Serialize)]
struct EstimateOutput {
    projection: ecoprof::metrics::QuantizationProjection,
    practical_water_saved: PracticalWater,
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let from: Precision = args
        .from_precision
        .parse()
        .map_err(|e: Error| usage(e.to_string()))?;
    let to: Precision = args
        .to_precision
        .parse()
        .map_err(|e: Error| usage(e.to_string()))?;
    if to.bits() >= from.bits() {
        return Err(usage(format!(
            "target precision {to} is not lower than {from}; savings are only \
             defined for downward projections"
        )));
    }
    let energy = EnergyQuantity::new(args.energy)?;
    let projection = quantization_projection(energy, args.water, to)?;
    let saved_l = args.water - projection.estimated_water_l;
    let output = EstimateOutput {
        projection,
        practical_water_saved: practical_water_units(saved_l),
    };
    match args.format.to_ascii_lowercase().as_str() {
        "json" => {
            let mut bytes = serde_json::to_vec_pretty(&output).map_err(Error::from)?;
            bytes.push(b'\n');
            std::io::stdout().write_all(&bytes).map_err(Error::from)?;
        }
        "csv" => {
            let p = &output.projection;
            println!(
                "precision,estimated_energy_kwh,energy_savings_pct,estimated_water_l,water_savings_pct,accuracy_retention_pct,water_savings_extrapolated,saved_bottles,saved_gallons"
            );
            println!(
                "{},{},{},{},{},{},{},{},{}",
                p.precision,
                p.estimated_energy_kwh,
                p.energy_savings_pct,
                p.estimated_water_l,
                p.water_savings_pct,
                p.accuracy_retention_pct,
                p.water_savings_extrapolated,
                output.practical_water_saved.bottles,
                output.practical_water_saved.gallons,
            );
        }
        other => return Err(usage(format!("unknown format '{other}'"))),
    }
    Ok(())
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<(), CliError> {
    let rates: Vec<f64> = args
        .rates
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("invalid rate '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    if rates.is_empty() || rates.iter().any(|r| *r <= 0.0) {
        return Err(usage("rates must be a comma-separated list of positive Hz values"));
    }

    let dense = match (&args.trace, &args.simulate) {
        (Some(path), None) => PowerTrace::from_csv_path(path)?,
        (None, Some(profile)) => {
            let spec = SamplerSpec::Synthetic {
                profile: profile.clone(),
                seed: args.seed,
            };
            collect(&spec, args.duration, args.dense_rate)?
        }
        _ => unreachable!("clap group requires exactly one"),
    };

    let rows = sensitivity_analysis(&dense, &rates, args.ci, args.pue)?;
    println!("rate_hz,co2_g,relative_error_pct");
    for row in rows {
        println!(
            "{},{},{}",
            row.rate_hz, row.estimated_co2_g, row.relative_error_pct
        );
    }
    Ok(())
}

fn cmd_regions(args: RegionsArgs) -> Result<(), CliError> {
    let regions = list_regions();
    match args.format.to_ascii_lowercase().as_str() {
        "csv" => {
            println!("region_id,display_name,water_intensity_l_per_kwh,carbon_intensity_kg_per_kwh,provenance");
            for r in regions {
                println!(
                    "{},{},{},{},{}",
                    r.region_id, r.display_name, r.water_intensity, r.carbon_intensity, r.provenance
                );
            }
        }
        "table" => {
            println!(
                "{:<8} {:<26} {:>12} {:>12}  PROVENANCE",
                "REGION", "NAME", "WATER L/kWh", "CO2 kg/kWh"
            );
            for r in regions {
                println!(
                    "{:<8} {:<26} {:>12} {:>12}  {}",
                    r.region_id, r.display_name, r.water_intensity, r.carbon_intensity, r.provenance
                );
            }
        }
        other => return Err(usage(format!("unknown format '{other}'"))),
    }
    Ok(())
}

fn cmd_hardware(args: HardwareArgs) -> Result<(), CliError> {
    let rules = match &args.hardware_overrides {
        Some(path) => load_override_rules(path)?,
        None => Vec::new(),
    };
    let class: DeviceClass = classify_device_with_rules(&args.descriptor, &rules);
    let profile = HardwareProfile::for_class(class, &args.descriptor);
    match args.format.to_ascii_lowercase().as_str() {
        "csv" => {
            println!("descriptor,device_class,pue,cooling_overhead,infra_overhead");
            println!(
                "{},{},{},{},{}",
                args.descriptor, class, profile.pue, profile.cooling_overhead, profile.infra_overhead
            );
        }
        "table" => {
            let (cooling, infra) = overheads_for(class);
            println!("descriptor:        {}", args.descriptor);
            println!("device class:      {class}");
            println!("pue:               {}", pue_for(class));
            println!("cooling overhead:  {cooling}");
            println!("infra overhead:    {infra}");
            println!("gpu thermal limit: {} C", profile.gpu_thermal_limit_c);
            println!("cpu thermal limit: {} C", profile.cpu_thermal_limit_c);
        }
        other => return Err(usage(format!("unknown format '{other}'"))),
    }
    Ok(())
}
