//! Environmental cost profiling for machine-learning inference.
//!
//! ecoprof quantifies what one inference costs the environment — energy,
//! carbon, water, and thermal behavior — from live, replayed, or synthetic
//! power traces, and scores configurations by effective parameters served
//! per gram of CO2.
//!
//! The crate is organized around five modules:
//!
//! - [`metrics`]: the pure formula layer (energy integration, carbon,
//!   water, effective parameters, sustainability score, quantization
//!   projections)
//! - [`sampling`]: trace production and analysis (synthetic profiles,
//!   replay, live probes, adaptive rate policy, resampling, sampling-rate
//!   sensitivity)
//! - [`hardware`]: device tier classification, PUE/overhead tables, and
//!   thermal flagging
//! - [`region`]: regional water/carbon coefficients and region detection
//! - [`report`]: session orchestration and report/frontier emission
//!
//! All operations are pure functions of immutable inputs unless they do
//! I/O by name (file replay, live probing), so they are safe to call from
//! any number of threads.

pub mod error;
pub mod hardware;
pub mod metrics;
pub mod region;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
pub use hardware::{classify_device, overheads_for, pue_for, thermal_flags, DeviceClass,
    HardwareProfile, ThermalFlagReport};
pub use metrics::{carbon_emissions, effective_parameters, ess, integrate_energy,
    quantization_factor, quantization_projection, water_footprint, EnergyQuantity, Precision,
    QuantizationSpec};
pub use region::{detect_region, list_regions, lookup, DetectionSignals, RegionProfile};
pub use report::{frontier_dataset, practical_water_units, run_session, serialize_report,
    ReportFormat, SessionConfig, SessionReport, SessionSource};
pub use sampling::{adaptive_rate, collect, resample, sensitivity_analysis, PowerSample,
    PowerTrace, SamplerSpec, SyntheticProfile, TraceSource};
