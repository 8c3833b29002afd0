//! Regional water- and carbon-intensity coefficients with automatic
//! region detection from environment signals.
//!
//! The shipped table is configuration data: every entry carries a
//! provenance note, and all computation paths accept injected profiles,
//! so nothing downstream depends on any particular shipped value.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Region id used when no signal resolves.
pub const DEFAULT_REGION: &str = "GLOBAL";

/// Environment variable honored as the explicit region override channel.
pub const REGION_OVERRIDE_ENV: &str = "ECO_REGION";

/// Supported water-intensity range, L/kWh.
pub const WATER_INTENSITY_MIN: f64 = 1.2;
pub const WATER_INTENSITY_MAX: f64 = 4.8;

const REGION_DATA: &str = include_str!("../data/regions.csv");
const REGION_CSV_HEADER: &str =
    "region_id,display_name,water_intensity_l_per_kwh,carbon_intensity_kg_per_kwh,provenance";

/// Regional grid coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProfile {
    pub region_id: String,
    pub display_name: String,
    /// Liters of water per kWh generated.
    pub water_intensity: f64,
    /// kg CO2 per kWh generated.
    pub carbon_intensity: f64,
    /// Where the values come from; shipped entries are configuration, not
    /// authoritative measurements.
    pub provenance: String,
}

/// Signals available for automatic region detection. An explicit override
/// wins unconditionally over every other signal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSignals {
    pub locale: Option<String>,
    pub timezone: Option<String>,
    pub cloud_env: BTreeMap<String, String>,
    pub explicit_override: Option<String>,
}

impl DetectionSignals {
    /// Gather signals from the process environment. ECO_REGION feeds the
    /// explicit override channel; LC_ALL/LANG supply the locale, TZ the
    /// timezone, and the well-known cloud provider variables are copied
    /// when present. Callers gather once and pass the result around so
    /// detection itself stays pure.
    pub fn from_env() -> Self {
        let mut cloud_env = BTreeMap::new();
        for var in CLOUD_REGION_VARS {
            if let Ok(value) = std::env::var(var) {
                if !value.is_empty() {
                    cloud_env.insert(var.to_string(), value);
                }
            }
        }
        let non_empty = |v: std::result::Result<String, std::env::VarError>| {
            v.ok().filter(|s| !s.is_empty())
        };
        Self {
            locale: non_empty(std::env::var("LC_ALL")).or_else(|| non_empty(std::env::var("LANG"))),
            timezone: non_empty(std::env::var("TZ")),
            cloud_env,
            explicit_override: non_empty(std::env::var(REGION_OVERRIDE_ENV)),
        }
    }
}

/// Cloud provider environment variables inspected for a region hint, in
/// precedence order.
pub const CLOUD_REGION_VARS: [&str; 5] = [
    "AWS_REGION",
    "AWS_DEFAULT_REGION",
    "GOOGLE_CLOUD_REGION",
    "CLOUDSDK_COMPUTE_REGION",
    "AZURE_REGION",
];

/// Provider region prefixes mapped to shipped region ids. First match
/// wins; specific entries precede catch-alls.
const CLOUD_REGION_PREFIXES: [(&str, &str); 36] = [
    // AWS
    ("us-gov-", "US"),
    ("us-", "US"),
    ("ca-", "CA"),
    ("sa-east", "BR"),
    ("eu-north", "SE"),
    ("eu-west-1", "IE"),
    ("eu-west-2", "GB"),
    ("eu-west-3", "FR"),
    ("eu-central", "DE"),
    ("eu-south", "IT"),
    ("ap-northeast-2", "KR"),
    ("ap-northeast", "JP"),
    ("ap-south", "IN"),
    ("ap-southeast-1", "SG"),
    ("ap-southeast-2", "AU"),
    ("me-", "ME"),
    ("af-south", "ZA"),
    ("cn-", "CN"),
    // GCP
    ("europe-north", "FI"),
    ("europe-west2", "GB"),
    ("europe-west3", "DE"),
    ("europe-west4", "NL"),
    ("europe-west6", "CH"),
    ("europe-west9", "FR"),
    ("europe-", "EU"),
    ("asia-northeast3", "KR"),
    ("asia-northeast", "JP"),
    ("asia-south", "IN"),
    ("asia-southeast1", "SG"),
    ("asia-east", "CN"),
    ("australia-", "AU"),
    ("northamerica-", "CA"),
    ("southamerica-", "BR"),
    // Azure
    ("westeurope", "NL"),
    ("northeurope", "IE"),
    ("uk", "GB"),
];

/// Azure-style region names that do not share the hyphenated prefix
/// convention, matched after the prefix table.
const CLOUD_REGION_CONTAINS: [(&str, &str); 12] = [
    ("eastus", "US"),
    ("westus", "US"),
    ("centralus", "US"),
    ("canada", "CA"),
    ("francecentral", "FR"),
    ("germanywestcentral", "DE"),
    ("swedencentral", "SE"),
    ("norwayeast", "NO"),
    ("japan", "JP"),
    ("korea", "KR"),
    ("india", "IN"),
    ("brazilsouth", "BR"),
];

/// Timezone prefixes mapped to shipped region ids, specific first.
const TIMEZONE_PREFIXES: [(&str, &str); 30] = [
    ("Atlantic/Reykjavik", "IS"),
    ("Europe/Oslo", "NO"),
    ("Europe/Stockholm", "SE"),
    ("Europe/Helsinki", "FI"),
    ("Europe/Copenhagen", "DK"),
    ("Europe/Paris", "FR"),
    ("Europe/Berlin", "DE"),
    ("Europe/London", "GB"),
    ("Europe/Dublin", "IE"),
    ("Europe/Amsterdam", "NL"),
    ("Europe/Brussels", "BE"),
    ("Europe/Madrid", "ES"),
    ("Europe/Lisbon", "PT"),
    ("Europe/Rome", "IT"),
    ("Europe/Warsaw", "PL"),
    ("Europe/Zurich", "CH"),
    ("Europe/Vienna", "AT"),
    ("Europe/", "EU"),
    ("America/Toronto", "CA"),
    ("America/Vancouver", "CA"),
    ("America/Sao_Paulo", "BR"),
    ("America/Los_Angeles", "US-CA"),
    ("America/", "US"),
    ("Asia/Tokyo", "JP"),
    ("Asia/Seoul", "KR"),
    ("Asia/Shanghai", "CN"),
    ("Asia/Singapore", "SG"),
    ("Asia/Kolkata", "IN"),
    ("Asia/Dubai", "AE"),
    ("Asia/Riyadh", "ME"),
];

fn table() -> &'static Vec<RegionProfile> {
    static TABLE: OnceLock<Vec<RegionProfile>> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_regions_csv(REGION_DATA).expect("shipped region table must parse")
    })
}

/// Parse a region table in the documented CSV format. Errors name the
/// offending line (header is line 1).
pub fn parse_regions_csv(text: &str) -> Result<Vec<RegionProfile>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty region file".into(),
    })?;
    if header.trim_end() != REGION_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{REGION_CSV_HEADER}'"),
        });
    }
    let mut regions = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(5, ',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse = |f: &str, name: &str| -> Result<f64> {
            f.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid {name} '{f}'"),
            })
        };
        let water_intensity = parse(fields[2], "water intensity")?;
        let carbon_intensity = parse(fields[3], "carbon intensity")?;
        if !(WATER_INTENSITY_MIN..=WATER_INTENSITY_MAX).contains(&water_intensity) {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "water intensity {water_intensity} outside [{WATER_INTENSITY_MIN}, {WATER_INTENSITY_MAX}]"
                ),
            });
        }
        if carbon_intensity <= 0.0 || carbon_intensity > 1.5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("carbon intensity {carbon_intensity} outside (0, 1.5]"),
            });
        }
        regions.push(RegionProfile {
            region_id: fields[0].trim().to_string(),
            display_name: fields[1].trim().to_string(),
            water_intensity,
            carbon_intensity,
            provenance: fields[4].trim().to_string(),
        });
    }
    regions.sort_by(|a, b| a.region_id.cmp(&b.region_id));
    Ok(regions)
}

/// Look a region up by id (case-insensitive). Unknown ids are an error
/// listing every available id; nothing is ever silently substituted.
pub fn lookup(region_id: &str) -> Result<RegionProfile> {
    let wanted = region_id.trim().to_ascii_uppercase();
    table()
        .iter()
        .find(|r| r.region_id == wanted)
        .cloned()
        .ok_or_else(|| Error::UnknownRegion {
            id: region_id.to_string(),
            available: table()
                .iter()
                .map(|r| r.region_id.as_str())
                .collect::<Vec<_>>()
                .join(", "),
        })
}

/// All shipped regions, sorted by id.
pub fn list_regions() -> &'static [RegionProfile] {
    table()
}

/// Resolve a region id from detection signals.
///
/// Precedence: explicit override, then cloud provider region variables,
/// then timezone prefix, then locale country code, then the GLOBAL
/// default. Ambient signals that do not map to a shipped region fall
/// through to the next stage; an explicit override is returned verbatim
/// so a typo surfaces as an unknown-region error downstream instead of
/// being silently replaced.
pub fn detect_region(signals: &DetectionSignals) -> String {
    if let Some(id) = &signals.explicit_override {
        return id.trim().to_ascii_uppercase();
    }
    for var in CLOUD_REGION_VARS {
        if let Some(value) = signals.cloud_env.get(var) {
            if let Some(id) = map_cloud_region(value) {
                return id.to_string();
            }
        }
    }
    if let Some(tz) = &signals.timezone {
        for (prefix, id) in TIMEZONE_PREFIXES {
            if tz.starts_with(prefix) {
                return id.to_string();
            }
        }
    }
    if let Some(locale) = &signals.locale {
        if let Some(id) = map_locale(locale) {
            return id;
        }
    }
    DEFAULT_REGION.to_string()
}

fn map_cloud_region(value: &str) -> Option<&'static str> {
    let v = value.trim().to_ascii_lowercase();
    for (prefix, id) in CLOUD_REGION_PREFIXES {
        if v.starts_with(prefix) {
            return Some(id);
        }
    }
    for (needle, id) in CLOUD_REGION_CONTAINS {
        if v.contains(needle) {
            return Some(id);
        }
    }
    None
}

/// Map a POSIX locale such as `en_US.UTF-8` to a shipped region via its
/// country code.
fn map_locale(locale: &str) -> Option<String> {
    let base = locale.split('.').next()?.trim();
    let country = base.split('_').nth(1)?.to_ascii_uppercase();
    if country.is_empty() {
        return None;
    }
    table()
        .iter()
        .find(|r| r.region_id == country)
        .map(|r| r.region_id.clone())
}
