//! TOML scenario documents.
//!
//! ```toml
//! seed = 42
//! start_time = "2024-01-01-00-00-00"
//! duration_s = 3600
//! tau_seconds = 10
//! ioe_preamble = "e17e"          # optional
//!
//! [grid]
//! origin = [45.0, 9.0]           # south-west corner, degrees
//! cell_size_m = 500.0
//! columns = 20
//! rows = 20
//!
//! [security]                     # optional
//! sensitive_keys = ["mic"]
//!
//! [[entities]]
//! guid = "e17e...."
//! broadcast_period_s = 10
//! waypoints = [{ t = 0, lat = 45.01, lon = 9.01 }]   # t is seconds from start
//! sensors = { temp = "21.5" }
//!
//! [[trackers]]
//! guid = "...."
//! lat = 45.01
//! lon = 9.01
//! profile = "BLE"                # preset name; range_m overrides it
//! range_m = [15.0, 30.0]         # optional
//! has_gps = true
//! cell_id = 12                   # optional when has_gps
//! drop_probability = 0.0         # optional
//! sensors = { gps_fix = "3d" }
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CellGrid, PowerClass, Scenario, SimEntity, SimError, SimTracker, TechProfile};
use crate::guid::{GuidPolicy, DEFAULT_PREAMBLE};
use crate::model::{GeoLocation, Guid, Payload, PayloadScope, Timestamp};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("toml: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("toml: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{0}")]
    Field(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn field(msg: impl Into<String>) -> ScenarioFileError {
    ScenarioFileError::Field(msg.into())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    seed: u64,
    start_time: Timestamp,
    duration_s: u64,
    #[serde(default = "default_tau")]
    tau_seconds: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ioe_preamble: Option<String>,
    grid: GridDoc,
    #[serde(default, skip_serializing_if = "SecurityDoc::is_empty")]
    security: SecurityDoc,
    #[serde(default)]
    entities: Vec<EntityDoc>,
    #[serde(default)]
    trackers: Vec<TrackerDoc>,
}

fn default_tau() -> u64 {
    crate::model::TraceParams::DEFAULT_TAU_S
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    origin: [f64; 2],
    cell_size_m: f64,
    columns: u32,
    rows: u32,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecurityDoc {
    #[serde(default)]
    sensitive_keys: BTreeSet<String>,
}

impl SecurityDoc {
    fn is_empty(&self) -> bool {
        self.sensitive_keys.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointDoc {
    t: u64,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityDoc {
    guid: Guid,
    broadcast_period_s: u64,
    waypoints: Vec<WaypointDoc>,
    #[serde(default)]
    sensors: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackerDoc {
    guid: Guid,
    lat: f64,
    lon: f64,
    profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range_m: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_rate_bytes_per_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power_class: Option<PowerClass>,
    has_gps: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cell_id: Option<u64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    drop_probability: f64,
    #[serde(default)]
    sensors: BTreeMap<String, String>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn geo(lat: f64, lon: f64) -> Result<GeoLocation, ScenarioFileError> {
    GeoLocation::new(lat, lon).map_err(|e| field(e.to_string()))
}

fn local_payload(sensors: BTreeMap<String, String>) -> Result<Payload, ScenarioFileError> {
    Payload::new(PayloadScope::Local, sensors).map_err(|e| field(format!("sensors: {e}")))
}

fn sensors_doc(p: &Payload) -> Result<BTreeMap<String, String>, ScenarioFileError> {
    p.entries()
        .iter()
        .map(|(k, v)| {
            let v = String::from_utf8(v.clone())
                .map_err(|_| field(format!("sensor {k:?} is not UTF-8 text")))?;
            Ok((k.clone(), v))
        })
        .collect()
}

fn profile_from(doc: &TrackerDoc) -> Result<TechProfile, ScenarioFileError> {
    let base = TechProfile::preset(&doc.profile);
    let mut p = match (base, doc.range_m) {
        (_, Some([lo, hi])) => TechProfile::new(
            doc.profile.clone(),
            lo,
            hi,
            doc.data_rate_bytes_per_s.unwrap_or(0),
            doc.power_class.unwrap_or(PowerClass::Low),
        )
        .ok_or_else(|| field(format!("tracker {}: bad range_m", doc.guid)))?,
        (Some(p), None) => p,
        (None, None) => {
            return Err(field(format!(
                "tracker {}: unknown profile {:?} and no range_m",
                doc.guid, doc.profile
            )))
        }
    };
    if let Some(rate) = doc.data_rate_bytes_per_s {
        p.data_rate_bytes_per_s = rate;
    }
    if let Some(power) = doc.power_class {
        p.power_class = power;
    }
    Ok(p)
}

/// Parses and validates a scenario document. `seed_override` replaces the
/// seed stored in the file.
pub fn parse_scenario(text: &str, seed_override: Option<u64>) -> Result<Scenario, ScenarioFileError> {
    let doc: ScenarioDoc = toml::from_str(text)?;
    let preamble = match &doc.ioe_preamble {
        None => DEFAULT_PREAMBLE,
        Some(h) => u16::from_str_radix(h, 16)
            .ok()
            .filter(|_| h.len() == 4)
            .ok_or_else(|| field(format!("ioe_preamble {h:?} is not 4 hex digits")))?,
    };
    let seed = seed_override.unwrap_or(doc.seed);
    let grid = CellGrid::new(
        geo(doc.grid.origin[0], doc.grid.origin[1])?,
        doc.grid.cell_size_m,
        doc.grid.columns,
        doc.grid.rows,
    )?;
    let start = doc.start_time;
    let entities = doc
        .entities
        .into_iter()
        .map(|e| {
            let waypoints = e
                .waypoints
                .iter()
                .map(|w| {
                    let t = Timestamp::from_seconds(start.seconds().saturating_add(w.t))
                        .map_err(|err| field(err.to_string()))?;
                    Ok((t, geo(w.lat, w.lon)?))
                })
                .collect::<Result<Vec<_>, ScenarioFileError>>()?;
            if waypoints.is_empty() {
                return Err(SimError::NoWaypoints(e.guid).into());
            }
            Ok(SimEntity::new(e.guid, waypoints, e.broadcast_period_s, local_payload(e.sensors)?)?)
        })
        .collect::<Result<Vec<_>, ScenarioFileError>>()?;
    let trackers = doc
        .trackers
        .into_iter()
        .map(|t| {
            let profile = profile_from(&t)?;
            let location = geo(t.lat, t.lon)?;
            // A cell id is implied by the position when not given.
            let cell_id = t.cell_id.or_else(|| grid.cell_of(location));
            Ok(SimTracker {
                guid: t.guid,
                location,
                profile,
                has_gps: t.has_gps,
                cell_id,
                sensors: local_payload(t.sensors)?,
                drop_probability: t.drop_probability,
            })
        })
        .collect::<Result<Vec<_>, ScenarioFileError>>()?;
    let s = Scenario {
        entities,
        trackers,
        grid,
        start_time: start,
        duration_s: doc.duration_s,
        tau_seconds: doc.tau_seconds,
        seed,
        policy: GuidPolicy::with_preamble(preamble).seeded(seed),
        sensitive_keys: doc.security.sensitive_keys,
    };
    s.validate()?;
    Ok(s)
}

pub fn scenario_to_toml(s: &Scenario) -> Result<String, ScenarioFileError> {
    let start = s.start_time.seconds();
    let entities = s
        .entities
        .iter()
        .map(|e| {
            Ok(EntityDoc {
                guid: e.guid,
                broadcast_period_s: e.broadcast_period_s,
                waypoints: e
                    .waypoints
                    .iter()
                    .map(|(t, l)| WaypointDoc {
                        t: t.seconds().saturating_sub(start),
                        lat: l.latitude(),
                        lon: l.longitude(),
                    })
                    .collect(),
                sensors: sensors_doc(&e.local_sensors)?,
            })
        })
        .collect::<Result<Vec<_>, ScenarioFileError>>()?;
    let trackers = s
        .trackers
        .iter()
        .map(|t| {
            let p = &t.profile;
            let (lo, hi) = p.operative_range_m;
            Ok(TrackerDoc {
                guid: t.guid,
                lat: t.location.latitude(),
                lon: t.location.longitude(),
                profile: p.name.clone(),
                range_m: Some([lo, hi]),
                data_rate_bytes_per_s: Some(p.data_rate_bytes_per_s),
                power_class: Some(p.power_class),
                has_gps: t.has_gps,
                cell_id: t.cell_id,
                drop_probability: t.drop_probability,
                sensors: sensors_doc(&t.sensors)?,
            })
        })
        .collect::<Result<Vec<_>, ScenarioFileError>>()?;
    let origin = s.grid.origin();
    let doc = ScenarioDoc {
        seed: s.seed,
        start_time: s.start_time,
        duration_s: s.duration_s,
        tau_seconds: s.tau_seconds,
        ioe_preamble: Some(format!("{:04x}", s.policy.ioe_preamble)),
        grid: GridDoc {
            origin: [origin.latitude(), origin.longitude()],
            cell_size_m: s.grid.cell_size_m(),
            columns: s.grid.columns(),
            rows: s.grid.rows(),
        },
        security: SecurityDoc {
            sensitive_keys: s.sensitive_keys.clone(),
        },
        entities,
        trackers,
    };
    Ok(toml::to_string(&doc)?)
}

pub fn load_scenario(
    path: &std::path::Path,
    seed_override: Option<u64>,
) -> Result<Scenario, ScenarioFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| field(format!("{}: {e}", path.display())))?;
    parse_scenario(&text, seed_override)
}
