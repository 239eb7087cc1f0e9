//! Deterministic discrete-time radio world.
//!
//! Time advances in 1 s ticks from the scenario start. At every tick each
//! tracker collects the IoE entities that broadcast at that tick and are
//! within its coverage radius. A detection of entity `e` at tick `t` becomes a
//! registration whose neighbor list holds every other entity the same tracker
//! detected during `[t, t + tau]`; registrations are therefore emitted `tau`
//! ticks late, and the last `tau` ticks are flushed at the end.

mod generate;
mod profile;
pub mod scenario_file;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use thiserror::Error;

use crate::codec;
use crate::geo::{haversine_m, LocalProjection};
use crate::guid::{is_ioe_entity, GuidPolicy};
use crate::ledger::{Ack, Chain, LedgerError};
use crate::model::{
    merge_payloads, GeoLocation, Guid, Payload, PayloadScope, Registration, Resolution, Timestamp,
    CLASH_SUFFIX,
};
use crate::secure::{self, BlobStore, KeyPair, SecureError};

pub use generate::{random_scenario, RandomScenarioSpec};
pub use profile::{presets, PowerClass, TechProfile};

const DROP_STREAM: u64 = 0x6472_6f70;
const SEAL_STREAM: u64 = 0x7365_616c;
const KEY_STREAM: u64 = 0x6b65_7973;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("entity {0} has no waypoints")]
    NoWaypoints(Guid),
    #[error("entity {0}: waypoint times must be strictly increasing")]
    UnorderedWaypoints(Guid),
    #[error("entity {0}: broadcast period must be positive")]
    ZeroPeriod(Guid),
    #[error("entity {0}: sensors must be a local payload")]
    NonLocalSensors(Guid),
    #[error("{what} {guid} lies outside the scenario area")]
    OutOfBounds { what: &'static str, guid: Guid },
    #[error("tracker {0} has no GPS and no cell id")]
    MissingCell(Guid),
    #[error("tracker {guid} declares cell {declared} but sits in cell {actual:?}")]
    WrongCell {
        guid: Guid,
        declared: u64,
        actual: Option<u64>,
    },
    #[error("tracker {0}: drop probability must lie in [0, 1]")]
    DropProbability(Guid),
    #[error("GUID {0} is used twice")]
    DuplicateGuid(Guid),
    #[error("invalid cell grid: {0}")]
    Grid(String),
    #[error("scenario marks keys sensitive but no blob store was supplied")]
    MissingBlobStore,
    #[error("expected {expected} tracker key pairs, got {got}")]
    KeyCount { expected: usize, got: usize },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Secure(#[from] SecureError),
}

/// Square cells laid out east then north from a south-west corner.
/// Cell ids count row-major: `row * columns + column`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CellGrid {
    projection: LocalProjection,
    cell_size_m: f64,
    columns: u32,
    rows: u32,
}

impl CellGrid {
    pub fn new(origin: GeoLocation, cell_size_m: f64, columns: u32, rows: u32) -> Result<Self, SimError> {
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(SimError::Grid(format!("cell size {cell_size_m}")));
        }
        if columns == 0 || rows == 0 {
            return Err(SimError::Grid("grid needs at least one row and column".into()));
        }
        let grid = CellGrid {
            projection: LocalProjection::new(origin),
            cell_size_m,
            columns,
            rows,
        };
        let (w, h) = grid.extent_m();
        if grid.projection.to_geo(w, h).is_none() {
            return Err(SimError::Grid("grid extends past the pole or antimeridian".into()));
        }
        Ok(grid)
    }

    pub fn origin(&self) -> GeoLocation {
        self.projection.origin()
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn columns(&self) -> u32 {
        self.columns
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn projection(&self) -> &LocalProjection {
        &self.projection
    }

    /// Width and height in meters.
    pub fn extent_m(&self) -> (f64, f64) {
        (
            self.columns as f64 * self.cell_size_m,
            self.rows as f64 * self.cell_size_m,
        )
    }

    pub fn contains(&self, loc: GeoLocation) -> bool {
        let (x, y) = self.projection.to_local(loc);
        let (w, h) = self.extent_m();
        (0.0..=w).contains(&x) && (0.0..=h).contains(&y)
    }

    pub fn cell_of(&self, loc: GeoLocation) -> Option<u64> {
        if !self.contains(loc) {
            return None;
        }
        let (x, y) = self.projection.to_local(loc);
        // Points on the far edges belong to the last column/row.
        let col = ((x / self.cell_size_m).floor() as u64).min(self.columns as u64 - 1);
        let row = ((y / self.cell_size_m).floor() as u64).min(self.rows as u64 - 1);
        Some(row * self.columns as u64 + col)
    }

    pub fn cell_center(&self, id: u64) -> Option<GeoLocation> {
        if id >= self.columns as u64 * self.rows as u64 {
            return None;
        }
        let col = (id % self.columns as u64) as f64;
        let row = (id / self.columns as u64) as f64;
        self.projection
            .to_geo((col + 0.5) * self.cell_size_m, (row + 0.5) * self.cell_size_m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimEntity {
    pub guid: Guid,
    pub waypoints: Vec<(Timestamp, GeoLocation)>,
    pub broadcast_period_s: u64,
    pub local_sensors: Payload,
}

impl SimEntity {
    pub fn new(
        guid: Guid,
        waypoints: Vec<(Timestamp, GeoLocation)>,
        broadcast_period_s: u64,
        local_sensors: Payload,
    ) -> Result<Self, SimError> {
        if waypoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(SimError::UnorderedWaypoints(guid));
        }
        if broadcast_period_s == 0 {
            return Err(SimError::ZeroPeriod(guid));
        }
        if local_sensors.scope() != PayloadScope::Local {
            return Err(SimError::NonLocalSensors(guid));
        }
        Ok(SimEntity {
            guid,
            waypoints,
            broadcast_period_s,
            local_sensors,
        })
    }

    /// Broadcast phase is anchored at `anchor` for every entity.
    pub fn broadcasts_at(&self, t: Timestamp, anchor: Timestamp) -> bool {
        t >= anchor && (t.seconds() - anchor.seconds()).is_multiple_of(self.broadcast_period_s)
    }
}

/// Piecewise-linear position along the waypoints, clamped to the first and
/// last waypoint outside their time span.
pub fn position_at(e: &SimEntity, t: Timestamp) -> Result<GeoLocation, SimError> {
    let wps = &e.waypoints;
    let (first, last) = match (wps.first(), wps.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(SimError::NoWaypoints(e.guid)),
    };
    if t <= first.0 {
        return Ok(first.1);
    }
    if t >= last.0 {
        return Ok(last.1);
    }
    // First waypoint strictly after t; its predecessor is at or before t.
    let next = wps.partition_point(|(wt, _)| *wt <= t);
    let (t0, a) = wps[next - 1];
    let (t1, b) = wps[next];
    if t0 == t {
        return Ok(a);
    }
    let f = (t.seconds() - t0.seconds()) as f64 / (t1.seconds() - t0.seconds()) as f64;
    let lat = a.latitude() + f * (b.latitude() - a.latitude());
    let lon = a.longitude() + f * (b.longitude() - a.longitude());
    Ok(GeoLocation::new(lat, lon).expect("convex combination of valid coordinates"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTracker {
    pub guid: Guid,
    pub location: GeoLocation,
    pub profile: TechProfile,
    pub has_gps: bool,
    pub cell_id: Option<u64>,
    pub sensors: Payload,
    /// Chance that a detection is lost to overload. Drawn from the scenario seed.
    pub drop_probability: f64,
}

/// Entities heard by `tracker` at `t`, sorted by GUID. Radios without the IoE
/// preamble are ignored. The coverage boundary is closed.
pub fn detect(
    tracker: &SimTracker,
    entities: &[SimEntity],
    t: Timestamp,
    anchor: Timestamp,
    policy: &GuidPolicy,
) -> Vec<Guid> {
    let range = tracker.profile.max_range_m();
    let mut heard: Vec<Guid> = entities
        .iter()
        .filter(|e| is_ioe_entity(e.guid, policy) && e.broadcasts_at(t, anchor))
        .filter(|e| {
            position_at(e, t).is_ok_and(|p| haversine_m(p, tracker.location) <= range)
        })
        .map(|e| e.guid)
        .collect();
    heard.sort_unstable();
    heard
}

/// The registration a tracker submits for `entity` detected at `t`.
///
/// `window` holds the tracker's detections as (guid, time); those other than
/// the subject falling in `[t, t + tau]` become the neighbor list, sorted by
/// GUID. The location is the tracker's own fix when it has GPS, otherwise the
/// center of its network cell, in both cases rounded to the wire grid.
pub fn build_registration(
    tracker: &SimTracker,
    entity: &SimEntity,
    t: Timestamp,
    window: &[(Guid, Timestamp)],
    tau: u64,
    grid: &CellGrid,
) -> Result<Registration, SimError> {
    let horizon = t.plus(tau);
    let neighbors: BTreeSet<Guid> = window
        .iter()
        .filter(|(g, wt)| *g != entity.guid && *wt >= t && *wt <= horizon)
        .map(|(g, _)| *g)
        .collect();
    let (location, resolution) = if tracker.has_gps {
        (tracker.location, Resolution::High)
    } else {
        let id = tracker.cell_id.ok_or(SimError::MissingCell(tracker.guid))?;
        let center = grid.cell_center(id).ok_or(SimError::WrongCell {
            guid: tracker.guid,
            declared: id,
            actual: grid.cell_of(tracker.location),
        })?;
        (center, Resolution::Low)
    };
    let payload = merge_payloads(&entity.local_sensors, &tracker.sensors);
    Ok(Registration::new(
        entity.guid,
        neighbors.into_iter().collect(),
        codec::snap_location(location),
        t,
        payload,
        resolution,
    )
    .expect("neighbors exclude the subject and are deduplicated"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub entities: Vec<SimEntity>,
    pub trackers: Vec<SimTracker>,
    pub grid: CellGrid,
    pub start_time: Timestamp,
    pub duration_s: u64,
    pub tau_seconds: u64,
    pub seed: u64,
    pub policy: GuidPolicy,
    /// Payload keys whose values are sealed into the blob store.
    pub sensitive_keys: BTreeSet<String>,
}

impl Scenario {
    /// Checks the cross-object invariants: unique GUIDs, everything inside
    /// the grid, and cell ids that match tracker positions.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut guids = HashSet::new();
        for e in &self.entities {
            if !guids.insert(e.guid) {
                return Err(SimError::DuplicateGuid(e.guid));
            }
            if e.waypoints.iter().any(|(_, l)| !self.grid.contains(*l)) {
                return Err(SimError::OutOfBounds {
                    what: "entity",
                    guid: e.guid,
                });
            }
        }
        for tr in &self.trackers {
            if !guids.insert(tr.guid) {
                return Err(SimError::DuplicateGuid(tr.guid));
            }
            if !self.grid.contains(tr.location) {
                return Err(SimError::OutOfBounds {
                    what: "tracker",
                    guid: tr.guid,
                });
            }
            if !(0.0..=1.0).contains(&tr.drop_probability) {
                return Err(SimError::DropProbability(tr.guid));
            }
            let actual = self.grid.cell_of(tr.location);
            match tr.cell_id {
                None if !tr.has_gps => return Err(SimError::MissingCell(tr.guid)),
                Some(declared) if Some(declared) != actual => {
                    return Err(SimError::WrongCell {
                        guid: tr.guid,
                        declared,
                        actual,
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn end_time(&self) -> Timestamp {
        self.start_time.plus(self.duration_s)
    }
}

/// Key pairs for the scenario's trackers, derived from its seed.
pub fn tracker_keys(s: &Scenario) -> Vec<KeyPair> {
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed ^ KEY_STREAM);
    s.trackers.iter().map(|_| KeyPair::generate(&mut rng)).collect()
}

/// Where sensitive values go during a run.
pub struct SecureSink<'a> {
    pub store: &'a BlobStore,
    /// One key pair per tracker, in scenario order.
    pub keys: &'a [KeyPair],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub ticks: u64,
    pub detections: u64,
    pub dropped: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub blocks_sealed: u64,
    pub blobs_written: u64,
}

fn base_key(key: &str) -> &str {
    let mut k = key;
    while let Some(stripped) = k.strip_suffix(CLASH_SUFFIX) {
        k = stripped;
    }
    k
}

fn is_sensitive(sensitive: &BTreeSet<String>, key: &str) -> bool {
    sensitive.contains(key) || sensitive.contains(base_key(key))
}

/// Runs the scenario without encryption. Sensitive keys, if any, are an error.
pub fn run_scenario(s: &Scenario, chain: Chain) -> Result<Chain, SimError> {
    run_scenario_with(s, chain, None).map(|(c, _)| c)
}

/// Runs the scenario, submitting every registration to `chain` and sealing
/// whenever the pending pool reaches the configured block size, then once
/// more at the end.
pub fn run_scenario_with(
    s: &Scenario,
    mut chain: Chain,
    sink: Option<SecureSink<'_>>,
) -> Result<(Chain, RunStats), SimError> {
    s.validate()?;
    if !s.sensitive_keys.is_empty() {
        match &sink {
            None => return Err(SimError::MissingBlobStore),
            Some(sink) if sink.keys.len() != s.trackers.len() => {
                return Err(SimError::KeyCount {
                    expected: s.trackers.len(),
                    got: sink.keys.len(),
                })
            }
            Some(_) => {}
        }
    }
    let cfg = chain.config();
    let by_guid: HashMap<Guid, &SimEntity> = s.entities.iter().map(|e| (e.guid, e)).collect();
    let mut drop_rng = ChaCha8Rng::seed_from_u64(s.seed ^ DROP_STREAM);
    let mut seal_rng = ChaCha20Rng::seed_from_u64(s.seed ^ SEAL_STREAM);
    let mut stats = RunStats::default();
    // Per tracker: detections of the ticks not yet finalized, oldest first.
    let mut windows: Vec<VecDeque<(u64, Vec<Guid>)>> = vec![VecDeque::new(); s.trackers.len()];

    let mut finalize = |tick: u64,
                        windows: &mut Vec<VecDeque<(u64, Vec<Guid>)>>,
                        chain: &mut Chain,
                        stats: &mut RunStats|
     -> Result<(), SimError> {
        let t = s.start_time.plus(tick);
        for (k, tracker) in s.trackers.iter().enumerate() {
            let window: Vec<(Guid, Timestamp)> = windows[k]
                .iter()
                .filter(|(wt, _)| *wt >= tick && *wt <= tick + s.tau_seconds)
                .flat_map(|(wt, gs)| gs.iter().map(move |g| (*g, s.start_time.plus(*wt))))
                .collect();
            let subjects = windows[k]
                .iter()
                .find(|(wt, _)| *wt == tick)
                .map(|(_, gs)| gs.clone())
                .unwrap_or_default();
            for g in subjects {
                let entity = by_guid[&g];
                let mut reg = build_registration(tracker, entity, t, &window, s.tau_seconds, &s.grid)?;
                if let Some(sink) = &sink {
                    if !s.sensitive_keys.is_empty() {
                        reg = seal_sensitive(reg, &s.sensitive_keys, sink, k, &mut seal_rng, stats)?;
                    }
                }
                match chain.submit(reg)? {
                    Ack::Accepted => stats.accepted += 1,
                    Ack::Duplicate => stats.duplicates += 1,
                }
                if chain.pending().len() >= cfg.max_block_size {
                    chain.seal_block(cfg.difficulty_bits)?;
                    stats.blocks_sealed += 1;
                }
            }
            while windows[k].front().is_some_and(|(wt, _)| *wt <= tick) {
                windows[k].pop_front();
            }
        }
        Ok(())
    };

    for tick in 0..=s.duration_s {
        let t = s.start_time.plus(tick);
        for (k, tracker) in s.trackers.iter().enumerate() {
            let mut heard = detect(tracker, &s.entities, t, s.start_time, &s.policy);
            stats.detections += heard.len() as u64;
            if tracker.drop_probability > 0.0 {
                let before = heard.len();
                heard.retain(|_| drop_rng.gen::<f64>() >= tracker.drop_probability);
                stats.dropped += (before - heard.len()) as u64;
            }
            windows[k].push_back((tick, heard));
        }
        stats.ticks += 1;
        if tick >= s.tau_seconds {
            finalize(tick - s.tau_seconds, &mut windows, &mut chain, &mut stats)?;
        }
    }
    for tick in (s.duration_s + 1).saturating_sub(s.tau_seconds)..=s.duration_s {
        finalize(tick, &mut windows, &mut chain, &mut stats)?;
    }
    if !chain.pending().is_empty() {
        stats.blocks_sealed += chain.seal_all(cfg.difficulty_bits)? as u64;
    }
    Ok((chain, stats))
}

fn seal_sensitive(
    reg: Registration,
    sensitive: &BTreeSet<String>,
    sink: &SecureSink<'_>,
    tracker_index: usize,
    rng: &mut ChaCha20Rng,
    stats: &mut RunStats,
) -> Result<Registration, SimError> {
    let public = sink.keys[tracker_index].public_bytes();
    let payload = reg.payload().clone().map_values(|key, value| {
        if !is_sensitive(sensitive, key) {
            return Ok::<_, SimError>(None);
        }
        let single = Payload::new(PayloadScope::Global, [(key, value)])
            .expect("entry came from a valid payload");
        let envelope = secure::encrypt_payload_with_rng(&single, &public, rng)?;
        let address = sink.store.store(&envelope)?;
        stats.blobs_written += 1;
        Ok(Some(address.as_str().as_bytes().to_vec()))
    })?;
    Ok(Registration::new(
        reg.entity(),
        reg.neighbors().to_vec(),
        reg.location(),
        reg.time(),
        payload,
        reg.resolution(),
    )
    .expect("only payload values changed"))
}

impl From<crate::model::PayloadError> for SimError {
    fn from(e: crate::model::PayloadError) -> Self {
        SimError::Ledger(LedgerError::Codec(e.into()))
    }
}
