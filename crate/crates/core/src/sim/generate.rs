use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{presets, CellGrid, Scenario, SimEntity, SimTracker, TechProfile};
use crate::codec::encode_location16;
use crate::guid::{new_foreign_guid, new_guid, GuidPolicy};
use crate::model::{GeoLocation, Payload, PayloadScope, Timestamp};

/// Shape of a generated world. Entities wander between tracker hot spots so
/// that most broadcasts are heard by someone.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomScenarioSpec {
    pub seed: u64,
    pub entities: usize,
    pub trackers: usize,
    pub duration_s: u64,
    pub tau_seconds: u64,
    pub origin: GeoLocation,
    pub cell_size_m: f64,
    pub columns: u32,
    pub rows: u32,
    /// Share of trackers that report their network cell instead of a fix.
    pub low_resolution_share: f64,
    pub drop_probability: f64,
    /// Adds a `mic` sensor to every entity and marks it sensitive.
    pub sensitive_mic: bool,
}

impl Default for RandomScenarioSpec {
    fn default() -> Self {
        RandomScenarioSpec {
            seed: 42,
            entities: 100,
            trackers: 20,
            duration_s: 3600,
            tau_seconds: crate::model::TraceParams::DEFAULT_TAU_S,
            origin: GeoLocation::new(45.0, 9.0).expect("constant"),
            cell_size_m: 250.0,
            columns: 8,
            rows: 8,
            low_resolution_share: 0.25,
            drop_probability: 0.0,
            sensitive_mic: false,
        }
    }
}

const SHORT_RANGE: [&str; 4] = ["BLE", "ZigBee", "6LoWPAN", "Z-Wave"];
const PERIODS: [u64; 4] = [10, 20, 30, 60];

pub fn random_scenario(spec: &RandomScenarioSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let policy = GuidPolicy::default().seeded(spec.seed);
    let grid = CellGrid::new(spec.origin, spec.cell_size_m, spec.columns, spec.rows)
        .expect("generator grid is valid");
    let (w, h) = grid.extent_m();
    let proj = *grid.projection();
    let at = |x: f64, y: f64| proj.to_geo(x.clamp(0.0, w), y.clamp(0.0, h)).expect("inside grid");
    let start = Timestamp::from_seconds(1_704_067_200).expect("2024-01-01");

    let profiles: Vec<TechProfile> = presets()
        .into_iter()
        .filter(|p| SHORT_RANGE.contains(&p.name.as_str()))
        .collect();
    let mut spots = Vec::with_capacity(spec.trackers);
    // Reported locations are kept pairwise distinct on the wire grid, so a
    // (time, location) pair in the ledger names a single tracker.
    let mut reported = HashSet::new();
    let trackers: Vec<SimTracker> = (0..spec.trackers)
        .map(|i| {
            let has_gps = rng.gen::<f64>() >= spec.low_resolution_share;
            let mut attempts = 0;
            let (x, y, location) = loop {
                let (x, y) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
                let location = at(x, y);
                let shown = if has_gps {
                    location
                } else {
                    grid.cell_center(grid.cell_of(location).expect("inside grid"))
                        .expect("valid cell")
                };
                attempts += 1;
                if reported.insert(encode_location16(shown)) || attempts > 1000 {
                    break (x, y, location);
                }
            };
            spots.push((x, y));
            SimTracker {
                guid: new_foreign_guid(&policy, &mut rng),
                location,
                profile: profiles.choose(&mut rng).expect("non-empty").clone(),
                has_gps,
                cell_id: grid.cell_of(location),
                sensors: Payload::new(
                    PayloadScope::Local,
                    [("station", format!("T{i:02}")), ("temp", format!("{}", rng.gen_range(15..30)))],
                )
                .expect("short keys"),
                drop_probability: spec.drop_probability,
            }
        })
        .collect();

    let end = spec.duration_s;
    let entities: Vec<SimEntity> = (0..spec.entities)
        .map(|i| {
            let guid = new_guid(&policy, &mut rng);
            let mut waypoints = Vec::new();
            let mut t = 0u64;
            while t <= end {
                let (x, y) = match spots.choose(&mut rng) {
                    Some(&(sx, sy)) if rng.gen_bool(0.8) => {
                        // Close enough to the tracker to stay inside BLE range.
                        let r = rng.gen_range(0.0..20.0);
                        let a = rng.gen_range(0.0..std::f64::consts::TAU);
                        (sx + r * a.cos(), sy + r * a.sin())
                    }
                    _ => (rng.gen_range(0.0..w), rng.gen_range(0.0..h)),
                };
                let here = at(x, y);
                waypoints.push((start.plus(t), here));
                let dwell = rng.gen_range(60..300);
                waypoints.push((start.plus(t + dwell), here));
                t += dwell + rng.gen_range(30..120);
            }
            let mut sensors = vec![
                ("hr".to_string(), format!("{}", rng.gen_range(55..110))),
                ("id".to_string(), format!("E{i:03}")),
            ];
            if spec.sensitive_mic {
                sensors.push(("mic".to_string(), format!("clip-{i:03}-{:08x}", rng.gen::<u32>())));
            }
            SimEntity::new(
                guid,
                waypoints,
                *PERIODS.choose(&mut rng).expect("non-empty"),
                Payload::new(PayloadScope::Local, sensors).expect("short keys"),
            )
            .expect("generated waypoints are ordered")
        })
        .collect();

    let mut sensitive_keys = BTreeSet::new();
    if spec.sensitive_mic {
        sensitive_keys.insert("mic".to_string());
    }
    Scenario {
        entities,
        trackers,
        grid,
        start_time: start,
        duration_s: spec.duration_s,
        tau_seconds: spec.tau_seconds,
        seed: spec.seed,
        policy,
        sensitive_keys,
    }
}
