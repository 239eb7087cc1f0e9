//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ioe_core::codec::snap_registration;
use ioe_core::geo::LocalProjection;
use ioe_core::ledger::{Ack, Chain, LedgerConfig};
use ioe_core::model::{
    GeoLocation, Guid, Payload, PayloadScope, Provenance, Registration, Resolution, Timestamp,
    TracePoint,
};
use ioe_core::trace::{CellKey, Witness};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ts(s: u64) -> Timestamp {
    Timestamp::from_seconds(s).unwrap()
}

pub fn loc(lat: f64, lon: f64) -> GeoLocation {
    GeoLocation::new(lat, lon).unwrap()
}

pub fn ioe_guid(n: u128) -> Guid {
    Guid::from_u128((0xE17E_u128 << 112) | n)
}

/// `sqrt(2^129 * -ln(1 - p))` evaluated in 512-bit fixed point from the exact
/// binary value of `p`, using the series `-ln(1 - p) = sum p^k / k`.
pub fn collision_oracle(p: f64) -> f64 {
    const FRAC: u32 = 512;
    assert!(p > 0.0 && p <= 0.5);
    let bits = p.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = (bits & ((1 << 52) - 1)) | (1 << 52);
    let shift = exp - 1075 + FRAC as i64;
    assert!(shift >= 0);
    let scaled_p = BigUint::from(mantissa) << shift as usize;
    let mut power = scaled_p.clone();
    let mut sum = BigUint::zero();
    let mut k = 1u32;
    while !power.is_zero() {
        sum += &power / BigUint::from(k);
        power = (&power * &scaled_p) >> FRAC as usize;
        k += 1;
    }
    // sum * 2^-512 * 2^129 = (2 * sum) * 2^-384; the square root halves the exponent.
    let root = (sum << 1usize).sqrt();
    let top_bits = root.bits() as i64;
    let drop = (top_bits - 64).max(0);
    let head = (&root >> drop as usize).to_u64().unwrap();
    head as f64 * 2f64.powi((drop - 192) as i32)
}

pub fn ulp_distance(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn key_text(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| rng.gen_range(0x21u8..0x7f) as char)
        .collect()
}

pub fn random_payload(rng: &mut ChaCha8Rng, scope: PayloadScope, max_entries: usize) -> Payload {
    let n = rng.gen_range(0..=max_entries);
    let mut keys = BTreeSet::new();
    while keys.len() < n {
        keys.insert(key_text(rng, 12));
    }
    let entries: Vec<(String, Vec<u8>)> = keys
        .into_iter()
        .map(|k| {
            let len = rng.gen_range(0..24);
            (k, (0..len).map(|_| rng.gen()).collect())
        })
        .collect();
    Payload::new(scope, entries).unwrap()
}

/// A registration by one of `pool`, listing a few others, inside a small box
/// around (45, 9), timed in `[0, t_max]`.
pub fn random_registration(rng: &mut ChaCha8Rng, pool: &[Guid], t_max: u64) -> Registration {
    let entity = *pool.choose(rng).unwrap();
    let k = rng.gen_range(0..=pool.len().min(4));
    let mut neighbors: Vec<Guid> = pool
        .choose_multiple(rng, k)
        .copied()
        .filter(|g| *g != entity)
        .collect();
    neighbors.sort();
    Registration::new(
        entity,
        neighbors,
        loc(45.0 + rng.gen_range(0.0..0.05), 9.0 + rng.gen_range(0.0..0.05)),
        ts(rng.gen_range(0..=t_max)),
        random_payload(rng, PayloadScope::Global, 2),
        if rng.gen_bool(0.5) {
            Resolution::High
        } else {
            Resolution::Low
        },
    )
    .unwrap()
}

pub fn guid_pool(rng: &mut ChaCha8Rng, n: usize) -> Vec<Guid> {
    (0..n).map(|_| ioe_guid(rng.gen::<u64>() as u128)).collect()
}

/// Builds a sealed chain from `n` random registrations and returns it with
/// the accepted registrations in submission order.
pub fn random_chain(
    rng: &mut ChaCha8Rng,
    n: usize,
    pool: &[Guid],
    t_max: u64,
    config: LedgerConfig,
) -> (Chain, Vec<Registration>) {
    let mut chain = Chain::new(config);
    let mut accepted = Vec::new();
    for _ in 0..n {
        let r = random_registration(rng, pool, t_max);
        if chain.submit(r.clone()).unwrap() == Ack::Accepted {
            accepted.push(snap_registration(r));
        }
    }
    if !chain.pending().is_empty() {
        chain.seal_all(config.difficulty_bits).unwrap();
    }
    (chain, accepted)
}

pub fn scan_entity(regs: &[Registration], e: Guid) -> Vec<Registration> {
    let mut out = Vec::new();
    for r in regs {
        if r.entity() == e {
            out.push(r.clone());
        }
    }
    out
}

fn time_key(r: &Registration) -> (u64, u64, u64) {
    // Coordinates are positive in every fixture, so their bit patterns sort
    // like the values.
    (
        r.time().seconds(),
        r.location().latitude().to_bits(),
        r.location().longitude().to_bits(),
    )
}

pub fn oracle_direct(regs: &[Registration], e: Guid) -> Vec<Registration> {
    let mut mine = scan_entity(regs, e);
    mine.sort_by_key(time_key);
    mine
}

pub fn direct_point(r: &Registration) -> TracePoint {
    TracePoint {
        location: r.location(),
        time: r.time(),
        provenance: Provenance::Direct,
    }
}

/// Own haversine so oracles do not lean on the crate's.
pub fn distance_m(a: GeoLocation, b: GeoLocation) -> f64 {
    let (p1, p2) = (a.latitude().to_radians(), b.latitude().to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude() - a.longitude()).to_radians();
    let s = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6_371_000.0 * s.sqrt().asin()
}

fn finish(mut points: Vec<(TracePoint, Option<Witness>)>) -> (Vec<TracePoint>, BTreeMap<usize, Witness>) {
    points.sort_by(|a, b| {
        (a.0.time, a.0.location.latitude().to_bits(), a.0.location.longitude().to_bits(), a.0.provenance as u8)
            .cmp(&(b.0.time, b.0.location.latitude().to_bits(), b.0.location.longitude().to_bits(), b.0.provenance as u8))
    });
    let ann = points
        .iter()
        .enumerate()
        .filter_map(|(i, (_, w))| w.map(|w| (i, w)))
        .collect();
    (points.into_iter().map(|(p, _)| p).collect(), ann)
}

/// Exhaustive scan of every (index, neighbor, registration) triple.
pub fn oracle_interpolate(
    regs: &[Registration],
    e: Guid,
    alpha: usize,
    delta_m: f64,
) -> (Vec<TracePoint>, BTreeMap<usize, Witness>) {
    let direct = oracle_direct(regs, e);
    let mut points: Vec<(TracePoint, Option<Witness>)> =
        direct.iter().map(|r| (direct_point(r), None)).collect();
    if direct.len() < 3 {
        return finish(points);
    }
    let everyone: BTreeSet<Guid> = regs
        .iter()
        .flat_map(|r| std::iter::once(r.entity()).chain(r.neighbors().iter().copied()))
        .collect();
    let mut used = vec![false; regs.len()];
    for o in 0..direct.len() {
        if o < alpha || o + alpha >= direct.len() {
            continue;
        }
        let (before, after) = (&direct[o - alpha], &direct[o + alpha]);
        for &n in &everyone {
            if !(before.neighbors().contains(&n) && after.neighbors().contains(&n)) {
                continue;
            }
            for (i, r) in regs.iter().enumerate() {
                let inside = r.time() > before.time() && r.time() < after.time();
                let clear = direct
                    .iter()
                    .all(|d| distance_m(d.location(), r.location()) > delta_m);
                if r.entity() == n && inside && clear && !used[i] {
                    used[i] = true;
                    points.push((
                        TracePoint {
                            location: r.location(),
                            time: r.time(),
                            provenance: Provenance::Interpolated,
                        },
                        Some(Witness {
                            neighbor: n,
                            before: o - alpha,
                            after: o + alpha,
                        }),
                    ));
                }
            }
        }
    }
    finish(points)
}

/// The single-step rule written out literally: a neighbor listed at the
/// previous and at the next location is valuable for the current one.
pub fn oracle_interpolate_alpha1(
    regs: &[Registration],
    e: Guid,
    delta_m: f64,
) -> (Vec<TracePoint>, BTreeMap<usize, Witness>) {
    let l = oracle_direct(regs, e);
    let mut points: Vec<(TracePoint, Option<Witness>)> = l.iter().map(|r| (direct_point(r), None)).collect();
    if l.len() >= 3 {
        let mut used = BTreeSet::new();
        for o in 1..l.len() - 1 {
            let prev: BTreeSet<Guid> = l[o - 1].neighbors().iter().copied().collect();
            let next: BTreeSet<Guid> = l[o + 1].neighbors().iter().copied().collect();
            for n in prev.intersection(&next) {
                for (i, r) in regs.iter().enumerate() {
                    if r.entity() != *n
                        || r.time() <= l[o - 1].time()
                        || r.time() >= l[o + 1].time()
                        || l.iter().any(|d| distance_m(d.location(), r.location()) <= delta_m)
                        || !used.insert(i)
                    {
                        continue;
                    }
                    points.push((
                        TracePoint {
                            location: r.location(),
                            time: r.time(),
                            provenance: Provenance::Interpolated,
                        },
                        Some(Witness {
                            neighbor: *n,
                            before: o - 1,
                            after: o + 1,
                        }),
                    ));
                }
            }
        }
    }
    finish(points)
}

/// Group-and-count over the flat registration list.
pub fn oracle_spread(
    regs: &[Registration],
    e: Guid,
    delta_m: f64,
    origin: GeoLocation,
) -> (BTreeMap<CellKey, usize>, BTreeMap<CellKey, f64>) {
    let proj = LocalProjection::new(origin);
    let mut hits: BTreeMap<CellKey, BTreeSet<Guid>> = BTreeMap::new();
    let mut rows = BTreeSet::new();
    for r in regs {
        if r.entity() != e && r.neighbors().len() >= 2 && r.neighbors().contains(&e) {
            rows.insert(r.entity());
            hits.entry(proj.cell_of(r.location(), delta_m))
                .or_default()
                .insert(r.entity());
        }
    }
    let counts: BTreeMap<CellKey, usize> = hits.iter().map(|(k, s)| (*k, s.len())).collect();
    let probs = counts
        .iter()
        .map(|(k, c)| (*k, *c as f64 / rows.len() as f64))
        .collect();
    (counts, probs)
}

pub fn empty_payload() -> Payload {
    Payload::empty(PayloadScope::Global)
}

pub fn plain_reg(e: Guid, neighbors: &[Guid], at: GeoLocation, t: u64) -> Registration {
    Registration::new(e, neighbors.to_vec(), at, ts(t), empty_payload(), Resolution::High).unwrap()
}
