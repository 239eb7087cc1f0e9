//! End-to-end acceptance checks, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line straight to stdout so it shows up even
//! when the harness captures output.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use ioe_core::codec::{
    decode_entity_packet, decode_location16, decode_registration_packet, decode_registration_stream,
    encode_entity_packet, encode_registration_packet, CodecError, EntityPacket,
};
use ioe_core::guid::collision_bound;
use ioe_core::ledger::file::{chain_to_string, save};
use ioe_core::ledger::{Block, Chain, LedgerConfig, ValidationReport};
use ioe_core::model::{Guid, Payload, PayloadScope, Provenance, Registration, Resolution, TraceParams};
use ioe_core::secure::{decrypt_payload, key_fingerprint, BlobStore, ContentAddress};
use ioe_core::sim::{
    random_scenario, run_scenario, run_scenario_with, tracker_keys, RandomScenarioSpec, SecureSink,
};
use ioe_core::trace::{direct_trace, interpolate_trace, spread_trace, LedgerIndex, Witness};

fn report(n: u32, ok: bool, detail: String) {
    let line = format!(
        "criterion {n}: {} {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {n} failed: {detail}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn criterion_01_collision_bound() {
    let start = Instant::now();
    let headline = collision_bound(1e-9).unwrap();
    let in_range = (0.95e15..=1.05e15).contains(&headline);
    let mut worst = 0;
    for p in [1e-12, 1e-9, 1e-6, 0.5] {
        worst = worst.max(common::ulp_distance(collision_bound(p).unwrap(), common::collision_oracle(p)));
    }
    let elapsed = start.elapsed();
    let ok = in_range && worst <= 10 && elapsed < Duration::from_secs(1);
    report(
        1,
        ok,
        format!(
            "bound(1e-9)={headline:.6e} in [0.95e15, 1.05e15]: {in_range}; max oracle distance {worst} ulp; {:.3}s",
            secs(elapsed)
        ),
    );
}

fn documented(e: &CodecError) -> bool {
    matches!(
        e,
        CodecError::Truncated { .. }
            | CodecError::TrailingBytes(_)
            | CodecError::MalformedPayload(_)
            | CodecError::InvalidField(_)
            | CodecError::PayloadTooLarge(_)
    )
}

#[test]
fn criterion_02_codec_soundness() {
    let start = Instant::now();
    let mut rng = common::rng(2);
    let mut round_trips = 0;
    let mut failures = 0;
    for _ in 0..10_000 {
        let p = EntityPacket {
            guid: Guid::from_u128(rng.gen()),
            local_payload: common::random_payload(&mut rng, PayloadScope::Local, 4),
        };
        round_trips += 1;
        if decode_entity_packet(&encode_entity_packet(&p).unwrap()).ok() != Some(p) {
            failures += 1;
        }
    }
    for _ in 0..10_000 {
        let e: u128 = rng.gen();
        let mut ns: Vec<Guid> = (0..rng.gen_range(0..5))
            .map(|_| Guid::from_u128(rng.gen()))
            .filter(|g| g.as_u128() != e)
            .collect();
        ns.sort();
        ns.dedup();
        let r = Registration::new(
            Guid::from_u128(e),
            ns,
            decode_location16(rng.gen(), rng.gen()),
            common::ts(rng.gen_range(0..=ioe_core::model::Timestamp::MAX_SECONDS)),
            common::random_payload(&mut rng, PayloadScope::Global, 4),
            if rng.gen() { Resolution::High } else { Resolution::Low },
        )
        .unwrap();
        round_trips += 1;
        if decode_registration_packet(&encode_registration_packet(&r).unwrap()).ok() != Some(r) {
            failures += 1;
        }
    }
    let mut fuzzed = 0;
    let mut bad = 0;
    for _ in 0..100_000 {
        let len = rng.gen_range(0..128);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        fuzzed += 1;
        let entity_ok = match decode_entity_packet(&bytes) {
            Ok(p) => encode_entity_packet(&p).unwrap() == bytes,
            Err(e) => documented(&e),
        };
        let reg_ok = match decode_registration_packet(&bytes) {
            Ok(r) => encode_registration_packet(&r).unwrap() == bytes,
            Err(e) => documented(&e),
        };
        let stream_ok = match decode_registration_stream(&bytes) {
            Ok(rs) => rs.iter().flat_map(|r| encode_registration_packet(r).unwrap()).collect::<Vec<_>>() == bytes,
            Err(e) => documented(&e),
        };
        if !(entity_ok && reg_ok && stream_ok) {
            bad += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        failures == 0 && bad == 0 && elapsed < Duration::from_secs(60),
        format!("{round_trips} round-trips, {failures} failures; {fuzzed} fuzz inputs, {bad} undocumented outcomes; {:.2}s", secs(elapsed)),
    );
}

#[test]
fn criterion_03_tamper_evidence() {
    let start = Instant::now();
    let mut rng = common::rng(3);
    let pool = common::guid_pool(&mut rng, 16);
    let (chain, _) = common::random_chain(&mut rng, 20 * 64, &pool, 86_400, LedgerConfig::default());
    assert_eq!(chain.blocks().len(), 20);
    let images: Vec<Vec<u8>> = chain.blocks().iter().map(Block::to_bytes).collect();
    let mut correct = 0;
    for _ in 0..200 {
        let b = rng.gen_range(0..images.len());
        let mut image = images[b].clone();
        let i = rng.gen_range(0..image.len());
        image[i] ^= rng.gen_range(1..=255u8);
        let mut blocks = chain.blocks().to_vec();
        blocks[b] = Block::from_bytes(&image).unwrap();
        if let ValidationReport::Invalid { first_bad_index, .. } =
            Chain::from_blocks(chain.config(), blocks).validate()
        {
            if first_bad_index == b {
                correct += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        3,
        correct == 200 && elapsed < Duration::from_secs(10),
        format!("{correct}/200 mutations located; {:.2}s", secs(elapsed)),
    );
}

#[test]
fn criterion_04_algorithm1_oracle() {
    let start = Instant::now();
    let mut rng = common::rng(4);
    let mut mismatches = 0;
    let mut queries = 0;
    let mut largest = 0;
    for ledger in 0..50 {
        let n = if ledger == 0 { 10_000 } else { rng.gen_range(1..=10_000) };
        let pool = common::guid_pool(&mut rng, 12);
        let (chain, accepted) = common::random_chain(&mut rng, n, &pool, 86_400, LedgerConfig::default());
        largest = largest.max(accepted.len());
        for g in pool.iter().chain(std::iter::once(&common::ioe_guid(0xabad))) {
            queries += 1;
            if chain.entity_registrations(*g) != common::scan_entity(&accepted, *g) {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        4,
        mismatches == 0 && elapsed < Duration::from_secs(30),
        format!("{queries} queries over 50 ledgers (largest {largest}), {mismatches} mismatches; {:.2}s", secs(elapsed)),
    );
}

fn sealed(regs: Vec<Registration>) -> Chain {
    let mut chain = Chain::new(LedgerConfig {
        difficulty_bits: 8,
        max_block_size: 4,
    });
    for r in regs {
        chain.submit(r).unwrap();
    }
    chain.seal_all(8).unwrap();
    chain
}

#[test]
fn criterion_05_direct_tracing() {
    let e = common::ioe_guid(0xe);
    let other = common::ioe_guid(0xf);
    // Six detections a few hundred meters to kilometers apart.
    let six: Vec<(u64, f64, f64)> = vec![
        (1_000, 45.00, 9.00),
        (1_600, 45.02, 9.01),
        (2_300, 45.03, 9.04),
        (2_900, 45.05, 9.05),
        (3_500, 45.04, 9.08),
        (4_200, 45.06, 9.10),
    ];
    let mut regs: Vec<Registration> = six
        .iter()
        .map(|(t, lat, lon)| common::plain_reg(e, &[], common::loc(*lat, *lon), *t))
        .collect();
    regs.push(common::plain_reg(other, &[], common::loc(45.0, 9.0), 1_500));
    regs.shuffle(&mut common::rng(5));
    let chain = sealed(regs);
    let trace = direct_trace(e, &LedgerIndex::from_chain(&chain));
    let expected: Vec<_> = six
        .iter()
        .map(|(t, lat, lon)| (*t, ioe_core::codec::snap_location(common::loc(*lat, *lon))))
        .collect();
    let got: Vec<_> = trace.points().iter().map(|p| (p.time.seconds(), p.location)).collect();
    let fixture_ok = got == expected && trace.points().iter().all(|p| p.provenance == Provenance::Direct);

    let mut rng = common::rng(55);
    let mut oracle_ok = 0;
    for _ in 0..50 {
        let pool = common::guid_pool(&mut rng, 8);
        let n = rng.gen_range(0..=2_000);
        let (chain, accepted) = common::random_chain(&mut rng, n, &pool, 3_600, LedgerConfig::default());
        let idx = LedgerIndex::from_chain(&chain);
        if pool.iter().all(|g| {
            let oracle: Vec<_> = common::oracle_direct(&accepted, *g).iter().map(common::direct_point).collect();
            direct_trace(*g, &idx).points() == oracle.as_slice()
        }) {
            oracle_ok += 1;
        }
    }
    report(
        5,
        fixture_ok && oracle_ok == 50,
        format!("six-point fixture ordered: {fixture_ok}; sort oracle agrees on {oracle_ok}/50 ledgers"),
    );
}

#[test]
fn criterion_06_interpolate_tracing() {
    let e = common::ioe_guid(0x1);
    let n = common::ioe_guid(0x2);
    let l1 = common::loc(45.00, 9.00);
    let l2 = common::loc(45.02, 9.02);
    let l3 = common::loc(45.04, 9.04);
    let n_second = common::loc(45.02, 9.06);
    let chain = sealed(vec![
        common::plain_reg(e, &[n], l1, 100),
        common::plain_reg(n, &[e], l1, 100),
        common::plain_reg(e, &[], l2, 200),
        common::plain_reg(n, &[], n_second, 150),
        common::plain_reg(e, &[n], l3, 300),
        common::plain_reg(n, &[e], l3, 300),
    ]);
    let idx = LedgerIndex::from_chain(&chain);
    let (trace, ann) = interpolate_trace(e, &idx, &TraceParams::default()).unwrap();
    let interpolated: Vec<_> = trace
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.provenance == Provenance::Interpolated)
        .map(|(i, p)| (i, p.time.seconds(), p.location))
        .collect();
    let fixture_ok = trace.len() == 4
        && interpolated == vec![(1, 150, ioe_core::codec::snap_location(n_second))]
        && ann == BTreeMap::from([(1, Witness { neighbor: n, before: 0, after: 2 })]);

    let mut rng = common::rng(6);
    let mut agree = 0;
    let mut inserted = 0;
    for _ in 0..50 {
        let pool = common::guid_pool(&mut rng, 6);
        let size = rng.gen_range(0..=500);
        let (chain, accepted) = common::random_chain(&mut rng, size, &pool, 3_600, LedgerConfig::default());
        let idx = LedgerIndex::from_chain(&chain);
        let all = pool.iter().all(|g| {
            let (trace, ann) = interpolate_trace(*g, &idx, &TraceParams::default()).unwrap();
            inserted += ann.len();
            let general = common::oracle_interpolate(&accepted, *g, 1, TraceParams::DEFAULT_DELTA_M);
            let literal = common::oracle_interpolate_alpha1(&accepted, *g, TraceParams::DEFAULT_DELTA_M);
            (trace.points(), &ann) == (general.0.as_slice(), &general.1)
                && (trace.points(), &ann) == (literal.0.as_slice(), &literal.1)
        });
        if all {
            agree += 1;
        }
    }

    let mut degenerate_ok = true;
    for seed in 0..10 {
        let mut rng = common::rng(600 + seed);
        let pool = common::guid_pool(&mut rng, 4);
        let regs: Vec<Registration> = (0..200)
            .map(|t| {
                let g = *pool.choose(&mut rng).unwrap();
                common::plain_reg(g, &[], common::loc(45.0 + rng.gen_range(0.0..0.1), 9.0), t)
            })
            .collect();
        let idx = LedgerIndex::from_chain(&sealed(regs));
        for g in &pool {
            let (trace, ann) = interpolate_trace(*g, &idx, &TraceParams::default()).unwrap();
            degenerate_ok &= trace == direct_trace(*g, &idx) && ann.is_empty();
        }
    }
    report(
        6,
        fixture_ok && agree == 50 && inserted > 0 && degenerate_ok,
        format!(
            "witness fixture: {fixture_ok}; oracles agree on {agree}/50 ledgers ({inserted} insertions); no-neighbor ledgers unchanged: {degenerate_ok}"
        ),
    );
}

#[test]
fn criterion_07_spread_tracing() {
    let mut rng = common::rng(7);
    let origin = common::loc(45.0, 9.0);
    let mut agree = 0;
    let mut monotone = 0;
    let mut rows_seen = 0;
    for _ in 0..50 {
        let pool = common::guid_pool(&mut rng, 8);
        let size = rng.gen_range(0..=2_000);
        // Full-precision locations so the small deltas see distinct cells.
        let regs: Vec<Registration> = (0..size)
            .map(|_| common::random_registration(&mut rng, &pool, 3_600))
            .collect();
        let idx = LedgerIndex::from_registrations(regs.clone());
        let mut ledger_agrees = true;
        let mut ledger_monotone = true;
        for g in &pool {
            let mut previous = usize::MAX;
            for delta in [1.0, 10.0, 100.0, 1000.0] {
                let m = spread_trace(*g, &idx, delta, origin).unwrap();
                rows_seen += m.rows.len();
                let (counts, probs) = common::oracle_spread(&regs, *g, delta, origin);
                ledger_agrees &= m.cell_counts == counts && m.probabilities == probs;
                ledger_monotone &= m.distinct_cells() <= previous;
                previous = m.distinct_cells();
            }
        }
        agree += ledger_agrees as usize;
        monotone += ledger_monotone as usize;
    }
    report(
        7,
        agree == 50 && monotone == 50 && rows_seen > 0,
        format!("group-count oracle agrees on {agree}/50 ledgers; delta monotonicity on {monotone}/50"),
    );
}

#[test]
fn criterion_08_simulator() {
    // One static entity next to one tracker, broadcasting every 10 s for 30 s.
    let text = r#"
seed = 8
start_time = "2024-01-01-00-00-00"
duration_s = 30
tau_seconds = 10

[grid]
origin = [45.0, 9.0]
cell_size_m = 100.0
columns = 10
rows = 10

[[entities]]
guid = "e17e0000-0000-4000-8000-000000000001"
broadcast_period_s = 10
waypoints = [{ t = 0, lat = 45.0005, lon = 9.0005 }]

[[trackers]]
guid = "00000000-0000-4000-8000-0000000000aa"
lat = 45.0005
lon = 9.0006
profile = "BLE"
has_gps = true
"#;
    let s = ioe_core::sim::scenario_file::parse_scenario(text, None).unwrap();
    let chain = run_scenario(&s, Chain::default()).unwrap();
    let times: Vec<u64> = chain
        .sealed_registrations()
        .map(|r| r.time().seconds() - s.start_time.seconds())
        .collect();
    let fixture_ok = times == vec![0, 10, 20, 30];

    let spec = RandomScenarioSpec {
        seed: 88,
        ..Default::default()
    };
    let world = random_scenario(&spec);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ledger"), dir.path().join("b.ledger"));
    let first = run_scenario(&world, Chain::default()).unwrap();
    save(&first, &a).unwrap();
    save(&run_scenario(&random_scenario(&spec), Chain::default()).unwrap(), &b).unwrap();
    let identical = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();

    // Same (tick, reported location) means same tracker in generated worlds.
    let mut groups: BTreeMap<(u64, (u16, u16)), Vec<Registration>> = BTreeMap::new();
    for r in first.sealed_registrations() {
        groups
            .entry((r.time().seconds(), ioe_core::codec::encode_location16(r.location())))
            .or_default()
            .push(r);
    }
    let mut pairs = 0;
    let mut broken = 0;
    for group in groups.values() {
        for x in group {
            for y in group {
                if x.entity() != y.entity() {
                    pairs += 1;
                    if !x.neighbors().contains(&y.entity()) {
                        broken += 1;
                    }
                }
            }
        }
    }
    report(
        8,
        fixture_ok && identical && pairs > 0 && broken == 0,
        format!(
            "static fixture times {times:?}; re-run byte-identical: {identical}; {pairs} same-tick pairs over {} entities, {broken} asymmetric",
            world.entities.len()
        ),
    );
}

#[test]
fn criterion_09_secure_payload() {
    let spec = RandomScenarioSpec {
        seed: 9,
        entities: 40,
        trackers: 10,
        duration_s: 900,
        sensitive_mic: true,
        ..Default::default()
    };
    let s = random_scenario(&spec);
    let keys = tracker_keys(&s);
    let dir = tempfile::tempdir().unwrap();
    let store = BlobStore::open(dir.path()).unwrap();
    let (chain, stats) = run_scenario_with(
        &s,
        Chain::default(),
        Some(SecureSink {
            store: &store,
            keys: &keys,
        }),
    )
    .unwrap();
    let originals: BTreeMap<Guid, &Payload> = s.entities.iter().map(|e| (e.guid, &e.local_sensors)).collect();
    let mut checked = 0;
    let mut problems = Vec::new();
    for r in chain.sealed_registrations() {
        let value = match r.payload().get("mic") {
            Some(v) => v,
            None => {
                problems.push(format!("{}: mic missing", r.entity()));
                continue;
            }
        };
        if !ContentAddress::is_address(value) {
            problems.push(format!("{}: plaintext in ledger", r.entity()));
            continue;
        }
        let address = ContentAddress::parse(std::str::from_utf8(value).unwrap()).unwrap();
        let envelope = match store.load(&address) {
            Ok(e) => e,
            Err(e) => {
                problems.push(format!("{address}: {e}"));
                continue;
            }
        };
        let Some(owner) = keys
            .iter()
            .find(|k| key_fingerprint(&k.public_bytes()) == envelope.recipient_fingerprint)
        else {
            problems.push(format!("{address}: no tracker key matches"));
            continue;
        };
        match decrypt_payload(&envelope, owner) {
            Ok(p) if p.get("mic") == originals[&r.entity()].get("mic") => checked += 1,
            Ok(_) => problems.push(format!("{address}: wrong plaintext")),
            Err(e) => problems.push(format!("{address}: {e}")),
        }
    }
    let verify = store.verify().unwrap();
    report(
        9,
        problems.is_empty() && checked > 0 && verify.corrupt.is_empty(),
        format!(
            "{checked} sensitive values decrypted, {} blobs verified, {} problems{}",
            verify.checked,
            problems.len(),
            problems.first().map(|p| format!(" (first: {p})")).unwrap_or_default()
        ),
    );
    assert!(stats.blobs_written > 0);
}

#[test]
fn criterion_10_end_to_end() {
    let s = random_scenario(&RandomScenarioSpec::default());
    let start = Instant::now();
    let chain = run_scenario(&s, Chain::default()).unwrap();
    let sim_time = start.elapsed();
    let valid = chain.validate().is_ok();
    let count = chain.registration_count();

    let start = Instant::now();
    let idx = LedgerIndex::from_chain(&chain);
    let index_time = start.elapsed();
    // The busiest entity makes for the heaviest queries.
    let mut per_entity: BTreeMap<Guid, usize> = BTreeMap::new();
    for r in idx.registrations() {
        *per_entity.entry(r.entity()).or_default() += 1;
    }
    let (&subject, &own) = per_entity.iter().max_by_key(|(_, c)| **c).unwrap();
    let params = TraceParams::default();

    let t = Instant::now();
    let direct = direct_trace(subject, &idx);
    let direct_time = index_time + t.elapsed();
    let t = Instant::now();
    let (interp, _) = interpolate_trace(subject, &idx, &params).unwrap();
    let interp_time = index_time + t.elapsed();
    let t = Instant::now();
    let spread = spread_trace(subject, &idx, params.delta_meters, s.grid.origin()).unwrap();
    let spread_time = index_time + t.elapsed();

    let one = Duration::from_secs(1);
    let ok = valid
        && sim_time < Duration::from_secs(60)
        && (8_000..=12_000).contains(&count)
        && direct.len() == own
        && interp.len() >= direct.len()
        && direct_time < one
        && interp_time < one
        && spread_time < one;
    report(
        10,
        ok,
        format!(
            "{} entities, {} trackers, {}s simulated in {:.2}s; {count} registrations in {} blocks, valid: {valid}; \
             queries incl. {:.3}s indexing: direct {:.3}s ({} pts), interpolate {:.3}s ({} pts), spread {:.3}s ({} rows)",
            s.entities.len(),
            s.trackers.len(),
            s.duration_s,
            secs(sim_time),
            chain.blocks().len(),
            secs(index_time),
            secs(direct_time),
            direct.len(),
            secs(interp_time),
            interp.len(),
            secs(spread_time),
            spread.rows.len(),
        ),
    );
    let _ = chain_to_string(&chain).unwrap();
}
