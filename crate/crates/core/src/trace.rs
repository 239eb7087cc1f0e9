//! Localization strategies over ledger contents: direct, interpolate, spread.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::geo::{haversine_m, LocalProjection};
use crate::ledger::Chain;
use crate::model::{
    GeoLocation, Guid, Provenance, Registration, Timestamp, TraceLocationSet, TraceParams, TracePoint,
};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("delta must be a positive number of meters, got {0}")]
    Domain(f64),
    #[error("alpha must be at least 1")]
    Alpha,
}

/// Registrations grouped by subject and by neighbor, in ledger order.
#[derive(Clone, Debug, Default)]
pub struct LedgerIndex {
    regs: Vec<Registration>,
    by_entity: HashMap<Guid, Vec<usize>>,
    by_neighbor: HashMap<Guid, Vec<usize>>,
}

impl LedgerIndex {
    pub fn from_registrations(regs: Vec<Registration>) -> Self {
        let mut by_entity: HashMap<Guid, Vec<usize>> = HashMap::new();
        let mut by_neighbor: HashMap<Guid, Vec<usize>> = HashMap::new();
        for (i, r) in regs.iter().enumerate() {
            by_entity.entry(r.entity()).or_default().push(i);
            for n in r.neighbors() {
                by_neighbor.entry(*n).or_default().push(i);
            }
        }
        LedgerIndex {
            regs,
            by_entity,
            by_neighbor,
        }
    }

    pub fn from_chain(chain: &Chain) -> Self {
        Self::from_registrations(chain.sealed_registrations().collect())
    }

    pub fn len(&self) -> usize {
        self.regs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regs.is_empty()
    }

    pub fn registrations(&self) -> &[Registration] {
        &self.regs
    }

    pub fn entity_registrations(&self, guid: Guid) -> impl Iterator<Item = &Registration> + '_ {
        self.by_entity
            .get(&guid)
            .into_iter()
            .flatten()
            .map(|&i| &self.regs[i])
    }

    /// Registrations listing `guid` as a neighbor.
    pub fn registrations_mentioning(&self, guid: Guid) -> impl Iterator<Item = &Registration> + '_ {
        self.by_neighbor
            .get(&guid)
            .into_iter()
            .flatten()
            .map(|&i| &self.regs[i])
    }

    pub fn knows(&self, guid: Guid) -> bool {
        self.by_entity.contains_key(&guid) || self.by_neighbor.contains_key(&guid)
    }
}

fn chronological(regs: &mut [&Registration]) {
    regs.sort_by(|a, b| {
        a.time()
            .cmp(&b.time())
            .then(a.location().latitude().total_cmp(&b.location().latitude()))
            .then(a.location().longitude().total_cmp(&b.location().longitude()))
    });
}

fn point(r: &Registration, provenance: Provenance) -> TracePoint {
    TracePoint {
        location: r.location(),
        time: r.time(),
        provenance,
    }
}

fn sorted_direct(idx: &LedgerIndex, e: Guid) -> Vec<&Registration> {
    let mut regs: Vec<&Registration> = idx.entity_registrations(e).collect();
    chronological(&mut regs);
    regs
}

/// Every recorded location of `e` in chronological order. Repeated
/// detections are kept.
pub fn direct_trace(e: Guid, idx: &LedgerIndex) -> TraceLocationSet {
    TraceLocationSet::from_unordered(
        sorted_direct(idx, e)
            .into_iter()
            .map(|r| point(r, Provenance::Direct))
            .collect(),
    )
}

/// Why an interpolated point was added.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub neighbor: Guid,
    /// Direct-trace indices of the bracketing detections, `o - alpha` and `o + alpha`.
    pub before: usize,
    pub after: usize,
}

/// Output point index to witness, for interpolated points only.
pub type TraceAnnotation = BTreeMap<usize, Witness>;

/// Direct trace enriched with locations of "valuable" neighbors: a neighbor
/// listed both `alpha` detections before and `alpha` detections after
/// detection `o` contributes its own registrations timed strictly between
/// the two. Candidates within `delta_meters` of a direct point are dropped,
/// and each neighbor registration is added once, witnessed by the lowest `o`.
pub fn interpolate_trace(
    e: Guid,
    idx: &LedgerIndex,
    params: &TraceParams,
) -> Result<(TraceLocationSet, TraceAnnotation), TraceError> {
    if params.alpha < 1 {
        return Err(TraceError::Alpha);
    }
    check_delta(params.delta_meters)?;
    let direct = sorted_direct(idx, e);
    let mut points: Vec<(TracePoint, Option<Witness>)> = direct
        .iter()
        .map(|r| (point(r, Provenance::Direct), None))
        .collect();
    let alpha = params.alpha;
    if direct.len() >= 3 && direct.len() > 2 * alpha {
        let mut taken: HashSet<*const Registration> = HashSet::new();
        for o in alpha..direct.len() - alpha {
            let (before, after) = (direct[o - alpha], direct[o + alpha]);
            let later: BTreeSet<Guid> = after.neighbors().iter().copied().collect();
            let mut valuable: Vec<Guid> = before
                .neighbors()
                .iter()
                .copied()
                .filter(|n| later.contains(n))
                .collect();
            valuable.sort_unstable();
            valuable.dedup();
            for n in valuable {
                for r in idx.entity_registrations(n) {
                    if r.time() <= before.time() || r.time() >= after.time() {
                        continue;
                    }
                    if direct
                        .iter()
                        .any(|d| haversine_m(d.location(), r.location()) <= params.delta_meters)
                    {
                        continue;
                    }
                    if !taken.insert(r as *const Registration) {
                        continue;
                    }
                    points.push((
                        point(r, Provenance::Interpolated),
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
    points.sort_by(|a, b| a.0.chronological_cmp(&b.0));
    let mut annotation = TraceAnnotation::new();
    let mut out = Vec::with_capacity(points.len());
    for (i, (p, w)) in points.into_iter().enumerate() {
        if let Some(w) = w {
            annotation.insert(i, w);
        }
        out.push(p);
    }
    Ok((TraceLocationSet::from_unordered(out), annotation))
}

pub type CellKey = (i64, i64);

#[derive(Clone, Debug, PartialEq)]
pub struct SpreadRow {
    pub entity: Guid,
    pub cells: Vec<(CellKey, Timestamp)>,
}

/// Where the subject was seen as a neighbor, bucketed into delta-sized squares.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpreadMatrix {
    pub rows: Vec<SpreadRow>,
    /// Distinct row entities per cell.
    pub cell_counts: BTreeMap<CellKey, usize>,
    pub probabilities: BTreeMap<CellKey, f64>,
}

impl SpreadMatrix {
    pub fn distinct_cells(&self) -> usize {
        self.cell_counts.len()
    }
}

fn check_delta(delta_m: f64) -> Result<(), TraceError> {
    if delta_m.is_finite() && delta_m > 0.0 {
        Ok(())
    } else {
        Err(TraceError::Domain(delta_m))
    }
}

/// One row per other entity whose registrations list `e` among at least two
/// neighbors. Cells are `floor(meters / delta_m)` east and north of `origin`.
pub fn spread_trace(
    e: Guid,
    idx: &LedgerIndex,
    delta_m: f64,
    origin: GeoLocation,
) -> Result<SpreadMatrix, TraceError> {
    check_delta(delta_m)?;
    let proj = LocalProjection::new(origin);
    let mut rows: BTreeMap<Guid, Vec<(CellKey, Timestamp)>> = BTreeMap::new();
    for r in idx.registrations_mentioning(e) {
        if r.entity() == e || r.neighbors().len() < 2 {
            continue;
        }
        rows.entry(r.entity())
            .or_default()
            .push((proj.cell_of(r.location(), delta_m), r.time()));
    }
    let mut cell_counts: BTreeMap<CellKey, usize> = BTreeMap::new();
    let rows: Vec<SpreadRow> = rows
        .into_iter()
        .map(|(entity, mut cells)| {
            cells.sort_by_key(|&(k, t)| (t, k));
            let distinct: BTreeSet<CellKey> = cells.iter().map(|(k, _)| *k).collect();
            for k in distinct {
                *cell_counts.entry(k).or_default() += 1;
            }
            SpreadRow { entity, cells }
        })
        .collect();
    let n = rows.len() as f64;
    let probabilities = cell_counts
        .iter()
        .map(|(k, c)| (*k, *c as f64 / n))
        .collect();
    Ok(SpreadMatrix {
        rows,
        cell_counts,
        probabilities,
    })
}
