use std::cmp::Ordering;

use super::{GeoLocation, Timestamp};

/// How a trace point was obtained.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Direct,
    Interpolated,
    Spread,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Direct => "direct",
            Provenance::Interpolated => "interpolated",
            Provenance::Spread => "spread",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TracePoint {
    pub location: GeoLocation,
    pub time: Timestamp,
    pub provenance: Provenance,
}

impl TracePoint {
    /// Total order used for traces: time, then latitude, then longitude, then
    /// provenance (direct < interpolated < spread).
    pub fn chronological_cmp(&self, other: &Self) -> Ordering {
        self.time
            .cmp(&other.time)
            .then_with(|| self.location.latitude().total_cmp(&other.location.latitude()))
            .then_with(|| {
                self.location
                    .longitude()
                    .total_cmp(&other.location.longitude())
            })
            .then_with(|| self.provenance.cmp(&other.provenance))
    }
}

/// Chronologically ordered locations of one entity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceLocationSet {
    points: Vec<TracePoint>,
}

impl TraceLocationSet {
    /// Sorts `points` into trace order. The sort is stable, so points that
    /// compare equal keep their relative input order.
    pub fn from_unordered(mut points: Vec<TracePoint>) -> Self {
        points.sort_by(TracePoint::chronological_cmp);
        TraceLocationSet { points }
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<TracePoint> {
        self.points
    }
}
