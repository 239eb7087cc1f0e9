//! Domain types shared by every other module.
//!
//! All of them are immutable values once built; constructors validate.

mod identifier;
mod payload;
mod time;
mod trace;

use std::collections::HashSet;

use thiserror::Error;

pub use identifier::{Guid, MalformedGuid};
pub use payload::{
    merge_payloads, Payload, PayloadError, PayloadScope, CLASH_SUFFIX, MAX_KEY_LEN, MAX_VALUE_LEN,
    MAX_WIRE_KEY_LEN,
};
pub use time::{Timestamp, TimestampError};
pub use trace::{Provenance, TraceLocationSet, TracePoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("registration lists its own entity {0} as a neighbor")]
    SelfNeighbor(Guid),
    #[error("neighbor {0} listed twice")]
    DuplicateNeighbor(Guid),
    #[error("registration payload must have global scope")]
    LocalPayload,
    #[error("alpha must be at least 1")]
    Alpha,
    #[error("delta must be a positive number of meters, got {0}")]
    Delta(f64),
}

/// A point on the globe in decimal degrees.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GeoLocation {
    latitude: f64,
    longitude: f64,
}

impl GeoLocation {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, ModelError> {
        if !(latitude.is_finite() && (-90.0..=90.0).contains(&latitude)) {
            return Err(ModelError::Latitude(latitude));
        }
        if !(longitude.is_finite() && (-180.0..=180.0).contains(&longitude)) {
            return Err(ModelError::Longitude(longitude));
        }
        Ok(GeoLocation {
            latitude,
            longitude,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }
}

/// Whether a registration's location came from the tracker's own positioning
/// (`High`) or from the network cell it sits in (`Low`).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Resolution {
    Low,
    High,
}

/// One ledger record: which entity was seen, with whom, where, when, and the
/// merged sensor payload.
#[derive(Clone, Debug, PartialEq)]
pub struct Registration {
    entity: Guid,
    neighbors: Vec<Guid>,
    location: GeoLocation,
    time: Timestamp,
    payload: Payload,
    resolution: Resolution,
}

impl Registration {
    pub fn new(
        entity: Guid,
        neighbors: Vec<Guid>,
        location: GeoLocation,
        time: Timestamp,
        payload: Payload,
        resolution: Resolution,
    ) -> Result<Self, ModelError> {
        let mut seen = HashSet::with_capacity(neighbors.len());
        for n in &neighbors {
            if *n == entity {
                return Err(ModelError::SelfNeighbor(entity));
            }
            if !seen.insert(*n) {
                return Err(ModelError::DuplicateNeighbor(*n));
            }
        }
        if payload.scope() != PayloadScope::Global {
            return Err(ModelError::LocalPayload);
        }
        Ok(Registration {
            entity,
            neighbors,
            location,
            time,
            payload,
            resolution,
        })
    }

    pub fn entity(&self) -> Guid {
        self.entity
    }

    pub fn neighbors(&self) -> &[Guid] {
        &self.neighbors
    }

    pub fn location(&self) -> GeoLocation {
        self.location
    }

    pub fn time(&self) -> Timestamp {
        self.time
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn mentions(&self, guid: Guid) -> bool {
        self.neighbors.contains(&guid)
    }

    pub(crate) fn with_location(mut self, location: GeoLocation) -> Self {
        self.location = location;
        self
    }
}

/// Knobs for the tracing strategies.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TraceParams {
    /// Index distance between the bracketing detections in interpolation.
    pub alpha: usize,
    /// Spatial tolerance in meters: spread grid side and duplicate radius.
    pub delta_meters: f64,
    /// Neighbor window used when the registrations were produced.
    pub tau_seconds: u64,
    /// Anchor of the local metric grid used for spread quantization.
    pub grid_origin: GeoLocation,
}

impl TraceParams {
    pub const DEFAULT_ALPHA: usize = 1;
    pub const DEFAULT_DELTA_M: f64 = 50.0;
    pub const DEFAULT_TAU_S: u64 = 10;

    pub fn new(
        alpha: usize,
        delta_meters: f64,
        tau_seconds: u64,
        grid_origin: GeoLocation,
    ) -> Result<Self, ModelError> {
        if alpha < 1 {
            return Err(ModelError::Alpha);
        }
        if !(delta_meters.is_finite() && delta_meters > 0.0) {
            return Err(ModelError::Delta(delta_meters));
        }
        Ok(TraceParams {
            alpha,
            delta_meters,
            tau_seconds,
            grid_origin,
        })
    }
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            alpha: Self::DEFAULT_ALPHA,
            delta_meters: Self::DEFAULT_DELTA_M,
            tau_seconds: Self::DEFAULT_TAU_S,
            grid_origin: GeoLocation {
                latitude: 0.0,
                longitude: 0.0,
            },
        }
    }
}
