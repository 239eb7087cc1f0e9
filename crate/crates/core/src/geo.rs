//! Spherical distance and a local metric grid.

use crate::model::GeoLocation;

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance in meters (haversine).
pub fn haversine_m(a: GeoLocation, b: GeoLocation) -> f64 {
    let lat1 = a.latitude().to_radians();
    let lat2 = b.latitude().to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.longitude() - a.longitude()).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection to meters east/north of an origin.
///
/// Accurate to well under a percent over a few tens of kilometers, which is
/// all the simulator and the spread grid need.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LocalProjection {
    origin: GeoLocation,
    meters_per_deg_lat: f64,
    meters_per_deg_lon: f64,
}

impl LocalProjection {
    pub fn new(origin: GeoLocation) -> Self {
        let meters_per_deg_lat = EARTH_RADIUS_M.to_radians();
        LocalProjection {
            origin,
            meters_per_deg_lat,
            meters_per_deg_lon: meters_per_deg_lat * origin.latitude().to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoLocation {
        self.origin
    }

    /// (east, north) in meters.
    pub fn to_local(&self, loc: GeoLocation) -> (f64, f64) {
        (
            (loc.longitude() - self.origin.longitude()) * self.meters_per_deg_lon,
            (loc.latitude() - self.origin.latitude()) * self.meters_per_deg_lat,
        )
    }

    /// Inverse of [`to_local`](Self::to_local); `None` if the point falls off
    /// the globe or the origin sits on a pole.
    pub fn to_geo(&self, east: f64, north: f64) -> Option<GeoLocation> {
        if self.meters_per_deg_lon <= 0.0 {
            return None;
        }
        GeoLocation::new(
            self.origin.latitude() + north / self.meters_per_deg_lat,
            self.origin.longitude() + east / self.meters_per_deg_lon,
        )
        .ok()
    }

    /// Floor-quantized grid cell of `loc` for squares of side `cell_m`.
    pub fn cell_of(&self, loc: GeoLocation, cell_m: f64) -> (i64, i64) {
        let (x, y) = self.to_local(loc);
        ((x / cell_m).floor() as i64, (y / cell_m).floor() as i64)
    }
}
