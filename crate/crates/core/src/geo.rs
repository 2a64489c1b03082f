//! Geographic helpers shared by the raster and tract-assignment code.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Local equirectangular speed (km per unit parameter) of the straight
/// lat/lon segment with the given degree deltas, evaluated at latitude `lat`.
pub fn equirect_speed_km(dlat_deg: f64, dlon_deg: f64, lat_deg: f64) -> f64 {
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    let dx = dlon_deg * lat_deg.to_radians().cos() * k;
    let dy = dlat_deg * k;
    dx.hypot(dy)
}

/// Equirectangular length in km of the sub-segment `t0..t1` of the straight
/// lat/lon segment `a -> b`, by 5-point Gauss-Legendre quadrature of the
/// local speed. Splitting a segment leaves the summed length unchanged to
/// rounding error.
pub fn equirect_piece_km(a: LatLon, b: LatLon, t0: f64, t1: f64) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let dlat = b.lat - a.lat;
    let dlon = b.lon - a.lon;
    let half = 0.5 * (t1 - t0);
    let mid = 0.5 * (t0 + t1);
    let sum: f64 = NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(x, w)| w * equirect_speed_km(dlat, dlon, a.lat + (mid + half * x) * dlat))
        .sum();
    half * sum
}

/// Total equirectangular length of a polyline in km.
pub fn polyline_km(path: &[LatLon]) -> f64 {
    path.windows(2).map(|w| equirect_piece_km(w[0], w[1], 0.0, 1.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_one_degree_of_latitude() {
        let d = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(1.0, 0.0));
        assert!((d - 111.195).abs() < 1e-2, "{d}");
    }

    #[test]
    fn piece_lengths_add_up() {
        let a = LatLon::new(30.0, -100.0);
        let b = LatLon::new(30.4, -99.3);
        let whole = equirect_piece_km(a, b, 0.0, 1.0);
        let parts = equirect_piece_km(a, b, 0.0, 0.37) + equirect_piece_km(a, b, 0.37, 1.0);
        assert!(((whole - parts) / whole).abs() < 1e-12);
    }
}
