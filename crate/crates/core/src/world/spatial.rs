use std::collections::HashMap;

use crate::geo::{GeoCoordinate, EARTH_RADIUS_M};

/// Cell edge in degrees (~220 m of latitude).
const CELL_DEG: f64 = 0.002;

/// Uniform lat/lng bucket index. Queries return a superset of the points
/// within the radius; callers filter by exact distance.
#[derive(Debug, Clone, Default)]
pub(crate) struct SpatialGrid {
    cells: HashMap<(i64, i64), Vec<usize>>,
    len: usize,
}

fn cell_of(lat: f64, lng: f64) -> (i64, i64) {
    ((lat / CELL_DEG).floor() as i64, (lng / CELL_DEG).floor() as i64)
}

impl SpatialGrid {
    pub fn build(points: impl Iterator<Item = GeoCoordinate>) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut len = 0;
        for (i, p) in points.enumerate() {
            cells.entry(cell_of(p.lat(), p.lng())).or_default().push(i);
            len += 1;
        }
        Self { cells, len }
    }

    /// Indices of every point that may lie within `radius` meters of `p`,
    /// in ascending order.
    pub fn candidates(&self, p: GeoCoordinate, radius: f64) -> Vec<usize> {
        let all = || (0..self.len).collect::<Vec<_>>();
        if !radius.is_finite() {
            return all();
        }
        let delta = (radius / EARTH_RADIUS_M) * 1.001 + 1e-12;
        let dlat = delta.to_degrees();
        let ratio = delta.sin() / p.lat().to_radians().cos();
        let lat_lo = p.lat() - dlat;
        let lat_hi = p.lat() + dlat;
        if ratio.is_nan() || ratio >= 1.0 || lat_lo <= -90.0 || lat_hi >= 90.0 {
            return all();
        }
        let dlng = (ratio.asin() * 1.001).to_degrees() + 1e-12;
        let lng_lo = p.lng() - dlng;
        let lng_hi = p.lng() + dlng;
        if lng_lo < -180.0 || lng_hi >= 180.0 {
            return all();
        }
        let (r0, c0) = cell_of(lat_lo, lng_lo);
        let (r1, c1) = cell_of(lat_hi, lng_hi);
        let span = ((r1 - r0 + 1) as u128) * ((c1 - c0 + 1) as u128);
        if span as usize > self.cells.len().max(16) * 4 {
            return all();
        }
        let mut out = Vec::new();
        for r in r0..=r1 {
            for c in c0..=c1 {
                if let Some(v) = self.cells.get(&(r, c)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{destination_point, haversine_distance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn candidates_are_superset_of_true_neighbors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let origin = GeoCoordinate::new(51.5, -0.12).unwrap();
        let pts: Vec<GeoCoordinate> = (0..2000)
            .map(|_| destination_point(origin, rng.random_range(0.0..360.0), rng.random_range(0.0..3000.0)))
            .collect();
        let grid = SpatialGrid::build(pts.iter().copied());
        for _ in 0..200 {
            let q = destination_point(origin, rng.random_range(0.0..360.0), rng.random_range(0.0..3000.0));
            let r = rng.random_range(0.0..800.0);
            let cand = grid.candidates(q, r);
            for (i, p) in pts.iter().enumerate() {
                if haversine_distance(q, *p) <= r {
                    assert!(cand.binary_search(&i).is_ok());
                }
            }
        }
    }
}
