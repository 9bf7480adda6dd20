//! Spherical geometry on a mean-radius Earth: distances, bearings, angle
//! arithmetic and polygon containment.
//!
//! Angles cross every public boundary in degrees. Radians only appear inside
//! the formulas.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Below this separation two coordinates are treated as the same point.
const COINCIDENT_M: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    InvalidLatitude(f64),
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),
    #[error("bearing between coincident points is undefined")]
    CoincidentPoints,
    #[error("polygon needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has zero area")]
    DegeneratePolygon,
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
}

/// Wraps any heading into `[0, 360)`.
pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    // rem_euclid can round tiny negatives up to exactly 360
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

fn normalize_lng(deg: f64) -> f64 {
    let l = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if l >= 180.0 {
        -180.0
    } else {
        l
    }
}

/// A point on the model sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoordRepr")]
pub struct GeoCoordinate {
    lat: f64,
    lng: f64,
}

impl GeoCoordinate {
    /// Builds a coordinate, rejecting out-of-range latitudes and wrapping the
    /// longitude into `[-180, 180)`.
    pub fn new(lat: f64, lng: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() {
            return Err(GeoError::NonFinite("lat"));
        }
        if !lng.is_finite() {
            return Err(GeoError::NonFinite("lng"));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::InvalidLatitude(lat));
        }
        Ok(Self {
            lat,
            lng: normalize_lng(lng),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lng(&self) -> f64 {
        self.lng
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoordRepr {
    lat: f64,
    lng: f64,
}

impl TryFrom<CoordRepr> for GeoCoordinate {
    type Error = GeoError;
    fn try_from(r: CoordRepr) -> Result<Self, GeoError> {
        GeoCoordinate::new(r.lat, r.lng)
    }
}

/// Camera orientation of a street-view capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr")]
pub struct Pose {
    heading: f64,
    pitch: f64,
    fov: f64,
}

impl Pose {
    pub const MIN_FOV: f64 = 20.0;
    pub const MAX_FOV: f64 = 120.0;

    /// Heading wraps modulo 360; pitch clamps to `[-90, 90]`, fov to `[20, 120]`.
    pub fn new(heading: f64, pitch: f64, fov: f64) -> Result<Self, GeoError> {
        if !heading.is_finite() {
            return Err(GeoError::NonFinite("heading"));
        }
        if !pitch.is_finite() {
            return Err(GeoError::NonFinite("pitch"));
        }
        if !fov.is_finite() {
            return Err(GeoError::NonFinite("fov"));
        }
        Ok(Self::normalized(heading, pitch, fov))
    }

    /// Level camera (pitch 0).
    pub fn level(heading: f64, fov: f64) -> Result<Self, GeoError> {
        Self::new(heading, 0.0, fov)
    }

    /// Internal constructor for values derived from finite geometry.
    pub(crate) fn normalized(heading: f64, pitch: f64, fov: f64) -> Self {
        debug_assert!(heading.is_finite() && pitch.is_finite() && fov.is_finite());
        Self {
            heading: normalize_heading(heading),
            pitch: pitch.clamp(-90.0, 90.0),
            fov: fov.clamp(Self::MIN_FOV, Self::MAX_FOV),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn with_heading(self, heading: f64) -> Self {
        Self::normalized(heading, self.pitch, self.fov)
    }

    pub fn with_fov(self, fov: f64) -> Self {
        Self::normalized(self.heading, self.pitch, fov)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    heading: f64,
    pitch: f64,
    fov: f64,
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeoError;
    fn try_from(r: PoseRepr) -> Result<Self, GeoError> {
        Pose::new(r.heading, r.pitch, r.fov)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::normalized(0.0, 0.0, 90.0)
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: GeoCoordinate, b: GeoCoordinate) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lng - a.lng).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().atan2((1.0 - h).max(0.0).sqrt())
}

/// Forward azimuth from `a` toward `b`, clockwise from north in `[0, 360)`.
pub fn initial_bearing(a: GeoCoordinate, b: GeoCoordinate) -> Result<f64, GeoError> {
    if haversine_distance(a, b) < COINCIDENT_M {
        return Err(GeoError::CoincidentPoints);
    }
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlambda = (b.lng - a.lng).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Ok(normalize_heading(y.atan2(x).to_degrees()))
}

/// Point reached by travelling `distance` meters from `origin` along the
/// great circle that starts at `heading`.
pub fn destination_point(origin: GeoCoordinate, heading: f64, distance: f64) -> GeoCoordinate {
    if distance == 0.0 {
        return origin;
    }
    let delta = distance / EARTH_RADIUS_M;
    let theta = heading.to_radians();
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lng.to_radians();
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * sin_phi2);
    GeoCoordinate {
        lat: phi2.to_degrees().clamp(-90.0, 90.0),
        lng: normalize_lng(lambda2.to_degrees()),
    }
}

/// Signed turn from `reference_heading` to `target_bearing` in `[-180, 180)`.
/// Positive is clockwise.
pub fn angular_offset(reference_heading: f64, target_bearing: f64) -> f64 {
    let d = (target_bearing - reference_heading + 180.0).rem_euclid(360.0) - 180.0;
    if d >= 180.0 {
        -180.0
    } else {
        d
    }
}

/// Simple polygon in (lng, lat) space. Edges are straight in degree space,
/// which is adequate at city scale; polygons must not straddle the antimeridian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoPolygon {
    vertices: Vec<GeoCoordinate>,
}

impl GeoPolygon {
    /// Validates and stores the ring. A closing vertex equal to the first is
    /// dropped.
    pub fn new(mut vertices: Vec<GeoCoordinate>) -> Result<Self, GeoError> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeoError::TooFewVertices(vertices.len()));
        }
        let poly = Self { vertices };
        poly.check_simple()?;
        if poly.signed_area_deg2().abs() <= f64::EPSILON {
            return Err(GeoError::DegeneratePolygon);
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle from south-west and north-east corners.
    pub fn rectangle(south_west: GeoCoordinate, north_east: GeoCoordinate) -> Result<Self, GeoError> {
        let (s, w) = (south_west.lat, south_west.lng);
        let (n, e) = (north_east.lat, north_east.lng);
        Self::new(vec![
            GeoCoordinate::new(s, w)?,
            GeoCoordinate::new(s, e)?,
            GeoCoordinate::new(n, e)?,
            GeoCoordinate::new(n, w)?,
        ])
    }

    pub fn vertices(&self) -> &[GeoCoordinate] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (usize, GeoCoordinate, GeoCoordinate)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (i, self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn signed_area_deg2(&self) -> f64 {
        self.edges()
            .map(|(_, a, b)| a.lng * b.lat - b.lng * a.lat)
            .sum::<f64>()
            / 2.0
    }

    fn check_simple(&self) -> Result<(), GeoError> {
        let n = self.vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return Err(GeoError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(())
    }

    /// `(south_west, north_east)` corners of the bounding box.
    pub fn bounds(&self) -> (GeoCoordinate, GeoCoordinate) {
        let mut s = f64::INFINITY;
        let mut w = f64::INFINITY;
        let mut n = f64::NEG_INFINITY;
        let mut e = f64::NEG_INFINITY;
        for v in &self.vertices {
            s = s.min(v.lat);
            n = n.max(v.lat);
            w = w.min(v.lng);
            e = e.max(v.lng);
        }
        (GeoCoordinate { lat: s, lng: w }, GeoCoordinate { lat: n, lng: e })
    }

    /// Vertex average; inside for convex polygons.
    pub fn centroid(&self) -> GeoCoordinate {
        let k = self.vertices.len() as f64;
        let lat = self.vertices.iter().map(|v| v.lat).sum::<f64>() / k;
        let lng = self.vertices.iter().map(|v| v.lng).sum::<f64>() / k;
        GeoCoordinate { lat, lng }
    }

    pub fn contains(&self, p: GeoCoordinate) -> bool {
        point_in_polygon(p, self)
    }
}

impl<'de> Deserialize<'de> for GeoPolygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            vertices: Vec<GeoCoordinate>,
        }
        let raw = Raw::deserialize(d)?;
        GeoPolygon::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

fn orient(a: GeoCoordinate, b: GeoCoordinate, c: GeoCoordinate) -> f64 {
    (b.lng - a.lng) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lng - a.lng)
}

fn on_segment(p: GeoCoordinate, a: GeoCoordinate, b: GeoCoordinate) -> bool {
    let scale = (b.lng - a.lng).abs().max((b.lat - a.lat).abs()).max(1e-300);
    orient(a, b, p).abs() <= 1e-12 * scale
        && p.lng >= a.lng.min(b.lng) - 1e-12
        && p.lng <= a.lng.max(b.lng) + 1e-12
        && p.lat >= a.lat.min(b.lat) - 1e-12
        && p.lat <= a.lat.max(b.lat) + 1e-12
}

fn segments_intersect(a1: GeoCoordinate, a2: GeoCoordinate, b1: GeoCoordinate, b2: GeoCoordinate) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(a1, b1, b2) || on_segment(a2, b1, b2) || on_segment(b1, a1, a2) || on_segment(b2, a1, a2)
}

/// Even-odd containment test. Points on an edge or vertex count as inside.
pub fn point_in_polygon(p: GeoCoordinate, poly: &GeoPolygon) -> bool {
    let mut inside = false;
    for (_, a, b) in poly.edges() {
        if on_segment(p, a, b) {
            return true;
        }
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lng + (p.lat - a.lat) * (b.lng - a.lng) / (b.lat - a.lat);
            if p.lng < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Local tangent-plane offset of `p` from `origin` in meters (east, north).
/// Accurate to well under a centimeter within a few kilometers.
pub fn local_offset_m(origin: GeoCoordinate, p: GeoCoordinate) -> (f64, f64) {
    let d = haversine_distance(origin, p);
    if d < COINCIDENT_M {
        return (0.0, 0.0);
    }
    let b = initial_bearing(origin, p).unwrap_or(0.0).to_radians();
    (d * b.sin(), d * b.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(lat: f64, lng: f64) -> GeoCoordinate {
        GeoCoordinate::new(lat, lng).unwrap()
    }

    /// Unit vector on the sphere.
    fn to_vec(p: GeoCoordinate) -> [f64; 3] {
        let (phi, lam) = (p.lat.to_radians(), p.lng.to_radians());
        [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
    }

    fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    /// Bearing from tangent-plane projection of the chord: independent of the
    /// atan2 azimuth formula under test.
    fn vector_bearing(a: GeoCoordinate, b: GeoCoordinate) -> f64 {
        let (va, vb) = (to_vec(a), to_vec(b));
        let (phi, lam) = (a.lat.to_radians(), a.lng.to_radians());
        let east = [-lam.sin(), lam.cos(), 0.0];
        let north = [-phi.sin() * lam.cos(), -phi.sin() * lam.sin(), phi.cos()];
        let k = dot(va, vb);
        let t = [vb[0] - k * va[0], vb[1] - k * va[1], vb[2] - k * va[2]];
        normalize_heading(dot(t, east).atan2(dot(t, north)).to_degrees())
    }

    /// Central angle via atan2(|a×b|, a·b).
    fn vector_distance(a: GeoCoordinate, b: GeoCoordinate) -> f64 {
        let (va, vb) = (to_vec(a), to_vec(b));
        let x = cross(va, vb);
        let s = dot(x, x).sqrt();
        s.atan2(dot(va, vb)) * EARTH_RADIUS_M
    }

    fn random_coord(rng: &mut ChaCha8Rng) -> GeoCoordinate {
        c(rng.random_range(-80.0..80.0), rng.random_range(-180.0..180.0))
    }

    #[test]
    fn lng_wraps_into_half_open_range() {
        assert_eq!(c(0.0, 180.0).lng(), -180.0);
        assert_eq!(c(0.0, 190.0).lng(), -170.0);
        assert_eq!(c(0.0, -540.0).lng(), -180.0);
        assert!(GeoCoordinate::new(90.5, 0.0).is_err());
        assert!(GeoCoordinate::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn pose_normalizes_fields() {
        let p = Pose::new(720.5, 0.0, 90.0).unwrap();
        assert_eq!(p.heading(), 0.5);
        let p = Pose::new(-90.0, -120.0, 5.0).unwrap();
        assert_eq!(p.heading(), 270.0);
        assert_eq!(p.pitch(), -90.0);
        assert_eq!(p.fov(), 20.0);
        assert_eq!(Pose::new(0.0, 0.0, 500.0).unwrap().fov(), 120.0);
        assert!(Pose::new(f64::INFINITY, 0.0, 90.0).is_err());
    }

    #[test]
    fn distance_identity_and_one_degree() {
        let p = c(22.3, 114.2);
        assert_eq!(haversine_distance(p, p), 0.0);
        let oracle = vector_distance(c(0.0, 0.0), c(0.0, 1.0));
        assert!((oracle - 111_195.08).abs() < 0.01, "oracle {oracle}");
        let d = haversine_distance(c(0.0, 0.0), c(0.0, 1.0));
        assert!((d - 111_195.0).abs() < 1.0);
        assert!((d - oracle).abs() < 1e-6);
    }

    #[test]
    fn distance_matches_vector_oracle_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (a, b) = (random_coord(&mut rng), random_coord(&mut rng));
            let d = haversine_distance(a, b);
            assert_eq!(d, haversine_distance(b, a));
            assert!(d >= 0.0);
            assert!((d - vector_distance(a, b)).abs() < 1e-4, "{a:?} {b:?}");
        }
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let (a, b, m) = (random_coord(&mut rng), random_coord(&mut rng), random_coord(&mut rng));
            let direct = haversine_distance(a, b);
            let via = haversine_distance(a, m) + haversine_distance(m, b);
            assert!(direct <= via + 1e-6);
        }
    }

    #[test]
    fn cardinal_bearings() {
        assert_eq!(initial_bearing(c(0.0, 0.0), c(1.0, 0.0)).unwrap(), 0.0);
        assert!((initial_bearing(c(0.0, 0.0), c(0.0, 1.0)).unwrap() - 90.0).abs() < 1e-12);
        assert!((initial_bearing(c(0.0, 0.0), c(-1.0, 0.0)).unwrap() - 180.0).abs() < 1e-12);
        assert!((initial_bearing(c(0.0, 0.0), c(0.0, -1.0)).unwrap() - 270.0).abs() < 1e-12);
        assert_eq!(
            initial_bearing(c(1.0, 1.0), c(1.0, 1.0)),
            Err(GeoError::CoincidentPoints)
        );
    }

    #[test]
    fn bearing_matches_vector_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let (a, b) = (random_coord(&mut rng), random_coord(&mut rng));
            let got = initial_bearing(a, b).unwrap();
            let want = vector_bearing(a, b);
            assert!(angular_offset(want, got).abs() < 1e-6, "{a:?}->{b:?}: {got} vs {want}");
        }
    }

    #[test]
    fn destination_zero_and_one_degree_north() {
        let o = c(40.0, -73.0);
        assert_eq!(destination_point(o, 123.0, 0.0), o);
        let d = destination_point(c(0.0, 0.0), 0.0, 111_195.0);
        let oracle_arc = 111_195.0 / EARTH_RADIUS_M;
        assert!((d.lat() - oracle_arc.to_degrees()).abs() < 1e-9);
        assert!((d.lat() - 1.0).abs() < 1e-4);
        assert!(d.lng().abs() < 1e-12);
    }

    #[test]
    fn destination_roundtrip_recovers_heading_and_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let o = random_coord(&mut rng);
            let h = rng.random_range(0.0..360.0);
            let dist = rng.random_range(1.0..50_000.0);
            let p = destination_point(o, h, dist);
            assert!((haversine_distance(o, p) - dist).abs() < 1e-3);
            assert!(angular_offset(h, initial_bearing(o, p).unwrap()).abs() < 1e-3);
        }
    }

    #[test]
    fn angular_offset_wraps() {
        assert_eq!(angular_offset(37.0, 37.0), 0.0);
        assert!((angular_offset(350.0, 10.0) - 20.0).abs() < 1e-12);
        assert!((angular_offset(10.0, 350.0) + 20.0).abs() < 1e-12);
        assert_eq!(angular_offset(0.0, 180.0), -180.0);
    }

    fn square() -> GeoPolygon {
        GeoPolygon::rectangle(c(0.0, 0.0), c(1.0, 1.0)).unwrap()
    }

    #[test]
    fn polygon_validation() {
        assert_eq!(
            GeoPolygon::new(vec![c(0.0, 0.0), c(1.0, 0.0)]),
            Err(GeoError::TooFewVertices(2))
        );
        assert_eq!(
            GeoPolygon::new(vec![c(0.0, 0.0), c(1.0, 1.0), c(2.0, 2.0)]),
            Err(GeoError::DegeneratePolygon)
        );
        let bowtie = GeoPolygon::new(vec![c(0.0, 0.0), c(1.0, 1.0), c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(matches!(bowtie, Err(GeoError::SelfIntersecting(_, _))));
        let closed = GeoPolygon::new(vec![c(0.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(closed.vertices().len(), 3);
    }

    #[test]
    fn polygon_containment_basics() {
        let sq = square();
        assert!(point_in_polygon(sq.centroid(), &sq));
        assert!(!point_in_polygon(c(2.0, 2.0), &sq));
        assert!(point_in_polygon(c(0.0, 0.5), &sq), "edge counts as inside");
        assert!(point_in_polygon(c(1.0, 1.0), &sq), "vertex counts as inside");
    }

    /// Winding-number oracle.
    fn winding_inside(p: GeoCoordinate, poly: &GeoPolygon) -> bool {
        let mut wn = 0i32;
        let v = poly.vertices();
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            let side = (b.lng - a.lng) * (p.lat - a.lat) - (p.lng - a.lng) * (b.lat - a.lat);
            if a.lat <= p.lat {
                if b.lat > p.lat && side > 0.0 {
                    wn += 1;
                }
            } else if b.lat <= p.lat && side < 0.0 {
                wn -= 1;
            }
        }
        wn != 0
    }

    #[test]
    fn containment_matches_winding_oracle() {
        // concave "C" shape
        let poly = GeoPolygon::new(vec![
            c(0.0, 0.0),
            c(0.0, 3.0),
            c(1.0, 3.0),
            c(1.0, 1.0),
            c(2.0, 1.0),
            c(2.0, 3.0),
            c(3.0, 3.0),
            c(3.0, 0.0),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..1000 {
            let p = c(rng.random_range(-0.5..3.5), rng.random_range(-0.5..3.5));
            assert_eq!(point_in_polygon(p, &poly), winding_inside(p, &poly), "{p:?}");
        }
    }

    #[test]
    fn local_offset_is_metric() {
        let o = c(22.28, 114.16);
        let p = destination_point(o, 90.0, 100.0);
        let (e, n) = local_offset_m(o, p);
        assert!((e - 100.0).abs() < 1e-6 && n.abs() < 1e-3);
    }
}
