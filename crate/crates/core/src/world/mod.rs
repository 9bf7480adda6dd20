//! The immutable environment: street graph, place database and object
//! instances, plus the queries agents run against them.

mod generate;
mod spatial;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::geo::{angular_offset, haversine_distance, initial_bearing, GeoCoordinate, GeoPolygon};
use spatial::SpatialGrid;

pub use generate::{generate_world, GeneratorParams, LanguageWeight};
pub(crate) use generate::instance_extent;

/// Default snapping radius for [`World::relocate`].
pub const DEFAULT_RELOCATE_RADIUS_M: f64 = 50.0;

/// Allowed disagreement between a stored edge heading and the bearing
/// recomputed from node coordinates; also the reciprocity tolerance.
pub const EDGE_HEADING_TOLERANCE_DEG: f64 = 1.0;

/// A stored edge may be longer than the great-circle chord (curved streets)
/// but not shorter by more than this.
const EDGE_LENGTH_SLACK_M: f64 = 0.05;

const DEFAULT_PLACE_TYPES: &str = include_str!("../../data/place_types.txt");

/// The 96-entry place-type vocabulary shipped with the crate.
pub fn default_place_types() -> Vec<String> {
    DEFAULT_PLACE_TYPES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference at {path}: {target} does not exist")]
    DanglingReference { path: String, target: String },
    #[error("edge {from} -> {to} has no matching reverse edge")]
    AsymmetricEdge { from: String, to: String },
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),
    #[error("no street view node within {radius_m} m of ({lat}, {lng})")]
    NoStreetView { lat: f64, lng: f64, radius_m: f64 },
    #[error("unknown place {0}")]
    UnknownPlace(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
}

impl WorldError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        WorldError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub to: String,
    /// Degrees clockwise from north, as seen from the owning node.
    pub heading: f64,
    pub length: f64,
}

/// A position with street-view coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreetNode {
    pub id: String,
    pub coord: GeoCoordinate,
    pub neighbors: Vec<Edge>,
    /// Neighbors the embedded web panorama exposes; a subset of `neighbors`.
    pub web_visible: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Review {
    pub text: String,
    pub rating: f64,
}

/// Opaque image reference. `subject` is the symbolic content of the photo
/// (e.g. `storefront`, `interior`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotoRef {
    pub id: String,
    pub subject: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Place {
    pub id: String,
    pub name: String,
    /// First entry is the primary type.
    pub types: Vec<String>,
    pub coord: GeoCoordinate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    #[serde(default)]
    pub reviews: Vec<Review>,
    #[serde(default)]
    pub photo_refs: Vec<PhotoRef>,
}

impl Place {
    pub fn primary_type(&self) -> &str {
        &self.types[0]
    }

    pub fn has_type(&self, t: &str) -> bool {
        self.types.iter().any(|x| x == t)
    }
}

/// A countable street object (trash bin, hydrant, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectInstance {
    pub id: String,
    pub category: String,
    pub coord: GeoCoordinate,
    pub height_m: f64,
    pub width_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    pub polygon: GeoPolygon,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<GeoPolygon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorParams>,
    #[serde(default)]
    pub regions: Vec<Region>,
}

/// On-disk layout of a world file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDocument {
    pub meta: WorldMeta,
    pub nodes: Vec<StreetNode>,
    pub places: Vec<Place>,
    pub instances: Vec<ObjectInstance>,
    pub vocabulary: Vec<String>,
}

/// Neighbor entry in the index-based adjacency.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Link {
    pub to: usize,
    pub heading: f64,
    pub length: f64,
    pub web_visible: bool,
}

/// Validated, immutable world. All collections are ordered by id.
#[derive(Debug, Clone)]
pub struct World {
    meta: WorldMeta,
    nodes: Vec<StreetNode>,
    places: Vec<Place>,
    instances: Vec<ObjectInstance>,
    vocabulary: Vec<String>,
    node_index: HashMap<String, usize>,
    place_index: HashMap<String, usize>,
    instance_index: HashMap<String, usize>,
    adjacency: Vec<Vec<Link>>,
    node_grid: SpatialGrid,
    place_grid: SpatialGrid,
    instance_grid: SpatialGrid,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta
            && self.nodes == other.nodes
            && self.places == other.places
            && self.instances == other.instances
            && self.vocabulary == other.vocabulary
    }
}

fn index_ids<'a>(
    section: &str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<HashMap<String, usize>, WorldError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if id.is_empty() {
            return Err(WorldError::schema(format!("{section}[{i}].id"), "empty id"));
        }
        if map.insert(id.to_string(), i).is_some() {
            return Err(WorldError::schema(
                format!("{section}[{i}].id"),
                format!("duplicate id {id}"),
            ));
        }
    }
    Ok(map)
}

fn check_extent(path: String, v: f64) -> Result<(), WorldError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(WorldError::schema(path, format!("must be positive, got {v}")))
    }
}

fn check_rating(path: String, v: f64) -> Result<(), WorldError> {
    if (0.0..=5.0).contains(&v) {
        Ok(())
    } else {
        Err(WorldError::schema(path, format!("rating {v} outside [0, 5]")))
    }
}

/// Parses and validates a world file.
pub fn load_world(document: &[u8]) -> Result<World, WorldError> {
    let de = &mut serde_json::Deserializer::from_slice(document);
    let doc: WorldDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        WorldError::schema(path, e.into_inner().to_string())
    })?;
    World::from_document(doc)
}

/// Canonical world file bytes.
pub fn save_world(world: &World) -> Vec<u8> {
    canonical::to_bytes(&world.to_document())
}

fn validate(doc: &WorldDocument) -> Result<(), WorldError> {
    let node_index = index_ids("nodes", doc.nodes.iter().map(|n| n.id.as_str()))?;
    index_ids("places", doc.places.iter().map(|p| p.id.as_str()))?;
    index_ids("instances", doc.instances.iter().map(|o| o.id.as_str()))?;

    if doc.vocabulary.is_empty() {
        return Err(WorldError::schema("vocabulary", "must not be empty"));
    }
    let mut vocab = BTreeSet::new();
    for (i, t) in doc.vocabulary.iter().enumerate() {
        if t.is_empty() || !vocab.insert(t.as_str()) {
            return Err(WorldError::schema(
                format!("vocabulary[{i}]"),
                format!("empty or duplicate type {t:?}"),
            ));
        }
    }

    for (i, node) in doc.nodes.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for (k, e) in node.neighbors.iter().enumerate() {
            let path = format!("nodes[{i}].neighbors[{k}]");
            let Some(&j) = node_index.get(&e.to) else {
                return Err(WorldError::DanglingReference {
                    path: format!("{path}.to"),
                    target: e.to.clone(),
                });
            };
            if j == i {
                return Err(WorldError::schema(format!("{path}.to"), "self loop"));
            }
            if !seen.insert(e.to.as_str()) {
                return Err(WorldError::schema(format!("{path}.to"), "duplicate neighbor"));
            }
            let other = &doc.nodes[j];
            let chord = haversine_distance(node.coord, other.coord);
            if !e.length.is_finite() || e.length <= 0.0 || e.length + EDGE_LENGTH_SLACK_M < chord {
                return Err(WorldError::schema(
                    format!("{path}.length"),
                    format!("length {} inconsistent with node distance {chord:.3}", e.length),
                ));
            }
            let bearing = initial_bearing(node.coord, other.coord)
                .map_err(|_| WorldError::schema(format!("{path}.to"), "coincident nodes"))?;
            if !e.heading.is_finite()
                || angular_offset(bearing, e.heading).abs() > EDGE_HEADING_TOLERANCE_DEG
            {
                return Err(WorldError::schema(
                    format!("{path}.heading"),
                    format!("heading {} disagrees with bearing {bearing:.3}", e.heading),
                ));
            }
        }
        let mut seen_web = BTreeSet::new();
        for (k, v) in node.web_visible.iter().enumerate() {
            let path = format!("nodes[{i}].web_visible[{k}]");
            if !node.neighbors.iter().any(|e| &e.to == v) {
                return Err(WorldError::DanglingReference {
                    path,
                    target: v.clone(),
                });
            }
            if !seen_web.insert(v.as_str()) {
                return Err(WorldError::schema(path, "duplicate entry"));
            }
        }
    }
    // symmetry once every edge is individually sound
    for node in &doc.nodes {
        for e in &node.neighbors {
            let other = &doc.nodes[node_index[&e.to]];
            let reciprocal = other.neighbors.iter().find(|r| r.to == node.id).is_some_and(|r| {
                angular_offset(e.heading + 180.0, r.heading).abs() <= EDGE_HEADING_TOLERANCE_DEG
                    && (r.length - e.length).abs() <= EDGE_LENGTH_SLACK_M
            });
            if !reciprocal {
                return Err(WorldError::AsymmetricEdge {
                    from: node.id.clone(),
                    to: e.to.clone(),
                });
            }
        }
    }

    for (i, p) in doc.places.iter().enumerate() {
        if p.types.is_empty() {
            return Err(WorldError::schema(format!("places[{i}].types"), "must not be empty"));
        }
        for (k, t) in p.types.iter().enumerate() {
            if !vocab.contains(t.as_str()) {
                return Err(WorldError::DanglingReference {
                    path: format!("places[{i}].types[{k}]"),
                    target: t.clone(),
                });
            }
        }
        if let Some(r) = p.rating {
            check_rating(format!("places[{i}].rating"), r)?;
        }
        for (k, r) in p.reviews.iter().enumerate() {
            check_rating(format!("places[{i}].reviews[{k}].rating"), r.rating)?;
        }
    }
    for (i, o) in doc.instances.iter().enumerate() {
        if o.category.is_empty() {
            return Err(WorldError::schema(format!("instances[{i}].category"), "empty category"));
        }
        check_extent(format!("instances[{i}].height_m"), o.height_m)?;
        check_extent(format!("instances[{i}].width_m"), o.width_m)?;
    }
    let mut region_names = BTreeSet::new();
    for (i, r) in doc.meta.regions.iter().enumerate() {
        if !region_names.insert(r.name.as_str()) {
            return Err(WorldError::schema(
                format!("meta.regions[{i}].name"),
                format!("duplicate region {}", r.name),
            ));
        }
    }
    Ok(())
}

impl World {
    /// Validates every cross-reference and geometric invariant, then builds
    /// the indexes. Error paths index the document as given.
    pub fn from_document(mut doc: WorldDocument) -> Result<World, WorldError> {
        validate(&doc)?;
        doc.nodes.sort_by(|a, b| a.id.cmp(&b.id));
        doc.places.sort_by(|a, b| a.id.cmp(&b.id));
        doc.instances.sort_by(|a, b| a.id.cmp(&b.id));
        for node in &mut doc.nodes {
            node.neighbors.sort_by(|a, b| a.to.cmp(&b.to));
            node.web_visible.sort();
        }
        let node_index = index_ids("nodes", doc.nodes.iter().map(|n| n.id.as_str()))?;
        let place_index = index_ids("places", doc.places.iter().map(|p| p.id.as_str()))?;
        let instance_index = index_ids("instances", doc.instances.iter().map(|o| o.id.as_str()))?;
        let adjacency = doc
            .nodes
            .iter()
            .map(|node| {
                node.neighbors
                    .iter()
                    .map(|e| Link {
                        to: node_index[&e.to],
                        heading: crate::geo::normalize_heading(e.heading),
                        length: e.length,
                        web_visible: node.web_visible.binary_search(&e.to).is_ok(),
                    })
                    .collect()
            })
            .collect();

        let node_grid = SpatialGrid::build(doc.nodes.iter().map(|n| n.coord));
        let place_grid = SpatialGrid::build(doc.places.iter().map(|p| p.coord));
        let instance_grid = SpatialGrid::build(doc.instances.iter().map(|o| o.coord));

        Ok(World {
            meta: doc.meta,
            nodes: doc.nodes,
            places: doc.places,
            instances: doc.instances,
            vocabulary: doc.vocabulary,
            node_index,
            place_index,
            instance_index,
            adjacency,
            node_grid,
            place_grid,
            instance_grid,
        })
    }

    pub fn to_document(&self) -> WorldDocument {
        WorldDocument {
            meta: self.meta.clone(),
            nodes: self.nodes.clone(),
            places: self.places.clone(),
            instances: self.instances.clone(),
            vocabulary: self.vocabulary.clone(),
        }
    }

    /// Same world with a different place set (e.g. after cleaning).
    pub fn with_places(&self, places: Vec<Place>) -> Result<World, WorldError> {
        let mut doc = self.to_document();
        doc.places = places;
        World::from_document(doc)
    }

    pub fn meta(&self) -> &WorldMeta {
        &self.meta
    }

    pub fn nodes(&self) -> &[StreetNode] {
        &self.nodes
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn instances(&self) -> &[ObjectInstance] {
        &self.instances
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn regions(&self) -> &[Region] {
        &self.meta.regions
    }

    pub fn node(&self, id: &str) -> Result<&StreetNode, WorldError> {
        self.node_index
            .get(id)
            .map(|&i| &self.nodes[i])
            .ok_or_else(|| WorldError::UnknownNode(id.to_string()))
    }

    pub fn node_idx(&self, id: &str) -> Result<usize, WorldError> {
        self.node_index
            .get(id)
            .copied()
            .ok_or_else(|| WorldError::UnknownNode(id.to_string()))
    }

    pub fn node_at(&self, idx: usize) -> &StreetNode {
        &self.nodes[idx]
    }

    pub(crate) fn links(&self, idx: usize) -> &[Link] {
        &self.adjacency[idx]
    }

    /// Number of graph neighbors.
    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    pub fn instance(&self, id: &str) -> Option<&ObjectInstance> {
        self.instance_index.get(id).map(|&i| &self.instances[i])
    }

    pub fn place_details(&self, id: &str) -> Result<&Place, WorldError> {
        self.place_index
            .get(id)
            .map(|&i| &self.places[i])
            .ok_or_else(|| WorldError::UnknownPlace(id.to_string()))
    }

    /// Snaps `p` to the nearest street node within `radius` meters. Ties go to
    /// the smallest id.
    pub fn relocate(&self, p: GeoCoordinate, radius: f64) -> Result<&StreetNode, WorldError> {
        let mut best: Option<(f64, usize)> = None;
        for i in self.node_grid.candidates(p, radius) {
            let d = haversine_distance(p, self.nodes[i].coord);
            if d > radius {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bi)) => d < bd || (d == bd && self.nodes[i].id < self.nodes[bi].id),
            };
            if better {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| &self.nodes[i]).ok_or(WorldError::NoStreetView {
            lat: p.lat(),
            lng: p.lng(),
            radius_m: radius,
        })
    }

    /// Places within `radius` of `p`, nearest first (ties by id). With a
    /// filter, a place qualifies if any of its types is listed.
    pub fn nearby_places(
        &self,
        p: GeoCoordinate,
        radius: f64,
        type_filter: Option<&[String]>,
    ) -> Vec<(&Place, f64)> {
        let mut out: Vec<(&Place, f64)> = self
            .place_grid
            .candidates(p, radius)
            .into_iter()
            .map(|i| (&self.places[i], haversine_distance(p, self.places[i].coord)))
            .filter(|(pl, d)| {
                *d <= radius
                    && type_filter.is_none_or(|f| pl.types.iter().any(|t| f.contains(t)))
            })
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id)));
        out
    }

    /// Instances within `radius` of `p`, in id order.
    pub fn nearby_instances(&self, p: GeoCoordinate, radius: f64) -> Vec<(&ObjectInstance, f64)> {
        let mut idx = self.instance_grid.candidates(p, radius);
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| (&self.instances[i], haversine_distance(p, self.instances[i].coord)))
            .filter(|(_, d)| *d <= radius)
            .collect()
    }

    /// Node indices inside `poly`, in id order.
    pub fn nodes_in(&self, poly: &GeoPolygon) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| poly.contains(n.coord))
            .map(|(i, _)| i)
            .collect()
    }

    /// First region whose polygon contains `p`.
    pub fn region_of(&self, p: GeoCoordinate) -> Option<&Region> {
        self.meta.regions.iter().find(|r| r.polygon.contains(p))
    }

    /// Canonical-serialization digest.
    pub fn digest(&self) -> String {
        canonical::digest(&self.to_document())
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::plus_world;
    use super::*;
    use crate::geo::destination_point;
    use serde_json::Value;

    fn mutate(w: &World, f: impl FnOnce(&mut Value)) -> Vec<u8> {
        let mut v: Value = serde_json::from_slice(&save_world(w)).unwrap();
        f(&mut v);
        serde_json::to_vec(&v).unwrap()
    }

    #[test]
    fn fixture_counts_and_roundtrip() {
        let w = plus_world();
        assert_eq!(w.nodes().len(), 6);
        assert_eq!(w.places().len(), 2);
        assert_eq!(w.instances().len(), 1);
        let bytes = save_world(&w);
        let again = load_world(&bytes).unwrap();
        assert_eq!(again, w);
        assert_eq!(save_world(&again), bytes);
    }

    #[test]
    fn missing_reverse_edge_is_asymmetric() {
        let w = plus_world();
        let bytes = mutate(&w, |v| {
            let nodes = v["nodes"].as_array_mut().unwrap();
            let n = nodes.iter_mut().find(|n| n["id"] == "n").unwrap();
            n["neighbors"] = Value::Array(vec![]);
            n["web_visible"] = Value::Array(vec![]);
        });
        assert_eq!(
            load_world(&bytes).unwrap_err(),
            WorldError::AsymmetricEdge {
                from: "c".into(),
                to: "n".into()
            }
        );
    }

    #[test]
    fn dangling_place_type_reports_path() {
        let w = plus_world();
        let bytes = mutate(&w, |v| {
            v["places"][0]["types"] = serde_json::json!(["not_a_type"]);
        });
        match load_world(&bytes).unwrap_err() {
            WorldError::DanglingReference { path, target } => {
                assert_eq!(path, "places[0].types[0]");
                assert_eq!(target, "not_a_type");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn schema_errors_carry_field_path() {
        let w = plus_world();
        let bytes = mutate(&w, |v| {
            v["nodes"][2]["coord"]["lat"] = serde_json::json!(95.0);
        });
        match load_world(&bytes).unwrap_err() {
            WorldError::Schema { path, .. } => assert_eq!(path, "nodes[2].coord"),
            e => panic!("unexpected {e}"),
        }
        let bytes = mutate(&w, |v| {
            v["instances"][0]["colour"] = serde_json::json!("red");
        });
        let e = load_world(&bytes).unwrap_err();
        assert!(matches!(&e, WorldError::Schema { path, .. } if path == "instances[0].colour"), "{e:?}");
        assert!(matches!(load_world(b"{"), Err(WorldError::Schema { .. })));
    }

    #[test]
    fn web_visible_must_be_neighbors() {
        let w = plus_world();
        let bytes = mutate(&w, |v| {
            let nodes = v["nodes"].as_array_mut().unwrap();
            let n = nodes.iter_mut().find(|n| n["id"] == "x").unwrap();
            n["web_visible"] = serde_json::json!(["c"]);
        });
        assert!(matches!(
            load_world(&bytes),
            Err(WorldError::DanglingReference { target, .. }) if target == "c"
        ));
    }

    #[test]
    fn bad_edge_heading_rejected() {
        let w = plus_world();
        let bytes = mutate(&w, |v| {
            let nodes = v["nodes"].as_array_mut().unwrap();
            let n = nodes.iter_mut().find(|n| n["id"] == "e").unwrap();
            n["neighbors"][0]["heading"] = serde_json::json!(10.0);
        });
        assert!(matches!(load_world(&bytes), Err(WorldError::Schema { path, .. }) if path.ends_with("heading")));
    }

    #[test]
    fn relocate_exact_tie_and_miss() {
        let w = plus_world();
        let c = w.node("c").unwrap().coord;
        assert_eq!(w.relocate(c, 50.0).unwrap().id, "c");
        // 20 m west of the east arm is the centre; halfway between c and e
        // is 10 m from both
        let mid = destination_point(c, 90.0, 10.0);
        let dc = haversine_distance(mid, c);
        let de = haversine_distance(mid, w.node("e").unwrap().coord);
        let got = w.relocate(mid, 50.0).unwrap();
        if (dc - de).abs() < 1e-9 {
            assert_eq!(got.id, "c");
        } else {
            assert_eq!(got.id, if dc < de { "c" } else { "e" });
        }
        let far = destination_point(c, 250.0, 10_000.0);
        assert!(matches!(w.relocate(far, 100.0), Err(WorldError::NoStreetView { .. })));
    }

    #[test]
    fn relocate_tie_goes_to_smaller_id() {
        // two nodes mirrored about the query point on the equator
        let q = GeoCoordinate::new(0.0, 0.0).unwrap();
        let a = GeoCoordinate::new(0.0, 0.0001).unwrap();
        let b = GeoCoordinate::new(0.0, -0.0001).unwrap();
        assert_eq!(haversine_distance(q, a), haversine_distance(q, b));
        let node = |id: &str, coord| StreetNode {
            id: id.into(),
            coord,
            neighbors: vec![],
            web_visible: vec![],
        };
        let w = World::from_document(WorldDocument {
            meta: WorldMeta::default(),
            nodes: vec![node("zeta", a), node("alpha", b)],
            places: vec![],
            instances: vec![],
            vocabulary: vec!["cafe".into()],
        })
        .unwrap();
        assert_eq!(w.relocate(q, 50.0).unwrap().id, "alpha");
    }

    #[test]
    fn nearby_places_sorted_and_filtered() {
        let w = plus_world();
        let c = w.node("c").unwrap().coord;
        let all = w.nearby_places(c, 100.0, None);
        assert_eq!(all.iter().map(|(p, _)| p.id.as_str()).collect::<Vec<_>>(), ["p-cafe", "p-bank"]);
        let cafes = w.nearby_places(c, 100.0, Some(&["cafe".to_string()]));
        assert_eq!(cafes.len(), 1);
        assert!(cafes.iter().all(|(p, _)| p.has_type("cafe")));
        assert!(w.nearby_places(c, 0.0, None).is_empty());
        let at_cafe = w.nearby_places(w.place_details("p-cafe").unwrap().coord, 0.0, None);
        assert_eq!(at_cafe.len(), 1);
    }

    #[test]
    fn place_details_known_and_unknown() {
        let w = plus_world();
        let cafe = w.place_details("p-cafe").unwrap();
        assert_eq!(cafe.reviews[0].text, "Great flat white, \"really\" authentic.\nWill return.");
        assert_eq!(
            w.place_details("nope").unwrap_err(),
            WorldError::UnknownPlace("nope".into())
        );
    }

    #[test]
    fn default_vocabulary_has_96_types() {
        let v = default_place_types();
        assert_eq!(v.len(), 96);
        assert!(v.contains(&"cafe".to_string()));
    }
}
