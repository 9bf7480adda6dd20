//! Symbolic camera, perception providers, and the geometry that ties image
//! space back to the world.
//!
//! The camera is equiangular on the horizontal axis: an entity at signed
//! offset `o` from the view heading lands at `cx = 0.5 + o / fov`, and its box
//! spans `extent / distance` radians (as a fraction of the FOV). This keeps the
//! inverse used by the frustum matcher exact. Pitch is ignored; `cy` is 0.5.

mod active;
mod dedup;
mod detect;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{angular_offset, haversine_distance, initial_bearing, normalize_heading, Pose};
use crate::provider::ProviderError;
use crate::world::{World, WorldError};

pub use active::{active_detect, proposal_bearing, ActiveDetectConfig};
pub use dedup::{
    deduplicate, DetectionGroup, HttpMatcher, InstanceMatcher, OracleMatcher, SimulatedMatcher,
};
pub use detect::{
    build_detector, Detector, HttpDetector, NoisyDetector, NoisyParams, OracleDetector,
    PerceptionProviderConfig,
};

/// Default frustum radius for proposal-to-place matching.
pub const DEFAULT_MATCH_RADIUS_M: f64 = 30.0;

/// Default range of the symbolic camera.
pub const DEFAULT_VISIBILITY_RANGE_M: f64 = 50.0;

/// Storefront extent used for every place (width, height).
pub const PLACE_FACADE_M: (f64, f64) = (6.0, 4.0);

/// Entities closer than this have no usable bearing and are never rendered.
const MIN_RENDER_DISTANCE_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no proposal matches the candidate bearing after re-aiming")]
    LostTarget,
    #[error("candidate was captured at {found}, not {expected}")]
    CandidateNodeMismatch { expected: String, found: String },
}

/// Normalized image box; all four fields lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        [self.cx, self.cy, self.w, self.h]
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Place,
    Instance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleEntity {
    pub entity_id: String,
    pub kind: EntityKind,
    pub category: String,
    pub bbox: BBox,
    pub distance: f64,
    pub bearing: f64,
}

/// What a camera at `node_id` with `pose` sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicView {
    pub node_id: String,
    pub pose: Pose,
    pub visible_entities: Vec<VisibleEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSource {
    pub node_id: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectProposal {
    pub bbox: BBox,
    pub label: String,
    pub score: f64,
    pub source_view: ViewSource,
    /// Ground-truth entity behind the proposal, known only to simulated
    /// providers. Never sent over the wire.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchOutcome {
    Matched { place_id: String, distance: f64 },
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub proposal: ObjectProposal,
    pub outcome: MatchOutcome,
}

impl MatchResult {
    pub fn place_id(&self) -> Option<&str> {
        match &self.outcome {
            MatchOutcome::Matched { place_id, .. } => Some(place_id),
            MatchOutcome::FalsePositive => None,
        }
    }
}

/// 1-degree absolute bearing bucket used for occlusion.
pub fn bearing_bucket(bearing: f64) -> u16 {
    (normalize_heading(bearing).floor() as u16).min(359)
}

/// Horizontal box for an entity at `offset` degrees with physical extent
/// `(width, height)` at `distance` under `fov`.
pub(crate) fn project(offset: f64, distance: f64, width_m: f64, height_m: f64, fov: f64) -> BBox {
    BBox {
        cx: 0.5 + offset / fov,
        cy: 0.5,
        w: ((width_m / distance).to_degrees() / fov).min(1.0),
        h: ((height_m / distance).to_degrees() / fov).min(1.0),
    }
}

struct Candidate<'a> {
    id: &'a str,
    kind: EntityKind,
    category: &'a str,
    extent: (f64, f64),
    distance: f64,
    bearing: f64,
}

/// Entities that survive range and occlusion at a node (nearest per bearing
/// bucket), independent of camera pose.
fn unoccluded<'a>(w: &'a World, node: usize, range: f64) -> Vec<Candidate<'a>> {
    let origin = w.node_at(node).coord;
    let mut all: Vec<Candidate<'a>> = Vec::new();
    for (p, d) in w.nearby_places(origin, range, None) {
        if d < MIN_RENDER_DISTANCE_M {
            continue;
        }
        all.push(Candidate {
            id: &p.id,
            kind: EntityKind::Place,
            category: p.primary_type(),
            extent: PLACE_FACADE_M,
            distance: d,
            bearing: initial_bearing(origin, p.coord).expect("distance checked"),
        });
    }
    for (o, d) in w.nearby_instances(origin, range) {
        if d < MIN_RENDER_DISTANCE_M {
            continue;
        }
        all.push(Candidate {
            id: &o.id,
            kind: EntityKind::Instance,
            category: &o.category,
            extent: (o.width_m, o.height_m),
            distance: d,
            bearing: initial_bearing(origin, o.coord).expect("distance checked"),
        });
    }
    let mut best: Vec<Option<usize>> = vec![None; 360];
    for (i, c) in all.iter().enumerate() {
        let slot = &mut best[bearing_bucket(c.bearing) as usize];
        let replace = match *slot {
            None => true,
            Some(j) => {
                let o = &all[j];
                (c.distance, c.kind, c.id) < (o.distance, o.kind, o.id)
            }
        };
        if replace {
            *slot = Some(i);
        }
    }
    let keep: Vec<usize> = best.into_iter().flatten().collect();
    let mut flags = vec![false; all.len()];
    for i in keep {
        flags[i] = true;
    }
    all.into_iter()
        .zip(flags)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// Renders one symbolic view per pose. Visible entities are ordered by
/// offset, left to right.
pub fn render_views(
    w: &World,
    node_id: &str,
    poses: &[Pose],
    visibility_range: f64,
) -> Result<Vec<SymbolicView>, PerceptionError> {
    let node = w.node_idx(node_id)?;
    let candidates = unoccluded(w, node, visibility_range);
    Ok(poses
        .iter()
        .map(|pose| {
            let half = pose.fov() / 2.0;
            let mut visible: Vec<(f64, VisibleEntity)> = candidates
                .iter()
                .filter_map(|c| {
                    let offset = angular_offset(pose.heading(), c.bearing);
                    (offset.abs() <= half).then(|| {
                        (
                            offset,
                            VisibleEntity {
                                entity_id: c.id.to_string(),
                                kind: c.kind,
                                category: c.category.to_string(),
                                bbox: project(offset, c.distance, c.extent.0, c.extent.1, pose.fov()),
                                distance: c.distance,
                                bearing: c.bearing,
                            },
                        )
                    })
                })
                .collect();
            visible.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.entity_id.cmp(&b.1.entity_id)));
            SymbolicView {
                node_id: node_id.to_string(),
                pose: *pose,
                visible_entities: visible.into_iter().map(|(_, e)| e).collect(),
            }
        })
        .collect())
}

/// Signed offsets `(low, high)` subtended by a box, clipped to the FOV.
pub fn bbox_offset_interval(bbox: &BBox, fov: f64) -> (f64, f64) {
    let half = fov / 2.0;
    let lo = ((bbox.cx - bbox.w / 2.0 - 0.5) * fov).max(-half);
    let hi = ((bbox.cx + bbox.w / 2.0 - 0.5) * fov).min(half);
    (lo, hi)
}

/// Assigns a proposal to the nearest place inside its frustum (bearing
/// interval of the box, out to `radius`), or marks it a false positive.
pub fn match_proposal_to_place(
    w: &World,
    proposal: &ObjectProposal,
    radius: f64,
) -> Result<MatchResult, PerceptionError> {
    let node = w.node(&proposal.source_view.node_id)?;
    let pose = proposal.source_view.pose;
    let (lo, hi) = bbox_offset_interval(&proposal.bbox, pose.fov());
    let hit = w
        .nearby_places(node.coord, radius, None)
        .into_iter()
        .filter(|(_, d)| *d >= MIN_RENDER_DISTANCE_M)
        .find(|(p, _)| {
            let b = initial_bearing(node.coord, p.coord).expect("distance checked");
            let o = angular_offset(pose.heading(), b);
            lo <= o && o <= hi
        });
    let outcome = match hit {
        Some((p, d)) => MatchOutcome::Matched {
            place_id: p.id.clone(),
            distance: d,
        },
        None => MatchOutcome::FalsePositive,
    };
    Ok(MatchResult {
        proposal: proposal.clone(),
        outcome,
    })
}

/// Distance from a proposal's source node to an entity, if it exists.
pub fn entity_distance(w: &World, node_id: &str, entity_id: &str) -> Option<f64> {
    let node = w.node(node_id).ok()?;
    let coord = w
        .place_details(entity_id)
        .map(|p| p.coord)
        .ok()
        .or_else(|| w.instance(entity_id).map(|o| o.coord))?;
    Some(haversine_distance(node.coord, coord))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::fixtures::plus_world;

    fn oracle_view(w: &World, node: &str, heading: f64, fov: f64) -> SymbolicView {
        render_views(w, node, &[Pose::level(heading, fov).unwrap()], 100.0)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn fov_halving_doubles_width() {
        let w = plus_world();
        // bin sits at bearing 100 from c: offset 20 from heading 80
        let wide = oracle_view(&w, "c", 80.0, 120.0);
        let narrow = oracle_view(&w, "c", 80.0, 60.0);
        let bw = wide.visible_entities.iter().find(|e| e.entity_id == "o-bin").unwrap();
        let bn = narrow.visible_entities.iter().find(|e| e.entity_id == "o-bin").unwrap();
        assert!((bn.bbox.w / bw.bbox.w - 2.0).abs() < 1e-9);
        let offset = angular_offset(80.0, bw.bearing);
        assert!((offset - 20.0).abs() < 1.0);
        assert!((bw.bbox.cx - (0.5 + offset / 120.0)).abs() < 1e-6);
        assert!((bn.bbox.cx - (0.5 + offset / 60.0)).abs() < 1e-6);
    }

    #[test]
    fn offset_50_visible_at_120_not_90() {
        let w = plus_world();
        // bin at bearing ~100, heading 50 gives offset ~50: inside 60, outside 45
        let v120 = oracle_view(&w, "c", 50.0, 120.0);
        let v90 = oracle_view(&w, "c", 50.0, 90.0);
        assert!(v120.visible_entities.iter().any(|e| e.entity_id == "o-bin"));
        assert!(!v90.visible_entities.iter().any(|e| e.entity_id == "o-bin"));
    }

    #[test]
    fn unknown_node_errors() {
        let w = plus_world();
        assert!(matches!(
            render_views(&w, "zz", &[Pose::default()], 50.0),
            Err(PerceptionError::World(WorldError::UnknownNode(_)))
        ));
    }

    #[test]
    fn match_dead_ahead_and_false_positive() {
        let w = plus_world();
        let v = oracle_view(&w, "c", 45.0, 60.0);
        let cafe = v.visible_entities.iter().find(|e| e.entity_id == "p-cafe").unwrap();
        let proposal = ObjectProposal {
            bbox: cafe.bbox,
            label: "cafe".into(),
            score: 1.0,
            source_view: ViewSource {
                node_id: "c".into(),
                pose: v.pose,
            },
            truth: None,
        };
        let m = match_proposal_to_place(&w, &proposal, 30.0).unwrap();
        assert_eq!(m.place_id(), Some("p-cafe"));
        match m.outcome {
            MatchOutcome::Matched { distance, .. } => assert!((distance - 10.0).abs() < 0.05),
            _ => unreachable!(),
        }
        // same box pointing the other way sees nothing
        let mut away = proposal.clone();
        away.source_view.pose = Pose::level(300.0, 60.0).unwrap();
        assert_eq!(
            match_proposal_to_place(&w, &away, 30.0).unwrap().outcome,
            MatchOutcome::FalsePositive
        );
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(bearing_bucket(0.0), 0);
        assert_eq!(bearing_bucket(359.999), 359);
        assert_eq!(bearing_bucket(-0.5), 359);
        assert_eq!(bearing_bucket(720.2), 0);
    }
}
