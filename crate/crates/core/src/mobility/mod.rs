//! Movement and navigation over the street graph.
//!
//! Two movers expose a node's outgoing directions: `Grid` sees every graph
//! edge, `Web` only the ones the panorama shows. `Hybrid` uses the web view
//! and falls back to the grid at nodes where the web view is not enough.

mod instruction;
mod intention;
mod routing;
mod vln;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{angular_offset, Pose};
use crate::perception::PerceptionError;
use crate::provider::ProviderError;
use crate::world::{World, WorldError};

pub use instruction::{generate_instruction, verbalize, Action, Instruction, Segment, Side, Trigger};
pub use intention::{
    intention_navigate_choose, HttpReasoner, IntentionChoice, MockReasoner, Reasoner,
};
pub use routing::{
    estimate_travel_time, optimize_waypoint_order, plan_route, plan_route_via, point_navigate,
    region_navigate_plan, tour_cost, KeyKind, KeyPosition, Leg, RegionPlan, Route, TravelSpeeds, WaypointPlan,
    EXACT_WAYPOINT_LIMIT,
};
pub use vln::{
    build_policy, observe, resolve_action, vln_step, DirectionalView, ExternalPolicy, Landmark,
    ObservationConfig, Policy, PolicyConfig, ScriptedPolicy, VLNObservation,
};

/// Half-width of the heading window `step` accepts.
pub const STEP_HEADING_TOLERANCE_DEG: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MobilityError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no navigable edge within 15 degrees of heading {heading} at {node}")]
    NoEdgeInDirection { node: String, heading: f64 },
    #[error("{to} is unreachable from {from}")]
    Unreachable { from: String, to: String },
    #[error("unknown transport mode {0:?}")]
    UnknownMode(String),
    #[error("no navigable direction makes progress at {node}")]
    Stuck { node: String },
    #[error("region contains no street node")]
    EmptyRegion,
    #[error("agent is at {found}, route starts at {expected}")]
    NotAtStart { expected: String, found: String },
    #[error("route cannot be expressed as an instruction: {0}")]
    NotInstructable(String),
    #[error("policy returned action {0:?}, not in the action set")]
    InvalidAction(String),
    #[error("intention navigation needs at least 2 roads, got {0}")]
    TooFewRoads(usize),
    #[error("reasoner chose road {index} of {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoverMode {
    Web,
    #[default]
    Grid,
    /// Web directions where the panorama shows any, grid directions otherwise.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub heading: f64,
    pub neighbor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub node_id: String,
    pub pose: Pose,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub node_id: String,
    pub pose: Pose,
    /// Every position held so far, starting with the initial one.
    pub trajectory: Vec<TrajectoryEntry>,
    pub rng_seed: u64,
}

impl AgentState {
    pub fn new(w: &World, node_id: &str, pose: Pose, rng_seed: u64) -> Result<Self, MobilityError> {
        w.node(node_id)?;
        Ok(Self {
            node_id: node_id.to_string(),
            pose,
            trajectory: vec![TrajectoryEntry {
                node_id: node_id.to_string(),
                pose,
                step: 0,
            }],
            rng_seed,
        })
    }

    /// Moves to `node_id` facing `heading`, recording the new position.
    pub(crate) fn advance(&mut self, node_id: &str, heading: f64) {
        self.node_id = node_id.to_string();
        self.pose = self.pose.with_heading(heading);
        let step = self.trajectory.len();
        self.trajectory.push(TrajectoryEntry {
            node_id: self.node_id.clone(),
            pose: self.pose,
            step,
        });
    }

    pub fn steps(&self) -> usize {
        self.trajectory.len() - 1
    }
}

pub(crate) fn directions_at(w: &World, idx: usize, mode: MoverMode) -> Vec<Direction> {
    let all = || {
        w.links(idx).iter().map(|l| Direction {
            heading: l.heading,
            neighbor: l.to,
        })
    };
    let web = || {
        w.links(idx).iter().filter(|l| l.web_visible).map(|l| Direction {
            heading: l.heading,
            neighbor: l.to,
        })
    };
    let mut out: Vec<Direction> = match mode {
        MoverMode::Grid => all().collect(),
        MoverMode::Web => web().collect(),
        MoverMode::Hybrid => {
            let v: Vec<Direction> = web().collect();
            if v.is_empty() {
                all().collect()
            } else {
                v
            }
        }
    };
    out.sort_by(|a, b| {
        a.heading
            .total_cmp(&b.heading)
            .then_with(|| w.node_at(a.neighbor).id.cmp(&w.node_at(b.neighbor).id))
    });
    out
}

/// Headings and neighbor ids the mover offers at `node_id`, by heading.
pub fn navigable_directions(
    w: &World,
    node_id: &str,
    mode: MoverMode,
) -> Result<Vec<(f64, String)>, MobilityError> {
    let idx = w.node_idx(node_id)?;
    Ok(directions_at(w, idx, mode)
        .into_iter()
        .map(|d| (d.heading, w.node_at(d.neighbor).id.clone()))
        .collect())
}

/// Moves along the direction closest to `heading` (within 15 degrees, ties to
/// the smaller heading).
pub fn step(
    w: &World,
    s: &AgentState,
    heading: f64,
    mode: MoverMode,
) -> Result<AgentState, MobilityError> {
    let idx = w.node_idx(&s.node_id)?;
    let best = directions_at(w, idx, mode)
        .into_iter()
        .map(|d| (angular_offset(heading, d.heading).abs(), d))
        .filter(|(o, _)| *o <= STEP_HEADING_TOLERANCE_DEG)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.heading.total_cmp(&b.1.heading)));
    let Some((_, d)) = best else {
        return Err(MobilityError::NoEdgeInDirection {
            node: s.node_id.clone(),
            heading,
        });
    };
    let mut next = s.clone();
    next.advance(&w.node_at(d.neighbor).id, d.heading);
    Ok(next)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::fixtures::plus_world;

    #[test]
    fn isolated_node_has_no_directions() {
        let w = plus_world();
        assert!(navigable_directions(&w, "x", MoverMode::Grid).unwrap().is_empty());
        assert!(navigable_directions(&w, "x", MoverMode::Web).unwrap().is_empty());
    }

    #[test]
    fn web_hides_edges() {
        let w = plus_world();
        let grid = navigable_directions(&w, "c", MoverMode::Grid).unwrap();
        let web = navigable_directions(&w, "c", MoverMode::Web).unwrap();
        assert_eq!(grid.len(), 4);
        assert_eq!(web.len(), 2);
        assert!(web.iter().all(|d| grid.contains(d)));
        let headings: Vec<f64> = grid.iter().map(|d| d.0).collect();
        for (h, want) in headings.iter().zip([0.0, 90.0, 180.0, 270.0]) {
            assert!(angular_offset(*h, want).abs() < 1.0);
        }
    }

    #[test]
    fn step_tolerance() {
        let w = plus_world();
        let s = AgentState::new(&w, "c", Pose::default(), 0).unwrap();
        let t = step(&w, &s, 10.0, MoverMode::Grid).unwrap();
        assert_eq!(t.node_id, "n");
        assert_eq!(t.trajectory.len(), 2);
        assert!(matches!(
            step(&w, &s, 45.0, MoverMode::Grid),
            Err(MobilityError::NoEdgeInDirection { .. })
        ));
        // east exists on the grid but is hidden from the web panorama
        assert!(step(&w, &s, 90.0, MoverMode::Web).is_err());
        assert_eq!(step(&w, &s, 90.0, MoverMode::Hybrid).unwrap_err(), step(&w, &s, 90.0, MoverMode::Web).unwrap_err());
    }

    #[test]
    fn random_walk_trajectory_counts() {
        use rand::{Rng, SeedableRng};
        let w = fixtures::grid_world(5, 5, 20.0, &[]);
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut s = AgentState::new(&w, "g2_2", Pose::default(), seed).unwrap();
            let n = rng.random_range(0..20);
            for _ in 0..n {
                let dirs = navigable_directions(&w, &s.node_id, MoverMode::Grid).unwrap();
                let h = dirs[rng.random_range(0..dirs.len())].0;
                s = step(&w, &s, h, MoverMode::Grid).unwrap();
            }
            assert_eq!(s.trajectory.len(), n + 1);
            assert!(s.trajectory.iter().enumerate().all(|(i, e)| e.step == i));
        }
    }
}
