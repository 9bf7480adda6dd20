use serde::{Deserialize, Serialize};
use serde_json::json;

use super::instruction::{Action, Instruction, Side, Trigger};
use super::{directions_at, AgentState, Direction, MobilityError, MoverMode};
use crate::geo::{angular_offset, normalize_heading, Pose};
use crate::perception::{match_proposal_to_place, render_views, Detector, DEFAULT_MATCH_RADIUS_M};
use crate::provider::{ChooseRequest, HttpClient, HttpProviderConfig, ProviderError};
use crate::world::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub place_id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalView {
    pub side: Side,
    pub heading: f64,
    pub landmarks: Vec<Landmark>,
}

/// Eight views around the agent, in [`Side::ALL`] order, plus the number of
/// directions the grid mover offers here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VLNObservation {
    pub directional_views: Vec<DirectionalView>,
    pub intersection_degree: usize,
}

impl VLNObservation {
    pub fn sees(&self, side: Side, place_id: &str) -> bool {
        self.directional_views
            .iter()
            .any(|v| v.side == side && v.landmarks.iter().any(|l| l.place_id == place_id))
    }

    /// First side (in view order) whose landmarks include `place_id`.
    pub fn side_of(&self, place_id: &str) -> Option<Side> {
        self.directional_views
            .iter()
            .find(|v| v.landmarks.iter().any(|l| l.place_id == place_id))
            .map(|v| v.side)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub fov: f64,
    pub visibility_range: f64,
    pub match_radius: f64,
    /// Proposals below this score are ignored.
    pub min_score: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            fov: 45.0,
            visibility_range: crate::perception::DEFAULT_VISIBILITY_RANGE_M,
            match_radius: DEFAULT_MATCH_RADIUS_M,
            min_score: 0.5,
        }
    }
}

/// Captures the eight directional views at `node_id` and names the places the
/// detector finds in each.
pub fn observe(
    w: &World,
    node_id: &str,
    heading: f64,
    detector: &dyn Detector,
    cfg: &ObservationConfig,
) -> Result<VLNObservation, MobilityError> {
    let idx = w.node_idx(node_id)?;
    let poses: Vec<Pose> = Side::ALL
        .iter()
        .map(|s| Pose::level(heading + s.offset(), cfg.fov).expect("finite heading"))
        .collect();
    let views = render_views(w, node_id, &poses, cfg.visibility_range)?;
    let mut directional_views = Vec::with_capacity(8);
    for (side, view) in Side::ALL.iter().zip(&views) {
        let mut landmarks: Vec<Landmark> = Vec::new();
        for p in detector.detect(view, w.vocabulary())? {
            if p.score < cfg.min_score {
                continue;
            }
            let m = match_proposal_to_place(w, &p, cfg.match_radius)?;
            if let Some(id) = m.place_id() {
                if !landmarks.iter().any(|l| l.place_id == id) {
                    landmarks.push(Landmark {
                        place_id: id.to_string(),
                        name: w.place_details(id)?.name.clone(),
                    });
                }
            }
        }
        directional_views.push(DirectionalView {
            side: *side,
            heading: view.pose.heading(),
            landmarks,
        });
    }
    Ok(VLNObservation {
        directional_views,
        intersection_degree: w.degree(idx),
    })
}

/// Grid-mover edge an action leads to, if any.
///
/// * forward: the straightest direction that is not a U-turn (`|offset| < 150`)
/// * turn_left / turn_right: offset within `[30, 150]` on that side, closest to 90
pub(crate) fn resolve_idx(w: &World, node: usize, heading: f64, action: Action) -> Option<Direction> {
    let scored = directions_at(w, node, MoverMode::Grid)
        .into_iter()
        .map(|d| (angular_offset(heading, d.heading), d));
    let pick = |it: Vec<(f64, Direction)>| {
        it.into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.heading.total_cmp(&b.1.heading)))
            .map(|(_, d)| d)
    };
    match action {
        Action::Stop => None,
        Action::Forward => pick(
            scored
                .filter(|(o, _)| o.abs() < 150.0)
                .map(|(o, d)| (o.abs(), d))
                .collect(),
        ),
        Action::TurnLeft => pick(
            scored
                .filter(|(o, _)| (-150.0..=-30.0).contains(o))
                .map(|(o, d)| ((o + 90.0).abs(), d))
                .collect(),
        ),
        Action::TurnRight => pick(
            scored
                .filter(|(o, _)| (30.0..=150.0).contains(o))
                .map(|(o, d)| ((o - 90.0).abs(), d))
                .collect(),
        ),
    }
}

/// Neighbor id and heading an action leads to from `node_id` facing `heading`.
pub fn resolve_action(
    w: &World,
    node_id: &str,
    heading: f64,
    action: Action,
) -> Result<Option<(f64, String)>, MobilityError> {
    let idx = w.node_idx(node_id)?;
    Ok(resolve_idx(w, idx, normalize_heading(heading), action)
        .map(|d| (d.heading, w.node_at(d.neighbor).id.clone())))
}

/// Decides the next action label from the current observation.
pub trait Policy {
    fn act(
        &mut self,
        s: &AgentState,
        obs: &VLNObservation,
        instr: &Instruction,
    ) -> Result<String, MobilityError>;
}

/// Instruction follower that reads only the observations: it walks the
/// segment list, counting intersections and steps, and fires each segment
/// when its trigger holds.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPolicy {
    next_segment: usize,
    intersections_seen: usize,
    steps_since_fire: usize,
    observations: usize,
}

impl ScriptedPolicy {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for ScriptedPolicy {
    fn act(
        &mut self,
        _s: &AgentState,
        obs: &VLNObservation,
        instr: &Instruction,
    ) -> Result<String, MobilityError> {
        let first = self.observations == 0;
        self.observations += 1;
        if !first {
            self.steps_since_fire += 1;
            if obs.intersection_degree >= 3 {
                self.intersections_seen += 1;
            }
        }
        let Some(seg) = instr.segments.get(self.next_segment) else {
            return Ok(Action::Stop.label().to_string());
        };
        let fire = match &seg.trigger {
            Trigger::AtStart => first,
            Trigger::AtIntersection { ordinal } => !first && self.intersections_seen == *ordinal,
            Trigger::AtLandmark { place_id, side } => !first && obs.sees(*side, place_id),
            Trigger::AtDestination { steps } => self.steps_since_fire == *steps,
        };
        if fire {
            self.next_segment += 1;
            self.steps_since_fire = 0;
            Ok(seg.action.label().to_string())
        } else {
            Ok(Action::Forward.label().to_string())
        }
    }
}

/// Policy backed by the `/choose` endpoint. Options are the four action
/// labels; the context carries the instruction, the observation and the
/// actions taken so far.
#[derive(Debug, Clone)]
pub struct ExternalPolicy {
    client: HttpClient,
    history: Vec<String>,
}

impl ExternalPolicy {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            client: HttpClient::new(config)?,
            history: Vec::new(),
        })
    }
}

impl Policy for ExternalPolicy {
    fn act(
        &mut self,
        s: &AgentState,
        obs: &VLNObservation,
        instr: &Instruction,
    ) -> Result<String, MobilityError> {
        let options: Vec<String> = Action::ALL.iter().map(|a| a.label().to_string()).collect();
        let resp = self.client.choose(&ChooseRequest {
            options: options.clone(),
            context: json!({
                "task": "vln",
                "instruction": instr.verbalization,
                "observation": obs,
                "history": self.history,
                "step": s.steps(),
            }),
        })?;
        let label = options
            .get(resp.index)
            .cloned()
            .ok_or_else(|| MobilityError::InvalidAction(format!("option index {}", resp.index)))?;
        self.history.push(label.clone());
        Ok(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    Oracle,
    External(HttpProviderConfig),
}

/// Fresh per-episode policy.
pub fn build_policy(cfg: &PolicyConfig) -> Result<Box<dyn Policy + Send>, ProviderError> {
    Ok(match cfg {
        PolicyConfig::Oracle => Box::new(ScriptedPolicy::new()),
        PolicyConfig::External(h) => Box::new(ExternalPolicy::new(h.clone())?),
    })
}

/// Asks the policy for the next action and checks it against the action set.
pub fn vln_step(
    s: &AgentState,
    obs: &VLNObservation,
    instr: &Instruction,
    policy: &mut dyn Policy,
) -> Result<Action, MobilityError> {
    let label = policy.act(s, obs, instr)?;
    Action::parse(&label).ok_or(MobilityError::InvalidAction(label))
}
