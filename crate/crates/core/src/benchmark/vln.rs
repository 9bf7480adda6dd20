use serde::{Deserialize, Serialize};

use super::BenchmarkError;
use crate::geo::{haversine_distance, Pose};
use crate::mobility::{
    observe, resolve_action, vln_step, Action, AgentState, Instruction, KeyKind, ObservationConfig,
    Policy, Route,
};
use crate::perception::Detector;
use crate::world::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VlnConfig {
    /// An episode succeeds when the agent stops this close to the destination.
    pub success_radius_m: f64,
    /// Action budget as a multiple of the route's node count.
    pub budget_factor: usize,
    #[serde(default)]
    pub observation: ObservationConfig,
}

impl Default for VlnConfig {
    fn default() -> Self {
        Self {
            success_radius_m: 25.0,
            budget_factor: 3,
            observation: ObservationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyStats {
    pub total: usize,
    pub reached: usize,
    pub correct: usize,
}

impl KeyStats {
    fn add(&mut self, o: &KeyStats) {
        self.total += o.total;
        self.reached += o.reached;
        self.correct += o.correct;
    }

    pub fn arr(&self) -> Option<f64> {
        (self.total > 0).then(|| self.reached as f64 / self.total as f64)
    }

    /// Action accuracy over the reached positions only.
    pub fn reac(&self) -> Option<f64> {
        (self.reached > 0).then(|| self.correct as f64 / self.reached as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlnRecord {
    pub route_id: String,
    pub region: String,
    pub success: bool,
    pub stopped: bool,
    pub budget_exhausted: bool,
    pub final_node: String,
    pub final_distance_m: f64,
    pub steps: usize,
    pub actions: Vec<Action>,
    pub start: KeyStats,
    pub intersection: KeyStats,
    pub stop: KeyStats,
}

/// Follows `instr` from the route start with `policy` choosing each action
/// from the observation `detector` produces.
///
/// The agent starts facing the first edge of the route. A key position is
/// reached the first time the agent stands on it, and the action chosen there
/// is scored against the instruction. The destination counts as reached once
/// the agent has been within the success radius, and as correct only when the
/// episode succeeds. Running out of budget is a failed episode, not an error.
#[allow(clippy::too_many_arguments)]
pub fn run_vln_episode(
    w: &World,
    route: &Route,
    instr: &Instruction,
    detector: &dyn Detector,
    policy: &mut dyn Policy,
    cfg: &VlnConfig,
    route_id: &str,
    region: &str,
) -> Result<VlnRecord, BenchmarkError> {
    if instr.segments.len() != route.key_positions.len() {
        return Err(BenchmarkError::InvalidConfig(format!(
            "route {route_id}: {} segments for {} key positions",
            instr.segments.len(),
            route.key_positions.len()
        )));
    }
    let goal = w.node(route.stop())?.coord;
    let heading = match route.path.get(1) {
        Some(next) => crate::mobility::navigable_directions(w, route.start(), crate::mobility::MoverMode::Grid)?
            .into_iter()
            .find(|(_, id)| id == next)
            .map(|(h, _)| h)
            .unwrap_or(0.0),
        None => 0.0,
    };
    let pose = Pose::level(heading, 90.0).expect("finite heading");
    let mut s = AgentState::new(w, route.start(), pose, 0)?;
    let budget = cfg.budget_factor * route.path.len();

    // per key position: first action taken there
    let mut first_action: Vec<Option<Action>> = vec![None; route.key_positions.len()];
    let mut near_goal = false;
    let mut stopped = false;
    let mut actions = Vec::new();
    while actions.len() < budget {
        let here = w.node(&s.node_id)?.coord;
        near_goal |= haversine_distance(here, goal) <= cfg.success_radius_m;
        let obs = observe(w, &s.node_id, s.pose.heading(), detector, &cfg.observation)?;
        let action = vln_step(&s, &obs, instr, policy)?;
        for (k, key) in route.key_positions.iter().enumerate() {
            if key.node_id == s.node_id && first_action[k].is_none() {
                first_action[k] = Some(action);
            }
        }
        actions.push(action);
        if action == Action::Stop {
            stopped = true;
            break;
        }
        if let Some((h, next)) = resolve_action(w, &s.node_id, s.pose.heading(), action)? {
            s.advance(&next, h);
        }
    }
    let final_distance_m = haversine_distance(w.node(&s.node_id)?.coord, goal);
    let success = stopped && final_distance_m <= cfg.success_radius_m;

    let mut rec = VlnRecord {
        route_id: route_id.to_string(),
        region: region.to_string(),
        success,
        stopped,
        budget_exhausted: !stopped,
        final_node: s.node_id.clone(),
        final_distance_m,
        steps: s.steps(),
        actions,
        start: KeyStats::default(),
        intersection: KeyStats::default(),
        stop: KeyStats::default(),
    };
    for (k, key) in route.key_positions.iter().enumerate() {
        let expected = instr.segments[k].action;
        let (stats, reached, correct) = match key.kind {
            KeyKind::Start => (
                &mut rec.start,
                first_action[k].is_some(),
                first_action[k] == Some(expected),
            ),
            KeyKind::Intersection => (
                &mut rec.intersection,
                first_action[k].is_some(),
                first_action[k] == Some(expected),
            ),
            KeyKind::Stop => (&mut rec.stop, near_goal || success, success),
        };
        stats.total += 1;
        stats.reached += reached as usize;
        stats.correct += (reached && correct) as usize;
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlnReport {
    pub routes: usize,
    pub success: f64,
    pub start: KeyStats,
    pub intersection: KeyStats,
    pub stop: KeyStats,
    pub start_reac: Option<f64>,
    pub intersection_arr: Option<f64>,
    pub intersection_reac: Option<f64>,
    pub stop_arr: Option<f64>,
    pub stop_reac: Option<f64>,
}

/// Pools key-position counts over all records. `None` when `records` is empty.
pub fn aggregate_vln(records: &[VlnRecord]) -> Option<VlnReport> {
    if records.is_empty() {
        return None;
    }
    let (mut start, mut intersection, mut stop) =
        (KeyStats::default(), KeyStats::default(), KeyStats::default());
    for r in records {
        start.add(&r.start);
        intersection.add(&r.intersection);
        stop.add(&r.stop);
    }
    Some(VlnReport {
        routes: records.len(),
        success: records.iter().filter(|r| r.success).count() as f64 / records.len() as f64,
        start_reac: start.reac(),
        intersection_arr: intersection.arr(),
        intersection_reac: intersection.reac(),
        stop_arr: stop.arr(),
        stop_reac: stop.reac(),
        start,
        intersection,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::fixtures::grid_world;
    use crate::mobility::{generate_instruction, plan_route, ScriptedPolicy, VLNObservation};
    use crate::perception::{NoisyDetector, NoisyParams, OracleDetector};

    fn rec(reached: usize, correct: usize, total: usize, success: bool) -> VlnRecord {
        VlnRecord {
            route_id: "r".into(),
            region: "x".into(),
            success,
            stopped: true,
            budget_exhausted: false,
            final_node: "n".into(),
            final_distance_m: 0.0,
            steps: 0,
            actions: vec![],
            start: KeyStats { total: 1, reached: 1, correct: 1 },
            intersection: KeyStats { total, reached, correct },
            stop: KeyStats {
                total: 1,
                reached: success as usize,
                correct: success as usize,
            },
        }
    }

    #[test]
    fn three_of_four_reached_two_correct() {
        let r = aggregate_vln(&[rec(3, 2, 4, false)]).unwrap();
        assert_eq!(r.intersection_arr, Some(0.75));
        assert_eq!(r.intersection_reac, Some(2.0 / 3.0));
        assert_eq!(r.success, 0.0);
    }

    #[test]
    fn pooled_equals_mean_for_equal_routes() {
        let a = rec(4, 4, 4, true);
        let b = rec(2, 1, 4, false);
        let r = aggregate_vln(&[a, b]).unwrap();
        assert_eq!(r.intersection_arr, Some((1.0 + 0.5) / 2.0));
        assert_eq!(r.success, 0.5);
        assert!(aggregate_vln(&[]).is_none());
    }

    #[test]
    fn oracle_episode_is_perfect_on_grid() {
        let w = grid_world(4, 5, 60.0, &[]);
        let route = plan_route(&w, "g0_0", "g3_4", "walk").unwrap();
        let instr = generate_instruction(&w, &route, 7).unwrap();
        let r = run_vln_episode(
            &w,
            &route,
            &instr,
            &OracleDetector,
            &mut ScriptedPolicy::new(),
            &VlnConfig::default(),
            "r0",
            "all",
        )
        .unwrap();
        assert!(r.success, "{r:?}");
        let agg = aggregate_vln(&[r]).unwrap();
        assert_eq!(agg.start_reac, Some(1.0));
        assert_eq!(agg.intersection_arr.unwrap_or(1.0), 1.0);
        assert_eq!(agg.intersection_reac.unwrap_or(1.0), 1.0);
        assert_eq!(agg.stop_reac, Some(1.0));
    }

    struct StopAfter(usize);
    impl Policy for StopAfter {
        fn act(
            &mut self,
            s: &AgentState,
            _: &VLNObservation,
            _: &Instruction,
        ) -> Result<String, crate::mobility::MobilityError> {
            Ok(if s.steps() >= self.0 { "stop" } else { "forward" }.into())
        }
    }

    #[test]
    fn stopping_thirty_metres_short_fails() {
        // nodes 30 m apart along a straight row
        let w = grid_world(1, 4, 30.0, &[]);
        let route = plan_route(&w, "g0_0", "g0_3", "walk").unwrap();
        let instr = generate_instruction(&w, &route, 1).unwrap();
        let run = |n| {
            run_vln_episode(
                &w,
                &route,
                &instr,
                &OracleDetector,
                &mut StopAfter(n),
                &VlnConfig::default(),
                "r",
                "x",
            )
            .unwrap()
        };
        let short = run(2);
        assert!((short.final_distance_m - 30.0).abs() < 0.1);
        assert!(!short.success);
        assert_eq!(short.stop.reached, 0);
        assert!(run(3).success);
    }

    #[test]
    fn budget_exhaustion_is_failure() {
        let w = grid_world(1, 3, 50.0, &[]);
        let route = plan_route(&w, "g0_0", "g0_2", "walk").unwrap();
        let instr = generate_instruction(&w, &route, 1).unwrap();
        let r = run_vln_episode(
            &w,
            &route,
            &instr,
            &OracleDetector,
            &mut StopAfter(usize::MAX),
            &VlnConfig::default(),
            "r",
            "x",
        )
        .unwrap();
        assert!(r.budget_exhausted && !r.success);
        assert_eq!(r.actions.len(), 9);
    }

    #[test]
    fn blind_agent_still_succeeds_without_landmarks() {
        // the grid fixture has no places, so every trigger is structural
        let w = grid_world(3, 3, 60.0, &[]);
        let blind = NoisyDetector::new(NoisyParams {
            recall_by_size: vec![(0.0, 0.0), (1.0, 0.0)],
            ..NoisyParams::size_dependent(3)
        })
        .unwrap();
        let route = plan_route(&w, "g0_0", "g2_2", "walk").unwrap();
        let instr = generate_instruction(&w, &route, 1).unwrap();
        let r = run_vln_episode(
            &w,
            &route,
            &instr,
            &blind,
            &mut ScriptedPolicy::new(),
            &VlnConfig::default(),
            "r",
            "x",
        )
        .unwrap();
        assert!(r.success);
    }
}
