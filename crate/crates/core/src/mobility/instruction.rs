use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::routing::{KeyKind, Route};
use super::vln::{observe, resolve_idx, ObservationConfig};
use super::MobilityError;
use crate::geo::angular_offset;
use crate::perception::OracleDetector;
use crate::world::World;

/// Landmarks are drawn from places this close to the key position.
pub const LANDMARK_RADIUS_M: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop];

    pub fn label(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Stop => "stop",
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.label() == s.trim())
    }
}

/// Direction of a view relative to the agent's heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Front,
    LeftFront,
    Left,
    LeftBehind,
    Behind,
    RightBehind,
    Right,
    RightFront,
}

impl Side {
    pub const ALL: [Side; 8] = [
        Side::Front,
        Side::LeftFront,
        Side::Left,
        Side::LeftBehind,
        Side::Behind,
        Side::RightBehind,
        Side::Right,
        Side::RightFront,
    ];

    pub fn offset(self) -> f64 {
        match self {
            Side::Front => 0.0,
            Side::LeftFront => -45.0,
            Side::Left => -90.0,
            Side::LeftBehind => -135.0,
            Side::Behind => 180.0,
            Side::RightBehind => 135.0,
            Side::Right => 90.0,
            Side::RightFront => 45.0,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            Side::Front => "ahead of you",
            Side::LeftFront => "ahead on your left",
            Side::Left => "on your left",
            Side::LeftBehind => "behind you on the left",
            Side::Behind => "behind you",
            Side::RightBehind => "behind you on the right",
            Side::Right => "on your right",
            Side::RightFront => "ahead on your right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    AtStart,
    /// The `ordinal`-th intersection reached since the start (1-based).
    AtIntersection { ordinal: usize },
    AtLandmark { place_id: String, side: Side },
    /// `steps` moves after the previous segment fired.
    AtDestination { steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub action: Action,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub segments: Vec<Segment>,
    pub verbalization: String,
}

fn ordinal_word(n: usize) -> String {
    const WORDS: [&str; 10] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
        "tenth",
    ];
    match n {
        1..=10 => WORDS[n - 1].to_string(),
        _ => {
            let suffix = match (n % 10, n % 100) {
                (_, 11..=13) => "th",
                (1, _) => "st",
                (2, _) => "nd",
                (3, _) => "rd",
                _ => "th",
            };
            format!("{n}{suffix}")
        }
    }
}

fn action_phrase(a: Action) -> &'static str {
    match a {
        Action::Forward => "go straight",
        Action::TurnLeft => "turn left",
        Action::TurnRight => "turn right",
        Action::Stop => "stop",
    }
}

/// Template rendering of `segments`; `seed` only picks phrasing variants.
pub fn verbalize(w: &World, segments: &[Segment], seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = Vec::with_capacity(segments.len());
    for seg in segments {
        let v = rng.random_range(0..2usize);
        let act = action_phrase(seg.action);
        let s = match (&seg.trigger, seg.action) {
            (Trigger::AtStart, Action::Stop) => "You are already at your destination.".to_string(),
            (Trigger::AtStart, _) => {
                ["Start walking along the street.", "Head down the road in front of you."][v]
                    .to_string()
            }
            (Trigger::AtIntersection { ordinal }, a) => {
                let o = ordinal_word(*ordinal);
                if v == 0 {
                    format!("At the {o} intersection, {}.", action_phrase(a))
                } else {
                    format!("When you reach the {o} intersection, {}.", action_phrase(a))
                }
            }
            (Trigger::AtLandmark { place_id, side }, _) => {
                let name = w
                    .place_details(place_id)
                    .map(|p| p.name.as_str())
                    .unwrap_or(place_id.as_str());
                if v == 0 {
                    format!("When you see {name} {}, {act}.", side.phrase())
                } else {
                    format!("Once {name} is {}, {act}.", side.phrase())
                }
            }
            (Trigger::AtDestination { steps }, _) => {
                let unit = if *steps == 1 { "step" } else { "steps" };
                if v == 0 {
                    format!("Continue {steps} more {unit} and stop at your destination.")
                } else {
                    format!("After {steps} more {unit}, you have arrived; stop there.")
                }
            }
        };
        out.push(s);
    }
    out.join(" ")
}

/// Structured directions for `route`.
///
/// Each intersection is announced by a nearby landmark when the nearest
/// reviewed place within 40 m is seen at that node and not already seen (from
/// the same side) at the nodes leading up to it; otherwise by its ordinal.
/// Every action is checked to lead along the route.
pub fn generate_instruction(w: &World, route: &Route, seed: u64) -> Result<Instruction, MobilityError> {
    let path = route
        .path
        .iter()
        .map(|id| w.node_idx(id))
        .collect::<Result<Vec<usize>, _>>()?;
    if path.len() == 1 {
        let segments = vec![
            Segment {
                action: Action::Stop,
                trigger: Trigger::AtStart,
            },
            Segment {
                action: Action::Stop,
                trigger: Trigger::AtDestination { steps: 0 },
            },
        ];
        return Ok(Instruction {
            verbalization: verbalize(w, &segments, seed),
            segments,
        });
    }
    let edge_heading = |a: usize, b: usize| {
        w.links(a)
            .iter()
            .find(|l| l.to == b)
            .map(|l| l.heading)
            .ok_or_else(|| {
                MobilityError::NotInstructable(format!(
                    "{} and {} are not adjacent",
                    w.node_at(a).id,
                    w.node_at(b).id
                ))
            })
    };
    // heading the agent faces on arrival at path[i]; at the start it faces the first edge
    let mut arrival = vec![edge_heading(path[0], path[1])?];
    for i in 1..path.len() {
        arrival.push(edge_heading(path[i - 1], path[i])?);
    }

    let obs_cfg = ObservationConfig::default();
    let oracle_obs = |i: usize| observe(w, &route.path[i], arrival[i], &OracleDetector, &obs_cfg);

    let mut segments = vec![Segment {
        action: Action::Forward,
        trigger: Trigger::AtStart,
    }];
    let mut prev_key = 0usize;
    let mut ordinal = 0usize;
    for key in &route.key_positions[1..] {
        let i = key.path_index;
        for j in prev_key + 1..i {
            if resolve_idx(w, path[j], arrival[j], Action::Forward).map(|d| d.neighbor)
                != Some(path[j + 1])
            {
                return Err(MobilityError::NotInstructable(format!(
                    "forward at {} does not follow the route",
                    route.path[j]
                )));
            }
        }
        match key.kind {
            KeyKind::Start => unreachable!("start only opens the list"),
            KeyKind::Stop => {
                segments.push(Segment {
                    action: Action::Stop,
                    trigger: Trigger::AtDestination { steps: i - prev_key },
                });
            }
            KeyKind::Intersection => {
                ordinal += 1;
                let out_heading = edge_heading(path[i], path[i + 1])?;
                let o = angular_offset(arrival[i], out_heading);
                let order = if o.abs() <= 45.0 {
                    [Action::Forward, Action::TurnLeft, Action::TurnRight]
                } else if o < 0.0 {
                    [Action::TurnLeft, Action::Forward, Action::TurnRight]
                } else {
                    [Action::TurnRight, Action::Forward, Action::TurnLeft]
                };
                let action = order
                    .into_iter()
                    .find(|a| {
                        resolve_idx(w, path[i], arrival[i], *a).map(|d| d.neighbor)
                            == Some(path[i + 1])
                    })
                    .ok_or_else(|| {
                        MobilityError::NotInstructable(format!(
                            "no action at {} leads to {}",
                            route.path[i],
                            route.path[i + 1]
                        ))
                    })?;
                let trigger = landmark_trigger(w, &route.path[i], prev_key, i, &oracle_obs)?
                    .unwrap_or(Trigger::AtIntersection { ordinal });
                segments.push(Segment { action, trigger });
            }
        }
        prev_key = i;
    }
    Ok(Instruction {
        verbalization: verbalize(w, &segments, seed),
        segments,
    })
}

fn landmark_trigger(
    w: &World,
    node_id: &str,
    prev_key: usize,
    i: usize,
    oracle_obs: &dyn Fn(usize) -> Result<super::VLNObservation, MobilityError>,
) -> Result<Option<Trigger>, MobilityError> {
    let node = w.node(node_id)?;
    let Some((place, _)) = w
        .nearby_places(node.coord, LANDMARK_RADIUS_M, None)
        .into_iter()
        .find(|(p, _)| !p.reviews.is_empty())
    else {
        return Ok(None);
    };
    let Some(side) = oracle_obs(i)?.side_of(&place.id) else {
        return Ok(None);
    };
    for j in prev_key + 1..i {
        if oracle_obs(j)?.sees(side, &place.id) {
            return Ok(None);
        }
    }
    Ok(Some(Trigger::AtLandmark {
        place_id: place.id.clone(),
        side,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::fixtures::grid_world;
    use crate::mobility::plan_route;
    use crate::world::fixtures::plus_world;

    #[test]
    fn straight_route() {
        let w = grid_world(1, 5, 20.0, &[]);
        let r = plan_route(&w, "g0_0", "g0_4", "walk").unwrap();
        let i = generate_instruction(&w, &r, 0).unwrap();
        assert_eq!(
            i.segments,
            vec![
                Segment {
                    action: Action::Forward,
                    trigger: Trigger::AtStart
                },
                Segment {
                    action: Action::Stop,
                    trigger: Trigger::AtDestination { steps: 4 }
                },
            ]
        );
        assert_eq!(i.segments.last().unwrap().action, Action::Stop);
    }

    #[test]
    fn cafe_marks_the_left_turn() {
        let w = plus_world();
        let r = plan_route(&w, "s", "w", "walk").unwrap();
        let i = generate_instruction(&w, &r, 3).unwrap();
        assert_eq!(i.segments.len(), 3);
        assert_eq!(i.segments[1].action, Action::TurnLeft);
        assert_eq!(
            i.segments[1].trigger,
            Trigger::AtLandmark {
                place_id: "p-cafe".into(),
                side: Side::RightFront
            }
        );
        assert!(i.verbalization.contains("Corner Cafe"));
    }

    #[test]
    fn ordinal_without_landmarks() {
        let w = grid_world(3, 3, 20.0, &[]);
        let r = plan_route(&w, "g0_1", "g2_1", "walk").unwrap();
        let i = generate_instruction(&w, &r, 0).unwrap();
        assert_eq!(
            i.segments[1],
            Segment {
                action: Action::Forward,
                trigger: Trigger::AtIntersection { ordinal: 1 }
            }
        );
    }

    #[test]
    fn verbalization_is_deterministic() {
        let w = plus_world();
        let r = plan_route(&w, "n", "e", "walk").unwrap();
        let a = generate_instruction(&w, &r, 42).unwrap();
        let b = generate_instruction(&w, &r, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ordinals() {
        assert_eq!(ordinal_word(3), "third");
        assert_eq!(ordinal_word(11), "11th");
        assert_eq!(ordinal_word(22), "22nd");
    }
}
