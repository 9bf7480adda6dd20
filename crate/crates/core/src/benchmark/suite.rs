use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vln::{run_vln_episode, VlnConfig};
use super::vqa::{make_vqa_item, VqaItem};
use super::BenchmarkError;
use crate::canonical;
use crate::geo::{destination_point, GeoPolygon};
use crate::mobility::{
    generate_instruction, plan_route, Instruction, MobilityError, Route, ScriptedPolicy,
};
use crate::parallel::Execution;
use crate::perception::OracleDetector;
use crate::seeding::derive_seed;
use crate::world::World;

/// Attempts per route before the parameters are declared infeasible.
const ROUTE_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    pub n_routes: usize,
    /// Accepted route lengths in metres, inclusive.
    pub route_length_range: (f64, f64),
    /// Region names to draw from; all world regions when absent.
    #[serde(default)]
    pub regions: Option<Vec<String>>,
    #[serde(default)]
    pub n_vqa_items: usize,
    #[serde(default)]
    pub n_detection_areas: usize,
    #[serde(default = "default_area_size")]
    pub detection_area_size_m: f64,
}

fn default_area_size() -> f64 {
    120.0
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            n_routes: 18,
            route_length_range: (60.0, 400.0),
            regions: None,
            n_vqa_items: 0,
            n_detection_areas: 0,
            detection_area_size_m: default_area_size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRoute {
    pub id: String,
    pub region: String,
    pub route: Route,
    pub instruction: Instruction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionArea {
    pub id: String,
    pub region: String,
    pub polygon: GeoPolygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub world_digest: String,
    pub seed: u64,
    pub routes: Vec<SuiteRoute>,
    pub vqa_items: Vec<VqaItem>,
    pub detection_areas: Vec<DetectionArea>,
}

impl Suite {
    pub fn digest(&self) -> String {
        canonical::digest(self)
    }
}

/// `(name, node indices)` for each region in play. A world without regions
/// is treated as one region named `all`.
fn region_nodes(w: &World, wanted: Option<&[String]>) -> Result<Vec<(String, Vec<usize>)>, BenchmarkError> {
    let all: Vec<(String, Vec<usize>)> = if w.regions().is_empty() {
        vec![("all".to_string(), (0..w.nodes().len()).collect())]
    } else {
        w.regions()
            .iter()
            .map(|r| (r.name.clone(), w.nodes_in(&r.polygon)))
            .collect()
    };
    match wanted {
        None => Ok(all),
        Some(names) => names
            .iter()
            .map(|n| {
                all.iter().find(|(m, _)| m == n).cloned().ok_or_else(|| {
                    BenchmarkError::InvalidConfig(format!("unknown region {n}"))
                })
            })
            .collect(),
    }
}

fn oracle_solves(w: &World, route: &Route, instr: &Instruction) -> Result<bool, BenchmarkError> {
    let r = run_vln_episode(
        w,
        route,
        instr,
        &OracleDetector,
        &mut ScriptedPolicy::new(),
        &VlnConfig::default(),
        "self-check",
        "",
    )?;
    let perfect = |k: &super::KeyStats| k.reached == k.total && k.correct == k.total;
    Ok(r.success && perfect(&r.start) && perfect(&r.intersection) && perfect(&r.stop))
}

fn sample_route(
    w: &World,
    seed: u64,
    region: &str,
    nodes: &[usize],
    ordinal: usize,
    range: (f64, f64),
) -> Result<(Route, Instruction), BenchmarkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["route", region, &ordinal.to_string()]));
    for _ in 0..ROUTE_ATTEMPTS {
        let (Some(&a), Some(&b)) = (nodes.choose(&mut rng), nodes.choose(&mut rng)) else {
            break;
        };
        if a == b {
            continue;
        }
        let route = match plan_route(w, &w.node_at(a).id, &w.node_at(b).id, "walk") {
            Ok(r) => r,
            Err(MobilityError::Unreachable { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        if route.total_length < range.0 || route.total_length > range.1 {
            continue;
        }
        let instr = match generate_instruction(w, &route, rng.random()) {
            Ok(i) => i,
            Err(MobilityError::NotInstructable(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        if oracle_solves(w, &route, &instr)? {
            return Ok((route, instr));
        }
    }
    Err(BenchmarkError::InfeasibleParams(format!(
        "no instructable route of {}-{} m found in region {region} after {ROUTE_ATTEMPTS} attempts",
        range.0, range.1
    )))
}

/// Deterministic benchmark suite over `w`.
///
/// Routes are spread evenly over the regions (earlier regions take the
/// remainder); each is a grid-mover shortest path whose generated
/// instruction an oracle agent follows perfectly. VQA items come from the
/// place ground truth and detection areas are squares centred on region
/// nodes.
pub fn generate_benchmark_suite(
    w: &World,
    seed: u64,
    params: &SuiteParams,
    exec: Execution,
) -> Result<Suite, BenchmarkError> {
    let (lo, hi) = params.route_length_range;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(BenchmarkError::InvalidConfig(
            "route_length_range must satisfy 0 <= min <= max".into(),
        ));
    }
    if params.detection_area_size_m.is_nan() || params.detection_area_size_m <= 0.0 {
        return Err(BenchmarkError::InvalidConfig(
            "detection_area_size_m must be positive".into(),
        ));
    }
    let regions = region_nodes(w, params.regions.as_deref())?;
    if regions.is_empty() && (params.n_routes > 0 || params.n_detection_areas > 0) {
        return Err(BenchmarkError::InfeasibleParams("no regions selected".into()));
    }

    // (region index, ordinal within region)
    let mut jobs = Vec::with_capacity(params.n_routes);
    let per = |n: usize, i: usize| n / regions.len() + usize::from(i < n % regions.len());
    for (ri, _) in regions.iter().enumerate() {
        for k in 0..per(params.n_routes, ri) {
            jobs.push((ri, k));
        }
    }
    let sampled = exec.try_map(&jobs, |&(ri, k)| {
        let (name, nodes) = &regions[ri];
        sample_route(w, seed, name, nodes, k, (lo, hi)).map(|(route, instruction)| SuiteRoute {
            id: format!("{name}-r{k:03}"),
            region: name.clone(),
            route,
            instruction,
        })
    })?;

    let mut vqa_items = Vec::with_capacity(params.n_vqa_items);
    if params.n_vqa_items > 0 {
        if params.n_vqa_items > w.places().len() {
            return Err(BenchmarkError::InfeasibleParams(format!(
                "{} VQA items requested but the world has {} places",
                params.n_vqa_items,
                w.places().len()
            )));
        }
        if w.vocabulary().len() < 4 {
            return Err(BenchmarkError::InfeasibleParams(
                "VQA needs at least 4 vocabulary types".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["vqa"]));
        let mut chosen: Vec<_> = w.places().choose_multiple(&mut rng, params.n_vqa_items).collect();
        chosen.sort_by(|a, b| a.id.cmp(&b.id));
        for (i, p) in chosen.into_iter().enumerate() {
            vqa_items.push(make_vqa_item(&format!("q{i:04}"), p, w.vocabulary(), &mut rng));
        }
    }

    let mut detection_areas = Vec::with_capacity(params.n_detection_areas);
    let half = params.detection_area_size_m / 2.0;
    for k in 0..params.n_detection_areas {
        let ri = k % regions.len();
        let (name, nodes) = &regions[ri];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["area", &k.to_string()]));
        let Some(&c) = nodes.choose(&mut rng) else {
            return Err(BenchmarkError::InfeasibleParams(format!("region {name} has no nodes")));
        };
        let centre = w.node_at(c).coord;
        let sw = destination_point(destination_point(centre, 180.0, half), 270.0, half);
        let ne = destination_point(destination_point(centre, 0.0, half), 90.0, half);
        detection_areas.push(DetectionArea {
            id: format!("area-{k:03}"),
            region: name.clone(),
            polygon: GeoPolygon::rectangle(sw, ne).map_err(|e| BenchmarkError::InvalidConfig(e.to_string()))?,
        });
    }

    Ok(Suite {
        world_digest: w.digest(),
        seed,
        routes: sampled,
        vqa_items,
        detection_areas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoCoordinate;
    use crate::world::{generate_world, GeneratorParams};

    fn city(seed: u64) -> World {
        let mut p = GeneratorParams::city(GeoCoordinate::new(22.3, 114.17).unwrap(), 400);
        p.region_grid = [3, 3];
        generate_world(seed, &p).unwrap()
    }

    #[test]
    fn two_routes_per_region_and_deterministic() {
        let w = city(5);
        let params = SuiteParams {
            n_vqa_items: 20,
            n_detection_areas: 3,
            ..SuiteParams::default()
        };
        let a = generate_benchmark_suite(&w, 11, &params, Execution::Parallel).unwrap();
        let b = generate_benchmark_suite(&w, 11, &params, Execution::Sequential).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.routes.len(), 18);
        for r in w.regions() {
            assert_eq!(a.routes.iter().filter(|x| x.region == r.name).count(), 2);
        }
        for r in &a.routes {
            assert!(r.route.total_length >= 60.0 && r.route.total_length <= 400.0);
            assert_eq!(r.instruction.segments.len(), r.route.key_positions.len());
        }
        assert_eq!(a.vqa_items.len(), 20);
        assert_eq!(a.detection_areas.len(), 3);
        let c = generate_benchmark_suite(&w, 12, &params, Execution::Parallel).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn impossible_length_is_infeasible() {
        let w = city(5);
        let params = SuiteParams {
            n_routes: 1,
            route_length_range: (1e6, 2e6),
            ..SuiteParams::default()
        };
        assert!(matches!(
            generate_benchmark_suite(&w, 1, &params, Execution::Sequential),
            Err(BenchmarkError::InfeasibleParams(_))
        ));
    }
}
