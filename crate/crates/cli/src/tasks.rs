use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use streetsim::benchmark::{
    aggregate_vln, clean_places, count_instances, eval_detection, eval_vqa_circular,
    generate_benchmark_suite, place_detection_sweep, run_vln_episode, AlwaysFirstModel,
    CategoryRecall, CleaningRule, DetectionReport, HttpImageScorer, HttpVqaModel, ImageScorer,
    OracleImageScorer, OracleVqaModel, SeededGuessModel, SuiteParams, SweepConfig, VlnRecord,
    VqaModel,
};
use streetsim::canonical;
use streetsim::mobility::{
    build_policy, optimize_waypoint_order, region_navigate_plan, PolicyConfig,
};
use streetsim::parallel::Execution;
use streetsim::perception::{
    build_detector, Detector, HttpMatcher, InstanceMatcher, NoisyParams, OracleMatcher,
    PerceptionProviderConfig, SimulatedMatcher,
};
use streetsim::seeding::derive_seed;
use streetsim::world::{save_world, Place, World};

use crate::config::{ProviderKind, Run, Task};
use crate::failure::{config_error, CliResult, Failure};

const WALK_SPEED_MPS: f64 = 1.4;

/// Everything a task produces. Files are written by the caller.
pub struct TaskOutput {
    pub records: Vec<String>,
    pub aggregate: Value,
    pub summary: Vec<String>,
    pub extra_files: Vec<(String, Vec<u8>)>,
}

/// One VQA item outcome as written to `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaRecord {
    pub id: String,
    pub region: String,
    pub answer_type: String,
    pub plain_correct: bool,
    pub circular_correct: bool,
}

/// Region sweep outcome for one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub area: String,
    pub region: String,
    pub tour_nodes: usize,
    pub tour_cost_m: f64,
    pub nearest_neighbor_cost_m: f64,
    pub detections: usize,
    pub counted: usize,
    pub ground_truth: usize,
    pub in_region: usize,
}

pub fn run_task(run: &Run, w: &World, exec: Execution) -> CliResult<TaskOutput> {
    match run.task {
        Task::RouteOptimize => route_optimize(run, w, exec),
        Task::RegionSweep => region_sweep(run, w, exec),
        Task::Vln => vln(run, w, exec),
        Task::DetectBench => detect_bench(run, w, exec),
        Task::VqaBench => vqa_bench(run, w, exec),
        Task::Clean => clean(run, w),
    }
}

fn detector(run: &Run) -> CliResult<Box<dyn Detector>> {
    let cfg = match run.provider {
        ProviderKind::Oracle => PerceptionProviderConfig::Oracle,
        ProviderKind::Noisy => {
            let p = run
                .rest
                .noisy_detector
                .clone()
                .unwrap_or_else(|| NoisyParams::size_dependent(derive_seed(run.seed, &["detector"])));
            p.validate().map_err(|e| config_error(format!("noisy_detector: {e}")))?;
            PerceptionProviderConfig::Noisy(p)
        }
        ProviderKind::External => PerceptionProviderConfig::External(http(run)),
    };
    Ok(build_detector(&cfg)?)
}

fn http(run: &Run) -> streetsim::provider::HttpProviderConfig {
    run.http.clone().expect("resolved external runs carry an endpoint")
}

fn matcher(run: &Run) -> CliResult<Box<dyn InstanceMatcher>> {
    Ok(match run.provider {
        ProviderKind::Oracle => Box::new(OracleMatcher),
        ProviderKind::Noisy => {
            let c = run.rest.noisy_matcher.clone().unwrap_or_default();
            Box::new(SimulatedMatcher {
                seed: derive_seed(run.seed, &["matcher"]),
                false_match_rate: c.false_match_rate,
                false_split_rate: c.false_split_rate,
            })
        }
        ProviderKind::External => Box::new(HttpMatcher::new(http(run))?),
    })
}

fn lines<T: Serialize>(items: &[T]) -> Vec<String> {
    items.iter().map(canonical::to_line).collect()
}

fn route_optimize(run: &Run, w: &World, exec: Execution) -> CliResult<TaskOutput> {
    let cfg = run.rest.route_optimize.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, &["route-optimize"]));
    let ids: Vec<&str> = w.nodes().iter().map(|n| n.id.as_str()).collect();
    let start = match cfg.start {
        Some(s) => s,
        None => ids
            .choose(&mut rng)
            .ok_or_else(|| config_error("world has no street nodes"))?
            .to_string(),
    };
    let waypoints = match cfg.waypoints {
        Some(v) => v,
        None => {
            let n = cfg.n_waypoints.unwrap_or(5);
            let pool: Vec<&&str> = ids.iter().filter(|i| **i != start).collect();
            if pool.len() < n {
                return Err(config_error(format!("world has fewer than {n} candidate waypoints")));
            }
            pool.choose_multiple(&mut rng, n).map(|s| s.to_string()).collect()
        }
    };
    let plan = optimize_waypoint_order(w, &start, &waypoints, exec)?;
    let savings = plan.given_order_cost - plan.cost;
    let record = json!({
        "start": start,
        "waypoints": waypoints,
        "ordering": plan.ordering,
        "exact": plan.exact,
        "cost_m": plan.cost,
        "given_order_cost_m": plan.given_order_cost,
        "savings_m": savings,
        "walk_time_s": plan.cost / WALK_SPEED_MPS,
        "given_order_walk_time_s": plan.given_order_cost / WALK_SPEED_MPS,
        "savings_walk_s": savings / WALK_SPEED_MPS,
        "path": plan.route.path,
    });
    Ok(TaskOutput {
        records: vec![canonical::to_line(&record)],
        summary: vec![
            format!("ordering: {} -> {}", start, plan.ordering.join(" -> ")),
            format!(
                "length {:.0} m vs {:.0} m in given order: saves {:.0} m ({:.1} min walking)",
                plan.cost,
                plan.given_order_cost,
                savings,
                savings / WALK_SPEED_MPS / 60.0
            ),
        ],
        aggregate: record,
        extra_files: vec![],
    })
}

fn region_sweep(run: &Run, w: &World, exec: Execution) -> CliResult<TaskOutput> {
    let cfg = run.rest.region_sweep.clone().unwrap_or_default();
    let params = SuiteParams {
        n_routes: 0,
        n_detection_areas: cfg.n_areas.unwrap_or(5),
        detection_area_size_m: cfg.area_size_m.unwrap_or(120.0),
        ..run.rest.suite.clone().unwrap_or_default()
    };
    let suite = generate_benchmark_suite(w, run.seed, &params, exec)?;
    let categories = cfg.categories.unwrap_or_else(|| {
        let mut c: Vec<String> = w.instances().iter().map(|o| o.category.clone()).collect();
        c.sort();
        c.dedup();
        c
    });
    let det = detector(run)?;
    let m = matcher(run)?;
    let sweep = run.rest.sweep.clone().unwrap_or_default();
    let mut records = Vec::new();
    for area in &suite.detection_areas {
        let plan = region_navigate_plan(w, &area.polygon, exec)?;
        let c = count_instances(w, &area.polygon, &categories, det.as_ref(), m.as_ref(), &sweep, exec)?;
        records.push(SweepRecord {
            area: area.id.clone(),
            region: area.region.clone(),
            tour_nodes: plan.nodes.len(),
            tour_cost_m: plan.cost,
            nearest_neighbor_cost_m: plan.nearest_neighbor_cost,
            detections: c.detections,
            counted: c.groups,
            ground_truth: c.ground_truth,
            in_region: c.in_region,
        });
    }
    let exact = records.iter().filter(|r| r.counted == r.ground_truth).count();
    let counted: usize = records.iter().map(|r| r.counted).sum();
    let truth: usize = records.iter().map(|r| r.ground_truth).sum();
    Ok(TaskOutput {
        records: lines(&records),
        aggregate: json!({
            "areas": records.len(),
            "categories": categories,
            "counted": counted,
            "ground_truth": truth,
            "exact_count_areas": exact,
        }),
        summary: vec![format!(
            "{} areas swept: counted {counted} instances vs {truth} in ground truth ({exact} areas exact)",
            records.len()
        )],
        extra_files: vec![],
    })
}

fn vln(run: &Run, w: &World, exec: Execution) -> CliResult<TaskOutput> {
    let params = run.rest.suite.clone().unwrap_or_default();
    let suite = generate_benchmark_suite(w, run.seed, &params, exec)?;
    let det = detector(run)?;
    let policy_cfg = match run.provider {
        ProviderKind::External => PolicyConfig::External(http(run)),
        _ => PolicyConfig::Oracle,
    };
    let records = exec.try_map(&suite.routes, |r| -> CliResult<VlnRecord> {
        let mut policy = build_policy(&policy_cfg)?;
        Ok(run_vln_episode(
            w,
            &r.route,
            &r.instruction,
            det.as_ref(),
            policy.as_mut(),
            &run.vln,
            &r.id,
            &r.region,
        )?)
    })?;
    let mut records = records;
    records.sort_by(|a, b| a.route_id.cmp(&b.route_id));
    let overall = aggregate_vln(&records);
    let mut by_region: BTreeMap<&str, Vec<VlnRecord>> = BTreeMap::new();
    for r in &records {
        by_region.entry(&r.region).or_default().push(r.clone());
    }
    let per_region: BTreeMap<&str, _> = by_region
        .iter()
        .map(|(k, v)| (*k, aggregate_vln(v)))
        .collect();
    let summary = match &overall {
        Some(o) => format!(
            "{} routes: success {:.3}, intersection arr {}, intersection reac {}",
            o.routes,
            o.success,
            fmt_opt(o.intersection_arr),
            fmt_opt(o.intersection_reac)
        ),
        None => "no routes".to_string(),
    };
    Ok(TaskOutput {
        records: lines(&records),
        aggregate: json!({
            "suite_digest": suite.digest(),
            "overall": overall,
            "per_region": per_region,
        }),
        summary: vec![summary],
        extra_files: vec![],
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("n/a".to_string(), |v| format!("{v:.3}"))
}

/// `(name, node ids, polygon filter)` for each world region, or one region
/// named `all` covering the whole world.
fn regions(w: &World) -> Vec<(String, Vec<String>, Option<&streetsim::geo::GeoPolygon>)> {
    if w.regions().is_empty() {
        return vec![(
            "all".to_string(),
            w.nodes().iter().map(|n| n.id.clone()).collect(),
            None,
        )];
    }
    w.regions()
        .iter()
        .map(|r| {
            (
                r.name.clone(),
                w.nodes_in(&r.polygon)
                    .into_iter()
                    .map(|i| w.node_at(i).id.clone())
                    .collect(),
                Some(&r.polygon),
            )
        })
        .collect()
}

fn detect_bench(run: &Run, w: &World, exec: Execution) -> CliResult<TaskOutput> {
    let categories = run
        .rest
        .detect_bench
        .clone()
        .unwrap_or_default()
        .categories
        .unwrap_or_else(|| w.vocabulary().to_vec());
    let sweep: SweepConfig = run.rest.sweep.clone().unwrap_or_default();
    let det = detector(run)?;
    let mut reports = Vec::new();
    for (name, nodes, poly) in regions(w) {
        let results = place_detection_sweep(w, &nodes, &categories, det.as_ref(), &sweep, exec)?;
        let gt: Vec<Place> = w
            .places()
            .iter()
            .filter(|p| poly.is_none_or(|g| g.contains(p.coord)))
            .cloned()
            .collect();
        reports.push(eval_detection(&results, &gt, &categories, &name));
    }
    let pooled = pool_detection(&reports);
    Ok(TaskOutput {
        records: lines(&reports),
        summary: vec![format!(
            "{} regions, {} categories with ground truth: AR {}",
            reports.len(),
            pooled.per_category.values().filter(|c| c.recall.is_some()).count(),
            fmt_opt(pooled.ar)
        )],
        aggregate: json!({
            "overall": pooled,
            "per_region_ar": reports.iter().map(|r| (r.region.clone(), r.ar)).collect::<BTreeMap<_, _>>(),
        }),
        extra_files: vec![],
    })
}

/// Sums per-category counts over regions and recomputes recall and AR.
pub fn pool_detection(reports: &[DetectionReport]) -> DetectionReport {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in reports {
        for (c, v) in &r.per_category {
            let e = counts.entry(c.clone()).or_default();
            e.0 += v.n_tp;
            e.1 += v.n_fn;
        }
    }
    let per_category: BTreeMap<String, CategoryRecall> = counts
        .into_iter()
        .map(|(c, (tp, fneg))| (c, CategoryRecall::new(tp, fneg)))
        .collect();
    let recalls: Vec<f64> = per_category.values().filter_map(|c| c.recall).collect();
    DetectionReport {
        region: "all".into(),
        ar: (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
        per_category,
    }
}

fn vqa_bench(run: &Run, w: &World, exec: Execution) -> CliResult<TaskOutput> {
    let cfg = run.rest.vqa_bench.clone().unwrap_or_default();
    let n = cfg.n_items.unwrap_or_else(|| w.places().len().min(200));
    let params = SuiteParams {
        n_routes: 0,
        n_vqa_items: n,
        n_detection_areas: 0,
        ..run.rest.suite.clone().unwrap_or_default()
    };
    let suite = generate_benchmark_suite(w, run.seed, &params, exec)?;
    let model: Box<dyn VqaModel> = match run.provider {
        ProviderKind::Oracle => Box::new(OracleVqaModel::from_world(w)),
        ProviderKind::Noisy => {
            let accuracy = cfg.noisy_accuracy.unwrap_or(0.7);
            if !(0.0..=1.0).contains(&accuracy) {
                return Err(config_error("vqa_bench.noisy_accuracy must lie in [0, 1]"));
            }
            Box::new(SeededGuessModel {
                seed: derive_seed(run.seed, &["vqa-model"]),
                accuracy,
                position_bias: cfg.noisy_position_bias.unwrap_or(0.1),
            })
        }
        ProviderKind::External => Box::new(HttpVqaModel::new(http(run))?),
    };
    let report = eval_vqa_circular(model.as_ref(), &suite.vqa_items, exec)?;
    let baseline = eval_vqa_circular(&AlwaysFirstModel, &suite.vqa_items, exec)?;
    let mut records = Vec::with_capacity(report.per_item.len());
    for (item, r) in suite.vqa_items.iter().zip(&report.per_item) {
        let place = w.place_details(&item.image_ref)?;
        records.push(VqaRecord {
            id: r.id.clone(),
            region: w
                .region_of(place.coord)
                .map_or("all".to_string(), |g| g.name.clone()),
            answer_type: r.answer_type.clone(),
            plain_correct: r.plain_correct,
            circular_correct: r.circular_correct,
        });
    }
    Ok(TaskOutput {
        records: lines(&records),
        summary: vec![format!(
            "{} items: plain mAcc {}, circular mAcc {} (always-first baseline {} / {})",
            report.n_items,
            fmt_opt(report.plain_macc),
            fmt_opt(report.circular_macc),
            fmt_opt(baseline.plain_macc),
            fmt_opt(baseline.circular_macc)
        )],
        aggregate: json!({
            "n_items": report.n_items,
            "plain_macc": report.plain_macc,
            "circular_macc": report.circular_macc,
            "always_first_plain_macc": baseline.plain_macc,
            "always_first_circular_macc": baseline.circular_macc,
        }),
        extra_files: vec![],
    })
}

fn clean(run: &Run, w: &World) -> CliResult<TaskOutput> {
    let cfg = run.rest.cleaning.clone().unwrap_or_default();
    let scorer: Box<dyn ImageScorer> = match run.provider {
        ProviderKind::External => Box::new(HttpImageScorer::new(http(run))?),
        _ => Box::new(OracleImageScorer),
    };
    let out = clean_places(w, &cfg, scorer.as_ref())?;
    let cleaned = w.with_places(out.kept.clone()).map_err(Failure::from)?;
    let by_rule = |rule: CleaningRule| out.log.iter().filter(|e| e.rule == rule).count();
    let (d, r, p) = (
        by_rule(CleaningRule::Distance),
        by_rule(CleaningRule::Reviews),
        by_rule(CleaningRule::PhotoScore),
    );
    Ok(TaskOutput {
        records: lines(&out.log),
        summary: vec![format!(
            "{} places in, {} kept; removed {d} by distance and {r} by reviews, dropped {p} photos",
            w.places().len(),
            out.kept.len()
        )],
        aggregate: json!({
            "input_places": w.places().len(),
            "kept": out.kept.len(),
            "removed": out.removed,
            "by_rule": {"distance": d, "reviews": r, "photo_score": p},
            "config": cfg,
            "cleaned_world_digest": cleaned.digest(),
        }),
        extra_files: vec![("world.cleaned.json".into(), save_world(&cleaned))],
    })
}
