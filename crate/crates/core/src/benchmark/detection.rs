use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::BenchmarkError;
use crate::geo::{destination_point, haversine_distance, GeoCoordinate, GeoPolygon, Pose};
use crate::mobility::region_navigate_plan;
use crate::parallel::Execution;
use crate::perception::{
    active_detect, deduplicate, match_proposal_to_place, proposal_bearing, render_views,
    ActiveDetectConfig, Detector, InstanceMatcher, MatchResult, ObjectProposal, PerceptionError,
    DEFAULT_MATCH_RADIUS_M, DEFAULT_VISIBILITY_RANGE_M,
};
use crate::world::{instance_extent, Place, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecall {
    pub n_tp: usize,
    pub n_fn: usize,
    /// `None` when the category has no ground truth.
    pub recall: Option<f64>,
}

impl CategoryRecall {
    pub fn new(n_tp: usize, n_fn: usize) -> Self {
        let d = n_tp + n_fn;
        Self {
            n_tp,
            n_fn,
            recall: (d > 0).then(|| n_tp as f64 / d as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub region: String,
    pub per_category: BTreeMap<String, CategoryRecall>,
    /// Mean recall over categories that have ground truth.
    pub ar: Option<f64>,
}

/// Mean recall over the listed categories, skipping those without ground
/// truth.
pub fn average_recall(report: &DetectionReport, subset: &[String]) -> Option<f64> {
    let r: Vec<f64> = subset
        .iter()
        .filter_map(|c| report.per_category.get(c).and_then(|x| x.recall))
        .collect();
    (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
}

/// Localization recall: a ground-truth place is found when some proposal
/// labelled with its primary type was matched to it.
pub fn eval_detection(
    results: &[MatchResult],
    ground_truth: &[Place],
    categories: &[String],
    region: &str,
) -> DetectionReport {
    let found: BTreeSet<(&str, &str)> = results
        .iter()
        .filter_map(|r| r.place_id().map(|id| (id, r.proposal.label.as_str())))
        .collect();
    let mut per_category = BTreeMap::new();
    for cat in categories {
        let (mut tp, mut fneg) = (0, 0);
        for p in ground_truth.iter().filter(|p| p.primary_type() == cat) {
            if found.contains(&(p.id.as_str(), cat.as_str())) {
                tp += 1;
            } else {
                fneg += 1;
            }
        }
        per_category.insert(cat.clone(), CategoryRecall::new(tp, fneg));
    }
    let mut report = DetectionReport {
        region: region.to_string(),
        per_category,
        ar: None,
    };
    report.ar = average_recall(&report, categories);
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Evenly spaced headings per node.
    pub headings: usize,
    pub fov: f64,
    pub visibility_range: f64,
    pub match_radius: f64,
    /// Proposals scoring below this are candidates, not detections.
    pub min_score: f64,
    /// Follow up low-score candidates with active detection.
    #[serde(default)]
    pub active: Option<ActiveDetectConfig>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            headings: 3,
            fov: 120.0,
            visibility_range: DEFAULT_VISIBILITY_RANGE_M,
            match_radius: DEFAULT_MATCH_RADIUS_M,
            min_score: 0.5,
            active: None,
        }
    }
}

fn sweep_node(
    w: &World,
    node_id: &str,
    categories: &[String],
    detector: &dyn Detector,
    cfg: &SweepConfig,
) -> Result<Vec<ObjectProposal>, PerceptionError> {
    let n = cfg.headings.max(1);
    let poses: Vec<Pose> = (0..n)
        .map(|i| Pose::level(i as f64 * 360.0 / n as f64, cfg.fov).expect("finite"))
        .collect();
    let mut out = Vec::new();
    for view in render_views(w, node_id, &poses, cfg.visibility_range)? {
        for p in detector.detect(&view, categories)? {
            if p.score >= cfg.min_score {
                out.push(p);
            } else if let Some(active) = &cfg.active {
                let mut acfg = active.clone();
                acfg.visibility_range = cfg.visibility_range;
                match active_detect(w, node_id, &p, detector, categories, &acfg) {
                    Ok(r) if r.score >= cfg.min_score => out.push(r),
                    Ok(_) | Err(PerceptionError::LostTarget) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(out)
}

/// Confident proposals from every node, in node order.
pub fn instance_sweep(
    w: &World,
    node_ids: &[String],
    categories: &[String],
    detector: &dyn Detector,
    cfg: &SweepConfig,
    exec: Execution,
) -> Result<Vec<ObjectProposal>, BenchmarkError> {
    let per_node = exec.try_map(node_ids, |id| sweep_node(w, id, categories, detector, cfg))?;
    Ok(per_node.into_iter().flatten().collect())
}

/// Sweep followed by frustum matching of every confident proposal.
pub fn place_detection_sweep(
    w: &World,
    node_ids: &[String],
    categories: &[String],
    detector: &dyn Detector,
    cfg: &SweepConfig,
    exec: Execution,
) -> Result<Vec<MatchResult>, BenchmarkError> {
    let proposals = instance_sweep(w, node_ids, categories, detector, cfg, exec)?;
    Ok(exec.try_map(&proposals, |p| match_proposal_to_place(w, p, cfg.match_radius))?)
}

/// Fraction of `ground_truth` ids behind at least one proposal.
pub fn instance_recall(proposals: &[ObjectProposal], ground_truth: &[String]) -> Option<f64> {
    if ground_truth.is_empty() {
        return None;
    }
    let seen: BTreeSet<&str> = proposals.iter().filter_map(|p| p.truth.as_deref()).collect();
    let hits = ground_truth.iter().filter(|g| seen.contains(g.as_str())).count();
    Some(hits as f64 / ground_truth.len() as f64)
}

/// Ground position of an object proposal, from its bearing and the distance
/// implied by the box height and the label's known physical height.
pub fn localize_instance(w: &World, p: &ObjectProposal) -> Option<GeoCoordinate> {
    let node = w.node(&p.source_view.node_id).ok()?;
    if !(p.bbox.h > 0.0 && p.bbox.h < 1.0) {
        return None;
    }
    let (height, _) = instance_extent(&p.label);
    let angle = (p.bbox.h * p.source_view.pose.fov()).to_radians();
    Some(destination_point(node.coord, proposal_bearing(p), height / angle))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub sweep_nodes: usize,
    pub detections: usize,
    pub groups: usize,
    /// Instances in the region within visibility range of a swept node.
    pub ground_truth: usize,
    /// All instances of the counted categories in the region.
    pub in_region: usize,
}

/// Sweeps every node of `region` in tour order, keeps detections localized
/// inside the region, and counts distinct instances after deduplication.
pub fn count_instances(
    w: &World,
    region: &GeoPolygon,
    categories: &[String],
    detector: &dyn Detector,
    matcher: &dyn InstanceMatcher,
    cfg: &SweepConfig,
    exec: Execution,
) -> Result<CountResult, BenchmarkError> {
    let plan = region_navigate_plan(w, region, exec)?;
    let detections: Vec<ObjectProposal> =
        instance_sweep(w, &plan.nodes, categories, detector, cfg, exec)?
            .into_iter()
            .filter(|p| localize_instance(w, p).is_some_and(|c| region.contains(c)))
            .collect();
    let groups = deduplicate(&detections, matcher)?;
    let in_region: Vec<_> = w
        .instances()
        .iter()
        .filter(|o| categories.contains(&o.category) && region.contains(o.coord))
        .collect();
    let swept: Vec<GeoCoordinate> = plan
        .nodes
        .iter()
        .map(|id| w.node(id).map(|n| n.coord))
        .collect::<Result<_, _>>()?;
    let ground_truth = in_region
        .iter()
        .filter(|o| {
            swept
                .iter()
                .any(|c| haversine_distance(*c, o.coord) <= cfg.visibility_range)
        })
        .count();
    Ok(CountResult {
        sweep_nodes: plan.nodes.len(),
        detections: detections.len(),
        groups: groups.len(),
        ground_truth,
        in_region: in_region.len(),
    })
}
