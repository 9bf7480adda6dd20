use serde::{Deserialize, Serialize};

use super::{bearing_bucket, render_views, Detector, ObjectProposal, PerceptionError};
use crate::geo::{normalize_heading, Pose};
use crate::world::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveDetectConfig {
    /// FOVs tried in order; entries wider than the candidate's view are skipped.
    pub fov_schedule: Vec<f64>,
    /// Stop narrowing once the refined box covers this fraction of the frame.
    pub stop_area: f64,
    pub visibility_range: f64,
}

impl Default for ActiveDetectConfig {
    fn default() -> Self {
        Self {
            fov_schedule: vec![120.0, 60.0, 30.0],
            stop_area: 0.2,
            visibility_range: super::DEFAULT_VISIBILITY_RANGE_M,
        }
    }
}

/// Absolute bearing of a proposal's box center.
pub fn proposal_bearing(p: &ObjectProposal) -> f64 {
    let pose = p.source_view.pose;
    normalize_heading(pose.heading() + (p.bbox.cx - 0.5) * pose.fov())
}

/// Re-aims the camera at `candidate` and narrows the FOV, re-detecting at each
/// step. Returns the best-scoring proposal in the candidate's bearing bucket;
/// on equal scores the narrower view wins.
pub fn active_detect(
    w: &World,
    node_id: &str,
    candidate: &ObjectProposal,
    detector: &dyn Detector,
    categories: &[String],
    cfg: &ActiveDetectConfig,
) -> Result<ObjectProposal, PerceptionError> {
    if candidate.source_view.node_id != node_id {
        return Err(PerceptionError::CandidateNodeMismatch {
            expected: node_id.to_string(),
            found: candidate.source_view.node_id.clone(),
        });
    }
    let bearing = proposal_bearing(candidate);
    let bucket = bearing_bucket(bearing);
    let base = candidate.source_view.pose;
    let mut schedule: Vec<f64> = cfg
        .fov_schedule
        .iter()
        .copied()
        .filter(|f| *f <= base.fov())
        .collect();
    if schedule.is_empty() {
        schedule.push(base.fov());
    }

    let mut best: Option<ObjectProposal> = None;
    for fov in schedule {
        let pose = Pose::new(bearing, base.pitch(), fov).expect("finite pose");
        let view = render_views(w, node_id, &[pose], cfg.visibility_range)?.remove(0);
        let found = detector
            .detect(&view, categories)?
            .into_iter()
            .filter(|p| bearing_bucket(proposal_bearing(p)) == bucket)
            .max_by(|a, b| {
                a.score
                    .total_cmp(&b.score)
                    .then_with(|| a.bbox.area().total_cmp(&b.bbox.area()))
                    .then_with(|| b.label.cmp(&a.label))
            });
        if let Some(p) = found {
            let done = p.bbox.area() >= cfg.stop_area;
            if best.as_ref().is_none_or(|b| p.score >= b.score) {
                best = Some(p);
            }
            if done {
                break;
            }
        }
    }
    best.ok_or(PerceptionError::LostTarget)
}
