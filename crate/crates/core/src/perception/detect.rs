use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BBox, ObjectProposal, SymbolicView, ViewSource};
use crate::provider::{DetectRequest, HttpClient, HttpProviderConfig, ProviderError};
use crate::seeding::derive_seed;

/// Open-vocabulary detector over symbolic views.
///
/// An empty `categories` slice means "every category".
pub trait Detector: Send + Sync {
    fn detect(
        &self,
        view: &SymbolicView,
        categories: &[String],
    ) -> Result<Vec<ObjectProposal>, ProviderError>;
}

fn wanted(categories: &[String], c: &str) -> bool {
    categories.is_empty() || categories.iter().any(|x| x == c)
}

fn source(view: &SymbolicView) -> ViewSource {
    ViewSource {
        node_id: view.node_id.clone(),
        pose: view.pose,
    }
}

/// Reports every visible entity of a requested category with score 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleDetector;

impl Detector for OracleDetector {
    fn detect(
        &self,
        view: &SymbolicView,
        categories: &[String],
    ) -> Result<Vec<ObjectProposal>, ProviderError> {
        Ok(view
            .visible_entities
            .iter()
            .filter(|e| wanted(categories, &e.category))
            .map(|e| ObjectProposal {
                bbox: e.bbox,
                label: e.category.clone(),
                score: 1.0,
                source_view: source(view),
                truth: Some(e.entity_id.clone()),
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisyParams {
    pub seed: u64,
    /// Knots `(bbox_area, recall)`, linearly interpolated and clamped at the
    /// ends. Must be sorted by area.
    pub recall_by_size: Vec<(f64, f64)>,
    /// Probability that a view yields one spurious proposal.
    #[serde(default)]
    pub false_positive_rate: f64,
    /// `true_label -> {reported_label -> probability}`.
    #[serde(default)]
    pub label_confusion: BTreeMap<String, BTreeMap<String, f64>>,
    /// Probability that a missed entity still produces a low-score candidate
    /// (score in `[0.1, 0.4)`), the kind active detection can follow up on.
    #[serde(default)]
    pub weak_candidate_rate: f64,
}

impl NoisyParams {
    /// Small objects are nearly invisible in a wide view and reliably found
    /// once they fill a decent part of the frame.
    pub fn size_dependent(seed: u64) -> Self {
        Self {
            seed,
            recall_by_size: vec![(0.0005, 0.05), (0.01, 0.95)],
            false_positive_rate: 0.0,
            label_confusion: BTreeMap::new(),
            weak_candidate_rate: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1], got {p}"))
            }
        };
        if self.recall_by_size.is_empty() {
            return Err("recall_by_size needs at least one knot".into());
        }
        for w in self.recall_by_size.windows(2) {
            if w[0].0.is_nan() || w[1].0.is_nan() || w[0].0 > w[1].0 {
                return Err("recall_by_size knots must be sorted by area".into());
            }
        }
        for &(a, r) in &self.recall_by_size {
            if !a.is_finite() || a < 0.0 {
                return Err(format!("recall_by_size area must be non-negative, got {a}"));
            }
            prob("recall_by_size recall", r)?;
        }
        prob("false_positive_rate", self.false_positive_rate)?;
        prob("weak_candidate_rate", self.weak_candidate_rate)?;
        for (from, row) in &self.label_confusion {
            let mut total = 0.0;
            for p in row.values() {
                prob("label_confusion", *p)?;
                total += p;
            }
            if total > 1.0 + 1e-9 {
                return Err(format!("label_confusion row {from:?} sums to {total}"));
            }
        }
        Ok(())
    }

    pub fn recall_at(&self, area: f64) -> f64 {
        let k = &self.recall_by_size;
        if area <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((a0, r0), (a1, r1)) = (w[0], w[1]);
            if area <= a1 {
                if a1 == a0 {
                    return r1;
                }
                return r0 + (r1 - r0) * (area - a0) / (a1 - a0);
            }
        }
        k[k.len() - 1].1
    }
}

/// Seeded noise model. Every draw for an entity is keyed by (seed, node,
/// pose, entity), so results do not depend on call order or on which other
/// entities share the view.
#[derive(Debug, Clone)]
pub struct NoisyDetector {
    params: NoisyParams,
}

impl NoisyDetector {
    pub fn new(params: NoisyParams) -> Result<Self, ProviderError> {
        params.validate().map_err(ProviderError::Malformed)?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &NoisyParams {
        &self.params
    }

    fn rng(&self, view: &SymbolicView, key: &str) -> ChaCha8Rng {
        let pose = format!(
            "{:.9}/{:.9}/{:.9}",
            view.pose.heading(),
            view.pose.pitch(),
            view.pose.fov()
        );
        ChaCha8Rng::seed_from_u64(derive_seed(self.params.seed, &[&view.node_id, &pose, key]))
    }

    fn confuse(&self, label: &str, rng: &mut ChaCha8Rng) -> String {
        let u: f64 = rng.random();
        if let Some(row) = self.params.label_confusion.get(label) {
            let mut acc = 0.0;
            for (to, p) in row {
                acc += p;
                if u < acc {
                    return to.clone();
                }
            }
        }
        label.to_string()
    }
}

impl Detector for NoisyDetector {
    fn detect(
        &self,
        view: &SymbolicView,
        categories: &[String],
    ) -> Result<Vec<ObjectProposal>, ProviderError> {
        let mut out = Vec::new();
        for e in view
            .visible_entities
            .iter()
            .filter(|e| wanted(categories, &e.category))
        {
            let mut rng = self.rng(view, &e.entity_id);
            let hit = rng.random_bool(self.params.recall_at(e.bbox.area()));
            let weak = rng.random_bool(self.params.weak_candidate_rate);
            let score = if hit {
                rng.random_range(0.6..=1.0)
            } else if weak {
                rng.random_range(0.1..0.4)
            } else {
                continue;
            };
            out.push(ObjectProposal {
                bbox: e.bbox,
                label: self.confuse(&e.category, &mut rng),
                score,
                source_view: source(view),
                truth: Some(e.entity_id.clone()),
            });
        }
        let mut rng = self.rng(view, "");
        if rng.random_bool(self.params.false_positive_rate) {
            let label = if categories.is_empty() {
                "object".to_string()
            } else {
                categories[rng.random_range(0..categories.len())].clone()
            };
            let w = rng.random_range(0.02..0.2);
            let h = rng.random_range(0.02..0.2);
            out.push(ObjectProposal {
                bbox: BBox {
                    cx: rng.random_range(w / 2.0..=1.0 - w / 2.0),
                    cy: rng.random_range(h / 2.0..=1.0 - h / 2.0),
                    w,
                    h,
                },
                label,
                score: rng.random_range(0.6..=1.0),
                source_view: source(view),
                truth: None,
            });
        }
        Ok(out)
    }
}

/// Detector backed by the `/detect` endpoint.
#[derive(Debug, Clone)]
pub struct HttpDetector {
    client: HttpClient,
}

impl HttpDetector {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            client: HttpClient::new(config)?,
        })
    }
}

impl Detector for HttpDetector {
    fn detect(
        &self,
        view: &SymbolicView,
        categories: &[String],
    ) -> Result<Vec<ObjectProposal>, ProviderError> {
        let resp = self.client.detect(&DetectRequest {
            view: view.clone(),
            categories: categories.to_vec(),
        })?;
        resp.proposals
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                if !p.bbox.is_valid() {
                    return Err(ProviderError::Malformed(format!(
                        "proposals[{i}].bbox outside the unit square"
                    )));
                }
                if !(p.score.is_finite() && (0.0..=1.0).contains(&p.score)) {
                    return Err(ProviderError::Malformed(format!(
                        "proposals[{i}].score {} outside [0, 1]",
                        p.score
                    )));
                }
                if p.label.is_empty() {
                    return Err(ProviderError::Malformed(format!(
                        "proposals[{i}].label is empty"
                    )));
                }
                Ok(ObjectProposal {
                    bbox: p.bbox,
                    label: p.label,
                    score: p.score,
                    source_view: source(view),
                    truth: None,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerceptionProviderConfig {
    Oracle,
    Noisy(NoisyParams),
    External(HttpProviderConfig),
}

pub fn build_detector(cfg: &PerceptionProviderConfig) -> Result<Box<dyn Detector>, ProviderError> {
    Ok(match cfg {
        PerceptionProviderConfig::Oracle => Box::new(OracleDetector),
        PerceptionProviderConfig::Noisy(p) => Box::new(NoisyDetector::new(p.clone())?),
        PerceptionProviderConfig::External(h) => Box::new(HttpDetector::new(h.clone())?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Pose;
    use crate::perception::render_views;
    use crate::world::fixtures::plus_world;

    fn full_view() -> SymbolicView {
        let w = plus_world();
        render_views(&w, "c", &[Pose::level(90.0, 120.0).unwrap()], 100.0)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn oracle_filters_categories() {
        let v = full_view();
        let all = OracleDetector.detect(&v, &[]).unwrap();
        assert_eq!(all.len(), v.visible_entities.len());
        let bins = OracleDetector.detect(&v, &["trash bin".into()]).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].label, "trash bin");
        assert_eq!(bins[0].score, 1.0);
    }

    #[test]
    fn zero_recall_is_empty() {
        let mut p = NoisyParams::size_dependent(3);
        p.recall_by_size = vec![(0.0, 0.0)];
        p.weak_candidate_rate = 0.0;
        let d = NoisyDetector::new(p).unwrap();
        assert!(d.detect(&full_view(), &[]).unwrap().is_empty());
    }

    #[test]
    fn noisy_is_deterministic() {
        let mut p = NoisyParams::size_dependent(11);
        p.false_positive_rate = 0.5;
        let d = NoisyDetector::new(p).unwrap();
        let v = full_view();
        assert_eq!(d.detect(&v, &[]).unwrap(), d.detect(&v, &[]).unwrap());
    }

    #[test]
    fn full_confusion_relabels() {
        let mut p = NoisyParams::size_dependent(1);
        p.recall_by_size = vec![(0.0, 1.0)];
        p.label_confusion
            .insert("trash bin".into(), BTreeMap::from([("mailbox".into(), 1.0)]));
        let d = NoisyDetector::new(p).unwrap();
        let out = d.detect(&full_view(), &["trash bin".into()]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, "mailbox");
        assert_eq!(out[0].truth.as_deref(), Some("o-bin"));
    }

    #[test]
    fn recall_interpolation() {
        let p = NoisyParams::size_dependent(0);
        assert_eq!(p.recall_at(0.0), 0.05);
        assert_eq!(p.recall_at(1.0), 0.95);
        let mid = (0.0005 + 0.01) / 2.0;
        assert!((p.recall_at(mid) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let mut p = NoisyParams::size_dependent(0);
        p.false_positive_rate = 1.5;
        assert!(NoisyDetector::new(p).is_err());
    }
}
