use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{macro_mean, BenchmarkError};
use crate::seeding::derive_seed;
use crate::world::{Place, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionReport {
    pub per_type: BTreeMap<String, TypeAccuracy>,
    /// Mean of the per-type accuracies.
    pub macc: Option<f64>,
    pub n_items: usize,
}

/// Per-type accuracy of `predictions` (place id -> predicted primary type),
/// averaged over the true types present.
pub fn eval_recognition(
    predictions: &BTreeMap<String, String>,
    w: &World,
) -> Result<RecognitionReport, BenchmarkError> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (id, predicted) in predictions {
        let truth = w.place_details(id)?.primary_type();
        let e = counts.entry(truth.to_string()).or_default();
        e.1 += 1;
        if predicted == truth {
            e.0 += 1;
        }
    }
    Ok(RecognitionReport {
        macc: macro_mean(counts.values()),
        per_type: counts
            .iter()
            .map(|(t, &(c, n))| {
                (
                    t.clone(),
                    TypeAccuracy {
                        correct: c,
                        total: n,
                        accuracy: c as f64 / n as f64,
                    },
                )
            })
            .collect(),
        n_items: predictions.len(),
    })
}

/// Seeded stand-in for a recognition model: answers the true primary type,
/// except with a per-type error rate, when it names another vocabulary type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRecognizer {
    pub seed: u64,
    #[serde(default)]
    pub error_rate: BTreeMap<String, f64>,
    #[serde(default)]
    pub default_error_rate: f64,
}

impl SimulatedRecognizer {
    pub fn error_for(&self, t: &str) -> f64 {
        self.error_rate
            .get(t)
            .copied()
            .unwrap_or(self.default_error_rate)
            .clamp(0.0, 1.0)
    }

    pub fn predict(&self, vocabulary: &[String], place: &Place) -> String {
        let truth = place.primary_type();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &["recognize", &place.id]));
        if rng.random_bool(self.error_for(truth)) {
            let others: Vec<&String> = vocabulary.iter().filter(|t| *t != truth).collect();
            if !others.is_empty() {
                return others[rng.random_range(0..others.len())].clone();
            }
        }
        truth.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoCoordinate;
    use crate::world::{WorldDocument, WorldMeta};

    fn world_with(types: &[&str]) -> World {
        let places = types
            .iter()
            .enumerate()
            .map(|(i, t)| Place {
                id: format!("p{i:05}"),
                name: format!("P{i}"),
                types: vec![t.to_string()],
                coord: GeoCoordinate::new(10.0 + i as f64 * 1e-4, 10.0).unwrap(),
                rating: None,
                reviews: vec![],
                photo_refs: vec![],
            })
            .collect();
        World::from_document(WorldDocument {
            meta: WorldMeta::default(),
            nodes: vec![],
            places,
            instances: vec![],
            vocabulary: crate::world::default_place_types(),
        })
        .unwrap()
    }

    #[test]
    fn macro_not_micro() {
        let w = world_with(&["cafe", "cafe", "cafe", "bank"]);
        let preds: BTreeMap<String, String> = [
            ("p00000", "cafe"),
            ("p00001", "cafe"),
            ("p00002", "cafe"),
            ("p00003", "cafe"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let r = eval_recognition(&preds, &w).unwrap();
        assert_eq!(r.macc, Some(0.5));
        let all_right: BTreeMap<String, String> = w
            .places()
            .iter()
            .map(|p| (p.id.clone(), p.primary_type().to_string()))
            .collect();
        assert_eq!(eval_recognition(&all_right, &w).unwrap().macc, Some(1.0));
    }

    #[test]
    fn unknown_place() {
        let w = world_with(&["cafe"]);
        let preds = BTreeMap::from([("nope".to_string(), "cafe".to_string())]);
        assert!(matches!(
            eval_recognition(&preds, &w),
            Err(BenchmarkError::World(crate::world::WorldError::UnknownPlace(_)))
        ));
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        // 2000 items over 4 types with known error rates
        let types = ["cafe", "bank", "park", "bakery"];
        let rates = [0.1, 0.3, 0.5, 0.0];
        let labels: Vec<&str> = (0..2000).map(|i| types[i % 4]).collect();
        let w = world_with(&labels);
        let rec = SimulatedRecognizer {
            seed: 99,
            error_rate: types
                .iter()
                .zip(rates)
                .map(|(t, r)| (t.to_string(), r))
                .collect(),
            default_error_rate: 0.0,
        };
        let preds: BTreeMap<String, String> = w
            .places()
            .iter()
            .map(|p| (p.id.clone(), rec.predict(w.vocabulary(), p)))
            .collect();
        let analytic = 1.0 - rates.iter().sum::<f64>() / 4.0;
        let got = eval_recognition(&preds, &w).unwrap().macc.unwrap();
        assert!((got - analytic).abs() < 0.02, "{got} vs {analytic}");
    }
}
