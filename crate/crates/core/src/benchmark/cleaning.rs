use serde::{Deserialize, Serialize};
use serde_json::json;

use super::BenchmarkError;
use crate::provider::{HttpClient, HttpProviderConfig, MatchRequest, ProviderError};
use crate::world::{Place, PhotoRef, World};

/// Scores how well a photo shows the place's storefront, in `[0, 1]`.
pub trait ImageScorer: Send + Sync {
    fn score(&self, place: &Place, photo: &PhotoRef) -> Result<f64, ProviderError>;
}

/// 1 for storefront photos, 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleImageScorer;

impl ImageScorer for OracleImageScorer {
    fn score(&self, _place: &Place, photo: &PhotoRef) -> Result<f64, ProviderError> {
        Ok(if photo.subject == "storefront" { 1.0 } else { 0.0 })
    }
}

/// Scores via the `/match` endpoint: the photo against the text query
/// "storefront of <name>".
#[derive(Debug, Clone)]
pub struct HttpImageScorer {
    client: HttpClient,
}

impl HttpImageScorer {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            client: HttpClient::new(config)?,
        })
    }
}

impl ImageScorer for HttpImageScorer {
    fn score(&self, place: &Place, photo: &PhotoRef) -> Result<f64, ProviderError> {
        let r = self.client.match_pair(&MatchRequest {
            a: json!({"photo": photo, "place_id": place.id}),
            b: json!({"text": format!("storefront of {}", place.name)}),
        })?;
        Ok(r.score.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    /// Places farther than this from every street node are dropped.
    pub distance_threshold_m: f64,
    pub min_reviews: usize,
    /// Photos scoring below this are dropped (the place is kept).
    pub image_score_threshold: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            distance_threshold_m: 100.0,
            min_reviews: 1,
            image_score_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningRule {
    Distance,
    Reviews,
    PhotoScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalEntry {
    pub place_id: String,
    pub rule: CleaningRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningOutcome {
    pub kept: Vec<Place>,
    pub removed: Vec<String>,
    pub log: Vec<RemovalEntry>,
}

/// Applies the three rules, in order, to every place of `w`.
pub fn clean_places(
    w: &World,
    cfg: &CleaningConfig,
    scorer: &dyn ImageScorer,
) -> Result<CleaningOutcome, BenchmarkError> {
    clean_place_set(w, w.places(), cfg, scorer)
}

/// Applies the rules to an arbitrary place list, judged against the street
/// nodes of `w`.
pub fn clean_place_set(
    w: &World,
    places: &[Place],
    cfg: &CleaningConfig,
    scorer: &dyn ImageScorer,
) -> Result<CleaningOutcome, BenchmarkError> {
    if !(cfg.distance_threshold_m >= 0.0 && cfg.image_score_threshold >= 0.0) {
        return Err(BenchmarkError::InvalidConfig(
            "cleaning thresholds must be non-negative".into(),
        ));
    }
    let mut out = CleaningOutcome {
        kept: vec![],
        removed: vec![],
        log: vec![],
    };
    for p in places {
        if w.relocate(p.coord, cfg.distance_threshold_m).is_err() {
            out.removed.push(p.id.clone());
            out.log.push(RemovalEntry {
                place_id: p.id.clone(),
                rule: CleaningRule::Distance,
                photo_id: None,
            });
            continue;
        }
        if p.reviews.len() < cfg.min_reviews {
            out.removed.push(p.id.clone());
            out.log.push(RemovalEntry {
                place_id: p.id.clone(),
                rule: CleaningRule::Reviews,
                photo_id: None,
            });
            continue;
        }
        let mut kept = p.clone();
        kept.photo_refs.clear();
        for photo in &p.photo_refs {
            if scorer.score(p, photo)? >= cfg.image_score_threshold {
                kept.photo_refs.push(photo.clone());
            } else {
                out.log.push(RemovalEntry {
                    place_id: p.id.clone(),
                    rule: CleaningRule::PhotoScore,
                    photo_id: Some(photo.id.clone()),
                });
            }
        }
        out.kept.push(kept);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::destination_point;
    use crate::world::fixtures::plus_world;
    use crate::world::{Review, WorldDocument};

    fn with_far_place() -> World {
        let w = plus_world();
        let mut doc: WorldDocument = w.to_document();
        let c = w.node("c").unwrap().coord;
        doc.places.push(Place {
            id: "p-far".into(),
            name: "Far".into(),
            types: vec!["cafe".into()],
            coord: destination_point(c, 90.0, 500.0),
            rating: None,
            reviews: vec![Review {
                text: "ok".into(),
                rating: 3.0,
            }],
            photo_refs: vec![],
        });
        World::from_document(doc).unwrap()
    }

    #[test]
    fn each_rule_removes_its_violator() {
        let w = with_far_place();
        let out = clean_places(&w, &CleaningConfig::default(), &OracleImageScorer).unwrap();
        assert_eq!(
            out.log,
            vec![
                RemovalEntry {
                    place_id: "p-bank".into(),
                    rule: CleaningRule::Reviews,
                    photo_id: None
                },
                RemovalEntry {
                    place_id: "p-far".into(),
                    rule: CleaningRule::Distance,
                    photo_id: None
                },
            ]
        );
        let kept: Vec<&str> = out.kept.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(kept, vec!["p-cafe"]);
        assert_eq!(out.kept[0].photo_refs.len(), 1);
    }

    #[test]
    fn idempotent() {
        let w = with_far_place();
        let cfg = CleaningConfig::default();
        let once = clean_places(&w, &cfg, &OracleImageScorer).unwrap();
        let twice = clean_place_set(&w, &once.kept, &cfg, &OracleImageScorer).unwrap();
        assert_eq!(twice.kept, once.kept);
        assert!(twice.log.is_empty());
    }
}
