use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::MobilityError;
use crate::perception::SymbolicView;
use crate::provider::{ChooseRequest, HttpClient, HttpProviderConfig, ProviderError};

/// Two-stage reasoner: caption each road view, then pick a road for the
/// intention.
pub trait Reasoner: Send + Sync {
    fn caption(&self, view: &SymbolicView) -> Result<String, ProviderError>;
    fn choose(&self, captions: &[String], intention: &str) -> Result<(usize, String), ProviderError>;
}

/// Intention keywords and the place categories they favour.
const KEYWORDS: &[(&str, &[&str])] = &[
    ("lunch", &["restaurant", "cafe", "meal_takeaway", "bakery", "food"]),
    ("dinner", &["restaurant", "meal_takeaway", "bar", "food"]),
    ("breakfast", &["cafe", "bakery", "restaurant"]),
    ("eat", &["restaurant", "cafe", "meal_takeaway", "bakery", "food"]),
    ("hungry", &["restaurant", "cafe", "meal_takeaway", "bakery", "food"]),
    ("food", &["restaurant", "cafe", "meal_takeaway", "bakery", "food", "supermarket"]),
    ("coffee", &["cafe"]),
    ("drink", &["bar", "cafe", "night_club"]),
    ("cash", &["bank", "atm"]),
    ("money", &["bank", "atm"]),
    ("groceries", &["supermarket", "grocery_or_supermarket", "convenience_store"]),
    ("shopping", &["shopping_mall", "clothing_store", "department_store", "store"]),
    ("medicine", &["pharmacy", "drugstore", "hospital"]),
    ("sick", &["pharmacy", "hospital", "doctor"]),
    ("book", &["book_store", "library"]),
    ("park", &["park"]),
    ("exercise", &["gym", "park", "stadium"]),
];

/// Deterministic reasoner. Captions are `category xN` tags of the visible
/// entities; a road scores one point per visible entity whose category the
/// intention asks for (by keyword or by naming the category). Ties go to the
/// lowest index.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockReasoner;

fn parse_caption(caption: &str) -> BTreeMap<String, usize> {
    caption
        .split(';')
        .filter_map(|t| {
            let (cat, n) = t.trim().rsplit_once(" x")?;
            Some((cat.to_string(), n.parse().ok()?))
        })
        .collect()
}

fn wanted_categories(intention: &str) -> Vec<String> {
    let lower = intention.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .collect();
    let mut out: Vec<String> = Vec::new();
    for w in &words {
        for (k, cats) in KEYWORDS {
            if w == k {
                out.extend(cats.iter().map(|c| c.to_string()));
            }
        }
        out.push(w.to_string());
    }
    out.sort();
    out.dedup();
    out
}

impl Reasoner for MockReasoner {
    fn caption(&self, view: &SymbolicView) -> Result<String, ProviderError> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &view.visible_entities {
            *counts.entry(e.category.as_str()).or_default() += 1;
        }
        Ok(counts
            .iter()
            .map(|(c, n)| format!("{c} x{n}"))
            .collect::<Vec<_>>()
            .join("; "))
    }

    fn choose(&self, captions: &[String], intention: &str) -> Result<(usize, String), ProviderError> {
        let want = wanted_categories(intention);
        let scores: Vec<usize> = captions
            .iter()
            .map(|c| {
                parse_caption(c)
                    .iter()
                    .filter(|(cat, _)| want.iter().any(|w| w == *cat))
                    .map(|(_, n)| n)
                    .sum()
            })
            .collect();
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok((
            best,
            format!(
                "road {best} shows {} place(s) matching {intention:?}",
                scores.get(best).copied().unwrap_or(0)
            ),
        ))
    }
}

/// Captions locally (like [`MockReasoner`]) and delegates the choice to the
/// `/choose` endpoint.
#[derive(Debug, Clone)]
pub struct HttpReasoner {
    client: HttpClient,
}

impl HttpReasoner {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            client: HttpClient::new(config)?,
        })
    }
}

impl Reasoner for HttpReasoner {
    fn caption(&self, view: &SymbolicView) -> Result<String, ProviderError> {
        MockReasoner.caption(view)
    }

    fn choose(&self, captions: &[String], intention: &str) -> Result<(usize, String), ProviderError> {
        let r = self.client.choose(&ChooseRequest {
            options: captions.to_vec(),
            context: json!({"task": "intention", "intention": intention}),
        })?;
        Ok((r.index, r.rationale))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionChoice {
    pub index: usize,
    pub rationale: String,
    pub captions: Vec<String>,
}

/// Picks the road that best serves `intention`.
pub fn intention_navigate_choose(
    road_views: &[SymbolicView],
    reasoner: &dyn Reasoner,
    intention: &str,
) -> Result<IntentionChoice, MobilityError> {
    if road_views.len() < 2 {
        return Err(MobilityError::TooFewRoads(road_views.len()));
    }
    let captions = road_views
        .iter()
        .map(|v| reasoner.caption(v))
        .collect::<Result<Vec<_>, _>>()?;
    let (index, rationale) = reasoner.choose(&captions, intention)?;
    if index >= road_views.len() {
        return Err(MobilityError::IndexOutOfRange {
            index,
            len: road_views.len(),
        });
    }
    Ok(IntentionChoice {
        index,
        rationale,
        captions,
    })
}
