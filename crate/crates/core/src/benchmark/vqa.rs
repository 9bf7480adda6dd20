use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{macro_mean, BenchmarkError};
use crate::parallel::Execution;
use crate::provider::{ChooseRequest, HttpClient, HttpProviderConfig, ProviderError};
use crate::seeding::derive_seed;
use crate::world::{Place, World};

pub const VQA_QUESTION: &str = "What type of place is shown in this image?";

/// Four-option multiple-choice question about one place image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaItem {
    pub id: String,
    /// Place whose storefront the (symbolic) image shows.
    pub image_ref: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

impl VqaItem {
    pub fn answer(&self) -> &str {
        &self.options[self.answer_index]
    }

    /// Options shifted so that position `i` shows `options[(i + r) % 4]`.
    pub fn rotated(&self, r: usize) -> VqaItem {
        let n = self.options.len();
        VqaItem {
            options: (0..n).map(|i| self.options[(i + r) % n].clone()).collect(),
            answer_index: (self.answer_index + n - r % n) % n,
            ..self.clone()
        }
    }
}

/// Builds an item for `place`: its primary type plus three distinct
/// distractors from the rest of the vocabulary, answer at a uniform position.
pub fn make_vqa_item(id: &str, place: &Place, vocabulary: &[String], rng: &mut impl Rng) -> VqaItem {
    let truth = place.primary_type().to_string();
    let pool: Vec<&String> = vocabulary.iter().filter(|t| **t != truth).collect();
    let mut options: Vec<String> = pool.choose_multiple(rng, 3).map(|s| (*s).clone()).collect();
    let answer_index = rng.random_range(0..4);
    options.insert(answer_index.min(options.len()), truth);
    VqaItem {
        id: id.to_string(),
        image_ref: place.id.clone(),
        question: VQA_QUESTION.to_string(),
        options,
        answer_index,
    }
}

/// Answers a multiple-choice item with an option index.
pub trait VqaModel: Send + Sync {
    fn answer(&self, item: &VqaItem) -> Result<usize, ProviderError>;
}

/// Always picks the first option.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysFirstModel;

impl VqaModel for AlwaysFirstModel {
    fn answer(&self, _item: &VqaItem) -> Result<usize, ProviderError> {
        Ok(0)
    }
}

/// Knows every place's primary type.
#[derive(Debug, Clone, Default)]
pub struct OracleVqaModel {
    truth: BTreeMap<String, String>,
}

impl OracleVqaModel {
    pub fn from_world(w: &World) -> Self {
        Self {
            truth: w
                .places()
                .iter()
                .map(|p| (p.id.clone(), p.primary_type().to_string()))
                .collect(),
        }
    }
}

impl VqaModel for OracleVqaModel {
    fn answer(&self, item: &VqaItem) -> Result<usize, ProviderError> {
        let t = self.truth.get(&item.image_ref);
        Ok(item.options.iter().position(|o| Some(o) == t).unwrap_or(0))
    }
}

/// Knows the answer to a seeded `accuracy` fraction of items and otherwise
/// commits to one fixed wrong option. With `position_bias > 0` it instead
/// picks the first option on a seeded fraction of queries, keyed by the option
/// order, so rotations can disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeededGuessModel {
    pub seed: u64,
    pub accuracy: f64,
    #[serde(default)]
    pub position_bias: f64,
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl VqaModel for SeededGuessModel {
    fn answer(&self, item: &VqaItem) -> Result<usize, ProviderError> {
        let order = item.options.join("\u{1f}");
        if unit(derive_seed(self.seed, &["vqa-bias", &item.id, &order])) < self.position_bias {
            return Ok(0);
        }
        let h = derive_seed(self.seed, &["vqa", &item.id]);
        let truth = item.answer();
        let pick = if unit(h) < self.accuracy {
            truth.to_string()
        } else {
            let mut wrong: Vec<&String> = item.options.iter().filter(|o| *o != truth).collect();
            wrong.sort();
            wrong[(h % wrong.len() as u64) as usize].clone()
        };
        Ok(item.options.iter().position(|o| *o == pick).unwrap_or(0))
    }
}

/// Model behind the `/choose` endpoint.
#[derive(Debug, Clone)]
pub struct HttpVqaModel {
    client: HttpClient,
}

impl HttpVqaModel {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            client: HttpClient::new(config)?,
        })
    }
}

impl VqaModel for HttpVqaModel {
    fn answer(&self, item: &VqaItem) -> Result<usize, ProviderError> {
        Ok(self
            .client
            .choose(&ChooseRequest {
                options: item.options.clone(),
                context: json!({
                    "task": "vqa",
                    "question": item.question,
                    "image_ref": item.image_ref,
                }),
            })?
            .index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaReport {
    pub n_items: usize,
    /// Mean over answer types of the single-query accuracy.
    pub plain_macc: Option<f64>,
    /// Same, counting an item only when all four rotations are answered right.
    pub circular_macc: Option<f64>,
    pub per_item: Vec<VqaItemResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaItemResult {
    pub id: String,
    pub answer_type: String,
    pub plain_correct: bool,
    pub circular_correct: bool,
}

fn ask(model: &dyn VqaModel, item: &VqaItem) -> Result<bool, BenchmarkError> {
    let a = model.answer(item)?;
    if a >= item.options.len() {
        return Err(BenchmarkError::UnparseableAnswer {
            item: item.id.clone(),
            answer: a,
        });
    }
    Ok(a == item.answer_index)
}

/// Plain and circular accuracy of `model`. Rotation 0 is the plain query, so
/// circular accuracy never exceeds plain accuracy.
pub fn eval_vqa_circular(
    model: &dyn VqaModel,
    items: &[VqaItem],
    exec: Execution,
) -> Result<VqaReport, BenchmarkError> {
    for it in items {
        if it.options.len() != 4 || it.answer_index >= 4 {
            return Err(BenchmarkError::InvalidConfig(format!(
                "item {} must have 4 options and a valid answer",
                it.id
            )));
        }
    }
    let per_item = exec.try_map(items, |it| {
        let plain = ask(model, it)?;
        let mut circular = plain;
        for r in 1..4 {
            if !circular {
                break;
            }
            circular = ask(model, &it.rotated(r))?;
        }
        Ok::<_, BenchmarkError>(VqaItemResult {
            id: it.id.clone(),
            answer_type: it.answer().to_string(),
            plain_correct: plain,
            circular_correct: circular,
        })
    })?;
    let mut plain: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut circ: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in &per_item {
        let p = plain.entry(&r.answer_type).or_default();
        p.0 += r.plain_correct as usize;
        p.1 += 1;
        let c = circ.entry(&r.answer_type).or_default();
        c.0 += r.circular_correct as usize;
        c.1 += 1;
    }
    Ok(VqaReport {
        n_items: items.len(),
        plain_macc: macro_mean(plain.values()),
        circular_macc: macro_mean(circ.values()),
        per_item,
    })
}
