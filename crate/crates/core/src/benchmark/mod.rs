//! Benchmark protocols: place-data cleaning, detection recall, recognition
//! and circular VQA accuracy, vision-language navigation, and the suite
//! generator that ties them to a world.

mod cleaning;
mod detection;
mod recognition;
mod suite;
mod vln;
mod vqa;

use thiserror::Error;

use crate::mobility::MobilityError;
use crate::perception::PerceptionError;
use crate::provider::ProviderError;
use crate::world::WorldError;

pub use cleaning::{
    clean_place_set, clean_places, CleaningConfig, CleaningOutcome, CleaningRule, HttpImageScorer,
    ImageScorer, OracleImageScorer, RemovalEntry,
};
pub use detection::{
    average_recall, count_instances, eval_detection, instance_recall, instance_sweep,
    localize_instance, place_detection_sweep, CategoryRecall, CountResult, DetectionReport,
    SweepConfig,
};
pub use recognition::{eval_recognition, RecognitionReport, SimulatedRecognizer, TypeAccuracy};
pub use suite::{
    generate_benchmark_suite, DetectionArea, Suite, SuiteParams, SuiteRoute,
};
pub use vln::{aggregate_vln, run_vln_episode, KeyStats, VlnConfig, VlnRecord, VlnReport};
pub use vqa::{
    eval_vqa_circular, make_vqa_item, AlwaysFirstModel, HttpVqaModel, OracleVqaModel,
    SeededGuessModel, VqaItem, VqaModel, VqaReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("infeasible benchmark parameters: {0}")]
    InfeasibleParams(String),
    #[error("answer {answer} to item {item} is not one of the 4 options")]
    UnparseableAnswer { item: String, answer: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Macro mean of `(correct, total)` pairs, skipping empty ones.
pub(crate) fn macro_mean<'a>(it: impl Iterator<Item = &'a (usize, usize)>) -> Option<f64> {
    let accs: Vec<f64> = it
        .filter(|(_, t)| *t > 0)
        .map(|(c, t)| *c as f64 / *t as f64)
        .collect();
    (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
}
