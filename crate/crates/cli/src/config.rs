use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use streetsim::benchmark::{CleaningConfig, SuiteParams, SweepConfig, VlnConfig};
use streetsim::perception::NoisyParams;
use streetsim::provider::HttpProviderConfig;

use crate::failure::{config_error, CliResult, WithCode, CONFIG, IO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    RouteOptimize,
    RegionSweep,
    Vln,
    DetectBench,
    VqaBench,
    Clean,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.to_possible_value().expect("no skipped variants");
        f.write_str(s.get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// Ground truth read from the world.
    Oracle,
    /// Seeded simulated models with configurable error.
    Noisy,
    /// HTTP provider at `--endpoint`.
    External,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteOptimizeConfig {
    pub start: Option<String>,
    pub waypoints: Option<Vec<String>>,
    /// Randomly drawn waypoints when none are listed.
    pub n_waypoints: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSweepConfig {
    pub n_areas: Option<usize>,
    pub area_size_m: Option<f64>,
    /// Instance categories to count; every category in the world when absent.
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectBenchConfig {
    /// Place types to evaluate; the world vocabulary when absent.
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqaBenchConfig {
    pub n_items: Option<usize>,
    /// Accuracy of the noisy answerer.
    pub noisy_accuracy: Option<f64>,
    /// Fraction of queries where the noisy answerer just picks the first option.
    pub noisy_position_bias: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisyMatcherConfig {
    pub false_match_rate: f64,
    pub false_split_rate: f64,
}

/// Contents of a `--config` TOML file. Every key is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub world: Option<PathBuf>,
    pub seed: Option<u64>,
    pub task: Option<Task>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub provider: Option<ProviderKind>,
    pub endpoint: Option<String>,
    pub threshold_m: Option<f64>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
    pub suite: Option<SuiteParams>,
    pub vln: Option<VlnConfig>,
    pub sweep: Option<SweepConfig>,
    pub cleaning: Option<CleaningConfig>,
    pub noisy_detector: Option<NoisyParams>,
    pub noisy_matcher: Option<NoisyMatcherConfig>,
    pub route_optimize: Option<RouteOptimizeConfig>,
    pub region_sweep: Option<RegionSweepConfig>,
    pub detect_bench: Option<DetectBenchConfig>,
    pub vqa_bench: Option<VqaBenchConfig>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))
            .code(IO)?;
        toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
            .code(CONFIG)
    }

    /// Layers `flags` over `self`.
    pub fn merge(mut self, flags: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(world, seed, task, out, workers, provider, endpoint, threshold_m, timeout_ms, retries);
        self
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct Run {
    pub world: PathBuf,
    pub seed: u64,
    pub task: Task,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub provider: ProviderKind,
    pub http: Option<HttpProviderConfig>,
    pub vln: VlnConfig,
    pub rest: RunConfig,
}

impl Run {
    pub fn resolve(cfg: RunConfig) -> CliResult<Self> {
        let task = cfg.task.ok_or_else(|| config_error("no task given (--task)"))?;
        let world = cfg
            .world
            .clone()
            .ok_or_else(|| config_error("no world file given (--world)"))?;
        if !world.is_file() {
            return Err(config_error(format!("world file {} does not exist", world.display())));
        }
        let out = cfg.out.clone().ok_or_else(|| config_error("no output directory given (--out)"))?;
        if cfg.workers == Some(0) {
            return Err(config_error("--workers must be at least 1"));
        }
        let provider = cfg.provider.unwrap_or(ProviderKind::Oracle);
        let http = match (provider, &cfg.endpoint) {
            (ProviderKind::External, None) => {
                return Err(config_error("the external provider needs --endpoint"))
            }
            (ProviderKind::External, Some(ep)) => {
                let mut h = HttpProviderConfig::new(ep.clone());
                if let Some(t) = cfg.timeout_ms {
                    h.timeout_ms = t;
                }
                if let Some(r) = cfg.retries {
                    h.retries = r;
                }
                Some(h)
            }
            _ => None,
        };
        let mut vln = cfg.vln.clone().unwrap_or_default();
        if let Some(t) = cfg.threshold_m {
            vln.success_radius_m = t;
        }
        if vln.success_radius_m.is_nan() || vln.success_radius_m < 0.0 {
            return Err(config_error("--threshold-m must be non-negative"));
        }
        Ok(Run {
            world,
            seed: cfg.seed.unwrap_or(0),
            task,
            out,
            workers: cfg.workers,
            provider,
            http,
            vln,
            rest: cfg,
        })
    }
}
