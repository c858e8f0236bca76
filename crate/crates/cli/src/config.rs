//! TOML configuration. Every section and key is optional.
//!
//! ```toml
//! tagset = "tagset.txt"          # paths are relative to this file
//! dictionary = "dictionary.tsv"
//!
//! [bootstrap]
//! taggers = ["tree", "relax-BT"]
//! fresh_size = 50000
//! c0_weight = 1.0                # or target_error = 0.005, not both
//! max_iterations = 1
//! stop_threshold = 0.05
//! hand_correct = false
//! drop_gapped = false
//!
//! [ngram]                        # interpolation: trigram_weight, bigram_weight
//! [tree]                         # window, min_examples, max_depth, min_node_weight,
//!                                # pool_weight, filter_ratio, max_sweeps
//! [relax]                        # epsilon, max_iters, clip
//! [synth]                        # generator settings, see `synth-gen --help`
//!
//! [sweep]
//! sizes = [5000, 10000, 20000, 50000]
//! target_errors = [0.001, 0.002, 0.003, 0.004, 0.005, 0.0075, 0.01]
//! # weights = [1.0, 2.0]        # replaces target_errors when given
//!
//! [service]
//! bind = "127.0.0.1:8321"
//! context = 3
//! # static_dir = "ui/dist"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use cotag::bootstrap::BootstrapConfig;
use cotag::ngram::NgramConfig;
use cotag::relax::RelaxConfig;
use cotag::sweep::DEFAULT_TARGET_ERRORS;
use cotag::synth::SynthConfig;
use cotag::tagger::{TaggerParams, TaggerSpec};
use cotag::tree::TreeConfig;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const CONFIG_ENV: &str = "COTAG_CONFIG";

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub taggers: Vec<TaggerSpec>,
    pub fresh_size: usize,
    pub c0_weight: Option<f64>,
    pub target_error: Option<f64>,
    pub max_iterations: usize,
    pub stop_threshold: f64,
    pub hand_correct: bool,
    pub drop_gapped: bool,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let d = BootstrapConfig::default();
        BootstrapSection {
            taggers: d.taggers,
            fresh_size: d.fresh_size,
            c0_weight: None,
            target_error: None,
            max_iterations: d.max_iterations,
            stop_threshold: d.stop_threshold,
            hand_correct: d.hand_correct,
            drop_gapped: d.drop_gapped,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sizes: Vec<usize>,
    pub target_errors: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            sizes: vec![5000, 10000, 20000, 50000],
            target_errors: DEFAULT_TARGET_ERRORS.to_vec(),
            weights: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: String,
    /// Tokens of context on each side of a queued item.
    pub context: usize,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection {
            bind: "127.0.0.1:8321".into(),
            context: 3,
            static_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tagset: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub bootstrap: BootstrapSection,
    pub ngram: NgramConfig,
    pub tree: TreeConfig,
    pub relax: RelaxConfig,
    pub synth: SynthConfig,
    pub sweep: SweepSection,
    pub service: ServiceSection,
}

impl Config {
    /// Reads `path` when given; otherwise all defaults.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.tagset, &mut cfg.dictionary, &mut cfg.service.static_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn params(&self) -> TaggerParams {
        TaggerParams {
            ngram: self.ngram.clone(),
            tree: self.tree.clone(),
            relax: self.relax.clone(),
        }
    }

    /// Seed weight 1 applies when neither weighting key is set.
    pub fn bootstrap_config(&self) -> CliResult<BootstrapConfig> {
        let b = &self.bootstrap;
        let c0_weight = match (b.c0_weight, b.target_error) {
            (None, None) => Some(1.0),
            (w, _) => w,
        };
        let cfg = BootstrapConfig {
            taggers: b.taggers.clone(),
            params: self.params(),
            fresh_size: b.fresh_size,
            c0_weight,
            target_error: b.target_error,
            max_iterations: b.max_iterations,
            stop_threshold: b.stop_threshold,
            hand_correct: b.hand_correct,
            drop_gapped: b.drop_gapped,
        };
        cfg.validate().map_err(|e| CliError::usage(format!("bootstrap configuration: {e}")))?;
        Ok(cfg)
    }
}
