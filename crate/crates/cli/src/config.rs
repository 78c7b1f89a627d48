//! Run configuration: one declarative TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use ecr_cad::augment::{AugmentationPlan, DEFAULT_PER_ORIGINAL, DEFAULT_TOP_N};
use ecr_cad::llm::{DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_MAX_TOKENS, DEFAULT_MODEL, DEFAULT_CONCURRENCY};
use ecr_cad::metrics::LeaSingletons;
use ecr_cad::pairing::{PairingConfig, RetrievalScope, DEFAULT_K_INFER, DEFAULT_K_TRAIN, DEFAULT_WINDOW};
use ecr_cad::scorer::DEFAULT_BATCH_SIZE;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const DEFAULT_SEED: u64 = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub corpus: CorpusPaths,
    pub pairing: PairingSection,
    pub augment: AugmentSection,
    pub llm: LlmSection,
    pub scorer: ScorerSection,
    pub cluster: ClusterSection,
    pub metrics: MetricsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            cache_dir: None,
            corpus: CorpusPaths::default(),
            pairing: PairingSection::default(),
            augment: AugmentSection::default(),
            llm: LlmSection::default(),
            scorer: ScorerSection::default(),
            cluster: ClusterSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingSection {
    pub w: usize,
    pub k_train: usize,
    pub k_infer: usize,
    pub scope: RetrievalScope,
}

impl Default for PairingSection {
    fn default() -> Self {
        PairingSection {
            w: DEFAULT_WINDOW,
            k_train: DEFAULT_K_TRAIN,
            k_infer: DEFAULT_K_INFER,
            scope: RetrievalScope::WithinTopic,
        }
    }
}

impl PairingSection {
    pub fn to_pairing(&self) -> PairingConfig {
        PairingConfig {
            w: self.w,
            k_train: self.k_train,
            k_infer: self.k_infer,
            scope: self.scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub per_original: usize,
    pub top_n: usize,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection {
            per_original: DEFAULT_PER_ORIGINAL,
            top_n: DEFAULT_TOP_N,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlmProvider {
    /// Replay frozen responses keyed by prompt hash.
    Mock,
    /// Answer from human-authored transcripts matched by prompt content.
    Transcripts,
    /// A chat-completions endpoint over HTTPS.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub provider: LlmProvider,
    /// Fixture file for `mock` and `transcripts`.
    pub fixtures: Option<PathBuf>,
    pub model: String,
    pub temperature: f32,
    pub max_tokens: u32,
    pub concurrency: usize,
    pub endpoint: String,
    pub api_key_env: String,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            provider: LlmProvider::Mock,
            fixtures: None,
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            concurrency: DEFAULT_CONCURRENCY,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    /// `lemma` or the URL of an external scorer.
    pub scorer: String,
    pub batch_size: usize,
}

impl Default for ScorerSection {
    fn default() -> Self {
        ScorerSection {
            scorer: "lemma".to_string(),
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub threshold: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            threshold: ecr_cad::cluster::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub lea_singletons: LeaSingletons,
}

impl RunConfig {
    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn plan(&self) -> Result<AugmentationPlan, Failure> {
        AugmentationPlan::new(self.augment.per_original, self.augment.top_n, self.seed).map_err(|e| Failure::config(e.to_string()))
    }

    /// Checks value ranges; paths are checked by the stages that use them.
    pub fn validate(&self) -> Result<(), Failure> {
        if !(0.0..=1.0).contains(&self.cluster.threshold) {
            return Err(Failure::config(format!("cluster.threshold {} outside [0, 1]", self.cluster.threshold)));
        }
        if self.pairing.k_train == 0 || self.pairing.k_infer == 0 {
            return Err(Failure::config("pairing.k_train and pairing.k_infer must be at least 1"));
        }
        if self.scorer.batch_size == 0 {
            return Err(Failure::config("scorer.batch_size must be at least 1"));
        }
        self.plan()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
