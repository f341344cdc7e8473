use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classifier::{EncoderConfig, TrainParams};
use crate::error::{Error, Result};
use crate::llm::{GenerationParams, RetryPolicy};
use crate::preprocess::PreprocessConfig;
use crate::retrieval::PathLimits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankerKind {
    Lexical,
    Remote,
}

/// Every tunable of the engine. Loaded from flat TOML; missing keys take
/// the defaults below and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Triples file used when no graph is given on the command line.
    pub kg: Option<PathBuf>,
    /// Classifier file used when no model is given on the command line.
    pub model: Option<PathBuf>,

    /// Queries whose minimum hop count is at most `delta` are simple.
    pub delta: usize,
    pub k_simple: usize,
    pub k_complex: usize,
    pub n: usize,
    pub m: usize,
    pub u: usize,
    pub alpha: f64,
    pub max_iter: usize,
    pub epsilon: f64,

    /// Fraction of a run whose LLM feedback adapts the classifier.
    pub ratio: f64,
    pub feedback: bool,

    /// BFS hop cap; defaults to the active pipeline's `k`.
    pub max_path_hops: Option<usize>,
    pub max_paths: usize,

    pub ranker: RankerKind,
    pub ranker_endpoint: Option<String>,
    pub ranker_timeout_ms: u64,

    pub llm_endpoint: String,
    pub llm_model: String,
    /// Name of the environment variable holding the API key.
    pub llm_api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub llm_max_retries: u32,
    pub llm_retry_delay_ms: u64,
    pub llm_timeout_ms: u64,
    pub llm_max_in_flight: usize,
    pub system_prompt: Option<String>,

    pub seed: u64,
    /// Query workers; 0 means one per core.
    pub workers: usize,

    pub encoder_dim: usize,
    pub encoder_ngram: usize,
    pub train_learning_rate: f64,
    pub train_epochs: usize,
    pub train_batch_size: Option<usize>,
    pub adapt_learning_rate: f64,
    pub adapt_epochs: usize,
    pub adapt_batch_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pre = PreprocessConfig::default();
        let gen = GenerationParams::default();
        let enc = EncoderConfig::default();
        let train = TrainParams::default();
        let adapt = TrainParams::adaptation();
        let retry = RetryPolicy::default();
        Self {
            kg: None,
            model: None,
            delta: 2,
            k_simple: pre.k_simple,
            k_complex: pre.k_complex,
            n: pre.n,
            m: pre.m,
            u: 32,
            alpha: pre.alpha,
            max_iter: pre.max_iter,
            epsilon: pre.epsilon,
            ratio: 0.25,
            feedback: false,
            max_path_hops: None,
            max_paths: 10_000,
            ranker: RankerKind::Lexical,
            ranker_endpoint: None,
            ranker_timeout_ms: 2_000,
            llm_endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            llm_model: gen.model,
            llm_api_key_env: "OPENAI_API_KEY".to_string(),
            temperature: gen.temperature,
            max_tokens: gen.max_tokens,
            llm_max_retries: retry.max_retries,
            llm_retry_delay_ms: retry.base_delay.as_millis() as u64,
            llm_timeout_ms: 60_000,
            llm_max_in_flight: 4,
            system_prompt: None,
            seed: train.seed,
            workers: 1,
            encoder_dim: enc.dim,
            encoder_ngram: enc.ngram,
            train_learning_rate: train.learning_rate,
            train_epochs: train.epochs,
            train_batch_size: train.batch_size,
            adapt_learning_rate: adapt.learning_rate,
            adapt_epochs: adapt.epochs,
            adapt_batch_size: adapt.batch_size.unwrap_or(16),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative file keys are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for slot in [&mut cfg.kg, &mut cfg.model] {
            if let Some(p) = slot.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess().validate()?;
        self.encoder().validate()?;
        self.train_params().validate()?;
        self.adapt_params().validate()?;
        if self.u == 0 {
            return Err(Error::Config("u must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::Config(format!(
                "ratio must be in [0, 1], got {}",
                self.ratio
            )));
        }
        if self.max_path_hops == Some(0) {
            return Err(Error::Config("max_path_hops must be positive".into()));
        }
        if self.ranker == RankerKind::Remote && self.ranker_endpoint.is_none() {
            return Err(Error::Config(
                "ranker = \"remote\" needs ranker_endpoint".into(),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be non-negative".into()));
        }
        Ok(())
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            k_simple: self.k_simple,
            k_complex: self.k_complex,
            n: self.n,
            m: self.m,
            alpha: self.alpha,
            max_iter: self.max_iter,
            epsilon: self.epsilon,
        }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            dim: self.encoder_dim,
            ngram: self.encoder_ngram,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            learning_rate: self.train_learning_rate,
            epochs: self.train_epochs,
            batch_size: self.train_batch_size,
            l2: 0.0,
            seed: self.seed,
        }
    }

    pub fn adapt_params(&self) -> TrainParams {
        TrainParams {
            learning_rate: self.adapt_learning_rate,
            epochs: self.adapt_epochs,
            batch_size: Some(self.adapt_batch_size),
            l2: 0.0,
            seed: self.seed,
        }
    }

    pub fn generation(&self) -> GenerationParams {
        GenerationParams {
            model: self.llm_model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            system_prompt: self.system_prompt.clone(),
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.llm_max_retries,
            base_delay: Duration::from_millis(self.llm_retry_delay_ms),
            ..RetryPolicy::default()
        }
    }

    pub fn path_limits(&self, k: usize) -> PathLimits {
        PathLimits {
            max_hops: self.max_path_hops.unwrap_or(k),
            max_paths: self.max_paths,
        }
    }
}
