//! Flat JSON configuration with dotted section keys, e.g.
//! `{"paths.corpus": "corpus.tsv", "decode.beam": 100}`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::candidates::RerankWeights;
use crate::complexity::CnnConfig;
use crate::corpus::DescentPolicy;
use crate::decoder::{LossMode, Optimizer, PenaltyMode, ToyConfig};
use crate::error::{Error, Result};

use super::variants::VariantSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub corpus: PathBuf,
    pub pairs: PathBuf,
    pub embeddings: PathBuf,
    /// One sentence per line; defaults to the leveled corpus sentences.
    pub lm_corpus: Option<PathBuf>,
    pub scorer_standard: Option<PathBuf>,
    pub scorer_weighted: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub beam: usize,
    pub delta: f64,
    pub max_len: usize,
    pub penalty: PenaltyMode,
    pub clusters: usize,
    pub cluster_max_iters: usize,
    pub weights: RerankWeights,
    pub alpha: f64,
    pub loss_mode: LossMode,
    pub lexicon_policy: DescentPolicy,
    pub ridge_lambda: f64,
    pub lm_order: usize,
    pub sentence_model: CnnConfig,
    pub sentence_max_examples: usize,
    pub scorer: ToyConfig,
    pub split: (f64, f64, f64),
    pub variants: Vec<VariantSpec>,
    /// Path values exactly as written, for the run manifest.
    raw_paths: BTreeMap<String, String>,
}

const PATH_KEYS: [&str; 7] = [
    "paths.corpus",
    "paths.pairs",
    "paths.embeddings",
    "paths.lm_corpus",
    "paths.scorer_standard",
    "paths.scorer_weighted",
    "paths.out",
];

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::config(key, msg)
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad(key, "expected a number"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| bad(key, "expected a non-negative integer"))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, "expected a string"))
}

fn as_enum<T: serde::de::DeserializeOwned>(key: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| bad(key, e.to_string()))
}

fn as_f64_list(key: &str, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| bad(key, "expected an array of numbers"))?
        .iter()
        .map(|x| as_f64(key, x))
        .collect()
}

fn weights_from_value(key: &str, v: &Value) -> Result<RerankWeights> {
    let parsed = match v {
        Value::String(s) => s.parse::<RerankWeights>(),
        Value::Array(_) => match as_f64_list(key, v)?[..] {
            [f, a, s] => RerankWeights::new(f, a, s),
            _ => return Err(bad(key, "expected three betas [f, a, s]")),
        },
        _ => return Err(bad(key, "expected \"fas\", \"fa\" or [f, a, s]")),
    };
    parsed.map_err(|e| bad(key, e.to_string()))
}

impl PipelineConfig {
    /// Defaults with the given input paths; the output directory is `out`.
    pub fn with_paths(corpus: impl Into<PathBuf>, pairs: impl Into<PathBuf>, embeddings: impl Into<PathBuf>) -> Self {
        let paths = Paths {
            corpus: corpus.into(),
            pairs: pairs.into(),
            embeddings: embeddings.into(),
            lm_corpus: None,
            scorer_standard: None,
            scorer_weighted: None,
            out: PathBuf::from("out"),
        };
        let mut raw_paths = BTreeMap::new();
        raw_paths.insert("paths.corpus".into(), paths.corpus.display().to_string());
        raw_paths.insert("paths.pairs".into(), paths.pairs.display().to_string());
        raw_paths.insert("paths.embeddings".into(), paths.embeddings.display().to_string());
        Self {
            seed: 1,
            paths,
            beam: 100,
            delta: 1.0,
            max_len: 30,
            penalty: PenaltyMode::Accumulate,
            clusters: 20,
            cluster_max_iters: 100,
            weights: RerankWeights::FAS,
            alpha: 2.0,
            loss_mode: LossMode::Weighted,
            lexicon_policy: DescentPolicy::StopOnFailure,
            ridge_lambda: 1.0,
            lm_order: 5,
            sentence_model: CnnConfig {
                epochs: 10,
                ..CnnConfig::default()
            },
            sentence_max_examples: 2000,
            scorer: ToyConfig {
                epochs: 30,
                ..ToyConfig::default()
            },
            split: (0.8, 0.1, 0.1),
            variants: VariantSpec::all_named(),
            raw_paths,
        }
    }

    /// Parses JSON text; relative paths are resolved against `base`.
    pub fn from_json_str(text: &str, base: &Path) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| bad("<file>", e.to_string()))?;
        let map = value.as_object().ok_or_else(|| bad("<file>", "expected a JSON object"))?;
        for required in ["paths.corpus", "paths.pairs", "paths.embeddings"] {
            if !map.contains_key(required) {
                return Err(bad(required, "missing required key"));
            }
        }
        let mut cfg = Self::with_paths("", "", "");
        cfg.raw_paths.clear();
        for (key, v) in map {
            cfg.set(key, v, base)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &Value, base: &Path) -> Result<()> {
        let resolve = |v: &Value| -> Result<PathBuf> {
            let p = PathBuf::from(as_str(key, v)?);
            Ok(if p.is_absolute() { p } else { base.join(p) })
        };
        if PATH_KEYS.contains(&key) {
            self.raw_paths.insert(key.to_string(), as_str(key, v)?.to_string());
        }
        match key {
            "seed" => self.seed = v.as_u64().ok_or_else(|| bad(key, "expected a non-negative integer"))?,
            "paths.corpus" => self.paths.corpus = resolve(v)?,
            "paths.pairs" => self.paths.pairs = resolve(v)?,
            "paths.embeddings" => self.paths.embeddings = resolve(v)?,
            "paths.lm_corpus" => self.paths.lm_corpus = Some(resolve(v)?),
            "paths.scorer_standard" => self.paths.scorer_standard = Some(resolve(v)?),
            "paths.scorer_weighted" => self.paths.scorer_weighted = Some(resolve(v)?),
            "paths.out" => self.paths.out = resolve(v)?,
            "decode.beam" => self.beam = as_usize(key, v)?,
            "decode.delta" => self.delta = as_f64(key, v)?,
            "decode.max_len" => self.max_len = as_usize(key, v)?,
            "decode.penalty" => self.penalty = as_enum(key, v)?,
            "cluster.k" => self.clusters = as_usize(key, v)?,
            "cluster.max_iters" => self.cluster_max_iters = as_usize(key, v)?,
            "rerank.weights" => self.weights = weights_from_value(key, v)?,
            "loss.alpha" => self.alpha = as_f64(key, v)?,
            "loss.mode" => self.loss_mode = as_enum(key, v)?,
            "lexicon.policy" => self.lexicon_policy = as_enum(key, v)?,
            "word_model.lambda" => self.ridge_lambda = as_f64(key, v)?,
            "lm.order" => self.lm_order = as_usize(key, v)?,
            "sentence_model.filters" => self.sentence_model.filters_per_width = as_usize(key, v)?,
            "sentence_model.widths" => {
                self.sentence_model.widths = v
                    .as_array()
                    .ok_or_else(|| bad(key, "expected an array of widths"))?
                    .iter()
                    .map(|x| as_usize(key, x))
                    .collect::<Result<_>>()?
            }
            "sentence_model.epochs" => self.sentence_model.epochs = as_usize(key, v)?,
            "sentence_model.learning_rate" => self.sentence_model.learning_rate = as_f64(key, v)?,
            "sentence_model.batch_size" => self.sentence_model.batch_size = as_usize(key, v)?,
            "sentence_model.max_examples" => self.sentence_max_examples = as_usize(key, v)?,
            "scorer.embed_dim" => self.scorer.embed_dim = as_usize(key, v)?,
            "scorer.hidden_dim" => self.scorer.hidden_dim = as_usize(key, v)?,
            "scorer.learning_rate" => self.scorer.learning_rate = as_f64(key, v)?,
            "scorer.epochs" => self.scorer.epochs = as_usize(key, v)?,
            "scorer.batch_size" => self.scorer.batch_size = as_usize(key, v)?,
            "scorer.weight_decay" => self.scorer.weight_decay = as_f64(key, v)?,
            "scorer.optimizer" => self.scorer.optimizer = as_enum::<Optimizer>(key, v)?,
            "split.ratios" => match as_f64_list(key, v)?[..] {
                [a, b, c] => self.split = (a, b, c),
                _ => return Err(bad(key, "expected [train, validation, test]")),
            },
            "variants" => {
                self.variants = v
                    .as_array()
                    .ok_or_else(|| bad(key, "expected an array of variant names"))?
                    .iter()
                    .map(|x| {
                        let name = as_str(key, x)?;
                        VariantSpec::named(name).ok_or_else(|| bad(key, format!("unknown variant `{name}`")))
                    })
                    .collect::<Result<_>>()?
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Sentence model settings with the run seed.
    pub fn sentence_config(&self) -> CnnConfig {
        CnnConfig {
            seed: self.seed,
            ..self.sentence_model.clone()
        }
    }

    /// Scorer settings with the run seed.
    pub fn scorer_config(&self) -> ToyConfig {
        ToyConfig {
            seed: self.seed,
            ..self.scorer.clone()
        }
    }

    /// Pre-trained scorer to load instead of training, if configured.
    pub fn scorer_dump(&self, mode: LossMode) -> Option<&Path> {
        match mode {
            LossMode::Standard => self.paths.scorer_standard.as_deref(),
            LossMode::Weighted => self.paths.scorer_weighted.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters < 1 {
            return Err(bad("cluster.k", "must be at least 1"));
        }
        if self.beam < self.clusters {
            return Err(bad("decode.beam", format!("beam {} is smaller than cluster.k {}", self.beam, self.clusters)));
        }
        if self.delta < 0.0 || !self.delta.is_finite() {
            return Err(bad("decode.delta", "must be finite and >= 0"));
        }
        if self.max_len == 0 {
            return Err(bad("decode.max_len", "must be at least 1"));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(bad("loss.alpha", "must be finite and >= 0"));
        }
        if self.ridge_lambda.is_nan() || self.ridge_lambda < 0.0 {
            return Err(bad("word_model.lambda", "must be >= 0"));
        }
        if self.lm_order == 0 {
            return Err(bad("lm.order", "must be at least 1"));
        }
        if self.cluster_max_iters == 0 {
            return Err(bad("cluster.max_iters", "must be at least 1"));
        }
        if self.sentence_model.epochs == 0 || self.sentence_max_examples < 10 {
            return Err(bad("sentence_model", "needs at least one epoch and 10 examples"));
        }
        if self.scorer.epochs == 0 || self.scorer.embed_dim == 0 || self.scorer.hidden_dim == 0 {
            return Err(bad("scorer", "epochs and dimensions must be positive"));
        }
        let (a, b, c) = self.split;
        if [a, b, c].iter().any(|r| r.is_nan() || *r < 0.0) || (a + b + c - 1.0).abs() > 1e-9 || c == 0.0 {
            return Err(bad("split.ratios", "ratios must be >= 0, sum to 1 and leave a test share"));
        }
        if self.variants.is_empty() {
            return Err(bad("variants", "at least one variant is required"));
        }
        let named = [
            ("paths.corpus", Some(&self.paths.corpus)),
            ("paths.pairs", Some(&self.paths.pairs)),
            ("paths.embeddings", Some(&self.paths.embeddings)),
            ("paths.lm_corpus", self.paths.lm_corpus.as_ref()),
            ("paths.scorer_standard", self.paths.scorer_standard.as_ref()),
            ("paths.scorer_weighted", self.paths.scorer_weighted.as_ref()),
        ];
        for (key, path) in named {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(bad(key, format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Every setting by dotted key; paths as written, output directory
    /// omitted since it does not influence results.
    pub fn snapshot(&self) -> BTreeMap<String, Value> {
        let mut m: BTreeMap<String, Value> = BTreeMap::new();
        for (k, v) in &self.raw_paths {
            if k != "paths.out" {
                m.insert(k.clone(), json!(v));
            }
        }
        let w = &self.weights;
        let entries = [
            ("seed", json!(self.seed)),
            ("decode.beam", json!(self.beam)),
            ("decode.delta", json!(self.delta)),
            ("decode.max_len", json!(self.max_len)),
            ("decode.penalty", json!(self.penalty)),
            ("cluster.k", json!(self.clusters)),
            ("cluster.max_iters", json!(self.cluster_max_iters)),
            ("rerank.weights", json!([w.beta_f, w.beta_a, w.beta_s])),
            ("loss.alpha", json!(self.alpha)),
            ("loss.mode", json!(self.loss_mode)),
            ("lexicon.policy", json!(self.lexicon_policy)),
            ("word_model.lambda", json!(self.ridge_lambda)),
            ("lm.order", json!(self.lm_order)),
            ("sentence_model.filters", json!(self.sentence_model.filters_per_width)),
            ("sentence_model.widths", json!(self.sentence_model.widths)),
            ("sentence_model.epochs", json!(self.sentence_model.epochs)),
            ("sentence_model.learning_rate", json!(self.sentence_model.learning_rate)),
            ("sentence_model.batch_size", json!(self.sentence_model.batch_size)),
            ("sentence_model.max_examples", json!(self.sentence_max_examples)),
            ("scorer.embed_dim", json!(self.scorer.embed_dim)),
            ("scorer.hidden_dim", json!(self.scorer.hidden_dim)),
            ("scorer.learning_rate", json!(self.scorer.learning_rate)),
            ("scorer.epochs", json!(self.scorer.epochs)),
            ("scorer.batch_size", json!(self.scorer.batch_size)),
            ("scorer.weight_decay", json!(self.scorer.weight_decay)),
            ("scorer.optimizer", json!(self.scorer.optimizer)),
            ("split.ratios", json!([self.split.0, self.split.1, self.split.2])),
            ("variants", json!(self.variants.iter().map(|v| v.name.clone()).collect::<Vec<_>>())),
        ];
        for (k, v) in entries {
            m.insert(k.to_string(), v);
        }
        m
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| bad(&path.display().to_string(), e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    PipelineConfig::from_json_str(&text, base)
}
