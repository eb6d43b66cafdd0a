//! Complexity-weighted cross-entropy.
//!
//! Every vocabulary entry gets a weight `w_v = (4 - s_v) + 1` if it is a
//! content word with predicted complexity `s_v`, and `1` otherwise. Weights
//! are normalized to sum to one and raised to `alpha`. The model distribution
//! is multiplied elementwise by these weights and renormalized, and the loss
//! is the negative log of the target's reweighted probability.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complexity::MAX_COMPLEXITY;
use crate::corpus::{is_content, write_file};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, softmax};
use crate::scalar::{fmt_exact, Scalar};

/// Predicted complexity and content-word flag per token.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexityTable<T> {
    entries: HashMap<String, (T, bool)>,
}

impl<T: Scalar> ComplexityTable<T> {
    pub fn new() -> Self {
        Self {
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, score: T, is_content: bool) {
        self.entries.insert(token.into(), (score, is_content));
    }

    /// Builds a table classifying tokens with the shipped content-word rule.
    pub fn from_scores<I, S>(scores: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        let mut t = Self::new();
        for (tok, s) in scores {
            let tok = tok.into();
            let content = is_content(&tok);
            t.insert(tok, s, content);
        }
        t
    }

    pub fn get(&self, token: &str) -> Option<(T, bool)> {
        self.entries.get(token).copied()
    }

    pub fn score(&self, token: &str) -> Option<T> {
        self.entries.get(token).map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabWeights<T> {
    pub vocab: Vec<String>,
    /// `w_v` before normalization, in `[1, 5]`.
    pub raw: Vec<T>,
    /// `(w_v / Σw)^alpha`.
    pub normalized_pow: Vec<T>,
    /// `alpha * ln(w_v / Σw)`, exactly zero when `alpha == 0`.
    pub log_weights: Vec<T>,
    pub alpha: T,
}

pub fn vocab_weights<T: Scalar>(
    vocab: &[String],
    table: &ComplexityTable<T>,
    alpha: T,
) -> Result<VocabWeights<T>> {
    if alpha < T::zero() || !alpha.is_finite() {
        return Err(Error::invalid("alpha must be finite and >= 0"));
    }
    if vocab.is_empty() {
        return Err(Error::invalid("empty vocabulary"));
    }
    let top = T::lit(MAX_COMPLEXITY);
    let mut raw = Vec::with_capacity(vocab.len());
    for tok in vocab {
        let (score, content) = table
            .get(tok)
            .ok_or_else(|| Error::MissingVocab(tok.clone()))?;
        raw.push(if content {
            let s = score.max(T::zero()).min(top);
            (top - s) + T::one()
        } else {
            T::one()
        });
    }
    let total: T = raw.iter().copied().sum();
    let (normalized_pow, log_weights) = if alpha == T::zero() {
        (vec![T::one(); raw.len()], vec![T::zero(); raw.len()])
    } else {
        let logs: Vec<T> = raw.iter().map(|&r| alpha * (r / total).ln()).collect();
        (logs.iter().map(|l| l.exp()).collect(), logs)
    };
    Ok(VocabWeights {
        vocab: vocab.to_vec(),
        raw,
        normalized_pow,
        log_weights,
        alpha,
    })
}

impl<T: Scalar> VocabWeights<T> {
    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Writes `token<TAB>raw_weight<TAB>final_weight`.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.vocab.len() {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                self.vocab[i],
                fmt_exact(self.raw[i]),
                fmt_exact(self.normalized_pow[i])
            ));
        }
        write_file(path, &out)
    }
}

/// Multiplies a distribution by the vocabulary weights and renormalizes.
pub fn reweight_distribution<T: Scalar>(probs: &[T], weights: &VocabWeights<T>) -> Result<Vec<T>> {
    if probs.len() != weights.len() {
        return Err(Error::invalid(format!(
            "distribution over {} entries, weights over {}",
            probs.len(),
            weights.len()
        )));
    }
    if probs.iter().any(|&p| p < T::zero() || !p.is_finite()) {
        return Err(Error::invalid("probabilities must be finite and non-negative"));
    }
    let sum: T = probs.iter().copied().sum();
    if (sum - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
    }
    if weights.alpha == T::zero() {
        return Ok(probs.to_vec());
    }
    // rescale by the largest weight so tiny normalized weights cannot underflow
    let max_log = weights
        .log_weights
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let scaled: Vec<T> = probs
        .iter()
        .zip(&weights.log_weights)
        .map(|(&p, &l)| p * (l - max_log).exp())
        .collect();
    let z: T = scaled.iter().copied().sum();
    if z.is_nan() || z <= T::zero() {
        return Err(Error::Numeric("reweighted distribution has zero mass".into()));
    }
    Ok(scaled.into_iter().map(|v| v / z).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult<T> {
    pub loss: T,
    pub gradient_wrt_logits: Vec<T>,
}

/// Whether the reweighted distribution is renormalized before the log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceNormalization {
    #[default]
    Renormalized,
    Unnormalized,
}

/// Softmax cross-entropy on `logits + bias`; `None` is plain cross-entropy.
pub(crate) fn biased_cross_entropy<T: Scalar>(logits: &[T], bias: Option<&[T]>, target: usize) -> LossResult<T> {
    let shifted: Vec<T> = match bias {
        Some(b) => logits.iter().zip(b).map(|(&z, &l)| z + l).collect(),
        None => logits.to_vec(),
    };
    let lse = log_sum_exp(&shifted);
    let mut grad = softmax(&shifted);
    grad[target] = grad[target] - T::one();
    LossResult {
        loss: lse - shifted[target],
        gradient_wrt_logits: grad,
    }
}

pub fn cross_entropy<T: Scalar>(logits: &[T], target: usize) -> Result<LossResult<T>> {
    check_logits(logits, target)?;
    Ok(biased_cross_entropy(logits, None, target))
}

/// Weighted loss and its analytic gradient.
///
/// Renormalized: the reweighted distribution is `softmax(z + ln w)`, so the
/// gradient is `softmax(z + ln w) - onehot(target)`. Unnormalized: the loss is
/// `-ln(p_t w_t)` with gradient `softmax(z) - onehot(target)`.
pub fn weighted_cross_entropy<T: Scalar>(
    logits: &[T],
    target: usize,
    weights: &VocabWeights<T>,
    normalization: SceNormalization,
) -> Result<LossResult<T>> {
    check_logits(logits, target)?;
    if logits.len() != weights.len() {
        return Err(Error::invalid("logits and weights differ in length"));
    }
    Ok(match normalization {
        SceNormalization::Renormalized => biased_cross_entropy(logits, Some(&weights.log_weights), target),
        SceNormalization::Unnormalized => {
            let mut r = biased_cross_entropy(logits, None, target);
            r.loss = r.loss - weights.log_weights[target];
            r
        }
    })
}

fn check_logits<T: Scalar>(logits: &[T], target: usize) -> Result<()> {
    if target >= logits.len() {
        return Err(Error::invalid(format!("target {target} outside vocabulary of {}", logits.len())));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric("non-finite logit".into()));
    }
    Ok(())
}
