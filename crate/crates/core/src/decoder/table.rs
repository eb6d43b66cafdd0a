use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use super::SequenceScorer;
use crate::error::{Error, Result};
use crate::numeric::log_softmax;
use crate::scalar::Scalar;

/// Scorer backed by explicit per-prefix distributions; prefixes without a
/// row use the default distribution. Ignores the source.
#[derive(Debug, Clone)]
pub struct TableScorer<T> {
    vocab: Vec<String>,
    eos: usize,
    default: Vec<T>,
    rows: HashMap<Vec<usize>, Vec<T>>,
}

fn log_normalized<T: Scalar>(probs: &[T], n: usize) -> Result<Vec<T>> {
    if probs.len() != n {
        return Err(Error::invalid(format!("row has {} entries, vocabulary {n}", probs.len())));
    }
    if probs.iter().any(|&p| p <= T::zero() || !p.is_finite()) {
        return Err(Error::invalid("table probabilities must be positive and finite"));
    }
    let z: T = probs.iter().copied().sum();
    Ok(probs.iter().map(|&p| (p / z).ln()).collect())
}

impl<T: Scalar> TableScorer<T> {
    /// `default` holds unnormalized positive weights.
    pub fn new(vocab: Vec<String>, eos: usize, default: &[T]) -> Result<Self> {
        if eos >= vocab.len() {
            return Err(Error::invalid("EOS id outside the vocabulary"));
        }
        let default = log_normalized(default, vocab.len())?;
        Ok(Self {
            vocab,
            eos,
            default,
            rows: HashMap::new(),
        })
    }

    pub fn with_row(mut self, prefix: &[usize], probs: &[T]) -> Result<Self> {
        let row = log_normalized(probs, self.vocab.len())?;
        self.rows.insert(prefix.to_vec(), row);
        Ok(self)
    }
}

impl<T: Scalar> SequenceScorer<T> for TableScorer<T> {
    fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn eos(&self) -> usize {
        self.eos
    }

    fn next_logprobs(&self, _source: &[String], prefix: &[usize]) -> Result<Vec<T>> {
        Ok(self.rows.get(prefix).unwrap_or(&self.default).clone())
    }
}

/// Scorer whose logits are Gaussian with standard deviation `scale`, drawn
/// from a generator seeded by a digest of (seed, source, prefix). Token 0 is
/// EOS; the others are named `t1`, `t2`, ...
#[derive(Debug, Clone)]
pub struct RandomTableScorer {
    vocab: Vec<String>,
    seed: u64,
    scale: f64,
}

impl RandomTableScorer {
    pub fn new(vocab_size: usize, seed: u64, scale: f64) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::invalid("random scorer needs EOS plus at least one token"));
        }
        let vocab = std::iter::once("</s>".to_string())
            .chain((1..vocab_size).map(|i| format!("t{i}")))
            .collect();
        Ok(Self { vocab, seed, scale })
    }

    fn rng_for(&self, source: &[String], prefix: &[usize]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for s in source {
            h.update(s.as_bytes());
            h.update([0u8]);
        }
        h.update([0xffu8]);
        for &t in prefix {
            h.update((t as u64).to_le_bytes());
        }
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}

impl<T: Scalar> SequenceScorer<T> for RandomTableScorer {
    fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn eos(&self) -> usize {
        0
    }

    fn next_logprobs(&self, source: &[String], prefix: &[usize]) -> Result<Vec<T>> {
        let mut rng = self.rng_for(source, prefix);
        let logits: Vec<T> = (0..self.vocab.len())
            .map(|_| T::lit(self.scale * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Ok(log_softmax(&logits))
    }
}
