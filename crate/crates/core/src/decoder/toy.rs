use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SequenceScorer;
use crate::corpus::{write_file, AlignedPair};
use crate::error::{Error, Result};
use crate::ngram_lm::{EOS, UNK};
use crate::numeric::{log_softmax, Adam};
use crate::scalar::Scalar;
use crate::weighted_loss::{biased_cross_entropy, vocab_weights, ComplexityTable, VocabWeights};

const EOS_ID: usize = 0;
const UNK_ID: usize = 1;

/// `[</s>, <unk>, sorted tokens of both sides]`.
pub fn toy_vocab(pairs: &[AlignedPair]) -> Vec<String> {
    let mut words: Vec<String> = pairs
        .iter()
        .flat_map(|p| p.complex.iter().chain(&p.simple))
        .filter(|w| *w != EOS && *w != UNK)
        .cloned()
        .collect();
    words.sort_unstable();
    words.dedup();
    [EOS.to_string(), UNK.to_string()].into_iter().chain(words).collect()
}

/// Vocabulary weights with `</s>` and `<unk>` treated as function tokens.
pub fn toy_vocab_weights<T: Scalar>(
    vocab: &[String],
    table: &ComplexityTable<T>,
    alpha: T,
) -> Result<VocabWeights<T>> {
    let mut table = table.clone();
    table.insert(EOS, T::zero(), false);
    table.insert(UNK, T::zero(), false);
    vocab_weights(vocab, &table, alpha)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    #[default]
    Standard,
    Weighted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain mini-batch gradient descent.
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty `wd/2 * |params|^2` added to each mini-batch loss.
    pub weight_decay: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            hidden_dim: 32,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 8,
            weight_decay: 0.0,
            optimizer: Optimizer::Adam,
            seed: 1,
        }
    }
}

/// Conditional next-token model: the source is the mean of its token
/// embeddings, the decoder input is `[E(prev); source]`, followed by one
/// tanh layer and an output projection. Row `|V|` of the embedding table is
/// the begin-of-sequence input.
///
/// A scorer trained with the weighted loss keeps the log-weights as an
/// output bias, so inference uses the same reweighted distribution the loss
/// was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScorer<T> {
    vocab: Vec<String>,
    ids: HashMap<String, usize>,
    embed_dim: usize,
    hidden_dim: usize,
    params: Vec<T>,
    output_bias: Option<Vec<T>>,
    epoch_losses: Vec<T>,
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    len: usize,
}

struct Step<T> {
    x: Vec<T>,
    hidden: Vec<T>,
    logits: Vec<T>,
}

impl<T: Scalar> ToyScorer<T> {
    fn new(vocab: Vec<String>, embed_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let ids = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut s = Self {
            vocab,
            ids,
            embed_dim,
            hidden_dim,
            params: Vec::new(),
            output_bias: None,
            epoch_losses: Vec::new(),
        };
        let l = s.layout();
        let mut params = vec![T::zero(); l.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut params[..l.w1] {
            *p = T::lit(rng.random_range(-0.5..0.5));
        }
        let bound = 1.0 / ((2 * embed_dim) as f64).sqrt();
        for p in &mut params[l.w1..l.b1] {
            *p = T::lit(rng.random_range(-bound..bound));
        }
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        for p in &mut params[l.w2..l.b2] {
            *p = T::lit(rng.random_range(-bound..bound));
        }
        s.params = params;
        s
    }

    fn layout(&self) -> Layout {
        let v = self.vocab.len();
        let (d, h) = (self.embed_dim, self.hidden_dim);
        let w1 = (v + 1) * d;
        let b1 = w1 + h * 2 * d;
        let w2 = b1 + h;
        let b2 = w2 + v * h;
        Layout {
            w1,
            b1,
            w2,
            b2,
            len: b2 + v,
        }
    }

    fn bos(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Mean training loss per target token, one entry per epoch.
    pub fn epoch_losses(&self) -> &[T] {
        &self.epoch_losses
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    fn embedding(&self, row: usize) -> &[T] {
        let d = self.embed_dim;
        &self.params[row * d..(row + 1) * d]
    }

    fn source_vector(&self, src: &[usize]) -> Vec<T> {
        let mut v = vec![T::zero(); self.embed_dim];
        if src.is_empty() {
            return v;
        }
        for &s in src {
            for (a, &e) in v.iter_mut().zip(self.embedding(s)) {
                *a = *a + e;
            }
        }
        let n = T::from_usize_lossy(src.len());
        v.iter_mut().for_each(|a| *a = *a / n);
        v
    }

    fn step(&self, source_vec: &[T], prev: usize) -> Step<T> {
        let l = self.layout();
        let (d, h, v) = (self.embed_dim, self.hidden_dim, self.vocab.len());
        let mut x = Vec::with_capacity(2 * d);
        x.extend_from_slice(self.embedding(prev));
        x.extend_from_slice(source_vec);
        let hidden: Vec<T> = (0..h)
            .map(|i| {
                let row = &self.params[l.w1 + i * 2 * d..l.w1 + (i + 1) * 2 * d];
                let s: T = row.iter().zip(&x).map(|(&w, &xi)| w * xi).sum();
                (s + self.params[l.b1 + i]).tanh()
            })
            .collect();
        let logits: Vec<T> = (0..v)
            .map(|k| {
                let row = &self.params[l.w2 + k * h..l.w2 + (k + 1) * h];
                let s: T = row.iter().zip(&hidden).map(|(&w, &hi)| w * hi).sum();
                s + self.params[l.b2 + k]
            })
            .collect();
        Step { x, hidden, logits }
    }

    /// Adds the gradient of one pair's summed loss to `grad`; returns the
    /// summed loss and the number of predicted tokens.
    fn accumulate(&self, src: &[usize], tgt: &[usize], bias: Option<&[T]>, grad: &mut [T]) -> (T, usize) {
        let l = self.layout();
        let (d, h, v) = (self.embed_dim, self.hidden_dim, self.vocab.len());
        let sv = self.source_vector(src);
        let mut total = T::zero();
        let mut prev = self.bos();
        for &target in tgt {
            let st = self.step(&sv, prev);
            let r = biased_cross_entropy(&st.logits, bias, target);
            total = total + r.loss;
            let dz = r.gradient_wrt_logits;
            let mut dh = vec![T::zero(); h];
            for k in 0..v {
                grad[l.b2 + k] = grad[l.b2 + k] + dz[k];
                for i in 0..h {
                    grad[l.w2 + k * h + i] = grad[l.w2 + k * h + i] + dz[k] * st.hidden[i];
                    dh[i] = dh[i] + dz[k] * self.params[l.w2 + k * h + i];
                }
            }
            let mut dx = vec![T::zero(); 2 * d];
            for i in 0..h {
                let dpre = dh[i] * (T::one() - st.hidden[i] * st.hidden[i]);
                grad[l.b1 + i] = grad[l.b1 + i] + dpre;
                for j in 0..2 * d {
                    grad[l.w1 + i * 2 * d + j] = grad[l.w1 + i * 2 * d + j] + dpre * st.x[j];
                    dx[j] = dx[j] + dpre * self.params[l.w1 + i * 2 * d + j];
                }
            }
            for j in 0..d {
                grad[prev * d + j] = grad[prev * d + j] + dx[j];
            }
            if !src.is_empty() {
                let n = T::from_usize_lossy(src.len());
                for &s in src {
                    for j in 0..d {
                        grad[s * d + j] = grad[s * d + j] + dx[d + j] / n;
                    }
                }
            }
            prev = target;
        }
        (total, tgt.len())
    }

    /// Saves as JSON; values are written in shortest round-trip form.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ToyScorerFile {
            format: "toy-scorer v1".into(),
            vocab: self.vocab.clone(),
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            params: self.params.iter().map(|p| p.as_f64()).collect(),
            output_bias: self.output_bias.as_ref().map(|b| b.iter().map(|x| x.as_f64()).collect()),
        };
        write_file(path, &serde_json::to_string(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ToyScorerFile = serde_json::from_str(&text)?;
        if file.format != "toy-scorer v1" {
            return Err(Error::parse(path, 1, format!("unknown format `{}`", file.format)));
        }
        let mut s = Self::new(file.vocab, file.embed_dim, file.hidden_dim, 0);
        if file.params.len() != s.params.len()
            || file.output_bias.as_ref().is_some_and(|b| b.len() != s.vocab.len())
        {
            return Err(Error::parse(path, 1, "parameter count does not match dimensions"));
        }
        s.params = file.params.into_iter().map(T::lit).collect();
        s.output_bias = file.output_bias.map(|b| b.into_iter().map(T::lit).collect());
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct ToyScorerFile {
    format: String,
    vocab: Vec<String>,
    embed_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
    output_bias: Option<Vec<f64>>,
}

impl<T: Scalar> SequenceScorer<T> for ToyScorer<T> {
    fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn eos(&self) -> usize {
        EOS_ID
    }

    fn next_logprobs(&self, source: &[String], prefix: &[usize]) -> Result<Vec<T>> {
        let src: Vec<usize> = source.iter().map(|w| self.id(w)).collect();
        let prev = prefix.last().copied().unwrap_or(self.bos());
        if prev > self.vocab.len() {
            return Err(Error::invalid(format!("token id {prev} outside the vocabulary")));
        }
        let mut z = self.step(&self.source_vector(&src), prev).logits;
        if let Some(b) = &self.output_bias {
            z.iter_mut().zip(b).for_each(|(zi, &bi)| *zi = *zi + bi);
        }
        Ok(log_softmax(&z))
    }
}

/// Trains on `complex -> simple` pairs by mini-batch Adam. The output
/// vocabulary is [`toy_vocab`] of the pairs; in weighted mode `weights` must
/// be defined over exactly that vocabulary.
pub fn train_toy_scorer<T: Scalar>(
    pairs: &[AlignedPair],
    mode: LossMode,
    weights: Option<&VocabWeights<T>>,
    config: &ToyConfig,
) -> Result<ToyScorer<T>> {
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    if config.embed_dim == 0 || config.hidden_dim == 0 {
        return Err(Error::invalid("toy scorer dimensions must be positive"));
    }
    let vocab = toy_vocab(pairs);
    let bias = match mode {
        LossMode::Standard => None,
        LossMode::Weighted => {
            let w = weights.ok_or_else(|| Error::invalid("weighted loss needs vocabulary weights"))?;
            if w.vocab != vocab {
                return Err(Error::invalid("weights are not defined over the scorer vocabulary"));
            }
            Some(w.log_weights.clone())
        }
    };
    let mut model = ToyScorer::new(vocab, config.embed_dim, config.hidden_dim, config.seed);
    let data: Vec<(Vec<usize>, Vec<usize>)> = pairs
        .iter()
        .map(|p| {
            let src = p.complex.iter().map(|w| model.id(w)).collect();
            let tgt = p.simple.iter().map(|w| model.id(w)).chain([EOS_ID]).collect();
            (src, tgt)
        })
        .collect();

    let mut adam = Adam::new(model.params.len(), T::lit(config.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![T::zero(); model.params.len()];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_tokens) = (T::zero(), 0usize);
        for chunk in order.chunks(config.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let (mut loss, mut tokens) = (T::zero(), 0usize);
            for &i in chunk {
                let (l, n) = model.accumulate(&data[i].0, &data[i].1, bias.as_deref(), &mut grad);
                loss = loss + l;
                tokens += n;
            }
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("toy scorer loss became {loss} in epoch {epoch}")));
            }
            let n = T::from_usize_lossy(tokens);
            let wd = T::lit(config.weight_decay);
            for (g, &p) in grad.iter_mut().zip(&model.params) {
                *g = *g / n + wd * p;
            }
            match config.optimizer {
                Optimizer::Adam => adam.update(&mut model.params, &grad),
                Optimizer::Sgd => {
                    let lr = T::lit(config.learning_rate);
                    for (p, &g) in model.params.iter_mut().zip(&grad) {
                        *p = *p - lr * g;
                    }
                }
            }
            epoch_loss = epoch_loss + loss;
            epoch_tokens += tokens;
        }
        model.epoch_losses.push(epoch_loss / T::from_usize_lossy(epoch_tokens));
    }
    model.output_bias = bias;
    Ok(model)
}
