//! Convolutional sentence-complexity regressor: parallel 1-D convolutions of
//! several widths over static word vectors, ReLU, max-over-time pooling and a
//! linear output head trained on mean squared error.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::clamp_complexity;
use super::SentenceComplexity;
use crate::corpus::{read_lines, write_file};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numeric::{dot, Adam};
use crate::scalar::{fmt_exact, parse_exact, Scalar};

/// Trailing padding token; stripped before the forward pass.
pub const PAD_TOKEN: &str = "<pad>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filters_per_width: usize,
    pub widths: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filters_per_width: 32,
            widths: vec![3, 4, 5],
            learning_rate: 0.003,
            epochs: 30,
            batch_size: 16,
            seed: 1,
        }
    }
}

/// A sentence as a zero-padded `rows x dim` row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSentence<T> {
    pub rows: usize,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceCnn<T> {
    dim: usize,
    widths: Vec<usize>,
    n_filters: usize,
    params: Vec<T>,
    final_loss: T,
}

struct Layout {
    filter_off: Vec<usize>,
    bias_off: Vec<usize>,
    head_w: usize,
    head_b: usize,
    len: usize,
}

impl<T: Scalar> SentenceCnn<T> {
    /// Randomly initialized model.
    pub fn new(dim: usize, widths: &[usize], n_filters: usize, seed: u64) -> Result<Self> {
        if dim == 0 || n_filters == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::invalid("CNN needs positive dimension, filter count and widths"));
        }
        let mut model = Self {
            dim,
            widths: widths.to_vec(),
            n_filters,
            params: Vec::new(),
            final_loss: T::nan(),
        };
        let layout = model.layout();
        let mut params = vec![T::zero(); layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (k, &w) in widths.iter().enumerate() {
            let bound = 1.0 / ((w * dim) as f64).sqrt();
            for p in &mut params[layout.filter_off[k]..layout.bias_off[k]] {
                *p = T::lit(rng.random_range(-bound..bound));
            }
            for p in &mut params[layout.bias_off[k]..layout.bias_off[k] + n_filters] {
                *p = T::lit(0.05);
            }
        }
        let bound = 1.0 / ((widths.len() * n_filters) as f64).sqrt();
        for p in &mut params[layout.head_w..layout.head_b] {
            *p = T::lit(rng.random_range(-bound..bound));
        }
        model.params = params;
        Ok(model)
    }

    fn layout(&self) -> Layout {
        let mut off = 0;
        let mut filter_off = Vec::new();
        let mut bias_off = Vec::new();
        for &w in &self.widths {
            filter_off.push(off);
            off += self.n_filters * w * self.dim;
            bias_off.push(off);
            off += self.n_filters;
        }
        let head_w = off;
        off += self.widths.len() * self.n_filters;
        Layout {
            filter_off,
            bias_off,
            head_w,
            head_b: off,
            len: off + 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn filters_per_width(&self) -> usize {
        self.n_filters
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Mean squared error over the training set after the last epoch.
    pub fn final_loss(&self) -> T {
        self.final_loss
    }

    /// `(name, start, end)` of each parameter tensor in the flat vector.
    pub fn param_tensors(&self) -> Vec<(String, usize, usize)> {
        let l = self.layout();
        let mut out = Vec::new();
        for (k, &w) in self.widths.iter().enumerate() {
            out.push((format!("conv{w}.weight"), l.filter_off[k], l.bias_off[k]));
            out.push((format!("conv{w}.bias"), l.bias_off[k], l.bias_off[k] + self.n_filters));
        }
        out.push(("head.weight".into(), l.head_w, l.head_b));
        out.push(("head.bias".into(), l.head_b, l.len));
        out
    }

    fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }

    /// Looks up word vectors (OOV -> zeros) after stripping trailing pads, and
    /// zero-pads to the widest filter.
    pub fn embed(&self, table: &EmbeddingTable<T>, tokens: &[String]) -> Result<EmbeddedSentence<T>> {
        if table.dim() != self.dim {
            return Err(Error::invalid(format!(
                "embedding dimension {} does not match model dimension {}",
                table.dim(),
                self.dim
            )));
        }
        let end = tokens.iter().rposition(|t| t != PAD_TOKEN).map_or(0, |i| i + 1);
        if end == 0 {
            return Err(Error::invalid("cannot score an empty sentence"));
        }
        let rows = end.max(self.max_width());
        let mut data = vec![T::zero(); rows * self.dim];
        for (i, tok) in tokens[..end].iter().enumerate() {
            if let Some(v) = table.get(tok) {
                data[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
            }
        }
        Ok(EmbeddedSentence { rows, data })
    }

    /// Unclamped output plus, per filter, the pooled position and its pre-activation.
    fn forward(&self, x: &EmbeddedSentence<T>, layout: &Layout) -> (T, Vec<(usize, T)>) {
        let d = self.dim;
        let mut out = self.params[layout.head_b];
        let mut pooled = Vec::with_capacity(self.widths.len() * self.n_filters);
        for (k, &w) in self.widths.iter().enumerate() {
            let positions = x.rows + 1 - w;
            for f in 0..self.n_filters {
                let base = layout.filter_off[k] + f * w * d;
                let filt = &self.params[base..base + w * d];
                let bias = self.params[layout.bias_off[k] + f];
                let mut best = (0usize, T::neg_infinity(), T::neg_infinity());
                for p in 0..positions {
                    let a = bias + dot(filt, &x.data[p * d..(p + w) * d]);
                    let h = a.max(T::zero());
                    if h > best.2 {
                        best = (p, a, h);
                    }
                }
                let idx = k * self.n_filters + f;
                out = out + self.params[layout.head_w + idx] * best.2;
                pooled.push((best.0, best.1));
            }
        }
        (out, pooled)
    }

    fn backward(
        &self,
        x: &EmbeddedSentence<T>,
        pooled: &[(usize, T)],
        g: T,
        layout: &Layout,
        grad: &mut [T],
    ) {
        let d = self.dim;
        grad[layout.head_b] = grad[layout.head_b] + g;
        for (k, &w) in self.widths.iter().enumerate() {
            for f in 0..self.n_filters {
                let idx = k * self.n_filters + f;
                let (p, a) = pooled[idx];
                if a <= T::zero() {
                    continue;
                }
                grad[layout.head_w + idx] = grad[layout.head_w + idx] + g * a;
                let gh = g * self.params[layout.head_w + idx];
                let bi = layout.bias_off[k] + f;
                grad[bi] = grad[bi] + gh;
                let base = layout.filter_off[k] + f * w * d;
                let window = &x.data[p * d..(p + w) * d];
                for (gw, &xv) in grad[base..base + w * d].iter_mut().zip(window) {
                    *gw = *gw + gh * xv;
                }
            }
        }
    }

    /// Unclamped regression output.
    pub fn forward_raw(&self, x: &EmbeddedSentence<T>) -> T {
        self.forward(x, &self.layout()).0
    }

    /// Mean squared error over a batch and its gradient w.r.t. all parameters.
    pub fn batch_loss_and_grad(&self, inputs: &[&EmbeddedSentence<T>], targets: &[T]) -> (T, Vec<T>) {
        let layout = self.layout();
        let mut grad = vec![T::zero(); layout.len];
        let n = T::from_usize_lossy(inputs.len().max(1));
        let mut loss = T::zero();
        for (x, &y) in inputs.iter().zip(targets) {
            let (out, pooled) = self.forward(x, &layout);
            let err = out - y;
            loss = loss + err * err;
            self.backward(x, &pooled, T::lit(2.0) * err / n, &layout, &mut grad);
        }
        (loss / n, grad)
    }

    /// Clamped prediction in `[0, 4]`.
    pub fn predict(&self, table: &EmbeddingTable<T>, tokens: &[String]) -> Result<T> {
        let x = self.embed(table, tokens)?;
        Ok(clamp_complexity(self.forward_raw(&x)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let widths: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        let mut text = format!(
            "sentence-cnn v1\ndim {}\nwidths {}\nfilters {}\nfinal_loss {}\nparams {}\n",
            self.dim,
            widths.join(" "),
            self.n_filters,
            fmt_exact(self.final_loss),
            self.params.len()
        );
        for p in &self.params {
            text.push_str(&fmt_exact(*p));
            text.push('\n');
        }
        write_file(path, &text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let lines = read_lines(path)?;
        let bad = |line: usize, msg: &str| Error::parse(path, line, msg);
        let mut it = lines.iter();
        let mut next = |key: &str| -> Result<(usize, String)> {
            let (n, l) = it.next().ok_or_else(|| bad(0, &format!("missing `{key}`")))?;
            let rest = l
                .strip_prefix(key)
                .ok_or_else(|| bad(*n, &format!("expected `{key}`")))?;
            Ok((*n, rest.trim().to_string()))
        };
        next("sentence-cnn v1")?;
        let (n, dim) = next("dim")?;
        let dim: usize = dim.parse().map_err(|_| bad(n, "invalid dim"))?;
        let (n, widths) = next("widths")?;
        let widths = widths
            .split_whitespace()
            .map(|w| w.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(n, "invalid widths"))?;
        let (n, filters) = next("filters")?;
        let n_filters: usize = filters.parse().map_err(|_| bad(n, "invalid filters"))?;
        let (n, fl) = next("final_loss")?;
        let final_loss = parse_exact::<T>(&fl).ok_or_else(|| bad(n, "invalid final_loss"))?;
        let (n, count) = next("params")?;
        let count: usize = count.parse().map_err(|_| bad(n, "invalid params count"))?;
        let mut model = Self::new(dim, &widths, n_filters, 0)?;
        if model.params.len() != count {
            return Err(bad(n, "parameter count does not match architecture"));
        }
        for slot in model.params.iter_mut() {
            let (n, l) = it.next().ok_or_else(|| bad(0, "truncated parameter list"))?;
            *slot = parse_exact::<T>(l).ok_or_else(|| bad(*n, "invalid parameter"))?;
        }
        model.final_loss = final_loss;
        Ok(model)
    }
}

/// Trains on `(tokens, level)` examples with mini-batch Adam on MSE.
pub fn fit_sentence_cnn<T: Scalar>(
    examples: &[(Vec<String>, T)],
    table: &EmbeddingTable<T>,
    config: &CnnConfig,
) -> Result<SentenceCnn<T>> {
    if examples.len() < 10 {
        return Err(Error::invalid(format!(
            "sentence CNN needs at least 10 labeled sentences, got {}",
            examples.len()
        )));
    }
    let mut model = SentenceCnn::new(table.dim(), &config.widths, config.filters_per_width, config.seed)?;
    let inputs = examples
        .iter()
        .map(|(toks, _)| model.embed(table, toks))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<T> = examples.iter().map(|e| e.1).collect();
    let layout = model.layout();
    let n = T::from_usize_lossy(targets.len());
    model.params[layout.head_b] = targets.iter().copied().sum::<T>() / n;

    let mut adam = Adam::new(model.params.len(), T::lit(config.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let batch = config.batch_size.max(1);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xs: Vec<&EmbeddedSentence<T>> = chunk.iter().map(|&i| &inputs[i]).collect();
            let ys: Vec<T> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grad) = model.batch_loss_and_grad(&xs, &ys);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "sentence CNN loss became {loss} in epoch {epoch}"
                )));
            }
            adam.update(&mut model.params, &grad);
        }
    }
    let all: Vec<&EmbeddedSentence<T>> = inputs.iter().collect();
    let (loss, _) = model.batch_loss_and_grad(&all, &targets);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("sentence CNN final loss is {loss}")));
    }
    model.final_loss = loss;
    Ok(model)
}

/// A trained CNN bundled with the word vectors it reads.
#[derive(Debug, Clone)]
pub struct CnnComplexity<T> {
    pub model: SentenceCnn<T>,
    pub table: Arc<EmbeddingTable<T>>,
}

impl<T: Scalar> SentenceComplexity<T> for CnnComplexity<T> {
    fn predict(&self, tokens: &[String]) -> Result<T> {
        self.model.predict(&self.table, tokens)
    }
}

pub fn predict_sentence_complexity<T: Scalar>(
    model: &SentenceCnn<T>,
    table: &EmbeddingTable<T>,
    sentence: &[String],
) -> Result<T> {
    model.predict(table, sentence)
}
