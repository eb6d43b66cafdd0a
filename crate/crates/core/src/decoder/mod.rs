//! Beam search over a [`SequenceScorer`], with a sibling-rank diversity
//! penalty, a greedy mode, an exhaustive oracle and a small trainable scorer.
//!
//! Length semantics shared by every search: a hypothesis holds at most
//! `max_len` content tokens followed by EOS. A hypothesis still open after
//! `max_len` content tokens is closed by one forced EOS step whose
//! log-probability is added to its score, and is flagged `truncated`.

mod table;
mod toy;

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::write_file;
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::scalar::Scalar;

pub use table::{RandomTableScorer, TableScorer};
pub use toy::{toy_vocab, toy_vocab_weights, train_toy_scorer, LossMode, Optimizer, ToyConfig, ToyScorer};

/// Next-token log-probabilities given a source and a target prefix.
///
/// Implementations must be deterministic and safe to share across threads.
pub trait SequenceScorer<T: Scalar>: Send + Sync {
    /// Output vocabulary; indices are token ids.
    fn vocab(&self) -> &[String];
    fn eos(&self) -> usize;
    /// Log-probabilities over [`Self::vocab`] for the token after `prefix`.
    fn next_logprobs(&self, source: &[String], prefix: &[usize]) -> Result<Vec<T>>;
}

/// Calls the scorer and checks that it returned a finite, normalized vector.
pub fn checked_logprobs<T: Scalar, S: SequenceScorer<T> + ?Sized>(
    scorer: &S,
    source: &[String],
    prefix: &[usize],
) -> Result<Vec<T>> {
    let lp = scorer.next_logprobs(source, prefix)?;
    let n = scorer.vocab().len();
    if lp.len() != n {
        return Err(Error::invalid(format!("scorer returned {} values for a vocabulary of {n}", lp.len())));
    }
    if let Some(bad) = lp.iter().find(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("scorer returned non-finite log-probability {bad}")));
    }
    let tol = T::lit(1e-6).max(T::epsilon() * T::from_usize_lossy(4 * n));
    let lse = log_sum_exp(&lp);
    if lse.abs() > tol {
        return Err(Error::Numeric(format!("scorer output not normalized: log-sum-exp {lse}")));
    }
    Ok(lp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<T> {
    /// Token ids, ending in EOS once finished.
    pub tokens: Vec<usize>,
    /// Sum of token log-probabilities, penalty-free.
    pub raw_logprob: T,
    pub penalty_accum: T,
    /// Score the beam ranks by: `raw_logprob - penalty_accum` when
    /// penalties accumulate.
    pub selection_score: T,
    /// Position of the parent in the previous step's beam.
    pub parent_index: usize,
    pub finished: bool,
    /// Closed by the forced EOS step after `max_len` content tokens.
    pub truncated: bool,
}

impl<T: Scalar> Hypothesis<T> {
    fn root() -> Self {
        Self {
            tokens: Vec::new(),
            raw_logprob: T::zero(),
            penalty_accum: T::zero(),
            selection_score: T::zero(),
            parent_index: 0,
            finished: false,
            truncated: false,
        }
    }

    /// Content tokens (EOS stripped).
    pub fn content(&self) -> &[usize] {
        if self.finished {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }

    /// Content tokens as strings.
    pub fn words<S: SequenceScorer<T> + ?Sized>(&self, scorer: &S) -> Vec<String> {
        self.content().iter().map(|&t| scorer.vocab()[t].clone()).collect()
    }
}

/// How the sibling-rank penalty enters the selection score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Penalties from every step persist in the selection score.
    #[default]
    Accumulate,
    /// Only the current step's penalty applies: `raw + lp - j'·δ`.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub beam_width: usize,
    pub delta: f64,
    pub max_len: usize,
    /// Recorded for provenance; the search itself is deterministic.
    pub seed: u64,
    #[serde(default)]
    pub penalty: PenaltyMode,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            beam_width: 10,
            delta: 1.0,
            max_len: 30,
            seed: 0,
            penalty: PenaltyMode::Accumulate,
        }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::invalid("beam width must be at least 1"));
        }
        if self.delta < 0.0 || !self.delta.is_finite() {
            return Err(Error::invalid("delta must be finite and >= 0"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        Ok(())
    }
}

/// Token ids ordered by log-probability descending, ties by lower id.
fn ranked_tokens<T: Scalar>(lp: &[T]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..lp.len()).collect();
    ids.sort_by(|&a, &b| lp[b].partial_cmp(&lp[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    ids
}

fn by_raw_desc<T: Scalar>(a: &Hypothesis<T>, b: &Hypothesis<T>) -> Ordering {
    b.raw_logprob
        .partial_cmp(&a.raw_logprob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Appends the forced EOS to a hypothesis that ran out of length.
fn close<T: Scalar, S: SequenceScorer<T> + ?Sized>(
    scorer: &S,
    source: &[String],
    mut h: Hypothesis<T>,
    parent_index: usize,
) -> Result<Hypothesis<T>> {
    let lp = checked_logprobs(scorer, source, &h.tokens)?;
    let eos = scorer.eos();
    h.tokens.push(eos);
    h.raw_logprob = h.raw_logprob + lp[eos];
    h.selection_score = h.selection_score + lp[eos];
    h.parent_index = parent_index;
    h.finished = true;
    h.truncated = true;
    Ok(h)
}

/// Beam search where the `j'`-th ranked child of a hypothesis (counting
/// from 1) pays `j'·δ`. Survivors are the top `b - |finished|` candidates by
/// selection score (ties: lower parent index, then lower token id).
/// Returns at most `b` finished hypotheses sorted by `raw_logprob`
/// descending.
pub fn diverse_beam_search<T: Scalar, S: SequenceScorer<T> + ?Sized>(
    scorer: &S,
    source: &[String],
    params: &DecodeParams,
) -> Result<Vec<Hypothesis<T>>> {
    params.validate()?;
    let b = params.beam_width;
    let delta = T::lit(params.delta);
    let eos = scorer.eos();
    let mut live = vec![Hypothesis::root()];
    let mut finished: Vec<Hypothesis<T>> = Vec::new();

    for _ in 0..params.max_len {
        let mut cands: Vec<(T, usize, usize, Hypothesis<T>)> = Vec::new();
        for (j, h) in live.iter().enumerate() {
            let lp = checked_logprobs(scorer, source, &h.tokens)?;
            for (r, &tok) in ranked_tokens(&lp).iter().take(b).enumerate() {
                let pen = T::from_usize_lossy(r + 1) * delta;
                let raw = h.raw_logprob + lp[tok];
                let (penalty_accum, selection_score) = match params.penalty {
                    PenaltyMode::Accumulate => (h.penalty_accum + pen, h.selection_score + lp[tok] - pen),
                    PenaltyMode::PerStep => (pen, raw - pen),
                };
                let mut tokens = h.tokens.clone();
                tokens.push(tok);
                let child = Hypothesis {
                    tokens,
                    raw_logprob: raw,
                    penalty_accum,
                    selection_score,
                    parent_index: j,
                    finished: tok == eos,
                    truncated: false,
                };
                cands.push((selection_score, j, tok, child));
            }
        }
        cands.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        cands.truncate(b - finished.len());
        live.clear();
        for (_, _, _, h) in cands {
            if h.finished {
                finished.push(h);
            } else {
                live.push(h);
            }
        }
        if finished.len() >= b || live.is_empty() {
            break;
        }
    }
    for (j, h) in live.into_iter().enumerate() {
        finished.push(close(scorer, source, h, j)?);
    }
    finished.sort_by(by_raw_desc);
    Ok(finished)
}

/// Picks the most probable token at every step (ties: lower id).
pub fn greedy_decode<T: Scalar, S: SequenceScorer<T> + ?Sized>(
    scorer: &S,
    source: &[String],
    max_len: usize,
) -> Result<Hypothesis<T>> {
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let eos = scorer.eos();
    let mut h = Hypothesis::root();
    while h.tokens.len() < max_len {
        let lp = checked_logprobs(scorer, source, &h.tokens)?;
        let tok = ranked_tokens(&lp)[0];
        h.tokens.push(tok);
        h.raw_logprob = h.raw_logprob + lp[tok];
        h.selection_score = h.raw_logprob;
        if tok == eos {
            h.finished = true;
            return Ok(h);
        }
    }
    close(scorer, source, h, 0)
}

/// Largest search space [`exhaustive_decode`] accepts, as `|V|^max_len`.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

/// Every sequence of at most `max_len` content tokens followed by EOS,
/// ranked by joint log-probability.
pub fn exhaustive_decode<T: Scalar, S: SequenceScorer<T> + ?Sized>(
    scorer: &S,
    source: &[String],
    max_len: usize,
) -> Result<Vec<Hypothesis<T>>> {
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let v = scorer.vocab().len();
    if (v as f64).powi(max_len as i32) > EXHAUSTIVE_LIMIT {
        return Err(Error::invalid(format!(
            "exhaustive search over {v}^{max_len} sequences exceeds the limit of {EXHAUSTIVE_LIMIT}"
        )));
    }
    let eos = scorer.eos();
    let mut out = Vec::new();
    let mut frontier = vec![Hypothesis::root()];
    for depth in 0..=max_len {
        let mut next = Vec::new();
        for h in frontier {
            let lp = checked_logprobs(scorer, source, &h.tokens)?;
            for (tok, &l) in lp.iter().enumerate() {
                if tok != eos && depth == max_len {
                    continue;
                }
                let mut tokens = h.tokens.clone();
                tokens.push(tok);
                let raw = h.raw_logprob + l;
                let child = Hypothesis {
                    tokens,
                    raw_logprob: raw,
                    penalty_accum: T::zero(),
                    selection_score: raw,
                    parent_index: 0,
                    finished: tok == eos,
                    truncated: tok == eos && depth == max_len,
                };
                if child.finished {
                    out.push(child);
                } else {
                    next.push(child);
                }
            }
        }
        frontier = next;
    }
    out.sort_by(by_raw_desc);
    Ok(out)
}

/// One line of the candidate dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub source: String,
    pub candidates: Vec<CandidateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub tokens: Vec<String>,
    pub logprob: f64,
}

impl CandidateList {
    pub fn from_hypotheses<T: Scalar, S: SequenceScorer<T> + ?Sized>(
        scorer: &S,
        source: &[String],
        hyps: &[Hypothesis<T>],
    ) -> Self {
        Self {
            source: source.join(" "),
            candidates: hyps
                .iter()
                .map(|h| CandidateEntry {
                    tokens: h.words(scorer),
                    logprob: h.raw_logprob.as_f64(),
                })
                .collect(),
        }
    }
}

pub fn write_candidates_jsonl(path: impl AsRef<Path>, lists: &[CandidateList]) -> Result<()> {
    let mut out = String::new();
    for l in lists {
        out.push_str(&serde_json::to_string(l)?);
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_candidates_jsonl(path: impl AsRef<Path>) -> Result<Vec<CandidateList>> {
    let path = path.as_ref();
    crate::corpus::read_lines(path)?
        .into_iter()
        .map(|(n, line)| serde_json::from_str(&line).map_err(|e| Error::parse(path, n, e.to_string())))
        .collect()
}
