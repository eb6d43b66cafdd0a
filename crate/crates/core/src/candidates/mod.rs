//! Candidate post-processing: clustering with representative selection,
//! fluency/adequacy/simplicity scoring, weighted reranking and
//! length-matched selection.

mod kmeans;

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans_cluster, ClusterConfig, KMeansResult};

use crate::complexity::SentenceComplexity;
use crate::corpus::{read_lines, write_file};
use crate::embeddings::{cosine_similarity, SentenceEmbedder, SentenceVector};
use crate::error::{Error, Result};
use crate::metrics::levenshtein_tokens;
use crate::ngram_lm::KnModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub tokens: Vec<String>,
    pub raw_logprob: T,
    pub vector: SentenceVector<T>,
}

impl<T: Scalar> Candidate<T> {
    pub fn new(tokens: Vec<String>, raw_logprob: T, vector: SentenceVector<T>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("candidate with no tokens"));
        }
        Ok(Self {
            tokens,
            raw_logprob,
            vector,
        })
    }

    /// Builds a candidate and embeds it.
    pub fn embedded<E: SentenceEmbedder<T> + ?Sized>(tokens: Vec<String>, raw_logprob: T, embedder: &E) -> Result<Self> {
        let vector = embedder.embed(&tokens);
        Self::new(tokens, raw_logprob, vector)
    }
}

/// Indices ordered by raw log-probability descending, ties by index.
fn by_logprob<T: Scalar>(candidates: &[Candidate<T>], mut idx: Vec<usize>) -> Vec<usize> {
    idx.sort_by(|&a, &b| {
        candidates[b]
            .raw_logprob
            .partial_cmp(&candidates[a].raw_logprob)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Clusters the candidate vectors and keeps, per non-empty cluster, the
/// member nearest its centroid (ties: higher log-probability, then lower
/// index). Returns indices in log-probability order.
pub fn select_representatives<T: Scalar>(candidates: &[Candidate<T>], config: &ClusterConfig) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to cluster"));
    }
    if candidates.len() <= config.k {
        return Ok(by_logprob(candidates, (0..candidates.len()).collect()));
    }
    let vectors: Vec<Vec<T>> = candidates.iter().map(|c| c.vector.values.clone()).collect();
    let km = kmeans_cluster(&vectors, config)?;
    let mut best: Vec<Option<(T, usize)>> = vec![None; km.centroids.len()];
    for (i, &c) in km.assignments.iter().enumerate() {
        let d = kmeans::sq_dist(&vectors[i], &km.centroids[c]);
        let better = match best[c] {
            None => true,
            Some((bd, bi)) => d < bd || (d == bd && candidates[i].raw_logprob > candidates[bi].raw_logprob),
        };
        if better {
            best[c] = Some((d, i));
        }
    }
    Ok(by_logprob(candidates, best.into_iter().flatten().map(|(_, i)| i).collect()))
}

/// Mixing weights for the three normalized scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankWeights {
    pub beta_f: f64,
    pub beta_a: f64,
    pub beta_s: f64,
}

impl RerankWeights {
    pub const FAS: Self = Self {
        beta_f: 1.0 / 3.0,
        beta_a: 1.0 / 3.0,
        beta_s: 1.0 / 3.0,
    };
    pub const FA: Self = Self {
        beta_f: 0.5,
        beta_a: 0.5,
        beta_s: 0.0,
    };

    pub fn new(beta_f: f64, beta_a: f64, beta_s: f64) -> Result<Self> {
        let w = Self { beta_f, beta_a, beta_s };
        if [beta_f, beta_a, beta_s].iter().any(|b| *b < 0.0 || !b.is_finite()) {
            return Err(Error::invalid("rerank weights must be finite and >= 0"));
        }
        if (beta_f + beta_a + beta_s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "rerank weights sum to {}, not 1",
                beta_f + beta_a + beta_s
            )));
        }
        Ok(w)
    }
}

impl std::str::FromStr for RerankWeights {
    type Err = Error;

    /// `fas`, `fa`, or three comma-separated numbers `f,a,s`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fas" => Ok(Self::FAS),
            "fa" => Ok(Self::FA),
            other => {
                let parts: Vec<f64> = other
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::invalid(format!("cannot parse rerank weights `{s}`")))?;
                match parts[..] {
                    [f, a, sv] => Self::new(f, a, sv),
                    _ => Err(Error::invalid(format!("expected fas, fa or f,a,s; got `{s}`"))),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate<T> {
    pub candidate: Candidate<T>,
    /// Perplexity under the language model.
    pub f_raw: T,
    /// Cosine similarity to the source.
    pub a_raw: T,
    /// Predicted sentence complexity.
    pub s_raw: T,
    pub f: T,
    pub a: T,
    pub s: T,
    pub final_score: T,
}

/// Raw fluency, adequacy and simplicity for each candidate. Normalized
/// fields are left at zero until [`normalize_and_rerank`].
pub fn score_candidates<T, E, C>(
    candidates: &[Candidate<T>],
    source: &[String],
    lm: &KnModel,
    embedder: &E,
    sentence_model: &C,
) -> Result<Vec<ScoredCandidate<T>>>
where
    T: Scalar,
    E: SentenceEmbedder<T> + ?Sized,
    C: SentenceComplexity<T> + ?Sized,
{
    let src = embedder.embed(source);
    candidates
        .iter()
        .map(|c| {
            Ok(ScoredCandidate {
                candidate: c.clone(),
                f_raw: T::lit(lm.sentence_perplexity(&c.tokens)?),
                a_raw: cosine_similarity(&src.values, &c.vector.values)?,
                s_raw: sentence_model.predict(&c.tokens)?,
                f: T::zero(),
                a: T::zero(),
                s: T::zero(),
                final_score: T::zero(),
            })
        })
        .collect()
}

/// Min-max scales `values` into `[0, 1]`, reversed when `invert`; a
/// constant column maps to 0.5.
fn min_max<T: Scalar>(values: &[T], invert: bool) -> Vec<T> {
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return vec![T::lit(0.5); values.len()];
    }
    values
        .iter()
        .map(|&v| if invert { (hi - v) / (hi - lo) } else { (v - lo) / (hi - lo) })
        .collect()
}

/// Normalizes each raw score within the set (lower perplexity and lower
/// complexity map to higher values), combines them with `weights` and sorts
/// by the combined score, ties by raw log-probability.
pub fn normalize_and_rerank<T: Scalar>(
    mut scored: Vec<ScoredCandidate<T>>,
    weights: &RerankWeights,
) -> Vec<ScoredCandidate<T>> {
    let col = |get: fn(&ScoredCandidate<T>) -> T| scored.iter().map(get).collect::<Vec<T>>();
    let f = min_max(&col(|c| c.f_raw), true);
    let a = min_max(&col(|c| c.a_raw), false);
    let s = min_max(&col(|c| c.s_raw), true);
    let (bf, ba, bs) = (T::lit(weights.beta_f), T::lit(weights.beta_a), T::lit(weights.beta_s));
    for (i, c) in scored.iter_mut().enumerate() {
        c.f = f[i];
        c.a = a[i];
        c.s = s[i];
        c.final_score = bf * f[i] + ba * a[i] + bs * s[i];
    }
    scored.sort_by(|x, y| {
        y.final_score
            .partial_cmp(&x.final_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                y.candidate
                    .raw_logprob
                    .partial_cmp(&x.candidate.raw_logprob)
                    .unwrap_or(Ordering::Equal)
            })
    });
    scored
}

/// Index of the highest-ranked candidate whose length is closest to
/// `target_len + offset`.
pub fn match_length_select<T>(ranked: &[ScoredCandidate<T>], target_len: usize, offset: i64) -> Result<usize> {
    if ranked.is_empty() {
        return Err(Error::invalid("no candidates to select from"));
    }
    let target = target_len as i64 + offset;
    let mut best = 0;
    let mut best_gap = i64::MAX;
    for (i, c) in ranked.iter().enumerate() {
        let gap = (c.candidate.tokens.len() as i64 - target).abs();
        if gap < best_gap {
            best = i;
            best_gap = gap;
        }
    }
    Ok(best)
}

/// Mean token Levenshtein distance over all unordered pairs.
pub fn avg_pairwise_edit_distance(candidates: &[Vec<String>]) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(Error::invalid("pairwise distance needs at least two candidates"));
    }
    let mut total = 0usize;
    let mut pairs = 0usize;
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            total += levenshtein_tokens(&candidates[i], &candidates[j]);
            pairs += 1;
        }
    }
    Ok(total as f64 / pairs as f64)
}

/// One line of the scored dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredList {
    pub source: String,
    pub candidates: Vec<ScoredEntry>,
    /// Index into `candidates` of the chosen output.
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub tokens: Vec<String>,
    pub logprob: f64,
    pub ppl: f64,
    pub cos: f64,
    pub complexity: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
}

impl ScoredList {
    pub fn new<T: Scalar>(source: &[String], ranked: &[ScoredCandidate<T>], selected: usize) -> Self {
        Self {
            source: source.join(" "),
            candidates: ranked
                .iter()
                .map(|c| ScoredEntry {
                    tokens: c.candidate.tokens.clone(),
                    logprob: c.candidate.raw_logprob.as_f64(),
                    ppl: c.f_raw.as_f64(),
                    cos: c.a_raw.as_f64(),
                    complexity: c.s_raw.as_f64(),
                    final_score: c.final_score.as_f64(),
                })
                .collect(),
            selected,
        }
    }
}

pub fn write_scored_jsonl(path: impl AsRef<Path>, lists: &[ScoredList]) -> Result<()> {
    let mut out = String::new();
    for l in lists {
        out.push_str(&serde_json::to_string(l)?);
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_scored_jsonl(path: impl AsRef<Path>) -> Result<Vec<ScoredList>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| serde_json::from_str(&line).map_err(|e| Error::parse(path, n, e.to_string())))
        .collect()
}
