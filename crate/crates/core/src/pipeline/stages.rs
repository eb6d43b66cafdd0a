//! Building blocks of a run, shared by the pipeline and the command line.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::candidates::{
    normalize_and_rerank, score_candidates, select_representatives, Candidate, ClusterConfig, RerankWeights,
    ScoredCandidate,
};
use crate::complexity::{
    baseline_predict, evaluate_predictor, extract_word_features, fit_ridge_regression, fit_sentence_cnn,
    predict_word_complexity, BaselineKind, CnnConfig, LinearModel, MinMaxBaseline, RegressionReport,
    SentenceCnn, SentenceComplexity,
};
use crate::corpus::{
    is_content, label_lexicon, preprocess, read_lines, split_items, AlignedPair, DescentPolicy, LeveledCorpus,
    WordLevelCounts,
};
use crate::decoder::{
    toy_vocab, toy_vocab_weights, train_toy_scorer, CandidateEntry, CandidateList, LossMode, ToyConfig, ToyScorer,
};
use crate::embeddings::{DocumentFrequency, EmbeddingTable, MeanEmbedder, SentenceEmbedder, Weighting};
use crate::error::{Error, Result};
use crate::ngram_lm::KnModel;
use crate::weighted_loss::{ComplexityTable, VocabWeights};

/// Algorithm-1 labels of the content words in `counts`.
pub fn content_lexicon(counts: &WordLevelCounts, policy: DescentPolicy) -> Vec<(String, u8)> {
    label_lexicon(counts, policy)
        .into_iter()
        .filter(|(w, _)| is_content(w))
        .collect()
}

/// Held-out Pearson/MSE of the regression and both baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WordModelReport {
    pub linreg: RegressionReport,
    pub length: RegressionReport,
    pub frequency: RegressionReport,
    pub train_words: usize,
    pub test_words: usize,
}

/// Fits the ridge model on 80% of the labeled words and evaluates it and the
/// length/frequency baselines on the rest.
pub fn fit_word_model(
    labels: &[(String, u8)],
    counts: &WordLevelCounts,
    embeddings: &EmbeddingTable<f64>,
    lambda: f64,
    seed: u64,
) -> Result<(LinearModel<f64>, WordModelReport)> {
    let split = split_items(labels, (0.8, 0.0, 0.2), seed)?;
    let rows = |set: &[(String, u8)]| -> (Vec<Vec<f64>>, Vec<f64>) {
        set.iter()
            .map(|(w, l)| (extract_word_features(w, counts, embeddings).to_vec(), f64::from(*l)))
            .unzip()
    };
    let (x_train, y_train) = rows(&split.train);
    let (_, y_test) = rows(&split.test);
    let model = fit_ridge_regression(&x_train, &y_train, lambda)?;
    let pred: Vec<f64> = split
        .test
        .iter()
        .map(|(w, _)| predict_word_complexity(&model, &extract_word_features(w, counts, embeddings)))
        .collect();
    let baseline = |kind: BaselineKind| -> Result<RegressionReport> {
        let stats = MinMaxBaseline::fit(split.train.iter().map(|(w, _)| kind.feature::<f64>(w, counts)))?;
        let p: Vec<f64> = split.test.iter().map(|(w, _)| baseline_predict(kind, w, &stats, counts)).collect();
        evaluate_predictor(&p, &y_test)
    };
    let report = WordModelReport {
        linreg: evaluate_predictor(&pred, &y_test)?,
        length: baseline(BaselineKind::Length)?,
        frequency: baseline(BaselineKind::Frequency)?,
        train_words: split.train.len(),
        test_words: split.test.len(),
    };
    Ok((model, report))
}

/// Predicted complexity of each distinct word, sorted by word.
pub fn word_complexities<'a>(
    model: &LinearModel<f64>,
    counts: &WordLevelCounts,
    embeddings: &EmbeddingTable<f64>,
    words: impl IntoIterator<Item = &'a String>,
) -> Vec<(String, f64)> {
    let unique: BTreeSet<&String> = words.into_iter().collect();
    unique
        .into_iter()
        .map(|w| {
            let s = predict_word_complexity(model, &extract_word_features(w, counts, embeddings));
            (w.clone(), s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentenceModelReport {
    pub cnn: RegressionReport,
    pub length: RegressionReport,
    pub train_sentences: usize,
    pub test_sentences: usize,
}

const SENTENCE_TEST_CAP: usize = 1000;

/// Trains the sentence CNN on at most `max_examples` leveled sentences and
/// compares it with a min-max sentence-length baseline on held-out ones.
pub fn fit_sentence_model(
    corpus: &LeveledCorpus,
    embeddings: &EmbeddingTable<f64>,
    config: &CnnConfig,
    max_examples: usize,
    seed: u64,
) -> Result<(SentenceCnn<f64>, SentenceModelReport)> {
    let labeled: Vec<(Vec<String>, f64)> = corpus
        .labeled_sentences()
        .into_iter()
        .map(|(s, l)| (s, f64::from(l)))
        .collect();
    let split = split_items(&labeled, (0.9, 0.0, 0.1), seed)?;
    let train: Vec<_> = split.train.into_iter().take(max_examples).collect();
    let test: Vec<_> = split.test.into_iter().take(SENTENCE_TEST_CAP).collect();
    let model = fit_sentence_cnn(&train, embeddings, config)?;
    let gold: Vec<f64> = test.iter().map(|(_, l)| *l).collect();
    let pred = test
        .iter()
        .map(|(s, _)| model.predict(embeddings, s))
        .collect::<Result<Vec<f64>>>()?;
    let stats = MinMaxBaseline::fit(train.iter().map(|(s, _)| s.len() as f64))?;
    let by_len: Vec<f64> = test.iter().map(|(s, _)| stats.predict(s.len() as f64)).collect();
    let report = SentenceModelReport {
        cnn: evaluate_predictor(&pred, &gold)?,
        length: evaluate_predictor(&by_len, &gold)?,
        train_sentences: train.len(),
        test_sentences: test.len(),
    };
    Ok((model, report))
}

/// Language-model training text: one preprocessed sentence per line of
/// `path`, or the leveled corpus sentences when no path is given.
pub fn lm_sentences(corpus: &LeveledCorpus, path: Option<&Path>) -> Result<Vec<Vec<String>>> {
    match path {
        Some(p) => Ok(read_lines(p)?
            .into_iter()
            .map(|(_, line)| preprocess(&line).tokens)
            .filter(|t| !t.is_empty())
            .collect()),
        None => Ok(corpus.sentences().cloned().collect()),
    }
}

/// Idf-weighted mean embedder with document frequencies from `corpus`.
pub fn idf_embedder(corpus: &LeveledCorpus, table: Arc<EmbeddingTable<f64>>) -> MeanEmbedder<f64> {
    let docs: Vec<Vec<String>> = corpus.documents.iter().map(|d| d.sentences.concat()).collect();
    let df = DocumentFrequency::from_documents(docs.iter().map(Vec::as_slice));
    MeanEmbedder::new(table, Weighting::Idf(Arc::new(df)))
}

/// Trains a toy scorer on `pairs`. Vocabulary weights are built in both
/// modes so they can be inspected; only the weighted mode trains with them.
pub fn train_scorer(
    pairs: &[AlignedPair],
    mode: LossMode,
    table: &ComplexityTable<f64>,
    alpha: f64,
    config: &ToyConfig,
) -> Result<(ToyScorer<f64>, VocabWeights<f64>)> {
    let vocab = toy_vocab(pairs);
    let weights = toy_vocab_weights(&vocab, table, alpha)?;
    let scorer = train_toy_scorer(pairs, mode, Some(&weights), config)?;
    Ok((scorer, weights))
}

/// Output of one sentence after optional clustering and reranking.
#[derive(Debug, Clone)]
pub struct Selection {
    pub output: Vec<String>,
    /// The set the output was chosen from.
    pub candidate_set: Vec<Vec<String>>,
    /// Reranked candidates, best first; empty for greedy systems.
    pub ranked: Vec<ScoredCandidate<f64>>,
}

impl Selection {
    /// The first candidate, unreranked.
    pub fn top(list: &CandidateList) -> Self {
        let output = list.candidates.first().map(|c| c.tokens.clone()).unwrap_or_default();
        Self {
            candidate_set: vec![output.clone()],
            output,
            ranked: Vec::new(),
        }
    }
}

/// Shared read-only models used to score candidates.
pub struct Rerankers<'a> {
    pub lm: &'a KnModel,
    pub embedder: &'a dyn SentenceEmbedder<f64>,
    pub sentence_model: &'a dyn SentenceComplexity<f64>,
}

/// Clusters (when `cluster` is given) and reranks the non-empty candidates;
/// the top-ranked one is the output. An all-empty list yields an empty output.
pub fn select_output(
    entries: &[CandidateEntry],
    source: &[String],
    cluster: Option<&ClusterConfig>,
    weights: &RerankWeights,
    models: &Rerankers<'_>,
) -> Result<Selection> {
    let candidates = entries
        .iter()
        .filter(|e| !e.tokens.is_empty())
        .map(|e| Candidate::embedded(e.tokens.clone(), e.logprob, models.embedder))
        .collect::<Result<Vec<_>>>()?;
    if candidates.is_empty() {
        return Ok(Selection {
            output: Vec::new(),
            candidate_set: Vec::new(),
            ranked: Vec::new(),
        });
    }
    let kept: Vec<Candidate<f64>> = match cluster {
        Some(cfg) => select_representatives(&candidates, cfg)?
            .into_iter()
            .map(|i| candidates[i].clone())
            .collect(),
        None => candidates,
    };
    let scored = score_candidates(&kept, source, models.lm, models.embedder, models.sentence_model)?;
    let ranked = normalize_and_rerank(scored, weights);
    let output = ranked
        .first()
        .map(|c| c.candidate.tokens.clone())
        .ok_or_else(|| Error::invalid("reranking produced no candidates"))?;
    Ok(Selection {
        output,
        candidate_set: kept.into_iter().map(|c| c.tokens).collect(),
        ranked,
    })
}
