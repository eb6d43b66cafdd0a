//! End-to-end runs: train every component from a configuration, decode the
//! test split with each system variant, rerank, evaluate and record a
//! manifest of everything written.

mod config;
mod stages;
mod variants;

pub use config::{load_config, Paths, PipelineConfig};
pub use stages::{
    content_lexicon, fit_sentence_model, fit_word_model, idf_embedder, lm_sentences, select_output, train_scorer,
    word_complexities, Rerankers, Selection, SentenceModelReport, WordModelReport,
};
pub use variants::{Search, VariantSpec, VARIANT_NAMES};

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::candidates::{avg_pairwise_edit_distance, write_scored_jsonl, ClusterConfig, RerankWeights, ScoredList};
use crate::complexity::{write_lexicon, CnnComplexity};
use crate::corpus::{
    count_by_level, filter_adjacent_levels, read_pairs_tsv, split_corpus, write_file, AlignedPair, DatasetSplit,
    LeveledCorpus,
};
use crate::decoder::{
    diverse_beam_search, greedy_decode, write_candidates_jsonl, CandidateList, DecodeParams, Hypothesis, LossMode,
    SequenceScorer, ToyScorer,
};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::metrics::{corpus_stats, format_report_table, sari, write_report_tsv, ReportRow};
use crate::ngram_lm::train_kn_model;
use crate::weighted_loss::ComplexityTable;

/// Loaded inputs and the train/validation/test split of the pairs.
pub struct Inputs {
    pub corpus: LeveledCorpus,
    pub embeddings: Arc<EmbeddingTable<f64>>,
    /// Adjacent-level pairs only.
    pub pairs: Vec<AlignedPair>,
    pub split: DatasetSplit,
}

impl Inputs {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let corpus = LeveledCorpus::read_tsv(&config.paths.corpus)?;
        let embeddings = Arc::new(EmbeddingTable::<f64>::read(&config.paths.embeddings)?);
        let pairs = filter_adjacent_levels(&read_pairs_tsv(&config.paths.pairs)?);
        if corpus.is_empty() || pairs.is_empty() {
            return Err(Error::invalid("corpus or pair file has no usable rows"));
        }
        let split = split_corpus(&pairs, config.split, config.seed)?;
        if split.test.is_empty() || split.train.is_empty() {
            return Err(Error::invalid("split left no training or test pairs"));
        }
        Ok(Self {
            corpus,
            embeddings,
            pairs,
            split,
        })
    }

    pub fn test_sources(&self) -> Vec<Vec<String>> {
        self.split.test.iter().map(|p| p.complex.clone()).collect()
    }

    pub fn test_references(&self) -> Vec<Vec<String>> {
        self.split.test.iter().map(|p| p.simple.clone()).collect()
    }
}

/// Decodes every source; greedy search yields one hypothesis per source.
pub fn decode_all<S: SequenceScorer<f64> + ?Sized>(
    scorer: &S,
    sources: &[Vec<String>],
    search: Search,
    config: &PipelineConfig,
) -> Result<Vec<Vec<Hypothesis<f64>>>> {
    let params = DecodeParams {
        beam_width: config.beam,
        delta: if search == Search::Diverse { config.delta } else { 0.0 },
        max_len: config.max_len,
        seed: config.seed,
        penalty: config.penalty,
    };
    sources
        .iter()
        .map(|src| match search {
            Search::Greedy => greedy_decode(scorer, src, config.max_len).map(|h| vec![h]),
            Search::Beam | Search::Diverse => diverse_beam_search(scorer, src, &params),
        })
        .collect()
}

/// Applies [`select_output`] to every candidate list.
pub fn rerank_all(
    lists: &[CandidateList],
    cluster: Option<&ClusterConfig>,
    weights: &RerankWeights,
    models: &Rerankers<'_>,
) -> Result<Vec<Selection>> {
    lists
        .iter()
        .map(|l| {
            let source: Vec<String> = l.source.split_whitespace().map(str::to_string).collect();
            select_output(&l.candidates, &source, cluster, weights, models)
        })
        .collect()
}

/// Record of one run. `timings` is written to its own file because wall
/// clock differs between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub format: String,
    pub versions: BTreeMap<String, String>,
    pub config: BTreeMap<String, Value>,
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of every input file, by config key.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Writes files under the output directory and remembers their digests.
struct Outputs {
    root: PathBuf,
    digests: BTreeMap<String, String>,
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            digests: BTreeMap::new(),
        })
    }

    fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(p)
    }

    /// Runs `write` against the file's path, then digests what it wrote.
    fn write_with(&mut self, rel: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let p = self.path(rel)?;
        write(&p)?;
        self.digests.insert(rel.to_string(), file_digest(&p)?);
        Ok(())
    }

    fn text(&mut self, rel: &str, text: &str) -> Result<()> {
        self.write_with(rel, |p| write_file(p, text))
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.text(rel, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

struct Clock {
    timings: Vec<(String, f64)>,
}

impl Clock {
    fn stage<R>(&mut self, name: &str, f: impl FnOnce() -> Result<R>) -> Result<R> {
        info!("stage {name}");
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(name))?;
        self.timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

/// Per-variant evaluation results beyond the report row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantResult {
    pub name: String,
    pub outputs: Vec<Vec<String>>,
    /// Per-sentence SARI of the selected output.
    pub selected_sari: Vec<f64>,
    /// Per-sentence best SARI within the candidate set; equal to
    /// `selected_sari` for greedy systems.
    pub oracle_sari: Vec<f64>,
    pub row: ReportRow,
}

/// In-memory outcome of [`run_pipeline`] alongside the files it wrote.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub word_model: WordModelReport,
    pub sentence_model: SentenceModelReport,
    pub sources: Vec<Vec<String>>,
    pub references: Vec<Vec<String>>,
    pub variants: Vec<VariantResult>,
}

/// File-name form of a loss mode.
pub fn scorer_label(mode: LossMode) -> &'static str {
    match mode {
        LossMode::Standard => "standard",
        LossMode::Weighted => "weighted",
    }
}

/// Lexicon words plus every word of the aligned pairs, the set whose
/// complexity the weighted loss needs.
pub fn lexicon_and_pair_words<'a>(
    labels: &'a [(String, u8)],
    pairs: &'a [AlignedPair],
) -> impl Iterator<Item = &'a String> {
    labels
        .iter()
        .map(|(w, _)| w)
        .chain(pairs.iter().flat_map(|p| p.complex.iter().chain(&p.simple)))
}

fn decode_key(spec: &VariantSpec) -> (LossMode, Search) {
    (spec.loss, spec.search)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn lines(sentences: &[Vec<String>]) -> String {
    sentences.iter().map(|s| s.join(" ") + "\n").collect()
}

/// Runs every stage and writes all artifacts under `config.paths.out`.
/// Stage failures abort with the stage name; files written before the
/// failure are kept.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutcome> {
    config.validate()?;
    let mut clock = Clock { timings: Vec::new() };
    let mut out = Outputs::new(&config.paths.out)?;
    let seed = config.seed;

    let Inputs {
        corpus,
        embeddings,
        pairs,
        split,
    } = clock.stage("load", || Inputs::load(config))?;

    let (counts, labels) = clock.stage("label-lexicon", || {
        let counts = count_by_level(&corpus)?;
        let labels = content_lexicon(&counts, config.lexicon_policy);
        let text: String = labels.iter().map(|(w, l)| format!("{w}\t{l}\n")).collect();
        out.text("lexicon.tsv", &text)?;
        Ok((counts, labels))
    })?;

    let (table, word_report) = clock.stage("word-model", || {
        let (model, report) = fit_word_model(&labels, &counts, &embeddings, config.ridge_lambda, seed)?;
        out.write_with("word_model.txt", |p| model.save(p))?;
        out.json("word_model_eval.json", &report)?;
        let scores = word_complexities(&model, &counts, &embeddings, lexicon_and_pair_words(&labels, &pairs));
        out.write_with("word_complexity.tsv", |p| write_lexicon(p, &scores))?;
        Ok((ComplexityTable::from_scores(scores), report))
    })?;

    let (sentence_model, sentence_report) = clock.stage("sentence-model", || {
        let (model, report) = fit_sentence_model(
            &corpus,
            &embeddings,
            &config.sentence_config(),
            config.sentence_max_examples,
            seed,
        )?;
        out.write_with("sentence_model.txt", |p| model.save(p))?;
        out.json("sentence_model_eval.json", &report)?;
        Ok((CnnComplexity { model, table: Arc::clone(&embeddings) }, report))
    })?;

    let lm = clock.stage("language-model", || {
        let sentences = lm_sentences(&corpus, config.paths.lm_corpus.as_deref())?;
        let lm = train_kn_model(&sentences, config.lm_order)?;
        out.write_with("lm.tsv", |p| lm.save(p))?;
        Ok(lm)
    })?;
    let embedder = idf_embedder(&corpus, Arc::clone(&embeddings));

    let mut scorers: BTreeMap<&'static str, ToyScorer<f64>> = BTreeMap::new();
    for mode in [LossMode::Standard, LossMode::Weighted] {
        if !config.variants.iter().any(|v| v.loss == mode) {
            continue;
        }
        let label = scorer_label(mode);
        let scorer = clock.stage(&format!("scorer-{label}"), || {
            let scorer = match config.scorer_dump(mode) {
                Some(p) => ToyScorer::load(p)?,
                None => {
                    let (scorer, weights) =
                        train_scorer(&split.train, mode, &table, config.alpha, &config.scorer_config())?;
                    out.write_with(&format!("vocab_weights_{label}.tsv"), |p| weights.write_tsv(p))?;
                    scorer
                }
            };
            out.write_with(&format!("scorer_{label}.json"), |p| scorer.save(p))?;
            Ok(scorer)
        })?;
        scorers.insert(label, scorer);
    }

    let sources: Vec<Vec<String>> = split.test.iter().map(|p| p.complex.clone()).collect();
    let references: Vec<Vec<String>> = split.test.iter().map(|p| p.simple.clone()).collect();
    let refs: Vec<Vec<Vec<String>>> = references.iter().map(|r| vec![r.clone()]).collect();

    let mut decoded: HashMap<(LossMode, Search), Vec<Vec<Hypothesis<f64>>>> = HashMap::new();
    let models = Rerankers {
        lm: &lm,
        embedder: &embedder,
        sentence_model: &sentence_model,
    };
    let mut results = Vec::new();
    let mut oracle_tsv = String::from("system\tsentence\tselected\toracle\n");
    for spec in &config.variants {
        let scorer = &scorers[scorer_label(spec.loss)];
        let key = decode_key(spec);
        if let Entry::Vacant(slot) = decoded.entry(key) {
            let stage = format!("decode-{:?}-{:?}", spec.loss, spec.search).to_lowercase();
            slot.insert(clock.stage(&stage, || decode_all(scorer, &sources, spec.search, config))?);
        }
        let hyps = &decoded[&key];
        let slug = spec.slug();
        let result = clock.stage(&format!("rerank-{slug}"), || {
            let lists: Vec<CandidateList> = sources
                .iter()
                .zip(hyps)
                .map(|(src, h)| CandidateList::from_hypotheses(scorer, src, h))
                .collect();
            out.write_with(&format!("candidates/{slug}.jsonl"), |p| write_candidates_jsonl(p, &lists))?;
            let cluster = spec.cluster.then_some(ClusterConfig {
                k: config.clusters,
                max_iters: config.cluster_max_iters,
                seed,
            });
            let selections = match &spec.weights {
                Some(w) => rerank_all(&lists, cluster.as_ref(), w, &models)?,
                None => lists.iter().map(Selection::top).collect(),
            };
            if spec.weights.is_some() {
                let scored: Vec<ScoredList> = sources
                    .iter()
                    .zip(&selections)
                    .map(|(src, s)| ScoredList::new(src, &s.ranked, 0))
                    .collect();
                out.write_with(&format!("scored/{slug}.jsonl"), |p| write_scored_jsonl(p, &scored))?;
            }
            let outputs: Vec<Vec<String>> = selections.iter().map(|s| s.output.clone()).collect();
            out.text(&format!("outputs/{slug}.txt"), &lines(&outputs))?;
            evaluate_variant(spec, &sources, &refs, selections)
        })?;
        for (i, (s, o)) in result.selected_sari.iter().zip(&result.oracle_sari).enumerate() {
            oracle_tsv.push_str(&format!("{}\t{i}\t{s:?}\t{o:?}\n", spec.name));
        }
        results.push(result);
    }

    clock.stage("report", || {
        let mut rows = vec![
            report_row("Complex", &sources, &sources, &refs)?,
            report_row("Reference", &references, &sources, &refs)?,
        ];
        rows.extend(results.iter().map(|r| r.row.clone()));
        out.write_with("report.tsv", |p| write_report_tsv(p, &rows))?;
        out.text("report.txt", &format_report_table(&rows))?;
        out.text("oracle.tsv", &oracle_tsv)
    })?;

    let manifest = RunManifest {
        format: "lexsimp-run v1".to_string(),
        versions: BTreeMap::from([
            ("lexsimp".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("language_model".to_string(), "kn-lm v1".to_string()),
            ("scorer".to_string(), "toy-scorer v1".to_string()),
            ("sentence_model".to_string(), "sentence-cnn v1".to_string()),
            ("word_model".to_string(), "linear-model v1".to_string()),
        ]),
        config: config.snapshot(),
        seeds: ["split", "word_model", "sentence_model", "scorer", "cluster"]
            .iter()
            .map(|k| (k.to_string(), seed))
            .collect(),
        inputs: input_digests(config)?,
        outputs: out.digests.clone(),
        timings: clock.timings,
    };
    write_file(
        config.paths.out.join(MANIFEST_FILE),
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;
    let timings: BTreeMap<&str, f64> = manifest.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    write_file(
        config.paths.out.join(TIMINGS_FILE),
        &(serde_json::to_string_pretty(&timings)? + "\n"),
    )?;
    Ok(RunOutcome {
        manifest,
        word_model: word_report,
        sentence_model: sentence_report,
        sources,
        references,
        variants: results,
    })
}

fn input_digests(config: &PipelineConfig) -> Result<BTreeMap<String, String>> {
    let p = &config.paths;
    let mut m = BTreeMap::new();
    for (key, path) in [
        ("paths.corpus", Some(&p.corpus)),
        ("paths.pairs", Some(&p.pairs)),
        ("paths.embeddings", Some(&p.embeddings)),
        ("paths.lm_corpus", p.lm_corpus.as_ref()),
        ("paths.scorer_standard", p.scorer_standard.as_ref()),
        ("paths.scorer_weighted", p.scorer_weighted.as_ref()),
    ] {
        if let Some(path) = path {
            m.insert(key.to_string(), file_digest(path)?);
        }
    }
    Ok(m)
}

/// Report row of a fixed output set: mean sentence SARI and corpus statistics.
pub fn report_row(
    name: &str,
    outputs: &[Vec<String>],
    sources: &[Vec<String>],
    refs: &[Vec<Vec<String>>],
) -> Result<ReportRow> {
    let saris = sources
        .iter()
        .zip(outputs)
        .zip(refs)
        .map(|((s, o), r)| sari(s, o, r).map(|x| x.overall))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ReportRow {
        system: name.to_string(),
        sari: Some(mean(&saris)),
        oracle: None,
        stats: corpus_stats(outputs, sources)?,
        edit: None,
    })
}

fn evaluate_variant(
    spec: &VariantSpec,
    sources: &[Vec<String>],
    refs: &[Vec<Vec<String>>],
    selections: Vec<Selection>,
) -> Result<VariantResult> {
    let mut selected_sari = Vec::with_capacity(sources.len());
    let mut oracle_sari = Vec::with_capacity(sources.len());
    let mut edits = Vec::new();
    for ((src, r), sel) in sources.iter().zip(refs).zip(&selections) {
        let chosen = sari(src, &sel.output, r)?.overall;
        let mut best = chosen;
        for c in &sel.candidate_set {
            best = best.max(sari(src, c, r)?.overall);
        }
        selected_sari.push(chosen);
        oracle_sari.push(best);
        if sel.candidate_set.len() >= 2 {
            edits.push(avg_pairwise_edit_distance(&sel.candidate_set)?);
        }
    }
    let outputs: Vec<Vec<String>> = selections.into_iter().map(|s| s.output).collect();
    let reranked = spec.weights.is_some();
    let row = ReportRow {
        system: spec.name.clone(),
        sari: Some(mean(&selected_sari)),
        oracle: reranked.then(|| mean(&oracle_sari)),
        stats: corpus_stats(&outputs, sources)?,
        edit: (!edits.is_empty()).then(|| mean(&edits)),
    };
    Ok(VariantResult {
        name: spec.name.clone(),
        outputs,
        selected_sari,
        oracle_sari,
        row,
    })
}
