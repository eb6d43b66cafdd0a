use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde_json::{json, Value};

use lexsimp::candidates::{write_scored_jsonl, ClusterConfig, ScoredList};
use lexsimp::complexity::{write_lexicon, CnnComplexity, LinearModel, SentenceCnn};
use lexsimp::corpus::{count_by_level, write_file, WordLevelCounts};
use lexsimp::decoder::{read_candidates_jsonl, write_candidates_jsonl, CandidateList, LossMode, ToyScorer};
use lexsimp::metrics::{format_report_table, write_report_tsv};
use lexsimp::ngram_lm::{train_kn_model, KnModel};
use lexsimp::pipeline::{
    content_lexicon, decode_all, fit_sentence_model, fit_word_model, idf_embedder, lexicon_and_pair_words,
    lm_sentences, load_config, report_row, rerank_all, run_pipeline, scorer_label, train_scorer as fit_scorer,
    word_complexities, Inputs, PipelineConfig, Rerankers, Search, VariantSpec, WordModelReport,
};
use lexsimp::weighted_loss::ComplexityTable;
use lexsimp::{Error, Result};

use crate::Common;

pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const OUTPUTS_FILE: &str = "outputs.txt";

/// Loads the configuration file and applies command-line overrides.
pub fn config_from(common: &Common) -> Result<PipelineConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    let mut cfg = load_config(path)?;
    let cwd = Path::new(".");
    let mut set = |key: &str, v: Value| cfg.set(key, &v, cwd);
    if let Some(s) = common.seed {
        set("seed", json!(s))?;
    }
    if let Some(b) = common.beam {
        set("decode.beam", json!(b))?;
    }
    if let Some(d) = common.delta {
        set("decode.delta", json!(d))?;
    }
    if let Some(k) = common.clusters {
        set("cluster.k", json!(k))?;
    }
    if let Some(w) = &common.weights {
        set("rerank.weights", json!(w))?;
    }
    if let Some(a) = common.alpha {
        set("loss.alpha", json!(a))?;
    }
    if let Some(m) = &common.loss {
        set("loss.mode", json!(m))?;
    }
    if let Some(o) = &common.out {
        set("paths.out", json!(o.display().to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn set_variants(cfg: &mut PipelineConfig, list: &str) -> Result<()> {
    let names: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    cfg.set("variants", &json!(names), Path::new("."))?;
    cfg.validate()
}

fn out_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.out.join(name)
}

fn write_json<T: serde::Serialize>(path: PathBuf, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn lexicon(inputs: &Inputs, cfg: &PipelineConfig) -> Result<(WordLevelCounts, Vec<(String, u8)>)> {
    let counts = count_by_level(&inputs.corpus)?;
    let labels = content_lexicon(&counts, cfg.lexicon_policy);
    Ok((counts, labels))
}

type WordModelFit = (LinearModel<f64>, WordModelReport, Vec<(String, f64)>);

fn word_model(inputs: &Inputs, cfg: &PipelineConfig) -> Result<WordModelFit> {
    let (counts, labels) = lexicon(inputs, cfg)?;
    let (model, report) = fit_word_model(&labels, &counts, &inputs.embeddings, cfg.ridge_lambda, cfg.seed)?;
    let words = lexicon_and_pair_words(&labels, &inputs.pairs);
    let scores = word_complexities(&model, &counts, &inputs.embeddings, words);
    Ok((model, report, scores))
}

pub fn label_lexicon(cfg: &PipelineConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let (_, labels) = lexicon(&inputs, cfg)?;
    let text: String = labels.iter().map(|(w, l)| format!("{w}\t{l}\n")).collect();
    let path = out_path(cfg, "lexicon.tsv");
    write_file(&path, &text)?;
    let mut per_level = [0usize; 5];
    for (_, l) in &labels {
        per_level[usize::from(*l)] += 1;
    }
    println!("labeled {} words, per level {:?} -> {}", labels.len(), per_level, path.display());
    Ok(())
}

pub fn train_word(cfg: &PipelineConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let (model, report, scores) = word_model(&inputs, cfg)?;
    model.save(out_path(cfg, "word_model.txt"))?;
    write_json(out_path(cfg, "word_model_eval.json"), &report)?;
    write_lexicon(out_path(cfg, "word_complexity.tsv"), &scores)?;
    println!("model\tpearson\tmse");
    for (name, r) in [("linreg", report.linreg), ("length", report.length), ("frequency", report.frequency)] {
        println!("{name}\t{:.3}\t{:.3}", r.pearson, r.mse);
    }
    Ok(())
}

fn sentence_model(inputs: &Inputs, cfg: &PipelineConfig) -> Result<SentenceCnn<f64>> {
    let path = out_path(cfg, "sentence_model.txt");
    if path.is_file() {
        info!("loading {}", path.display());
        return SentenceCnn::load(&path);
    }
    let (model, _) = fit_sentence_model(
        &inputs.corpus,
        &inputs.embeddings,
        &cfg.sentence_config(),
        cfg.sentence_max_examples,
        cfg.seed,
    )?;
    Ok(model)
}

pub fn train_sentence(cfg: &PipelineConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let (model, report) = fit_sentence_model(
        &inputs.corpus,
        &inputs.embeddings,
        &cfg.sentence_config(),
        cfg.sentence_max_examples,
        cfg.seed,
    )?;
    model.save(out_path(cfg, "sentence_model.txt"))?;
    write_json(out_path(cfg, "sentence_model_eval.json"), &report)?;
    println!("model\tpearson\tmse");
    println!("cnn\t{:.3}\t{:.3}", report.cnn.pearson, report.cnn.mse);
    println!("length\t{:.3}\t{:.3}", report.length.pearson, report.length.mse);
    Ok(())
}

fn language_model(inputs: &Inputs, cfg: &PipelineConfig) -> Result<KnModel> {
    let path = out_path(cfg, "lm.tsv");
    if path.is_file() {
        info!("loading {}", path.display());
        return KnModel::load(&path);
    }
    train_kn_model(&lm_sentences(&inputs.corpus, cfg.paths.lm_corpus.as_deref())?, cfg.lm_order)
}

pub fn train_lm(cfg: &PipelineConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let sentences = lm_sentences(&inputs.corpus, cfg.paths.lm_corpus.as_deref())?;
    let lm = train_kn_model(&sentences, cfg.lm_order)?;
    let path = out_path(cfg, "lm.tsv");
    lm.save(&path)?;
    println!("order {} language model on {} sentences -> {}", cfg.lm_order, sentences.len(), path.display());
    Ok(())
}

pub fn train_scorer(cfg: &PipelineConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let (_, _, scores) = word_model(&inputs, cfg)?;
    let table = ComplexityTable::from_scores(scores);
    let mode = cfg.loss_mode;
    let (scorer, weights) = fit_scorer(&inputs.split.train, mode, &table, cfg.alpha, &cfg.scorer_config())?;
    let label = scorer_label(mode);
    let path = out_path(cfg, &format!("scorer_{label}.json"));
    scorer.save(&path)?;
    weights.write_tsv(out_path(cfg, &format!("vocab_weights_{label}.tsv")))?;
    println!("{label} scorer trained on {} pairs -> {}", inputs.split.train.len(), path.display());
    Ok(())
}

fn scorer(cfg: &PipelineConfig, mode: LossMode) -> Result<ToyScorer<f64>> {
    let path = match cfg.scorer_dump(mode) {
        Some(p) => p.to_path_buf(),
        None => out_path(cfg, &format!("scorer_{}.json", scorer_label(mode))),
    };
    if !path.is_file() {
        return Err(Error::invalid(format!(
            "no scorer at {}; run train-scorer first",
            path.display()
        )));
    }
    ToyScorer::load(&path)
}

pub fn decode(cfg: &PipelineConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let scorer = scorer(cfg, cfg.loss_mode)?;
    let sources = inputs.test_sources();
    let hyps = decode_all(&scorer, &sources, Search::Diverse, cfg)?;
    let lists: Vec<CandidateList> = sources
        .iter()
        .zip(&hyps)
        .map(|(src, h)| CandidateList::from_hypotheses(&scorer, src, h))
        .collect();
    let path = out_path(cfg, CANDIDATES_FILE);
    write_candidates_jsonl(&path, &lists)?;
    println!("decoded {} sources (beam {}, delta {}) -> {}", lists.len(), cfg.beam, cfg.delta, path.display());
    Ok(())
}

pub fn rerank(cfg: &PipelineConfig, cluster: bool) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let lists = read_candidates_jsonl(out_path(cfg, CANDIDATES_FILE))?;
    let lm = language_model(&inputs, cfg)?;
    let sentence_model = CnnComplexity {
        model: sentence_model(&inputs, cfg)?,
        table: Arc::clone(&inputs.embeddings),
    };
    let embedder = idf_embedder(&inputs.corpus, Arc::clone(&inputs.embeddings));
    let models = Rerankers {
        lm: &lm,
        embedder: &embedder,
        sentence_model: &sentence_model,
    };
    let cluster_cfg = cluster.then_some(ClusterConfig {
        k: cfg.clusters,
        max_iters: cfg.cluster_max_iters,
        seed: cfg.seed,
    });
    let selections = rerank_all(&lists, cluster_cfg.as_ref(), &cfg.weights, &models)?;
    let scored: Vec<ScoredList> = lists
        .iter()
        .zip(&selections)
        .map(|(l, s)| {
            let source: Vec<String> = l.source.split_whitespace().map(str::to_string).collect();
            ScoredList::new(&source, &s.ranked, 0)
        })
        .collect();
    write_scored_jsonl(out_path(cfg, "scored.jsonl"), &scored)?;
    let text: String = selections.iter().map(|s| s.output.join(" ") + "\n").collect();
    let path = out_path(cfg, OUTPUTS_FILE);
    write_file(&path, &text)?;
    println!("reranked {} candidate lists -> {}", selections.len(), path.display());
    Ok(())
}

/// Lines of `path`, keeping empty lines as empty outputs.
fn read_outputs(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

pub fn evaluate(cfg: &PipelineConfig, system: Option<PathBuf>, name: &str) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let sources = inputs.test_sources();
    let references = inputs.test_references();
    let refs: Vec<Vec<Vec<String>>> = references.iter().map(|r| vec![r.clone()]).collect();
    let path = system.unwrap_or_else(|| out_path(cfg, OUTPUTS_FILE));
    let outputs = read_outputs(&path)?;
    if outputs.len() != sources.len() {
        return Err(Error::invalid(format!(
            "{} has {} lines but the test split has {} sources",
            path.display(),
            outputs.len(),
            sources.len()
        )));
    }
    let rows = vec![
        report_row("Complex", &sources, &sources, &refs)?,
        report_row("Reference", &references, &sources, &refs)?,
        report_row(name, &outputs, &sources, &refs)?,
    ];
    write_report_tsv(out_path(cfg, "evaluation.tsv"), &rows)?;
    print!("{}", format_report_table(&rows));
    Ok(())
}

pub fn pipeline(cfg: &PipelineConfig) -> Result<()> {
    let outcome = run_pipeline(cfg)?;
    let report = std::fs::read_to_string(out_path(cfg, "report.txt")).map_err(|e| Error::io(out_path(cfg, "report.txt"), e))?;
    print!("{report}");
    let names: Vec<&str> = cfg.variants.iter().map(|v: &VariantSpec| v.name.as_str()).collect();
    info!("variants {}", names.join(", "));
    println!(
        "{} output files, manifest -> {}",
        outcome.manifest.outputs.len(),
        out_path(cfg, lexsimp::pipeline::MANIFEST_FILE).display()
    );
    Ok(())
}
