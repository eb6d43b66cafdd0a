use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lexsimp::synthetic::{write_dataset, SyntheticConfig};
use serde_json::{json, Value};
use tempfile::TempDir;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(extra: Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let world = SyntheticConfig {
            seed: 2,
            concepts: 120,
            embed_dim: 8,
            sentences_per_level: 200,
            sentences_per_doc: 10,
            pairs: 100,
            pair_concepts: 30,
            synonym_pairs: 24,
            synonym_concepts: 12,
        };
        write_dataset(dir.path(), &world).unwrap();
        let mut cfg = json!({
            "seed": 3,
            "paths.corpus": "corpus.tsv",
            "paths.pairs": "pairs.tsv",
            "paths.embeddings": "embeddings.txt",
            "paths.out": "out",
            "decode.beam": 6,
            "decode.max_len": 20,
            "cluster.k": 2,
            "lm.order": 3,
            "scorer.epochs": 3,
            "scorer.embed_dim": 8,
            "scorer.hidden_dim": 8,
            "sentence_model.epochs": 1,
            "sentence_model.max_examples": 80,
            "split.ratios": [0.8, 0.0, 0.2],
        });
        for (k, v) in extra.as_object().unwrap() {
            cfg[k] = v.clone();
        }
        std::fs::write(dir.path().join("run.json"), cfg.to_string()).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.path("run.json");
        Command::new(env!("CARGO_BIN_EXE_lexsimp"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(&config)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn stages_chain_through_the_output_directory() {
    let ws = Workspace::new(json!({}));
    ws.ok(&["label-lexicon"]);
    assert!(line_count(&ws.path("out/lexicon.tsv")) > 50);

    let table = ws.ok(&["train-word"]);
    assert!(table.contains("pearson") && table.contains("linreg"), "{table}");
    for f in ["word_model.txt", "word_model_eval.json", "word_complexity.tsv"] {
        assert!(ws.path("out").join(f).is_file(), "{f}");
    }

    ws.ok(&["train-sentence"]);
    assert!(ws.path("out/sentence_model.txt").is_file());
    ws.ok(&["train-lm"]);
    assert!(ws.path("out/lm.tsv").is_file());

    ws.ok(&["train-scorer", "--loss", "weighted"]);
    assert!(ws.path("out/scorer_weighted.json").is_file());
    assert!(ws.path("out/vocab_weights_weighted.tsv").is_file());

    ws.ok(&["decode", "--loss", "weighted", "--beam", "4", "--delta", "0.5"]);
    let lists = std::fs::read_to_string(ws.path("out/candidates.jsonl")).unwrap();
    let sources = lists.lines().count();
    assert!(sources > 0);
    for line in lists.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let n = v["candidates"].as_array().unwrap().len();
        assert!((1..=4).contains(&n), "{n} candidates for beam 4");
    }

    ws.ok(&["rerank", "--weights", "fa", "--clusters", "2"]);
    assert_eq!(line_count(&ws.path("out/outputs.txt")), sources);
    assert_eq!(line_count(&ws.path("out/scored.jsonl")), sources);

    let report = ws.ok(&["evaluate", "--name", "Mine"]);
    assert!(report.contains("Mine") && report.contains("Reference"), "{report}");
    assert_eq!(line_count(&ws.path("out/evaluation.tsv")), 4);
}

#[test]
fn decode_without_a_trained_scorer_is_a_data_error() {
    let ws = Workspace::new(json!({}));
    let out = ws.run(&["decode"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("train-scorer"));
}

#[test]
fn pipeline_runs_selected_variants_into_out_dir() {
    let ws = Workspace::new(json!({}));
    let stdout = ws.ok(&["pipeline", "--variants", "S2S,S2S-All-FA", "--out", "elsewhere", "--seed", "9"]);
    assert!(stdout.contains("S2S-All-FA"), "{stdout}");
    assert!(ws.path("elsewhere/outputs/s2s.txt").is_file());
    assert!(ws.path("elsewhere/outputs/s2s-all-fa.txt").is_file());
    assert!(!ws.path("elsewhere/outputs/s2s-fa.txt").exists());
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("elsewhere/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["split"], 9);
    assert!(!ws.path("out").exists());
}

#[test]
fn configuration_problems_exit_with_code_two() {
    let ws = Workspace::new(json!({}));
    let cases: &[&[&str]] = &[
        &["label-lexicon", "--weights", "0.5,0.5,0.1"],
        &["label-lexicon", "--weights", "fsa"],
        &["label-lexicon", "--beam", "1", "--clusters", "5"],
        &["label-lexicon", "--loss", "huber"],
        &["pipeline", "--variants", "S2S,Nope"],
    ];
    for args in cases {
        let out = ws.run(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_lexsimp"))
        .args(["--config", "/no/such/run.json", "train-lm"])
        .output()
        .unwrap();
    assert_eq!(code(&missing), 2);
    let absent = Command::new(env!("CARGO_BIN_EXE_lexsimp")).arg("train-lm").output().unwrap();
    assert_eq!(code(&absent), 2);
}

#[test]
fn data_problems_exit_with_code_three() {
    let ws = Workspace::new(json!({}));
    std::fs::write(ws.path("pairs.tsv"), "4\t0\tmissing a column\n").unwrap();
    let out = ws.run(&["label-lexicon"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    let ws = Workspace::new(json!({}));
    std::fs::write(ws.path("short.txt"), "one line\n").unwrap();
    let out = ws.run(&["evaluate", "--system", "short.txt"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn numeric_failures_exit_with_code_four() {
    let ws = Workspace::new(json!({"scorer.learning_rate": 1e300, "scorer.optimizer": "sgd"}));
    let out = ws.run(&["train-scorer"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn explicit_weights_are_accepted() {
    let ws = Workspace::new(json!({}));
    ws.ok(&["train-scorer", "--loss", "standard", "--alpha", "1.0"]);
    ws.ok(&["decode", "--loss", "standard"]);
    ws.ok(&["rerank", "--weights", "0.2,0.5,0.3", "--no-cluster"]);
    assert!(ws.path("out/outputs.txt").is_file());
}
