//! Leveled corpora, aligned sentence pairs, word-level counts and the
//! count-based word complexity labelling.

mod stopwords;
mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use stopwords::{is_stopword, STOPWORDS};
pub use tokenize::{
    demask, is_content, is_number, is_placeholder, is_punctuation, mask_entities, normalize,
    preprocess, split_tokens, tokenize, MaskedSentence, Placeholder,
};

/// Number of reading levels; level 4 is the original complex text.
pub const NUM_LEVELS: usize = 5;
pub const MAX_LEVEL: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub is_content: bool,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        let surface = normalize(&surface.into());
        let is_content = is_content(&surface);
        Self {
            surface,
            is_content,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeveledDocument {
    pub doc_id: String,
    pub level: u8,
    pub sentences: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeveledCorpus {
    pub documents: Vec<LeveledDocument>,
}

impl LeveledCorpus {
    pub fn new(documents: Vec<LeveledDocument>) -> Result<Self> {
        for d in &documents {
            check_level(d.level)?;
        }
        Ok(Self { documents })
    }

    /// Reads `level<TAB>doc_id<TAB>sentence` lines. Sentences are tokenized,
    /// masked and lowercased; lines of one `(doc_id, level)` are grouped in
    /// order of first appearance.
    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut documents: Vec<LeveledDocument> = Vec::new();
        let mut index: HashMap<(String, u8), usize> = HashMap::new();
        for (lineno, line) in read_lines(path)? {
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, lineno, "expected level<TAB>doc_id<TAB>sentence"));
            }
            let level = parse_level(fields[0]).map_err(|m| Error::parse(path, lineno, m))?;
            let key = (fields[1].to_string(), level);
            let slot = *index.entry(key).or_insert_with(|| {
                documents.push(LeveledDocument {
                    doc_id: fields[1].to_string(),
                    level,
                    sentences: Vec::new(),
                });
                documents.len() - 1
            });
            documents[slot].sentences.push(preprocess(fields[2]).tokens);
        }
        Ok(Self { documents })
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for d in &self.documents {
            for s in &d.sentences {
                out.push_str(&format!("{}\t{}\t{}\n", d.level, d.doc_id, s.join(" ")));
            }
        }
        write_file(path, &out)
    }

    pub fn is_empty(&self) -> bool {
        self.documents.iter().all(|d| d.sentences.is_empty())
    }

    /// `(sentence, level)` pairs, used to train the sentence complexity model.
    pub fn labeled_sentences(&self) -> Vec<(Vec<String>, u8)> {
        self.documents
            .iter()
            .flat_map(|d| d.sentences.iter().map(move |s| (s.clone(), d.level)))
            .collect()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Vec<String>> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }
}

/// Per-word occurrence counts at each reading level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordLevelCounts {
    counts: BTreeMap<String, [u64; NUM_LEVELS]>,
}

impl WordLevelCounts {
    /// Builds counts from explicit rows; all-zero rows are rejected.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, [u64; NUM_LEVELS])>,
        S: Into<String>,
    {
        let mut counts = BTreeMap::new();
        for (w, c) in rows {
            let w = w.into();
            if c.iter().all(|&x| x == 0) {
                return Err(Error::invalid(format!("word `{w}` has zero counts at every level")));
            }
            counts.insert(w, c);
        }
        Ok(Self { counts })
    }

    pub fn get(&self, word: &str) -> Option<&[u64; NUM_LEVELS]> {
        self.counts.get(word)
    }

    pub fn total(&self, word: &str) -> u64 {
        self.counts.get(word).map_or(0, |c| c.iter().sum())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Words in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &[u64; NUM_LEVELS])> {
        self.counts.iter()
    }
}

/// Exact per-level multiset counts; placeholders are skipped.
pub fn count_by_level(corpus: &LeveledCorpus) -> Result<WordLevelCounts> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot count an empty corpus"));
    }
    let mut counts: BTreeMap<String, [u64; NUM_LEVELS]> = BTreeMap::new();
    for doc in &corpus.documents {
        check_level(doc.level)?;
        for tok in doc.sentences.iter().flatten() {
            if is_placeholder(tok) {
                continue;
            }
            counts.entry(tok.clone()).or_default()[doc.level as usize] += 1;
        }
    }
    Ok(WordLevelCounts { counts })
}

/// How the labelling walks down from level 3 to level 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentPolicy {
    /// Stop at the first level where a condition fails.
    #[default]
    StopOnFailure,
    /// Visit every level 3..0 and keep the last one that passed.
    FullScan,
}

/// Complexity label from raw per-level counts (`counts[i]` = occurrences at level `i`).
pub fn label_counts(counts: &[u64; NUM_LEVELS], policy: DescentPolicy) -> u8 {
    let c4 = counts[4] as u128;
    let mut label = MAX_LEVEL;
    for i in (0..4).rev() {
        let ci = counts[i] as u128;
        let next = counts[i + 1] as u128;
        // c_i >= 0.7 c_{i+1} and c_i >= 0.4 c_4, in integer arithmetic
        let keeps = 10 * ci >= 7 * next && 10 * ci >= 4 * c4;
        if keeps {
            label = i as u8;
        } else if policy == DescentPolicy::StopOnFailure {
            break;
        }
    }
    label
}

pub fn label_word_complexity(
    counts: &WordLevelCounts,
    word: &str,
    policy: DescentPolicy,
) -> Result<u8> {
    counts
        .get(word)
        .map(|c| label_counts(c, policy))
        .ok_or_else(|| Error::MissingVocab(word.to_string()))
}

/// Labels every word in `counts`.
pub fn label_lexicon(counts: &WordLevelCounts, policy: DescentPolicy) -> Vec<(String, u8)> {
    counts
        .iter()
        .map(|(w, c)| (w.clone(), label_counts(c, policy)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub complex: Vec<String>,
    pub simple: Vec<String>,
    pub complex_level: u8,
    pub simple_level: u8,
}

impl AlignedPair {
    pub fn new(complex: Vec<String>, simple: Vec<String>, complex_level: u8, simple_level: u8) -> Result<Self> {
        check_level(complex_level)?;
        check_level(simple_level)?;
        if complex_level <= simple_level {
            return Err(Error::invalid(format!(
                "complex level {complex_level} must exceed simple level {simple_level}"
            )));
        }
        Ok(Self {
            complex,
            simple,
            complex_level,
            simple_level,
        })
    }
}

/// Reads `complex_level<TAB>simple_level<TAB>complex<TAB>simple` lines.
pub fn read_pairs_tsv(path: impl AsRef<Path>) -> Result<Vec<AlignedPair>> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::parse(path, lineno, "expected 4 tab-separated fields"));
        }
        let cl = parse_level(f[0]).map_err(|m| Error::parse(path, lineno, m))?;
        let sl = parse_level(f[1]).map_err(|m| Error::parse(path, lineno, m))?;
        let pair = AlignedPair::new(preprocess(f[2]).tokens, preprocess(f[3]).tokens, cl, sl)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn write_pairs_tsv(path: impl AsRef<Path>, pairs: &[AlignedPair]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            p.complex_level,
            p.simple_level,
            p.complex.join(" "),
            p.simple.join(" ")
        ));
    }
    write_file(path, &out)
}

/// Drops pairs whose levels are only one apart.
pub fn filter_adjacent_levels(pairs: &[AlignedPair]) -> Vec<AlignedPair> {
    pairs
        .iter()
        .filter(|p| p.complex_level >= p.simple_level + 2)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T = AlignedPair> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

/// Seeded shuffle, then floor allocation of validation/test with the
/// remainder going to train.
pub fn split_items<T: Clone>(items: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit<T>> {
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test].iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::invalid("split ratios must lie in [0, 1]"));
    }
    if (r_train + r_val + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split ratios must sum to 1"));
    }
    if items.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 items to split, got {}", items.len())));
    }
    let n = items.len();
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_val = floor(r_val);
    let n_test = floor(r_test);
    let n_train = n - n_val - n_test;
    let test = shuffled.split_off(n_train + n_val);
    let validation = shuffled.split_off(n_train);
    Ok(DatasetSplit {
        train: shuffled,
        validation,
        test,
        seed,
    })
}

pub fn split_corpus(pairs: &[AlignedPair], ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    split_items(pairs, ratios, seed)
}

fn check_level(level: u8) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::invalid(format!("level {level} outside 0..=4")));
    }
    Ok(())
}

fn parse_level(s: &str) -> std::result::Result<u8, String> {
    match s.trim().parse::<u8>() {
        Ok(l) if l <= MAX_LEVEL => Ok(l),
        _ => Err(format!("invalid level `{s}`")),
    }
}

/// Non-empty lines with their 1-based line numbers.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if !line.trim().is_empty() {
            out.push((i + 1, line.to_string()));
        }
    }
    Ok(out)
}

pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn doc(level: u8, sents: &[&str]) -> LeveledDocument {
        LeveledDocument {
            doc_id: "d".into(),
            level,
            sentences: sents.iter().map(|s| toks(s)).collect(),
        }
    }

    /// counts written high level first, as in the hand traces: [c4, c3, c2, c1, c0]
    fn rev(c: [u64; 5]) -> [u64; 5] {
        [c[4], c[3], c[2], c[1], c[0]]
    }

    #[test]
    fn counts_single_sentence() {
        let corpus = LeveledCorpus::new(vec![doc(4, &["a b a"])]).unwrap();
        let counts = count_by_level(&corpus).unwrap();
        assert_eq!(counts.get("a"), Some(&[0, 0, 0, 0, 2]));
        assert_eq!(counts.get("b"), Some(&[0, 0, 0, 0, 1]));
        assert_eq!(counts.get("zzz"), None);
    }

    #[test]
    fn counts_two_levels_by_hand() {
        let corpus = LeveledCorpus::new(vec![
            doc(4, &["the cat sat", "the ENT@1 cat"]),
            doc(1, &["a cat sat NUM@1"]),
        ])
        .unwrap();
        let counts = count_by_level(&corpus).unwrap();
        assert_eq!(counts.get("the"), Some(&[0, 0, 0, 0, 2]));
        assert_eq!(counts.get("cat"), Some(&[0, 1, 0, 0, 2]));
        assert_eq!(counts.get("sat"), Some(&[0, 1, 0, 0, 1]));
        assert_eq!(counts.get("a"), Some(&[0, 1, 0, 0, 0]));
        assert_eq!(counts.get("ENT@1"), None);
        assert_eq!(counts.len(), 4);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(count_by_level(&LeveledCorpus::default()).is_err());
    }

    #[test]
    fn label_hand_traces() {
        let p = DescentPolicy::StopOnFailure;
        assert_eq!(label_counts(&[0, 0, 0, 0, 10], p), 4);
        assert_eq!(label_counts(&rev([100, 90, 80, 75, 70]), p), 0);
        assert_eq!(label_counts(&rev([100, 60, 59, 0, 0]), p), 4);
    }

    #[test]
    fn descent_policies_differ_on_gap() {
        // absent from level 3 but frequent at level 0
        let c = rev([10, 0, 10, 10, 10]);
        assert_eq!(label_counts(&c, DescentPolicy::StopOnFailure), 4);
        assert_eq!(label_counts(&c, DescentPolicy::FullScan), 0);
    }

    #[test]
    fn label_unknown_word_is_error() {
        let counts = WordLevelCounts::from_rows([("a", [0, 0, 0, 0, 1])]).unwrap();
        assert!(matches!(
            label_word_complexity(&counts, "b", DescentPolicy::default()),
            Err(Error::MissingVocab(w)) if w == "b"
        ));
        assert_eq!(label_word_complexity(&counts, "a", DescentPolicy::default()).unwrap(), 4);
    }

    #[test]
    fn zero_rows_rejected() {
        assert!(WordLevelCounts::from_rows([("a", [0u64; 5])]).is_err());
    }

    fn pair(c: u8, s: u8) -> AlignedPair {
        AlignedPair::new(toks("x y"), toks("x"), c, s).unwrap()
    }

    #[test]
    fn adjacent_levels_filtered() {
        assert!(filter_adjacent_levels(&[pair(4, 3)]).is_empty());
        assert_eq!(filter_adjacent_levels(&[pair(4, 0)]).len(), 1);
        assert!(filter_adjacent_levels(&[]).is_empty());
        let all = vec![pair(4, 3), pair(3, 2), pair(2, 1), pair(1, 0), pair(4, 2), pair(3, 0)];
        let kept = filter_adjacent_levels(&all);
        assert_eq!(kept, vec![pair(4, 2), pair(3, 0)]);
    }

    #[test]
    fn pair_levels_validated() {
        assert!(AlignedPair::new(vec![], vec![], 2, 2).is_err());
        assert!(AlignedPair::new(vec![], vec![], 5, 2).is_err());
    }

    #[test]
    fn split_sizes() {
        let items: Vec<u32> = (0..100).collect();
        let s = split_items(&items, (0.9, 0.05, 0.05), 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (90, 5, 5));
        let s = split_items(&items[..7], (0.9, 0.05, 0.05), 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 0, 0));
        assert!(split_items(&items[..2], (0.9, 0.05, 0.05), 7).is_err());
        assert!(split_items(&items, (0.9, 0.05, 0.1), 7).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let items: Vec<u32> = (0..200).collect();
        let a = split_items(&items, (0.8, 0.1, 0.1), 42).unwrap();
        let b = split_items(&items, (0.8, 0.1, 0.1), 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<u32> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
        all.sort();
        assert_eq!(all, items);
        let c = split_items(&items, (0.8, 0.1, 0.1), 43).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("levels.tsv");
        std::fs::write(&p, "4\td1\tThe cat sat on Mustafa Kemal's mat.\n0\td1\tA cat sat.\n4\td2\tHi.\n").unwrap();
        let corpus = LeveledCorpus::read_tsv(&p).unwrap();
        assert_eq!(corpus.documents.len(), 3);
        assert_eq!(corpus.documents[0].sentences[0], toks("the cat sat on ENT@1 's mat ."));
        std::fs::write(&p, "7\td1\tbad level\n").unwrap();
        assert!(matches!(LeveledCorpus::read_tsv(&p), Err(Error::Parse { line: 1, .. })));

        let pp = dir.path().join("pairs.tsv");
        std::fs::write(&pp, "4\t0\tThe dog barked loudly.\tThe dog barked.\n").unwrap();
        let pairs = read_pairs_tsv(&pp).unwrap();
        assert_eq!(pairs[0].simple, toks("the dog barked ."));
        std::fs::write(&pp, "1\t3\ta\tb\n").unwrap();
        assert!(read_pairs_tsv(&pp).is_err());
    }

    proptest! {
        #[test]
        fn label_in_range(c in proptest::array::uniform5(0u64..1000)) {
            prop_assume!(c.iter().any(|&x| x > 0));
            prop_assert!(label_counts(&c, DescentPolicy::StopOnFailure) <= 4);
            prop_assert!(label_counts(&c, DescentPolicy::FullScan) <= 4);
        }

        // c_0 only appears on the passing side of a condition, so raising it
        // can only lower the label.
        #[test]
        fn raising_level0_count_never_raises_label(c in proptest::array::uniform5(0u64..500), bump in 0u64..500) {
            let mut d = c;
            d[0] += bump;
            for p in [DescentPolicy::StopOnFailure, DescentPolicy::FullScan] {
                prop_assert!(label_counts(&d, p) <= label_counts(&c, p));
            }
        }

        #[test]
        fn filter_is_idempotent(levels in proptest::collection::vec((0u8..=4, 0u8..=4), 0..30)) {
            let pairs: Vec<AlignedPair> = levels
                .into_iter()
                .filter(|(c, s)| c > s)
                .map(|(c, s)| pair(c, s))
                .collect();
            let once = filter_adjacent_levels(&pairs);
            prop_assert_eq!(filter_adjacent_levels(&once), once.clone());
            prop_assert!(once.iter().all(|p| p.complex_level - p.simple_level >= 2));
        }

        #[test]
        fn count_totals_match_tokens(sents in proptest::collection::vec(proptest::collection::vec("[a-c]|ENT@1|NUM@2", 1..6), 1..5), level in 0u8..=4) {
            let corpus = LeveledCorpus::new(vec![LeveledDocument { doc_id: "x".into(), level, sentences: sents.clone() }]).unwrap();
            let counts = count_by_level(&corpus).unwrap();
            let expected = sents.iter().flatten().filter(|t| !is_placeholder(t)).count() as u64;
            let got: u64 = counts.iter().map(|(_, c)| c.iter().sum::<u64>()).sum();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn raising_intermediate_count_can_raise_label() {
        // Raising c_1 raises the bar for level 0, so the label goes 0 -> 1.
        let base = [10, 10, 10, 10, 10];
        let mut bumped = base;
        bumped[1] = 100;
        assert_eq!(label_counts(&base, DescentPolicy::StopOnFailure), 0);
        assert_eq!(label_counts(&bumped, DescentPolicy::StopOnFailure), 1);
    }
}
