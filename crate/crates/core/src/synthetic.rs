//! Seeded generator for a small self-contained corpus: a lexicon with a
//! latent reading level per word, word embeddings, a leveled corpus,
//! aligned complex/simple pairs and a synonym-substitution corpus.
//!
//! Content words are pronounceable pseudo-words grouped into concepts; each
//! concept has one simple (level 0-1), one middle (level 2) and one complex
//! (level 3-4) synonym. A document at level `l` draws content words from
//! levels `<= l` only, so the per-level counts carry the latent level.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_stopword, write_file, write_pairs_tsv, AlignedPair, LeveledCorpus, LeveledDocument, NUM_LEVELS};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
const FINAL_VOWELS: &[char] = &['a', 'i', 'o', 'u'];
const PREPOSITIONS: &[&str] = &["in", "with", "on", "for", "from", "at", "by"];
const DETERMINERS: &[&str] = &["the", "a"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    Noun,
    Verb,
    Adj,
}

impl Pos {
    const ALL: [Pos; 3] = [Pos::Noun, Pos::Verb, Pos::Adj];

    fn tag(self) -> &'static str {
        match self {
            Pos::Noun => "n",
            Pos::Verb => "v",
            Pos::Adj => "a",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub concepts: usize,
    pub embed_dim: usize,
    pub sentences_per_level: usize,
    pub sentences_per_doc: usize,
    pub pairs: usize,
    pub pair_concepts: usize,
    pub synonym_pairs: usize,
    pub synonym_concepts: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            concepts: 800,
            embed_dim: 16,
            sentences_per_level: 4000,
            sentences_per_doc: 20,
            pairs: 500,
            pair_concepts: 120,
            synonym_pairs: 300,
            synonym_concepts: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWord {
    pub word: String,
    pub level: u8,
    pub concept: usize,
    pub pos: Pos,
    /// Relative frequency before the per-level pool normalization.
    pub weight: f64,
}

/// Shared state of one generated world.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: SyntheticConfig,
    pub words: Vec<SyntheticWord>,
    /// Word indices of each concept, sorted by level (simplest first).
    pub concepts: Vec<Vec<usize>>,
    pub embeddings: EmbeddingTable<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    p_adj: f64,
    p_pp: f64,
    p_clause: f64,
}

impl Shape {
    fn at_level(level: u8) -> Self {
        let l = f64::from(level);
        Self {
            p_adj: 0.2 + 0.1 * l,
            p_pp: 0.15 + 0.1 * l,
            p_clause: 0.1 + 0.08 * l,
        }
    }

    fn expected_content(&self) -> f64 {
        // subject/object nouns + verb, adjectives, two optional PPs, optional clause
        3.0 + 2.0 * self.p_adj + 2.0 * self.p_pp * (1.0 + self.p_adj) + self.p_clause * 3.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Word(&'static str),
    Content(Pos),
}

/// A run of slots; phrases sharing a group id are dropped together on the
/// simple side, `None` marks the sentence core.
#[derive(Debug, Clone)]
struct Phrase {
    group: Option<usize>,
    slots: Vec<Slot>,
}

struct Builder<'r> {
    shape: Shape,
    rng: &'r mut ChaCha8Rng,
    groups: usize,
    out: Vec<Phrase>,
}

impl Builder<'_> {
    fn new_group(&mut self) -> Option<usize> {
        self.groups += 1;
        Some(self.groups)
    }

    fn push(&mut self, group: Option<usize>, slots: Vec<Slot>) {
        self.out.push(Phrase { group, slots });
    }

    fn noun_phrase(&mut self, lead: Option<&'static str>, group: Option<usize>) {
        let mut slots: Vec<Slot> = lead.into_iter().map(Slot::Word).collect();
        slots.push(Slot::Word(DETERMINERS[self.rng.random_range(0..DETERMINERS.len())]));
        self.push(group, slots);
        if self.rng.random_bool(self.shape.p_adj) {
            let g = group.or_else(|| self.new_group());
            self.push(g, vec![Slot::Content(Pos::Adj)]);
        }
        self.push(group, vec![Slot::Content(Pos::Noun)]);
    }
}

/// Subject, verb, object, up to two prepositional phrases and an optional
/// coordinated clause. Adjectives and the trailing phrases are droppable.
fn sentence_skeleton(shape: Shape, rng: &mut ChaCha8Rng) -> Vec<Phrase> {
    let mut b = Builder { shape, rng, groups: 0, out: Vec::new() };
    b.noun_phrase(None, None);
    b.push(None, vec![Slot::Content(Pos::Verb)]);
    b.noun_phrase(None, None);
    for _ in 0..2 {
        if b.rng.random_bool(shape.p_pp) {
            let prep = PREPOSITIONS[b.rng.random_range(0..PREPOSITIONS.len())];
            let g = b.new_group();
            b.noun_phrase(Some(prep), g);
        }
    }
    if b.rng.random_bool(shape.p_clause) {
        let g = b.new_group();
        b.noun_phrase(Some("and"), g);
        b.push(g, vec![Slot::Content(Pos::Verb)]);
        b.noun_phrase(None, g);
    }
    b.push(None, vec![Slot::Word(".")]);
    b.out
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn pseudo_word(syllables: usize, rng: &mut ChaCha8Rng) -> String {
    let mut w = String::new();
    for i in 0..syllables {
        w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())]);
        let last = i + 1 == syllables;
        let closed = rng.random_bool(0.35);
        // an open final `e` would be read as silent
        let vowels = if last && !closed { FINAL_VOWELS } else { VOWELS };
        w.push(vowels[rng.random_range(0..vowels.len())]);
        if closed {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())]);
        }
    }
    w
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

impl SyntheticWorld {
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        if config.concepts < config.pair_concepts.max(config.synonym_concepts) || config.embed_dim == 0 {
            return Err(Error::config("synthetic", "concept counts or embedding size out of range"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut seen: HashSet<String> = HashSet::new();
        let mut words = Vec::new();
        let mut concepts = Vec::new();
        for c in 0..config.concepts {
            let pos = Pos::ALL[c % 3];
            let levels = [
                rng.random_range(0..=1u8),
                2,
                rng.random_range(3..=4u8),
            ];
            let mut members = Vec::new();
            for level in levels {
                let syl = 1.0 + 0.6 * f64::from(level) + 0.9 * gaussian(&mut rng);
                let mut syl = syl.round().clamp(1.0, 6.0) as usize;
                let mut tries = 0;
                let word = loop {
                    let w = pseudo_word(syl, &mut rng);
                    if !is_stopword(&w) && seen.insert(w.clone()) {
                        break w;
                    }
                    tries += 1;
                    if tries % 50 == 0 {
                        syl += 1;
                    }
                };
                let weight = (0.8 * gaussian(&mut rng)).exp();
                members.push(words.len());
                words.push(SyntheticWord { word, level, concept: c, pos, weight });
            }
            concepts.push(members);
        }
        balance_frequencies(&mut words);

        let dim = config.embed_dim;
        let level_dir = unit_vector(dim, &mut rng);
        let mut embeddings = EmbeddingTable::new(dim);
        let concept_vecs: Vec<Vec<f64>> =
            (0..config.concepts).map(|_| (0..dim).map(|_| gaussian(&mut rng) * 0.35).collect()).collect();
        for w in &words {
            let shift = (f64::from(w.level) - 2.0) * 0.6;
            let v: Vec<f64> = (0..dim)
                .map(|i| level_dir[i] * shift + concept_vecs[w.concept][i] + 0.12 * gaussian(&mut rng))
                .collect();
            embeddings.insert(w.word.clone(), v)?;
        }
        let mut function: BTreeSet<&str> = PREPOSITIONS.iter().chain(DETERMINERS).copied().collect();
        function.insert("and");
        for f in function {
            let v = (0..dim).map(|_| 0.1 * gaussian(&mut rng)).collect();
            embeddings.insert(f, v)?;
        }
        Ok(Self { config: config.clone(), words, concepts, embeddings })
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &SyntheticWord> {
        self.words.iter()
    }

    /// Documents at every level, `sentences_per_level` sentences each.
    pub fn leveled_corpus(&self) -> Result<LeveledCorpus> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_0001);
        let per_doc = self.config.sentences_per_doc.max(1);
        let mut documents = Vec::new();
        for level in 0..NUM_LEVELS as u8 {
            let mut pickers = Vec::new();
            for pos in Pos::ALL {
                let idx: Vec<usize> = (0..self.words.len())
                    .filter(|&i| self.words[i].pos == pos && self.words[i].level <= level)
                    .collect();
                let dist = WeightedIndex::new(idx.iter().map(|&i| self.words[i].weight))
                    .map_err(|e| Error::invalid(format!("word pool at level {level}: {e}")))?;
                pickers.push((idx, dist));
            }
            let shape = Shape::at_level(level);
            let sentences: Vec<Vec<String>> = (0..self.config.sentences_per_level)
                .map(|_| {
                    let skeleton = sentence_skeleton(shape, &mut rng);
                    render(&skeleton, |pos, rng| {
                        let (idx, dist) = &pickers[pos as usize];
                        self.words[idx[dist.sample(rng)]].word.clone()
                    }, &mut rng)
                })
                .collect();
            for (d, chunk) in sentences.chunks(per_doc).enumerate() {
                documents.push(LeveledDocument {
                    doc_id: format!("L{level}-{d:04}"),
                    level,
                    sentences: chunk.to_vec(),
                });
            }
        }
        LeveledCorpus::new(documents)
    }

    fn concept_subset(&self, n: usize, salt: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ salt);
        let mut ids: Vec<usize> = (0..self.concepts.len()).collect();
        ids.shuffle(&mut rng);
        let chosen = &ids[..n];
        Pos::ALL
            .iter()
            .map(|&pos| chosen.iter().copied().filter(|&c| self.words[self.concepts[c][0]].pos == pos).collect())
            .collect()
    }

    /// Complex sentences (levels 3-4) with their simple counterparts
    /// (levels 0-1): every concept is rewritten to its simplest synonym and
    /// optional phrases are dropped with probability one half.
    pub fn aligned_pairs(&self) -> Result<Vec<AlignedPair>> {
        let by_pos = self.concept_subset(self.config.pair_concepts, 0x5eed_0002);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_0003);
        (0..self.config.pairs)
            .map(|_| {
                let hi = rng.random_range(3..=4u8);
                let lo = rng.random_range(0..=1u8);
                let skeleton = sentence_skeleton(Shape::at_level(hi), &mut rng);
                let mut concepts = Vec::new();
                let complex = render(&skeleton, |pos, rng| {
                    let pool = &by_pos[pos as usize];
                    let c = pool[rng.random_range(0..pool.len())];
                    concepts.push(c);
                    let members = &self.concepts[c];
                    let w = members.iter().rev().find(|&&i| self.words[i].level <= hi).unwrap_or(&members[0]);
                    self.words[*w].word.clone()
                }, &mut rng);
                let mut seen = HashSet::new();
                let mut dropped = HashSet::new();
                for p in &skeleton {
                    if let Some(g) = p.group {
                        if !seen.contains(&g) {
                            seen.insert(g);
                            if rng.random_bool(0.5) {
                                dropped.insert(g);
                            }
                        }
                    }
                }
                let mut simple = Vec::new();
                let mut next_concept = concepts.iter();
                for p in &skeleton {
                    let drop = p.group.is_some_and(|g| dropped.contains(&g));
                    for slot in &p.slots {
                        let word = match slot {
                            Slot::Word(w) => w.to_string(),
                            Slot::Content(_) => {
                                let c = *next_concept.next().expect("one concept per content slot");
                                self.words[self.concepts[c][0]].word.clone()
                            }
                        };
                        if !drop {
                            simple.push(word);
                        }
                    }
                }
                AlignedPair::new(complex, simple, hi, lo)
            })
            .collect()
    }

    /// One-word sentences `x .` where the source `x` is the complex member
    /// of a concept. Every concept gets the same number of pairs, half of
    /// them targeting its simple member and half its complex member, so the
    /// target distribution is exactly balanced and any systematic preference
    /// of a trained model comes from its loss.
    pub fn synonym_pairs(&self) -> Result<Vec<AlignedPair>> {
        let pool: Vec<usize> = self.concept_subset(self.config.synonym_concepts, 0x5eed_0004).concat();
        let per_concept = (self.config.synonym_pairs / pool.len().max(1)).max(2) / 2 * 2;
        let mut pairs = Vec::with_capacity(pool.len() * per_concept);
        for &c in &pool {
            let members = &self.concepts[c];
            let source = vec![self.words[members[2]].word.clone(), ".".to_string()];
            for i in 0..per_concept {
                let pick = if i % 2 == 0 { members[0] } else { members[2] };
                let target = vec![self.words[pick].word.clone(), ".".to_string()];
                pairs.push(AlignedPair::new(source.clone(), target, 4, 0)?);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_0005);
        pairs.shuffle(&mut rng);
        Ok(pairs)
    }

    /// `word<TAB>level<TAB>concept<TAB>pos` for every content word.
    pub fn write_words_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for w in &self.words {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", w.word, w.level, w.concept, w.pos.tag()));
        }
        write_file(path, &out)
    }
}

fn render(
    skeleton: &[Phrase],
    mut fill: impl FnMut(Pos, &mut ChaCha8Rng) -> String,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    skeleton
        .iter()
        .flat_map(|p| p.slots.iter())
        .map(|slot| match slot {
            Slot::Word(w) => w.to_string(),
            Slot::Content(pos) => fill(*pos, rng),
        })
        .collect()
}

/// Paths of the files written by [`write_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFiles {
    pub corpus: PathBuf,
    pub pairs: PathBuf,
    pub synonyms: PathBuf,
    pub embeddings: PathBuf,
    pub words: PathBuf,
    pub generator: PathBuf,
}

impl DatasetFiles {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            corpus: dir.join("corpus.tsv"),
            pairs: dir.join("pairs.tsv"),
            synonyms: dir.join("synonyms.tsv"),
            embeddings: dir.join("embeddings.txt"),
            words: dir.join("words.tsv"),
            generator: dir.join("generator.json"),
        }
    }
}

/// Generates a world and writes all of its files into `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, config: &SyntheticConfig) -> Result<DatasetFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = DatasetFiles::in_dir(dir);
    let world = SyntheticWorld::generate(config)?;
    world.leveled_corpus()?.write_tsv(&files.corpus)?;
    write_pairs_tsv(&files.pairs, &world.aligned_pairs()?)?;
    write_pairs_tsv(&files.synonyms, &world.synonym_pairs()?)?;
    world.embeddings.write(&files.embeddings)?;
    world.write_words_tsv(&files.words)?;
    write_file(&files.generator, &(serde_json::to_string_pretty(config)? + "\n"))?;
    Ok(files)
}

/// Rescales word weights so a word's expected corpus frequency does not
/// depend on its level; without it words of low levels, which appear in
/// every document, would be systematically more frequent.
fn balance_frequencies(words: &mut [SyntheticWord]) {
    let slots: Vec<f64> = (0..NUM_LEVELS as u8).map(|l| Shape::at_level(l).expected_content()).collect();
    let mut g = [1.0f64; NUM_LEVELS];
    for _ in 0..50 {
        let mut pool = [0.0f64; NUM_LEVELS];
        for w in words.iter() {
            for (l, p) in pool.iter_mut().enumerate() {
                if usize::from(w.level) <= l {
                    *p += w.weight * g[usize::from(w.level)];
                }
            }
        }
        let mut next = [0.0f64; NUM_LEVELS];
        for (lw, n) in next.iter_mut().enumerate() {
            let exposure: f64 = (lw..NUM_LEVELS).map(|l| slots[l] / pool[l]).sum();
            *n = 1.0 / exposure;
        }
        let mean = next.iter().sum::<f64>() / NUM_LEVELS as f64;
        g = next.map(|x| x / mean);
    }
    for w in words.iter_mut() {
        w.weight *= g[usize::from(w.level)];
    }
}
