//! Interpolated Kneser-Ney n-gram language model.
//!
//! Sentences are padded as `<s> w1 .. wn </s>`. The highest order uses raw
//! counts; lower orders use continuation counts (number of distinct left
//! extensions), except for n-grams starting with `<s>`, which keep raw
//! counts. Each order has one absolute discount `D = n1 / (n1 + 2 n2)`
//! estimated from its count-of-counts, falling back to 0.75 when `n1` or
//! `n2` is zero. The unigram level interpolates with a uniform distribution
//! over the vocabulary (including `<unk>`), which is where unseen words get
//! their mass.
//!
//! The estimated model is stored ARPA-style: an interpolated log-probability
//! per observed n-gram and a log backoff weight per observed context.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{read_lines, write_file};
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;
const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    /// Specials first, then the remaining words in sorted order.
    fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut rest: Vec<&str> = words
            .into_iter()
            .filter(|w| ![BOS, EOS, UNK].contains(w))
            .collect();
        rest.sort_unstable();
        rest.dedup();
        let words: Vec<String> = [BOS, EOS, UNK]
            .into_iter()
            .chain(rest)
            .map(String::from)
            .collect();
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self { words, ids }
    }

    fn id(&self, w: &str) -> u32 {
        self.ids.get(w).copied().unwrap_or(UNK_ID)
    }
}

/// Raw and continuation counts of every order.
#[derive(Debug, Clone)]
pub struct NgramCounts {
    order: usize,
    vocab: Vocab,
    /// `raw[k-1]`: counts of k-grams.
    raw: Vec<HashMap<Vec<u32>, u64>>,
    /// `continuation[k-1]`: distinct left extensions of each k-gram.
    continuation: Vec<HashMap<Vec<u32>, u64>>,
}

impl NgramCounts {
    pub fn from_sentences(sentences: &[Vec<String>], order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if sentences.is_empty() {
            return Err(Error::invalid("cannot train a language model on zero sentences"));
        }
        let vocab = Vocab::from_words(sentences.iter().flatten().map(String::as_str));
        let mut raw = vec![HashMap::new(); order];
        for s in sentences {
            let mut seq = Vec::with_capacity(s.len() + 2);
            seq.push(BOS_ID);
            seq.extend(s.iter().map(|w| vocab.id(w)));
            seq.push(EOS_ID);
            for k in 1..=order {
                for win in seq.windows(k) {
                    *raw[k - 1].entry(win.to_vec()).or_insert(0) += 1;
                }
            }
        }
        let mut continuation = vec![HashMap::new(); order];
        for k in 1..order {
            for g in raw[k].keys() {
                *continuation[k - 1].entry(g[1..].to_vec()).or_insert(0) += 1;
            }
        }
        Ok(Self {
            order,
            vocab,
            raw,
            continuation,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Raw count of a token sequence (`<s>`/`</s>` allowed).
    pub fn count(&self, ngram: &[&str]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        let key: Vec<u32> = ngram.iter().map(|w| self.vocab.id(w)).collect();
        self.raw[ngram.len() - 1].get(&key).copied().unwrap_or(0)
    }

    /// Count used for estimation at order `k = g.len()`.
    fn adjusted(&self, g: &[u32]) -> u64 {
        let k = g.len();
        if k == self.order || g[0] == BOS_ID {
            self.raw[k - 1].get(g).copied().unwrap_or(0)
        } else {
            self.continuation[k - 1].get(g).copied().unwrap_or(0)
        }
    }
}

/// One ARPA-style row: interpolated ln-probability and ln backoff weight.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    logprob: f64,
    backoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnModel {
    order: usize,
    discounts: Vec<f64>,
    vocab: Vocab,
    /// `entries[k-1]`: rows for k-grams.
    entries: Vec<HashMap<Vec<u32>, Entry>>,
}

pub fn train_kn_model(sentences: &[Vec<String>], order: usize) -> Result<KnModel> {
    KnModel::estimate(&NgramCounts::from_sentences(sentences, order)?)
}

impl KnModel {
    pub fn estimate(counts: &NgramCounts) -> Result<Self> {
        let order = counts.order;
        let vocab = counts.vocab.clone();
        // predicted vocabulary: everything but <s>
        let v_size = (vocab.words.len() - 1) as f64;

        let mut discounts = Vec::with_capacity(order);
        // per order: context -> (sum of adjusted counts, number of types)
        let mut ctx_stats: Vec<HashMap<Vec<u32>, (u64, u64)>> = Vec::with_capacity(order);
        for k in 1..=order {
            let (mut n1, mut n2) = (0u64, 0u64);
            let mut stats: HashMap<Vec<u32>, (u64, u64)> = HashMap::new();
            for g in counts.raw[k - 1].keys() {
                if *g.last().unwrap() == BOS_ID {
                    continue;
                }
                let a = counts.adjusted(g);
                match a {
                    1 => n1 += 1,
                    2 => n2 += 1,
                    _ => {}
                }
                if a > 0 {
                    let e = stats.entry(g[..k - 1].to_vec()).or_insert((0, 0));
                    e.0 += a;
                    e.1 += 1;
                }
            }
            discounts.push(if n1 > 0 && n2 > 0 {
                n1 as f64 / (n1 as f64 + 2.0 * n2 as f64)
            } else {
                FALLBACK_DISCOUNT
            });
            ctx_stats.push(stats);
        }

        let mut model = Self {
            order,
            discounts,
            vocab,
            entries: vec![HashMap::new(); order],
        };

        // unigrams: every predicted word, interpolated with uniform
        let d1 = model.discounts[0];
        let (denom, types) = ctx_stats[0].get(&Vec::new()).copied().unwrap_or((0, 0));
        if denom == 0 {
            return Err(Error::Numeric("no unigram mass".into()));
        }
        let gamma0 = d1 * types as f64 / denom as f64;
        for id in 1..model.vocab.words.len() as u32 {
            let a = counts.adjusted(&[id]) as f64;
            let p = (a - d1).max(0.0) / denom as f64 + gamma0 / v_size;
            model.entries[0].insert(
                vec![id],
                Entry {
                    logprob: p.ln(),
                    backoff: 0.0,
                },
            );
        }
        model.entries[0].insert(
            vec![BOS_ID],
            Entry {
                logprob: f64::NEG_INFINITY,
                backoff: 0.0,
            },
        );

        for k in 2..=order {
            let d = model.discounts[k - 1];
            // backoff weights live on the context's own row
            for (ctx, &(denom, types)) in &ctx_stats[k - 1] {
                let gamma = d * types as f64 / denom as f64;
                if let Some(e) = model.entries[k - 2].get_mut(ctx) {
                    e.backoff = gamma.ln();
                }
            }
            let mut rows = HashMap::new();
            for g in counts.raw[k - 1].keys() {
                if *g.last().unwrap() == BOS_ID {
                    continue;
                }
                let a = counts.adjusted(g);
                if a == 0 {
                    continue;
                }
                let ctx = &g[..k - 1];
                let (denom, types) = ctx_stats[k - 1][ctx];
                let gamma = d * types as f64 / denom as f64;
                let lower = model.logprob_ids(&ctx[1..], g[k - 1]).exp();
                let p = (a as f64 - d).max(0.0) / denom as f64 + gamma * lower;
                rows.insert(
                    g.clone(),
                    Entry {
                        logprob: p.ln(),
                        backoff: 0.0,
                    },
                );
            }
            model.entries[k - 1] = rows;
        }
        Ok(model)
    }

    /// A uniform unigram model over `words` plus `</s>` and `<unk>`.
    pub fn uniform<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let vocab = Vocab::from_words(words);
        let lp = -((vocab.words.len() - 1) as f64).ln();
        let mut unigrams = HashMap::new();
        for id in 0..vocab.words.len() as u32 {
            let logprob = if id == BOS_ID { f64::NEG_INFINITY } else { lp };
            unigrams.insert(vec![id], Entry { logprob, backoff: 0.0 });
        }
        Self {
            order: 1,
            discounts: vec![FALLBACK_DISCOUNT],
            vocab,
            entries: vec![unigrams],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    /// Tokens that can be predicted: every known word, `</s>` and `<unk>`.
    pub fn predicted_vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab.words[1..].iter().map(String::as_str)
    }

    fn logprob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let ctx = &ctx[ctx.len().saturating_sub(self.order - 1)..];
        let mut key = Vec::with_capacity(ctx.len() + 1);
        key.extend_from_slice(ctx);
        key.push(w);
        if let Some(e) = self.entries[ctx.len()].get(&key) {
            return e.logprob;
        }
        if ctx.is_empty() {
            // only reachable for ids outside the predicted vocabulary
            return self.entries[0][&vec![UNK_ID]].logprob;
        }
        let backoff = self.entries[ctx.len() - 1].get(ctx).map_or(0.0, |e| e.backoff);
        backoff + self.logprob_ids(&ctx[1..], w)
    }

    /// Natural-log probability of `token` after `context`; only the last
    /// `order - 1` context tokens matter and OOV tokens map to `<unk>`.
    pub fn ngram_logprob(&self, context: &[&str], token: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|w| self.vocab.id(w)).collect();
        self.logprob_ids(&ctx, self.vocab.id(token))
    }

    /// Sum of ln-probabilities of the tokens and `</s>`, plus the token count `N`.
    pub fn sentence_logprob(&self, sentence: &[String]) -> (f64, usize) {
        let mut seq = Vec::with_capacity(sentence.len() + 2);
        seq.push(BOS_ID);
        seq.extend(sentence.iter().map(|w| self.vocab.id(w)));
        seq.push(EOS_ID);
        let mut total = 0.0;
        for i in 1..seq.len() {
            total += self.logprob_ids(&seq[..i], seq[i]);
        }
        (total, seq.len() - 1)
    }

    /// `exp(-(1/N) Σ ln p)` with `N` = tokens + 1 for `</s>`.
    pub fn sentence_perplexity(&self, sentence: &[String]) -> Result<f64> {
        if sentence.is_empty() {
            return Err(Error::invalid("perplexity of an empty sentence"));
        }
        let (lp, n) = self.sentence_logprob(sentence);
        Ok((-lp / n as f64).exp())
    }

    /// Writes `order<TAB>ngram<TAB>logprob<TAB>backoff` rows sorted by order
    /// then n-gram text, after `#`-prefixed header lines. Values are natural
    /// logs in shortest round-trip notation.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("# kn-lm v1\n");
        out.push_str(&format!("# order {}\n", self.order));
        let ds: Vec<String> = self.discounts.iter().map(|d| format!("{d:?}")).collect();
        out.push_str(&format!("# discounts {}\n", ds.join(" ")));
        for (k, rows) in self.entries.iter().enumerate() {
            let sorted: BTreeMap<String, &Entry> = rows
                .iter()
                .map(|(g, e)| {
                    let text: Vec<&str> = g.iter().map(|&i| self.vocab.words[i as usize].as_str()).collect();
                    (text.join(" "), e)
                })
                .collect();
            for (g, e) in sorted {
                out.push_str(&format!("{}\t{}\t{:?}\t{:?}\n", k + 1, g, e.logprob, e.backoff));
            }
        }
        write_file(path, &out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let lines = read_lines(path)?;
        let mut order = None;
        let mut discounts = None;
        let mut rows: Vec<(usize, Vec<String>, Entry)> = Vec::new();
        for (n, line) in &lines {
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(o) = meta.strip_prefix("order ") {
                    order = Some(o.trim().parse::<usize>().map_err(|_| Error::parse(path, *n, "bad order"))?);
                } else if let Some(d) = meta.strip_prefix("discounts ") {
                    discounts = Some(
                        d.split_whitespace()
                            .map(str::parse::<f64>)
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| Error::parse(path, *n, "bad discounts"))?,
                    );
                }
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::parse(path, *n, "expected order<TAB>ngram<TAB>logprob<TAB>backoff"));
            }
            let k: usize = f[0].parse().map_err(|_| Error::parse(path, *n, "bad order column"))?;
            let words: Vec<String> = f[1].split(' ').map(String::from).collect();
            if words.len() != k {
                return Err(Error::parse(path, *n, "n-gram length does not match order"));
            }
            let logprob: f64 = f[2].parse().map_err(|_| Error::parse(path, *n, "bad logprob"))?;
            let backoff: f64 = f[3].parse().map_err(|_| Error::parse(path, *n, "bad backoff"))?;
            rows.push((k, words, Entry { logprob, backoff }));
        }
        let order = order.ok_or_else(|| Error::parse(path, 0, "missing `# order` header"))?;
        let discounts = discounts.ok_or_else(|| Error::parse(path, 0, "missing `# discounts` header"))?;
        if order == 0 || discounts.len() != order {
            return Err(Error::parse(path, 0, "order and discount count disagree"));
        }
        let vocab = Vocab::from_words(rows.iter().filter(|r| r.0 == 1).map(|r| r.1[0].as_str()));
        let mut entries = vec![HashMap::new(); order];
        for (k, words, e) in rows {
            if k > order {
                return Err(Error::parse(path, 0, format!("{k}-gram in an order-{order} model")));
            }
            let ids: Vec<u32> = words
                .iter()
                .map(|w| vocab.ids.get(w).copied().ok_or_else(|| Error::MissingVocab(w.clone())))
                .collect::<Result<_>>()?;
            entries[k - 1].insert(ids, e);
        }
        if !entries[0].contains_key(&vec![UNK_ID]) {
            return Err(Error::parse(path, 0, "model has no <unk> unigram"));
        }
        Ok(Self {
            order,
            discounts,
            vocab,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(x: &str) -> Vec<String> {
        x.split_whitespace().map(String::from).collect()
    }

    fn corpus() -> Vec<Vec<String>> {
        [
            "the cat sat on the mat",
            "the dog sat on the log",
            "a cat saw the dog",
            "the dog saw a cat on the mat",
            "dogs and cats",
        ]
        .iter()
        .map(|x| s(x))
        .collect()
    }

    fn prob_sum(m: &KnModel, ctx: &[&str]) -> f64 {
        m.predicted_vocab().map(|w| m.ngram_logprob(ctx, w).exp()).sum()
    }

    #[test]
    fn order_one_normalizes() {
        let m = train_kn_model(&[s("a b a")], 1).unwrap();
        assert!((prob_sum(&m, &[]) - 1.0).abs() < 1e-12);
        assert!(m.ngram_logprob(&[], "a") > m.ngram_logprob(&[], "b"));
        assert!(m.ngram_logprob(&[], "zzz") < 0.0);
        assert!(train_kn_model(&[s("a")], 0).is_err());
        assert!(train_kn_model(&[], 2).is_err());
    }

    #[test]
    fn hand_computed_bigram() {
        // Corpus {a b, a c}. Bigram counts: <s> a:2, a b:1, a c:1, b </s>:1,
        // c </s>:1 -> n1 = 4, n2 = 1, D2 = 2/3. Unigram continuation counts:
        // a:1 b:1 c:1 </s>:2 -> n1 = 3, n2 = 1, D1 = 3/5, total 5, 4 types,
        // |V| = 5 (a b c </s> <unk>). p1(b) = 0.4/5 + 0.6*4/5/5 = 0.176.
        // p(b|a) = (1 - 2/3)/2 + (2/3)*2/2 * 0.176 = 0.284.
        let m = train_kn_model(&[s("a b"), s("a c")], 2).unwrap();
        assert!((m.discounts()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.discounts()[0] - 0.6).abs() < 1e-15);
        assert!((m.ngram_logprob(&[], "b").exp() - 0.176).abs() < 1e-12);
        assert!((m.ngram_logprob(&["a"], "b").exp() - 0.284).abs() < 1e-12);
        assert!((m.ngram_logprob(&[], UNK).exp() - 0.096).abs() < 1e-12);
    }

    #[test]
    fn degenerate_discount_falls_back() {
        let m = train_kn_model(&[s("a b"), s("a b")], 2).unwrap();
        assert_eq!(m.discounts(), &[0.75, 0.75]);
        assert!((prob_sum(&m, &["a"]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seen_continuation_beats_unseen() {
        let m = train_kn_model(&corpus(), 3).unwrap();
        let seen = m.ngram_logprob(&["the", "cat"], "sat");
        for w in m.predicted_vocab() {
            if w != "sat" {
                assert!(seen > m.ngram_logprob(&["the", "cat"], w), "{w}");
            }
        }
    }

    #[test]
    fn normalization_at_every_order() {
        let sents = corpus();
        let vocab: Vec<String> = {
            let mut v: Vec<String> = sents.iter().flatten().cloned().collect();
            v.sort();
            v.dedup();
            v.push("unseen".into());
            v
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for order in 1..=5 {
            let m = train_kn_model(&sents, order).unwrap();
            for _ in 0..100 {
                let len = rng.random_range(0..order + 1);
                let mut ctx: Vec<&str> = (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect();
                if rng.random_bool(0.3) {
                    ctx.insert(0, BOS);
                }
                let total = prob_sum(&m, &ctx);
                assert!((total - 1.0).abs() < 1e-6, "order {order} ctx {ctx:?} sums to {total}");
            }
        }
    }

    #[test]
    fn uniform_perplexity_is_vocab_size() {
        let m = KnModel::uniform(["a", "b"]);
        for sent in [s("a"), s("b a b"), s("zzz a")] {
            assert!((m.sentence_perplexity(&sent).unwrap() - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perplexity_properties() {
        let sents = corpus();
        let m = train_kn_model(&sents, 3).unwrap();
        let train = s("the cat sat on the mat");
        let shuffled = s("mat the on sat cat the");
        assert!(m.sentence_perplexity(&train).unwrap() <= m.sentence_perplexity(&shuffled).unwrap());
        assert!(m.sentence_perplexity(&[]).is_err());
        for sent in &sents {
            assert!(m.sentence_perplexity(sent).unwrap() >= 1.0);
        }
        let single = s("cat");
        let expected = (-(m.ngram_logprob(&[BOS], "cat") + m.ngram_logprob(&[BOS, "cat"], EOS)) / 2.0).exp();
        assert!((m.sentence_perplexity(&single).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn adding_a_sentence_never_hurts_it() {
        let sents = corpus();
        for i in 0..sents.len() {
            let without: Vec<Vec<String>> = sents.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.clone()).collect();
            let a = train_kn_model(&without, 3).unwrap().sentence_perplexity(&sents[i]).unwrap();
            let b = train_kn_model(&sents, 3).unwrap().sentence_perplexity(&sents[i]).unwrap();
            assert!(b <= a, "sentence {i}: {b} > {a}");
        }
    }

    #[test]
    fn counts_prefix_closed() {
        let c = NgramCounts::from_sentences(&corpus(), 4).unwrap();
        for k in 2..=4 {
            for g in c.raw[k - 1].keys() {
                assert!(c.raw[k - 2].contains_key(&g[..k - 1]));
            }
        }
        assert_eq!(c.count(&["the"]), 7);
        assert_eq!(c.count(&[BOS, "the"]), 3);
        assert_eq!(c.order(), 4);
    }

    #[test]
    fn dump_round_trip() {
        let m = train_kn_model(&corpus(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.tsv");
        m.save(&p).unwrap();
        let loaded = KnModel::load(&p).unwrap();
        assert_eq!(loaded, m);
        let text = std::fs::read_to_string(&p).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        let mut sorted = body.clone();
        sorted.sort_by_key(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].parse::<usize>().unwrap(), f[1].to_string())
        });
        assert_eq!(body, sorted);
        std::fs::write(&p, "1\ta\t-1.0\n").unwrap();
        assert!(KnModel::load(&p).is_err());
    }
}
