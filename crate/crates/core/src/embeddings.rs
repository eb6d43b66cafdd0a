//! Word-vector tables, bag-of-words sentence vectors and cosine similarity.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::corpus::{read_lines, write_file};
use crate::error::{Error, Result};
use crate::scalar::{fmt_exact, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    vectors: HashMap<String, Vec<T>>,
    duplicates: usize,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of tokens that were overwritten by a later entry.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<T>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector of length {} in a table of dimension {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite embedding value"));
        }
        if self.vectors.insert(token.into(), vector).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Vector for `token`, or zeros when it is out of vocabulary.
    pub fn get_or_zero(&self, token: &str) -> Vec<T> {
        self.get(token).map_or_else(|| vec![T::zero(); self.dim], <[T]>::to_vec)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &String> {
        self.vectors.keys()
    }

    /// Reads `token v1 ... vd` lines with an optional `count dim` header.
    /// The last duplicate wins.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let lines = read_lines(path)?;
        if lines.is_empty() {
            return Err(Error::parse(path, 0, "empty embedding file"));
        }
        let mut header_dim = None;
        let mut start = 0;
        let first: Vec<&str> = lines[0].1.split_whitespace().collect();
        if first.len() == 2 {
            if let (Ok(_), Ok(d)) = (first[0].parse::<usize>(), first[1].parse::<usize>()) {
                header_dim = Some(d);
                start = 1;
            }
        }
        let mut table: Option<Self> = None;
        for (lineno, line) in &lines[start..] {
            let mut fields = line.split_whitespace();
            let token = fields.next().ok_or_else(|| Error::parse(path, *lineno, "missing token"))?;
            let values = fields
                .map(|f| f.parse::<f64>().ok().and_then(T::from_f64))
                .collect::<Option<Vec<T>>>()
                .ok_or_else(|| Error::parse(path, *lineno, "non-numeric vector component"))?;
            let t = table.get_or_insert_with(|| Self::new(header_dim.unwrap_or(values.len())));
            if values.len() != t.dim {
                return Err(Error::parse(
                    path,
                    *lineno,
                    format!("expected {} values, found {}", t.dim, values.len()),
                ));
            }
            t.insert(token, values).map_err(|e| Error::parse(path, *lineno, e.to_string()))?;
        }
        let table = table.ok_or_else(|| Error::parse(path, 0, "no vectors after header"))?;
        if table.duplicates > 0 {
            log::warn!("{}: {} duplicate tokens, last occurrence kept", path.display(), table.duplicates);
        }
        Ok(table)
    }

    /// Writes with a header line, tokens sorted.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut keys: Vec<&String> = self.vectors.keys().collect();
        keys.sort();
        let mut out = format!("{} {}\n", keys.len(), self.dim);
        for k in keys {
            out.push_str(k);
            for v in &self.vectors[k] {
                out.push(' ');
                out.push_str(&fmt_exact(*v));
            }
            out.push('\n');
        }
        write_file(path, &out)
    }
}

/// Document frequencies for idf weighting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentFrequency {
    pub total_docs: usize,
    pub counts: HashMap<String, usize>,
}

pub const TOTAL_DOCS_KEY: &str = "__N__";

impl DocumentFrequency {
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut df = Self::default();
        for doc in docs {
            df.total_docs += 1;
            let mut seen: Vec<&String> = doc.iter().collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.counts.entry(t.clone()).or_default() += 1;
            }
        }
        df
    }

    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`, always positive.
    pub fn idf<T: Scalar>(&self, token: &str) -> T {
        let df = self.counts.get(token).copied().unwrap_or(0);
        let n = T::from_usize_lossy(self.total_docs);
        let df = T::from_usize_lossy(df);
        ((T::one() + n) / (T::one() + df)).ln() + T::one()
    }

    /// Reads `token<TAB>doc_count` lines plus one `__N__<TAB>count` line.
    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut df = Self::default();
        let mut saw_total = false;
        for (lineno, line) in read_lines(path)? {
            let (tok, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno, "expected token<TAB>count"))?;
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno, "invalid count"))?;
            if tok == TOTAL_DOCS_KEY {
                df.total_docs = count;
                saw_total = true;
            } else {
                df.counts.insert(tok.to_string(), count);
            }
        }
        if !saw_total {
            return Err(Error::parse(path, 0, format!("missing {TOTAL_DOCS_KEY} line")));
        }
        Ok(df)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut keys: Vec<&String> = self.counts.keys().collect();
        keys.sort();
        let mut out = format!("{TOTAL_DOCS_KEY}\t{}\n", self.total_docs);
        for k in keys {
            out.push_str(&format!("{k}\t{}\n", self.counts[k]));
        }
        write_file(path, &out)
    }
}

#[derive(Debug, Clone, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    Idf(Arc<DocumentFrequency>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector<T> {
    pub values: Vec<T>,
    /// In-vocabulary tokens that contributed.
    pub token_count: usize,
}

impl<T: Scalar> SentenceVector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
            token_count: 0,
        }
    }

    /// True for empty or all-OOV sentences.
    pub fn is_zero(&self) -> bool {
        self.token_count == 0
    }
}

/// Weighted mean of the in-vocabulary token vectors. OOV tokens are skipped.
pub fn embed_sentence<T: Scalar>(
    table: &EmbeddingTable<T>,
    tokens: &[String],
    weighting: &Weighting,
) -> SentenceVector<T> {
    let mut acc = vec![T::zero(); table.dim()];
    let mut total_weight = T::zero();
    let mut count = 0;
    for tok in tokens {
        let Some(v) = table.get(tok) else { continue };
        let w = match weighting {
            Weighting::Uniform => T::one(),
            Weighting::Idf(df) => df.idf(tok),
        };
        for (a, &x) in acc.iter_mut().zip(v) {
            *a = *a + w * x;
        }
        total_weight = total_weight + w;
        count += 1;
    }
    if count == 0 || total_weight <= T::zero() {
        return SentenceVector::zeros(table.dim());
    }
    for a in &mut acc {
        *a = *a / total_weight;
    }
    SentenceVector {
        values: acc,
        token_count: count,
    }
}

/// Cosine similarity; zero vectors give 0.
pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "cosine of vectors with dimensions {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nv = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if nu == T::zero() || nv == T::zero() {
        return Ok(T::zero());
    }
    let d: T = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    Ok((d / (nu * nv)).max(-T::one()).min(T::one()))
}

/// Sentence-to-vector map with cosine geometry, used for adequacy and clustering.
pub trait SentenceEmbedder<T>: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> SentenceVector<T>;
}

/// Weighted mean-of-word-vectors embedder.
#[derive(Debug, Clone)]
pub struct MeanEmbedder<T> {
    pub table: Arc<EmbeddingTable<T>>,
    pub weighting: Weighting,
}

impl<T: Scalar> MeanEmbedder<T> {
    pub fn new(table: Arc<EmbeddingTable<T>>, weighting: Weighting) -> Self {
        Self { table, weighting }
    }
}

impl<T: Scalar> SentenceEmbedder<T> for MeanEmbedder<T> {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn embed(&self, tokens: &[String]) -> SentenceVector<T> {
        embed_sentence(&self.table, tokens, &self.weighting)
    }
}
