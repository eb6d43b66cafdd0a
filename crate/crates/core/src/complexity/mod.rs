//! Word- and sentence-level complexity predictors.

mod cnn;
mod features;
mod linear;

pub use cnn::{
    fit_sentence_cnn, predict_sentence_complexity, CnnComplexity, CnnConfig, EmbeddedSentence,
    SentenceCnn, PAD_TOKEN,
};
pub use features::{count_syllables, extract_word_features, WordFeatures};
pub use linear::{
    baseline_predict, evaluate_predictor, fit_ridge_regression, predict_word_complexity,
    BaselineKind, LinearModel, MinMaxBaseline, RegressionReport, MAX_COMPLEXITY,
};

use std::path::Path;

use crate::corpus::{read_lines, write_file};
use crate::error::{Error, Result};
use crate::scalar::{fmt_exact, parse_exact, Scalar};

/// Anything that maps a sentence to a complexity in `[0, 4]`.
pub trait SentenceComplexity<T>: Send + Sync {
    fn predict(&self, tokens: &[String]) -> Result<T>;
}

/// Writes a `word<TAB>score` lexicon.
pub fn write_lexicon<T: Scalar>(path: impl AsRef<Path>, entries: &[(String, T)]) -> Result<()> {
    let mut out = String::new();
    for (w, s) in entries {
        out.push_str(&format!("{w}\t{}\n", fmt_exact(*s)));
    }
    write_file(path, &out)
}

pub fn read_lexicon<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<(String, T)>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            let (w, s) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, n, "expected word<TAB>score"))?;
            let s = parse_exact::<T>(s).ok_or_else(|| Error::parse(path, n, "invalid score"))?;
            Ok((w.to_string(), s))
        })
        .collect()
}
