use crate::corpus::WordLevelCounts;
use crate::embeddings::EmbeddingTable;
use crate::scalar::Scalar;

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u', 'y'];

/// Vowel-group syllable count with a silent-final-`e` rule; at least 1.
///
/// Words that are not purely alphabetic count as one syllable.
pub fn count_syllables(word: &str) -> usize {
    let lower = word.to_lowercase();
    if lower.is_empty() || !lower.chars().all(char::is_alphabetic) {
        return 1;
    }
    let chars: Vec<char> = lower.chars().collect();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &chars {
        let v = VOWELS.contains(&c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = chars.len();
    let silent_e = n >= 2 && chars[n - 1] == 'e' && !VOWELS.contains(&chars[n - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordFeatures<T> {
    pub length: usize,
    pub syllables: usize,
    /// `ln(total count + 1)`.
    pub log_frequency: T,
    pub embedding: Vec<T>,
}

impl<T: Scalar> WordFeatures<T> {
    /// `[length, syllables, log_frequency, embedding...]`
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(3 + self.embedding.len());
        v.push(T::from_usize_lossy(self.length));
        v.push(T::from_usize_lossy(self.syllables));
        v.push(self.log_frequency);
        v.extend_from_slice(&self.embedding);
        v
    }
}

pub fn extract_word_features<T: Scalar>(
    word: &str,
    counts: &WordLevelCounts,
    embeddings: &EmbeddingTable<T>,
) -> WordFeatures<T> {
    let total = counts.total(word);
    WordFeatures {
        length: word.chars().count().max(1),
        syllables: count_syllables(word),
        log_frequency: T::lit(total as f64 + 1.0).ln(),
        embedding: embeddings.get_or_zero(word),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syllables() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("banana"), 3);
        assert_eq!(count_syllables("pledge"), 1);
        assert_eq!(count_syllables("proliferation"), 5);
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("free"), 1);
        assert_eq!(count_syllables("rhythm"), 1);
        assert_eq!(count_syllables("300,000"), 1);
        assert_eq!(count_syllables("n't"), 1);
        assert_eq!(count_syllables("b"), 1);
    }

    #[test]
    fn features_direct_formula() {
        let counts = WordLevelCounts::from_rows([("a", [20, 20, 20, 20, 20])]).unwrap();
        let mut table = EmbeddingTable::<f64>::new(2);
        table.insert("a", vec![0.5, -1.0]).unwrap();
        let f = extract_word_features("a", &counts, &table);
        assert_eq!((f.length, f.syllables), (1, 1));
        assert!((f.log_frequency - 101f64.ln()).abs() < 1e-15);
        assert_eq!(f.embedding, vec![0.5, -1.0]);
        assert_eq!(f.to_vec(), vec![1.0, 1.0, 101f64.ln(), 0.5, -1.0]);
    }

    #[test]
    fn oov_features() {
        let counts = WordLevelCounts::default();
        let table = EmbeddingTable::<f64>::new(3);
        let f = extract_word_features("proliferation", &counts, &table);
        assert_eq!((f.length, f.syllables), (13, 5));
        assert_eq!(f.log_frequency, 0.0);
        assert_eq!(f.embedding, vec![0.0; 3]);
    }
}
