//! Rule-based tokenizer and entity/number masking.

use super::stopwords::is_stopword;

const CLITICS: &[&str] = &["'s", "'re", "'ve", "'ll", "'m", "'d"];
const SENTENCE_FINAL: &[&str] = &[".", "!", "?"];

/// Splits text into tokens, preserving case.
///
/// Punctuation becomes separate tokens, except `,`/`.` between digits and
/// `'`/`-` inside a word. English clitics are split the Penn Treebank way
/// (`don't` -> `do n't`, `they're` -> `they 're`).
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().map(normalize_apostrophe).collect();
        let mut cur = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            let next_alnum = next.is_some_and(char::is_alphanumeric);
            let numeric_sep = (c == ',' || c == '.')
                && cur.chars().last().is_some_and(|p| p.is_ascii_digit())
                && next.is_some_and(|n| n.is_ascii_digit());
            let inner_joiner = (c == '\'' || c == '-') && !cur.is_empty() && next_alnum;
            let clitic = c == '\'' && cur.is_empty() && starts_clitic(&chars[i..]);
            if c.is_alphanumeric() || numeric_sep || inner_joiner || clitic {
                cur.push(c);
            } else {
                flush_word(&mut cur, &mut out);
                out.push(c.to_string());
            }
            i += 1;
        }
        flush_word(&mut cur, &mut out);
    }
    out
}

/// Tokenizes and lowercases. Placeholders are left untouched.
pub fn tokenize(text: &str) -> Vec<String> {
    split_tokens(text).iter().map(|t| normalize(t)).collect()
}

pub fn normalize(token: &str) -> String {
    if is_placeholder(token) {
        token.to_string()
    } else {
        token.to_lowercase()
    }
}

fn normalize_apostrophe(c: char) -> char {
    match c {
        '\u{2019}' | '\u{2018}' => '\'',
        other => other,
    }
}

fn starts_clitic(rest: &[char]) -> bool {
    let word: String = rest.iter().take_while(|c| c.is_alphanumeric() || **c == '\'').collect();
    let lower = word.to_lowercase();
    CLITICS.contains(&lower.as_str())
}

fn flush_word(cur: &mut String, out: &mut Vec<String>) {
    if cur.is_empty() {
        return;
    }
    let word = std::mem::take(cur);
    let lower = word.to_lowercase();
    if lower.len() > 3 && lower.ends_with("n't") {
        let cut = match lower.as_str() {
            // can't -> ca n't, won't -> wo n't
            "can't" | "won't" => 2,
            _ => word.len() - 3,
        };
        out.push(word[..cut].to_string());
        out.push(word[cut..].to_string());
        return;
    }
    for clitic in CLITICS {
        if lower.len() > clitic.len() && lower.ends_with(clitic) {
            let cut = word.len() - clitic.len();
            out.push(word[..cut].to_string());
            out.push(word[cut..].to_string());
            return;
        }
    }
    out.push(word);
}

pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_alphanumeric)
}

pub fn is_number(token: &str) -> bool {
    let mut chars = token.chars();
    chars.next().is_some_and(|c| c.is_ascii_digit())
        && token.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.')
}

/// `ENT@n` / `NUM@n` placeholders produced by [`mask_entities`].
pub fn is_placeholder(token: &str) -> bool {
    let Some((tag, idx)) = token.split_once('@') else {
        return false;
    };
    (tag == "ENT" || tag == "NUM") && !idx.is_empty() && idx.chars().all(|c| c.is_ascii_digit())
}

/// Content words carry complexity-based loss weights.
pub fn is_content(token: &str) -> bool {
    !(is_placeholder(token) || is_punctuation(token) || is_stopword(&token.to_lowercase()))
}

fn is_capitalized(token: &str) -> bool {
    token != "I" && token.chars().next().is_some_and(char::is_uppercase)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder {
    pub tag: String,
    pub original: Vec<String>,
}

/// Tokens with entity and number spans replaced, plus the restore mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSentence {
    pub tokens: Vec<String>,
    pub mapping: Vec<Placeholder>,
}

impl MaskedSentence {
    /// Restores the original surface tokens.
    pub fn demask(&self) -> Vec<String> {
        demask(&self.tokens, &self.mapping)
    }
}

/// Replaces placeholders in `tokens` using `mapping`; unknown placeholders
/// (e.g. ones a decoder invented) are left as they are.
pub fn demask(tokens: &[String], mapping: &[Placeholder]) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens {
        match mapping.iter().find(|p| &p.tag == tok) {
            Some(p) => out.extend(p.original.iter().cloned()),
            None => out.push(tok.clone()),
        }
    }
    out
}

/// Masks capitalized spans and numerals with sequential placeholders.
///
/// Expects case-preserving tokens from [`split_tokens`]. A single capitalized
/// token at a sentence start is not an entity; a longer span starting there
/// is masked after dropping a leading stopword (`The White House` -> `The ENT@1`).
/// Identical spans share one placeholder.
pub fn mask_entities(tokens: &[String]) -> MaskedSentence {
    let mut out = Vec::with_capacity(tokens.len());
    let mut mapping: Vec<Placeholder> = Vec::new();
    let mut n_ent = 0usize;
    let mut n_num = 0usize;

    let mut assign = |span: &[String], kind: &str, mapping: &mut Vec<Placeholder>| -> String {
        if let Some(p) = mapping
            .iter()
            .find(|p| p.original == span && p.tag.starts_with(kind))
        {
            return p.tag.clone();
        }
        let counter = if kind == "ENT" { &mut n_ent } else { &mut n_num };
        *counter += 1;
        let tag = format!("{kind}@{counter}");
        mapping.push(Placeholder {
            tag: tag.clone(),
            original: span.to_vec(),
        });
        tag
    };

    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if is_number(tok) {
            out.push(assign(&tokens[i..=i], "NUM", &mut mapping));
            i += 1;
            continue;
        }
        if !is_capitalized(tok) {
            out.push(tok.clone());
            i += 1;
            continue;
        }
        let mut end = i + 1;
        while end < tokens.len() && is_capitalized(&tokens[end]) && !is_number(&tokens[end]) {
            end += 1;
        }
        let at_start = i == 0 || SENTENCE_FINAL.contains(&tokens[i - 1].as_str());
        let mut start = i;
        if at_start {
            if end - i == 1 {
                out.push(tok.clone());
                i = end;
                continue;
            }
            if is_stopword(&tok.to_lowercase()) {
                out.push(tok.clone());
                start += 1;
            }
        }
        out.push(assign(&tokens[start..end], "ENT", &mut mapping));
        i = end;
    }
    MaskedSentence {
        tokens: out,
        mapping,
    }
}

/// Tokenize, mask, then lowercase everything except placeholders.
pub fn preprocess(text: &str) -> MaskedSentence {
    let masked = mask_entities(&split_tokens(text));
    MaskedSentence {
        tokens: masked.tokens.iter().map(|t| normalize(t)).collect(),
        mapping: masked.mapping,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
    }

    #[test]
    fn simple_sentence() {
        assert_eq!(
            tokenize("Mary travels between two offices."),
            toks("mary travels between two offices .")
        );
    }

    #[test]
    fn clitics() {
        assert_eq!(tokenize("don't stop"), toks("do n't stop"));
        assert_eq!(tokenize("they're still"), toks("they 're still"));
        assert_eq!(tokenize("can't"), toks("ca n't"));
        assert_eq!(tokenize("won't"), toks("wo n't"));
        assert_eq!(tokenize("the dog's bone"), toks("the dog 's bone"));
    }

    #[test]
    fn numbers_and_hyphens() {
        assert_eq!(tokenize("over 300,000 students."), toks("over 300,000 students ."));
        assert_eq!(tokenize("a well-known 3.5%"), toks("a well-known 3.5 %"));
        assert_eq!(tokenize("(quoted)"), toks("( quoted )"));
        assert_eq!(tokenize("'hello'"), toks("' hello '"));
    }

    #[test]
    fn mask_no_entities() {
        let m = mask_entities(&toks("the dog ran"));
        assert_eq!(m.tokens, toks("the dog ran"));
        assert!(m.mapping.is_empty());
    }

    #[test]
    fn mask_multiword_entity() {
        let m = mask_entities(&toks("he met Mustafa Kemal Ataturk today"));
        assert_eq!(m.tokens, toks("he met ENT@1 today"));
        assert_eq!(m.mapping[0].original, toks("Mustafa Kemal Ataturk"));
        assert_eq!(m.demask(), toks("he met Mustafa Kemal Ataturk today"));
    }

    #[test]
    fn mask_numbers() {
        let m = mask_entities(&toks("over 300,000 students"));
        assert_eq!(m.tokens, toks("over NUM@1 students"));
    }

    #[test]
    fn sentence_start_rules() {
        assert_eq!(mask_entities(&toks("Police used gas")).tokens, toks("Police used gas"));
        assert_eq!(
            mask_entities(&toks("The White House said")).tokens,
            toks("The ENT@1 said")
        );
        assert_eq!(
            mask_entities(&toks("New York is big . Paris too")).tokens,
            toks("ENT@1 is big . Paris too")
        );
        assert_eq!(mask_entities(&toks("so I went")).tokens, toks("so I went"));
    }

    #[test]
    fn repeated_entity_shares_placeholder() {
        let m = mask_entities(&toks("we saw Ann and then Ann and Bob"));
        assert_eq!(m.tokens, toks("we saw ENT@1 and then ENT@1 and ENT@2"));
        assert_eq!(m.mapping.len(), 2);
    }

    #[test]
    fn content_classification() {
        assert!(is_content("proliferation"));
        assert!(!is_content("the"));
        assert!(!is_content("ENT@3"));
        assert!(!is_content("NUM@1"));
        assert!(!is_content(","));
        assert!(!is_content("n't"));
    }

    #[test]
    fn preprocess_lowercases_but_keeps_placeholders() {
        let m = preprocess("Yesterday he met Mustafa Kemal in 1923.");
        assert_eq!(m.tokens, toks("yesterday he met ENT@1 in NUM@1 ."));
    }

    proptest::proptest! {
        #[test]
        fn demask_restores_surface(words in proptest::collection::vec("[A-Za-z]{1,6}|[0-9]{1,4}|[.,!?]", 0..12)) {
            let m = mask_entities(&words);
            proptest::prop_assert_eq!(m.demask(), words);
        }
    }
}
