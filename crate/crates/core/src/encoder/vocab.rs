use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Index reserved for out-of-vocabulary characters and tokens.
pub const UNKNOWN: usize = 0;

/// Character lookup: the unknown entry is index 0, known characters follow in sorted order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut set: BTreeSet<char> = chars.into_iter().collect();
        set.insert(' ');
        let chars: Vec<char> = set.into_iter().collect();
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
        CharVocab { chars, index }
    }

    /// Vocabulary over the characters of the given mention token lists.
    pub fn build<'a, I, T>(mentions: I) -> Self
    where
        I: IntoIterator<Item = &'a [T]>,
        T: AsRef<str> + 'a,
    {
        CharVocab::from_chars(
            mentions
                .into_iter()
                .flat_map(|toks| toks.iter().flat_map(|t| t.as_ref().chars().collect::<Vec<_>>())),
        )
    }

    /// Size including the unknown entry.
    pub fn len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNKNOWN)
    }

    pub fn char_at(&self, i: usize) -> Option<char> {
        i.checked_sub(1).and_then(|j| self.chars.get(j).copied())
    }

    /// Mention tokens joined by single spaces, mapped to character indices.
    pub fn mention_chars<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                out.push(self.index(' '));
            }
            out.extend(t.as_ref().chars().map(|c| self.index(c)));
        }
        out
    }
}

impl Serialize for CharVocab {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.chars.iter().map(|c| c.to_string()).collect();
        strings.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CharVocab {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        let mut chars = Vec::with_capacity(strings.len());
        for s in strings {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => chars.push(c),
                _ => {
                    return Err(serde::de::Error::custom(format!(
                        "character vocabulary entry {s:?} is not a single character"
                    )))
                }
            }
        }
        Ok(CharVocab::from_chars(chars))
    }
}

/// Token lookup with a fixed case policy; the unknown entry is index 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenVocab {
    lowercase: bool,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TokenVocabFile {
    lowercase: bool,
    tokens: Vec<String>,
}

impl TokenVocab {
    pub fn from_tokens<T: AsRef<str>>(tokens: impl IntoIterator<Item = T>, lowercase: bool) -> Self {
        let set: BTreeSet<String> = tokens
            .into_iter()
            .map(|t| normalize(t.as_ref(), lowercase))
            .collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 1))
            .collect();
        TokenVocab {
            lowercase,
            tokens,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn index(&self, token: &str) -> usize {
        if self.lowercase {
            self.index
                .get(&token.to_lowercase())
                .copied()
                .unwrap_or(UNKNOWN)
        } else {
            self.index.get(token).copied().unwrap_or(UNKNOWN)
        }
    }

    pub fn token_at(&self, i: usize) -> Option<&str> {
        i.checked_sub(1)
            .and_then(|j| self.tokens.get(j))
            .map(String::as_str)
    }

    /// Known tokens with their indices, excluding the unknown entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &str)> {
        self.tokens.iter().enumerate().map(|(i, t)| (i + 1, t.as_str()))
    }

    pub fn encode<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<usize> {
        tokens.iter().map(|t| self.index(t.as_ref())).collect()
    }
}

fn normalize(t: &str, lowercase: bool) -> String {
    if lowercase {
        t.to_lowercase()
    } else {
        t.to_string()
    }
}

impl Serialize for TokenVocab {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TokenVocabFile {
            lowercase: self.lowercase,
            tokens: self.tokens.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TokenVocab {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = TokenVocabFile::deserialize(d)?;
        Ok(TokenVocab::from_tokens(f.tokens, f.lowercase))
    }
}

/// Overwrites rows of `table` for vocabulary tokens found in a text embedding file.
///
/// Each line holds a token followed by `table.cols()` decimal values. Returns
/// how many vocabulary rows were filled.
pub fn apply_pretrained<R: BufRead>(reader: R, vocab: &TokenVocab, table: &mut Tensor) -> Result<usize> {
    let dim = table.cols();
    let mut filled = vec![false; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected a token and {dim} values, found {} fields",
                    fields.len()
                ),
            });
        }
        let idx = vocab.index(fields[0]);
        if idx == UNKNOWN || filled[idx] {
            continue;
        }
        let row = table.row_mut(idx);
        for (slot, f) in row.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid number {f:?}"),
            })?;
        }
        filled[idx] = true;
    }
    Ok(filled.iter().filter(|&&f| f).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mention_chars_join_with_space() {
        let v = CharVocab::build([["New", "York"].as_slice()]);
        let seq = v.mention_chars(&["New", "York"]);
        let back: String = seq.iter().map(|&i| v.char_at(i).unwrap()).collect();
        assert_eq!(back, "New York");
        assert_eq!(v.mention_chars(&["Obama"]).len(), 5);
    }

    #[test]
    fn unknown_chars_and_tokens() {
        let v = CharVocab::build([["ab"].as_slice()]);
        assert_eq!(v.mention_chars(&["az"]), vec![v.index('a'), UNKNOWN]);
        let t = TokenVocab::from_tokens(["Paris", "is"], true);
        assert_eq!(t.index("PARIS"), t.index("paris"));
        assert_eq!(t.index("London"), UNKNOWN);
        let cased = TokenVocab::from_tokens(["Paris"], false);
        assert_eq!(cased.index("paris"), UNKNOWN);
    }

    #[test]
    fn serde_keeps_indices() {
        let v = CharVocab::build([["héllo wörld"].as_slice()]);
        let json = serde_json::to_string(&v).unwrap();
        let back: CharVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        let t = TokenVocab::from_tokens(["b", "a", "c"], false);
        let back: TokenVocab = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, back);
        assert_eq!(back.index("a"), 1);
    }

    #[test]
    fn pretrained_rows() {
        let vocab = TokenVocab::from_tokens(["cat", "dog"], true);
        let mut table = Tensor::zeros(&[vocab.len(), 2]);
        let text = "cat 0.5 -1\nfish 1 1\nDog 2 3\n";
        let n = apply_pretrained(text.as_bytes(), &vocab, &mut table).unwrap();
        assert_eq!(n, 2);
        assert_eq!(table.row(vocab.index("cat")), &[0.5, -1.0]);
        assert_eq!(table.row(vocab.index("dog")), &[2.0, 3.0]);
        assert_eq!(table.row(UNKNOWN), &[0.0, 0.0]);
        assert!(apply_pretrained("cat 1\n".as_bytes(), &vocab, &mut table).is_err());
    }
}
