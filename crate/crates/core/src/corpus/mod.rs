//! Annotated corpora in JSON-lines form.
//!
//! Each line is one sentence:
//!
//! ```text
//! {"tokens": ["Obama", "spoke"], "pos": ["NNP", "VBD"],
//!  "mentions": [{"start": 0, "end": 1, "labels": ["/person/politician"]}]}
//! ```
//!
//! Spans are 0-based and end-exclusive. Label sets are closed under
//! ancestors when loaded, and the hierarchy is built from the union of all
//! closed label sets.

mod filter;
mod hierarchy;
mod stats;

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{FilterReport, DEFAULT_PRONOUN_TAGS};
pub use hierarchy::{
    ancestors, close_labels, is_ancestor_or_self, path_depth, validate_path, TypeHierarchy,
};
pub use stats::CorpusStats;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub pos: Option<Vec<String>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Source position of a mention: 1-based line and 0-based ordinal within that line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MentionId {
    pub line: usize,
    pub ordinal: usize,
}

impl fmt::Display for MentionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.ordinal)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MentionRecord {
    pub id: MentionId,
    /// Index into [`Corpus::sentences`].
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    /// Ancestor-closed labels in lexicographic order.
    pub labels: Vec<String>,
    pub is_clean: bool,
}

impl MentionRecord {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tokens<'c>(&self, corpus: &'c Corpus) -> &'c [String] {
        &corpus.sentences[self.sentence].tokens[self.start..self.end]
    }

    pub fn label_vector(&self, h: &TypeHierarchy) -> Result<Vec<u8>> {
        h.label_vector(&self.labels)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub mentions: Vec<MentionRecord>,
    pub hierarchy: TypeHierarchy,
}

#[derive(Serialize, Deserialize)]
struct SentenceLine {
    tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<Vec<String>>,
    #[serde(default)]
    mentions: Vec<MentionLine>,
}

#[derive(Serialize, Deserialize)]
struct MentionLine {
    start: usize,
    end: usize,
    labels: Vec<String>,
}

/// Chain test on a closed set without a hierarchy: one label per depth level.
fn closed_set_is_chain(labels: &[String]) -> bool {
    let deepest = labels.iter().map(|l| path_depth(l)).max().unwrap_or(0);
    !labels.is_empty() && labels.len() == deepest
}

impl Corpus {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut sentences = Vec::new();
        let mut mentions = Vec::new();
        let mut all_labels = std::collections::BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SentenceLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if parsed.tokens.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "sentence has no tokens".into(),
                });
            }
            if let Some(pos) = &parsed.pos {
                if pos.len() != parsed.tokens.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!(
                            "{} POS tags for {} tokens",
                            pos.len(),
                            parsed.tokens.len()
                        ),
                    });
                }
            }
            let n = parsed.tokens.len();
            let sentence = sentences.len();
            for (ordinal, m) in parsed.mentions.into_iter().enumerate() {
                let id = MentionId {
                    line: line_no,
                    ordinal,
                };
                if m.start > m.end || m.end > n {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!(
                            "mention {id}: span [{}, {}) out of range for {n} tokens",
                            m.start, m.end
                        ),
                    });
                }
                let labels = close_labels(&m.labels).map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("mention {id}: {e}"),
                })?;
                all_labels.extend(labels.iter().cloned());
                mentions.push(MentionRecord {
                    id,
                    sentence,
                    start: m.start,
                    end: m.end,
                    is_clean: closed_set_is_chain(&labels),
                    labels,
                });
            }
            sentences.push(Sentence {
                tokens: parsed.tokens,
                pos: parsed.pos,
            });
        }
        let labels: Vec<String> = all_labels.into_iter().collect();
        let hierarchy = TypeHierarchy::from_labels(&labels)?;
        Ok(Corpus {
            sentences,
            mentions,
            hierarchy,
        })
    }

    pub fn parse_str(s: &str) -> Result<Self> {
        Corpus::parse(s.as_bytes())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Corpus::parse(std::io::BufReader::new(file))
    }

    /// One JSON line per sentence, mentions grouped under their sentence.
    pub fn to_jsonl(&self) -> String {
        let mut by_sentence: Vec<Vec<&MentionRecord>> = vec![Vec::new(); self.sentences.len()];
        for m in &self.mentions {
            by_sentence[m.sentence].push(m);
        }
        let mut out = String::new();
        for (s, ms) in self.sentences.iter().zip(by_sentence) {
            let line = SentenceLine {
                tokens: s.tokens.clone(),
                pos: s.pos.clone(),
                mentions: ms
                    .into_iter()
                    .map(|m| MentionLine {
                        start: m.start,
                        end: m.end,
                        labels: m.labels.clone(),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&line).expect("corpus line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn sentence_of(&self, m: &MentionRecord) -> &Sentence {
        &self.sentences[m.sentence]
    }

    /// Same sentences and hierarchy, different mention list.
    pub(crate) fn with_mentions(&self, mentions: Vec<MentionRecord>) -> Corpus {
        Corpus {
            sentences: self.sentences.clone(),
            mentions,
            hierarchy: self.hierarchy.clone(),
        }
    }

    /// Clean and noisy mentions, each in corpus order.
    pub fn partition(&self) -> (Vec<&MentionRecord>, Vec<&MentionRecord>) {
        self.mentions.iter().partition(|m| m.is_clean)
    }
}
