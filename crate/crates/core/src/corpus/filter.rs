use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Corpus, MentionRecord};
use crate::error::{Error, Result};

/// Penn Treebank pronoun tags.
pub const DEFAULT_PRONOUN_TAGS: &[&str] = &["PRP", "PRP$", "WP", "WP$"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub no_labels: usize,
    pub zero_length: usize,
    pub pronominal: usize,
}

impl FilterReport {
    pub fn total(&self) -> usize {
        self.no_labels + self.zero_length + self.pronominal
    }
}

impl Corpus {
    /// Drops mentions without labels and mentions of length zero.
    pub fn filter_invalid(&self) -> (Corpus, FilterReport) {
        let mut report = FilterReport::default();
        let kept = self
            .mentions
            .iter()
            .filter(|m| {
                if m.labels.is_empty() {
                    report.no_labels += 1;
                    false
                } else if m.is_empty() {
                    report.zero_length += 1;
                    false
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        (self.with_mentions(kept), report)
    }

    /// Whether every token of the mention carries a pronoun tag.
    pub fn is_pronominal<S: AsRef<str>>(&self, m: &MentionRecord, tags: &[S]) -> Result<bool> {
        let pos = self.sentences[m.sentence]
            .pos
            .as_ref()
            .ok_or(Error::MissingPos(m.sentence))?;
        Ok(!m.is_empty()
            && pos[m.start..m.end]
                .iter()
                .all(|p| tags.iter().any(|t| t.as_ref() == p)))
    }

    /// Drops mentions whose tokens are all pronouns under `tags`.
    pub fn pronominal_filter<S: AsRef<str>>(&self, tags: &[S]) -> Result<(Corpus, FilterReport)> {
        let mut kept = Vec::with_capacity(self.mentions.len());
        let mut report = FilterReport::default();
        for m in &self.mentions {
            if self.is_pronominal(m, tags)? {
                report.pronominal += 1;
            } else {
                kept.push(m.clone());
            }
        }
        Ok((self.with_mentions(kept), report))
    }

    /// Seeded split into a development part of `round(fraction * N)` mentions and the rest.
    ///
    /// Both parts keep corpus order.
    pub fn dev_split(&self, fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dev fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let n = self.mentions.len();
        let n_dev = (fraction * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut is_dev = vec![false; n];
        for &i in &order[..n_dev] {
            is_dev[i] = true;
        }
        let (dev, eval): (Vec<_>, Vec<_>) = self
            .mentions
            .iter()
            .cloned()
            .zip(is_dev)
            .partition(|(_, d)| *d);
        Ok((
            self.with_mentions(dev.into_iter().map(|(m, _)| m).collect()),
            self.with_mentions(eval.into_iter().map(|(m, _)| m).collect()),
        ))
    }
}
