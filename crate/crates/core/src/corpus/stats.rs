use std::fmt;

use serde::Serialize;

use super::{Corpus, DEFAULT_PRONOUN_TAGS};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub types: usize,
    pub mentions: usize,
    pub clean_percent: f64,
    /// `None` when the corpus carries no POS tags.
    pub pronominal_percent: Option<f64>,
    pub max_depth: usize,
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

impl Corpus {
    pub fn stats(&self) -> CorpusStats {
        let n = self.mentions.len();
        let clean = self.mentions.iter().filter(|m| m.is_clean).count();
        let pronominal = self
            .mentions
            .iter()
            .map(|m| self.is_pronominal(m, DEFAULT_PRONOUN_TAGS))
            .try_fold(0, |acc, r| r.map(|p| acc + p as usize))
            .ok();
        CorpusStats {
            types: self.hierarchy.len(),
            mentions: n,
            clean_percent: percent(clean, n),
            pronominal_percent: pronominal.map(|p| percent(p, n)),
            max_depth: self.hierarchy.max_depth(),
        }
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24}{}", "# types", self.types)?;
        writeln!(f, "{:<24}{}", "# mentions", self.mentions)?;
        writeln!(f, "{:<24}{:.2}", "% clean mentions", self.clean_percent)?;
        match self.pronominal_percent {
            Some(p) => writeln!(f, "{:<24}{:.2}", "% pronominal mentions", p)?,
            None => writeln!(f, "{:<24}n/a", "% pronominal mentions")?,
        }
        writeln!(f, "{:<24}{}", "max hierarchy depth", self.max_depth)
    }
}
