use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strict_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub mentions: usize,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn f1(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

fn as_set(labels: &[String]) -> BTreeSet<&str> {
    labels.iter().map(String::as_str).collect()
}

/// Strict accuracy plus mention-averaged (macro) and pooled (micro) precision/recall/F1.
///
/// An empty prediction counts as precision 0 for its mention.
pub fn evaluate(predictions: &[Vec<String>], gold: &[Vec<String>]) -> Result<MetricsReport> {
    if predictions.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} gold mentions",
            predictions.len(),
            gold.len()
        )));
    }
    let n = gold.len();
    if n == 0 {
        return Ok(MetricsReport::default());
    }
    let (mut exact, mut p_sum, mut r_sum) = (0usize, 0.0, 0.0);
    let (mut hits, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (p, g) in predictions.iter().zip(gold) {
        let (p, g) = (as_set(p), as_set(g));
        let inter = p.intersection(&g).count();
        exact += (p == g) as usize;
        p_sum += ratio(inter as f64, p.len() as f64);
        r_sum += ratio(inter as f64, g.len() as f64);
        hits += inter;
        n_pred += p.len();
        n_gold += g.len();
    }
    let nf = n as f64;
    let (macro_p, macro_r) = (p_sum / nf, r_sum / nf);
    let micro_p = ratio(hits as f64, n_pred as f64);
    let micro_r = ratio(hits as f64, n_gold as f64);
    Ok(MetricsReport {
        strict_accuracy: exact as f64 / nf,
        macro_precision: macro_p,
        macro_recall: macro_r,
        macro_f1: f1(macro_p, macro_r),
        micro_precision: micro_p,
        micro_recall: micro_r,
        micro_f1: f1(micro_p, micro_r),
        mentions: n,
    })
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mentions          {}", self.mentions)?;
        writeln!(f, "strict accuracy   {:.4}", self.strict_accuracy)?;
        writeln!(
            f,
            "macro P/R/F1      {:.4} {:.4} {:.4}",
            self.macro_precision, self.macro_recall, self.macro_f1
        )?;
        writeln!(
            f,
            "micro P/R/F1      {:.4} {:.4} {:.4}",
            self.micro_precision, self.micro_recall, self.micro_f1
        )
    }
}

/// Per-type scores over mention/type incidence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeRow {
    pub label: String,
    pub support: usize,
    /// Share of mentions carrying this gold type, in percent.
    pub support_percent: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Rows for the `top_n` most frequent gold types (ties by label).
pub fn typewise_report(predictions: &[Vec<String>], gold: &[Vec<String>], top_n: usize) -> Result<Vec<TypeRow>> {
    if predictions.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} gold mentions",
            predictions.len(),
            gold.len()
        )));
    }
    // label -> (gold count, predicted count, both)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(gold) {
        let (p, g) = (as_set(p), as_set(g));
        for &l in &g {
            let c = counts.entry(l).or_default();
            c.0 += 1;
            c.2 += p.contains(l) as usize;
        }
        for &l in &p {
            counts.entry(l).or_default().1 += 1;
        }
    }
    let mut rows: Vec<(&str, (usize, usize, usize))> =
        counts.into_iter().filter(|(_, c)| c.0 > 0).collect();
    rows.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(b.0)));
    rows.truncate(top_n);
    let n = gold.len() as f64;
    Ok(rows
        .into_iter()
        .map(|(label, (g, p, both))| {
            let precision = ratio(both as f64, p as f64);
            let recall = ratio(both as f64, g as f64);
            TypeRow {
                label: label.to_string(),
                support: g,
                support_percent: 100.0 * g as f64 / n,
                precision,
                recall,
                f1: f1(precision, recall),
            }
        })
        .collect())
}
