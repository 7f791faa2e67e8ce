use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{build_vocabularies, examples, Example};
use crate::corpus::Corpus;
use crate::encoder::{Dims, FeatureVariant};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::{BackwardFault, Gradients, Tape};
use crate::scorer::{taped, ObjectiveMode};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Layer sizes small enough to difference every entry.
pub const TINY_DIMS: Dims = Dims {
    char_dim: 4,
    word_dim: 6,
    word_hidden: 3,
    mention_hidden: 4,
    embed_dim: 5,
};

// Five types; the first mention is clean, the other two are not.
const FIXTURE: &str = r#"{"tokens":["Ada","wrote","code"],"mentions":[{"start":0,"end":1,"labels":["/a/b"]}]}
{"tokens":["the","Big","Lab","hired","her"],"mentions":[{"start":1,"end":3,"labels":["/a/b","/a/c"]}]}
{"tokens":["Ed","left","Rome"],"mentions":[{"start":0,"end":1,"labels":["/a/c","/d/e"]}]}"#;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    /// Entry with the largest relative error.
    pub worst: Option<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn into_result(self) -> Result<Self> {
        match &self.worst {
            Some(w) if !self.passed() => Err(Error::GradientCheck {
                tensor: w.tensor.clone(),
                index: w.index,
                analytic: w.analytic,
                numeric: w.numeric,
            }),
            _ => Ok(self),
        }
    }
}

fn objective(params: &ModelParams, data: &[Example], mode: ObjectiveMode) -> Result<f64> {
    let mut total = 0.0;
    for ex in data {
        let mut tape = Tape::new(&params.store);
        let f = params.features_on(&mut tape, &ex.input, None)?;
        let s = taped::score_all(&mut tape, &params.projection, f)?;
        let l = taped::mention_loss(&mut tape, s, &ex.split, ex.is_clean, mode)?;
        total += tape.value(l).item();
    }
    Ok(total)
}

/// Compares backpropagated gradients of the summed objective against central differences.
///
/// `fault` corrupts the backward pass only; the differenced objective is always exact.
pub fn check_model(
    params: &ModelParams,
    data: &[Example],
    mode: ObjectiveMode,
    fault: Option<BackwardFault>,
) -> Result<GradCheckReport> {
    let mut grads = Gradients::new(params.store.len());
    for ex in data {
        let mut tape = Tape::new(&params.store);
        if let Some(fault) = fault {
            tape = tape.with_fault(fault);
        }
        let f = params.features_on(&mut tape, &ex.input, None)?;
        let s = taped::score_all(&mut tape, &params.projection, f)?;
        let l = taped::mention_loss(&mut tape, s, &ex.split, ex.is_clean, mode)?;
        grads.merge(&tape.backward(l)?);
    }
    let analytic = grads.to_dense(&params.store);

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        worst: None,
    };
    let ids: Vec<_> = params.store.ids().collect();
    for id in ids {
        for k in 0..params.store.get(id).len() {
            let orig = params.store.get(id).data()[k];
            probe.store.get_mut(id).data_mut()[k] = orig + STEP;
            let up = objective(&probe, data, mode)?;
            probe.store.get_mut(id).data_mut()[k] = orig - STEP;
            let down = objective(&probe, data, mode)?;
            probe.store.get_mut(id).data_mut()[k] = orig;

            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[id.index()].data()[k];
            let rel_err = (a - numeric).abs() / numeric.abs().max(1e-8);
            report.checked += 1;
            if rel_err.is_nan() || rel_err >= TOLERANCE {
                report.failures += 1;
            }
            if report.worst.as_ref().is_none_or(|w| rel_err > w.rel_err || rel_err.is_nan()) {
                report.worst = Some(GradCheckEntry {
                    tensor: params.store.name(id).to_string(),
                    index: k,
                    analytic: a,
                    numeric,
                    rel_err,
                });
            }
        }
    }
    Ok(report)
}

/// Three-mention fixture (one clean, two noisy) with a freshly initialized model.
pub fn gradient_check_fixture(dims: &Dims, seed: u64) -> Result<(ModelParams, Vec<Example>)> {
    let corpus = Corpus::parse_str(FIXTURE)?;
    let (cv, tv) = build_vocabularies(&corpus, true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::init(dims, FeatureVariant::Full, cv.len(), tv.len(), corpus.hierarchy.len(), &mut rng)?;
    let data = examples(&corpus, &cv, &tv, &corpus.hierarchy)?;
    Ok((params, data))
}

/// Gradient check of the full objective on the built-in fixture.
pub fn gradient_check(dims: &Dims, seed: u64) -> Result<GradCheckReport> {
    let (params, data) = gradient_check_fixture(dims, seed)?;
    check_model(&params, &data, ObjectiveMode::Full, None)
}
