use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::corpus::{Corpus, TypeHierarchy};
use crate::encoder::{CharVocab, MentionInput, TokenVocab};
use crate::error::{Error, Result};
use crate::inference::{self, MetricsReport, Prediction};
use crate::model::ModelParams;
use crate::numerics::{ParamStore, Tensor};
use crate::par::{self, Execution};

pub const FORMAT_VERSION: u32 = 1;

/// A trained model with everything needed to apply it to new text.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub char_vocab: CharVocab,
    pub token_vocab: TokenVocab,
    pub hierarchy: TypeHierarchy,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: TrainConfig,
    char_vocab: CharVocab,
    token_vocab: TokenVocab,
    hierarchy: Vec<String>,
    tensors: BTreeMap<String, TensorFile>,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let tensors = self
            .params
            .store
            .iter()
            .map(|(_, name, t)| {
                (
                    name.to_string(),
                    TensorFile {
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    },
                )
            })
            .collect();
        let file = CheckpointFile {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            char_vocab: self.char_vocab.clone(),
            token_vocab: self.token_vocab.clone(),
            hierarchy: self.hierarchy.nodes().to_vec(),
            tensors,
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                expected: FORMAT_VERSION,
                found: header.format_version,
            });
        }
        let mut file: CheckpointFile = serde_json::from_str(text)?;
        let hierarchy = TypeHierarchy::from_labels(&file.hierarchy)?;
        if hierarchy.nodes() != file.hierarchy.as_slice() {
            return Err(Error::InvalidArgument(
                "checkpoint hierarchy is not an ancestor-closed sorted node list".into(),
            ));
        }
        let variant = file.config.mode.variant();
        let layout = ModelParams::layout(
            &file.config.dims,
            variant,
            file.char_vocab.len(),
            file.token_vocab.len(),
            hierarchy.len(),
        );
        let mut store = ParamStore::new();
        for (name, shape) in layout {
            let t = file
                .tensors
                .remove(&name)
                .ok_or_else(|| Error::MissingTensor(name.clone()))?;
            if t.shape != shape {
                return Err(Error::TensorShape {
                    name,
                    expected: shape,
                    found: t.shape,
                });
            }
            let tensor = Tensor::new(t.shape, t.data).map_err(|_| {
                Error::InvalidArgument(format!("tensor {name}: data length does not match shape"))
            })?;
            store.add(name, tensor);
        }
        if let Some(extra) = file.tensors.keys().next() {
            return Err(Error::InvalidArgument(format!("unexpected tensor {extra}")));
        }
        Ok(Checkpoint {
            params: ModelParams::from_store(store, variant)?,
            config: file.config,
            char_vocab: file.char_vocab,
            token_vocab: file.token_vocab,
            hierarchy,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }

    pub fn inputs(&self, corpus: &Corpus) -> Vec<MentionInput> {
        corpus
            .mentions
            .iter()
            .map(|m| MentionInput::new(corpus, m, &self.char_vocab, &self.token_vocab))
            .collect()
    }

    pub fn predict(&self, corpus: &Corpus, exec: Execution) -> Result<Vec<Prediction>> {
        let inputs = self.inputs(corpus);
        par::map(exec, &inputs, |input| {
            let scores = self.params.scores(input)?;
            Ok(inference::predict(&scores, &self.hierarchy))
        })
        .into_iter()
        .collect()
    }

    pub fn predicted_labels(&self, corpus: &Corpus, exec: Execution) -> Result<Vec<Vec<String>>> {
        Ok(self
            .predict(corpus, exec)?
            .iter()
            .map(|p| p.labels(&self.hierarchy))
            .collect())
    }

    pub fn evaluate(&self, corpus: &Corpus, exec: Execution) -> Result<MetricsReport> {
        let pred = self.predicted_labels(corpus, exec)?;
        let gold: Vec<Vec<String>> = corpus.mentions.iter().map(|m| m.labels.clone()).collect();
        inference::evaluate(&pred, &gold)
    }
}
