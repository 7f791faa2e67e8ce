//! Feature export and warm-starting a model from another corpus.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TypeHierarchy};
use crate::encoder::{CharVocab, TokenVocab};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::Tensor;
use crate::par::{self, Execution};
use crate::trainer::{Checkpoint, TrainConfig};

/// Fresh parameters for a new corpus with the LSTM encoders taken from `src`.
///
/// `U` and `V` are always freshly drawn. With `cfg.copy_embeddings`, lookup
/// rows of characters and tokens known to both vocabularies are copied too.
/// The RNG sees the same draws as a cold start with the same configuration.
pub fn warm_start<R: Rng>(
    src: &Checkpoint,
    cfg: &TrainConfig,
    char_vocab: &CharVocab,
    token_vocab: &TokenVocab,
    hierarchy: &TypeHierarchy,
    rng: &mut R,
) -> Result<ModelParams> {
    let mut params = ModelParams::init(
        &cfg.dims,
        cfg.mode.variant(),
        char_vocab.len(),
        token_vocab.len(),
        hierarchy.len(),
        rng,
    )?;
    let from = &src.params;
    for ((name, dst), (_, s)) in params.encoder.lstms().into_iter().zip(from.encoder.lstms()) {
        for (suffix, d, s) in [
            ("w_input", dst.w_input, s.w_input),
            ("w_hidden", dst.w_hidden, s.w_hidden),
            ("bias", dst.bias, s.bias),
        ] {
            let source = from.store.get(s);
            let target = params.store.get_mut(d);
            if source.shape() != target.shape() {
                return Err(Error::TensorShape {
                    name: format!("{name}.{suffix}"),
                    expected: target.shape().to_vec(),
                    found: source.shape().to_vec(),
                });
            }
            *target = source.clone();
        }
    }
    if cfg.copy_embeddings {
        let (sc, dc) = (from.encoder.char_embed, params.encoder.char_embed);
        let pairs: Vec<(usize, usize)> = (1..char_vocab.len())
            .filter_map(|i| {
                let c = char_vocab.char_at(i)?;
                let j = src.char_vocab.index(c);
                (j != 0).then_some((j, i))
            })
            .collect();
        copy_rows(from.store.get(sc), params.store.get_mut(dc), &pairs, "char_embed")?;

        let (sw, dw) = (from.encoder.word_embed, params.encoder.word_embed);
        let pairs: Vec<(usize, usize)> = token_vocab
            .entries()
            .filter_map(|(i, t)| {
                let j = src.token_vocab.index(t);
                (j != 0).then_some((j, i))
            })
            .collect();
        copy_rows(from.store.get(sw), params.store.get_mut(dw), &pairs, "word_embed")?;
    }
    Ok(params)
}

fn copy_rows(src: &Tensor, dst: &mut Tensor, pairs: &[(usize, usize)], name: &str) -> Result<()> {
    if pairs.is_empty() {
        return Ok(());
    }
    if src.cols() != dst.cols() {
        return Err(Error::TensorShape {
            name: name.to_string(),
            expected: vec![dst.rows(), dst.cols()],
            found: src.shape().to_vec(),
        });
    }
    for &(from, to) in pairs {
        dst.row_mut(to).copy_from_slice(src.row(from));
    }
    Ok(())
}

/// One exported feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub split: String,
    pub vector: Vec<f64>,
}

/// Dropout-free feature vectors for every mention of `corpus`, in corpus order.
pub fn export_features(corpus: &Corpus, ckpt: &Checkpoint, split: &str, exec: Execution) -> Result<Vec<FeatureRecord>> {
    let expected = ckpt.config.dims.feature_dim(ckpt.config.mode.variant());
    if expected != ckpt.params.feature_dim() {
        return Err(Error::TensorShape {
            name: "U".into(),
            expected: vec![expected, ckpt.config.dims.embed_dim],
            found: ckpt.params.store.get(ckpt.params.projection.u).shape().to_vec(),
        });
    }
    let inputs = ckpt.inputs(corpus);
    let vectors: Vec<Result<Vec<f64>>> = par::map(exec, &inputs, |input| ckpt.params.features(input));
    corpus
        .mentions
        .iter()
        .zip(vectors)
        .map(|(m, v)| {
            Ok(FeatureRecord {
                id: m.id.to_string(),
                split: split.to_string(),
                vector: v?,
            })
        })
        .collect()
}

pub fn write_features<W: Write>(records: &[FeatureRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
