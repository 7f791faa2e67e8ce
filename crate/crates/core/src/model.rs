use rand::Rng;

use crate::encoder::{
    feature_vector, Dims, DropoutMasks, EncoderParams, FeatureVariant, MentionInput, CHAR_EMBED,
    LEFT_LSTM, MENTION_LSTM, RIGHT_LSTM, WORD_EMBED,
};
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tape, Var};
use crate::scorer::{self, ProjectionParams, ScoreVector, FEATURE_PROJECTION, LABEL_EMBEDDING};

/// All learnable tensors together with typed handles into them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub store: ParamStore,
    pub encoder: EncoderParams,
    pub projection: ProjectionParams,
    pub variant: FeatureVariant,
}

impl ModelParams {
    /// Fresh parameters. Draw order: lookup tables, LSTMs, then `U` and `V`.
    pub fn init<R: Rng>(
        dims: &Dims,
        variant: FeatureVariant,
        char_vocab: usize,
        token_vocab: usize,
        num_labels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if num_labels == 0 {
            return Err(Error::InvalidArgument("hierarchy has no labels".into()));
        }
        let mut store = ParamStore::new();
        let encoder = EncoderParams::register(&mut store, dims, char_vocab, token_vocab, rng);
        let projection = ProjectionParams::register(
            &mut store,
            dims.feature_dim(variant),
            num_labels,
            dims.embed_dim,
            rng,
        );
        Ok(ModelParams {
            store,
            encoder,
            projection,
            variant,
        })
    }

    /// Names and shapes of every tensor, in registration order.
    pub fn layout(
        dims: &Dims,
        variant: FeatureVariant,
        char_vocab: usize,
        token_vocab: usize,
        num_labels: usize,
    ) -> Vec<(String, Vec<usize>)> {
        let mut out = vec![
            (CHAR_EMBED.to_string(), vec![char_vocab, dims.char_dim]),
            (WORD_EMBED.to_string(), vec![token_vocab, dims.word_dim]),
        ];
        let lstm = |out: &mut Vec<(String, Vec<usize>)>, prefix: &str, input: usize, hidden: usize| {
            out.push((format!("{prefix}.w_input"), vec![input, 4 * hidden]));
            out.push((format!("{prefix}.w_hidden"), vec![hidden, 4 * hidden]));
            out.push((format!("{prefix}.bias"), vec![4 * hidden]));
        };
        lstm(&mut out, MENTION_LSTM, dims.char_dim, dims.mention_hidden);
        for ctx in [LEFT_LSTM, RIGHT_LSTM] {
            for dir in ["fwd", "bwd"] {
                lstm(&mut out, &format!("{ctx}.{dir}"), dims.word_dim, dims.word_hidden);
            }
        }
        out.push((FEATURE_PROJECTION.to_string(), vec![dims.feature_dim(variant), dims.embed_dim]));
        out.push((LABEL_EMBEDDING.to_string(), vec![num_labels, dims.embed_dim]));
        out
    }

    pub fn from_store(store: ParamStore, variant: FeatureVariant) -> Result<Self> {
        let encoder = EncoderParams::from_store(&store)?;
        let projection = ProjectionParams::from_store(&store)?;
        Ok(ModelParams {
            store,
            encoder,
            projection,
            variant,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.projection.feature_dim
    }

    pub fn num_labels(&self) -> usize {
        self.projection.num_labels
    }

    /// Records the feature vector of one mention on `tape`.
    pub fn features_on(&self, tape: &mut Tape, input: &MentionInput, dropout: Option<&DropoutMasks>) -> Result<Var> {
        let f = feature_vector(tape, &self.encoder, input, self.variant, dropout)?;
        if tape.shape(f) != [self.feature_dim()] {
            return Err(Error::shape("feature_vector", tape.shape(f), &[self.feature_dim()]));
        }
        Ok(f)
    }

    /// Inference-time feature vector (no dropout).
    pub fn features(&self, input: &MentionInput) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.store);
        let f = self.features_on(&mut tape, input, None)?;
        Ok(tape.value(f).data().to_vec())
    }

    pub fn scores(&self, input: &MentionInput) -> Result<ScoreVector> {
        let f = self.features(input)?;
        scorer::score_all(&self.store, &self.projection, &f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_matches_registration() {
        let dims = Dims::default();
        for variant in [FeatureVariant::Full, FeatureVariant::NoMention] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let m = ModelParams::init(&dims, variant, 7, 9, 4, &mut rng).unwrap();
            let registered: Vec<(String, Vec<usize>)> = m
                .store
                .iter()
                .map(|(_, n, t)| (n.to_string(), t.shape().to_vec()))
                .collect();
            assert_eq!(registered, ModelParams::layout(&dims, variant, 7, 9, 4));
        }
    }

    #[test]
    fn zero_labels_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(ModelParams::init(&Dims::default(), FeatureVariant::Full, 3, 3, 0, &mut rng).is_err());
    }
}
