//! Mention and context encoders.
//!
//! The mention is read character by character (tokens joined by a space) by a
//! unidirectional LSTM. The left context runs from the sentence start through
//! the last mention token and the right context from the first mention token
//! to the sentence end; each is read by a bidirectional LSTM whose two final
//! hidden states are concatenated. The feature vector is
//! `mention ++ left ++ right`.

mod lstm;
mod vocab;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MentionRecord};
use crate::error::{Error, Result};
use crate::init;
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

pub use lstm::{LstmParams, LstmVars, FORGET_BIAS};
pub use vocab::{apply_pretrained, CharVocab, TokenVocab, UNKNOWN};

/// Layer sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub char_dim: usize,
    pub word_dim: usize,
    /// Hidden size of each direction of the context LSTMs.
    pub word_hidden: usize,
    /// Hidden size of the character LSTM, i.e. the mention feature size.
    pub mention_hidden: usize,
    pub embed_dim: usize,
}

impl Dims {
    /// Sizes used for the full-scale experiments.
    pub const FULL_SIZE: Dims = Dims {
        char_dim: 200,
        word_dim: 300,
        word_hidden: 100,
        mention_hidden: 200,
        embed_dim: 500,
    };

    pub fn context_dim(&self) -> usize {
        2 * self.word_hidden
    }

    pub fn feature_dim(&self, variant: FeatureVariant) -> usize {
        let ctx = 2 * self.context_dim();
        match variant {
            FeatureVariant::Full => self.mention_hidden + ctx,
            FeatureVariant::NoMention => ctx,
        }
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        for (name, v) in [
            ("dims.char_dim", self.char_dim),
            ("dims.word_dim", self.word_dim),
            ("dims.word_hidden", self.word_hidden),
            ("dims.mention_hidden", self.mention_hidden),
            ("dims.embed_dim", self.embed_dim),
        ] {
            if v == 0 {
                errors.push(format!("{name} must be positive"));
            }
        }
    }
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            char_dim: 16,
            word_dim: 24,
            word_hidden: 16,
            mention_hidden: 16,
            embed_dim: 24,
        }
    }
}

/// Which encoders contribute to the feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureVariant {
    Full,
    /// Context only, without the character-level mention encoder.
    NoMention,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstmParams {
    fn register<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstmParams {
            fwd: LstmParams::register(store, &format!("{prefix}.fwd"), input, hidden, rng),
            bwd: LstmParams::register(store, &format!("{prefix}.bwd"), input, hidden, rng),
        }
    }

    fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(BiLstmParams {
            fwd: LstmParams::from_store(store, &format!("{prefix}.fwd"))?,
            bwd: LstmParams::from_store(store, &format!("{prefix}.bwd"))?,
        })
    }

    pub fn lstms(&self) -> [LstmParams; 2] {
        [self.fwd, self.bwd]
    }
}

pub const CHAR_EMBED: &str = "char_embed";
pub const WORD_EMBED: &str = "word_embed";
pub const MENTION_LSTM: &str = "mention_lstm";
pub const LEFT_LSTM: &str = "left_lstm";
pub const RIGHT_LSTM: &str = "right_lstm";

/// Handles to the encoder tensors inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderParams {
    pub char_embed: ParamId,
    pub word_embed: ParamId,
    pub mention: LstmParams,
    pub left: BiLstmParams,
    pub right: BiLstmParams,
}

impl EncoderParams {
    /// Registers and initializes all encoder tensors, drawing from `rng` in a fixed order.
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        dims: &Dims,
        char_vocab: usize,
        token_vocab: usize,
        rng: &mut R,
    ) -> Self {
        let char_embed = store.add(CHAR_EMBED, init::embedding(rng, char_vocab, dims.char_dim));
        let word_embed = store.add(WORD_EMBED, init::embedding(rng, token_vocab, dims.word_dim));
        let mention = LstmParams::register(store, MENTION_LSTM, dims.char_dim, dims.mention_hidden, rng);
        let left = BiLstmParams::register(store, LEFT_LSTM, dims.word_dim, dims.word_hidden, rng);
        let right = BiLstmParams::register(store, RIGHT_LSTM, dims.word_dim, dims.word_hidden, rng);
        EncoderParams {
            char_embed,
            word_embed,
            mention,
            left,
            right,
        }
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let get = |n: &str| store.id(n).ok_or_else(|| Error::MissingTensor(n.to_string()));
        Ok(EncoderParams {
            char_embed: get(CHAR_EMBED)?,
            word_embed: get(WORD_EMBED)?,
            mention: LstmParams::from_store(store, MENTION_LSTM)?,
            left: BiLstmParams::from_store(store, LEFT_LSTM)?,
            right: BiLstmParams::from_store(store, RIGHT_LSTM)?,
        })
    }

    /// All five LSTM directions with their name prefixes.
    pub fn lstms(&self) -> [(String, LstmParams); 5] {
        [
            (MENTION_LSTM.to_string(), self.mention),
            (format!("{LEFT_LSTM}.fwd"), self.left.fwd),
            (format!("{LEFT_LSTM}.bwd"), self.left.bwd),
            (format!("{RIGHT_LSTM}.fwd"), self.right.fwd),
            (format!("{RIGHT_LSTM}.bwd"), self.right.bwd),
        ]
    }
}

/// Left context `tokens[..end]` and right context `tokens[start..]`; both contain the mention.
pub fn context_spans<T>(tokens: &[T], start: usize, end: usize) -> (&[T], &[T]) {
    (&tokens[..end], &tokens[start..])
}

/// Index sequences feeding the three encoders for one mention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MentionInput {
    pub chars: Vec<usize>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl MentionInput {
    pub fn new(corpus: &Corpus, m: &MentionRecord, chars: &CharVocab, tokens: &TokenVocab) -> Self {
        let sentence = &corpus.sentence_of(m).tokens;
        let (left, right) = context_spans(sentence, m.start, m.end);
        MentionInput {
            chars: chars.mention_chars(&sentence[m.start..m.end]),
            left: tokens.encode(left),
            right: tokens.encode(right),
        }
    }
}

/// Inverted dropout masks for the encoder outputs, in feature-vector order.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks(pub Vec<Tensor>);

impl DropoutMasks {
    /// Each unit is kept with probability `1 - p` and rescaled by `1 / (1 - p)`.
    pub fn sample<R: Rng>(rng: &mut R, dims: &Dims, variant: FeatureVariant, p: f64) -> Self {
        let mut sizes = Vec::with_capacity(3);
        if variant == FeatureVariant::Full {
            sizes.push(dims.mention_hidden);
        }
        sizes.extend([dims.context_dim(), dims.context_dim()]);
        let keep = 1.0 - p;
        DropoutMasks(
            sizes
                .into_iter()
                .map(|n| {
                    Tensor::vector(
                        (0..n)
                            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

fn embed(tape: &mut Tape, table: ParamId, ids: &[usize]) -> Result<Vec<Var>> {
    ids.iter().map(|&i| tape.row(table, i)).collect()
}

/// Final hidden state of the character LSTM.
pub fn encode_mention(tape: &mut Tape, enc: &EncoderParams, chars: &[usize]) -> Result<Var> {
    if chars.is_empty() {
        return Err(Error::InvalidArgument("empty mention character sequence".into()));
    }
    let xs = embed(tape, enc.char_embed, chars)?;
    let lstm = enc.mention.bind(tape);
    lstm.run(tape, &xs)
}

/// Forward final state concatenated with the final state of the pass over the reversed sequence.
pub fn encode_context(tape: &mut Tape, table: ParamId, pair: &BiLstmParams, tokens: &[usize]) -> Result<Var> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("empty context token sequence".into()));
    }
    let mut xs = embed(tape, table, tokens)?;
    let fwd = pair.fwd.bind(tape);
    let hf = fwd.run(tape, &xs)?;
    xs.reverse();
    let bwd = pair.bwd.bind(tape);
    let hb = bwd.run(tape, &xs)?;
    tape.concat(&[hf, hb])
}

/// `mention ++ left ++ right` (or `left ++ right`), with dropout masks applied when given.
pub fn feature_vector(
    tape: &mut Tape,
    enc: &EncoderParams,
    input: &MentionInput,
    variant: FeatureVariant,
    dropout: Option<&DropoutMasks>,
) -> Result<Var> {
    let mut parts = Vec::with_capacity(3);
    if variant == FeatureVariant::Full {
        parts.push(encode_mention(tape, enc, &input.chars)?);
    }
    parts.push(encode_context(tape, enc.word_embed, &enc.left, &input.left)?);
    parts.push(encode_context(tape, enc.word_embed, &enc.right, &input.right)?);
    if let Some(DropoutMasks(masks)) = dropout {
        if masks.len() != parts.len() {
            return Err(Error::shape("dropout", &[masks.len()], &[parts.len()]));
        }
        for (part, mask) in parts.iter_mut().zip(masks) {
            let m = tape.constant(mask.clone());
            *part = tape.mul(*part, m)?;
        }
    }
    tape.concat(&parts)
}
