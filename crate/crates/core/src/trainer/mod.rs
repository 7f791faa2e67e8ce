//! Mini-batch Adam training, checkpoints and the gradient checker.

mod adam;
mod checkpoint;
mod config;
mod gradcheck;

use std::fmt;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, TypeHierarchy};
use crate::encoder::{apply_pretrained, CharVocab, DropoutMasks, MentionInput, TokenVocab, WORD_EMBED};
use crate::error::{Error, Result};
use crate::inference::MetricsReport;
use crate::model::ModelParams;
use crate::numerics::{Gradients, Tape};
use crate::par::{self, Execution};
use crate::scorer::{taped, LabelSplit, ObjectiveMode};

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::{Mode, TrainConfig};
pub use gradcheck::{TINY_DIMS, check_model, gradient_check, gradient_check_fixture, GradCheckEntry, GradCheckReport};

/// One training mention ready for the encoders.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: MentionInput,
    pub split: LabelSplit,
    pub is_clean: bool,
}

/// Encodes every mention of `corpus` against fixed vocabularies and hierarchy.
pub fn examples(corpus: &Corpus, cv: &CharVocab, tv: &TokenVocab, h: &TypeHierarchy) -> Result<Vec<Example>> {
    corpus
        .mentions
        .iter()
        .map(|m| {
            let idx = h.indices(&m.labels)?;
            Ok(Example {
                input: MentionInput::new(corpus, m, cv, tv),
                split: LabelSplit::new(&idx, h.len())?,
                is_clean: m.is_clean,
            })
        })
        .collect()
}

/// Vocabularies built from a training corpus: mention characters and all sentence tokens.
pub fn build_vocabularies(train: &Corpus, lowercase: bool) -> (CharVocab, TokenVocab) {
    let cv = CharVocab::build(train.mentions.iter().map(|m| m.tokens(train)));
    let tv = TokenVocab::from_tokens(train.sentences.iter().flat_map(|s| s.tokens.iter()), lowercase);
    (cv, tv)
}

/// Loss and gradients of one mention.
pub fn mention_gradients(
    params: &ModelParams,
    ex: &Example,
    dropout: Option<&DropoutMasks>,
    mode: ObjectiveMode,
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(&params.store);
    let f = params.features_on(&mut tape, &ex.input, dropout)?;
    let s = taped::score_all(&mut tape, &params.projection, f)?;
    let loss = taped::mention_loss(&mut tape, s, &ex.split, ex.is_clean, mode)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).item(), grads))
}

/// Summed objective and gradients over a batch, reduced in batch order.
///
/// `masks` is either empty (no dropout) or aligned with `batch`.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &[&Example],
    masks: &[DropoutMasks],
    mode: ObjectiveMode,
    exec: Execution,
) -> Result<(f64, Gradients)> {
    if !masks.is_empty() && masks.len() != batch.len() {
        return Err(Error::shape("batch_gradients", &[batch.len()], &[masks.len()]));
    }
    let idx: Vec<usize> = (0..batch.len()).collect();
    let results = par::map(exec, &idx, |&i| {
        mention_gradients(params, batch[i], masks.get(i), mode)
    });
    let mut total = 0.0;
    let mut grads = Gradients::new(params.store.len());
    for r in results {
        let (loss, g) = r?;
        total += loss;
        grads.merge(&g);
    }
    Ok((total, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub objective: f64,
    pub dev: MetricsReport,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.epoch, self.objective, self.dev.strict_accuracy, self.dev.macro_f1, self.dev.micro_f1
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog(pub Vec<EpochLog>);

impl TrainLog {
    pub const HEADER: &'static str = "epoch\tobjective\tdev_strict\tdev_macro_f1\tdev_micro_f1";

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for e in &self.0 {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev micro-F1 (earliest on ties).
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub best_epoch: usize,
    /// Parameters after the last epoch.
    pub last: Checkpoint,
}

/// Training run builder.
#[derive(Clone, Debug)]
pub struct Trainer<'a> {
    cfg: TrainConfig,
    warm_start: Option<&'a Checkpoint>,
    pretrained: Option<PathBuf>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig) -> Self {
        Trainer {
            cfg,
            warm_start: None,
            pretrained: None,
        }
    }

    /// Initialize LSTM encoders (and overlapping lookup rows) from another model.
    pub fn warm_start(mut self, ckpt: Option<&'a Checkpoint>) -> Self {
        self.warm_start = ckpt;
        self
    }

    /// Text embedding file used to overwrite word lookup rows after initialization.
    pub fn pretrained(mut self, path: Option<PathBuf>) -> Self {
        self.pretrained = path;
        self
    }

    /// Builds vocabularies and initial parameters. Draws from `rng` for initialization only.
    pub fn initial_checkpoint(&self, train: &Corpus, rng: &mut ChaCha8Rng) -> Result<Checkpoint> {
        let cfg = &self.cfg;
        let (cv, tv) = build_vocabularies(train, cfg.lowercase);
        let hierarchy = train.hierarchy.clone();
        let mut params = match self.warm_start {
            Some(src) => crate::transfer::warm_start(src, cfg, &cv, &tv, &hierarchy, rng)?,
            None => ModelParams::init(&cfg.dims, cfg.mode.variant(), cv.len(), tv.len(), hierarchy.len(), rng)?,
        };
        if let Some(path) = &self.pretrained {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let id = params.encoder.word_embed;
            apply_pretrained(std::io::BufReader::new(file), &tv, params.store.get_mut(id))?;
        }
        Ok(Checkpoint {
            config: cfg.clone(),
            char_vocab: cv,
            token_vocab: tv,
            hierarchy,
            params,
        })
    }

    pub fn run(&self, train: &Corpus, dev: &Corpus) -> Result<TrainOutcome> {
        let cfg = &self.cfg;
        cfg.validate()?;
        if train.mentions.is_empty() {
            return Err(Error::EmptyTrainingCorpus);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut ckpt = self.initial_checkpoint(train, &mut rng)?;
        let data = examples(train, &ckpt.char_vocab, &ckpt.token_vocab, &ckpt.hierarchy)?;
        let mode = cfg.mode.objective();
        let variant = cfg.mode.variant();
        let frozen = if cfg.freeze_word_embeddings {
            ckpt.params.store.id(WORD_EMBED)
        } else {
            None
        };
        let mut adam = AdamState::new(&ckpt.params.store);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut log = TrainLog::default();
        let mut best: Option<(f64, usize, ModelParams)> = None;

        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            let mut objective = 0.0;
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let batch: Vec<&Example> = chunk.iter().map(|&i| &data[i]).collect();
                let masks: Vec<DropoutMasks> = if cfg.dropout_p > 0.0 {
                    batch
                        .iter()
                        .map(|_| DropoutMasks::sample(&mut rng, &cfg.dims, variant, cfg.dropout_p))
                        .collect()
                } else {
                    Vec::new()
                };
                let (loss, grads) = batch_gradients(&ckpt.params, &batch, &masks, mode, cfg.execution)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b });
                }
                objective += loss;
                let mut dense = grads.to_dense(&ckpt.params.store);
                if let Some(id) = frozen {
                    dense[id.index()].data_mut().fill(0.0);
                }
                adam_step(&mut ckpt.params.store, &dense, &mut adam, cfg.learning_rate)?;
            }
            let dev_metrics = ckpt.evaluate(dev, cfg.execution)?;
            log.0.push(EpochLog {
                epoch,
                objective,
                dev: dev_metrics,
            });
            let better = match &best {
                None => true,
                Some((score, _, _)) => dev_metrics.micro_f1 > *score || dev.mentions.is_empty(),
            };
            if better {
                best = Some((dev_metrics.micro_f1, epoch, ckpt.params.clone()));
            }
        }

        let last = ckpt.clone();
        let best_epoch = match best {
            Some((_, epoch, params)) => {
                ckpt.params = params;
                epoch
            }
            None => 0,
        };
        Ok(TrainOutcome {
            checkpoint: ckpt,
            log,
            best_epoch,
            last,
        })
    }
}

/// Trains a model on `train`, selecting the epoch with the best micro-F1 on `dev`.
pub fn train(train: &Corpus, dev: &Corpus, cfg: &TrainConfig, warm_start: Option<&Checkpoint>) -> Result<TrainOutcome> {
    Trainer::new(cfg.clone()).warm_start(warm_start).run(train, dev)
}
