//! Command-line front end.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Deserialize;

use crate::corpus::{Corpus, DEFAULT_PRONOUN_TAGS};
use crate::error::{Error, Result};
use crate::inference::{self, PredictionRecord};
use crate::par::Execution;
use crate::synth::{self, SynthSpec};
use crate::trainer::{gradient_check, TINY_DIMS, Checkpoint, Mode, TrainConfig, TrainLog, Trainer};
use crate::transfer;

/// Dev fraction sampled from the test corpus when no dev file is given.
pub const DEV_FRACTION: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "finetype", version, about = "Fine-grained entity typing")]
pub struct Cli {
    /// Run per-mention work on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset statistics.
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        json: bool,
        /// Drop pronominal mentions before counting.
        #[arg(long)]
        filter_pronominal: bool,
    },
    /// Write a synthetic train.jsonl and test.jsonl.
    Synth(SynthArgs),
    /// Train a model from a JSON run configuration.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        json: bool,
        /// Also print per-type scores for the most frequent gold types.
        #[arg(long)]
        top_types: Option<usize>,
    },
    /// Write one JSON line of predictions per mention.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write learned feature vectors as JSON lines.
    ExportFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare backpropagated gradients with finite differences on a tiny model.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 3)]
    pub branching: usize,
    #[arg(long)]
    pub top_level: Option<usize>,
    #[arg(long)]
    pub max_types: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub n_mentions: usize,
    #[arg(long, default_value_t = 250)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cue_prob: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Copy lookup rows for shared vocabulary when warm starting.
    #[arg(long, action = ArgAction::Set)]
    pub copy_embeddings: Option<bool>,
}

/// File locations and switches of a training run. The remaining keys of the
/// configuration object are training hyperparameters.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub pretrained: Option<PathBuf>,
    pub warm_start: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub filter_pronominal: bool,
}

const RUN_KEYS: &[&str] = &[
    "train",
    "dev",
    "test",
    "pretrained",
    "warm_start",
    "checkpoint",
    "log",
    "filter_pronominal",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub paths: RunPaths,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Parses a flat JSON object. Relative paths are taken relative to `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(mut map) = value else {
            return Err(Error::InvalidConfig(vec!["configuration must be a JSON object".into()]));
        };
        let mut run = serde_json::Map::new();
        for key in RUN_KEYS {
            if let Some(v) = map.remove(*key) {
                run.insert(key.to_string(), v);
            }
        }
        let mut paths: RunPaths = serde_json::from_value(run.into())?;
        let train: TrainConfig = serde_json::from_value(map.into())?;
        for p in [
            &mut paths.train,
            &mut paths.dev,
            &mut paths.test,
            &mut paths.pretrained,
            &mut paths.warm_start,
            &mut paths.checkpoint,
            &mut paths.log,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(RunConfig { paths, train })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Every problem with the configuration at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = match self.train.validate() {
            Err(Error::InvalidConfig(e)) => e,
            Err(e) => return Err(e),
            Ok(()) => Vec::new(),
        };
        let p = &self.paths;
        if p.train.is_none() {
            errors.push("train: a training corpus path is required".into());
        }
        if p.checkpoint.is_none() {
            errors.push("checkpoint: an output path is required".into());
        }
        for (key, path) in [
            ("train", &p.train),
            ("dev", &p.dev),
            ("test", &p.test),
            ("pretrained", &p.pretrained),
            ("warm_start", &p.warm_start),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    errors.push(format!("{key}: {} does not exist", path.display()));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors))
        }
    }
}

fn read_filtered(path: &Path, filter_pronominal: bool) -> Result<Corpus> {
    let (corpus, _) = Corpus::read(path)?.filter_invalid();
    if filter_pronominal {
        Ok(corpus.pronominal_filter(DEFAULT_PRONOUN_TAGS)?.0)
    } else {
        Ok(corpus)
    }
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = execution(cli.sequential);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e: std::io::Error| Error::io("<stdout>", e);
    match cli.command {
        Command::Stats {
            corpus,
            json,
            filter_pronominal,
        } => {
            let c = read_filtered(&corpus, filter_pronominal)?;
            let stats = c.stats();
            if json {
                writeln!(out, "{}", serde_json::to_string(&stats)?).map_err(io)?;
            } else {
                write!(out, "{stats}").map_err(io)?;
            }
        }
        Command::Synth(a) => {
            let spec = SynthSpec {
                depth: a.depth,
                branching: a.branching,
                top_level: a.top_level,
                max_types: a.max_types,
                n_mentions: a.n_mentions,
                n_test: a.n_test,
                noise_rate: a.noise_rate,
                cue_prob: a.cue_prob,
                seed: a.seed,
            };
            let (train, test) = synth::generate_text(&spec)?;
            std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
            for (name, text) in [("train.jsonl", train), ("test.jsonl", test)] {
                let path = a.out_dir.join(name);
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Train(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            if let Some(mode) = a.mode {
                cfg.train.mode = mode;
            }
            if let Some(seed) = a.seed {
                cfg.train.seed = seed;
            }
            if let Some(copy) = a.copy_embeddings {
                cfg.train.copy_embeddings = copy;
            }
            cfg.train.execution = exec;
            cfg.validate()?;
            cmd_train(&cfg, &mut out)?;
        }
        Command::Eval {
            checkpoint,
            corpus,
            json,
            top_types,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let c = read_filtered(&corpus, false)?;
            let pred = ckpt.predicted_labels(&c, exec)?;
            let gold: Vec<Vec<String>> = c.mentions.iter().map(|m| m.labels.clone()).collect();
            let report = inference::evaluate(&pred, &gold)?;
            if json {
                writeln!(out, "{}", serde_json::to_string(&report)?).map_err(io)?;
            } else {
                write!(out, "{report}").map_err(io)?;
            }
            if let Some(n) = top_types {
                for row in inference::typewise_report(&pred, &gold, n)? {
                    writeln!(
                        out,
                        "{}\t{:.2}\t{:.4}\t{:.4}\t{:.4}",
                        row.label, row.support_percent, row.precision, row.recall, row.f1
                    )
                    .map_err(io)?;
                }
            }
        }
        Command::Predict {
            checkpoint,
            corpus,
            out: path,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let c = read_filtered(&corpus, false)?;
            let preds = ckpt.predict(&c, exec)?;
            let mut w = create(&path)?;
            let werr = |e: std::io::Error| Error::io(&path, e);
            for (m, p) in c.mentions.iter().zip(preds) {
                let rec = PredictionRecord {
                    mention_id: m.id.to_string(),
                    gold: m.labels.clone(),
                    pred: p.labels(&ckpt.hierarchy),
                    path_scores: p.path_scores,
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n").map_err(werr)?;
            }
            w.flush().map_err(werr)?;
        }
        Command::ExportFeatures {
            checkpoint,
            corpus,
            split,
            out: path,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let c = read_filtered(&corpus, false)?;
            let records = transfer::export_features(&c, &ckpt, &split, exec)?;
            let mut w = create(&path)?;
            transfer::write_features(&records, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
        }
        Command::Gradcheck { seed } => {
            let report = gradient_check(&TINY_DIMS, seed)?;
            let worst = report.worst.clone();
            writeln!(out, "checked {} entries, {} failures", report.checked, report.failures).map_err(io)?;
            if let Some(w) = worst {
                writeln!(
                    out,
                    "worst {}[{}]: analytic {:e}, numeric {:e}, relative error {:e}",
                    w.tensor, w.index, w.analytic, w.numeric, w.rel_err
                )
                .map_err(io)?;
            }
            report.into_result()?;
        }
    }
    Ok(())
}

fn cmd_train<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<TrainLog> {
    let io = |e: std::io::Error| Error::io("<stdout>", e);
    let p = &cfg.paths;
    let train = read_filtered(p.train.as_ref().expect("validated"), p.filter_pronominal)?;
    let test = p
        .test
        .as_ref()
        .map(|t| read_filtered(t, p.filter_pronominal))
        .transpose()?;
    let (dev, test) = match (&p.dev, test) {
        (Some(d), test) => (read_filtered(d, p.filter_pronominal)?, test),
        (None, Some(test)) => {
            let (dev, rest) = test.dev_split(DEV_FRACTION, cfg.train.seed)?;
            (dev, Some(rest))
        }
        (None, None) => (train.with_mentions(Vec::new()), None),
    };
    let warm = p.warm_start.as_ref().map(Checkpoint::load).transpose()?;
    let outcome = Trainer::new(cfg.train.clone())
        .warm_start(warm.as_ref())
        .pretrained(p.pretrained.clone())
        .run(&train, &dev)?;
    let ckpt_path = p.checkpoint.as_ref().expect("validated");
    outcome.checkpoint.save(ckpt_path)?;
    let tsv = outcome.log.to_tsv();
    match &p.log {
        Some(path) => std::fs::write(path, &tsv).map_err(|e| Error::io(path, e))?,
        None => write!(out, "{tsv}").map_err(io)?,
    }
    writeln!(out, "best epoch {}", outcome.best_epoch).map_err(io)?;
    if let Some(test) = test {
        let report = outcome.checkpoint.evaluate(&test, cfg.train.execution)?;
        write!(out, "test\n{report}").map_err(io)?;
    }
    Ok(outcome.log)
}
