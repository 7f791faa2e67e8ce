//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use finetype::corpus::{close_labels, Corpus, TypeHierarchy};
use finetype::encoder::{feature_vector, Dims, FeatureVariant};
use finetype::inference::{evaluate, predict};
use finetype::numerics::Tape;
use finetype::par::Execution;
use finetype::scorer::{joint_objective, LabelSplit, ObjectiveMode, ProjectionParams, ScoreVector};
use finetype::numerics::{ParamStore, Tensor};
use finetype::synth::{self, SynthSpec};
use finetype::trainer::{self, gradient_check, Checkpoint, Mode, TrainConfig, Trainer, TINY_DIMS};
use finetype::transfer::{export_features, warm_start};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1
fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let report = gradient_check(&TINY_DIMS, 0).map_err(err)?;
    let t = within(start, Duration::from_secs(60))?;
    let w = report.worst.clone().ok_or("nothing checked")?;
    ensure(
        report.passed(),
        format!("{} of {} entries off; worst {}[{}] rel {:e}", report.failures, report.checked, w.tensor, w.index, w.rel_err),
    )?;
    Ok(format!("{} entries, worst rel err {:.2e} ({}), {t:.1?}", report.checked, w.rel_err, w.tensor))
}

// 2
fn loss_values() -> Outcome {
    let tol = 1e-12;
    let layout = |pos: &[f64], neg: &[f64]| {
        let s: Vec<f64> = pos.iter().chain(neg).copied().collect();
        let split = LabelSplit::new(&(0..pos.len()).collect::<Vec<_>>(), s.len()).unwrap();
        (ScoreVector(s), split)
    };
    let (s, sp) = layout(&[0.5], &[-0.2, -1.5]);
    let clean = s.loss_clean(&sp).map_err(err)?;
    ensure((clean - 1.3).abs() < tol, format!("clean case {clean}"))?;
    let (s, sp) = layout(&[0.2, 0.6], &[]);
    let noisy = s.loss_noisy(&sp).map_err(err)?;
    ensure((noisy - 0.4).abs() < tol, format!("noisy case {noisy}"))?;
    let (s, sp) = layout(&[0.0; 3], &[0.0; 2]);
    let zero = s.loss_noisy(&sp).map_err(err)?;
    ensure((zero - 3.0).abs() < tol, format!("zero-score case {zero}"))?;

    // Identity projections turn feature vectors straight into scores.
    let mut store = ParamStore::new();
    let eye = Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
    store.add("U", eye.clone());
    store.add("V", eye);
    let proj = ProjectionParams::from_store(&store).map_err(err)?;
    let batch = vec![
        (vec![0.5, -0.2, -1.5], LabelSplit::new(&[0], 3).unwrap(), true),
        (vec![0.2, 0.6, -1.0], LabelSplit::new(&[0, 1], 3).unwrap(), false),
    ];
    let joint = joint_objective(&store, &proj, &batch, ObjectiveMode::Full).map_err(err)?;
    ensure((joint - 1.7).abs() < tol, format!("joint case {joint}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..1000 {
        let k = rng.gen_range(1..=10);
        let scores: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let n_pos = rng.gen_range(1..=k);
        let mut idx: Vec<usize> = (0..k).collect();
        idx.shuffle(&mut rng);
        let split = LabelSplit::new(&idx[..n_pos], k).unwrap();
        let s = ScoreVector(scores);
        let (n, c) = (s.loss_noisy(&split).map_err(err)?, s.loss_clean(&split).map_err(err)?);
        ensure(n <= c, format!("instance {i}: noisy {n} > clean {c}"))?;
    }
    Ok("1.3 / 0.4 / 3.0 / 1.7 exact; noisy <= clean on 1000 instances".into())
}

/// Random tree of at most `max_nodes` nodes and depth at most `max_depth`, as closed paths.
fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, max_depth: usize) -> Vec<String> {
    let target = rng.gen_range(1..=max_nodes);
    let mut nodes: Vec<String> = vec![format!("/n{}", rng.gen_range(0..3))];
    let mut attempts = 0;
    while nodes.len() < target && attempts < 200 {
        attempts += 1;
        let candidate = if rng.gen_bool(0.3) {
            format!("/n{}", rng.gen_range(0..5))
        } else {
            let parent = nodes.choose(rng).unwrap().clone();
            if parent.matches('/').count() >= max_depth {
                continue;
            }
            format!("{parent}/n{}", rng.gen_range(0..4))
        };
        if !nodes.contains(&candidate) {
            nodes.push(candidate);
        }
    }
    nodes.sort();
    nodes
}

fn segments(p: &str) -> Vec<&str> {
    p.split('/').filter(|s| !s.is_empty()).collect()
}

fn ancestor_or_self(a: &str, b: &str) -> bool {
    let (a, b) = (segments(a), segments(b));
    a.len() <= b.len() && a.iter().zip(&b).all(|(x, y)| x == y)
}

// 3
fn partition_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut clean = 0;
    for i in 0..1000 {
        let nodes = random_tree(&mut rng, 20, 4);
        let h = TypeHierarchy::from_labels(&nodes).map_err(err)?;
        ensure(h.len() <= 20, "generated hierarchy too large")?;
        let n = rng.gen_range(1..=nodes.len().min(4));
        let picked: Vec<String> = nodes.choose_multiple(&mut rng, n).cloned().collect();
        let closed = close_labels(&picked).map_err(err)?;
        let got = h.is_clean(&closed).map_err(err)?;
        let brute = closed
            .iter()
            .all(|a| closed.iter().all(|b| ancestor_or_self(a, b) || ancestor_or_self(b, a)));
        ensure(got == brute, format!("instance {i}: {closed:?} is_clean={got}, brute force={brute}"))?;
        clean += got as usize;
    }
    Ok(format!("1000/1000 agree ({clean} clean)"))
}

/// Step-by-step greedy walk computed from label strings alone.
fn reference_walk(nodes: &[String], scores: &[f64]) -> Vec<String> {
    let mut current: Option<String> = None;
    let mut out = Vec::new();
    loop {
        let depth = current.as_ref().map_or(0, |c| segments(c).len());
        let mut best: Option<usize> = None;
        for (i, n) in nodes.iter().enumerate() {
            let is_child = segments(n).len() == depth + 1
                && current.as_ref().is_none_or(|c| ancestor_or_self(c, n));
            if is_child && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        match best {
            Some(b) if scores[b] > 0.0 => {
                out.push(nodes[b].clone());
                current = Some(nodes[b].clone());
            }
            _ => return out,
        }
    }
}

// 4
fn inference_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut non_empty = 0;
    for i in 0..200 {
        let nodes = random_tree(&mut rng, 20, 3);
        let h = TypeHierarchy::from_labels(&nodes).map_err(err)?;
        // Quarter steps make ties and exact zeros common.
        let scores: Vec<f64> = (0..h.len()).map(|_| rng.gen_range(-4..=4) as f64 / 4.0).collect();
        let p = predict(&ScoreVector(scores.clone()), &h);
        let got: Vec<String> = p.path.iter().map(|&j| h.node(j).to_string()).collect();
        let want = reference_walk(h.nodes(), &scores);
        ensure(got == want, format!("instance {i}: predict {got:?}, reference {want:?}"))?;
        for (d, (&j, &s)) in p.path.iter().zip(&p.path_scores).enumerate() {
            ensure(s > 0.0 && scores[j] == s, format!("instance {i}: threshold violated"))?;
            let parent_ok = if d == 0 { h.parent(j).is_none() } else { h.parent(j) == Some(p.path[d - 1]) };
            ensure(parent_ok, format!("instance {i}: not a root-anchored chain"))?;
        }
        let labels = p.labels(&h);
        if !labels.is_empty() {
            ensure(h.is_clean(&labels).map_err(err)?, format!("instance {i}: prediction is not a chain"))?;
            non_empty += 1;
        }
    }
    Ok(format!("200/200 agree ({non_empty} non-empty)"))
}

fn sets(v: &[&[&str]]) -> Vec<Vec<String>> {
    v.iter().map(|s| s.iter().map(|x| x.to_string()).collect()).collect()
}

// 5
fn metrics_oracle() -> Outcome {
    let pred = sets(&[&["/a", "/a/b"], &["/a"], &[], &["/d", "/d/e"], &["/a", "/a/b"]]);
    let gold = sets(&[&["/a", "/a/b"], &["/a", "/a/c"], &["/d"], &["/a"], &["/a", "/a/c"]]);
    let m = evaluate(&pred, &gold).map_err(err)?;
    // Per mention (p, r): (1, 1), (1, 1/2), (0, 0), (0, 0), (1/2, 1/2).
    // Pooled: 4 hits, 7 predicted, 8 gold.
    let expected = [
        ("strict", m.strict_accuracy, 0.2),
        ("macro_p", m.macro_precision, 0.5),
        ("macro_r", m.macro_recall, 0.4),
        ("macro_f1", m.macro_f1, 4.0 / 9.0),
        ("micro_p", m.micro_precision, 4.0 / 7.0),
        ("micro_r", m.micro_recall, 0.5),
        ("micro_f1", m.micro_f1, 8.0 / 15.0),
    ];
    for (name, got, want) in expected {
        ensure((got - want).abs() < 1e-9, format!("{name}: {got} vs {want}"))?;
    }
    let m = evaluate(&sets(&[&["A"], &["A", "B"]]), &sets(&[&["A", "B"], &["A", "B"]])).map_err(err)?;
    ensure(
        m.micro_precision == 1.0 && m.micro_recall == 0.75 && (m.micro_f1 - 0.857).abs() < 5e-4,
        format!("two-mention case micro-F1 {}", m.micro_f1),
    )?;
    Ok(format!("5-mention fixture exact; two-mention micro-F1 {:.4}", m.micro_f1))
}

// 6
fn overfit() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec {
        depth: 2,
        branching: 3,
        max_types: Some(7),
        n_mentions: 64,
        n_test: 16,
        noise_rate: 0.0,
        seed: 6,
        ..SynthSpec::default()
    };
    let (train, _) = synth::generate(&spec).map_err(err)?;
    ensure(train.hierarchy.len() == 7, format!("{} types", train.hierarchy.len()))?;
    ensure(train.hierarchy.max_depth() == 2, "depth")?;
    let cfg = TrainConfig {
        epochs: 200,
        learning_rate: 1e-3,
        batch_size: 32,
        seed: 6,
        ..TrainConfig::default()
    };
    let dev = Corpus::default();
    let out = trainer::train(&train, &dev, &cfg, None).map_err(err)?;
    let acc = out.last.evaluate(&train, Execution::Parallel).map_err(err)?.strict_accuracy;
    let t = within(start, Duration::from_secs(300))?;
    ensure(acc >= 0.95, format!("training strict accuracy {acc}"))?;
    Ok(format!("training strict accuracy {acc:.4}, {t:.1?}"))
}

// 7
fn noise_ablation() -> Outcome {
    let start = Instant::now();
    let mut means = [0.0; 2];
    let seeds = 5;
    let mut detail = Vec::new();
    for seed in 0..seeds {
        let spec = SynthSpec {
            n_mentions: 2000,
            n_test: 2000,
            noise_rate: 0.3,
            cue_prob: ABLATION_CUE_PROB,
            seed: 100 + seed,
            ..SynthSpec::default()
        };
        let (train, test) = synth::generate(&spec).map_err(err)?;
        let (dev, _) = test.dev_split(0.1, seed).map_err(err)?;
        for (k, mode) in [Mode::Full, Mode::AllClean].into_iter().enumerate() {
            let cfg = TrainConfig {
                mode,
                seed,
                epochs: ABLATION_EPOCHS,
                ..TrainConfig::default()
            };
            let out = trainer::train(&train, &dev, &cfg, None).map_err(err)?;
            let f1 = out.checkpoint.evaluate(&dev, Execution::Parallel).map_err(err)?.micro_f1;
            means[k] += f1 / seeds as f64;
            detail.push(format!("{f1:.3}"));
        }
    }
    let t = within(start, Duration::from_secs(30 * 60))?;
    let msg = format!("full {:.4} vs all-clean {:.4} [{}], {t:.0?}", means[0], means[1], detail.join(" "));
    ensure(means[0] >= means[1], msg.clone())?;
    Ok(msg)
}

const ABLATION_EPOCHS: usize = 80;
const ABLATION_CUE_PROB: f64 = 0.7;

// 8
fn transfer_smoke() -> Outcome {
    let wide = |max_types, seed| SynthSpec {
        depth: 2,
        branching: 15,
        top_level: Some(8),
        max_types: Some(max_types),
        n_mentions: 1500,
        n_test: 50,
        seed,
        ..SynthSpec::default()
    };
    let (src_train, _) = synth::generate(&wide(128, 81)).map_err(err)?;
    let (dst_train, dst_test) = synth::generate(&wide(47, 82)).map_err(err)?;
    ensure(src_train.hierarchy.len() == 128, format!("source K {}", src_train.hierarchy.len()))?;
    ensure(dst_train.hierarchy.len() == 47, format!("target K {}", dst_train.hierarchy.len()))?;
    let dims = Dims {
        char_dim: 8,
        word_dim: 8,
        word_hidden: 6,
        mention_hidden: 6,
        embed_dim: 8,
    };
    let cfg = TrainConfig {
        epochs: 1,
        dims,
        ..TrainConfig::default()
    };
    let src = trainer::train(&src_train, &Corpus::default(), &cfg, None).map_err(err)?.checkpoint;

    let (cv, tv) = trainer::build_vocabularies(&dst_train, true);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let warm = warm_start(&src, &cfg, &cv, &tv, &dst_train.hierarchy, &mut rng).map_err(err)?;
    for (name, lstm) in warm.encoder.lstms() {
        let from = src.params.encoder.lstms().into_iter().find(|(n, _)| *n == name).unwrap().1;
        for (a, b) in [(lstm.w_input, from.w_input), (lstm.w_hidden, from.w_hidden), (lstm.bias, from.bias)] {
            ensure(warm.store.get(a).bit_eq(src.params.store.get(b)), format!("{name} not copied"))?;
        }
    }
    let v = warm.store.get(warm.projection.v);
    ensure(v.rows() == 47, format!("V has {} rows", v.rows()))?;
    ensure(src.params.store.get(src.params.projection.v).rows() == 128, "source V rows")?;

    let dst_sub = dst_train.with_first(100);
    let cfg2 = TrainConfig { epochs: 2, ..cfg.clone() };
    let out = Trainer::new(cfg2).warm_start(Some(&src)).run(&dst_sub, &dst_test).map_err(err)?;
    ensure(out.log.0.len() == 2, "warm-started training did not finish")?;

    let ckpt = &out.checkpoint;
    let records = export_features(&dst_test, ckpt, "test", Execution::Parallel).map_err(err)?;
    let d_f = dims.feature_dim(FeatureVariant::Full);
    for (r, input) in records.iter().zip(ckpt.inputs(&dst_test)) {
        let mut tape = Tape::new(&ckpt.params.store);
        let f = feature_vector(&mut tape, &ckpt.params.encoder, &input, FeatureVariant::Full, None).map_err(err)?;
        ensure(r.vector.len() == d_f, format!("export dimension {}", r.vector.len()))?;
        ensure(r.vector.as_slice() == tape.value(f).data(), format!("{} differs from encoder output", r.id))?;
    }
    Ok(format!("LSTMs copied, V 128 -> 47 rows, {} vectors of dimension {d_f}", records.len()))
}

trait FirstN {
    fn with_first(&self, n: usize) -> Corpus;
}

impl FirstN for Corpus {
    fn with_first(&self, n: usize) -> Corpus {
        let text: String = self.to_jsonl().lines().take(n).map(|l| format!("{l}\n")).collect();
        Corpus::parse_str(&text).unwrap()
    }
}

// 9
fn round_trips() -> Outcome {
    let spec = SynthSpec {
        n_mentions: 80,
        n_test: 40,
        noise_rate: 0.2,
        seed: 9,
        ..SynthSpec::default()
    };
    let (train, test) = synth::generate(&spec).map_err(err)?;
    for c in [&train, &test] {
        let again = Corpus::parse_str(&c.to_jsonl()).map_err(err)?;
        ensure(&again == c, "corpus parse/serialize round-trip changed the corpus")?;
    }
    let fixture = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/small.jsonl")).map_err(err)?;
    let c = Corpus::parse_str(&fixture).map_err(err)?;
    ensure(Corpus::parse_str(&c.to_jsonl()).map_err(err)? == c, "fixture round-trip")?;

    let cfg = TrainConfig {
        epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = trainer::train(&train, &test, &cfg, None).map_err(err)?;
    let b = trainer::train(&train, &test, &cfg, None).map_err(err)?;
    ensure(a.log.to_tsv() == b.log.to_tsv(), "same-seed logs differ")?;
    let seq = trainer::train(&train, &test, &TrainConfig { execution: Execution::Sequential, ..cfg.clone() }, None).map_err(err)?;
    ensure(a.log.to_tsv() == seq.log.to_tsv(), "sequential and parallel logs differ")?;

    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("model.json");
    a.checkpoint.save(&path).map_err(err)?;
    let loaded = Checkpoint::load(&path).map_err(err)?;
    let before = a.checkpoint.evaluate(&test, Execution::Parallel).map_err(err)?;
    let after = loaded.evaluate(&test, Execution::Parallel).map_err(err)?;
    ensure(before == after, "metrics changed after reload")?;
    ensure(loaded.to_json() == a.checkpoint.to_json(), "save -> load -> save not byte-identical")?;
    Ok(format!("corpus, checkpoint and log round-trips hold (dev micro-F1 {:.4})", after.micro_f1))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient oracle", gradient_oracle),
        ("loss unit values", loss_values),
        ("partition oracle", partition_oracle),
        ("inference oracle", inference_oracle),
        ("metrics oracle", metrics_oracle),
        ("overfit check", overfit),
        ("noise-ablation trend", noise_ablation),
        ("transfer smoke", transfer_smoke),
        ("round-trips", round_trips),
    ];
    let only: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        match f() {
            Ok(detail) => println!("PASS [{n}] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{n}] {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
