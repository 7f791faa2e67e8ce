//! Seeded synthetic corpora with a planted context signal.
//!
//! Every type node owns a cue word, and a mention's sentence contains the cues
//! of its true type path mixed with filler words. Mentions name entities. An
//! ambiguous entity carries two types from different top-level branches: in
//! training data such a mention is labelled with both (a noisy, distant
//! supervision style label set) while its context only signals one of them.
//! Test mentions are always labelled with the signalled path alone.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub depth: usize,
    pub branching: usize,
    /// Number of depth-1 types; defaults to `branching`.
    pub top_level: Option<usize>,
    /// Keep only the first types in breadth-first order.
    pub max_types: Option<usize>,
    /// Training mentions.
    pub n_mentions: usize,
    pub n_test: usize,
    pub noise_rate: f64,
    /// Chance that each cue of the true path is present.
    pub cue_prob: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            depth: 2,
            branching: 3,
            top_level: None,
            max_types: None,
            n_mentions: 1000,
            n_test: 250,
            noise_rate: 0.0,
            cue_prob: 1.0,
            seed: 0,
        }
    }
}

const FILLER: usize = 60;

struct Node {
    path: String,
    parent: Option<usize>,
    children: Vec<usize>,
}

struct Plan {
    nodes: Vec<Node>,
    leaves: Vec<usize>,
}

impl Plan {
    fn new(spec: &SynthSpec) -> Plan {
        let top = spec.top_level.unwrap_or(spec.branching);
        let cap = spec.max_types.unwrap_or(usize::MAX);
        let mut nodes: Vec<Node> = (0..top.min(cap))
            .map(|i| Node {
                path: format!("/t{i}"),
                parent: None,
                children: Vec::new(),
            })
            .collect();
        let mut frontier: Vec<usize> = (0..nodes.len()).collect();
        for _ in 1..spec.depth {
            let mut next = Vec::new();
            for &p in &frontier {
                for j in 0..spec.branching {
                    if nodes.len() >= cap {
                        break;
                    }
                    let id = nodes.len();
                    nodes.push(Node {
                        path: format!("{}/t{j}", nodes[p].path),
                        parent: Some(p),
                        children: Vec::new(),
                    });
                    nodes[p].children.push(id);
                    next.push(id);
                }
            }
            frontier = next;
        }
        let leaves = (0..nodes.len()).filter(|&i| nodes[i].children.is_empty()).collect();
        Plan { nodes, leaves }
    }

    fn chain(&self, leaf: usize) -> Vec<usize> {
        let mut out = vec![leaf];
        while let Some(p) = self.nodes[*out.last().unwrap()].parent {
            out.push(p);
        }
        out.reverse();
        out
    }

    fn top(&self, leaf: usize) -> usize {
        self.chain(leaf)[0]
    }
}

struct Entity {
    name: Vec<String>,
    types: Vec<usize>,
}

fn random_name<R: Rng>(rng: &mut R) -> Vec<String> {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    let n_tokens = rng.gen_range(1..=2);
    (0..n_tokens)
        .map(|_| {
            let len = rng.gen_range(3..=7);
            let mut s: String = (0..len).map(|_| LETTERS[rng.gen_range(0..26)] as char).collect();
            s[..1].make_ascii_uppercase();
            s
        })
        .collect()
}

fn sentence<R: Rng>(rng: &mut R, plan: &Plan, e: &Entity, signal: usize, gold: &[usize], cue_prob: f64) -> String {
    let mut words: Vec<String> = (0..rng.gen_range(4..=8))
        .map(|_| format!("w{}", rng.gen_range(0..FILLER)))
        .collect();
    for n in plan.chain(signal) {
        if rng.gen::<f64>() < cue_prob {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, format!("cue{n}"));
        }
    }
    let start = rng.gen_range(0..=words.len());
    let end = start + e.name.len();
    let mut pos = vec!["NN".to_string(); words.len()];
    for (k, t) in e.name.iter().enumerate() {
        words.insert(start + k, t.clone());
        pos.insert(start + k, "NNP".to_string());
    }
    let labels: Vec<&str> = gold.iter().map(|&g| plan.nodes[g].path.as_str()).collect();
    json!({
        "tokens": words,
        "pos": pos,
        "mentions": [{"start": start, "end": end, "labels": labels}],
    })
    .to_string()
}

/// Training and test corpora as JSON-lines text.
pub fn generate_text(spec: &SynthSpec) -> Result<(String, String)> {
    if spec.branching < 2 {
        return Err(Error::InvalidArgument(format!(
            "branching must be at least 2, got {}",
            spec.branching
        )));
    }
    if spec.depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&spec.noise_rate) {
        return Err(Error::InvalidArgument(format!(
            "noise_rate must lie in [0, 1), got {}",
            spec.noise_rate
        )));
    }
    if !(spec.cue_prob > 0.0 && spec.cue_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cue_prob must lie in (0, 1], got {}",
            spec.cue_prob
        )));
    }
    let plan = Plan::new(spec);
    let tops: Vec<usize> = {
        let mut t: Vec<usize> = plan.leaves.iter().map(|&l| plan.top(l)).collect();
        t.dedup();
        t
    };
    if spec.noise_rate > 0.0 && tops.len() < 2 {
        return Err(Error::InvalidArgument(
            "noisy corpora need at least two top-level types".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_entities = (spec.n_mentions / 4).max(plan.leaves.len());
    let plain: Vec<Entity> = (0..n_entities)
        .map(|i| Entity {
            name: random_name(&mut rng),
            types: vec![plan.leaves[i % plan.leaves.len()]],
        })
        .collect();
    let ambiguous: Vec<Entity> = (0..n_entities)
        .map(|_| {
            let a = *plan.leaves.choose(&mut rng).unwrap();
            let others: Vec<usize> = plan
                .leaves
                .iter()
                .copied()
                .filter(|&l| plan.top(l) != plan.top(a))
                .collect();
            let types = match others.choose(&mut rng) {
                Some(&b) => vec![a, b],
                None => vec![a],
            };
            Entity {
                name: random_name(&mut rng),
                types,
            }
        })
        .collect();

    let emit = |n: usize, training: bool, rng: &mut ChaCha8Rng| -> String {
        let mut out = String::new();
        for _ in 0..n {
            let noisy = spec.noise_rate > 0.0 && rng.gen::<f64>() < spec.noise_rate;
            let e = if noisy {
                ambiguous.choose(rng).unwrap()
            } else {
                plain.choose(rng).unwrap()
            };
            let signal = *e.types.choose(rng).unwrap();
            let gold = if training { e.types.clone() } else { vec![signal] };
            out.push_str(&sentence(rng, &plan, e, signal, &gold, spec.cue_prob));
            out.push('\n');
        }
        out
    };
    let train = emit(spec.n_mentions, true, &mut rng);
    let test = emit(spec.n_test, false, &mut rng);
    Ok((train, test))
}

/// Parsed training and test corpora.
pub fn generate(spec: &SynthSpec) -> Result<(Corpus, Corpus)> {
    let (train, test) = generate_text(spec)?;
    Ok((Corpus::parse_str(&train)?, Corpus::parse_str(&test)?))
}
