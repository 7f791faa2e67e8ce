//! Joint feature/label embedding, per-label scores and the two hinge losses.
//!
//! Features are projected with `U` (`D_f x D_e`) and labels are rows of `V`
//! (`K x D_e`); the score of label `t` is `(f^T U) . V[t]`. Clean mentions
//! use a margin loss over every label; noisy mentions only require the best
//! positive label to clear the margin.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init;
use crate::numerics::{dot, ParamId, ParamStore, Tape, Var};

pub const FEATURE_PROJECTION: &str = "U";
pub const LABEL_EMBEDDING: &str = "V";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectionParams {
    pub u: ParamId,
    pub v: ParamId,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub num_labels: usize,
}

impl ProjectionParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        feature_dim: usize,
        num_labels: usize,
        embed_dim: usize,
        rng: &mut R,
    ) -> Self {
        let u = init::xavier(rng, feature_dim, embed_dim, feature_dim, embed_dim);
        let v = init::xavier(rng, num_labels, embed_dim, num_labels, embed_dim);
        ProjectionParams {
            u: store.add(FEATURE_PROJECTION, u),
            v: store.add(LABEL_EMBEDDING, v),
            feature_dim,
            embed_dim,
            num_labels,
        }
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let get = |n: &str| store.id(n).ok_or_else(|| Error::MissingTensor(n.to_string()));
        let (u, v) = (get(FEATURE_PROJECTION)?, get(LABEL_EMBEDDING)?);
        let (tu, tv) = (store.get(u), store.get(v));
        if !tu.is_matrix() || !tv.is_matrix() || tu.cols() != tv.cols() {
            return Err(Error::TensorShape {
                name: LABEL_EMBEDDING.into(),
                expected: vec![tv.rows(), tu.cols()],
                found: tv.shape().to_vec(),
            });
        }
        Ok(ProjectionParams {
            u,
            v,
            feature_dim: tu.rows(),
            embed_dim: tu.cols(),
            num_labels: tv.rows(),
        })
    }
}

/// Positive labels and their complement over `[0, K)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSplit {
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

impl LabelSplit {
    pub fn new(positives: &[usize], num_labels: usize) -> Result<Self> {
        let mut is_pos = vec![false; num_labels];
        for &p in positives {
            if p >= num_labels {
                return Err(Error::InvalidArgument(format!(
                    "label index {p} out of range for {num_labels} labels"
                )));
            }
            is_pos[p] = true;
        }
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..num_labels).partition(|&t| is_pos[t]);
        if pos.is_empty() {
            return Err(Error::NoPositiveLabels);
        }
        Ok(LabelSplit {
            positives: pos,
            negatives: neg,
        })
    }

    pub fn positives(&self) -> &[usize] {
        &self.positives
    }

    pub fn negatives(&self) -> &[usize] {
        &self.negatives
    }

    pub fn num_labels(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }
}

/// One score per label.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

/// `max(0, x)` that lets NaN through, so a broken model cannot hide behind a zero loss.
fn hinge(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x
    }
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, split: &LabelSplit) -> Result<()> {
        if split.num_labels() != self.len() {
            return Err(Error::shape("loss", &[self.len()], &[split.num_labels()]));
        }
        Ok(())
    }

    fn negative_part(&self, split: &LabelSplit) -> f64 {
        split.negatives.iter().map(|&t| hinge(1.0 + self.0[t])).sum()
    }

    /// Index of the highest-scoring positive label; lowest index on ties.
    pub fn best_positive(&self, split: &LabelSplit) -> usize {
        let mut best = split.positives[0];
        for &t in &split.positives[1..] {
            if self.0[t] > self.0[best] {
                best = t;
            }
        }
        best
    }

    pub fn loss_clean(&self, split: &LabelSplit) -> Result<f64> {
        self.check(split)?;
        let pos: f64 = split.positives.iter().map(|&t| hinge(1.0 - self.0[t])).sum();
        Ok(pos + self.negative_part(split))
    }

    pub fn loss_noisy(&self, split: &LabelSplit) -> Result<f64> {
        self.check(split)?;
        let best = self.best_positive(split);
        Ok(self.negative_part(split) + hinge(1.0 - self.0[best]))
    }
}

/// How clean and noisy mentions enter the objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    #[default]
    Full,
    /// Every mention is treated as clean.
    AllClean,
}

/// `f^T U` without a tape.
pub fn embed_feature(store: &ParamStore, proj: &ProjectionParams, f: &[f64]) -> Result<Vec<f64>> {
    let u = store.get(proj.u);
    if f.len() != u.rows() {
        return Err(Error::shape("embed_feature", &[f.len()], u.shape()));
    }
    let mut out = vec![0.0; u.cols()];
    for (i, &fi) in f.iter().enumerate() {
        for (o, w) in out.iter_mut().zip(u.row(i)) {
            *o += fi * w;
        }
    }
    Ok(out)
}

/// Scores of every label for a feature vector, without a tape.
pub fn score_all(store: &ParamStore, proj: &ProjectionParams, f: &[f64]) -> Result<ScoreVector> {
    let e = embed_feature(store, proj, f)?;
    let v = store.get(proj.v);
    Ok(ScoreVector((0..v.rows()).map(|t| dot(v.row(t), &e)).collect()))
}

/// Value of the joint objective over `(features, split, is_clean)` triples.
pub fn joint_objective(
    store: &ParamStore,
    proj: &ProjectionParams,
    batch: &[(Vec<f64>, LabelSplit, bool)],
    mode: ObjectiveMode,
) -> Result<f64> {
    let mut total = 0.0;
    for (f, split, is_clean) in batch {
        let s = score_all(store, proj, f)?;
        total += if *is_clean || mode == ObjectiveMode::AllClean {
            s.loss_clean(split)?
        } else {
            s.loss_noisy(split)?
        };
    }
    Ok(total)
}

/// Taped counterparts used for training.
pub mod taped {
    use super::*;

    pub fn embed_feature(tape: &mut Tape, proj: &ProjectionParams, f: Var) -> Result<Var> {
        let u = tape.param(proj.u);
        tape.vecmat(f, u)
    }

    pub fn score_all(tape: &mut Tape, proj: &ProjectionParams, f: Var) -> Result<Var> {
        let e = embed_feature(tape, proj, f)?;
        let v = tape.param(proj.v);
        tape.matvec(v, e)
    }

    fn negative_part(tape: &mut Tape, scores: Var, split: &LabelSplit) -> Result<Option<Var>> {
        if split.negatives.is_empty() {
            return Ok(None);
        }
        let neg = tape.select(scores, &split.negatives)?;
        let h = tape.affine(neg, 1.0, 1.0);
        let h = tape.relu(h);
        Ok(Some(tape.sum(h)))
    }

    fn with_negatives(tape: &mut Tape, pos: Var, scores: Var, split: &LabelSplit) -> Result<Var> {
        match negative_part(tape, scores, split)? {
            Some(n) => tape.add(pos, n),
            None => Ok(pos),
        }
    }

    pub fn loss_clean(tape: &mut Tape, scores: Var, split: &LabelSplit) -> Result<Var> {
        let pos = tape.select(scores, &split.positives)?;
        let h = tape.affine(pos, -1.0, 1.0);
        let h = tape.relu(h);
        let p = tape.sum(h);
        with_negatives(tape, p, scores, split)
    }

    pub fn loss_noisy(tape: &mut Tape, scores: Var, split: &LabelSplit) -> Result<Var> {
        let pos = tape.select(scores, &split.positives)?;
        let best = tape.max(pos);
        let h = tape.affine(best, -1.0, 1.0);
        let p = tape.relu(h);
        with_negatives(tape, p, scores, split)
    }

    pub fn mention_loss(
        tape: &mut Tape,
        scores: Var,
        split: &LabelSplit,
        is_clean: bool,
        mode: ObjectiveMode,
    ) -> Result<Var> {
        if is_clean || mode == ObjectiveMode::AllClean {
            loss_clean(tape, scores, split)
        } else {
            loss_noisy(tape, scores, split)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;
    use proptest::prelude::*;

    /// Scores `[pos..., neg...]` with the split matching that layout.
    fn layout(pos: &[f64], neg: &[f64]) -> (ScoreVector, LabelSplit) {
        let scores: Vec<f64> = pos.iter().chain(neg).copied().collect();
        let split = LabelSplit::new(&(0..pos.len()).collect::<Vec<_>>(), scores.len()).unwrap();
        (ScoreVector(scores), split)
    }

    #[test]
    fn clean_loss_examples() {
        let (s, sp) = layout(&[2.0], &[-2.0]);
        assert_eq!(s.loss_clean(&sp).unwrap(), 0.0);
        let (s, sp) = layout(&[0.0], &[0.0]);
        assert_eq!(s.loss_clean(&sp).unwrap(), 2.0);
        let (s, sp) = layout(&[0.5], &[-0.2, -1.5]);
        assert!((s.loss_clean(&sp).unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn noisy_loss_examples() {
        let (s, sp) = layout(&[0.5, 2.0], &[-2.0]);
        assert_eq!(s.loss_noisy(&sp).unwrap(), 0.0);
        let (s, sp) = layout(&[0.2, 0.6], &[]);
        assert!((s.loss_noisy(&sp).unwrap() - 0.4).abs() < 1e-12);
        let (s, sp) = layout(&[0.0, 0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(s.loss_noisy(&sp).unwrap(), 3.0);
    }

    #[test]
    fn split_requires_positives() {
        assert!(matches!(LabelSplit::new(&[], 3), Err(Error::NoPositiveLabels)));
        assert!(LabelSplit::new(&[3], 3).is_err());
        let sp = LabelSplit::new(&[2, 0], 4).unwrap();
        assert_eq!(sp.positives(), &[0, 2]);
        assert_eq!(sp.negatives(), &[1, 3]);
    }

    #[test]
    fn best_positive_breaks_ties_low() {
        let (s, sp) = layout(&[0.7, 0.7, 0.1], &[]);
        assert_eq!(s.best_positive(&sp), 0);
    }

    fn identity_store(n: usize, v_rows: Vec<Vec<f64>>) -> (ParamStore, ProjectionParams) {
        let mut store = ParamStore::new();
        let mut u = Tensor::zeros(&[n, n]);
        for i in 0..n {
            u.data_mut()[i * n + i] = 1.0;
        }
        let k = v_rows.len();
        let v = Tensor::matrix(k, n, v_rows.concat()).unwrap();
        let proj = ProjectionParams {
            u: store.add(FEATURE_PROJECTION, u),
            v: store.add(LABEL_EMBEDDING, v),
            feature_dim: n,
            embed_dim: n,
            num_labels: k,
        };
        (store, proj)
    }

    #[test]
    fn embedding_and_scores() {
        let (store, proj) = identity_store(2, vec![vec![0.5, 2.0], vec![0.0, 0.0]]);
        assert_eq!(embed_feature(&store, &proj, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert_eq!(embed_feature(&store, &proj, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let s = score_all(&store, &proj, &[1.0, 0.0]).unwrap();
        assert_eq!(s.0, vec![0.5, 0.0]);
        let s2 = score_all(&store, &proj, &[2.0, 0.0]).unwrap();
        assert_eq!(s2.0, vec![1.0, 0.0]);
        assert!(embed_feature(&store, &proj, &[1.0]).is_err());
    }

    #[test]
    fn taped_losses_agree_with_values() {
        let mut store = ParamStore::new();
        let id = store.add("s", Tensor::vector(vec![0.5, -0.2, -1.5, 0.6]));
        let split = LabelSplit::new(&[0, 3], 4).unwrap();
        let sv = ScoreVector(store.get(id).data().to_vec());
        for clean in [true, false] {
            let mut tape = Tape::new(&store);
            let s = tape.param(id);
            let l = taped::mention_loss(&mut tape, s, &split, clean, ObjectiveMode::Full).unwrap();
            let expected = if clean {
                sv.loss_clean(&split).unwrap()
            } else {
                sv.loss_noisy(&split).unwrap()
            };
            assert!((tape.value(l).item() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_objective_worked_examples() {
        let eye = |k: usize| (0..k).map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect()).collect();
        let (store, proj) = identity_store(3, eye(3));
        let clean = (vec![0.5, -0.2, -1.5], LabelSplit::new(&[0], 3).unwrap(), true);
        let noisy = (vec![0.2, 0.6, -1.0], LabelSplit::new(&[0, 1], 3).unwrap(), false);

        let one = joint_objective(&store, &proj, std::slice::from_ref(&clean), ObjectiveMode::Full).unwrap();
        assert!((one - 1.3).abs() < 1e-12);
        let both = vec![clean.clone(), noisy.clone()];
        let total = joint_objective(&store, &proj, &both, ObjectiveMode::Full).unwrap();
        assert!((total - 1.7).abs() < 1e-12);
        let reversed = vec![noisy, clean.clone()];
        assert_eq!(total, joint_objective(&store, &proj, &reversed, ObjectiveMode::Full).unwrap());

        let all_clean_batch = vec![clean.clone(), clean];
        assert_eq!(
            joint_objective(&store, &proj, &all_clean_batch, ObjectiveMode::Full).unwrap(),
            joint_objective(&store, &proj, &all_clean_batch, ObjectiveMode::AllClean).unwrap()
        );
    }

    proptest! {
        #[test]
        fn noisy_never_exceeds_clean(
            scores in proptest::collection::vec(-3.0f64..3.0, 1..12),
            mask in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let k = scores.len();
            let mut pos: Vec<usize> = (0..k).filter(|&i| mask[i]).collect();
            if pos.is_empty() { pos.push(0); }
            let split = LabelSplit::new(&pos, k).unwrap();
            let s = ScoreVector(scores);
            let lc = s.loss_clean(&split).unwrap();
            let ln = s.loss_noisy(&split).unwrap();
            prop_assert!(ln >= 0.0 && lc >= 0.0);
            prop_assert!(ln <= lc + 1e-12);
            if split.positives().len() == 1 {
                prop_assert_eq!(ln, lc);
            }
            let margins = split.negatives().iter().all(|&t| s.0[t] <= -1.0);
            prop_assert_eq!(lc == 0.0, margins && split.positives().iter().all(|&t| s.0[t] >= 1.0));
            prop_assert_eq!(ln == 0.0, margins && s.0[s.best_positive(&split)] >= 1.0);
        }
    }
}
