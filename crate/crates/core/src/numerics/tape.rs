use std::collections::BTreeMap;

use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Handle to a parameter tensor held in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors, kept in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            self.id(&name).is_none(),
            "parameter {name} registered twice"
        );
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

#[derive(Clone, Debug)]
enum Slot {
    Dense(Vec<f64>),
    /// Row-sparse gradient of a lookup table.
    Rows {
        cols: usize,
        rows: BTreeMap<usize, Vec<f64>>,
    },
}

/// Accumulated gradients, one slot per parameter of the store they came from.
#[derive(Clone, Debug)]
pub struct Gradients {
    slots: Vec<Option<Slot>>,
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Gradients {
    pub fn new(num_params: usize) -> Self {
        Gradients {
            slots: vec![None; num_params],
        }
    }

    fn add_dense(&mut self, id: ParamId, g: &[f64]) {
        match &mut self.slots[id.0] {
            slot @ None => *slot = Some(Slot::Dense(g.to_vec())),
            Some(Slot::Dense(d)) => add_into(d, g),
            Some(Slot::Rows { cols, rows }) => {
                let mut d = g.to_vec();
                for (r, v) in rows.iter() {
                    add_into(&mut d[r * *cols..(r + 1) * *cols], v);
                }
                self.slots[id.0] = Some(Slot::Dense(d));
            }
        }
    }

    fn add_row(&mut self, id: ParamId, row: usize, cols: usize, g: &[f64]) {
        match &mut self.slots[id.0] {
            slot @ None => {
                let mut rows = BTreeMap::new();
                rows.insert(row, g.to_vec());
                *slot = Some(Slot::Rows { cols, rows });
            }
            Some(Slot::Dense(d)) => add_into(&mut d[row * cols..(row + 1) * cols], g),
            Some(Slot::Rows { rows, .. }) => match rows.get_mut(&row) {
                Some(v) => add_into(v, g),
                None => {
                    rows.insert(row, g.to_vec());
                }
            },
        }
    }

    /// `self += other`, slot by slot in parameter order.
    pub fn merge(&mut self, other: &Gradients) {
        assert_eq!(self.slots.len(), other.slots.len());
        for (i, slot) in other.slots.iter().enumerate() {
            let id = ParamId(i);
            match slot {
                None => {}
                Some(Slot::Dense(d)) => self.add_dense(id, d),
                Some(Slot::Rows { cols, rows }) => {
                    for (r, v) in rows {
                        self.add_row(id, *r, *cols, v);
                    }
                }
            }
        }
    }

    /// Whether any gradient reached this parameter.
    pub fn touched(&self, id: ParamId) -> bool {
        self.slots[id.0].is_some()
    }

    /// Dense gradient shaped like the parameter; zero when untouched.
    pub fn dense(&self, id: ParamId, store: &ParamStore) -> Tensor {
        let shape = store.get(id).shape();
        let mut out = Tensor::zeros(shape);
        match &self.slots[id.0] {
            None => {}
            Some(Slot::Dense(d)) => out.data_mut().copy_from_slice(d),
            Some(Slot::Rows { rows, .. }) => {
                for (r, v) in rows {
                    out.row_mut(*r).copy_from_slice(v);
                }
            }
        }
        out
    }

    pub fn to_dense(&self, store: &ParamStore) -> Vec<Tensor> {
        store.ids().map(|id| self.dense(id, store)).collect()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Primitive kinds, used for diagnostics and fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Primitive {
    Param,
    Row,
    Constant,
    MatMul,
    VecMat,
    MatVec,
    Add,
    Sub,
    Mul,
    Affine,
    Sigmoid,
    Tanh,
    Relu,
    Concat,
    Slice,
    Dot,
    Sum,
    Max,
    Select,
}

/// Scales the adjoint propagated by one primitive's backward rule.
///
/// Only meant for negative controls of the gradient checker.
#[derive(Clone, Copy, Debug)]
pub struct BackwardFault {
    pub primitive: Primitive,
    pub factor: f64,
}

#[derive(Clone, Debug)]
enum Op {
    Param(ParamId),
    Row(ParamId, usize),
    Constant,
    MatMul(Var, Var),
    VecMat(Var, Var),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Dot(Var, Var),
    Sum(Var),
    Max(Var, usize),
    Select(Var, Vec<usize>),
}

impl Op {
    fn primitive(&self) -> Primitive {
        match self {
            Op::Param(_) => Primitive::Param,
            Op::Row(..) => Primitive::Row,
            Op::Constant => Primitive::Constant,
            Op::MatMul(..) => Primitive::MatMul,
            Op::VecMat(..) => Primitive::VecMat,
            Op::MatVec(..) => Primitive::MatVec,
            Op::Add(..) => Primitive::Add,
            Op::Sub(..) => Primitive::Sub,
            Op::Mul(..) => Primitive::Mul,
            Op::Affine(..) => Primitive::Affine,
            Op::Sigmoid(_) => Primitive::Sigmoid,
            Op::Tanh(_) => Primitive::Tanh,
            Op::Relu(_) => Primitive::Relu,
            Op::Concat(_) => Primitive::Concat,
            Op::Slice(..) => Primitive::Slice,
            Op::Dot(..) => Primitive::Dot,
            Op::Sum(_) => Primitive::Sum,
            Op::Max(..) => Primitive::Max,
            Op::Select(..) => Primitive::Select,
        }
    }
}

struct Node {
    op: Op,
    // None for parameters, whose value lives in the store.
    value: Option<Tensor>,
}

/// Records a forward computation over a [`ParamStore`] for reverse-mode differentiation.
///
/// A tape is single-threaded; parallel workers each build their own.
pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    fault: Option<BackwardFault>,
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: BackwardFault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.get(*id),
            _ => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, op: Op, value: Option<Tensor>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Op::Param(id), None)
    }

    /// One row of a 2-D parameter (embedding lookup).
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let table = self.store.get(id);
        if !table.is_matrix() || row >= table.rows() {
            return Err(Error::shape("row", table.shape(), &[row]));
        }
        let value = Tensor::vector(table.row(row).to_vec());
        Ok(self.push(Op::Row(id, row), Some(value)))
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Constant, Some(t))
    }

    /// 2-D matrix product `[n x k] . [k x m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.is_matrix() || !tb.is_matrix() || ta.cols() != tb.rows() {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let (n, m) = (ta.rows(), tb.cols());
        let mut out = Vec::with_capacity(n * m);
        for r in 0..n {
            out.extend(tensor::vecmat(ta.row(r), tb.data(), m));
        }
        let value = Tensor::matrix(n, m, out)?;
        Ok(self.push(Op::MatMul(a, b), Some(value)))
    }

    /// `x^T W` for a vector `x` of length `n` and matrix `W` of shape `[n x m]`.
    pub fn vecmat(&mut self, x: Var, w: Var) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        if tx.shape().len() != 1 || !tw.is_matrix() || tx.len() != tw.rows() {
            return Err(Error::shape("vecmat", tx.shape(), tw.shape()));
        }
        let value = Tensor::vector(tensor::vecmat(tx.data(), tw.data(), tw.cols()));
        Ok(self.push(Op::VecMat(x, w), Some(value)))
    }

    /// `W x` for a matrix `W` of shape `[k x m]` and a vector of length `m`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (tw, tx) = (self.value(w), self.value(x));
        if tx.shape().len() != 1 || !tw.is_matrix() || tx.len() != tw.cols() {
            return Err(Error::shape("matvec", tw.shape(), tx.shape()));
        }
        let value = Tensor::vector(tensor::matvec(tw.data(), tx.data(), tw.cols()));
        Ok(self.push(Op::MatVec(w, x), Some(value)))
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(name, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(op, Some(value)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| f(*x)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("shape preserved");
        self.push(op, Some(value))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        self.map(a, |x| scale * x + shift, Op::Affine(a, scale))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, tensor::sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    /// `max(0, x)`; the subgradient at exactly 0 is 0. NaN passes through.
    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| if x <= 0.0 { 0.0 } else { x }, Op::Relu(a))
    }

    /// Concatenation of 1-D vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 1 {
                return Err(Error::shape("concat", t.shape(), &[]));
            }
            data.extend_from_slice(t.data());
        }
        if data.is_empty() {
            return Err(Error::shape("concat", &[], &[]));
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Some(Tensor::vector(data))))
    }

    /// Contiguous sub-vector `a[start..start + len]`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        if ta.shape().len() != 1 || len == 0 || start + len > ta.len() {
            return Err(Error::shape("slice", ta.shape(), &[start, len]));
        }
        let value = Tensor::vector(ta.data()[start..start + len].to_vec());
        Ok(self.push(Op::Slice(a, start), Some(value)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 1 || ta.shape() != tb.shape() {
            return Err(Error::shape("dot", ta.shape(), tb.shape()));
        }
        let value = Tensor::scalar(tensor::dot(ta.data(), tb.data()));
        Ok(self.push(Op::Dot(a, b), Some(value)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Some(Tensor::scalar(s)))
    }

    /// Maximum entry; the gradient flows to the lowest index attaining it.
    pub fn max(&mut self, a: Var) -> Var {
        let data = self.value(a).data();
        let mut best = 0;
        for (i, &x) in data.iter().enumerate() {
            // Stick to the first NaN so it reaches the output.
            if x > data[best] || (x.is_nan() && !data[best].is_nan()) {
                best = i;
            }
        }
        let value = Tensor::scalar(data[best]);
        self.push(Op::Max(a, best), Some(value))
    }

    /// Gathers entries of a vector by index.
    pub fn select(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        if ta.shape().len() != 1 || indices.is_empty() || indices.iter().any(|&i| i >= ta.len())
        {
            return Err(Error::shape("select", ta.shape(), indices));
        }
        let value = Tensor::vector(indices.iter().map(|&i| ta.data()[i]).collect());
        Ok(self.push(Op::Select(a, indices.to_vec()), Some(value)))
    }

    /// Reverse pass from a `[1]`-shaped output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_shape = self.shape(output);
        if out_shape != [1] {
            return Err(Error::NonScalarOutput(out_shape.to_vec()));
        }
        let mut grads = Gradients::new(self.store.len());
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(vec![1.0]);

        fn acc(adj: &mut [Option<Vec<f64>>], v: Var, g: impl Iterator<Item = f64>) {
            match &mut adj[v.0] {
                Some(a) => {
                    for (x, y) in a.iter_mut().zip(g) {
                        *x += y;
                    }
                }
                slot @ None => *slot = Some(g.collect()),
            }
        }

        for i in (0..=output.0).rev() {
            let Some(mut g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(f) = self.fault {
                if f.primitive == node.op.primitive() {
                    g.iter_mut().for_each(|x| *x *= f.factor);
                }
            }
            match &node.op {
                Op::Param(id) => grads.add_dense(*id, &g),
                Op::Row(id, r) => grads.add_row(*id, *r, g.len(), &g),
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
                    // dA = G B^T, dB = A^T G
                    let mut da = vec![0.0; n * k];
                    let mut db = vec![0.0; k * m];
                    for r in 0..n {
                        let grow = &g[r * m..(r + 1) * m];
                        for c in 0..k {
                            da[r * k + c] = tensor::dot(grow, tb.row(c));
                            let arc = ta.data()[r * k + c];
                            for (d, gv) in db[c * m..(c + 1) * m].iter_mut().zip(grow) {
                                *d += arc * gv;
                            }
                        }
                    }
                    acc(&mut adj, *a, da.into_iter());
                    acc(&mut adj, *b, db.into_iter());
                }
                Op::VecMat(x, w) => {
                    let (tx, tw) = (self.value(*x), self.value(*w));
                    let m = tw.cols();
                    let dx = tensor::matvec(tw.data(), &g, m);
                    let mut dw = vec![0.0; tw.len()];
                    for (i, &xi) in tx.data().iter().enumerate() {
                        for (d, gv) in dw[i * m..(i + 1) * m].iter_mut().zip(&g) {
                            *d = xi * gv;
                        }
                    }
                    acc(&mut adj, *x, dx.into_iter());
                    acc(&mut adj, *w, dw.into_iter());
                }
                Op::MatVec(w, x) => {
                    let (tw, tx) = (self.value(*w), self.value(*x));
                    let m = tw.cols();
                    let dx = tensor::vecmat(&g, tw.data(), m);
                    let mut dw = vec![0.0; tw.len()];
                    for (r, &gr) in g.iter().enumerate() {
                        for (d, xv) in dw[r * m..(r + 1) * m].iter_mut().zip(tx.data()) {
                            *d = gr * xv;
                        }
                    }
                    acc(&mut adj, *w, dw.into_iter());
                    acc(&mut adj, *x, dx.into_iter());
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.iter().copied());
                    acc(&mut adj, *b, g.iter().copied());
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, g.iter().copied());
                    acc(&mut adj, *b, g.iter().map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let da: Vec<f64> = g.iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    let db: Vec<f64> = g.iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    acc(&mut adj, *a, da.into_iter());
                    acc(&mut adj, *b, db.into_iter());
                }
                Op::Affine(a, scale) => acc(&mut adj, *a, g.iter().map(|x| x * scale)),
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap().data();
                    acc(&mut adj, *a, g.iter().zip(y).map(|(x, y)| x * y * (1.0 - y)));
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap().data();
                    acc(&mut adj, *a, g.iter().zip(y).map(|(x, y)| x * (1.0 - y * y)));
                }
                Op::Relu(a) => {
                    let ta = self.value(*a).data();
                    acc(
                        &mut adj,
                        *a,
                        g.iter().zip(ta).map(|(x, v)| if *v > 0.0 { *x } else { 0.0 }),
                    );
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        acc(&mut adj, *p, g[off..off + n].iter().copied());
                        off += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.value(*a).len();
                    let mut da = vec![0.0; n];
                    da[*start..*start + g.len()].copy_from_slice(&g);
                    acc(&mut adj, *a, da.into_iter());
                }
                Op::Dot(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let s = g[0];
                    let da: Vec<f64> = tb.data().iter().map(|y| s * y).collect();
                    let db: Vec<f64> = ta.data().iter().map(|x| s * x).collect();
                    acc(&mut adj, *a, da.into_iter());
                    acc(&mut adj, *b, db.into_iter());
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    acc(&mut adj, *a, std::iter::repeat_n(g[0], n));
                }
                Op::Max(a, best) => {
                    let mut da = vec![0.0; self.value(*a).len()];
                    da[*best] = g[0];
                    acc(&mut adj, *a, da.into_iter());
                }
                Op::Select(a, indices) => {
                    let mut da = vec![0.0; self.value(*a).len()];
                    for (&i, gv) in indices.iter().zip(&g) {
                        da[i] += gv;
                    }
                    acc(&mut adj, *a, da.into_iter());
                }
            }
        }
        Ok(grads)
    }
}
