use rand::Rng;

use crate::error::{Error, Result};
use crate::init;
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Weights of one LSTM direction.
///
/// Gate blocks are laid out column-wise as `[input | forget | output | candidate]`,
/// each `hidden` wide: `w_input` is `input_dim x 4H`, `w_hidden` is `H x 4H`
/// and `bias` has length `4H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

pub const FORGET_BIAS: f64 = 1.0;

impl LstmParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let w_input = init::xavier(rng, input_dim, 4 * hidden, input_dim, hidden);
        let w_hidden = init::xavier(rng, hidden, 4 * hidden, hidden, hidden);
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].fill(FORGET_BIAS);
        LstmParams {
            w_input: store.add(format!("{prefix}.w_input"), w_input),
            w_hidden: store.add(format!("{prefix}.w_hidden"), w_hidden),
            bias: store.add(format!("{prefix}.bias"), Tensor::vector(bias)),
            input_dim,
            hidden,
        }
    }

    /// Looks up `{prefix}.w_input`, `{prefix}.w_hidden` and `{prefix}.bias`.
    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        let get = |suffix: &str| {
            let name = format!("{prefix}.{suffix}");
            store.id(&name).ok_or(Error::MissingTensor(name))
        };
        let (w_input, w_hidden, bias) = (get("w_input")?, get("w_hidden")?, get("bias")?);
        let (wi, wh, b) = (store.get(w_input), store.get(w_hidden), store.get(bias));
        let hidden = wh.rows();
        let check = |name: &str, t: &Tensor, expected: Vec<usize>| {
            if t.shape() == expected.as_slice() {
                Ok(())
            } else {
                Err(Error::TensorShape {
                    name: format!("{prefix}.{name}"),
                    expected,
                    found: t.shape().to_vec(),
                })
            }
        };
        check("w_hidden", wh, vec![hidden, 4 * hidden])?;
        let input_dim = wi.rows();
        check("w_input", wi, vec![input_dim, 4 * hidden])?;
        check("bias", b, vec![4 * hidden])?;
        Ok(LstmParams {
            w_input,
            w_hidden,
            bias,
            input_dim,
            hidden,
        })
    }

    pub fn param_count(&self) -> usize {
        4 * (self.hidden * self.hidden + self.hidden * self.input_dim + self.hidden)
    }

    pub fn bind(&self, tape: &mut Tape) -> LstmVars {
        LstmVars {
            w_input: tape.param(self.w_input),
            w_hidden: tape.param(self.w_hidden),
            bias: tape.param(self.bias),
            input_dim: self.input_dim,
            hidden: self.hidden,
        }
    }
}

/// An [`LstmParams`] bound to one tape.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    w_input: Var,
    w_hidden: Var,
    bias: Var,
    input_dim: usize,
    hidden: usize,
}

impl LstmVars {
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// One cell update. `state` is `None` for the zero initial state.
    pub fn step(&self, tape: &mut Tape, x: Var, state: Option<(Var, Var)>) -> Result<(Var, Var)> {
        if tape.shape(x) != [self.input_dim] {
            return Err(Error::shape("lstm_step", tape.shape(x), &[self.input_dim]));
        }
        let h = self.hidden;
        let xw = tape.vecmat(x, self.w_input)?;
        let mut pre = tape.add(xw, self.bias)?;
        if let Some((h_prev, _)) = state {
            let hr = tape.vecmat(h_prev, self.w_hidden)?;
            pre = tape.add(pre, hr)?;
        }
        let i = tape.slice(pre, 0, h)?;
        let i = tape.sigmoid(i);
        let o = tape.slice(pre, 2 * h, h)?;
        let o = tape.sigmoid(o);
        let g = tape.slice(pre, 3 * h, h)?;
        let g = tape.tanh(g);
        let ig = tape.mul(i, g)?;
        // With a zero previous cell the forget term vanishes exactly.
        let c = match state {
            Some((_, c_prev)) => {
                let f = tape.slice(pre, h, h)?;
                let f = tape.sigmoid(f);
                let fc = tape.mul(f, c_prev)?;
                tape.add(fc, ig)?
            }
            None => ig,
        };
        let tc = tape.tanh(c);
        let h_new = tape.mul(o, tc)?;
        Ok((h_new, c))
    }

    /// Final hidden state after folding `inputs` left to right; zeros for an empty sequence.
    pub fn run(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Var> {
        let mut state = None;
        for &x in inputs {
            state = Some(self.step(tape, x, state)?);
        }
        Ok(match state {
            Some((h, _)) => h,
            None => tape.constant(Tensor::zeros(&[self.hidden])),
        })
    }
}
