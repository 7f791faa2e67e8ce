use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

/// First/second moment estimates for every parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(store: &mut ParamStore, grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(Error::shape("adam_step", &[store.len()], &[grads.len()]));
    }
    for (id, g) in store.ids().zip(grads) {
        if g.shape() != store.get(id).shape() {
            return Err(Error::shape("adam_step", store.get(id).shape(), g.shape()));
        }
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
        let p = store.get_mut(id).data_mut();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(grads[i].data()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
