//! Random parameter initialization.

use rand::Rng;

use crate::numerics::Tensor;

/// Uniform on `[-r, r]`, `r = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, rows, cols, r)
}

/// Embedding table rows with unit expected squared norm.
pub fn embedding<R: Rng>(rng: &mut R, rows: usize, dim: usize) -> Tensor {
    uniform(rng, rows, dim, (3.0 / dim as f64).sqrt())
}

pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, r: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-r..=r)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dimensions")
}
