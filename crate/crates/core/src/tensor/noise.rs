//! Standard Gumbel noise for differentiable edge sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::rng;

/// Maps a uniform draw `u` in (0,1) to a standard Gumbel sample
/// `-log(-log(u))`, clamping `u` away from {0,1} by 1e-12.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(1e-12, 1.0 - 1e-12);
    -(-u.ln()).ln()
}

/// Fills a `rows x cols` tensor with i.i.d. standard Gumbel samples.
pub fn gumbel_noise(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = gumbel_from_uniform(rng.random::<f64>());
    }
    t
}

/// Seeded convenience wrapper; the same seed always yields the same tensor.
pub fn gumbel_noise_seeded(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut r = rng::seeded(seed);
    gumbel_noise(rows, cols, &mut r)
}
