use rand::Rng;

use super::Tensor;

/// Uniform sample in ±√(6/(fan_in+fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> f64 {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.random_range(-limit..limit)
}

/// A rows×cols weight matrix drawn with Glorot limits for the given fans.
/// Fans are passed separately so a matrix that is one block of a larger
/// logical layer uses the layer's limits.
pub fn init_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
) -> Tensor {
    let data = (0..rows * cols).map(|_| glorot_uniform(rng, fan_in, fan_out)).collect();
    Tensor::from_raw(vec![rows, cols], data)
}
