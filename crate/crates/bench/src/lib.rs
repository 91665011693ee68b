//! Shared inputs for the benchmarks.

use thermopipe::grid::{Grid2D, Unit};
use thermopipe::ops::ConvKernel;
use thermopipe::tensor::Tensor3;

/// Smooth map with some texture, °C.
pub fn test_map(h: usize, w: usize) -> Grid2D {
    Grid2D::from_fn(h, w, Unit::Celsius, |y, x| {
        25.0 + 4.0 * ((y as f32 * 0.13).sin() * (x as f32 * 0.07).cos()) + ((y * 7 + x * 3) % 5) as f32 * 0.2
    })
}

/// `c×h×w` tensor with deterministic values.
pub fn test_tensor(c: usize, h: usize, w: usize) -> Tensor3 {
    let data = (0..c * h * w).map(|i| ((i * 37 % 101) as f32 - 50.0) * 0.01).collect();
    Tensor3::new(c, h, w, data).expect("sizes agree")
}

/// `k×k` same-padded kernel with deterministic weights.
pub fn test_kernel(cout: usize, cin: usize, k: usize) -> ConvKernel {
    let weights = (0..cout * cin * k * k).map(|i| ((i * 53 % 97) as f32 - 48.0) * 0.001).collect();
    ConvKernel::same(cout, cin, k, weights, vec![0.0; cout]).expect("valid kernel")
}
