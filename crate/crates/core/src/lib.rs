//! Thermal infrared imaging pipeline for low-cost uncooled cameras.
//!
//! The crate simulates raw gray-level frames from temperature maps, estimates
//! radiometric temperature with single-frame or multiframe nonuniformity
//! correction (NUC), super-resolves the estimate by ×2 or ×4 and scores the
//! result with MAE, PSNR, SSIM, EMD and the crop water stress index.
//!
//! Every network is built on a small reverse-mode differentiation graph
//! ([`graph`]) so the whole pipeline can be trained end to end on a CPU.

pub mod error;
pub mod formats;
pub mod graph;
pub mod grid;
pub mod metrics;
pub mod nuc;
pub mod ops;
pub mod pipeline;
pub mod scenes;
pub mod simulator;
pub mod sr;
pub mod tensor;
pub mod throughput;
pub mod training;
pub mod weights;

/// Temperature range mapped to `[0, 1]` before any network, °C.
pub const TEMP_RANGE: (f64, f64) = (-10.0, 120.0);

/// Negative slope of every leaky-ReLU activation.
pub const LEAKY_SLOPE: f64 = 0.1;

pub use error::{Error, Result};
pub use grid::{GrayFrame, Grid2D, Unit};
pub use tensor::{Real, Tensor3};
pub use weights::{ConvSpec, ParamTensor, WeightStore};
