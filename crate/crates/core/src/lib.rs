//! Perceptual image similarity from per-pixel weighted least squares.
//!
//! Every pixel of an image gets an embedding vector: the coefficients of a
//! linear predictor fitted, by weighted least squares, to the pixels that
//! precede it in raster order. Each training sample is a causal neighborhood
//! paired with the pixel it precedes, weighted by `omega^l` where `l` is the
//! Manhattan distance to the pixel being embedded. The distance between two
//! images is the mean Euclidean distance between their embeddings.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature enables
//! parallel per-pixel solves through rayon; results do not depend on it.
//!
//! ```
//! use lasi_core::{lasi_distance, ImageTensor, LasiConfig};
//!
//! let x = ImageTensor::from_fn(8, 8, 1, |r, c, _| ((r * 8 + c) as f64) / 64.0);
//! let y = ImageTensor::from_fn(8, 8, 1, |r, c, _| ((r * 8 + c) as f64) / 70.0);
//! let cfg = LasiConfig { n: 4, ..LasiConfig::default() };
//! assert_eq!(lasi_distance(&x, &x, &cfg).unwrap(), 0.0);
//! assert!(lasi_distance(&x, &y, &cfg).unwrap() > 0.0);
//! ```
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod dd;
mod error;
mod math;
mod par;

pub mod eval;
pub mod gradient;
pub mod image;
pub mod linalg;
pub mod mad;
pub mod metric;
pub mod neighborhood;
pub mod sum;
pub mod wls;

pub use error::{Error, Result};
pub use eval::{
    score_2afc, score_2afc_distances, score_jnd, score_jnd_distances, spearman, sweep_n, AfcDecision,
    JndExample, JndResult, SweepRow, TwoAfcExample, TwoAfcResult,
};
pub use gradient::{fd_check, grad_metric, GradientReport, Wrt};
pub use image::{Dims, ImageTensor, PixelMap, Plane};
pub use mad::{corrupt_reference, mad_step, run_mad, Direction, MadConfig, MadTrajectory};
pub use metric::{lasi_distance, ms_ssim, mse, psnr, ssim, MetricId};
pub use neighborhood::{build_offsets, gather_neighborhood, manhattan, NeighborOffsets};
pub use wls::{
    accumulate_fast, accumulate_naive, predict, rank_one_transform, solve_embeddings,
    AccumulatorState, ChannelMode, EmbeddingMatrix, LasiConfig, Prediction,
};
