//! Forward-only test-time adaptation of latent vectors inside a source
//! principal subspace.
//!
//! A test latent `z_t` is corrected to `z_t + p·Vᵀ`, where `V` holds the top-k
//! principal directions of the source latents and the k-vector `p` is found by
//! CMA-ES minimizing the entropy of a frozen linear softmax decoder. The
//! decoder and subspace are never modified.

pub mod cmaes;
pub mod datagen;
pub mod decoder;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod quant;
pub mod rng;
pub mod subspace;
pub mod ted;

pub use error::{Error, Result};
