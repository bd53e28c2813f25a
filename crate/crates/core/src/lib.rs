//! Quanta radiance fields: reconstruct a voxel radiance field and dense camera
//! poses directly from single-photon binary frames.
//!
//! The crate is organised bottom-up:
//!
//! - [`photon_sim`] simulates single-photon (Bernoulli) and conventional
//!   (integrating, read-noise limited) cameras.
//! - [`frame_store`] bit-packs binary frame sequences on disk and serves
//!   random pixel access and uniform minibatches from a memory map.
//! - [`field`] holds the voxel field, the emission-absorption renderer with
//!   its analytic backward pass, and flux inversion / tonemapping.
//! - [`pose`] implements the 9-D pose encoding, Fourier lowpass smoothing of
//!   trajectories and its penalty, interpolation and perturbation.
//! - [`trainer`] jointly optimises field and poses with Adam.
//! - [`bench`] runs the desk-scale experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod camera;
pub mod error;
pub mod field;
pub mod frame_store;
pub mod image;
pub mod photon_sim;
pub mod pose;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
