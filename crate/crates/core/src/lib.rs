//! Possession-level analysis for soccer event and tracking logs.
//!
//! The crate turns raw match logs (or a seeded synthetic corpus) into
//! possession sequences, derives defensive-pressure features by spectral
//! clustering of opponent tracking data, encodes possessions as padded
//! state tensors, and fits two models on top: a shot-quality logistic
//! model and a convolutional-recurrent classifier over possession
//! endings. Rewards derived from those models feed an off-policy policy
//! gradient optimizer; importance-sampling and doubly-robust estimators
//! evaluate the result against the logged behavior.
//!
//! Modules map one-to-one onto pipeline stages; [`pipeline`] wires them
//! together behind a single config and writes a content-hash manifest so
//! reruns are verifiable byte-for-byte.

pub mod classifier;
pub mod error;
pub mod match_data;
pub mod nn;
pub mod ope;
pub mod pipeline;
pub mod pitch;
pub mod policy;
pub mod possession;
pub mod pressure;
pub mod reward;
pub mod state;
pub mod xg;

pub use error::{Error, Result};
