//! Sorting networks, their exact compilation to small ReLU networks, and
//! the tooling built on top of that mapping: a bit-packing patch codec, a
//! synthetic same-pattern image task with an end-to-end neural classifier,
//! symbol-growth analytics, closed-form weight counts, and a small trainer
//! for the learnability experiments.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod locality;
pub mod microtrain;
pub mod nncompiler;
pub mod nnruntime;
pub mod patchcodec;
pub mod pipeline;
pub mod rng;
pub mod sortnet;

pub use error::{Error, Result};
