//! Inpainting networks as a pretext task for re-identifying individuals from
//! skin patterns: synthetic data, four inpainting architectures, encoder
//! extraction, classification, Grad-CAM, embedding analytics and region
//! ablation.

pub mod ablation;
pub mod batch;
pub mod classifier;
pub mod config;
pub mod data;
pub mod encoder;
pub mod explain;
pub mod inpaint;
mod error;
pub mod nn;
pub mod pipeline;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, ErrorCategory, Result};
