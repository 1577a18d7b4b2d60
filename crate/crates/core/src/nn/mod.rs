//! Minimal neural-network toolkit on top of candle tensors.

pub mod layers;
pub mod ops;
pub mod params;
pub mod spectral;

pub use layers::{conv, Activation, AvgPool2, BatchNorm2d, Conv2d, ConvBlock, Layer, Linear, Sequential, Upsample2x};
pub use ops::{reflect_pad, ConvGeometry, PadMode};
pub use params::{save_stores, Param, ParamStore};
