//! Integer-only random convolutional kernel classifier for time series on
//! microcontroller-class targets.
//!
//! The pipeline: fixed-point input quantization, binary dilated kernels with
//! streaming winner counting into int16 accumulators, shift-only sparse
//! scaling, and an int8 softmax-regression head with int32 scores.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod energy;
pub mod error;
pub mod oracle;
pub mod pipeline;
pub mod projection;
pub mod scaler;
pub mod transform;

pub use classifier::{FloatClassifier, QuantizedClassifier, QuantizedModel, TrainRecipe};
pub use config::{CountingMode, ModelConfig, Padding};
pub use error::{Error, Result};
pub use pipeline::{fit, Engine, FitOutput};
pub use projection::QuantizedSeries;
pub use transform::{FeatureVector, KernelBank};
