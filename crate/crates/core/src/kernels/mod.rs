//! Quantized int8 convolution kernels: reference implementations, the
//! fixed-point requantization they share, and the trace-emitting variants
//! that model how each optimization step executes on the core.

mod conv;
pub mod emit;
pub mod requant;
mod tensor;
mod variant;

use thiserror::Error;

pub use conv::{conv2d_1x1_specialized, conv2d_int8, depthwise_conv2d_int8};
pub use emit::{emit_network, emit_trace, KernelMeta, NetworkRun};
pub use requant::{mbqm, rdbpot, requantize, srdhm};
pub use tensor::{ConvParams, Geometry, Layer, LayerKind, Padding, QuantizedTensor, MAX_REDUCTION};
pub use variant::{KernelVariant, REFERENCE_CODE_BYTES, SESSION_CODE_BYTES, SPECIALIZED_CODE_BYTES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("variant `{variant}` cannot run layer `{layer}`: {reason}")]
    Inapplicable { variant: String, layer: String, reason: String },
    #[error("custom function unit reported an error in layer `{0}`")]
    Cfu(String),
}

/// Runs one layer through the matching reference kernel.
pub fn reference_layer(layer: &Layer, input: &QuantizedTensor) -> Result<QuantizedTensor, KernelError> {
    match layer.kind {
        LayerKind::Conv2d => conv2d_int8(&layer.params, input, &layer.filter),
        LayerKind::DepthwiseConv2d => depthwise_conv2d_int8(&layer.params, input, &layer.filter),
    }
}

/// Runs a layer sequence through the reference kernels.
pub fn reference_network(layers: &[Layer], input: &QuantizedTensor) -> Result<QuantizedTensor, KernelError> {
    layers.iter().try_fold(input.clone(), |x, layer| reference_layer(layer, &x))
}
