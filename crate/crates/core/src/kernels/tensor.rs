use std::fmt;

use super::KernelError;

/// Dense int8 tensor with a zero point. Activations are `[h, w, c]`,
/// filters `[oc, kh, kw, ic]` (depthwise filters use `oc = 1` and carry all
/// output channels in the last dimension).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedTensor {
    shape: Vec<usize>,
    data: Vec<i8>,
    zero_point: i32,
}

impl QuantizedTensor {
    pub fn new(shape: Vec<usize>, data: Vec<i8>, zero_point: i32) -> Result<Self, KernelError> {
        if !(3..=4).contains(&shape.len()) || shape.contains(&0) {
            return Err(KernelError::Shape(format!("unsupported shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(KernelError::Shape(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        if !(-128..=127).contains(&zero_point) {
            return Err(KernelError::Params(format!("zero point {zero_point} outside int8")));
        }
        Ok(Self { shape, data, zero_point })
    }

    pub fn activation(h: usize, w: usize, c: usize, data: Vec<i8>, zero_point: i32) -> Result<Self, KernelError> {
        Self::new(vec![h, w, c], data, zero_point)
    }

    pub fn filter(oc: usize, kh: usize, kw: usize, ic: usize, data: Vec<i8>) -> Result<Self, KernelError> {
        Self::new(vec![oc, kh, kw, ic], data, 0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn zero_point(&self) -> i32 {
        self.zero_point
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(h, w, c)` of an activation tensor.
    pub fn hwc(&self) -> Result<(usize, usize, usize), KernelError> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(KernelError::Shape(format!("expected [h, w, c], got {:?}", self.shape))),
        }
    }

    /// `(oc, kh, kw, ic)` of a filter tensor.
    pub fn ohwi(&self) -> Result<(usize, usize, usize, usize), KernelError> {
        match self.shape[..] {
            [o, h, w, i] => Ok((o, h, w, i)),
            _ => Err(KernelError::Shape(format!("expected [oc, kh, kw, ic], got {:?}", self.shape))),
        }
    }

    /// Raw bytes as stored in memory.
    pub fn bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v as u8).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    pub fn as_str(self) -> &'static str {
        match self {
            Padding::Same => "same",
            Padding::Valid => "valid",
        }
    }
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    DepthwiseConv2d,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "conv2d",
            LayerKind::DepthwiseConv2d => "depthwise_conv2d",
        }
    }
}

/// Quantized convolution parameters. Per-channel vectors are indexed by
/// output channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvParams {
    pub stride: usize,
    pub padding: Padding,
    pub depth_multiplier: usize,
    /// Added to every input value (the negated input zero point).
    pub input_offset: i32,
    /// Added after scaling (the output zero point).
    pub output_offset: i32,
    pub bias: Vec<i32>,
    pub multiplier: Vec<i32>,
    pub shift: Vec<i32>,
    pub act_min: i32,
    pub act_max: i32,
}

/// Largest number of products summed into one accumulator. With operands
/// bounded by 256 and 128 in magnitude this keeps the sum below 2^30.
pub const MAX_REDUCTION: usize = 1 << 15;

/// Resolved sizes of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub depth_multiplier: usize,
}

impl Geometry {
    /// Input coordinate of a filter tap, `None` when it falls in padding.
    pub fn input_pos(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad_top)?;
        let ix = (ox * self.stride + kx).checked_sub(self.pad_left)?;
        (iy < self.in_h && ix < self.in_w).then_some((iy, ix))
    }

    pub fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1
    }

    pub fn outputs(&self) -> usize {
        self.out_h * self.out_w * self.out_c
    }
}

fn out_extent(input: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize), KernelError> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(input);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if input < k {
                return Err(KernelError::Shape(format!("valid padding needs input {input} >= kernel {k}")));
            }
            Ok(((input - k) / stride + 1, 0))
        }
    }
}

impl ConvParams {
    /// Checks the parameters against an input and filter and resolves the
    /// output geometry.
    pub fn geometry(
        &self,
        kind: LayerKind,
        input: &QuantizedTensor,
        filter: &QuantizedTensor,
    ) -> Result<Geometry, KernelError> {
        let (in_h, in_w, in_c) = input.hwc()?;
        let (fo, kh, kw, fi) = filter.ohwi()?;
        if self.stride == 0 {
            return Err(KernelError::Params("stride must be at least 1".into()));
        }
        let (out_c, reduction, dm) = match kind {
            LayerKind::Conv2d => {
                if fi != in_c {
                    return Err(KernelError::Shape(format!("filter depth {fi} != input depth {in_c}")));
                }
                (fo, kh * kw * in_c, 1)
            }
            LayerKind::DepthwiseConv2d => {
                let dm = self.depth_multiplier;
                if dm == 0 || fo != 1 || fi != in_c * dm {
                    return Err(KernelError::Shape(format!(
                        "depthwise filter {:?} does not match depth {in_c} x multiplier {dm}",
                        filter.shape()
                    )));
                }
                (fi, kh * kw, dm)
            }
        };
        if reduction > MAX_REDUCTION {
            return Err(KernelError::Capacity(format!(
                "reduction of {reduction} products exceeds accumulator capacity {MAX_REDUCTION}"
            )));
        }
        for (name, v) in [("bias", &self.bias), ("multiplier", &self.multiplier), ("shift", &self.shift)] {
            if v.len() != out_c {
                return Err(KernelError::Params(format!("{name} has {} entries for {out_c} channels", v.len())));
            }
        }
        if let Some(m) = self.multiplier.iter().find(|&&m| m < 1 << 30) {
            return Err(KernelError::Params(format!("multiplier {m} outside [2^30, 2^31)")));
        }
        if let Some(s) = self.shift.iter().find(|s| !(-31..=8).contains(*s)) {
            return Err(KernelError::Params(format!("shift {s} outside [-31, 8]")));
        }
        if let Some(b) = self.bias.iter().find(|b| b.unsigned_abs() >= 1 << 30) {
            return Err(KernelError::Params(format!("bias {b} outside (-2^30, 2^30)")));
        }
        if !(-127..=128).contains(&self.input_offset) || !(-128..=127).contains(&self.output_offset) {
            return Err(KernelError::Params("offsets must come from int8 zero points".into()));
        }
        if !(-128..=127).contains(&self.act_min) || !(-128..=127).contains(&self.act_max) || self.act_min > self.act_max {
            return Err(KernelError::Params(format!(
                "activation range [{}, {}] invalid",
                self.act_min, self.act_max
            )));
        }
        let (out_h, pad_top) = out_extent(in_h, kh, self.stride, self.padding)?;
        let (out_w, pad_left) = out_extent(in_w, kw, self.stride, self.padding)?;
        Ok(Geometry {
            in_h,
            in_w,
            in_c,
            out_h,
            out_w,
            out_c,
            kh,
            kw,
            stride: self.stride,
            pad_top,
            pad_left,
            depth_multiplier: dm,
        })
    }
}

/// A convolution layer: its kind, parameters and constant filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub params: ConvParams,
    pub filter: QuantizedTensor,
}

impl Layer {
    pub fn geometry(&self, input: &QuantizedTensor) -> Result<Geometry, KernelError> {
        self.params.geometry(self.kind, input, &self.filter)
    }

    /// Multiply-accumulates on in-bounds taps for the given input.
    pub fn macs(&self, input: &QuantizedTensor) -> Result<u64, KernelError> {
        let g = self.geometry(input)?;
        let per_channel = match self.kind {
            LayerKind::Conv2d => g.in_c,
            LayerKind::DepthwiseConv2d => 1,
        };
        let mut taps = 0u64;
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        taps += u64::from(g.input_pos(oy, ox, ky, kx).is_some());
                    }
                }
            }
        }
        Ok(taps * (g.out_c * per_channel) as u64)
    }
}
