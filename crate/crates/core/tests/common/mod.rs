//! Independent oracles shared by the integration tests. Everything here is
//! written from the arithmetic definitions over i128, without calling the
//! library's kernels or requantization code.

#![allow(dead_code)]

use cfu_sim::kernels::{ConvParams, LayerKind, Padding, QuantizedTensor};
use cfu_sim::rng::SplitMix64;

const TWO31: i128 = 1 << 31;

/// round(a * b / 2^31), exact halves toward +inf, saturating at the top.
pub fn srdhm(a: i32, b: i32) -> i32 {
    let p = a as i128 * b as i128;
    // floor(p / 2^31 + 1/2) = floor((2p + 2^31) / 2^32)
    let q = (2 * p + TWO31).div_euclid(2 * TWO31);
    q.clamp(i32::MIN as i128, i32::MAX as i128) as i32
}

/// round(x / 2^e), exact halves away from zero.
pub fn rdbpot(x: i32, e: u32) -> i32 {
    if e == 0 {
        return x;
    }
    let d = 1i128 << e;
    let mag = (x as i128).abs();
    let q = (2 * mag + d) / (2 * d);
    (if x < 0 { -q } else { q }) as i32
}

pub fn mbqm(x: i32, multiplier: i32, shift: i32) -> i32 {
    let left = shift.max(0) as u32;
    let right = (-shift).max(0) as u32;
    let scaled = ((x as i128) << left).clamp(i32::MIN as i128, i32::MAX as i128) as i32;
    rdbpot(srdhm(scaled, multiplier), right)
}

fn finish(p: &ConvParams, oc: usize, acc: i128) -> i8 {
    let v = mbqm((acc + p.bias[oc] as i128) as i32, p.multiplier[oc], p.shift[oc]) as i128 + p.output_offset as i128;
    v.clamp(p.act_min as i128, p.act_max as i128) as i8
}

/// (output extent, padding before) along one axis.
fn extent(input: usize, k: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let needed = (out - 1) * stride + k;
            (out, needed.saturating_sub(input) / 2)
        }
        Padding::Valid => ((input - k) / stride + 1, 0),
    }
}

/// Naive NHWC convolution (`Conv2d`) or depthwise convolution.
pub fn conv(kind: LayerKind, p: &ConvParams, input: &QuantizedTensor, filter: &QuantizedTensor) -> Vec<i8> {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (fo, kh, kw, fi) = (filter.shape()[0], filter.shape()[1], filter.shape()[2], filter.shape()[3]);
    let (oh, pt) = extent(h, kh, p.stride, p.padding);
    let (ow, pl) = extent(w, kw, p.stride, p.padding);
    let oc_n = if kind == LayerKind::Conv2d { fo } else { fi };
    let x = |y: i64, xx: i64, ch: usize| -> Option<i128> {
        (y >= 0 && xx >= 0 && (y as usize) < h && (xx as usize) < w)
            .then(|| input.data()[(y as usize * w + xx as usize) * c + ch] as i128 + p.input_offset as i128)
    };
    let mut out = vec![0i8; oh * ow * oc_n];
    for oy in 0..oh {
        for ox in 0..ow {
            for oc in 0..oc_n {
                let mut acc: i128 = 0;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = (oy * p.stride + ky) as i64 - pt as i64;
                        let ix = (ox * p.stride + kx) as i64 - pl as i64;
                        match kind {
                            LayerKind::Conv2d => {
                                for ic in 0..c {
                                    if let Some(v) = x(iy, ix, ic) {
                                        acc += v * filter.data()[((oc * kh + ky) * kw + kx) * fi + ic] as i128;
                                    }
                                }
                            }
                            LayerKind::DepthwiseConv2d => {
                                if let Some(v) = x(iy, ix, oc / p.depth_multiplier) {
                                    acc += v * filter.data()[(ky * kw + kx) * fi + oc] as i128;
                                }
                            }
                        }
                    }
                }
                out[(oy * ow + ox) * oc_n + oc] = finish(p, oc, acc);
            }
        }
    }
    out
}

/// A random valid convolution instance.
pub struct Instance {
    pub params: ConvParams,
    pub input: QuantizedTensor,
    pub filter: QuantizedTensor,
}

fn i8s(rng: &mut SplitMix64, n: usize) -> Vec<i8> {
    (0..n).map(|_| rng.next_i8()).collect()
}

pub fn random_instance(rng: &mut SplitMix64, kind: LayerKind, pointwise: bool) -> Instance {
    let h = 1 + rng.below(7) as usize;
    let w = 1 + rng.below(7) as usize;
    let c = 1 + rng.below(8) as usize;
    let pick = |rng: &mut SplitMix64, opts: &[usize]| opts[rng.below(opts.len() as u64) as usize];
    let (kh, kw) = if pointwise { (1, 1) } else { (pick(rng, &[1, 2, 3, 5]), pick(rng, &[1, 3, 4])) };
    let mut padding = if rng.below(2) == 0 { Padding::Same } else { Padding::Valid };
    if h < kh || w < kw {
        padding = Padding::Same;
    }
    let stride = 1 + rng.below(3) as usize;
    let dm = if kind == LayerKind::DepthwiseConv2d { 1 + rng.below(3) as usize } else { 1 };
    let oc = match kind {
        LayerKind::Conv2d => 1 + rng.below(9) as usize,
        LayerKind::DepthwiseConv2d => c * dm,
    };
    let act_lo = rng.range_i64(-128, 20) as i32;
    let act_hi = rng.range_i64(act_lo as i64, 127) as i32;
    let bias_span = if rng.below(8) == 0 { (1 << 30) - 1 } else { 1 << 16 };
    let params = ConvParams {
        stride,
        padding,
        depth_multiplier: dm,
        input_offset: rng.range_i64(-127, 128) as i32,
        output_offset: rng.range_i64(-128, 127) as i32,
        bias: (0..oc).map(|_| rng.range_i64(-bias_span, bias_span) as i32).collect(),
        multiplier: (0..oc).map(|_| rng.range_i64(1 << 30, i32::MAX as i64) as i32).collect(),
        shift: (0..oc).map(|_| rng.range_i64(-14, 3) as i32).collect(),
        act_min: act_lo,
        act_max: act_hi,
    };
    let input = QuantizedTensor::activation(h, w, c, i8s(rng, h * w * c), -params.input_offset).unwrap();
    let filter = match kind {
        LayerKind::Conv2d => QuantizedTensor::filter(oc, kh, kw, c, i8s(rng, oc * kh * kw * c)).unwrap(),
        LayerKind::DepthwiseConv2d => QuantizedTensor::filter(1, kh, kw, oc, i8s(rng, kh * kw * oc)).unwrap(),
    };
    Instance { params, input, filter }
}

/// Whitespace-normalized text.
pub fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The four listing lines from the custom-instruction walkthrough.
pub const REFERENCE_LISTING: [&str; 4] = [
    "400001a0:       00812783            lw        a5,8(sp)",
    "400001a4:       00d7878b            cfu[0,0]  a5, a5, a3",
    "400001a8:       00d7978b            cfu[1,0]  a5, a5, a3",
    "400001ac:       00f12423            sw        a5,8(sp)",
];

/// Runs the command line in-process, returning (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("cfu-sim").chain(args.iter().copied());
    let code = cfu_sim::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
