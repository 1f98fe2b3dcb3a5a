use super::requant::requantize;
use super::{ConvParams, Geometry, KernelError, LayerKind, QuantizedTensor};

fn finish(p: &ConvParams, oc: usize, acc: i32) -> i8 {
    requantize(acc, p.bias[oc], p.multiplier[oc], p.shift[oc], p.output_offset, p.act_min, p.act_max)
}

fn output(g: &Geometry, p: &ConvParams, data: Vec<i8>) -> Result<QuantizedTensor, KernelError> {
    QuantizedTensor::activation(g.out_h, g.out_w, g.out_c, data, p.output_offset)
}

/// Reference int8 convolution: for every output position and channel, sum
/// `(input + input_offset) * filter` over in-bounds taps, then requantize.
pub fn conv2d_int8(
    params: &ConvParams,
    input: &QuantizedTensor,
    filter: &QuantizedTensor,
) -> Result<QuantizedTensor, KernelError> {
    let g = params.geometry(LayerKind::Conv2d, input, filter)?;
    let (x, f) = (input.data(), filter.data());
    let mut out = Vec::with_capacity(g.outputs());
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for oc in 0..g.out_c {
                let mut acc = 0i32;
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        let Some((iy, ix)) = g.input_pos(oy, ox, ky, kx) else { continue };
                        let xi = (iy * g.in_w + ix) * g.in_c;
                        let fi = ((oc * g.kh + ky) * g.kw + kx) * g.in_c;
                        for ic in 0..g.in_c {
                            acc += (x[xi + ic] as i32 + params.input_offset) * f[fi + ic] as i32;
                        }
                    }
                }
                out.push(finish(params, oc, acc));
            }
        }
    }
    output(&g, params, out)
}

/// Reference depthwise convolution. Output channel `ic * depth_multiplier + m`
/// reads input channel `ic` only.
pub fn depthwise_conv2d_int8(
    params: &ConvParams,
    input: &QuantizedTensor,
    filter: &QuantizedTensor,
) -> Result<QuantizedTensor, KernelError> {
    let g = params.geometry(LayerKind::DepthwiseConv2d, input, filter)?;
    let (x, f) = (input.data(), filter.data());
    let mut out = vec![0i8; g.outputs()];
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for ic in 0..g.in_c {
                for m in 0..g.depth_multiplier {
                    let oc = ic * g.depth_multiplier + m;
                    let mut acc = 0i32;
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            let Some((iy, ix)) = g.input_pos(oy, ox, ky, kx) else { continue };
                            let xv = x[(iy * g.in_w + ix) * g.in_c + ic] as i32 + params.input_offset;
                            acc += xv * f[(ky * g.kw + kx) * g.out_c + oc] as i32;
                        }
                    }
                    out[(oy * g.out_w + ox) * g.out_c + oc] = finish(params, oc, acc);
                }
            }
        }
    }
    output(&g, params, out)
}

/// 1x1 convolution as a per-pixel matrix-vector product. Other filter sizes
/// go through [`conv2d_int8`]; results are bit-identical either way.
pub fn conv2d_1x1_specialized(
    params: &ConvParams,
    input: &QuantizedTensor,
    filter: &QuantizedTensor,
) -> Result<QuantizedTensor, KernelError> {
    let g = params.geometry(LayerKind::Conv2d, input, filter)?;
    if !g.is_pointwise() {
        return conv2d_int8(params, input, filter);
    }
    let depth = g.in_c;
    let rows: Vec<&[i8]> = filter.data().chunks_exact(depth).collect();
    let mut shifted = vec![0i32; depth];
    let mut out = Vec::with_capacity(g.outputs());
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let (iy, ix) = (oy * g.stride, ox * g.stride);
            let px = &input.data()[(iy * g.in_w + ix) * depth..][..depth];
            for (s, &v) in shifted.iter_mut().zip(px) {
                *s = v as i32 + params.input_offset;
            }
            for (oc, row) in rows.iter().enumerate() {
                let acc: i32 = shifted.iter().zip(row.iter()).map(|(&a, &w)| a * w as i32).sum();
                out.push(finish(params, oc, acc));
            }
        }
    }
    output(&g, params, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Padding;

    fn params(n: usize) -> ConvParams {
        ConvParams {
            stride: 1,
            padding: Padding::Same,
            depth_multiplier: 1,
            input_offset: 1,
            output_offset: -3,
            bias: (0..n as i32).collect(),
            multiplier: vec![1 << 30; n],
            shift: vec![-1; n],
            act_min: -128,
            act_max: 127,
        }
    }

    #[test]
    fn hand_computed_3x3() {
        // 3x3x1 input of ones, 3x3 filter of ones: sum over in-bounds taps
        // of (1 + 1) * 1, then /4 rounded, minus 3.
        let input = QuantizedTensor::activation(3, 3, 1, vec![1; 9], -1).unwrap();
        let filter = QuantizedTensor::filter(1, 3, 3, 1, vec![1; 9]).unwrap();
        let out = conv2d_int8(&params(1), &input, &filter).unwrap();
        // corner 4 taps -> 8/4 = 2, edge 6 -> 3, centre 9 -> 18/4 = 4.5 -> 5
        assert_eq!(out.data(), &[-1, 0, -1, 0, 2, 0, -1, 0, -1]);
        assert_eq!(out.zero_point(), -3);
    }

    #[test]
    fn depthwise_reads_one_channel() {
        let input = QuantizedTensor::activation(1, 1, 2, vec![3, 7], -1).unwrap();
        let mut p = params(4);
        p.depth_multiplier = 2;
        p.shift = vec![0; 4];
        let filter = QuantizedTensor::filter(1, 1, 1, 4, vec![1, 2, 3, 4]).unwrap();
        let out = depthwise_conv2d_int8(&p, &input, &filter).unwrap();
        // (4*1+0)/2, (4*2+1)/2, (8*3+2)/2, (8*4+3)/2, each minus 3
        assert_eq!(out.data(), &[-1, 2, 10, 15]);
    }

    #[test]
    fn specialized_delegates_wider_filters() {
        let input = QuantizedTensor::activation(3, 3, 1, vec![1; 9], 0).unwrap();
        let filter = QuantizedTensor::filter(1, 3, 3, 1, vec![1; 9]).unwrap();
        let p = params(1);
        assert_eq!(
            conv2d_1x1_specialized(&p, &input, &filter).unwrap(),
            conv2d_int8(&p, &input, &filter).unwrap()
        );
    }

    #[test]
    fn identity_pointwise() {
        let input = QuantizedTensor::activation(1, 1, 1, vec![5], 0).unwrap();
        let filter = QuantizedTensor::filter(1, 1, 1, 1, vec![1]).unwrap();
        let mut p = params(1);
        p.input_offset = 0;
        p.output_offset = 0;
        p.bias = vec![0];
        p.shift = vec![1];
        assert_eq!(conv2d_1x1_specialized(&p, &input, &filter).unwrap().data(), &[5]);
    }
}
