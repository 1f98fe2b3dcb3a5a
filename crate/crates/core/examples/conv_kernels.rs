//! Runs the reference convolution kernels on a small pointwise layer and
//! checks that the 1x1 fast path matches the general kernel.

use cfu_sim::kernels::{
    conv2d_1x1_specialized, conv2d_int8, depthwise_conv2d_int8, ConvParams, KernelVariant, Padding, QuantizedTensor,
};
use cfu_sim::rng::SplitMix64;

fn params(channels: usize) -> ConvParams {
    ConvParams {
        stride: 1,
        padding: Padding::Same,
        depth_multiplier: 1,
        input_offset: 3,
        output_offset: -5,
        bias: vec![40; channels],
        multiplier: vec![0x5000_0000; channels],
        shift: vec![-6; channels],
        act_min: -128,
        act_max: 127,
    }
}

fn main() {
    let mut rng = SplitMix64::new(17);
    let (h, w, c, oc) = (6, 6, 16, 8);
    let input = QuantizedTensor::activation(h, w, c, (0..h * w * c).map(|_| rng.next_i8()).collect(), -3).unwrap();
    let filter = QuantizedTensor::filter(oc, 1, 1, c, (0..oc * c).map(|_| rng.next_i8()).collect()).unwrap();

    let general = conv2d_int8(&params(oc), &input, &filter).unwrap();
    let fast = conv2d_1x1_specialized(&params(oc), &input, &filter).unwrap();
    assert_eq!(general, fast);
    println!("pointwise {:?} -> {:?}, first pixel {:?}", input.shape(), general.shape(), &general.data()[..oc]);

    let dw_filter = QuantizedTensor::filter(1, 3, 3, c, (0..9 * c).map(|_| rng.next_i8()).collect()).unwrap();
    let dw = depthwise_conv2d_int8(&params(c), &input, &dw_filter).unwrap();
    println!("depthwise 3x3 {:?} -> {:?}", input.shape(), dw.shape());

    println!("\n{:<16} {:>6}  cfu", "variant", "code");
    for v in KernelVariant::ALL {
        println!("{v:<16} {:>6}  {}", v.code_size_bytes(), v.required_cfu());
    }
}
