//! The fixed-point requantization primitives on a few edge cases.

use cfu_sim::kernels::{mbqm, rdbpot, requantize, srdhm};

fn main() {
    for (a, b) in [(200, 1 << 30), (i32::MIN, i32::MIN), (-3, 1 << 30), (1 << 20, i32::MAX)] {
        println!("srdhm({a}, {b}) = {}", srdhm(a, b));
    }
    for (x, e) in [(5, 1), (-5, 1), (6, 2), (-6, 2), (i32::MIN, 31)] {
        println!("rdbpot({x}, {e}) = {}", rdbpot(x, e));
    }
    // multiplier 0.75 in Q31 and a right shift of 3
    let m = 0x6000_0000;
    for acc in [1000, -1000, 123_456] {
        println!("mbqm({acc}, 0.75, -3) = {}", mbqm(acc, m, -3));
    }
    println!("requantize(5000, bias 100) = {}", requantize(5000, 100, m, -5, -10, -128, 127));
}
