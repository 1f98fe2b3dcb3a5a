//! Fixed-point requantization primitives, bit-exact with the gemmlowp
//! reference used by TFLite Micro.

/// Saturating rounding doubling high multiply: `round(a * b / 2^31)` via a
/// nudge on the 64-bit product, which rounds exact halves upward. The single
/// overflowing input pair (`MIN * MIN`) saturates to `i32::MAX`.
pub fn srdhm(a: i32, b: i32) -> i32 {
    if a == i32::MIN && b == i32::MIN {
        return i32::MAX;
    }
    let ab = a as i64 * b as i64;
    let nudge: i64 = if ab >= 0 { 1 << 30 } else { 1 - (1 << 30) };
    ((ab + nudge) / (1i64 << 31)) as i32
}

/// Rounding divide by `2^exponent`, ties away from zero.
///
/// # Panics
/// If `exponent > 31`.
pub fn rdbpot(x: i32, exponent: u32) -> i32 {
    assert!(exponent <= 31, "exponent {exponent} out of range");
    if exponent == 0 {
        return x;
    }
    let mask: i32 = ((1i64 << exponent) - 1) as i32;
    let remainder = x & mask;
    let threshold = (mask >> 1) + i32::from(x < 0);
    (x >> exponent) + i32::from(remainder > threshold)
}

/// Scales `x` by `multiplier * 2^(shift - 31)`: a saturating left shift for
/// positive `shift`, the doubling high multiply, then a rounding right shift
/// for negative `shift`.
///
/// # Panics
/// If `shift` is outside `[-31, 31]`.
pub fn mbqm(x: i32, multiplier: i32, shift: i32) -> i32 {
    assert!((-31..=31).contains(&shift), "shift {shift} out of range");
    let left = shift.max(0) as u32;
    let right = (-shift).max(0) as u32;
    let scaled = (x as i64) << left;
    let scaled = scaled.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    rdbpot(srdhm(scaled, multiplier), right)
}

/// Applies bias, scaling, output offset and activation clamp to a raw
/// accumulator, producing the int8 output value.
pub fn requantize(
    acc: i32,
    bias: i32,
    multiplier: i32,
    shift: i32,
    output_offset: i32,
    act_min: i32,
    act_max: i32,
) -> i8 {
    let scaled = mbqm(acc.wrapping_add(bias), multiplier, shift);
    scaled.saturating_add(output_offset).clamp(act_min, act_max) as i8
}
