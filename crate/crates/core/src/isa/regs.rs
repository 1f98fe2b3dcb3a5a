/// ABI register names indexed by register number.
pub const ABI_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

pub fn reg_name(index: u8) -> &'static str {
    ABI_NAMES[(index & 0x1f) as usize]
}

/// Accepts `x0`..`x31`, ABI names, and `fp` as an alias of `s0`.
pub fn parse_register(token: &str) -> Option<u8> {
    let token = token.trim();
    if let Some(num) = token.strip_prefix('x') {
        if let Ok(n) = num.parse::<u8>() {
            return (n < 32 && !num.starts_with('+')).then_some(n);
        }
    }
    if token == "fp" {
        return Some(8);
    }
    ABI_NAMES.iter().position(|&n| n == token).map(|i| i as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for i in 0..32u8 {
            assert_eq!(parse_register(reg_name(i)), Some(i));
            assert_eq!(parse_register(&format!("x{i}")), Some(i));
        }
        assert_eq!(parse_register("fp"), Some(8));
        assert_eq!(parse_register("x32"), None);
        assert_eq!(parse_register("a8"), None);
    }
}
