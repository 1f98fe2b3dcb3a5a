use std::fmt;

use thiserror::Error;

/// Major opcode reserved for custom extensions (custom-0).
pub const CUSTOM0_OPCODE: u32 = 0b000_1011;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field} = {value} out of range (max {max})")]
pub struct EncodeError {
    pub field: &'static str,
    pub value: u32,
    pub max: u32,
}

/// Fields of a custom-0 R-format instruction.
///
/// `rs1` and `rs2` carry the two operands handed to the CFU, `rd` receives
/// its result, and `funct3`/`funct7` select the operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CfuInstruction {
    pub funct3: u8,
    pub funct7: u8,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
}

impl CfuInstruction {
    pub fn new(funct3: u8, funct7: u8, rd: u8, rs1: u8, rs2: u8) -> Result<Self, EncodeError> {
        check("funct3", funct3, 7)?;
        check("funct7", funct7, 127)?;
        check("rd", rd, 31)?;
        check("rs1", rs1, 31)?;
        check("rs2", rs2, 31)?;
        Ok(Self { funct3, funct7, rd, rs1, rs2 })
    }

    pub fn encode(&self) -> u32 {
        (self.funct7 as u32) << 25
            | (self.rs2 as u32) << 20
            | (self.rs1 as u32) << 15
            | (self.funct3 as u32) << 12
            | (self.rd as u32) << 7
            | CUSTOM0_OPCODE
    }

    /// Extracts the fields of a custom-0 word, or `None` for any other opcode.
    pub fn from_word(word: u32) -> Option<Self> {
        if word & 0x7f != CUSTOM0_OPCODE {
            return None;
        }
        Some(Self {
            funct3: ((word >> 12) & 0x7) as u8,
            funct7: (word >> 25) as u8,
            rd: ((word >> 7) & 0x1f) as u8,
            rs1: ((word >> 15) & 0x1f) as u8,
            rs2: ((word >> 20) & 0x1f) as u8,
        })
    }
}

impl fmt::Display for CfuInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use super::reg_name;
        write!(
            f,
            "cfu[{},{}] {}, {}, {}",
            self.funct3,
            self.funct7,
            reg_name(self.rd),
            reg_name(self.rs1),
            reg_name(self.rs2)
        )
    }
}

fn check(field: &'static str, value: u8, max: u8) -> Result<(), EncodeError> {
    if value > max {
        Err(EncodeError { field, value: value as u32, max: max as u32 })
    } else {
        Ok(())
    }
}

/// Encodes a CFU instruction word directly from its fields.
pub fn encode_cfu(funct3: u8, funct7: u8, rd: u8, rs1: u8, rs2: u8) -> Result<u32, EncodeError> {
    CfuInstruction::new(funct3, funct7, rd, rs1, rs2).map(|i| i.encode())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_words() {
        assert_eq!(encode_cfu(0, 0, 15, 15, 13).unwrap(), 0x00D7_878B);
        assert_eq!(encode_cfu(1, 0, 15, 15, 13).unwrap(), 0x00D7_978B);
    }

    #[test]
    fn bit_slice_oracle() {
        // Assemble the word bit by bit from each field's binary digits.
        fn oracle(f3: u32, f7: u32, rd: u32, rs1: u32, rs2: u32) -> u32 {
            let mut bits = [0u8; 32];
            let mut put = |lo: usize, width: usize, v: u32| {
                for i in 0..width {
                    bits[lo + i] = ((v >> i) & 1) as u8;
                }
            };
            put(0, 7, 0b0001011);
            put(7, 5, rd);
            put(12, 3, f3);
            put(15, 5, rs1);
            put(20, 5, rs2);
            put(25, 7, f7);
            bits.iter().rev().fold(0u32, |acc, &b| acc * 2 + b as u32)
        }
        assert_eq!(oracle(3, 1, 10, 10, 11), 0x02B5_350B);
        assert_eq!(encode_cfu(3, 1, 10, 10, 11).unwrap(), 0x02B5_350B);
        assert_eq!(oracle(0, 0, 15, 15, 13), 0x00D7_878B);
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let err = encode_cfu(8, 0, 0, 0, 0).unwrap_err();
        assert_eq!(err.field, "funct3");
        assert_eq!(encode_cfu(0, 128, 0, 0, 0).unwrap_err().field, "funct7");
        assert_eq!(encode_cfu(0, 0, 32, 0, 0).unwrap_err().field, "rd");
        assert_eq!(encode_cfu(0, 0, 0, 40, 0).unwrap_err().field, "rs1");
        assert_eq!(encode_cfu(0, 0, 0, 0, 99).unwrap_err().field, "rs2");
    }
}
