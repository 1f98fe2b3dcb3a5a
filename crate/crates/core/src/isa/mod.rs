//! RV32IM instruction encoding plus the custom-0 CFU instruction form.
//!
//! The CFU form is a plain R-type word on the custom-0 major opcode
//! (`0b0001011`): `funct7 | rs2 | rs1 | funct3 | rd | opcode`. The rendered
//! syntax `cfu[F3,F7] rd, rs1, rs2` lists funct3 first, which is how the
//! encoded bits of the reference listing read.

mod asm;
mod decode;
mod disasm;
mod encode;
mod regs;

pub use asm::{assemble, assemble_at, AsmError, ProgramImage, DEFAULT_ORIGIN};
pub use decode::{decode_word, BranchOp, Instruction, LoadOp, OpImmOp, RegOp, StoreOp};
pub use disasm::{disassemble, listing_line};
pub use encode::{encode_cfu, CfuInstruction, EncodeError, CUSTOM0_OPCODE};
pub use regs::{parse_register, reg_name, ABI_NAMES};
