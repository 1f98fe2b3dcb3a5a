use super::encode::{CfuInstruction, CUSTOM0_OPCODE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchOp {
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadOp {
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoreOp {
    Sb,
    Sh,
    Sw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpImmOp {
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegOp {
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Mul,
    Mulh,
    Mulhsu,
    Mulhu,
    Div,
    Divu,
    Rem,
    Remu,
}

/// A decoded 32-bit word.
///
/// Immediates are stored sign-extended (U-type immediates hold the upper 20
/// bits, unshifted). Decoding is strict: any reserved bit pattern yields
/// `Unknown`, so every other variant re-encodes to the word it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Lui { rd: u8, imm: u32 },
    Auipc { rd: u8, imm: u32 },
    Jal { rd: u8, offset: i32 },
    Jalr { rd: u8, rs1: u8, offset: i32 },
    Branch { op: BranchOp, rs1: u8, rs2: u8, offset: i32 },
    Load { op: LoadOp, rd: u8, rs1: u8, offset: i32 },
    Store { op: StoreOp, rs1: u8, rs2: u8, offset: i32 },
    OpImm { op: OpImmOp, rd: u8, rs1: u8, imm: i32 },
    Op { op: RegOp, rd: u8, rs1: u8, rs2: u8 },
    Fence { pred: u8, succ: u8 },
    Ecall,
    Ebreak,
    Cfu(CfuInstruction),
    Unknown(u32),
}

const OP_LUI: u32 = 0b011_0111;
const OP_AUIPC: u32 = 0b001_0111;
const OP_JAL: u32 = 0b110_1111;
const OP_JALR: u32 = 0b110_0111;
const OP_BRANCH: u32 = 0b110_0011;
const OP_LOAD: u32 = 0b000_0011;
const OP_STORE: u32 = 0b010_0011;
const OP_IMM: u32 = 0b001_0011;
const OP_REG: u32 = 0b011_0011;
const OP_FENCE: u32 = 0b000_1111;
const OP_SYSTEM: u32 = 0b111_0011;

fn rd(w: u32) -> u8 {
    ((w >> 7) & 0x1f) as u8
}
fn rs1(w: u32) -> u8 {
    ((w >> 15) & 0x1f) as u8
}
fn rs2(w: u32) -> u8 {
    ((w >> 20) & 0x1f) as u8
}
fn funct3(w: u32) -> u32 {
    (w >> 12) & 0x7
}
fn funct7(w: u32) -> u32 {
    w >> 25
}

fn imm_i(w: u32) -> i32 {
    (w as i32) >> 20
}
fn imm_s(w: u32) -> i32 {
    (((w & 0xfe00_0000) as i32) >> 20) | ((w >> 7) & 0x1f) as i32
}
fn imm_b(w: u32) -> i32 {
    (((w & 0x8000_0000) as i32) >> 19)
        | ((w & 0x80) << 4) as i32
        | ((w >> 20) & 0x7e0) as i32
        | ((w >> 7) & 0x1e) as i32
}
fn imm_j(w: u32) -> i32 {
    (((w & 0x8000_0000) as i32) >> 11)
        | (w & 0xff000) as i32
        | ((w >> 9) & 0x800) as i32
        | ((w >> 20) & 0x7fe) as i32
}

/// Decodes one word. Total: unsupported encodings map to `Unknown`.
pub fn decode_word(w: u32) -> Instruction {
    use Instruction::*;
    let unknown = Unknown(w);
    match w & 0x7f {
        OP_LUI => Lui { rd: rd(w), imm: w >> 12 },
        OP_AUIPC => Auipc { rd: rd(w), imm: w >> 12 },
        OP_JAL => Jal { rd: rd(w), offset: imm_j(w) },
        OP_JALR if funct3(w) == 0 => Jalr { rd: rd(w), rs1: rs1(w), offset: imm_i(w) },
        OP_BRANCH => {
            let op = match funct3(w) {
                0 => BranchOp::Beq,
                1 => BranchOp::Bne,
                4 => BranchOp::Blt,
                5 => BranchOp::Bge,
                6 => BranchOp::Bltu,
                7 => BranchOp::Bgeu,
                _ => return unknown,
            };
            Branch { op, rs1: rs1(w), rs2: rs2(w), offset: imm_b(w) }
        }
        OP_LOAD => {
            let op = match funct3(w) {
                0 => LoadOp::Lb,
                1 => LoadOp::Lh,
                2 => LoadOp::Lw,
                4 => LoadOp::Lbu,
                5 => LoadOp::Lhu,
                _ => return unknown,
            };
            Load { op, rd: rd(w), rs1: rs1(w), offset: imm_i(w) }
        }
        OP_STORE => {
            let op = match funct3(w) {
                0 => StoreOp::Sb,
                1 => StoreOp::Sh,
                2 => StoreOp::Sw,
                _ => return unknown,
            };
            Store { op, rs1: rs1(w), rs2: rs2(w), offset: imm_s(w) }
        }
        OP_IMM => {
            let shamt = ((w >> 20) & 0x1f) as i32;
            let (op, imm) = match (funct3(w), funct7(w)) {
                (0, _) => (OpImmOp::Addi, imm_i(w)),
                (2, _) => (OpImmOp::Slti, imm_i(w)),
                (3, _) => (OpImmOp::Sltiu, imm_i(w)),
                (4, _) => (OpImmOp::Xori, imm_i(w)),
                (6, _) => (OpImmOp::Ori, imm_i(w)),
                (7, _) => (OpImmOp::Andi, imm_i(w)),
                (1, 0x00) => (OpImmOp::Slli, shamt),
                (5, 0x00) => (OpImmOp::Srli, shamt),
                (5, 0x20) => (OpImmOp::Srai, shamt),
                _ => return unknown,
            };
            OpImm { op, rd: rd(w), rs1: rs1(w), imm }
        }
        OP_REG => {
            let op = match (funct7(w), funct3(w)) {
                (0x00, 0) => RegOp::Add,
                (0x20, 0) => RegOp::Sub,
                (0x00, 1) => RegOp::Sll,
                (0x00, 2) => RegOp::Slt,
                (0x00, 3) => RegOp::Sltu,
                (0x00, 4) => RegOp::Xor,
                (0x00, 5) => RegOp::Srl,
                (0x20, 5) => RegOp::Sra,
                (0x00, 6) => RegOp::Or,
                (0x00, 7) => RegOp::And,
                (0x01, 0) => RegOp::Mul,
                (0x01, 1) => RegOp::Mulh,
                (0x01, 2) => RegOp::Mulhsu,
                (0x01, 3) => RegOp::Mulhu,
                (0x01, 4) => RegOp::Div,
                (0x01, 5) => RegOp::Divu,
                (0x01, 6) => RegOp::Rem,
                (0x01, 7) => RegOp::Remu,
                _ => return unknown,
            };
            Op { op, rd: rd(w), rs1: rs1(w), rs2: rs2(w) }
        }
        // Only the plain `fence pred, succ` form (fm = 0, rd = rs1 = 0).
        OP_FENCE if w & 0xf00f_ff80 == 0 => Fence {
            pred: ((w >> 24) & 0xf) as u8,
            succ: ((w >> 20) & 0xf) as u8,
        },
        OP_SYSTEM if w == 0x0000_0073 => Ecall,
        OP_SYSTEM if w == 0x0010_0073 => Ebreak,
        CUSTOM0_OPCODE => match CfuInstruction::from_word(w) {
            Some(c) => Cfu(c),
            None => unknown,
        },
        _ => unknown,
    }
}

fn r_type(opcode: u32, f3: u32, f7: u32, rd: u8, rs1: u8, rs2: u8) -> u32 {
    f7 << 25 | (rs2 as u32) << 20 | (rs1 as u32) << 15 | f3 << 12 | (rd as u32) << 7 | opcode
}

fn i_type(opcode: u32, f3: u32, rd: u8, rs1: u8, imm: i32) -> u32 {
    ((imm as u32) & 0xfff) << 20 | (rs1 as u32) << 15 | f3 << 12 | (rd as u32) << 7 | opcode
}

fn s_type(opcode: u32, f3: u32, rs1: u8, rs2: u8, imm: i32) -> u32 {
    let imm = imm as u32;
    ((imm >> 5) & 0x7f) << 25
        | (rs2 as u32) << 20
        | (rs1 as u32) << 15
        | f3 << 12
        | (imm & 0x1f) << 7
        | opcode
}

fn b_type(f3: u32, rs1: u8, rs2: u8, offset: i32) -> u32 {
    let imm = offset as u32;
    ((imm >> 12) & 1) << 31
        | ((imm >> 5) & 0x3f) << 25
        | (rs2 as u32) << 20
        | (rs1 as u32) << 15
        | f3 << 12
        | ((imm >> 1) & 0xf) << 8
        | ((imm >> 11) & 1) << 7
        | OP_BRANCH
}

fn j_type(rd: u8, offset: i32) -> u32 {
    let imm = offset as u32;
    ((imm >> 20) & 1) << 31
        | ((imm >> 1) & 0x3ff) << 21
        | ((imm >> 11) & 1) << 20
        | ((imm >> 12) & 0xff) << 12
        | (rd as u32) << 7
        | OP_JAL
}

impl Instruction {
    /// Re-encodes the instruction. Fields are masked to their widths, so
    /// callers that need range errors must check before constructing.
    pub fn encode(&self) -> u32 {
        use Instruction::*;
        match *self {
            Lui { rd, imm } => (imm & 0xfffff) << 12 | (rd as u32) << 7 | OP_LUI,
            Auipc { rd, imm } => (imm & 0xfffff) << 12 | (rd as u32) << 7 | OP_AUIPC,
            Jal { rd, offset } => j_type(rd, offset),
            Jalr { rd, rs1, offset } => i_type(OP_JALR, 0, rd, rs1, offset),
            Branch { op, rs1, rs2, offset } => {
                let f3 = match op {
                    BranchOp::Beq => 0,
                    BranchOp::Bne => 1,
                    BranchOp::Blt => 4,
                    BranchOp::Bge => 5,
                    BranchOp::Bltu => 6,
                    BranchOp::Bgeu => 7,
                };
                b_type(f3, rs1, rs2, offset)
            }
            Load { op, rd, rs1, offset } => {
                let f3 = match op {
                    LoadOp::Lb => 0,
                    LoadOp::Lh => 1,
                    LoadOp::Lw => 2,
                    LoadOp::Lbu => 4,
                    LoadOp::Lhu => 5,
                };
                i_type(OP_LOAD, f3, rd, rs1, offset)
            }
            Store { op, rs1, rs2, offset } => {
                let f3 = match op {
                    StoreOp::Sb => 0,
                    StoreOp::Sh => 1,
                    StoreOp::Sw => 2,
                };
                s_type(OP_STORE, f3, rs1, rs2, offset)
            }
            OpImm { op, rd, rs1, imm } => match op {
                OpImmOp::Addi => i_type(OP_IMM, 0, rd, rs1, imm),
                OpImmOp::Slti => i_type(OP_IMM, 2, rd, rs1, imm),
                OpImmOp::Sltiu => i_type(OP_IMM, 3, rd, rs1, imm),
                OpImmOp::Xori => i_type(OP_IMM, 4, rd, rs1, imm),
                OpImmOp::Ori => i_type(OP_IMM, 6, rd, rs1, imm),
                OpImmOp::Andi => i_type(OP_IMM, 7, rd, rs1, imm),
                OpImmOp::Slli => i_type(OP_IMM, 1, rd, rs1, imm & 0x1f),
                OpImmOp::Srli => i_type(OP_IMM, 5, rd, rs1, imm & 0x1f),
                OpImmOp::Srai => i_type(OP_IMM, 5, rd, rs1, (imm & 0x1f) | 0x400),
            },
            Op { op, rd, rs1, rs2 } => {
                let (f7, f3) = match op {
                    RegOp::Add => (0x00, 0),
                    RegOp::Sub => (0x20, 0),
                    RegOp::Sll => (0x00, 1),
                    RegOp::Slt => (0x00, 2),
                    RegOp::Sltu => (0x00, 3),
                    RegOp::Xor => (0x00, 4),
                    RegOp::Srl => (0x00, 5),
                    RegOp::Sra => (0x20, 5),
                    RegOp::Or => (0x00, 6),
                    RegOp::And => (0x00, 7),
                    RegOp::Mul => (0x01, 0),
                    RegOp::Mulh => (0x01, 1),
                    RegOp::Mulhsu => (0x01, 2),
                    RegOp::Mulhu => (0x01, 3),
                    RegOp::Div => (0x01, 4),
                    RegOp::Divu => (0x01, 5),
                    RegOp::Rem => (0x01, 6),
                    RegOp::Remu => (0x01, 7),
                };
                r_type(OP_REG, f3, f7, rd, rs1, rs2)
            }
            Fence { pred, succ } => ((pred as u32) & 0xf) << 24 | ((succ as u32) & 0xf) << 20 | OP_FENCE,
            Ecall => 0x0000_0073,
            Ebreak => 0x0010_0073,
            Cfu(c) => c.encode(),
            Unknown(w) => w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_load_and_store() {
        assert_eq!(
            decode_word(0x0081_2783),
            Instruction::Load { op: LoadOp::Lw, rd: 15, rs1: 2, offset: 8 }
        );
        assert_eq!(
            decode_word(0x00F1_2423),
            Instruction::Store { op: StoreOp::Sw, rs1: 2, rs2: 15, offset: 8 }
        );
    }

    #[test]
    fn zero_and_ones_are_unknown() {
        assert_eq!(decode_word(0), Instruction::Unknown(0));
        assert_eq!(decode_word(0xffff_ffff), Instruction::Unknown(0xffff_ffff));
    }

    #[test]
    fn immediates_sign_extend() {
        // beq x0, x0, -4
        let w = b_type(0, 0, 0, -4);
        assert_eq!(decode_word(w), Instruction::Branch { op: BranchOp::Beq, rs1: 0, rs2: 0, offset: -4 });
        // jal ra, -2048
        let w = j_type(1, -2048);
        assert_eq!(decode_word(w), Instruction::Jal { rd: 1, offset: -2048 });
        // addi a0, a0, -1
        assert_eq!(
            decode_word(0xfff5_0513),
            Instruction::OpImm { op: OpImmOp::Addi, rd: 10, rs1: 10, imm: -1 }
        );
        // sw a0, -4(sp)
        let w = s_type(OP_STORE, 2, 2, 10, -4);
        assert_eq!(decode_word(w), Instruction::Store { op: StoreOp::Sw, rs1: 2, rs2: 10, offset: -4 });
    }

    #[test]
    fn opcode_partition() {
        for w in [0x0000_000bu32, 0xffff_ff8b, 0x1234_560b] {
            assert!(matches!(decode_word(w), Instruction::Cfu(_)));
        }
        assert!(!matches!(decode_word(0x0000_0013), Instruction::Cfu(_)));
    }

    #[test]
    fn decoded_words_reencode_exactly() {
        // Sweep a pseudo-random sample of the word space.
        let mut x = 0x9E37_79B9_7F4A_7C15u64;
        for _ in 0..200_000 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let w = x as u32;
            let d = decode_word(w);
            assert_eq!(d.encode(), w, "{w:#010x} -> {d:?}");
        }
    }
}
