use super::decode::{decode_word, BranchOp, Instruction, LoadOp, OpImmOp, RegOp, StoreOp};
use super::regs::reg_name;

pub(crate) fn branch_mnemonic(op: BranchOp) -> &'static str {
    match op {
        BranchOp::Beq => "beq",
        BranchOp::Bne => "bne",
        BranchOp::Blt => "blt",
        BranchOp::Bge => "bge",
        BranchOp::Bltu => "bltu",
        BranchOp::Bgeu => "bgeu",
    }
}

pub(crate) fn load_mnemonic(op: LoadOp) -> &'static str {
    match op {
        LoadOp::Lb => "lb",
        LoadOp::Lh => "lh",
        LoadOp::Lw => "lw",
        LoadOp::Lbu => "lbu",
        LoadOp::Lhu => "lhu",
    }
}

pub(crate) fn store_mnemonic(op: StoreOp) -> &'static str {
    match op {
        StoreOp::Sb => "sb",
        StoreOp::Sh => "sh",
        StoreOp::Sw => "sw",
    }
}

pub(crate) fn op_imm_mnemonic(op: OpImmOp) -> &'static str {
    match op {
        OpImmOp::Addi => "addi",
        OpImmOp::Slti => "slti",
        OpImmOp::Sltiu => "sltiu",
        OpImmOp::Xori => "xori",
        OpImmOp::Ori => "ori",
        OpImmOp::Andi => "andi",
        OpImmOp::Slli => "slli",
        OpImmOp::Srli => "srli",
        OpImmOp::Srai => "srai",
    }
}

pub(crate) fn reg_op_mnemonic(op: RegOp) -> &'static str {
    match op {
        RegOp::Add => "add",
        RegOp::Sub => "sub",
        RegOp::Sll => "sll",
        RegOp::Slt => "slt",
        RegOp::Sltu => "sltu",
        RegOp::Xor => "xor",
        RegOp::Srl => "srl",
        RegOp::Sra => "sra",
        RegOp::Or => "or",
        RegOp::And => "and",
        RegOp::Mul => "mul",
        RegOp::Mulh => "mulh",
        RegOp::Mulhsu => "mulhsu",
        RegOp::Mulhu => "mulhu",
        RegOp::Div => "div",
        RegOp::Divu => "divu",
        RegOp::Rem => "rem",
        RegOp::Remu => "remu",
    }
}

pub(crate) fn fence_set(bits: u8) -> String {
    if bits == 0 {
        return "0".into();
    }
    "iorw"
        .chars()
        .enumerate()
        .filter(|(i, _)| bits & (8 >> i) != 0)
        .map(|(_, c)| c)
        .collect()
}

fn line(mnemonic: &str, operands: &str) -> String {
    if operands.is_empty() {
        mnemonic.to_string()
    } else {
        format!("{mnemonic:<9} {operands}")
    }
}

/// Renders one word as assembly text. Unknown words become `.word 0x...`.
pub fn disassemble(word: u32) -> String {
    use Instruction::*;
    let r = reg_name;
    match decode_word(word) {
        OpImm { op: OpImmOp::Addi, rd: 0, rs1: 0, imm: 0 } => "nop".into(),
        Lui { rd, imm } => line("lui", &format!("{},{:#x}", r(rd), imm)),
        Auipc { rd, imm } => line("auipc", &format!("{},{:#x}", r(rd), imm)),
        Jal { rd, offset } => line("jal", &format!("{},{}", r(rd), offset)),
        Jalr { rd, rs1, offset } => line("jalr", &format!("{},{}({})", r(rd), offset, r(rs1))),
        Branch { op, rs1, rs2, offset } => {
            line(branch_mnemonic(op), &format!("{},{},{}", r(rs1), r(rs2), offset))
        }
        Load { op, rd, rs1, offset } => {
            line(load_mnemonic(op), &format!("{},{}({})", r(rd), offset, r(rs1)))
        }
        Store { op, rs1, rs2, offset } => {
            line(store_mnemonic(op), &format!("{},{}({})", r(rs2), offset, r(rs1)))
        }
        OpImm { op, rd, rs1, imm } => {
            line(op_imm_mnemonic(op), &format!("{},{},{}", r(rd), r(rs1), imm))
        }
        Op { op, rd, rs1, rs2 } => {
            line(reg_op_mnemonic(op), &format!("{},{},{}", r(rd), r(rs1), r(rs2)))
        }
        Fence { pred, succ } => line("fence", &format!("{},{}", fence_set(pred), fence_set(succ))),
        Ecall => "ecall".into(),
        Ebreak => "ebreak".into(),
        Cfu(c) => line(
            &format!("cfu[{},{}]", c.funct3, c.funct7),
            &format!("{}, {}, {}", r(c.rd), r(c.rs1), r(c.rs2)),
        ),
        Unknown(w) => format!(".word {w:#010x}"),
    }
}

/// Objdump-style listing line: address, raw word, rendered text.
pub fn listing_line(address: u32, word: u32) -> String {
    format!("{address:08x}:       {word:08x}            {}", disassemble(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_listing() {
        assert_eq!(disassemble(0x0081_2783), "lw        a5,8(sp)");
        assert_eq!(disassemble(0x00D7_878B), "cfu[0,0]  a5, a5, a3");
        assert_eq!(disassemble(0x00D7_978B), "cfu[1,0]  a5, a5, a3");
        assert_eq!(disassemble(0x00F1_2423), "sw        a5,8(sp)");
        assert_eq!(
            listing_line(0x4000_01a0, 0x0081_2783),
            "400001a0:       00812783            lw        a5,8(sp)"
        );
    }

    #[test]
    fn fallbacks_and_specials() {
        assert_eq!(disassemble(0xffff_ffff), ".word 0xffffffff");
        assert_eq!(disassemble(0x0000_0013), "nop");
        assert_eq!(disassemble(0x0010_0073), "ebreak");
        assert_eq!(disassemble(0x0ff0_000f), "fence     iorw,iorw");
        assert_eq!(disassemble(0xfff5_0513), "addi      a0,a0,-1");
    }
}
