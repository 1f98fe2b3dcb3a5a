//! Two-pass assembler for the RV32IM subset plus `cfu`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::decode::{BranchOp, Instruction, LoadOp, OpImmOp, RegOp, StoreOp};
use super::disasm::{
    branch_mnemonic, load_mnemonic, op_imm_mnemonic, reg_op_mnemonic, store_mnemonic,
};
use super::encode::CfuInstruction;
use super::regs::parse_register;

/// Load address used when the source has no `.org`.
pub const DEFAULT_ORIGIN: u32 = 0x4000_0000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic `{mnemonic}`")]
    UnknownMnemonic { line: usize, mnemonic: String },
    #[error("line {line}: undefined label `{label}`")]
    UndefinedLabel { line: usize, label: String },
    #[error("line {line}: immediate {value} out of range for {what}")]
    ImmediateOutOfRange { line: usize, value: i64, what: &'static str },
    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("program contains no words")]
    Empty,
}

/// A contiguous run of words loaded at `origin`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramImage {
    pub origin: u32,
    pub words: Vec<u32>,
    pub symbols: BTreeMap<String, u32>,
}

impl ProgramImage {
    pub fn new(origin: u32, words: Vec<u32>) -> Result<Self, AsmError> {
        if words.is_empty() {
            return Err(AsmError::Empty);
        }
        if !origin.is_multiple_of(4) {
            return Err(AsmError::Syntax { line: 0, message: format!("origin {origin:#x} is not word aligned") });
        }
        Ok(Self { origin, words, symbols: BTreeMap::new() })
    }

    /// Little-endian raw bytes, the on-disk image format.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn from_bytes(origin: u32, bytes: &[u8]) -> Result<Self, AsmError> {
        if !bytes.len().is_multiple_of(4) {
            return Err(AsmError::Syntax {
                line: 0,
                message: format!("image length {} is not a multiple of 4", bytes.len()),
            });
        }
        let words = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(origin, words)
    }

    pub fn end(&self) -> u32 {
        self.origin + 4 * self.words.len() as u32
    }

    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols.get(name).copied()
    }
}

enum Item<'a> {
    Insn { line: usize, pc: u32, mnemonic: &'a str, operands: Vec<&'a str> },
    Word { line: usize, value: &'a str },
    Pad { words: u32 },
}

/// Assembles `source` with the default origin.
pub fn assemble(source: &str) -> Result<ProgramImage, AsmError> {
    assemble_at(source, DEFAULT_ORIGIN)
}

pub fn assemble_at(source: &str, default_origin: u32) -> Result<ProgramImage, AsmError> {
    let mut origin: Option<u32> = None;
    let mut pc = default_origin;
    let mut items = Vec::new();
    let mut symbols = BTreeMap::new();
    let mut emitted = false;

    // Pass 1: addresses and labels.
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let mut text = raw.split('#').next().unwrap_or("").trim();
        while let Some(colon) = label_end(text) {
            let label = text[..colon].trim();
            if !is_identifier(label) {
                return Err(AsmError::Syntax { line, message: format!("bad label `{label}`") });
            }
            if symbols.insert(label.to_string(), pc).is_some() {
                return Err(AsmError::DuplicateLabel { line, label: label.into() });
            }
            text = text[colon + 1..].trim();
        }
        if text.is_empty() {
            continue;
        }
        let (mnemonic, rest) = match text.find(char::is_whitespace) {
            Some(i) => (&text[..i], text[i..].trim()),
            None => (text, ""),
        };
        let operands: Vec<&str> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(str::trim).collect()
        };
        match mnemonic {
            ".org" => {
                let [value] = operands[..] else {
                    return Err(syntax(line, ".org takes one address"));
                };
                let addr = parse_int(value).ok_or_else(|| syntax(line, "bad .org address"))?;
                let addr = u32::try_from(addr).map_err(|_| syntax(line, "bad .org address"))?;
                if addr % 4 != 0 {
                    return Err(syntax(line, ".org address must be word aligned"));
                }
                if !emitted && origin.is_none() {
                    origin = Some(addr);
                    pc = addr;
                    // Labels defined before the first .org belong to it.
                    for v in symbols.values_mut() {
                        *v = addr;
                    }
                } else if addr < pc {
                    return Err(syntax(line, ".org moves backwards"));
                } else {
                    items.push(Item::Pad { words: (addr - pc) / 4 });
                    pc = addr;
                }
            }
            ".word" => {
                let [value] = operands[..] else {
                    return Err(syntax(line, ".word takes one value"));
                };
                items.push(Item::Word { line, value });
                pc += 4;
                emitted = true;
            }
            _ => {
                items.push(Item::Insn { line, pc, mnemonic, operands });
                pc += 4;
                emitted = true;
            }
        }
    }

    // Pass 2: encode.
    let mut words = Vec::new();
    for item in &items {
        match item {
            Item::Pad { words: n } => words.extend(std::iter::repeat_n(0, *n as usize)),
            Item::Word { line, value } => {
                let v = match parse_int(value) {
                    Some(v) if (-(1i64 << 31)..(1i64 << 32)).contains(&v) => v as u32,
                    Some(v) => {
                        return Err(AsmError::ImmediateOutOfRange { line: *line, value: v, what: ".word" })
                    }
                    None => *symbols
                        .get(*value)
                        .ok_or_else(|| AsmError::UndefinedLabel { line: *line, label: value.to_string() })?,
                };
                words.push(v);
            }
            Item::Insn { line, pc, mnemonic, operands } => {
                let ctx = Ctx { line: *line, pc: *pc, symbols: &symbols };
                words.push(ctx.encode(mnemonic, operands)?.encode());
            }
        }
    }
    let mut image = ProgramImage::new(origin.unwrap_or(default_origin), words)?;
    image.symbols = symbols;
    Ok(image)
}

fn label_end(text: &str) -> Option<usize> {
    let colon = text.find(':')?;
    let head = text[..colon].trim();
    (!head.is_empty() && !head.contains(|c: char| c.is_whitespace() || c == ',' || c == '('))
        .then_some(colon)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn syntax(line: usize, message: &str) -> AsmError {
    AsmError::Syntax { line, message: message.into() }
}

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else if let Some(bin) = body.strip_prefix("0b") {
        i64::from_str_radix(bin, 2).ok()?
    } else if body.chars().all(|c| c.is_ascii_digit()) && !body.is_empty() {
        body.parse().ok()?
    } else {
        return None;
    };
    Some(if neg { -v } else { v })
}

struct Ctx<'a> {
    line: usize,
    pc: u32,
    symbols: &'a BTreeMap<String, u32>,
}

impl Ctx<'_> {
    fn reg(&self, tok: &str) -> Result<u8, AsmError> {
        parse_register(tok).ok_or_else(|| syntax(self.line, &format!("bad register `{tok}`")))
    }

    fn imm(&self, tok: &str, lo: i64, hi: i64, what: &'static str) -> Result<i64, AsmError> {
        let v = parse_int(tok).ok_or_else(|| syntax(self.line, &format!("bad immediate `{tok}`")))?;
        if v < lo || v > hi {
            return Err(AsmError::ImmediateOutOfRange { line: self.line, value: v, what });
        }
        Ok(v)
    }

    /// Label (pc-relative) or literal offset.
    fn target(&self, tok: &str, bits: u32, what: &'static str) -> Result<i32, AsmError> {
        let offset = match parse_int(tok) {
            Some(v) => v,
            None => {
                let addr = self
                    .symbols
                    .get(tok)
                    .ok_or_else(|| AsmError::UndefinedLabel { line: self.line, label: tok.into() })?;
                *addr as i64 - self.pc as i64
            }
        };
        let lim = 1i64 << (bits - 1);
        if offset < -lim || offset >= lim || offset % 2 != 0 {
            return Err(AsmError::ImmediateOutOfRange { line: self.line, value: offset, what });
        }
        Ok(offset as i32)
    }

    /// `offset(reg)` memory operand.
    fn mem(&self, tok: &str) -> Result<(i32, u8), AsmError> {
        let open = tok.find('(').ok_or_else(|| syntax(self.line, "expected offset(register)"))?;
        let close = tok.rfind(')').filter(|&c| c > open).ok_or_else(|| syntax(self.line, "missing `)`"))?;
        let off_txt = tok[..open].trim();
        let off = if off_txt.is_empty() { 0 } else { self.imm(off_txt, -2048, 2047, "12-bit offset")? };
        Ok((off as i32, self.reg(&tok[open + 1..close])?))
    }

    fn arity<'b>(&self, ops: &'b [&'b str], n: usize, mnemonic: &str) -> Result<&'b [&'b str], AsmError> {
        if ops.len() != n {
            return Err(syntax(self.line, &format!("`{mnemonic}` expects {n} operands, got {}", ops.len())));
        }
        Ok(ops)
    }

    fn encode(&self, mnemonic: &str, ops: &[&str]) -> Result<Instruction, AsmError> {
        use Instruction::*;
        if let Some(inner) = mnemonic.strip_prefix("cfu[").and_then(|m| m.strip_suffix(']')) {
            let (f3, f7) = inner.split_once(',').ok_or_else(|| syntax(self.line, "expected cfu[F3,F7]"))?;
            let o = self.arity(ops, 3, "cfu")?;
            return self.cfu(f3, f7, o[0], o[1], o[2]);
        }
        if let Some(op) = find(REG_OPS, mnemonic, |o| reg_op_mnemonic(*o)) {
            let o = self.arity(ops, 3, mnemonic)?;
            return Ok(Op { op, rd: self.reg(o[0])?, rs1: self.reg(o[1])?, rs2: self.reg(o[2])? });
        }
        if let Some(op) = find(IMM_OPS, mnemonic, |o| op_imm_mnemonic(*o)) {
            let o = self.arity(ops, 3, mnemonic)?;
            let imm = match op {
                OpImmOp::Slli | OpImmOp::Srli | OpImmOp::Srai => self.imm(o[2], 0, 31, "shift amount")?,
                _ => self.imm(o[2], -2048, 2047, "12-bit immediate")?,
            };
            return Ok(OpImm { op, rd: self.reg(o[0])?, rs1: self.reg(o[1])?, imm: imm as i32 });
        }
        if let Some(op) = find(LOAD_OPS, mnemonic, |o| load_mnemonic(*o)) {
            let o = self.arity(ops, 2, mnemonic)?;
            let (offset, rs1) = self.mem(o[1])?;
            return Ok(Load { op, rd: self.reg(o[0])?, rs1, offset });
        }
        if let Some(op) = find(STORE_OPS, mnemonic, |o| store_mnemonic(*o)) {
            let o = self.arity(ops, 2, mnemonic)?;
            let (offset, rs1) = self.mem(o[1])?;
            return Ok(Store { op, rs1, rs2: self.reg(o[0])?, offset });
        }
        if let Some(op) = find(BRANCH_OPS, mnemonic, |o| branch_mnemonic(*o)) {
            let o = self.arity(ops, 3, mnemonic)?;
            let offset = self.target(o[2], 13, "branch offset")?;
            return Ok(Branch { op, rs1: self.reg(o[0])?, rs2: self.reg(o[1])?, offset });
        }
        match mnemonic {
            "lui" | "auipc" => {
                let o = self.arity(ops, 2, mnemonic)?;
                let rd = self.reg(o[0])?;
                let imm = (self.imm(o[1], -(1 << 19), (1 << 20) - 1, "20-bit upper immediate")? as u32) & 0xfffff;
                Ok(if mnemonic == "lui" { Lui { rd, imm } } else { Auipc { rd, imm } })
            }
            "jal" => match ops {
                [t] => Ok(Jal { rd: 1, offset: self.target(t, 21, "jump offset")? }),
                [rd, t] => Ok(Jal { rd: self.reg(rd)?, offset: self.target(t, 21, "jump offset")? }),
                _ => Err(syntax(self.line, "`jal` expects 1 or 2 operands")),
            },
            "j" => {
                let o = self.arity(ops, 1, "j")?;
                Ok(Jal { rd: 0, offset: self.target(o[0], 21, "jump offset")? })
            }
            "jalr" => match ops {
                [rs1] => Ok(Jalr { rd: 1, rs1: self.reg(rs1)?, offset: 0 }),
                [rd, m] => {
                    let (offset, rs1) = self.mem(m)?;
                    Ok(Jalr { rd: self.reg(rd)?, rs1, offset })
                }
                _ => Err(syntax(self.line, "`jalr` expects 1 or 2 operands")),
            },
            "nop" => {
                self.arity(ops, 0, "nop")?;
                Ok(OpImm { op: OpImmOp::Addi, rd: 0, rs1: 0, imm: 0 })
            }
            "li" => {
                let o = self.arity(ops, 2, "li")?;
                let imm = self.imm(o[1], -2048, 2047, "li immediate")?;
                Ok(OpImm { op: OpImmOp::Addi, rd: self.reg(o[0])?, rs1: 0, imm: imm as i32 })
            }
            "ecall" => self.arity(ops, 0, "ecall").map(|_| Ecall),
            "ebreak" => self.arity(ops, 0, "ebreak").map(|_| Ebreak),
            "fence" => match ops {
                [] => Ok(Fence { pred: 0xf, succ: 0xf }),
                [p, s] => Ok(Fence { pred: self.fence_set(p)?, succ: self.fence_set(s)? }),
                _ => Err(syntax(self.line, "`fence` expects 0 or 2 operands")),
            },
            "cfu" => {
                let o = self.arity(ops, 5, "cfu")?;
                self.cfu(o[0], o[1], o[2], o[3], o[4])
            }
            _ => Err(AsmError::UnknownMnemonic { line: self.line, mnemonic: mnemonic.into() }),
        }
    }

    fn cfu(&self, f3: &str, f7: &str, rd: &str, rs1: &str, rs2: &str) -> Result<Instruction, AsmError> {
        let f3 = self.imm(f3, 0, 7, "funct3")? as u8;
        let f7 = self.imm(f7, 0, 127, "funct7")? as u8;
        let c = CfuInstruction::new(f3, f7, self.reg(rd)?, self.reg(rs1)?, self.reg(rs2)?)
            .map_err(|e| syntax(self.line, &e.to_string()))?;
        Ok(Instruction::Cfu(c))
    }

    fn fence_set(&self, tok: &str) -> Result<u8, AsmError> {
        if tok == "0" {
            return Ok(0);
        }
        let mut bits = 0u8;
        for c in tok.chars() {
            let bit = match c {
                'i' => 8,
                'o' => 4,
                'r' => 2,
                'w' => 1,
                _ => return Err(syntax(self.line, &format!("bad fence set `{tok}`"))),
            };
            bits |= bit;
        }
        Ok(bits)
    }
}

fn find<T: Copy>(all: &[T], mnemonic: &str, name: impl Fn(&T) -> &'static str) -> Option<T> {
    all.iter().find(|o| name(o) == mnemonic).copied()
}

const REG_OPS: &[RegOp] = &[
    RegOp::Add,
    RegOp::Sub,
    RegOp::Sll,
    RegOp::Slt,
    RegOp::Sltu,
    RegOp::Xor,
    RegOp::Srl,
    RegOp::Sra,
    RegOp::Or,
    RegOp::And,
    RegOp::Mul,
    RegOp::Mulh,
    RegOp::Mulhsu,
    RegOp::Mulhu,
    RegOp::Div,
    RegOp::Divu,
    RegOp::Rem,
    RegOp::Remu,
];
const IMM_OPS: &[OpImmOp] = &[
    OpImmOp::Addi,
    OpImmOp::Slti,
    OpImmOp::Sltiu,
    OpImmOp::Xori,
    OpImmOp::Ori,
    OpImmOp::Andi,
    OpImmOp::Slli,
    OpImmOp::Srli,
    OpImmOp::Srai,
];
const LOAD_OPS: &[LoadOp] = &[LoadOp::Lb, LoadOp::Lh, LoadOp::Lw, LoadOp::Lbu, LoadOp::Lhu];
const STORE_OPS: &[StoreOp] = &[StoreOp::Sb, StoreOp::Sh, StoreOp::Sw];
const BRANCH_OPS: &[BranchOp] = &[
    BranchOp::Beq,
    BranchOp::Bne,
    BranchOp::Blt,
    BranchOp::Bge,
    BranchOp::Bltu,
    BranchOp::Bgeu,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_program() {
        let src = "
            lw   a5, 8(sp)
            cfu  0, 0, a5, a5, a3
            cfu  1, 0, a5, a5, a3
            sw   a5, 8(sp)
        ";
        let img = assemble(src).unwrap();
        assert_eq!(img.words, vec![0x0081_2783, 0x00D7_878B, 0x00D7_978B, 0x00F1_2423]);
    }

    #[test]
    fn nop_and_canonical_addi() {
        assert_eq!(assemble("addi x0, x0, 0").unwrap().words, vec![0x13]);
        assert_eq!(assemble("nop").unwrap().words, vec![0x13]);
    }

    #[test]
    fn labels_resolve_both_directions() {
        let src = "
            .org 0x100
        top:
            addi a0, a0, -1
            bne  a0, zero, top
            j    done
            nop
        done: ebreak
        ";
        let img = assemble(src).unwrap();
        assert_eq!(img.origin, 0x100);
        assert_eq!(img.symbol("top"), Some(0x100));
        assert_eq!(img.symbol("done"), Some(0x110));
        assert_eq!(
            super::super::decode_word(img.words[1]),
            Instruction::Branch { op: BranchOp::Bne, rs1: 10, rs2: 0, offset: -4 }
        );
        assert_eq!(super::super::decode_word(img.words[2]), Instruction::Jal { rd: 0, offset: 8 });
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            assemble("nop\nfrobnicate a0").unwrap_err(),
            AsmError::UnknownMnemonic { line: 2, mnemonic: "frobnicate".into() }
        );
        assert_eq!(
            assemble("nop\n\nbeq a0, a1, nowhere").unwrap_err(),
            AsmError::UndefinedLabel { line: 3, label: "nowhere".into() }
        );
        assert!(matches!(
            assemble("addi a0, a0, 4096").unwrap_err(),
            AsmError::ImmediateOutOfRange { line: 1, value: 4096, .. }
        ));
        assert!(matches!(assemble("cfu 8, 0, a0, a0, a0").unwrap_err(), AsmError::ImmediateOutOfRange { .. }));
        assert_eq!(assemble("# only a comment").unwrap_err(), AsmError::Empty);
    }

    #[test]
    fn org_pads_forward() {
        let img = assemble("nop\n.org 0x40000010\n.word 0xdeadbeef").unwrap();
        assert_eq!(img.words, vec![0x13, 0, 0, 0, 0xdead_beef]);
        assert!(assemble("nop\nnop\n.org 0x40000000").is_err());
    }

    #[test]
    fn bracket_cfu_syntax() {
        let img = assemble("cfu[1,0]  a5, a5, a3").unwrap();
        assert_eq!(img.words, vec![0x00D7_978B]);
    }

    #[test]
    fn image_bytes_round_trip() {
        let img = ProgramImage::new(0x1000, vec![0x0081_2783, 0xdead_beef]).unwrap();
        let back = ProgramImage::from_bytes(0x1000, &img.to_bytes()).unwrap();
        assert_eq!(back, img);
        assert!(ProgramImage::from_bytes(0, &[1, 2, 3]).is_err());
        assert!(ProgramImage::new(2, vec![1]).is_err());
    }
}
