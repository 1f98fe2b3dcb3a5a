use std::collections::BTreeMap;

use thiserror::Error;

use super::config::{CpuConfig, Placement, TimingParams};
use super::timing::{CycleReport, Engine};
use super::trace::TraceEvent;
use crate::cfus::CfuModel;
use crate::isa::{decode_word, BranchOp, Instruction, LoadOp, OpImmOp, ProgramImage, RegOp, StoreOp};

pub const FLASH_BASE: u32 = 0x2000_0000;
pub const FLASH_BYTES: u32 = 2 << 20;
pub const SRAM_BASE: u32 = 0x4000_0000;
pub const SRAM_BYTES: u32 = 256 << 10;

/// Why execution stopped before `ebreak`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Trap {
    #[error("pc {pc:#010x} is not word aligned")]
    UnalignedPc { pc: u32 },
    #[error("fetch from unmapped address {pc:#010x}")]
    FetchFault { pc: u32 },
    #[error("pc {pc:#010x}: unknown instruction {word:#010x}")]
    UnknownInstruction { pc: u32, word: u32 },
    #[error("pc {pc:#010x}: {bytes}-byte access to unmapped address {addr:#010x}")]
    AccessFault { pc: u32, addr: u32, bytes: u8 },
    #[error("pc {pc:#010x}: misaligned {bytes}-byte access at {addr:#010x}")]
    Misaligned { pc: u32, addr: u32, bytes: u8 },
    #[error("pc {pc:#010x}: store to read-only flash at {addr:#010x}")]
    StoreToFlash { pc: u32, addr: u32 },
    #[error("pc {pc:#010x}: custom instruction with no CFU attached")]
    NoCfu { pc: u32 },
    #[error("pc {pc:#010x}: environment call")]
    Ecall { pc: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("image at {origin:#010x}..{end:#010x} does not fit flash or SRAM")]
    Unmapped { origin: u32, end: u32 },
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stop {
    Halted,
    Trapped(Trap),
    StepLimit,
}

/// Architectural state of the core and its memories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    regs: [u32; 32],
    pub pc: u32,
    pub flash: Vec<u8>,
    pub sram: Vec<u8>,
    pub cycles: u64,
    pub retired: u64,
    /// Issue counts per `(funct3, funct7)` selector.
    pub cfu_ops: BTreeMap<(u8, u8), u64>,
}

impl MachineState {
    pub fn new(pc: u32) -> Self {
        let mut regs = [0; 32];
        regs[2] = SRAM_BASE + SRAM_BYTES - 16;
        Self {
            regs,
            pc,
            flash: vec![0; FLASH_BYTES as usize],
            sram: vec![0; SRAM_BYTES as usize],
            cycles: 0,
            retired: 0,
            cfu_ops: BTreeMap::new(),
        }
    }

    pub fn reg(&self, r: u8) -> u32 {
        self.regs[r as usize]
    }

    pub fn set_reg(&mut self, r: u8, v: u32) {
        if r != 0 {
            self.regs[r as usize] = v;
        }
    }

    fn locate(&self, addr: u32, bytes: u32) -> Option<(Placement, usize)> {
        let end = addr.checked_add(bytes)?;
        if addr >= SRAM_BASE && end <= SRAM_BASE + SRAM_BYTES {
            Some((Placement::Sram, (addr - SRAM_BASE) as usize))
        } else if addr >= FLASH_BASE && end <= FLASH_BASE + FLASH_BYTES {
            Some((Placement::Flash, (addr - FLASH_BASE) as usize))
        } else {
            None
        }
    }

    fn bytes(&self, p: Placement) -> &[u8] {
        match p {
            Placement::Sram => &self.sram,
            Placement::Flash => &self.flash,
        }
    }

    pub fn read_u32(&self, addr: u32) -> Option<u32> {
        let (p, i) = self.locate(addr, 4)?;
        let m = self.bytes(p);
        Some(u32::from_le_bytes([m[i], m[i + 1], m[i + 2], m[i + 3]]))
    }

    /// Host-side write, allowed into flash as well (image loading).
    pub fn write_bytes(&mut self, addr: u32, data: &[u8]) -> Option<()> {
        let (p, i) = self.locate(addr, data.len() as u32)?;
        let m = match p {
            Placement::Sram => &mut self.sram,
            Placement::Flash => &mut self.flash,
        };
        m[i..i + data.len()].copy_from_slice(data);
        Some(())
    }

    pub fn write_u32(&mut self, addr: u32, v: u32) -> Option<()> {
        self.write_bytes(addr, &v.to_le_bytes())
    }
}

/// A core with its timing state and optional CFU.
pub struct Machine {
    pub state: MachineState,
    engine: Engine,
    cfu: Option<Box<dyn CfuModel>>,
}

fn shift_amount(v: u32) -> u8 {
    (v & 31) as u8
}

impl Machine {
    pub fn new(
        cfg: &CpuConfig,
        timing: &TimingParams,
        image: &ProgramImage,
        cfu: Option<Box<dyn CfuModel>>,
    ) -> Result<Self, LoadError> {
        let mut state = MachineState::new(image.origin);
        state
            .write_bytes(image.origin, &image.to_bytes())
            .ok_or(LoadError::Unmapped { origin: image.origin, end: image.end() })?;
        Ok(Self { state, engine: Engine::new(cfg, timing), cfu })
    }

    pub fn report(&self) -> CycleReport {
        CycleReport {
            total_cycles: self.state.cycles,
            tallies: self.engine.tallies.clone(),
            ..Default::default()
        }
    }

    fn load(&mut self, pc: u32, addr: u32, bytes: u8) -> Result<(u32, u64), Trap> {
        if !addr.is_multiple_of(bytes as u32) {
            return Err(Trap::Misaligned { pc, addr, bytes });
        }
        let (p, i) = self.state.locate(addr, bytes as u32).ok_or(Trap::AccessFault { pc, addr, bytes })?;
        let m = self.state.bytes(p);
        let mut raw = [0u8; 4];
        raw[..bytes as usize].copy_from_slice(&m[i..i + bytes as usize]);
        let cost = self.engine.data_access(addr, bytes, p, false);
        Ok((u32::from_le_bytes(raw), cost))
    }

    fn store(&mut self, pc: u32, addr: u32, bytes: u8, v: u32) -> Result<u64, Trap> {
        if !addr.is_multiple_of(bytes as u32) {
            return Err(Trap::Misaligned { pc, addr, bytes });
        }
        match self.state.locate(addr, bytes as u32) {
            None => Err(Trap::AccessFault { pc, addr, bytes }),
            Some((Placement::Flash, _)) => Err(Trap::StoreToFlash { pc, addr }),
            Some((Placement::Sram, i)) => {
                self.state.sram[i..i + bytes as usize].copy_from_slice(&v.to_le_bytes()[..bytes as usize]);
                Ok(self.engine.data_access(addr, bytes, Placement::Sram, true))
            }
        }
    }

    /// Executes one instruction. `Ok(true)` means `ebreak` retired.
    pub fn step(&mut self) -> Result<bool, Trap> {
        let pc = self.state.pc;
        if !pc.is_multiple_of(4) {
            return Err(Trap::UnalignedPc { pc });
        }
        let (placement, _) = self.state.locate(pc, 4).ok_or(Trap::FetchFault { pc })?;
        let word = self.state.read_u32(pc).expect("located above");
        let mut cycles = self.engine.fetch(pc, placement);
        let mut next = pc.wrapping_add(4);
        let s = &mut self.state;
        let alu = |e: &mut Engine, ev: TraceEvent| e.event(&ev);
        let mut halted = false;
        match decode_word(word) {
            Instruction::Lui { rd, imm } => {
                s.set_reg(rd, imm << 12);
                cycles += alu(&mut self.engine, TraceEvent::Alu { count: 1 });
            }
            Instruction::Auipc { rd, imm } => {
                s.set_reg(rd, pc.wrapping_add(imm << 12));
                cycles += alu(&mut self.engine, TraceEvent::Alu { count: 1 });
            }
            Instruction::Jal { rd, offset } => {
                s.set_reg(rd, next);
                next = pc.wrapping_add(offset as u32);
                cycles += self.engine.jump(false);
            }
            Instruction::Jalr { rd, rs1, offset } => {
                let target = s.reg(rs1).wrapping_add(offset as u32) & !1;
                s.set_reg(rd, next);
                next = target;
                cycles += self.engine.jump(true);
            }
            Instruction::Branch { op, rs1, rs2, offset } => {
                let (a, b) = (s.reg(rs1), s.reg(rs2));
                let taken = match op {
                    BranchOp::Beq => a == b,
                    BranchOp::Bne => a != b,
                    BranchOp::Blt => (a as i32) < (b as i32),
                    BranchOp::Bge => (a as i32) >= (b as i32),
                    BranchOp::Bltu => a < b,
                    BranchOp::Bgeu => a >= b,
                };
                let target = pc.wrapping_add(offset as u32);
                if taken {
                    next = target;
                }
                cycles += self.engine.event(&TraceEvent::Branch { pc, target, taken });
            }
            Instruction::Load { op, rd, rs1, offset } => {
                let addr = s.reg(rs1).wrapping_add(offset as u32);
                let bytes = match op {
                    LoadOp::Lb | LoadOp::Lbu => 1,
                    LoadOp::Lh | LoadOp::Lhu => 2,
                    LoadOp::Lw => 4,
                };
                let (raw, c) = self.load(pc, addr, bytes)?;
                let v = match op {
                    LoadOp::Lb => raw as u8 as i8 as u32,
                    LoadOp::Lh => raw as u16 as i16 as u32,
                    _ => raw,
                };
                self.state.set_reg(rd, v);
                cycles += c;
            }
            Instruction::Store { op, rs1, rs2, offset } => {
                let addr = s.reg(rs1).wrapping_add(offset as u32);
                let v = s.reg(rs2);
                let bytes = match op {
                    StoreOp::Sb => 1,
                    StoreOp::Sh => 2,
                    StoreOp::Sw => 4,
                };
                cycles += self.store(pc, addr, bytes, v)?;
            }
            Instruction::OpImm { op, rd, rs1, imm } => {
                let a = s.reg(rs1);
                let b = imm as u32;
                let (v, ev) = match op {
                    OpImmOp::Addi => (a.wrapping_add(b), TraceEvent::Alu { count: 1 }),
                    OpImmOp::Slti => (((a as i32) < imm) as u32, TraceEvent::Alu { count: 1 }),
                    OpImmOp::Sltiu => ((a < b) as u32, TraceEvent::Alu { count: 1 }),
                    OpImmOp::Xori => (a ^ b, TraceEvent::Alu { count: 1 }),
                    OpImmOp::Ori => (a | b, TraceEvent::Alu { count: 1 }),
                    OpImmOp::Andi => (a & b, TraceEvent::Alu { count: 1 }),
                    OpImmOp::Slli => (a << (b & 31), TraceEvent::Shift { amount: shift_amount(b) }),
                    OpImmOp::Srli => (a >> (b & 31), TraceEvent::Shift { amount: shift_amount(b) }),
                    OpImmOp::Srai => (((a as i32) >> (b & 31)) as u32, TraceEvent::Shift { amount: shift_amount(b) }),
                };
                s.set_reg(rd, v);
                cycles += self.engine.event(&ev);
            }
            Instruction::Op { op, rd, rs1, rs2 } => {
                let (a, b) = (s.reg(rs1), s.reg(rs2));
                let (ia, ib) = (a as i32, b as i32);
                let one = TraceEvent::Alu { count: 1 };
                let (v, ev) = match op {
                    RegOp::Add => (a.wrapping_add(b), one),
                    RegOp::Sub => (a.wrapping_sub(b), one),
                    RegOp::Sll => (a << (b & 31), TraceEvent::Shift { amount: shift_amount(b) }),
                    RegOp::Slt => ((ia < ib) as u32, one),
                    RegOp::Sltu => ((a < b) as u32, one),
                    RegOp::Xor => (a ^ b, one),
                    RegOp::Srl => (a >> (b & 31), TraceEvent::Shift { amount: shift_amount(b) }),
                    RegOp::Sra => ((ia >> (b & 31)) as u32, TraceEvent::Shift { amount: shift_amount(b) }),
                    RegOp::Or => (a | b, one),
                    RegOp::And => (a & b, one),
                    RegOp::Mul => (a.wrapping_mul(b), TraceEvent::Mul),
                    RegOp::Mulh => (((ia as i64 * ib as i64) >> 32) as u32, TraceEvent::Mul),
                    RegOp::Mulhsu => (((ia as i64 * b as i64) >> 32) as u32, TraceEvent::Mul),
                    RegOp::Mulhu => (((a as u64 * b as u64) >> 32) as u32, TraceEvent::Mul),
                    RegOp::Div => {
                        let v = if ib == 0 { u32::MAX } else { ia.wrapping_div(ib) as u32 };
                        (v, TraceEvent::Div)
                    }
                    RegOp::Divu => (a.checked_div(b).unwrap_or(u32::MAX), TraceEvent::Div),
                    RegOp::Rem => {
                        let v = if ib == 0 { a } else { ia.wrapping_rem(ib) as u32 };
                        (v, TraceEvent::Div)
                    }
                    RegOp::Remu => (a.checked_rem(b).unwrap_or(a), TraceEvent::Div),
                };
                s.set_reg(rd, v);
                cycles += self.engine.event(&ev);
            }
            Instruction::Fence { .. } => cycles += alu(&mut self.engine, TraceEvent::Alu { count: 1 }),
            Instruction::Ecall => return Err(Trap::Ecall { pc }),
            Instruction::Ebreak => {
                cycles += alu(&mut self.engine, TraceEvent::Alu { count: 1 });
                halted = true;
                next = pc;
            }
            Instruction::Cfu(c) => {
                let cfu = self.cfu.as_mut().ok_or(Trap::NoCfu { pc })?;
                let r = cfu.issue(c.funct3, c.funct7, s.reg(c.rs1), s.reg(c.rs2));
                s.set_reg(c.rd, r.result);
                *s.cfu_ops.entry((c.funct3, c.funct7)).or_default() += 1;
                cycles += self.engine.event(&TraceEvent::CfuIssue {
                    funct3: c.funct3,
                    funct7: c.funct7,
                    extra_latency: r.extra_latency,
                    macs: 0,
                });
            }
            Instruction::Unknown(word) => return Err(Trap::UnknownInstruction { pc, word }),
        }
        self.state.pc = next;
        self.state.cycles += cycles;
        self.state.retired += 1;
        Ok(halted)
    }

    /// Steps until `ebreak`, a trap or `max_steps` instructions.
    pub fn run(&mut self, max_steps: u64) -> Stop {
        for _ in 0..max_steps {
            match self.step() {
                Ok(true) => return Stop::Halted,
                Ok(false) => {}
                Err(t) => return Stop::Trapped(t),
            }
        }
        Stop::StepLimit
    }
}

/// Outcome of [`iss_run`].
#[derive(Debug, Clone)]
pub struct IssRun {
    pub state: MachineState,
    pub report: CycleReport,
    pub stop: Stop,
}

pub fn iss_run(
    cfg: &CpuConfig,
    timing: &TimingParams,
    image: &ProgramImage,
    cfu: Option<Box<dyn CfuModel>>,
    max_steps: u64,
) -> Result<IssRun, LoadError> {
    let mut m = Machine::new(cfg, timing, image, cfu)?;
    let stop = m.run(max_steps);
    Ok(IssRun { report: m.report(), state: m.state, stop })
}
