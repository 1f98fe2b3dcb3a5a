//! Custom function unit (CFU) behavioral models.
//!
//! A CFU sees exactly what the R-format instruction carries: two 32-bit
//! operands, the `funct3`/`funct7` selectors, and produces one 32-bit result.
//! Models may keep internal state between issues and may stall the core by
//! declaring an extra latency per issue.
//!
//! Every built-in model has an independently written software twin in
//! [`twin`]; [`emulate_equivalence`] replays one issue stream through both
//! and reports the first divergence.
//!
//! # Sub-operation table
//!
//! `funct3` selects a group, `funct7` the operation inside it. Unknown
//! selectors return 0 and (for stateful units) raise the sticky error bit.
//!
//! | funct3 | funct7 | operation | units |
//! |---|---|---|---|
//! | 0 | 0 | `set_input_offset(a)` | mac4, cfu1, cfu2 |
//! | 0 | 1 | `reset_acc` → previous accumulator | mac4, cfu1, cfu2 |
//! | 0 | 2 | `mac4(a, b)` → new accumulator | mac4, cfu1, cfu2 |
//! | 0 | 3 | `mac1(a, b)` → new accumulator (lane 0 only) | cfu2 |
//! | 0 | 4 | `read_acc` | mac4, cfu1, cfu2 |
//! | 0 | 5 | `mac4_stored` → new accumulator, next 4 bytes of both scratchpads | cfu1 |
//! | 1 | 0..2 | `load_bias` / `load_multiplier` / `load_shift` (append) | postproc, cfu1, cfu2 |
//! | 1 | 3 | `set_output_params(offset, packed act_min/act_max)` | postproc, cfu1, cfu2 |
//! | 1 | 4 | `process(acc)` → int8, channel auto-advances | postproc, cfu1, cfu2 |
//! | 1 | 5 | `status` → sticky error bits | postproc, cfu1, cfu2 |
//! | 1 | 6 | `clear_params` (also clears the error bit) | postproc, cfu1, cfu2 |
//! | 1 | 7 | `process_acc` → int8 from the internal accumulator, then zero it | cfu2 |
//! | 2 | 0 | `set_input_depth(a)` (multiple of 4; clears both scratchpads) | cfu1 |
//! | 2 | 1 | `write_filter_word(a)` | cfu1 |
//! | 2 | 2 | `read_filter_word(index)` | cfu1 |
//! | 2 | 3 | `read_filter_byte` → next sign-extended byte, wraps | cfu1 |
//! | 2 | 4 | `reset_filter` | cfu1 |
//! | 3 | 0 | `write_input_word(a)` | cfu1 |
//! | 3 | 1 | `read_input_word(index)` | cfu1 |
//! | 3 | 2 | `read_input_byte` → next sign-extended byte, wraps | cfu1 |
//! | 3 | 3 | `reset_input` | cfu1 |
//! | 4 | 0 | `run1(oc)` → raw accumulation for one output channel | cfu1 |
//! | 4 | 1 | `run1_post(oc)` → post-processed int8 for one channel | cfu1 |
//! | 4 | 2 | `run4(oc)` → post-process four channels, push one packed word | cfu1 |
//! | 4 | 3 | `drain` → pop packed word | cfu1 |
//! | 4 | 4 | `fifo_len` | cfu1 |
//! | 4 | 5 | `set_pipeline(factor)` (1..=8) | cfu1 |
//! | 7 | 0 | `reset` | all stateful units |
//!
//! The demo unit ignores `funct3`; `funct7` selects add (0), popcount (1),
//! bit reverse (2) and per-byte SIMD add (3).

mod cfu1;
mod cfu2;
mod demo;
mod emulate;
mod mac;
mod postproc;
pub mod twin;

use std::fmt;
use std::str::FromStr;

pub use cfu1::Cfu1;
pub use cfu2::Cfu2;
pub use demo::DemoCfu;
pub use emulate::{emulate_equivalence, random_issue_stream, Divergence, Issue, Verdict};
pub use mac::Mac4Cfu;
pub use postproc::{PostProcCfu, PostProcUnit};

/// Selector constants shared by the models, their twins and the kernels
/// that drive them.
pub mod ops {
    pub const GROUP_MAC: u8 = 0;
    pub const SET_INPUT_OFFSET: u8 = 0;
    pub const RESET_ACC: u8 = 1;
    pub const MAC4: u8 = 2;
    pub const MAC1: u8 = 3;
    pub const READ_ACC: u8 = 4;
    pub const MAC4_STORED: u8 = 5;

    pub const GROUP_POST: u8 = 1;
    pub const LOAD_BIAS: u8 = 0;
    pub const LOAD_MULTIPLIER: u8 = 1;
    pub const LOAD_SHIFT: u8 = 2;
    pub const SET_OUTPUT_PARAMS: u8 = 3;
    pub const PROCESS: u8 = 4;
    pub const STATUS: u8 = 5;
    pub const CLEAR_PARAMS: u8 = 6;
    pub const PROCESS_ACC: u8 = 7;

    pub const GROUP_FILTER: u8 = 2;
    pub const SET_INPUT_DEPTH: u8 = 0;
    pub const WRITE_FILTER_WORD: u8 = 1;
    pub const READ_FILTER_WORD: u8 = 2;
    pub const READ_FILTER_BYTE: u8 = 3;
    pub const RESET_FILTER: u8 = 4;

    pub const GROUP_INPUT: u8 = 3;
    pub const WRITE_INPUT_WORD: u8 = 0;
    pub const READ_INPUT_WORD: u8 = 1;
    pub const READ_INPUT_BYTE: u8 = 2;
    pub const RESET_INPUT: u8 = 3;

    pub const GROUP_RUN: u8 = 4;
    pub const RUN1: u8 = 0;
    pub const RUN1_POST: u8 = 1;
    pub const RUN4: u8 = 2;
    pub const DRAIN: u8 = 3;
    pub const FIFO_LEN: u8 = 4;
    pub const SET_PIPELINE: u8 = 5;

    pub const GROUP_CTRL: u8 = 7;
    pub const RESET: u8 = 0;

    /// Result returned by post-processing when its parameters are unusable.
    /// Never a valid sign-extended int8.
    pub const ERROR_RESULT: u32 = 0x8000_0000;
    /// Bit set in the `status` word once any error has occurred.
    pub const STATUS_ERROR: u32 = 1;
}

/// Result of one CFU issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CfuResponse {
    pub result: u32,
    /// Cycles the core stalls beyond the fixed issue cost.
    pub extra_latency: u32,
}

impl CfuResponse {
    pub fn value(result: u32) -> Self {
        Self { result, extra_latency: 0 }
    }
}

/// FPGA resources a CFU declares for the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResourceCost {
    pub luts: u32,
    pub dsps: u32,
    pub bram_bytes: u32,
}

/// Behavioral contract of a custom function unit.
///
/// Implementations must be deterministic: the response and the next state
/// are a pure function of the current state and the issue arguments.
pub trait CfuModel: Send {
    fn kind(&self) -> CfuKind;
    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse;
    fn reset(&mut self);
    fn resource_cost(&self) -> ResourceCost;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CfuKind {
    None,
    Demo,
    Postproc,
    Mac4,
    Cfu1,
    Cfu2,
}

impl CfuKind {
    pub const ALL: [CfuKind; 6] =
        [CfuKind::None, CfuKind::Demo, CfuKind::Postproc, CfuKind::Mac4, CfuKind::Cfu1, CfuKind::Cfu2];

    pub fn as_str(self) -> &'static str {
        match self {
            CfuKind::None => "none",
            CfuKind::Demo => "demo",
            CfuKind::Postproc => "postproc",
            CfuKind::Mac4 => "mac4",
            CfuKind::Cfu1 => "cfu1",
            CfuKind::Cfu2 => "cfu2",
        }
    }
}

impl fmt::Display for CfuKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for CfuKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CfuKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown cfu `{s}`"))
    }
}

/// Instantiates the built-in model for `kind` (`None` for no CFU).
pub fn build(kind: CfuKind) -> Option<Box<dyn CfuModel>> {
    match kind {
        CfuKind::None => None,
        CfuKind::Demo => Some(Box::new(DemoCfu)),
        CfuKind::Postproc => Some(Box::new(PostProcCfu::new())),
        CfuKind::Mac4 => Some(Box::new(Mac4Cfu::new())),
        CfuKind::Cfu1 => Some(Box::new(Cfu1::new())),
        CfuKind::Cfu2 => Some(Box::new(Cfu2::new())),
    }
}

/// Declared resources of a CFU kind; zero for `None`.
pub fn resource_cost(kind: CfuKind) -> ResourceCost {
    build(kind).map(|m| m.resource_cost()).unwrap_or_default()
}

/// Sign-extended byte lanes of a packed word, lane 0 in the low byte.
pub fn lanes(word: u32) -> [i32; 4] {
    let b = word.to_le_bytes();
    [b[0] as i8 as i32, b[1] as i8 as i32, b[2] as i8 as i32, b[3] as i8 as i32]
}

pub fn pack_lanes(values: [i8; 4]) -> u32 {
    u32::from_le_bytes(values.map(|v| v as u8))
}

/// Packs `act_min` into byte 0 and `act_max` into byte 1 for
/// `set_output_params`.
pub fn pack_activation_range(act_min: i32, act_max: i32) -> u32 {
    (act_min as u8 as u32) | (act_max as u8 as u32) << 8
}
