use std::fmt;

use super::ops::*;
use super::{CfuKind, CfuModel, CfuResponse};
use crate::rng::SplitMix64;

/// One CFU instruction issue: selectors plus both operand values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Issue {
    pub funct3: u8,
    pub funct7: u8,
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub index: usize,
    pub issue: Issue,
    pub model: CfuResponse,
    pub twin: CfuResponse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equivalent { issues: usize },
    Diverged(Divergence),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Equivalent { issues } => write!(f, "equivalent over {issues} issues"),
            Verdict::Diverged(d) => write!(
                f,
                "diverged at issue {} (cfu[{},{}] a={:#x} b={:#x}): model {:#x}/+{} twin {:#x}/+{}",
                d.index,
                d.issue.funct3,
                d.issue.funct7,
                d.issue.a,
                d.issue.b,
                d.model.result,
                d.model.extra_latency,
                d.twin.result,
                d.twin.extra_latency
            ),
        }
    }
}

/// Feeds `issues` to both units in order and compares every response,
/// result and latency alike.
pub fn emulate_equivalence(
    model: &mut dyn CfuModel,
    twin: &mut dyn CfuModel,
    issues: &[Issue],
) -> Verdict {
    for (index, &issue) in issues.iter().enumerate() {
        let m = model.issue(issue.funct3, issue.funct7, issue.a, issue.b);
        let t = twin.issue(issue.funct3, issue.funct7, issue.a, issue.b);
        if m != t {
            return Verdict::Diverged(Divergence { index, issue, model: m, twin: t });
        }
    }
    Verdict::Equivalent { issues: issues.len() }
}

/// Selectors a kind understands, with relative weights that keep random
/// streams mostly well-formed so they reach deep states.
fn weighted_ops(kind: CfuKind) -> Vec<(u8, u8, u32)> {
    let mac = [(GROUP_MAC, SET_INPUT_OFFSET, 2), (GROUP_MAC, RESET_ACC, 3), (GROUP_MAC, MAC4, 12), (GROUP_MAC, READ_ACC, 3)];
    let post = [
        (GROUP_POST, LOAD_BIAS, 6),
        (GROUP_POST, LOAD_MULTIPLIER, 6),
        (GROUP_POST, LOAD_SHIFT, 6),
        (GROUP_POST, SET_OUTPUT_PARAMS, 2),
        (GROUP_POST, PROCESS, 10),
        (GROUP_POST, STATUS, 2),
        (GROUP_POST, CLEAR_PARAMS, 1),
    ];
    let engine = [
        (GROUP_FILTER, SET_INPUT_DEPTH, 2),
        (GROUP_FILTER, WRITE_FILTER_WORD, 20),
        (GROUP_FILTER, READ_FILTER_WORD, 3),
        (GROUP_FILTER, READ_FILTER_BYTE, 4),
        (GROUP_FILTER, RESET_FILTER, 1),
        (GROUP_INPUT, WRITE_INPUT_WORD, 8),
        (GROUP_INPUT, READ_INPUT_WORD, 3),
        (GROUP_INPUT, READ_INPUT_BYTE, 4),
        (GROUP_INPUT, RESET_INPUT, 1),
        (GROUP_RUN, RUN1, 6),
        (GROUP_RUN, RUN1_POST, 6),
        (GROUP_RUN, RUN4, 6),
        (GROUP_RUN, DRAIN, 5),
        (GROUP_RUN, FIFO_LEN, 2),
        (GROUP_RUN, SET_PIPELINE, 2),
    ];
    let mut ops: Vec<(u8, u8, u32)> = vec![(GROUP_CTRL, RESET, 1)];
    match kind {
        CfuKind::None => ops.clear(),
        CfuKind::Demo => ops = (0..4).map(|f7| (0, f7, 1)).collect(),
        CfuKind::Mac4 => ops.extend(mac),
        CfuKind::Postproc => ops.extend(post),
        CfuKind::Cfu1 => {
            ops.extend(mac);
            ops.extend(post);
            ops.extend(engine);
            ops.push((GROUP_MAC, MAC4_STORED, 8));
        }
        CfuKind::Cfu2 => {
            ops.extend(mac);
            ops.extend(post);
            ops.extend([(GROUP_MAC, MAC1, 8), (GROUP_POST, PROCESS_ACC, 6)]);
        }
    }
    ops
}

fn operand(rng: &mut SplitMix64, funct3: u8, funct7: u8) -> u32 {
    let small = |rng: &mut SplitMix64, lo: i64, hi: i64| rng.range_i64(lo, hi) as i32 as u32;
    match (funct3, funct7) {
        (GROUP_MAC, SET_INPUT_OFFSET) => small(rng, -128, 128),
        (GROUP_POST, LOAD_BIAS) => small(rng, -5000, 5000),
        (GROUP_POST, LOAD_MULTIPLIER) if rng.below(8) != 0 => small(rng, 1 << 30, i32::MAX as i64),
        (GROUP_POST, LOAD_SHIFT) => small(rng, -33, 10),
        (GROUP_POST, SET_OUTPUT_PARAMS) => small(rng, -130, 130),
        (GROUP_POST, PROCESS) => small(rng, -200_000, 200_000),
        (GROUP_FILTER, SET_INPUT_DEPTH) => small(rng, 0, 9) * 4 + u32::from(rng.below(10) == 0),
        (GROUP_FILTER, READ_FILTER_WORD) | (GROUP_INPUT, READ_INPUT_WORD) => small(rng, 0, 40),
        (GROUP_RUN, RUN1 | RUN1_POST | RUN4) => small(rng, 0, 12),
        (GROUP_RUN, SET_PIPELINE) => small(rng, 0, 9),
        _ => rng.next_u32(),
    }
}

/// Deterministic random issue stream for `kind`. About one issue in
/// sixteen uses arbitrary selectors to exercise the error paths.
pub fn random_issue_stream(kind: CfuKind, count: usize, seed: u64) -> Vec<Issue> {
    let ops = weighted_ops(kind);
    let total: u64 = ops.iter().map(|o| o.2 as u64).sum();
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let (funct3, funct7) = if total == 0 || rng.below(16) == 0 {
                (rng.below(8) as u8, rng.below(128) as u8)
            } else {
                let mut pick = rng.below(total);
                let mut chosen = (ops[0].0, ops[0].1);
                for &(f3, f7, w) in &ops {
                    if pick < w as u64 {
                        chosen = (f3, f7);
                        break;
                    }
                    pick -= w as u64;
                }
                chosen
            };
            let a = operand(&mut rng, funct3, funct7);
            let b = if funct3 == GROUP_POST && funct7 == SET_OUTPUT_PARAMS {
                let lo = rng.range_i64(-128, 20);
                let hi = rng.range_i64(-20, 127);
                super::pack_activation_range(lo as i32, hi as i32)
            } else {
                rng.next_u32()
            };
            Issue { funct3, funct7, a, b }
        })
        .collect()
}
