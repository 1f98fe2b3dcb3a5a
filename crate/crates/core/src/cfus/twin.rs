//! Software twins of the built-in CFUs.
//!
//! The twins are written against the sub-operation table alone, with a
//! different structure from the models: one interpreter gated by feature
//! flags, byte-granular scratchpads, and wide-integer arithmetic for the
//! requantization path. They exist to be compared against the models, not
//! to be fast.

use super::ops::*;
use super::{CfuKind, CfuModel, CfuResponse, ResourceCost};

#[derive(Debug, Clone, Copy)]
struct Features {
    mac: bool,
    mac1: bool,
    post: bool,
    post_acc: bool,
    engine: bool,
    channels: usize,
}

fn features(kind: CfuKind) -> Features {
    let none = Features { mac: false, mac1: false, post: false, post_acc: false, engine: false, channels: 0 };
    match kind {
        CfuKind::None | CfuKind::Demo => none,
        CfuKind::Mac4 => Features { mac: true, ..none },
        CfuKind::Postproc => Features { post: true, channels: 256, ..none },
        CfuKind::Cfu1 => Features { mac: true, post: true, engine: true, channels: 256, ..none },
        CfuKind::Cfu2 => {
            Features { mac: true, mac1: true, post: true, post_acc: true, channels: 64, ..none }
        }
    }
}

fn sext(byte: u8) -> i64 {
    byte as i8 as i64
}

fn wrap32(v: i64) -> i64 {
    v as i32 as i64
}

/// Requantization over i128 in floor-division form.
fn requant_wide(acc: i64, bias: i64, mult: i64, shift: i64, offset: i64, lo: i64, hi: i64) -> i64 {
    let x = wrap32(acc + bias) as i128;
    let left = shift.max(0) as u32;
    let right = (-shift).max(0) as u32;
    let v = (x << left).clamp(i32::MIN as i128, i32::MAX as i128);
    let p = v * mult as i128;
    let q = if v == i32::MIN as i128 && mult == i32::MIN as i64 {
        i32::MAX as i128
    } else {
        (p + (1 << 30)) >> 31
    };
    let r = if right == 0 {
        q
    } else if q >= 0 {
        (2 * q + (1 << right)) >> (right + 1)
    } else {
        -((-2 * q + (1 << right)) >> (right + 1))
    };
    (r as i64 + offset).clamp(lo, hi)
}

/// Interpreter implementing every built-in CFU kind.
#[derive(Debug, Clone)]
pub struct SoftCfu {
    kind: CfuKind,
    f: Features,
    error: bool,
    in_off: i64,
    acc: i64,
    params: [Vec<i64>; 3],
    cursor: usize,
    out_off: i64,
    lo: i64,
    hi: i64,
    depth: usize,
    filter: Vec<u8>,
    fpos: usize,
    input: Vec<u8>,
    ipos: usize,
    queue: Vec<u32>,
    pf: u32,
}

impl SoftCfu {
    pub fn new(kind: CfuKind) -> Self {
        Self {
            kind,
            f: features(kind),
            error: false,
            in_off: 0,
            acc: 0,
            params: [Vec::new(), Vec::new(), Vec::new()],
            cursor: 0,
            out_off: 0,
            lo: -128,
            hi: 127,
            depth: 0,
            filter: Vec::new(),
            fpos: 0,
            input: Vec::new(),
            ipos: 0,
            queue: Vec::new(),
            pf: 1,
        }
    }

    fn configured(&self) -> usize {
        let n = self.params[0].len();
        if n > 0 && self.params[1].len() == n && self.params[2].len() == n {
            n
        } else {
            0
        }
    }

    fn post_channel(&mut self, ch: usize, acc: i64) -> u32 {
        if ch >= self.configured() {
            self.error = true;
            return ERROR_RESULT;
        }
        let (b, m, s) = (self.params[0][ch], self.params[1][ch], self.params[2][ch]);
        requant_wide(acc, b, m, s, self.out_off, self.lo, self.hi) as i32 as u32
    }

    fn post_next(&mut self, acc: i64) -> u32 {
        let n = self.configured();
        if n == 0 {
            self.error = true;
            return ERROR_RESULT;
        }
        let ch = self.cursor % n;
        self.cursor = (ch + 1) % n;
        self.post_channel(ch, acc)
    }

    fn dot(&self, xs: &[u8], ws: &[u8]) -> i64 {
        let s: i64 = xs.iter().zip(ws).map(|(&x, &w)| wrap32(sext(x) + self.in_off) * sext(w)).sum();
        wrap32(s)
    }

    fn row_sum(&self, oc: usize) -> Option<i64> {
        let d = self.depth;
        if d == 0 || self.input.len() != d || self.filter.len() < (oc + 1) * d {
            return None;
        }
        Some(self.dot(&self.input, &self.filter[oc * d..(oc + 1) * d]))
    }

    fn word_at(bytes: &[u8], index: usize) -> Option<u32> {
        let chunk = bytes.get(index * 4..index * 4 + 4)?;
        Some(u32::from_le_bytes(chunk.try_into().ok()?))
    }

    fn step(&mut self, f3: u8, f7: u8, a: u32, b: u32) -> Option<(u32, u32)> {
        let f = self.f;
        match (f3, f7) {
            (GROUP_CTRL, RESET) => {
                *self = Self::new(self.kind);
                Some((0, 0))
            }
            (GROUP_MAC, SET_INPUT_OFFSET) if f.mac => {
                self.in_off = a as i32 as i64;
                Some((0, 0))
            }
            (GROUP_MAC, RESET_ACC) if f.mac => {
                let old = self.acc;
                self.acc = 0;
                Some((old as u32, 0))
            }
            (GROUP_MAC, MAC4) if f.mac => {
                self.acc = wrap32(self.acc + self.dot(&a.to_le_bytes(), &b.to_le_bytes()));
                Some((self.acc as u32, 0))
            }
            (GROUP_MAC, MAC1) if f.mac1 => {
                self.acc = wrap32(self.acc + self.dot(&[a as u8], &[b as u8]));
                Some((self.acc as u32, 0))
            }
            (GROUP_MAC, READ_ACC) if f.mac => Some((self.acc as u32, 0)),
            (GROUP_MAC, MAC4_STORED) if f.engine => {
                if self.input.is_empty() || self.filter.is_empty() {
                    return None;
                }
                let mut xs = [0u8; 4];
                let mut ws = [0u8; 4];
                for i in 0..4 {
                    xs[i] = self.input[self.ipos];
                    ws[i] = self.filter[self.fpos];
                    self.ipos = (self.ipos + 1) % self.input.len();
                    self.fpos = (self.fpos + 1) % self.filter.len();
                }
                self.acc = wrap32(self.acc + self.dot(&xs, &ws));
                Some((self.acc as u32, 0))
            }
            (GROUP_POST, LOAD_BIAS | LOAD_MULTIPLIER | LOAD_SHIFT) if f.post => {
                let v = a as i32 as i64;
                let which = f7 as usize;
                let valid = which != LOAD_SHIFT as usize || (-31..=8).contains(&v);
                if valid && self.params[which].len() < f.channels {
                    self.params[which].push(v);
                } else {
                    self.error = true;
                }
                Some((0, 0))
            }
            (GROUP_POST, SET_OUTPUT_PARAMS) if f.post => {
                let off = a as i32 as i64;
                let (lo, hi) = (sext(b as u8), sext((b >> 8) as u8));
                if (-128..=127).contains(&off) && lo <= hi {
                    (self.out_off, self.lo, self.hi) = (off, lo, hi);
                } else {
                    self.error = true;
                }
                Some((0, 0))
            }
            (GROUP_POST, PROCESS) if f.post => Some((self.post_next(a as i32 as i64), 1)),
            (GROUP_POST, STATUS) if f.post => Some((u32::from(self.error), 0)),
            (GROUP_POST, CLEAR_PARAMS) if f.post => {
                self.params = [Vec::new(), Vec::new(), Vec::new()];
                self.cursor = 0;
                (self.out_off, self.lo, self.hi) = (0, -128, 127);
                self.error = false;
                Some((0, 0))
            }
            (GROUP_POST, PROCESS_ACC) if f.post_acc => {
                let acc = self.acc;
                self.acc = 0;
                Some((self.post_next(acc), 1))
            }
            (GROUP_FILTER, _) | (GROUP_INPUT, _) | (GROUP_RUN, _) if f.engine => {
                self.engine_step(f3, f7, a)
            }
            _ => None,
        }
    }

    fn engine_step(&mut self, f3: u8, f7: u8, a: u32) -> Option<(u32, u32)> {
        let idx = a as usize;
        match (f3, f7) {
            (GROUP_FILTER, SET_INPUT_DEPTH) => {
                if idx == 0 || !idx.is_multiple_of(4) || idx > 256 {
                    return None;
                }
                self.depth = idx;
                self.filter.clear();
                self.input.clear();
                self.queue.clear();
                self.fpos = 0;
                self.ipos = 0;
                Some((0, 0))
            }
            (GROUP_FILTER, WRITE_FILTER_WORD) => {
                if self.depth == 0 || self.filter.len() >= 4096 * 4 {
                    return None;
                }
                self.filter.extend_from_slice(&a.to_le_bytes());
                Some((0, 0))
            }
            (GROUP_FILTER, READ_FILTER_WORD) => Self::word_at(&self.filter, idx).map(|w| (w, 0)),
            (GROUP_FILTER, READ_FILTER_BYTE) => {
                let v = *self.filter.get(self.fpos)?;
                self.fpos = (self.fpos + 1) % self.filter.len();
                Some((sext(v) as u32, 0))
            }
            (GROUP_FILTER, RESET_FILTER) => {
                self.filter.clear();
                self.fpos = 0;
                Some((0, 0))
            }
            (GROUP_INPUT, WRITE_INPUT_WORD) => {
                if self.depth == 0 || self.input.len() >= self.depth {
                    return None;
                }
                self.input.extend_from_slice(&a.to_le_bytes());
                Some((0, 0))
            }
            (GROUP_INPUT, READ_INPUT_WORD) => Self::word_at(&self.input, idx).map(|w| (w, 0)),
            (GROUP_INPUT, READ_INPUT_BYTE) => {
                let v = *self.input.get(self.ipos)?;
                self.ipos = (self.ipos + 1) % self.input.len();
                Some((sext(v) as u32, 0))
            }
            (GROUP_INPUT, RESET_INPUT) => {
                self.input.clear();
                self.ipos = 0;
                Some((0, 0))
            }
            (GROUP_RUN, RUN1) => match self.row_sum(idx) {
                Some(s) => Some((s as u32, (self.depth / 4) as u32)),
                None => {
                    self.error = true;
                    Some((0, 0))
                }
            },
            (GROUP_RUN, RUN1_POST) => match self.row_sum(idx) {
                Some(s) => Some((self.post_channel(idx, s), (self.depth / 4) as u32 + 1)),
                None => {
                    self.error = true;
                    Some((ERROR_RESULT, 0))
                }
            },
            (GROUP_RUN, RUN4) => {
                if self.queue.len() >= 16 {
                    return None;
                }
                let sums: Option<Vec<i64>> = (idx..idx + 4).map(|oc| self.row_sum(oc)).collect();
                let Some(sums) = sums else {
                    self.error = true;
                    return Some((0, 0));
                };
                let mut word = 0u32;
                for (i, s) in sums.into_iter().enumerate() {
                    word |= (self.post_channel(idx + i, s) & 0xff) << (8 * i);
                }
                self.queue.push(word);
                let cycles = self.depth as u32;
                Some((0, cycles.div_ceil(self.pf)))
            }
            (GROUP_RUN, DRAIN) => {
                if self.queue.is_empty() {
                    return None;
                }
                Some((self.queue.remove(0), 0))
            }
            (GROUP_RUN, FIFO_LEN) => Some((self.queue.len() as u32, 0)),
            (GROUP_RUN, SET_PIPELINE) => {
                if a == 0 || a > 8 {
                    return None;
                }
                self.pf = a;
                Some((0, 0))
            }
            _ => None,
        }
    }
}

fn demo(f7: u8, a: u32, b: u32) -> u32 {
    match f7 {
        0 => ((a as u64 + b as u64) & 0xffff_ffff) as u32,
        1 => (0..32).filter(|i| a >> i & 1 == 1).count() as u32,
        2 => (0..32).fold(0, |r, i| r | ((a >> i) & 1) << (31 - i)),
        3 => (0..4).fold(0, |r, i| {
            let s = (((a >> (8 * i)) & 0xff) + ((b >> (8 * i)) & 0xff)) & 0xff;
            r | s << (8 * i)
        }),
        _ => 0,
    }
}

impl CfuModel for SoftCfu {
    fn kind(&self) -> CfuKind {
        self.kind
    }

    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        if self.kind == CfuKind::Demo {
            return CfuResponse::value(demo(funct7, a, b));
        }
        match self.step(funct3, funct7, a, b) {
            Some((result, extra_latency)) => CfuResponse { result, extra_latency },
            None => {
                self.error = true;
                CfuResponse::value(0)
            }
        }
    }

    fn reset(&mut self) {
        *self = Self::new(self.kind);
    }

    fn resource_cost(&self) -> ResourceCost {
        super::resource_cost(self.kind)
    }
}

/// Software twin of the built-in model for `kind` (`None` for no CFU).
pub fn twin(kind: CfuKind) -> Option<Box<dyn CfuModel>> {
    (kind != CfuKind::None).then(|| Box::new(SoftCfu::new(kind)) as Box<dyn CfuModel>)
}
