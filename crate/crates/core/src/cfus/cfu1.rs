use std::collections::VecDeque;

use super::mac::MacUnit;
use super::ops::*;
use super::{lanes, CfuKind, CfuModel, CfuResponse, PostProcUnit, ResourceCost};

/// Full 1x1-convolution engine: filter and input scratchpads, a MAC array
/// that walks a whole input depth per issue, per-channel post-processing
/// and an output FIFO of packed int8 results.
#[derive(Debug, Clone)]
pub struct Cfu1 {
    mac: MacUnit,
    post: PostProcUnit,
    depth: usize,
    filter: Vec<u32>,
    filter_cursor: usize,
    input: Vec<u32>,
    input_cursor: usize,
    fifo: VecDeque<u32>,
    pipeline: u32,
}

impl Cfu1 {
    pub const FILTER_WORDS: usize = 4096;
    pub const INPUT_WORDS: usize = 64;
    pub const CHANNELS: usize = 256;
    pub const FIFO_DEPTH: usize = 16;

    pub fn new() -> Self {
        Self {
            mac: MacUnit::default(),
            post: PostProcUnit::new(Self::CHANNELS),
            depth: 0,
            filter: Vec::new(),
            filter_cursor: 0,
            input: Vec::new(),
            input_cursor: 0,
            fifo: VecDeque::new(),
            pipeline: 1,
        }
    }

    fn fail(&mut self) -> CfuResponse {
        self.post.error = true;
        CfuResponse::value(0)
    }

    fn next_byte(words: &[u32], cursor: &mut usize) -> u32 {
        let i = *cursor;
        *cursor = (i + 1) % (words.len() * 4);
        lanes(words[i / 4])[i % 4] as u32
    }

    /// Raw accumulation of the staged input against filter row `oc`.
    fn accumulate(&mut self, oc: usize) -> Option<i32> {
        let words = self.depth / 4;
        if words == 0 || self.input.len() != words || self.filter.len() < (oc + 1) * words {
            self.post.error = true;
            return None;
        }
        let row = &self.filter[oc * words..(oc + 1) * words];
        Some(
            self.input
                .iter()
                .zip(row)
                .fold(0i32, |s, (&x, &f)| s.wrapping_add(self.mac.dot4(x, f))),
        )
    }

    fn mac4_stored(&mut self) -> CfuResponse {
        if self.input.is_empty() || self.filter.is_empty() {
            return self.fail();
        }
        let mut sum = 0i32;
        for _ in 0..4 {
            let x = Self::next_byte(&self.input, &mut self.input_cursor) as i32;
            let w = Self::next_byte(&self.filter, &mut self.filter_cursor) as i32;
            sum = sum.wrapping_add(x.wrapping_add(self.mac.input_offset).wrapping_mul(w));
        }
        self.mac.acc = self.mac.acc.wrapping_add(sum);
        CfuResponse::value(self.mac.acc as u32)
    }

    fn filter_op(&mut self, funct7: u8, a: u32) -> Option<CfuResponse> {
        Some(match funct7 {
            SET_INPUT_DEPTH => {
                let d = a as usize;
                if d == 0 || !d.is_multiple_of(4) || d / 4 > Self::INPUT_WORDS {
                    return Some(self.fail());
                }
                self.depth = d;
                self.filter.clear();
                self.input.clear();
                self.fifo.clear();
                self.filter_cursor = 0;
                self.input_cursor = 0;
                CfuResponse::value(0)
            }
            WRITE_FILTER_WORD => {
                if self.depth == 0 || self.filter.len() >= Self::FILTER_WORDS {
                    return Some(self.fail());
                }
                self.filter.push(a);
                CfuResponse::value(0)
            }
            READ_FILTER_WORD => match self.filter.get(a as usize) {
                Some(&w) => CfuResponse::value(w),
                None => self.fail(),
            },
            READ_FILTER_BYTE => {
                if self.filter.is_empty() {
                    return Some(self.fail());
                }
                CfuResponse::value(Self::next_byte(&self.filter, &mut self.filter_cursor))
            }
            RESET_FILTER => {
                self.filter.clear();
                self.filter_cursor = 0;
                CfuResponse::value(0)
            }
            _ => return None,
        })
    }

    fn input_op(&mut self, funct7: u8, a: u32) -> Option<CfuResponse> {
        Some(match funct7 {
            WRITE_INPUT_WORD => {
                if self.depth == 0 || self.input.len() >= self.depth / 4 {
                    return Some(self.fail());
                }
                self.input.push(a);
                CfuResponse::value(0)
            }
            READ_INPUT_WORD => match self.input.get(a as usize) {
                Some(&w) => CfuResponse::value(w),
                None => self.fail(),
            },
            READ_INPUT_BYTE => {
                if self.input.is_empty() {
                    return Some(self.fail());
                }
                CfuResponse::value(Self::next_byte(&self.input, &mut self.input_cursor))
            }
            RESET_INPUT => {
                self.input.clear();
                self.input_cursor = 0;
                CfuResponse::value(0)
            }
            _ => return None,
        })
    }

    fn run_op(&mut self, funct7: u8, a: u32) -> Option<CfuResponse> {
        let steps = (self.depth / 4) as u32;
        let oc = a as usize;
        Some(match funct7 {
            RUN1 => match self.accumulate(oc) {
                Some(acc) => CfuResponse { result: acc as u32, extra_latency: steps },
                None => CfuResponse::value(0),
            },
            RUN1_POST => match self.accumulate(oc) {
                Some(acc) => {
                    CfuResponse { result: self.post.apply(oc, acc), extra_latency: steps + 1 }
                }
                None => CfuResponse::value(ERROR_RESULT),
            },
            RUN4 => {
                if self.fifo.len() >= Self::FIFO_DEPTH {
                    return Some(self.fail());
                }
                let mut packed = [0u8; 4];
                for (i, byte) in packed.iter_mut().enumerate() {
                    let Some(acc) = self.accumulate(oc + i) else {
                        return Some(CfuResponse::value(0));
                    };
                    *byte = self.post.apply(oc + i, acc) as u8;
                }
                self.fifo.push_back(u32::from_le_bytes(packed));
                let latency = (steps * 4).div_ceil(self.pipeline);
                CfuResponse { result: 0, extra_latency: latency }
            }
            DRAIN => match self.fifo.pop_front() {
                Some(w) => CfuResponse::value(w),
                None => self.fail(),
            },
            FIFO_LEN => CfuResponse::value(self.fifo.len() as u32),
            SET_PIPELINE => {
                if !(1..=8).contains(&a) {
                    return Some(self.fail());
                }
                self.pipeline = a;
                CfuResponse::value(0)
            }
            _ => return None,
        })
    }
}

impl Default for Cfu1 {
    fn default() -> Self {
        Self::new()
    }
}

impl CfuModel for Cfu1 {
    fn kind(&self) -> CfuKind {
        CfuKind::Cfu1
    }

    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        let handled = match funct3 {
            GROUP_MAC if funct7 == MAC4_STORED => Some(self.mac4_stored()),
            GROUP_MAC => self.mac.handle(funct7, a, b, false),
            GROUP_POST => self.post.handle(funct7, a, b),
            GROUP_FILTER => self.filter_op(funct7, a),
            GROUP_INPUT => self.input_op(funct7, a),
            GROUP_RUN => self.run_op(funct7, a),
            GROUP_CTRL if funct7 == RESET => {
                self.reset();
                Some(CfuResponse::value(0))
            }
            _ => None,
        };
        handled.unwrap_or_else(|| self.fail())
    }

    fn reset(&mut self) {
        *self = Self::new();
    }

    fn resource_cost(&self) -> ResourceCost {
        let bram = (Self::FILTER_WORDS + Self::INPUT_WORDS) * 4;
        ResourceCost { luts: 1200, dsps: 8, bram_bytes: bram as u32 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfus::pack_lanes;

    fn loaded(depth: u32, channels: u32) -> Cfu1 {
        let mut cfu = Cfu1::new();
        cfu.issue(GROUP_FILTER, SET_INPUT_DEPTH, depth, 0);
        for w in 0..depth / 4 {
            cfu.issue(GROUP_INPUT, WRITE_INPUT_WORD, pack_lanes([1, 2, 3, w as i8]), 0);
        }
        for oc in 0..channels {
            for _ in 0..depth / 4 {
                cfu.issue(GROUP_FILTER, WRITE_FILTER_WORD, pack_lanes([oc as i8, 1, 0, -1]), 0);
            }
            cfu.issue(GROUP_POST, LOAD_BIAS, 0, 0);
            cfu.issue(GROUP_POST, LOAD_MULTIPLIER, 1 << 30, 0);
            cfu.issue(GROUP_POST, LOAD_SHIFT, 0, 0);
        }
        cfu
    }

    #[test]
    fn run1_walks_whole_depth() {
        let mut cfu = loaded(8, 4);
        // per word: oc*1 + 2 - w ; words w = 0, 1
        let r = cfu.issue(GROUP_RUN, RUN1, 3, 0);
        assert_eq!(r, CfuResponse { result: 9, extra_latency: 2 });
        let r = cfu.issue(GROUP_RUN, RUN1_POST, 3, 0);
        assert_eq!(r, CfuResponse { result: 5, extra_latency: 3 });
    }

    #[test]
    fn run4_fifo_and_pipeline() {
        let mut cfu = loaded(8, 4);
        assert_eq!(cfu.issue(GROUP_RUN, RUN4, 0, 0).extra_latency, 8);
        cfu.issue(GROUP_RUN, SET_PIPELINE, 2, 0);
        assert_eq!(cfu.issue(GROUP_RUN, RUN4, 0, 0).extra_latency, 4);
        assert_eq!(cfu.issue(GROUP_RUN, FIFO_LEN, 0, 0).result, 2);
        // raw sums 3, 5, 7, 9 halve to 2, 3, 4, 5 (ties away from zero)
        assert_eq!(cfu.issue(GROUP_RUN, DRAIN, 0, 0).result, pack_lanes([2, 3, 4, 5]));
        cfu.issue(GROUP_RUN, DRAIN, 0, 0);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, 0);
        assert_eq!(cfu.issue(GROUP_RUN, DRAIN, 0, 0).result, 0);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, STATUS_ERROR);
    }

    #[test]
    fn byte_reads_wrap() {
        let mut cfu = loaded(4, 1);
        let bytes: Vec<i32> =
            (0..6).map(|_| cfu.issue(GROUP_INPUT, READ_INPUT_BYTE, 0, 0).result as i32).collect();
        assert_eq!(bytes, [1, 2, 3, 0, 1, 2]);
        let f: Vec<i32> =
            (0..5).map(|_| cfu.issue(GROUP_FILTER, READ_FILTER_BYTE, 0, 0).result as i32).collect();
        assert_eq!(f, [0, 1, 0, -1, 0]);
    }

    #[test]
    fn mac4_stored_walks_both_scratchpads() {
        let mut cfu = loaded(8, 2);
        cfu.issue(GROUP_MAC, SET_INPUT_OFFSET, 1, 0);
        // input [1,2,3,0][1,2,3,1] + 1, filter row 0 is [0,1,0,-1] twice
        assert_eq!(cfu.issue(GROUP_MAC, MAC4_STORED, 0, 0).result as i32, 2);
        assert_eq!(cfu.issue(GROUP_MAC, MAC4_STORED, 0, 0).result as i32, 3);
        // input wraps, filter moves on to row 1: [1,1,0,-1]
        assert_eq!(cfu.issue(GROUP_MAC, MAC4_STORED, 0, 0).result as i32, 7);
    }

    #[test]
    fn bad_depth_is_an_error() {
        let mut cfu = Cfu1::new();
        cfu.issue(GROUP_FILTER, SET_INPUT_DEPTH, 6, 0);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, STATUS_ERROR);
        assert_eq!(cfu.issue(GROUP_RUN, RUN1, 0, 0).result, 0);
    }
}
