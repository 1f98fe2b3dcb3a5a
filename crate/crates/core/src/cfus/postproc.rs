use super::ops::*;
use super::{CfuKind, CfuModel, CfuResponse, ResourceCost};
use crate::kernels::requant::requantize;

/// Per-channel requantization parameter stores plus output parameters.
/// Shared by every unit that offers the post-processing group.
#[derive(Debug, Clone)]
pub struct PostProcUnit {
    capacity: usize,
    bias: Vec<i32>,
    multiplier: Vec<i32>,
    shift: Vec<i32>,
    next_channel: usize,
    output_offset: i32,
    act_min: i32,
    act_max: i32,
    pub error: bool,
}

impl PostProcUnit {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            bias: Vec::new(),
            multiplier: Vec::new(),
            shift: Vec::new(),
            next_channel: 0,
            output_offset: 0,
            act_min: -128,
            act_max: 127,
            error: false,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.capacity);
    }

    /// Number of fully configured channels, `None` while the stores disagree.
    pub fn channels(&self) -> Option<usize> {
        let n = self.bias.len();
        (n > 0 && self.multiplier.len() == n && self.shift.len() == n).then_some(n)
    }

    fn push(&mut self, which: u8, v: i32) {
        let store = match which {
            LOAD_BIAS => &mut self.bias,
            LOAD_MULTIPLIER => &mut self.multiplier,
            _ => &mut self.shift,
        };
        if store.len() >= self.capacity {
            self.error = true;
        } else {
            store.push(v);
        }
    }

    /// Requantizes `acc` with the parameters of `channel`.
    pub fn apply(&mut self, channel: usize, acc: i32) -> u32 {
        match self.channels() {
            Some(n) if channel < n => requantize(
                acc,
                self.bias[channel],
                self.multiplier[channel],
                self.shift[channel],
                self.output_offset,
                self.act_min,
                self.act_max,
            ) as i32 as u32,
            _ => {
                self.error = true;
                ERROR_RESULT
            }
        }
    }

    /// Requantizes with the current channel, then advances the channel
    /// index modulo the configured channel count.
    pub fn process(&mut self, acc: i32) -> u32 {
        let Some(n) = self.channels() else {
            self.error = true;
            return ERROR_RESULT;
        };
        let ch = self.next_channel % n;
        self.next_channel = (ch + 1) % n;
        self.apply(ch, acc)
    }

    /// Handles group-1 operations 0 through 6. `None` for anything else.
    pub fn handle(&mut self, funct7: u8, a: u32, b: u32) -> Option<CfuResponse> {
        let response = match funct7 {
            LOAD_BIAS | LOAD_MULTIPLIER => {
                self.push(funct7, a as i32);
                CfuResponse::value(0)
            }
            LOAD_SHIFT => {
                let s = a as i32;
                if (-31..=8).contains(&s) {
                    self.push(LOAD_SHIFT, s);
                } else {
                    self.error = true;
                }
                CfuResponse::value(0)
            }
            SET_OUTPUT_PARAMS => {
                let offset = a as i32;
                let lo = b as u8 as i8 as i32;
                let hi = (b >> 8) as u8 as i8 as i32;
                if (-128..=127).contains(&offset) && lo <= hi {
                    self.output_offset = offset;
                    self.act_min = lo;
                    self.act_max = hi;
                } else {
                    self.error = true;
                }
                CfuResponse::value(0)
            }
            PROCESS => CfuResponse { result: self.process(a as i32), extra_latency: 1 },
            STATUS => CfuResponse::value(if self.error { STATUS_ERROR } else { 0 }),
            CLEAR_PARAMS => {
                self.reset();
                CfuResponse::value(0)
            }
            _ => return None,
        };
        Some(response)
    }
}

/// Standalone post-processing unit: requantization in hardware, MACs in
/// software.
#[derive(Debug, Clone)]
pub struct PostProcCfu {
    unit: PostProcUnit,
}

impl PostProcCfu {
    pub const CHANNELS: usize = 256;

    pub fn new() -> Self {
        Self { unit: PostProcUnit::new(Self::CHANNELS) }
    }
}

impl Default for PostProcCfu {
    fn default() -> Self {
        Self::new()
    }
}

impl CfuModel for PostProcCfu {
    fn kind(&self) -> CfuKind {
        CfuKind::Postproc
    }

    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        let handled = match (funct3, funct7) {
            (GROUP_POST, _) => self.unit.handle(funct7, a, b),
            (GROUP_CTRL, RESET) => {
                self.reset();
                Some(CfuResponse::value(0))
            }
            _ => None,
        };
        handled.unwrap_or_else(|| {
            self.unit.error = true;
            CfuResponse::value(0)
        })
    }

    fn reset(&mut self) {
        self.unit.reset();
    }

    fn resource_cost(&self) -> ResourceCost {
        ResourceCost { luts: 300, dsps: 0, bram_bytes: 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfus::pack_activation_range;

    fn configured() -> PostProcCfu {
        let mut cfu = PostProcCfu::new();
        for (bias, mult, shift) in [(10, 1 << 30, 0), (-3, 1_518_500_250, -2)] {
            cfu.issue(GROUP_POST, LOAD_BIAS, bias as u32, 0);
            cfu.issue(GROUP_POST, LOAD_MULTIPLIER, mult as u32, 0);
            cfu.issue(GROUP_POST, LOAD_SHIFT, shift as u32, 0);
        }
        cfu.issue(GROUP_POST, SET_OUTPUT_PARAMS, -4i32 as u32, pack_activation_range(-128, 127));
        cfu
    }

    #[test]
    fn channel_index_wraps() {
        let mut cfu = configured();
        let out: Vec<i32> =
            (0..4).map(|_| cfu.issue(GROUP_POST, PROCESS, 90, 0).result as i32).collect();
        assert_eq!(out[0], 46);
        assert_eq!(out[1], requantize(90, -3, 1_518_500_250, -2, -4, -128, 127) as i32);
        assert_eq!(out[0], out[2]);
        assert_eq!(out[1], out[3]);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, 0);
    }

    #[test]
    fn errors_are_sticky_until_cleared() {
        let mut cfu = PostProcCfu::new();
        assert_eq!(cfu.issue(GROUP_POST, PROCESS, 5, 0).result, ERROR_RESULT);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, STATUS_ERROR);
        cfu.issue(GROUP_POST, CLEAR_PARAMS, 0, 0);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, 0);
        cfu.issue(GROUP_POST, LOAD_SHIFT, 9, 0);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, STATUS_ERROR);
        cfu.issue(GROUP_CTRL, RESET, 0, 0);
        cfu.issue(GROUP_MAC, MAC4, 0, 0);
        assert_eq!(cfu.issue(GROUP_POST, STATUS, 0, 0).result, STATUS_ERROR);
    }
}
