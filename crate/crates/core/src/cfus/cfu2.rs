use super::mac::MacUnit;
use super::ops::*;
use super::{CfuKind, CfuModel, CfuResponse, PostProcUnit, ResourceCost};

/// Compact unit for small devices: one MAC datapath (4-lane and 1-lane
/// forms) plus post-processing fed straight from the accumulator.
#[derive(Debug, Clone)]
pub struct Cfu2 {
    mac: MacUnit,
    post: PostProcUnit,
}

impl Cfu2 {
    pub const CHANNELS: usize = 64;

    pub fn new() -> Self {
        Self { mac: MacUnit::default(), post: PostProcUnit::new(Self::CHANNELS) }
    }
}

impl Default for Cfu2 {
    fn default() -> Self {
        Self::new()
    }
}

impl CfuModel for Cfu2 {
    fn kind(&self) -> CfuKind {
        CfuKind::Cfu2
    }

    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        let handled = match (funct3, funct7) {
            (GROUP_MAC, _) => self.mac.handle(funct7, a, b, true),
            (GROUP_POST, PROCESS_ACC) => {
                let acc = std::mem::take(&mut self.mac.acc);
                Some(CfuResponse { result: self.post.process(acc), extra_latency: 1 })
            }
            (GROUP_POST, _) => self.post.handle(funct7, a, b),
            (GROUP_CTRL, RESET) => {
                self.reset();
                Some(CfuResponse::value(0))
            }
            _ => None,
        };
        handled.unwrap_or_else(|| {
            self.post.error = true;
            CfuResponse::value(0)
        })
    }

    fn reset(&mut self) {
        *self = Self::new();
    }

    fn resource_cost(&self) -> ResourceCost {
        ResourceCost { luts: 500, dsps: 4, bram_bytes: 0 }
    }
}
