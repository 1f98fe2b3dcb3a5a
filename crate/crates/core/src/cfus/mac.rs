use super::ops::*;
use super::{lanes, CfuKind, CfuModel, CfuResponse, ResourceCost};

/// Accumulator and input offset shared by the MAC-capable units.
#[derive(Debug, Clone, Default)]
pub struct MacUnit {
    pub input_offset: i32,
    pub acc: i32,
}

impl MacUnit {
    pub fn dot4(&self, inputs: u32, filters: u32) -> i32 {
        let off = self.input_offset;
        lanes(inputs)
            .iter()
            .zip(lanes(filters))
            .fold(0i32, |s, (&x, f)| s.wrapping_add(x.wrapping_add(off).wrapping_mul(f)))
    }

    /// Handles group-0 operations. `mac1` is only accepted when `with_mac1`.
    pub fn handle(&mut self, funct7: u8, a: u32, b: u32, with_mac1: bool) -> Option<CfuResponse> {
        let result = match funct7 {
            SET_INPUT_OFFSET => {
                self.input_offset = a as i32;
                0
            }
            RESET_ACC => std::mem::take(&mut self.acc) as u32,
            MAC4 => {
                self.acc = self.acc.wrapping_add(self.dot4(a, b));
                self.acc as u32
            }
            MAC1 if with_mac1 => {
                let x = (a as u8 as i8 as i32).wrapping_add(self.input_offset);
                self.acc = self.acc.wrapping_add(x.wrapping_mul(b as u8 as i8 as i32));
                self.acc as u32
            }
            READ_ACC => self.acc as u32,
            _ => return None,
        };
        Some(CfuResponse::value(result))
    }
}

/// Four-lane SIMD multiply-accumulate unit.
#[derive(Debug, Clone, Default)]
pub struct Mac4Cfu {
    mac: MacUnit,
    error: bool,
}

impl Mac4Cfu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn error(&self) -> bool {
        self.error
    }
}

impl CfuModel for Mac4Cfu {
    fn kind(&self) -> CfuKind {
        CfuKind::Mac4
    }

    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        let handled = match (funct3, funct7) {
            (GROUP_MAC, _) => self.mac.handle(funct7, a, b, false),
            (GROUP_CTRL, RESET) => {
                self.reset();
                Some(CfuResponse::value(0))
            }
            _ => None,
        };
        handled.unwrap_or_else(|| {
            self.error = true;
            CfuResponse::value(0)
        })
    }

    fn reset(&mut self) {
        *self = Self::default();
    }

    fn resource_cost(&self) -> ResourceCost {
        ResourceCost { luts: 250, dsps: 4, bram_bytes: 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfus::pack_lanes;

    #[test]
    fn mac4_accumulates_with_offset() {
        let mut cfu = Mac4Cfu::new();
        cfu.issue(GROUP_MAC, SET_INPUT_OFFSET, 128, 0);
        let inputs = pack_lanes([-128, -127, 0, 127]);
        let filters = pack_lanes([1, 2, 3, -4]);
        // (0)*1 + (1)*2 + (128)*3 + (255)*-4 = 2 + 384 - 1020
        let r = cfu.issue(GROUP_MAC, MAC4, inputs, filters).result as i32;
        assert_eq!(r, -634);
        let r = cfu.issue(GROUP_MAC, MAC4, inputs, filters).result as i32;
        assert_eq!(r, -1268);
        assert_eq!(cfu.issue(GROUP_MAC, RESET_ACC, 0, 0).result as i32, -1268);
        assert_eq!(cfu.issue(GROUP_MAC, READ_ACC, 0, 0).result, 0);
    }

    #[test]
    fn mac1_is_not_offered() {
        let mut cfu = Mac4Cfu::new();
        assert_eq!(cfu.issue(GROUP_MAC, MAC1, 3, 3).result, 0);
        assert!(cfu.error());
    }
}
