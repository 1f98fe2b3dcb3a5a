use super::{CfuKind, CfuModel, CfuResponse, ResourceCost};

/// Stateless demonstration unit.
#[derive(Debug, Clone, Copy, Default)]
pub struct DemoCfu;

impl DemoCfu {
    pub fn exec(funct7: u8, a: u32, b: u32) -> u32 {
        match funct7 {
            0 => a.wrapping_add(b),
            1 => a.count_ones(),
            2 => a.reverse_bits(),
            3 => {
                let (x, y) = (a.to_le_bytes(), b.to_le_bytes());
                u32::from_le_bytes(std::array::from_fn(|i| x[i].wrapping_add(y[i])))
            }
            _ => 0,
        }
    }
}

impl CfuModel for DemoCfu {
    fn kind(&self) -> CfuKind {
        CfuKind::Demo
    }

    fn issue(&mut self, _funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        CfuResponse::value(Self::exec(funct7, a, b))
    }

    fn reset(&mut self) {}

    fn resource_cost(&self) -> ResourceCost {
        ResourceCost { luts: 100, dsps: 0, bram_bytes: 0 }
    }
}
