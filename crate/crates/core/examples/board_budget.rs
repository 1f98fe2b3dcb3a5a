//! Which CFU fits on which board, next to a single-cycle multiplier.

use cfu_sim::cfus::CfuKind;
use cfu_sim::costmodel::{estimate, feasible, Calibration, Catalog};
use cfu_sim::machine::{CpuConfig, Multiplier};

fn main() {
    let (catalog, cal) = (Catalog::builtin(), Calibration::builtin());
    for board in &catalog.boards {
        println!("{} ({} LUTs, {} DSPs, {} B BRAM)", board.name, board.luts, board.dsps, board.bram_bytes);
        for cfu in CfuKind::ALL {
            let cfg = CpuConfig { board: board.name.clone(), multiplier: Multiplier::SingleCycle, cfu, ..Default::default() };
            let est = estimate(&cfg, &cal);
            println!("  {cfu:<9} luts {:>6} dsps {:>3}  {}", est.luts, est.dsps, feasible(&est, board, None));
        }
    }
}
