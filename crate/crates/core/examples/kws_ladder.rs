//! Keyword-spotting on the smallest board, from SPI flash execution to a
//! fused multiply-accumulate and post-processing unit.

use cfu_sim::costmodel::{Calibration, Catalog};
use cfu_sim::machine::{run_ladder, LadderCase, TimingParams};

fn main() {
    let ladder = run_ladder(LadderCase::Kws, &TimingParams::default(), &Catalog::builtin(), &Calibration::builtin())
        .expect("ladder runs");
    print!("{ladder}");
}
