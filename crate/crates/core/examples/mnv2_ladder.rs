//! The pointwise-kernel optimization ladder on the MobileNetV2 slice.

use cfu_sim::costmodel::{Calibration, Catalog};
use cfu_sim::machine::{accumulate_cycles_per_mac, run_ladder, LadderCase, TimingParams};

fn main() {
    let ladder = run_ladder(LadderCase::Mnv2, &TimingParams::default(), &Catalog::builtin(), &Calibration::builtin())
        .expect("ladder runs");
    print!("{ladder}");
    let spec = LadderCase::Mnv2.workload().unwrap();
    println!("\naccumulation cycles per pointwise MAC");
    for row in &ladder.rows {
        println!("  {:<16} {:.3}", row.step.variant, accumulate_cycles_per_mac(&row.report, &spec).unwrap());
    }
}
