//! Runs the same 64-element int8 dot product twice on the simulator: once
//! with scalar loads and multiplies, once packing four lanes per CFU issue.

use cfu_sim::cfus::{self, CfuKind};
use cfu_sim::isa::assemble;
use cfu_sim::machine::{iss_run, CpuConfig, TimingParams};

const INPUT_OFFSET: i32 = 128;

// s0 -> x[64], s1 -> w[64]; x[i] = 7i - 100, w[i] = 50 - 3i (as bytes)
const FILL: &str = "
    lui  s0, 0x40001
    lui  s1, 0x40002
    li   t0, 0
    li   t1, 64
fill:
    li   t2, 7
    mul  t3, t0, t2
    addi t3, t3, -100
    add  t4, s0, t0
    sb   t3, 0(t4)
    li   t2, 3
    mul  t3, t0, t2
    li   t2, 50
    sub  t3, t2, t3
    add  t4, s1, t0
    sb   t3, 0(t4)
    addi t0, t0, 1
    blt  t0, t1, fill
    li   a0, 0
    li   t0, 0
";

const SCALAR: &str = "
dot:
    add  t4, s0, t0
    lb   t5, 0(t4)
    addi t5, t5, 128
    add  t4, s1, t0
    lb   t6, 0(t4)
    mul  t5, t5, t6
    add  a0, a0, t5
    addi t0, t0, 1
    blt  t0, t1, dot
    ebreak
";

const PACKED: &str = "
    li   t2, 128
    cfu  0, 0, zero, t2, zero
dot:
    add  t4, s0, t0
    lw   t5, 0(t4)
    add  t4, s1, t0
    lw   t6, 0(t4)
    cfu  0, 2, a0, t5, t6
    addi t0, t0, 4
    blt  t0, t1, dot
    ebreak
";

fn expected() -> i32 {
    (0..64i32).map(|i| ((7 * i - 100) as i8 as i32 + INPUT_OFFSET) * (50 - 3 * i) as i8 as i32).sum()
}

fn main() {
    let timing = TimingParams::default();
    let mut cycles = Vec::new();
    for (label, body, cfu) in [("scalar", SCALAR, CfuKind::None), ("mac4", PACKED, CfuKind::Mac4)] {
        let image = assemble(&format!("{FILL}{body}")).expect("program assembles");
        let cfg = CpuConfig { cfu, ..Default::default() };
        let run = iss_run(&cfg, &timing, &image, cfus::build(cfu), 100_000).expect("program loads");
        let result = run.state.reg(10) as i32;
        assert_eq!(result, expected(), "{label} dot product");
        println!("{label:<7} a0 = {result:>7}  retired {:>5}  cycles {:>6}", run.state.retired, run.state.cycles);
        cycles.push(run.state.cycles);
    }
    println!("packed loop speedup {:.2}x", cycles[0] as f64 / cycles[1] as f64);
}
