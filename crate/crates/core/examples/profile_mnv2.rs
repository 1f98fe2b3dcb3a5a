//! Per-region cycle profile of the baseline kernels on the MobileNetV2
//! slice.

use cfu_sim::costmodel::{Calibration, Catalog};
use cfu_sim::kernels::KernelVariant;
use cfu_sim::machine::{run_benchmark, CpuConfig, TimingParams};
use cfu_sim::workloads::{bundled, MNV2_SLICE};

fn main() {
    let spec = bundled(MNV2_SLICE).expect("bundled workload");
    let variant = std::env::args().nth(1).map_or(KernelVariant::Baseline, |v| v.parse().expect("variant name"));
    let cfg = CpuConfig { cfu: variant.required_cfu(), ..Default::default() };
    let run = run_benchmark(&cfg, &TimingParams::default(), &spec, variant, &Catalog::builtin(), &Calibration::builtin())
        .expect("benchmark runs");
    println!("{} with {variant}: {} MACs, {} bytes of kernel code\n", spec.name, run.macs, run.code_size_bytes);
    println!("{}", run.report);
}
