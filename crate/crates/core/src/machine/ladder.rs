use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::bench::{BenchError, PreparedRun};
use super::config::{CpuConfig, FlashInterface, Multiplier, Placement, TimingParams};
use super::timing::CycleReport;
use crate::cfus::CfuKind;
use crate::costmodel::{Calibration, Catalog};
use crate::kernels::{reference_layer, KernelError, KernelVariant, LayerKind};
use crate::workloads::{bundled, WorkloadError, WorkloadSpec, KWS_SLICE, MNV2_SLICE};

/// Which optimization sequence to replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderCase {
    Mnv2,
    Kws,
}

impl LadderCase {
    pub fn workload(self) -> Result<WorkloadSpec, WorkloadError> {
        bundled(match self {
            LadderCase::Mnv2 => MNV2_SLICE,
            LadderCase::Kws => KWS_SLICE,
        })
    }
}

impl FromStr for LadderCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mnv2" => Ok(LadderCase::Mnv2),
            "kws" => Ok(LadderCase::Kws),
            _ => Err(format!("unknown ladder `{s}` (expected mnv2 or kws)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderStep {
    pub label: String,
    pub cfg: CpuConfig,
    pub variant: KernelVariant,
}

/// Instruction cache of the 1x1 sequence: large enough for every kernel any
/// of its variants touches, so steps differ only in executed work.
pub const POINTWISE_ICACHE_BYTES: u32 = 16384;

/// The steps of `case`, in order. The 1x1 sequence changes only the kernel
/// (and the CFU it needs) on a roomy board. The keyword-spotting sequence
/// starts from a minimal core on the smallest board and changes one thing
/// per step.
pub fn ladder_steps(case: LadderCase) -> Vec<LadderStep> {
    match case {
        LadderCase::Mnv2 => KernelVariant::POINTWISE_LADDER
            .iter()
            .map(|&variant| LadderStep {
                label: variant.name().into(),
                cfg: CpuConfig { icache_bytes: POINTWISE_ICACHE_BYTES, cfu: variant.required_cfu(), ..CpuConfig::default() },
                variant,
            })
            .collect(),
        LadderCase::Kws => {
            let mut cfg = CpuConfig {
                board: "fomu".into(),
                icache_bytes: 1024,
                dcache_bytes: 2048,
                multiplier: Multiplier::Iterative,
                flash: FlashInterface::Spi,
                code_region: Placement::Flash,
                weights_region: Placement::Flash,
                ..CpuConfig::default()
            };
            let mut steps = Vec::new();
            let mut push = |label: &str, cfg: &CpuConfig, variant| {
                steps.push(LadderStep { label: label.into(), cfg: cfg.clone(), variant })
            };
            push("spi_baseline", &cfg, KernelVariant::KwsBaseline);
            cfg.flash = FlashInterface::QuadSpi;
            push("quad_spi", &cfg, KernelVariant::KwsBaseline);
            cfg.code_region = Placement::Sram;
            cfg.weights_region = Placement::Sram;
            push("sram_placement", &cfg, KernelVariant::KwsBaseline);
            cfg.icache_bytes = 4096;
            push("larger_icache", &cfg, KernelVariant::KwsBaseline);
            cfg.multiplier = Multiplier::SingleCycle;
            push("single_cycle_mul", &cfg, KernelVariant::KwsFastmult);
            cfg.cfu = CfuKind::Cfu2;
            push("cfu_mac", &cfg, KernelVariant::KwsMacconv);
            push("cfu_postproc", &cfg, KernelVariant::KwsPostproc);
            steps
        }
    }
}

#[derive(Debug, Clone)]
pub struct LadderRow {
    pub step: LadderStep,
    pub report: CycleReport,
}

/// Cycle counts of every step, each relative to the first.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub case: LadderCase,
    pub rows: Vec<LadderRow>,
}

impl Ladder {
    pub fn cycles(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.report.total_cycles).collect()
    }

    pub fn speedup(&self, i: usize) -> f64 {
        self.rows[0].report.total_cycles as f64 / self.rows[i].report.total_cycles as f64
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.cycles().windows(2).all(|w| w[1] < w[0])
    }
}

impl fmt::Display for Ladder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<18} {:<14} {:>12} {:>9} {:>9}", "step", "variant", "cycles", "speedup", "vs prev")?;
        for (i, r) in self.rows.iter().enumerate() {
            let prev = if i == 0 { 1.0 } else { self.speedup(i) / self.speedup(i - 1) };
            writeln!(
                f,
                "{:<18} {:<14} {:>12} {:>8.2}x {:>8.2}x",
                r.step.label,
                r.step.variant,
                r.report.total_cycles,
                self.speedup(i),
                prev
            )?;
        }
        Ok(())
    }
}

/// Costs every step of `case` on its bundled workload. Each variant's trace
/// is emitted and verified once.
pub fn run_ladder(
    case: LadderCase,
    timing: &TimingParams,
    catalog: &Catalog,
    cal: &Calibration,
) -> Result<Ladder, BenchError> {
    let workload = case.workload()?;
    let mut prepared: BTreeMap<KernelVariant, PreparedRun> = BTreeMap::new();
    let mut rows = Vec::new();
    for step in ladder_steps(case) {
        if let std::collections::btree_map::Entry::Vacant(e) = prepared.entry(step.variant) {
            e.insert(PreparedRun::new(&workload, step.variant)?);
        }
        let report = prepared[&step.variant].cost(&step.cfg, timing, catalog, cal)?;
        rows.push(LadderRow { step, report });
    }
    Ok(Ladder { case, rows })
}

/// Multiply-accumulates of each pointwise convolution in `workload`, by
/// layer name.
pub fn pointwise_macs(workload: &WorkloadSpec) -> Result<Vec<(String, u64)>, KernelError> {
    let mut x = workload.input.clone();
    let mut out = Vec::new();
    for l in &workload.layers {
        if l.kind == LayerKind::Conv2d && l.geometry(&x)?.is_pointwise() {
            out.push((l.name.clone(), l.macs(&x)?));
        }
        x = reference_layer(l, &x)?;
    }
    Ok(out)
}

/// Accumulation-phase cycles per MAC over the pointwise layers.
pub fn accumulate_cycles_per_mac(report: &CycleReport, workload: &WorkloadSpec) -> Result<f64, KernelError> {
    let layers = pointwise_macs(workload)?;
    let cycles: u64 = layers.iter().map(|(name, _)| report.inclusive(&format!("{name}/accumulate"))).sum();
    let macs: u64 = layers.iter().map(|(_, m)| m).sum();
    Ok(cycles as f64 / macs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(case: LadderCase) -> Ladder {
        run_ladder(case, &TimingParams::default(), &Catalog::builtin(), &Calibration::builtin()).unwrap()
    }

    #[test]
    fn pointwise_ladder_keeps_getting_faster() {
        let l = ladder(LadderCase::Mnv2);
        assert_eq!(l.rows.len(), 10);
        assert!(l.strictly_decreasing(), "{l}");
    }

    #[test]
    fn kws_ladder_keeps_getting_faster() {
        let l = ladder(LadderCase::Kws);
        assert_eq!(l.rows.len(), 7);
        assert!(l.strictly_decreasing(), "{l}");
    }

    #[test]
    fn multiplier_step_saves_exactly_the_latency_difference() {
        let l = ladder(LadderCase::Kws);
        let (before, after) = (&l.rows[3].report, &l.rows[4].report);
        assert_eq!(before.tallies.muls, after.tallies.muls);
        assert_eq!(before.total_cycles - after.total_cycles, 29 * before.tallies.muls);
    }

    #[test]
    fn session_variants_spend_under_a_cycle_per_mac() {
        let l = ladder(LadderCase::Mnv2);
        let spec = LadderCase::Mnv2.workload().unwrap();
        let per_mac: Vec<f64> =
            l.rows.iter().map(|r| accumulate_cycles_per_mac(&r.report, &spec).unwrap()).collect();
        assert!(per_mac[0] > 1.0);
        for (r, c) in l.rows.iter().zip(&per_mac).skip(6) {
            assert!(*c < 1.0, "{}: {c}", r.step.variant);
        }
    }

    #[test]
    fn mac4_issues_cover_macs_exactly() {
        use crate::cfus::ops::{GROUP_MAC, MAC4_STORED};
        use crate::machine::TraceEvent;
        let spec = LadderCase::Mnv2.workload().unwrap();
        let run = PreparedRun::new(&spec, KernelVariant::CfuMac4).unwrap().run;
        let issues = run.trace.count(|e| {
            matches!(e, TraceEvent::CfuIssue { funct3: GROUP_MAC, funct7: MAC4_STORED, .. })
        });
        let expected: u64 = pointwise_macs(&spec).unwrap().iter().map(|(_, m)| m.div_ceil(4)).sum();
        assert_eq!(issues, expected);
        assert_eq!(expected, 8 * 8 * 16 * 32 / 4 + 8 * 8 * 32 * 16 / 4);
    }

    #[test]
    fn case_names() {
        assert_eq!("kws".parse::<LadderCase>(), Ok(LadderCase::Kws));
        assert!("resnet".parse::<LadderCase>().is_err());
    }
}
