//! End-to-end acceptance checks. Runs without the libtest harness so each
//! criterion prints exactly one PASS or FAIL line; the process fails if any
//! criterion does.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use cfu_sim::cfus::{self, emulate_equivalence, random_issue_stream, twin, CfuKind, CfuModel, CfuResponse, ResourceCost, Verdict};
use cfu_sim::costmodel::{estimate, feasible, Calibration, Catalog};
use cfu_sim::dse::{self, bundled_space, dominates, hypervolume_2d, Algo, DseRun, Evaluator, SearchSpace};
use cfu_sim::isa::{decode_word, encode_cfu, Instruction};
use cfu_sim::kernels::{self, KernelVariant, LayerKind};
use cfu_sim::machine::{
    accumulate_cycles_per_mac, pointwise_macs, run_ladder, CpuConfig, LadderCase, Multiplier, PreparedRun, TimingParams,
    TraceEvent,
};
use cfu_sim::rng::SplitMix64;
use cfu_sim::workloads::{bundled, GoldenVerdict, BUNDLED, KWS_SLICE, MNV2_SLICE};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

fn encoding_fidelity() -> Outcome {
    let words = ["0x00812783", "0x00D7878B", "0x00D7978B", "0x00F12423"];
    let mut args = vec!["disasm", "--origin", "0x400001a0"];
    args.extend(words);
    let (code, out, _) = common::cli(&args);
    ensure!(code == 0, "disasm exited {code}");
    let got: Vec<String> = out.lines().map(common::squash).collect();
    let want: Vec<String> = common::REFERENCE_LISTING.iter().map(|l| common::squash(l)).collect();
    ensure!(got == want, "listing {got:?} != {want:?}");

    let mut rng = SplitMix64::new(1);
    let mut checked = 0u64;
    for funct3 in 0..8u8 {
        for funct7 in 0..128u8 {
            for _ in 0..1000 {
                let (rd, rs1, rs2) = (rng.below(32) as u8, rng.below(32) as u8, rng.below(32) as u8);
                let word = encode_cfu(funct3, funct7, rd, rs1, rs2).map_err(|e| e.to_string())?;
                let expected = (funct7 as u32) << 25
                    | (rs2 as u32) << 20
                    | (rs1 as u32) << 15
                    | (funct3 as u32) << 12
                    | (rd as u32) << 7
                    | 0b000_1011;
                ensure!(word == expected, "encode({funct3},{funct7},{rd},{rs1},{rs2}) = {word:#010x}");
                let Instruction::Cfu(c) = decode_word(word) else {
                    return Err(format!("{word:#010x} did not decode as a CFU instruction"));
                };
                ensure!(
                    (c.funct3, c.funct7, c.rd, c.rs1, c.rs2) == (funct3, funct7, rd, rs1, rs2) && c.encode() == word,
                    "round trip of {word:#010x} gave {c:?}"
                );
                checked += 1;
            }
        }
    }
    Ok(format!("listing exact, {checked} encode/decode round trips"))
}

fn kernel_oracle() -> Outcome {
    let mut rng = SplitMix64::new(2);
    let cases: [(&str, LayerKind, bool); 3] = [
        ("conv2d_int8", LayerKind::Conv2d, false),
        ("depthwise_conv2d_int8", LayerKind::DepthwiseConv2d, false),
        ("conv2d_1x1_specialized", LayerKind::Conv2d, true),
    ];
    for (name, kind, specialized) in cases {
        for i in 0..1000 {
            // the specialized kernel sees 1x1 filters three times in four
            let pointwise = specialized && i % 4 != 0;
            let inst = common::random_instance(&mut rng, kind, pointwise);
            let got = match (kind, specialized) {
                (LayerKind::DepthwiseConv2d, _) => kernels::depthwise_conv2d_int8(&inst.params, &inst.input, &inst.filter),
                (_, true) => kernels::conv2d_1x1_specialized(&inst.params, &inst.input, &inst.filter),
                _ => kernels::conv2d_int8(&inst.params, &inst.input, &inst.filter),
            }
            .map_err(|e| format!("{name} instance {i}: {e}"))?;
            let want = common::conv(kind, &inst.params, &inst.input, &inst.filter);
            ensure!(got.data() == want.as_slice(), "{name} instance {i} differs from the oracle");
        }
    }
    Ok("3 x 1000 instances, zero mismatches".into())
}

fn requant_oracle() -> Outcome {
    let mut rng = SplitMix64::new(3);
    let edges = [i32::MIN, i32::MIN + 1, -1, 0, 1, i32::MAX, 1 << 30, -(1 << 30)];
    let word = |rng: &mut SplitMix64| -> i32 {
        match rng.below(4) {
            0 => edges[rng.below(edges.len() as u64) as usize],
            1 => rng.range_i64(-70_000, 70_000) as i32,
            _ => rng.next_u32() as i32,
        }
    };
    ensure!(kernels::srdhm(i32::MIN, i32::MIN) == i32::MAX, "saturation edge");
    ensure!(common::srdhm(i32::MIN, i32::MIN) == i32::MAX, "oracle saturation edge");
    for _ in 0..100_000 {
        let (a, b) = (word(&mut rng), word(&mut rng));
        ensure!(kernels::srdhm(a, b) == common::srdhm(a, b), "srdhm({a}, {b})");
        let e = rng.below(32) as u32;
        ensure!(kernels::rdbpot(a, e) == common::rdbpot(a, e), "rdbpot({a}, {e})");
        let m = rng.range_i64(1 << 30, i32::MAX as i64) as i32;
        let s = rng.range_i64(-31, 31) as i32;
        ensure!(kernels::mbqm(a, m, s) == common::mbqm(a, m, s), "mbqm({a}, {m}, {s})");
    }
    Ok("1e5 inputs each for srdhm, rdbpot and mbqm".into())
}

/// The demo twin with a popcount that counts one too many.
struct OffByOnePopcount(Box<dyn CfuModel>);

impl CfuModel for OffByOnePopcount {
    fn kind(&self) -> CfuKind {
        self.0.kind()
    }
    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        let mut r = self.0.issue(funct3, funct7, a, b);
        if funct7 == 1 {
            r.result = r.result.wrapping_add(1);
        }
        r
    }
    fn reset(&mut self) {
        self.0.reset()
    }
    fn resource_cost(&self) -> ResourceCost {
        self.0.resource_cost()
    }
}

fn cfu_emulation() -> Outcome {
    let kinds = [CfuKind::Demo, CfuKind::Postproc, CfuKind::Mac4, CfuKind::Cfu1, CfuKind::Cfu2];
    for (i, kind) in kinds.into_iter().enumerate() {
        let stream = random_issue_stream(kind, 10_000, 40 + i as u64);
        let mut model = cfus::build(kind).ok_or("no model")?;
        let mut shadow = twin::twin(kind).ok_or("no twin")?;
        match emulate_equivalence(model.as_mut(), shadow.as_mut(), &stream) {
            Verdict::Equivalent { issues } => ensure!(issues == 10_000, "{kind}: only {issues} issues"),
            Verdict::Diverged(d) => return Err(format!("{kind} diverged at issue {}", d.index)),
        }
    }
    let stream = random_issue_stream(CfuKind::Demo, 10_000, 99);
    let first_fault = stream.iter().position(|s| s.funct7 == 1).ok_or("stream never counts bits")?;
    let mut model = cfus::build(CfuKind::Demo).unwrap();
    let mut faulty = OffByOnePopcount(twin::twin(CfuKind::Demo).unwrap());
    match emulate_equivalence(model.as_mut(), &mut faulty, &stream) {
        Verdict::Diverged(d) => ensure!(d.index == first_fault, "fault caught at {} not {first_fault}", d.index),
        Verdict::Equivalent { .. } => return Err("planted fault went unnoticed".into()),
    }
    Ok(format!("5 units x 1e4 issues agree; planted fault caught at issue {first_fault}"))
}

fn variant_safety() -> Outcome {
    for name in BUNDLED {
        let spec = bundled(name).map_err(|e| e.to_string())?;
        for v in KernelVariant::ALL {
            let run = PreparedRun::new(&spec, v).map_err(|e| format!("{name}/{v}: {e}"))?;
            ensure!(
                spec.golden_check(run.run.output.data()).map_err(|e| e.to_string())? == GoldenVerdict::Pass,
                "{name}/{v} fails its golden"
            );
        }
    }
    Ok(format!("{} variants x {} workloads bit-exact", KernelVariant::ALL.len(), BUNDLED.len()))
}

fn defaults() -> (TimingParams, Catalog, Calibration) {
    (TimingParams::default(), Catalog::builtin(), Calibration::builtin())
}

fn mnv2_ladder() -> Outcome {
    let (t, cat, cal) = defaults();
    let ladder = run_ladder(LadderCase::Mnv2, &t, &cat, &cal).map_err(|e| e.to_string())?;
    let order: Vec<KernelVariant> = ladder.rows.iter().map(|r| r.step.variant).collect();
    ensure!(order == KernelVariant::POINTWISE_LADDER, "ladder order {order:?}");
    ensure!(ladder.strictly_decreasing(), "cycles not strictly decreasing: {:?}", ladder.cycles());
    let spec = bundled(MNV2_SLICE).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for row in &ladder.rows[6..] {
        let per_mac = accumulate_cycles_per_mac(&row.report, &spec).map_err(|e| e.to_string())?;
        ensure!(per_mac < 1.0, "{} spends {per_mac:.3} accumulation cycles per MAC", row.step.variant);
        worst = worst.max(per_mac);
    }
    let run = PreparedRun::new(&spec, KernelVariant::CfuMac4).map_err(|e| e.to_string())?;
    let issues = run.run.trace.count(|e| {
        matches!(e, TraceEvent::CfuIssue { funct3: cfus::ops::GROUP_MAC, funct7: cfus::ops::MAC4_STORED, .. })
    });
    let expected: u64 =
        pointwise_macs(&spec).map_err(|e| e.to_string())?.iter().map(|(_, m)| m.div_ceil(4)).sum();
    ensure!(issues == expected, "{issues} MAC4 issues for {expected} four-MAC groups");
    Ok(format!(
        "{} -> {} cycles ({:.2}x), at most {:.3} accumulation cycles/MAC from mac4run1 on, {issues} MAC4 issues",
        ladder.rows[0].report.total_cycles,
        ladder.rows[9].report.total_cycles,
        ladder.speedup(9),
        worst
    ))
}

fn kws_ladder() -> Outcome {
    let (t, cat, cal) = defaults();
    let ladder = run_ladder(LadderCase::Kws, &t, &cat, &cal).map_err(|e| e.to_string())?;
    let labels: Vec<&str> = ladder.rows.iter().map(|r| r.step.label.as_str()).collect();
    ensure!(
        labels
            == [
                "spi_baseline",
                "quad_spi",
                "sram_placement",
                "larger_icache",
                "single_cycle_mul",
                "cfu_mac",
                "cfu_postproc"
            ],
        "stages {labels:?}"
    );
    ensure!(ladder.strictly_decreasing(), "cycles not strictly decreasing: {:?}", ladder.cycles());
    let (before, after) = (&ladder.rows[3], &ladder.rows[4]);
    ensure!(
        before.step.cfg.multiplier == Multiplier::Iterative && after.step.cfg.multiplier == Multiplier::SingleCycle,
        "multiplier stage changes something else"
    );
    let muls = before.report.tallies.muls;
    ensure!(muls > 0 && after.report.tallies.muls == muls, "multiply counts differ");
    let saved = before.report.total_cycles - after.report.total_cycles;
    ensure!(saved == (t.mul_iterative - t.mul_single) as u64 * muls, "saved {saved} over {muls} multiplies");
    Ok(format!("{:.2}x overall, multiplier stage saves 29 x {muls}", ladder.speedup(6)))
}

fn fomu_dsp_budget() -> Outcome {
    let (_, cat, cal) = defaults();
    let fomu = cat.board("fomu").map_err(|e| e.to_string())?;
    let cfg = CpuConfig { board: "fomu".into(), multiplier: Multiplier::SingleCycle, cfu: CfuKind::Cfu2, ..Default::default() };
    let est = estimate(&cfg, &cal);
    ensure!(est.dsps == 8, "single-cycle multiplier + cfu2 use {} DSPs", est.dsps);
    let verdict = feasible(&est, fomu, None);
    ensure!(verdict.is_feasible(), "{verdict}");
    let heavy = CpuConfig { cfu: CfuKind::Cfu1, ..cfg };
    let verdict = feasible(&estimate(&heavy, &cal), fomu, None);
    ensure!(verdict.violations.iter().any(|v| v.resource == "dsps"), "cfu1 verdict: {verdict}");
    Ok(format!("8 DSPs fit; with cfu1 {verdict}"))
}

fn front_contained(sampled: &DseRun, exhaustive: &DseRun) -> bool {
    let reference = exhaustive.front_points();
    sampled.front_points().iter().all(|&p| reference.iter().any(|&q| q == p || dominates(q, p)))
}

fn dse_correctness() -> Outcome {
    let ev = Evaluator::new(bundled(KWS_SLICE).map_err(|e| e.to_string())?, TimingParams::default(), Catalog::builtin(), Calibration::builtin());
    let space = SearchSpace::parse(bundled_space(dse::SMALL_SPACE).unwrap(), CpuConfig::default()).map_err(|e| e.to_string())?;
    ensure!(space.cardinality() == 36, "small space has {} points", space.cardinality());
    let run = |algo, budget, seed| dse::run_dse(&space, &ev, algo, budget, seed, dse::DEFAULT_CAP).map_err(|e| e.to_string());
    let exhaustive = run(Algo::Exhaustive, 1, 0)?;
    let full_random = run(Algo::Random, 36, 7)?;
    let key = |r: &DseRun| {
        let mut v: Vec<(u64, u64, String)> =
            r.front_trials().map(|t| (t.estimate.luts, t.cycles.unwrap(), t.config.to_text())).collect();
        v.sort();
        v
    };
    ensure!(key(&exhaustive) == key(&full_random), "random front at full budget differs");
    for (algo, budget, seed) in [(Algo::Random, 10, 1), (Algo::Random, 20, 2), (Algo::Evolution, 15, 3), (Algo::Evolution, 40, 4)] {
        let sampled = run(algo, budget, seed)?;
        ensure!(front_contained(&sampled, &exhaustive), "{algo:?} front escapes the exhaustive front");
    }
    ensure!(hypervolume_2d(&[(1.0, 1.0)], (3.0, 3.0)) == Ok(4.0), "hypervolume fixture 1");
    ensure!(hypervolume_2d(&[(1.0, 2.0), (2.0, 1.0)], (3.0, 3.0)) == Ok(3.0), "hypervolume fixture 2");
    for algo in [Algo::Random, Algo::Evolution] {
        ensure!(run(algo, 20, 5)?.to_csv() == run(algo, 20, 5)?.to_csv(), "{algo:?} CSV differs under one seed");
    }
    Ok(format!("front of {} points matches, samplers contained, CSV reproducible", exhaustive.front.len()))
}

fn richer_space() -> Outcome {
    let ev = Evaluator::new(bundled(MNV2_SLICE).map_err(|e| e.to_string())?, TimingParams::default(), Catalog::builtin(), Calibration::builtin());
    let space = SearchSpace::parse(bundled_space(dse::DEFAULT_SPACE).unwrap(), CpuConfig::default()).map_err(|e| e.to_string())?;
    let product: u64 = space.axes().iter().map(|(_, v)| v.len() as u64).product();
    ensure!(space.cardinality() == product, "cardinality {} != {product}", space.cardinality());
    let run = dse::run_dse(&space, &ev, Algo::Exhaustive, 1, 0, dse::DEFAULT_CAP).map_err(|e| e.to_string())?;
    ensure!(run.trials.len() as u64 == product, "{} trials", run.trials.len());
    let of = |kind| run.trials.iter().filter(move |t| t.config.cfu == kind).filter_map(|t| t.objectives());
    let witness = of(CfuKind::Cfu2).find_map(|a| of(CfuKind::None).find(|b| a.0 < b.0 && a.1 < b.1).map(|b| (a, b)));
    let ((luts, cycles), (base_luts, base_cycles)) = witness.ok_or("no cfu2 point beats a cfu=none point on both axes")?;
    Ok(format!(
        "{product} points; cfu2 at {luts} LUTs / {cycles} cycles beats none at {base_luts} LUTs / {base_cycles} cycles"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("encoding fidelity", encoding_fidelity),
        ("kernel oracle equivalence", kernel_oracle),
        ("requantization primitives", requant_oracle),
        ("CFU emulation equivalence", cfu_emulation),
        ("variant safety", variant_safety),
        ("MNV2 ladder monotonicity", mnv2_ladder),
        ("KWS ladder monotonicity", kws_ladder),
        ("Fomu DSP budget", fomu_dsp_budget),
        ("DSE correctness", dse_correctness),
        ("richer-space dominance", richer_space),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
