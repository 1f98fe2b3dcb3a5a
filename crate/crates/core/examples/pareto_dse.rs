//! Explores the small Fomu space three ways and compares the fronts.

use cfu_sim::costmodel::{Calibration, Catalog};
use cfu_sim::dse::{bundled_space, run_dse, Algo, Evaluator, SearchSpace, DEFAULT_CAP, SMALL_SPACE};
use cfu_sim::machine::{CpuConfig, TimingParams};
use cfu_sim::workloads::{bundled, KWS_SLICE};

fn main() {
    let space = SearchSpace::parse(bundled_space(SMALL_SPACE).unwrap(), CpuConfig::default()).unwrap();
    let eval = Evaluator::new(bundled(KWS_SLICE).unwrap(), TimingParams::default(), Catalog::builtin(), Calibration::builtin());
    let full = run_dse(&space, &eval, Algo::Exhaustive, 1, 0, DEFAULT_CAP).unwrap();
    let worst = full.trials.iter().filter_map(|t| t.objectives()).fold((0, 0), |m, p| (m.0.max(p.0), m.1.max(p.1)));
    let reference = (worst.0 as f64 * 1.1, worst.1 as f64 * 1.1);

    for (algo, budget) in [(Algo::Exhaustive, 1), (Algo::Random, 12), (Algo::Evolution, 12)] {
        let run = run_dse(&space, &eval, algo, budget, 42, DEFAULT_CAP).unwrap();
        println!(
            "{algo:?}: {} trials, {} on front, hypervolume {:.4e}",
            run.trials.len(),
            run.front.len(),
            run.hypervolume(reference).unwrap()
        );
        for t in run.front_trials() {
            let axes: Vec<String> = run.axes.iter().map(|a| format!("{a}={}", t.config.get(a).unwrap_or_default())).collect();
            println!("  luts {:>5} cycles {:>9}  {}", t.estimate.luts, t.cycles.unwrap(), axes.join(" "));
        }
    }
}
