//! Design-space exploration over core configurations: search spaces,
//! exhaustive, random and evolutionary samplers, Pareto fronts and
//! hypervolume.

mod pareto;
mod search;
mod space;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::cfus::CfuKind;
use crate::costmodel::{self, Calibration, Catalog, ResourceEstimate};
use crate::kernels::KernelVariant;
use crate::kv::KvError;
use crate::machine::{BenchError, ConfigError, CpuConfig, PreparedRun, TimingParams};
use crate::workloads::WorkloadSpec;

pub use pareto::{dominates, hypervolume_2d, pareto_indices};
pub use space::SearchSpace;

/// Largest space exhaustive search will walk unless told otherwise.
pub const DEFAULT_CAP: u64 = 100_000;
pub const POPULATION: usize = 25;
pub const TOURNAMENT: usize = 5;

/// 36-point space on the smallest board.
pub const SMALL_SPACE: &str = "small";
/// The broader space over caches, prediction, arithmetic units and CFUs.
pub const DEFAULT_SPACE: &str = "default";

/// Text of a shipped space file.
pub fn bundled_space(name: &str) -> Option<&'static str> {
    match name {
        SMALL_SPACE => Some(include_str!("../../data/small.space")),
        DEFAULT_SPACE => Some(include_str!("../../data/default.space")),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("`{0}` is not a configuration field")]
    UnknownAxis(String),
    #[error("axis `{0}` appears twice")]
    DuplicateAxis(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("space has {cardinality} points, above the cap of {cap}")]
    CapExceeded { cardinality: u64, cap: u64 },
    #[error("space has no points")]
    EmptySpace,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("point ({x}, {y}) lies outside the reference box")]
    OutsideReference { x: f64, y: f64 },
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl From<KvError> for DseError {
    fn from(e: KvError) -> Self {
        DseError::Syntax { line: e.line, message: e.message }
    }
}

/// Most specialized variant a core carrying `cfu` can run.
pub fn policy_variant(cfu: CfuKind) -> KernelVariant {
    match cfu {
        CfuKind::None | CfuKind::Demo | CfuKind::Mac4 => KernelVariant::SwSpec,
        CfuKind::Postproc => KernelVariant::CfuPostproc,
        CfuKind::Cfu1 => KernelVariant::Overlap,
        CfuKind::Cfu2 => KernelVariant::KwsPostproc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Exhaustive,
    Random,
    Evolution,
}

impl FromStr for Algo {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exhaustive" => Ok(Algo::Exhaustive),
            "random" => Ok(Algo::Random),
            "evolution" => Ok(Algo::Evolution),
            _ => Err(format!("unknown search `{s}` (expected exhaustive, random or evolution)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub trial_id: usize,
    pub genome: Vec<usize>,
    pub config: CpuConfig,
    pub estimate: ResourceEstimate,
    pub feasible: bool,
    /// Why the point is infeasible, empty when it is not.
    pub reason: String,
    pub variant: KernelVariant,
    pub cycles: Option<u64>,
}

impl Trial {
    /// (luts, cycles) of a feasible trial.
    pub fn objectives(&self) -> Option<(u64, u64)> {
        self.cycles.map(|c| (self.estimate.luts, c))
    }
}

/// Evaluates configurations against one workload. Traces are emitted once
/// per variant and cycle counts are shared between configurations that
/// differ only in fields timing ignores.
pub struct Evaluator {
    workload: WorkloadSpec,
    pub timing: TimingParams,
    pub catalog: Catalog,
    pub calibration: Calibration,
    runs: BTreeMap<KernelVariant, OnceLock<Result<PreparedRun, BenchError>>>,
    cycles: Mutex<HashMap<(KernelVariant, CpuConfig), u64>>,
}

impl Evaluator {
    pub fn new(workload: WorkloadSpec, timing: TimingParams, catalog: Catalog, calibration: Calibration) -> Self {
        Self {
            workload,
            timing,
            catalog,
            calibration,
            runs: KernelVariant::ALL.iter().map(|&v| (v, OnceLock::new())).collect(),
            cycles: Mutex::new(HashMap::new()),
        }
    }

    pub fn workload(&self) -> &WorkloadSpec {
        &self.workload
    }

    pub fn prepared(&self, variant: KernelVariant) -> Result<&PreparedRun, BenchError> {
        self.runs[&variant].get_or_init(|| PreparedRun::new(&self.workload, variant)).as_ref().map_err(Clone::clone)
    }

    pub fn evaluate(&self, trial_id: usize, genome: Vec<usize>, config: CpuConfig) -> Result<Trial, DseError> {
        let estimate = costmodel::estimate(&config, &self.calibration);
        let variant = policy_variant(config.cfu);
        let mut trial =
            Trial { trial_id, genome, config, estimate, feasible: false, reason: String::new(), variant, cycles: None };
        if let Err(e) = trial.config.validate() {
            trial.reason = e.to_string();
            return Ok(trial);
        }
        let run = self.prepared(variant)?;
        let verdict = run.feasibility(&trial.config, &self.catalog, &self.calibration)?;
        if !verdict.is_feasible() {
            trial.reason = verdict.to_string();
            return Ok(trial);
        }
        let key = CpuConfig { board: String::new(), cfu: variant.required_cfu(), ..trial.config.clone() };
        let known = self.cycles.lock().expect("cycle memo poisoned").get(&(variant, key.clone())).copied();
        let cycles = match known {
            Some(c) => c,
            None => {
                let c = run.cycles(&trial.config, &self.timing)?.total_cycles;
                self.cycles.lock().expect("cycle memo poisoned").insert((variant, key), c);
                c
            }
        };
        trial.feasible = true;
        trial.cycles = Some(cycles);
        Ok(trial)
    }
}

/// Trials of one search plus the front over them.
#[derive(Debug, Clone)]
pub struct DseRun {
    pub axes: Vec<String>,
    pub trials: Vec<Trial>,
    /// Trial ids on the front, by ascending LUTs.
    pub front: Vec<usize>,
}

impl DseRun {
    pub fn new(space: &SearchSpace, trials: Vec<Trial>) -> Self {
        let front = pareto_front(&trials);
        Self { axes: space.axis_names().map(String::from).collect(), trials, front }
    }

    pub fn front_trials(&self) -> impl Iterator<Item = &Trial> {
        self.front.iter().map(|&id| &self.trials[id])
    }

    pub fn front_points(&self) -> Vec<(u64, u64)> {
        self.front_trials().filter_map(Trial::objectives).collect()
    }

    /// Hypervolume of the front in (LUTs, cycles) space.
    pub fn hypervolume(&self, reference: (f64, f64)) -> Result<f64, DseError> {
        let pts: Vec<(f64, f64)> = self.front_points().iter().map(|&(l, c)| (l as f64, c as f64)).collect();
        hypervolume_2d(&pts, reference)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_id");
        for a in &self.axes {
            out.push(',');
            out.push_str(a);
        }
        out.push_str(",feasible,luts,dsps,bram_bytes,cycles,on_front\n");
        for t in &self.trials {
            let _ = write!(out, "{}", t.trial_id);
            for a in &self.axes {
                let _ = write!(out, ",{}", t.config.get(a).unwrap_or_default());
            }
            let cycles = t.cycles.map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{}",
                t.feasible as u8,
                t.estimate.luts,
                t.estimate.dsps,
                t.estimate.bram_bytes,
                cycles,
                self.front.contains(&t.trial_id) as u8
            );
        }
        out
    }
}

/// Trial ids of the non-dominated feasible trials, by ascending LUTs.
pub fn pareto_front(trials: &[Trial]) -> Vec<usize> {
    let feasible: Vec<&Trial> = trials.iter().filter(|t| t.cycles.is_some()).collect();
    let points: Vec<(u64, u64)> = feasible.iter().filter_map(|t| t.objectives()).collect();
    pareto_indices(&points).into_iter().map(|i| feasible[i].trial_id).collect()
}

/// Runs one search. `budget` bounds the evaluations of the sampling
/// searches; exhaustive search walks the whole space if it is within `cap`.
pub fn run_dse(
    space: &SearchSpace,
    eval: &Evaluator,
    algo: Algo,
    budget: usize,
    seed: u64,
    cap: u64,
) -> Result<DseRun, DseError> {
    if budget == 0 {
        return Err(DseError::ZeroBudget);
    }
    if space.cardinality() == 0 {
        return Err(DseError::EmptySpace);
    }
    let trials = match algo {
        Algo::Exhaustive => search::evaluate_all(space, eval, space.enumerate(cap)?)?,
        Algo::Random => search::random(space, eval, budget, seed)?,
        Algo::Evolution => search::evolution(space, eval, budget, seed)?,
    };
    Ok(DseRun::new(space, trials))
}
