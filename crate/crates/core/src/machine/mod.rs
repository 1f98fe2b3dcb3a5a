//! The simulated core: configuration, caches, branch prediction, the
//! shared timing engine, trace costing, the instruction-set simulator and
//! whole-workload benchmarking.

mod bench;
mod cache;
mod config;
mod iss;
mod ladder;
mod predictor;
mod timing;
mod trace;

pub use bench::{run_benchmark, BenchError, BenchRun, PreparedRun};
pub use cache::{Access, AccessKind, Cache};
pub use config::{
    ConfigError, CpuConfig, Divider, FlashInterface, Multiplier, Placement, PredictorKind, Shifter, TimingParams,
};
pub use iss::{iss_run, IssRun, LoadError, Machine, MachineState, Stop, Trap, FLASH_BASE, FLASH_BYTES, SRAM_BASE, SRAM_BYTES};
pub use ladder::{
    accumulate_cycles_per_mac, ladder_steps, pointwise_macs, run_ladder, POINTWISE_ICACHE_BYTES, Ladder, LadderCase, LadderRow, LadderStep};
pub use predictor::Predictor;
pub use timing::{cost_trace, CycleReport, Engine, ProfileError, RegionRecord, Tallies};
pub use trace::{Region, TraceEvent, TraceStream};
