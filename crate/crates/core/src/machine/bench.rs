use thiserror::Error;

use super::config::{CpuConfig, TimingParams};
use super::timing::{cost_trace, CycleReport, ProfileError};
use crate::costmodel::{self, Calibration, Catalog, CostError, Feasibility, Footprint};
use crate::kernels::{emit_network, KernelError, KernelVariant, NetworkRun, QuantizedTensor};
use crate::workloads::{GoldenVerdict, WorkloadError, WorkloadSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("configuration does not fit board `{board}`: {verdict}")]
    Infeasible { board: String, verdict: Feasibility },
    #[error("variant `{variant}` needs the {needs} CFU but the configuration has `{has}`")]
    WrongCfu { variant: KernelVariant, needs: String, has: String },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("variant `{variant}` output differs from the golden output (first difference at byte {first_diff:?})")]
    GoldenMismatch { variant: KernelVariant, first_diff: Option<usize> },
}

/// A variant's emitted trace for a workload, already checked against the
/// golden output. Costing it under many configurations reuses the trace.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub variant: KernelVariant,
    pub run: NetworkRun,
    pub footprint: Footprint,
}

impl PreparedRun {
    pub fn new(workload: &WorkloadSpec, variant: KernelVariant) -> Result<Self, BenchError> {
        let run = emit_network(variant, &workload.layers, &workload.input)?;
        verify(workload, variant, &run.output)?;
        let footprint = Footprint {
            code_bytes: run.meta.code_size_bytes as u64,
            weights_bytes: workload.weight_bytes() as u64,
            arena_bytes: workload.arena_bytes as u64,
        };
        Ok(Self { variant, run, footprint })
    }

    /// Board fit of `cfg` with this run's code, weights and arena placed as
    /// `cfg` directs.
    pub fn feasibility(&self, cfg: &CpuConfig, catalog: &Catalog, cal: &Calibration) -> Result<Feasibility, BenchError> {
        let board = catalog.board(&cfg.board)?;
        Ok(costmodel::feasible(&costmodel::estimate(cfg, cal), board, Some((cfg, self.footprint))))
    }

    /// Costs the trace under `cfg` without any board check.
    pub fn cycles(&self, cfg: &CpuConfig, timing: &TimingParams) -> Result<CycleReport, BenchError> {
        if !self.variant.runs_on(cfg.cfu) {
            return Err(BenchError::WrongCfu {
                variant: self.variant,
                needs: self.variant.required_cfu().to_string(),
                has: cfg.cfu.to_string(),
            });
        }
        Ok(cost_trace(cfg, timing, &self.run.trace, &self.run.meta)?)
    }

    /// Checks `cfg` against its board and this run's placement, then costs
    /// the trace.
    pub fn cost(
        &self,
        cfg: &CpuConfig,
        timing: &TimingParams,
        catalog: &Catalog,
        cal: &Calibration,
    ) -> Result<CycleReport, BenchError> {
        let verdict = self.feasibility(cfg, catalog, cal)?;
        if !verdict.is_feasible() {
            return Err(BenchError::Infeasible { board: cfg.board.clone(), verdict });
        }
        self.cycles(cfg, timing)
    }
}

fn verify(workload: &WorkloadSpec, variant: KernelVariant, output: &QuantizedTensor) -> Result<(), BenchError> {
    let first_diff = match workload.golden {
        Some(_) => match workload.golden_check(output.data())? {
            GoldenVerdict::Pass => return Ok(()),
            GoldenVerdict::Fail { first_diff, .. } => first_diff,
        },
        None => {
            let reference = workload.reference_output()?;
            let (r, o) = (reference.data(), output.data());
            match (0..r.len().max(o.len())).find(|&i| r.get(i) != o.get(i)) {
                None => return Ok(()),
                d => d,
            }
        }
    };
    Err(BenchError::GoldenMismatch { variant, first_diff })
}

/// Output and profile of one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub output: QuantizedTensor,
    pub report: CycleReport,
    pub macs: u64,
    pub code_size_bytes: u32,
}

/// Runs every layer of `workload` with `variant`, checks the output against
/// the golden digest and costs the trace under `cfg`.
pub fn run_benchmark(
    cfg: &CpuConfig,
    timing: &TimingParams,
    workload: &WorkloadSpec,
    variant: KernelVariant,
    catalog: &Catalog,
    cal: &Calibration,
) -> Result<BenchRun, BenchError> {
    let prepared = PreparedRun::new(workload, variant)?;
    let report = prepared.cost(cfg, timing, catalog, cal)?;
    Ok(BenchRun {
        report,
        macs: prepared.run.meta.macs,
        code_size_bytes: prepared.run.meta.code_size_bytes,
        output: prepared.run.output,
    })
}
