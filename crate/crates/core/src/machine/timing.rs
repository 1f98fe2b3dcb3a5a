use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::cache::{AccessKind, Cache};
use super::config::{CpuConfig, Divider, Multiplier, Placement, Shifter, TimingParams};
use super::predictor::Predictor;
use super::trace::{Region, TraceEvent, TraceStream};
use crate::kernels::KernelMeta;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("event {index}: region `{found}` closed while `{open}` is open")]
    Mismatched { index: usize, open: String, found: String },
    #[error("event {index}: region `{found}` closed but never opened")]
    Unopened { index: usize, found: String },
    #[error("region `{0}` still open at the end of the trace")]
    Unclosed(String),
}

/// Event counts gathered while costing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tallies {
    pub instructions: u64,
    pub loads: u64,
    pub stores: u64,
    pub muls: u64,
    pub divs: u64,
    pub branches: u64,
    pub mispredicts: u64,
    pub cfu_issues: u64,
    pub cfu_macs: u64,
    pub flash_accesses: u64,
    pub icache_misses: u64,
    pub dcache_misses: u64,
    pub l2_misses: u64,
    pub writebacks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    /// Enclosing region names joined by `/`.
    pub name: String,
    pub invocations: u64,
    /// Cycles spent directly in this region, excluding nested regions.
    pub cycles: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleReport {
    pub total_cycles: u64,
    /// Instruction-side cycles, not attributed to any region.
    pub fetch_cycles: u64,
    pub regions: Vec<RegionRecord>,
    pub tallies: Tallies,
}

impl CycleReport {
    /// Cycles of `name` and everything nested inside it.
    pub fn inclusive(&self, name: &str) -> u64 {
        let nested = format!("{name}/");
        self.regions.iter().filter(|r| r.name == name || r.name.starts_with(&nested)).map(|r| r.cycles).sum()
    }

    /// Sum over regions whose last path component is `leaf`.
    pub fn leaf_cycles(&self, leaf: &str) -> u64 {
        self.regions.iter().filter(|r| r.name.rsplit('/').next() == Some(leaf)).map(|r| r.cycles).sum()
    }

    pub fn region(&self, name: &str) -> Option<&RegionRecord> {
        self.regions.iter().find(|r| r.name == name)
    }

    fn finish(&mut self) {
        let total = self.total_cycles.max(1) as f64;
        for r in &mut self.regions {
            r.percent = 100.0 * r.cycles as f64 / total;
        }
    }
}

impl fmt::Display for CycleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<40} {:>10} {:>14} {:>7}", "region", "calls", "cycles", "%")?;
        for r in &self.regions {
            writeln!(f, "{:<40} {:>10} {:>14} {:>6.2}%", r.name, r.invocations, r.cycles, r.percent)?;
        }
        writeln!(f, "{:<40} {:>10} {:>14}", "(instruction fetch)", "", self.fetch_cycles)?;
        writeln!(f, "{:<40} {:>10} {:>14}", "total", "", self.total_cycles)?;
        let t = &self.tallies;
        write!(
            f,
            "instructions {}  loads {}  stores {}  muls {}  cfu issues {}  mispredicts {}  misses i/d/l2 {}/{}/{}",
            t.instructions, t.loads, t.stores, t.muls, t.cfu_issues, t.mispredicts, t.icache_misses, t.dcache_misses, t.l2_misses
        )
    }
}

/// Charges events against one configuration. Shared by trace costing and
/// the instruction-set simulator.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: CpuConfig,
    t: TimingParams,
    icache: Option<Cache>,
    dcache: Option<Cache>,
    l2: Option<Cache>,
    predictor: Predictor,
    pub tallies: Tallies,
}

fn cache(bytes: u32, cfg: &CpuConfig) -> Option<Cache> {
    (bytes > 0).then(|| Cache::new(bytes, cfg.line_bytes, cfg.assoc))
}

impl Engine {
    pub fn new(cfg: &CpuConfig, t: &TimingParams) -> Self {
        Self {
            cfg: cfg.clone(),
            t: t.clone(),
            icache: cache(cfg.icache_bytes, cfg),
            dcache: cache(cfg.dcache_bytes, cfg),
            l2: cache(cfg.l2_bytes, cfg),
            predictor: Predictor::new(cfg.predictor),
            tallies: Tallies::default(),
        }
    }

    fn flash_word(&self) -> u64 {
        self.t.flash_word_cycles(self.cfg.flash) as u64
    }

    fn placement(&self, region: Region) -> Placement {
        match region {
            Region::Sram => Placement::Sram,
            Region::Weights => self.cfg.weights_region,
            Region::Flash => self.cfg.code_region,
        }
    }

    /// Extra cycles for an SRAM access that missed the first level.
    fn beyond_l1(&mut self, addr: u32, kind: AccessKind) -> u64 {
        if let Some(l2) = self.l2.as_mut() {
            let a = l2.access(addr, kind);
            if a.hit {
                return self.t.l2_hit_penalty as u64;
            }
            self.tallies.l2_misses += 1;
        }
        (self.t.dcache_miss_penalty + self.t.sram_latency) as u64
    }

    fn data(&mut self, addr: u32, bytes: u8, placement: Placement, kind: AccessKind) -> u64 {
        let base = if kind == AccessKind::Store { self.t.store_hit } else { self.t.load_hit } as u64;
        if placement == Placement::Flash {
            self.tallies.flash_accesses += 1;
            return base + self.flash_word() * (bytes as u64).div_ceil(4);
        }
        if let Some(d) = self.dcache.as_mut() {
            let a = d.access(addr, kind);
            if a.writeback {
                self.tallies.writebacks += 1;
            }
            if a.hit {
                return base;
            }
        }
        self.tallies.dcache_misses += 1;
        base + self.beyond_l1(addr, kind)
    }

    /// One data access at a known placement.
    pub fn data_access(&mut self, addr: u32, bytes: u8, placement: Placement, store: bool) -> u64 {
        self.tallies.instructions += 1;
        if store {
            self.tallies.stores += 1;
            self.data(addr, bytes, placement, AccessKind::Store)
        } else {
            self.tallies.loads += 1;
            self.data(addr, bytes, placement, AccessKind::Load)
        }
    }

    /// Unconditional jump. Direct targets resolve at decode; indirect ones
    /// pay a full redirect.
    pub fn jump(&mut self, indirect: bool) -> u64 {
        self.tallies.instructions += 1;
        let penalty = if indirect { self.t.mispredict_penalty } else { self.t.taken_redirect };
        (self.t.alu + penalty) as u64
    }

    /// Cycles of one event. Region marks cost nothing.
    pub fn event(&mut self, e: &TraceEvent) -> u64 {
        let t = &self.t;
        self.tallies.instructions += e.instructions();
        match *e {
            TraceEvent::Alu { count } => count as u64 * t.alu as u64,
            TraceEvent::Load { addr, bytes, region } => {
                self.tallies.loads += 1;
                self.data(addr, bytes, self.placement(region), AccessKind::Load)
            }
            TraceEvent::Store { addr, bytes, region } => {
                self.tallies.stores += 1;
                self.data(addr, bytes, self.placement(region), AccessKind::Store)
            }
            TraceEvent::Mul => {
                self.tallies.muls += 1;
                match self.cfg.multiplier {
                    Multiplier::Iterative => t.mul_iterative as u64,
                    Multiplier::SingleCycle => t.mul_single as u64,
                }
            }
            TraceEvent::Div => {
                self.tallies.divs += 1;
                match self.cfg.divider {
                    Divider::Iterative => t.div_iterative as u64,
                    Divider::None => t.div_software as u64,
                }
            }
            TraceEvent::Shift { amount } => {
                let extra = match self.cfg.shifter {
                    Shifter::Iterative => amount.min(31) as u64,
                    Shifter::Barrel => 0,
                };
                t.alu as u64 + extra
            }
            TraceEvent::Branch { pc, target, taken } => {
                self.tallies.branches += 1;
                let before = self.predictor.mispredicts;
                let penalty = self.predictor.predict(pc, taken, target, t) as u64;
                self.tallies.mispredicts += self.predictor.mispredicts - before;
                t.alu as u64 + penalty
            }
            TraceEvent::CfuIssue { extra_latency, macs, .. } => {
                self.tallies.cfu_issues += 1;
                self.tallies.cfu_macs += macs as u64;
                (t.cfu_fixed_issue + extra_latency) as u64
            }
            TraceEvent::Mark { .. } => 0,
        }
    }

    /// Cost of refilling one instruction line from where code lives.
    fn line_fill(&self, from: Placement) -> u64 {
        let words = (self.cfg.line_bytes / 4) as u64;
        let per_word = match from {
            Placement::Flash => self.flash_word(),
            Placement::Sram => self.t.sram_latency as u64,
        };
        self.t.icache_miss_penalty as u64 + words * per_word
    }

    /// Instruction fetch at `pc` through the simulated I-cache.
    pub fn fetch(&mut self, pc: u32, from: Placement) -> u64 {
        match self.icache.as_mut().map(|c| c.access(pc, AccessKind::Fetch).hit) {
            Some(true) => 0,
            Some(false) => {
                self.tallies.icache_misses += 1;
                self.line_fill(from)
            }
            None => {
                self.tallies.icache_misses += 1;
                let per_word = match from {
                    Placement::Flash => self.flash_word(),
                    Placement::Sram => self.t.sram_latency as u64,
                };
                self.t.icache_miss_penalty as u64 + per_word
            }
        }
    }

    /// Analytical instruction-side cost of running `dynamic` instructions
    /// from `code_size` bytes of code: one cold miss per line, plus capacity
    /// misses in proportion to how much of the code does not fit.
    pub fn analytic_fetch(&mut self, code_size: u64, dynamic: u64) -> u64 {
        let line = self.cfg.line_bytes as u64;
        let per_line = line / 4;
        let cache = self.cfg.icache_bytes as u64;
        let mut misses = code_size.div_ceil(line);
        if code_size > cache {
            misses += ((dynamic as u128 * (code_size - cache) as u128) / (per_line as u128 * code_size as u128)) as u64;
        }
        self.tallies.icache_misses += misses;
        misses * self.line_fill(self.cfg.code_region)
    }
}

/// Attributes cycles to the innermost open region path.
#[derive(Debug, Default)]
pub(crate) struct Attribution {
    stack: Vec<(u16, usize)>,
    index: HashMap<String, usize>,
    pub records: Vec<RegionRecord>,
}

impl Attribution {
    pub fn mark(&mut self, i: usize, region: u16, begin: bool, names: &[String]) -> Result<(), ProfileError> {
        let name = &names[region as usize];
        if begin {
            let path = match self.stack.last() {
                Some(&(_, parent)) => format!("{}/{name}", self.records[parent].name),
                None => name.clone(),
            };
            let idx = *self.index.entry(path.clone()).or_insert_with(|| {
                self.records.push(RegionRecord { name: path, invocations: 0, cycles: 0, percent: 0.0 });
                self.records.len() - 1
            });
            self.records[idx].invocations += 1;
            self.stack.push((region, idx));
            return Ok(());
        }
        match self.stack.last() {
            Some(&(open, _)) if open == region => {
                self.stack.pop();
                Ok(())
            }
            Some(&(open, _)) => {
                Err(ProfileError::Mismatched { index: i, open: names[open as usize].clone(), found: name.clone() })
            }
            None => Err(ProfileError::Unopened { index: i, found: name.clone() }),
        }
    }

    pub fn charge(&mut self, cycles: u64) {
        if let Some(&(_, idx)) = self.stack.last() {
            self.records[idx].cycles += cycles;
        }
    }

    pub fn close(&self, names: &[String]) -> Result<(), ProfileError> {
        match self.stack.last() {
            Some(&(open, _)) => Err(ProfileError::Unclosed(names[open as usize].clone())),
            None => Ok(()),
        }
    }
}

/// Costs a kernel trace: every event through the caches, predictor and
/// latency tables, plus the analytical instruction-side model.
pub fn cost_trace(
    cfg: &CpuConfig,
    timing: &TimingParams,
    trace: &TraceStream,
    meta: &KernelMeta,
) -> Result<CycleReport, ProfileError> {
    let mut engine = Engine::new(cfg, timing);
    let mut attr = Attribution::default();
    let mut total = 0u64;
    for (i, e) in trace.events.iter().enumerate() {
        if let TraceEvent::Mark { region, begin } = *e {
            attr.mark(i, region, begin, trace.names())?;
            continue;
        }
        let c = engine.event(e);
        attr.charge(c);
        total += c;
    }
    attr.close(trace.names())?;
    let fetch = if trace.events.is_empty() {
        0
    } else {
        engine.analytic_fetch(meta.code_size_bytes as u64, meta.dynamic_instructions)
    };
    let mut report = CycleReport {
        total_cycles: total + fetch,
        fetch_cycles: fetch,
        regions: attr.records,
        tallies: engine.tallies,
    };
    report.finish();
    Ok(report)
}
