//! FPGA resource estimation and board feasibility.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::cfus::{self, CfuKind, ResourceCost};
use crate::kv::{self, KvError};
use crate::machine::{CpuConfig, Divider, Multiplier, Placement, PredictorKind, Shifter};

pub const BOARD_CATALOG: &str = include_str!("../../data/boards.catalog");
pub const CALIBRATION: &str = include_str!("../../data/costs.calibration");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error(transparent)]
    Syntax(#[from] KvError),
    #[error("unknown board `{0}`")]
    UnknownBoard(String),
    #[error("board `{board}` is missing `{key}`")]
    MissingField { board: String, key: String },
    #[error("board `{board}`: `{key}` must be positive")]
    NonPositive { board: String, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Board {
    pub name: String,
    pub luts: u64,
    pub dsps: u64,
    pub bram_bytes: u64,
    pub sram_bytes: u64,
    pub rom_bytes: u64,
    pub clk_mhz: u64,
}

/// Boards by name, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub boards: Vec<Board>,
}

const BOARD_KEYS: [&str; 6] = ["luts", "dsps", "bram_bytes", "sram_bytes", "rom_bytes", "clk_mhz"];

impl Catalog {
    pub fn parse(text: &str) -> Result<Self, CostError> {
        let mut order: Vec<String> = Vec::new();
        let mut fields: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for e in kv::parse(text)? {
            if e.section.is_empty() || !BOARD_KEYS.contains(&e.key.as_str()) {
                return Err(CostError::UnknownKey { line: e.line, key: e.key });
            }
            if !fields.contains_key(&e.section) {
                order.push(e.section.clone());
            }
            fields.entry(e.section.clone()).or_default().insert(e.key.clone(), kv::parse_u64(&e)?);
        }
        let boards = order
            .into_iter()
            .map(|name| {
                let f = &fields[&name];
                let get = |key: &str| -> Result<u64, CostError> {
                    let v = *f.get(key).ok_or_else(|| CostError::MissingField { board: name.clone(), key: key.into() })?;
                    if v == 0 {
                        return Err(CostError::NonPositive { board: name.clone(), key: key.into() });
                    }
                    Ok(v)
                };
                Ok(Board {
                    luts: get("luts")?,
                    dsps: get("dsps")?,
                    bram_bytes: get("bram_bytes")?,
                    sram_bytes: get("sram_bytes")?,
                    rom_bytes: get("rom_bytes")?,
                    clk_mhz: get("clk_mhz")?,
                    name,
                })
            })
            .collect::<Result<_, CostError>>()?;
        Ok(Self { boards })
    }

    pub fn builtin() -> Self {
        Self::parse(BOARD_CATALOG).expect("bundled catalog parses")
    }

    pub fn board(&self, name: &str) -> Result<&Board, CostError> {
        self.boards.iter().find(|b| b.name == name).ok_or_else(|| CostError::UnknownBoard(name.into()))
    }
}

/// Per-feature resource increments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calibration {
    pub base_luts: u64,
    pub predictor_static_luts: u64,
    pub predictor_dynamic_luts: u64,
    pub predictor_dynamic_target_luts: u64,
    pub shifter_barrel_luts: u64,
    pub divider_iterative_luts: u64,
    pub multiplier_iterative_luts: u64,
    pub multiplier_single_cycle_dsps: u64,
    pub cache_tag_overhead_permille: u64,
    pub cfu: BTreeMap<CfuKind, ResourceCost>,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            base_luts: 1500,
            predictor_static_luts: 50,
            predictor_dynamic_luts: 200,
            predictor_dynamic_target_luts: 400,
            shifter_barrel_luts: 150,
            divider_iterative_luts: 120,
            multiplier_iterative_luts: 150,
            multiplier_single_cycle_dsps: 4,
            cache_tag_overhead_permille: 125,
            cfu: CfuKind::ALL.iter().map(|&k| (k, cfus::resource_cost(k))).collect(),
        }
    }
}

impl Calibration {
    /// Overrides the defaults with a calibration file.
    pub fn parse(text: &str) -> Result<Self, CostError> {
        let mut c = Self::default();
        for e in kv::parse(text)? {
            let v = kv::parse_u64(&e)?;
            let unknown = || CostError::UnknownKey { line: e.line, key: e.key.clone() };
            if e.section == "cpu" {
                let slot = match e.key.as_str() {
                    "base_luts" => &mut c.base_luts,
                    "predictor_static_luts" => &mut c.predictor_static_luts,
                    "predictor_dynamic_luts" => &mut c.predictor_dynamic_luts,
                    "predictor_dynamic_target_luts" => &mut c.predictor_dynamic_target_luts,
                    "shifter_barrel_luts" => &mut c.shifter_barrel_luts,
                    "divider_iterative_luts" => &mut c.divider_iterative_luts,
                    "multiplier_iterative_luts" => &mut c.multiplier_iterative_luts,
                    "multiplier_single_cycle_dsps" => &mut c.multiplier_single_cycle_dsps,
                    "cache_tag_overhead_permille" => &mut c.cache_tag_overhead_permille,
                    _ => return Err(unknown()),
                };
                *slot = v;
            } else if let Some(kind) = e.section.strip_prefix("cfu.") {
                let kind: CfuKind = kind.parse().map_err(|_| unknown())?;
                let cost = c.cfu.entry(kind).or_default();
                let v = u32::try_from(v).map_err(|_| unknown())?;
                match e.key.as_str() {
                    "luts" => cost.luts = v,
                    "dsps" => cost.dsps = v,
                    "bram_bytes" => cost.bram_bytes = v,
                    _ => return Err(unknown()),
                }
            } else {
                return Err(unknown());
            }
        }
        Ok(c)
    }

    pub fn builtin() -> Self {
        Self::parse(CALIBRATION).expect("bundled calibration parses")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub feature: String,
    pub luts: u64,
    pub dsps: u64,
    pub bram_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResourceEstimate {
    pub luts: u64,
    pub dsps: u64,
    pub bram_bytes: u64,
    pub items: Vec<Item>,
}

impl ResourceEstimate {
    fn add(&mut self, feature: impl Into<String>, luts: u64, dsps: u64, bram_bytes: u64) {
        self.luts += luts;
        self.dsps += dsps;
        self.bram_bytes += bram_bytes;
        self.items.push(Item { feature: feature.into(), luts, dsps, bram_bytes });
    }

    pub fn item(&self, feature: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.feature == feature)
    }
}

impl fmt::Display for ResourceEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>8} {:>6} {:>10}", "feature", "luts", "dsps", "bram")?;
        for i in &self.items {
            writeln!(f, "{:<28} {:>8} {:>6} {:>10}", i.feature, i.luts, i.dsps, i.bram_bytes)?;
        }
        write!(f, "{:<28} {:>8} {:>6} {:>10}", "total", self.luts, self.dsps, self.bram_bytes)
    }
}

/// Additive resource model of a configuration.
pub fn estimate(cfg: &CpuConfig, cal: &Calibration) -> ResourceEstimate {
    let mut est = ResourceEstimate::default();
    est.add("cpu", cal.base_luts, 0, 0);
    let predictor = match cfg.predictor {
        PredictorKind::None => None,
        PredictorKind::Static => Some(cal.predictor_static_luts),
        PredictorKind::Dynamic => Some(cal.predictor_dynamic_luts),
        PredictorKind::DynamicTarget => Some(cal.predictor_dynamic_target_luts),
    };
    if let Some(l) = predictor {
        est.add(format!("predictor {}", cfg.predictor), l, 0, 0);
    }
    if cfg.shifter == Shifter::Barrel {
        est.add("shifter barrel", cal.shifter_barrel_luts, 0, 0);
    }
    if cfg.divider == Divider::Iterative {
        est.add("divider iterative", cal.divider_iterative_luts, 0, 0);
    }
    match cfg.multiplier {
        Multiplier::Iterative => est.add("multiplier iterative", cal.multiplier_iterative_luts, 0, 0),
        Multiplier::SingleCycle => est.add("multiplier single_cycle", 0, cal.multiplier_single_cycle_dsps, 0),
    }
    for (name, bytes) in [("icache", cfg.icache_bytes), ("dcache", cfg.dcache_bytes), ("l2", cfg.l2_bytes)] {
        if bytes > 0 {
            let b = bytes as u64;
            est.add(name, 0, 0, b + (b * cal.cache_tag_overhead_permille).div_ceil(1000));
        }
    }
    if cfg.cfu != CfuKind::None {
        let c = cal.cfu.get(&cfg.cfu).copied().unwrap_or_default();
        est.add(format!("cfu {}", cfg.cfu), c.luts as u64, c.dsps as u64, c.bram_bytes as u64);
    }
    est
}

/// Memory a workload places on the board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Footprint {
    pub code_bytes: u64,
    pub weights_bytes: u64,
    pub arena_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub resource: &'static str,
    pub used: u64,
    pub available: u64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} > {}", self.resource, self.used, self.available)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Feasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("feasible");
        }
        let v: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "infeasible: {}", v.join(", "))
    }
}

/// Checks an estimate, and optionally a workload placement, against a board.
pub fn feasible(est: &ResourceEstimate, board: &Board, placement: Option<(&CpuConfig, Footprint)>) -> Feasibility {
    let mut violations = Vec::new();
    let mut check = |resource, used, available| {
        if used > available {
            violations.push(Violation { resource, used, available });
        }
    };
    check("luts", est.luts, board.luts);
    check("dsps", est.dsps, board.dsps);
    check("bram_bytes", est.bram_bytes, board.bram_bytes);
    if let Some((cfg, fp)) = placement {
        let in_sram = |p: Placement, bytes: u64| if p == Placement::Sram { bytes } else { 0 };
        let sram = fp.arena_bytes + in_sram(cfg.code_region, fp.code_bytes) + in_sram(cfg.weights_region, fp.weights_bytes);
        let rom = fp.code_bytes + fp.weights_bytes - in_sram(cfg.code_region, fp.code_bytes) - in_sram(cfg.weights_region, fp.weights_bytes);
        check("sram_bytes", sram, board.sram_bytes);
        check("rom_bytes", rom, board.rom_bytes);
    }
    Feasibility { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fomu(mut f: impl FnMut(&mut CpuConfig)) -> (ResourceEstimate, Feasibility) {
        let mut cfg = CpuConfig { board: "fomu".into(), icache_bytes: 0, dcache_bytes: 0, ..Default::default() };
        f(&mut cfg);
        let est = estimate(&cfg, &Calibration::builtin());
        let cat = Catalog::builtin();
        let verdict = feasible(&est, cat.board(&cfg.board).unwrap(), None);
        (est, verdict)
    }

    #[test]
    fn catalog_rows() {
        let cat = Catalog::builtin();
        assert_eq!(cat.boards.len(), 6);
        let f = cat.board("fomu").unwrap();
        assert_eq!((f.luts, f.dsps, f.sram_bytes, f.rom_bytes, f.clk_mhz), (5280, 8, 131072, 2 << 20, 12));
        assert_eq!(cat.board("arty-a7-35t").unwrap().luts, 33280);
        assert!(matches!(cat.board("nope"), Err(CostError::UnknownBoard(_))));
    }

    #[test]
    fn bundled_calibration_matches_defaults() {
        assert_eq!(Calibration::builtin(), Calibration::default());
    }

    #[test]
    fn fomu_dsp_budget() {
        let (est, v) = fomu(|c| {
            c.multiplier = Multiplier::SingleCycle;
            c.cfu = CfuKind::Cfu2;
        });
        assert_eq!(est.dsps, 8);
        assert_eq!(est.item("cfu cfu2").unwrap().dsps, 4);
        assert!(v.is_feasible());
        let (est, v) = fomu(|c| {
            c.multiplier = Multiplier::SingleCycle;
            c.cfu = CfuKind::Cfu1;
        });
        assert_eq!(est.dsps, 12);
        assert!(v.violations.iter().any(|x| x.to_string() == "dsps 12 > 8"));
    }

    #[test]
    fn itemization_sums() {
        let cfg = CpuConfig { predictor: PredictorKind::DynamicTarget, cfu: CfuKind::Cfu1, l2_bytes: 8192, ..Default::default() };
        let est = estimate(&cfg, &Calibration::builtin());
        assert_eq!(est.luts, est.items.iter().map(|i| i.luts).sum::<u64>());
        assert_eq!(est.dsps, est.items.iter().map(|i| i.dsps).sum::<u64>());
        assert_eq!(est.bram_bytes, est.items.iter().map(|i| i.bram_bytes).sum::<u64>());
        assert_eq!(est.item("icache").unwrap().bram_bytes, 4608);
        assert!(est.item("cfu none").is_none());
    }

    #[test]
    fn no_cfu_contributes_nothing() {
        let (est, v) = fomu(|c| {
            c.predictor = PredictorKind::None;
            c.shifter = Shifter::Iterative;
            c.divider = Divider::None;
            c.multiplier = Multiplier::Iterative;
        });
        assert!(est.items.iter().all(|i| !i.feature.starts_with("cfu")));
        assert!(v.is_feasible());
    }

    #[test]
    fn placement_counts_sram() {
        let cfg = CpuConfig { board: "fomu".into(), ..Default::default() };
        let est = ResourceEstimate::default();
        let board = Catalog::builtin().board("fomu").unwrap().clone();
        let fp = Footprint { code_bytes: 100_000, weights_bytes: 40_000, arena_bytes: 10_000 };
        let v = feasible(&est, &board, Some((&cfg, fp)));
        assert_eq!(v.to_string(), "infeasible: sram_bytes 150000 > 131072");
        let flash = CpuConfig { code_region: Placement::Flash, ..cfg };
        assert!(feasible(&est, &board, Some((&flash, fp))).is_feasible());
    }
}
