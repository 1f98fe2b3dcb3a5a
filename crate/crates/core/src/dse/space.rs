use super::DseError;
use crate::kv;
use crate::machine::CpuConfig;

/// Named axes over `CpuConfig` fields, each with a finite list of values.
/// Fields no axis mentions keep their value from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub base: CpuConfig,
    axes: Vec<(String, Vec<String>)>,
}

impl SearchSpace {
    pub fn new(base: CpuConfig, axes: Vec<(String, Vec<String>)>) -> Result<Self, DseError> {
        for (i, (name, values)) in axes.iter().enumerate() {
            if axes[..i].iter().any(|(n, _)| n == name) {
                return Err(DseError::DuplicateAxis(name.clone()));
            }
            if !CpuConfig::FIELDS.contains(&name.as_str()) {
                return Err(DseError::UnknownAxis(name.clone()));
            }
            for v in values {
                base.clone().set(name, v)?;
            }
        }
        Ok(Self { base, axes })
    }

    /// Reads `axis = v1, v2, ...` lines.
    pub fn parse(text: &str, base: CpuConfig) -> Result<Self, DseError> {
        let mut axes = Vec::new();
        for e in kv::parse(text)? {
            if !e.section.is_empty() {
                return Err(DseError::Syntax { line: e.line, message: format!("unexpected section `[{}]`", e.section) });
            }
            let values: Vec<String> =
                e.value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
            axes.push((e.key, values));
        }
        Self::new(base, axes)
    }

    pub fn axes(&self) -> &[(String, Vec<String>)] {
        &self.axes
    }

    pub fn axis_names(&self) -> impl Iterator<Item = &str> {
        self.axes.iter().map(|(n, _)| n.as_str())
    }

    /// Product of the axis sizes, saturating at `u64::MAX`.
    pub fn cardinality(&self) -> u64 {
        self.axes.iter().fold(1u64, |acc, (_, v)| acc.saturating_mul(v.len() as u64))
    }

    /// Per-axis value indices of point `index`, the first axis varying
    /// slowest.
    pub fn genome(&self, mut index: u64) -> Vec<usize> {
        let mut g = vec![0; self.axes.len()];
        for (slot, (_, values)) in g.iter_mut().zip(&self.axes).rev() {
            let n = values.len() as u64;
            *slot = (index % n) as usize;
            index /= n;
        }
        g
    }

    pub fn config(&self, genome: &[usize]) -> CpuConfig {
        let mut cfg = self.base.clone();
        for ((name, values), &i) in self.axes.iter().zip(genome) {
            cfg.set(name, &values[i]).expect("axis values are checked on construction");
        }
        cfg
    }

    pub fn values(&self, genome: &[usize]) -> Vec<&str> {
        self.axes.iter().zip(genome).map(|((_, v), &i)| v[i].as_str()).collect()
    }

    /// Every point in lexicographic order, refusing spaces above `cap`.
    pub fn enumerate(&self, cap: u64) -> Result<Vec<Vec<usize>>, DseError> {
        let n = self.cardinality();
        if n > cap {
            return Err(DseError::CapExceeded { cardinality: n, cap });
        }
        Ok((0..n).map(|i| self.genome(i)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{Multiplier, PredictorKind};

    #[test]
    fn product_order_is_lexicographic() {
        let s = SearchSpace::parse("multiplier = iterative, single_cycle\nicache_bytes = 1024, 2048, 4096\n", CpuConfig::default())
            .unwrap();
        assert_eq!(s.cardinality(), 6);
        let all = s.enumerate(6).unwrap();
        assert_eq!(all, [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]);
        let c = s.config(&all[4]);
        assert_eq!((c.multiplier, c.icache_bytes), (Multiplier::SingleCycle, 2048));
        assert_eq!(c.predictor, PredictorKind::Static);
    }

    #[test]
    fn no_axes_is_the_base_config() {
        let s = SearchSpace::parse("# nothing\n", CpuConfig::default()).unwrap();
        assert_eq!(s.cardinality(), 1);
        assert_eq!(s.config(&s.genome(0)), CpuConfig::default());
    }

    #[test]
    fn rejects_bad_axes() {
        let base = CpuConfig::default;
        assert!(matches!(SearchSpace::parse("flux = 1\n", base()), Err(DseError::UnknownAxis(_))));
        assert!(matches!(SearchSpace::parse("assoc = 1\nassoc = 2\n", base()), Err(DseError::DuplicateAxis(_))));
        assert!(matches!(SearchSpace::parse("predictor = psychic\n", base()), Err(DseError::Config(_))));
        assert!(SearchSpace::parse("[x]\nassoc = 1\n", base()).is_err());
        assert!(matches!(SearchSpace::parse("assoc = 1, 2\n", base()).unwrap().enumerate(1), Err(DseError::CapExceeded { .. })));
    }

    #[test]
    fn empty_axis_empties_the_space() {
        let s = SearchSpace::parse("assoc =\n", CpuConfig::default()).unwrap();
        assert_eq!(s.cardinality(), 0);
    }
}
