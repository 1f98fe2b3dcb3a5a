use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cfus::CfuKind;
use crate::kv::{self, Entry, KvError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Syntax(#[from] KvError),
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: unknown section `[{section}]`")]
    UnknownSection { line: usize, section: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
}

impl ConfigError {
    fn value(key: &str, value: &str, reason: impl Into<String>) -> Self {
        Self::Value { key: key.into(), value: value.into(), reason: reason.into() }
    }
}

macro_rules! choice {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.pad(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!("expected one of {}", [$($text),+].join(", "))),
                }
            }
        }
    };
}

choice!(PredictorKind { None => "none", Static => "static", Dynamic => "dynamic", DynamicTarget => "dynamic_target" });
choice!(Multiplier { Iterative => "iterative", SingleCycle => "single_cycle" });
choice!(Divider { None => "none", Iterative => "iterative" });
choice!(Shifter { Iterative => "iterative", Barrel => "barrel" });
choice!(FlashInterface { Spi => "spi", QuadSpi => "quad_spi" });
choice!(
    /// Where code or weights live.
    Placement { Flash => "flash", Sram => "sram" }
);

/// Microarchitecture of the simulated core.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CpuConfig {
    pub icache_bytes: u32,
    pub dcache_bytes: u32,
    pub l2_bytes: u32,
    pub line_bytes: u32,
    pub assoc: u32,
    pub predictor: PredictorKind,
    pub multiplier: Multiplier,
    pub divider: Divider,
    pub shifter: Shifter,
    pub flash: FlashInterface,
    pub code_region: Placement,
    pub weights_region: Placement,
    pub cfu: CfuKind,
    pub board: String,
}

impl Default for CpuConfig {
    fn default() -> Self {
        Self {
            icache_bytes: 4096,
            dcache_bytes: 4096,
            l2_bytes: 0,
            line_bytes: 32,
            assoc: 1,
            predictor: PredictorKind::Static,
            multiplier: Multiplier::SingleCycle,
            divider: Divider::Iterative,
            shifter: Shifter::Barrel,
            flash: FlashInterface::QuadSpi,
            code_region: Placement::Sram,
            weights_region: Placement::Sram,
            cfu: CfuKind::None,
            board: "arty-a7-35t".into(),
        }
    }
}

fn parse_choice<T: FromStr<Err = String>>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|e| ConfigError::value(key, value, e))
}

fn parse_int(key: &str, value: &str) -> Result<u32, ConfigError> {
    let v = value.replace('_', "");
    let parsed = match v.strip_prefix("0x") {
        Some(hex) => u32::from_str_radix(hex, 16).ok(),
        None => v.parse().ok(),
    };
    parsed.ok_or_else(|| ConfigError::value(key, value, "expected an unsigned integer"))
}

impl CpuConfig {
    pub const FIELDS: &'static [&'static str] = &[
        "icache_bytes",
        "dcache_bytes",
        "l2_bytes",
        "line_bytes",
        "assoc",
        "predictor",
        "multiplier",
        "divider",
        "shifter",
        "flash",
        "code_region",
        "weights_region",
        "cfu",
        "board",
    ];

    /// Sets one field from its textual form. Only checks the value itself;
    /// cross-field rules are enforced by [`CpuConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "icache_bytes" => self.icache_bytes = parse_int(key, value)?,
            "dcache_bytes" => self.dcache_bytes = parse_int(key, value)?,
            "l2_bytes" => self.l2_bytes = parse_int(key, value)?,
            "line_bytes" => self.line_bytes = parse_int(key, value)?,
            "assoc" => self.assoc = parse_int(key, value)?,
            "predictor" => self.predictor = parse_choice(key, value)?,
            "multiplier" => self.multiplier = parse_choice(key, value)?,
            "divider" => self.divider = parse_choice(key, value)?,
            "shifter" => self.shifter = parse_choice(key, value)?,
            "flash" => self.flash = parse_choice(key, value)?,
            "code_region" => self.code_region = parse_choice(key, value)?,
            "weights_region" => self.weights_region = parse_choice(key, value)?,
            "cfu" => {
                self.cfu = value.parse().map_err(|_| ConfigError::value(key, value, "unknown CFU"))?
            }
            "board" => {
                if value.is_empty() {
                    return Err(ConfigError::value(key, value, "empty board name"));
                }
                self.board = value.to_string()
            }
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "icache_bytes" => self.icache_bytes.to_string(),
            "dcache_bytes" => self.dcache_bytes.to_string(),
            "l2_bytes" => self.l2_bytes.to_string(),
            "line_bytes" => self.line_bytes.to_string(),
            "assoc" => self.assoc.to_string(),
            "predictor" => self.predictor.to_string(),
            "multiplier" => self.multiplier.to_string(),
            "divider" => self.divider.to_string(),
            "shifter" => self.shifter.to_string(),
            "flash" => self.flash.to_string(),
            "code_region" => self.code_region.to_string(),
            "weights_region" => self.weights_region.to_string(),
            "cfu" => self.cfu.to_string(),
            "board" => self.board.clone(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if ![16, 32, 64].contains(&self.line_bytes) {
            return Err(ConfigError::value("line_bytes", &self.line_bytes.to_string(), "must be 16, 32 or 64"));
        }
        if self.assoc == 0 {
            return Err(ConfigError::value("assoc", "0", "must be at least 1"));
        }
        for (key, bytes) in [("icache_bytes", self.icache_bytes), ("dcache_bytes", self.dcache_bytes), ("l2_bytes", self.l2_bytes)] {
            if bytes == 0 {
                continue;
            }
            let v = bytes.to_string();
            if !bytes.is_power_of_two() {
                return Err(ConfigError::value(key, &v, "must be 0 or a power of two"));
            }
            let lines = bytes / self.line_bytes;
            if lines == 0 || !lines.is_multiple_of(self.assoc) {
                return Err(ConfigError::value(key, &v, format!("{lines} lines cannot be split into {} ways", self.assoc)));
            }
        }
        Ok(())
    }

    /// Parses a config file. Keys not present keep their default values;
    /// a `[timing]` section overrides timing parameters.
    pub fn parse(text: &str) -> Result<(CpuConfig, TimingParams), ConfigError> {
        let mut cfg = CpuConfig::default();
        let mut timing = TimingParams::default();
        for e in kv::parse(text)? {
            match e.section.as_str() {
                "" => cfg.set(&e.key, &e.value).map_err(|err| at_line(err, &e))?,
                "timing" => timing.set_entry(&e)?,
                other => return Err(ConfigError::UnknownSection { line: e.line, section: other.into() }),
            }
        }
        cfg.validate()?;
        Ok((cfg, timing))
    }

    pub fn to_text(&self) -> String {
        Self::FIELDS.iter().map(|k| format!("{k} = {}\n", self.get(k).unwrap())).collect()
    }
}

fn at_line(err: ConfigError, e: &Entry) -> ConfigError {
    match err {
        ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: e.line, key },
        other => other,
    }
}

/// Cycle costs the timing engine charges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimingParams {
    pub alu: u32,
    pub load_hit: u32,
    pub store_hit: u32,
    pub dcache_miss_penalty: u32,
    pub icache_miss_penalty: u32,
    pub l2_hit_penalty: u32,
    pub sram_latency: u32,
    pub flash_word_cycles_spi: u32,
    pub flash_word_cycles_quad: u32,
    pub mul_iterative: u32,
    pub mul_single: u32,
    pub div_iterative: u32,
    /// Division emulated in software when the core has no divider.
    pub div_software: u32,
    pub mispredict_penalty: u32,
    /// Correctly predicted taken branch whose target is only known at decode.
    pub taken_redirect: u32,
    pub cfu_fixed_issue: u32,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            alu: 1,
            load_hit: 1,
            store_hit: 1,
            dcache_miss_penalty: 10,
            icache_miss_penalty: 8,
            l2_hit_penalty: 6,
            sram_latency: 1,
            flash_word_cycles_spi: 64,
            flash_word_cycles_quad: 16,
            mul_iterative: 30,
            mul_single: 1,
            div_iterative: 34,
            div_software: 300,
            mispredict_penalty: 3,
            taken_redirect: 1,
            cfu_fixed_issue: 1,
        }
    }
}

impl TimingParams {
    pub const FIELDS: &'static [&'static str] = &[
        "alu",
        "load_hit",
        "store_hit",
        "dcache_miss_penalty",
        "icache_miss_penalty",
        "l2_hit_penalty",
        "sram_latency",
        "flash_word_cycles_spi",
        "flash_word_cycles_quad",
        "mul_iterative",
        "mul_single",
        "div_iterative",
        "div_software",
        "mispredict_penalty",
        "taken_redirect",
        "cfu_fixed_issue",
    ];

    fn field(&mut self, key: &str) -> Option<&mut u32> {
        Some(match key {
            "alu" => &mut self.alu,
            "load_hit" => &mut self.load_hit,
            "store_hit" => &mut self.store_hit,
            "dcache_miss_penalty" => &mut self.dcache_miss_penalty,
            "icache_miss_penalty" => &mut self.icache_miss_penalty,
            "l2_hit_penalty" => &mut self.l2_hit_penalty,
            "sram_latency" => &mut self.sram_latency,
            "flash_word_cycles_spi" => &mut self.flash_word_cycles_spi,
            "flash_word_cycles_quad" => &mut self.flash_word_cycles_quad,
            "mul_iterative" => &mut self.mul_iterative,
            "mul_single" => &mut self.mul_single,
            "div_iterative" => &mut self.div_iterative,
            "div_software" => &mut self.div_software,
            "mispredict_penalty" => &mut self.mispredict_penalty,
            "taken_redirect" => &mut self.taken_redirect,
            "cfu_fixed_issue" => &mut self.cfu_fixed_issue,
            _ => return None,
        })
    }

    fn set_entry(&mut self, e: &Entry) -> Result<(), ConfigError> {
        let v = kv::parse_u64(e)?;
        let v = u32::try_from(v).map_err(|_| ConfigError::value(&e.key, &e.value, "too large"))?;
        let slot = self.field(&e.key).ok_or_else(|| ConfigError::UnknownKey { line: e.line, key: e.key.clone() })?;
        *slot = v;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mul_iterative <= self.mul_single {
            return Err(ConfigError::value("mul_iterative", &self.mul_iterative.to_string(), "must exceed mul_single"));
        }
        if self.flash_word_cycles_spi <= self.flash_word_cycles_quad {
            return Err(ConfigError::value(
                "flash_word_cycles_spi",
                &self.flash_word_cycles_spi.to_string(),
                "must exceed flash_word_cycles_quad",
            ));
        }
        Ok(())
    }

    /// Parses a standalone timing file: top-level keys or a `[timing]`
    /// section.
    pub fn parse(text: &str) -> Result<TimingParams, ConfigError> {
        let mut t = TimingParams::default();
        for e in kv::parse(text)? {
            if !e.section.is_empty() && e.section != "timing" {
                return Err(ConfigError::UnknownSection { line: e.line, section: e.section });
            }
            t.set_entry(&e)?;
        }
        t.validate()?;
        Ok(t)
    }

    pub fn flash_word_cycles(&self, flash: FlashInterface) -> u32 {
        match flash {
            FlashInterface::Spi => self.flash_word_cycles_spi,
            FlashInterface::QuadSpi => self.flash_word_cycles_quad,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_timing_section() {
        let text = "predictor = dynamic_target\nicache_bytes = 8192\ncfu = cfu2\n[timing]\nmispredict_penalty = 5\n";
        let (cfg, t) = CpuConfig::parse(text).unwrap();
        assert_eq!(cfg.predictor, PredictorKind::DynamicTarget);
        assert_eq!(cfg.icache_bytes, 8192);
        assert_eq!(cfg.cfu, CfuKind::Cfu2);
        assert_eq!(t.mispredict_penalty, 5);
        assert_eq!(t.mul_iterative, 30);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert_eq!(
            CpuConfig::parse("a = 1\nwidgets = 3\n").unwrap_err(),
            ConfigError::UnknownKey { line: 1, key: "a".into() }
        );
        assert!(matches!(CpuConfig::parse("[timing]\nwarp = 1\n"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(CpuConfig::parse("[fpga]\nx = 1\n"), Err(ConfigError::UnknownSection { .. })));
    }

    #[test]
    fn geometry_rules() {
        assert!(CpuConfig::parse("icache_bytes = 3000\n").is_err());
        assert!(CpuConfig::parse("line_bytes = 8\n").is_err());
        assert!(CpuConfig::parse("dcache_bytes = 64\nassoc = 4\n").is_err());
        assert!(CpuConfig::parse("dcache_bytes = 0\nicache_bytes = 0\nassoc = 3\n").is_ok());
    }

    #[test]
    fn predictor_values() {
        let names: Vec<_> = PredictorKind::ALL.iter().map(|p| p.as_str()).collect();
        assert_eq!(names, ["none", "static", "dynamic", "dynamic_target"]);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = CpuConfig::default();
        cfg.set("multiplier", "iterative").unwrap();
        cfg.set("weights_region", "flash").unwrap();
        assert_eq!(CpuConfig::parse(&cfg.to_text()).unwrap().0, cfg);
    }
}
