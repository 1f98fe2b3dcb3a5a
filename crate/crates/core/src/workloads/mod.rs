//! Workload descriptions: the TMDL parser, seeded weight generation, golden
//! digests and the two bundled layer sequences.

mod tmdl;

use std::path::Path;

use thiserror::Error;

use crate::kernels::{reference_network, KernelError, Layer, QuantizedTensor};
use crate::rng::SplitMix64;

pub use tmdl::parse_workload;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: shape mismatch: {message}")]
    Shape { line: usize, message: String },
    #[error("line {line}: {source}")]
    Kernel { line: usize, source: KernelError },
    #[error("workload `{0}` has no golden digest")]
    MissingGolden(String),
    #[error("bad golden digest `{0}`")]
    BadGolden(String),
    #[error("unknown bundled workload `{0}`")]
    UnknownBundled(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// A parsed, validated layer sequence with its input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub name: String,
    pub layers: Vec<Layer>,
    pub input: QuantizedTensor,
    /// Largest input plus output activation footprint of any layer.
    pub arena_bytes: usize,
    pub golden: Option<u64>,
}

impl WorkloadSpec {
    pub fn reference_output(&self) -> Result<QuantizedTensor, KernelError> {
        reference_network(&self.layers, &self.input)
    }

    /// Filter, bias and quantization table bytes.
    pub fn weight_bytes(&self) -> usize {
        self.layers.iter().map(|l| l.filter.len() + 12 * l.params.bias.len()).sum()
    }

    pub fn macs(&self) -> Result<u64, KernelError> {
        let mut x = self.input.clone();
        let mut total = 0;
        for l in &self.layers {
            total += l.macs(&x)?;
            x = crate::kernels::reference_layer(l, &x)?;
        }
        Ok(total)
    }

    /// Checks `output` against the stored digest.
    pub fn golden_check(&self, output: &[i8]) -> Result<GoldenVerdict, WorkloadError> {
        let expected = self.golden.ok_or_else(|| WorkloadError::MissingGolden(self.name.clone()))?;
        let actual = fnv1a64(output.iter().map(|&b| b as u8));
        if actual == expected {
            return Ok(GoldenVerdict::Pass);
        }
        let first_diff = self.reference_output().ok().and_then(|r| {
            let r = r.data();
            (0..r.len().max(output.len())).find(|&i| r.get(i) != output.get(i))
        });
        Ok(GoldenVerdict::Fail { expected, actual, first_diff })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoldenVerdict {
    Pass,
    /// `first_diff` is the first byte differing from the reference output.
    Fail { expected: u64, actual: u64, first_diff: Option<usize> },
}

/// `n` signed bytes: the low byte of each successive SplitMix64 output.
pub fn prng_i8_stream(seed: u64, n: usize) -> Vec<i8> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| rng.next_i8()).collect()
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn format_golden(digest: u64) -> String {
    format!("{digest:016x}\n")
}

pub fn parse_golden(text: &str) -> Result<u64, WorkloadError> {
    let t = text.trim();
    u64::from_str_radix(t.strip_prefix("0x").unwrap_or(t), 16).map_err(|_| WorkloadError::BadGolden(t.into()))
}

pub const MNV2_SLICE: &str = "mnv2-slice";
pub const KWS_SLICE: &str = "kws-slice";
pub const BUNDLED: &[&str] = &[MNV2_SLICE, KWS_SLICE];

fn bundled_text(name: &str) -> Option<(&'static str, &'static str)> {
    match name {
        MNV2_SLICE => Some((include_str!("../../data/mnv2-slice.tmdl"), include_str!("../../data/mnv2-slice.golden"))),
        KWS_SLICE => Some((include_str!("../../data/kws-slice.tmdl"), include_str!("../../data/kws-slice.golden"))),
        _ => None,
    }
}

/// One of the bundled workloads, with its golden digest.
pub fn bundled(name: &str) -> Result<WorkloadSpec, WorkloadError> {
    let (text, golden) = bundled_text(name).ok_or_else(|| WorkloadError::UnknownBundled(name.into()))?;
    let mut spec = parse_workload(name, text)?;
    spec.golden = Some(parse_golden(golden)?);
    Ok(spec)
}

/// Loads a TMDL file and the `name.golden` file beside it, if present.
/// Bundled workload names are accepted in place of a path.
pub fn load(path: &Path) -> Result<WorkloadSpec, WorkloadError> {
    let io = |e: std::io::Error| WorkloadError::Io { path: path.display().to_string(), message: e.to_string() };
    if !path.exists() {
        if let Some(name) = path.to_str().filter(|n| BUNDLED.contains(n)) {
            return bundled(name);
        }
    }
    let text = std::fs::read_to_string(path).map_err(io)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("workload");
    let mut spec = parse_workload(name, &text)?;
    let golden = path.with_extension("golden");
    if golden.exists() {
        spec.golden = Some(parse_golden(&std::fs::read_to_string(&golden).map_err(io)?)?);
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prng_stream_fixture() {
        assert!(prng_i8_stream(0, 0).is_empty());
        assert_eq!(prng_i8_stream(7, 64), prng_i8_stream(7, 64));
        // seed 0: first output 0xe220a8397b1dcdaf, low byte 0xaf
        assert_eq!(prng_i8_stream(0, 3)[0], -81);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64([]), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(*b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(*b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn bundled_goldens_match_reference() {
        for name in BUNDLED {
            let spec = bundled(name).unwrap();
            let out = spec.reference_output().unwrap();
            assert_eq!(spec.golden_check(out.data()).unwrap(), GoldenVerdict::Pass, "{name}");
            let mut flipped = out.data().to_vec();
            flipped[5] ^= 1;
            assert!(matches!(
                spec.golden_check(&flipped).unwrap(),
                GoldenVerdict::Fail { first_diff: Some(5), .. }
            ));
        }
    }

    #[test]
    fn bundled_layer_counts() {
        assert_eq!(bundled(MNV2_SLICE).unwrap().layers.len(), 4);
        assert_eq!(bundled(KWS_SLICE).unwrap().layers.len(), 9);
    }

    #[test]
    fn missing_golden_is_an_error() {
        let mut spec = bundled(MNV2_SLICE).unwrap();
        spec.golden = None;
        assert!(matches!(spec.golden_check(&[]), Err(WorkloadError::MissingGolden(_))));
    }
}
