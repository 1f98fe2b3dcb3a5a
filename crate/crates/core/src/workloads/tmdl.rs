//! TMDL: a line-oriented text description of a quantized layer sequence.
//!
//! ```text
//! TMDL 1
//! # comment
//! layer conv2d in=8,8,16 out=32 kernel=1,1 stride=1 pad=same in_off=3 out_off=-5 \
//!     act=-128,127 mult=prng:11 shift=list:-7 bias=list:0 weights=prng:12
//! input prng:1
//! ```
//!
//! (A layer is a single line; it is wrapped above for width.) Per-channel
//! lists hold one value per output channel or a single value for all.

use std::collections::BTreeMap;

use super::{prng_i8_stream, WorkloadError, WorkloadSpec};
use crate::kernels::{ConvParams, Layer, LayerKind, Padding, QuantizedTensor};
use crate::rng::SplitMix64;

const LAYER_KEYS: &[&str] =
    &["in", "out", "kernel", "stride", "pad", "in_off", "out_off", "act", "mult", "shift", "bias", "weights"];

fn syntax(line: usize, message: impl Into<String>) -> WorkloadError {
    WorkloadError::Syntax { line, message: message.into() }
}

fn ints<T: std::str::FromStr>(line: usize, key: &str, value: &str, n: usize) -> Result<Vec<T>, WorkloadError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(syntax(line, format!("`{key}` expects {n} comma-separated integers, got `{value}`")));
    }
    parts
        .iter()
        .map(|p| p.parse().map_err(|_| syntax(line, format!("`{key}`: `{p}` is not a valid integer"))))
        .collect()
}

fn hex_bytes(line: usize, hex: &str) -> Result<Vec<i8>, WorkloadError> {
    let digits: Vec<u8> = hex.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
    if !digits.len().is_multiple_of(2) {
        return Err(syntax(line, "hex data has an odd number of digits"));
    }
    digits
        .chunks(2)
        .map(|pair| {
            let s = std::str::from_utf8(pair).unwrap_or("");
            u8::from_str_radix(s, 16).map(|b| b as i8).map_err(|_| syntax(line, format!("bad hex byte `{s}`")))
        })
        .collect()
}

/// Bytes from `prng:SEED` or `hex:...`.
fn byte_source(line: usize, key: &str, value: &str, n: usize) -> Result<Vec<i8>, WorkloadError> {
    let data = if let Some(seed) = value.strip_prefix("prng:") {
        let seed = seed.parse().map_err(|_| syntax(line, format!("`{key}`: bad seed `{seed}`")))?;
        prng_i8_stream(seed, n)
    } else if let Some(hex) = value.strip_prefix("hex:") {
        hex_bytes(line, hex)?
    } else {
        return Err(syntax(line, format!("`{key}` expects prng:SEED or hex:..., got `{value}`")));
    };
    if data.len() != n {
        return Err(WorkloadError::Shape { line, message: format!("`{key}` needs {n} bytes, got {}", data.len()) });
    }
    Ok(data)
}

fn list(line: usize, key: &str, value: &str, n: usize) -> Result<Vec<i32>, WorkloadError> {
    let body = value
        .strip_prefix("list:")
        .ok_or_else(|| syntax(line, format!("`{key}` expects list:..., got `{value}`")))?;
    let count = body.split(',').count();
    let v: Vec<i32> = ints(line, key, body, count)?;
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        len if len == n => Ok(v),
        len => Err(WorkloadError::Shape { line, message: format!("`{key}` has {len} values for {n} channels") }),
    }
}

/// Multipliers in `[2^30, 2^31)` from a seed, or an explicit list.
fn multipliers(line: usize, value: &str, n: usize) -> Result<Vec<i32>, WorkloadError> {
    match value.strip_prefix("prng:") {
        Some(seed) => {
            let seed = seed.parse().map_err(|_| syntax(line, format!("`mult`: bad seed `{seed}`")))?;
            let mut rng = SplitMix64::new(seed);
            Ok((0..n).map(|_| (1 << 30) + (rng.next_u64() >> 34) as i32).collect())
        }
        None => list(line, "mult", value, n),
    }
}

fn parse_layer(line: usize, index: usize, tokens: &[&str]) -> Result<(Layer, (usize, usize, usize)), WorkloadError> {
    let kind = match tokens.first() {
        Some(&"conv2d") => LayerKind::Conv2d,
        Some(&"dwconv2d") => LayerKind::DepthwiseConv2d,
        Some(other) => return Err(syntax(line, format!("unknown layer type `{other}`"))),
        None => return Err(syntax(line, "missing layer type")),
    };
    let mut kv = BTreeMap::new();
    for tok in &tokens[1..] {
        let (k, v) = tok.split_once('=').ok_or_else(|| syntax(line, format!("expected key=value, got `{tok}`")))?;
        if !LAYER_KEYS.contains(&k) {
            return Err(WorkloadError::UnknownKey { line, key: k.into() });
        }
        if kv.insert(k, v).is_some() {
            return Err(syntax(line, format!("duplicate key `{k}`")));
        }
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| syntax(line, format!("missing key `{k}`")));

    let [h, w, c]: [usize; 3] = ints(line, "in", get("in")?, 3)?.try_into().unwrap();
    let [oc]: [usize; 1] = ints(line, "out", get("out")?, 1)?.try_into().unwrap();
    let [kh, kw]: [usize; 2] = ints(line, "kernel", get("kernel")?, 2)?.try_into().unwrap();
    let [stride]: [usize; 1] = ints(line, "stride", get("stride")?, 1)?.try_into().unwrap();
    if stride == 0 {
        return Err(syntax(line, "stride must be ≥ 1"));
    }
    if [h, w, c, oc, kh, kw].contains(&0) {
        return Err(WorkloadError::Shape { line, message: "dimensions must be positive".into() });
    }
    let padding = match get("pad")? {
        "same" => Padding::Same,
        "valid" => Padding::Valid,
        other => return Err(syntax(line, format!("`pad` expects same or valid, got `{other}`"))),
    };
    let [in_off]: [i32; 1] = ints(line, "in_off", get("in_off")?, 1)?.try_into().unwrap();
    let [out_off]: [i32; 1] = ints(line, "out_off", get("out_off")?, 1)?.try_into().unwrap();
    let [act_min, act_max]: [i32; 2] = ints(line, "act", get("act")?, 2)?.try_into().unwrap();

    let (filter, depth_multiplier, name) = match kind {
        LayerKind::Conv2d => {
            let data = byte_source(line, "weights", get("weights")?, oc * kh * kw * c)?;
            (QuantizedTensor::filter(oc, kh, kw, c, data), 1, format!("conv{kh}x{kw}_{index}"))
        }
        LayerKind::DepthwiseConv2d => {
            if oc % c != 0 {
                return Err(WorkloadError::Shape {
                    line,
                    message: format!("depthwise output {oc} is not a multiple of input depth {c}"),
                });
            }
            let data = byte_source(line, "weights", get("weights")?, kh * kw * oc)?;
            (QuantizedTensor::filter(1, kh, kw, oc, data), oc / c, format!("dwconv{kh}x{kw}_{index}"))
        }
    };
    let filter = filter.map_err(|e| WorkloadError::Kernel { line, source: e })?;
    let params = ConvParams {
        stride,
        padding,
        depth_multiplier,
        input_offset: in_off,
        output_offset: out_off,
        bias: list(line, "bias", get("bias")?, oc)?,
        multiplier: multipliers(line, get("mult")?, oc)?,
        shift: list(line, "shift", get("shift")?, oc)?,
        act_min,
        act_max,
    };
    Ok((Layer { name, kind, params, filter }, (h, w, c)))
}

/// Parses TMDL text into a validated workload named `name`.
pub fn parse_workload(name: &str, text: &str) -> Result<WorkloadSpec, WorkloadError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()));
    match lines.by_ref().find(|(_, l)| !l.is_empty()) {
        Some((_, "TMDL 1")) => {}
        Some((line, other)) => return Err(syntax(line, format!("expected `TMDL 1` header, got `{other}`"))),
        None => return Err(syntax(1, "empty workload")),
    }
    let mut layers: Vec<(usize, Layer, (usize, usize, usize))> = Vec::new();
    let mut input_src: Option<(usize, String)> = None;
    for (line, text) in lines {
        if text.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        match tokens[0] {
            "layer" => {
                let (layer, shape) = parse_layer(line, layers.len(), &tokens[1..])?;
                layers.push((line, layer, shape));
            }
            "input" => {
                if input_src.is_some() {
                    return Err(syntax(line, "duplicate input line"));
                }
                if tokens.len() != 2 {
                    return Err(syntax(line, "expected `input prng:SEED` or `input hex:...`"));
                }
                input_src = Some((line, tokens[1].to_string()));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }
    let (input_line, src) = input_src.ok_or_else(|| syntax(text.lines().count().max(1), "missing input line"))?;
    let Some((_, first, (h, w, c))) = layers.first() else {
        return Err(syntax(input_line, "workload has no layers"));
    };
    let data = byte_source(input_line, "input", &src, h * w * c)?;
    let input = QuantizedTensor::activation(*h, *w, *c, data, -first.params.input_offset)
        .map_err(|e| WorkloadError::Kernel { line: input_line, source: e })?;

    let mut shape = (*h, *w, *c);
    let mut arena = 0usize;
    for (line, layer, declared) in &layers {
        if *declared != shape {
            return Err(WorkloadError::Shape {
                line: *line,
                message: format!("layer input {declared:?} does not match preceding output {shape:?}"),
            });
        }
        let probe = QuantizedTensor::activation(shape.0, shape.1, shape.2, vec![0; shape.0 * shape.1 * shape.2], 0)
            .map_err(|e| WorkloadError::Kernel { line: *line, source: e })?;
        let g = layer.geometry(&probe).map_err(|e| WorkloadError::Kernel { line: *line, source: e })?;
        let out = (g.out_h, g.out_w, g.out_c);
        arena = arena.max(shape.0 * shape.1 * shape.2 + out.0 * out.1 * out.2);
        shape = out;
    }
    Ok(WorkloadSpec {
        name: name.to_string(),
        layers: layers.into_iter().map(|(_, l, _)| l).collect(),
        input,
        arena_bytes: arena,
        golden: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = "TMDL 1\nlayer conv2d in=2,2,4 out=4 kernel=1,1 stride=1 pad=same in_off=0 out_off=0 act=-128,127 mult=list:1073741824 shift=list:1 bias=list:0 weights=hex:01000000000100000000010000000001\ninput hex:0102030405060708090a0b0c0d0e0f10\n";

    #[test]
    fn single_pointwise_layer() {
        let spec = parse_workload("one", ONE).unwrap();
        assert_eq!(spec.layers.len(), 1);
        assert_eq!(spec.layers[0].name, "conv1x1_0");
        // identity filter with unit scale
        assert_eq!(spec.reference_output().unwrap().data(), spec.input.data());
        assert_eq!(spec.arena_bytes, 32);
    }

    #[test]
    fn stride_zero_is_rejected() {
        let text = ONE.replace("stride=1", "stride=0");
        let err = parse_workload("x", &text).unwrap_err();
        assert_eq!(err.to_string(), "line 2: stride must be ≥ 1");
    }

    #[test]
    fn errors_carry_locations() {
        let unknown = ONE.replace("pad=same", "pad=same color=red");
        assert_eq!(parse_workload("x", &unknown).unwrap_err(), WorkloadError::UnknownKey { line: 2, key: "color".into() });
        let missing = ONE.replace(" bias=list:0", "");
        assert!(parse_workload("x", &missing).unwrap_err().to_string().contains("missing key `bias`"));
        assert!(matches!(parse_workload("x", "TMDL 2\n"), Err(WorkloadError::Syntax { line: 1, .. })));
        let short = ONE.replace("hex:0102", "hex:");
        assert!(matches!(parse_workload("x", &short), Err(WorkloadError::Shape { line: 3, .. })));
    }

    #[test]
    fn shape_chain_is_checked() {
        let text = format!(
            "{}layer dwconv2d in=2,2,5 out=5 kernel=3,3 stride=1 pad=same in_off=0 out_off=0 act=-128,127 mult=prng:1 shift=list:0 bias=list:0 weights=prng:2\n",
            ONE
        );
        assert!(matches!(parse_workload("x", &text), Err(WorkloadError::Shape { line: 4, .. })));
    }
}
