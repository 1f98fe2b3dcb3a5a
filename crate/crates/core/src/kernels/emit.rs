//! Trace emission: each kernel variant executes a layer on the host
//! (driving the CFU model where the variant uses one) while recording the
//! abstract events the compiled kernel would perform on the core.

use super::requant::requantize;
use super::variant::{KernelVariant, REFERENCE_CODE_BYTES};
use super::{ConvParams, Geometry, KernelError, Layer, LayerKind, QuantizedTensor};
use crate::cfus::ops::*;
use crate::cfus::{self, pack_activation_range, CfuModel};
use crate::machine::{Region, TraceStream};

/// Fixed data layout the emitted addresses follow.
pub mod layout {
    /// Start of the instruction space handed out to kernels.
    pub const CODE_BASE: u32 = 0x4000_1000;
    /// Activation buffers; consecutive layers alternate between the two.
    pub const ACTIVATION_A: u32 = 0x4001_0000;
    pub const ACTIVATION_B: u32 = 0x4001_8400;
    pub const ACTIVATION_BYTES: usize = 0x8000;
    /// Per-layer multiplier and shift tables prepared at model load.
    pub const QUANT_TABLES: u32 = 0x4002_0000;
    pub const QUANT_TABLE_STRIDE: u32 = 0x800;
    /// Filters and biases, packed layer after layer.
    pub const WEIGHTS_BASE: u32 = 0x2010_0000;
}

/// Static facts about an emitted run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KernelMeta {
    /// Sum of the distinct kernels the run touched.
    pub code_size_bytes: u32,
    pub dynamic_instructions: u64,
    /// Multiply-accumulates the network performs.
    pub macs: u64,
    /// Kernel name and code size of every distinct kernel used.
    pub kernels: Vec<(String, u32)>,
}

/// Output and trace of running a layer sequence with one variant.
#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub output: QuantizedTensor,
    pub trace: TraceStream,
    pub meta: KernelMeta,
}

#[derive(Debug, Clone, Copy)]
struct Addrs {
    input: u32,
    output: u32,
    filter: u32,
    bias: u32,
    mult: u32,
    shift: u32,
}

struct Ctx {
    trace: TraceStream,
    cfu: Option<Box<dyn CfuModel>>,
    kernels: Vec<(String, u32)>,
    accumulate: u16,
    postproc: u16,
    setup: u16,
}

impl Ctx {
    fn new(variant: KernelVariant) -> Self {
        let mut trace = TraceStream::new();
        let accumulate = trace.intern("accumulate");
        let postproc = trace.intern("postproc");
        let setup = trace.intern("setup");
        Self { trace, cfu: cfus::build(variant.required_cfu()), kernels: Vec::new(), accumulate, postproc, setup }
    }

    /// Entry address of kernel `name`, registering it on first use.
    fn kernel(&mut self, name: &str, size: u32) -> u32 {
        let idx = match self.kernels.iter().position(|k| k.0 == name) {
            Some(i) => i,
            None => {
                self.kernels.push((name.to_string(), size));
                self.kernels.len() - 1
            }
        };
        layout::CODE_BASE + idx as u32 * 0x1000
    }

    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32, macs: u32) -> u32 {
        let cfu = self.cfu.as_mut().expect("variant without a CFU issued a CFU instruction");
        let r = cfu.issue(funct3, funct7, a, b);
        self.trace.cfu(funct3, funct7, r.extra_latency, macs);
        r.result
    }

    /// Fails if the CFU has latched an error. Reads status without
    /// recording an event.
    fn check_cfu(&mut self, layer: &str) -> Result<(), KernelError> {
        let Some(cfu) = self.cfu.as_mut() else { return Ok(()) };
        if cfu.kind() == cfus::CfuKind::Mac4 || cfu.kind() == cfus::CfuKind::Demo {
            return Ok(());
        }
        if cfu.issue(GROUP_POST, STATUS, 0, 0).result & STATUS_ERROR != 0 {
            return Err(KernelError::Cfu(layer.to_string()));
        }
        Ok(())
    }
}

fn word_at(bytes: &[i8], offset: usize) -> u32 {
    u32::from_le_bytes([bytes[offset] as u8, bytes[offset + 1] as u8, bytes[offset + 2] as u8, bytes[offset + 3] as u8])
}

fn cfu_byte(result: u32, layer: &str) -> Result<i8, KernelError> {
    if result == ERROR_RESULT {
        return Err(KernelError::Cfu(layer.to_string()));
    }
    Ok(result as i32 as i8)
}

/// Software requantization as the compiled reference emits it: a call into
/// the fixed-point helper with its data-dependent branches.
fn scalar_postproc(t: &mut TraceStream, pc: u32, p: &ConvParams, oc: usize, acc: i32, a: &Addrs) -> i8 {
    let off = 4 * oc as u32;
    let (mult, shift) = (p.multiplier[oc], p.shift[oc]);
    let x = acc.wrapping_add(p.bias[oc]);
    t.load(a.bias + off, 4, Region::Weights);
    t.alu(1);
    t.load(a.mult + off, 4, Region::Sram);
    t.load(a.shift + off, 4, Region::Sram);
    t.branch(pc, pc + 0x200, true);
    t.alu(6);
    t.skip(pc + 0x200, shift <= 0);
    if shift > 0 {
        t.shift(shift as u32);
    }
    let scaled = ((x as i64) << shift.max(0)).clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    t.mul();
    t.mul();
    t.alu(2);
    t.skip(pc + 0x240, !(scaled == i32::MIN && mult == i32::MIN));
    t.alu(16);
    t.shift(31);
    t.shift(1);
    t.alu(4);
    let high = super::requant::srdhm(scaled, mult);
    t.skip(pc + 0x280, high >= 0);
    t.shift((-shift).max(0) as u32);
    t.alu(2);
    t.alu(1);
    let v = super::requant::mbqm(x, mult, shift).saturating_add(p.output_offset);
    t.skip(pc + 0x2c0, v >= p.act_min);
    t.skip(pc + 0x300, v <= p.act_max);
    t.alu(4);
    t.branch(pc + 0x340, pc + 0x20, true);
    requantize(acc, p.bias[oc], mult, shift, p.output_offset, p.act_min, p.act_max)
}

/// Loads every channel's parameters into the CFU's post-processing stores.
fn load_post_params(ctx: &mut Ctx, pc: u32, p: &ConvParams, a: &Addrs) {
    ctx.issue(GROUP_POST, CLEAR_PARAMS, 0, 0, 0);
    let n = p.bias.len();
    for oc in 0..n {
        let off = 4 * oc as u32;
        ctx.trace.load(a.bias + off, 4, Region::Weights);
        ctx.trace.load(a.mult + off, 4, Region::Sram);
        ctx.trace.load(a.shift + off, 4, Region::Sram);
        ctx.issue(GROUP_POST, LOAD_BIAS, p.bias[oc] as u32, 0, 0);
        ctx.issue(GROUP_POST, LOAD_MULTIPLIER, p.multiplier[oc] as u32, 0, 0);
        ctx.issue(GROUP_POST, LOAD_SHIFT, p.shift[oc] as u32, 0, 0);
        ctx.trace.alu(1);
        ctx.trace.loop_back(pc, oc + 1 < n);
    }
    ctx.trace.alu(2);
    ctx.issue(GROUP_POST, SET_OUTPUT_PARAMS, p.output_offset as u32, pack_activation_range(p.act_min, p.act_max), 0);
}

fn reference_conv(ctx: &mut Ctx, layer: &Layer, g: &Geometry, input: &[i8], a: &Addrs) -> Vec<i8> {
    let base = ctx.kernel("conv_reference", REFERENCE_CODE_BYTES);
    let (pc_ic, pc_bounds, pc_kx, pc_ky, pc_oc, pc_x, pc_y, pc_post) =
        (base + 0x40, base + 0x80, base + 0xc0, base + 0x100, base + 0x140, base + 0x180, base + 0x1c0, base + 0x400);
    let (p, f) = (&layer.params, layer.filter.data());
    let (acc_r, post_r) = (ctx.accumulate, ctx.postproc);
    let t = &mut ctx.trace;
    let mut out = Vec::with_capacity(g.outputs());
    t.alu(14);
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for oc in 0..g.out_c {
                t.begin(acc_r);
                t.alu(4);
                let mut acc = 0i32;
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        t.alu(4);
                        let pos = g.input_pos(oy, ox, ky, kx);
                        t.skip(pc_bounds, pos.is_none());
                        if let Some((iy, ix)) = pos {
                            let xi = (iy * g.in_w + ix) * g.in_c;
                            let fi = ((oc * g.kh + ky) * g.kw + kx) * g.in_c;
                            for ic in 0..g.in_c {
                                t.load(a.input + (xi + ic) as u32, 1, Region::Sram);
                                t.load(a.filter + (fi + ic) as u32, 1, Region::Weights);
                                t.alu(1);
                                t.mul();
                                t.alu(2);
                                t.loop_back(pc_ic, ic + 1 < g.in_c);
                                acc += (input[xi + ic] as i32 + p.input_offset) * f[fi + ic] as i32;
                            }
                        }
                        t.loop_back(pc_kx, kx + 1 < g.kw);
                    }
                    t.loop_back(pc_ky, ky + 1 < g.kh);
                }
                t.end(acc_r);
                t.begin(post_r);
                out.push(scalar_postproc(t, pc_post, p, oc, acc, a));
                t.store(a.output + ((oy * g.out_w + ox) * g.out_c + oc) as u32, 1, Region::Sram);
                t.end(post_r);
                t.loop_back(pc_oc, oc + 1 < g.out_c);
            }
            t.loop_back(pc_x, ox + 1 < g.out_w);
        }
        t.loop_back(pc_y, oy + 1 < g.out_h);
    }
    out
}

fn reference_depthwise(ctx: &mut Ctx, layer: &Layer, g: &Geometry, input: &[i8], a: &Addrs) -> Vec<i8> {
    let base = ctx.kernel("dwconv_reference", REFERENCE_CODE_BYTES);
    let (pc_bounds, pc_kx, pc_ky, pc_m, pc_ic, pc_x, pc_y, pc_post) =
        (base + 0x40, base + 0x80, base + 0xc0, base + 0x100, base + 0x140, base + 0x180, base + 0x1c0, base + 0x400);
    let (p, f) = (&layer.params, layer.filter.data());
    let (acc_r, post_r) = (ctx.accumulate, ctx.postproc);
    let t = &mut ctx.trace;
    let dm = g.depth_multiplier;
    let mut out = vec![0i8; g.outputs()];
    t.alu(14);
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for ic in 0..g.in_c {
                for m in 0..dm {
                    let oc = ic * dm + m;
                    t.begin(acc_r);
                    t.alu(4);
                    let mut acc = 0i32;
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            t.alu(3);
                            let pos = g.input_pos(oy, ox, ky, kx);
                            t.skip(pc_bounds, pos.is_none());
                            if let Some((iy, ix)) = pos {
                                let xi = (iy * g.in_w + ix) * g.in_c + ic;
                                let fi = (ky * g.kw + kx) * g.out_c + oc;
                                t.load(a.input + xi as u32, 1, Region::Sram);
                                t.load(a.filter + fi as u32, 1, Region::Weights);
                                t.alu(1);
                                t.mul();
                                t.alu(1);
                                acc += (input[xi] as i32 + p.input_offset) * f[fi] as i32;
                            }
                            t.loop_back(pc_kx, kx + 1 < g.kw);
                        }
                        t.loop_back(pc_ky, ky + 1 < g.kh);
                    }
                    t.end(acc_r);
                    t.begin(post_r);
                    let idx = (oy * g.out_w + ox) * g.out_c + oc;
                    out[idx] = scalar_postproc(t, pc_post, p, oc, acc, a);
                    t.store(a.output + idx as u32, 1, Region::Sram);
                    t.end(post_r);
                    t.loop_back(pc_m, m + 1 < dm);
                }
                t.loop_back(pc_ic, ic + 1 < g.in_c);
            }
            t.loop_back(pc_x, ox + 1 < g.out_w);
        }
        t.loop_back(pc_y, oy + 1 < g.out_h);
    }
    out
}

fn inapplicable(v: KernelVariant, layer: &Layer, reason: impl Into<String>) -> KernelError {
    KernelError::Inapplicable { variant: v.name().into(), layer: layer.name.clone(), reason: reason.into() }
}

fn check_pointwise(v: KernelVariant, layer: &Layer, g: &Geometry) -> Result<(), KernelError> {
    let rung = v.rung().unwrap_or(0);
    let (d, oc) = (g.in_c, g.out_c);
    if rung >= 2 && oc > cfus::Cfu1::CHANNELS {
        return Err(inapplicable(v, layer, format!("{oc} output channels exceed the parameter stores")));
    }
    if rung >= 3 {
        if d % 4 != 0 || d / 4 > cfus::Cfu1::INPUT_WORDS {
            return Err(inapplicable(v, layer, format!("input depth {d} must be a multiple of 4 up to 256")));
        }
        if oc * d / 4 > cfus::Cfu1::FILTER_WORDS {
            return Err(inapplicable(v, layer, "filter does not fit the filter store"));
        }
    }
    if rung >= 8 && oc % 4 != 0 {
        return Err(inapplicable(v, layer, format!("{oc} output channels are not a multiple of 4")));
    }
    Ok(())
}

/// 1x1 convolution through the specialized kernel of `v`.
fn pointwise(
    ctx: &mut Ctx,
    v: KernelVariant,
    layer: &Layer,
    g: &Geometry,
    input: &[i8],
    a: &Addrs,
) -> Result<Vec<i8>, KernelError> {
    use KernelVariant::*;
    check_pointwise(v, layer, g)?;
    let base = ctx.kernel(&format!("conv1x1_{}", v.name()), v.code_size_bytes());
    let (pc_mac, pc_rem, pc_stage, pc_oc, pc_px, pc_setup, pc_post) =
        (base + 0x40, base + 0x80, base + 0xc0, base + 0x100, base + 0x140, base + 0x180, base + 0x400);
    let rung = v.rung().expect("pointwise kernels come from the 1x1 sequence");
    let (p, f) = (&layer.params, layer.filter.data());
    let (d, n_oc) = (g.in_c, g.out_c);
    let words = d / 4;
    let cfu_post = rung >= 2;
    let holds_filter = rung >= 3;
    let holds_input = rung >= 4;

    ctx.trace.begin(ctx.setup);
    ctx.trace.alu(16);
    if cfu_post {
        ctx.issue(GROUP_CTRL, RESET, 0, 0, 0);
        load_post_params(ctx, pc_setup, p, a);
    }
    if holds_filter {
        ctx.issue(GROUP_MAC, SET_INPUT_OFFSET, p.input_offset as u32, 0, 0);
        ctx.issue(GROUP_FILTER, SET_INPUT_DEPTH, d as u32, 0, 0);
        let total = n_oc * words;
        for w in 0..total {
            ctx.trace.load(a.filter + 4 * w as u32, 4, Region::Weights);
            ctx.issue(GROUP_FILTER, WRITE_FILTER_WORD, word_at(f, 4 * w), 0, 0);
            ctx.trace.alu(1);
            ctx.trace.loop_back(pc_setup + 0x40, w + 1 < total);
        }
    }
    if v == Overlap {
        ctx.issue(GROUP_RUN, SET_PIPELINE, 2, 0, 0);
    }
    ctx.trace.end(ctx.setup);

    let (acc_r, post_r) = (ctx.accumulate, ctx.postproc);
    let pixels = g.out_h * g.out_w;
    let mut out = vec![0i8; g.outputs()];
    for pix in 0..pixels {
        let (oy, ox) = (pix / g.out_w, pix % g.out_w);
        let xi = (oy * g.stride * g.in_w + ox * g.stride) * d;
        let px = &input[xi..xi + d];
        let out_base = pix * n_oc;
        ctx.trace.alu(4);
        if holds_input {
            ctx.issue(GROUP_INPUT, RESET_INPUT, 0, 0, 0);
            for w in 0..words {
                ctx.trace.load(a.input + (xi + 4 * w) as u32, 4, Region::Sram);
                ctx.issue(GROUP_INPUT, WRITE_INPUT_WORD, word_at(input, xi + 4 * w), 0, 0);
                ctx.trace.alu(1);
                ctx.trace.loop_back(pc_stage, w + 1 < words);
            }
        }
        if matches!(v, Mac4Run4 | Overlap) {
            for oc0 in (0..n_oc).step_by(4) {
                ctx.trace.begin(acc_r);
                ctx.issue(GROUP_RUN, RUN4, oc0 as u32, 0, 4 * d as u32);
                ctx.trace.end(acc_r);
                ctx.trace.begin(post_r);
                let packed = ctx.issue(GROUP_RUN, DRAIN, 0, 0, 0);
                for (i, byte) in packed.to_le_bytes().into_iter().enumerate() {
                    out[out_base + oc0 + i] = byte as i8;
                }
                ctx.trace.store(a.output + (out_base + oc0) as u32, 4, Region::Sram);
                ctx.trace.alu(1);
                ctx.trace.end(post_r);
                ctx.trace.loop_back(pc_oc, oc0 + 4 < n_oc);
            }
            ctx.trace.loop_back(pc_px, pix + 1 < pixels);
            continue;
        }
        for oc in 0..n_oc {
            let fi = oc * d;
            ctx.trace.begin(acc_r);
            let mut acc = 0i32;
            let mut result = None;
            match v {
                Baseline | SwSpec | CfuPostproc => {
                    ctx.trace.alu(2);
                    let t = &mut ctx.trace;
                    for k in 0..d / 4 {
                        for j in 0..4 {
                            t.load(a.input + (xi + 4 * k + j) as u32, 1, Region::Sram);
                            t.load(a.filter + (fi + 4 * k + j) as u32, 1, Region::Weights);
                        }
                        t.alu(4);
                        for j in 0..4 {
                            t.mul();
                            acc += (px[4 * k + j] as i32 + p.input_offset) * f[fi + 4 * k + j] as i32;
                        }
                        t.alu(6);
                        t.loop_back(pc_mac, k + 1 < d / 4);
                    }
                    for r in (d / 4) * 4..d {
                        t.load(a.input + (xi + r) as u32, 1, Region::Sram);
                        t.load(a.filter + (fi + r) as u32, 1, Region::Weights);
                        t.alu(1);
                        t.mul();
                        t.alu(2);
                        t.loop_back(pc_rem, r + 1 < d);
                        acc += (px[r] as i32 + p.input_offset) * f[fi + r] as i32;
                    }
                }
                CfuHoldFilt | CfuHoldInp => {
                    ctx.trace.alu(2);
                    for k in 0..words {
                        let mut xs = [0i32; 4];
                        let mut ws = [0i32; 4];
                        for j in 0..4 {
                            if v == CfuHoldFilt {
                                ctx.trace.load(a.input + (xi + 4 * k + j) as u32, 1, Region::Sram);
                                xs[j] = px[4 * k + j] as i32;
                            } else {
                                xs[j] = ctx.issue(GROUP_INPUT, READ_INPUT_BYTE, 0, 0, 0) as i32;
                            }
                            ws[j] = ctx.issue(GROUP_FILTER, READ_FILTER_BYTE, 0, 0, 0) as i32;
                        }
                        ctx.trace.alu(4);
                        for j in 0..4 {
                            ctx.trace.mul();
                            acc += (xs[j] + p.input_offset) * ws[j];
                        }
                        ctx.trace.alu(if v == CfuHoldFilt { 5 } else { 4 });
                        ctx.trace.loop_back(pc_mac, k + 1 < words);
                    }
                }
                CfuMac4 => {
                    for k in 0..words {
                        ctx.issue(GROUP_MAC, MAC4_STORED, 0, 0, 4);
                        ctx.trace.alu(1);
                        ctx.trace.loop_back(pc_mac, k + 1 < words);
                    }
                }
                Mac4Run1 => {
                    acc = ctx.issue(GROUP_RUN, RUN1, oc as u32, 0, d as u32) as i32;
                    ctx.trace.alu(1);
                }
                InclPostproc => {
                    result = Some(ctx.issue(GROUP_RUN, RUN1_POST, oc as u32, 0, d as u32));
                }
                _ => unreachable!("handled above or not a 1x1 variant"),
            }
            ctx.trace.end(acc_r);
            ctx.trace.begin(post_r);
            if v == CfuMac4 {
                acc = ctx.issue(GROUP_MAC, RESET_ACC, 0, 0, 0) as i32;
            }
            let value = match result {
                Some(r) => cfu_byte(r, &layer.name)?,
                None if cfu_post => {
                    let r = ctx.issue(GROUP_POST, PROCESS, acc as u32, 0, 0);
                    ctx.trace.alu(1);
                    cfu_byte(r, &layer.name)?
                }
                None => scalar_postproc(&mut ctx.trace, pc_post, p, oc, acc, a),
            };
            out[out_base + oc] = value;
            ctx.trace.store(a.output + (out_base + oc) as u32, 1, Region::Sram);
            ctx.trace.end(post_r);
            ctx.trace.loop_back(pc_oc, oc + 1 < n_oc);
        }
        ctx.trace.loop_back(pc_px, pix + 1 < pixels);
    }
    Ok(out)
}

/// Convolution or depthwise convolution with the MAC instructions of the
/// compact unit, optionally finishing each output in the unit as well.
fn kws_layer(
    ctx: &mut Ctx,
    v: KernelVariant,
    layer: &Layer,
    g: &Geometry,
    input: &[i8],
    a: &Addrs,
) -> Result<Vec<i8>, KernelError> {
    let fused = v == KernelVariant::KwsPostproc;
    if fused && g.out_c > cfus::Cfu2::CHANNELS {
        return Err(inapplicable(v, layer, format!("{} output channels exceed the parameter stores", g.out_c)));
    }
    let depthwise = layer.kind == LayerKind::DepthwiseConv2d;
    let prefix = if depthwise { "dwconv" } else { "conv" };
    let base = ctx.kernel(&format!("{prefix}_{}", v.name()), v.code_size_bytes());
    let (pc_in, pc_bounds, pc_kx, pc_ky, pc_oc, pc_x, pc_y, pc_setup, pc_post) = (
        base + 0x40,
        base + 0x80,
        base + 0xc0,
        base + 0x100,
        base + 0x140,
        base + 0x180,
        base + 0x1c0,
        base + 0x200,
        base + 0x400,
    );
    let (p, f) = (&layer.params, layer.filter.data());

    ctx.trace.begin(ctx.setup);
    ctx.trace.alu(12);
    ctx.issue(GROUP_CTRL, RESET, 0, 0, 0);
    ctx.issue(GROUP_MAC, SET_INPUT_OFFSET, p.input_offset as u32, 0, 0);
    if fused {
        load_post_params(ctx, pc_setup, p, a);
    }
    ctx.trace.end(ctx.setup);

    let (acc_r, post_r) = (ctx.accumulate, ctx.postproc);
    let dm = g.depth_multiplier;
    let wide = !depthwise && g.in_c.is_multiple_of(4);
    let mut out = vec![0i8; g.outputs()];
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for oc in 0..g.out_c {
                ctx.trace.begin(acc_r);
                ctx.trace.alu(4);
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        ctx.trace.alu(if depthwise { 3 } else { 4 });
                        let pos = g.input_pos(oy, ox, ky, kx);
                        ctx.trace.skip(pc_bounds, pos.is_none());
                        if let Some((iy, ix)) = pos {
                            let px = (iy * g.in_w + ix) * g.in_c;
                            if depthwise {
                                let (xi, fi) = (px + oc / dm, (ky * g.kw + kx) * g.out_c + oc);
                                ctx.trace.load(a.input + xi as u32, 1, Region::Sram);
                                ctx.trace.load(a.filter + fi as u32, 1, Region::Weights);
                                ctx.issue(GROUP_MAC, MAC1, input[xi] as u32, f[fi] as u32, 1);
                                ctx.trace.alu(1);
                            } else {
                                let fi = ((oc * g.kh + ky) * g.kw + kx) * g.in_c;
                                let step = if wide { 4 } else { 1 };
                                let n = g.in_c / step;
                                for k in 0..n {
                                    let (xo, fo) = (px + k * step, fi + k * step);
                                    ctx.trace.load(a.input + xo as u32, step as u8, Region::Sram);
                                    ctx.trace.load(a.filter + fo as u32, step as u8, Region::Weights);
                                    if wide {
                                        ctx.issue(GROUP_MAC, MAC4, word_at(input, xo), word_at(f, fo), 4);
                                    } else {
                                        ctx.issue(GROUP_MAC, MAC1, input[xo] as u32, f[fo] as u32, 1);
                                    }
                                    ctx.trace.alu(1);
                                    ctx.trace.loop_back(pc_in, k + 1 < n);
                                }
                            }
                        }
                        ctx.trace.loop_back(pc_kx, kx + 1 < g.kw);
                    }
                    ctx.trace.loop_back(pc_ky, ky + 1 < g.kh);
                }
                ctx.trace.end(acc_r);
                ctx.trace.begin(post_r);
                let idx = (oy * g.out_w + ox) * g.out_c + oc;
                out[idx] = if fused {
                    let r = ctx.issue(GROUP_POST, PROCESS_ACC, 0, 0, 0);
                    cfu_byte(r, &layer.name)?
                } else {
                    let acc = ctx.issue(GROUP_MAC, RESET_ACC, 0, 0, 0) as i32;
                    scalar_postproc(&mut ctx.trace, pc_post, p, oc, acc, a)
                };
                ctx.trace.store(a.output + idx as u32, 1, Region::Sram);
                ctx.trace.end(post_r);
                ctx.trace.loop_back(pc_oc, oc + 1 < g.out_c);
            }
            ctx.trace.loop_back(pc_x, ox + 1 < g.out_w);
        }
        ctx.trace.loop_back(pc_y, oy + 1 < g.out_h);
    }
    Ok(out)
}

/// Runs `layers` in sequence with `variant`, returning the final output,
/// the trace and the run's static facts.
///
/// Layers the variant does not specialize run through the reference
/// kernels. Every layer's output is computed by the emitting code itself
/// (including any CFU model it drives), not copied from the reference.
pub fn emit_network(
    variant: KernelVariant,
    layers: &[Layer],
    input: &QuantizedTensor,
) -> Result<NetworkRun, KernelError> {
    if layers.is_empty() {
        return Err(KernelError::Shape("no layers to run".into()));
    }
    let mut ctx = Ctx::new(variant);
    let mut current = input.clone();
    let mut weights = layout::WEIGHTS_BASE;
    let mut macs = 0u64;
    for (i, layer) in layers.iter().enumerate() {
        let g = layer.geometry(&current)?;
        if current.len() > layout::ACTIVATION_BYTES || g.outputs() > layout::ACTIVATION_BYTES {
            return Err(KernelError::Capacity(format!("layer `{}` activations exceed the arena buffers", layer.name)));
        }
        macs += layer.macs(&current)?;
        let (src, dst) = if i % 2 == 0 {
            (layout::ACTIVATION_A, layout::ACTIVATION_B)
        } else {
            (layout::ACTIVATION_B, layout::ACTIVATION_A)
        };
        let filter_bytes = layer.filter.len() as u32;
        let tables = layout::QUANT_TABLES + i as u32 * layout::QUANT_TABLE_STRIDE;
        let a = Addrs {
            input: src,
            output: dst,
            filter: weights,
            bias: weights + filter_bytes.next_multiple_of(4),
            mult: tables,
            shift: tables + layout::QUANT_TABLE_STRIDE / 2,
        };
        weights = a.bias + 4 * g.out_c as u32;
        let name_id = ctx.trace.intern(&layer.name);
        ctx.trace.begin(name_id);
        let x = current.data();
        let data = match (layer.kind, variant) {
            (_, KernelVariant::KwsMacconv | KernelVariant::KwsPostproc) => kws_layer(&mut ctx, variant, layer, &g, x, &a)?,
            (LayerKind::Conv2d, v) if g.is_pointwise() && v.rung().is_some_and(|r| r > 0) => {
                pointwise(&mut ctx, v, layer, &g, x, &a)?
            }
            (LayerKind::Conv2d, _) => reference_conv(&mut ctx, layer, &g, x, &a),
            (LayerKind::DepthwiseConv2d, _) => reference_depthwise(&mut ctx, layer, &g, x, &a),
        };
        ctx.trace.end(name_id);
        ctx.check_cfu(&layer.name)?;
        current = QuantizedTensor::activation(g.out_h, g.out_w, g.out_c, data, layer.params.output_offset)?;
    }
    let meta = KernelMeta {
        code_size_bytes: ctx.kernels.iter().map(|k| k.1).sum(),
        dynamic_instructions: ctx.trace.instructions(),
        macs,
        kernels: ctx.kernels,
    };
    Ok(NetworkRun { output: current, trace: ctx.trace, meta })
}

/// Single-layer form of [`emit_network`].
pub fn emit_trace(variant: KernelVariant, layer: &Layer, input: &QuantizedTensor) -> Result<NetworkRun, KernelError> {
    emit_network(variant, std::slice::from_ref(layer), input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{reference_network, Padding};
    use crate::machine::TraceEvent;
    use crate::rng::SplitMix64;

    fn layer(rng: &mut SplitMix64, kind: LayerKind, k: usize, ic: usize, oc: usize, stride: usize) -> Layer {
        let (fo, fi, n) = match kind {
            LayerKind::Conv2d => (oc, ic, oc),
            LayerKind::DepthwiseConv2d => (1, oc, oc),
        };
        let filter: Vec<i8> = (0..fo * k * k * fi).map(|_| rng.next_i8()).collect();
        Layer {
            name: format!("{}_{k}x{k}", kind.as_str()),
            kind,
            params: ConvParams {
                stride,
                padding: Padding::Same,
                depth_multiplier: oc / ic,
                input_offset: rng.range_i64(-127, 128) as i32,
                output_offset: rng.range_i64(-128, 127) as i32,
                bias: (0..n).map(|_| rng.range_i64(-3000, 3000) as i32).collect(),
                multiplier: (0..n).map(|_| rng.range_i64(1 << 30, i32::MAX as i64) as i32).collect(),
                shift: (0..n).map(|_| rng.range_i64(-12, 1) as i32).collect(),
                act_min: -128,
                act_max: 127,
            },
            filter: QuantizedTensor::filter(fo, k, k, fi, filter).unwrap(),
        }
    }

    fn activation(rng: &mut SplitMix64, h: usize, w: usize, c: usize) -> QuantizedTensor {
        QuantizedTensor::activation(h, w, c, (0..h * w * c).map(|_| rng.next_i8()).collect(), 0).unwrap()
    }

    #[test]
    fn pointwise_variants_match_reference() {
        let mut rng = SplitMix64::new(11);
        let layers = vec![layer(&mut rng, LayerKind::Conv2d, 1, 16, 8, 1), layer(&mut rng, LayerKind::Conv2d, 1, 8, 12, 2)];
        let input = activation(&mut rng, 5, 6, 16);
        let expect = reference_network(&layers, &input).unwrap();
        for v in KernelVariant::POINTWISE_LADDER {
            let run = emit_network(v, &layers, &input).unwrap_or_else(|e| panic!("{v}: {e}"));
            assert_eq!(run.output, expect, "{v}");
            assert_eq!(run.meta.dynamic_instructions, run.trace.instructions());
        }
    }

    #[test]
    fn cfu_accumulation_conserves_macs() {
        let mut rng = SplitMix64::new(5);
        let l = layer(&mut rng, LayerKind::Conv2d, 1, 12, 8, 1);
        let input = activation(&mut rng, 3, 4, 12);
        let macs = l.macs(&input).unwrap();
        for v in [KernelVariant::CfuMac4, KernelVariant::Mac4Run1, KernelVariant::InclPostproc, KernelVariant::Mac4Run4, KernelVariant::Overlap] {
            let run = emit_trace(v, &l, &input).unwrap();
            assert_eq!(run.trace.cfu_macs(), macs, "{v}");
        }
        let sw = emit_trace(KernelVariant::SwSpec, &l, &input).unwrap();
        assert_eq!(sw.trace.cfu_macs(), 0);
        assert_eq!(sw.trace.count(|e| matches!(e, TraceEvent::Mul)), macs + 2 * 12 * 8);
    }

    #[test]
    fn kws_variants_match_reference() {
        let mut rng = SplitMix64::new(3);
        let layers = vec![
            layer(&mut rng, LayerKind::Conv2d, 3, 1, 8, 2),
            layer(&mut rng, LayerKind::DepthwiseConv2d, 3, 8, 8, 1),
            layer(&mut rng, LayerKind::Conv2d, 1, 8, 8, 1),
            layer(&mut rng, LayerKind::Conv2d, 3, 8, 4, 1),
        ];
        let input = activation(&mut rng, 7, 9, 1);
        let expect = reference_network(&layers, &input).unwrap();
        let macs: u64 = {
            let mut x = input.clone();
            let mut total = 0;
            for l in &layers {
                total += l.macs(&x).unwrap();
                x = crate::kernels::reference_layer(l, &x).unwrap();
            }
            total
        };
        for v in [KernelVariant::KwsBaseline, KernelVariant::KwsFastmult, KernelVariant::KwsMacconv, KernelVariant::KwsPostproc] {
            let run = emit_network(v, &layers, &input).unwrap();
            assert_eq!(run.output, expect, "{v}");
            assert_eq!(run.meta.macs, macs);
            if v.required_cfu() != crate::cfus::CfuKind::None {
                assert_eq!(run.trace.cfu_macs(), macs, "{v}");
            }
        }
        let base = emit_network(KernelVariant::KwsBaseline, &layers, &input).unwrap();
        let fast = emit_network(KernelVariant::KwsFastmult, &layers, &input).unwrap();
        assert_eq!(base.trace, fast.trace);
        assert_eq!(base.meta.code_size_bytes, 2 * REFERENCE_CODE_BYTES);
    }

    #[test]
    fn inapplicable_shapes_are_rejected() {
        let mut rng = SplitMix64::new(8);
        let l = layer(&mut rng, LayerKind::Conv2d, 1, 6, 8, 1);
        let input = activation(&mut rng, 2, 2, 6);
        assert!(emit_trace(KernelVariant::SwSpec, &l, &input).is_ok());
        assert!(matches!(emit_trace(KernelVariant::CfuHoldFilt, &l, &input), Err(KernelError::Inapplicable { .. })));
        let l = layer(&mut rng, LayerKind::Conv2d, 1, 8, 6, 1);
        let input = activation(&mut rng, 2, 2, 8);
        assert!(emit_trace(KernelVariant::Mac4Run1, &l, &input).is_ok());
        assert!(emit_trace(KernelVariant::Mac4Run4, &l, &input).is_err());
    }

    #[test]
    fn code_size_counts_distinct_kernels() {
        let mut rng = SplitMix64::new(2);
        let layers = vec![
            layer(&mut rng, LayerKind::Conv2d, 1, 8, 8, 1),
            layer(&mut rng, LayerKind::DepthwiseConv2d, 3, 8, 8, 1),
            layer(&mut rng, LayerKind::Conv2d, 1, 8, 8, 1),
        ];
        let input = activation(&mut rng, 4, 4, 8);
        let run = emit_network(KernelVariant::Overlap, &layers, &input).unwrap();
        assert_eq!(run.meta.code_size_bytes, REFERENCE_CODE_BYTES + crate::kernels::SESSION_CODE_BYTES);
        assert_eq!(run.meta.kernels.len(), 2);
    }
}
