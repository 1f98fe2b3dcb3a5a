use std::fmt;
use std::str::FromStr;

use crate::cfus::CfuKind;

/// Code footprint of the generic reference kernels.
pub const REFERENCE_CODE_BYTES: u32 = 4096;
/// Code footprint of a shape-specialized software kernel.
pub const SPECIALIZED_CODE_BYTES: u32 = 2048;
/// Code footprint of a kernel whose inner loop lives in the CFU.
pub const SESSION_CODE_BYTES: u32 = 1024;

/// A kernel implementation strategy. The first ten form the 1x1
/// convolution optimization sequence; the `Kws*` variants target the small
/// keyword-spotting network on a minimal core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelVariant {
    Baseline,
    SwSpec,
    CfuPostproc,
    CfuHoldFilt,
    CfuHoldInp,
    CfuMac4,
    Mac4Run1,
    InclPostproc,
    Mac4Run4,
    Overlap,
    KwsBaseline,
    KwsFastmult,
    KwsMacconv,
    KwsPostproc,
}

impl KernelVariant {
    pub const ALL: [KernelVariant; 14] = [
        KernelVariant::Baseline,
        KernelVariant::SwSpec,
        KernelVariant::CfuPostproc,
        KernelVariant::CfuHoldFilt,
        KernelVariant::CfuHoldInp,
        KernelVariant::CfuMac4,
        KernelVariant::Mac4Run1,
        KernelVariant::InclPostproc,
        KernelVariant::Mac4Run4,
        KernelVariant::Overlap,
        KernelVariant::KwsBaseline,
        KernelVariant::KwsFastmult,
        KernelVariant::KwsMacconv,
        KernelVariant::KwsPostproc,
    ];

    /// The 1x1 convolution optimization sequence, in order.
    pub const POINTWISE_LADDER: [KernelVariant; 10] = [
        KernelVariant::Baseline,
        KernelVariant::SwSpec,
        KernelVariant::CfuPostproc,
        KernelVariant::CfuHoldFilt,
        KernelVariant::CfuHoldInp,
        KernelVariant::CfuMac4,
        KernelVariant::Mac4Run1,
        KernelVariant::InclPostproc,
        KernelVariant::Mac4Run4,
        KernelVariant::Overlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::Baseline => "baseline",
            KernelVariant::SwSpec => "sw_spec",
            KernelVariant::CfuPostproc => "cfu_postproc",
            KernelVariant::CfuHoldFilt => "cfu_hold_filt",
            KernelVariant::CfuHoldInp => "cfu_hold_inp",
            KernelVariant::CfuMac4 => "cfu_mac4",
            KernelVariant::Mac4Run1 => "mac4run1",
            KernelVariant::InclPostproc => "incl_postproc",
            KernelVariant::Mac4Run4 => "mac4run4",
            KernelVariant::Overlap => "overlap",
            KernelVariant::KwsBaseline => "kws_baseline",
            KernelVariant::KwsFastmult => "kws_fastmult",
            KernelVariant::KwsMacconv => "kws_macconv",
            KernelVariant::KwsPostproc => "kws_postproc",
        }
    }

    /// The CFU the variant drives, `None` for pure software.
    pub fn required_cfu(self) -> CfuKind {
        use KernelVariant::*;
        match self {
            Baseline | SwSpec | KwsBaseline | KwsFastmult => CfuKind::None,
            CfuPostproc => CfuKind::Postproc,
            CfuHoldFilt | CfuHoldInp | CfuMac4 | Mac4Run1 | InclPostproc | Mac4Run4 | Overlap => {
                CfuKind::Cfu1
            }
            KwsMacconv | KwsPostproc => CfuKind::Cfu2,
        }
    }

    /// Whether the variant can run on a core carrying `cfu`.
    pub fn runs_on(self, cfu: CfuKind) -> bool {
        let need = self.required_cfu();
        need == CfuKind::None || need == cfu
    }

    /// Code footprint of the kernel the variant specializes. Layers the
    /// variant does not specialize fall back to the reference kernels.
    pub fn code_size_bytes(self) -> u32 {
        use KernelVariant::*;
        match self {
            Baseline | KwsBaseline | KwsFastmult => REFERENCE_CODE_BYTES,
            SwSpec | CfuPostproc | CfuHoldFilt | CfuHoldInp | CfuMac4 => SPECIALIZED_CODE_BYTES,
            Mac4Run1 | InclPostproc | Mac4Run4 | Overlap | KwsMacconv | KwsPostproc => SESSION_CODE_BYTES,
        }
    }

    pub fn is_kws(self) -> bool {
        matches!(
            self,
            KernelVariant::KwsBaseline | KernelVariant::KwsFastmult | KernelVariant::KwsMacconv | KernelVariant::KwsPostproc
        )
    }

    /// Position in the 1x1 sequence (`None` for the keyword-spotting set).
    pub(crate) fn rung(self) -> Option<usize> {
        Self::POINTWISE_LADDER.iter().position(|&v| v == self)
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for KernelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown kernel variant `{s}`"))
    }
}
