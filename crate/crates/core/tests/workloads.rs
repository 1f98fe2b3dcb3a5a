use std::path::PathBuf;

use cfu_sim::kernels::KernelVariant;
use cfu_sim::machine::PreparedRun;
use cfu_sim::workloads::{self, format_golden, fnv1a64, GoldenVerdict, WorkloadError};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cfu-sim-wl-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const TINY: &str = "TMDL 1
layer conv2d in=4,4,3 out=5 kernel=3,3 stride=1 pad=same in_off=1 out_off=-2 act=-128,127 mult=prng:1 shift=list:-8 bias=list:7 weights=prng:2
layer dwconv2d in=4,4,5 out=5 kernel=3,3 stride=2 pad=valid in_off=2 out_off=0 act=-128,127 mult=prng:3 shift=list:-7 bias=list:0 weights=prng:4
input prng:5
";

#[test]
fn golden_beside_the_file_is_picked_up() {
    let path = scratch("tiny.tmdl");
    std::fs::write(&path, TINY).unwrap();
    let spec = workloads::load(&path).unwrap();
    assert_eq!(spec.name, "tiny");
    assert_eq!(spec.golden, None);
    let out = spec.reference_output().unwrap();
    std::fs::write(path.with_extension("golden"), format_golden(fnv1a64(out.data().iter().map(|&b| b as u8)))).unwrap();
    let spec = workloads::load(&path).unwrap();
    assert_eq!(spec.golden_check(out.data()).unwrap(), GoldenVerdict::Pass);
    for v in [KernelVariant::Baseline, KernelVariant::SwSpec] {
        PreparedRun::new(&spec, v).unwrap();
    }
}

#[test]
fn zero_stride_is_rejected_with_its_line() {
    let text = TINY.replace("stride=2", "stride=0");
    let err = workloads::parse_workload("bad", &text).unwrap_err();
    let line = match err {
        WorkloadError::Syntax { line, .. } | WorkloadError::Kernel { line, .. } | WorkloadError::Shape { line, .. } => line,
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(line, 3);
}

#[test]
fn mismatched_chaining_is_a_shape_error() {
    let text = TINY.replace("in=4,4,5", "in=4,4,6");
    assert!(matches!(workloads::parse_workload("bad", &text), Err(WorkloadError::Shape { line: 3, .. })));
}

#[test]
fn bundled_names_load_without_files() {
    for name in workloads::BUNDLED {
        let spec = workloads::load(std::path::Path::new(name)).unwrap();
        assert!(spec.golden.is_some());
        assert!(spec.macs().unwrap() > 0);
    }
}
