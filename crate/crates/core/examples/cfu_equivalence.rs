//! Drives each CFU model and its independently written twin with the same
//! random issue stream, then shows a deliberately broken twin being caught.

use cfu_sim::cfus::{self, emulate_equivalence, random_issue_stream, twin::twin, CfuKind, CfuModel, CfuResponse, ResourceCost, Verdict};

struct Broken(Box<dyn CfuModel>);

impl CfuModel for Broken {
    fn kind(&self) -> CfuKind {
        self.0.kind()
    }
    fn issue(&mut self, funct3: u8, funct7: u8, a: u32, b: u32) -> CfuResponse {
        let mut r = self.0.issue(funct3, funct7, a, b);
        if funct7 == 1 {
            r.result ^= 1;
        }
        r
    }
    fn reset(&mut self) {
        self.0.reset()
    }
    fn resource_cost(&self) -> ResourceCost {
        self.0.resource_cost()
    }
}

fn main() {
    for kind in CfuKind::ALL {
        let (Some(mut model), Some(mut shadow)) = (cfus::build(kind), twin(kind)) else { continue };
        let stream = random_issue_stream(kind, 10_000, 7);
        let verdict = emulate_equivalence(model.as_mut(), shadow.as_mut(), &stream);
        println!("{kind:<9} {verdict:?}");
    }
    let stream = random_issue_stream(CfuKind::Demo, 1000, 3);
    let mut model = cfus::build(CfuKind::Demo).unwrap();
    let mut broken = Broken(twin(CfuKind::Demo).unwrap());
    if let Verdict::Diverged(d) = emulate_equivalence(model.as_mut(), &mut broken, &stream) {
        println!("broken twin diverges at issue {}: {:?} vs {:?}", d.index, d.model, d.twin);
    }
}
