/// Memory a trace access targets. `Weights` resolves to flash or SRAM
/// according to the configuration's weight placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Sram,
    Flash,
    Weights,
}

/// One abstract event of a kernel execution, consumed by the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Load { addr: u32, bytes: u8, region: Region },
    Store { addr: u32, bytes: u8, region: Region },
    Alu { count: u32 },
    Mul,
    Div,
    Shift { amount: u8 },
    Branch { pc: u32, target: u32, taken: bool },
    /// `macs` counts the multiply-accumulates the issue performs.
    CfuIssue { funct3: u8, funct7: u8, extra_latency: u32, macs: u32 },
    /// Begin or end of a named profiling region (index into the stream's
    /// name table).
    Mark { region: u16, begin: bool },
}

impl TraceEvent {
    /// Instructions the event stands for.
    pub fn instructions(&self) -> u64 {
        match self {
            TraceEvent::Alu { count } => *count as u64,
            TraceEvent::Mark { .. } => 0,
            _ => 1,
        }
    }
}

/// An event sequence plus the names its region marks refer to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceStream {
    pub events: Vec<TraceEvent>,
    names: Vec<String>,
}

impl TraceStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: u16) -> &str {
        &self.names[id as usize]
    }

    /// Index of `name` in the name table, adding it on first use.
    pub fn intern(&mut self, name: &str) -> u16 {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return i as u16;
        }
        self.names.push(name.to_string());
        u16::try_from(self.names.len() - 1).expect("too many region names")
    }

    pub fn push(&mut self, e: TraceEvent) {
        self.events.push(e);
    }

    pub fn begin(&mut self, region: u16) {
        self.push(TraceEvent::Mark { region, begin: true });
    }

    pub fn end(&mut self, region: u16) {
        self.push(TraceEvent::Mark { region, begin: false });
    }

    pub fn alu(&mut self, count: u32) {
        if count == 0 {
            return;
        }
        if let Some(TraceEvent::Alu { count: c }) = self.events.last_mut() {
            *c += count;
        } else {
            self.push(TraceEvent::Alu { count });
        }
    }

    pub fn load(&mut self, addr: u32, bytes: u8, region: Region) {
        self.push(TraceEvent::Load { addr, bytes, region });
    }

    pub fn store(&mut self, addr: u32, bytes: u8, region: Region) {
        self.push(TraceEvent::Store { addr, bytes, region });
    }

    pub fn mul(&mut self) {
        self.push(TraceEvent::Mul);
    }

    pub fn shift(&mut self, amount: u32) {
        self.push(TraceEvent::Shift { amount: amount.min(31) as u8 });
    }

    pub fn branch(&mut self, pc: u32, target: u32, taken: bool) {
        self.push(TraceEvent::Branch { pc, target, taken });
    }

    /// Closing branch of a loop body: jumps back to `pc - 32` unless this
    /// was the last iteration.
    pub fn loop_back(&mut self, pc: u32, again: bool) {
        self.branch(pc, pc - 32, again);
    }

    /// Forward conditional skip to `pc + 32`.
    pub fn skip(&mut self, pc: u32, taken: bool) {
        self.branch(pc, pc + 32, taken);
    }

    pub fn cfu(&mut self, funct3: u8, funct7: u8, extra_latency: u32, macs: u32) {
        self.push(TraceEvent::CfuIssue { funct3, funct7, extra_latency, macs });
    }

    pub fn instructions(&self) -> u64 {
        self.events.iter().map(TraceEvent::instructions).sum()
    }

    /// Total multiply-accumulates performed inside CFU issues.
    pub fn cfu_macs(&self) -> u64 {
        self.events
            .iter()
            .map(|e| match e {
                TraceEvent::CfuIssue { macs, .. } => *macs as u64,
                _ => 0,
            })
            .sum()
    }

    pub fn count(&self, pred: impl Fn(&TraceEvent) -> bool) -> u64 {
        self.events.iter().filter(|e| pred(e)).count() as u64
    }
}
