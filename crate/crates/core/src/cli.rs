//! The `cfu-sim` command line.
//!
//! Exit codes: 0 success, 1 usage or I/O, 2 infeasible configuration, 3 parse
//! error, 4 golden mismatch, 5 step or space cap.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::cfus;
use crate::costmodel::{self, Calibration, Catalog, CostError};
use crate::dse::{self, Algo, DseError, Evaluator, SearchSpace};
use crate::isa::{self, listing_line, AsmError, ProgramImage, DEFAULT_ORIGIN};
use crate::kernels::KernelVariant;
use crate::machine::{
    iss_run, run_benchmark, run_ladder, BenchError, ConfigError, CpuConfig, LadderCase, Stop, TimingParams,
};
use crate::workloads::{self, WorkloadError, WorkloadSpec, MNV2_SLICE};

#[derive(Debug, Parser)]
#[command(name = "cfu-sim", version, about = "RV32IM + CFU simulator, kernel ladders and design-space exploration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble a source file and print its listing.
    Asm {
        source: PathBuf,
        /// Write the image as a hex word file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Disassemble hex words given inline or in hex word files.
    Disasm {
        #[arg(required = true)]
        inputs: Vec<String>,
        /// Address of the first word when the input gives none.
        #[arg(long, value_parser = parse_hex_u32, default_value = "0x40000000")]
        origin: u32,
    },
    /// Run a program on the instruction-set simulator.
    Run {
        /// Assembly source, or a hex word file.
        program: PathBuf,
        #[arg(long)]
        cpu: Option<PathBuf>,
        #[arg(long)]
        timing: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: u64,
        #[arg(long)]
        profile: bool,
    },
    /// Run a workload with one kernel variant and check its output.
    Bench {
        /// TMDL file or bundled workload name.
        #[arg(long, default_value = MNV2_SLICE)]
        workload: PathBuf,
        #[arg(long, default_value = "baseline")]
        variant: KernelVariant,
        /// Defaults to the standard core with the CFU the variant needs.
        #[arg(long)]
        cpu: Option<PathBuf>,
        #[arg(long)]
        timing: Option<PathBuf>,
        #[arg(long)]
        profile: bool,
    },
    /// Print an optimization sequence with cycle counts and speedups.
    Ladder {
        #[arg(long)]
        case: LadderCase,
        #[arg(long)]
        timing: Option<PathBuf>,
    },
    /// Search a configuration space and write the trials as CSV.
    Dse {
        /// Space file, or `small` / `default` for the shipped spaces.
        #[arg(long, default_value = dse::SMALL_SPACE)]
        space: String,
        #[arg(long, default_value = "exhaustive")]
        algo: Algo,
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = MNV2_SLICE)]
        workload: PathBuf,
        /// Base configuration for fields no axis covers.
        #[arg(long)]
        cpu: Option<PathBuf>,
        #[arg(long)]
        timing: Option<PathBuf>,
        /// Largest space exhaustive search accepts.
        #[arg(long, default_value_t = dse::DEFAULT_CAP)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the board catalog.
    Boards,
    /// Itemized resource estimate and board fit of a configuration.
    Estimate {
        #[arg(long)]
        cpu: Option<PathBuf>,
    },
}

fn parse_hex_u32(s: &str) -> Result<u32, String> {
    let t = s.trim();
    let digits = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    u32::from_str_radix(&digits.replace('_', ""), 16).map_err(|_| format!("`{s}` is not a hex word"))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Asm { path: String, source: AsmError },
    #[error("{path}: {message}")]
    HexFile { path: String, message: String },
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Dse(#[from] DseError),
    #[error("{0}")]
    Infeasible(String),
    #[error("program trapped: {0:?}")]
    Trapped(String),
    #[error("step limit of {0} reached")]
    StepLimit(u64),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Trapped(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Asm { .. } | CliError::HexFile { .. } | CliError::Config { .. } => 3,
            CliError::Workload(WorkloadError::Io { .. } | WorkloadError::UnknownBundled(_)) => 1,
            CliError::Workload(_) => 3,
            CliError::Cost(CostError::UnknownBoard(_)) => 2,
            CliError::Cost(_) => 3,
            CliError::Bench(e) => match e {
                BenchError::Infeasible { .. } | BenchError::WrongCfu { .. } | BenchError::Cost(_) => 2,
                BenchError::GoldenMismatch { .. } => 4,
                BenchError::Workload(_) | BenchError::Kernel(_) => 3,
                BenchError::Profile(_) => 1,
            },
            CliError::Dse(e) => match e {
                DseError::CapExceeded { .. } => 5,
                DseError::ZeroBudget | DseError::EmptySpace | DseError::OutsideReference { .. } => 1,
                DseError::Bench(b) => CliError::Bench(b.clone()).exit_code(),
                _ => 3,
            },
            CliError::StepLimit(_) => 5,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// CPU configuration (default when absent) and timing parameters; a
/// `--timing` file overrides any `[timing]` section of the CPU file.
fn load_config(cpu: Option<&Path>, timing: Option<&Path>) -> Result<(CpuConfig, TimingParams), CliError> {
    let (cfg, mut t) = match cpu {
        Some(p) => CpuConfig::parse(&read(p)?)
            .map_err(|source| CliError::Config { path: p.display().to_string(), source })?,
        None => (CpuConfig::default(), TimingParams::default()),
    };
    if let Some(p) = timing {
        t = TimingParams::parse(&read(p)?).map_err(|source| CliError::Config { path: p.display().to_string(), source })?;
    }
    Ok((cfg, t))
}

/// Reads a hex word file: one word per line, `@ADDR` setting the address
/// of the next word, `#` starting a comment.
pub fn parse_hex_words(text: &str, default_origin: u32) -> Result<(u32, Vec<u32>), (usize, String)> {
    let mut origin = None;
    let mut words = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        for tok in raw.split('#').next().unwrap_or("").split_whitespace() {
            if let Some(addr) = tok.strip_prefix('@') {
                if !words.is_empty() {
                    return Err((i + 1, "`@` address must precede the words".into()));
                }
                origin = Some(parse_hex_u32(addr).map_err(|e| (i + 1, e))?);
            } else {
                words.push(parse_hex_u32(tok).map_err(|e| (i + 1, e))?);
            }
        }
    }
    Ok((origin.unwrap_or(default_origin), words))
}

pub fn format_hex_words(image: &ProgramImage) -> String {
    let mut out = format!("@{:08x}\n", image.origin);
    for w in &image.words {
        out.push_str(&format!("{w:08x}\n"));
    }
    out
}

fn load_program(path: &Path) -> Result<ProgramImage, CliError> {
    let text = read(path)?;
    let name = path.display().to_string();
    if path.extension().is_some_and(|e| e == "hex") {
        let (origin, words) =
            parse_hex_words(&text, DEFAULT_ORIGIN).map_err(|(line, m)| CliError::HexFile { path: name.clone(), message: format!("line {line}: {m}") })?;
        return ProgramImage::new(origin, words).map_err(|source| CliError::Asm { path: name, source });
    }
    isa::assemble(&text).map_err(|source| CliError::Asm { path: name, source })
}

fn load_workload(path: &Path) -> Result<WorkloadSpec, CliError> {
    Ok(workloads::load(path)?)
}

/// Parses `args` (program name first) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: "<stdout>".into(), source };
    match cmd {
        Command::Asm { source, out: dest } => {
            let image = load_program(&source)?;
            for (i, &w) in image.words.iter().enumerate() {
                writeln!(out, "{}", listing_line(image.origin + 4 * i as u32, w)).map_err(io)?;
            }
            if let Some(dest) = dest {
                write_file(&dest, &format_hex_words(&image))?;
            }
        }
        Command::Disasm { inputs, origin } => {
            // Inline words and files continue from the previous address
            // unless a file sets its own with `@`.
            let mut next = origin;
            for input in inputs {
                let (base, words) = match parse_hex_u32(&input) {
                    Ok(w) if !Path::new(&input).exists() => (next, vec![w]),
                    _ => parse_hex_words(&read(Path::new(&input))?, next).map_err(|(line, m)| CliError::HexFile {
                        path: input.clone(),
                        message: format!("line {line}: {m}"),
                    })?,
                };
                for (i, w) in words.iter().enumerate() {
                    writeln!(out, "{}", listing_line(base + 4 * i as u32, *w)).map_err(io)?;
                }
                next = base + 4 * words.len() as u32;
            }
        }
        Command::Run { program, cpu, timing, max_steps, profile } => {
            let (cfg, t) = load_config(cpu.as_deref(), timing.as_deref())?;
            cfg.validate().map_err(|source| CliError::Config { path: "--cpu".into(), source })?;
            let image = load_program(&program)?;
            let run = iss_run(&cfg, &t, &image, cfus::build(cfg.cfu), max_steps)
                .map_err(|e| CliError::Trapped(e.to_string()))?;
            writeln!(out, "stop      {:?}", run.stop).map_err(io)?;
            writeln!(out, "cycles    {}", run.state.cycles).map_err(io)?;
            writeln!(out, "retired   {}", run.state.retired).map_err(io)?;
            for r in 10..18u8 {
                writeln!(out, "{:<9} {:#010x}", isa::reg_name(r), run.state.reg(r)).map_err(io)?;
            }
            for ((f3, f7), n) in &run.state.cfu_ops {
                writeln!(out, "cfu[{f3},{f7}]  {n}").map_err(io)?;
            }
            if profile {
                writeln!(out, "{}", run.report).map_err(io)?;
            }
            match run.stop {
                Stop::Halted => {}
                Stop::Trapped(trap) => return Err(CliError::Trapped(format!("{trap:?}"))),
                Stop::StepLimit => return Err(CliError::StepLimit(max_steps)),
            }
        }
        Command::Bench { workload, variant, cpu, timing, profile } => {
            let spec = load_workload(&workload)?;
            let (mut cfg, t) = load_config(cpu.as_deref(), timing.as_deref())?;
            if cpu.is_none() {
                cfg.cfu = variant.required_cfu();
            }
            let run = run_benchmark(&cfg, &t, &spec, variant, &Catalog::builtin(), &Calibration::builtin())?;
            writeln!(out, "workload  {}", spec.name).map_err(io)?;
            writeln!(out, "variant   {variant}").map_err(io)?;
            writeln!(out, "golden    pass").map_err(io)?;
            writeln!(out, "macs      {}", run.macs).map_err(io)?;
            writeln!(out, "cycles    {}", run.report.total_cycles).map_err(io)?;
            writeln!(out, "cyc/mac   {:.2}", run.report.total_cycles as f64 / run.macs.max(1) as f64).map_err(io)?;
            if profile {
                writeln!(out, "\n{}", run.report).map_err(io)?;
            }
        }
        Command::Ladder { case, timing } => {
            let (_, t) = load_config(None, timing.as_deref())?;
            let ladder = run_ladder(case, &t, &Catalog::builtin(), &Calibration::builtin())?;
            write!(out, "{ladder}").map_err(io)?;
        }
        Command::Dse { space, algo, budget, seed, workload, cpu, timing, cap, out: dest } => {
            let (base, t) = load_config(cpu.as_deref(), timing.as_deref())?;
            let text = match dse::bundled_space(&space) {
                Some(s) if !Path::new(&space).exists() => s.to_string(),
                _ => read(Path::new(&space))?,
            };
            let space = SearchSpace::parse(&text, base)?;
            let eval = Evaluator::new(load_workload(&workload)?, t, Catalog::builtin(), Calibration::builtin());
            let run = dse::run_dse(&space, &eval, algo, budget, seed, cap)?;
            let csv = run.to_csv();
            let summary: &mut dyn Write = match &dest {
                Some(d) => {
                    write_file(d, &csv)?;
                    out
                }
                None => {
                    out.write_all(csv.as_bytes()).map_err(io)?;
                    err
                }
            };
            let feasible = run.trials.iter().filter(|t| t.feasible).count();
            writeln!(summary, "cardinality {}", space.cardinality()).map_err(io)?;
            writeln!(summary, "trials      {} ({feasible} feasible)", run.trials.len()).map_err(io)?;
            writeln!(summary, "front       {} points", run.front.len()).map_err(io)?;
            for tr in run.front_trials() {
                let values: Vec<String> =
                    run.axes.iter().map(|a| format!("{a}={}", tr.config.get(a).unwrap_or_default())).collect();
                writeln!(
                    summary,
                    "  #{:<5} luts {:>6} cycles {:>10}  {}",
                    tr.trial_id,
                    tr.estimate.luts,
                    tr.cycles.unwrap_or(0),
                    values.join(" ")
                )
                .map_err(io)?;
            }
        }
        Command::Boards => {
            writeln!(out, "{:<14} {:>7} {:>5} {:>9} {:>11} {:>10} {:>4}", "board", "luts", "dsps", "bram", "sram", "rom", "mhz")
                .map_err(io)?;
            for b in &Catalog::builtin().boards {
                writeln!(
                    out,
                    "{:<14} {:>7} {:>5} {:>9} {:>11} {:>10} {:>4}",
                    b.name, b.luts, b.dsps, b.bram_bytes, b.sram_bytes, b.rom_bytes, b.clk_mhz
                )
                .map_err(io)?;
            }
        }
        Command::Estimate { cpu } => {
            let (cfg, _) = load_config(cpu.as_deref(), None)?;
            let catalog = Catalog::builtin();
            let board = catalog.board(&cfg.board)?;
            let est = costmodel::estimate(&cfg, &Calibration::builtin());
            let verdict = costmodel::feasible(&est, board, None);
            writeln!(out, "{est}").map_err(io)?;
            writeln!(out, "board     {}", board.name).map_err(io)?;
            writeln!(out, "fit       {verdict}").map_err(io)?;
            if !verdict.is_feasible() {
                return Err(CliError::Infeasible(format!("does not fit {}: {verdict}", board.name)));
            }
        }
    }
    let _ = err.flush();
    Ok(())
}
