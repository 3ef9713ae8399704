use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qfb_core::engine::{loopback_timing_check, run_feedback_round, EngineError, ScriptedBackend};
use qfb_core::experiments::export::{export_feedforward, export_random_walk, export_reset, export_stabilization, write_json};
use qfb_core::experiments::programs::reset_plan;
use qfb_core::experiments::{
    run_feedforward, run_random_walk, run_random_walk_exact, run_reset, run_stabilization, ExperimentConfig,
    ExperimentError,
};
use qfb_core::isa::{
    assemble_in, decode_control, decode_measure, deserialize_tag_packet, disassemble, serialize_tag_packet, IsaError,
    Program,
};
use qfb_core::readout::IqPoint;

#[derive(Parser, Debug)]
#[command(name = "qfb", version, about = "Digital twin of an FPGA qubit feedback controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Reset,
    Stabilize,
    Feedforward,
    Randomwalk,
    Timing,
    DemoIsa,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Reset => "reset",
            Experiment::Stabilize => "stabilize",
            Experiment::Feedforward => "feedforward",
            Experiment::Randomwalk => "randomwalk",
            Experiment::Timing => "timing",
            Experiment::DemoIsa => "demo-isa",
        }
    }
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    experiment: Experiment,
    /// JSON config; may be partial and may name a "profile".
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Output directory (default: runs/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-key override, e.g. latency.tau_ao=96. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; 1 is fully serial, 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Decoherence, readout noise and crosstalk off.
    #[arg(long)]
    ideal: bool,
    /// Random walk: enumerate tag histories on density matrices instead of sampling.
    #[arg(long)]
    exact: bool,
    /// demo-isa: assemble this file instead of the built-in reset program.
    #[arg(long)]
    program: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(String),
    Assembly(String),
    Timing(String),
    Io(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Assembly(_) => 4,
            CliError::Timing(_) => 5,
            CliError::Io(_) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Config(m) => ("config", m),
            CliError::Assembly(m) => ("assembly", m),
            CliError::Timing(m) => ("timing", m),
            CliError::Io(m) => ("io", m),
            CliError::Run(m) => ("run", m),
        };
        // one line, whatever the message contains
        write!(f, "error: {kind}: {}", msg.replace('\n', " "))
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config { .. } => CliError::Config(e.to_string()),
            ExperimentError::Io(e) => CliError::Io(e.to_string()),
            ExperimentError::Isa(e) => CliError::Assembly(e.to_string()),
            ExperimentError::Engine(e) => e.into(),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::TagTiming { .. } | EngineError::DelayTooShort { .. } => CliError::Timing(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn assembly_error(path: &Path, e: IsaError) -> CliError {
    match e.line() {
        Some(line) => {
            let text = e.to_string();
            let msg = text.split_once(": ").map(|(_, m)| m.to_string()).unwrap_or(text);
            CliError::Assembly(format!("{}:{line}: {msg}", path.display()))
        }
        None => CliError::Assembly(format!("{}: {e}", path.display())),
    }
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.overlay_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    for o in &args.overrides {
        cfg.set(o)?;
    }
    if args.ideal {
        cfg = cfg.idealized();
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.shots {
        cfg.shots = Some(v);
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_timing(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    let report = loopback_timing_check(&cfg.latency);
    let text = report.render();
    fs::write(out.join("timing.txt"), &text)?;
    write_json(out, "summary.json", &report)?;
    // one feedback round with the signal reading excited, to show the loop
    let plan = reset_plan(cfg, 1)?;
    let mut backend = ScriptedBackend::new(vec![IqPoint::new(-1.0, 0.0); 2]);
    let round = run_feedback_round(&plan.boards, &cfg.latency, &mut backend)?;
    let mut csv = Vec::new();
    round.timeline.write_csv(&mut csv)?;
    fs::write(out.join("timeline.csv"), csv)?;
    write_json(out, "trace.json", &round.timeline.to_trace_json())?;
    if !report.ok() {
        return Err(CliError::Timing(report.mismatches.join("; ")));
    }
    Ok(text)
}

fn run_demo_isa(cfg: &ExperimentConfig, program: Option<&Path>, out: &Path) -> Result<String, CliError> {
    let programs: Vec<(String, Program)> = match program {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new("."));
            let p = assemble_in(&text, base).map_err(|e| assembly_error(path, e))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into());
            vec![(stem, p)]
        }
        None => {
            let plan = reset_plan(cfg, cfg.rounds)?;
            plan.sources
                .into_iter()
                .map(|(stem, text)| {
                    let p = assemble_in(&text, Path::new(".")).map_err(|e| assembly_error(Path::new(&stem), e))?;
                    Ok((stem, p))
                })
                .collect::<Result<_, CliError>>()?
        }
    };
    let mut listing = String::new();
    let mut summary = Vec::new();
    for (stem, p) in &programs {
        let measure = p.measure_words().map_err(|e| assembly_error(Path::new(stem), e))?;
        let control = p.control_words().map_err(|e| assembly_error(Path::new(stem), e))?;
        listing.push_str(&format!("# {stem}\n"));
        for (k, w) in measure.iter().enumerate() {
            let back = decode_measure(*w).map_err(|e| CliError::Run(e.to_string()))?;
            if back != p.measure[k] {
                return Err(CliError::Run(format!("{stem}: measure word {k} does not round-trip")));
            }
            listing.push_str(&format!("m{k:03} 0x{w:09X}\n"));
        }
        for (k, w) in control.iter().enumerate() {
            let back = decode_control(*w).map_err(|e| CliError::Run(e.to_string()))?;
            if back != p.control[k] {
                return Err(CliError::Run(format!("{stem}: control word {k} does not round-trip")));
            }
            listing.push_str(&format!("c{k:03} 0x{w:015X}\n"));
        }
        let mut image = Vec::new();
        p.write_binary(&mut image).map_err(|e| CliError::Run(e.to_string()))?;
        let reread = Program::read_binary(image.as_slice()).map_err(|e| CliError::Run(e.to_string()))?;
        if &reread != p {
            return Err(CliError::Run(format!("{stem}: binary image does not round-trip")));
        }
        fs::write(out.join(format!("{stem}.qfb")), &image)?;
        fs::write(out.join(format!("{stem}.disasm.qasm")), disassemble(p))?;
        summary.push(json!({
            "program": stem,
            "measure_words": measure.len(),
            "control_words": control.len(),
            "image_bytes": image.len(),
        }));
    }
    let mut packets = String::from("tags,lane_a,lane_b\n");
    for tags in 0..=255u8 {
        let p = serialize_tag_packet(tags);
        if deserialize_tag_packet(&p).ok() != Some(tags) {
            return Err(CliError::Run(format!("tag packet {tags:#04x} does not round-trip")));
        }
        packets.push_str(&format!("{tags:08b},{:05b},{:05b}\n", p.lane_a, p.lane_b));
    }
    fs::write(out.join("words.txt"), &listing)?;
    fs::write(out.join("tag_packets.csv"), packets)?;
    write_json(out, "summary.json", &summary)?;
    Ok(listing)
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let cfg = resolve_config(&args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(args.experiment.name()));
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    fs::write(out.join("resolved-config.json"), cfg.to_json() + "\n")?;
    let manifest = json!({
        "experiment": args.experiment.name(),
        "config": args.config.as_ref().map(|p| p.display().to_string()),
        "out": out.display().to_string(),
        "seed": cfg.seed,
        "overrides": args.overrides,
    });
    write_json(&out, "manifest.json", &manifest)?;
    log::info!("running {} into {}", args.experiment.name(), out.display());
    match args.experiment {
        Experiment::Reset => {
            let r = run_reset(&cfg)?;
            export_reset(&r, &out)?;
            let series: Vec<String> = r.excited.iter().map(|p| format!("{:.1}%", 100.0 * p)).collect();
            println!("excited probability per measurement: {}", series.join(" -> "));
        }
        Experiment::Stabilize => {
            let r = run_stabilization(&cfg)?;
            export_stabilization(&r, &out)?;
            for x in &r.rounds {
                println!(
                    "round {}: fidelity {:.2}% theta error {:+.2} deg phi error {:+.2} deg",
                    x.round,
                    100.0 * x.fidelity,
                    x.theta_error_deg,
                    x.phi_error_deg
                );
            }
        }
        Experiment::Feedforward => {
            let r = run_feedforward(&cfg)?;
            export_feedforward(&r, &out)?;
            println!(
                "signal P0/P1 {:.1}/{:.1}%  target final {:.1}/{:.1}%  predicted {:.1}/{:.1}%",
                100.0 * r.signal.p0,
                100.0 * r.signal.p1,
                100.0 * r.target_final.p0,
                100.0 * r.target_final.p1,
                100.0 * r.calibrated.p0,
                100.0 * r.calibrated.p1
            );
        }
        Experiment::Randomwalk => {
            let r = if args.exact { run_random_walk_exact(&cfg, cfg.steps)? } else { run_random_walk(&cfg, cfg.steps)? };
            export_random_walk(&r, &out)?;
            for g in &r.groups {
                let err = g.error_deg.map(|e| format!("{e:+.2} deg")).unwrap_or_else(|| "n/a".into());
                println!("{} {:6.2}% ideal {:+.1} deg error {err}", g.history, g.percentage, g.ideal_deg);
            }
        }
        Experiment::Timing => print!("{}", run_timing(&cfg, &out)?),
        Experiment::DemoIsa => print!("{}", run_demo_isa(&cfg, args.program.as_deref(), &out)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            eprintln!("{err}");
            return ExitCode::from(err.code());
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
