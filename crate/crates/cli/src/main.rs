use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use carflow_cli::config::{ConfigBuilder, ConfigError, RunConfig};
use carflow_cli::pipelines;
use carflow_cli::report::Report;

const EXIT_INVALID_CONFIG: u8 = 2;

/// Finite-mode checks for quasi-free CAR states, their modular data and the
/// shift flow.
///
/// Configuration is `key=value` text: from `--config FILE`, then positional
/// assignments, then the flags below (later sources win).
#[derive(Parser, Debug)]
#[command(name = "carflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CAR relations, quasi-free moments and cyclicity of the vacuum.
    VerifyCar(Options),
    /// Polar-decomposed modular data against the closed forms, and the flow unit.
    ModularReport(Options),
    /// Intertwiner spaces and the super product system dimensions.
    SpdDims(Options),
    /// Relative commutant, coefficient equations and the extendability verdict.
    Obstruction(Options),
    /// Truncated CCR analogue against the closed-form state.
    CcrCompare(Options),
    /// Every pipeline above.
    All(Options),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    VerifyCar,
    ModularReport,
    SpdDims,
    Obstruction,
    CcrCompare,
    All,
}

/// Options shared by every subcommand.
#[derive(clap::Args, Debug)]
struct Options {
    /// `key=value` assignments.
    assignments: Vec<String>,
    /// Configuration file with `key=value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(short = 'L', long = "length")]
    l: Option<usize>,
    #[arg(short = 'd', long = "channels")]
    d: Option<usize>,
    #[arg(short = 't', long = "shift")]
    t: Option<usize>,
    /// Comma-separated channel values.
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long)]
    allow_half: bool,
    #[arg(short = 'N', long = "boson-cutoff")]
    boson_cutoff: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_modes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Print the JSON report to standard output instead of the summary.
    #[arg(long)]
    json: bool,
    /// Lift the intertwiner-size guardrail.
    #[arg(long)]
    force: bool,
}

impl Options {
    fn flag_assignments(&self) -> String {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push(format!("{k}={v}"));
            }
        };
        push("L", self.l.map(|x| x.to_string()));
        push("d", self.d.map(|x| x.to_string()));
        push("t", self.t.map(|x| x.to_string()));
        push("lambdas", self.lambdas.clone());
        push("allow_half", self.allow_half.then(|| "true".to_string()));
        push("N", self.boson_cutoff.map(|x| x.to_string()));
        push("tolerance", self.tolerance.map(|x| x.to_string()));
        push("max_modes", self.max_modes.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        push("output", self.output.as_ref().map(|p| p.display().to_string()));
        out.join(" ")
    }

    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut b = ConfigBuilder::new();
        if let Some(path) = &self.config {
            let origin = path.display().to_string();
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError { origin: origin.clone(), line: 0, message: e.to_string() })?;
            b.parse(&origin, &text)?;
        }
        // One assignment per line so errors point at the offending argument.
        b.parse("arguments", &self.assignments.join("\n"))?;
        b.parse("flags", &self.flag_assignments())?;
        b.build()
    }
}

impl Command {
    fn split(self) -> (Kind, Options) {
        match self {
            Command::VerifyCar(o) => (Kind::VerifyCar, o),
            Command::ModularReport(o) => (Kind::ModularReport, o),
            Command::SpdDims(o) => (Kind::SpdDims, o),
            Command::Obstruction(o) => (Kind::Obstruction, o),
            Command::CcrCompare(o) => (Kind::CcrCompare, o),
            Command::All(o) => (Kind::All, o),
        }
    }
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::VerifyCar => "verify-car",
            Kind::ModularReport => "modular-report",
            Kind::SpdDims => "spd-dims",
            Kind::Obstruction => "obstruction",
            Kind::CcrCompare => "ccr-compare",
            Kind::All => "all",
        }
    }

    fn needs_guardrail(self) -> bool {
        matches!(self, Kind::SpdDims | Kind::All)
    }

    fn run(self, report: &mut Report, cfg: &RunConfig) {
        match self {
            Kind::VerifyCar => pipelines::verify_car(report, cfg),
            Kind::ModularReport => pipelines::modular_report(report, cfg),
            Kind::SpdDims => pipelines::spd_dims(report, cfg),
            Kind::Obstruction => pipelines::obstruction(report, cfg),
            Kind::CcrCompare => pipelines::ccr_compare(report, cfg),
            Kind::All => {
                pipelines::verify_car(report, cfg);
                pipelines::modular_report(report, cfg);
                pipelines::spd_dims(report, cfg);
                pipelines::obstruction(report, cfg);
                pipelines::ccr_compare(report, cfg);
            }
        }
    }
}

fn main() -> ExitCode {
    let (command, opts) = Cli::parse().command.split();

    let cfg = match opts.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    if command.needs_guardrail() {
        if let Err(msg) = pipelines::guardrail(&cfg, opts.force) {
            eprintln!("invalid configuration: {msg}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    }

    let mut report = Report::new(command.name(), cfg.clone());
    command.run(&mut report, &cfg);

    if let Some(path) = &cfg.output {
        if let Err(e) = std::fs::write(path, report.to_json() + "\n") {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    }
    if opts.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.summary());
    }
    ExitCode::from(report.exit_code())
}
