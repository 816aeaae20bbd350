use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use bmolab::acceptance;
use bmolab::report::to_json;
use bmolab::run::run_scenario;

#[derive(Parser)]
#[command(name = "bmolab", version, about = "Weighted BMO laboratory on exact step functions")]
struct Cli {
    /// Run the built-in acceptance suite.
    #[arg(long)]
    self_test: bool,
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory for report files; without it the JSON report goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the default random test functions.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// A_1 and A_p characteristics of the scenario weight.
    CharacterizeWeight,
    /// Reverse Hoelder constant (and the largest exponent under `rhi.c_max`).
    Rhi,
    /// Classical and weighted BMO seminorms of `bmo.function`.
    Bmo,
    /// Sharp maximal function of `bmo.function`.
    Sharp,
    /// Uniform local L^q bounds of the scenario operator.
    Hypothesis,
    /// End-to-end check that the operator maps uL^inf to BMO_u.
    Theorem,
    /// Grid-refinement study of `converge.functional`.
    Converge,
    /// Every output listed in the scenario's `outputs` key.
    Run,
    /// Run the built-in acceptance suite.
    SelfTest,
}

impl Command {
    fn output(self) -> Option<&'static str> {
        Some(match self {
            Command::CharacterizeWeight => "characterize-weight",
            Command::Rhi => "rhi",
            Command::Bmo => "bmo",
            Command::Sharp => "sharp",
            Command::Hypothesis => "hypothesis",
            Command::Theorem => "theorem",
            Command::Converge => "converge",
            Command::Run | Command::SelfTest => return None,
        })
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> io::Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn self_test(common: &Common) -> ExitCode {
    let results = acceptance::run_all(common.out.as_deref());
    let failed = results.iter().filter(|r| !r.passed).count();
    let mut text: String = results.iter().map(|r| r.line() + "\n").collect();
    text.push_str(&format!("self-test: {} passed, {failed} failed\n", results.len() - failed));
    if let Err(e) = emit(&text) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(if failed == 0 { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.common;
    if let Some(k) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot configure {k} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let command = cli.command.unwrap_or(Command::Run);
    if cli.self_test || matches!(command, Command::SelfTest) {
        return self_test(&common);
    }

    let mut overrides = Vec::new();
    if let Some(o) = command.output() {
        overrides.push(("outputs", o.to_string()));
    }
    if let Some(s) = common.seed {
        overrides.push(("seed", s.to_string()));
    }
    if let Some(d) = &common.out {
        overrides.push(("output.dir", d.display().to_string()));
    }
    let start = Instant::now();
    let outcome = run_scenario(common.scenario.as_deref(), &overrides);
    eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    if let Some(report) = &outcome.report {
        if outcome.written.is_empty() {
            match to_json(report).map_err(|e| e.to_string()).and_then(|t| emit(&t).map_err(|e| e.to_string())) {
                Ok(()) => {}
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
        } else {
            for p in &outcome.written {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
