//! `skvm`: run and trace programs, learn skills from tasks, drive curricula
//! and export learned programs.
//!
//! Exit codes: 0 success or solved, 1 error, 2 fuel exhausted, 3 unsolved.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{FileConfig, Overrides, RunConfig};
use skvm_core::curriculum::LearnerKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "skvm",
    version,
    about = "Skill virtual machine and composition learner"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON config file; flags and SKVM_* variables take precedence.
    #[arg(long, global = true, env = "SKVM_CONFIG")]
    config: Option<PathBuf>,
    /// Instruction budget per execution.
    #[arg(long, global = true, env = "SKVM_FUEL")]
    fuel: Option<u64>,
    #[arg(long, global = true, env = "SKVM_SEED")]
    seed: Option<u64>,
    /// mcts, gradient or both.
    #[arg(long, global = true, env = "SKVM_LEARNER")]
    learner: Option<LearnerKind>,
    /// Tree-search node expansions.
    #[arg(long, global = true, env = "SKVM_BUDGET")]
    budget: Option<usize>,
    /// SPSA iterations.
    #[arg(long, global = true, env = "SKVM_ITERS")]
    iters: Option<usize>,
    /// Base URL of an α advisor; unset means the uniform prior.
    #[arg(long, global = true, env = "SKVM_ADVISOR_URL")]
    advisor_url: Option<String>,
    #[arg(long, global = true, env = "SKVM_ADVISOR_TIMEOUT_MS")]
    advisor_timeout_ms: Option<u64>,
    #[arg(long, global = true, env = "SKVM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "SKVM_MAX_GENERATIONS")]
    max_generations: Option<usize>,
    /// Directory written by `curriculum`; defaults to the standard library.
    #[arg(long, global = true, env = "SKVM_REGISTRY")]
    registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProgramArgs {
    /// Assembly source.
    program: PathBuf,
    /// Input data `name=[v, ...]`, written to memory in order.
    #[arg(long = "in", value_name = "NAME=[..]")]
    inputs: Vec<String>,
    /// Output region `name=len`, allocated after the inputs. Default `out=1`.
    #[arg(long = "out", value_name = "NAME=LEN")]
    outputs: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a program and print its output regions.
    Run(ProgramArgs),
    /// Run a program, printing one tab-separated line per executed instruction.
    Trace {
        #[command(flatten)]
        program: ProgramArgs,
        /// Also print elapsed wall time to stderr.
        #[arg(long)]
        wall_time: bool,
    },
    /// Learn a composition plan for one task file.
    Learn {
        task: PathBuf,
        /// Record wall time in the report.
        #[arg(long)]
        wall_time: bool,
    },
    /// Run generations over a curriculum manifest.
    Curriculum { manifest: PathBuf },
    /// Print a registered skill's program.
    Export { skill: String },
}

fn settings(g: GlobalArgs) -> anyhow::Result<RunConfig> {
    let file = match &g.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        fuel: g.fuel,
        seed: g.seed,
        learner: g.learner,
        budget: g.budget,
        iters: g.iters,
        advisor_url: g.advisor_url,
        advisor_timeout_ms: g.advisor_timeout_ms,
        out_dir: g.out_dir,
        max_generations: g.max_generations,
        registry: g.registry,
    };
    RunConfig::resolve(flags, file)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                commands::EXIT_ERROR.into()
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = settings(cli.global).and_then(|config| match cli.command {
        Command::Run(p) => commands::run(&p.program, &p.inputs, &p.outputs, &config, false, false),
        Command::Trace {
            program: p,
            wall_time,
        } => commands::run(&p.program, &p.inputs, &p.outputs, &config, true, wall_time),
        Command::Learn { task, wall_time } => commands::learn(&task, &config, wall_time),
        Command::Curriculum { manifest } => commands::curriculum(&manifest, &config),
        Command::Export { skill } => commands::export(&skill, &config),
    });
    match result {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::EXIT_ERROR.into()
        }
    }
}
