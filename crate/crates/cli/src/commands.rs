use crate::config::RunConfig;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use skvm_core::asm::assemble;
use skvm_core::compose::PlanFile;
use skvm_core::curriculum::{
    export_program, learn_task, load_manifest, run_curriculum, save_manifest, GenerationReport,
    SkillRegistry,
};
use skvm_core::exec::{run as execute, Fuel, RunErrorKind, StepTrace, DEFAULT_FUEL};
use skvm_core::learn::{CurvePoint, Loss};
use skvm_core::library::STANDARD_NAMES;
use skvm_core::state::{RegionLayout, State, INSTRUCTION_WORDS};
use skvm_core::task::TaskSpec;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FUEL: u8 = 2;
pub const EXIT_UNSOLVED: u8 = 3;

/// Memory reserved past the declared regions for program scratch.
const SCRATCH_MEMORY: usize = 4096;

fn parse_input(arg: &str) -> Result<(String, Vec<f64>)> {
    let (name, values) = arg
        .split_once('=')
        .with_context(|| format!("`{arg}`: expected NAME=[v, ...]"))?;
    let values: Vec<f64> = serde_json::from_str(values.trim())
        .with_context(|| format!("`{arg}`: values must be a JSON number list"))?;
    Ok((name.trim().to_string(), values))
}

fn parse_output(arg: &str) -> Result<(String, usize)> {
    let (name, len) = arg
        .split_once('=')
        .with_context(|| format!("`{arg}`: expected NAME=LEN"))?;
    Ok((
        name.trim().to_string(),
        len.trim()
            .parse()
            .with_context(|| format!("`{arg}`: bad length"))?,
    ))
}

fn format_values(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn print_trace(trace: &[StepTrace]) {
    for line in trace {
        println!("{line}");
    }
}

/// `run` and `trace`: inputs then outputs are laid out contiguously from memory address 0.
pub fn run(
    program: &Path,
    inputs: &[String],
    outputs: &[String],
    config: &RunConfig,
    trace: bool,
    wall_time: bool,
) -> Result<u8> {
    let source = std::fs::read_to_string(program)
        .with_context(|| format!("reading {}", program.display()))?;
    let code = assemble(&source).with_context(|| format!("assembling {}", program.display()))?;
    let inputs = inputs
        .iter()
        .map(|a| parse_input(a))
        .collect::<Result<Vec<_>>>()?;
    let mut outputs = outputs
        .iter()
        .map(|a| parse_output(a))
        .collect::<Result<Vec<_>>>()?;
    if outputs.is_empty() {
        outputs.push(("out".to_string(), 1));
    }
    let data: usize = inputs.iter().map(|i| i.1.len()).sum::<usize>()
        + outputs.iter().map(|o| o.1).sum::<usize>();
    let layout = RegionLayout {
        code_capacity: code.len().max(INSTRUCTION_WORDS),
        static_memory_capacity: data + SCRATCH_MEMORY,
        descriptor_capacity: (inputs.len() + outputs.len()).max(1),
        ..RegionLayout::default()
    };
    let mut state = State::new(layout)?;
    for (_, v) in &inputs {
        state.write_data(v)?;
    }
    let mut regions = Vec::new();
    for (name, len) in &outputs {
        regions.push((name.clone(), state.write_data(&vec![0.0; *len])?));
    }
    state.load_program(&code)?;

    let fuel = Fuel(config.fuel.unwrap_or(DEFAULT_FUEL));
    let started = Instant::now();
    let result = execute(&state, fuel);
    let elapsed = started.elapsed();
    let (end, steps, code) = match result {
        Ok((end, steps)) => (end, steps, EXIT_OK),
        Err(e) => {
            if trace {
                print_trace(&e.trace);
            }
            if wall_time {
                eprintln!("wall_time_ms\t{:.3}", elapsed.as_secs_f64() * 1e3);
            }
            return match e.kind {
                RunErrorKind::FuelExhausted => {
                    eprintln!("fuel exhausted after {} steps", e.trace.len());
                    Ok(EXIT_FUEL)
                }
                RunErrorKind::Step(err) => {
                    eprintln!("error: {err}");
                    Ok(EXIT_ERROR)
                }
            };
        }
    };
    if trace {
        print_trace(&steps);
    }
    for (name, d) in regions {
        println!("{name}={}", format_values(&end.read_region(d)?));
    }
    if wall_time {
        eprintln!("wall_time_ms\t{:.3}", elapsed.as_secs_f64() * 1e3);
    }
    Ok(code)
}

fn registry(config: &RunConfig) -> Result<SkillRegistry> {
    match &config.registry {
        Some(dir) => Ok(load_manifest(dir)
            .with_context(|| format!("loading registry {}", dir.display()))?
            .0),
        None => Ok(SkillRegistry::with_atomic(&STANDARD_NAMES)?),
    }
}

fn read_task(path: &Path) -> Result<TaskSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TaskSpec::from_json(&text).with_context(|| format!("loading task {}", path.display()))
}

fn apply_fuel(task: &mut TaskSpec, config: &RunConfig) {
    if let Some(f) = config.fuel {
        task.fuel = f;
    }
}

#[derive(Serialize)]
struct LearnReport<'a> {
    task: &'a str,
    learner: skvm_core::curriculum::LearnerKind,
    seed: u64,
    budget: usize,
    iters: usize,
    solved: bool,
    train: Loss,
    test: Loss,
    spent: usize,
    solved_at: Option<usize>,
    advisor_fallbacks: usize,
    truncated_bindings: bool,
    ties: &'a [usize],
    curve: &'a [CurvePoint],
    plan_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<f64>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn learn(task_path: &Path, config: &RunConfig, wall_time: bool) -> Result<u8> {
    let mut task = read_task(task_path)?;
    apply_fuel(&mut task, config);
    let registry = registry(config)?;
    let started = Instant::now();
    let attempt = learn_task(registry.library(), &task, &config.learner_config())?;
    let elapsed = started.elapsed();

    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let solved = attempt.solved();
    let plan_file = solved.then(|| format!("{}.plan.json", task.name));
    if let Some(name) = &plan_file {
        write_json(
            &config.out_dir.join(name),
            &PlanFile::from_plan(&attempt.plan, &registry.names()),
        )?;
    }
    let report = LearnReport {
        task: &task.name,
        learner: attempt.learner,
        seed: config.seed,
        budget: config.budget,
        iters: config.iters,
        solved,
        train: attempt.train,
        test: attempt.test,
        spent: attempt.spent,
        solved_at: attempt.solved_at,
        advisor_fallbacks: attempt.advisor_fallbacks,
        truncated_bindings: attempt.truncated_bindings,
        ties: &attempt.ties,
        curve: &attempt.curve,
        plan_file,
        wall_time_ms: wall_time.then_some(elapsed.as_secs_f64() * 1e3),
    };
    write_json(
        &config.out_dir.join(format!("{}.report.json", task.name)),
        &report,
    )?;
    println!(
        "{}\t{}\ttrain_exact={}\ttest_exact={}\tspent={}",
        task.name,
        if solved { "solved" } else { "unsolved" },
        attempt.train.exact,
        attempt.test.exact,
        attempt.spent
    );
    Ok(if solved { EXIT_OK } else { EXIT_UNSOLVED })
}

/// A task given inline or as a path relative to the manifest.
#[derive(Deserialize)]
#[serde(untagged)]
enum TaskSource {
    Path(PathBuf),
    Inline(Box<TaskSpec>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurriculumInput {
    /// Standard skills to start from; ignored when `--registry` is given.
    #[serde(default)]
    atomic: Vec<String>,
    tasks: Vec<TaskSource>,
}

fn generation_line(r: &GenerationReport) -> String {
    let names = |o: &[skvm_core::curriculum::TaskOutcome]| {
        o.iter()
            .map(|t| t.task.clone())
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "generation {}\tsolved={}\tunsolved={}\tspent={}",
        r.generation,
        names(&r.solved),
        names(&r.unsolved),
        r.spent()
    )
}

pub fn curriculum(manifest: &Path, config: &RunConfig) -> Result<u8> {
    let text = std::fs::read_to_string(manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let input: CurriculumInput = serde_json::from_str(&text)
        .with_context(|| format!("parsing manifest {}", manifest.display()))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut tasks = Vec::new();
    for source in input.tasks {
        let mut task = match source {
            TaskSource::Path(p) => read_task(&base.join(p))?,
            TaskSource::Inline(t) => {
                t.validate()?;
                *t
            }
        };
        apply_fuel(&mut task, config);
        tasks.push(task);
    }
    let mut registry = match &config.registry {
        Some(_) => registry(config)?,
        None if input.atomic.is_empty() => {
            bail!("manifest lists no atomic skills and no --registry was given")
        }
        None => SkillRegistry::with_atomic(&input.atomic)?,
    };
    let reports = run_curriculum(
        &mut registry,
        &tasks,
        config.max_generations,
        &config.learner_config(),
    )?;
    save_manifest(&config.out_dir, &registry, &tasks, &reports)
        .with_context(|| format!("writing {}", config.out_dir.display()))?;
    for r in &reports {
        println!("{}", generation_line(r));
    }
    let solved: usize = reports.iter().map(|r| r.solved.len()).sum();
    Ok(if solved == tasks.len() {
        EXIT_OK
    } else {
        EXIT_UNSOLVED
    })
}

pub fn export(skill: &str, config: &RunConfig) -> Result<u8> {
    let registry = registry(config)?;
    print!("{}", export_program(&registry, skill)?);
    Ok(EXIT_OK)
}
