//! Append-only skill registry and the generation loop that grows it.
//!
//! A solved task's hard plan is compiled into an ordinary skill: a prologue
//! per step copies the bound (address, length) pairs into an argument block,
//! then `CALL`s the sub-skill. Registry order is the install order of every
//! instance state, so the compiled `CALL` indices stay valid as the registry
//! grows.

use crate::asm::{assemble, disassemble, AsmError};
use crate::compose::{ComposeError, CompositionPlan, PlanFile};
use crate::exec::{frame, Fuel, InvokeError};
use crate::isa::DecodeError;
use crate::learn::{
    enumerate_actions, gradient_fit, mcts_search, CurvePoint, EvalConfig, Evaluator,
    GradientConfig, LearnError, Loss, MctsConfig,
};
use crate::library::{run_isolated, standard_skill, SkillDef, DEFAULT_SCRATCH};
use crate::policy::AlphaPolicy;
use crate::state::{LocalShape, SlotShape, StateError, Word, MAX_LOCALS, MAX_SLOTS};
use crate::task::{IoPair, Shape, Split, TaskError, TaskSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const MANIFEST_VERSION: u32 = 1;

/// Vector length used for the stored tests of atomic skills.
pub const ATOMIC_TEST_LENGTH: usize = 3;
pub const ATOMIC_TEST_COUNT: usize = 4;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("skill `{0}` is already registered")]
    Collision(String),
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("plan is not hard")]
    NotHard,
    #[error("task `{task}` is not solved on its test split (exact {exact})")]
    NotSolved { task: String, exact: f64 },
    #[error("task `{0}` does not fit one skill frame")]
    TooManyPorts(String),
    #[error("max generations must be at least 1")]
    NoGenerations,
    #[error("the registry is empty")]
    EmptyRegistry,
    #[error("skill file {0} does not match its digest")]
    Digest(String),
    #[error("manifest version {0} is not supported")]
    Version(u32),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Invoke(#[from] InvokeError),
    #[error(transparent)]
    Asm(#[from] AsmError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Atomic,
    Learned {
        task: String,
        generation: usize,
        plan: PlanFile,
        /// Inventory names of the originating task, indexed by descriptor.
        ports: Vec<String>,
    },
}

/// Inputs and the outputs recorded when the skill was registered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTest {
    pub inputs: Vec<Vec<Word>>,
    pub outputs: Vec<Vec<Word>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub provenance: Provenance,
    pub tests: Vec<StoredTest>,
    pub fuel: u64,
}

/// Skills in registration order. Entries are never changed or removed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkillRegistry {
    defs: Vec<SkillDef>,
    entries: Vec<Entry>,
}

fn slot_length(shape: SlotShape, n: usize) -> usize {
    match shape {
        SlotShape::Fixed(k) => k,
        SlotShape::Dim(_) => n,
    }
}

impl SkillRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding the named standard skills in the given order.
    pub fn with_atomic<S: AsRef<str>>(names: &[S]) -> Result<Self, CurriculumError> {
        let mut r = Self::new();
        for n in names {
            let def = standard_skill(n.as_ref())
                .ok_or_else(|| CurriculumError::UnknownSkill(n.as_ref().to_string()))?;
            r.register_atomic(def)?;
        }
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Skill definitions in install order.
    pub fn library(&self) -> &[SkillDef] {
        &self.defs
    }

    pub fn entries(&self) -> impl Iterator<Item = (&SkillDef, &Entry)> {
        self.defs.iter().zip(&self.entries)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }

    pub fn get(&self, name: &str) -> Option<(&SkillDef, &Entry)> {
        self.index_of(name)
            .map(|i| (&self.defs[i], &self.entries[i]))
    }

    pub fn names(&self) -> Vec<String> {
        self.defs.iter().map(|d| d.name.clone()).collect()
    }

    fn record(
        &self,
        def: &SkillDef,
        inputs: &[Vec<Vec<Word>>],
        n: usize,
        fuel: u64,
    ) -> Result<Vec<StoredTest>, CurriculumError> {
        let mut lib = self.defs.clone();
        lib.push(def.clone());
        let index = lib.len() - 1;
        inputs
            .iter()
            .map(|x| {
                let lengths = output_lengths(def, x, n);
                let outputs = run_isolated(&lib, index, x, &lengths, Fuel(fuel))?;
                Ok(StoredTest {
                    inputs: x.clone(),
                    outputs,
                })
            })
            .collect()
    }

    fn append(
        &mut self,
        def: SkillDef,
        provenance: Provenance,
        tests: Vec<StoredTest>,
        fuel: u64,
    ) -> usize {
        self.defs.push(def);
        self.entries.push(Entry {
            provenance,
            tests,
            fuel,
        });
        self.defs.len() - 1
    }

    /// Registers an atomic skill with integer stored tests seeded by its index.
    pub fn register_atomic(&mut self, def: SkillDef) -> Result<usize, CurriculumError> {
        if self.index_of(&def.name).is_some() {
            return Err(CurriculumError::Collision(def.name));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.len() as u64);
        let inputs: Vec<Vec<Vec<Word>>> = (0..ATOMIC_TEST_COUNT)
            .map(|_| {
                def.inputs
                    .iter()
                    .map(|s| {
                        (0..slot_length(*s, ATOMIC_TEST_LENGTH))
                            .map(|_| rng.random_range(-9..=9) as Word)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let fuel = crate::exec::DEFAULT_FUEL;
        let tests = self.record(&def, &inputs, ATOMIC_TEST_LENGTH, fuel)?;
        Ok(self.append(def, Provenance::Atomic, tests, fuel))
    }

    /// Registers a compiled plan; stored tests are the task's test inputs.
    pub fn register_learned(
        &mut self,
        promotion: Promotion,
        generation: usize,
    ) -> Result<usize, CurriculumError> {
        let Promotion { def, task, plan } = promotion;
        if self.index_of(&def.name).is_some() {
            return Err(CurriculumError::Collision(def.name));
        }
        let inputs: Vec<Vec<Vec<Word>>> = task.test.iter().map(|p| p.inputs.clone()).collect();
        let tests = self.record(&def, &inputs, 0, task.fuel)?;
        let ports = task
            .inputs
            .iter()
            .chain(&task.intermediates)
            .chain(&task.outputs)
            .map(|p| p.name.clone())
            .collect();
        let provenance = Provenance::Learned {
            task: task.name.clone(),
            generation,
            plan,
            ports,
        };
        Ok(self.append(def, provenance, tests, task.fuel))
    }

    /// Names of skills whose stored tests no longer reproduce bitwise.
    pub fn forgotten(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, (def, entry)) in self.entries().enumerate() {
            let ok = entry.tests.iter().all(|t| {
                let lengths: Vec<usize> = t.outputs.iter().map(Vec::len).collect();
                run_isolated(&self.defs, i, &t.inputs, &lengths, Fuel(entry.fuel))
                    .is_ok_and(|got| same_bits(&got, &t.outputs))
            });
            if !ok {
                out.push(def.name.clone());
            }
        }
        out
    }
}

fn same_bits(a: &[Vec<Word>], b: &[Vec<Word>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

/// Output lengths for concrete inputs; `n` stands in for unresolved dimensions.
fn output_lengths(def: &SkillDef, inputs: &[Vec<Word>], n: usize) -> Vec<usize> {
    let dim = |g: usize| {
        def.inputs
            .iter()
            .zip(inputs)
            .find(|(s, _)| **s == SlotShape::Dim(g))
            .map(|(_, x)| x.len())
            .unwrap_or(n)
    };
    def.outputs
        .iter()
        .map(|s| match *s {
            SlotShape::Fixed(k) => k,
            SlotShape::Dim(g) => dim(g),
        })
        .collect()
}

/// A compiled, not yet registered, learned skill.
#[derive(Debug, Clone, PartialEq)]
pub struct Promotion {
    pub def: SkillDef,
    pub task: TaskSpec,
    pub plan: PlanFile,
}

fn input_slot_shape(task: &TaskSpec, i: usize) -> SlotShape {
    match task.inputs[i].shape {
        Shape::Any => SlotShape::Dim(i),
        Shape::Fixed(n) => SlotShape::Fixed(n),
        Shape::Like(j) => input_slot_shape(task, j),
    }
}

fn port_slot_shape(task: &TaskSpec, shape: Shape) -> SlotShape {
    match shape {
        Shape::Fixed(n) => SlotShape::Fixed(n),
        Shape::Like(j) => input_slot_shape(task, j),
        Shape::Any => SlotShape::Dim(MAX_SLOTS - 1),
    }
}

/// Frame offset of the (address, length) pair for inventory descriptor `d`.
fn pair_offset(task: &TaskSpec, d: usize) -> usize {
    let (ni, nm) = (task.inputs.len(), task.intermediates.len());
    if d < ni {
        frame::SLOT_PAIRS + 2 * d
    } else if d < ni + nm {
        frame::LOCAL_PAIRS + 2 * (d - ni)
    } else {
        frame::SLOT_PAIRS + 2 * (d - nm)
    }
}

/// Compiles a hard plan over `library` into a skill named after the task.
pub fn compile_plan(
    library: &[SkillDef],
    task: &TaskSpec,
    plan: &CompositionPlan,
) -> Result<SkillDef, CurriculumError> {
    let steps = plan.sequence().ok_or(CurriculumError::NotHard)?;
    if task.inputs.len() + task.outputs.len() > MAX_SLOTS || task.intermediates.len() > MAX_LOCALS {
        return Err(CurriculumError::TooManyPorts(task.name.clone()));
    }
    let mut src = format!(
        "; {}: compiled from a {}-step plan\n",
        task.name,
        steps.len()
    );
    for (skill, binding) in &steps {
        let sub = library
            .get(*skill)
            .ok_or(ComposeError::UnknownSkill(*skill))?;
        if binding.0.len() != sub.n_slots() {
            return Err(ComposeError::Arity {
                skill: *skill,
                expected: sub.n_slots(),
                found: binding.0.len(),
            }
            .into());
        }
        if let Some(d) = binding.0.iter().find(|d| **d >= task.inventory_len()) {
            return Err(ComposeError::InvalidDescriptor(*d).into());
        }
        for (k, d) in binding.0.iter().enumerate() {
            let (from, to) = (pair_offset(task, *d), frame::SCRATCH + 2 * k);
            writeln!(
                src,
                "    MOV {from} 0 {to}\n    MOV {} 0 {}",
                from + 1,
                to + 1
            )
            .unwrap();
        }
        writeln!(
            src,
            "    CALL {skill} {} 0    ; {}",
            frame::SCRATCH,
            sub.name
        )
        .unwrap();
    }
    src.push_str("    RET\n");

    let inputs: Vec<SlotShape> = (0..task.inputs.len())
        .map(|i| input_slot_shape(task, i))
        .collect();
    let outputs: Vec<SlotShape> = task
        .outputs
        .iter()
        .map(|p| port_slot_shape(task, p.shape))
        .collect();
    let mut def = SkillDef::from_source(&task.name, &src, &inputs, &outputs)?;
    def.locals = task
        .intermediates
        .iter()
        .map(|p| match port_slot_shape(task, p.shape) {
            SlotShape::Fixed(n) => LocalShape::Fixed(n),
            SlotShape::Dim(g) => LocalShape::LikeSlot(g),
        })
        .collect();
    def.scratch_words = DEFAULT_SCRATCH;
    Ok(def)
}

/// Compiles, checks the test split and registers. Returns the new skill's index.
pub fn promote_skill(
    registry: &mut SkillRegistry,
    task: &TaskSpec,
    plan: &CompositionPlan,
    generation: usize,
) -> Result<usize, CurriculumError> {
    if registry.index_of(&task.name).is_some() {
        return Err(CurriculumError::Collision(task.name.clone()));
    }
    let def = compile_plan(registry.library(), task, plan)?;
    let eval = Evaluator::new(registry.library(), task, EvalConfig::default())?;
    let test = eval.evaluate(plan, Split::Test);
    if !test.is_exact() {
        return Err(CurriculumError::NotSolved {
            task: task.name.clone(),
            exact: test.exact,
        });
    }
    let plan = PlanFile::from_plan(plan, &registry.names());
    registry.register_learned(
        Promotion {
            def,
            task: task.clone(),
            plan,
        },
        generation,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Mcts,
    Gradient,
    /// Tree search first; SPSA only if the search did not fit the train split.
    Both,
}

impl std::str::FromStr for LearnerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mcts" => Ok(Self::Mcts),
            "gradient" => Ok(Self::Gradient),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown learner `{s}` (mcts, gradient, both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub learner: LearnerKind,
    pub mcts: MctsConfig,
    pub gradient: GradientConfig,
    pub policy: AlphaPolicy,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            learner: LearnerKind::Mcts,
            mcts: MctsConfig::default(),
            gradient: GradientConfig::default(),
            policy: AlphaPolicy::Uniform,
        }
    }
}

/// One learner run on one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub learner: LearnerKind,
    pub plan: CompositionPlan,
    pub train: Loss,
    pub test: Loss,
    /// Expansions (tree search) or iterations (SPSA).
    pub spent: usize,
    pub solved_at: Option<usize>,
    pub curve: Vec<CurvePoint>,
    pub advisor_fallbacks: usize,
    pub truncated_bindings: bool,
    pub ties: Vec<usize>,
}

impl Attempt {
    pub fn solved(&self) -> bool {
        self.test.is_exact()
    }
}

pub fn learn_task(
    library: &[SkillDef],
    task: &TaskSpec,
    config: &LearnerConfig,
) -> Result<Attempt, CurriculumError> {
    task.validate()?;
    let eval = Evaluator::new(library, task, config.mcts.eval)?;
    let tree = || -> Result<Attempt, CurriculumError> {
        let r = mcts_search(&eval, &config.policy, &config.mcts)?;
        Ok(Attempt {
            learner: LearnerKind::Mcts,
            test: eval.evaluate(&r.plan, Split::Test),
            plan: r.plan,
            train: r.train,
            spent: r.expansions,
            solved_at: r.solved_at,
            curve: r.curve,
            advisor_fallbacks: r.advisor_fallbacks,
            truncated_bindings: r.truncated_bindings,
            ties: Vec::new(),
        })
    };
    let spsa = || -> Result<Attempt, CurriculumError> {
        let allowed = eval.allowed();
        if allowed.is_empty() {
            return Err(LearnError::NoSkills(task.name.clone()).into());
        }
        let (actions, truncated) = enumerate_actions(&eval, &allowed, config.mcts.binding_cap);
        let r = gradient_fit(&eval, &actions, &config.gradient)?;
        Ok(Attempt {
            learner: LearnerKind::Gradient,
            test: eval.evaluate(&r.plan, Split::Test),
            solved_at: r.train.is_exact().then_some(config.gradient.iters),
            plan: r.plan,
            train: r.train,
            spent: config.gradient.iters,
            curve: r.curve,
            advisor_fallbacks: 0,
            truncated_bindings: truncated,
            ties: r.ties,
        })
    };
    match config.learner {
        LearnerKind::Mcts => tree(),
        LearnerKind::Gradient => spsa(),
        LearnerKind::Both => {
            let a = tree()?;
            if a.train.is_exact() {
                return Ok(a);
            }
            let b = spsa()?;
            Ok(if b.train.better_than(&a.train) { b } else { a })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task: String,
    pub learner: Option<LearnerKind>,
    pub train: Loss,
    pub test: Loss,
    pub spent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub generation: usize,
    pub attempted: Vec<String>,
    pub solved: Vec<TaskOutcome>,
    pub unsolved: Vec<TaskOutcome>,
}

impl GenerationReport {
    pub fn spent(&self) -> usize {
        self.solved
            .iter()
            .chain(&self.unsolved)
            .map(|o| o.spent)
            .sum()
    }
}

/// Attempts every task against the current registry. Solved tasks come back
/// compiled but unregistered, so task order within a generation is irrelevant.
pub fn run_generation(
    registry: &SkillRegistry,
    tasks: &[&TaskSpec],
    generation: usize,
    config: &LearnerConfig,
) -> Result<(GenerationReport, Vec<Promotion>), CurriculumError> {
    if registry.is_empty() {
        return Err(CurriculumError::EmptyRegistry);
    }
    let names = registry.names();
    let mut report = GenerationReport {
        generation,
        attempted: tasks.iter().map(|t| t.name.clone()).collect(),
        solved: Vec::new(),
        unsolved: Vec::new(),
    };
    let mut promotions = Vec::new();
    for task in tasks {
        let attempt = match learn_task(registry.library(), task, config) {
            Ok(a) => a,
            Err(e) => {
                report.unsolved.push(TaskOutcome {
                    task: task.name.clone(),
                    learner: None,
                    train: Loss::worst(),
                    test: Loss::worst(),
                    spent: 0,
                    plan: None,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        let plan = PlanFile::from_plan(&attempt.plan, &names);
        let mut outcome = TaskOutcome {
            task: task.name.clone(),
            learner: Some(attempt.learner),
            train: attempt.train,
            test: attempt.test,
            spent: attempt.spent,
            plan: Some(plan.clone()),
            error: None,
        };
        if !attempt.solved() {
            report.unsolved.push(outcome);
            continue;
        }
        let compiled = if registry.index_of(&task.name).is_some() {
            Err(CurriculumError::Collision(task.name.clone()))
        } else {
            compile_plan(registry.library(), task, &attempt.plan)
        };
        match compiled {
            Ok(def) => {
                promotions.push(Promotion {
                    def,
                    task: (*task).clone(),
                    plan,
                });
                report.solved.push(outcome);
            }
            Err(e) => {
                outcome.error = Some(format!("cannot promote: {e}"));
                report.unsolved.push(outcome);
            }
        }
    }
    Ok((report, promotions))
}

/// Runs generations until every task is solved, a generation solves nothing,
/// or `max_generations` is reached. Generations are numbered from 1.
pub fn run_curriculum(
    registry: &mut SkillRegistry,
    tasks: &[TaskSpec],
    max_generations: usize,
    config: &LearnerConfig,
) -> Result<Vec<GenerationReport>, CurriculumError> {
    if max_generations == 0 {
        return Err(CurriculumError::NoGenerations);
    }
    let mut pending: Vec<&TaskSpec> = tasks.iter().collect();
    let mut reports = Vec::new();
    for generation in 1..=max_generations {
        if pending.is_empty() {
            break;
        }
        let (report, promotions) = run_generation(registry, &pending, generation, config)?;
        for p in promotions {
            registry.register_learned(p, generation)?;
        }
        pending.retain(|t| !report.solved.iter().any(|o| o.task == t.name));
        let stalled = report.solved.is_empty();
        reports.push(report);
        if stalled {
            break;
        }
    }
    Ok(reports)
}

fn describe_step(library: &[SkillDef], ports: &[String], skill: &str, slots: &[usize]) -> String {
    let n_in = library
        .iter()
        .find(|d| d.name == skill)
        .map_or(slots.len(), |d| d.inputs.len());
    let name = |d: &usize| ports.get(*d).cloned().unwrap_or_else(|| format!("#{d}"));
    let ins: Vec<String> = slots[..n_in.min(slots.len())].iter().map(name).collect();
    let outs: Vec<String> = slots[n_in.min(slots.len())..].iter().map(name).collect();
    format!("{skill}({} -> {})", ins.join(", "), outs.join(", "))
}

/// Disassembly of a registered skill, with its plan as comments if it was learned.
pub fn export_program(registry: &SkillRegistry, name: &str) -> Result<String, CurriculumError> {
    let (def, entry) = registry
        .get(name)
        .ok_or_else(|| CurriculumError::UnknownSkill(name.to_string()))?;
    let mut out = format!("; skill {}\n", def.name);
    match &entry.provenance {
        Provenance::Atomic => out.push_str("; atomic\n"),
        Provenance::Learned {
            task,
            generation,
            plan,
            ports,
        } => {
            writeln!(out, "; learned from task {task} in generation {generation}").unwrap();
            let steps = plan.to_plan(|n| plan.skills.iter().position(|s| s == n))?;
            for (i, (col, binding)) in steps
                .sequence()
                .ok_or(CurriculumError::NotHard)?
                .iter()
                .enumerate()
            {
                let skill = &plan.skills[*col];
                writeln!(
                    out,
                    "; step {}: {}",
                    i + 1,
                    describe_step(registry.library(), ports, skill, &binding.0)
                )
                .unwrap();
            }
        }
    }
    out.push_str(&disassemble(&def.code)?);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    Ok(out)
}

/// One registry entry as persisted; the code lives in `skills/<digest>.svm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryRecord {
    pub name: String,
    pub digest: String,
    pub provenance: Provenance,
    pub inputs: Vec<SlotShape>,
    pub outputs: Vec<SlotShape>,
    #[serde(default)]
    pub locals: Vec<LocalShape>,
    pub scratch_words: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Word>>,
    pub fuel: u64,
    pub tests: Vec<StoredTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub registry: Vec<EntryRecord>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub reports: Vec<GenerationReport>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SKILL_DIR: &str = "skills";

fn skill_source(def: &SkillDef) -> Result<String, CurriculumError> {
    Ok(disassemble(&def.code)?)
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes `manifest.json` and the content-addressed skill files under `dir`.
pub fn save_manifest(
    dir: &Path,
    registry: &SkillRegistry,
    tasks: &[TaskSpec],
    reports: &[GenerationReport],
) -> Result<Manifest, CurriculumError> {
    let skills = dir.join(SKILL_DIR);
    std::fs::create_dir_all(&skills)?;
    let mut records = Vec::new();
    for (def, entry) in registry.entries() {
        let text = skill_source(def)?;
        let d = digest(&text);
        std::fs::write(skills.join(format!("{d}.svm")), &text)?;
        records.push(EntryRecord {
            name: def.name.clone(),
            digest: d,
            provenance: entry.provenance.clone(),
            inputs: def.inputs.clone(),
            outputs: def.outputs.clone(),
            locals: def.locals.clone(),
            scratch_words: def.scratch_words,
            weights: def.weights.clone(),
            fuel: entry.fuel,
            tests: entry.tests.clone(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        registry: records,
        tasks: tasks.to_vec(),
        reports: reports.to_vec(),
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

/// Reads a directory written by [`save_manifest`], checking every skill digest.
pub fn load_manifest(dir: &Path) -> Result<(SkillRegistry, Manifest), CurriculumError> {
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(CurriculumError::Version(manifest.version));
    }
    let mut registry = SkillRegistry::new();
    for r in &manifest.registry {
        let file = dir.join(SKILL_DIR).join(format!("{}.svm", r.digest));
        let text = std::fs::read_to_string(&file)?;
        if digest(&text) != r.digest {
            return Err(CurriculumError::Digest(file.display().to_string()));
        }
        if registry.index_of(&r.name).is_some() {
            return Err(CurriculumError::Collision(r.name.clone()));
        }
        let def = SkillDef {
            name: r.name.clone(),
            code: assemble(&text)?,
            inputs: r.inputs.clone(),
            outputs: r.outputs.clone(),
            locals: r.locals.clone(),
            scratch_words: r.scratch_words,
            weights: r.weights.clone(),
        };
        registry.append(def, r.provenance.clone(), r.tests.clone(), r.fuel);
    }
    Ok((registry, manifest))
}

/// Random pairs with the task's shapes; vector ports get length `n`. Outputs are zero-filled.
pub fn random_inputs(task: &TaskSpec, n: usize, count: usize, seed: u64) -> Vec<IoPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut inputs: Vec<Vec<Word>> = Vec::new();
            for p in &task.inputs {
                let len = match p.shape {
                    Shape::Any => n,
                    Shape::Fixed(k) => k,
                    Shape::Like(j) => inputs[j].len(),
                };
                inputs.push((0..len).map(|_| rng.random_range(-9..=9) as Word).collect());
            }
            let pair = IoPair {
                inputs,
                outputs: Vec::new(),
            };
            let lengths = task.lengths(&pair);
            let outputs = lengths[task.output_descriptors()]
                .iter()
                .map(|l| vec![0.0; *l])
                .collect();
            IoPair { outputs, ..pair }
        })
        .collect()
}
