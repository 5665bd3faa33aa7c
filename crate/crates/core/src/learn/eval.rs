use super::{EXACT_TOLERANCE, PENALTY};
use crate::compose::{compose_recursive, Binding, ComposeError, CompositionPlan};
use crate::exec::{check_slot_lengths, Fuel};
use crate::library::{layout_for, SkillDef};
use crate::state::{State, StateError};
use crate::task::{IoPair, Split, TaskSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub mse: f64,
    pub exact: f64,
}

impl Loss {
    pub fn worst() -> Self {
        Loss {
            mse: PENALTY,
            exact: 0.0,
        }
    }

    /// Higher exact fraction first, then lower mse.
    pub fn better_than(&self, other: &Loss) -> bool {
        self.exact > other.exact || (self.exact == other.exact && self.mse < other.mse)
    }

    pub fn is_exact(&self) -> bool {
        self.exact == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub penalty: f64,
    pub tolerance: f64,
    /// Static memory reserved for call frames on top of the task data.
    pub frame_memory: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            penalty: PENALTY,
            tolerance: EXACT_TOLERANCE,
            frame_memory: 2048,
        }
    }
}

/// Fresh per-pair states for one task over one library.
///
/// Instance states hold the task descriptors first (so descriptor `i` is
/// inventory entry `i`), then every library skill in order.
pub struct Evaluator<'a> {
    pub library: &'a [SkillDef],
    pub task: &'a TaskSpec,
    pub config: EvalConfig,
    train: Vec<State>,
    test: Vec<State>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        library: &'a [SkillDef],
        task: &'a TaskSpec,
        config: EvalConfig,
    ) -> Result<Self, StateError> {
        let data = task
            .train
            .iter()
            .chain(&task.test)
            .map(|p| task.lengths(p).iter().sum::<usize>())
            .max()
            .unwrap_or(0);
        let weights: usize = library
            .iter()
            .filter_map(|s| s.weights.as_ref())
            .map(Vec::len)
            .sum();
        let layout = layout_for(library, data + weights + config.frame_memory);
        let build = |pair: &IoPair| -> Result<State, StateError> {
            let mut s = State::new(layout)?;
            for x in &pair.inputs {
                s.write_data(x)?;
            }
            for len in &task.lengths(pair)[pair.inputs.len()..] {
                s.write_data(&vec![0.0; *len])?;
            }
            for def in library {
                def.install(&mut s)?;
            }
            Ok(s)
        };
        Ok(Self {
            library,
            task,
            config,
            train: task.train.iter().map(build).collect::<Result<_, _>>()?,
            test: task.test.iter().map(build).collect::<Result<_, _>>()?,
        })
    }

    pub fn states(&self, split: Split) -> &[State] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn skill_names(&self) -> Vec<String> {
        self.library.iter().map(|s| s.name.clone()).collect()
    }

    /// Library indices of the task's allowed skills that exist, in the task's order.
    pub fn allowed(&self) -> Vec<usize> {
        self.task
            .allowed
            .iter()
            .filter_map(|n| self.library.iter().position(|s| &s.name == n))
            .collect()
    }

    pub fn fuel(&self) -> Fuel {
        Fuel(self.task.fuel)
    }

    /// Output regions of pair `k` after running `plan`.
    pub fn run_pair(
        &self,
        plan: &CompositionPlan,
        split: Split,
        k: usize,
    ) -> Result<Vec<Vec<f64>>, ComposeError> {
        let end = compose_recursive(&self.states(split)[k], plan, self.fuel())?;
        self.task
            .output_descriptors()
            .map(|d| Ok(end.read_region(d)?))
            .collect()
    }

    /// State of pair `k` after the given hard steps (execution order).
    pub fn run_prefix(
        &self,
        steps: &[(usize, Binding)],
        split: Split,
        k: usize,
    ) -> Result<State, ComposeError> {
        let start = &self.states(split)[k];
        if steps.is_empty() {
            return Ok(start.clone());
        }
        let columns: Vec<usize> = steps.iter().map(|s| s.0).collect();
        let seq: Vec<(usize, Binding)> = steps
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.1.clone()))
            .collect();
        compose_recursive(
            start,
            &CompositionPlan::from_sequence(columns, &seq),
            self.fuel(),
        )
    }

    fn pair_loss(&self, got: Result<Vec<Vec<f64>>, ComposeError>, want: &IoPair) -> (f64, bool) {
        let Ok(got) = got else {
            return (self.config.penalty, false);
        };
        let mut sq = 0.0;
        let mut worst: f64 = 0.0;
        let mut words = 0usize;
        for (g, w) in got.iter().zip(&want.outputs) {
            for (a, b) in g.iter().zip(w) {
                let e = a - b;
                sq += e * e;
                worst = worst.max(e.abs());
                words += 1;
            }
        }
        let mse = if words == 0 { 0.0 } else { sq / words as f64 };
        if !mse.is_finite() || !worst.is_finite() {
            return (self.config.penalty, false);
        }
        (mse.min(self.config.penalty), worst <= self.config.tolerance)
    }

    pub fn evaluate(&self, plan: &CompositionPlan, split: Split) -> Loss {
        let pairs = self.task.pairs(split);
        if pairs.is_empty() {
            return Loss::worst();
        }
        let mut mse = 0.0;
        let mut exact = 0usize;
        for (k, pair) in pairs.iter().enumerate() {
            let (m, e) = self.pair_loss(self.run_pair(plan, split, k), pair);
            mse += m;
            exact += usize::from(e);
        }
        Loss {
            mse: mse / pairs.len() as f64,
            exact: exact as f64 / pairs.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BindingSet {
    pub bindings: Vec<Binding>,
    pub truncated: bool,
}

/// Every slot assignment whose lengths fit the skill on all train pairs.
/// Inputs may read any descriptor; outputs only intermediates and outputs.
/// Ordered lexicographically by slot, first slot most significant.
pub fn enumerate_bindings(task: &TaskSpec, skill: &SkillDef, cap: usize) -> BindingSet {
    let header = skill.header();
    let lengths: Vec<Vec<usize>> = task.train.iter().map(|p| task.lengths(p)).collect();
    let candidates: Vec<Vec<usize>> = (0..skill.n_slots())
        .map(|k| {
            let from = if k < skill.inputs.len() {
                0
            } else {
                task.first_writable()
            };
            (from..task.inventory_len()).collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) && skill.n_slots() > 0 {
        return BindingSet {
            bindings: Vec::new(),
            truncated: false,
        };
    }
    let mut out = Vec::new();
    let mut index = vec![0usize; skill.n_slots()];
    loop {
        let binding: Vec<usize> = index.iter().zip(&candidates).map(|(i, c)| c[*i]).collect();
        let fits = lengths.iter().all(|l| {
            let bound: Vec<usize> = binding.iter().map(|d| l[*d]).collect();
            check_slot_lengths(&header, &bound).is_ok()
        });
        if fits {
            if out.len() == cap {
                return BindingSet {
                    bindings: out,
                    truncated: true,
                };
            }
            out.push(Binding(binding));
        }
        // odometer increment, last slot fastest
        let mut k = index.len();
        loop {
            if k == 0 {
                return BindingSet {
                    bindings: out,
                    truncated: false,
                };
            }
            k -= 1;
            index[k] += 1;
            if index[k] < candidates[k].len() {
                break;
            }
            index[k] = 0;
        }
    }
}

/// A joint (skill, binding) choice; `column` indexes the allowed skill list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    pub column: usize,
    pub skill: usize,
    pub binding: Binding,
}

/// All actions over the allowed skills, column-major; the flag reports truncation.
pub fn enumerate_actions(eval: &Evaluator, allowed: &[usize], cap: usize) -> (Vec<Action>, bool) {
    let mut actions = Vec::new();
    let mut truncated = false;
    for (column, &skill) in allowed.iter().enumerate() {
        let set = enumerate_bindings(eval.task, &eval.library[skill], cap);
        truncated |= set.truncated;
        actions.extend(set.bindings.into_iter().map(|binding| Action {
            column,
            skill,
            binding,
        }));
    }
    (actions, truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::BINDING_CAP;
    use crate::library::standard_library;
    use crate::task::{Port, Shape};

    fn add_task() -> TaskSpec {
        let pair = |x: f64, y: f64| IoPair {
            inputs: vec![vec![x], vec![y]],
            outputs: vec![vec![x + y]],
        };
        TaskSpec {
            name: "add".into(),
            description: None,
            inputs: vec![
                Port::new("x", Shape::Fixed(1)),
                Port::new("y", Shape::Fixed(1)),
            ],
            intermediates: vec![Port::new("tmp", Shape::Fixed(1))],
            outputs: vec![Port::new("out", Shape::Fixed(1))],
            train: vec![pair(2.0, 3.0), pair(0.0, 0.0)],
            test: vec![pair(1.0, 1.0)],
            steps: 1,
            fuel: 10_000,
            allowed: vec!["add2".into(), "nop".into()],
        }
    }

    fn by_name(lib: &[SkillDef], n: &str) -> usize {
        lib.iter().position(|s| s.name == n).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let lib = standard_library();
        let task = add_task();
        let eval = Evaluator::new(&lib, &task, EvalConfig::default()).unwrap();
        let add = by_name(&lib, "add2");
        let good = CompositionPlan::from_sequence(vec![add], &[(0, Binding(vec![0, 1, 3]))]);
        assert_eq!(
            eval.evaluate(&good, Split::Train),
            Loss {
                mse: 0.0,
                exact: 1.0
            }
        );

        let nop = by_name(&lib, "nop");
        let idle = CompositionPlan::from_sequence(vec![nop], &[(0, Binding(vec![]))]);
        let l = eval.evaluate(&idle, Split::Train);
        assert_eq!(l.exact, 0.5);
        assert_eq!(l.mse, 12.5);
    }

    #[test]
    fn failing_plans_are_penalized() {
        let mut lib = standard_library();
        lib.push(SkillDef::from_source("spin", "loop: JLEZ 30 0 loop", &[], &[]).unwrap());
        let mut task = add_task();
        task.allowed.push("spin".into());
        task.fuel = 100;
        let eval = Evaluator::new(&lib, &task, EvalConfig::default()).unwrap();
        let spin = CompositionPlan::from_sequence(vec![lib.len() - 1], &[(0, Binding(vec![]))]);
        assert_eq!(
            eval.evaluate(&spin, Split::Train),
            Loss {
                mse: PENALTY,
                exact: 0.0
            }
        );
    }

    /// Brute-force count of add2 bindings over four length-1 descriptors.
    #[test]
    fn enumerate_examples() {
        let lib = standard_library();
        let task = add_task();
        let add = &lib[by_name(&lib, "add2")];
        let set = enumerate_bindings(&task, add, BINDING_CAP);
        let mut brute = 0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    brute += usize::from(a < 4 && b < 4 && c >= 2);
                }
            }
        }
        assert_eq!(set.bindings.len(), brute);
        assert_eq!(brute, 32);
        assert!(!set.truncated);
        assert_eq!(set.bindings[0], Binding(vec![0, 0, 2]));
        let capped = enumerate_bindings(&task, add, 10);
        assert_eq!((capped.bindings.len(), capped.truncated), (10, true));
        assert_eq!(capped.bindings[..], set.bindings[..10]);

        let mut long = task.clone();
        long.allowed = vec!["fold_add".into()];
        let fold = &lib[by_name(&lib, "fold_add")];
        let mut need3 = fold.clone();
        need3.inputs = vec![crate::state::SlotShape::Fixed(3)];
        assert!(enumerate_bindings(&long, &need3, BINDING_CAP)
            .bindings
            .is_empty());
        let nop = &lib[by_name(&lib, "nop")];
        assert_eq!(
            enumerate_bindings(&task, nop, BINDING_CAP).bindings,
            vec![Binding(vec![])]
        );
    }
}
