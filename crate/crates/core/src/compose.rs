//! Recursive composition of skills.
//!
//! A plan holds one α row per timestep over a list of columns. Each column
//! names a skill; the same skill may appear in several columns with different
//! bindings (joint skill/binding actions). Rows are indexed by the countdown
//! value `t` and executed from `t = T-1` down to `0`.
//!
//! Only data words are mixed: static memory and the descriptor table. Every
//! other word must come out identical from every branch of a step.

use crate::exec::{check_slot_lengths, invoke_skill, Fuel, InvokeError};
use crate::state::{header, State, StateError, Word};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `sum(alpha[t]) == 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Current plan file version.
pub const PLAN_VERSION: u32 = 1;

/// One descriptor index per skill slot, inputs first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Binding(pub Vec<usize>);

impl Binding {
    pub fn slots(&self) -> Vec<Option<usize>> {
        self.0.iter().copied().map(Some).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("binding has {found} slots, skill {skill} takes {expected}")]
    Arity {
        skill: usize,
        expected: usize,
        found: usize,
    },
    #[error("descriptor {0} does not exist")]
    InvalidDescriptor(usize),
    #[error("row {t} has {found} weights for {expected} columns")]
    RowLength {
        t: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {t} is not a probability vector")]
    NotNormalized { t: usize },
    #[error("row {t}, column {column} has positive weight but no binding")]
    MissingBinding { t: usize, column: usize },
    #[error("branches disagree on control word {index}")]
    ControlDivergence { index: usize },
    #[error("plan has no steps")]
    EmptyPlan,
    #[error("bindings table does not match the alpha table")]
    BindingShape,
    #[error("skill {0} is not registered")]
    UnknownSkill(usize),
    #[error("unknown skill name `{0}`")]
    UnknownSkillName(String),
    #[error("row {t} has a tie at its maximum")]
    Tie { t: usize, row: Vec<f64> },
    #[error("plan is not hard")]
    NotHard,
    #[error("unsupported plan version {0}")]
    Version(u32),
    #[error(transparent)]
    Invoke(#[from] InvokeError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Writes `binding` into the skill's slot words. Lengths are checked against
/// the slot shapes when the skill is in output mode.
pub fn apply_binding(
    state: &State,
    skill: usize,
    binding: &Binding,
) -> Result<State, ComposeError> {
    let h = state.skill_header(skill)?;
    if binding.0.len() != h.n_slots() {
        return Err(ComposeError::Arity {
            skill,
            expected: h.n_slots(),
            found: binding.0.len(),
        });
    }
    let lengths = binding
        .0
        .iter()
        .map(|d| {
            state
                .descriptor(*d)
                .map(|d| d.length)
                .map_err(|_| ComposeError::InvalidDescriptor(*d))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if h.output_mode {
        check_slot_lengths(&h, &lengths)?;
    }
    let mut out = state.clone();
    out.set_slots(skill, &binding.slots())?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionPlan {
    /// Skill index of each column.
    pub columns: Vec<usize>,
    /// `alpha[t][c]`, `t` being the countdown value.
    pub alpha: Vec<Vec<f64>>,
    pub bindings: Vec<Vec<Option<Binding>>>,
}

impl CompositionPlan {
    /// A hard plan from steps in execution order, each `(column, binding)`.
    pub fn from_sequence(columns: Vec<usize>, steps: &[(usize, Binding)]) -> Self {
        let n = steps.len();
        let mut alpha = vec![vec![0.0; columns.len()]; n];
        let mut bindings = vec![vec![None; columns.len()]; n];
        for (i, (c, b)) in steps.iter().enumerate() {
            let t = n - 1 - i;
            alpha[t][*c] = 1.0;
            bindings[t][*c] = Some(b.clone());
        }
        Self {
            columns,
            alpha,
            bindings,
        }
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_hard(&self) -> bool {
        self.alpha.iter().all(|row| {
            row.iter().filter(|a| **a == 1.0).count() == 1
                && row.iter().all(|a| *a == 0.0 || *a == 1.0)
        })
    }

    /// `(skill, binding)` per step in execution order; `None` unless hard with every chosen binding present.
    pub fn sequence(&self) -> Option<Vec<(usize, Binding)>> {
        if !self.is_hard() {
            return None;
        }
        (0..self.steps())
            .rev()
            .map(|t| {
                let c = self.alpha[t].iter().position(|a| *a == 1.0)?;
                Some((self.columns[c], self.bindings[t][c].clone()?))
            })
            .collect()
    }

    pub fn validate(&self, state: &State) -> Result<(), ComposeError> {
        if self.alpha.is_empty() {
            return Err(ComposeError::EmptyPlan);
        }
        if let Some(s) = self.columns.iter().find(|s| **s >= state.skill_count()) {
            return Err(ComposeError::UnknownSkill(*s));
        }
        if self.bindings.len() != self.alpha.len() {
            return Err(ComposeError::BindingShape);
        }
        for t in 0..self.steps() {
            check_row(t, &self.alpha[t], &self.bindings[t], self.columns.len())?;
        }
        Ok(())
    }
}

fn check_row(
    t: usize,
    row: &[f64],
    bindings: &[Option<Binding>],
    columns: usize,
) -> Result<(), ComposeError> {
    if row.len() != columns || bindings.len() != columns {
        return Err(ComposeError::RowLength {
            t,
            expected: columns,
            found: row.len().min(bindings.len()),
        });
    }
    let sum: f64 = row.iter().sum();
    if row.iter().any(|a| !a.is_finite() || *a < 0.0) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE
    {
        return Err(ComposeError::NotNormalized { t });
    }
    if let Some(column) = (0..columns).find(|c| row[*c] > 0.0 && bindings[*c].is_none()) {
        return Err(ComposeError::MissingBinding { t, column });
    }
    Ok(())
}

/// Index ranges of control words, slot words excluded.
fn control_ranges(state: &State) -> Vec<std::ops::Range<usize>> {
    let l = state.layout();
    let mut ranges = vec![
        0..l.descriptors_start(),
        l.skills_start()..l.skills_start() + 2,
    ];
    for k in 0..l.skill_block_capacity {
        let cell = l.skills_start() + 2 + k * crate::state::HEADER_WORDS;
        ranges.push(cell..cell + header::SLOTS);
        ranges.push(cell + header::SLOT_SHAPES..cell + header::WORDS);
    }
    ranges.push(l.code_start()..l.memory_start());
    ranges
}

/// One composition step: every column with positive weight runs on its own
/// clone, then data words are mixed by weight.
pub fn comp_step(
    state: &State,
    t: usize,
    columns: &[usize],
    row: &[f64],
    bindings: &[Option<Binding>],
    fuel: Fuel,
) -> Result<State, ComposeError> {
    check_row(t, row, bindings, columns.len())?;
    let active: Vec<usize> = (0..columns.len()).filter(|c| row[*c] > 0.0).collect();
    let mut posts = Vec::with_capacity(active.len());
    for &c in &active {
        let bound = apply_binding(state, columns[c], bindings[c].as_ref().unwrap())?;
        posts.push(invoke_skill(&bound, columns[c], fuel)?.0);
    }
    if posts.len() == 1 {
        return Ok(posts.pop().unwrap());
    }

    for range in control_ranges(state) {
        for index in range {
            let v = posts[0].word(index).to_bits();
            if posts[1..].iter().any(|p| p.word(index).to_bits() != v) {
                return Err(ComposeError::ControlDivergence { index });
            }
        }
    }

    let mut out = posts[0].clone();
    for skill in 0..state.skill_count() {
        let binders: Vec<usize> = (0..active.len())
            .filter(|i| columns[active[*i]] == skill)
            .collect();
        let source = match binders.as_slice() {
            [] => state,
            [first, rest @ ..]
                if rest
                    .iter()
                    .all(|i| bindings[active[*i]] == bindings[active[*first]]) =>
            {
                &posts[*first]
            }
            _ => state,
        };
        let cell = state.header_cell(skill) + header::SLOTS;
        for i in cell..cell + crate::state::MAX_SLOTS {
            out.set_word(i, source.word(i));
        }
    }

    let l = *state.layout();
    for index in (l.descriptors_start()..l.skills_start()).chain(l.memory_start()..state.len()) {
        let first = posts[0].word(index);
        if posts[1..]
            .iter()
            .all(|p| p.word(index).to_bits() == first.to_bits())
        {
            continue;
        }
        let mut mixed: Word = 0.0;
        for (i, p) in posts.iter().enumerate() {
            mixed += row[active[i]] * p.word(index);
        }
        out.set_word(index, mixed);
    }
    Ok(out)
}

/// Applies `comp_step` for `t = T-1` down to `0`.
pub fn compose_recursive(
    state: &State,
    plan: &CompositionPlan,
    fuel: Fuel,
) -> Result<State, ComposeError> {
    plan.validate(state)?;
    let mut current = state.clone();
    for t in (0..plan.steps()).rev() {
        current = comp_step(
            &current,
            t,
            &plan.columns,
            &plan.alpha[t],
            &plan.bindings[t],
            fuel,
        )?;
    }
    Ok(current)
}

fn argmax(row: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tied = false;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
            tied = false;
        } else if *v == row[best] {
            tied = true;
        }
    }
    (best, tied)
}

fn one_hot(
    plan: &CompositionPlan,
    choose: impl Fn(usize, &[f64]) -> Result<usize, ComposeError>,
) -> Result<CompositionPlan, ComposeError> {
    let mut out = plan.clone();
    for (t, row) in out.alpha.iter_mut().enumerate() {
        let c = choose(t, row)?;
        row.iter_mut()
            .enumerate()
            .for_each(|(i, a)| *a = if i == c { 1.0 } else { 0.0 });
    }
    Ok(out)
}

/// Replaces each row by a one-hot at its unique maximum.
pub fn harden(plan: &CompositionPlan) -> Result<CompositionPlan, ComposeError> {
    one_hot(plan, |t, row| match argmax(row) {
        (_, true) => Err(ComposeError::Tie {
            t,
            row: row.to_vec(),
        }),
        (c, false) => Ok(c),
    })
}

/// Like [`harden`], but a tie goes to the lowest column; returns the tied rows.
pub fn harden_lowest(plan: &CompositionPlan) -> (CompositionPlan, Vec<usize>) {
    let mut ties = Vec::new();
    for (t, row) in plan.alpha.iter().enumerate() {
        if argmax(row).1 {
            ties.push(t);
        }
    }
    (one_hot(plan, |_, row| Ok(argmax(row).0)).unwrap(), ties)
}

/// Versioned on-disk plan: skills by name, bindings as descriptor lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub version: u32,
    #[serde(rename = "T")]
    pub steps: usize,
    pub skills: Vec<String>,
    pub alpha: Vec<Vec<f64>>,
    pub bindings: Vec<Vec<Option<Binding>>>,
}

impl PlanFile {
    pub fn from_plan(plan: &CompositionPlan, names: &[String]) -> Self {
        Self {
            version: PLAN_VERSION,
            steps: plan.steps(),
            skills: plan.columns.iter().map(|c| names[*c].clone()).collect(),
            alpha: plan.alpha.clone(),
            bindings: plan.bindings.clone(),
        }
    }

    pub fn to_plan(
        &self,
        resolve: impl Fn(&str) -> Option<usize>,
    ) -> Result<CompositionPlan, ComposeError> {
        if self.version != PLAN_VERSION {
            return Err(ComposeError::Version(self.version));
        }
        if self.alpha.len() != self.steps || self.bindings.len() != self.steps {
            return Err(ComposeError::BindingShape);
        }
        let columns = self
            .skills
            .iter()
            .map(|n| resolve(n).ok_or_else(|| ComposeError::UnknownSkillName(n.clone())))
            .collect::<Result<_, _>>()?;
        Ok(CompositionPlan {
            columns,
            alpha: self.alpha.clone(),
            bindings: self.bindings.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{standard_skill, SkillDef};
    use crate::state::{diff_states, RegionLayout, SlotShape};
    use proptest::prelude::*;

    fn layout() -> RegionLayout {
        RegionLayout {
            register_count: 2,
            stack_capacity: 16,
            descriptor_capacity: 16,
            skill_block_capacity: 8,
            code_capacity: 1024,
            static_memory_capacity: 512,
        }
    }

    fn with_skills(names: &[&str], data: &[&[f64]]) -> State {
        let mut s = State::new(layout()).unwrap();
        for d in data {
            s.write_data(d).unwrap();
        }
        for n in names {
            standard_skill(n).unwrap().install(&mut s).unwrap();
        }
        s
    }

    fn constant(name: &str, value: f64, tail: &str) -> SkillDef {
        let src = format!("MOVI {value} 0 26\nSTOREI 26 0 0\n{tail}");
        SkillDef::from_source(name, &src, &[], &[SlotShape::Fixed(1)]).unwrap()
    }

    #[test]
    fn apply_binding_examples() {
        let s = with_skills(&["add2"], &[&[1.0], &[2.0], &[0.0]]);
        let b = apply_binding(&s, 0, &Binding(vec![0, 1, 2])).unwrap();
        assert_eq!(
            b.skill_header(0).unwrap().slots,
            vec![Some(0), Some(1), Some(2)]
        );
        let again = apply_binding(&b, 0, &Binding(vec![0, 1, 2])).unwrap();
        assert!(diff_states(&b, &again).unwrap().is_empty());
        assert!(matches!(
            apply_binding(&s, 0, &Binding(vec![0, 1])),
            Err(ComposeError::Arity {
                expected: 3,
                found: 2,
                ..
            })
        ));
        assert_eq!(
            apply_binding(&s, 0, &Binding(vec![0, 1, 9])),
            Err(ComposeError::InvalidDescriptor(9))
        );
        let diff = diff_states(&s, &b).unwrap();
        assert!(diff
            .iter()
            .all(|d| s.layout().region_of(d.index) == crate::state::Region::SkillBlocks));
    }

    #[test]
    fn one_hot_step_equals_invoke() {
        let s = with_skills(&["add2", "mul2"], &[&[4.0], &[7.0], &[0.0]]);
        let b = Binding(vec![0, 1, 2]);
        let stepped = comp_step(
            &s,
            0,
            &[0, 1],
            &[1.0, 0.0],
            &[Some(b.clone()), None],
            Fuel::default(),
        )
        .unwrap();
        let direct = invoke_skill(&apply_binding(&s, 0, &b).unwrap(), 0, Fuel::default())
            .unwrap()
            .0;
        assert_eq!(stepped, direct);
        assert_eq!(stepped.read_region(2).unwrap(), vec![11.0]);
    }

    #[test]
    fn convex_mixture_and_divergence() {
        let mut s = with_skills(&[], &[&[0.0]]);
        constant("ten", 10.0, "RET").install(&mut s).unwrap();
        constant("twenty", 20.0, "RET").install(&mut s).unwrap();
        constant("stop", 30.0, "HALT").install(&mut s).unwrap();
        let b = Some(Binding(vec![0]));
        let mixed = comp_step(
            &s,
            0,
            &[0, 1],
            &[0.5, 0.5],
            &[b.clone(), b.clone()],
            Fuel::default(),
        )
        .unwrap();
        assert_eq!(mixed.read_region(0).unwrap(), vec![15.0]);
        assert_eq!(mixed.skill_header(0).unwrap().slots, vec![Some(0)]);

        let err = comp_step(
            &s,
            0,
            &[0, 2],
            &[0.5, 0.5],
            &[b.clone(), b.clone()],
            Fuel::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ComposeError::ControlDivergence { .. }));
        assert_eq!(
            comp_step(
                &s,
                0,
                &[0, 1],
                &[0.5, 0.4],
                &[b.clone(), b],
                Fuel::default()
            ),
            Err(ComposeError::NotNormalized { t: 0 })
        );
    }

    #[test]
    fn same_skill_with_two_bindings_keeps_pre_slots() {
        let s = with_skills(&["add2"], &[&[1.0], &[2.0], &[0.0], &[0.0]]);
        let rows = [Some(Binding(vec![0, 1, 2])), Some(Binding(vec![0, 1, 3]))];
        let out = comp_step(&s, 0, &[0, 0], &[0.25, 0.75], &rows, Fuel::default()).unwrap();
        assert_eq!(out.read_region(2).unwrap(), vec![0.75]);
        assert_eq!(out.read_region(3).unwrap(), vec![2.25]);
        assert_eq!(
            out.skill_header(0).unwrap().slots,
            s.skill_header(0).unwrap().slots
        );
    }

    #[test]
    fn recursive_examples() {
        // x, y, z, u, out
        let s = with_skills(
            &["mul2", "add2", "nop"],
            &[&[2.0], &[3.0], &[4.0], &[0.0], &[0.0]],
        );
        let plan = CompositionPlan::from_sequence(
            vec![0, 1],
            &[(0, Binding(vec![0, 1, 3])), (1, Binding(vec![3, 2, 4]))],
        );
        let out = compose_recursive(&s, &plan, Fuel::default()).unwrap();
        let (x, y, z) = (2.0, 3.0, 4.0);
        assert_eq!(out.read_region(4).unwrap(), vec![x * y + z]);

        let one = CompositionPlan::from_sequence(vec![1], &[(0, Binding(vec![0, 1, 4]))]);
        let out = compose_recursive(&s, &one, Fuel::default()).unwrap();
        assert_eq!(
            out,
            comp_step(
                &s,
                0,
                &[1],
                &[1.0],
                &[Some(Binding(vec![0, 1, 4]))],
                Fuel::default()
            )
            .unwrap()
        );

        let idle = CompositionPlan::from_sequence(
            vec![2],
            &[
                (0, Binding(vec![])),
                (0, Binding(vec![])),
                (0, Binding(vec![])),
            ],
        );
        let out = compose_recursive(&s, &idle, Fuel::default()).unwrap();
        assert_eq!(out.memory(), s.memory());
        assert_eq!(
            compose_recursive(
                &s,
                &CompositionPlan {
                    columns: vec![2],
                    alpha: vec![],
                    bindings: vec![]
                },
                Fuel::default()
            ),
            Err(ComposeError::EmptyPlan)
        );
    }

    #[test]
    fn harden_examples() {
        let b = Some(Binding(vec![]));
        let soft = CompositionPlan {
            columns: vec![0, 1],
            alpha: vec![vec![0.9, 0.1]],
            bindings: vec![vec![b.clone(), b.clone()]],
        };
        let hard = harden(&soft).unwrap();
        assert_eq!(hard.alpha, vec![vec![1.0, 0.0]]);
        assert_eq!(hard.bindings, soft.bindings);
        assert_eq!(harden(&hard).unwrap(), hard);
        let tie = CompositionPlan {
            alpha: vec![vec![0.5, 0.5]],
            ..soft
        };
        assert!(matches!(harden(&tie), Err(ComposeError::Tie { t: 0, .. })));
        let (lowest, ties) = harden_lowest(&tie);
        assert_eq!((lowest.alpha, ties), (vec![vec![1.0, 0.0]], vec![0]));
    }

    #[test]
    fn plan_file_roundtrip() {
        let plan = CompositionPlan::from_sequence(
            vec![0, 1],
            &[(1, Binding(vec![0, 1, 2])), (0, Binding(vec![2, 2, 3]))],
        );
        let names = vec!["mul2".to_string(), "add2".to_string()];
        let file = PlanFile::from_plan(&plan, &names);
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"T\":2"));
        let back: PlanFile = serde_json::from_str(&text).unwrap();
        assert_eq!(
            back.to_plan(|n| names.iter().position(|m| m == n)).unwrap(),
            plan
        );
        assert!(matches!(
            back.to_plan(|_| None),
            Err(ComposeError::UnknownSkillName(_))
        ));
    }

    const BINARY: [&str; 3] = ["add2", "mul2", "add2"];

    fn hard_steps(n_skills: usize) -> impl Strategy<Value = Vec<(usize, [usize; 3])>> {
        prop::collection::vec((0..n_skills, [0usize..4, 0usize..4, 2usize..4]), 1..=4)
    }

    proptest! {
        #[test]
        fn hard_plans_equal_sequential_invocation(
            data in prop::collection::vec(-50i64..50, 4),
            steps in hard_steps(3),
        ) {
            let vals: Vec<Vec<f64>> = data.iter().map(|v| vec![*v as f64]).collect();
            let refs: Vec<&[f64]> = vals.iter().map(Vec::as_slice).collect();
            let s = with_skills(&BINARY, &refs);
            let seq: Vec<(usize, Binding)> = steps.iter().map(|(k, b)| (*k, Binding(b.to_vec()))).collect();
            let plan = CompositionPlan::from_sequence(vec![0, 1, 2], &seq);
            let composed = compose_recursive(&s, &plan, Fuel::default()).unwrap();
            let mut direct = s.clone();
            for (k, b) in &seq {
                direct = invoke_skill(&apply_binding(&direct, *k, b).unwrap(), *k, Fuel::default()).unwrap().0;
            }
            prop_assert!(composed.words().iter().zip(direct.words()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        #[test]
        fn mixture_is_linear_in_alpha(
            data in prop::collection::vec(-50.0f64..50.0, 4),
            raw in prop::collection::vec(0.05f64..1.0, 3),
            raw2 in prop::collection::vec(0.05f64..1.0, 3),
            lambda in 0.0f64..1.0,
        ) {
            let vals: Vec<Vec<f64>> = data.iter().map(|v| vec![*v]).collect();
            let refs: Vec<&[f64]> = vals.iter().map(Vec::as_slice).collect();
            let s = with_skills(&["add2", "mul2", "neg"], &refs);
            let normalize = |r: &[f64]| { let t: f64 = r.iter().sum(); r.iter().map(|x| x / t).collect::<Vec<_>>() };
            let (a, b) = (normalize(&raw), normalize(&raw2));
            let mix: Vec<f64> = normalize(&a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect::<Vec<_>>());
            let binds = [Some(Binding(vec![0, 1, 3])), Some(Binding(vec![1, 2, 3])), Some(Binding(vec![2, 3]))];
            let cols = [0, 1, 2];
            let run = |row: &[f64]| comp_step(&s, 0, &cols, row, &binds, Fuel::default()).unwrap();
            let (sa, sb, sm) = (run(&a), run(&b), run(&mix));
            for i in s.layout().memory_start()..s.len() {
                let want = lambda * sa.word(i) + (1.0 - lambda) * sb.word(i);
                prop_assert!((sm.word(i) - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }

        #[test]
        fn relabeling_columns_is_equivariant(
            data in prop::collection::vec(-50i64..50, 4),
            raw in prop::collection::vec(0.05f64..1.0, 3),
        ) {
            let vals: Vec<Vec<f64>> = data.iter().map(|v| vec![*v as f64]).collect();
            let refs: Vec<&[f64]> = vals.iter().map(Vec::as_slice).collect();
            let s = with_skills(&["add2", "mul2", "neg"], &refs);
            let t: f64 = raw.iter().sum();
            let row: Vec<f64> = raw.iter().map(|x| x / t).collect();
            let binds = vec![Some(Binding(vec![0, 1, 3])), Some(Binding(vec![1, 2, 3])), Some(Binding(vec![2, 3]))];
            let plan = CompositionPlan { columns: vec![0, 1, 2], alpha: vec![row.clone()], bindings: vec![binds.clone()] };
            let perm = [2, 0, 1];
            let permuted = CompositionPlan {
                columns: perm.iter().map(|p| plan.columns[*p]).collect(),
                alpha: vec![perm.iter().map(|p| row[*p]).collect()],
                bindings: vec![perm.iter().map(|p| binds[*p].clone()).collect()],
            };
            let a = compose_recursive(&s, &plan, Fuel::default()).unwrap();
            let b = compose_recursive(&s, &permuted, Fuel::default()).unwrap();
            for i in s.layout().memory_start()..s.len() {
                prop_assert!((a.word(i) - b.word(i)).abs() <= 1e-12 * a.word(i).abs().max(1.0));
            }
        }
    }
}
