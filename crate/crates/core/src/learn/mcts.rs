use super::eval::{enumerate_actions, Action, EvalConfig, Evaluator, Loss};
use super::{CurvePoint, LearnError, BINDING_CAP, PENALTY};
use crate::compose::{Binding, CompositionPlan};
use crate::policy::{propose_alpha_with_source, AlphaPolicy, StateSummary};
use crate::task::Split;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MctsConfig {
    /// Node expansions; a terminal evaluation counts as one.
    pub budget: usize,
    pub seed: u64,
    pub c_puct: f64,
    /// Weight of `exact` in the leaf value; the rest goes to `1 - min(1, mse / mse_scale)`.
    pub exact_weight: f64,
    pub mse_scale: f64,
    pub binding_cap: usize,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            budget: 10_000,
            seed: 0,
            c_puct: 1.4,
            exact_weight: 0.5,
            mse_scale: PENALTY,
            binding_cap: BINDING_CAP,
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Hard plan over the allowed skills.
    pub plan: CompositionPlan,
    pub train: Loss,
    pub expansions: usize,
    /// Expansion count at which train exact reached 1.0.
    pub solved_at: Option<usize>,
    /// One point per improvement of the best loss.
    pub curve: Vec<CurvePoint>,
    pub advisor_fallbacks: usize,
    pub truncated_bindings: bool,
}

struct Node {
    parent: Option<usize>,
    action: Option<usize>,
    depth: usize,
    prior: f64,
    visits: u32,
    total: f64,
    children: Vec<usize>,
    expanded: bool,
    exhausted: bool,
}

impl Node {
    fn new(parent: Option<usize>, action: Option<usize>, depth: usize, prior: f64) -> Self {
        Self {
            parent,
            action,
            depth,
            prior,
            visits: 0,
            total: 0.0,
            children: Vec::new(),
            expanded: false,
            exhausted: false,
        }
    }

    fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / self.visits as f64
        }
    }
}

struct Search<'e, 'a> {
    eval: &'e Evaluator<'a>,
    policy: &'e AlphaPolicy,
    config: &'e MctsConfig,
    names: Vec<String>,
    columns: Vec<usize>,
    actions: Vec<Action>,
    by_column: Vec<Vec<usize>>,
    cache: HashMap<Vec<usize>, Loss>,
    fallbacks: usize,
}

impl Search<'_, '_> {
    fn steps(&self) -> usize {
        self.eval.task.steps
    }

    fn summary(&self, prefix: &[usize], t: usize) -> StateSummary {
        let task = self.eval.task;
        if !self.policy.is_advisor() {
            return StateSummary::bare(&task.name, t);
        }
        let steps: Vec<(usize, Binding)> = prefix
            .iter()
            .map(|a| (self.actions[*a].skill, self.actions[*a].binding.clone()))
            .collect();
        match self.eval.run_prefix(&steps, Split::Train, 0) {
            Ok(state) => StateSummary::from_state(
                &task.name,
                t,
                &state,
                &task.output_descriptors().collect::<Vec<_>>(),
                task.description.as_deref(),
            ),
            Err(_) => StateSummary {
                description: task.description.clone(),
                ..StateSummary::bare(&task.name, t)
            },
        }
    }

    fn skill_row(&mut self, prefix: &[usize]) -> Vec<f64> {
        let t = self.steps() - 1 - prefix.len();
        let p =
            propose_alpha_with_source(self.policy, &self.summary(prefix, t), &self.names, t, None);
        self.fallbacks += usize::from(p.fell_back);
        p.alpha
    }

    /// Per-action priors: skill mass split evenly over that skill's bindings.
    fn priors(&self, row: &[f64]) -> Vec<f64> {
        let mass: f64 = (0..row.len())
            .filter(|c| !self.by_column[*c].is_empty())
            .map(|c| row[c])
            .sum();
        self.actions
            .iter()
            .map(|a| {
                if mass > 0.0 {
                    row[a.column] / self.by_column[a.column].len() as f64 / mass
                } else {
                    1.0 / self.actions.len() as f64
                }
            })
            .collect()
    }

    fn sample(&self, row: &[f64], rng: &mut ChaCha8Rng) -> usize {
        let live: Vec<usize> = (0..row.len())
            .filter(|c| !self.by_column[*c].is_empty())
            .collect();
        let mass: f64 = live.iter().map(|c| row[*c]).sum();
        let column = if mass > 0.0 {
            let mut r = rng.random::<f64>() * mass;
            let mut pick = live[live.len() - 1];
            for &c in &live {
                if r < row[c] {
                    pick = c;
                    break;
                }
                r -= row[c];
            }
            pick
        } else {
            live[rng.random_range(0..live.len())]
        };
        let bucket = &self.by_column[column];
        bucket[rng.random_range(0..bucket.len())]
    }

    fn plan(&self, seq: &[usize]) -> CompositionPlan {
        let steps: Vec<(usize, Binding)> = seq
            .iter()
            .map(|a| (self.actions[*a].column, self.actions[*a].binding.clone()))
            .collect();
        CompositionPlan::from_sequence(self.columns.clone(), &steps)
    }

    fn loss(&mut self, seq: &[usize]) -> Loss {
        if let Some(l) = self.cache.get(seq) {
            return *l;
        }
        let l = self.eval.evaluate(&self.plan(seq), Split::Train);
        self.cache.insert(seq.to_vec(), l);
        l
    }

    fn value(&self, l: &Loss) -> f64 {
        let w = self.config.exact_weight;
        w * l.exact + (1.0 - w) * (1.0 - (l.mse / self.config.mse_scale).min(1.0))
    }
}

/// PUCT search over `T`-step sequences of (skill, binding) actions.
pub fn mcts_search(
    eval: &Evaluator,
    policy: &AlphaPolicy,
    config: &MctsConfig,
) -> Result<SearchResult, LearnError> {
    let columns = eval.allowed();
    if columns.is_empty() {
        return Err(LearnError::NoSkills(eval.task.name.clone()));
    }
    let (actions, truncated) = enumerate_actions(eval, &columns, config.binding_cap);
    if actions.is_empty() {
        return Err(LearnError::NoActions(eval.task.name.clone()));
    }
    let mut by_column = vec![Vec::new(); columns.len()];
    for (i, a) in actions.iter().enumerate() {
        by_column[a.column].push(i);
    }
    let names = columns
        .iter()
        .map(|c| eval.library[*c].name.clone())
        .collect();
    let mut s = Search {
        eval,
        policy,
        config,
        names,
        columns,
        actions,
        by_column,
        cache: HashMap::new(),
        fallbacks: 0,
    };
    let steps = s.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let initial_summary = s.summary(&[], steps - 1);
    let rollout_rows: Vec<Vec<f64>> = (0..steps)
        .map(|d| {
            let t = steps - 1 - d;
            let summary = StateSummary {
                t,
                ..initial_summary.clone()
            };
            let p = propose_alpha_with_source(policy, &summary, &s.names, t, None);
            s.fallbacks += usize::from(p.fell_back);
            p.alpha
        })
        .collect();

    let mut nodes = vec![Node::new(None, None, 0, 1.0)];
    let mut best: Option<(Vec<usize>, Loss)> = None;
    let mut curve = Vec::new();
    let mut solved_at = None;
    let mut expansions = 0;

    while expansions < config.budget.max(1) && !nodes[0].exhausted {
        let mut n = 0;
        let mut prefix = Vec::new();
        while nodes[n].expanded && nodes[n].depth < steps {
            let parent = &nodes[n];
            let sqrt_n = (parent.visits as f64).sqrt();
            let fpu = parent.mean();
            let mut pick: Option<(usize, f64)> = None;
            for &c in &parent.children {
                let child = &nodes[c];
                if child.exhausted {
                    continue;
                }
                let q = if child.visits > 0 { child.mean() } else { fpu };
                let score = q + config.c_puct * child.prior * sqrt_n / (1.0 + child.visits as f64);
                if pick.is_none_or(|(_, best)| score > best) {
                    pick = Some((c, score));
                }
            }
            let Some((c, _)) = pick else { break };
            prefix.push(nodes[c].action.unwrap());
            n = c;
        }

        let seq = if nodes[n].depth == steps {
            nodes[n].exhausted = true;
            prefix
        } else {
            let row = s.skill_row(&prefix);
            let priors = s.priors(&row);
            let depth = nodes[n].depth + 1;
            for (a, p) in priors.into_iter().enumerate() {
                let id = nodes.len();
                nodes.push(Node::new(Some(n), Some(a), depth, p));
                nodes[n].children.push(id);
            }
            nodes[n].expanded = true;
            let mut seq = prefix;
            let start = seq.len();
            for row in &rollout_rows[start..steps] {
                seq.push(s.sample(row, &mut rng));
            }
            seq
        };
        let loss = s.loss(&seq);
        let value = s.value(&loss);
        expansions += 1;

        let mut cursor = Some(n);
        while let Some(i) = cursor {
            nodes[i].visits += 1;
            nodes[i].total += value;
            cursor = nodes[i].parent;
        }
        let mut cursor = nodes[n].parent;
        while let Some(i) = cursor {
            if nodes[i].children.iter().all(|c| nodes[*c].exhausted) {
                nodes[i].exhausted = true;
                cursor = nodes[i].parent;
            } else {
                break;
            }
        }

        if best.as_ref().is_none_or(|(_, b)| loss.better_than(b)) {
            curve.push(CurvePoint {
                at: expansions,
                mse: loss.mse,
                exact: loss.exact,
            });
            best = Some((seq, loss));
        }
        if loss.is_exact() {
            solved_at = Some(expansions);
            break;
        }
    }

    let (seq, train) = best.expect("at least one expansion");
    Ok(SearchResult {
        plan: s.plan(&seq),
        train,
        expansions,
        solved_at,
        curve,
        advisor_fallbacks: s.fallbacks,
        truncated_bindings: truncated,
    })
}
