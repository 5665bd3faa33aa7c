use super::eval::{Action, EvalConfig, Evaluator, Loss};
use super::{CurvePoint, LearnError};
use crate::compose::{harden_lowest, CompositionPlan};
use crate::policy::softmax;
use crate::task::Split;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientConfig {
    pub iters: usize,
    pub seed: u64,
    /// Perturbation scale `c` in `c_k = c / (k + 1)^gamma`.
    pub delta: f64,
    /// Step size `a` in `a_k = a / (k + 1 + stability)^alpha`.
    pub step: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub stability: f64,
    pub temperature_start: f64,
    pub temperature_end: f64,
    /// Per-coordinate clamp on one update.
    pub max_update: f64,
    pub curve_every: usize,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            iters: 500,
            seed: 0,
            delta: 0.1,
            step: 0.5,
            alpha: 0.602,
            gamma: 0.101,
            stability: 0.0,
            temperature_start: 1.0,
            temperature_end: 0.1,
            max_update: 1.0,
            curve_every: 10,
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    /// Hard plan whose columns are the actions.
    pub plan: CompositionPlan,
    pub train: Loss,
    /// Softmax of the final logits at the final temperature.
    pub final_alpha: Vec<Vec<f64>>,
    /// Iterations whose update was not finite.
    pub skipped: usize,
    /// Rows whose maximum was tied when hardening (resolved to the lowest action).
    pub ties: Vec<usize>,
    pub curve: Vec<CurvePoint>,
}

/// Soft plan over joint actions: `alpha[t] = softmax(theta[t] / temperature)`.
pub fn soft_plan(actions: &[Action], theta: &[Vec<f64>], temperature: f64) -> CompositionPlan {
    let n = actions.len();
    CompositionPlan {
        columns: actions.iter().map(|a| a.skill).collect(),
        alpha: theta
            .iter()
            .map(|row| softmax(row, temperature).unwrap_or_else(|| vec![1.0 / n as f64; n]))
            .collect(),
        bindings: theta
            .iter()
            .map(|_| actions.iter().map(|a| Some(a.binding.clone())).collect())
            .collect(),
    }
}

fn temperature(config: &GradientConfig, k: usize) -> f64 {
    if config.iters <= 1 {
        return config.temperature_end;
    }
    let f = k as f64 / (config.iters - 1) as f64;
    config.temperature_start + (config.temperature_end - config.temperature_start) * f
}

/// SPSA on tabular logits over joint actions, against the soft train loss.
pub fn gradient_fit(
    eval: &Evaluator,
    actions: &[Action],
    config: &GradientConfig,
) -> Result<GradientResult, LearnError> {
    if actions.is_empty() {
        return Err(LearnError::NoActions(eval.task.name.clone()));
    }
    let steps = eval.task.steps;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = vec![vec![0.0; actions.len()]; steps];
    let soft_loss =
        |theta: &[Vec<f64>], tau: f64| eval.evaluate(&soft_plan(actions, theta, tau), Split::Train);

    let mut best = (theta.clone(), soft_loss(&theta, temperature(config, 0)).mse);
    let mut skipped = 0;
    let mut curve = Vec::new();

    for k in 0..config.iters {
        let tau = temperature(config, k);
        let ck = config.delta / ((k + 1) as f64).powf(config.gamma);
        let ak = config.step / ((k + 1) as f64 + config.stability).powf(config.alpha);
        let sign: Vec<Vec<f64>> = theta
            .iter()
            .map(|row| {
                row.iter()
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let shifted = |s: f64| -> Vec<Vec<f64>> {
            theta
                .iter()
                .zip(&sign)
                .map(|(r, d)| r.iter().zip(d).map(|(x, e)| x + s * ck * e).collect())
                .collect()
        };
        let (plus, minus) = (shifted(1.0), shifted(-1.0));
        let (lp, lm) = (soft_loss(&plus, tau), soft_loss(&minus, tau));
        if k % config.curve_every.max(1) == 0 {
            let l = if lp.mse <= lm.mse { lp } else { lm };
            curve.push(CurvePoint {
                at: k,
                mse: l.mse,
                exact: l.exact,
            });
        }
        for (cand, l) in [(&plus, lp.mse), (&minus, lm.mse)] {
            if l < best.1 {
                best = (cand.clone(), l);
            }
        }
        let scale = (lp.mse - lm.mse) / (2.0 * ck);
        let update: Vec<Vec<f64>> = sign
            .iter()
            .map(|d| d.iter().map(|e| ak * scale * e).collect())
            .collect();
        if !update.iter().flatten().all(|u| u.is_finite()) {
            skipped += 1;
            continue;
        }
        for (row, u) in theta.iter_mut().zip(&update) {
            for (x, g) in row.iter_mut().zip(u) {
                *x -= g.clamp(-config.max_update, config.max_update);
            }
        }
    }

    let tau_end = temperature(config, config.iters.saturating_sub(1));
    let final_alpha = soft_plan(actions, &theta, tau_end).alpha;
    let mut pick: Option<(CompositionPlan, Loss, Vec<usize>)> = None;
    for candidate in [&theta, &best.0] {
        let (hard, ties) = harden_lowest(&soft_plan(actions, candidate, tau_end));
        let loss = eval.evaluate(&hard, Split::Train);
        if pick.as_ref().is_none_or(|(_, l, _)| loss.better_than(l)) {
            pick = Some((hard, loss, ties));
        }
    }
    let (plan, train, ties) = pick.unwrap();
    Ok(GradientResult {
        plan,
        train,
        final_alpha,
        skipped,
        ties,
        curve,
    })
}
