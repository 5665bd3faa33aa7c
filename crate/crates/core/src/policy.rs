//! α policies: uniform, tabular softmax, and a remote advisor.
//!
//! Every policy returns a probability row. The advisor speaks
//! `POST {endpoint}/v1/alpha` with `{task, t, skills, summary}` and expects
//! `{alpha: [..]}`; any failure falls back to the configured policy.

use crate::state::{State, Word};
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Default advisor timeout.
pub const DEFAULT_ADVISOR_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaPolicy {
    Uniform,
    Tabular {
        logits: Vec<Vec<f64>>,
        temperature: f64,
    },
    Advisor(Advisor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advisor {
    pub endpoint: String,
    pub timeout: Duration,
    pub fallback: Box<AlphaPolicy>,
}

impl Advisor {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: DEFAULT_ADVISOR_TIMEOUT,
            fallback: Box::new(AlphaPolicy::Uniform),
        }
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/v1/alpha") {
            base.to_string()
        } else {
            format!("{base}/v1/alpha")
        }
    }

    fn request(&self, summary: &StateSummary, skills: &[String]) -> Option<Vec<f64>> {
        let body = AdvisorRequest {
            task: &summary.task,
            t: summary.t,
            skills,
            summary: SummaryBody {
                descriptor_lengths: &summary.descriptor_lengths,
                outputs: &summary.outputs,
                description: summary.description.as_deref(),
            },
        };
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let response = agent
            .post(&self.url())
            .set("Content-Type", "application/json")
            .send_string(&serde_json::to_string(&body).ok()?)
            .ok()?;
        if response.status() != 200 {
            return None;
        }
        let reply: AdvisorReply = serde_json::from_str(&response.into_string().ok()?).ok()?;
        normalized(&reply.alpha, skills.len())
    }
}

#[derive(Serialize)]
struct AdvisorRequest<'a> {
    task: &'a str,
    t: usize,
    skills: &'a [String],
    summary: SummaryBody<'a>,
}

#[derive(Serialize)]
struct SummaryBody<'a> {
    descriptor_lengths: &'a [usize],
    outputs: &'a [Vec<f64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<&'a str>,
}

#[derive(Deserialize)]
struct AdvisorReply {
    alpha: Vec<f64>,
}

/// What the advisor sees of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub task: String,
    pub t: usize,
    pub descriptor_lengths: Vec<usize>,
    /// Output region values rounded to 6 decimal places.
    pub outputs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl StateSummary {
    pub fn from_state(
        task: &str,
        t: usize,
        state: &State,
        output_descriptors: &[usize],
        description: Option<&str>,
    ) -> Self {
        let round = |v: Word| (v * 1e6).round() / 1e6;
        Self {
            task: task.to_string(),
            t,
            descriptor_lengths: state.descriptors().iter().map(|d| d.length).collect(),
            outputs: output_descriptors
                .iter()
                .map(|d| {
                    state
                        .read_region(*d)
                        .map(|r| r.into_iter().map(round).collect())
                        .unwrap_or_default()
                })
                .collect(),
            description: description.map(str::to_string),
        }
    }

    /// A summary with no state behind it.
    pub fn bare(task: &str, t: usize) -> Self {
        Self {
            task: task.to_string(),
            t,
            descriptor_lengths: Vec::new(),
            outputs: Vec::new(),
            description: None,
        }
    }
}

/// A proposed row and whether the advisor had to fall back.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub alpha: Vec<f64>,
    pub fell_back: bool,
}

/// Divides by the sum; `None` unless the row is finite, non-negative, of the given length and has positive mass.
pub fn normalized(row: &[f64], len: usize) -> Option<Vec<f64>> {
    if row.len() != len || row.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return None;
    }
    let sum: f64 = row.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return None;
    }
    Some(row.iter().map(|a| a / sum).collect())
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub fn softmax(logits: &[f64], temperature: f64) -> Option<Vec<f64>> {
    let tau = if temperature > 0.0 && temperature.is_finite() {
        temperature
    } else {
        1.0
    };
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let exp: Vec<f64> = logits.iter().map(|l| ((l - max) / tau).exp()).collect();
    normalized(&exp, logits.len())
}

impl AlphaPolicy {
    pub fn is_advisor(&self) -> bool {
        matches!(self, AlphaPolicy::Advisor(_))
    }

    fn row(&self, summary: &StateSummary, skills: &[String], t: usize) -> Proposal {
        let n = skills.len();
        match self {
            AlphaPolicy::Uniform => Proposal {
                alpha: uniform(n),
                fell_back: false,
            },
            AlphaPolicy::Tabular {
                logits,
                temperature,
            } => Proposal {
                alpha: logits
                    .get(t)
                    .filter(|l| l.len() == n)
                    .and_then(|l| softmax(l, *temperature))
                    .unwrap_or_else(|| uniform(n)),
                fell_back: false,
            },
            AlphaPolicy::Advisor(a) => match a.request(summary, skills) {
                Some(alpha) => Proposal {
                    alpha,
                    fell_back: false,
                },
                None => Proposal {
                    alpha: a.fallback.row(summary, skills, t).alpha,
                    fell_back: true,
                },
            },
        }
    }
}

/// `alpha = F_alpha(W_alpha, s, S, t, alpha0)`. `alpha0`, when given, multiplies the row element-wise.
pub fn propose_alpha_with_source(
    policy: &AlphaPolicy,
    summary: &StateSummary,
    skills: &[String],
    t: usize,
    alpha0: Option<&[f64]>,
) -> Proposal {
    assert!(!skills.is_empty(), "propose_alpha needs at least one skill");
    let mut p = policy.row(summary, skills, t);
    if let Some(prior) = alpha0.filter(|a| a.len() == p.alpha.len()) {
        let product: Vec<f64> = p.alpha.iter().zip(prior).map(|(a, b)| a * b).collect();
        if let Some(row) = normalized(&product, p.alpha.len()) {
            p.alpha = row;
        }
    }
    p
}

pub fn propose_alpha(
    policy: &AlphaPolicy,
    summary: &StateSummary,
    skills: &[String],
    t: usize,
    alpha0: Option<&[f64]>,
) -> Vec<f64> {
    propose_alpha_with_source(policy, summary, skills, t, alpha0).alpha
}
