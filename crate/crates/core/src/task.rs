//! Task specifications: named ports with shapes, input/output pairs and a step budget.
//!
//! The descriptor inventory of a task instance is inputs, then intermediates,
//! then outputs, in declaration order; descriptor `i` of every instance state
//! is inventory entry `i`.

use crate::exec::DEFAULT_FUEL;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of a port. `Like(i)` copies the length of input `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Any,
    Fixed(usize),
    Like(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Port {
    pub name: String,
    pub shape: Shape,
}

impl Port {
    pub fn new(name: &str, shape: Shape) -> Self {
        Self {
            name: name.to_string(),
            shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoPair {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

fn default_fuel() -> u64 {
    DEFAULT_FUEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub inputs: Vec<Port>,
    #[serde(default)]
    pub intermediates: Vec<Port>,
    pub outputs: Vec<Port>,
    pub train: Vec<IoPair>,
    pub test: Vec<IoPair>,
    #[serde(rename = "T")]
    pub steps: usize,
    #[serde(default = "default_fuel")]
    pub fuel: u64,
    pub allowed: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("task JSON: {0}")]
    Parse(String),
    #[error("task `{task}`: {reason}")]
    Invalid { task: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl TaskSpec {
    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let task: TaskSpec =
            serde_json::from_str(text).map_err(|e| TaskError::Parse(e.to_string()))?;
        task.validate()?;
        Ok(task)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serialization")
    }

    fn invalid(&self, reason: impl Into<String>) -> TaskError {
        TaskError::Invalid {
            task: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn pairs(&self, split: Split) -> &[IoPair] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn inventory_len(&self) -> usize {
        self.inputs.len() + self.intermediates.len() + self.outputs.len()
    }

    /// First descriptor a skill may write to.
    pub fn first_writable(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_descriptors(&self) -> std::ops::Range<usize> {
        self.inputs.len() + self.intermediates.len()..self.inventory_len()
    }

    fn resolve(&self, shape: Shape, inputs: &[Vec<f64>]) -> Option<usize> {
        match shape {
            Shape::Any => None,
            Shape::Fixed(n) => Some(n),
            Shape::Like(i) => inputs.get(i).map(Vec::len),
        }
    }

    /// Descriptor lengths for one pair, in inventory order.
    pub fn lengths(&self, pair: &IoPair) -> Vec<usize> {
        let mut out: Vec<usize> = pair.inputs.iter().map(Vec::len).collect();
        for p in self.intermediates.iter().chain(&self.outputs) {
            out.push(self.resolve(p.shape, &pair.inputs).unwrap_or(0));
        }
        out
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.name.is_empty() {
            return Err(self.invalid("empty name"));
        }
        if self.steps == 0 {
            return Err(self.invalid("T must be at least 1"));
        }
        if self.outputs.is_empty() {
            return Err(self.invalid("no outputs"));
        }
        if self.train.is_empty() {
            return Err(self.invalid("no train pairs"));
        }
        if self.allowed.is_empty() {
            return Err(self.invalid("no allowed skills"));
        }
        for (i, p) in self.inputs.iter().enumerate() {
            if let Shape::Like(j) = p.shape {
                if j >= i {
                    return Err(self.invalid(format!("input `{}` refers to a later input", p.name)));
                }
            }
        }
        for p in self.intermediates.iter().chain(&self.outputs) {
            match p.shape {
                Shape::Any => {
                    return Err(self.invalid(format!(
                        "`{}` needs a fixed or input-relative shape",
                        p.name
                    )))
                }
                Shape::Like(j) if j >= self.inputs.len() => {
                    return Err(self.invalid(format!("`{}` refers to missing input {j}", p.name)))
                }
                _ => {}
            }
        }
        for (k, pair) in self.train.iter().chain(&self.test).enumerate() {
            self.check_pair(pair)
                .map_err(|r| self.invalid(format!("pair {k}: {r}")))?;
        }
        if self.train.iter().any(|p| self.test.contains(p)) {
            return Err(self.invalid("train and test pairs overlap"));
        }
        Ok(())
    }

    fn check_pair(&self, pair: &IoPair) -> Result<(), String> {
        if pair.inputs.len() != self.inputs.len() || pair.outputs.len() != self.outputs.len() {
            return Err("wrong number of inputs or outputs".into());
        }
        if pair
            .inputs
            .iter()
            .chain(&pair.outputs)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err("non-finite value".into());
        }
        for (port, data) in self.inputs.iter().zip(&pair.inputs) {
            if self
                .resolve(port.shape, &pair.inputs)
                .is_some_and(|n| n != data.len())
            {
                return Err(format!("input `{}` has length {}", port.name, data.len()));
            }
        }
        for (port, data) in self.outputs.iter().zip(&pair.outputs) {
            if self.resolve(port.shape, &pair.inputs) != Some(data.len()) {
                return Err(format!("output `{}` has length {}", port.name, data.len()));
            }
        }
        Ok(())
    }
}

/// Generators for the shipped demonstration tasks.
pub mod demo {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-9..=9) as f64).collect()
    }

    fn dot(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b)
    }

    /// Distinct pairs from `make`, skipping anything already in `seen`.
    fn distinct(
        count: usize,
        seen: &mut Vec<IoPair>,
        mut make: impl FnMut() -> IoPair,
    ) -> Vec<IoPair> {
        let mut out = Vec::new();
        while out.len() < count {
            let p = make();
            if !seen.contains(&p) {
                seen.push(p.clone());
                out.push(p);
            }
        }
        out
    }

    /// `out = x . y`, trained at length `train_n`, tested at `test_n`.
    pub fn dot_task(
        name: &str,
        train_n: usize,
        test_n: usize,
        pairs: usize,
        seed: u64,
    ) -> TaskSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = Vec::new();
        let make = |n: usize, rng: &mut ChaCha8Rng| {
            let (x, y) = (vector(rng, n), vector(rng, n));
            IoPair {
                outputs: vec![vec![dot(&x, &y)]],
                inputs: vec![x, y],
            }
        };
        let train = distinct(pairs, &mut seen, || make(train_n, &mut rng));
        let test = distinct(pairs, &mut seen, || make(test_n, &mut rng));
        TaskSpec {
            name: name.to_string(),
            description: Some("sum of the element-wise product of x and y".into()),
            inputs: vec![Port::new("x", Shape::Any), Port::new("y", Shape::Like(0))],
            intermediates: vec![Port::new("prod", Shape::Like(0))],
            outputs: vec![Port::new("out", Shape::Fixed(1))],
            train,
            test,
            steps: 2,
            fuel: DEFAULT_FUEL,
            allowed: vec!["mul_ew".into(), "fold_add".into()],
        }
    }

    /// `z = w . x + b` over length-`n` vectors.
    pub fn affine_task(n: usize, pairs: usize, seed: u64) -> TaskSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = Vec::new();
        let mut make = || {
            let (w, x, b) = (
                vector(&mut rng, n),
                vector(&mut rng, n),
                vector(&mut rng, 1),
            );
            IoPair {
                outputs: vec![vec![dot(&w, &x) + b[0]]],
                inputs: vec![w, x, b],
            }
        };
        let train = distinct(pairs, &mut seen, &mut make);
        let test = distinct(pairs, &mut seen, &mut make);
        TaskSpec {
            name: "affine".into(),
            description: Some("linear layer: dot product of w and x plus bias b".into()),
            inputs: vec![
                Port::new("w", Shape::Any),
                Port::new("x", Shape::Like(0)),
                Port::new("b", Shape::Fixed(1)),
            ],
            intermediates: vec![
                Port::new("prod", Shape::Like(0)),
                Port::new("u", Shape::Fixed(1)),
            ],
            outputs: vec![Port::new("z", Shape::Fixed(1))],
            train,
            test,
            steps: 2,
            fuel: DEFAULT_FUEL,
            allowed: vec![
                "mul_ew".into(),
                "fold_add".into(),
                "add_ew".into(),
                "dot".into(),
            ],
        }
    }

    /// `out = x` in one step of `mov`.
    pub fn copy_task(name: &str, seed: u64) -> TaskSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = Vec::new();
        let mut make = || {
            let x = vector(&mut rng, 1);
            IoPair {
                outputs: vec![x.clone()],
                inputs: vec![x],
            }
        };
        let train = distinct(4, &mut seen, &mut make);
        let test = distinct(4, &mut seen, &mut make);
        TaskSpec {
            name: name.to_string(),
            description: None,
            inputs: vec![Port::new("x", Shape::Fixed(1))],
            intermediates: vec![],
            outputs: vec![Port::new("out", Shape::Fixed(1))],
            train,
            test,
            steps: 1,
            fuel: DEFAULT_FUEL,
            allowed: vec!["mov".into()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn add_task() -> TaskSpec {
        TaskSpec {
            name: "add".into(),
            description: None,
            inputs: vec![
                Port::new("x", Shape::Fixed(1)),
                Port::new("y", Shape::Fixed(1)),
            ],
            intermediates: vec![],
            outputs: vec![Port::new("out", Shape::Fixed(1))],
            train: vec![IoPair {
                inputs: vec![vec![2.0], vec![3.0]],
                outputs: vec![vec![5.0]],
            }],
            test: vec![],
            steps: 1,
            fuel: 100,
            allowed: vec!["add2".into()],
        }
    }

    #[test]
    fn json_shapes() {
        let t = add_task();
        let back = TaskSpec::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        let text =
            serde_json::to_string(&vec![Shape::Any, Shape::Fixed(3), Shape::Like(0)]).unwrap();
        assert_eq!(text, r#"["any",{"fixed":3},{"like":0}]"#);
        assert!(matches!(TaskSpec::from_json("{"), Err(TaskError::Parse(_))));
        let extra = t.to_json().replacen('{', "{\"bogus\": 1,", 1);
        assert!(matches!(
            TaskSpec::from_json(&extra),
            Err(TaskError::Parse(_))
        ));
    }

    #[test]
    fn validation() {
        let mut t = add_task();
        t.test = t.train.clone();
        assert!(t.validate().is_err());
        let mut t = add_task();
        t.train[0].outputs[0].push(1.0);
        assert!(t.validate().is_err());
        let mut t = add_task();
        t.outputs[0].shape = Shape::Any;
        assert!(t.validate().is_err());
        let mut t = add_task();
        t.steps = 0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn demo_tasks_are_valid() {
        let dot = demo::dot_task("dot", 3, 8, 4, 0);
        dot.validate().unwrap();
        assert!(dot.test.iter().all(|p| p.inputs[0].len() == 8));
        assert_eq!(dot.lengths(&dot.train[0]), vec![3, 3, 3, 1]);
        demo::affine_task(3, 4, 1).validate().unwrap();
        demo::copy_task("copy", 2).validate().unwrap();
    }
}
