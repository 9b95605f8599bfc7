use crate::rational::{serde_string, Rational};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepPhase {
    /// Cycle removal before the main loop, or a cycle in the baseline.
    Cycle,
    /// Maximal path of the baseline.
    Path,
    Ccc,
    Ccw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchTaken {
    Alpha,
    Beta,
}

/// One rounding iteration, serialized as a single JSON line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub phase: StepPhase,
    /// `(s_i, t_i)` labels of each path; empty for cycle and baseline steps.
    pub endpoints: Vec<[String; 2]>,
    #[serde(with = "serde_string")]
    pub alpha: Rational,
    #[serde(with = "serde_string")]
    pub beta: Rational,
    pub branch: BranchTaken,
    /// Edges (`e<k>`) and vertices that became settled in this step.
    pub settled: Vec<String>,
}

impl TraceStep {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace steps always serialize")
    }
}

pub fn to_json_lines(steps: &[TraceStep]) -> String {
    steps.iter().map(|s| s.to_json_line() + "\n").collect()
}
