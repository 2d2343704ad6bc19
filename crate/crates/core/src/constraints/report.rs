use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Evaluation, PenaltyVector};
use crate::model::{Instance, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PenaltyEntry {
    pub priority: i64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub kind: Kind,
    pub reason: String,
    pub params: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
    pub weight: u64,
    pub priority: i64,
}

/// Violation report in its exchange form, shared by the CLI and the service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub feasible: bool,
    pub violations: Vec<ViolationRecord>,
    pub penalty_vector: PenaltyVector,
}

impl Report {
    pub fn new(evaluation: &Evaluation, instance: &Instance) -> Self {
        let violations = evaluation
            .terms
            .iter()
            .map(|t| ViolationRecord {
                kind: t.violation.kind,
                reason: t.violation.reason.family().as_str().to_string(),
                params: t.violation.reason.params(instance),
                limit: t.violation.bound.map(|b| b.limit),
                value: t.violation.bound.map(|b| b.value),
                weight: t.weight,
                priority: t.priority,
            })
            .collect();
        Report {
            feasible: evaluation.feasible,
            violations,
            penalty_vector: evaluation.penalties.clone(),
        }
    }

    /// Human-readable listing, one violation per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            let params: Vec<String> = v
                .params
                .iter()
                .map(|p| match p {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&format!("{} {}({})", v.kind.as_str(), v.reason, params.join(",")));
            if let (Some(l), Some(x)) = (v.limit, v.value) {
                out.push_str(&format!(" limit={l} value={x}"));
            }
            out.push_str(&format!(" weight={} @{}\n", v.weight, v.priority));
        }
        out.push_str("penalties:");
        if self.penalty_vector.is_zero() {
            out.push_str(" none");
        }
        for (p, w) in self.penalty_vector.iter() {
            out.push_str(&format!(" {w}@{p}"));
        }
        out.push('\n');
        out.push_str(if self.feasible { "feasible\n" } else { "infeasible\n" });
        out
    }
}
