//! Strategy comparison runs, scalarized scores and cactus data.

mod suite;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::PenaltyVector;
use crate::generator::ScenarioKind;

pub use suite::{
    load_records, load_suite, prepare_initial, record_key, run_suite, trace_id, write_records, write_trace,
    BenchInstance,
    InstanceSource, RunOptions, SuiteFile, SuitePlan,
};

/// Default weight base for scalarization.
pub const DEFAULT_BETA: f64 = 10.0;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid suite configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Search(#[from] crate::search::SearchError),
    #[error(transparent)]
    Generator(#[from] crate::generator::GeneratorError),
}

/// How a benchmark cell ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Optimal,
    TimeLimit,
    Stopped,
    Exhausted,
    Infeasible,
    Skipped,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Optimal => "optimal",
            RecordStatus::TimeLimit => "time_limit",
            RecordStatus::Stopped => "stopped",
            RecordStatus::Exhausted => "exhausted",
            RecordStatus::Infeasible => "infeasible",
            RecordStatus::Skipped => "skipped",
        }
    }
}

impl FromStr for RecordStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        use RecordStatus::*;
        [Optimal, TimeLimit, Stopped, Exhausted, Infeasible, Skipped]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown record status `{s}`"))
    }
}

/// One cell of the benchmark product.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance_id: String,
    pub scenario: ScenarioKind,
    pub strategy: String,
    pub time_limit_seconds: f64,
    pub repetition: u32,
    pub status: RecordStatus,
    pub skip_cause: Option<String>,
    /// Effective priority levels of the scenario instance, most important
    /// first. These are the tiers of the scalarized score.
    pub levels: Vec<i64>,
    /// Final penalty vector; absent when no incumbent was found.
    pub penalties: Option<PenaltyVector>,
    /// Scalarized score, filled by [`scalarize`].
    pub score: Option<f64>,
    pub modification_rate: Option<f64>,
    pub modification_count: usize,
    pub prioritized_count: usize,
    pub iterations: u64,
    pub automatic_restarts: u32,
    pub trace_ref: Option<String>,
}

impl BenchRecord {
    pub fn is_skipped(&self) -> bool {
        self.status == RecordStatus::Skipped
    }

    /// Raw per-tier values aligned with `levels`.
    pub fn tier_values(&self, levels: &[i64]) -> Option<Vec<u64>> {
        self.penalties.as_ref().map(|p| p.to_slots(levels))
    }
}

/// Weights `beta^(n-i)` for tiers `i = 1..=n`.
pub fn tier_weights(beta: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| beta.powi((n - i) as i32)).collect()
}

/// Score of one run within its comparison group.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarizedScore {
    pub raw: Vec<u64>,
    pub normalized: Vec<f64>,
    pub weights: Vec<f64>,
    pub value: f64,
}

/// Min-max normalizes each tier across `vectors` and aggregates with
/// [`tier_weights`]. A tier on which every vector agrees normalizes to 0.
pub fn scalarize_group(vectors: &[Vec<u64>], beta: f64) -> Vec<ScalarizedScore> {
    let n = vectors.iter().map(Vec::len).max().unwrap_or(0);
    let weights = tier_weights(beta, n);
    let at = |v: &Vec<u64>, i: usize| v.get(i).copied().unwrap_or(0);
    let range: Vec<(u64, u64)> = (0..n)
        .map(|i| {
            let lo = vectors.iter().map(|v| at(v, i)).min().unwrap_or(0);
            let hi = vectors.iter().map(|v| at(v, i)).max().unwrap_or(0);
            (lo, hi)
        })
        .collect();
    vectors
        .iter()
        .map(|v| {
            let normalized: Vec<f64> = (0..n)
                .map(|i| {
                    let (lo, hi) = range[i];
                    if hi == lo {
                        0.0
                    } else {
                        (at(v, i) - lo) as f64 / (hi - lo) as f64
                    }
                })
                .collect();
            let value = normalized.iter().zip(&weights).map(|(f, w)| f * w).sum();
            ScalarizedScore { raw: (0..n).map(|i| at(v, i)).collect(), normalized, weights: weights.clone(), value }
        })
        .collect()
}

type GroupKey = (String, ScenarioKind, u64);

/// Fills `score` for every record that has a penalty vector. Records are
/// compared within groups sharing instance, scenario and time limit; the
/// tiers are the union of those records' levels.
pub fn scalarize(records: &mut [BenchRecord], beta: f64) {
    let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter_mut().enumerate() {
        r.score = None;
        if r.penalties.is_some() {
            let key = (r.instance_id.clone(), r.scenario, r.time_limit_seconds.to_bits());
            groups.entry(key).or_default().push(i);
        }
    }
    for members in groups.values() {
        let mut levels: Vec<i64> = members.iter().flat_map(|&i| records[i].levels.iter().copied()).collect();
        levels.sort_unstable_by(|a, b| b.cmp(a));
        levels.dedup();
        let vectors: Vec<Vec<u64>> =
            members.iter().map(|&i| records[i].tier_values(&levels).expect("grouped on presence")).collect();
        for (&i, s) in members.iter().zip(scalarize_group(&vectors, beta)) {
            records[i].score = Some(s.value);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CactusAxis {
    /// The scalarized score.
    Penalty,
    ModificationRate,
}

impl CactusAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            CactusAxis::Penalty => "penalty",
            CactusAxis::ModificationRate => "modrate",
        }
    }
}

impl fmt::Display for CactusAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CactusAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "penalty" | "f" | "F" | "score" => Ok(CactusAxis::Penalty),
            "modrate" | "modification_rate" => Ok(CactusAxis::ModificationRate),
            _ => Err(format!("unknown cactus axis `{s}` (expected penalty or modrate)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CactusPoint {
    pub strategy: String,
    pub rank: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cactus {
    pub points: Vec<CactusPoint>,
    /// Records without a value on the chosen axis.
    pub omitted: usize,
}

impl Cactus {
    pub fn series(&self, strategy: &str) -> Vec<f64> {
        self.points.iter().filter(|p| p.strategy == strategy).map(|p| p.value).collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per strategy, the axis values sorted ascending and ranked from 1.
/// Strategies appear in order of first occurrence.
pub fn emit_cactus(records: &[BenchRecord], axis: CactusAxis) -> Cactus {
    let mut order: Vec<&str> = Vec::new();
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut omitted = 0;
    for r in records {
        let v = match axis {
            CactusAxis::Penalty => r.score,
            CactusAxis::ModificationRate => r.modification_rate,
        };
        let Some(v) = v else {
            omitted += 1;
            continue;
        };
        if !values.contains_key(r.strategy.as_str()) {
            order.push(&r.strategy);
        }
        values.entry(&r.strategy).or_default().push(v);
    }
    let mut points = Vec::new();
    for s in order {
        let mut vs = values.remove(s).unwrap_or_default();
        vs.sort_by(f64::total_cmp);
        points.extend(vs.into_iter().enumerate().map(|(i, value)| CactusPoint {
            strategy: s.to_string(),
            rank: i + 1,
            value,
        }));
    }
    Cactus { points, omitted }
}

/// Median of the values, or `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}
