//! Exhaustive optimum for tiny instances, used as ground truth in tests.
//!
//! The enumeration visits every completion of the free decision cells and
//! scores each one with the full evaluator. It shares no inference code
//! with the search engine.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::{evaluate, PenaltyVector};
use crate::model::{Instance, Roster, ShiftIx};
use crate::search::Assignment;

/// Largest search space the oracle accepts.
pub const MAX_SPACE: u128 = 100_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("search space of {size} completions exceeds the limit of {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("fixed value for nurse {nurse} on day {day} is outside its domain")]
    BadFixed { nurse: usize, day: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub optimum: PenaltyVector,
    /// Hard weight of the optimum. Zero unless no hard-feasible completion
    /// exists while hard constraints are not softened.
    pub hard_weight: u64,
    pub feasible: bool,
    pub optimal_rosters: Vec<Roster>,
    pub optimal_count: u64,
    pub explored: u64,
}

/// Size of the completion space: the product of free cell domain sizes.
pub fn space_size(instance: &Instance, fixed: &[Assignment]) -> u128 {
    let mut size: u128 = 1;
    for n in 0..instance.nurse_count() {
        for d in 0..instance.end_day() {
            if fixed.iter().any(|a| a.nurse == n && a.day == d) {
                continue;
            }
            let k = instance.cell_domain(n, d).map_or(1, |s| s.len()) as u128;
            size = size.saturating_mul(k);
        }
    }
    size
}

pub fn enumerate_optimal(instance: &Instance, soften_hard: bool, cap: usize) -> Result<OracleResult, OracleError> {
    enumerate_optimal_with(instance, soften_hard, cap, &[])
}

/// Enumerates completions with `fixed` cells held constant. Without
/// softening, hard-feasible completions rank first; only if none exists is
/// the optimum taken over hard weight and then penalties.
pub fn enumerate_optimal_with(
    instance: &Instance,
    soften_hard: bool,
    cap: usize,
    fixed: &[Assignment],
) -> Result<OracleResult, OracleError> {
    let size = space_size(instance, fixed);
    if size > MAX_SPACE {
        return Err(OracleError::TooLarge { size, limit: MAX_SPACE });
    }
    for a in fixed {
        if !instance.in_domain(a.nurse, a.day, a.shift) {
            return Err(OracleError::BadFixed { nurse: a.nurse, day: a.day });
        }
    }
    let mut roster = {
        let mut core = std::collections::BTreeMap::new();
        for n in 0..instance.nurse_count() {
            for d in 0..instance.end_day() {
                core.insert((n, d), instance.cell_domain(n, d).expect("decision day")[0]);
            }
        }
        for a in fixed {
            core.insert((a.nurse, a.day), a.shift);
        }
        instance.complete(&core).expect("domain values complete")
    };
    let cells: Vec<(usize, i32, &[ShiftIx])> = (0..instance.nurse_count())
        .flat_map(|n| (0..instance.end_day()).map(move |d| (n, d)))
        .filter(|&(n, d)| !fixed.iter().any(|a| a.nurse == n && a.day == d))
        .map(|(n, d)| (n, d, instance.cell_domain(n, d).expect("decision day")))
        .filter(|(_, _, dom)| dom.len() > 1)
        .collect();
    let mut digits = vec![0usize; cells.len()];
    let mut best: Option<(u64, PenaltyVector)> = None;
    let mut witnesses = Vec::new();
    let mut count = 0u64;
    let mut explored = 0u64;
    loop {
        explored += 1;
        let ev = evaluate(&roster, instance, soften_hard);
        let hard = if soften_hard { 0 } else { ev.hard_weight() };
        let key = (hard, ev.penalties);
        let ord = best.as_ref().map(|b| key.cmp(b));
        match ord {
            None | Some(std::cmp::Ordering::Less) => {
                best = Some(key);
                witnesses.clear();
                witnesses.push(roster.clone());
                count = 1;
            }
            Some(std::cmp::Ordering::Equal) => {
                count += 1;
                if witnesses.len() < cap {
                    witnesses.push(roster.clone());
                }
            }
            Some(std::cmp::Ordering::Greater) => {}
        }
        // Odometer step over the free cells.
        let mut i = 0;
        loop {
            if i == cells.len() {
                let (hard_weight, optimum) = best.expect("at least one completion");
                return Ok(OracleResult {
                    feasible: soften_hard || hard_weight == 0,
                    optimum,
                    hard_weight,
                    optimal_rosters: witnesses,
                    optimal_count: count,
                    explored,
                });
            }
            let (n, d, dom) = cells[i];
            digits[i] += 1;
            if digits[i] < dom.len() {
                roster.set(n, d, dom[digits[i]]);
                break;
            }
            digits[i] = 0;
            roster.set(n, d, dom[0]);
            i += 1;
        }
    }
}

/// Stable content hash of an instance's canonical form.
pub fn instance_hash(instance: &Instance) -> String {
    hex::encode(Sha256::digest(instance.to_json().as_bytes()))
}

/// Stored oracle result for regression checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Golden {
    pub instance_hash: String,
    pub optimum: PenaltyVector,
    pub witness_count: u64,
}

impl Golden {
    pub fn new(instance: &Instance, result: &OracleResult) -> Self {
        Golden {
            instance_hash: instance_hash(instance),
            optimum: result.optimum.clone(),
            witness_count: result.optimal_count,
        }
    }
}

#[cfg(test)]
mod tests;
