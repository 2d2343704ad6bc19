//! Anytime lexicographic search with operator directives.
//!
//! [`solve`] drives an [`Engine`] to completion, publishing every strictly
//! improving incumbent. [`Session`] runs the same loop on a worker thread
//! behind a control mailbox.

mod engine;
mod session;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::PenaltyVector;
use crate::model::{CellRef, CellShift, Instance, ModelError, RequestEdit, Roster, ShiftIx};

pub use engine::Engine;
pub use session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpPriority {
    #[serde(alias = "high")]
    Highest,
    #[serde(alias = "mid")]
    Middle,
    #[serde(alias = "low")]
    Lowest,
}

impl MpPriority {
    fn label(self) -> &'static str {
        match self {
            MpPriority::Highest => "High",
            MpPriority::Middle => "Mid",
            MpPriority::Lowest => "Low",
        }
    }

    /// Position of the modification-count slot among `levels` penalty
    /// slots. Middle sits directly above the third level, or above the
    /// lowest one when fewer levels exist.
    pub fn slot_position(self, levels: usize) -> usize {
        match self {
            MpPriority::Highest => 0,
            MpPriority::Lowest => levels,
            MpPriority::Middle => {
                if levels >= MIDDLE_TIER {
                    MIDDLE_TIER - 1
                } else {
                    levels.saturating_sub(1)
                }
            }
        }
    }
}

/// The middle MP slot is placed above this tier of the level ladder.
pub const MIDDLE_TIER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Lnps { restart_interval_seconds: f64 },
    Mp { mp_priority: MpPriority },
    MpIs { mp_priority: MpPriority },
}

impl Strategy {
    pub fn mp_priority(&self) -> Option<MpPriority> {
        match *self {
            Strategy::Lnps { .. } => None,
            Strategy::Mp { mp_priority } | Strategy::MpIs { mp_priority } => Some(mp_priority),
        }
    }

    pub fn restart_interval(&self) -> Option<f64> {
        match *self {
            Strategy::Lnps { restart_interval_seconds } => Some(restart_interval_seconds),
            _ => None,
        }
    }

    /// Whether construction seeds prioritized cells with their values.
    pub fn seeds_prioritized(&self) -> bool {
        !matches!(self, Strategy::Mp { .. })
    }

    /// The nine strategy settings compared in the benchmark.
    pub fn benchmark_set() -> Vec<Strategy> {
        let mut out: Vec<Strategy> = [10.0, 30.0, 60.0]
            .into_iter()
            .map(|t| Strategy::Lnps { restart_interval_seconds: t })
            .collect();
        for p in [MpPriority::Highest, MpPriority::Middle, MpPriority::Lowest] {
            out.push(Strategy::Mp { mp_priority: p });
        }
        for p in [MpPriority::Highest, MpPriority::Middle, MpPriority::Lowest] {
            out.push(Strategy::MpIs { mp_priority: p });
        }
        out
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Lnps { restart_interval_seconds: t } => write!(f, "LNPS-{t}"),
            Strategy::Mp { mp_priority } => write!(f, "MP-{}", mp_priority.label()),
            Strategy::MpIs { mp_priority } => write!(f, "MP+IS-{}", mp_priority.label()),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    /// Parses names such as `LNPS-10`, `MP-High` or `MP+IS-Mid`.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unknown strategy `{s}`");
        let (head, tail) = s.rsplit_once('-').ok_or_else(bad)?;
        let prio = || match tail.to_ascii_lowercase().as_str() {
            "high" | "highest" => Ok(MpPriority::Highest),
            "mid" | "middle" => Ok(MpPriority::Middle),
            "low" | "lowest" => Ok(MpPriority::Lowest),
            _ => Err(bad()),
        };
        match head.to_ascii_uppercase().as_str() {
            "LNPS" => {
                let t: f64 = tail.parse().map_err(|_| bad())?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(format!("restart interval must be positive in `{s}`"));
                }
                Ok(Strategy::Lnps { restart_interval_seconds: t })
            }
            "MP" => Ok(Strategy::Mp { mp_priority: prio()? }),
            "MP+IS" | "MP_IS" => Ok(Strategy::MpIs { mp_priority: prio()? }),
            _ => Err(bad()),
        }
    }
}

/// How elapsed time is measured. `Iterations` replaces the wall clock by a
/// virtual one advancing `per_second` evaluations per second, which makes
/// every time-based decision reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TimeModel {
    #[default]
    Wall,
    Iterations { per_second: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(flatten)]
    pub strategy: Strategy,
    #[serde(default)]
    pub soften_hard: bool,
    pub time_limit_seconds: f64,
    #[serde(default)]
    pub random_seed: u64,
    #[serde(default)]
    pub time_model: TimeModel,
    /// Keep waiting for control messages after reaching a zero key instead
    /// of finishing. Interactive sessions set this.
    #[serde(default)]
    pub idle_when_optimal: bool,
}

impl SearchConfig {
    pub fn new(strategy: Strategy, time_limit_seconds: f64, random_seed: u64) -> Self {
        SearchConfig {
            strategy,
            soften_hard: false,
            time_limit_seconds,
            random_seed,
            time_model: TimeModel::Wall,
            idle_when_optimal: false,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.time_limit_seconds > 0.0 && self.time_limit_seconds.is_finite()) {
            return Err(SearchError::Config("time_limit_seconds must be positive".into()));
        }
        if let Some(t) = self.strategy.restart_interval() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SearchError::Config("restart_interval_seconds must be positive".into()));
            }
        }
        if let TimeModel::Iterations { per_second: 0 } = self.time_model {
            return Err(SearchError::Config("per_second must be positive".into()));
        }
        Ok(())
    }
}

/// Operator directives over decision cells.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDirectives {
    #[serde(default)]
    pub fixed: Vec<CellShift>,
    #[serde(default)]
    pub prioritized: Vec<CellShift>,
    #[serde(default)]
    pub cleared: Vec<CellRef>,
}

impl CellDirectives {
    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty() && self.prioritized.is_empty() && self.cleared.is_empty()
    }

    /// Prioritize every decision cell of `roster`.
    pub fn prioritize_all(roster: &Roster, instance: &Instance) -> Self {
        let mut out = CellDirectives::default();
        for n in 0..instance.nurse_count() {
            for day in 0..instance.end_day() {
                out.prioritized.push(CellShift::new(
                    instance.nurse_id(n),
                    day,
                    instance.shift_code(roster.get(n, day)),
                ));
            }
        }
        out
    }

    /// Checks the directives against `instance` and resolves ids.
    pub fn resolve(&self, instance: &Instance) -> Result<Resolved, SearchError> {
        let mut errors = Vec::new();
        let mut seen: BTreeMap<(usize, i32), &'static str> = BTreeMap::new();
        let mut cell = |what: &'static str, nurse: &str, day: i32, errors: &mut Vec<String>| {
            let Some(n) = instance.nurse_index(nurse) else {
                errors.push(format!("{what}: unknown nurse `{nurse}`"));
                return None;
            };
            if day < 0 || day >= instance.end_day() {
                errors.push(format!("{what}: day {day} is not a decision day for `{nurse}`"));
                return None;
            }
            if let Some(prev) = seen.insert((n, day), what) {
                errors.push(format!("{what}: cell ({nurse}, {day}) already carries a {prev} directive"));
                return None;
            }
            Some(n)
        };
        let mut valued = |what: &'static str, list: &[CellShift], errors: &mut Vec<String>| {
            let mut out = Vec::new();
            for cs in list {
                let Some(n) = cell(what, &cs.nurse, cs.day, errors) else { continue };
                match instance.shift_index(&cs.shift) {
                    Some(s) if instance.in_domain(n, cs.day, s) => {
                        out.push(Assignment { nurse: n, day: cs.day, shift: s })
                    }
                    Some(_) => errors.push(format!(
                        "{what}: `{}` is outside the domain of ({}, {})",
                        cs.shift, cs.nurse, cs.day
                    )),
                    None => errors.push(format!("{what}: unknown shift `{}`", cs.shift)),
                }
            }
            out
        };
        let fixed = valued("fixed", &self.fixed, &mut errors);
        let prioritized = valued("prioritized", &self.prioritized, &mut errors);
        let mut cleared = Vec::new();
        for c in &self.cleared {
            if let Some(n) = cell("cleared", &c.nurse, c.day, &mut errors) {
                cleared.push((n, c.day));
            }
        }
        if errors.is_empty() {
            Ok(Resolved { fixed, prioritized, cleared })
        } else {
            Err(SearchError::Directive(errors))
        }
    }
}

/// One cell value by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub nurse: usize,
    pub day: i32,
    pub shift: ShiftIx,
}

/// Directives with ids resolved against one instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolved {
    pub fixed: Vec<Assignment>,
    pub prioritized: Vec<Assignment>,
    pub cleared: Vec<(usize, i32)>,
}

/// Number of prioritized cells whose roster value differs.
pub fn mp_objective(roster: &Roster, prioritized: &[Assignment]) -> usize {
    prioritized
        .iter()
        .filter(|a| roster.get(a.nurse, a.day) != a.shift)
        .count()
}

/// Share of prioritized cells that changed; absent for an empty set.
pub fn modification_rate(roster: &Roster, prioritized: &[Assignment]) -> Option<f64> {
    if prioritized.is_empty() {
        None
    } else {
        Some(mp_objective(roster, prioritized) as f64 / prioritized.len() as f64)
    }
}

/// Construction seeds. The engine writes each seed before the first greedy
/// pass and never consults the guidance again, so it only shapes the start.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Guidance {
    pub seeds: Vec<Assignment>,
}

impl Guidance {
    pub fn is_noop(&self) -> bool {
        self.seeds.is_empty()
    }
}

pub fn initial_value_guidance(prioritized: &[Assignment]) -> Guidance {
    Guidance { seeds: prioritized.to_vec() }
}

/// Messages accepted by a running search.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Pause,
    Resume,
    Stop,
    /// Manual restart with new directives and request edits.
    Reconfigure {
        directives: CellDirectives,
        request_edits: Vec<RequestEdit>,
    },
    SetSoften(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub sequence: u64,
    /// Restart epoch; keys strictly improve among incumbents of one epoch.
    pub epoch: u64,
    pub wall_time_seconds: f64,
    pub roster: Roster,
    pub penalties: PenaltyVector,
    pub hard_weight: u64,
    pub modification_count: usize,
    pub prioritized_count: usize,
    /// The ordering key the search minimized when this was published.
    pub key: Vec<u64>,
}

impl Incumbent {
    pub fn modification_rate(&self) -> Option<f64> {
        (self.prioritized_count > 0)
            .then(|| self.modification_count as f64 / self.prioritized_count as f64)
    }

    pub fn record(&self, roster_ref: impl Into<String>) -> IncumbentRecord {
        IncumbentRecord {
            sequence: self.sequence,
            wall_time_seconds: self.wall_time_seconds,
            penalty_vector: self.penalties.clone(),
            modification_count: self.modification_count,
            roster_ref: roster_ref.into(),
        }
    }
}

/// Exchange form of an incumbent event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentRecord {
    pub sequence: u64,
    pub wall_time_seconds: f64,
    pub penalty_vector: PenaltyVector,
    pub modification_count: usize,
    pub roster_ref: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartKind {
    Automatic,
    Manual,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Incumbent(Incumbent),
    Restart { kind: RestartKind, at_seconds: f64, count: u32 },
    Paused { at_seconds: f64 },
    Resumed { at_seconds: f64 },
    /// A control message that could not be applied; state is unchanged.
    Rejected { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    /// The key reached zero.
    Optimal,
    TimeLimit,
    Stopped,
    /// No cell is free to change.
    Exhausted,
    /// No hard-feasible roster was found.
    Infeasible { best_hard_weight: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub status: Status,
    pub best: Option<Incumbent>,
    pub incumbents: u64,
    pub iterations: u64,
    pub automatic_restarts: u32,
    pub manual_restarts: u32,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("invalid directives: {}", .0.join("; "))]
    Directive(Vec<String>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Runs a search to completion. `control` may deliver messages while it
/// runs; `sink` receives every event in order.
pub fn solve(
    instance: &Instance,
    config: &SearchConfig,
    directives: &CellDirectives,
    control: Option<&std::sync::mpsc::Receiver<Control>>,
    sink: &mut dyn FnMut(&Event),
) -> Result<SearchOutcome, SearchError> {
    let mut engine = Engine::new(std::sync::Arc::new(instance.clone()), config.clone(), directives)?;
    Ok(engine.run(control, sink))
}

/// [`solve`] without control, collecting the incumbents.
pub fn solve_collect(
    instance: &Instance,
    config: &SearchConfig,
    directives: &CellDirectives,
) -> Result<(Vec<Incumbent>, SearchOutcome), SearchError> {
    let mut out = Vec::new();
    let outcome = solve(instance, config, directives, None, &mut |e| {
        if let Event::Incumbent(inc) = e {
            out.push(inc.clone());
        }
    })?;
    Ok((out, outcome))
}
