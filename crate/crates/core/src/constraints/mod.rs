//! Constraint evaluation: violations, penalty terms and the lexicographic
//! penalty vector.

pub(crate) mod eval;
mod family;
mod incremental;
mod report;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use family::Family;
pub use incremental::IncrementalEvaluator;
pub use report::{PenaltyEntry, Report, ViolationRecord};

use crate::model::{Instance, Kind, Roster, Side};
use eval::Sink;

/// Structured violation reason. Indices refer to the instance's nurse,
/// nurse-group, shift-group and rule tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reason {
    WorkDays { side: Side, nurse: usize },
    WeeklyRest { side: Side, nurse: usize },
    PosRequest { nurse: usize, day: i32 },
    NegRequest { nurse: usize, day: i32 },
    EqShifts { nurse: usize },
    ConsecutiveWork { nurse: usize, begin_day: i32 },
    Staff { side: Side, group: usize, shift_group: usize, day: i32 },
    Point { side: Side, group: usize, shift_group: usize, day: i32 },
    ShiftFreq { side: Side, nurse: usize, shift_group: usize },
    Pattern { side: Side, nurse: usize, rule: usize },
    Succession { nurse: usize, day: i32, rule: usize },
    RestGap { nurse: usize, day: i32 },
    Pair { first: usize, second: usize, day: i32 },
    IsolatedWorkday { nurse: usize, day: i32 },
    LeaveAdjacentRest { nurse: usize, begin_day: i32 },
    Balance { rule: usize },
}

impl Reason {
    pub fn family(&self) -> Family {
        let pick = |side: Side, lb, ub| if side == Side::Lower { lb } else { ub };
        match *self {
            Reason::WorkDays { side, .. } => pick(side, Family::WorkDaysLb, Family::WorkDaysUb),
            Reason::WeeklyRest { side, .. } => pick(side, Family::WeeklyRestLb, Family::WeeklyRestUb),
            Reason::PosRequest { .. } => Family::PosRequest,
            Reason::NegRequest { .. } => Family::NegRequest,
            Reason::EqShifts { .. } => Family::EqShifts,
            Reason::ConsecutiveWork { .. } => Family::ConsecutiveWorkDays,
            Reason::Staff { side, .. } => pick(side, Family::StaffLb, Family::StaffUb),
            Reason::Point { side, .. } => pick(side, Family::PointLb, Family::PointUb),
            Reason::ShiftFreq { side, .. } => pick(side, Family::ShiftLb, Family::ShiftUb),
            Reason::Pattern { side, .. } => pick(side, Family::PatternLb, Family::PatternUb),
            Reason::Succession { .. } => Family::Succession,
            Reason::RestGap { .. } => Family::RestGap,
            Reason::Pair { .. } => Family::Pair,
            Reason::IsolatedWorkday { .. } => Family::IsolatedWorkday,
            Reason::LeaveAdjacentRest { .. } => Family::LeaveAdjacentRest,
            Reason::Balance { .. } => Family::Balance,
        }
    }

    /// Nurse whose row this reason is attached to, if any.
    pub fn nurse(&self) -> Option<usize> {
        match *self {
            Reason::WorkDays { nurse, .. }
            | Reason::WeeklyRest { nurse, .. }
            | Reason::PosRequest { nurse, .. }
            | Reason::NegRequest { nurse, .. }
            | Reason::EqShifts { nurse }
            | Reason::ConsecutiveWork { nurse, .. }
            | Reason::ShiftFreq { nurse, .. }
            | Reason::Pattern { nurse, .. }
            | Reason::Succession { nurse, .. }
            | Reason::RestGap { nurse, .. }
            | Reason::IsolatedWorkday { nurse, .. }
            | Reason::LeaveAdjacentRest { nurse, .. } => Some(nurse),
            _ => None,
        }
    }

    /// Parameters with indices resolved to declared ids.
    pub fn params(&self, instance: &Instance) -> Vec<Value> {
        let c = instance.compiled();
        let nurse = |n: usize| json!(instance.nurse_id(n));
        match *self {
            Reason::WorkDays { nurse: n, .. }
            | Reason::WeeklyRest { nurse: n, .. }
            | Reason::EqShifts { nurse: n } => vec![nurse(n)],
            Reason::PosRequest { nurse: n, day }
            | Reason::NegRequest { nurse: n, day }
            | Reason::RestGap { nurse: n, day }
            | Reason::IsolatedWorkday { nurse: n, day } => vec![nurse(n), json!(day)],
            Reason::ConsecutiveWork { nurse: n, begin_day }
            | Reason::LeaveAdjacentRest { nurse: n, begin_day } => vec![nurse(n), json!(begin_day)],
            Reason::Staff { group, shift_group, day, .. } | Reason::Point { group, shift_group, day, .. } => {
                vec![json!(c.group_names[group]), json!(c.sg_names[shift_group]), json!(day)]
            }
            Reason::ShiftFreq { nurse: n, shift_group, .. } => vec![nurse(n), json!(c.sg_names[shift_group])],
            Reason::Pattern { nurse: n, rule, .. } => vec![nurse(n), json!(c.patterns[rule].id)],
            Reason::Succession { nurse: n, day, rule } => vec![nurse(n), json!(day), json!(rule)],
            Reason::Pair { first, second, day } => vec![nurse(first), nurse(second), json!(day)],
            Reason::Balance { rule } => vec![json!(c.balance[rule].id)],
        }
    }

    /// `family(p1,p2,...)` rendering.
    pub fn render(&self, instance: &Instance) -> String {
        let params: Vec<String> = self
            .params(instance)
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        format!("{}({})", self.family(), params.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bound {
    pub limit: i64,
    pub value: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Violation {
    pub kind: Kind,
    pub reason: Reason,
    pub bound: Option<Bound>,
}

impl Violation {
    pub fn new(kind: Kind, reason: Reason, bound: Option<(i64, i64)>) -> Self {
        Violation {
            kind,
            reason,
            bound: bound.map(|(limit, value)| Bound { limit, value }),
        }
    }

    /// Squared deviation for bounded violations, 1 otherwise.
    pub fn weight(&self) -> u64 {
        weight_of(self.bound)
    }
}

#[inline]
pub(crate) fn weight_of(bound: Option<Bound>) -> u64 {
    match bound {
        Some(b) => {
            let d = (b.limit - b.value).unsigned_abs();
            d * d
        }
        None => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PenaltyTerm {
    pub violation: Violation,
    pub weight: u64,
    pub priority: i64,
}

/// Total weight per priority level. Levels with zero weight are not stored,
/// so equal vectors compare and hash equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<PenaltyEntry>", into = "Vec<PenaltyEntry>")]
pub struct PenaltyVector(BTreeMap<i64, u64>);

impl PenaltyVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, level: i64, weight: u64) {
        if weight > 0 {
            *self.0.entry(level).or_insert(0) += weight;
        }
    }

    pub fn get(&self, level: i64) -> u64 {
        self.0.get(&level).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Non-zero levels, most important first.
    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.0.iter().rev().map(|(&l, &w)| (l, w))
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    /// Builds a vector from per-slot sums laid out over `levels`.
    pub fn from_slots(levels: &[i64], slots: &[u64]) -> Self {
        let mut v = PenaltyVector::new();
        for (&l, &w) in levels.iter().zip(slots) {
            v.add(l, w);
        }
        v
    }

    /// Per-slot sums over `levels`; levels absent from the list are dropped.
    pub fn to_slots(&self, levels: &[i64]) -> Vec<u64> {
        levels.iter().map(|&l| self.get(l)).collect()
    }
}

impl Ord for PenaltyVector {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.0.iter().rev().peekable();
        let mut b = other.0.iter().rev().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(la, wa)), Some(&(lb, wb))) => match la.cmp(lb) {
                    // The side holding the higher non-zero level is worse.
                    Ordering::Greater => return Ordering::Greater,
                    Ordering::Less => return Ordering::Less,
                    Ordering::Equal => match wa.cmp(wb) {
                        Ordering::Equal => {
                            a.next();
                            b.next();
                        }
                        o => return o,
                    },
                },
            }
        }
    }
}

impl PartialOrd for PenaltyVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Vec<PenaltyEntry>> for PenaltyVector {
    fn from(entries: Vec<PenaltyEntry>) -> Self {
        let mut v = PenaltyVector::new();
        for e in entries {
            v.add(e.priority, e.total);
        }
        v
    }
}

impl From<PenaltyVector> for Vec<PenaltyEntry> {
    fn from(v: PenaltyVector) -> Self {
        v.iter().map(|(priority, total)| PenaltyEntry { priority, total }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub terms: Vec<PenaltyTerm>,
    pub penalties: PenaltyVector,
    pub feasible: bool,
}

impl Evaluation {
    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.terms.iter().map(|t| &t.violation)
    }

    pub fn hard_count(&self) -> usize {
        self.terms.iter().filter(|t| t.violation.kind == Kind::Hard).count()
    }

    pub fn hard_weight(&self) -> u64 {
        self.terms
            .iter()
            .filter(|t| t.violation.kind == Kind::Hard)
            .map(|t| t.weight)
            .sum()
    }
}

macro_rules! row_evaluator {
    ($(#[$m:meta])* $name:ident => $inner:path) => {
        $(#[$m])*
        pub fn $name(roster: &Roster, instance: &Instance) -> Vec<Violation> {
            let c = instance.compiled();
            let mut out = Vec::new();
            for n in 0..roster.nurse_count() {
                $inner(c, n, roster.row(n), &mut out);
            }
            out
        }
    };
}

row_evaluator!(
    /// Work-day count bounds over the current period.
    eval_workdays => eval::work_days
);
row_evaluator!(
    /// Weekly-rest count bounds; holiday cells never count.
    eval_weekly_rest => eval::weekly_rest
);
row_evaluator!(eval_requests => eval::requests);
row_evaluator!(eval_ld_se_balance => eval::ld_se_balance);
row_evaluator!(
    /// One violation per start day of an over-length window of work days.
    eval_consecutive_work => eval::consecutive_work
);
row_evaluator!(eval_shift_frequency => eval::shift_frequency);
row_evaluator!(eval_shift_patterns => eval::patterns);
row_evaluator!(eval_inter_shift => eval::inter_shift);
row_evaluator!(eval_isolated_workdays => eval::isolated_workdays);
row_evaluator!(eval_leave_adjacent_rest => eval::leave_adjacent_rest);

pub fn eval_daily_staffing(roster: &Roster, instance: &Instance) -> Vec<Violation> {
    let c = instance.compiled();
    let mut out = Vec::new();
    for day in c.first_day..c.end_day {
        eval::staffing(c, roster.cells(), day, &mut out);
    }
    out
}

pub fn eval_pairing(roster: &Roster, instance: &Instance) -> Vec<Violation> {
    let c = instance.compiled();
    let mut out = Vec::new();
    for day in c.first_day..c.end_day {
        eval::pairs(c, roster.cells(), day, &mut out);
    }
    out
}

pub fn eval_workload_balance(roster: &Roster, instance: &Instance) -> Vec<Violation> {
    let c = instance.compiled();
    let mut out = Vec::new();
    for (i, rule) in c.balance.iter().enumerate() {
        let metrics: Vec<i64> = rule
            .members
            .iter()
            .map(|&n| eval::balance_metric(c, rule, roster.row(n)))
            .collect();
        eval::balance_term(i, rule, &metrics, &mut out);
    }
    out
}

/// Every violation of the roster, in a stable order.
pub fn violations(roster: &Roster, instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    eval::all_terms(instance.compiled(), roster.cells(), &mut out);
    out
}

/// Full evaluation. `soften_hard` only changes the feasibility verdict; hard
/// families always sit on their own levels above the soft ones.
pub fn evaluate(roster: &Roster, instance: &Instance, soften_hard: bool) -> Evaluation {
    let c = instance.compiled();
    let mut penalties = PenaltyVector::new();
    let mut hard = false;
    let terms: Vec<PenaltyTerm> = violations(roster, instance)
        .into_iter()
        .map(|v| {
            let priority = c
                .priority(v.kind, v.reason.family())
                .expect("validated instance declares every emitted family");
            let weight = v.weight();
            penalties.add(priority, weight);
            hard |= v.kind == Kind::Hard;
            PenaltyTerm { violation: v, weight, priority }
        })
        .collect();
    Evaluation {
        terms,
        penalties,
        feasible: !hard || soften_hard,
    }
}

/// Distinct effective priority levels of the instance, most important first.
pub fn levels(instance: &Instance) -> &[i64] {
    &instance.compiled().levels
}

/// Per-slot accumulator used on the search hot path. Slot 0 holds the total
/// hard weight; slot `1 + i` holds the weight at `levels[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Cost(pub Vec<u64>);

impl Cost {
    pub fn zero(levels: usize) -> Self {
        Cost(vec![0; levels + 1])
    }

    pub fn add(&mut self, other: &Cost) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn sub(&mut self, other: &Cost) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a -= b;
        }
    }

    pub fn clear(&mut self) {
        self.0.iter_mut().for_each(|x| *x = 0);
    }

    pub fn hard(&self) -> u64 {
        self.0[0]
    }

    pub fn slots(&self) -> &[u64] {
        &self.0[1..]
    }
}

pub(crate) struct CostSink<'a> {
    pub c: &'a crate::model::Compiled,
    pub cost: &'a mut Cost,
}

impl Sink for CostSink<'_> {
    #[inline]
    fn emit(&mut self, kind: Kind, bound: Option<(i64, i64)>, reason: Reason) {
        let w = weight_of(bound.map(|(limit, value)| Bound { limit, value }));
        let slot = self
            .c
            .slot(kind, reason.family())
            .expect("validated instance declares every emitted family");
        self.cost.0[slot + 1] += w;
        if kind == Kind::Hard {
            self.cost.0[0] += w;
        }
    }
}
