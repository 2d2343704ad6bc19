//! Cached evaluation that re-scores only the rows, columns and balance rules
//! touched by a change.

use std::sync::Arc;

use crate::model::{Instance, Kind, Roster, ShiftIx};

use super::eval;
use super::{Cost, CostSink, Evaluation, PenaltyTerm, PenaltyVector, Violation};

/// Incremental evaluator bound to one roster.
///
/// Hot-path callers use [`IncrementalEvaluator::propose`] followed by
/// [`IncrementalEvaluator::commit`] or [`IncrementalEvaluator::rollback`].
/// [`IncrementalEvaluator::evaluate_delta`] serves callers that mutate their
/// own roster copy and only report which cells changed.
#[derive(Clone)]
pub struct IncrementalEvaluator {
    inst: Arc<Instance>,
    roster: Roster,
    soften: bool,
    nurse_cost: Vec<Cost>,
    day_cost: Vec<Cost>,
    metrics: Vec<Vec<i64>>,
    balance_cost: Vec<Cost>,
    total: Cost,
    nurse_viol: Vec<Option<Vec<Violation>>>,
    day_viol: Vec<Option<Vec<Violation>>>,
    balance_viol: Vec<Option<Vec<Violation>>>,
    pending: Option<Pending>,
}

#[derive(Clone, Default)]
struct Pending {
    undo: Vec<(usize, i32, ShiftIx)>,
    nurses: Vec<(usize, Cost)>,
    days: Vec<(usize, Cost)>,
    metrics: Vec<(usize, usize, i64)>,
    rules: Vec<(usize, Cost)>,
    total: Option<Cost>,
}

impl IncrementalEvaluator {
    pub fn new(instance: Arc<Instance>, roster: Roster, soften_hard: bool) -> Self {
        let inst = instance.clone();
        let c = inst.compiled();
        let n_levels = c.levels.len();
        let mut ev = IncrementalEvaluator {
            inst: instance,
            roster,
            soften: soften_hard,
            nurse_cost: vec![Cost::zero(n_levels); c.nurse_count],
            day_cost: vec![Cost::zero(n_levels); c.len],
            metrics: c.balance.iter().map(|r| vec![0; r.members.len()]).collect(),
            balance_cost: vec![Cost::zero(n_levels); c.balance.len()],
            total: Cost::zero(n_levels),
            nurse_viol: vec![None; c.nurse_count],
            day_viol: vec![None; c.len],
            balance_viol: vec![None; c.balance.len()],
            pending: None,
        };
        ev.rebuild();
        ev
    }

    /// Recomputes every cache from the current roster.
    pub fn rebuild(&mut self) {
        let inst = self.inst.clone();
        let c = inst.compiled();
        self.pending = None;
        self.total.clear();
        for n in 0..c.nurse_count {
            let mut cost = Cost::zero(c.levels.len());
            eval::nurse_terms(c, n, self.roster.row(n), &mut CostSink { c, cost: &mut cost });
            self.total.add(&cost);
            self.nurse_cost[n] = cost;
            self.nurse_viol[n] = None;
        }
        for o in 0..c.len {
            let day = c.first_day + o as i32;
            let mut cost = Cost::zero(c.levels.len());
            eval::day_terms(c, self.roster.cells(), day, &mut CostSink { c, cost: &mut cost });
            self.total.add(&cost);
            self.day_cost[o] = cost;
            self.day_viol[o] = None;
        }
        for (i, rule) in c.balance.iter().enumerate() {
            for (pos, &n) in rule.members.iter().enumerate() {
                self.metrics[i][pos] = eval::balance_metric(c, rule, self.roster.row(n));
            }
            let mut cost = Cost::zero(c.levels.len());
            eval::balance_term(i, rule, &self.metrics[i], &mut CostSink { c, cost: &mut cost });
            self.total.add(&cost);
            self.balance_cost[i] = cost;
            self.balance_viol[i] = None;
        }
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.inst
    }

    pub fn soften_hard(&self) -> bool {
        self.soften
    }

    pub fn set_soften_hard(&mut self, soften: bool) {
        self.soften = soften;
    }

    pub(crate) fn cost(&self) -> &Cost {
        &self.total
    }

    /// Total hard weight of the current roster.
    pub fn hard_weight(&self) -> u64 {
        self.total.hard()
    }

    /// Per-level sums aligned with the instance's levels, most important
    /// first.
    pub fn slots(&self) -> &[u64] {
        self.total.slots()
    }

    pub fn penalties(&self) -> PenaltyVector {
        PenaltyVector::from_slots(&self.inst.compiled().levels, self.total.slots())
    }

    /// Applies `changes` tentatively and returns the resulting cost. One
    /// proposal may be pending at a time.
    pub(crate) fn propose(&mut self, changes: &[(usize, i32, ShiftIx)]) -> &Cost {
        assert!(self.pending.is_none(), "propose called with a pending proposal");
        let inst = self.inst.clone();
        let c = inst.compiled();
        let mut p = Pending::default();
        for &(n, day, s) in changes {
            let old = self.roster.get(n, day);
            p.undo.push((n, day, old));
            self.roster.set(n, day, s);
            if !p.nurses.iter().any(|(m, _)| *m == n) {
                p.nurses.push((n, Cost::zero(c.levels.len())));
            }
            let o = c.offset(day);
            if !p.days.iter().any(|(d, _)| *d == o) {
                p.days.push((o, Cost::zero(c.levels.len())));
            }
        }
        let mut total = self.total.clone();
        for (n, cost) in &mut p.nurses {
            eval::nurse_terms(c, *n, self.roster.row(*n), &mut CostSink { c, cost });
            total.add(cost);
            total.sub(&self.nurse_cost[*n]);
        }
        for (o, cost) in &mut p.days {
            let day = c.first_day + *o as i32;
            eval::day_terms(c, self.roster.cells(), day, &mut CostSink { c, cost });
            total.add(cost);
            total.sub(&self.day_cost[*o]);
        }
        for &(n, _) in &p.nurses {
            for &(rule, pos) in &c.nurse_balance[n] {
                let m = eval::balance_metric(c, &c.balance[rule], self.roster.row(n));
                if m != self.metrics[rule][pos] {
                    p.metrics.push((rule, pos, m));
                    if !p.rules.iter().any(|(r, _)| *r == rule) {
                        p.rules.push((rule, Cost::zero(c.levels.len())));
                    }
                }
            }
        }
        for (rule, cost) in &mut p.rules {
            let mut metrics = self.metrics[*rule].clone();
            for &(r, pos, m) in &p.metrics {
                if r == *rule {
                    metrics[pos] = m;
                }
            }
            eval::balance_term(*rule, &c.balance[*rule], &metrics, &mut CostSink { c, cost });
            total.add(cost);
            total.sub(&self.balance_cost[*rule]);
        }
        p.total = Some(total);
        self.pending = Some(p);
        self.pending.as_ref().unwrap().total.as_ref().unwrap()
    }

    pub(crate) fn commit(&mut self) {
        let Some(p) = self.pending.take() else { return };
        for (n, cost) in p.nurses {
            self.nurse_cost[n] = cost;
            self.nurse_viol[n] = None;
        }
        for (o, cost) in p.days {
            self.day_cost[o] = cost;
            self.day_viol[o] = None;
        }
        for (rule, pos, m) in p.metrics {
            self.metrics[rule][pos] = m;
        }
        for (rule, cost) in p.rules {
            self.balance_cost[rule] = cost;
            self.balance_viol[rule] = None;
        }
        self.total = p.total.expect("proposal carries a total");
    }

    pub(crate) fn rollback(&mut self) {
        let Some(p) = self.pending.take() else { return };
        for &(n, day, s) in p.undo.iter().rev() {
            self.roster.set(n, day, s);
        }
    }

    /// Applies and commits `changes` in one step.
    pub fn apply(&mut self, changes: &[(usize, i32, ShiftIx)]) {
        self.propose(changes);
        self.commit();
    }

    /// Replaces the whole roster and rebuilds every cache.
    pub fn reset(&mut self, roster: Roster) {
        self.roster = roster;
        self.rebuild();
    }

    /// Brings the cache in line with `roster`, given the cells that changed
    /// since the last call, and returns the full evaluation. Any other
    /// difference between the cached and given roster forces a rebuild.
    pub fn evaluate_delta(&mut self, roster: &Roster, changed: &[(usize, i32)]) -> Evaluation {
        self.rollback();
        let inst = self.inst.clone();
        let c = inst.compiled();
        let same_shape = roster.nurse_count() == c.nurse_count
            && roster.first_day() == c.first_day
            && roster.end_day() == c.end_day;
        let stale = !same_shape
            || changed
                .iter()
                .any(|&(n, d)| n >= c.nurse_count || d < c.first_day || d >= c.end_day)
            || roster
                .cells()
                .iter()
                .zip(self.roster.cells())
                .enumerate()
                .any(|(i, (a, b))| {
                    a != b && {
                        let (n, o) = (i / c.len, i % c.len);
                        !changed.contains(&(n, c.first_day + o as i32))
                    }
                });
        if stale {
            self.reset(roster.clone());
        } else {
            let changes: Vec<(usize, i32, ShiftIx)> = changed
                .iter()
                .filter(|&&(n, d)| roster.get(n, d) != self.roster.get(n, d))
                .map(|&(n, d)| (n, d, roster.get(n, d)))
                .collect();
            if !changes.is_empty() {
                self.apply(&changes);
            }
        }
        self.evaluation()
    }

    /// Full evaluation of the current roster, assembled from cached per-part
    /// violation lists in the same order as [`super::evaluate`].
    pub fn evaluation(&mut self) -> Evaluation {
        let inst = self.inst.clone();
        let c = inst.compiled();
        let mut violations: Vec<Violation> = Vec::new();
        for n in 0..c.nurse_count {
            let roster = &self.roster;
            let v = self.nurse_viol[n].get_or_insert_with(|| {
                let mut out = Vec::new();
                eval::nurse_terms(c, n, roster.row(n), &mut out);
                out
            });
            violations.extend_from_slice(v);
        }
        for o in 0..c.len {
            let roster = &self.roster;
            let v = self.day_viol[o].get_or_insert_with(|| {
                let mut out = Vec::new();
                eval::day_terms(c, roster.cells(), c.first_day + o as i32, &mut out);
                out
            });
            violations.extend_from_slice(v);
        }
        for (i, rule) in c.balance.iter().enumerate() {
            let metrics = &self.metrics[i];
            let v = self.balance_viol[i].get_or_insert_with(|| {
                let mut out = Vec::new();
                eval::balance_term(i, rule, metrics, &mut out);
                out
            });
            violations.extend_from_slice(v);
        }
        let mut penalties = PenaltyVector::new();
        let mut hard = false;
        let terms = violations
            .into_iter()
            .map(|v| {
                let priority = c.priority(v.kind, v.reason.family()).expect("declared family");
                let weight = v.weight();
                penalties.add(priority, weight);
                hard |= v.kind == Kind::Hard;
                PenaltyTerm { violation: v, weight, priority }
            })
            .collect();
        Evaluation {
            terms,
            penalties,
            feasible: !hard || self.soften,
        }
    }
}
