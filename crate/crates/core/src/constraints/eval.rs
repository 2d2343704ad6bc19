//! Evaluators over compiled rule tables. Each one writes into a [`Sink`] so
//! the same code serves reporting and the penalty-only hot path.

use crate::model::compile::{BalanceCheck, Compiled, MetricCheck, PatternCheck};
use crate::model::{Kind, PairRelation, ShiftIx, Side, SuccessionMode};

use super::Reason;

pub(crate) trait Sink {
    fn emit(&mut self, kind: Kind, bound: Option<(i64, i64)>, reason: Reason);
}

impl Sink for Vec<super::Violation> {
    fn emit(&mut self, kind: Kind, bound: Option<(i64, i64)>, reason: Reason) {
        self.push(super::Violation::new(kind, reason, bound));
    }
}

#[inline]
fn at(c: &Compiled, row: &[ShiftIx], day: i32) -> ShiftIx {
    row[(day - c.first_day) as usize]
}

fn bounds_check<S: Sink>(
    out: &mut S,
    kind: Kind,
    value: i64,
    lb: i64,
    ub: i64,
    reason: impl Fn(Side) -> Reason,
) {
    if value < lb {
        out.emit(kind, Some((lb, value)), reason(Side::Lower));
    }
    if value > ub {
        out.emit(kind, Some((ub, value)), reason(Side::Upper));
    }
}

fn count_current(c: &Compiled, row: &[ShiftIx], pred: impl Fn(ShiftIx) -> bool) -> i64 {
    (0..c.horizon).filter(|&d| pred(at(c, row, d))).count() as i64
}

pub(crate) fn work_days<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    if let Some((lb, ub)) = c.work_bounds[nurse] {
        let x = count_current(c, row, |s| c.is_work(s));
        bounds_check(out, Kind::Hard, x, lb as i64, ub as i64, |side| Reason::WorkDays { side, nurse });
    }
}

pub(crate) fn weekly_rest<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    if let Some((lb, ub)) = c.rest_bounds[nurse] {
        let x = match c.wr {
            Some(wr) => count_current(c, row, |s| s == wr),
            None => 0,
        };
        bounds_check(out, Kind::Hard, x, lb as i64, ub as i64, |side| Reason::WeeklyRest { side, nurse });
    }
}

pub(crate) fn requests<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    for day in 0..c.end_day {
        let i = c.cell(nurse, day);
        let bit = 1u64 << at(c, row, day);
        if c.pos[i] != 0 && c.pos[i] & bit == 0 {
            out.emit(Kind::Hard, None, Reason::PosRequest { nurse, day });
        }
        if c.neg[i] & bit != 0 {
            out.emit(Kind::Hard, None, Reason::NegRequest { nurse, day });
        }
    }
}

pub(crate) fn ld_se_balance<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    if !c.switches.ld_se_balance {
        return;
    }
    let (Some(ld), Some(se)) = (c.ld, c.se) else { return };
    if count_current(c, row, |s| s == ld) != count_current(c, row, |s| s == se) {
        out.emit(Kind::Hard, None, Reason::EqShifts { nurse });
    }
}

pub(crate) fn consecutive_work<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    if c.consecutive[nurse].is_empty() {
        return;
    }
    // run[i]: length of the work-day run ending at window offset i.
    let mut run = vec![0u32; row.len()];
    let mut len = 0;
    for (i, &s) in row.iter().enumerate() {
        len = if c.is_workday(s) { len + 1 } else { 0 };
        run[i] = len;
    }
    for &(kind, ub) in &c.consecutive[nurse] {
        let ub_i = ub as i32;
        // `next` is the day right after a full window of `ub` work days.
        let lo = (c.base_lo + ub_i).max(0);
        let hi = (c.end_day - 1).min(c.base_hi);
        for next in lo..=hi {
            if run[(next - c.first_day) as usize] > ub {
                out.emit(
                    kind,
                    Some((ub as i64, ub as i64 + 1)),
                    Reason::ConsecutiveWork { nurse, begin_day: next - ub_i },
                );
            }
        }
    }
}

pub(crate) fn shift_frequency<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    for f in &c.freq[nurse] {
        let mask = c.sg_mask[f.sg];
        let x = count_current(c, row, |s| mask >> s & 1 == 1);
        let breach = match f.side {
            Side::Lower => x < f.limit,
            Side::Upper => x > f.limit,
        };
        if breach {
            out.emit(
                f.kind,
                Some((f.limit, x)),
                Reason::ShiftFreq { side: f.side, nurse, shift_group: f.sg },
            );
        }
    }
}

pub(crate) fn pattern_count(c: &Compiled, p: &PatternCheck, row: &[ShiftIx]) -> i64 {
    let k = p.masks.len() as i32;
    let first = c.base_lo.max(1 - k);
    let last = c.base_hi - k;
    let mut n = 0;
    for start in first..=last {
        if p.masks
            .iter()
            .enumerate()
            .all(|(j, m)| m >> at(c, row, start + j as i32) & 1 == 1)
        {
            n += 1;
        }
    }
    n
}

pub(crate) fn patterns<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    for &rule in &c.nurse_patterns[nurse] {
        let p = &c.patterns[rule];
        let x = pattern_count(c, p, row);
        if let Some(min) = p.min {
            if x < min as i64 {
                out.emit(p.kind, Some((min as i64, x)), Reason::Pattern { side: Side::Lower, nurse, rule });
            }
        }
        if let Some(max) = p.max {
            if x > max as i64 {
                out.emit(p.kind, Some((max as i64, x)), Reason::Pattern { side: Side::Upper, nurse, rule });
            }
        }
    }
}

pub(crate) fn inter_shift<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    if c.successions.is_empty() && c.rest_gaps.is_empty() {
        return;
    }
    for day in c.base_lo.max(-1)..c.base_hi - 1 {
        let prev = at(c, row, day);
        let next = at(c, row, day + 1);
        for (rule, r) in c.successions.iter().enumerate() {
            if r.prev >> prev & 1 == 0 {
                continue;
            }
            let hit = r.next >> next & 1 == 1;
            let breach = match r.mode {
                SuccessionMode::Required => !hit,
                SuccessionMode::Forbidden => hit,
            };
            if breach {
                out.emit(r.kind, None, Reason::Succession { nurse, day, rule });
            }
        }
        if let (Some(a), Some(b)) = (c.starts[prev as usize], c.starts[next as usize]) {
            if c.is_work(prev) && c.is_work(next) {
                let gap = 1440 + b as i64 - a as i64;
                for &(kind, min) in &c.rest_gaps {
                    if gap < min as i64 {
                        out.emit(kind, None, Reason::RestGap { nurse, day });
                    }
                }
            }
        }
    }
}

pub(crate) fn isolated_workdays<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    if !c.switches.isolated_workdays {
        return;
    }
    let lo = c.base_lo.max(0).max(c.first_day + 1);
    let hi = c.base_hi.min(c.end_day - 1);
    for day in lo..hi {
        if c.is_workday(at(c, row, day))
            && !c.is_workday(at(c, row, day - 1))
            && !c.is_workday(at(c, row, day + 1))
        {
            out.emit(Kind::Soft, None, Reason::IsolatedWorkday { nurse, day });
        }
    }
}

pub(crate) fn leave_adjacent_rest<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    if !c.switches.leave_adjacent_rest {
        return;
    }
    let restful = |day: i32| -> bool {
        if day < c.first_day || day >= c.end_day {
            return true;
        }
        let s = at(c, row, day);
        c.is_rest(s) || c.is_leave(s)
    };
    let mut day = c.first_day;
    while day < c.base_hi {
        if !c.is_leave(at(c, row, day)) {
            day += 1;
            continue;
        }
        let begin = day;
        while day < c.end_day && c.is_leave(at(c, row, day)) {
            day += 1;
        }
        if day > c.base_lo.max(0) && !restful(begin - 1) && !restful(day) {
            out.emit(Kind::Soft, None, Reason::LeaveAdjacentRest { nurse, begin_day: begin });
        }
    }
}

/// All terms that depend on one nurse's row only.
pub(crate) fn nurse_terms<S: Sink>(c: &Compiled, nurse: usize, row: &[ShiftIx], out: &mut S) {
    work_days(c, nurse, row, out);
    weekly_rest(c, nurse, row, out);
    requests(c, nurse, row, out);
    ld_se_balance(c, nurse, row, out);
    consecutive_work(c, nurse, row, out);
    shift_frequency(c, nurse, row, out);
    patterns(c, nurse, row, out);
    inter_shift(c, nurse, row, out);
    isolated_workdays(c, nurse, row, out);
    leave_adjacent_rest(c, nurse, row, out);
}

pub(crate) fn staffing<S: Sink>(c: &Compiled, cells: &[ShiftIx], day: i32, out: &mut S) {
    for r in &c.staff[c.offset(day)] {
        let mask = c.sg_mask[r.sg];
        let (mut head, mut points) = (0i64, 0i64);
        for &n in &c.group_members[r.group] {
            if mask >> cells[c.cell(n, day)] & 1 == 1 {
                head += 1;
                points += c.points[n];
            }
        }
        let breach = |limit: i64, value: i64| match r.side {
            Side::Lower => value < limit,
            Side::Upper => value > limit,
        };
        let (group, shift_group, side) = (r.group, r.sg, r.side);
        match (r.head, r.point) {
            (Some(h), Some(p)) => {
                // Satisfying either form is enough.
                if breach(h, head) && breach(p, points) {
                    out.emit(r.kind, Some((h, head)), Reason::Staff { side, group, shift_group, day });
                }
            }
            (Some(h), None) if breach(h, head) => {
                out.emit(r.kind, Some((h, head)), Reason::Staff { side, group, shift_group, day })
            }
            (None, Some(p)) if breach(p, points) => {
                out.emit(r.kind, Some((p, points)), Reason::Point { side, group, shift_group, day })
            }
            _ => {}
        }
    }
}

pub(crate) fn pairs<S: Sink>(c: &Compiled, cells: &[ShiftIx], day: i32, out: &mut S) {
    if day < 0 {
        return;
    }
    for p in &c.pairs {
        let a = cells[c.cell(p.a, day)];
        let b = cells[c.cell(p.b, day)];
        let breach = match p.relation {
            PairRelation::Prohibited => a == b && c.is_work(a),
            PairRelation::Recommended => c.is_work(a) && c.is_work(b) && a != b,
        };
        if breach {
            out.emit(p.kind, None, Reason::Pair { first: p.a, second: p.b, day });
        }
    }
}

/// All terms that depend on one day's column only.
pub(crate) fn day_terms<S: Sink>(c: &Compiled, cells: &[ShiftIx], day: i32, out: &mut S) {
    staffing(c, cells, day, out);
    pairs(c, cells, day, out);
}

pub(crate) fn balance_metric(c: &Compiled, rule: &BalanceCheck, row: &[ShiftIx]) -> i64 {
    match rule.metric {
        MetricCheck::ShiftCount(mask) => count_current(c, row, |s| mask >> s & 1 == 1),
        MetricCheck::WeekendHolidayRest => (0..c.horizon)
            .filter(|&d| {
                let o = c.offset(d);
                (c.weekend[o] || c.holiday[o]) && c.is_rest(at(c, row, d))
            })
            .count() as i64,
    }
}

pub(crate) fn balance_term<S: Sink>(rule_ix: usize, rule: &BalanceCheck, metrics: &[i64], out: &mut S) {
    let (Some(max), Some(min)) = (metrics.iter().max(), metrics.iter().min()) else { return };
    let spread = max - min;
    if spread > rule.allowed {
        out.emit(Kind::Soft, Some((rule.allowed, spread)), Reason::Balance { rule: rule_ix });
    }
}

pub(crate) fn all_terms<S: Sink>(c: &Compiled, cells: &[ShiftIx], out: &mut S) {
    for n in 0..c.nurse_count {
        nurse_terms(c, n, &cells[n * c.len..(n + 1) * c.len], out);
    }
    for day in c.first_day..c.end_day {
        day_terms(c, cells, day, out);
    }
    for (i, rule) in c.balance.iter().enumerate() {
        let metrics: Vec<i64> = rule
            .members
            .iter()
            .map(|&n| balance_metric(c, rule, &cells[n * c.len..(n + 1) * c.len]))
            .collect();
        balance_term(i, rule, &metrics, out);
    }
}
