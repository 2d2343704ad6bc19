//! Validation and index compilation of an instance document.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::document::*;
use super::ShiftIx;
use crate::constraints::Family;

/// Flank width, in days, of the window used by run and sequence rules.
pub(crate) const FLANK_DAYS: i32 = 7;

pub(crate) const MAX_SHIFTS: usize = 64;

#[derive(Debug, Clone)]
pub(crate) struct StaffCheck {
    pub kind: Kind,
    pub group: usize,
    pub sg: usize,
    pub side: Side,
    pub head: Option<i64>,
    pub point: Option<i64>,
}

#[derive(Debug, Clone)]
pub(crate) struct FreqCheck {
    pub kind: Kind,
    pub sg: usize,
    pub side: Side,
    pub limit: i64,
}

#[derive(Debug, Clone)]
pub(crate) struct PatternCheck {
    pub id: String,
    pub kind: Kind,
    pub masks: Vec<u64>,
    pub min: Option<u32>,
    pub max: Option<u32>,
}

#[derive(Debug, Clone)]
pub(crate) struct SuccessionCheck {
    pub kind: Kind,
    pub prev: u64,
    pub mode: SuccessionMode,
    pub next: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct PairCheck {
    pub kind: Kind,
    pub a: usize,
    pub b: usize,
    pub relation: PairRelation,
}

#[derive(Debug, Clone)]
pub(crate) enum MetricCheck {
    ShiftCount(u64),
    WeekendHolidayRest,
}

#[derive(Debug, Clone)]
pub(crate) struct BalanceCheck {
    pub id: String,
    pub members: Vec<usize>,
    pub metric: MetricCheck,
    pub allowed: i64,
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub nurse_index: HashMap<String, usize>,
    pub shift_index: HashMap<String, ShiftIx>,
    pub classes: Vec<ShiftClass>,
    pub starts: Vec<Option<u32>>,
    pub work_mask: u64,
    pub workday_mask: u64,
    pub rest_mask: u64,
    pub leave_mask: u64,
    pub wr: Option<ShiftIx>,
    pub ph: Option<ShiftIx>,
    pub ld: Option<ShiftIx>,
    pub se: Option<ShiftIx>,
    pub points: Vec<i64>,

    pub nurse_count: usize,
    pub first_day: i32,
    pub horizon: i32,
    pub end_day: i32,
    pub len: usize,
    pub base_lo: i32,
    pub base_hi: i32,

    pub domains: Vec<Vec<ShiftIx>>,
    pub pos: Vec<u64>,
    pub neg: Vec<u64>,
    pub manual: Vec<u64>,
    pub holiday: Vec<bool>,
    pub weekend: Vec<bool>,

    pub group_names: Vec<String>,
    pub group_members: Vec<Vec<usize>>,
    pub sg_names: Vec<String>,
    pub sg_mask: Vec<u64>,

    pub work_bounds: Vec<Option<(u32, u32)>>,
    pub rest_bounds: Vec<Option<(u32, u32)>>,
    pub consecutive: Vec<Vec<(Kind, u32)>>,
    pub staff: Vec<Vec<StaffCheck>>,
    pub freq: Vec<Vec<FreqCheck>>,
    pub patterns: Vec<PatternCheck>,
    pub nurse_patterns: Vec<Vec<usize>>,
    pub successions: Vec<SuccessionCheck>,
    pub rest_gaps: Vec<(Kind, u32)>,
    pub pairs: Vec<PairCheck>,
    pub balance: Vec<BalanceCheck>,
    pub nurse_balance: Vec<Vec<(usize, usize)>>,
    pub switches: RuleSwitches,

    /// Distinct effective priority levels, most important first.
    pub levels: Vec<i64>,
    pub slot_of: [[Option<usize>; Family::COUNT]; 2],
    pub priority_of: [[Option<i64>; Family::COUNT]; 2],
}

impl Compiled {
    #[inline]
    pub fn offset(&self, day: i32) -> usize {
        (day - self.first_day) as usize
    }

    #[inline]
    pub fn cell(&self, nurse: usize, day: i32) -> usize {
        nurse * self.len + self.offset(day)
    }

    #[inline]
    pub fn is_work(&self, s: ShiftIx) -> bool {
        self.work_mask >> s & 1 == 1
    }

    #[inline]
    pub fn is_workday(&self, s: ShiftIx) -> bool {
        self.workday_mask >> s & 1 == 1
    }

    #[inline]
    pub fn is_rest(&self, s: ShiftIx) -> bool {
        self.rest_mask >> s & 1 == 1
    }

    #[inline]
    pub fn is_leave(&self, s: ShiftIx) -> bool {
        self.leave_mask >> s & 1 == 1
    }

    #[inline]
    pub fn slot(&self, kind: Kind, fam: Family) -> Option<usize> {
        self.slot_of[kind as usize][fam as usize]
    }

    #[inline]
    pub fn priority(&self, kind: Kind, fam: Family) -> Option<i64> {
        self.priority_of[kind as usize][fam as usize]
    }
}

struct Ctx<'a> {
    doc: &'a InstanceDocument,
    errors: Vec<String>,
    nurse_index: HashMap<String, usize>,
    shift_index: HashMap<String, ShiftIx>,
    group_index: HashMap<String, usize>,
    sg_index: HashMap<String, usize>,
}

impl Ctx<'_> {
    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn nurse(&mut self, id: &str, at: &str) -> Option<usize> {
        let r = self.nurse_index.get(id).copied();
        if r.is_none() {
            self.err(format!("{at}: undeclared nurse `{id}`"));
        }
        r
    }

    fn shift(&mut self, code: &str, at: &str) -> Option<ShiftIx> {
        let r = self.shift_index.get(code).copied();
        if r.is_none() {
            self.err(format!("{at}: undeclared shift `{code}`"));
        }
        r
    }

    fn group(&mut self, id: &str, at: &str) -> Option<usize> {
        let r = self.group_index.get(id).copied();
        if r.is_none() {
            self.err(format!("{at}: undeclared nurse_group `{id}`"));
        }
        r
    }

    fn sg(&mut self, id: &str, at: &str) -> Option<usize> {
        let r = self.sg_index.get(id).copied();
        if r.is_none() {
            self.err(format!("{at}: undeclared shift_group `{id}`"));
        }
        r
    }

    fn day_in_window(&mut self, day: i32, at: &str) -> bool {
        let ok = self.doc.calendar.contains(day);
        if !ok {
            self.err(format!("{at}: day {day} outside calendar window"));
        }
        ok
    }

    fn decision_day(&mut self, day: i32, at: &str) -> bool {
        let ok = self.doc.calendar.is_decision(day);
        if !ok {
            self.err(format!("{at}: day {day} is not a current or lookahead day"));
        }
        ok
    }
}

pub(crate) fn compile(doc: &InstanceDocument) -> Result<Compiled, Vec<String>> {
    let mut cx = Ctx {
        doc,
        errors: Vec::new(),
        nurse_index: HashMap::new(),
        shift_index: HashMap::new(),
        group_index: HashMap::new(),
        sg_index: HashMap::new(),
    };
    if doc.format_version != FORMAT_VERSION {
        cx.err(format!(
            "format_version: expected {FORMAT_VERSION}, found {}",
            doc.format_version
        ));
    }
    let cal = &doc.calendar;

    for (i, n) in doc.nurses.iter().enumerate() {
        if cx.nurse_index.insert(n.id.clone(), i).is_some() {
            cx.err(format!("nurses: duplicate id `{}`", n.id));
        }
    }
    if doc.shifts.len() > MAX_SHIFTS {
        cx.err(format!("shifts: at most {MAX_SHIFTS} shifts supported"));
        return Err(cx.errors);
    }
    for (i, s) in doc.shifts.iter().enumerate() {
        if cx.shift_index.insert(s.code.clone(), i as ShiftIx).is_some() {
            cx.err(format!("shifts: duplicate code `{}`", s.code));
        }
        match s.class {
            ShiftClass::Work if s.start_minute.is_none() || s.end_minute.is_none() => {
                cx.err(format!("shifts: work shift `{}` needs start and end times", s.code))
            }
            ShiftClass::Rest if s.start_minute.is_some() || s.end_minute.is_some() => {
                cx.err(format!("shifts: rest shift `{}` must not carry times", s.code))
            }
            _ => {}
        }
    }
    let classes: Vec<ShiftClass> = doc.shifts.iter().map(|s| s.class).collect();
    let mask_of = |pred: &dyn Fn(ShiftClass) -> bool| -> u64 {
        classes
            .iter()
            .enumerate()
            .filter(|(_, c)| pred(**c))
            .fold(0u64, |m, (i, _)| m | 1 << i)
    };
    let work_mask = mask_of(&|c| c == ShiftClass::Work);
    let workday_mask = mask_of(&|c| matches!(c, ShiftClass::Work | ShiftClass::Duty));
    let rest_mask = mask_of(&|c| c == ShiftClass::Rest);
    let leave_mask = mask_of(&|c| c == ShiftClass::Leave);
    let class_of = |code: &str, cx: &Ctx| cx.shift_index.get(code).map(|&i| classes[i as usize]);
    let wr = cx.shift_index.get("WR").copied();
    let ph = cx.shift_index.get("PH").copied();
    for (code, v) in [("WR", wr), ("PH", ph)] {
        if v.is_some() && class_of(code, &cx) != Some(ShiftClass::Rest) {
            cx.err(format!("shifts: `{code}` must be rest class"));
        }
    }

    let mut group_names = Vec::new();
    let mut group_members = Vec::new();
    for (g, members) in &doc.nurse_groups {
        cx.group_index.insert(g.clone(), group_names.len());
        group_names.push(g.clone());
        let mut v = Vec::new();
        for m in members {
            if let Some(n) = cx.nurse(m, &format!("nurse_groups.{g}")) {
                v.push(n);
            }
        }
        v.sort_unstable();
        group_members.push(v);
    }
    let mut sg_names = Vec::new();
    let mut sg_mask = Vec::new();
    for (g, members) in &doc.shift_groups {
        cx.sg_index.insert(g.clone(), sg_names.len());
        sg_names.push(g.clone());
        let mut m = 0u64;
        for s in members {
            if let Some(i) = cx.shift(s, &format!("shift_groups.{g}")) {
                m |= 1 << i;
            }
        }
        sg_mask.push(m);
    }

    // Calendar.
    let first_day = cal.first_day();
    let end_day = cal.end_day();
    let horizon = cal.horizon_days as i32;
    let len = cal.window_len();
    for &d in cal.holidays.iter().chain(cal.weekends.iter()) {
        cx.day_in_window(d, "calendar");
    }
    let holiday: Vec<bool> = (first_day..end_day).map(|d| cal.holidays.contains(&d)).collect();
    let weekend: Vec<bool> = (first_day..end_day).map(|d| cal.weekends.contains(&d)).collect();
    let n_nurses = doc.nurses.len();
    let cell = |n: usize, d: i32| n * len + (d - first_day) as usize;

    let needs_wr = (first_day.min(0)..end_day).any(|d| !cal.holidays.contains(&d)) && n_nurses > 0;
    if needs_wr && wr.is_none() {
        cx.err("shifts: weekly rest shift `WR` is required".into());
    }
    if !cal.holidays.is_empty() && n_nurses > 0 && ph.is_none() {
        cx.err("shifts: public holiday shift `PH` is required when holidays are declared".into());
    }

    // Requests.
    let mut pos = vec![0u64; n_nurses * len];
    let mut neg = vec![0u64; n_nurses * len];
    let mut manual = vec![0u64; n_nurses * len];
    for (list, target, name) in [
        (&doc.pos_requests, &mut pos, "pos_requests"),
        (&doc.neg_requests, &mut neg, "neg_requests"),
    ] {
        for r in list {
            let n = cx.nurse(&r.nurse, name);
            let s = cx.shift(&r.shift, name);
            let ok = cx.decision_day(r.day, name);
            if let (Some(n), Some(s), true) = (n, s, ok) {
                target[cell(n, r.day)] |= 1 << s;
            }
        }
    }
    for r in &doc.manual_requests {
        let n = cx.nurse(&r.nurse, "manual_requests");
        let s = cx.shift(&r.shift, "manual_requests");
        let ok = cx.decision_day(r.day, "manual_requests");
        if let (Some(n), Some(s), true) = (n, s, ok) {
            if !matches!(classes[s as usize], ShiftClass::Duty | ShiftClass::Leave) {
                cx.err(format!(
                    "manual_requests: `{}` is not a duty or leave shift",
                    r.shift
                ));
            } else {
                manual[cell(n, r.day)] |= 1 << s;
            }
        }
    }
    let mut past: HashMap<(usize, i32), ShiftIx> = HashMap::new();
    for p in &doc.past_assignments {
        let n = cx.nurse(&p.nurse, "past_assignments");
        let s = cx.shift(&p.shift, "past_assignments");
        if p.day >= 0 || p.day < first_day {
            cx.err(format!("past_assignments: day {} is not a history day", p.day));
            continue;
        }
        if let (Some(n), Some(s)) = (n, s) {
            if past.insert((n, p.day), s).is_some() {
                cx.err(format!(
                    "past_assignments: duplicate cell ({}, {})",
                    p.nurse, p.day
                ));
            }
        }
    }

    // Domains.
    let work_shifts: Vec<ShiftIx> = (0..classes.len() as ShiftIx)
        .filter(|&s| work_mask >> s & 1 == 1)
        .collect();
    let mut domains = Vec::with_capacity(n_nurses * len);
    for n in 0..n_nurses {
        for d in first_day..end_day {
            let rest = if cal.holidays.contains(&d) { ph } else { wr };
            let dom: Vec<ShiftIx> = if d < 0 {
                past.get(&(n, d)).copied().or(rest).into_iter().collect()
            } else {
                let m = manual[cell(n, d)];
                if m != 0 {
                    (0..64).filter(|b| m >> b & 1 == 1).map(|b| b as ShiftIx).collect()
                } else {
                    work_shifts.iter().copied().chain(rest).collect()
                }
            };
            domains.push(dom);
        }
    }

    // Bound tables.
    let mut work_bounds = vec![None; n_nurses];
    let mut rest_bounds = vec![None; n_nurses];
    for (list, target, name) in [
        (&doc.bounds.work_days, &mut work_bounds, "bounds.work_days"),
        (&doc.bounds.weekly_rest, &mut rest_bounds, "bounds.weekly_rest"),
    ] {
        for b in list {
            if b.lb > b.ub {
                cx.err(format!("{name}: LB {} > UB {} for `{}`", b.lb, b.ub, b.nurse));
            }
            if let Some(n) = cx.nurse(&b.nurse, name) {
                if target[n].replace((b.lb, b.ub)).is_some() {
                    cx.err(format!("{name}: duplicate entry for `{}`", b.nurse));
                }
            }
        }
    }
    let mut consecutive = vec![Vec::new(); n_nurses];
    for r in &doc.bounds.consecutive_work {
        if let Some(g) = cx.group(&r.group, "bounds.consecutive_work") {
            if r.ub == 0 {
                cx.err("bounds.consecutive_work: UB must be positive".into());
                continue;
            }
            for &n in &group_members[g] {
                consecutive[n].push((r.kind, r.ub));
            }
        }
    }

    let mut staff_map: BTreeMap<(i32, Kind, usize, usize, Side), (Vec<i64>, Vec<i64>)> = BTreeMap::new();
    for (list, is_point, name) in [
        (&doc.bounds.staff, false, "bounds.staff"),
        (&doc.bounds.point, true, "bounds.point"),
    ] {
        for b in list {
            let g = cx.group(&b.group, name);
            let s = cx.sg(&b.shift_group, name);
            let ok = cx.day_in_window(b.day, name);
            if b.limit < 0 {
                cx.err(format!("{name}: negative limit"));
            }
            if let (Some(g), Some(s), true) = (g, s, ok) {
                let e = staff_map.entry((b.day, b.kind, g, s, b.side)).or_default();
                if is_point {
                    e.1.push(b.limit);
                } else {
                    e.0.push(b.limit);
                }
            }
        }
    }
    check_staff_ranges(&mut cx, &doc.bounds.staff, "bounds.staff");
    check_staff_ranges(&mut cx, &doc.bounds.point, "bounds.point");
    let mut staff = vec![Vec::new(); len];
    for ((day, kind, group, sg, side), (heads, points)) in staff_map {
        let k = heads.len().max(points.len());
        for i in 0..k {
            staff[(day - first_day) as usize].push(StaffCheck {
                kind,
                group,
                sg,
                side,
                head: heads.get(i).copied(),
                point: points.get(i).copied(),
            });
        }
    }

    let mut freq = vec![Vec::new(); n_nurses];
    let mut freq_ranges: BTreeMap<(Kind, usize, usize), (Option<u32>, Option<u32>)> = BTreeMap::new();
    for b in &doc.bounds.shift_freq {
        let n = cx.nurse(&b.nurse, "bounds.shift_freq");
        let s = cx.sg(&b.shift_group, "bounds.shift_freq");
        if let (Some(n), Some(s)) = (n, s) {
            freq[n].push(FreqCheck {
                kind: b.kind,
                sg: s,
                side: b.side,
                limit: b.limit as i64,
            });
            let e = freq_ranges.entry((b.kind, n, s)).or_default();
            match b.side {
                Side::Lower => e.0 = Some(b.limit),
                Side::Upper => e.1 = Some(b.limit),
            }
        }
    }
    for ((_, n, s), (lo, hi)) in freq_ranges {
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if lo > hi {
                cx.err(format!(
                    "bounds.shift_freq: LB {lo} > UB {hi} for ({}, {})",
                    doc.nurses[n].id, sg_names[s]
                ));
            }
        }
    }

    let mut patterns = Vec::new();
    let mut nurse_patterns = vec![Vec::new(); n_nurses];
    for r in &doc.pattern_rules {
        let at = format!("pattern_rules.{}", r.id);
        if r.slots.is_empty() {
            cx.err(format!("{at}: empty slot sequence"));
            continue;
        }
        if r.min.is_none() && r.max.is_none() {
            cx.err(format!("{at}: needs min or max"));
        }
        if let (Some(lo), Some(hi)) = (r.min, r.max) {
            if lo > hi {
                cx.err(format!("{at}: min {lo} > max {hi}"));
            }
        }
        let g = cx.group(&r.group, &at);
        let masks: Vec<Option<u64>> = r.slots.iter().map(|s| cx.sg(s, &at).map(|i| sg_mask[i])).collect();
        if let (Some(g), true) = (g, masks.iter().all(Option::is_some)) {
            let idx = patterns.len();
            patterns.push(PatternCheck {
                id: r.id.clone(),
                kind: r.kind,
                masks: masks.into_iter().flatten().collect(),
                min: r.min,
                max: r.max,
            });
            for &n in &group_members[g] {
                nurse_patterns[n].push(idx);
            }
        }
    }
    let ids: BTreeSet<&str> = doc.pattern_rules.iter().map(|r| r.id.as_str()).collect();
    if ids.len() != doc.pattern_rules.len() {
        cx.err("pattern_rules: duplicate id".into());
    }

    let mut successions = Vec::new();
    let mut rest_gaps = Vec::new();
    for r in &doc.inter_shift_rules {
        match r {
            InterShiftRule::Succession { kind, prev, mode, next } => {
                let p = cx.sg(prev, "inter_shift_rules");
                let q = cx.sg(next, "inter_shift_rules");
                if let (Some(p), Some(q)) = (p, q) {
                    successions.push(SuccessionCheck {
                        kind: *kind,
                        prev: sg_mask[p],
                        mode: *mode,
                        next: sg_mask[q],
                    });
                }
            }
            InterShiftRule::RestGap { kind, min_gap_hours } => rest_gaps.push((*kind, *min_gap_hours * 60)),
        }
    }

    let mut pairs = Vec::new();
    for r in &doc.pair_rules {
        let a = cx.nurse(&r.first, "pair_rules");
        let b = cx.nurse(&r.second, "pair_rules");
        if let (Some(a), Some(b)) = (a, b) {
            if a == b {
                cx.err(format!("pair_rules: nurse `{}` paired with itself", r.first));
                continue;
            }
            pairs.push(PairCheck {
                kind: r.kind,
                a,
                b,
                relation: r.relation,
            });
        }
    }

    let mut balance = Vec::new();
    let mut nurse_balance = vec![Vec::new(); n_nurses];
    let bids: BTreeSet<&str> = doc.balance_rules.iter().map(|r| r.id.as_str()).collect();
    if bids.len() != doc.balance_rules.len() {
        cx.err("balance_rules: duplicate id".into());
    }
    for r in &doc.balance_rules {
        let at = format!("balance_rules.{}", r.id);
        let g = cx.group(&r.group, &at);
        let metric = match &r.metric {
            BalanceMetric::ShiftCount { shift_group } => cx.sg(shift_group, &at).map(|s| MetricCheck::ShiftCount(sg_mask[s])),
            BalanceMetric::WeekendHolidayRest => Some(MetricCheck::WeekendHolidayRest),
        };
        if let (Some(g), Some(metric)) = (g, metric) {
            let idx = balance.len();
            for (pos, &n) in group_members[g].iter().enumerate() {
                nurse_balance[n].push((idx, pos));
            }
            balance.push(BalanceCheck {
                id: r.id.clone(),
                members: group_members[g].clone(),
                metric,
                allowed: r.allowed_spread as i64,
            });
        }
    }

    let switches = doc.rule_switches;
    let ld = cx.shift_index.get("LD").copied();
    let se = cx.shift_index.get("SE").copied();
    if switches.ld_se_balance && (ld.is_none() || se.is_none()) {
        cx.err("rule_switches.ld_se_balance: shifts `LD` and `SE` must be declared".into());
    }

    // Priorities.
    let mut declared: BTreeMap<(Kind, Family), i64> = BTreeMap::new();
    for p in &doc.priorities {
        match Family::from_name(&p.family) {
            Some(f) => {
                if declared.insert((p.kind, f), p.priority).is_some() {
                    cx.err(format!("priorities: duplicate entry ({}, {})", p.kind.as_str(), p.family));
                }
            }
            None => cx.err(format!("priorities: unknown reason family `{}`", p.family)),
        }
    }
    for (kind, fam) in required_families(doc) {
        if !declared.contains_key(&(kind, fam)) {
            cx.err(format!("priorities: missing entry for ({}, {})", kind.as_str(), fam.as_str()));
        }
    }
    let max_soft = declared.iter().filter(|((k, _), _)| *k == Kind::Soft).map(|(_, &p)| p).max();
    let min_hard = declared.iter().filter(|((k, _), _)| *k == Kind::Hard).map(|(_, &p)| p).min();
    // Hard families sit strictly above every soft family, order preserved.
    let hard_offset = match (max_soft, min_hard) {
        (Some(s), Some(h)) => (s - h + 1).max(0),
        _ => 0,
    };
    let mut priority_of = [[None; Family::COUNT]; 2];
    for (&(k, f), &p) in &declared {
        priority_of[k as usize][f as usize] = Some(if k == Kind::Hard { p + hard_offset } else { p });
    }
    let mut levels: Vec<i64> = priority_of.iter().flatten().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    levels.reverse();
    let mut slot_of = [[None; Family::COUNT]; 2];
    for k in 0..2 {
        for f in 0..Family::COUNT {
            slot_of[k][f] = priority_of[k][f].map(|p| levels.iter().position(|&l| l == p).unwrap());
        }
    }

    if !cx.errors.is_empty() {
        return Err(cx.errors);
    }
    Ok(Compiled {
        nurse_index: cx.nurse_index,
        shift_index: cx.shift_index,
        starts: doc.shifts.iter().map(|s| s.start_minute).collect(),
        classes,
        work_mask,
        workday_mask,
        rest_mask,
        leave_mask,
        wr,
        ph,
        ld,
        se,
        points: doc.nurses.iter().map(|n| n.point).collect(),
        nurse_count: n_nurses,
        first_day,
        horizon,
        end_day,
        len,
        base_lo: first_day.max(-FLANK_DAYS),
        base_hi: end_day.min(horizon + FLANK_DAYS),
        domains,
        pos,
        neg,
        manual,
        holiday,
        weekend,
        group_names,
        group_members,
        sg_names,
        sg_mask,
        work_bounds,
        rest_bounds,
        consecutive,
        staff,
        freq,
        patterns,
        nurse_patterns,
        successions,
        rest_gaps,
        pairs,
        balance,
        nurse_balance,
        switches,
        levels,
        slot_of,
        priority_of,
    })
}

fn check_staff_ranges(cx: &mut Ctx, list: &[StaffBound], name: &str) {
    let mut ranges: BTreeMap<(Kind, &str, &str, i32), (Option<i64>, Option<i64>)> = BTreeMap::new();
    for b in list {
        let e = ranges.entry((b.kind, &b.group, &b.shift_group, b.day)).or_default();
        match b.side {
            Side::Lower => e.0 = Some(b.limit),
            Side::Upper => e.1 = Some(b.limit),
        }
    }
    for ((_, g, s, d), r) in ranges {
        if let (Some(lo), Some(hi)) = r {
            if lo > hi {
                cx.err(format!("{name}: LB {lo} > UB {hi} for ({g}, {s}, day {d})"));
            }
        }
    }
}

/// Every (kind, family) some evaluator can emit for this document.
pub(crate) fn required_families(doc: &InstanceDocument) -> BTreeSet<(Kind, Family)> {
    use Family::*;
    let mut out = BTreeSet::new();
    let b = &doc.bounds;
    if !b.work_days.is_empty() {
        out.insert((Kind::Hard, WorkDaysLb));
        out.insert((Kind::Hard, WorkDaysUb));
    }
    if !b.weekly_rest.is_empty() {
        out.insert((Kind::Hard, WeeklyRestLb));
        out.insert((Kind::Hard, WeeklyRestUb));
    }
    if !doc.pos_requests.is_empty() {
        out.insert((Kind::Hard, PosRequest));
    }
    if !doc.neg_requests.is_empty() {
        out.insert((Kind::Hard, NegRequest));
    }
    if doc.rule_switches.ld_se_balance {
        out.insert((Kind::Hard, EqShifts));
    }
    for r in &b.consecutive_work {
        out.insert((r.kind, ConsecutiveWorkDays));
    }
    for r in &b.staff {
        out.insert((r.kind, if r.side == Side::Lower { StaffLb } else { StaffUb }));
    }
    for r in &b.point {
        out.insert((r.kind, if r.side == Side::Lower { PointLb } else { PointUb }));
    }
    for r in &b.shift_freq {
        out.insert((r.kind, if r.side == Side::Lower { ShiftLb } else { ShiftUb }));
    }
    for r in &doc.pattern_rules {
        if r.min.is_some() {
            out.insert((r.kind, PatternLb));
        }
        if r.max.is_some() {
            out.insert((r.kind, PatternUb));
        }
    }
    for r in &doc.inter_shift_rules {
        match r {
            InterShiftRule::Succession { kind, .. } => out.insert((*kind, Succession)),
            InterShiftRule::RestGap { kind, .. } => out.insert((*kind, RestGap)),
        };
    }
    for r in &doc.pair_rules {
        out.insert((r.kind, Pair));
    }
    if doc.rule_switches.isolated_workdays {
        out.insert((Kind::Soft, IsolatedWorkday));
    }
    if doc.rule_switches.leave_adjacent_rest {
        out.insert((Kind::Soft, LeaveAdjacentRest));
    }
    if !doc.balance_rules.is_empty() {
        out.insert((Kind::Soft, Balance));
    }
    out
}
