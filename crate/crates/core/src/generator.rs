//! Seeded synthetic instances and the three modification scenarios.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::*;
use crate::search::CellDirectives;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub nurse_count: usize,
    #[serde(default = "default_horizon")]
    pub horizon_days: u32,
    #[serde(default = "default_density")]
    pub request_density: f64,
    #[serde(default = "default_extra")]
    pub extra_request_density: f64,
    #[serde(default)]
    pub seed: u64,
    /// Days of recorded history before day 0.
    #[serde(default = "default_past")]
    pub past_days: u32,
    /// Use three work shifts instead of the full table; keeps tiny instances
    /// within reach of the oracle.
    #[serde(default)]
    pub compact: bool,
}

fn default_horizon() -> u32 {
    28
}
fn default_density() -> f64 {
    0.10
}
fn default_extra() -> f64 {
    0.05
}
fn default_past() -> u32 {
    7
}

impl GeneratorConfig {
    pub fn new(nurse_count: usize, seed: u64) -> Self {
        GeneratorConfig {
            nurse_count,
            horizon_days: default_horizon(),
            request_density: default_density(),
            extra_request_density: default_extra(),
            seed,
            past_days: default_past(),
            compact: false,
        }
    }

    /// A compact instance small enough for exhaustive enumeration.
    pub fn tiny(nurse_count: usize, horizon_days: u32, seed: u64) -> Self {
        GeneratorConfig {
            nurse_count,
            horizon_days,
            past_days: 0,
            compact: true,
            ..GeneratorConfig::new(nurse_count, seed)
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        for (name, v) in [
            ("request_density", self.request_density),
            ("extra_request_density", self.extra_request_density),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GeneratorError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.nurse_count == 0 {
            return Err(GeneratorError::Config("nurse_count must be positive".into()));
        }
        if self.horizon_days == 0 {
            return Err(GeneratorError::Config("horizon_days must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("unknown scenario kind `{0}`")]
    UnknownScenario(String),
    #[error("roster does not belong to the instance: {0}")]
    Roster(#[from] CompletionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Priority tiers, most important first.
pub const TIER_REQUESTS: i64 = 4;
pub const TIER_INTER_SHIFT: i64 = 3;
pub const TIER_STAFFING: i64 = 2;
pub const TIER_REST: i64 = 1;

fn tier(family: &str) -> i64 {
    match family {
        "pos_request" | "neg_request" => TIER_REQUESTS,
        "succession" | "rest_gap" => TIER_INTER_SHIFT,
        "staff_lb" | "staff_ub" | "point_lb" | "point_ub" | "shift_lb" | "shift_ub" => TIER_STAFFING,
        _ => TIER_REST,
    }
}

fn table_shifts(compact: bool) -> Vec<ShiftDef> {
    let mut shifts = if compact {
        vec![ShiftDef::work("D", 480, 1005), ShiftDef::work("E", 960, 1485), ShiftDef::work("N", 0, 525)]
    } else {
        vec![
            ShiftDef::work("D", 480, 1005),
            ShiftDef::work("LD", 480, 1215),
            ShiftDef::work("SE", 1185, 1440),
            ShiftDef::work("SN", 0, 525),
            ShiftDef::work("E", 960, 1485),
            ShiftDef::work("N", 0, 525),
            ShiftDef::work("EM", 360, 885),
            ShiftDef::work("LM", 690, 1215),
        ]
    };
    shifts.push(ShiftDef::untimed("WR", ShiftClass::Rest));
    shifts.push(ShiftDef::untimed("PH", ShiftClass::Rest));
    shifts
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn ceil_frac(n: usize, f: f64) -> i64 {
    (n as f64 * f).ceil() as i64
}

/// Builds an instance from `config`. Equal configs give byte-identical
/// documents.
pub fn generate(config: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nurse_count;
    let h = config.horizon_days;
    let compact = config.compact;

    let ids: Vec<String> = (1..=n).map(|i| format!("n{i:02}")).collect();
    let seniors = n.div_ceil(4);
    let intermediates = (n * 35).div_ceil(100).min(n - seniors);
    let nurses: Vec<NurseDef> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| NurseDef {
            id: id.clone(),
            point: if i < seniors {
                3
            } else if i < seniors + intermediates {
                2
            } else {
                1
            },
        })
        .collect();
    let mut nurse_groups = BTreeMap::new();
    nurse_groups.insert("all".to_string(), ids.iter().cloned().collect::<BTreeSet<_>>());
    nurse_groups.insert("senior".to_string(), ids[..seniors].iter().cloned().collect());
    if intermediates > 0 {
        nurse_groups.insert("intermediate".to_string(), ids[seniors..seniors + intermediates].iter().cloned().collect());
    }
    if seniors + intermediates < n {
        nurse_groups.insert("novice".to_string(), ids[seniors + intermediates..].iter().cloned().collect());
    }

    let shifts = table_shifts(compact);
    let work_codes: Vec<String> =
        shifts.iter().filter(|s| s.class == ShiftClass::Work).map(|s| s.code.clone()).collect();
    let mut shift_groups = BTreeMap::new();
    if compact {
        shift_groups.insert("DAY".to_string(), set(&["D"]));
        shift_groups.insert("EVENING".to_string(), set(&["E"]));
        shift_groups.insert("NIGHT".to_string(), set(&["N"]));
    } else {
        shift_groups.insert("DAY".to_string(), set(&["D", "LD", "EM", "LM"]));
        shift_groups.insert("EVENING".to_string(), set(&["SE", "E"]));
        shift_groups.insert("NIGHT".to_string(), set(&["SN", "N"]));
    }
    shift_groups.insert("WORK".to_string(), work_codes.iter().cloned().collect());

    let weekends: BTreeSet<i32> = (0..h as i32).filter(|d| d % 7 >= 5).collect();
    let mut holidays = BTreeSet::new();
    if h >= 7 {
        // One weekday holiday per four weeks.
        for block in 0..h.div_ceil(28) as i32 {
            let lo = block * 28;
            let hi = (lo + 28).min(h as i32);
            let weekdays: Vec<i32> = (lo..hi).filter(|d| d % 7 < 5).collect();
            if let Some(&d) = weekdays.choose(&mut rng) {
                holidays.insert(d);
            }
        }
    }
    let calendar = Calendar {
        past_days: config.past_days,
        horizon_days: h,
        lookahead_days: 0,
        holidays,
        weekends,
    };

    // History: a plausible rotation per nurse.
    let history_codes = ["D", "E", "N"];
    let mut past_assignments = Vec::new();
    for id in &ids {
        let mut run = 0;
        for d in -(config.past_days as i32)..0 {
            let code = if run >= 4 || rng.random_bool(0.3) {
                run = 0;
                "WR"
            } else {
                run += 1;
                history_codes[rng.random_range(0..history_codes.len())]
            };
            past_assignments.push(CellShift::new(id, d, code));
        }
    }

    // Requests on distinct current-period cells, half desired and half not.
    let cells: Vec<(usize, i32)> = (0..n).flat_map(|i| (0..h as i32).map(move |d| (i, d))).collect();
    let count = (config.request_density * cells.len() as f64).round() as usize;
    let chosen: Vec<(usize, i32)> = cells.choose_multiple(&mut rng, count).copied().collect();
    let mut pos_requests = Vec::new();
    let mut neg_requests = Vec::new();
    for (k, &(i, d)) in chosen.iter().enumerate() {
        let rest = if calendar.is_holiday(d) { "PH" } else { "WR" };
        if k % 2 == 0 {
            let code = if rng.random_bool(0.5) {
                rest.to_string()
            } else {
                work_codes.choose(&mut rng).unwrap().clone()
            };
            pos_requests.push(CellShift::new(&ids[i], d, &code));
        } else {
            let code = work_codes.choose(&mut rng).unwrap().clone();
            neg_requests.push(CellShift::new(&ids[i], d, &code));
        }
    }

    let hf = h as f64;
    let work_lb = (hf * 0.64).round() as u32;
    let work_ub = (hf * 0.75).round() as u32;
    let mut bounds = Bounds::default();
    for id in &ids {
        bounds.work_days.push(NurseBound { nurse: id.clone(), lb: work_lb, ub: work_ub });
        bounds.weekly_rest.push(NurseBound { nurse: id.clone(), lb: h - work_ub, ub: h - work_lb });
    }
    bounds.consecutive_work.push(ConsecutiveWorkRule { kind: Kind::Hard, group: "all".into(), ub: 5 });
    let staff = |kind, group: &str, sg: &str, day, side, limit| StaffBound {
        kind,
        group: group.into(),
        shift_group: sg.into(),
        day,
        side,
        limit,
    };
    for d in 0..h as i32 {
        let weekend = d % 7 >= 5 || calendar.is_holiday(d);
        let day_need = if weekend { ceil_frac(n, 0.2) } else { ceil_frac(n, 0.3) };
        bounds.staff.push(staff(Kind::Hard, "all", "DAY", d, Side::Lower, day_need));
        bounds.staff.push(staff(Kind::Hard, "all", "EVENING", d, Side::Lower, ceil_frac(n, 0.1)));
        bounds.staff.push(staff(Kind::Hard, "all", "NIGHT", d, Side::Lower, ceil_frac(n, 0.1)));
        bounds.staff.push(staff(Kind::Soft, "all", "NIGHT", d, Side::Upper, ceil_frac(n, 0.2)));
        bounds.staff.push(staff(Kind::Soft, "senior", "NIGHT", d, Side::Lower, 1));
        bounds.point.push(staff(Kind::Soft, "all", "DAY", d, Side::Lower, 2 * day_need));
    }
    let nights_ub = (hf / 4.0).ceil() as u32;
    for id in &ids {
        bounds.shift_freq.push(ShiftFreqBound {
            kind: Kind::Soft,
            nurse: id.clone(),
            shift_group: "NIGHT".into(),
            side: Side::Upper,
            limit: nights_ub,
        });
    }

    let pattern_rules = vec![PatternRule {
        id: "three_nights".into(),
        kind: Kind::Soft,
        group: "all".into(),
        slots: vec!["NIGHT".into(), "NIGHT".into(), "NIGHT".into()],
        min: None,
        max: Some(0),
    }];
    let inter_shift_rules = vec![
        InterShiftRule::Succession {
            kind: Kind::Hard,
            prev: "NIGHT".into(),
            mode: SuccessionMode::Forbidden,
            next: "DAY".into(),
        },
        InterShiftRule::Succession {
            kind: Kind::Soft,
            prev: "EVENING".into(),
            mode: SuccessionMode::Forbidden,
            next: "DAY".into(),
        },
        InterShiftRule::RestGap { kind: Kind::Soft, min_gap_hours: 11 },
    ];
    let mut pair_rules = Vec::new();
    if n >= 4 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        pair_rules.push(PairRule {
            kind: Kind::Soft,
            first: ids[order[0]].clone(),
            second: ids[order[1]].clone(),
            relation: PairRelation::Prohibited,
        });
        pair_rules.push(PairRule {
            kind: Kind::Soft,
            first: ids[order[2]].clone(),
            second: ids[order[3]].clone(),
            relation: PairRelation::Recommended,
        });
    }
    let balance_rules = vec![
        BalanceRule {
            id: "night_balance".into(),
            group: "all".into(),
            metric: BalanceMetric::ShiftCount { shift_group: "NIGHT".into() },
            allowed_spread: 2,
        },
        BalanceRule {
            id: "weekend_rest_balance".into(),
            group: "all".into(),
            metric: BalanceMetric::WeekendHolidayRest,
            allowed_spread: 2,
        },
    ];
    let rule_switches = RuleSwitches {
        ld_se_balance: !compact,
        isolated_workdays: true,
        leave_adjacent_rest: false,
    };

    let mut doc = InstanceDocument {
        format_version: FORMAT_VERSION,
        nurses,
        nurse_groups,
        shifts,
        shift_groups,
        calendar,
        past_assignments,
        pos_requests,
        neg_requests,
        manual_requests: vec![],
        bounds,
        pattern_rules,
        inter_shift_rules,
        pair_rules,
        balance_rules,
        rule_switches,
        priorities: vec![],
    };
    doc.priorities = priorities_for(&doc);
    Ok(Instance::try_from(doc)?)
}

/// A seeded variant of the three-nurse, one-week toy ward: two work shifts
/// `D` and `N`, hard coverage and workload bounds, and randomized soft
/// requests, night limits and priorities. Every cell has three values, so
/// the space is small enough to enumerate once a few cells are fixed.
pub fn toy_family(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7013_F00D);
    let ids = ["n1", "n2", "n3"];
    let nurses = ids
        .iter()
        .zip([3, 2, 1])
        .map(|(id, point)| NurseDef { id: id.to_string(), point })
        .collect();
    let mut nurse_groups = BTreeMap::new();
    nurse_groups.insert("all".to_string(), set(&ids));
    nurse_groups.insert("senior".to_string(), set(&["n1"]));
    let shifts = vec![
        ShiftDef::work("D", 480, 1005),
        ShiftDef::work("N", 0, 525),
        ShiftDef::untimed("WR", ShiftClass::Rest),
        ShiftDef::untimed("PH", ShiftClass::Rest),
    ];
    let mut shift_groups = BTreeMap::new();
    shift_groups.insert("DAY".to_string(), set(&["D"]));
    shift_groups.insert("NIGHT".to_string(), set(&["N"]));
    shift_groups.insert("WORK".to_string(), set(&["D", "N"]));
    let mut days: Vec<i32> = (0..7).collect();
    days.shuffle(&mut rng);
    let holiday_count = rng.random_range(0..=2);
    let calendar = Calendar {
        past_days: 0,
        horizon_days: 7,
        lookahead_days: 0,
        holidays: days[..holiday_count].iter().copied().collect(),
        weekends: BTreeSet::new(),
    };

    let mut bounds = Bounds::default();
    for id in ids {
        let lb = rng.random_range(2..=3);
        bounds.work_days.push(NurseBound { nurse: id.into(), lb, ub: lb + rng.random_range(1..=3) });
        let lb = rng.random_range(0..=1);
        bounds.weekly_rest.push(NurseBound { nurse: id.into(), lb, ub: lb + rng.random_range(3..=4) });
        bounds.shift_freq.push(ShiftFreqBound {
            kind: Kind::Soft,
            nurse: id.into(),
            shift_group: "NIGHT".into(),
            side: Side::Upper,
            limit: rng.random_range(1..=2),
        });
    }
    for day in 0..7 {
        let staff = |kind, shift_group: &str, side, limit| StaffBound {
            kind,
            group: "all".into(),
            shift_group: shift_group.into(),
            day,
            side,
            limit,
        };
        bounds.staff.push(staff(Kind::Hard, "WORK", Side::Lower, 1));
        if rng.random_bool(0.5) {
            bounds.staff.push(staff(Kind::Soft, "NIGHT", Side::Lower, 1));
        }
        if rng.random_bool(0.3) {
            bounds.staff.push(staff(Kind::Soft, "WORK", Side::Upper, 2));
        }
    }
    bounds.consecutive_work.push(ConsecutiveWorkRule { kind: Kind::Soft, group: "all".into(), ub: 3 });

    let mut cells: Vec<(usize, i32)> = (0..3).flat_map(|n| (0..7).map(move |d| (n, d))).collect();
    cells.shuffle(&mut rng);
    let pos_count = rng.random_range(1..=3);
    let neg_count = rng.random_range(1..=3);
    let mut pos_requests = Vec::new();
    let mut neg_requests = Vec::new();
    for (k, &(n, d)) in cells[..pos_count + neg_count].iter().enumerate() {
        let rest = if calendar.holidays.contains(&d) { "PH" } else { "WR" };
        let code = *["D", "N", rest].choose(&mut rng).expect("non-empty");
        let cell = CellShift::new(ids[n], d, code);
        if k < pos_count {
            pos_requests.push(cell);
        } else {
            neg_requests.push(cell);
        }
    }

    let mut doc = InstanceDocument {
        format_version: FORMAT_VERSION,
        nurses,
        nurse_groups,
        shifts,
        shift_groups,
        calendar,
        past_assignments: vec![],
        pos_requests,
        neg_requests,
        manual_requests: vec![],
        bounds,
        pattern_rules: vec![],
        inter_shift_rules: vec![InterShiftRule::Succession {
            kind: Kind::Soft,
            prev: "NIGHT".into(),
            mode: SuccessionMode::Forbidden,
            next: "DAY".into(),
        }],
        pair_rules: vec![],
        balance_rules: vec![],
        rule_switches: RuleSwitches::default(),
        priorities: vec![],
    };
    doc.priorities = crate::model::compile::required_families(&doc)
        .into_iter()
        .map(|(kind, fam)| PriorityEntry {
            kind,
            family: fam.as_str().into(),
            priority: if kind == Kind::Hard { 1 } else { rng.random_range(1..=3) },
        })
        .collect();
    Instance::try_from(doc).expect("toy family documents are valid")
}

/// The four-tier ladder applied to every family the document uses.
pub fn priorities_for(doc: &InstanceDocument) -> Vec<PriorityEntry> {
    let mut doc = doc.clone();
    // Request families are declared even when the base set is empty so that
    // scenario edits stay valid.
    if doc.pos_requests.is_empty() || doc.neg_requests.is_empty() {
        doc.pos_requests.push(CellShift::new("", 0, ""));
        doc.neg_requests.push(CellShift::new("", 0, ""));
    }
    crate::model::compile::required_families(&doc)
        .into_iter()
        .map(|(kind, fam)| PriorityEntry { kind, family: fam.as_str().into(), priority: tier(fam.as_str()) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    EntireReconstructed,
    FirstHalfRetained,
    EntireRetained,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] =
        [ScenarioKind::EntireReconstructed, ScenarioKind::FirstHalfRetained, ScenarioKind::EntireRetained];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::EntireReconstructed => "entire_reconstructed",
            ScenarioKind::FirstHalfRetained => "first_half_retained",
            ScenarioKind::EntireRetained => "entire_retained",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = GeneratorError;

    fn from_str(s: &str) -> Result<Self, GeneratorError> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| GeneratorError::UnknownScenario(s.to_string()))
    }
}

/// Adds extra requests to previously request-free cells and derives the
/// directives for `kind`. Each extra request contradicts the initial
/// roster, so honoring it forces a change.
pub fn make_scenario(
    instance: &Instance,
    initial: &Roster,
    kind: ScenarioKind,
    seed: u64,
    extra_density: f64,
) -> Result<(Instance, CellDirectives), GeneratorError> {
    if !(0.0..=1.0).contains(&extra_density) {
        return Err(GeneratorError::Config(format!("extra density must lie in [0, 1], got {extra_density}")));
    }
    initial.check(instance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5CE7_A810);
    let doc = instance.document();
    let h = doc.calendar.horizon_days as i32;
    let n = instance.nurse_count();
    let taken: BTreeSet<(String, i32)> = doc
        .pos_requests
        .iter()
        .chain(&doc.neg_requests)
        .map(|c| (c.nurse.clone(), c.day))
        .collect();
    let free: Vec<(usize, i32)> = (0..n)
        .flat_map(|i| (0..h).map(move |d| (i, d)))
        .filter(|&(i, d)| !taken.contains(&(instance.nurse_id(i).to_string(), d)))
        .filter(|&(i, d)| instance.cell_domain(i, d).is_some_and(|s| s.len() > 1))
        .collect();
    let count = ((extra_density * (n as f64) * (h as f64)).round() as usize).min(free.len());
    let chosen: Vec<(usize, i32)> = free.choose_multiple(&mut rng, count).copied().collect();
    let mut doc = doc.clone();
    for (k, &(i, d)) in chosen.iter().enumerate() {
        let id = instance.nurse_id(i);
        let current = initial.get(i, d);
        let dom = instance.cell_domain(i, d).expect("decision day");
        let is_work = instance.shift_class(current) == ShiftClass::Work;
        if k % 2 == 1 && is_work {
            doc.neg_requests.push(CellShift::new(id, d, instance.shift_code(current)));
        } else {
            let others: Vec<ShiftIx> = dom.iter().copied().filter(|&s| s != current).collect();
            let s = *others.choose(&mut rng).expect("domain has an alternative");
            doc.pos_requests.push(CellShift::new(id, d, instance.shift_code(s)));
        }
    }
    doc.priorities = merge_priorities(&doc);
    let edited = Instance::try_from(doc)?;

    let mut directives = CellDirectives::default();
    let prioritize = |directives: &mut CellDirectives, days: std::ops::Range<i32>| {
        for i in 0..n {
            for d in days.clone() {
                directives.prioritized.push(CellShift::new(
                    instance.nurse_id(i),
                    d,
                    instance.shift_code(initial.get(i, d)),
                ));
            }
        }
    };
    match kind {
        ScenarioKind::EntireReconstructed => {}
        ScenarioKind::EntireRetained => prioritize(&mut directives, 0..h),
        ScenarioKind::FirstHalfRetained => {
            let half = h / 2;
            prioritize(&mut directives, 0..half);
            for i in 0..n {
                for d in half..h {
                    directives.cleared.push(CellRef { nurse: instance.nurse_id(i).to_string(), day: d });
                }
            }
        }
    }
    Ok((edited, directives))
}

/// Keeps existing entries and fills any newly required family from the
/// ladder.
fn merge_priorities(doc: &InstanceDocument) -> Vec<PriorityEntry> {
    let mut out = doc.priorities.clone();
    for (kind, fam) in crate::model::compile::required_families(doc) {
        if !out.iter().any(|p| p.kind == kind && p.family == fam.as_str()) {
            out.push(PriorityEntry { kind, family: fam.as_str().into(), priority: tier(fam.as_str()) });
        }
    }
    out
}

#[cfg(test)]
mod tests;
