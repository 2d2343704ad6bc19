//! Serialized form of an instance. Every list that is semantically a set is
//! sorted on load, so two equal instances serialize to identical bytes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftClass {
    Work,
    Rest,
    Duty,
    Leave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Hard,
    Soft,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Hard => "hard",
            Kind::Soft => "soft",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "lb")]
    Lower,
    #[serde(rename = "ub")]
    Upper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftDef {
    pub code: String,
    #[serde(rename = "klass")]
    pub class: ShiftClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_minute: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_minute: Option<u32>,
}

impl ShiftDef {
    pub fn work(code: &str, start_minute: u32, end_minute: u32) -> Self {
        ShiftDef {
            code: code.to_string(),
            class: ShiftClass::Work,
            start_minute: Some(start_minute),
            end_minute: Some(end_minute),
        }
    }

    pub fn untimed(code: &str, class: ShiftClass) -> Self {
        ShiftDef {
            code: code.to_string(),
            class,
            start_minute: None,
            end_minute: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NurseDef {
    pub id: String,
    pub point: i64,
}

/// Day indices run from `-past_days` to `horizon_days + lookahead_days - 1`;
/// day 0 is the first day of the current period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    #[serde(default)]
    pub past_days: u32,
    pub horizon_days: u32,
    #[serde(default)]
    pub lookahead_days: u32,
    #[serde(default)]
    pub holidays: BTreeSet<i32>,
    #[serde(default)]
    pub weekends: BTreeSet<i32>,
}

impl Calendar {
    pub fn first_day(&self) -> i32 {
        -(self.past_days as i32)
    }

    /// One past the last day of the window.
    pub fn end_day(&self) -> i32 {
        (self.horizon_days + self.lookahead_days) as i32
    }

    pub fn window_len(&self) -> usize {
        (self.past_days + self.horizon_days + self.lookahead_days) as usize
    }

    pub fn contains(&self, day: i32) -> bool {
        day >= self.first_day() && day < self.end_day()
    }

    pub fn is_current(&self, day: i32) -> bool {
        day >= 0 && day < self.horizon_days as i32
    }

    /// Decision days: the current period plus the lookahead.
    pub fn is_decision(&self, day: i32) -> bool {
        day >= 0 && day < self.end_day()
    }

    pub fn is_holiday(&self, day: i32) -> bool {
        self.holidays.contains(&day)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellShift {
    pub nurse: String,
    pub day: i32,
    pub shift: String,
}

impl CellShift {
    pub fn new(nurse: &str, day: i32, shift: &str) -> Self {
        CellShift {
            nurse: nurse.to_string(),
            day,
            shift: shift.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellRef {
    pub nurse: String,
    pub day: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NurseBound {
    pub nurse: String,
    pub lb: u32,
    pub ub: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConsecutiveWorkRule {
    pub kind: Kind,
    pub group: String,
    pub ub: u32,
}

/// Daily staffing bound, over headcount or over skill points depending on
/// which table it sits in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StaffBound {
    pub kind: Kind,
    pub group: String,
    pub shift_group: String,
    pub day: i32,
    pub side: Side,
    pub limit: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShiftFreqBound {
    pub kind: Kind,
    pub nurse: String,
    pub shift_group: String,
    pub side: Side,
    pub limit: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(default)]
    pub work_days: Vec<NurseBound>,
    #[serde(default)]
    pub weekly_rest: Vec<NurseBound>,
    #[serde(default)]
    pub consecutive_work: Vec<ConsecutiveWorkRule>,
    #[serde(default)]
    pub staff: Vec<StaffBound>,
    #[serde(default)]
    pub point: Vec<StaffBound>,
    #[serde(default)]
    pub shift_freq: Vec<ShiftFreqBound>,
}

/// Occurrence bounds on a fixed-length sequence of shift-group slots.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternRule {
    pub id: String,
    pub kind: Kind,
    pub group: String,
    pub slots: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessionMode {
    Required,
    Forbidden,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InterShiftRule {
    Succession {
        kind: Kind,
        prev: String,
        mode: SuccessionMode,
        next: String,
    },
    RestGap {
        #[serde(default = "soft_kind")]
        kind: Kind,
        min_gap_hours: u32,
    },
}

fn soft_kind() -> Kind {
    Kind::Soft
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRelation {
    Recommended,
    Prohibited,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairRule {
    pub kind: Kind,
    pub first: String,
    pub second: String,
    pub relation: PairRelation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BalanceMetric {
    ShiftCount { shift_group: String },
    WeekendHolidayRest,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BalanceRule {
    pub id: String,
    pub group: String,
    pub metric: BalanceMetric,
    pub allowed_spread: u32,
}

/// Rules that are not driven by a bound table and therefore need an explicit
/// switch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSwitches {
    #[serde(default)]
    pub ld_se_balance: bool,
    #[serde(default)]
    pub isolated_workdays: bool,
    #[serde(default)]
    pub leave_adjacent_rest: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PriorityEntry {
    pub kind: Kind,
    pub family: String,
    pub priority: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub format_version: u32,
    pub nurses: Vec<NurseDef>,
    #[serde(default)]
    pub nurse_groups: BTreeMap<String, BTreeSet<String>>,
    pub shifts: Vec<ShiftDef>,
    #[serde(default)]
    pub shift_groups: BTreeMap<String, BTreeSet<String>>,
    pub calendar: Calendar,
    #[serde(default)]
    pub past_assignments: Vec<CellShift>,
    #[serde(default)]
    pub pos_requests: Vec<CellShift>,
    #[serde(default)]
    pub neg_requests: Vec<CellShift>,
    #[serde(default)]
    pub manual_requests: Vec<CellShift>,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub pattern_rules: Vec<PatternRule>,
    #[serde(default)]
    pub inter_shift_rules: Vec<InterShiftRule>,
    #[serde(default)]
    pub pair_rules: Vec<PairRule>,
    #[serde(default)]
    pub balance_rules: Vec<BalanceRule>,
    #[serde(default)]
    pub rule_switches: RuleSwitches,
    #[serde(default)]
    pub priorities: Vec<PriorityEntry>,
}

impl InstanceDocument {
    pub(crate) fn canonicalize(&mut self) {
        fn sort_dedup<T: Ord>(v: &mut Vec<T>) {
            v.sort();
            v.dedup();
        }
        sort_dedup(&mut self.past_assignments);
        sort_dedup(&mut self.pos_requests);
        sort_dedup(&mut self.neg_requests);
        sort_dedup(&mut self.manual_requests);
        sort_dedup(&mut self.bounds.work_days);
        sort_dedup(&mut self.bounds.weekly_rest);
        sort_dedup(&mut self.bounds.consecutive_work);
        sort_dedup(&mut self.bounds.staff);
        sort_dedup(&mut self.bounds.point);
        sort_dedup(&mut self.bounds.shift_freq);
        sort_dedup(&mut self.pattern_rules);
        sort_dedup(&mut self.inter_shift_rules);
        sort_dedup(&mut self.pair_rules);
        sort_dedup(&mut self.balance_rules);
        sort_dedup(&mut self.priorities);
    }
}
