use std::fmt;

/// Reason families. Every violation belongs to exactly one family, and
/// priorities are declared per (kind, family).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    WorkDaysLb,
    WorkDaysUb,
    WeeklyRestLb,
    WeeklyRestUb,
    PosRequest,
    NegRequest,
    EqShifts,
    ConsecutiveWorkDays,
    StaffLb,
    StaffUb,
    PointLb,
    PointUb,
    ShiftLb,
    ShiftUb,
    PatternLb,
    PatternUb,
    Succession,
    RestGap,
    Pair,
    IsolatedWorkday,
    LeaveAdjacentRest,
    Balance,
}

impl Family {
    pub const COUNT: usize = 22;

    pub const ALL: [Family; Family::COUNT] = [
        Family::WorkDaysLb,
        Family::WorkDaysUb,
        Family::WeeklyRestLb,
        Family::WeeklyRestUb,
        Family::PosRequest,
        Family::NegRequest,
        Family::EqShifts,
        Family::ConsecutiveWorkDays,
        Family::StaffLb,
        Family::StaffUb,
        Family::PointLb,
        Family::PointUb,
        Family::ShiftLb,
        Family::ShiftUb,
        Family::PatternLb,
        Family::PatternUb,
        Family::Succession,
        Family::RestGap,
        Family::Pair,
        Family::IsolatedWorkday,
        Family::LeaveAdjacentRest,
        Family::Balance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::WorkDaysLb => "work_days_lb",
            Family::WorkDaysUb => "work_days_ub",
            Family::WeeklyRestLb => "weekly_rest_lb",
            Family::WeeklyRestUb => "weekly_rest_ub",
            Family::PosRequest => "pos_request",
            Family::NegRequest => "neg_request",
            Family::EqShifts => "eq_shifts",
            Family::ConsecutiveWorkDays => "consecutive_work_days",
            Family::StaffLb => "staff_lb",
            Family::StaffUb => "staff_ub",
            Family::PointLb => "point_lb",
            Family::PointUb => "point_ub",
            Family::ShiftLb => "shift_lb",
            Family::ShiftUb => "shift_ub",
            Family::PatternLb => "pattern_lb",
            Family::PatternUb => "pattern_ub",
            Family::Succession => "succession",
            Family::RestGap => "rest_gap",
            Family::Pair => "pair",
            Family::IsolatedWorkday => "isolated_workday",
            Family::LeaveAdjacentRest => "leave_adjacent_rest",
            Family::Balance => "balance",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.as_str() == name)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for (i, f) in Family::ALL.into_iter().enumerate() {
            assert_eq!(f as usize, i);
            assert_eq!(Family::from_name(f.as_str()), Some(f));
        }
        assert_eq!(Family::from_name("nope"), None);
    }
}
