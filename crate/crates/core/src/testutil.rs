//! Fixtures shared by unit tests.

use crate::model::compile::required_families;
use crate::model::*;

pub const TOY3: &str = include_str!("../testdata/toy3.json");

pub fn toy3() -> Instance {
    Instance::from_json(TOY3).unwrap()
}

/// Declares every family the document can emit: hard at 10, soft at 1.
pub fn finish(mut doc: InstanceDocument) -> Instance {
    doc.priorities = required_families(&doc)
        .into_iter()
        .map(|(kind, fam)| PriorityEntry {
            kind,
            family: fam.as_str().into(),
            priority: if kind == Kind::Hard { 10 } else { 1 },
        })
        .collect();
    Instance::try_from(doc).unwrap()
}

/// One code string per nurse, covering the decision days.
pub fn roster(inst: &Instance, rows: &[&str]) -> Roster {
    let mut core = std::collections::BTreeMap::new();
    for (n, row) in rows.iter().enumerate() {
        for (d, code) in row.split_whitespace().enumerate() {
            core.insert((n, d as i32), inst.shift_index(code).unwrap());
        }
    }
    inst.complete(&core).unwrap()
}

/// A feasible, zero-penalty TOY3 roster.
pub const TOY3_ZERO: [&str; 3] = ["D D N WR WR PH D", "D WR D D WR D PH", "WR D WR N D N PH"];

pub fn two_day_single() -> Instance {
    let mut doc = toy3().document().clone();
    doc.nurses.truncate(1);
    doc.nurse_groups = Default::default();
    doc.shifts.retain(|s| s.code == "D" || s.code == "WR" || s.code == "PH");
    doc.shift_groups = Default::default();
    doc.calendar.horizon_days = 2;
    doc.calendar.holidays = Default::default();
    doc.bounds = Bounds::default();
    doc.bounds.work_days.push(NurseBound { nurse: "n1".into(), lb: 1, ub: 1 });
    finish(doc)
}
