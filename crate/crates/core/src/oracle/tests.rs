use super::*;
use crate::model::*;
use crate::testutil::*;

fn fixed_except(inst: &Instance, roster: &Roster, free: &[(usize, i32)]) -> Vec<Assignment> {
    let mut out = Vec::new();
    for n in 0..inst.nurse_count() {
        for d in 0..inst.end_day() {
            if !free.contains(&(n, d)) {
                out.push(Assignment { nurse: n, day: d, shift: roster.get(n, d) });
            }
        }
    }
    out
}

#[test]
fn symmetric_pair_has_two_optima() {
    let inst = two_day_single();
    let res = enumerate_optimal(&inst, false, 10).unwrap();
    assert!(res.feasible);
    assert!(res.optimum.is_zero());
    assert_eq!(res.explored, 4);
    assert_eq!(res.optimal_count, 2);
    let d = inst.shift_index("D").unwrap();
    let wr = inst.shift_index("WR").unwrap();
    let mut got: Vec<(ShiftIx, ShiftIx)> =
        res.optimal_rosters.iter().map(|r| (r.get(0, 0), r.get(0, 1))).collect();
    got.sort();
    let mut want = vec![(d, wr), (wr, d)];
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn toy3_exceeds_the_guard() {
    let err = enumerate_optimal(&toy3(), false, 1).unwrap_err();
    assert_eq!(err, OracleError::TooLarge { size: 10_460_353_203, limit: MAX_SPACE });
}

#[test]
fn contradictory_requests_leave_no_feasible_completion() {
    let mut doc = toy3().document().clone();
    doc.pos_requests.push(CellShift::new("n1", 0, "D"));
    doc.neg_requests.push(CellShift::new("n1", 0, "D"));
    let inst = finish(doc);
    let zero = roster(&inst, &TOY3_ZERO);
    let fixed = fixed_except(&inst, &zero, &[(0, 0), (0, 1), (0, 2)]);
    let res = enumerate_optimal_with(&inst, false, 5, &fixed).unwrap();
    assert!(!res.feasible);
    assert!(res.hard_weight > 0);
    let soft = enumerate_optimal_with(&inst, true, 5, &fixed).unwrap();
    assert!(soft.feasible);
}

#[test]
fn witnesses_reproduce_the_optimum() {
    let inst = toy3();
    let zero = roster(&inst, &TOY3_ZERO);
    let fixed = fixed_except(&inst, &zero, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]);
    let res = enumerate_optimal_with(&inst, false, 100, &fixed).unwrap();
    assert_eq!(res.explored, 3u64.pow(6));
    assert!(res.optimal_count >= 1);
    for r in &res.optimal_rosters {
        for a in &fixed {
            assert_eq!(r.get(a.nurse, a.day), a.shift);
        }
        let ev = evaluate(r, &inst, false);
        assert_eq!(ev.penalties, res.optimum);
    }
}

#[test]
fn fixed_values_must_be_in_domain() {
    let inst = two_day_single();
    let ph = inst.shift_index("PH").unwrap();
    let err = enumerate_optimal_with(&inst, false, 1, &[Assignment { nurse: 0, day: 0, shift: ph }]).unwrap_err();
    assert_eq!(err, OracleError::BadFixed { nurse: 0, day: 0 });
}
