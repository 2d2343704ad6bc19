use super::*;
use crate::constraints::evaluate;

#[test]
fn same_config_same_bytes() {
    let cfg = GeneratorConfig::new(10, 1);
    assert_eq!(generate(&cfg).unwrap().to_json(), generate(&cfg).unwrap().to_json());
}

#[test]
fn seed_changes_request_placement() {
    let a = generate(&GeneratorConfig::new(10, 1)).unwrap();
    let b = generate(&GeneratorConfig::new(10, 2)).unwrap();
    assert_ne!(a.document().pos_requests, b.document().pos_requests);
}

#[test]
fn request_count_follows_density() {
    let inst = generate(&GeneratorConfig::new(20, 7)).unwrap();
    let doc = inst.document();
    assert_eq!(doc.pos_requests.len() + doc.neg_requests.len(), 56);
    let cells: BTreeSet<(String, i32)> =
        doc.pos_requests.iter().chain(&doc.neg_requests).map(|c| (c.nurse.clone(), c.day)).collect();
    assert_eq!(cells.len(), 56);
}

#[test]
fn ladder_has_four_tiers() {
    let inst = generate(&GeneratorConfig::new(10, 3)).unwrap();
    let tiers: BTreeSet<i64> = inst.document().priorities.iter().map(|p| p.priority).collect();
    assert_eq!(tiers, [1, 2, 3, 4].into());
    for p in &inst.document().priorities {
        let want = match p.family.as_str() {
            "pos_request" | "neg_request" => 4,
            "succession" | "rest_gap" => 3,
            "staff_lb" | "staff_ub" | "point_lb" | "point_ub" | "shift_lb" | "shift_ub" => 2,
            _ => 1,
        };
        assert_eq!(p.priority, want, "{p:?}");
    }
}

#[test]
fn seniors_carry_three_points() {
    let inst = generate(&GeneratorConfig::new(20, 3)).unwrap();
    let doc = inst.document();
    let seniors = &doc.nurse_groups["senior"];
    for nd in &doc.nurses {
        assert!((1..=3).contains(&nd.point));
        assert_eq!(seniors.contains(&nd.id), nd.point == 3);
    }
}

#[test]
fn invalid_density_is_rejected() {
    let mut cfg = GeneratorConfig::new(10, 1);
    cfg.request_density = 1.5;
    assert!(generate(&cfg).is_err());
}

fn initial(inst: &Instance) -> Roster {
    inst.complete(&Default::default()).unwrap()
}

#[test]
fn scenario_directive_sizes() {
    let inst = generate(&GeneratorConfig::new(10, 4)).unwrap();
    let r = initial(&inst);
    let (_, d) = make_scenario(&inst, &r, ScenarioKind::EntireRetained, 1, 0.05).unwrap();
    assert_eq!((d.prioritized.len(), d.cleared.len()), (280, 0));
    let (_, d) = make_scenario(&inst, &r, ScenarioKind::FirstHalfRetained, 1, 0.05).unwrap();
    assert_eq!((d.prioritized.len(), d.cleared.len()), (140, 140));
    assert!(d.prioritized.iter().all(|c| c.day < 14));
    assert!(d.cleared.iter().all(|c| c.day >= 14));
    let (_, d) = make_scenario(&inst, &r, ScenarioKind::EntireReconstructed, 1, 0.05).unwrap();
    assert!(d.is_empty());
}

#[test]
fn extra_requests_land_on_fresh_cells() {
    let inst = generate(&GeneratorConfig::new(10, 5)).unwrap();
    let r = initial(&inst);
    let (edited, _) = make_scenario(&inst, &r, ScenarioKind::FirstHalfRetained, 9, 0.05).unwrap();
    let cells = |doc: &InstanceDocument| -> Vec<(String, i32)> {
        doc.pos_requests.iter().chain(&doc.neg_requests).map(|c| (c.nurse.clone(), c.day)).collect()
    };
    let before = cells(inst.document());
    let after = cells(edited.document());
    assert_eq!(after.len(), before.len() + 14);
    let unique: BTreeSet<_> = after.iter().cloned().collect();
    assert_eq!(unique.len(), after.len());
    // Each extra request contradicts the initial roster.
    let ev_before = evaluate(&r, &inst, true);
    let ev_after = evaluate(&r, &edited, true);
    let requests = |e: &crate::constraints::Evaluation| {
        e.violations()
            .filter(|v| matches!(v.reason.family().as_str(), "pos_request" | "neg_request"))
            .count()
    };
    assert_eq!(requests(&ev_after), requests(&ev_before) + 14);
}

#[test]
fn scenario_kind_names() {
    for k in ScenarioKind::ALL {
        assert_eq!(k.as_str().parse::<ScenarioKind>().unwrap(), k);
    }
    assert!(matches!("bogus".parse::<ScenarioKind>(), Err(GeneratorError::UnknownScenario(_))));
}

#[test]
fn tiny_instances_are_valid() {
    for seed in 0..20 {
        let inst = generate(&GeneratorConfig::tiny(2, 3, seed)).unwrap();
        assert_eq!(inst.horizon_days(), 3);
        assert!(crate::oracle::space_size(&inst, &[]) <= 4u128.pow(6));
    }
}
