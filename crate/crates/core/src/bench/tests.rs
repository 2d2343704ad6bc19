use std::sync::Arc;

use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

use super::*;
use crate::generator::{generate, GeneratorConfig};
use crate::search::TimeModel;

fn record(strategy: &str, limit: f64, levels: &[i64], slots: &[u64]) -> BenchRecord {
    BenchRecord {
        instance_id: "i".into(),
        scenario: ScenarioKind::EntireRetained,
        strategy: strategy.into(),
        time_limit_seconds: limit,
        repetition: 1,
        status: RecordStatus::TimeLimit,
        skip_cause: None,
        levels: levels.to_vec(),
        penalties: Some(PenaltyVector::from_slots(levels, slots)),
        score: None,
        modification_rate: None,
        modification_count: 0,
        prioritized_count: 0,
        iterations: 0,
        automatic_restarts: 0,
        trace_ref: None,
    }
}

#[test]
fn weights_for_four_tiers() {
    assert_eq!(tier_weights(10.0, 4), vec![1000.0, 100.0, 10.0, 1.0]);
    assert_eq!(tier_weights(2.0, 3), vec![4.0, 2.0, 1.0]);
    assert!(tier_weights(10.0, 0).is_empty());
}

#[test]
fn identical_vectors_score_zero() {
    let v = vec![vec![3, 1, 4, 1]; 5];
    for s in scalarize_group(&v, 10.0) {
        assert_eq!(s.value, 0.0);
        assert!(s.normalized.iter().all(|&f| f == 0.0));
    }
}

#[test]
fn endpoint_scores() {
    let s = scalarize_group(&[vec![5, 2, 2, 2], vec![10, 2, 2, 2]], 10.0);
    assert_eq!(s[0].value, 0.0);
    assert_eq!(s[1].value, 1000.0);
    let s = scalarize_group(&[vec![0, 0, 0, 7], vec![0, 0, 0, 3], vec![0, 0, 0, 5]], 10.0);
    assert_eq!([s[0].value, s[1].value, s[2].value], [1.0, 0.0, 0.5]);
}

#[test]
fn scalarize_groups_per_time_limit() {
    let levels = [4, 3, 2, 1];
    let mut rs = vec![
        record("LNPS-10", 60.0, &levels, &[5, 0, 0, 0]),
        record("MP-Low", 60.0, &levels, &[10, 0, 0, 0]),
        record("LNPS-10", 3600.0, &levels, &[1, 0, 0, 0]),
        record("MP-Low", 3600.0, &levels, &[1, 0, 0, 0]),
    ];
    rs.push(BenchRecord { penalties: None, ..record("MP-High", 60.0, &levels, &[]) });
    scalarize(&mut rs, DEFAULT_BETA);
    let scores: Vec<Option<f64>> = rs.iter().map(|r| r.score).collect();
    assert_eq!(scores, vec![Some(0.0), Some(1000.0), Some(0.0), Some(0.0), None]);
}

#[test]
fn scalarize_aligns_differing_levels() {
    // A level missing from one record's list counts as zero there.
    let mut rs = vec![record("LNPS-10", 60.0, &[4, 1], &[0, 2]), record("MP-Low", 60.0, &[4, 2, 1], &[1, 0, 2])];
    scalarize(&mut rs, 10.0);
    assert_eq!(rs[0].score, Some(0.0));
    assert_eq!(rs[1].score, Some(100.0));
}

#[test]
fn cactus_sorts_and_ranks() {
    let levels = [1];
    let mut rs: Vec<BenchRecord> = [3.0, 1.0, 2.0]
        .iter()
        .map(|&v| BenchRecord { score: Some(v), ..record("LNPS-10", 60.0, &levels, &[0]) })
        .collect();
    let c = emit_cactus(&rs, CactusAxis::Penalty);
    let pairs: Vec<(usize, f64)> = c.points.iter().map(|p| (p.rank, p.value)).collect();
    assert_eq!(pairs, vec![(1, 1.0), (2, 2.0), (3, 3.0)]);
    assert_eq!(c.omitted, 0);

    rs.extend([0.5, 4.0].iter().map(|&v| BenchRecord { score: Some(v), ..record("MP-Mid", 60.0, &levels, &[0]) }));
    let c = emit_cactus(&rs, CactusAxis::Penalty);
    assert_eq!(c.series("LNPS-10"), vec![1.0, 2.0, 3.0]);
    assert_eq!(c.series("MP-Mid"), vec![0.5, 4.0]);
    assert_eq!(c.points[0].strategy, "LNPS-10");

    let mut csv = Vec::new();
    c.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("strategy,rank,value\nLNPS-10,1,1.0\n"), "{text}");
}

#[test]
fn cactus_omits_absent_rates() {
    let levels = [1];
    let rs = vec![
        BenchRecord { modification_rate: Some(0.2), ..record("LNPS-10", 60.0, &levels, &[0]) },
        record("LNPS-10", 60.0, &levels, &[0]),
        BenchRecord { modification_rate: Some(0.1), ..record("LNPS-10", 60.0, &levels, &[0]) },
    ];
    let c = emit_cactus(&rs, CactusAxis::ModificationRate);
    assert_eq!(c.series("LNPS-10"), vec![0.1, 0.2]);
    assert_eq!(c.omitted, 1);
}

#[test]
fn median_of_values() {
    assert_eq!(median(&[]), None);
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
}

#[test]
fn axis_and_status_names() {
    assert_eq!("penalty".parse::<CactusAxis>().unwrap(), CactusAxis::Penalty);
    assert_eq!("modrate".parse::<CactusAxis>().unwrap(), CactusAxis::ModificationRate);
    assert!("speed".parse::<CactusAxis>().is_err());
    assert_eq!("time_limit".parse::<RecordStatus>().unwrap(), RecordStatus::TimeLimit);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalized_values_lie_in_unit_interval(
        vs in proptest::collection::vec(proptest::collection::vec(0u64..50, 4), 1..6)
    ) {
        for s in scalarize_group(&vs, 10.0) {
            prop_assert!(s.normalized.iter().all(|f| (0.0..=1.0).contains(f)));
            prop_assert!(s.value >= 0.0 && s.value <= 1111.0 + 1e-9);
        }
    }

    #[test]
    fn score_is_monotone(
        vs in proptest::collection::vec(proptest::collection::vec(0u64..50, 4), 2..6),
        tier in 0usize..4,
        bump in 1u64..20,
    ) {
        // Raising one run's value on a tier never lowers its score.
        let before = scalarize_group(&vs, 10.0);
        let mut raised = vs.clone();
        raised[0][tier] += bump;
        let after = scalarize_group(&raised, 10.0);
        let max_other = vs[1..].iter().map(|v| v[tier]).max().unwrap();
        if vs[0][tier] >= max_other {
            prop_assert!(after[0].value >= before[0].value - 1e-9);
        }
        let mut lowered = vs.clone();
        lowered[0][tier] = lowered[0][tier].min(vs[1..].iter().map(|v| v[tier]).min().unwrap());
        let low = scalarize_group(&lowered, 10.0);
        prop_assert!(low[0].value <= before[0].value + 1e-9);
    }

    #[test]
    fn common_shift_cancels(
        vs in proptest::collection::vec(proptest::collection::vec(0u64..50, 4), 1..6),
        tier in 0usize..4,
        shift in 1u64..100,
    ) {
        let mut shifted = vs.clone();
        for v in &mut shifted {
            v[tier] += shift;
        }
        let a: Vec<f64> = scalarize_group(&vs, 10.0).iter().map(|s| s.value).collect();
        let b: Vec<f64> = scalarize_group(&shifted, 10.0).iter().map(|s| s.value).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cactus_series_are_nondecreasing(values in proptest::collection::vec((0usize..3, 0.0f64..100.0), 1..30)) {
        let names = ["LNPS-10", "MP-High", "MP+IS-Low"];
        let rs: Vec<BenchRecord> = values
            .iter()
            .map(|&(s, v)| BenchRecord { score: Some(v), ..record(names[s], 60.0, &[1], &[0]) })
            .collect();
        let c = emit_cactus(&rs, CactusAxis::Penalty);
        prop_assert_eq!(c.points.len(), rs.len());
        for name in names {
            let s = c.series(name);
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
            let ranks: Vec<usize> = c.points.iter().filter(|p| p.strategy == name).map(|p| p.rank).collect();
            prop_assert_eq!(ranks, (1..=s.len()).collect::<Vec<_>>());
        }
    }
}

// Suite runs use the virtual clock, so they are quick and reproducible.

fn virtual_plan(strategies: &[&str]) -> SuitePlan {
    let mut plan = SuitePlan::new(ScenarioKind::ALL.to_vec(), strategies, vec![1.0], 1);
    plan.time_model = TimeModel::Iterations { per_second: 10_000 };
    plan
}

fn tiny_suite(count: usize) -> Vec<BenchInstance> {
    (0..count)
        .map(|k| {
            let inst = generate(&GeneratorConfig::tiny(8, 7, 40 + k as u64)).unwrap();
            let initial = prepare_initial(&inst, 0.5, 1, TimeModel::Iterations { per_second: 10_000 }).unwrap();
            BenchInstance { id: format!("tiny{k}"), instance: Arc::new(inst), initial: Ok(initial) }
        })
        .collect()
}

#[test]
fn suite_runs_the_full_product() {
    let suite = tiny_suite(2);
    let plan = virtual_plan(&["LNPS-10", "MP-Low"]);
    let records = run_suite(&suite, &plan, &RunOptions::default()).unwrap();
    assert_eq!(records.len(), 12);
    assert_eq!(plan.product_size(2), 12);
    assert!(records.iter().all(|r| r.penalties.is_some() && !r.levels.is_empty()));
    for r in &records {
        match r.scenario {
            ScenarioKind::EntireReconstructed => assert_eq!(r.modification_rate, None),
            _ => assert!(r.modification_rate.is_some()),
        }
    }
    let again = run_suite(&suite, &plan, &RunOptions::default()).unwrap();
    assert_eq!(records, again);
}

#[test]
fn unknown_strategies_are_rejected() {
    let suite = tiny_suite(1);
    for bad in ["LNPS-15", "Greedy", "MP-Top"] {
        let err = run_suite(&suite, &virtual_plan(&["LNPS-10", bad]), &RunOptions::default()).unwrap_err();
        assert!(matches!(err, BenchError::Config(_)), "{bad}: {err}");
    }
    let err = run_suite(&suite, &virtual_plan(&["MP-High", "MP-Highest"]), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, BenchError::Config(_)));
}

#[test]
fn interrupted_suite_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let suite = tiny_suite(2);
    let plan = virtual_plan(&["LNPS-10", "MP+IS-Mid"]);
    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), max_new_records: Some(5) };
    let first = run_suite(&suite, &plan, &opts).unwrap();
    assert_eq!(first.len(), 5);
    let stored = load_records(&dir.path().join("records.csv")).unwrap();
    assert_eq!(stored.len(), 5);

    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), max_new_records: None };
    let all = run_suite(&suite, &plan, &opts).unwrap();
    assert_eq!(all.len(), 12);
    let stored = load_records(&dir.path().join("records.csv")).unwrap();
    assert_eq!(stored.len(), 12);
    assert_eq!(&stored[..5], &first[..]);
    for r in &all {
        let trace = dir.path().join(r.trace_ref.as_ref().unwrap());
        let text = std::fs::read_to_string(trace).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("sequence,time,p") && header.ends_with(",modification_count"), "{header}");
        assert!(text.lines().count() >= 2);
    }
    // Nothing is left to do on a third run.
    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), max_new_records: Some(0) };
    assert_eq!(run_suite(&suite, &plan, &opts).unwrap().len(), 12);
}

#[test]
fn missing_initial_is_skipped() {
    let mut suite = tiny_suite(2);
    suite[1].initial = Err("no initial roster".into());
    let plan = virtual_plan(&["LNPS-30"]);
    let records = run_suite(&suite, &plan, &RunOptions::default()).unwrap();
    let skipped: Vec<&BenchRecord> = records.iter().filter(|r| r.is_skipped()).collect();
    assert_eq!(skipped.len(), 3);
    assert!(skipped.iter().all(|r| r.instance_id == "tiny1" && r.skip_cause.as_deref() == Some("no initial roster")));
    assert_eq!(records.len() - skipped.len(), plan.product_size(2) - 3);
}

#[test]
fn records_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut rs = vec![
        record("LNPS-10", 60.0, &[5, 4, 1], &[0, 3, 2]),
        BenchRecord { penalties: Some(PenaltyVector::new()), modification_rate: Some(0.25), ..record("MP-Low", 3600.0, &[1], &[0]) },
        BenchRecord {
            penalties: None,
            status: RecordStatus::Skipped,
            skip_cause: Some("missing, with comma".into()),
            ..record("MP-High", 60.0, &[], &[])
        },
    ];
    scalarize(&mut rs, 10.0);
    write_records(&path, &rs).unwrap();
    assert_eq!(load_records(&path).unwrap(), rs);
}

#[test]
fn trace_ids_are_file_safe() {
    let r = BenchRecord { instance_id: "ward a/1".into(), ..record("MP+IS-High", 60.0, &[1], &[0]) };
    assert_eq!(trace_id(&r), "ward_a_1_entire_retained_MP_IS-High_60s_r1");
}

#[test]
fn suite_file_with_generated_instances() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(&GeneratorConfig::tiny(3, 7, 9)).unwrap();
    std::fs::write(dir.path().join("a.json"), inst.to_json()).unwrap();
    let suite = serde_json::json!({
        "scenarios": ["entire_retained"],
        "strategies": ["LNPS-10"],
        "time_limits": [0.1],
        "repetitions": 2,
        "time_model": {"type": "iterations", "per_second": 10000},
        "initial_budget_seconds": 0.2,
        "out_dir": "out",
        "instances": [
            {"instance": "a.json"},
            {"instance": "a.json", "id": "b", "initial": "missing.json"},
            {"generate": {"nurse_count": 3, "horizon_days": 7, "compact": true, "past_days": 0, "seed": 2}}
        ]
    });
    let path = dir.path().join("suite.json");
    std::fs::write(&path, suite.to_string()).unwrap();
    let (file, instances) = load_suite(&path).unwrap();
    assert_eq!(file.out_dir.as_deref(), Some(dir.path().join("out").as_path()));
    let ids: Vec<&str> = instances.iter().map(|b| b.id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "gen-n3-s2"]);
    assert!(instances[0].initial.is_ok() && instances[2].initial.is_ok());
    assert!(instances[1].initial.as_ref().unwrap_err().contains("missing.json"));
    let records = run_suite(&instances, &file.plan, &RunOptions::default()).unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(records.iter().filter(|r| r.is_skipped()).count(), 2);
}
