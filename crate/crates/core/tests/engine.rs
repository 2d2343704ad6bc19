use std::sync::Arc;

use proptest::prelude::*;

use nsp_core::constraints::evaluate;
use nsp_core::generator::{generate, GeneratorConfig};
use nsp_core::oracle::enumerate_optimal;
use nsp_core::search::{
    solve_collect, CellDirectives, Engine, Event, SearchConfig, SearchError, Strategy, TimeModel,
};

fn config(seed: u64, limit: f64) -> SearchConfig {
    let mut cfg = SearchConfig::new(Strategy::Lnps { restart_interval_seconds: 0.2 }, limit, seed);
    cfg.soften_hard = true;
    cfg.time_model = TimeModel::Iterations { per_second: 20_000 };
    cfg
}

#[test]
fn warm_start_from_an_optimum_keeps_it() {
    let inst = generate(&GeneratorConfig::tiny(2, 3, 21)).unwrap();
    let oracle = enumerate_optimal(&inst, true, 1).unwrap();
    let start = &oracle.optimal_rosters[0];

    let mut engine = Engine::new(Arc::new(inst.clone()), config(4, 0.5), &CellDirectives::default()).unwrap();
    engine.warm_start(start).unwrap();
    let mut seen = Vec::new();
    let out = engine.run(None, &mut |e| {
        if let Event::Incumbent(i) = e {
            seen.push(i.penalties.clone());
        }
    });
    assert!(!seen.is_empty());
    assert!(seen.iter().all(|p| *p == oracle.optimum), "{seen:?}");
    assert_eq!(out.best.unwrap().penalties, oracle.optimum);
}

#[test]
fn warm_start_rejects_a_foreign_roster() {
    let inst = generate(&GeneratorConfig::tiny(2, 3, 21)).unwrap();
    let other = generate(&GeneratorConfig::tiny(3, 3, 21)).unwrap();
    let (_, out) = solve_collect(&other, &config(1, 0.2), &CellDirectives::default()).unwrap();
    let mut engine = Engine::new(Arc::new(inst), config(1, 0.2), &CellDirectives::default()).unwrap();
    let err = engine.warm_start(&out.best.unwrap().roster).unwrap_err();
    assert!(matches!(err, SearchError::Config(_)), "{err:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn incumbents_strictly_improve_and_match_evaluation(inst_seed in 0u64..1000, run_seed in 0u64..1000) {
        let inst = generate(&GeneratorConfig::tiny(3, 5, inst_seed)).unwrap();
        let (trace, out) = solve_collect(&inst, &config(run_seed, 0.5), &CellDirectives::default()).unwrap();
        prop_assert!(!trace.is_empty());
        for (k, i) in trace.iter().enumerate() {
            prop_assert_eq!(i.sequence, k as u64 + 1);
            prop_assert_eq!(&evaluate(&i.roster, &inst, true).penalties, &i.penalties);
        }
        for w in trace.windows(2) {
            prop_assert!(w[1].key < w[0].key);
            prop_assert!(w[1].wall_time_seconds >= w[0].wall_time_seconds);
        }
        prop_assert_eq!(&out.best.unwrap().roster, &trace.last().unwrap().roster);
    }
}
