use std::collections::HashSet;

use bananas::acquisition::{AcqContext, AcqKind};
use bananas::benchmark::BenchmarkOracle;
use bananas::predictor::PredictorConfig;
use bananas::search::{Algorithm, Objective, SearchConfig};
use bananas::space::{canonical_hash, is_valid, Cell, SpaceParams};
use bananas::Exec;

fn small_cfg() -> SearchConfig {
    SearchConfig {
        t0: 8,
        budget: 40,
        candidates: 30,
        n_mutate: 5,
        batch: 8,
        predictor: PredictorConfig {
            n_layers: 3,
            width: 16,
            epochs: 40,
            ..PredictorConfig::default()
        },
        population: 12,
        tournament: 4,
        ..SearchConfig::default()
    }
}

#[test]
fn every_algorithm_respects_budget_and_space() {
    let space = SpaceParams::default();
    let oracle = BenchmarkOracle::synthetic(&space, 3).unwrap();
    let cfg = small_cfg();
    for alg in Algorithm::ALL {
        let o = oracle.clone().with_cap(cfg.budget);
        let rec = alg.run(&o, &cfg, 21).unwrap();
        assert_eq!(rec.len(), cfg.budget, "{alg}");
        assert_eq!(o.query_count(), cfg.budget, "{alg}");
        assert_eq!(rec.algorithm, alg.name());
        let best = rec.best_so_far();
        assert!(best.windows(2).all(|w| w[1] <= w[0]), "{alg}");
        for (i, q) in rec.queries.iter().enumerate() {
            assert_eq!(q.index, i + 1);
            let cell = Cell::parse(&q.cell, &space).unwrap();
            assert!(is_valid(&cell, &space));
            assert_eq!(q.observed, q.validation_error);
            assert_eq!(oracle.metrics(&cell).unwrap().test_error, q.test_error);
        }
    }
}

#[test]
fn model_based_searches_never_repeat_an_isomorphism_class() {
    let space = SpaceParams::default();
    let oracle = BenchmarkOracle::synthetic(&space, 4).unwrap();
    let cfg = small_cfg();
    for alg in [
        Algorithm::Bananas,
        Algorithm::GpPath,
        Algorithm::GpAdjacency,
        Algorithm::BananasRandomCandidates,
        Algorithm::BananasContinuous,
    ] {
        let rec = alg.run(&oracle, &cfg, 2).unwrap();
        let mut seen = HashSet::new();
        for q in &rec.queries {
            assert!(seen.insert(canonical_hash(&Cell::parse(&q.cell, &space).unwrap())), "{alg} repeated {}", q.cell);
        }
    }
}

#[test]
fn execution_mode_does_not_change_results() {
    let space = SpaceParams::default();
    let oracle = BenchmarkOracle::synthetic(&space, 5).unwrap();
    for alg in [Algorithm::Bananas, Algorithm::GpPath] {
        let seq = SearchConfig {
            exec: Exec::Sequential,
            ..small_cfg()
        };
        let par = SearchConfig {
            exec: Exec::Parallel,
            ..small_cfg()
        };
        assert_eq!(alg.run(&oracle, &seq, 8).unwrap(), alg.run(&oracle, &par, 8).unwrap());
    }
}

#[test]
fn different_seeds_differ() {
    let space = SpaceParams::default();
    let oracle = BenchmarkOracle::synthetic(&space, 5).unwrap();
    let a = Algorithm::Bananas.run(&oracle, &small_cfg(), 1).unwrap();
    let b = Algorithm::Bananas.run(&oracle, &small_cfg(), 2).unwrap();
    assert_ne!(a.fingerprint(), b.fingerprint());
}

#[test]
fn every_acquisition_runs() {
    let space = SpaceParams::default();
    let oracle = BenchmarkOracle::synthetic(&space, 6).unwrap();
    for kind in [AcqKind::Its, AcqKind::Ts, AcqKind::Ucb, AcqKind::Ei, AcqKind::Pi] {
        let cfg = SearchConfig {
            acquisition: AcqContext::new(kind),
            ..small_cfg()
        };
        let rec = Algorithm::Bananas.run(&oracle, &cfg, 3).unwrap();
        assert_eq!(rec.len(), cfg.budget, "{kind}");
    }
}

#[test]
fn dual_objective_is_what_the_search_sees() {
    let space = SpaceParams::default();
    let oracle = BenchmarkOracle::synthetic(&space, 7).unwrap();
    let cfg = SearchConfig {
        objective: Objective::Dual(Default::default()),
        ..small_cfg()
    };
    for alg in [Algorithm::Bananas, Algorithm::Random, Algorithm::Evolution] {
        let rec = alg.run(&oracle, &cfg, 4).unwrap();
        for q in &rec.queries {
            let p = q.n_params.unwrap();
            let expected = (100.0 * q.validation_error - 4.8) * p.sqrt();
            assert!((q.observed - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }
}
