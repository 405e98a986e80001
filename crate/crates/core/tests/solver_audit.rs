//! End-to-end checks of the search: trace invariants, exploration orders,
//! and the time limit.

use l0bnb::datagen::{generate, GenSpec, Setup};
use l0bnb::model::l0_count;
use l0bnb::oracle::{exhaustive_solve, OracleConfig};
use l0bnb::{solve, solve_with_trace, Exploration, NodeOutcome, NodeTrace, SolverConfig};

fn traced(spec: &GenSpec, config: &SolverConfig) -> (f64, Vec<NodeTrace>) {
    let g = generate(spec).unwrap();
    let mut trace = Vec::new();
    let (solution, stats) = solve_with_trace(&g.instance, config, &mut |t| trace.push(t.clone())).unwrap();
    assert!(solution.optimal && !stats.timed_out);
    assert!(solution.x.iter().all(|v| v.abs() <= g.instance.big_m()));
    let recomputed = g.instance.full_objective(&solution.x).unwrap();
    assert!((recomputed - solution.objective).abs() <= 1e-9);
    (solution.objective, trace)
}

#[test]
fn trace_invariants() {
    for setup in [Setup::Gaussian, Setup::Toeplitz] {
        for seed in 0..6 {
            let spec = GenSpec::new(setup, 30, 14, 3, seed);
            for screening_enabled in [false, true] {
                let config = SolverConfig {
                    screening_enabled,
                    ..SolverConfig::default()
                };
                let (best, trace) = traced(&spec, &config);
                assert!(!trace.is_empty());
                let mut previous = f64::INFINITY;
                for t in &trace {
                    assert!(t.incumbent <= previous, "incumbent went up at node {}", t.id);
                    previous = t.incumbent;
                    match t.outcome {
                        // A pruned node's bound certifies its whole subtree.
                        NodeOutcome::Pruned => assert!(t.dual_bound >= best - 1e-6),
                        NodeOutcome::Branched(_) => assert!(t.dual_bound < t.incumbent),
                        NodeOutcome::Abandoned => panic!("abandoned node without a time limit"),
                        _ => {}
                    }
                    if !screening_enabled {
                        assert_eq!(t.fixed_to_zero + t.fixed_to_one, 0);
                        assert_ne!(t.outcome, NodeOutcome::ScreenedOut);
                    }
                }
                assert_eq!(previous, best);
            }
        }
    }
}

#[test]
fn exploration_orders_agree_with_oracle() {
    for seed in 0..5 {
        let g = generate(&GenSpec::new(Setup::Toeplitz, 25, 12, 2, 100 + seed)).unwrap();
        let (_, oracle) = exhaustive_solve(&g.instance, &OracleConfig::default()).unwrap();
        for exploration in [Exploration::DepthFirst, Exploration::BestBound] {
            let config = SolverConfig {
                exploration,
                ..SolverConfig::default()
            };
            let (solution, _) = solve(&g.instance, &config).unwrap();
            assert!((solution.objective - oracle).abs() <= 1e-6);
        }
    }
}

#[test]
fn time_limit_returns_incumbent() {
    let g = generate(&GenSpec::new(Setup::Gaussian, 100, 200, 5, 0)).unwrap();
    let config = SolverConfig {
        time_limit_seconds: 0.2,
        ..SolverConfig::default()
    };
    let (solution, stats) = solve(&g.instance, &config).unwrap();
    assert!(stats.timed_out && !solution.optimal);
    assert!(solution.objective.is_finite());
    assert!(stats.wall_time_seconds < 5.0);
    let value = g.instance.full_objective(&solution.x).unwrap();
    assert!((value - solution.objective).abs() <= 1e-9);
    assert!(l0_count(&solution.x) <= 200);
}
