//! Results are bitwise identical regardless of the worker-pool size.

use lohe_core::config::InitialSpec;
use lohe_core::init::{random_ensemble, random_generators, GeneratorRecipe};
use lohe_core::linalg::TensorShape;
use lohe_core::simulate::run_simulation;
use lohe_core::verify::{reference_config, run_scenario, run_scenarios, ScenarioSpec, TheoremId};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn spec(theorem: TheoremId) -> ScenarioSpec {
    ScenarioSpec {
        theorem,
        config: reference_config(theorem),
    }
}

#[test]
fn initial_data_ignores_thread_count() {
    let shape = TensorShape::matrix(2, 2).unwrap();
    let draw = || {
        let recipe = GeneratorRecipe {
            scale: 0.5,
            homogeneous: false,
            diameter: Some(0.1),
            real: false,
        };
        (
            random_ensemble(16, &shape, false, 99).unwrap(),
            random_generators(16, &shape, recipe, 99).unwrap(),
        )
    };
    assert_eq!(in_pool(1, draw), in_pool(4, draw));
}

#[test]
fn reports_ignore_thread_count() {
    for theorem in [TheoremId::T21b, TheoremId::T42] {
        let one = in_pool(1, || run_scenario(&spec(theorem)).unwrap());
        let four = in_pool(4, || run_scenario(&spec(theorem)).unwrap());
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&four).unwrap(),
            "{theorem}"
        );
    }
}

#[test]
fn batched_scenarios_match_serial_runs() {
    let specs: Vec<ScenarioSpec> = [TheoremId::P21, TheoremId::L41, TheoremId::R42]
        .into_iter()
        .map(spec)
        .collect();
    let batch = in_pool(4, || run_scenarios(&specs));
    for (s, b) in specs.iter().zip(batch) {
        assert_eq!(b.unwrap(), run_scenario(s).unwrap());
    }
}

#[test]
fn trajectories_are_reproducible() {
    let mut config = reference_config(TheoremId::T41);
    config.initial = InitialSpec::Random { real: false };
    let a = in_pool(1, || run_simulation(&config).unwrap().records);
    let b = in_pool(4, || run_simulation(&config).unwrap().records);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(format!("{x:?}"), format!("{y:?}"));
    }
}
