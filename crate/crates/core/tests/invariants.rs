//! Property tests for the structural invariants of the models and observables.

use lohe_core::config::{parse_config, serialize_config};
use lohe_core::init::{
    clustered_ensemble, random_ensemble, random_generators, random_unitary_ensemble, ClusterTarget,
    GeneratorRecipe,
};
use lohe_core::integrate::{integrate, IntegratorConfig};
use lohe_core::linalg::{dense, inner, ComplexTensor, SkewHermitianGenerator, TensorShape};
use lohe_core::models::{
    build_phase_model, lhs_rhs, lohe_tensor_rhs, CouplingVector, EnsembleState, Model,
};
use lohe_core::observe::{
    diam_corr, diam_euclid, lyapunov, observe_state, order_parameter, potential_gradient,
    GapMatrix, ObservableRecord,
};
use lohe_core::output::{read_records, write_records};
use lohe_core::verify::{reference_config, TheoremId};
use num_complex::Complex64;
use proptest::prelude::*;

fn generators(n: usize, shape: &TensorShape, seed: u64) -> Vec<SkewHermitianGenerator> {
    random_generators(
        n,
        shape,
        GeneratorRecipe {
            scale: 1.0,
            homogeneous: false,
            diameter: None,
            real: false,
        },
        seed,
    )
    .unwrap()
}

/// `max_j |Re <T_j, F_j>|`: zero when the field is tangent to every sphere.
fn radial_part(state: &EnsembleState, field: &[ComplexTensor]) -> f64 {
    field
        .iter()
        .enumerate()
        .map(|(j, f)| inner(state.member(j), f.entries()).re.abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn observables_respect_their_bounds(seed: u64, n in 2usize..9, d in 1usize..5, real: bool) {
        let s = random_ensemble(n, &TensorShape::vector(d).unwrap(), real, seed).unwrap();
        let rho = order_parameter(&s);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&rho));
        let (dc, de) = (diam_corr(&s), diam_euclid(&s));
        prop_assert!((dc * dc - lyapunov(&s)).abs() <= 1e-12);
        prop_assert!(de * de <= 2.0 * dc * (1.0 + 1e-12));
    }

    #[test]
    fn observables_are_unitarily_invariant(seed: u64, n in 2usize..7, d in 1usize..5) {
        let s = random_ensemble(n, &TensorShape::vector(d).unwrap(), false, seed).unwrap();
        let u = random_unitary_ensemble(1, d, seed ^ 0x5a5a).unwrap();
        let moved = EnsembleState::new(
            s.members
                .iter()
                .map(|m| ComplexTensor::vector(dense::matvec(u.member(0), m.entries())))
                .collect(),
        )
        .unwrap();
        prop_assert!((order_parameter(&s) - order_parameter(&moved)).abs() <= 1e-12);
        prop_assert!((diam_corr(&s) - diam_corr(&moved)).abs() <= 1e-12);
        prop_assert!((diam_euclid(&s) - diam_euclid(&moved)).abs() <= 1e-12);
    }

    #[test]
    fn stable_gaps_match_direct_subtraction(seed: u64, n in 2usize..7, d in 1usize..5) {
        let s = random_ensemble(n, &TensorShape::vector(d).unwrap(), false, seed).unwrap();
        let g = GapMatrix::new(&s);
        for i in 0..n {
            for j in 0..n {
                let direct = Complex64::new(1.0, 0.0) - inner(s.member(i), s.member(j));
                prop_assert!((g.get(i, j) - direct).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn tensor_field_is_tangent(seed: u64, n in 2usize..6, k in proptest::collection::vec(0.0f64..2.0, 4)) {
        let shape = TensorShape::matrix(2, 2).unwrap();
        let s = random_ensemble(n, &shape, false, seed).unwrap();
        let gens = generators(n, &shape, seed.wrapping_add(1));
        let kv = CouplingVector::new(2, k).unwrap();
        let field = lohe_tensor_rhs(&s, &gens, &kv).unwrap();
        prop_assert!(radial_part(&s, &field) <= 1e-12);
    }

    #[test]
    fn lhs_field_is_tangent(seed: u64, n in 2usize..8, d in 1usize..5, k0 in -1.0f64..2.0, k1 in -1.0f64..2.0) {
        let shape = TensorShape::vector(d).unwrap();
        let s = random_ensemble(n, &shape, false, seed).unwrap();
        let field = lhs_rhs(&s, &generators(n, &shape, seed.wrapping_add(1)), k0, k1).unwrap();
        prop_assert!(radial_part(&s, &field) <= 1e-12);
    }

    #[test]
    fn phase_flow_is_a_zero_sum_gradient_flow(seed: u64, n in 2usize..10, k1 in 0.1f64..3.0) {
        let s = random_ensemble(n, &TensorShape::vector(3).unwrap(), false, seed).unwrap();
        let model = build_phase_model(&s, k1).unwrap();
        for j in 0..n {
            for k in 0..n {
                prop_assert_eq!(model.amplitude(j, k), model.amplitude(k, j));
                prop_assert_eq!(model.frustration(j, k), -model.frustration(k, j));
            }
        }
        let theta: Vec<f64> = (0..n).map(|j| (j as f64 * 1.7 + seed as f64 * 1e-19).sin()).collect();
        let m = model.with_theta(theta.clone());
        let flow = m.frequencies(&theta);
        let grad = potential_gradient(&m);
        prop_assert!(flow.iter().sum::<f64>().abs() <= 1e-12);
        for (a, b) in flow.iter().zip(&grad) {
            prop_assert!((a + b).abs() <= 1e-15 * n as f64);
        }
    }

    #[test]
    fn short_runs_conserve_norms(seed: u64, n in 2usize..6, d in 1usize..4) {
        let shape = TensorShape::vector(d).unwrap();
        let s = random_ensemble(n, &shape, false, seed).unwrap();
        let model = Model::LoheHermitianSphere {
            omegas: generators(n, &shape, seed.wrapping_add(2)),
            kappa0: 1.0,
            kappa1: 0.3,
        };
        let traj = integrate(&model, &s, &IntegratorConfig::rk4(1e-3, 1.0, 0.1)).map_err(|f| f.error).unwrap();
        prop_assert!(traj.max_norm_drift() <= 1e-8);
    }

    #[test]
    fn subsystem_a_keeps_cross_ratios(seed: u64) {
        let s = random_ensemble(4, &TensorShape::vector(2).unwrap(), false, seed).unwrap();
        let model = Model::SubsystemA { kappa0: 1.0 };
        let traj = integrate(&model, &s, &IntegratorConfig::rk4(1e-3, 1.0, 0.5)).map_err(|f| f.error).unwrap();
        let c = |s: &EnsembleState| GapMatrix::new(s).cross_ratio(0, 1, 2, 3);
        if let Ok(c0) = c(&s) {
            // Conditioning degrades as the denominator gaps shrink.
            prop_assume!(c0.norm() < 1e3);
            for state in &traj.states {
                prop_assert!((c(state).unwrap() - c0).norm() <= 1e-8 * (1.0 + c0.norm()));
            }
        }
    }

    #[test]
    fn clustered_data_hits_its_target(seed: u64, target in 0.05f64..0.6) {
        let s = clustered_ensemble(8, &TensorShape::vector(3).unwrap(), false, ClusterTarget::Lambda(target), seed).unwrap();
        prop_assert!((diam_corr(&s) - target).abs() <= 0.01);
        prop_assert!(s.max_norm_defect() <= 1e-12);
    }

    #[test]
    fn seeded_ensembles_are_reproducible(seed: u64, n in 1usize..9) {
        let shape = TensorShape::matrix(2, 2).unwrap();
        prop_assert_eq!(random_ensemble(n, &shape, false, seed).unwrap(), random_ensemble(n, &shape, false, seed).unwrap());
    }

    #[test]
    fn csv_round_trip_is_lossless(
        rows in proptest::collection::vec(proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 8), 1..6),
        with_potential: bool,
    ) {
        let tuples = [[0usize, 1, 2, 3]];
        let records: Vec<ObservableRecord> = rows
            .iter()
            .map(|r| ObservableRecord {
                t: r[0],
                rho: r[1],
                diam_euclid: r[2],
                diam_corr: r[3],
                lyapunov: r[4],
                potential: with_potential.then_some(r[5]),
                norm_drift: r[6],
                cross_ratios: vec![Complex64::new(r[7], -r[0])],
            })
            .collect();
        let mut buf = Vec::new();
        write_records(&mut buf, &records, &tuples).unwrap();
        let (back, back_tuples) = read_records(buf.as_slice()).unwrap();
        prop_assert_eq!(back, records);
        prop_assert_eq!(back_tuples.as_slice(), &tuples[..]);
    }

    #[test]
    fn configs_round_trip(index in 0usize..TheoremId::ALL.len(), seed: u64) {
        let mut c = reference_config(TheoremId::ALL[index]);
        c.seed = seed;
        let back = parse_config(&serialize_config(&c)).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn observed_records_satisfy_invariants() {
    let s = random_ensemble(6, &TensorShape::vector(3).unwrap(), false, 3).unwrap();
    let r = observe_state(&s, 0.0, 0.0, &[[0, 1, 2, 3]], None);
    assert!((r.diam_corr * r.diam_corr - r.lyapunov).abs() <= 1e-12);
    assert!(r.diam_euclid.powi(2) <= 2.0 * r.diam_corr * (1.0 + 1e-12));
}
