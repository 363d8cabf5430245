//! Desk-scale acceptance run: every criterion checked at its stated tolerance, one
//! PASS/FAIL line each. Thresholds are written out here rather than read from the
//! library defaults, and most criteria carry an oracle computed independently in this file.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use lohe_core::config::{serialize_config, GeneratorSpec, InitialSpec, SimConfig};
use lohe_core::init::perturbed;
use lohe_core::integrate::{integrate, Renormalize, Trajectory};
use lohe_core::linalg::{ComplexTensor, SkewHermitianGenerator, TensorShape};
use lohe_core::models::{build_phase_model, lhs_rhs, EnsembleState, ModelKind};
use lohe_core::observe::{potential_gradient, rho_squared_rate};
use lohe_core::verify::{
    reference_config, reference_tensor_norm_config, run_scenario, ScenarioSpec, TheoremId, Verdict,
    VerificationReport,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn scenario(theorem: TheoremId, config: SimConfig) -> VerificationReport {
    run_scenario(&ScenarioSpec { theorem, config }).expect("scenario runs")
}

fn reference(theorem: TheoremId) -> VerificationReport {
    scenario(theorem, reference_config(theorem))
}

fn trajectory(config: &SimConfig) -> Trajectory<EnsembleState> {
    let model = config.build_model().unwrap();
    let initial = config.build_initial().unwrap();
    integrate(&model, &initial, &config.integrator)
        .map_err(|f| f.error)
        .unwrap()
}

fn check_value(r: &VerificationReport, name: &str) -> f64 {
    r.check(name)
        .unwrap_or_else(|| panic!("report has no check `{name}`"))
        .value
}

fn measured(r: &VerificationReport, name: &str) -> f64 {
    *r.measured
        .get(name)
        .unwrap_or_else(|| panic!("report has no measurement `{name}`"))
}

// ---- independent helpers: plain complex vectors, no library observables ----

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn centroid(s: &EnsembleState) -> Vec<Complex64> {
    let n = s.len() as f64;
    let d = s.member(0).len();
    (0..d)
        .map(|k| s.members.iter().map(|m| m.entries()[k]).sum::<Complex64>() / n)
        .collect()
}

fn naive_gap(s: &EnsembleState, i: usize, j: usize) -> Complex64 {
    Complex64::new(1.0, 0.0) - dot(s.member(i), s.member(j))
}

fn naive_lambda(s: &EnsembleState) -> f64 {
    let n = s.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                best = best.max(naive_gap(s, i, j).norm());
            }
        }
    }
    best
}

/// Least-squares slope of `-ln y` against `t` over the trailing `fraction` of samples.
fn fitted_rate(t: &[f64], y: &[f64], fraction: f64) -> f64 {
    let start = t[t.len() - 1] * (1.0 - fraction);
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, _)| **t >= start)
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    let m = pts.len() as f64;
    let (mt, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / m,
        pts.iter().map(|p| p.1).sum::<f64>() / m,
    );
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    -sty / stt
}

fn p_distance(a: &EnsembleState, b: &EnsembleState, p: f64) -> f64 {
    a.members
        .iter()
        .zip(&b.members)
        .map(|(x, y)| {
            let d: Vec<Complex64> = x.entries().iter().zip(y.entries()).map(|(u, v)| u - v).collect();
            norm(&d).powf(p)
        })
        .sum::<f64>()
        .powf(1.0 / p)
}

fn all(checks: &[(bool, String)]) -> Outcome {
    let passed = checks.iter().all(|c| c.0);
    let detail = checks
        .iter()
        .map(|c| format!("{}{}", if c.0 { "" } else { "!" }, c.1))
        .collect::<Vec<_>>()
        .join("; ");
    (passed, detail)
}

fn at_most(label: &str, value: f64, limit: f64) -> (bool, String) {
    (value <= limit, format!("{label} {value:.3e} <= {limit:.0e}"))
}

// ---- criteria ----

fn norm_conservation() -> Outcome {
    let mut checks = Vec::new();
    let lhs = reference_config(TheoremId::L21);
    assert_eq!((lhs.model, lhs.n, lhs.shape.as_slice()), (ModelKind::LoheHermitianSphere, 8, &[3][..]));
    assert_eq!((lhs.couplings.kappa0, lhs.couplings.kappa1), (Some(1.0), Some(0.2)));
    assert!(matches!(lhs.generators, GeneratorSpec::RandomSkewHermitian { homogeneous: false, .. }));
    let tensor = reference_tensor_norm_config();
    assert_eq!(tensor.shape.len(), 2);
    for (label, config) in [("lhs", lhs), ("rank-2", tensor)] {
        assert_eq!(config.integrator.t_end, 20.0);
        assert_eq!(config.integrator.renormalize, Renormalize::Off);
        let traj = trajectory(&config);
        let drift = traj
            .states
            .iter()
            .flat_map(|s| s.members.iter().map(|m| (norm(m.entries()) - 1.0).abs()))
            .fold(0.0, f64::max);
        checks.push(at_most(label, drift, 1e-8));
        let r = scenario(TheoremId::L21, config);
        checks.push((r.verdict == Verdict::Pass, format!("{label} verdict {:?}", r.verdict)));
    }
    all(&checks)
}

fn cross_ratio_conservation() -> Outcome {
    let config = reference_config(TheoremId::P31);
    assert_eq!((config.model, config.n, config.shape.as_slice()), (ModelKind::SubsystemA, 5, &[2][..]));
    assert_eq!(config.integrator.t_end, 10.0);
    let r = scenario(TheoremId::P31, config.clone());
    // Oracle: initial cross ratios from raw inner products agree with the library's.
    let s = config.build_initial().unwrap();
    let g = lohe_core::observe::GapMatrix::new(&s);
    let mut oracle = 0.0f64;
    for (i, j, k, l) in [(0, 1, 2, 3), (4, 2, 0, 1), (3, 0, 4, 2)] {
        let c = naive_gap(&s, i, j) * naive_gap(&s, k, l) / (naive_gap(&s, i, l) * naive_gap(&s, k, j));
        oracle = oracle.max((c - g.cross_ratio(i, j, k, l).unwrap()).norm());
    }
    all(&[
        at_most("max |C(t) - C(0)|", check_value(&r, "cross_ratio_drift"), 1e-6),
        (measured(&r, "tuples_checked") == 120.0, format!("{} tuples", measured(&r, "tuples_checked"))),
        at_most("initial oracle", oracle, 1e-12),
    ])
}

fn correlation_decay_rate() -> Outcome {
    let config = reference_config(TheoremId::T31);
    assert_eq!(config.couplings.kappa0, Some(1.0));
    let traj = trajectory(&config);
    let s0 = &traj.states[0];
    let lambda0 = naive_lambda(s0);
    let n = s0.len();
    let mut excess = 0.0f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let bound = naive_gap(s0, i, j).norm() * (-0.4 * t).exp();
                    excess = excess.max(naive_gap(s, i, j).norm() / bound - 1.0);
                }
            }
        }
    }
    let lambdas: Vec<f64> = traj.states.iter().map(naive_lambda).collect();
    let rate = fitted_rate(&traj.times, &lambdas, 0.6);
    let r = scenario(TheoremId::T31, config);
    all(&[
        ((lambda0 - 0.3).abs() <= 0.01, format!("lambda(0) {lambda0:.6}")),
        at_most("pointwise excess", excess, 1e-3),
        (rate >= 0.4, format!("fitted rate {rate:.4} >= 0.4")),
        (check_value(&r, "fitted_rate") >= 0.4, format!("reported rate {:.4}", check_value(&r, "fitted_rate"))),
        (r.verdict == Verdict::Pass, format!("verdict {:?}", r.verdict)),
    ])
}

fn kuramoto_equivalence() -> Outcome {
    let config = reference_config(TheoremId::T32);
    assert_eq!((config.model, config.n, config.shape.as_slice()), (ModelKind::SubsystemB, 6, &[2][..]));
    assert_eq!((config.couplings.kappa1, config.integrator.t_end), (Some(1.0), 10.0));
    let traj = trajectory(&config);
    let init = &traj.states[0];
    let n = init.len();
    let kappa1 = 1.0;
    // Oracle: RK4 on theta_j' = 2 k1 Im(e^{-i theta_j} (1/N) sum_k e^{i theta_k} <z_j, z_k>).
    let h: Vec<Vec<Complex64>> = (0..n)
        .map(|j| (0..n).map(|k| dot(init.member(j), init.member(k))).collect())
        .collect();
    let field = |th: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let s: Complex64 = (0..n).map(|k| Complex64::from_polar(1.0, th[k]) * h[j][k]).sum();
                2.0 * kappa1 * (Complex64::from_polar(1.0, -th[j]) * s / n as f64).im
            })
            .collect()
    };
    let dt = 1e-3;
    let mut theta = vec![0.0; n];
    let mut residual = 0.0f64;
    let steps_per_sample = 1;
    for (s, state) in traj.states.iter().enumerate() {
        if s > 0 {
            for _ in 0..steps_per_sample {
                let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
                let k1 = field(&theta);
                let k2 = field(&add(&theta, &k1, dt / 2.0));
                let k3 = field(&add(&theta, &k2, dt / 2.0));
                let k4 = field(&add(&theta, &k3, dt));
                for j in 0..n {
                    theta[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
        }
        for j in 0..n {
            let rot = Complex64::from_polar(1.0, theta[j]);
            let d: Vec<Complex64> = state.member(j).iter().zip(init.member(j)).map(|(z, w)| z - rot * w).collect();
            residual = residual.max(norm(&d));
        }
    }
    let r = scenario(TheoremId::T32, config);
    all(&[
        at_most("oracle residual", residual, 1e-6),
        at_most("reported residual", check_value(&r, "equivalence"), 1e-6),
    ])
}

fn gradient_flow() -> Outcome {
    let config = reference_config(TheoremId::L32);
    let n = config.n as f64;
    let r = reference(TheoremId::L32);
    // Oracle: V = -k1 N rho^2 + (k1/N) sum R, rho from the rotated members directly.
    let init = config.build_initial().unwrap();
    let model = build_phase_model(&init, 1.0).unwrap();
    let r_sum: f64 = model.amplitudes.iter().sum();
    let v = |th: &[f64]| -> f64 {
        let rotated: Vec<ComplexTensor> = init
            .members
            .iter()
            .zip(th)
            .map(|(m, t)| m.scaled(Complex64::from_polar(1.0, *t)))
            .collect();
        let s = EnsembleState::new(rotated).unwrap();
        let rho2 = norm(&centroid(&s)).powi(2);
        -model.kappa1 * n * rho2 + model.kappa1 / n * r_sum
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut fd_err = 0.0f64;
    for _ in 0..5 {
        let th: Vec<f64> = (0..config.n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let grad = potential_gradient(&model.with_theta(th.clone()));
        for k in 0..config.n {
            let (mut p, mut m) = (th.clone(), th.clone());
            p[k] += 1e-6;
            m[k] -= 1e-6;
            fd_err = fd_err.max(((v(&p) - v(&m)) / 2e-6 - grad[k]).abs());
        }
    }
    all(&[
        at_most("oracle FD gradient", fd_err, 1e-6),
        at_most("FD gradient", check_value(&r, "gradient_finite_difference"), 1e-6),
        at_most("flow residual", check_value(&r, "gradient_flow_residual"), 1e-15 * n),
        at_most("phase sum", check_value(&r, "phase_sum"), 1e-8),
        at_most("V increase", check_value(&r, "potential_non_increasing"), 1e-9),
    ])
}

fn order_parameter_identity() -> Outcome {
    let config = reference_config(TheoremId::L41);
    assert_eq!(config.model, ModelKind::LoheHermitianSphere);
    let (k0, k1) = (config.couplings.kappa0.unwrap(), config.couplings.kappa1.unwrap());
    let traj = trajectory(&config);
    let rho: Vec<f64> = traj.states.iter().map(|s| norm(&centroid(s))).collect();
    let drop = rho.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    // Oracle: d(rho^2)/dt = 2 Re <z_c, z_c'> with z_c' the mean of the vector field.
    let zero = vec![SkewHermitianGenerator::zero(TensorShape::vector(3).unwrap()); config.n];
    let mut exact = 0.0f64;
    for s in traj.states.iter().step_by(200) {
        let field = lhs_rhs(s, &zero, k0, k1).unwrap();
        let zc = centroid(s);
        let dzc: Vec<Complex64> = (0..zc.len())
            .map(|k| field.iter().map(|f| f.entries()[k]).sum::<Complex64>() / s.len() as f64)
            .collect();
        exact = exact.max((2.0 * dot(&zc, &dzc).re - rho_squared_rate(s, k0, k1)).abs());
    }
    let r = scenario(TheoremId::L41, config);
    all(&[
        at_most("rho drop", drop, 1e-9),
        at_most("closed form vs exact", exact, 1e-12),
        at_most("sampled derivative", check_value(&r, "rho_derivative_identity"), 1e-5),
    ])
}

fn lyapunov_decay() -> Outcome {
    let config = reference_config(TheoremId::T41);
    assert_eq!((config.n, config.shape.as_slice()), (4, &[2][..]));
    assert_eq!((config.couplings.kappa0, config.couplings.kappa1), (Some(1.0), Some(0.125)));
    let traj = trajectory(&config);
    let rho_in = norm(&centroid(&traj.states[0]));
    let end = naive_lambda(traj.last()).powi(2);
    let r = scenario(TheoremId::T41, config.clone());

    let mut violating = config;
    violating.couplings.kappa1 = Some(1.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("violating.json");
    std::fs::write(&path, serialize_config(&violating)).unwrap();
    let code = lohe_lab::run_cli([
        "lohe-lab",
        "verify",
        "--theorem",
        "T4.1",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    all(&[
        ((rho_in - 0.9).abs() <= 0.01, format!("rho_in {rho_in:.4}")),
        at_most("oracle endpoint", end, 1e-8),
        at_most("reported endpoint", check_value(&r, "lyapunov_endpoint"), 1e-8),
        (check_value(&r, "fitted_rate") > 0.0, format!("rate {:.3} > 0", check_value(&r, "fitted_rate"))),
        (code == 3, format!("kappa1 = kappa0 exits {code}")),
    ])
}

fn lp_stability() -> Outcome {
    let config = reference_config(TheoremId::T42);
    let r = scenario(TheoremId::T42, config.clone());
    let mut checks = vec![(r.verdict == Verdict::Pass, format!("verdict {:?}", r.verdict))];
    for p in [1.0, 2.0, 3.0] {
        let g: Vec<f64> = [1e-4, 1e-5, 1e-6]
            .iter()
            .map(|d: &f64| measured(&r, &format!("G_p{p}_delta{d:e}")))
            .collect();
        let (lo, hi) = (g.iter().copied().fold(f64::INFINITY, f64::min), g.iter().copied().fold(0.0, f64::max));
        checks.push((hi.is_finite() && (hi - lo) / lo < 0.2, format!("p={p} G in [{lo:.4}, {hi:.4}]")));
    }
    // Oracle: G for p = 2, delta = 1e-5 from two independent runs.
    let model = config.build_model().unwrap();
    let a0 = config.build_initial().unwrap();
    let b0 = perturbed(&a0, 1e-5, config.seed).unwrap();
    let a = integrate(&model, &a0, &config.integrator).map_err(|f| f.error).unwrap();
    let b = integrate(&model, &b0, &config.integrator).map_err(|f| f.error).unwrap();
    let g = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| p_distance(x, y, 2.0))
        .fold(0.0, f64::max)
        / p_distance(&a0, &b0, 2.0);
    let reported = measured(&r, "G_p2_delta1e-5");
    checks.push(at_most("oracle G mismatch", ((g - reported) / g).abs(), 1e-9));
    all(&checks)
}

fn frequency_splitting() -> Outcome {
    let config = reference_config(TheoremId::P21);
    assert_eq!((config.shape.as_slice(), config.integrator.t_end), (&[2][..], 5.0));
    let with = trajectory(&config);
    let mut free = config.clone();
    free.generators = GeneratorSpec::Zero;
    let without = trajectory(&free);
    // Oracle: Omega = [[0, 1], [-1, 0]] squares to -I, so e^{Omega t} = cos t I + sin t Omega.
    let mut residual = 0.0f64;
    for ((t, z), w) in with.times.iter().zip(&with.states).zip(&without.states) {
        let (c, s) = (t.cos(), t.sin());
        for j in 0..z.len() {
            let wj = w.member(j);
            let rotated = [c * wj[0] + s * wj[1], -s * wj[0] + c * wj[1]];
            let d: Vec<Complex64> = z.member(j).iter().zip(&rotated).map(|(a, b)| a - b).collect();
            residual = residual.max(norm(&d));
        }
    }
    let r = scenario(TheoremId::P21, config);
    all(&[
        at_most("oracle splitting", residual, 1e-6),
        at_most("reported splitting", check_value(&r, "splitting"), 1e-6),
    ])
}

fn complete_aggregation_envelopes() -> Outcome {
    let config = reference_config(TheoremId::T21a);
    assert_eq!((config.n, config.shape.as_slice()), (4, &[2, 2][..]));
    let kv = config.couplings.strengths.clone().unwrap();
    let (k0, kh) = (kv[0], kv[1..].iter().sum::<f64>());
    assert_eq!(k0, 1.0);
    assert!((kh - 0.03).abs() < 1e-15);
    assert!(matches!(config.generators, GeneratorSpec::Zero));
    let traj = trajectory(&config);
    let tc2 = norm(&centroid(&traj.states[0])).powi(2);
    let (lo, hi) = (k0 - 4.0 * kh * tc2, k0 + 4.0 * kh * tc2);
    let diam: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            let mut best = 0.0f64;
            for i in 0..s.len() {
                for j in 0..s.len() {
                    let d: Vec<Complex64> = s.member(i).iter().zip(s.member(j)).map(|(a, b)| a - b).collect();
                    best = best.max(norm(&d));
                }
            }
            best
        })
        .collect();
    let rate = fitted_rate(&traj.times, &diam, 0.6);
    let r = scenario(TheoremId::T21a, config);
    let reported = check_value(&r, "rate_above_lower");
    all(&[
        (r.verdict != Verdict::HypothesisNotMet, "gates hold".into()),
        (lo <= rate && rate <= hi, format!("fitted rate {rate:.4} in [{lo:.4}, {hi:.4}]")),
        (lo <= reported && reported <= hi, format!("reported rate {reported:.4}")),
        (r.verdict == Verdict::Pass, format!("verdict {:?}", r.verdict)),
    ])
}

fn practical_aggregation() -> Outcome {
    let config = reference_config(TheoremId::T21b);
    assert!(matches!(config.initial, InitialSpec::Clustered { .. }));
    let r = scenario(TheoremId::T21b, config);
    let d: Vec<f64> = ["1e-1", "1e-2", "1e-3"]
        .iter()
        .map(|k| measured(&r, &format!("terminal_diameter_ratio{k}")))
        .collect();
    all(&[
        (r.verdict != Verdict::HypothesisNotMet, "gates hold".into()),
        (d[0] > d[1] && d[1] > d[2], format!("terminal D {:.3e} > {:.3e} > {:.3e}", d[0], d[1], d[2])),
    ])
}

/// Direct transcription of the LHS vector field with zero frequencies.
fn naive_lhs(z: &[Vec<Complex64>], k0: f64, k1: f64) -> Vec<Vec<Complex64>> {
    let n = z.len() as f64;
    let d = z[0].len();
    let zc: Vec<Complex64> = (0..d).map(|k| z.iter().map(|m| m[k]).sum::<Complex64>() / n).collect();
    z.iter()
        .map(|zj| {
            let (jj, cj, jc) = (dot(zj, zj), dot(&zc, zj), dot(zj, &zc));
            (0..d)
                .map(|k| k0 * (jj * zc[k] - cj * zj[k]) + k1 * (jc - cj) * zj[k])
                .collect()
        })
        .collect()
}

fn reduction_chain() -> Outcome {
    let r = reference(TheoremId::D1Reduction);
    let mut checks: Vec<(bool, String)> = [
        "tensor_rank1_is_lhs",
        "lhs_real_is_lohe_sphere",
        "tensor_rank2_is_lohe_matrix",
        "lhs_is_projection_form",
        "scalar_angular_law",
    ]
    .iter()
    .map(|name| at_most(name, check_value(&r, name), 1e-12))
    .collect();
    checks.push(at_most("radial", check_value(&r, "scalar_radial_component"), 1e-14));
    checks.push((
        measured(&r, "states_per_identity") >= 100.0,
        format!("{} states", measured(&r, "states_per_identity")),
    ));
    // Oracle: the library field against the transcription above, and the scalar laws.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut field, mut radial, mut angular) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let (k0, k1) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let z: Vec<Vec<Complex64>> = (0..5)
            .map(|_| {
                let v: Vec<Complex64> = (0..3).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let s = norm(&v);
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let state = EnsembleState::new(z.iter().map(|v| ComplexTensor::vector(v.clone())).collect()).unwrap();
        let zero = vec![SkewHermitianGenerator::zero(TensorShape::vector(3).unwrap()); 5];
        let lib = lhs_rhs(&state, &zero, k0, k1).unwrap();
        for (a, b) in lib.iter().zip(naive_lhs(&z, k0, k1)) {
            let d: Vec<Complex64> = a.entries().iter().zip(&b).map(|(x, y)| x - y).collect();
            field = field.max(norm(&d));
        }
        let thetas: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.1..3.1)).collect();
        let scalars: Vec<Vec<Complex64>> = thetas.iter().map(|t| vec![Complex64::from_polar(1.0, *t)]).collect();
        let zc = scalars.iter().map(|s| s[0]).sum::<Complex64>() / 5.0;
        let state = EnsembleState::new(scalars.iter().map(|v| ComplexTensor::vector(v.clone())).collect()).unwrap();
        let zero = vec![SkewHermitianGenerator::zero(TensorShape::vector(1).unwrap()); 5];
        for (t, f) in thetas.iter().zip(lhs_rhs(&state, &zero, k0, k1).unwrap()) {
            let local = Complex64::from_polar(1.0, -t) * f.entries()[0];
            radial = radial.max(local.re.abs());
            angular = angular.max((local.im - 2.0 * (k0 + k1) * (Complex64::from_polar(1.0, -t) * zc).im).abs());
        }
    }
    checks.push(at_most("oracle field", field, 1e-12));
    checks.push(at_most("oracle radial", radial, 1e-14));
    checks.push(at_most("oracle angular", angular, 1e-12));
    all(&checks)
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("norm conservation", norm_conservation),
        ("cross-ratio conservation", cross_ratio_conservation),
        ("correlation decay rate", correlation_decay_rate),
        ("Kuramoto equivalence", kuramoto_equivalence),
        ("gradient flow", gradient_flow),
        ("order parameter identity", order_parameter_identity),
        ("Lyapunov functional decay", lyapunov_decay),
        ("lp stability", lp_stability),
        ("frequency splitting", frequency_splitting),
        ("complete aggregation envelopes", complete_aggregation_envelopes),
        ("practical aggregation", practical_aggregation),
        ("reduction chain", reduction_chain),
    ];
    let mut failed = Vec::new();
    for (k, (name, criterion)) in criteria.iter().enumerate() {
        let (passed, detail) = catch_unwind(AssertUnwindSafe(criterion))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            });
        // Written past the test harness's capture so the lines always show.
        let _ = writeln!(
            std::io::stdout(),
            "acceptance {:>2} {} {name}: {detail}",
            k + 1,
            if passed { "PASS" } else { "FAIL" }
        );
        if !passed {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
