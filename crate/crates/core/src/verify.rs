//! Scenario runner that checks hypothesis gates on the initial data, runs the dynamics and
//! evaluates each result's checkable conclusion into a [`VerificationReport`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    Couplings, GeneratorSpec, InitialSpec, ObservablesSpec, OutputSpec, SimConfig, CONFIG_VERSION,
};
use crate::error::{LoheError, Result};
use crate::init::{
    generator_diameter, perturbed, random_ensemble, random_generators, random_unitary_ensemble,
    stream, GeneratorRecipe, Purpose,
};
use crate::integrate::{integrate, integrate_pair, Dynamics, IntegratorConfig, Phases, Trajectory};
use crate::linalg::{inner, matrix_exp, ComplexTensor, SkewHermitianGenerator, TensorShape};
use crate::models::{
    build_phase_model, lhs_rhs, lhs_rhs_projection_form, lohe_matrix_rhs, lohe_sphere_rhs,
    lohe_tensor_rhs, CouplingVector, EnsembleState, Model, ModelKind, PhaseModel,
};
use crate::observe::{
    centered_derivative, diam_corr, diam_euclid, ensemble_p_distance, extract_phases,
    fit_decay_rate, log_sum_rate, lyapunov, max_member_distance, order_parameter, potential,
    potential_gradient, rho_squared_rate, subsystem_b_frequencies, GapMatrix,
};
use crate::simulate::rotate_members;

/// Results that can be verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "L2.1")]
    L21,
    #[serde(rename = "T2.1a")]
    T21a,
    #[serde(rename = "T2.1b")]
    T21b,
    #[serde(rename = "P2.1")]
    P21,
    #[serde(rename = "P3.1")]
    P31,
    #[serde(rename = "T3.1")]
    T31,
    #[serde(rename = "T3.2")]
    T32,
    #[serde(rename = "P3.2")]
    P32,
    #[serde(rename = "L3.2")]
    L32,
    #[serde(rename = "P3.3")]
    P33,
    #[serde(rename = "L4.1")]
    L41,
    #[serde(rename = "C4.1")]
    C41,
    #[serde(rename = "T4.1")]
    T41,
    #[serde(rename = "T4.2")]
    T42,
    #[serde(rename = "R4.2")]
    R42,
    #[serde(rename = "D1-reduction")]
    D1Reduction,
}

impl TheoremId {
    pub const ALL: [TheoremId; 16] = [
        TheoremId::L21,
        TheoremId::T21a,
        TheoremId::T21b,
        TheoremId::P21,
        TheoremId::P31,
        TheoremId::T31,
        TheoremId::T32,
        TheoremId::P32,
        TheoremId::L32,
        TheoremId::P33,
        TheoremId::L41,
        TheoremId::C41,
        TheoremId::T41,
        TheoremId::T42,
        TheoremId::R42,
        TheoremId::D1Reduction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::L21 => "L2.1",
            TheoremId::T21a => "T2.1a",
            TheoremId::T21b => "T2.1b",
            TheoremId::P21 => "P2.1",
            TheoremId::P31 => "P3.1",
            TheoremId::T31 => "T3.1",
            TheoremId::T32 => "T3.2",
            TheoremId::P32 => "P3.2",
            TheoremId::L32 => "L3.2",
            TheoremId::P33 => "P3.3",
            TheoremId::L41 => "L4.1",
            TheoremId::C41 => "C4.1",
            TheoremId::T41 => "T4.1",
            TheoremId::T42 => "T4.2",
            TheoremId::R42 => "R4.2",
            TheoremId::D1Reduction => "D1-reduction",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = LoheError;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| LoheError::InvalidInput(format!("unknown theorem id `{s}`")))
    }
}

/// Every tolerance used by the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub norm_drift: f64,
    pub cross_ratio: f64,
    pub bound_slack: f64,
    pub monotone: f64,
    pub equivalence: f64,
    pub gradient_fd: f64,
    pub gradient_fd_step: f64,
    /// Multiplied by `N`.
    pub gradient_residual: f64,
    pub phase_sum: f64,
    pub rho_derivative: f64,
    /// Relative to `max(1, |rate|)`.
    pub log_sum_derivative: f64,
    pub lyapunov_endpoint: f64,
    pub stability_variation: f64,
    pub reduction: f64,
    pub radial: f64,
    pub frequency_identity: f64,
    pub splitting: f64,
    pub envelope_slack: f64,
    pub potential_identity: f64,
    pub critical_point: f64,
    pub terminal_alignment: f64,
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm_drift: 1e-8,
            cross_ratio: 1e-6,
            bound_slack: 1e-3,
            monotone: 1e-9,
            equivalence: 1e-6,
            gradient_fd: 1e-6,
            gradient_fd_step: 1e-6,
            gradient_residual: 1e-15,
            phase_sum: 1e-8,
            rho_derivative: 1e-5,
            log_sum_derivative: 1e-6,
            lyapunov_endpoint: 1e-8,
            stability_variation: 0.2,
            reduction: 1e-12,
            radial: 1e-14,
            frequency_identity: 1e-5,
            splitting: 1e-6,
            envelope_slack: 1e-3,
            potential_identity: 1e-9,
            critical_point: 1e-10,
            terminal_alignment: 1e-6,
            quadrature: 1e-6,
        }
    }
}

/// The `verify` block of a configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremId>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Perturbation sizes for the stability check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_values: Option<Vec<f64>>,
    /// `D(A) / kappa0` values of the practical-aggregation sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    /// Trailing fraction of the run used by rate fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_fraction: Option<f64>,
    /// Trailing fraction over which terminal values are taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_fraction: Option<f64>,
    /// Random states per algebraic identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

pub const DEFAULT_DELTAS: [f64; 3] = [1e-4, 1e-5, 1e-6];
pub const DEFAULT_P_VALUES: [f64; 3] = [1.0, 2.0, 3.0];
pub const DEFAULT_RATIOS: [f64; 3] = [0.1, 0.01, 0.001];
pub const DEFAULT_WINDOW: f64 = 0.6;
pub const DEFAULT_TERMINAL: f64 = 0.2;
pub const DEFAULT_SAMPLES: usize = 100;

impl VerifyOptions {
    pub fn validate(&self) -> Result<()> {
        let fraction = |name: &str, v: Option<f64>| match v {
            Some(f) if !(f > 0.0 && f <= 1.0) => Err(LoheError::InvalidInput(format!(
                "{name} must lie in (0, 1], got {f}"
            ))),
            _ => Ok(()),
        };
        fraction("window_fraction", self.window_fraction)?;
        fraction("terminal_fraction", self.terminal_fraction)?;
        if let Some(d) = &self.deltas {
            if d.is_empty() || d.iter().any(|x| !(*x > 0.0)) {
                return Err(LoheError::InvalidInput(
                    "perturbation sizes must be positive (a zero size makes the ratio undefined)"
                        .into(),
                ));
            }
        }
        if let Some(p) = &self.p_values {
            if p.is_empty() || p.iter().any(|x| !(*x >= 1.0) || !x.is_finite()) {
                return Err(LoheError::InvalidInput("p values must lie in [1, inf)".into()));
            }
        }
        if let Some(r) = &self.ratios {
            if r.len() < 2 || r.iter().any(|x| !(*x >= 0.0)) {
                return Err(LoheError::InvalidInput(
                    "the ratio sweep needs at least two nonnegative values".into(),
                ));
            }
        }
        if self.samples == Some(0) {
            return Err(LoheError::InvalidInput("samples must be positive".into()));
        }
        Ok(())
    }

    fn deltas(&self) -> Vec<f64> {
        self.deltas.clone().unwrap_or_else(|| DEFAULT_DELTAS.to_vec())
    }

    fn p_values(&self) -> Vec<f64> {
        self.p_values.clone().unwrap_or_else(|| DEFAULT_P_VALUES.to_vec())
    }

    fn ratios(&self) -> Vec<f64> {
        self.ratios.clone().unwrap_or_else(|| DEFAULT_RATIOS.to_vec())
    }

    fn window(&self) -> f64 {
        self.window_fraction.unwrap_or(DEFAULT_WINDOW)
    }

    fn terminal(&self) -> f64 {
        self.terminal_fraction.unwrap_or(DEFAULT_TERMINAL)
    }

    fn samples(&self) -> usize {
        self.samples.unwrap_or(DEFAULT_SAMPLES)
    }
}

/// A scenario: which result to check, on which configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub theorem: TheoremId,
    pub config: SimConfig,
}

impl ScenarioSpec {
    /// Uses the theorem named in the config's `verify` block unless one is given.
    pub fn from_config(config: SimConfig, theorem: Option<TheoremId>) -> Result<Self> {
        let theorem = theorem
            .or_else(|| config.verify.as_ref().and_then(|v| v.theorem))
            .ok_or_else(|| {
                LoheError::InvalidInput("no theorem given (use verify.theorem or --theorem)".into())
            })?;
        Ok(Self { theorem, config })
    }

    fn options(&self) -> VerifyOptions {
        self.config.verify.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Closed-form quantities of the initial data and the hypothesis gates built from them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub kappa_hat0: Option<f64>,
    pub tc_norm0: f64,
    pub eta: Option<f64>,
    pub da: f64,
    pub lambda0: f64,
    pub rho_in: f64,
    pub diameter0: f64,
    pub gates: Vec<Gate>,
}

impl ThresholdReport {
    pub fn gates_passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    fn gate(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.gates.push(Gate {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    LessThan,
    GreaterThan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, comparison: Comparison, threshold: f64) -> Self {
        let passed = match comparison {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::LessThan => value < threshold,
            Comparison::GreaterThan => value > threshold,
        };
        Self {
            name: name.into(),
            value,
            comparison,
            threshold,
            passed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesisNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem_id: TheoremId,
    #[serde(flatten)]
    pub hypothesis: ThresholdReport,
    pub measured: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Accumulates the conclusion checks of one scenario.
#[derive(Debug, Default)]
struct Findings {
    measured: BTreeMap<String, f64>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Findings {
    fn measure(&mut self, name: &str, value: f64) {
        self.measured.insert(name.into(), value);
    }

    fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.checks.push(Check::new(name, value, Comparison::AtMost, threshold));
    }

    fn at_least(&mut self, name: &str, value: f64, threshold: f64) {
        self.checks.push(Check::new(name, value, Comparison::AtLeast, threshold));
    }

    fn less_than(&mut self, name: &str, value: f64, threshold: f64) {
        self.checks.push(Check::new(name, value, Comparison::LessThan, threshold));
    }

    fn greater_than(&mut self, name: &str, value: f64, threshold: f64) {
        self.checks
            .push(Check::new(name, value, Comparison::GreaterThan, threshold));
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, b| if b > a || b.is_nan() { b } else { a })
}

/// Largest single-step decrease `max_k (y_k - y_{k+1})` (0 for non-decreasing series).
fn max_decrease(values: &[f64]) -> f64 {
    max_of(values.windows(2).map(|w| w[0] - w[1]))
}

/// Largest single-step increase.
fn max_increase(values: &[f64]) -> f64 {
    max_of(values.windows(2).map(|w| w[1] - w[0]))
}

fn run<D: Dynamics>(
    dynamics: &D,
    initial: &D::State,
    config: &IntegratorConfig,
) -> Result<Trajectory<D::State>> {
    integrate(dynamics, initial, config).map_err(|f| f.error)
}

/// Integrates a rank-1 or tensor ensemble model from explicit pieces.
fn run_model(model: &Model, initial: &EnsembleState, config: &IntegratorConfig) -> Result<Trajectory<EnsembleState>> {
    model.validate_initial(initial)?;
    run(model, initial, config)
}

fn kappa_pair(config: &SimConfig) -> (f64, f64) {
    (
        config.couplings.kappa0.unwrap_or(0.0),
        config.couplings.kappa1.unwrap_or(0.0),
    )
}

fn require_model(report: &mut ThresholdReport, config: &SimConfig, allowed: &[ModelKind]) {
    let ok = allowed.contains(&config.model);
    report.gate(
        "model",
        ok,
        format!("{:?} (needs one of {allowed:?})", config.model),
    );
}

/// `eta`: the largest root of `2 k0 x^2 - b x + D(A) = 0`, `b = k0 - 4 k^_0 ||T_c||^2`.
pub fn eta(kappa0: f64, kappa_hat0: f64, tc_norm: f64, da: f64) -> Option<f64> {
    let b = kappa0 - 4.0 * kappa_hat0 * tc_norm * tc_norm;
    let disc = b * b - 8.0 * kappa0 * da;
    if !(kappa0 > 0.0) || disc < 0.0 || b < 0.0 {
        return None;
    }
    Some((b + disc.sqrt()) / (4.0 * kappa0))
}

fn generators_of(config: &SimConfig) -> Result<Vec<SkewHermitianGenerator>> {
    match config.model {
        ModelKind::LoheMatrix => Ok(config
            .build_hamiltonians()?
            .iter()
            .map(SkewHermitianGenerator::from_hamiltonian)
            .collect::<Result<Vec<_>>>()?),
        ModelKind::SubsystemA | ModelKind::SubsystemB | ModelKind::KuramotoFrustration => {
            Ok(Vec::new())
        }
        _ => config.build_generators(),
    }
}

fn threshold_report(config: &SimConfig, initial: &EnsembleState) -> Result<ThresholdReport> {
    let gens = generators_of(config)?;
    let tc = order_parameter(initial);
    let kappa_hat0 = match (&config.couplings.strengths, config.couplings.kappa1) {
        (Some(s), _) if !s.is_empty() => Some(s[1..].iter().sum()),
        (None, Some(k1)) if config.model == ModelKind::LoheTensor => Some(k1),
        _ => None,
    };
    let kappa0 = config
        .couplings
        .strengths
        .as_ref()
        .and_then(|s| s.first().copied())
        .or(config.couplings.kappa0)
        .unwrap_or(0.0);
    let da = generator_diameter(&gens);
    Ok(ThresholdReport {
        kappa_hat0,
        tc_norm0: tc,
        eta: kappa_hat0.and_then(|kh| eta(kappa0, kh, tc, da)),
        da,
        lambda0: diam_corr(initial),
        rho_in: tc,
        diameter0: diam_euclid(initial),
        gates: Vec::new(),
    })
}

fn zero_frequency_gate(report: &mut ThresholdReport, config: &SimConfig) -> Result<()> {
    let zero = generators_of(config)?.iter().all(|g| g.is_zero());
    report.gate("zero_frequencies", zero, "all frequency matrices vanish");
    Ok(())
}

fn unit_norm_gate(report: &mut ThresholdReport, initial: &EnsembleState) {
    let defect = initial.max_norm_defect();
    report.gate(
        "unit_norm",
        defect <= crate::models::UNIT_NORM_TOL,
        format!("max | ||T_j|| - 1 | = {defect:e}"),
    );
}

/// Evaluates the gates of `theorem` on the initial data; never integrates.
pub fn evaluate_gates(spec: &ScenarioSpec, initial: &EnsembleState) -> Result<ThresholdReport> {
    let config = &spec.config;
    let opts = spec.options();
    let mut r = threshold_report(config, initial)?;
    let (k0, k1) = kappa_pair(config);
    let n = config.n as f64;
    match spec.theorem {
        TheoremId::L21 => {
            require_model(
                &mut r,
                config,
                &[
                    ModelKind::LoheTensor,
                    ModelKind::LoheHermitianSphere,
                    ModelKind::LoheSphere,
                    ModelKind::LoheMatrix,
                    ModelKind::SubsystemA,
                    ModelKind::SubsystemB,
                ],
            );
            if config.model != ModelKind::LoheMatrix {
                unit_norm_gate(&mut r, initial);
            }
        }
        TheoremId::T21a | TheoremId::T21b => {
            require_model(&mut r, config, &[ModelKind::LoheTensor]);
            unit_norm_gate(&mut r, initial);
            let kv = config.coupling_vector().ok();
            let kappa0 = kv.as_ref().map_or(0.0, |k| k.kappa0());
            let kh = kv.as_ref().map_or(0.0, |k| k.kappa_hat0());
            let tc2 = r.tc_norm0 * r.tc_norm0;
            let b = kappa0 - 4.0 * kh * tc2;
            r.gate("kappa0_positive", kappa0 > 0.0, format!("kappa0 = {kappa0}"));
            if spec.theorem == TheoremId::T21a {
                zero_frequency_gate(&mut r, config)?;
                r.gate(
                    "kappa_hat0_small",
                    kh * 4.0 * tc2 < kappa0,
                    format!("kappa_hat0 = {kh} vs kappa0 / (4 ||T_c||^2) = {}", kappa0 / (4.0 * tc2)),
                );
                let upper = b / (2.0 * kappa0);
                r.gate(
                    "initial_diameter",
                    r.diameter0 > 0.0 && r.diameter0 < upper,
                    format!("D(T^in) = {} must lie in (0, {upper})", r.diameter0),
                );
            } else {
                let da = opts.ratios().into_iter().fold(0.0, f64::max) * kappa0;
                r.da = da;
                r.eta = eta(kappa0, kh, r.tc_norm0, da);
                let limit = b * b / (8.0 * kappa0);
                r.gate(
                    "frequency_spread",
                    da < limit,
                    format!("largest D(A) = {da} vs |b|^2 / (8 kappa0) = {limit}"),
                );
                let ok = r.eta.is_some_and(|e| r.diameter0 <= e);
                r.gate(
                    "initial_diameter",
                    ok,
                    format!("D(T(0)) = {} vs eta = {:?}", r.diameter0, r.eta),
                );
            }
        }
        TheoremId::P21 => {
            require_model(&mut r, config, &[ModelKind::LoheHermitianSphere]);
            unit_norm_gate(&mut r, initial);
            r.gate(
                "homogeneous_frequencies",
                r.da <= 1e-12,
                format!("D(Omega) = {}", r.da),
            );
        }
        TheoremId::P31 | TheoremId::T31 => {
            require_model(&mut r, config, &[ModelKind::SubsystemA]);
            unit_norm_gate(&mut r, initial);
            r.gate("kappa0_positive", k0 > 0.0, format!("kappa0 = {k0}"));
            if spec.theorem == TheoremId::P31 {
                r.gate("four_members", config.n >= 4, format!("N = {}", config.n));
            } else {
                r.gate(
                    "lambda0_below_half",
                    r.lambda0 < 0.5,
                    format!("lambda_M(0) = {}", r.lambda0),
                );
            }
        }
        TheoremId::T32 | TheoremId::P32 => {
            require_model(&mut r, config, &[ModelKind::SubsystemB]);
            unit_norm_gate(&mut r, initial);
            r.gate("kappa1_positive", k1 > 0.0, format!("kappa1 = {k1}"));
        }
        TheoremId::L32 | TheoremId::P33 => {
            require_model(&mut r, config, &[ModelKind::KuramotoFrustration]);
            unit_norm_gate(&mut r, initial);
            r.gate("kappa1_positive", k1 > 0.0, format!("kappa1 = {k1}"));
        }
        TheoremId::L41 | TheoremId::C41 => {
            require_model(&mut r, config, &[ModelKind::LoheHermitianSphere]);
            unit_norm_gate(&mut r, initial);
            zero_frequency_gate(&mut r, config)?;
            r.gate(
                "couplings",
                k0 > 0.0 && k0 + k1 >= 0.0,
                format!("kappa0 = {k0}, kappa0 + kappa1 = {}", k0 + k1),
            );
            if spec.theorem == TheoremId::C41 {
                r.gate("rho_in_positive", r.rho_in > 0.0, format!("rho^in = {}", r.rho_in));
            }
        }
        TheoremId::T41 | TheoremId::T42 => {
            require_model(&mut r, config, &[ModelKind::LoheHermitianSphere]);
            unit_norm_gate(&mut r, initial);
            zero_frequency_gate(&mut r, config)?;
            r.gate(
                "kappa1_window",
                k1 > 0.0 && k1 < k0 / 4.0,
                format!("need 0 < kappa1 = {k1} < kappa0 / 4 = {}", k0 / 4.0),
            );
            let floor = (n - 2.0) / n;
            r.gate(
                "rho_in",
                r.rho_in > floor,
                format!("rho^in = {} vs (N - 2) / N = {floor}", r.rho_in),
            );
            if spec.theorem == TheoremId::T42 {
                let distinct = |s: &EnsembleState| min_pair_distance(s) > 0.0;
                r.gate("distinct_members", distinct(initial), "z_i^in != z_j^in");
                for delta in opts.deltas() {
                    let p = perturbed(initial, delta, config.seed)?;
                    let rho = order_parameter(&p);
                    r.gate(
                        &format!("perturbed_{delta:e}"),
                        distinct(&p) && rho > floor,
                        format!("perturbed rho^in = {rho}, distinct = {}", distinct(&p)),
                    );
                }
            }
        }
        TheoremId::R42 => {
            require_model(&mut r, config, &[ModelKind::LoheHermitianSphere]);
        }
        TheoremId::D1Reduction => {}
    }
    Ok(r)
}

fn min_pair_distance(s: &EnsembleState) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            best = best.min(s.members[i].sub(&s.members[j]).norm());
        }
    }
    best
}

/// Runs one scenario end to end.
///
/// Gate violations produce a report with verdict `HypothesisNotMet`; integration faults
/// and invalid configurations are returned as errors.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<VerificationReport> {
    spec.config
        .validate()
        .map_err(|e| LoheError::InvalidInput(e.to_string()))?;
    let initial = spec.config.build_initial()?;
    let hypothesis = evaluate_gates(spec, &initial)?;
    let mut f = Findings::default();
    if hypothesis.gates_passed() {
        let opts = spec.options();
        let tol = opts.tolerances;
        let c = &spec.config;
        match spec.theorem {
            TheoremId::L21 => check_l21(c, &initial, &tol, &mut f)?,
            TheoremId::T21a => check_t21a(c, &initial, &opts, &mut f)?,
            TheoremId::T21b => check_t21b(c, &initial, &opts, &mut f)?,
            TheoremId::P21 => check_p21(c, &initial, &tol, &mut f)?,
            TheoremId::P31 => check_p31(c, &initial, &tol, &mut f)?,
            TheoremId::T31 => check_t31(c, &initial, &opts, &mut f)?,
            TheoremId::T32 => check_t32(c, &initial, &tol, &mut f)?,
            TheoremId::P32 => check_p32(c, &initial, &tol, &mut f)?,
            TheoremId::L32 | TheoremId::P33 => check_gradient_flow(c, &initial, &tol, &mut f)?,
            TheoremId::L41 => check_l41(c, &initial, &tol, &mut f)?,
            TheoremId::C41 => check_c41(c, &initial, &tol, &mut f)?,
            TheoremId::T41 => check_t41(c, &initial, &opts, &mut f)?,
            TheoremId::T42 => check_t42(c, &initial, &opts, &mut f)?,
            TheoremId::R42 => check_r42(c, &opts, &mut f)?,
            TheoremId::D1Reduction => check_reductions(c, &opts, &mut f)?,
        }
    } else {
        f.note("hypothesis gates failed; dynamics not run");
    }
    let verdict = if !hypothesis.gates_passed() {
        Verdict::HypothesisNotMet
    } else if f.checks.iter().all(|c| c.passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(VerificationReport {
        theorem_id: spec.theorem,
        hypothesis,
        measured: f.measured,
        checks: f.checks,
        verdict,
        notes: f.notes,
        artifacts: Vec::new(),
    })
}

/// Runs independent scenarios on the current rayon pool; results keep input order.
pub fn run_scenarios(specs: &[ScenarioSpec]) -> Vec<Result<VerificationReport>> {
    specs.par_iter().map(run_scenario).collect()
}

fn ensemble_run(config: &SimConfig, initial: &EnsembleState) -> Result<Trajectory<EnsembleState>> {
    run_model(&config.build_model()?, initial, &config.integrator)
}

fn check_l21(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let traj = ensemble_run(c, initial)?;
    let drift = traj.max_norm_drift();
    f.measure("max_norm_drift", drift);
    f.measure("renormalizations", traj.renormalizations.len() as f64);
    f.at_most("norm_drift", drift, tol.norm_drift);
    if !traj.renormalizations.is_empty() {
        f.note("renormalization was active; drift is not a conservation measurement");
    }
    Ok(())
}

fn check_p31(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let traj = ensemble_run(c, initial)?;
    let tuples: Vec<[usize; 4]> = if c.observables.cross_ratios.is_empty() {
        let mut all = c.clone();
        all.observables.all_cross_ratios = true;
        all.cross_ratio_tuples()
    } else {
        c.cross_ratio_tuples()
    };
    let g0 = GapMatrix::new(initial);
    let mut live = Vec::new();
    for t in &tuples {
        match g0.cross_ratio(t[0], t[1], t[2], t[3]) {
            Ok(v) => live.push((*t, v)),
            Err(e) => log::warn!("skipping tuple {t:?}: {e}"),
        }
    }
    let skipped = tuples.len() - live.len();
    let mut worst = 0.0f64;
    let mut failure = None;
    for (s, state) in traj.states.iter().enumerate() {
        let g = GapMatrix::new(state);
        for (t, v0) in &live {
            match g.cross_ratio(t[0], t[1], t[2], t[3]) {
                Ok(v) => worst = worst.max((v - v0).norm()),
                Err(e) => {
                    failure.get_or_insert(format!("sample {s}: {e}"));
                    worst = f64::INFINITY;
                }
            }
        }
    }
    f.measure("tuples_checked", live.len() as f64);
    f.measure("tuples_skipped", skipped as f64);
    f.measure("max_cross_ratio_drift", worst);
    f.at_least("nondegenerate_tuples", live.len() as f64, 1.0);
    f.at_most("cross_ratio_drift", worst, tol.cross_ratio);
    if let Some(msg) = failure {
        f.note(msg);
    }
    Ok(())
}

/// Smallest pairwise gap at which `log |1 - h_ij|` is differentiated numerically.
const LOG_SUM_GAP_FLOOR: f64 = 1e-6;

fn check_t31(c: &SimConfig, initial: &EnsembleState, opts: &VerifyOptions, f: &mut Findings) -> Result<()> {
    let tol = opts.tolerances;
    let traj = ensemble_run(c, initial)?;
    let kappa0 = c.couplings.kappa0.unwrap_or(0.0);
    let g0 = GapMatrix::new(initial);
    let (lambda0, _) = g0.max_abs();
    let rate = kappa0 * (1.0 - 2.0 * lambda0);
    let n = initial.len();

    let (mut bound_excess, mut corollary_excess) = (0.0f64, 0.0f64);
    let (mut lambdas, mut rhos, mut logs, mut log_rates) = (vec![], vec![], vec![], vec![]);
    let mut min_gaps = Vec::with_capacity(traj.len());
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let g = GapMatrix::new(state);
        let envelope = (-rate * t).exp();
        let mut min_gap = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let a0 = g0.get(i, j).norm();
                if i == j || a0 == 0.0 {
                    continue;
                }
                min_gap = min_gap.min(g.get(i, j).norm());
                bound_excess = bound_excess.max(g.get(i, j).norm() / (a0 * envelope) - 1.0);
                let d2 = state.members[i].sub(&state.members[j]).norm().powi(2);
                corollary_excess = corollary_excess.max(d2 / (2.0 * a0 * envelope) - 1.0);
            }
        }
        min_gaps.push(min_gap);
        lambdas.push(g.max_abs().0);
        rhos.push(order_parameter(state));
        logs.push(g.log_sum());
        log_rates.push(log_sum_rate(state, kappa0));
    }
    f.measure("lambda0", lambda0);
    f.measure("rate_bound", rate);
    f.measure("max_bound_excess", bound_excess);
    f.at_most("pointwise_bound", bound_excess, tol.bound_slack);
    f.at_most("corollary_distance_bound", corollary_excess, tol.bound_slack);
    f.at_most(
        "lambda_non_increasing",
        max_of(lambdas.iter().map(|l| l - lambda0)),
        tol.monotone,
    );
    let identical = lambda0 == 0.0;
    if identical {
        f.note("identical ensemble: the bounds hold vacuously");
    } else {
        let fit = fit_decay_rate(&traj.times, &lambdas, opts.window())?;
        f.measure("fitted_rate", fit.rate);
        f.measure("fitted_r2", fit.r2);
        f.at_least("fitted_rate", fit.rate, rate);
        f.at_most("log_sum_non_increasing", max_increase(&logs), tol.monotone);
        // Once gaps reach rounding level their logarithms are noise; compare only
        // where every gap around the stencil is still resolved.
        let fd = centered_derivative(&traj.times, &logs);
        let resolved: Vec<f64> = fd
            .iter()
            .enumerate()
            .filter(|(k, _)| min_gaps[*k..*k + 3].iter().all(|&g| g >= LOG_SUM_GAP_FLOOR))
            .map(|(k, (_, d))| (d - log_rates[k + 1]).abs() / log_rates[k + 1].abs().max(1.0))
            .collect();
        f.measure("log_sum_samples", resolved.len() as f64);
        if resolved.is_empty() {
            f.note("no sample resolves every gap; log-sum derivative not compared");
        }
        let mismatch = max_of(resolved);
        f.measure("log_sum_derivative_mismatch", mismatch);
        f.at_most("log_sum_derivative", mismatch, tol.log_sum_derivative);
    }
    f.at_most("rho_non_decreasing", max_decrease(&rhos), tol.monotone);
    // lambda = max sqrt(J^2 + I^2) from the (J, I) decomposition of the initial correlations.
    let h = crate::observe::correlations(initial);
    let via_ji = max_of((0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| h.j(i, j).hypot(h.i(i, j))));
    f.at_most("lambda_ji_identity", (via_ji - lambda0).abs(), 1e-14);
    Ok(())
}

fn check_t32(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let kappa1 = c.couplings.kappa1.unwrap_or(0.0);
    let traj = ensemble_run(c, initial)?;
    let phase = build_phase_model(initial, kappa1)?;
    let ptraj = run(&phase, &Phases(phase.theta.clone()), &c.integrator)?;
    if ptraj.times != traj.times {
        return Err(LoheError::InvalidInput("the two flows were sampled on different grids".into()));
    }
    let residual = max_of(
        traj.states
            .iter()
            .zip(&ptraj.states)
            .map(|(z, th)| max_member_distance(z, &rotate_members(initial, &th.0))),
    );
    f.measure("max_equivalence_residual", residual);
    f.at_most("equivalence", residual, tol.equivalence);

    // Phases read off the Subsystem-B flow against a quadrature of their velocities.
    let extracted = extract_phases(&traj.times, &traj.states, initial, tol.equivalence)?;
    let mut quad = vec![0.0; initial.len()];
    let mut prev = subsystem_b_frequencies(&traj.states[0], kappa1);
    let mut quad_err = 0.0f64;
    for s in 1..traj.len() {
        let h = traj.times[s] - traj.times[s - 1];
        let cur = subsystem_b_frequencies(&traj.states[s], kappa1);
        for j in 0..quad.len() {
            quad[j] += 0.5 * h * (prev[j] + cur[j]);
            quad_err = quad_err.max((quad[j] - extracted.theta[s][j]).abs());
        }
        prev = cur;
    }
    f.measure("max_quadrature_mismatch", quad_err);
    f.at_most("phase_quadrature", quad_err, tol.quadrature);
    let phase_gap = max_of(
        extracted
            .theta
            .iter()
            .zip(&ptraj.states)
            .flat_map(|(a, b)| a.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>()),
    );
    f.measure("max_phase_mismatch", phase_gap);
    Ok(())
}

fn check_p32(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let kappa1 = c.couplings.kappa1.unwrap_or(0.0);
    let n = initial.len() as f64;
    let traj = ensemble_run(c, initial)?;
    let freqs: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| subsystem_b_frequencies(s, kappa1))
        .collect();
    let peak = |v: &[f64]| max_of(v.iter().map(|x| x.abs()));
    let (first, last) = (peak(&freqs[0]), peak(freqs.last().expect("samples")));
    f.measure("initial_max_frequency", first);
    f.measure("terminal_max_frequency", last);
    if first > 0.0 {
        f.less_than("frequency_decay", last, first);
    } else {
        f.note("all frequencies vanish initially (real data); nothing to decay");
    }
    let rho2: Vec<f64> = traj.states.iter().map(|s| order_parameter(s).powi(2)).collect();
    let fd = centered_derivative(&traj.times, &rho2);
    let mismatch = max_of(fd.iter().zip(&freqs[1..]).map(|((_, d), w)| {
        (d - w.iter().map(|x| x * x).sum::<f64>() / (n * kappa1)).abs()
    }));
    f.measure("max_identity_mismatch", mismatch);
    f.at_most("order_parameter_identity", mismatch, tol.frequency_identity);
    f.at_most("rho_non_decreasing", max_decrease(&rho2), tol.monotone);
    Ok(())
}

fn fd_gradient_error(model: &PhaseModel, h: f64) -> f64 {
    let grad = potential_gradient(model);
    max_of((0..model.n()).map(|k| {
        let mut plus = model.theta.clone();
        let mut minus = model.theta.clone();
        plus[k] += h;
        minus[k] -= h;
        let fd = (potential(&model.with_theta(plus)) - potential(&model.with_theta(minus))) / (2.0 * h);
        (fd - grad[k]).abs()
    }))
}

/// Longest descent used to locate a critical point of the potential.
const DESCENT_HORIZON: f64 = 2000.0;
const DESCENT_GRADIENT: f64 = 1e-11;

fn check_gradient_flow(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let kappa1 = c.couplings.kappa1.unwrap_or(0.0);
    let model = build_phase_model(initial, kappa1)?;
    let n = model.n();
    let traj = run(&model, &Phases(model.theta.clone()), &c.integrator)?;

    // Finite differences at the initial phases, along the run and at seeded probes.
    let mut fd_err = 0.0f64;
    let mut probes: Vec<Vec<f64>> = traj.states.iter().step_by((traj.len() / 10).max(1)).map(|p| p.0.clone()).collect();
    for k in 0..5 {
        let mut rng = stream(c.seed, Purpose::Probe, k);
        probes.push((0..n).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect());
    }
    for th in &probes {
        fd_err = fd_err.max(fd_gradient_error(&model.with_theta(th.clone()), tol.gradient_fd_step));
    }
    f.measure("max_fd_gradient_error", fd_err);
    f.at_most("gradient_finite_difference", fd_err, tol.gradient_fd);

    let (mut residual, mut phase_sum, mut identity) = (0.0f64, 0.0f64, 0.0f64);
    let mut values = Vec::with_capacity(traj.len());
    let r_sum: f64 = model.amplitudes.iter().sum();
    for th in &traj.states {
        let m = model.with_theta(th.0.clone());
        let flow = m.frequencies(&th.0);
        let grad = potential_gradient(&m);
        residual = residual.max(max_of(flow.iter().zip(&grad).map(|(a, b)| (a + b).abs())));
        phase_sum = phase_sum.max(th.0.iter().sum::<f64>().abs());
        let v = potential(&m);
        let rho = order_parameter(&rotate_members(initial, &th.0));
        identity = identity.max((v - (-kappa1 * n as f64 * rho * rho + kappa1 / n as f64 * r_sum)).abs());
        values.push(v);
    }
    f.at_most("gradient_flow_residual", residual, tol.gradient_residual * n as f64);
    f.at_most("phase_sum", phase_sum, tol.phase_sum);
    f.at_most("potential_non_increasing", max_increase(&values), tol.monotone);
    f.at_most("potential_order_parameter_identity", identity, tol.potential_identity);
    let peak = |th: &[f64]| max_of(model.frequencies(th).iter().map(|x| x.abs()));
    let (first, last) = (peak(&traj.states[0].0), peak(&traj.last().0));
    f.measure("initial_max_frequency", first);
    f.measure("terminal_max_frequency", last);
    if first > 0.0 {
        f.less_than("frequency_decay", last, first);
    }

    // Descend further to a critical point and check the flow is frozen there.
    let mut theta = traj.last().clone();
    let chunk = IntegratorConfig::rk4(0.01, 10.0, 10.0);
    let mut t = 0.0;
    while max_of(potential_gradient(&model.with_theta(theta.0.clone())).iter().map(|g| g.abs())) > DESCENT_GRADIENT
        && t < DESCENT_HORIZON
    {
        theta = run(&model, &theta, &chunk)?.last().clone();
        t += 10.0;
    }
    let frozen = peak(&theta.0);
    f.measure("descent_time", t);
    f.at_most("critical_point_frozen", frozen, tol.critical_point);
    Ok(())
}

fn check_l41(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let (k0, k1) = kappa_pair(c);
    let traj = ensemble_run(c, initial)?;
    let rho: Vec<f64> = traj.states.iter().map(order_parameter).collect();
    let rho2: Vec<f64> = rho.iter().map(|r| r * r).collect();
    f.at_most("rho_non_decreasing", max_decrease(&rho), tol.monotone);
    let fd = centered_derivative(&traj.times, &rho2);
    let mismatch = max_of(
        fd.iter()
            .zip(&traj.states[1..])
            .map(|((_, d), s)| (d - rho_squared_rate(s, k0, k1)).abs()),
    );
    f.measure("max_rho_derivative_mismatch", mismatch);
    f.at_most("rho_derivative_identity", mismatch, tol.rho_derivative);
    Ok(())
}

fn check_c41(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let (k0, k1) = kappa_pair(c);
    let traj = ensemble_run(c, initial)?;
    let rho: Vec<f64> = traj.states.iter().map(order_parameter).collect();
    f.at_most("rho_non_decreasing", max_decrease(&rho), tol.monotone);
    // (ii): the time integral of d(rho^2)/dt is bounded by 1 - (rho^in)^2.
    let rates: Vec<f64> = traj.states.iter().map(|s| rho_squared_rate(s, k0, k1)).collect();
    let integral: f64 = traj
        .times
        .windows(2)
        .zip(rates.windows(2))
        .map(|(t, r)| 0.5 * (t[1] - t[0]) * (r[0] + r[1]))
        .sum();
    let budget = 1.0 - rho[0] * rho[0];
    f.measure("dissipation_integral", integral);
    f.at_most("dissipation_budget", integral, budget + tol.terminal_alignment);

    let last = traj.last();
    let zc = last.centroid();
    let rho_t = zc.norm();
    let (mut defect, mut imag) = (0.0f64, 0.0f64);
    let (mut plus, mut minus) = (0, 0);
    for j in 0..last.len() {
        let h = inner(last.member(j), zc.entries());
        defect = defect.max((rho_t * rho_t - h.norm_sqr()).abs());
        imag = imag.max(h.im.abs());
        if h.re >= 0.0 {
            plus += 1;
        } else {
            minus += 1;
        }
    }
    f.measure("terminal_rho", rho_t);
    f.measure("aligned_members", plus as f64);
    f.measure("anti_aligned_members", minus as f64);
    f.at_most("terminal_alignment_defect", defect, tol.terminal_alignment);
    f.at_most("terminal_imaginary_part", imag, tol.terminal_alignment);
    f.note(format!(
        "sign pattern of Re<z_i, z_c> / rho at t = {}: {plus} positive, {minus} negative",
        traj.times.last().expect("samples")
    ));
    Ok(())
}

fn check_t41(c: &SimConfig, initial: &EnsembleState, opts: &VerifyOptions, f: &mut Findings) -> Result<()> {
    let tol = opts.tolerances;
    let traj = ensemble_run(c, initial)?;
    let lyap: Vec<f64> = traj.states.iter().map(lyapunov).collect();
    let rho: Vec<f64> = traj.states.iter().map(order_parameter).collect();
    let end = *lyap.last().expect("samples");
    f.measure("terminal_lyapunov", end);
    f.at_most("lyapunov_endpoint", end, tol.lyapunov_endpoint);
    if lyap[0] == 0.0 {
        f.note("identical ensemble: the functional vanishes identically");
    } else {
        let fit = fit_decay_rate(&traj.times, &lyap, opts.window())?;
        f.measure("fitted_rate", fit.rate);
        f.measure("fitted_r2", fit.r2);
        f.greater_than("fitted_rate", fit.rate, 0.0);
    }
    f.at_most("rho_non_decreasing", max_decrease(&rho), tol.monotone);
    f.at_least("terminal_rho", *rho.last().expect("samples"), rho[0] - tol.monotone);
    let last = traj.last();
    let zc = last.centroid();
    let min_alignment = (0..last.len())
        .map(|j| inner(last.member(j), zc.entries()).re)
        .fold(f64::INFINITY, f64::min);
    f.measure("min_terminal_alignment", min_alignment);
    f.greater_than("single_cluster", min_alignment, 0.0);
    Ok(())
}

fn check_t42(c: &SimConfig, initial: &EnsembleState, opts: &VerifyOptions, f: &mut Findings) -> Result<()> {
    let model = c.build_model()?;
    let deltas = opts.deltas();
    let ps = opts.p_values();
    let pairs: Vec<Result<Vec<f64>>> = deltas
        .par_iter()
        .map(|&delta| {
            let other = perturbed(initial, delta, c.seed)?;
            let (a, b) = integrate_pair(&model, initial, &other, &c.integrator).map_err(|e| e.error)?;
            Ok(ps
                .iter()
                .map(|&p| {
                    let d0 = ensemble_p_distance(initial, &other, p);
                    max_of(a.states.iter().zip(&b.states).map(|(x, y)| ensemble_p_distance(x, y, p))) / d0
                })
                .collect())
        })
        .collect();
    let g: Vec<Vec<f64>> = pairs.into_iter().collect::<Result<_>>()?;
    for (pi, &p) in ps.iter().enumerate() {
        let column: Vec<f64> = g.iter().map(|row| row[pi]).collect();
        for (delta, v) in deltas.iter().zip(&column) {
            f.measure(&format!("G_p{p}_delta{delta:e}"), *v);
        }
        let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = max_of(column.iter().copied());
        f.less_than(&format!("G_finite_p{p}"), hi, f64::INFINITY);
        f.less_than(&format!("G_variation_p{p}"), (hi - lo) / lo, opts.tolerances.stability_variation);
    }
    Ok(())
}

fn check_p21(c: &SimConfig, initial: &EnsembleState, tol: &Tolerances, f: &mut Findings) -> Result<()> {
    let (k0, k1) = kappa_pair(c);
    let omegas = c.build_generators()?;
    let with = Model::LoheHermitianSphere {
        omegas: omegas.clone(),
        kappa0: k0,
        kappa1: k1,
    };
    let without = Model::LoheHermitianSphere {
        omegas: vec![SkewHermitianGenerator::zero(initial.shape().clone()); initial.len()],
        kappa0: k0,
        kappa1: k1,
    };
    let z = run_model(&with, initial, &c.integrator)?;
    let w = run_model(&without, initial, &c.integrator)?;
    let mut residual = 0.0f64;
    for ((t, zs), ws) in z.times.iter().zip(&z.states).zip(&w.states) {
        let u = matrix_exp(&omegas[0], *t)?;
        let d = initial.shape().size();
        for (zj, wj) in zs.members.iter().zip(&ws.members) {
            let uw = crate::linalg::dense::matvec(u.entries(), wj.entries());
            debug_assert_eq!(uw.len(), d);
            let err = zj
                .entries()
                .iter()
                .zip(&uw)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            residual = residual.max(err);
        }
    }
    f.measure("max_splitting_residual", residual);
    f.at_most("splitting", residual, tol.splitting);
    Ok(())
}

fn check_t21a(c: &SimConfig, initial: &EnsembleState, opts: &VerifyOptions, f: &mut Findings) -> Result<()> {
    let kv = c.coupling_vector().map_err(|e| LoheError::InvalidInput(e.to_string()))?;
    let traj = ensemble_run(c, initial)?;
    let tc2 = order_parameter(initial).powi(2);
    let (slow, fast) = (
        kv.kappa0() - 4.0 * kv.kappa_hat0() * tc2,
        kv.kappa0() + 4.0 * kv.kappa_hat0() * tc2,
    );
    let diam: Vec<f64> = traj.states.iter().map(diam_euclid).collect();
    f.measure("rate_lower", slow);
    f.measure("rate_upper", fast);
    if diam[0] == 0.0 {
        f.note("identical ensemble: the diameter vanishes identically");
        return Ok(());
    }
    let fit = fit_decay_rate(&traj.times, &diam, opts.window())?;
    f.measure("fitted_rate", fit.rate);
    f.measure("fitted_r2", fit.r2);
    f.at_least("rate_above_lower", fit.rate, slow);
    f.at_most("rate_below_upper", fit.rate, fast);

    // Envelope constants fixed at the first sample of the fit window.
    let t_end = *traj.times.last().expect("samples");
    let start = t_end - opts.window() * t_end;
    let b = traj.times.iter().position(|&t| t >= start).unwrap_or(0);
    let (tb, db) = (traj.times[b], diam[b]);
    let c0 = db * (fast * tb).exp();
    let c1 = db * (slow * tb).exp();
    f.measure("C0", c0);
    f.measure("C1", c1);
    let mut excess = 0.0f64;
    for (t, d) in traj.times[b..].iter().zip(&diam[b..]) {
        excess = excess.max(d / (c1 * (-slow * t).exp()) - 1.0);
        excess = excess.max(1.0 - d / (c0 * (-fast * t).exp()));
    }
    f.measure("max_envelope_excess", excess);
    f.at_most("envelopes", excess, opts.tolerances.envelope_slack);
    Ok(())
}

fn check_t21b(c: &SimConfig, initial: &EnsembleState, opts: &VerifyOptions, f: &mut Findings) -> Result<()> {
    let kappa0 = c.coupling_vector().map_err(|e| LoheError::InvalidInput(e.to_string()))?.kappa0();
    let scale = match c.generators {
        GeneratorSpec::RandomSkewHermitian { scale, .. } => scale,
        _ => 0.0,
    };
    let mut ratios = opts.ratios();
    ratios.sort_by(|a, b| b.total_cmp(a));
    let terminal: Vec<Result<(f64, f64)>> = ratios
        .par_iter()
        .map(|&ratio| {
            let gens = random_generators(
                c.n,
                initial.shape(),
                GeneratorRecipe {
                    scale,
                    homogeneous: false,
                    diameter: Some(ratio * kappa0),
                    real: false,
                },
                c.seed,
            )?;
            let model = Model::lohe_tensor(initial.shape(), gens, c.coupling_vector().map_err(|e| LoheError::InvalidInput(e.to_string()))?)?;
            let traj = run_model(&model, initial, &c.integrator)?;
            let t_end = *traj.times.last().expect("samples");
            let from = t_end * (1.0 - opts.terminal());
            let tail = max_of(
                traj.times
                    .iter()
                    .zip(&traj.states)
                    .filter(|(t, _)| **t >= from)
                    .map(|(_, s)| diam_euclid(s)),
            );
            Ok((tail, traj.max_norm_drift()))
        })
        .collect();
    let terminal: Vec<(f64, f64)> = terminal.into_iter().collect::<Result<_>>()?;
    for (r, (d, drift)) in ratios.iter().zip(&terminal) {
        f.measure(&format!("terminal_diameter_ratio{r:e}"), *d);
        f.measure(&format!("norm_drift_ratio{r:e}"), *drift);
    }
    let worst_step = max_of(terminal.windows(2).map(|w| w[1].0 - w[0].0));
    f.measure("max_terminal_step", worst_step);
    for (k, w) in terminal.windows(2).enumerate() {
        f.less_than(
            &format!("terminal_decreasing_{:e}_to_{:e}", ratios[k], ratios[k + 1]),
            w[1].0,
            w[0].0,
        );
    }
    Ok(())
}

/// Seeded random ensembles for algebraic identities, one stream per draw.
fn probe_ensemble(seed: u64, k: u64, n: usize, shape: &TensorShape, real: bool) -> Result<EnsembleState> {
    let sub = stream(seed, Purpose::Probe, k).gen::<u64>();
    random_ensemble(n, shape, real, sub)
}

fn probe_generators(seed: u64, k: u64, n: usize, shape: &TensorShape, real: bool) -> Result<Vec<SkewHermitianGenerator>> {
    let sub = stream(seed, Purpose::Probe, k).gen::<u64>();
    random_generators(
        n,
        shape,
        GeneratorRecipe {
            scale: 1.0,
            homogeneous: false,
            diameter: None,
            real,
        },
        sub,
    )
}

fn max_tensor_gap(a: &[ComplexTensor], b: &[ComplexTensor]) -> f64 {
    max_of(a.iter().zip(b).map(|(x, y)| x.sub(y).norm()))
}

fn check_r42(c: &SimConfig, opts: &VerifyOptions, f: &mut Findings) -> Result<()> {
    let (k0, k1) = kappa_pair(c);
    let shape = c.tensor_shape().map_err(|e| LoheError::InvalidInput(e.to_string()))?;
    let zero = vec![SkewHermitianGenerator::zero(shape.clone()); c.n];
    let (mut general, mut special) = (0.0f64, 0.0f64);
    for k in 0..opts.samples() as u64 {
        let s = probe_ensemble(c.seed, k, c.n, &shape, false)?;
        general = general.max(max_tensor_gap(
            &lhs_rhs_projection_form(&s, k0, k1)?,
            &lhs_rhs(&s, &zero, k0, k1)?,
        ));
        // kappa1 = -kappa0 leaves only the tangential projection of z_c.
        let zc = s.centroid();
        let pure: Vec<ComplexTensor> = s
            .members
            .iter()
            .map(|z| {
                let mut p = zc.clone();
                p.axpy(-inner(z.entries(), zc.entries()), z);
                p.scaled(Complex64::new(k0, 0.0))
            })
            .collect();
        special = special.max(max_tensor_gap(&lhs_rhs(&s, &zero, k0, -k0)?, &pure));
    }
    f.at_most("projection_form", general, opts.tolerances.reduction);
    f.at_most("pure_projection_special_case", special, opts.tolerances.reduction);
    Ok(())
}

fn check_reductions(c: &SimConfig, opts: &VerifyOptions, f: &mut Findings) -> Result<()> {
    let tol = opts.tolerances;
    let n = c.n.max(2);
    let d = match c.shape.as_slice() {
        [d] => *d,
        _ => 3,
    };
    let vec_shape = TensorShape::vector(d)?;
    let samples = opts.samples() as u64;
    let (mut tensor_lhs, mut lhs_sphere, mut tensor_matrix, mut projection) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut radial, mut angular, mut scalar_matrix) = (0.0f64, 0.0f64, 0.0f64);
    let scalar = TensorShape::vector(1)?;
    for k in 0..samples {
        let mut rng = stream(c.seed, Purpose::Probe, 1_000_000 + k);
        let (k0, k1): (f64, f64) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));

        let s = probe_ensemble(c.seed, 4 * k, n, &vec_shape, false)?;
        let omegas = probe_generators(c.seed, 4 * k + 1, n, &vec_shape, false)?;
        let kv = CouplingVector::rank_one(k0, k1)?;
        tensor_lhs = tensor_lhs.max(max_tensor_gap(&lohe_tensor_rhs(&s, &omegas, &kv)?, &lhs_rhs(&s, &omegas, k0, k1)?));
        let zero = vec![SkewHermitianGenerator::zero(vec_shape.clone()); n];
        projection = projection.max(max_tensor_gap(
            &lhs_rhs(&s, &zero, k0, k1)?,
            &lhs_rhs_projection_form(&s, k0, k1)?,
        ));

        let x = probe_ensemble(c.seed, 4 * k + 2, n, &vec_shape, true)?;
        let real_omegas = probe_generators(c.seed, 4 * k + 3, n, &vec_shape, true)?;
        lhs_sphere = lhs_sphere.max(max_tensor_gap(
            &lhs_rhs(&x, &real_omegas, k0, k1)?,
            &lohe_sphere_rhs(&x, &real_omegas, k0)?,
        ));

        let sub = rng.gen::<u64>();
        let u = random_unitary_ensemble(n, d, sub)?;
        let hams: Vec<ComplexTensor> = probe_generators(c.seed, 4 * k + 3, n, &vec_shape, false)?
            .iter()
            .map(|o| o.tensor().scaled(Complex64::new(0.0, 1.0)))
            .map(|h| ComplexTensor::from_entries(TensorShape::matrix(d, d).expect("d > 0"), h.into_entries()))
            .collect::<Result<_>>()?;
        let kappa = 2.0 * (k0 + k1);
        let via_tensor = Model::lohe_matrix(d, &hams, kappa)?.rhs(0.0, &u)?;
        tensor_matrix = tensor_matrix.max(max_tensor_gap(&via_tensor.members, &lohe_matrix_rhs(&u, &hams, kappa)?));

        // Scalar members z_j = e^{i theta_j}: purely angular motion.
        let thetas: Vec<f64> = (0..n).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        let z = EnsembleState::new(thetas.iter().map(|&t| ComplexTensor::vector(vec![Complex64::from_polar(1.0, t)])).collect())?;
        let zero1 = vec![SkewHermitianGenerator::zero(scalar.clone()); n];
        let dz = lhs_rhs(&z, &zero1, k0, k1)?;
        let zc = z.centroid().entries()[0];
        for ((th, dzj), zj) in thetas.iter().zip(&dz).zip(&z.members) {
            let r = zj.norm();
            let along = Complex64::from_polar(1.0, -th) * dzj.entries()[0];
            radial = radial.max(along.re.abs());
            let law = 2.0 * (k0 + k1) * r * (Complex64::from_polar(1.0, -th) * zc).im;
            angular = angular.max((along.im - law).abs());
        }
        let m1 = EnsembleState::new(
            thetas
                .iter()
                .map(|&t| ComplexTensor::from_entries(TensorShape::matrix(1, 1).expect("1 > 0"), vec![Complex64::from_polar(1.0, t)]))
                .collect::<Result<_>>()?,
        )?;
        let du = lohe_matrix_rhs(&m1, &vec![ComplexTensor::zeros(TensorShape::matrix(1, 1)?); n], kappa)?;
        for (th, duj) in thetas.iter().zip(&du) {
            let omega = (Complex64::from_polar(1.0, -th) * duj.entries()[0]).im;
            scalar_matrix = scalar_matrix.max((omega - kappa * (Complex64::from_polar(1.0, -th) * zc).im).abs());
        }
    }
    f.measure("states_per_identity", samples as f64);
    f.at_most("tensor_rank1_is_lhs", tensor_lhs, tol.reduction);
    f.at_most("lhs_real_is_lohe_sphere", lhs_sphere, tol.reduction);
    f.at_most("tensor_rank2_is_lohe_matrix", tensor_matrix, tol.reduction);
    f.at_most("lhs_is_projection_form", projection, tol.reduction);
    f.at_most("scalar_radial_component", radial, tol.radial);
    f.at_most("scalar_angular_law", angular, tol.reduction);
    f.at_most("scalar_matrix_kuramoto_law", scalar_matrix, tol.reduction);
    Ok(())
}

fn base_config(model: ModelKind, n: usize, shape: Vec<usize>, couplings: Couplings, initial: InitialSpec) -> SimConfig {
    SimConfig {
        version: CONFIG_VERSION.into(),
        model,
        n,
        shape,
        couplings,
        generators: GeneratorSpec::Zero,
        initial,
        integrator: IntegratorConfig::rk4(1e-3, 10.0, 0.01),
        observables: ObservablesSpec::default(),
        seed: 20240601,
        output: OutputSpec::default(),
        verify: None,
        sweep: None,
    }
}

fn k01(kappa0: f64, kappa1: f64) -> Couplings {
    Couplings {
        kappa0: Some(kappa0),
        kappa1: Some(kappa1),
        ..Couplings::default()
    }
}

fn with_theorem(mut c: SimConfig, theorem: TheoremId) -> SimConfig {
    let mut v = c.verify.take().unwrap_or_default();
    v.theorem = Some(theorem);
    c.verify = Some(v);
    c
}

/// The desk-scale reference configuration of each scenario.
pub fn reference_config(theorem: TheoremId) -> SimConfig {
    let random = InitialSpec::Random { real: false };
    let config = match theorem {
        TheoremId::L21 => {
            let mut c = base_config(ModelKind::LoheHermitianSphere, 8, vec![3], k01(1.0, 0.2), random);
            c.generators = GeneratorSpec::RandomSkewHermitian {
                scale: 1.0,
                homogeneous: false,
                diameter: None,
            };
            c.integrator = IntegratorConfig::rk4(1e-3, 20.0, 0.01);
            c
        }
        TheoremId::T21a => {
            let mut c = base_config(
                ModelKind::LoheTensor,
                4,
                vec![2, 2],
                Couplings {
                    strengths: Some(vec![1.0, 0.01, 0.01, 0.01]),
                    ..Couplings::default()
                },
                InitialSpec::Clustered {
                    lambda_target: Some(0.02),
                    rho_target: None,
                    real: false,
                },
            );
            c.integrator = IntegratorConfig::rk4(1e-3, 15.0, 0.01);
            c
        }
        TheoremId::T21b => {
            let mut c = base_config(
                ModelKind::LoheTensor,
                4,
                vec![2, 2],
                Couplings {
                    strengths: Some(vec![1.0, 0.004, 0.004, 0.004]),
                    ..Couplings::default()
                },
                InitialSpec::Clustered {
                    lambda_target: Some(0.02),
                    rho_target: None,
                    real: false,
                },
            );
            c.generators = GeneratorSpec::RandomSkewHermitian {
                scale: 0.5,
                homogeneous: false,
                diameter: Some(0.1),
            };
            c.integrator = IntegratorConfig::rk4(1e-3, 15.0, 0.01);
            c.verify = Some(VerifyOptions {
                ratios: Some(DEFAULT_RATIOS.to_vec()),
                ..VerifyOptions::default()
            });
            c
        }
        TheoremId::P21 => {
            let mut c = base_config(ModelKind::LoheHermitianSphere, 4, vec![2], k01(1.0, 0.2), random);
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            c.generators = GeneratorSpec::Explicit {
                entries: vec![vec![zero, one, -one, zero]; 4],
            };
            c.integrator = IntegratorConfig::rk4(1e-3, 5.0, 0.01);
            c
        }
        TheoremId::P31 => {
            let mut c = base_config(ModelKind::SubsystemA, 5, vec![2], k01(1.0, 0.0), random);
            c.observables.all_cross_ratios = true;
            c
        }
        TheoremId::T31 => {
            let mut c = base_config(
                ModelKind::SubsystemA,
                8,
                vec![3],
                k01(1.0, 0.0),
                InitialSpec::Clustered {
                    lambda_target: Some(0.3),
                    rho_target: None,
                    real: false,
                },
            );
            c.integrator = IntegratorConfig::rk4(1e-3, 10.0, 1e-3);
            c
        }
        TheoremId::T32 => {
            let mut c = base_config(ModelKind::SubsystemB, 6, vec![2], k01(0.0, 1.0), random);
            c.integrator = IntegratorConfig::rk4(1e-3, 10.0, 1e-3);
            c
        }
        TheoremId::P32 => {
            let mut c = base_config(ModelKind::SubsystemB, 6, vec![2], k01(0.0, 1.0), random);
            c.integrator = IntegratorConfig::rk4(1e-3, 10.0, 1e-3);
            c
        }
        TheoremId::L32 | TheoremId::P33 => {
            base_config(ModelKind::KuramotoFrustration, 10, vec![3], k01(0.0, 1.0), random)
        }
        TheoremId::L41 => {
            let mut c = base_config(ModelKind::LoheHermitianSphere, 8, vec![3], k01(1.0, 0.2), random);
            c.integrator = IntegratorConfig::rk4(1e-3, 10.0, 1e-3);
            c
        }
        TheoremId::C41 => {
            let mut c = base_config(ModelKind::LoheHermitianSphere, 6, vec![2], k01(1.0, 0.1), random);
            c.integrator = IntegratorConfig::rk4(1e-3, 20.0, 0.01);
            c
        }
        TheoremId::T41 | TheoremId::T42 => {
            let mut c = base_config(
                ModelKind::LoheHermitianSphere,
                4,
                vec![2],
                k01(1.0, 0.125),
                InitialSpec::Clustered {
                    lambda_target: None,
                    rho_target: Some(0.9),
                    real: false,
                },
            );
            if theorem == TheoremId::T42 {
                c.verify = Some(VerifyOptions {
                    deltas: Some(DEFAULT_DELTAS.to_vec()),
                    p_values: Some(DEFAULT_P_VALUES.to_vec()),
                    ..VerifyOptions::default()
                });
            }
            c
        }
        TheoremId::R42 => base_config(ModelKind::LoheHermitianSphere, 6, vec![3], k01(1.0, 0.4), random),
        TheoremId::D1Reduction => base_config(ModelKind::LoheHermitianSphere, 5, vec![3], k01(1.0, 0.2), random),
    };
    with_theorem(config, theorem)
}

/// Rank-2 tensor counterpart of the norm-conservation reference run.
pub fn reference_tensor_norm_config() -> SimConfig {
    let mut c = base_config(
        ModelKind::LoheTensor,
        6,
        vec![2, 2],
        Couplings {
            strengths: Some(vec![1.0, 0.2, 0.3, 0.1]),
            ..Couplings::default()
        },
        InitialSpec::Random { real: false },
    );
    c.generators = GeneratorSpec::RandomSkewHermitian {
        scale: 1.0,
        homogeneous: false,
        diameter: None,
    };
    c.integrator = IntegratorConfig::rk4(1e-3, 20.0, 0.01);
    with_theorem(c, TheoremId::L21)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_ids_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(t.as_str().parse::<TheoremId>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.as_str()));
        }
        assert!("T9.9".parse::<TheoremId>().is_err());
    }

    #[test]
    fn eta_is_the_upper_root() {
        let e = eta(1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(e, 0.5);
        let e = eta(1.0, 0.012, 1.0, 0.1).unwrap();
        let b = 1.0 - 0.048;
        assert!((2.0 * e * e - b * e + 0.1).abs() <= 1e-15);
        assert!(e > 0.0 && e < b / 2.0);
        assert!(eta(1.0, 0.03, 1.0, 0.1).is_none());
    }

    #[test]
    fn gates_reject_large_initial_spread() {
        let mut c = reference_config(TheoremId::T31);
        c.initial = InitialSpec::Clustered {
            lambda_target: Some(0.7),
            rho_target: None,
            real: false,
        };
        let r = run_scenario(&ScenarioSpec::from_config(c, None).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisNotMet);
        assert!(r.checks.is_empty());
    }

    #[test]
    fn kappa1_window_gate() {
        for k1 in [0.5, 1.0] {
            let mut c = reference_config(TheoremId::T41);
            c.couplings.kappa1 = Some(k1);
            let r = run_scenario(&ScenarioSpec::from_config(c, None).unwrap()).unwrap();
            assert_eq!(r.verdict, Verdict::HypothesisNotMet);
        }
    }

    #[test]
    fn zero_perturbation_is_rejected() {
        let mut c = reference_config(TheoremId::T42);
        c.verify.as_mut().unwrap().deltas = Some(vec![0.0]);
        assert!(run_scenario(&ScenarioSpec::from_config(c, None).unwrap()).is_err());
    }

    #[test]
    fn identical_ensembles_pass_vacuously() {
        for theorem in [TheoremId::T31, TheoremId::T41] {
            let mut c = reference_config(theorem);
            c.initial = InitialSpec::Identical { real: false };
            c.integrator = IntegratorConfig::rk4(1e-2, 1.0, 0.05);
            let r = run_scenario(&ScenarioSpec::from_config(c, Some(theorem)).unwrap()).unwrap();
            if theorem == TheoremId::T41 {
                // rho^in = 1 > (N - 2) / N, so the gates hold.
                assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.failed_checks());
            } else {
                assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.failed_checks());
            }
        }
    }

    #[test]
    fn short_reduction_chain_passes() {
        let mut c = reference_config(TheoremId::D1Reduction);
        c.verify.as_mut().unwrap().samples = Some(5);
        let r = run_scenario(&ScenarioSpec::from_config(c, None).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.failed_checks());
    }
}
