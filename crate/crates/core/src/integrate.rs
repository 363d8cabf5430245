//! Explicit Runge-Kutta time integration with norm-drift monitoring.
//!
//! Samples always land on accepted step boundaries: fixed-step runs sample every
//! `sample_every / dt` steps, adaptive runs clip the step so it hits each sample time.

use std::fmt::Debug;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{LoheError, Result};
use crate::models::EnsembleState;

/// A state that explicit Runge-Kutta schemes can advance.
pub trait StateVector: Clone + Debug + Send + Sync {
    /// `self += a * other`.
    fn axpy(&mut self, a: f64, other: &Self);
    fn all_finite(&self) -> bool;
    /// Real components in a fixed order, used by the adaptive error norm.
    fn visit_reals(&self, f: &mut dyn FnMut(f64));
    /// Per-member norms monitored for drift (empty when nothing is conserved).
    fn norms(&self) -> Vec<f64>;
    /// Rescales member `j` to norm `norms[j]`.
    fn rescale_to(&mut self, norms: &[f64]);
    fn set_time(&mut self, _t: f64) {}
}

impl StateVector for EnsembleState {
    fn axpy(&mut self, a: f64, other: &Self) {
        let a = Complex64::new(a, 0.0);
        for (m, o) in self.members.iter_mut().zip(&other.members) {
            m.axpy(a, o);
        }
    }

    fn all_finite(&self) -> bool {
        self.members
            .iter()
            .all(|m| m.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    fn visit_reals(&self, f: &mut dyn FnMut(f64)) {
        for m in &self.members {
            for z in m.entries() {
                f(z.re);
                f(z.im);
            }
        }
    }

    fn norms(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.norm()).collect()
    }

    fn rescale_to(&mut self, norms: &[f64]) {
        for (m, &target) in self.members.iter_mut().zip(norms) {
            let n = m.norm();
            if n > 0.0 {
                m.scale(Complex64::new(target / n, 0.0));
            }
        }
    }

    fn set_time(&mut self, t: f64) {
        self.time = t;
    }
}

/// Phase vector of a Kuramoto-type model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phases(pub Vec<f64>);

impl StateVector for Phases {
    fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
    }

    fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    fn visit_reals(&self, f: &mut dyn FnMut(f64)) {
        self.0.iter().for_each(|&x| f(x));
    }

    fn norms(&self) -> Vec<f64> {
        Vec::new()
    }

    fn rescale_to(&mut self, _norms: &[f64]) {}
}

/// An autonomous or time-dependent vector field.
pub trait Dynamics: Sync {
    type State: StateVector;

    fn rhs(&self, t: f64, state: &Self::State) -> Result<Self::State>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Rk4 { dt: f64 },
    Rk45 { dt_init: f64, rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Renormalize {
    #[default]
    Off,
    OnDrift { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_end: f64,
    #[serde(default)]
    pub renormalize: Renormalize,
    pub sample_every: f64,
}

/// Hard cap on adaptive steps per run.
const MAX_ADAPTIVE_STEPS: usize = 50_000_000;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64, sample_every: f64) -> Self {
        Self {
            method: Method::Rk4 { dt },
            t_end,
            renormalize: Renormalize::Off,
            sample_every,
        }
    }

    pub fn rk45(rtol: f64, atol: f64, t_end: f64, sample_every: f64) -> Self {
        Self {
            method: Method::Rk45 {
                dt_init: 1e-3,
                rtol,
                atol,
            },
            t_end,
            renormalize: Renormalize::Off,
            sample_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LoheError::InvalidInput(msg));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.sample_every > 0.0) {
            return bad(format!(
                "sample_every must be positive, got {}",
                self.sample_every
            ));
        }
        match self.method {
            Method::Rk4 { dt } => {
                if !(dt > 0.0) || dt >= self.t_end {
                    return bad(format!("dt must lie in (0, t_end), got {dt}"));
                }
                integer_ratio(self.t_end, dt, "t_end / dt")?;
                integer_ratio(self.sample_every, dt, "sample_every / dt")?;
            }
            Method::Rk45 {
                dt_init,
                rtol,
                atol,
            } => {
                if !(dt_init > 0.0) || dt_init >= self.t_end {
                    return bad(format!("dt_init must lie in (0, t_end), got {dt_init}"));
                }
                if !(rtol > 0.0) || !(atol > 0.0) {
                    return bad("rtol and atol must be positive".into());
                }
            }
        }
        if let Renormalize::OnDrift { threshold } = self.renormalize {
            if !(threshold > 0.0) {
                return bad(format!("renormalize threshold must be positive, got {threshold}"));
            }
        }
        Ok(())
    }

    fn sample_times(&self) -> Vec<f64> {
        let count = (self.t_end / self.sample_every * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (1..=count).map(|k| k as f64 * self.sample_every).collect();
        if times.last().map_or(true, |&t| self.t_end - t > 1e-12 * self.t_end) {
            times.push(self.t_end);
        } else if let Some(last) = times.last_mut() {
            *last = self.t_end;
        }
        times
    }
}

fn integer_ratio(a: f64, b: f64, what: &str) -> Result<usize> {
    let r = a / b;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-9 * r.max(1.0) {
        return Err(LoheError::InvalidInput(format!(
            "{what} = {r} must be a positive integer"
        )));
    }
    Ok(k as usize)
}

/// Sampled solution of an initial-value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Per sample, `max_j | ||member_j|| - ||member_j(0)|| |`.
    pub norm_drift: Vec<f64>,
    /// Times at which members were rescaled back to their initial norms.
    pub renormalizations: Vec<f64>,
    pub steps: usize,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm_drift.iter().copied().fold(0.0, f64::max)
    }
}

/// An integration fault together with everything computed before it.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct IntegrationFailure<S: Debug> {
    pub error: LoheError,
    pub partial: Trajectory<S>,
}

fn fault(t: f64, reason: impl Into<String>) -> LoheError {
    LoheError::IntegrationFault {
        time: t,
        reason: reason.into(),
    }
}

fn checked_rhs<D: Dynamics>(dynamics: &D, t: f64, y: &D::State) -> Result<D::State> {
    let k = dynamics.rhs(t, y)?;
    if !k.all_finite() {
        return Err(fault(t, "non-finite derivative"));
    }
    Ok(k)
}

fn combine<S: StateVector>(y: &S, terms: &[(f64, &S)]) -> S {
    let mut out = y.clone();
    for &(a, k) in terms {
        if a != 0.0 {
            out.axpy(a, k);
        }
    }
    out
}

/// One classical fourth-order Runge-Kutta step.
pub fn step_rk4<D: Dynamics>(dynamics: &D, t: f64, y: &D::State, dt: f64) -> Result<D::State> {
    if !(dt > 0.0) {
        return Err(LoheError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let k1 = checked_rhs(dynamics, t, y)?;
    let k2 = checked_rhs(dynamics, t + dt / 2.0, &combine(y, &[(dt / 2.0, &k1)]))?;
    let k3 = checked_rhs(dynamics, t + dt / 2.0, &combine(y, &[(dt / 2.0, &k2)]))?;
    let k4 = checked_rhs(dynamics, t + dt, &combine(y, &[(dt, &k3)]))?;
    let next = combine(
        y,
        &[
            (dt / 6.0, &k1),
            (dt / 3.0, &k2),
            (dt / 3.0, &k3),
            (dt / 6.0, &k4),
        ],
    );
    if !next.all_finite() {
        return Err(fault(t + dt, "non-finite state"));
    }
    Ok(next)
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step; returns the fifth-order solution and the embedded error estimate.
fn step_dp45<D: Dynamics>(
    dynamics: &D,
    t: f64,
    y: &D::State,
    h: f64,
) -> Result<(D::State, D::State)> {
    let mut ks: Vec<D::State> = Vec::with_capacity(7);
    for stage in 0..7 {
        let terms: Vec<(f64, &D::State)> = (0..stage)
            .map(|s| (h * DP_A[stage][s], &ks[s]))
            .collect();
        let ys = combine(y, &terms);
        ks.push(checked_rhs(dynamics, t + DP_C[stage] * h, &ys)?);
    }
    let high: Vec<(f64, &D::State)> = (0..7).map(|s| (h * DP_B5[s], &ks[s])).collect();
    let next = combine(y, &high);
    let mut err = ks[0].clone();
    err.axpy(-1.0, &ks[0]);
    for s in 0..7 {
        err.axpy(h * (DP_B5[s] - DP_B4[s]), &ks[s]);
    }
    if !next.all_finite() {
        return Err(fault(t + h, "non-finite state"));
    }
    Ok((next, err))
}

fn error_norm<S: StateVector>(err: &S, y0: &S, y1: &S, rtol: f64, atol: f64) -> f64 {
    let (mut e, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
    err.visit_reals(&mut |x| e.push(x));
    y0.visit_reals(&mut |x| a.push(x));
    y1.visit_reals(&mut |x| b.push(x));
    e.iter()
        .zip(a.iter().zip(&b))
        .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

/// Records samples, drift and renormalization events for one trajectory.
struct Recorder<S> {
    traj: Trajectory<S>,
    reference: Vec<f64>,
    policy: Renormalize,
}

impl<S: StateVector> Recorder<S> {
    fn new(initial: &S, policy: Renormalize) -> Self {
        let mut first = initial.clone();
        first.set_time(0.0);
        Self {
            reference: initial.norms(),
            traj: Trajectory {
                times: vec![0.0],
                states: vec![first],
                norm_drift: vec![0.0],
                renormalizations: Vec::new(),
                steps: 0,
            },
            policy,
        }
    }

    fn drift(&self, y: &S) -> f64 {
        y.norms()
            .iter()
            .zip(&self.reference)
            .map(|(n, r)| (n - r).abs())
            .fold(0.0, f64::max)
    }

    /// Applies the renormalization policy after an accepted step.
    fn after_step(&mut self, t: f64, y: &mut S) {
        self.traj.steps += 1;
        if let Renormalize::OnDrift { threshold } = self.policy {
            let drift = self.drift(y);
            if drift > threshold {
                y.rescale_to(&self.reference);
                self.traj.renormalizations.push(t);
                log::debug!("renormalized at t = {t} (drift {drift:e})");
            }
        }
    }

    fn sample(&mut self, t: f64, y: &S) {
        let mut s = y.clone();
        s.set_time(t);
        self.traj.norm_drift.push(self.drift(y));
        self.traj.times.push(t);
        self.traj.states.push(s);
    }
}

/// Integrates `dynamics` from `initial` over `[0, t_end]`.
pub fn integrate<D: Dynamics>(
    dynamics: &D,
    initial: &D::State,
    config: &IntegratorConfig,
) -> std::result::Result<Trajectory<D::State>, IntegrationFailure<D::State>> {
    let mut rec = Recorder::new(initial, config.renormalize);
    if let Err(error) = config.validate() {
        return Err(IntegrationFailure {
            error,
            partial: rec.traj,
        });
    }
    let outcome = match config.method {
        Method::Rk4 { dt } => run_fixed(dynamics, initial, config, dt, &mut rec, None),
        Method::Rk45 {
            dt_init,
            rtol,
            atol,
        } => run_adaptive(dynamics, initial, config, dt_init, rtol, atol, &mut rec, None),
    };
    match outcome {
        Ok(()) => Ok(rec.traj),
        Err(error) => Err(IntegrationFailure {
            error,
            partial: rec.traj,
        }),
    }
}

fn run_fixed<D: Dynamics>(
    dynamics: &D,
    initial: &D::State,
    config: &IntegratorConfig,
    dt: f64,
    rec: &mut Recorder<D::State>,
    mut steps_out: Option<&mut Vec<f64>>,
) -> Result<()> {
    let n_steps = integer_ratio(config.t_end, dt, "t_end / dt")?;
    let every = integer_ratio(config.sample_every, dt, "sample_every / dt")?;
    let mut y = initial.clone();
    for k in 0..n_steps {
        let t = k as f64 * dt;
        y = step_rk4(dynamics, t, &y, dt)?;
        let t_next = (k + 1) as f64 * dt;
        rec.after_step(t_next, &mut y);
        if let Some(out) = steps_out.as_deref_mut() {
            out.push(dt);
        }
        if (k + 1) % every == 0 || k + 1 == n_steps {
            rec.sample(t_next, &y);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_adaptive<D: Dynamics>(
    dynamics: &D,
    initial: &D::State,
    config: &IntegratorConfig,
    dt_init: f64,
    rtol: f64,
    atol: f64,
    rec: &mut Recorder<D::State>,
    mut steps_out: Option<&mut Vec<(f64, bool)>>,
) -> Result<()> {
    let targets = config.sample_times();
    let mut y = initial.clone();
    let mut t = 0.0;
    let mut h = dt_init;
    let mut steps = 0usize;
    for &target in &targets {
        while t < target {
            steps += 1;
            if steps > MAX_ADAPTIVE_STEPS {
                return Err(fault(t, "adaptive step budget exhausted"));
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            if step < 1e-14 * target.max(1.0) {
                return Err(fault(t, format!("step size underflow ({step:e})")));
            }
            let (next, err) = step_dp45(dynamics, t, &y, step)?;
            let e = error_norm(&err, &y, &next, rtol, atol);
            let factor = if e == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if e <= 1.0 {
                y = next;
                t = if clipped { target } else { t + step };
                rec.after_step(t, &mut y);
                if let Some(out) = steps_out.as_deref_mut() {
                    out.push((step, clipped));
                }
                // A clipped step says nothing about the natural step size.
                if !clipped || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * factor.min(1.0);
            }
        }
        rec.sample(target, &y);
    }
    Ok(())
}

/// Integrates two initial conditions on exactly the same time grid.
///
/// In adaptive mode the step sequence is chosen by `initial_a` and replayed for `initial_b`.
#[allow(clippy::type_complexity)]
pub fn integrate_pair<D: Dynamics>(
    dynamics: &D,
    initial_a: &D::State,
    initial_b: &D::State,
    config: &IntegratorConfig,
) -> std::result::Result<
    (Trajectory<D::State>, Trajectory<D::State>),
    IntegrationFailure<D::State>,
> {
    match config.method {
        Method::Rk4 { .. } => {
            let a = integrate(dynamics, initial_a, config)?;
            let b = integrate(dynamics, initial_b, config)?;
            Ok((a, b))
        }
        Method::Rk45 {
            dt_init,
            rtol,
            atol,
        } => {
            let mut rec_a = Recorder::new(initial_a, config.renormalize);
            let mut steps = Vec::new();
            let fail = |error, partial| IntegrationFailure { error, partial };
            if let Err(e) = config.validate() {
                return Err(fail(e, rec_a.traj));
            }
            if let Err(e) = run_adaptive(
                dynamics,
                initial_a,
                config,
                dt_init,
                rtol,
                atol,
                &mut rec_a,
                Some(&mut steps),
            ) {
                return Err(fail(e, rec_a.traj));
            }
            let mut rec_b = Recorder::new(initial_b, config.renormalize);
            let mut y = initial_b.clone();
            let mut t = 0.0;
            let mut next_sample = 1;
            for (h, clipped) in steps {
                let next = match step_dp45(dynamics, t, &y, h) {
                    Ok((next, _)) => next,
                    Err(e) => return Err(fail(e, rec_b.traj)),
                };
                y = next;
                t = if clipped {
                    rec_a.traj.times[next_sample]
                } else {
                    t + h
                };
                rec_b.after_step(t, &mut y);
                if clipped {
                    rec_b.sample(t, &y);
                    next_sample += 1;
                }
            }
            Ok((rec_a.traj, rec_b.traj))
        }
    }
}
