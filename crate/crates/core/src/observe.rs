//! Diagnostics on ensemble configurations and phase models.
//!
//! Near consensus `1 - h_ij` loses every significant digit when formed by subtraction, so
//! the correlation gaps are computed from member differences on the unit-sphere
//! projection: `Re(1 - h_ij) = |z_i - z_j|^2 / 2` and `Im(1 - h_ij) = -Im<z_i, z_j - z_i>`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LoheError, Result};
use crate::linalg::{frobenius_norm, inner, ComplexTensor};
use crate::models::{EnsembleState, PhaseModel};

/// Denominator magnitude below which a cross ratio is degenerate.
pub const CROSS_RATIO_DEGENERACY_TOL: f64 = 1e-12;
/// Largest admissible phase increment between consecutive samples.
pub const MAX_PHASE_INCREMENT: f64 = PI / 2.0;

/// Pairwise inner products `h_ij = <z_i, z_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    h: Vec<Complex64>,
}

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self, i: usize, j: usize) -> Complex64 {
        self.h[i * self.n + j]
    }

    /// `R_ij = Re h_ij`.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.h(i, j).re
    }

    /// `I_ij = Im h_ij`.
    pub fn i(&self, i: usize, j: usize) -> f64 {
        self.h(i, j).im
    }

    /// `J_ij = 1 - R_ij`.
    pub fn j(&self, i: usize, j: usize) -> f64 {
        1.0 - self.r(i, j)
    }
}

/// Frobenius inner products of all member pairs (any rank).
pub fn correlations(state: &EnsembleState) -> CorrelationMatrix {
    let n = state.len();
    let mut h = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in i..n {
            let v = inner(state.member(i), state.member(j));
            h[i * n + j] = v;
            h[j * n + i] = v.conj();
        }
    }
    CorrelationMatrix { n, h }
}

/// `1 - h_ij` for every pair, evaluated without cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMatrix {
    n: usize,
    gap: Vec<Complex64>,
}

impl GapMatrix {
    pub fn new(state: &EnsembleState) -> Self {
        let unit: Vec<ComplexTensor> = state
            .members
            .iter()
            .map(|m| if m.norm() > 0.0 { m.normalized() } else { m.clone() })
            .collect();
        let n = unit.len();
        let mut gap = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i + 1..n {
                let zi = unit[i].entries();
                let diff: Vec<Complex64> = unit[j]
                    .entries()
                    .iter()
                    .zip(zi)
                    .map(|(b, a)| b - a)
                    .collect();
                let re = 0.5 * diff.iter().map(|d| d.norm_sqr()).sum::<f64>();
                let im = -inner(zi, &diff).im;
                gap[i * n + j] = Complex64::new(re, im);
                gap[j * n + i] = Complex64::new(re, -im);
            }
        }
        Self { n, gap }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.gap[i * self.n + j]
    }

    /// Largest `|1 - h_ij|` over `i != j`, with the lexicographically first maximizing pair.
    pub fn max_abs(&self) -> (f64, Option<(usize, usize)>) {
        let mut best = (0.0, None);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j).norm();
                if i != j && (best.1.is_none() || v > best.0) {
                    best = (v, Some((i, j)));
                }
            }
        }
        best
    }

    /// `sum_{i != j} ln |1 - h_ij|`; `-inf` if any pair coincides.
    pub fn log_sum(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).norm().ln();
                }
            }
        }
        s
    }

    /// `C_ijkl = (1-h_ij)(1-h_kl) / ((1-h_il)(1-h_kj))`.
    pub fn cross_ratio(&self, i: usize, j: usize, k: usize, l: usize) -> Result<Complex64> {
        let n = self.n;
        if [i, j, k, l].iter().any(|&x| x >= n) {
            return Err(LoheError::InvalidInput(format!(
                "cross-ratio indices ({i}, {j}, {k}, {l}) out of range for N = {n}"
            )));
        }
        let (il, kj) = (self.get(i, l), self.get(k, j));
        if il.norm() <= CROSS_RATIO_DEGENERACY_TOL || kj.norm() <= CROSS_RATIO_DEGENERACY_TOL {
            return Err(LoheError::DegenerateConfiguration(format!(
                "cross ratio ({i}, {j}, {k}, {l}) has a vanishing denominator"
            )));
        }
        Ok(self.get(i, j) * self.get(k, l) / (il * kj))
    }
}

pub fn cross_ratio(
    state: &EnsembleState,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<Complex64> {
    GapMatrix::new(state).cross_ratio(i, j, k, l)
}

/// Order parameter `rho = ||T_c||`.
pub fn order_parameter(state: &EnsembleState) -> f64 {
    frobenius_norm(&state.centroid())
}

/// `max_{i,j} ||T_i - T_j||`, the ensemble diameter.
pub fn diam_euclid(state: &EnsembleState) -> f64 {
    let n = state.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = state.members[i].sub(&state.members[j]).norm();
            best = best.max(d);
        }
    }
    best
}

/// `max_{i != j} |1 - h_ij|` (the correlation diameter `lambda`).
pub fn diam_corr(state: &EnsembleState) -> f64 {
    GapMatrix::new(state).max_abs().0
}

/// `max_{i != j} |1 - h_ij|^2`.
pub fn lyapunov(state: &EnsembleState) -> f64 {
    let d = diam_corr(state);
    d * d
}

/// Per-sample diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub rho: f64,
    pub diam_euclid: f64,
    pub diam_corr: f64,
    pub lyapunov: f64,
    pub potential: Option<f64>,
    pub norm_drift: f64,
    pub cross_ratios: Vec<Complex64>,
}

/// Evaluates every observable on one sample.
///
/// Degenerate cross-ratio tuples are reported as NaN.
pub fn observe_state(
    state: &EnsembleState,
    t: f64,
    norm_drift: f64,
    tuples: &[[usize; 4]],
    potential: Option<f64>,
) -> ObservableRecord {
    let gaps = GapMatrix::new(state);
    let dc = gaps.max_abs().0;
    let cross_ratios = tuples
        .iter()
        .map(|&[i, j, k, l]| match gaps.cross_ratio(i, j, k, l) {
            Ok(c) => c,
            Err(e) => {
                log::debug!("t = {t}: {e}");
                Complex64::new(f64::NAN, f64::NAN)
            }
        })
        .collect();
    ObservableRecord {
        t,
        rho: order_parameter(state),
        diam_euclid: diam_euclid(state),
        diam_corr: dc,
        lyapunov: dc * dc,
        potential,
        norm_drift,
        cross_ratios,
    }
}

/// Phases recovered from a Subsystem-B trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseExtraction {
    /// `theta[s][j]` at sample `s`.
    pub theta: Vec<Vec<f64>>,
    /// Per sample, `max_j ||z_j(t) - e^{i theta_j} z_j^in||`.
    pub residual: Vec<f64>,
}

impl PhaseExtraction {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

/// Unwrapped `theta_j(t) = arg <z_j^in, z_j(t)>` along a sampled trajectory.
pub fn extract_phases(
    times: &[f64],
    states: &[EnsembleState],
    initial: &EnsembleState,
    tolerance: f64,
) -> Result<PhaseExtraction> {
    let n = initial.len();
    let mut theta: Vec<Vec<f64>> = Vec::with_capacity(states.len());
    let mut residual = Vec::with_capacity(states.len());
    let mut prev = vec![0.0; n];
    for (s, (&t, state)) in times.iter().zip(states).enumerate() {
        if state.len() != n {
            return Err(LoheError::ShapeMismatch(format!(
                "sample {s} has {} members, initial has {n}",
                state.len()
            )));
        }
        let mut row = Vec::with_capacity(n);
        let mut worst = 0.0f64;
        for j in 0..n {
            let zin = initial.member(j);
            let h = inner(zin, state.member(j));
            let raw = h.im.atan2(h.re);
            let th = if s == 0 {
                raw
            } else {
                let mut delta = raw - prev[j];
                delta -= 2.0 * PI * (delta / (2.0 * PI)).round();
                if delta.abs() > MAX_PHASE_INCREMENT {
                    return Err(LoheError::PhaseAliasing {
                        time: t,
                        increment: delta,
                    });
                }
                prev[j] + delta
            };
            let rot = Complex64::from_polar(1.0, th);
            let r = state
                .member(j)
                .iter()
                .zip(zin)
                .map(|(z, w)| (z - rot * w).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
            row.push(th);
        }
        if worst > tolerance {
            return Err(LoheError::ReductionViolation {
                time: t,
                residual: worst,
                tolerance,
            });
        }
        prev.clone_from(&row);
        theta.push(row);
        residual.push(worst);
    }
    Ok(PhaseExtraction { theta, residual })
}

/// `V = (kappa1/N) sum_{i,j} R_ij (1 - cos(theta_i - theta_j + alpha_ji))`.
pub fn potential(model: &PhaseModel) -> f64 {
    let n = model.n();
    let th = &model.theta;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += model.amplitude(i, j) * (1.0 - (th[i] - th[j] + model.frustration(j, i)).cos());
        }
    }
    model.kappa1 / n as f64 * s
}

/// `dV/dtheta_k = (2 kappa1/N) sum_j R_kj sin(theta_k - theta_j + alpha_jk)`.
pub fn potential_gradient(model: &PhaseModel) -> Vec<f64> {
    let n = model.n();
    let th = &model.theta;
    let scale = 2.0 * model.kappa1 / n as f64;
    (0..n)
        .map(|k| {
            let row: f64 = (0..n)
                .map(|j| model.amplitude(k, j) * (th[k] - th[j] + model.frustration(j, k)).sin())
                .sum();
            scale * row
        })
        .collect()
}

/// Least-squares fit of `ln y = intercept - rate * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Minimum number of samples in a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits an exponential rate over the trailing `window` fraction of the time span.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: f64) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(LoheError::ShapeMismatch(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(LoheError::FitDomain(format!(
            "window fraction must lie in (0, 1], got {window}"
        )));
    }
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(LoheError::FitDomain("empty series".into()));
    };
    let start = t1 - window * (t1 - t0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= start - 1e-12 * t1.abs().max(1.0))
        .map(|(&t, &y)| (t, y))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(LoheError::FitDomain(format!(
            "{} samples in the fit window, need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some((t, y)) = pts.iter().find(|(_, y)| !(*y > 0.0) || !y.is_finite()) {
        return Err(LoheError::FitDomain(format!(
            "non-positive value {y} at t = {t}"
        )));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let lm = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        let (dt, dl) = (t - tm, y.ln() - lm);
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    let slope = stl / stt;
    let ss_res = (sll - slope * stl).max(0.0);
    // Total variation at rounding level means a flat series, which the line fits exactly.
    let flat = sll <= m * (8.0 * f64::EPSILON * lm.abs().max(1.0)).powi(2);
    let r2 = if flat { 1.0 } else { 1.0 - ss_res / sll };
    Ok(RateFit {
        rate: -slope,
        intercept: lm - slope * tm,
        r2,
        samples: pts.len(),
    })
}

/// Centered differences at interior samples: `(t_k, (y_{k+1} - y_{k-1}) / (t_{k+1} - t_{k-1}))`.
pub fn centered_derivative(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    (1..times.len().saturating_sub(1))
        .map(|k| {
            (
                times[k],
                (values[k + 1] - values[k - 1]) / (times[k + 1] - times[k - 1]),
            )
        })
        .collect()
}

/// `d(rho^2)/dt` along the LHS flow with zero frequencies:
/// `(2 k0/N) sum (rho^2 - |h_ic|^2) + (4 (k0 + k1)/N) sum (Im h_ic)^2`.
pub fn rho_squared_rate(state: &EnsembleState, kappa0: f64, kappa1: f64) -> f64 {
    let zc = state.centroid();
    let rho2 = zc.norm().powi(2);
    let n = state.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for j in 0..state.len() {
        let h = inner(state.member(j), zc.entries());
        a += rho2 - h.norm_sqr();
        b += h.im * h.im;
    }
    2.0 * kappa0 / n * a + 4.0 * (kappa0 + kappa1) / n * b
}

/// `d/dt sum_{i != j} ln|1 - h_ij| = -2 kappa0 N (N - 1) rho^2` along Subsystem A.
pub fn log_sum_rate(state: &EnsembleState, kappa0: f64) -> f64 {
    let n = state.len() as f64;
    -2.0 * kappa0 * n * (n - 1.0) * order_parameter(state).powi(2)
}

/// Subsystem-B phase velocities `2 kappa1 Im<z_j, z_c>`.
pub fn subsystem_b_frequencies(state: &EnsembleState, kappa1: f64) -> Vec<f64> {
    let zc = state.centroid();
    (0..state.len())
        .map(|j| 2.0 * kappa1 * inner(state.member(j), zc.entries()).im)
        .collect()
}

/// `max_j ||A_j - B_j||`.
pub fn max_member_distance(a: &EnsembleState, b: &EnsembleState) -> f64 {
    a.members
        .iter()
        .zip(&b.members)
        .map(|(x, y)| x.sub(y).norm())
        .fold(0.0, f64::max)
}

/// `(sum_j ||T_j - S_j||^p)^{1/p}`.
pub fn ensemble_p_distance(a: &EnsembleState, b: &EnsembleState, p: f64) -> f64 {
    a.members
        .iter()
        .zip(&b.members)
        .map(|(x, y)| x.sub(y).norm().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}
