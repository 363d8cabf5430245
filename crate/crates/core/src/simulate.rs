//! Runs a configured simulation and turns the trajectory into observable records.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{SimConfig, Simulation};
use crate::error::LoheError;
use crate::integrate::{integrate, Phases, Trajectory};
use crate::models::{EnsembleState, ModelKind, PhaseModel};
use crate::observe::{observe_state, potential, ObservableRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub model: ModelKind,
    pub n: usize,
    pub shape: Vec<usize>,
    pub seed: u64,
    pub samples: usize,
    pub steps: usize,
    pub t_end: f64,
    pub max_norm_drift: f64,
    pub renormalizations: usize,
    pub initial_rho: f64,
    pub final_rho: f64,
    pub final_diam_corr: f64,
    pub cross_ratio_tuples: Vec<[usize; 4]>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub records: Vec<ObservableRecord>,
    pub summary: SimulationSummary,
}

/// A failed run with the records computed up to the fault.
#[derive(Debug, Clone)]
pub struct SimulationFailure {
    pub error: LoheError,
    pub records: Vec<ObservableRecord>,
}

impl From<LoheError> for SimulationFailure {
    fn from(error: LoheError) -> Self {
        Self {
            error,
            records: Vec::new(),
        }
    }
}

/// `z_j = e^{i theta_j} z_j^ref`.
pub fn rotate_members(reference: &EnsembleState, theta: &[f64]) -> EnsembleState {
    let mut s = reference.clone();
    for (m, th) in s.members.iter_mut().zip(theta) {
        m.scale(Complex64::from_polar(1.0, *th));
    }
    s
}

fn ensemble_records(traj: &Trajectory<EnsembleState>, tuples: &[[usize; 4]]) -> Vec<ObservableRecord> {
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&traj.norm_drift)
        .map(|((&t, s), &drift)| observe_state(s, t, drift, tuples, None))
        .collect()
}

fn phase_records(
    traj: &Trajectory<Phases>,
    model: &PhaseModel,
    reference: &EnsembleState,
    tuples: &[[usize; 4]],
) -> Vec<ObservableRecord> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, th)| {
            let v = potential(&model.with_theta(th.0.clone()));
            observe_state(&rotate_members(reference, &th.0), t, 0.0, tuples, Some(v))
        })
        .collect()
}

pub fn run_simulation(config: &SimConfig) -> Result<SimulationOutput, SimulationFailure> {
    config
        .validate()
        .map_err(|e| LoheError::InvalidInput(e.to_string()))?;
    let tuples = config.cross_ratio_tuples();
    let sim = config.build_simulation()?;
    let (records, steps, drift, renorms) = match &sim {
        Simulation::Ensemble { model, initial } => match integrate(model, initial, &config.integrator) {
            Ok(traj) => (
                ensemble_records(&traj, &tuples),
                traj.steps,
                traj.max_norm_drift(),
                traj.renormalizations.len(),
            ),
            Err(f) => {
                return Err(SimulationFailure {
                    error: f.error,
                    records: ensemble_records(&f.partial, &tuples),
                })
            }
        },
        Simulation::Phase { model, reference } => {
            let start = Phases(model.theta.clone());
            match integrate(model, &start, &config.integrator) {
                Ok(traj) => (
                    phase_records(&traj, model, reference, &tuples),
                    traj.steps,
                    0.0,
                    0,
                ),
                Err(f) => {
                    return Err(SimulationFailure {
                        error: f.error,
                        records: phase_records(&f.partial, model, reference, &tuples),
                    })
                }
            }
        }
    };
    for (q, tuple) in tuples.iter().enumerate() {
        let bad = records.iter().filter(|r| r.cross_ratios[q].re.is_nan()).count();
        if bad > 0 {
            log::warn!("cross ratio {tuple:?} degenerate at {bad} of {} samples (written as NaN)", records.len());
        }
    }
    let first = records.first().expect("initial sample");
    let last = records.last().expect("initial sample");
    let summary = SimulationSummary {
        model: config.model,
        n: config.n,
        shape: config.shape.clone(),
        seed: config.seed,
        samples: records.len(),
        steps,
        t_end: config.integrator.t_end,
        max_norm_drift: drift,
        renormalizations: renorms,
        initial_rho: first.rho,
        final_rho: last.rho,
        final_diam_corr: last.diam_corr,
        cross_ratio_tuples: tuples,
    };
    Ok(SimulationOutput { records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(model: &str, initial: &str) -> SimConfig {
        parse_config(&format!(
            r#"{{
            "version": "v1", "model": "{model}", "n": 4, "shape": [2],
            "couplings": {{"kappa0": 1.0, "kappa1": 0.5}},
            "initial": {initial},
            "integrator": {{"method": {{"kind": "rk4", "dt": 0.01}}, "t_end": 1.0, "sample_every": 0.1}},
            "observables": {{"cross_ratios": [[0, 1, 2, 3]]}}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn identical_ensemble_is_an_equilibrium() {
        let out = run_simulation(&config("lohe_hermitian_sphere", r#"{"kind": "identical"}"#)).unwrap();
        assert_eq!(out.records.len(), 11);
        for r in &out.records {
            assert!((r.rho - 1.0).abs() <= 1e-15);
            assert_eq!(r.diam_corr, 0.0);
            assert!(r.cross_ratios[0].re.is_nan());
        }
    }

    #[test]
    fn phase_runs_report_potential() {
        let out = run_simulation(&config("kuramoto_frustration", r#"{"kind": "random"}"#)).unwrap();
        assert!(out.records.iter().all(|r| r.potential.is_some()));
        let v: Vec<f64> = out.records.iter().map(|r| r.potential.unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn subsystem_a_keeps_cross_ratio() {
        let out = run_simulation(&config("subsystem_a", r#"{"kind": "random"}"#)).unwrap();
        let c0 = out.records[0].cross_ratios[0];
        assert!(out
            .records
            .iter()
            .all(|r| (r.cross_ratios[0] - c0).norm() <= 1e-8));
    }
}
