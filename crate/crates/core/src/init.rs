//! Deterministic initial data and generator ensembles.
//!
//! Every draw comes from a ChaCha stream keyed by `(seed, purpose, member)`, so the data
//! for member `j` does not depend on how many other members exist or in which order (or on
//! which thread) they are generated.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LoheError, Result};
use crate::linalg::{expm, ComplexTensor, SkewHermitianGenerator, TensorShape};
use crate::models::EnsembleState;
use crate::observe::{diam_corr, order_parameter};

/// Stream purposes; each gets its own family of ChaCha streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Member = 1,
    ClusterCenter = 2,
    ClusterDirection = 3,
    Generator = 4,
    GeneratorBase = 5,
    Perturbation = 6,
    Probe = 7,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 40) | index);
    rng
}

/// Standard complex Gaussian entries (`real` drops the imaginary parts).
pub fn gaussian_tensor(shape: &TensorShape, real: bool, rng: &mut ChaCha8Rng) -> ComplexTensor {
    let entries = (0..shape.size())
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if real { 0.0 } else { StandardNormal.sample(rng) };
            Complex64::new(re, im)
        })
        .collect();
    ComplexTensor::from_entries(shape.clone(), entries).expect("entry count matches shape")
}

/// `N` independent unit-norm Gaussian members.
pub fn random_ensemble(n: usize, shape: &TensorShape, real: bool, seed: u64) -> Result<EnsembleState> {
    let members = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, Purpose::Member, j as u64);
            gaussian_tensor(shape, real, &mut rng).normalized()
        })
        .collect();
    EnsembleState::new(members)
}

/// `N` Haar-like random unitaries `exp(G - G^*)` for square rank-2 shapes.
pub fn random_unitary_ensemble(n: usize, d: usize, seed: u64) -> Result<EnsembleState> {
    let shape = TensorShape::matrix(d, d)?;
    let members = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, Purpose::Member, j as u64);
            let skew = skew_part(&gaussian_tensor(&shape, false, &mut rng), d);
            ComplexTensor::from_entries(shape.clone(), expm(skew.entries(), d))
                .expect("entry count matches shape")
        })
        .collect();
    EnsembleState::new(members)
}

/// What a clustered ensemble is tuned to hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterTarget {
    /// Correlation diameter `max |1 - h_ij|`.
    Lambda(f64),
    /// Order parameter `||T_c||`.
    Rho(f64),
}

/// Accuracy required of the bisection.
pub const CLUSTER_TARGET_TOL: f64 = 1e-6;

/// `z_j = normalize(z* + sigma g_j)` with `sigma` found by bisection.
pub fn clustered_ensemble(
    n: usize,
    shape: &TensorShape,
    real: bool,
    target: ClusterTarget,
    seed: u64,
) -> Result<EnsembleState> {
    if n < 2 {
        return Err(LoheError::Infeasible(
            "a cluster target needs at least two members".into(),
        ));
    }
    let center = gaussian_tensor(shape, real, &mut stream(seed, Purpose::ClusterCenter, 0))
        .normalized();
    let directions: Vec<ComplexTensor> = (0..n)
        .into_par_iter()
        .map(|j| gaussian_tensor(shape, real, &mut stream(seed, Purpose::ClusterDirection, j as u64)))
        .collect();
    let build = |sigma: f64| -> Result<EnsembleState> {
        let members = directions
            .iter()
            .map(|g| {
                let mut m = center.clone();
                m.axpy(Complex64::new(sigma, 0.0), g);
                m.normalized()
            })
            .collect();
        EnsembleState::new(members)
    };
    // Signed mismatch that grows with sigma.
    let (value, goal): (Box<dyn Fn(&EnsembleState) -> f64>, f64) = match target {
        ClusterTarget::Lambda(l) => {
            if !(l > 0.0) {
                return Err(LoheError::Infeasible(format!("lambda target {l} must be positive")));
            }
            (Box::new(diam_corr), l)
        }
        ClusterTarget::Rho(r) => {
            if !(r > 0.0 && r < 1.0) {
                return Err(LoheError::Infeasible(format!("rho target {r} must lie in (0, 1)")));
            }
            (Box::new(|s: &EnsembleState| -order_parameter(s)), -r)
        }
    };
    let mismatch = |sigma: f64| -> Result<f64> { Ok(value(&build(sigma)?) - goal) };

    let mut hi = 1e-3;
    while mismatch(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(LoheError::Infeasible(format!(
                "{target:?} is out of reach for this seed and shape"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mismatch(mid)?;
        if m.abs() <= CLUSTER_TARGET_TOL * goal.abs() {
            return build(mid);
        }
        if m < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let state = build(hi)?;
    let miss = (value(&state) - goal).abs();
    if miss > 0.01 {
        return Err(LoheError::Infeasible(format!(
            "bisection for {target:?} stalled at a miss of {miss}"
        )));
    }
    Ok(state)
}

/// `(M - M^*) / 2` for a row-major `d x d` matrix.
fn skew_part(m: &ComplexTensor, d: usize) -> ComplexTensor {
    let e = m.entries();
    let entries = (0..d * d)
        .map(|k| {
            let (a, b) = (k / d, k % d);
            (e[a * d + b] - e[b * d + a].conj()) * 0.5
        })
        .collect();
    ComplexTensor::from_entries(m.shape().clone(), entries).expect("entry count matches shape")
}

fn random_skew(base: &TensorShape, real: bool, rng: &mut ChaCha8Rng) -> ComplexTensor {
    let d = base.size();
    skew_part(&gaussian_tensor(&base.doubled(), real, rng), d)
}

/// Recipe for a generator ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorRecipe {
    /// Size of the shared part, `A_j = scale * S + deviation_j`.
    pub scale: f64,
    /// All members share one generator.
    pub homogeneous: bool,
    /// Heterogeneous deviations are rescaled so that the maximum pairwise Frobenius
    /// distance equals this value; otherwise each deviation has entries of size `scale`.
    pub diameter: Option<f64>,
    /// Real skew-symmetric generators (for real models).
    pub real: bool,
}

/// Random skew-hermitian generators acting on `base`.
pub fn random_generators(
    n: usize,
    base: &TensorShape,
    recipe: GeneratorRecipe,
    seed: u64,
) -> Result<Vec<SkewHermitianGenerator>> {
    if !(recipe.scale >= 0.0) {
        return Err(LoheError::InvalidInput(format!(
            "generator scale must be nonnegative, got {}",
            recipe.scale
        )));
    }
    let shared = random_skew(base, recipe.real, &mut stream(seed, Purpose::GeneratorBase, 0))
        .scaled(Complex64::new(recipe.scale, 0.0));
    if recipe.homogeneous {
        let g = SkewHermitianGenerator::new(shared)?;
        return Ok(vec![g; n]);
    }
    let mut deviations: Vec<ComplexTensor> = (0..n)
        .into_par_iter()
        .map(|j| random_skew(base, recipe.real, &mut stream(seed, Purpose::Generator, j as u64)))
        .collect();
    match recipe.diameter {
        Some(target) => {
            if !(target >= 0.0) {
                return Err(LoheError::InvalidInput(format!(
                    "generator diameter must be nonnegative, got {target}"
                )));
            }
            let current = tensor_diameter(&deviations);
            if current == 0.0 && target > 0.0 {
                return Err(LoheError::DegenerateConfiguration(
                    "cannot spread a single generator to a positive diameter".into(),
                ));
            }
            let factor = if current == 0.0 { 0.0 } else { target / current };
            deviations
                .iter_mut()
                .for_each(|d| d.scale(Complex64::new(factor, 0.0)));
        }
        None => deviations
            .iter_mut()
            .for_each(|d| d.scale(Complex64::new(recipe.scale, 0.0))),
    }
    deviations
        .into_iter()
        .map(|mut d| {
            d.axpy(Complex64::new(1.0, 0.0), &shared);
            SkewHermitianGenerator::new(d)
        })
        .collect()
}

/// Random hermitian `d x d` matrices `H_j = i * Omega_j` for the matrix model.
pub fn random_hamiltonians(
    n: usize,
    d: usize,
    recipe: GeneratorRecipe,
    seed: u64,
) -> Result<Vec<ComplexTensor>> {
    let omegas = random_generators(n, &TensorShape::vector(d)?, recipe, seed)?;
    Ok(omegas
        .iter()
        .map(|o| {
            ComplexTensor::from_entries(
                TensorShape::matrix(d, d).expect("positive dims"),
                o.tensor().entries().iter().map(|z| z * Complex64::new(0.0, 1.0)).collect(),
            )
            .expect("entry count matches shape")
        })
        .collect())
}

/// Maximum pairwise Frobenius distance.
pub fn tensor_diameter(tensors: &[ComplexTensor]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..tensors.len() {
        for j in i + 1..tensors.len() {
            best = best.max(tensors[i].sub(&tensors[j]).norm());
        }
    }
    best
}

/// `D(A)`: maximum pairwise Frobenius distance of a generator ensemble.
pub fn generator_diameter(generators: &[SkewHermitianGenerator]) -> f64 {
    let tensors: Vec<ComplexTensor> = generators.iter().map(|g| g.tensor().clone()).collect();
    tensor_diameter(&tensors)
}

/// `normalize(T_j + delta g_j)` with a fixed seeded direction `g_j` per member.
pub fn perturbed(state: &EnsembleState, delta: f64, seed: u64) -> Result<EnsembleState> {
    if !(delta > 0.0) {
        return Err(LoheError::InvalidInput(format!(
            "perturbation size must be positive, got {delta}"
        )));
    }
    let real = state.is_real(0.0);
    let members = state
        .members
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let g = gaussian_tensor(m.shape(), real, &mut stream(seed, Purpose::Perturbation, j as u64))
                .normalized();
            let mut p = m.clone();
            p.axpy(Complex64::new(delta, 0.0), &g);
            p.scaled(Complex64::new(m.norm() / p.norm(), 0.0))
        })
        .collect();
    EnsembleState::new(members)
}
