//! Right-hand sides of the Lohe-type aggregation models and their reductions.
//!
//! Public `*_rhs` functions validate their inputs (shapes, unit norms, realness) and are
//! meant for direct evaluation. The [`Model`] enum wraps the same formulas for time
//! integration; it skips the unit-norm check because intermediate Runge-Kutta stages
//! leave the sphere by `O(dt^2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LoheError, Result};
use crate::integrate::{Dynamics, Phases};
use crate::linalg::{
    apply_generator_into, dense, inner, ComplexTensor, ContractionPlan, SkewHermitianGenerator,
    TensorShape,
};

/// Unit-norm tolerance applied at RHS entry.
pub const UNIT_NORM_TOL: f64 = 1e-8;
/// Imaginary-part tolerance for inputs that must be real.
pub const REAL_TOL: f64 = 1e-12;
/// Symmetry tolerance for phase-model parameters.
pub const PHASE_MODEL_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LoheTensor,
    LoheHermitianSphere,
    LoheSphere,
    LoheMatrix,
    SubsystemA,
    SubsystemB,
    KuramotoFrustration,
}

/// Coupling strengths `kappa_{i*}` indexed by bit-vectors `i* in {0,1}^m`.
///
/// Index `mask` stores the bit-vector whose binary reading (first axis most significant)
/// equals `mask`, so for rank 2 the order is `00, 01, 10, 11`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector {
    rank: usize,
    strengths: Vec<f64>,
}

impl CouplingVector {
    pub fn new(rank: usize, strengths: Vec<f64>) -> Result<Self> {
        if strengths.len() != 1 << rank {
            return Err(LoheError::InvalidInput(format!(
                "rank {rank} needs {} coupling strengths, got {}",
                1usize << rank,
                strengths.len()
            )));
        }
        if let Some(bad) = strengths.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
            return Err(LoheError::InvalidInput(format!(
                "coupling strengths must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(Self { rank, strengths })
    }

    pub fn rank_one(kappa0: f64, kappa1: f64) -> Result<Self> {
        Self::new(1, vec![kappa0, kappa1])
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn get(&self, i_star: &[u8]) -> f64 {
        self.strengths[Self::mask_of(i_star)]
    }

    pub fn mask_of(i_star: &[u8]) -> usize {
        i_star.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bits_of(&self, mask: usize) -> Vec<u8> {
        (0..self.rank)
            .map(|k| ((mask >> (self.rank - 1 - k)) & 1) as u8)
            .collect()
    }

    /// `kappa_0`, the strength of the all-zeros bit-vector.
    pub fn kappa0(&self) -> f64 {
        self.strengths[0]
    }

    /// Sum of all strengths except the all-zeros one.
    pub fn kappa_hat0(&self) -> f64 {
        self.strengths[1..].iter().sum()
    }

    /// Bit-vector label such as `"01"`.
    pub fn label(&self, mask: usize) -> String {
        self.bits_of(mask).iter().map(|b| char::from(b'0' + b)).collect()
    }
}

/// An ensemble of `N` tensors of a common shape.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub members: Vec<ComplexTensor>,
    pub time: f64,
}

impl EnsembleState {
    pub fn new(members: Vec<ComplexTensor>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| LoheError::InvalidInput("ensemble must have N >= 1".into()))?;
        if let Some(bad) = members.iter().find(|m| m.shape() != first.shape()) {
            return Err(LoheError::ShapeMismatch(format!(
                "ensemble mixes shapes {:?} and {:?}",
                first.shape().dims(),
                bad.shape().dims()
            )));
        }
        Ok(Self { members, time: 0.0 })
    }

    /// Rank-1 ensemble from raw vectors.
    pub fn from_vectors(vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::new(vectors.into_iter().map(ComplexTensor::vector).collect())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn shape(&self) -> &TensorShape {
        self.members[0].shape()
    }

    pub fn member(&self, j: usize) -> &[Complex64] {
        self.members[j].entries()
    }

    /// `T_c = (1/N) sum_k T_k`, summed in index order.
    pub fn centroid(&self) -> ComplexTensor {
        let mut c = ComplexTensor::zeros(self.shape().clone());
        centroid_into(&self.members, c.entries_mut());
        c
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.members
            .iter()
            .map(|m| (m.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn require_unit_norm(&self, tol: f64) -> Result<()> {
        for (j, m) in self.members.iter().enumerate() {
            let defect = (m.norm() - 1.0).abs();
            if defect > tol {
                return Err(LoheError::InvalidInput(format!(
                    "member {j} has norm {} (defect {defect:e} > {tol:e})",
                    m.norm()
                )));
            }
        }
        Ok(())
    }

    fn require_rank(&self, rank: usize) -> Result<()> {
        if self.shape().rank() != rank {
            return Err(LoheError::ShapeMismatch(format!(
                "expected rank-{rank} members, got rank {}",
                self.shape().rank()
            )));
        }
        Ok(())
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.members.iter().all(|m| m.is_real(tol))
    }
}

fn centroid_into(members: &[ComplexTensor], out: &mut [Complex64]) {
    out.iter_mut().for_each(|z| *z = ZERO);
    for m in members {
        for (o, v) in out.iter_mut().zip(m.entries()) {
            *o += v;
        }
    }
    let inv = 1.0 / members.len() as f64;
    out.iter_mut().for_each(|z| *z *= inv);
}

fn derivative_like(state: &EnsembleState) -> Vec<ComplexTensor> {
    state
        .members
        .iter()
        .map(|m| ComplexTensor::zeros(m.shape().clone()))
        .collect()
}

fn check_generators(state: &EnsembleState, generators: &[SkewHermitianGenerator]) -> Result<()> {
    if generators.len() != state.len() {
        return Err(LoheError::InvalidInput(format!(
            "{} generators for {} members",
            generators.len(),
            state.len()
        )));
    }
    if let Some(g) = generators.iter().find(|g| g.base_shape() != state.shape()) {
        return Err(LoheError::ShapeMismatch(format!(
            "generator acts on {:?}, members have shape {:?}",
            g.base_shape().dims(),
            state.shape().dims()
        )));
    }
    Ok(())
}

/// `dT_j/dt = A_j T_j + sum_{i*} kappa_{i*} (cubic term for i*)`.
pub fn lohe_tensor_rhs(
    state: &EnsembleState,
    generators: &[SkewHermitianGenerator],
    couplings: &CouplingVector,
) -> Result<Vec<ComplexTensor>> {
    if couplings.rank() != state.shape().rank() {
        return Err(LoheError::ShapeMismatch(format!(
            "rank-{} couplings for rank-{} members",
            couplings.rank(),
            state.shape().rank()
        )));
    }
    check_generators(state, generators)?;
    let plans = TensorPlans::new(state.shape(), couplings)?;
    let mut out = derivative_like(state);
    plans.evaluate(&state.members, generators, &mut out);
    Ok(out)
}

/// Contraction plans for every nonzero coupling of a tensor model.
#[derive(Debug, Clone)]
pub struct TensorPlans {
    terms: Vec<(f64, ContractionPlan)>,
}

impl TensorPlans {
    pub fn new(shape: &TensorShape, couplings: &CouplingVector) -> Result<Self> {
        let mut terms = Vec::new();
        for (mask, &kappa) in couplings.strengths().iter().enumerate() {
            if kappa != 0.0 {
                terms.push((kappa, ContractionPlan::new(shape, &couplings.bits_of(mask))?));
            }
        }
        Ok(Self { terms })
    }

    fn evaluate(
        &self,
        members: &[ComplexTensor],
        generators: &[SkewHermitianGenerator],
        out: &mut [ComplexTensor],
    ) {
        let mut tc = ComplexTensor::zeros(members[0].shape().clone());
        centroid_into(members, tc.entries_mut());
        for ((tj, gen), o) in members.iter().zip(generators).zip(out.iter_mut()) {
            let o = o.entries_mut();
            o.iter_mut().for_each(|z| *z = ZERO);
            if !gen.is_zero() {
                apply_generator_into(gen.tensor().entries(), tj.entries(), o);
            }
            for (kappa, plan) in &self.terms {
                plan.accumulate(tj.entries(), tc.entries(), *kappa, o);
            }
        }
    }
}

fn check_rank_one(state: &EnsembleState) -> Result<()> {
    state.require_rank(1)?;
    state.require_unit_norm(UNIT_NORM_TOL)
}

fn check_omegas(state: &EnsembleState, omegas: &[SkewHermitianGenerator]) -> Result<()> {
    check_generators(state, omegas)
}

/// Lohe hermitian sphere (LHS) model:
/// `z_j' = Omega_j z_j + k0 (<z_j,z_j> z_c - <z_c,z_j> z_j) + k1 (<z_j,z_c> - <z_c,z_j>) z_j`.
pub fn lhs_rhs(
    state: &EnsembleState,
    omegas: &[SkewHermitianGenerator],
    kappa0: f64,
    kappa1: f64,
) -> Result<Vec<ComplexTensor>> {
    check_rank_one(state)?;
    check_omegas(state, omegas)?;
    let mut out = derivative_like(state);
    lhs_into(&state.members, Some(omegas), kappa0, kappa1, &mut out);
    Ok(out)
}

fn lhs_into(
    members: &[ComplexTensor],
    omegas: Option<&[SkewHermitianGenerator]>,
    kappa0: f64,
    kappa1: f64,
    out: &mut [ComplexTensor],
) {
    let mut zc = vec![ZERO; members[0].entries().len()];
    centroid_into(members, &mut zc);
    for (j, (zj, o)) in members.iter().zip(out.iter_mut()).enumerate() {
        let z = zj.entries();
        let o = o.entries_mut();
        o.iter_mut().for_each(|v| *v = ZERO);
        if let Some(omegas) = omegas {
            if !omegas[j].is_zero() {
                apply_generator_into(omegas[j].tensor().entries(), z, o);
            }
        }
        let zz = inner(z, z);
        let cz = inner(&zc, z);
        let zcj = inner(z, &zc);
        let k1 = (zcj - cz) * kappa1;
        for ((ov, &zv), &cv) in o.iter_mut().zip(z).zip(&zc) {
            *ov += (zz * cv - cz * zv) * kappa0 + k1 * zv;
        }
    }
}

/// Lohe sphere model on real unit vectors.
pub fn lohe_sphere_rhs(
    state: &EnsembleState,
    omegas: &[SkewHermitianGenerator],
    kappa0: f64,
) -> Result<Vec<ComplexTensor>> {
    check_rank_one(state)?;
    check_omegas(state, omegas)?;
    if !state.is_real(REAL_TOL) {
        return Err(LoheError::InvalidInput(
            "Lohe sphere model needs real members".into(),
        ));
    }
    if omegas.iter().any(|o| !o.tensor().is_real(REAL_TOL)) {
        return Err(LoheError::InvalidInput(
            "Lohe sphere model needs real skew-symmetric frequency matrices".into(),
        ));
    }
    let d = state.shape().size();
    let n = state.len() as f64;
    let xs: Vec<Vec<f64>> = state
        .members
        .iter()
        .map(|m| m.entries().iter().map(|z| z.re).collect())
        .collect();
    let mut xc = vec![0.0; d];
    for x in &xs {
        xc.iter_mut().zip(x).for_each(|(c, v)| *c += v);
    }
    xc.iter_mut().for_each(|c| *c /= n);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    xs.iter()
        .zip(omegas)
        .map(|(x, omega)| {
            let w = omega.tensor().entries();
            let xx = dot(x, x);
            let cx = dot(&xc, x);
            let values: Vec<f64> = (0..d)
                .map(|a| {
                    let free: f64 = (0..d).map(|b| w[a * d + b].re * x[b]).sum();
                    free + kappa0 * (xx * xc[a] - cx * x[a])
                })
                .collect();
            ComplexTensor::from_real(state.shape().clone(), &values)
        })
        .collect()
}

fn check_square_members(state: &EnsembleState) -> Result<usize> {
    let dims = state.shape().dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(LoheError::InvalidInput(format!(
            "Lohe matrix model needs square members, got {dims:?}"
        )));
    }
    Ok(dims[0])
}

/// Maximum Frobenius distance of `U^* U` from the identity over the ensemble.
pub fn unitarity_defect(state: &EnsembleState) -> Result<f64> {
    let d = check_square_members(state)?;
    let id = dense::identity(d);
    Ok(state
        .members
        .iter()
        .map(|u| {
            let uu = dense::matmul(&dense::adjoint(u.entries(), d), u.entries(), d);
            dense::frobenius_distance(&uu, &id)
        })
        .fold(0.0, f64::max))
}

/// Lohe matrix model on `U(d)`:
/// `U_j' = -i H_j U_j + (k/2) (U_c U_j^* U_j - U_j U_c^* U_j)`.
pub fn lohe_matrix_rhs(
    state: &EnsembleState,
    hamiltonians: &[ComplexTensor],
    kappa: f64,
) -> Result<Vec<ComplexTensor>> {
    let d = check_square_members(state)?;
    let defect = unitarity_defect(state)?;
    if defect > UNIT_NORM_TOL {
        return Err(LoheError::InvalidInput(format!(
            "members are not unitary (defect {defect:e})"
        )));
    }
    if hamiltonians.len() != state.len() {
        return Err(LoheError::InvalidInput(format!(
            "{} hamiltonians for {} members",
            hamiltonians.len(),
            state.len()
        )));
    }
    for h in hamiltonians {
        if h.shape() != state.shape() {
            return Err(LoheError::ShapeMismatch("hamiltonian shape".into()));
        }
        let hd = dense::adjoint(h.entries(), d);
        if dense::frobenius_distance(&hd, h.entries()) > REAL_TOL {
            return Err(LoheError::InvalidInput("hamiltonian is not hermitian".into()));
        }
    }
    let uc = state.centroid();
    let ucs = dense::adjoint(uc.entries(), d);
    state
        .members
        .iter()
        .zip(hamiltonians)
        .map(|(u, h)| {
            let u = u.entries();
            let us = dense::adjoint(u, d);
            let free = dense::matmul(h.entries(), u, d);
            let a = dense::matmul(&dense::matmul(uc.entries(), &us, d), u, d);
            let b = dense::matmul(&dense::matmul(u, &ucs, d), u, d);
            let entries = (0..d * d)
                .map(|k| -I * free[k] + (a[k] - b[k]) * (kappa / 2.0))
                .collect();
            ComplexTensor::from_entries(state.shape().clone(), entries)
        })
        .collect()
}

/// Subsystem A: the `kappa1 = 0`, `Omega = 0` part of the LHS model.
pub fn subsystem_a_rhs(state: &EnsembleState, kappa0: f64) -> Result<Vec<ComplexTensor>> {
    check_rank_one(state)?;
    let mut out = derivative_like(state);
    lhs_into(&state.members, None, kappa0, 0.0, &mut out);
    Ok(out)
}

/// Subsystem B: `z_j' = 2 i kappa1 Im<z_j, z_c> z_j`.
pub fn subsystem_b_rhs(state: &EnsembleState, kappa1: f64) -> Result<Vec<ComplexTensor>> {
    check_rank_one(state)?;
    let mut out = derivative_like(state);
    subsystem_b_into(&state.members, kappa1, &mut out);
    Ok(out)
}

fn subsystem_b_into(members: &[ComplexTensor], kappa1: f64, out: &mut [ComplexTensor]) {
    let mut zc = vec![ZERO; members[0].entries().len()];
    centroid_into(members, &mut zc);
    for (zj, o) in members.iter().zip(out.iter_mut()) {
        subsystem_b_member(zj.entries(), &zc, kappa1, o.entries_mut());
    }
}

fn subsystem_b_member(z: &[Complex64], zc: &[Complex64], kappa1: f64, out: &mut [Complex64]) {
    let rate = I * (2.0 * kappa1 * inner(z, zc).im);
    for (o, zv) in out.iter_mut().zip(z) {
        *o = rate * zv;
    }
}

/// `kappa0 P_perp(z_j) z_c + 2 i (kappa0 + kappa1) Im<z_j, z_c> z_j`, valid on the unit sphere.
pub fn lhs_rhs_projection_form(
    state: &EnsembleState,
    kappa0: f64,
    kappa1: f64,
) -> Result<Vec<ComplexTensor>> {
    check_rank_one(state)?;
    let zc = state.centroid();
    Ok(state
        .members
        .iter()
        .map(|zj| {
            let z = zj.entries();
            let proj = inner(z, zc.entries());
            let rot = I * (2.0 * (kappa0 + kappa1) * proj.im);
            let entries = z
                .iter()
                .zip(zc.entries())
                .map(|(&zv, &cv)| (cv - proj * zv) * kappa0 + rot * zv)
                .collect();
            ComplexTensor::from_entries(zj.shape().clone(), entries)
                .expect("shape matches member")
        })
        .collect())
}

/// Kuramoto model with frustration, phases relative to an initial complex ensemble.
///
/// `theta_j' = (2 kappa1 / N) sum_k R_jk sin(theta_k - theta_j + alpha_jk)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub theta: Vec<f64>,
    /// `N x N` row-major amplitudes `R_jk`.
    pub amplitudes: Vec<f64>,
    /// `N x N` row-major frustrations `alpha_jk`.
    pub frustrations: Vec<f64>,
    pub kappa1: f64,
}

impl PhaseModel {
    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn amplitude(&self, j: usize, k: usize) -> f64 {
        self.amplitudes[j * self.n() + k]
    }

    pub fn frustration(&self, j: usize, k: usize) -> f64 {
        self.frustrations[j * self.n() + k]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(LoheError::InvalidInput("phase model with N = 0".into()));
        }
        if self.amplitudes.len() != n * n || self.frustrations.len() != n * n {
            return Err(LoheError::ShapeMismatch(format!(
                "phase model with N = {n} needs {} amplitudes and frustrations",
                n * n
            )));
        }
        for j in 0..n {
            for k in 0..n {
                let (r, rt) = (self.amplitude(j, k), self.amplitude(k, j));
                let (a, at) = (self.frustration(j, k), self.frustration(k, j));
                if (r - rt).abs() > PHASE_MODEL_TOL {
                    return Err(LoheError::InvalidInput(format!(
                        "amplitudes not symmetric at ({j}, {k})"
                    )));
                }
                if (a + at).abs() > PHASE_MODEL_TOL {
                    return Err(LoheError::InvalidInput(format!(
                        "frustrations not skew-symmetric at ({j}, {k})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Phase velocities at an arbitrary phase vector.
    pub fn frequencies(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.n();
        let scale = 2.0 * self.kappa1 / n as f64;
        (0..n)
            .map(|j| {
                let row: f64 = (0..n)
                    .map(|k| {
                        self.amplitude(j, k)
                            * (theta[k] - theta[j] + self.frustration(j, k)).sin()
                    })
                    .sum();
                scale * row
            })
            .collect()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }
}

/// Phase velocities of the Kuramoto model with frustration at `model.theta`.
pub fn kuramoto_frustration_rhs(model: &PhaseModel) -> Result<Vec<f64>> {
    model.validate()?;
    Ok(model.frequencies(&model.theta))
}

/// Amplitudes `R_jk = |<z_j, z_k>|` and frustrations `alpha_jk = arg <z_j, z_k>` of an
/// initial ensemble, with `theta(0) = 0`.
///
/// `alpha_jk` lies in `(-pi, pi]` and is set to 0 where `R_jk = 0`. The upper triangle is
/// computed and mirrored so the symmetries hold exactly.
pub fn build_phase_model(initial: &EnsembleState, kappa1: f64) -> Result<PhaseModel> {
    check_rank_one(initial)?;
    let n = initial.len();
    let mut amplitudes = vec![0.0; n * n];
    let mut frustrations = vec![0.0; n * n];
    for j in 0..n {
        amplitudes[j * n + j] = inner(initial.member(j), initial.member(j)).norm();
        for k in j + 1..n {
            let h = inner(initial.member(j), initial.member(k));
            let r = h.norm();
            let mut alpha = if r == 0.0 { 0.0 } else { h.im.atan2(h.re) };
            if alpha <= -PI {
                alpha = PI;
            }
            amplitudes[j * n + k] = r;
            amplitudes[k * n + j] = r;
            frustrations[j * n + k] = alpha;
            frustrations[k * n + j] = -alpha;
        }
    }
    Ok(PhaseModel {
        theta: vec![0.0; n],
        amplitudes,
        frustrations,
        kappa1,
    })
}

/// A model instance ready for time integration.
#[derive(Debug, Clone)]
pub enum Model {
    LoheTensor {
        generators: Vec<SkewHermitianGenerator>,
        couplings: CouplingVector,
        plans: TensorPlans,
    },
    LoheHermitianSphere {
        omegas: Vec<SkewHermitianGenerator>,
        kappa0: f64,
        kappa1: f64,
    },
    LoheSphere {
        omegas: Vec<SkewHermitianGenerator>,
        kappa0: f64,
    },
    LoheMatrix {
        generators: Vec<SkewHermitianGenerator>,
        plans: TensorPlans,
    },
    SubsystemA {
        kappa0: f64,
    },
    SubsystemB {
        kappa1: f64,
    },
}

impl Model {
    pub fn lohe_tensor(
        shape: &TensorShape,
        generators: Vec<SkewHermitianGenerator>,
        couplings: CouplingVector,
    ) -> Result<Self> {
        let plans = TensorPlans::new(shape, &couplings)?;
        Ok(Model::LoheTensor {
            generators,
            couplings,
            plans,
        })
    }

    /// The Lohe matrix model expressed through the rank-2 tensor model: generator
    /// `-i H_j` and a single coupling `kappa_{10} = kappa / 2`.
    pub fn lohe_matrix(d: usize, hamiltonians: &[ComplexTensor], kappa: f64) -> Result<Self> {
        let shape = TensorShape::matrix(d, d)?;
        let couplings = CouplingVector::new(2, vec![0.0, 0.0, kappa / 2.0, 0.0])?;
        let generators = hamiltonians
            .iter()
            .map(SkewHermitianGenerator::from_hamiltonian)
            .collect::<Result<Vec<_>>>()?;
        Ok(Model::LoheMatrix {
            generators,
            plans: TensorPlans::new(&shape, &couplings)?,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::LoheTensor { .. } => ModelKind::LoheTensor,
            Model::LoheHermitianSphere { .. } => ModelKind::LoheHermitianSphere,
            Model::LoheSphere { .. } => ModelKind::LoheSphere,
            Model::LoheMatrix { .. } => ModelKind::LoheMatrix,
            Model::SubsystemA { .. } => ModelKind::SubsystemA,
            Model::SubsystemB { .. } => ModelKind::SubsystemB,
        }
    }

    /// Checks the model preconditions on an initial state.
    pub fn validate_initial(&self, state: &EnsembleState) -> Result<()> {
        match self {
            Model::LoheTensor {
                generators,
                couplings,
                ..
            } => {
                if couplings.rank() != state.shape().rank() {
                    return Err(LoheError::ShapeMismatch(format!(
                        "rank-{} couplings for rank-{} members",
                        couplings.rank(),
                        state.shape().rank()
                    )));
                }
                check_generators(state, generators)?;
                state.require_unit_norm(UNIT_NORM_TOL)
            }
            Model::LoheHermitianSphere { omegas, .. } => {
                check_rank_one(state)?;
                check_omegas(state, omegas)
            }
            Model::LoheSphere { omegas, .. } => {
                check_rank_one(state)?;
                check_omegas(state, omegas)?;
                if !state.is_real(REAL_TOL) {
                    return Err(LoheError::InvalidInput(
                        "Lohe sphere model needs real members".into(),
                    ));
                }
                Ok(())
            }
            Model::LoheMatrix { generators, .. } => {
                check_square_members(state)?;
                check_generators(state, generators)?;
                let defect = unitarity_defect(state)?;
                if defect > UNIT_NORM_TOL {
                    return Err(LoheError::InvalidInput(format!(
                        "members are not unitary (defect {defect:e})"
                    )));
                }
                Ok(())
            }
            Model::SubsystemA { .. } | Model::SubsystemB { .. } => check_rank_one(state),
        }
    }
}

impl Dynamics for Model {
    type State = EnsembleState;

    fn rhs(&self, _t: f64, state: &EnsembleState) -> Result<EnsembleState> {
        let mut out = derivative_like(state);
        match self {
            Model::LoheTensor {
                generators, plans, ..
            }
            | Model::LoheMatrix { generators, plans } => {
                plans.evaluate(&state.members, generators, &mut out)
            }
            Model::LoheHermitianSphere {
                omegas,
                kappa0,
                kappa1,
            } => lhs_into(&state.members, Some(omegas), *kappa0, *kappa1, &mut out),
            Model::LoheSphere { omegas, kappa0 } => {
                lhs_into(&state.members, Some(omegas), *kappa0, 0.0, &mut out)
            }
            Model::SubsystemA { kappa0 } => lhs_into(&state.members, None, *kappa0, 0.0, &mut out),
            Model::SubsystemB { kappa1 } => subsystem_b_into(&state.members, *kappa1, &mut out),
        }
        Ok(EnsembleState {
            members: out,
            time: state.time,
        })
    }
}

impl Dynamics for PhaseModel {
    type State = Phases;

    fn rhs(&self, _t: f64, state: &Phases) -> Result<Phases> {
        Ok(Phases(self.frequencies(&state.0)))
    }
}
