//! Dense complex tensors.
//!
//! Entries are stored row-major with the last index varying fastest. A rank-`2m`
//! generator acting on rank-`m` tensors of total size `D` is therefore a `D x D`
//! matrix in flattened form: `[A]_{a b}` lives at `a * D + b`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LoheError, Result};

/// Tolerance used when a generator is constructed.
pub const SKEW_HERMITIAN_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorShape {
    dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(LoheError::InvalidInput(format!(
                "tensor dimensions must be positive, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn scalar() -> Self {
        Self { dims: Vec::new() }
    }

    pub fn vector(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn matrix(rows: usize, cols: usize) -> Result<Self> {
        Self::new(vec![rows, cols])
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total number of entries; 1 for a scalar.
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major strides (last axis has stride 1).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Shape of the rank-2m operators acting on this shape.
    pub fn doubled(&self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&self.dims);
        Self { dims }
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            idx[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: TensorShape,
    entries: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn zeros(shape: TensorShape) -> Self {
        let entries = vec![ZERO; shape.size()];
        Self { shape, entries }
    }

    pub fn from_entries(shape: TensorShape, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != shape.size() {
            return Err(LoheError::ShapeMismatch(format!(
                "{} entries supplied for shape {:?} (size {})",
                entries.len(),
                shape.dims(),
                shape.size()
            )));
        }
        Ok(Self { shape, entries })
    }

    pub fn vector(entries: Vec<Complex64>) -> Self {
        let shape = TensorShape {
            dims: vec![entries.len()],
        };
        Self { shape, entries }
    }

    pub fn from_real(shape: TensorShape, values: &[f64]) -> Result<Self> {
        Self::from_entries(shape, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn identity(d: usize) -> Self {
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            entries[i * d + i] = ONE;
        }
        Self {
            shape: TensorShape { dims: vec![d, d] },
            entries,
        }
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        let flat = index
            .iter()
            .zip(self.shape.strides())
            .map(|(i, s)| i * s)
            .sum::<usize>();
        self.entries[flat]
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.entries.iter_mut().for_each(|z| *z *= factor);
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: Complex64, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (x, y) in self.entries.iter_mut().zip(&other.entries) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-ONE, other);
        out
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.entries.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        self.scaled(Complex64::new(1.0 / n, 0.0))
    }
}

/// Frobenius norm: square root of the sum of squared moduli.
pub fn frobenius_norm(t: &ComplexTensor) -> f64 {
    t.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius inner product, conjugate-linear in the first slot.
pub fn frobenius_inner(a: &ComplexTensor, b: &ComplexTensor) -> Result<Complex64> {
    if a.shape != b.shape {
        return Err(LoheError::ShapeMismatch(format!(
            "inner product of {:?} and {:?}",
            a.shape.dims(),
            b.shape.dims()
        )));
    }
    Ok(inner(&a.entries, &b.entries))
}

/// Raw-slice inner product `sum conj(a_k) b_k`.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

fn split_operator_shape(shape: &TensorShape) -> Result<TensorShape> {
    let rank = shape.rank();
    if rank % 2 != 0 {
        return Err(LoheError::InvalidInput(format!(
            "operator tensor must have even rank, got {rank}"
        )));
    }
    let (left, right) = shape.dims().split_at(rank / 2);
    if left != right {
        return Err(LoheError::InvalidInput(format!(
            "operator dims do not split symmetrically: {:?} vs {:?}",
            left, right
        )));
    }
    TensorShape::new(left.to_vec())
}

fn skew_defect(entries: &[Complex64], size: usize) -> f64 {
    let mut worst = 0.0_f64;
    for a in 0..size {
        for b in 0..size {
            let defect = (entries[a * size + b].conj() + entries[b * size + a]).norm();
            worst = worst.max(defect);
        }
    }
    worst
}

/// True iff `conj(A[a*, b*]) = -A[b*, a*]` entrywise within `tol`.
pub fn check_skew_hermitian(tensor: &ComplexTensor, tol: f64) -> Result<bool> {
    let base = split_operator_shape(tensor.shape())?;
    Ok(skew_defect(tensor.entries(), base.size()) <= tol)
}

/// Skew-hermitian rank-2m tensor generating a norm-preserving free flow.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewHermitianGenerator {
    base_shape: TensorShape,
    tensor: ComplexTensor,
}

impl SkewHermitianGenerator {
    pub fn new(tensor: ComplexTensor) -> Result<Self> {
        let base_shape = split_operator_shape(tensor.shape())?;
        let defect = skew_defect(tensor.entries(), base_shape.size());
        if defect > SKEW_HERMITIAN_TOL {
            return Err(LoheError::InvalidInput(format!(
                "generator is not skew-hermitian (defect {defect:e})"
            )));
        }
        Ok(Self { base_shape, tensor })
    }

    pub fn zero(base_shape: TensorShape) -> Self {
        let tensor = ComplexTensor::zeros(base_shape.doubled());
        Self { base_shape, tensor }
    }

    /// Generator `-i H (x) I` acting on `d x d` matrices from the left, i.e. `U -> -i H U`.
    pub fn from_hamiltonian(h: &ComplexTensor) -> Result<Self> {
        let dims = h.shape().dims();
        if dims.len() != 2 || dims[0] != dims[1] {
            return Err(LoheError::InvalidInput(
                "hamiltonian must be a square matrix".into(),
            ));
        }
        let d = dims[0];
        let base = TensorShape::matrix(d, d)?;
        let size = d * d;
        let mut entries = vec![ZERO; size * size];
        let minus_i = Complex64::new(0.0, -1.0);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    // [A]_{(a,b),(c,b)} = -i H_{ac}
                    entries[(a * d + b) * size + (c * d + b)] = minus_i * h.entries()[a * d + c];
                }
            }
        }
        Self::new(ComplexTensor::from_entries(base.doubled(), entries)?)
    }

    pub fn base_shape(&self) -> &TensorShape {
        &self.base_shape
    }

    pub fn tensor(&self) -> &ComplexTensor {
        &self.tensor
    }

    pub fn is_zero(&self) -> bool {
        self.tensor.entries().iter().all(|z| *z == ZERO)
    }
}

/// Free-flow term `[A]_{a* b*} [T]_{b*}`.
pub fn apply_generator(a: &SkewHermitianGenerator, t: &ComplexTensor) -> Result<ComplexTensor> {
    if a.base_shape != *t.shape() {
        return Err(LoheError::ShapeMismatch(format!(
            "generator acts on {:?}, tensor has shape {:?}",
            a.base_shape.dims(),
            t.shape().dims()
        )));
    }
    let mut out = ComplexTensor::zeros(t.shape().clone());
    apply_generator_into(a.tensor.entries(), t.entries(), out.entries_mut());
    Ok(out)
}

pub(crate) fn apply_generator_into(a: &[Complex64], t: &[Complex64], out: &mut [Complex64]) {
    let size = t.len();
    for (row, o) in out.iter_mut().enumerate() {
        let r = &a[row * size..(row + 1) * size];
        *o += r.iter().zip(t).fold(ZERO, |acc, (x, y)| acc + x * y);
    }
}

/// Precomputed index tables for one cubic coupling term of the tensor model.
///
/// For a bit-vector `i*`, position `k` of the multi-index `a*i*` takes the free index
/// `a_k0` when `i_k = 0` and the summed index `a_k1` when `i_k = 1`; `a*(1-i*)` takes
/// the other one.
#[derive(Debug, Clone)]
pub struct ContractionPlan {
    size: usize,
    selected: Vec<usize>,
    complement: Vec<usize>,
}

impl ContractionPlan {
    pub fn new(shape: &TensorShape, i_star: &[u8]) -> Result<Self> {
        if i_star.len() != shape.rank() {
            return Err(LoheError::InvalidInput(format!(
                "bit-vector of length {} for a rank-{} tensor",
                i_star.len(),
                shape.rank()
            )));
        }
        if i_star.iter().any(|&b| b > 1) {
            return Err(LoheError::InvalidInput(format!(
                "bit-vector entries must be 0 or 1, got {i_star:?}"
            )));
        }
        let size = shape.size();
        let strides = shape.strides();
        // Per flat index, the contribution of each axis to the flat offset.
        let offsets: Vec<Vec<usize>> = (0..size)
            .map(|flat| {
                shape
                    .unravel(flat)
                    .iter()
                    .zip(&strides)
                    .map(|(i, s)| i * s)
                    .collect()
            })
            .collect();
        let mut selected = vec![0; size * size];
        let mut complement = vec![0; size * size];
        for free in 0..size {
            for summed in 0..size {
                let (mut sel, mut comp) = (0, 0);
                for (k, &bit) in i_star.iter().enumerate() {
                    if bit == 1 {
                        sel += offsets[summed][k];
                        comp += offsets[free][k];
                    } else {
                        sel += offsets[free][k];
                        comp += offsets[summed][k];
                    }
                }
                selected[free * size + summed] = sel;
                complement[free * size + summed] = comp;
            }
        }
        Ok(Self {
            size,
            selected,
            complement,
        })
    }

    /// Accumulates `scale * ( [Tc]_{a*i*} conj[Tj]_{a*1} [Tj]_{a*(1-i*)}
    ///                      - [Tj]_{a*i*} conj[Tc]_{a*1} [Tj]_{a*(1-i*)} )` into `out`.
    pub fn accumulate(
        &self,
        tj: &[Complex64],
        tc: &[Complex64],
        scale: f64,
        out: &mut [Complex64],
    ) {
        let size = self.size;
        for (free, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            let base = free * size;
            for summed in 0..size {
                let sel = self.selected[base + summed];
                let comp = tj[self.complement[base + summed]];
                acc += (tc[sel] * tj[summed].conj() - tj[sel] * tc[summed].conj()) * comp;
            }
            *o += acc * scale;
        }
    }
}

/// One cubic coupling term of the Lohe tensor model for bit-vector `i_star`.
pub fn coupling_term(
    tj: &ComplexTensor,
    tc: &ComplexTensor,
    i_star: &[u8],
) -> Result<ComplexTensor> {
    if tj.shape() != tc.shape() {
        return Err(LoheError::ShapeMismatch(format!(
            "member {:?} vs centroid {:?}",
            tj.shape().dims(),
            tc.shape().dims()
        )));
    }
    let plan = ContractionPlan::new(tj.shape(), i_star)?;
    let mut out = ComplexTensor::zeros(tj.shape().clone());
    plan.accumulate(tj.entries(), tc.entries(), 1.0, out.entries_mut());
    Ok(out)
}

/// Square-matrix helpers on flat row-major slices.
pub mod dense {
    use super::{Complex64, ONE, ZERO};

    pub fn identity(n: usize) -> Vec<Complex64> {
        let mut m = vec![ZERO; n * n];
        for i in 0..n {
            m[i * n + i] = ONE;
        }
        m
    }

    pub fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut c = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    c[i * n + j] += aik * b[k * n + j];
                }
            }
        }
        c
    }

    pub fn matvec(a: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect()
    }

    pub fn adjoint(a: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = a[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(a: &[Complex64], n: usize) -> Complex64 {
        (0..n).map(|i| a[i * n + i]).sum()
    }

    pub fn one_norm(a: &[Complex64], n: usize) -> f64 {
        (0..n)
            .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Solves `A X = B` by Gaussian elimination with partial pivoting.
    /// Returns `None` for a numerically singular `A`.
    pub fn solve(a: &[Complex64], b: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
        let mut a = a.to_vec();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot = (col..n).max_by(|&p, &q| {
                a[p * n + col]
                    .norm()
                    .partial_cmp(&a[q * n + col].norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[pivot * n + col].norm() == 0.0 {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                    x.swap(pivot * n + j, col * n + j);
                }
            }
            let inv = ONE / a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] * inv;
                if factor == ZERO {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[row * n + j] -= factor * v;
                }
                for j in 0..n {
                    let v = x[col * n + j];
                    x[row * n + j] -= factor * v;
                }
            }
        }
        for col in (0..n).rev() {
            let inv = ONE / a[col * n + col];
            for j in 0..n {
                x[col * n + j] *= inv;
            }
            for row in 0..col {
                let factor = a[row * n + col];
                if factor == ZERO {
                    continue;
                }
                for j in 0..n {
                    let v = x[col * n + j];
                    x[row * n + j] -= factor * v;
                }
            }
        }
        Some(x)
    }
}

const PADE_ORDER: usize = 8;
const SCALING_THRESHOLD: f64 = 0.5;

/// Matrix exponential of an `n x n` matrix by scaling and squaring with a
/// diagonal [8/8] Pade approximant.
pub fn expm(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let norm = dense::one_norm(a, n);
    if norm == 0.0 {
        return dense::identity(n);
    }
    let squarings = if norm > SCALING_THRESHOLD {
        (norm / SCALING_THRESHOLD).log2().ceil() as i32
    } else {
        0
    };
    let scale = Complex64::new(0.5_f64.powi(squarings), 0.0);
    let x: Vec<Complex64> = a.iter().map(|z| z * scale).collect();

    // c_k = (2p - k)! p! / ((2p)! k! (p - k)!), built by recurrence.
    let p = PADE_ORDER;
    let mut coeffs = vec![1.0_f64; p + 1];
    for k in 1..=p {
        coeffs[k] = coeffs[k - 1] * (p + 1 - k) as f64 / (k * (2 * p + 1 - k)) as f64;
    }
    let mut numer = dense::identity(n);
    let mut denom = dense::identity(n);
    let mut power = dense::identity(n);
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        power = dense::matmul(&power, &x, n);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (idx, v) in power.iter().enumerate() {
            numer[idx] += v * c;
            denom[idx] += v * (c * sign);
        }
    }
    let mut result = dense::solve(&denom, &numer, n)
        .expect("Pade denominator is well conditioned for scaled arguments");
    for _ in 0..squarings {
        result = dense::matmul(&result, &result, n);
    }
    result
}

/// `exp(t * Omega)` for a rank-1 generator `Omega` (a `d x d` skew-hermitian matrix).
pub fn matrix_exp(omega: &SkewHermitianGenerator, t: f64) -> Result<ComplexTensor> {
    if omega.base_shape().rank() != 1 {
        return Err(LoheError::InvalidInput(format!(
            "matrix exponential needs a rank-1 generator, got rank {}",
            omega.base_shape().rank()
        )));
    }
    let d = omega.base_shape().size();
    if t == 0.0 {
        return Ok(ComplexTensor::identity(d));
    }
    let scaled: Vec<Complex64> = omega
        .tensor()
        .entries()
        .iter()
        .map(|z| z * t)
        .collect();
    ComplexTensor::from_entries(TensorShape::matrix(d, d)?, expm(&scaled, d))
}
