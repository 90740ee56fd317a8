//! Mixed tensor lifts `U^{⊗t1} ⊗ Ū^{⊗t2}`, moment operators, the exact Haar
//! projector and the δ-approximate t-design estimator.
//!
//! Vectorization is `vec(A) = Σ A_ij e_i ⊗ e_j`, so
//! `(U^{⊗t} ⊗ Ū^{⊗t}) vec(A) = vec(U^{⊗t} A U^{⊗t†})` and the Haar moment
//! operator projects onto `span{vec(P_σ)}`.

use serde::Serialize;
use thiserror::Error;

use crate::gates::GateSet;
use crate::haar_ref::{self, HaarRefError, Permutation};
use crate::numerics::tensor::{apply_product, LegOp};
use crate::numerics::{
    kron_all, matmul, spectral_norm_with, symmetric_eigen, ComplexMatrix, LinearOperator, NormEstimate,
    NormOptions, NumericsError, C64, DEFAULT_NORM_TOL, DENSE_CAP,
};

/// Largest `t` for which the Haar projector is built (`t!` permutations).
pub const MAX_HAAR_T: usize = 6;

/// δ values this close to 1 are flagged as sitting at the dichotomy edge.
pub const AT_ONE_TOL: f64 = 1e-6;

/// Relative eigenvalue cutoff for the permutation Gram pseudo-inverse.
pub const GRAM_PINV_CUTOFF: f64 = 1e-12;

const MAX_WORDS: usize = 200_000;

#[derive(Debug, Error)]
pub enum MomentsError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    HaarRef(#[from] HaarRefError),
    #[error("operator side d^{exponent} = {d}^{exponent} exceeds the dense cap {cap}")]
    SizeCap { d: usize, exponent: usize, cap: usize },
    #[error("t = {0} is outside 1..={MAX_HAAR_T}")]
    UnsupportedT(usize),
    #[error("need t1 + t2 >= 1")]
    EmptyLift,
    #[error("{words} words exceed the enumeration limit {MAX_WORDS}")]
    TooManyWords { words: usize },
}

fn side(d: usize, exponent: usize) -> Result<usize, MomentsError> {
    let err = MomentsError::SizeCap {
        d,
        exponent,
        cap: DENSE_CAP,
    };
    let s = d.checked_pow(exponent as u32).ok_or(err)?;
    if s > DENSE_CAP {
        return Err(MomentsError::SizeCap {
            d,
            exponent,
            cap: DENSE_CAP,
        });
    }
    Ok(s)
}

/// `U^{⊗t1} ⊗ Ū^{⊗t2}` as a dense matrix.
#[derive(Clone, Debug)]
pub struct MixedLift {
    pub t1: usize,
    pub t2: usize,
    pub matrix: ComplexMatrix,
}

pub fn mixed_lift(u: &ComplexMatrix, t1: usize, t2: usize) -> Result<MixedLift, MomentsError> {
    if t1 + t2 == 0 {
        return Err(MomentsError::EmptyLift);
    }
    side(u.rows(), t1 + t2)?;
    let conj = u.conj();
    let factors: Vec<&ComplexMatrix> = std::iter::repeat(u)
        .take(t1)
        .chain(std::iter::repeat(&conj).take(t2))
        .collect();
    Ok(MixedLift {
        t1,
        t2,
        matrix: kron_all(&factors)?,
    })
}

/// The per-leg factors of a mixed lift, applied without forming the
/// Kronecker product.
#[derive(Clone, Debug)]
pub struct LiftFactors {
    d: usize,
    legs: Vec<ComplexMatrix>,
    adjoint_legs: Vec<ComplexMatrix>,
}

impl LiftFactors {
    /// Legs `U` (×t1) then `Ū` (×t2).
    pub fn new(u: &ComplexMatrix, t1: usize, t2: usize) -> Self {
        Self::from_pattern(u, &[(false, t1), (true, t2)])
    }

    /// Legs from runs of `(conjugated, count)`.
    pub fn from_pattern(u: &ComplexMatrix, runs: &[(bool, usize)]) -> Self {
        let conj = u.conj();
        let mut legs = Vec::new();
        for &(is_conj, count) in runs {
            for _ in 0..count {
                legs.push(if is_conj { conj.clone() } else { u.clone() });
            }
        }
        let adjoint_legs = legs.iter().map(ComplexMatrix::adjoint).collect();
        Self {
            d: u.rows(),
            legs,
            adjoint_legs,
        }
    }

    pub fn n_legs(&self) -> usize {
        self.legs.len()
    }

    pub fn apply_in_place(&self, x: &mut [C64]) {
        let ops: Vec<_> = self.legs.iter().map(LegOp::Matrix).collect();
        apply_product(x, self.d, &ops);
    }

    pub fn apply_adjoint_in_place(&self, x: &mut [C64]) {
        let ops: Vec<_> = self.adjoint_legs.iter().map(LegOp::Matrix).collect();
        apply_product(x, self.d, &ops);
    }
}

/// Uniform average of `U^{⊗t} ⊗ Ū^{⊗t}` over a list of unitaries, applied
/// matrix-free.
pub struct LiftAverage {
    dim: usize,
    lifts: Vec<LiftFactors>,
}

impl LiftAverage {
    pub fn new<'a>(unitaries: impl IntoIterator<Item = &'a ComplexMatrix>, d: usize, t: usize) -> Self {
        let lifts: Vec<_> = unitaries.into_iter().map(|u| LiftFactors::new(u, t, t)).collect();
        assert!(!lifts.is_empty());
        Self {
            dim: d.pow(2 * t as u32),
            lifts,
        }
    }

    fn average(&self, x: &[C64], adjoint: bool) -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); self.dim];
        let mut scratch = vec![C64::new(0.0, 0.0); self.dim];
        for lift in &self.lifts {
            scratch.copy_from_slice(x);
            if adjoint {
                lift.apply_adjoint_in_place(&mut scratch);
            } else {
                lift.apply_in_place(&mut scratch);
            }
            for (a, s) in acc.iter_mut().zip(&scratch) {
                *a += s;
            }
        }
        let w = 1.0 / self.lifts.len() as f64;
        acc.iter_mut().for_each(|z| *z *= w);
        acc
    }
}

impl LinearOperator for LiftAverage {
    fn nrows(&self) -> usize {
        self.dim
    }
    fn ncols(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.average(x, false)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.average(x, true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MomentSource {
    GateSet,
    Haar,
}

/// A dense `d^{2t} × d^{2t}` moment operator.
#[derive(Clone, Debug)]
pub struct MomentOperator {
    pub t: usize,
    pub d: usize,
    pub matrix: ComplexMatrix,
    pub source: MomentSource,
}

/// `(1/|S|) Σ_{U∈S} U^{⊗t} ⊗ Ū^{⊗t}`, dense.
pub fn moment_operator(s: &GateSet, t: usize) -> Result<MomentOperator, MomentsError> {
    let n = side(s.d(), 2 * t)?;
    let mut acc = ComplexMatrix::zeros(n, n);
    for u in s.matrices() {
        acc.add_assign(&mixed_lift(u, t, t)?.matrix)?;
    }
    Ok(MomentOperator {
        t,
        d: s.d(),
        matrix: acc.scale_real(1.0 / s.len() as f64),
        source: MomentSource::GateSet,
    })
}

/// Moment operator of the `l`-fold convolution `ν_S^{*l}`, by averaging the
/// lifts of all `|S|^l` words.
pub fn word_moment(s: &GateSet, t: usize, l: usize) -> Result<MomentOperator, MomentsError> {
    let n = side(s.d(), 2 * t)?;
    let k = s.len();
    let words = k.checked_pow(l as u32).filter(|&w| w <= MAX_WORDS);
    let Some(words) = words else {
        return Err(MomentsError::TooManyWords { words: usize::MAX });
    };
    let gates: Vec<&ComplexMatrix> = s.matrices().collect();
    let mut acc = ComplexMatrix::zeros(n, n);
    let mut digits = vec![0usize; l];
    for _ in 0..words {
        let mut product = ComplexMatrix::identity(s.d());
        for &g in &digits {
            product = matmul(&product, gates[g])?;
        }
        acc.add_assign(&mixed_lift(&product, t, t)?.matrix)?;
        for digit in digits.iter_mut().rev() {
            *digit += 1;
            if *digit < k {
                break;
            }
            *digit = 0;
        }
    }
    Ok(MomentOperator {
        t,
        d: s.d(),
        matrix: acc.scale_real(1.0 / words as f64),
        source: MomentSource::GateSet,
    })
}

/// The Haar moment operator in factored form `P = B Bᵀ`, with `B` real and
/// orthonormal, spanning `{vec(P_σ) : σ ∈ S_t}`.
#[derive(Clone, Debug)]
pub struct HaarProjector {
    pub d: usize,
    pub t: usize,
    dim: usize,
    basis: Vec<Vec<f64>>,
}

impl HaarProjector {
    pub fn new(d: usize, t: usize) -> Result<Self, MomentsError> {
        if t == 0 || t > MAX_HAAR_T {
            return Err(MomentsError::UnsupportedT(t));
        }
        let dt = side(d, t)?;
        let dim = side(d, 2 * t)?;
        let perms = Permutation::all(t);
        let m = perms.len();
        let gram: Vec<f64> = haar_ref::permutation_gram(t, d)
            .into_iter()
            .map(|v| v as f64)
            .collect();
        let (values, vectors) = symmetric_eigen(m, &gram)?;
        let top = values.iter().copied().fold(0.0, f64::max);
        // Where each permutation operator has its ones: vec(P_σ)[P_σ(j)·D + j] = 1.
        let supports: Vec<Vec<usize>> = perms
            .iter()
            .map(|p| (0..dt).map(|j| p.permute_basis_index(d, j) * dt + j).collect())
            .collect();
        let mut basis = Vec::new();
        for (k, &lambda) in values.iter().enumerate() {
            if lambda <= GRAM_PINV_CUTOFF * top {
                continue;
            }
            let scale = 1.0 / lambda.sqrt();
            let mut b = vec![0.0; dim];
            for (sigma, support) in supports.iter().enumerate() {
                let coeff = vectors[sigma * m + k] * scale;
                if coeff == 0.0 {
                    continue;
                }
                for &idx in support {
                    b[idx] += coeff;
                }
            }
            basis.push(b);
        }
        Ok(Self { d, t, dim, basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for b in &self.basis {
            let c: C64 = b.iter().zip(x).map(|(bi, xi)| xi * *bi).sum();
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * *bi;
            }
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut p = vec![0.0f64; self.dim * self.dim];
        for b in &self.basis {
            for (i, &bi) in b.iter().enumerate() {
                if bi == 0.0 {
                    continue;
                }
                let row = &mut p[i * self.dim..(i + 1) * self.dim];
                for (r, &bj) in row.iter_mut().zip(b) {
                    *r += bi * bj;
                }
            }
        }
        ComplexMatrix::new(
            self.dim,
            self.dim,
            p.into_iter().map(|v| C64::new(v, 0.0)).collect(),
        )
        .expect("projector entries are finite")
    }
}

impl LinearOperator for HaarProjector {
    fn nrows(&self) -> usize {
        self.dim
    }
    fn ncols(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut out);
        out
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.apply(x)
    }
}

/// Dense Haar moment operator `T_{μ,t}`.
pub fn haar_moment_operator(d: usize, t: usize) -> Result<MomentOperator, MomentsError> {
    let p = HaarProjector::new(d, t)?;
    Ok(MomentOperator {
        t,
        d,
        matrix: p.to_dense(),
        source: MomentSource::Haar,
    })
}

/// `A − T_μ` for a moment operator `A` given as a [`LinearOperator`].
struct HaarDifference<'a> {
    op: &'a dyn LinearOperator,
    haar: &'a HaarProjector,
}

impl LinearOperator for HaarDifference<'_> {
    fn nrows(&self) -> usize {
        self.haar.dim()
    }
    fn ncols(&self) -> usize {
        self.haar.dim()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.op.apply(x);
        let p = self.haar.apply(x);
        y.iter_mut().zip(&p).for_each(|(a, b)| *a -= b);
        y
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.op.apply_adjoint(x);
        let p = self.haar.apply(x);
        y.iter_mut().zip(&p).for_each(|(a, b)| *a -= b);
        y
    }
}

/// Settings for δ estimation.
#[derive(Clone, Debug)]
pub struct DeltaOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_NORM_TOL,
            seed: 0x5eed,
            max_iters: 20_000,
        }
    }
}

/// A δ value with its residual bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DeltaEstimate {
    pub t: usize,
    pub value: f64,
    pub error_bound: f64,
    pub at_one: bool,
    pub iterations: usize,
}

/// `‖op − T_{μ,t}‖_∞` for an operator on `(C^d)^{⊗2t}`.
///
/// `op` must be the moment operator of a probability measure on `U(d)`
/// (an average of lifts), which caps the distance at 1.
pub fn distance_to_haar(
    op: &dyn LinearOperator,
    haar: &HaarProjector,
    opts: &DeltaOptions,
) -> Result<DeltaEstimate, MomentsError> {
    let diff = HaarDifference { op, haar };
    // op − T_μ = op·(1 − T_μ) for any probability measure, so its norm is
    // at most 1.
    let norm_opts = NormOptions {
        tol: opts.tol,
        seed: opts.seed,
        max_iters: opts.max_iters,
        upper_bound: Some(1.0),
        ..NormOptions::default()
    };
    let NormEstimate {
        value,
        error_bound,
        iterations,
    } = spectral_norm_with(&diff, &norm_opts)?;
    let value = if value > 1.0 && value - 1.0 <= opts.tol {
        1.0
    } else {
        value
    };
    Ok(DeltaEstimate {
        t: haar.t,
        value,
        error_bound,
        at_one: (value - 1.0).abs() <= AT_ONE_TOL,
        iterations,
    })
}

/// `δ(t, ν_S) = ‖T_{ν_S,t} − T_{μ,t}‖_∞`.
pub fn delta(s: &GateSet, t: usize, opts: &DeltaOptions) -> Result<DeltaEstimate, MomentsError> {
    side(s.d(), 2 * t)?;
    let haar = HaarProjector::new(s.d(), t)?;
    let avg = LiftAverage::new(s.matrices(), s.d(), t);
    distance_to_haar(&avg, &haar, opts)
}
