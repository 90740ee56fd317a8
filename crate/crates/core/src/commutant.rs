//! Commutant dimensions of lifted gate sets `S^{t1,t2}`.
//!
//! Two backends:
//! * dense: the nullity of the stacked commutator system
//!   `(L_g ⊗ I − I ⊗ L_gᵀ) vec(X) = 0`, read off the eigenvalues of its Gram
//!   matrix;
//! * matrix-free: the multiplicity of eigenvalue 1 of the mixed-unitary
//!   channel `Φ(X) = avg_{g ∈ S ∪ S†} L_g X L_g†`, whose fixed points are
//!   exactly the commutant.

use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::gates::GateSet;
use crate::moments::{mixed_lift, LiftFactors, MomentsError};
use crate::numerics::{
    filtered_subspace_iteration, gram_resolution, hermitian_eigen, rank_from_gram, ComplexMatrix,
    IterationOutcome, NumericsError, RankReport, RitzState, C64, CERTIFY_GAP, DEFAULT_REL_TOL, DENSE_CAP,
};

/// Dimension of `C(G_d^{1,1})`: `U ⊗ Ū = Ad_U ⊕ 1`.
pub const HAAR_ADJOINT_COMMUTANT_DIM: usize = 2;

pub const DEFAULT_GAP_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 2000;
/// Extra probe vectors beyond the expected dimension.
pub const EXTRA_PROBES: usize = 16;

/// Channel eigenvalues at least `1 − FIXED_TOL` count as fixed.
pub const FIXED_TOL: f64 = 1e-6;
/// Ritz residual required of each fixed vector.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Spectral gap that certifies a count when the first excluded eigenvalue
/// lies inside `(1 − gap_tol, 1 − FIXED_TOL)`: `1 − μ` must exceed the fixed
/// cluster's distance from 1 by this ratio. It is the square of the dense
/// singular-value gap since `1 − μ` scales like σ².
pub const RELATIVE_GAP: f64 = CERTIFY_GAP * CERTIFY_GAP;
const STABLE_CHECKS: usize = 3;

#[derive(Debug, Error)]
pub enum CommutantError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error("need t1 + t2 >= 1")]
    EmptyLift,
    #[error("dense system of {unknowns} unknowns exceeds the cap {cap}; use the matrix-free backend")]
    DenseTooLarge { unknowns: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Backend {
    Dense,
    MatrixFree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Certainty {
    Certified,
    Uncertain,
}

/// Iteration limits and tolerances for the matrix-free engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Budget {
    pub max_iters: usize,
    pub gap_tol: f64,
    pub seed: u64,
    /// Expected commutant dimension; sizes the probe block.
    pub expected_dim: Option<usize>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            gap_tol: DEFAULT_GAP_TOL,
            seed: 0x5eed,
            expected_dim: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CommutantQuery<'a> {
    pub gate_set: &'a GateSet,
    pub t1: usize,
    pub t2: usize,
    pub backend: Backend,
    pub rel_tol: f64,
    pub budget: Budget,
}

impl<'a> CommutantQuery<'a> {
    pub fn new(gate_set: &'a GateSet, t1: usize, t2: usize, backend: Backend) -> Self {
        Self {
            gate_set,
            t1,
            t2,
            backend,
            rel_tol: DEFAULT_REL_TOL,
            budget: Budget::default(),
        }
    }

    /// Side `D = d^{t1+t2}` of the lifted matrices.
    pub fn lift_side(&self) -> Option<usize> {
        self.gate_set.d().checked_pow((self.t1 + self.t2) as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CommutantResult {
    pub dimension: usize,
    pub certainty: Certainty,
    /// Dense: singular-value gap of the commutator system. Matrix-free:
    /// `(1 − μ_next) / (1 − μ_fixed)` on the channel spectrum.
    pub gap_ratio: f64,
    pub backend_used: Backend,
    /// Rank of the stacked commutator system (dense backend only).
    pub system_rank: Option<usize>,
    pub iterations: usize,
}

/// Runs the backend selected in the query.
pub fn commutant_dim(q: &CommutantQuery<'_>) -> Result<CommutantResult, CommutantError> {
    match q.backend {
        Backend::Dense => commutant_dim_dense(q),
        Backend::MatrixFree => commutant_dim_matrixfree(q),
    }
}

fn lifted_non_identity(q: &CommutantQuery<'_>) -> Result<Vec<ComplexMatrix>, CommutantError> {
    if q.t1 + q.t2 == 0 {
        return Err(CommutantError::EmptyLift);
    }
    q.gate_set
        .non_identity()
        .map(|g| Ok(mixed_lift(&g.matrix, q.t1, q.t2)?.matrix))
        .collect()
}

fn dense_unknowns(q: &CommutantQuery<'_>) -> Result<usize, CommutantError> {
    let d = q.gate_set.d();
    let n = d
        .checked_pow(2 * (q.t1 + q.t2) as u32)
        .filter(|&n| n <= DENSE_CAP)
        .ok_or(CommutantError::DenseTooLarge {
            unknowns: usize::MAX,
            cap: DENSE_CAP,
        })?;
    Ok(n)
}

/// Gram matrix `K†K` of the stacked commutator system `K`, assembled as
/// `Σ_g (2I − L_g ⊗ L̄_g − L_g† ⊗ L_gᵀ)` (each `L_g` unitary).
pub fn commutator_gram(lifts: &[ComplexMatrix]) -> Mat<C64> {
    let side = lifts.first().map_or(1, ComplexMatrix::rows);
    let n = side * side;
    let mut g = Mat::<C64>::zeros(n, n);
    let diag = C64::new(2.0 * lifts.len() as f64, 0.0);
    for l in lifts {
        let a = l.as_slice();
        for j1 in 0..side {
            for j2 in 0..side {
                let col = j1 * side + j2;
                for i1 in 0..side {
                    let l_i1j1 = a[i1 * side + j1];
                    let lc_j1i1 = a[j1 * side + i1].conj();
                    for i2 in 0..side {
                        let row = i1 * side + i2;
                        let m = l_i1j1 * a[i2 * side + j2].conj();
                        let m_adj = lc_j1i1 * a[j2 * side + i2];
                        g[(row, col)] -= m + m_adj;
                    }
                }
            }
        }
    }
    for i in 0..n {
        g[(i, i)] += diag;
    }
    g
}

/// The explicit stacked commutator system `[L_g ⊗ I − I ⊗ L_gᵀ]_g`; meant
/// for small sizes and cross-checks.
pub fn commutator_stack(gate_set: &GateSet, t1: usize, t2: usize) -> Result<ComplexMatrix, CommutantError> {
    let q = CommutantQuery::new(gate_set, t1, t2, Backend::Dense);
    let lifts = lifted_non_identity(&q)?;
    let side = q.lift_side().unwrap_or(usize::MAX);
    let n = dense_unknowns(&q)?;
    let mut stack = ComplexMatrix::zeros(n * lifts.len().max(1), n);
    for (k, l) in lifts.iter().enumerate() {
        let lt = l.transpose();
        let id = ComplexMatrix::identity(side);
        let block = crate::numerics::kron(l, &id)?.sub(&crate::numerics::kron(&id, &lt)?)?;
        for r in 0..n {
            for c in 0..n {
                stack[(k * n + r, c)] = block[(r, c)];
            }
        }
    }
    Ok(stack)
}

/// Dense backend: `dim = D² − rank(stack)`.
pub fn commutant_dim_dense(q: &CommutantQuery<'_>) -> Result<CommutantResult, CommutantError> {
    let n = dense_unknowns(q)?;
    let lifts = lifted_non_identity(q)?;
    if lifts.is_empty() {
        return Ok(CommutantResult {
            dimension: n,
            certainty: Certainty::Certified,
            gap_ratio: f64::INFINITY,
            backend_used: Backend::Dense,
            system_rank: Some(0),
            iterations: 0,
        });
    }
    let gram = commutator_gram(&lifts);
    drop(lifts);
    let report = rank_from_gram(gram.as_ref(), q.rel_tol)?;
    log::debug!(
        "dense commutant: n = {n}, rank = {}, gap = {:e}",
        report.rank,
        report.gap_ratio
    );
    Ok(result_from_rank(n, &report))
}

fn result_from_rank(n: usize, report: &RankReport) -> CommutantResult {
    CommutantResult {
        dimension: n - report.rank,
        certainty: if report.gap_ratio >= CERTIFY_GAP {
            Certainty::Certified
        } else {
            Certainty::Uncertain
        },
        gap_ratio: report.gap_ratio,
        backend_used: Backend::Dense,
        system_rank: Some(report.rank),
        iterations: 0,
    }
}

/// An orthonormal basis of the commutant (as `D×D` matrices), from the null
/// space of the commutator Gram matrix. Diagnostic use at small sizes.
pub fn commutant_basis_dense(
    gate_set: &GateSet,
    t1: usize,
    t2: usize,
    rel_tol: f64,
) -> Result<Vec<ComplexMatrix>, CommutantError> {
    let q = CommutantQuery::new(gate_set, t1, t2, Backend::Dense);
    let n = dense_unknowns(&q)?;
    let side = q.lift_side().unwrap_or(usize::MAX);
    let lifts = lifted_non_identity(&q)?;
    let reshape = |v: &dyn Fn(usize) -> C64| ComplexMatrix::from_fn(side, side, |i, j| v(i * side + j));
    if lifts.is_empty() {
        return Ok((0..n)
            .map(|k| {
                reshape(&|i| {
                    if i == k {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            })
            .collect());
    }
    let gram = commutator_gram(&lifts);
    let gram = ComplexMatrix::from_fn(n, n, |i, j| gram[(i, j)]);
    let (values, vectors) = hermitian_eigen(&gram)?;
    let top = values.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = rel_tol.max(gram_resolution(n)) * top.sqrt();
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l.max(0.0).sqrt() <= cutoff)
        .map(|(k, _)| reshape(&|i| vectors[(i, k)]))
        .collect())
}

/// Decision state of the matrix-free engine at one Rayleigh–Ritz check.
struct FixedCount {
    fixed: usize,
    gap_ratio: f64,
    certified: bool,
}

fn classify(state: &RitzState, gap_tol: f64) -> Option<FixedCount> {
    // Ritz values are for the lazy operator (Φ + id)/2; μ is the Φ eigenvalue.
    let mu: Vec<f64> = state.values.iter().map(|&theta| 2.0 * theta - 1.0).collect();
    let fixed = mu.iter().take_while(|&&m| m >= 1.0 - FIXED_TOL).count();
    if fixed == mu.len() {
        return None;
    }
    let next = mu[fixed];
    if state.residuals[..fixed].iter().any(|&r| r > RESIDUAL_TOL) {
        return None;
    }
    // Residual of the first excluded pair, in units of μ.
    let spread = 2.0 * state.residuals[fixed];
    let worst_fixed = mu[..fixed].iter().copied().fold(1.0, f64::min);
    let gap_ratio = (1.0 - next) / (1.0 - worst_fixed).max(f64::EPSILON);
    // Either a clear absolute gap, or an eigenvalue provably away from 1 by
    // a wide relative margin.
    let absolute = next <= 1.0 - gap_tol && spread <= gap_tol;
    let relative = spread <= (1.0 - next) / 2.0 && gap_ratio >= RELATIVE_GAP;
    if !(absolute || relative) {
        return None;
    }
    Some(FixedCount {
        fixed,
        gap_ratio,
        certified: true,
    })
}

/// Matrix-free backend: Chebyshev-accelerated block power iteration on
/// `(Φ + id)/2` with Rayleigh–Ritz extraction.
pub fn commutant_dim_matrixfree(q: &CommutantQuery<'_>) -> Result<CommutantResult, CommutantError> {
    if q.t1 + q.t2 == 0 {
        return Err(CommutantError::EmptyLift);
    }
    let d = q.gate_set.d();
    let legs = 2 * (q.t1 + q.t2);
    let n = d
        .checked_pow(legs as u32)
        .ok_or_else(|| CommutantError::Dimension(format!("{d}^{legs} overflows")))?;
    if q.gate_set.non_identity().next().is_none() {
        return Ok(CommutantResult {
            dimension: n,
            certainty: Certainty::Certified,
            gap_ratio: f64::INFINITY,
            backend_used: Backend::MatrixFree,
            system_rank: None,
            iterations: 0,
        });
    }
    // vec(L X L†) = (L ⊗ L̄) vec(X): legs U^{t1} Ū^{t2} | Ū^{t1} U^{t2}.
    let pattern = [(false, q.t1), (true, q.t2), (true, q.t1), (false, q.t2)];
    let channel: Vec<LiftFactors> = q
        .gate_set
        .symmetrized()
        .iter()
        .map(|g| LiftFactors::from_pattern(g, &pattern))
        .collect();
    let weight = 0.5 / channel.len() as f64;
    let lazy = |x: &[C64]| -> Vec<C64> {
        let mut acc: Vec<C64> = x.iter().map(|z| z * 0.5).collect();
        let mut scratch = vec![C64::new(0.0, 0.0); x.len()];
        for lift in &channel {
            scratch.copy_from_slice(x);
            lift.apply_in_place(&mut scratch);
            for (a, s) in acc.iter_mut().zip(&scratch) {
                *a += s * weight;
            }
        }
        acc
    };

    let mut block = q.budget.expected_dim.unwrap_or(8) + EXTRA_PROBES;
    let mut used = 0usize;
    let mut attempt = 0u64;
    loop {
        // Past half the space, one exact Rayleigh–Ritz step is cheaper.
        if 2 * block >= n {
            block = n;
        }
        let remaining = q.budget.max_iters.saturating_sub(used);
        let mut history: Vec<usize> = Vec::new();
        let mut saturated = false;
        // The lazy operator is positive semidefinite with spectrum in [0, 1].
        let outcome = filtered_subspace_iteration(
            n,
            block,
            q.budget.seed.wrapping_add(attempt),
            remaining.max(1),
            (0.0, 1.0),
            &lazy,
            |state, _| {
                if block == n {
                    // The block spans the whole space: Rayleigh–Ritz is exact.
                    let mu: Vec<f64> = state.values.iter().map(|&t| 2.0 * t - 1.0).collect();
                    let fixed = mu.iter().filter(|&&m| m >= 1.0 - FIXED_TOL).count();
                    let next = mu.get(fixed).copied().unwrap_or(-1.0);
                    let worst_fixed = mu[..fixed].iter().copied().fold(1.0, f64::min);
                    let gap_ratio = (1.0 - next) / (1.0 - worst_fixed).max(f64::EPSILON);
                    return Some(FixedCount {
                        fixed,
                        gap_ratio,
                        certified: 1.0 - next >= q.budget.gap_tol || gap_ratio >= RELATIVE_GAP,
                    });
                }
                // No visible gap inside the block: it cannot certify anything.
                let fixed_now = state
                    .values
                    .iter()
                    .filter(|&&t| 2.0 * t - 1.0 >= 1.0 - q.budget.gap_tol)
                    .count();
                if fixed_now == block {
                    saturated = true;
                    return Some(FixedCount {
                        fixed: block,
                        gap_ratio: 0.0,
                        certified: false,
                    });
                }
                let verdict = classify(state, q.budget.gap_tol)?;
                history.push(verdict.fixed);
                let stable = history.len() >= STABLE_CHECKS
                    && history[history.len() - STABLE_CHECKS..]
                        .iter()
                        .all(|&k| k == verdict.fixed);
                stable.then_some(verdict)
            },
        )?;
        match outcome {
            IterationOutcome::Converged { result, iterations } => {
                used += iterations;
                if saturated {
                    attempt += 1;
                    block = 2 * block + EXTRA_PROBES;
                    log::debug!("matrix-free commutant: block saturated, growing to {block}");
                    continue;
                }
                return Ok(CommutantResult {
                    dimension: result.fixed,
                    certainty: if result.certified {
                        Certainty::Certified
                    } else {
                        Certainty::Uncertain
                    },
                    gap_ratio: result.gap_ratio,
                    backend_used: Backend::MatrixFree,
                    system_rank: None,
                    iterations: used,
                });
            }
            IterationOutcome::Exhausted { last, iterations } => {
                used += iterations;
                let fixed = last.as_ref().map_or(0, |s| {
                    s.values
                        .iter()
                        .filter(|&&t| 2.0 * t - 1.0 >= 1.0 - q.budget.gap_tol)
                        .count()
                });
                log::warn!("matrix-free commutant: no certified gap after {used} iterations");
                return Ok(CommutantResult {
                    dimension: fixed,
                    certainty: Certainty::Uncertain,
                    gap_ratio: 0.0,
                    backend_used: Backend::MatrixFree,
                    system_rank: None,
                    iterations: used,
                });
            }
        }
    }
}

/// Transposes the last `n` of `t` tensor factors:
/// `out[(i,a),(j,b)] = x[(i,b),(j,a)]`.
pub fn partial_transpose(
    x: &ComplexMatrix,
    t: usize,
    n: usize,
    d: usize,
) -> Result<ComplexMatrix, CommutantError> {
    let side = d
        .checked_pow(t as u32)
        .ok_or_else(|| CommutantError::Dimension(format!("{d}^{t} overflows")))?;
    if n > t || x.rows() != side || x.cols() != side {
        return Err(CommutantError::Dimension(format!(
            "expected {side}x{side} with n <= {t}, got {}x{} and n = {n}",
            x.rows(),
            x.cols()
        )));
    }
    let tail = d.pow(n as u32);
    Ok(ComplexMatrix::from_fn(side, side, |row, col| {
        let (i, a) = (row / tail, row % tail);
        let (j, b) = (col / tail, col % tail);
        x[(i * tail + b, j * tail + a)]
    }))
}

/// The necessary condition `dim C(S^{1,1}) = 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NecessaryCondition {
    pub holds: bool,
    pub dimension: usize,
    pub reference: usize,
    pub certainty: Certainty,
}

pub fn necessary_condition(gate_set: &GateSet, rel_tol: f64) -> Result<NecessaryCondition, CommutantError> {
    let mut q = CommutantQuery::new(gate_set, 1, 1, Backend::Dense);
    q.rel_tol = rel_tol;
    let r = commutant_dim_dense(&q)?;
    Ok(NecessaryCondition {
        holds: r.dimension == HAAR_ADJOINT_COMMUTANT_DIM,
        dimension: r.dimension,
        reference: HAAR_ADJOINT_COMMUTANT_DIM,
        certainty: r.certainty,
    })
}
