//! Iterative spectral methods: block power iteration with Rayleigh–Ritz
//! extraction, and the operator norm built on it.

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{ComplexMatrix, NumericsError, C64};

/// Default absolute tolerance for [`spectral_norm`].
pub const DEFAULT_NORM_TOL: f64 = 1e-9;

/// Anything that can be applied to vectors, together with its adjoint.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64>;
}

impl LinearOperator for ComplexMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        ComplexMatrix::apply(self, x)
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        ComplexMatrix::apply_adjoint(self, x)
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// Orthonormalizes `block` in place (two passes of modified Gram–Schmidt).
/// Vectors that collapse are replaced by fresh random ones.
pub(crate) fn orthonormalize(block: &mut [Vec<C64>], rng: &mut ChaCha8Rng) {
    let n = block.first().map_or(0, Vec::len);
    for k in 0..block.len() {
        let mut attempts = 0;
        loop {
            let original = norm(&block[k]);
            for _ in 0..2 {
                let (done, rest) = block.split_at_mut(k);
                let v = &mut rest[0];
                for q in done.iter() {
                    let c = dot(q, v);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
            let nv = norm(&block[k]);
            if nv > 1e-10 * original.max(f64::MIN_POSITIVE) && nv > 0.0 {
                let inv = 1.0 / nv;
                block[k].iter_mut().for_each(|z| *z *= inv);
                break;
            }
            attempts += 1;
            assert!(
                attempts < 8,
                "cannot extend orthonormal block of size {k} in dimension {n}"
            );
            block[k] = random_vector(rng, n);
        }
    }
}

/// Ritz pairs of a Hermitian operator on an orthonormal block, sorted by
/// descending Ritz value.
#[derive(Clone, Debug)]
pub struct RitzState {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    /// Operator applied to each Ritz vector.
    pub images: Vec<Vec<C64>>,
}

pub(crate) fn rayleigh_ritz(q: &[Vec<C64>], aq: &[Vec<C64>]) -> Result<RitzState, NumericsError> {
    let p = q.len();
    let h = Mat::<C64>::from_fn(p, p, |i, j| {
        let hij = dot(&q[i], &aq[j]);
        let hji = dot(&q[j], &aq[i]);
        (hij + hji.conj()) * 0.5
    });
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| NumericsError::Decomposition(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let w = evd.U();
    let n = q.first().map_or(0, Vec::len);
    let mut state = RitzState {
        values: Vec::with_capacity(p),
        residuals: Vec::with_capacity(p),
        vectors: Vec::with_capacity(p),
        images: Vec::with_capacity(p),
    };
    for k in (0..p).rev() {
        let theta = s[k].re;
        let mut y = vec![C64::new(0.0, 0.0); n];
        let mut ay = vec![C64::new(0.0, 0.0); n];
        for j in 0..p {
            let c = w[(j, k)];
            for ((yi, ayi), (qi, aqi)) in y.iter_mut().zip(ay.iter_mut()).zip(q[j].iter().zip(&aq[j])) {
                *yi += c * qi;
                *ayi += c * aqi;
            }
        }
        let r = ay
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        state.values.push(theta);
        state.residuals.push(r);
        state.vectors.push(y);
        state.images.push(ay);
    }
    Ok(state)
}

/// Outcome of [`subspace_iteration`].
pub enum IterationOutcome<R> {
    Converged {
        result: R,
        iterations: usize,
    },
    Exhausted {
        last: Option<RitzState>,
        iterations: usize,
    },
}

/// Block power iteration for a Hermitian positive semidefinite operator.
///
/// After every `check_every` iterations a Rayleigh–Ritz step runs and
/// `decide` is asked whether the Ritz state settles the question. The block
/// is re-seeded from the current Ritz vectors, so `decide` may also return
/// `None` forever and let the budget run out.
pub fn subspace_iteration<R>(
    n: usize,
    block: usize,
    seed: u64,
    max_iters: usize,
    check_every: usize,
    apply: impl Fn(&[C64]) -> Vec<C64>,
    mut decide: impl FnMut(&RitzState, usize) -> Option<R>,
) -> Result<IterationOutcome<R>, NumericsError> {
    let block = block.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Vec<C64>> = (0..block).map(|_| random_vector(&mut rng, n)).collect();
    orthonormalize(&mut v, &mut rng);
    let mut last = None;
    let check_every = check_every.max(1);
    for iter in 1..=max_iters {
        let mut av: Vec<Vec<C64>> = v.iter().map(|x| apply(x)).collect();
        if iter % check_every == 0 || iter == max_iters {
            let state = rayleigh_ritz(&v, &av)?;
            if let Some(result) = decide(&state, iter) {
                return Ok(IterationOutcome::Converged {
                    result,
                    iterations: iter,
                });
            }
            av = state.images.clone();
            last = Some(state);
        }
        orthonormalize(&mut av, &mut rng);
        v = av;
    }
    Ok(IterationOutcome::Exhausted {
        last,
        iterations: max_iters,
    })
}

/// Highest Chebyshev degree used by [`filtered_subspace_iteration`].
const MAX_FILTER_DEGREE: usize = 40;
/// Target damping of the unwanted interval per filter application.
const FILTER_DAMPING: f64 = 1e4;

/// Chebyshev-filtered block iteration for a Hermitian operator whose
/// spectrum lies in `[lower, upper]`, converging to its top eigenvectors.
///
/// Each round runs Rayleigh–Ritz, asks `decide`, then applies a Chebyshev
/// polynomial that is bounded by 1 on `[lower, c]` (`c` the smallest Ritz
/// value of the block) and grows fast above `c`. This converges like
/// `exp(-k·2√gap)` in `k` applies, where plain power iteration gets
/// `exp(-k·gap)`. `max_applies` and the count passed to `decide` are
/// operator applications per block vector.
#[allow(clippy::too_many_arguments)]
pub fn filtered_subspace_iteration<R>(
    n: usize,
    block: usize,
    seed: u64,
    max_applies: usize,
    (lower, upper): (f64, f64),
    apply: impl Fn(&[C64]) -> Vec<C64>,
    mut decide: impl FnMut(&RitzState, usize) -> Option<R>,
) -> Result<IterationOutcome<R>, NumericsError> {
    let block = block.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Vec<C64>> = (0..block).map(|_| random_vector(&mut rng, n)).collect();
    orthonormalize(&mut v, &mut rng);
    let mut av: Vec<Vec<C64>> = v.iter().map(|x| apply(x)).collect();
    let mut applies = 1;
    loop {
        let state = rayleigh_ritz(&v, &av)?;
        if let Some(result) = decide(&state, applies) {
            return Ok(IterationOutcome::Converged {
                result,
                iterations: applies,
            });
        }
        if applies >= max_applies {
            return Ok(IterationOutcome::Exhausted {
                last: Some(state),
                iterations: applies,
            });
        }
        let span = upper - lower;
        let cut = state
            .values
            .last()
            .copied()
            .unwrap_or(lower)
            .clamp(lower + 1e-3 * span, upper - 1e-12 * span);
        let center = 0.5 * (cut + lower);
        let half = 0.5 * (cut - lower);
        let reach = ((upper - center) / half).acosh();
        let degree = ((FILTER_DAMPING.ln() / reach).ceil() as usize)
            .clamp(1, MAX_FILTER_DEGREE)
            .min(max_applies - applies);
        // T_1 comes for free from the Ritz images.
        let mut prev = state.vectors;
        let mut cur: Vec<Vec<C64>> = state
            .images
            .iter()
            .zip(&prev)
            .map(|(ax, x)| ax.iter().zip(x).map(|(a, b)| (a - b * center) / half).collect())
            .collect();
        for _ in 1..degree {
            let next: Vec<Vec<C64>> = cur
                .iter()
                .zip(&prev)
                .map(|(x, xp)| {
                    let ax = apply(x);
                    ax.iter()
                        .zip(x)
                        .zip(xp)
                        .map(|((a, b), c)| (a - b * center) * (2.0 / half) - c)
                        .collect()
                })
                .collect();
            prev = std::mem::replace(&mut cur, next);
        }
        applies += degree - 1;
        orthonormalize(&mut cur, &mut rng);
        v = cur;
        av = v.iter().map(|x| apply(x)).collect();
        applies += 1;
    }
}

/// Settings for [`spectral_norm_with`].
#[derive(Clone, Debug)]
pub struct NormOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Iterations without meeting the residual bound before a restart.
    pub stagnation_window: usize,
    /// Initial block size; doubled on every restart.
    pub block: usize,
    pub seed: u64,
    /// A known upper bound on the norm. Since the top Ritz value is a lower
    /// bound, iteration stops once the two are within `tol`.
    pub upper_bound: Option<f64>,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_NORM_TOL,
            max_iters: 20_000,
            stagnation_window: 500,
            block: 8,
            seed: 0x5eed,
            upper_bound: None,
        }
    }
}

/// A largest-singular-value estimate with its residual bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NormEstimate {
    pub value: f64,
    /// Residual bound: some singular value lies within this distance.
    pub error_bound: f64,
    pub iterations: usize,
}

/// Largest singular value of `a` within `tol`.
pub fn spectral_norm(a: &ComplexMatrix, tol: f64) -> Result<f64, NumericsError> {
    let opts = NormOptions {
        tol,
        ..NormOptions::default()
    };
    spectral_norm_with(a, &opts).map(|e| e.value)
}

/// Power iteration on the Gram operator `A†A` of any [`LinearOperator`].
///
/// The top Ritz value `θ` of the Gram operator, with residual `r`, brackets
/// an eigenvalue within `r`; the singular-value bound reported is
/// `r / sqrt(θ)`. A top singular value whose multiplicity reaches the block
/// size never converges, so on stagnation the iteration restarts from fresh
/// random vectors with twice the block.
pub fn spectral_norm_with(a: &dyn LinearOperator, opts: &NormOptions) -> Result<NormEstimate, NumericsError> {
    let n = a.ncols();
    let gram = |x: &[C64]| a.apply_adjoint(&a.apply(x));
    let mut used = 0usize;
    let mut attempt = 0u64;
    let mut best: Option<NormEstimate> = None;
    let mut block = opts.block.max(1);
    while used < opts.max_iters {
        let window = opts.stagnation_window.min(opts.max_iters - used);
        let outcome = subspace_iteration(
            n,
            block,
            opts.seed.wrapping_add(attempt),
            window,
            1,
            gram,
            |state, iters| {
                let theta = state.values[0].max(0.0);
                let r = state.residuals[0];
                let sigma = theta.sqrt();
                // Everything is below tolerance: the Ritz interval [θ-r, θ+r]
                // sits under tol².
                if (theta + r).sqrt() <= opts.tol {
                    return Some(NormEstimate {
                        value: sigma,
                        error_bound: (theta + r).sqrt(),
                        iterations: iters,
                    });
                }
                if let Some(upper) = opts.upper_bound {
                    if upper - sigma <= opts.tol {
                        return Some(NormEstimate {
                            value: upper,
                            error_bound: (upper - sigma).max(0.0),
                            iterations: iters,
                        });
                    }
                }
                let bound = r / sigma;
                (bound <= opts.tol).then_some(NormEstimate {
                    value: sigma,
                    error_bound: bound,
                    iterations: iters,
                })
            },
        )?;
        match outcome {
            IterationOutcome::Converged { result, iterations } => {
                return Ok(NormEstimate {
                    iterations: used + iterations,
                    ..result
                });
            }
            IterationOutcome::Exhausted { last, iterations } => {
                used += iterations;
                attempt += 1;
                block = (2 * block).min(n);
                if let Some(state) = last {
                    let theta = state.values[0].max(0.0);
                    let est = NormEstimate {
                        value: theta.sqrt(),
                        error_bound: state.residuals[0] / theta.sqrt().max(f64::MIN_POSITIVE),
                        iterations: used,
                    };
                    if best.map_or(true, |b| est.error_bound < b.error_bound) {
                        best = Some(est);
                    }
                }
                log::debug!(
                    "spectral_norm: stagnation after {used} iterations, restarting with block {block}"
                );
            }
        }
    }
    Err(NumericsError::NoConvergence {
        iterations: used,
        estimate: best.map(|b| b.value),
        bound: best.map(|b| b.error_bound),
    })
}
