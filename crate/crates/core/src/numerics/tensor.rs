//! Kernels acting on vectors of `(C^d)^{⊗n}` one tensor leg at a time.
//!
//! Leg 0 is the most significant index, matching [`kron`](super::kron).

use super::{ComplexMatrix, C64};

/// A local operator on one leg: either a dense `d×d` matrix or the identity.
#[derive(Clone, Copy, Debug)]
pub enum LegOp<'a> {
    Identity,
    Matrix(&'a ComplexMatrix),
}

/// Applies `op` to leg `leg` of an `n`-leg tensor with local dimension `d`,
/// in place.
pub fn apply_to_leg(x: &mut [C64], d: usize, n: usize, leg: usize, op: &ComplexMatrix) {
    debug_assert_eq!(x.len(), d.pow(n as u32));
    debug_assert!(leg < n);
    debug_assert_eq!((op.rows(), op.cols()), (d, d));
    let inner = d.pow((n - 1 - leg) as u32);
    let block = d * inner;
    let m = op.as_slice();
    if inner >= 8 {
        // Contiguous rows: out_a = Σ_b m[a,b] in_b over slices of length `inner`.
        let mut scratch = vec![C64::new(0.0, 0.0); block];
        for chunk in x.chunks_exact_mut(block) {
            scratch.copy_from_slice(chunk);
            for (a, out) in chunk.chunks_exact_mut(inner).enumerate() {
                out.fill(C64::new(0.0, 0.0));
                for (b, src) in scratch.chunks_exact(inner).enumerate() {
                    let w = m[a * d + b];
                    for (o, s) in out.iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
        }
        return;
    }
    let mut gathered = vec![C64::new(0.0, 0.0); d];
    for chunk in x.chunks_exact_mut(block) {
        for r in 0..inner {
            for (a, g) in gathered.iter_mut().enumerate() {
                *g = chunk[a * inner + r];
            }
            for a in 0..d {
                let row = &m[a * d..(a + 1) * d];
                chunk[a * inner + r] = row.iter().zip(&gathered).map(|(p, q)| p * q).sum();
            }
        }
    }
}

/// Applies `ops[k]` to leg `k` for every leg; equivalent to multiplying by
/// `kron(ops[0], ..., ops[n-1])` without forming it.
pub fn apply_product(x: &mut [C64], d: usize, ops: &[LegOp<'_>]) {
    let n = ops.len();
    for (leg, op) in ops.iter().enumerate() {
        if let LegOp::Matrix(m) = op {
            apply_to_leg(x, d, n, leg, m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kron_all;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn matches_dense_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(d, n) in &[(2usize, 3usize), (3, 2), (2, 4), (2, 6), (3, 4)] {
            let mats: Vec<_> = (0..n).map(|_| random_matrix(&mut rng, d)).collect();
            let refs: Vec<_> = mats.iter().collect();
            let dense = kron_all(&refs).unwrap();
            let x: Vec<C64> = (0..d.pow(n as u32))
                .map(|_| C64::new(rng.random(), rng.random()))
                .collect();
            let expected = dense.apply(&x);
            let mut y = x.clone();
            let ops: Vec<_> = mats.iter().map(LegOp::Matrix).collect();
            apply_product(&mut y, d, &ops);
            for (a, b) in y.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_legs_are_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 3);
        let id = ComplexMatrix::identity(3);
        let dense = kron_all(&[&id, &m]).unwrap();
        let x: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0)).collect();
        let mut y = x.clone();
        apply_product(&mut y, 3, &[LegOp::Identity, LegOp::Matrix(&m)]);
        let expected = dense.apply(&x);
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
