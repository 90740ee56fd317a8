//! Exact Haar-side reference dimensions.
//!
//! The commutant of `{U^{⊗n} : U ∈ U(d)}` is spanned by the operators that
//! permute the `n` tensor factors, so its dimension is the rank of the Gram
//! matrix `G(σ, τ) = tr(P_σ† P_τ) = d^{#cycles(σ⁻¹τ)}`. Ranks are computed
//! exactly over two large primes.

pub mod modular;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use modular::PRIME_PAIRS;

/// Largest `n` accepted by [`gram_rank`].
pub const MAX_GRAM_N: usize = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HaarRefError {
    #[error("n = {0} is outside 1..={MAX_GRAM_N}")]
    UnsupportedN(usize),
    #[error("d = {0} must be at least 2")]
    UnsupportedD(usize),
    #[error("entries d^n = {d}^{n} do not fit below the working primes")]
    EntriesTooLarge { d: usize, n: usize },
    #[error("modular ranks disagreed for every prime pair: {0:?}")]
    PrimeDisagreement(Vec<(usize, usize)>),
    #[error("t = {0} is outside the supported range")]
    UnsupportedT(usize),
    #[error("invalid permutation images {0:?}")]
    InvalidPermutation(Vec<usize>),
}

/// A permutation of `{0, …, n−1}` stored by images.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self, HaarRefError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(HaarRefError::InvalidPermutation(images));
            }
        }
        if n == 0 {
            return Err(HaarRefError::InvalidPermutation(images));
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.n(), other.n());
        Self {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.n()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Self { images }
    }

    pub fn cycle_count(&self) -> usize {
        let mut seen = vec![false; self.n()];
        let mut cycles = 0;
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.images[i];
            }
        }
        cycles
    }

    /// Next permutation in lexicographic order of the image sequence.
    pub fn next_lex(&self) -> Option<Self> {
        let mut v = self.images.clone();
        let i = (0..v.len().saturating_sub(1)).rev().find(|&i| v[i] < v[i + 1])?;
        let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i])?;
        v.swap(i, j);
        v[i + 1..].reverse();
        Some(Self { images: v })
    }

    /// All permutations of `n` points in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut out = vec![Self::identity(n)];
        while let Some(next) = out.last().and_then(Self::next_lex) {
            out.push(next);
        }
        out
    }

    /// Index of `P_σ e_in`, where `P_σ` moves tensor factor `k` of
    /// `(C^d)^{⊗n}` to position `σ(k)`.
    pub fn permute_basis_index(&self, d: usize, index: usize) -> usize {
        let n = self.n();
        let mut digits = vec![0usize; n];
        let mut rest = index;
        for k in (0..n).rev() {
            digits[k] = rest % d;
            rest /= d;
        }
        let mut out_digits = vec![0usize; n];
        for (k, &digit) in digits.iter().enumerate() {
            out_digits[self.images[k]] = digit;
        }
        out_digits.iter().fold(0, |acc, &x| acc * d + x)
    }
}

/// Entries `d^{#cycles(σ⁻¹τ)}` of the permutation-operator Gram matrix,
/// row-major over `Permutation::all(n)`.
pub fn permutation_gram(n: usize, d: usize) -> Vec<u64> {
    let perms = Permutation::all(n);
    let inverses: Vec<_> = perms.iter().map(Permutation::inverse).collect();
    let powers: Vec<u64> = (0..=n as u32).map(|k| (d as u64).pow(k)).collect();
    let mut g = Vec::with_capacity(perms.len() * perms.len());
    for s_inv in &inverses {
        for t in &perms {
            g.push(powers[s_inv.compose(t).cycle_count()]);
        }
    }
    g
}

/// Exact rank of the `n!×n!` permutation Gram matrix at local dimension `d`,
/// i.e. the dimension of the commutant of `U(d)` acting on `(C^d)^{⊗n}`.
///
/// Each rank is computed modulo two primes above `2^40` and `d^n`; on
/// disagreement the next pair is tried.
pub fn gram_rank(n: usize, d: usize) -> Result<usize, HaarRefError> {
    if n == 0 || n > MAX_GRAM_N {
        return Err(HaarRefError::UnsupportedN(n));
    }
    if d < 2 {
        return Err(HaarRefError::UnsupportedD(d));
    }
    let max_entry = (d as u128).pow(n as u32);
    let size = (1..=n).product::<usize>();
    let gram = permutation_gram_checked(n, d, max_entry)?;
    let mut seen = Vec::new();
    for (p1, p2) in PRIME_PAIRS {
        if max_entry >= p1.modulus().min(p2.modulus()) as u128 {
            continue;
        }
        let r1 = p1.rank(gram.clone(), size, size);
        let r2 = p2.rank(gram.clone(), size, size);
        if r1 == r2 {
            return Ok(r1);
        }
        log::warn!(
            "gram_rank({n}, {d}): primes {} and {} disagree ({r1} vs {r2})",
            p1.modulus(),
            p2.modulus()
        );
        seen.push((r1, r2));
    }
    if seen.is_empty() {
        return Err(HaarRefError::EntriesTooLarge { d, n });
    }
    Err(HaarRefError::PrimeDisagreement(seen))
}

fn permutation_gram_checked(n: usize, d: usize, max_entry: u128) -> Result<Vec<u64>, HaarRefError> {
    if max_entry >= 1u128 << 56 {
        return Err(HaarRefError::EntriesTooLarge { d, n });
    }
    Ok(permutation_gram(n, d))
}

/// The tensor power `t` at which the commutant test decides universality, and
/// the Haar commutant dimension `dim C(G_d^{t,t})` it must match.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TargetDimension {
    pub t: usize,
    pub dim: usize,
}

/// `(3, 132)` for qubits, `(2, 23)` for qutrits and `(2, 24)` for `d ≥ 4`.
pub fn target_dimension(d: usize) -> Result<TargetDimension, HaarRefError> {
    match d {
        0 | 1 => Err(HaarRefError::UnsupportedD(d)),
        2 => Ok(TargetDimension { t: 3, dim: 132 }),
        3 => Ok(TargetDimension { t: 2, dim: 23 }),
        _ => Ok(TargetDimension { t: 2, dim: 24 }),
    }
}

/// Recomputes the target constant for `d` from the Gram rank.
pub fn verify_target_dimension(d: usize) -> Result<bool, HaarRefError> {
    let target = target_dimension(d)?;
    Ok(gram_rank(2 * target.t, d)? == target.dim)
}

/// Multiplicities of irreducible representations, keyed by label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiplicityVector<L: Ord> {
    entries: BTreeMap<L, u64>,
}

impl<L: Ord + Copy> MultiplicityVector<L> {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (L, u64)>) -> Self {
        let mut entries = BTreeMap::new();
        for (label, m) in pairs {
            if m > 0 {
                *entries.entry(label).or_insert(0) += m;
            }
        }
        Self { entries }
    }

    pub fn get(&self, label: L) -> u64 {
        self.entries.get(&label).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (L, u64)> + '_ {
        self.entries.iter().map(|(l, m)| (*l, *m))
    }

    /// `Σ m²`, the commutant dimension of the decomposed representation.
    pub fn sum_of_squares(&self) -> u64 {
        self.entries.values().map(|m| m * m).sum()
    }

    /// `Σ m · dim(π)`.
    pub fn total_dimension(&self, dim: impl Fn(L) -> u64) -> u64 {
        self.entries.iter().map(|(l, m)| m * dim(*l)).sum()
    }
}

/// Clebsch–Gordan rule: `π_l ⊗ π_k = π_{l+k} ⊕ π_{l+k−2} ⊕ … ⊕ π_{|l−k|}`,
/// labels being twice the spin (so `π_ν` has dimension `ν+1`).
pub fn su2_clebsch_gordan(l: u32, k: u32) -> impl Iterator<Item = u32> {
    let lo = l.abs_diff(k);
    (lo..=l + k).rev().step_by(2)
}

/// Decomposition of `U^{⊗t} ⊗ Ū^{⊗t} ≅ (π_2 ⊕ π_0)^{⊗t}` for `U ∈ SU(2)`.
pub fn su2_decompose(t: usize) -> Result<MultiplicityVector<u32>, HaarRefError> {
    if !(1..=8).contains(&t) {
        return Err(HaarRefError::UnsupportedT(t));
    }
    let factor = [(2u32, 1u64), (0u32, 1u64)];
    let mut current: BTreeMap<u32, u64> = factor.into_iter().collect();
    for _ in 1..t {
        let mut next = BTreeMap::new();
        for (&l, &m) in &current {
            for &(k, mk) in &factor {
                for nu in su2_clebsch_gordan(l, k) {
                    *next.entry(nu).or_insert(0) += m * mk;
                }
            }
        }
        current = next;
    }
    Ok(MultiplicityVector::from_pairs(current))
}

/// Decomposition of `U^{⊗2} ⊗ Ū^{⊗2}` for `U ∈ SU(3)`, labelled by
/// partitions `(λ1, λ2)`; `(0, 0)` is the trivial representation.
pub fn su3_reference() -> MultiplicityVector<(u32, u32)> {
    MultiplicityVector::from_pairs([((4, 2), 1), ((3, 0), 1), ((3, 3), 1), ((2, 1), 4), ((0, 0), 2)])
}

/// Weyl dimension of the SU(3) irrep with partition `(λ1, λ2)`.
pub fn su3_irrep_dim((l1, l2): (u32, u32)) -> u64 {
    let a = (l1 - l2) as u64;
    let b = l2 as u64;
    (a + 1) * (b + 1) * (a + b + 2) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: Σ over partitions λ ⊢ n with at most d rows of
    /// (f^λ)², with f^λ from the hook length formula.
    fn tableaux_oracle(n: usize, d: usize) -> u64 {
        fn partitions(n: usize, max_part: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if n == 0 {
                out.push(acc.clone());
                return;
            }
            for part in (1..=max_part.min(n)).rev() {
                acc.push(part);
                partitions(n - part, part, acc, out);
                acc.pop();
            }
        }
        fn hook_count(shape: &[usize]) -> u64 {
            let n: usize = shape.iter().sum();
            let mut hooks = 1u64;
            for (i, &row) in shape.iter().enumerate() {
                for j in 0..row {
                    let arm = row - j - 1;
                    let leg = shape[i + 1..].iter().filter(|&&r| r > j).count();
                    hooks *= (arm + leg + 1) as u64;
                }
            }
            (1..=n as u64).product::<u64>() / hooks
        }
        let mut all = Vec::new();
        partitions(n, n, &mut Vec::new(), &mut all);
        all.iter()
            .filter(|p| p.len() <= d)
            .map(|p| hook_count(p).pow(2))
            .sum()
    }

    #[test]
    fn permutation_basics() {
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        assert_eq!(p.cycle_count(), 1);
        assert_eq!(p.compose(&p.inverse()), Permutation::identity(3));
        assert_eq!(Permutation::identity(4).cycle_count(), 4);
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        let all = Permutation::all(4);
        assert_eq!(all.len(), 24);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn swap_moves_digits() {
        let swap = Permutation::new(vec![1, 0]).unwrap();
        // |01> -> |10> at d = 2
        assert_eq!(swap.permute_basis_index(2, 1), 2);
        // cyclic shift on three qutrits: digits (0,1,2) -> factor k lands at k+1
        let cyc = Permutation::new(vec![1, 2, 0]).unwrap();
        assert_eq!(cyc.permute_basis_index(3, 5), 2 * 9 + 1);
    }

    #[test]
    fn gram_two_by_two() {
        assert_eq!(permutation_gram(2, 2), vec![4, 2, 2, 4]);
        assert_eq!(gram_rank(2, 2).unwrap(), 2);
    }

    #[test]
    fn gram_rank_constants() {
        assert_eq!(gram_rank(6, 2).unwrap(), 132);
        assert_eq!(gram_rank(4, 3).unwrap(), 23);
        assert_eq!(gram_rank(4, 4).unwrap(), 24);
        assert_eq!(gram_rank(4, 2).unwrap(), 14);
    }

    #[test]
    fn factorial_rule_for_large_d() {
        for t in 1..=3usize {
            let n = 2 * t;
            let fact: usize = (1..=n).product();
            for d in n..=7 {
                assert_eq!(gram_rank(n, d).unwrap(), fact, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn matches_tableaux_oracle_and_is_monotone() {
        for n in 1..=6 {
            let mut prev = 0;
            for d in 2..=7 {
                let r = gram_rank(n, d).unwrap();
                assert_eq!(r as u64, tableaux_oracle(n, d), "n={n} d={d}");
                assert!(r >= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(gram_rank(8, 2), Err(HaarRefError::UnsupportedN(8)));
        assert_eq!(gram_rank(0, 2), Err(HaarRefError::UnsupportedN(0)));
        assert_eq!(gram_rank(3, 1), Err(HaarRefError::UnsupportedD(1)));
        assert!(matches!(
            gram_rank(7, 300),
            Err(HaarRefError::EntriesTooLarge { .. })
        ));
    }

    #[test]
    fn target_constants() {
        assert_eq!(target_dimension(2).unwrap(), TargetDimension { t: 3, dim: 132 });
        assert_eq!(target_dimension(3).unwrap(), TargetDimension { t: 2, dim: 23 });
        assert_eq!(target_dimension(7).unwrap(), TargetDimension { t: 2, dim: 24 });
        for d in 2..=6 {
            assert!(verify_target_dimension(d).unwrap());
        }
    }

    #[test]
    fn clebsch_gordan_rule() {
        assert_eq!(su2_clebsch_gordan(2, 2).collect::<Vec<_>>(), vec![4, 2, 0]);
        assert_eq!(su2_clebsch_gordan(0, 2).collect::<Vec<_>>(), vec![2]);
        assert_eq!(su2_clebsch_gordan(3, 1).collect::<Vec<_>>(), vec![4, 2]);
    }

    #[test]
    fn su2_examples() {
        let m1 = su2_decompose(1).unwrap();
        assert_eq!(m1, MultiplicityVector::from_pairs([(2, 1), (0, 1)]));
        assert_eq!(m1.sum_of_squares(), 2);
        let m2 = su2_decompose(2).unwrap();
        assert_eq!(m2, MultiplicityVector::from_pairs([(4, 1), (2, 3), (0, 2)]));
        assert_eq!(m2.sum_of_squares(), 14);
        let m3 = su2_decompose(3).unwrap();
        assert_eq!(
            m3,
            MultiplicityVector::from_pairs([(6, 1), (4, 5), (2, 9), (0, 5)])
        );
        assert_eq!(m3.sum_of_squares(), 132);
    }

    #[test]
    fn su2_bookkeeping_and_gram_agreement() {
        for t in 1..=8usize {
            let m = su2_decompose(t).unwrap();
            assert_eq!(m.total_dimension(|nu| nu as u64 + 1), 4u64.pow(t as u32));
            if 2 * t <= 6 {
                assert_eq!(m.sum_of_squares(), gram_rank(2 * t, 2).unwrap() as u64);
            }
        }
        assert!(su2_decompose(0).is_err());
        assert!(su2_decompose(9).is_err());
    }

    #[test]
    fn su3_reference_values() {
        let m = su3_reference();
        assert_eq!(m.sum_of_squares(), 23);
        assert_eq!(m.get((0, 0)), 2);
        assert_eq!(m.sum_of_squares() as usize, gram_rank(4, 3).unwrap());
        assert_eq!(m.total_dimension(su3_irrep_dim), 81);
    }
}
