//! Arithmetic modulo pseudo-Mersenne primes `p = 2^k − c` and exact rank
//! by Gaussian elimination.

/// A prime of the form `2^k − c` with `k ≤ 63` and small `c`, which allows
/// reduction of 128-bit products with two shifts and no division.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PseudoMersenne {
    p: u64,
    k: u32,
    c: u64,
}

impl PseudoMersenne {
    pub const fn new(k: u32, c: u64) -> Self {
        assert!(k >= 41 && k <= 63 && c < (1 << 20) && c % 2 == 1);
        Self {
            p: (1u64 << k) - c,
            k,
            c,
        }
    }

    pub const fn modulus(&self) -> u64 {
        self.p
    }

    #[inline]
    fn reduce(&self, x: u128) -> u64 {
        let mask = (1u128 << self.k) - 1;
        let y = (x >> self.k) * self.c as u128 + (x & mask);
        let z = (y >> self.k) * self.c as u128 + (y & mask);
        let mut r = z as u64;
        while r >= self.p {
            r -= self.p;
        }
        r
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(a as u128 * b as u128)
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + (self.p - b)
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(a % self.p != 0);
        self.pow(a, self.p - 2)
    }

    /// Rank of a row-major `rows×cols` matrix whose entries are already
    /// reduced modulo `p`. Consumes the buffer as scratch.
    pub fn rank(&self, mut a: Vec<u64>, rows: usize, cols: usize) -> usize {
        assert_eq!(a.len(), rows * cols);
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let Some(pivot) = (rank..rows).find(|&r| a[r * cols + col] != 0) else {
                continue;
            };
            if pivot != rank {
                for j in col..cols {
                    a.swap(pivot * cols + j, rank * cols + j);
                }
            }
            let inv = self.inv(a[rank * cols + col]);
            let (head, tail) = a.split_at_mut((rank + 1) * cols);
            let pivot_row = &head[rank * cols..];
            for row in tail.chunks_exact_mut(cols) {
                let lead = row[col];
                if lead == 0 {
                    continue;
                }
                let f = self.mul(lead, inv);
                for (x, &pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x = self.sub(*x, self.mul(f, pv));
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Prime pairs tried in order by the two-prime rank check.
pub const PRIME_PAIRS: [(PseudoMersenne, PseudoMersenne); 4] = [
    (PseudoMersenne::new(61, 1), PseudoMersenne::new(62, 57)),
    (PseudoMersenne::new(60, 93), PseudoMersenne::new(59, 55)),
    (PseudoMersenne::new(58, 27), PseudoMersenne::new(57, 25)),
    (PseudoMersenne::new(56, 5), PseudoMersenne::new(63, 25)),
];

/// Deterministic Miller–Rabin, exact for all 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
