//! Gate-set fixtures shared by the integration tests.

#![allow(dead_code)]

use qudit_univ::gates::{builtin, random_haar_unitary, Gate, GateSet, GateSetOptions};
use qudit_univ::numerics::{ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random gate set of one of several families, so that commutants range
/// from the Haar value up to large diagonal ones.
pub fn random_gate_set(seed: u64, d: usize) -> GateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = match seed % 4 {
        0 | 1 => {
            let k = rng.random_range(1..=2);
            (0..k)
                .map(|i| Gate::new(format!("U{i}"), random_haar_unitary(d, &mut rng)))
                .collect()
        }
        2 => {
            let phases: Vec<C64> = (0..d)
                .map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            vec![
                Gate::new("D", ComplexMatrix::from_diag(&phases)),
                Gate::new("Z", builtin("Z", d).unwrap()),
            ]
        }
        _ => {
            let names = if d == 2 { ["H", "S", "X"] } else { ["F", "Z", "X"] };
            let pick = rng.random_range(0..names.len());
            vec![Gate::new(names[pick], builtin(names[pick], d).unwrap())]
        }
    };
    GateSet::new(d, gates, GateSetOptions::default()).unwrap()
}
