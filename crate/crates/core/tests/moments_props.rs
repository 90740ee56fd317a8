use proptest::prelude::*;
use qudit_univ::gates::{random_haar_unitary, Gate, GateSet, GateSetOptions};
use qudit_univ::moments::{
    delta, distance_to_haar, haar_moment_operator, moment_operator, word_moment, DeltaOptions, HaarProjector,
};
use qudit_univ::numerics::{matmul, ComplexMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `{U, U†, V, V†}` (plus the identity): the moment operator is Hermitian.
fn symmetric_set(seed: u64, d: usize) -> GateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_haar_unitary(d, &mut rng);
    let v = random_haar_unitary(d, &mut rng);
    let gates = vec![
        Gate::new("U", u.clone()),
        Gate::new("U*", u.adjoint()),
        Gate::new("V", v.clone()),
        Gate::new("V*", v.adjoint()),
    ];
    GateSet::new(d, gates, GateSetOptions::default()).unwrap()
}

fn random_set(seed: u64, d: usize, k: usize) -> GateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = (0..k)
        .map(|i| Gate::new(format!("G{i}"), random_haar_unitary(d, &mut rng)))
        .collect();
    GateSet::new(d, gates, GateSetOptions::default()).unwrap()
}

#[test]
fn haar_traces() {
    for (t, tr) in [(1, 1.0), (2, 2.0), (3, 5.0)] {
        let p = HaarProjector::new(2, t).unwrap().to_dense();
        assert!((p.trace().re - tr).abs() < 1e-10);
        assert!(matmul(&p, &p).unwrap().max_abs_diff(&p) < 1e-10);
        assert!(p.adjoint().max_abs_diff(&p) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn haar_absorbs_any_moment(seed in any::<u64>(), d in 2usize..=3, t in 1usize..=2) {
        let s = random_set(seed, d, 2);
        let m = moment_operator(&s, t).unwrap().matrix;
        let p = haar_moment_operator(d, t).unwrap().matrix;
        prop_assert!(matmul(&m, &p).unwrap().max_abs_diff(&p) < 1e-10);
        prop_assert!(matmul(&p, &m).unwrap().max_abs_diff(&p) < 1e-10);
    }

    #[test]
    fn delta_stays_in_unit_interval(seed in any::<u64>(), d in 2usize..=3, t in 1usize..=2, k in 1usize..=3) {
        let s = random_set(seed, d, k);
        let e = delta(&s, t, &DeltaOptions::default()).unwrap();
        prop_assert!(e.value >= 0.0 && e.value <= 1.0 + 1e-9, "{}", e.value);
    }

    #[test]
    fn convolution_powers_delta(seed in any::<u64>(), t in 1usize..=2) {
        let s = symmetric_set(seed, 2);
        let opts = DeltaOptions { tol: 1e-12, ..DeltaOptions::default() };
        let haar = HaarProjector::new(2, t).unwrap();
        let base = delta(&s, t, &opts).unwrap().value;
        for l in [2usize, 3] {
            let m: ComplexMatrix = word_moment(&s, t, l).unwrap().matrix;
            let dl = distance_to_haar(&m, &haar, &opts).unwrap().value;
            prop_assert!((dl - base.powi(l as i32)).abs() <= 1e-7, "l = {l}: {dl} vs {}", base.powi(l as i32));
        }
    }
}
