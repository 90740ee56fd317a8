use proptest::prelude::*;
use proptest::sample::subsequence;
use qudit_univ::closure::{
    close_group, group_commutant_dim, group_delta_exact, ClosureReport, DEFAULT_MAX_ELEMENTS,
};
use qudit_univ::commutant::{commutant_dim, Backend, CommutantQuery};
use qudit_univ::gates::GateSet;
use qudit_univ::haar_ref::gram_rank;
use qudit_univ::moments::{delta, DeltaOptions};

const CLIFFORD_NAMES: [&str; 5] = ["H", "S", "X", "Y", "Z"];

fn close(gs: &GateSet) -> ClosureReport {
    let r = close_group(gs, DEFAULT_MAX_ELEMENTS).unwrap();
    assert!(r.is_finite(), "{:?}", gs.labels());
    r
}

fn dense_dim(gs: &GateSet, t1: usize, t2: usize) -> usize {
    commutant_dim(&CommutantQuery::new(gs, t1, t2, Backend::Dense))
        .unwrap()
        .dimension
}

fn clifford_subset() -> impl Strategy<Value = Vec<&'static str>> {
    subsequence(CLIFFORD_NAMES.to_vec(), 1..=CLIFFORD_NAMES.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn character_sum_matches_dense_commutant(names in clifford_subset()) {
        let gs = GateSet::from_builtins(2, &names).unwrap();
        let g = close(&gs);
        for (t1, t2) in [(1, 1), (2, 1), (2, 2)] {
            prop_assert_eq!(group_commutant_dim(&g, t1, t2).unwrap(), dense_dim(&gs, t1, t2));
        }
    }

    #[test]
    fn closure_ignores_generator_order(names in clifford_subset().prop_shuffle(), extra in 0usize..3) {
        let gs = GateSet::from_builtins(2, &names).unwrap();
        let g = close(&gs);
        let mut sorted = names.clone();
        sorted.sort();
        // Adding a group element as a further generator changes nothing.
        let mut gates = GateSet::from_builtins(2, &sorted).unwrap().gates().to_vec();
        if let Some(e) = g.elements.get(extra) {
            gates.push(qudit_univ::gates::Gate::new("E", e.representative().clone()));
        }
        let h = close(&GateSet::new(2, gates, gs.options()).unwrap());
        prop_assert_eq!(g.order, h.order);
        prop_assert!(g.elements.iter().all(|e| h.contains(e.representative())));
    }

    #[test]
    fn group_design_iff_character_hits_haar_value(names in clifford_subset(), t in 1usize..=3) {
        let g = close(&GateSet::from_builtins(2, &names).unwrap());
        let design = group_delta_exact(&g, t, &DeltaOptions::default()).unwrap().value <= 1e-6;
        let haar = gram_rank(t, 2).unwrap();
        prop_assert_eq!(design, group_commutant_dim(&g, t.div_ceil(2), t / 2).unwrap() == haar);
    }

    #[test]
    fn lazy_generator_gap_iff_group_design(names in clifford_subset(), t in 1usize..=3) {
        let mut with_id = vec!["I"];
        with_id.extend(&names);
        let gs = GateSet::from_builtins(2, &with_id).unwrap();
        let g = close(&gs);
        let opts = DeltaOptions::default();
        let generator = delta(&gs, t, &opts).unwrap().value;
        let group = group_delta_exact(&g, t, &opts).unwrap().value;
        prop_assert_eq!(generator < 1.0 - 1e-6, group <= 1e-6, "δ_S = {}, δ_G = {}", generator, group);
    }
}

#[test]
fn qutrit_pauli_group() {
    let gs = GateSet::from_builtins(3, &["X", "Z"]).unwrap();
    let g = close(&gs);
    assert_eq!(g.order, Some(9));
    assert_eq!(group_commutant_dim(&g, 1, 1).unwrap(), dense_dim(&gs, 1, 1));
    assert_eq!(group_commutant_dim(&g, 1, 1).unwrap(), 9);
}
