//! Universality of qudit gate sets from commutant dimensions.
//!
//! A gate set `S ⊂ U(d)` is universal exactly when the commutant of
//! `{U^{⊗t} ⊗ Ū^{⊗t} : U ∈ S}` has the same dimension as for the whole
//! unitary group, at `t = 3` for qubits and `t = 2` for `d ≥ 3`. The
//! reference dimensions are 132, 23 and 24 (`d ≥ 4`).

pub mod check;
pub mod closure;
pub mod commutant;
pub mod gates;
pub mod haar_ref;
pub mod json;
pub mod moments;
pub mod numerics;
