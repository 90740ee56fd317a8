//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion does.
//!
//! The lines go straight to the stderr handle, which the test harness does
//! not capture, so they show up in a plain `cargo test` run.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use qudit_univ::check::{check, haar_dim_report, BackendChoice, CheckOptions, Diagnostics, Verdict};
use qudit_univ::closure::{close_group, group_commutant_dim, DEFAULT_MAX_ELEMENTS};
use qudit_univ::commutant::{
    commutant_basis_dense, commutant_dim, necessary_condition, partial_transpose, Backend, Certainty,
    CommutantQuery, CommutantResult,
};
use qudit_univ::gates::{builtin, random_haar_unitary, Gate, GateSet, GateSetOptions};
use qudit_univ::haar_ref::{gram_rank, su2_decompose, su3_reference};
use qudit_univ::moments::{
    delta, distance_to_haar, haar_moment_operator, mixed_lift, moment_operator, word_moment, DeltaOptions,
    HaarProjector,
};
use qudit_univ::numerics::{matmul, ComplexMatrix, C64, DEFAULT_REL_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.1?}, limit {limit:?}"))
    }
}

fn builtins(d: usize, names: &[&str]) -> GateSet {
    GateSet::from_builtins(d, names).unwrap()
}

fn gate_set(d: usize, gates: Vec<Gate>) -> GateSet {
    GateSet::new(d, gates, GateSetOptions::default()).unwrap()
}

fn haar_gates(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<Gate> {
    (0..k)
        .map(|i| Gate::new(format!("U{i}"), random_haar_unitary(d, rng)))
        .collect()
}

fn random_diagonal(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let phases: Vec<C64> = (0..d)
        .map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    ComplexMatrix::from_diag(&phases)
}

/// Qubit sets from several families, so that commutants range from the Haar
/// value up to large abelian ones.
fn random_qubit_set(seed: u64) -> GateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = match seed % 5 {
        0 | 1 => {
            let k = rng.random_range(1..=3);
            haar_gates(&mut rng, 2, k)
        }
        2 => vec![
            Gate::new("D", random_diagonal(&mut rng, 2)),
            Gate::new("Z", builtin("Z", 2).unwrap()),
        ],
        3 => {
            let name = ["H", "S", "X"][rng.random_range(0..3)];
            vec![Gate::new(name, builtin(name, 2).unwrap())]
        }
        _ => vec![
            Gate::new("H", builtin("H", 2).unwrap()),
            Gate::new("D", random_diagonal(&mut rng, 2)),
        ],
    };
    gate_set(2, gates)
}

/// Qutrit sets whose (t1+t2 = 4) commutant stays small enough for the
/// matrix-free backend.
fn random_qutrit_set(seed: u64) -> GateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = if seed % 3 == 2 {
        vec![
            Gate::new("F", builtin("F", 3).unwrap()),
            Gate::new("D", random_diagonal(&mut rng, 3)),
        ]
    } else {
        let k = rng.random_range(2..=3);
        haar_gates(&mut rng, 3, k)
    };
    gate_set(3, gates)
}

fn commutant(
    gs: &GateSet,
    t1: usize,
    t2: usize,
    backend: Backend,
    expected: Option<usize>,
) -> CommutantResult {
    let mut q = CommutantQuery::new(gs, t1, t2, backend);
    q.budget.expected_dim = expected;
    commutant_dim(&q).unwrap()
}

fn certified_dim(
    gs: &GateSet,
    t1: usize,
    t2: usize,
    backend: Backend,
    expected: Option<usize>,
) -> Result<usize, String> {
    let r = commutant(gs, t1, t2, backend, expected);
    ensure!(
        r.certainty == Certainty::Certified,
        "{:?} at ({t1},{t2}) on {:?} not certified (gap {:.2e})",
        backend,
        gs.labels(),
        r.gap_ratio
    );
    Ok(r.dimension)
}

fn commutator_residual(gs: &GateSet, x: &ComplexMatrix, t1: usize, t2: usize) -> f64 {
    gs.matrices()
        .map(|u| {
            let l = mixed_lift(u, t1, t2).unwrap().matrix;
            matmul(&l, x)
                .unwrap()
                .sub(&matmul(x, &l).unwrap())
                .unwrap()
                .max_abs()
        })
        .fold(0.0, f64::max)
}

fn haar_constants() -> Outcome {
    let start = Instant::now();
    let cases = [
        (2, 3, 3, 132),
        (3, 2, 2, 23),
        (4, 2, 2, 24),
        (5, 2, 2, 24),
        (6, 2, 2, 24),
        (2, 2, 2, 14),
    ];
    for (d, t1, t2, want) in cases {
        let got = haar_dim_report(d, t1, t2).map_err(|e| e.to_string())?.dim;
        ensure!(got == want, "d={d} ({t1},{t2}): {got} != {want}");
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("132, 23, 24 x3, 14 in {:.1?}", start.elapsed()))
}

fn su2_decomposition() -> Outcome {
    let start = Instant::now();
    let m = su2_decompose(3).map_err(|e| e.to_string())?;
    let got: Vec<(u32, u64)> = m.iter().collect();
    let mut want = vec![(0, 5), (2, 9), (4, 5), (6, 1)];
    want.sort();
    let mut sorted = got.clone();
    sorted.sort();
    ensure!(sorted == want, "multiplicities {got:?}");
    ensure!(m.sum_of_squares() == 132, "Σm² = {}", m.sum_of_squares());
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("{6:1, 4:5, 2:9, 0:5}, Σm² = 132".into())
}

fn su3_consistency() -> Outcome {
    let start = Instant::now();
    let s = su3_reference().sum_of_squares();
    let g = gram_rank(4, 3).map_err(|e| e.to_string())?;
    ensure!(s == 23 && g == 23, "Σm² = {s}, gram rank = {g}");
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("Σm² = 23 = gram_rank(4, 3)".into())
}

fn universal_qubit_fixture() -> Outcome {
    let start = Instant::now();
    let r = check(&builtins(2, &["H", "T"]), &CheckOptions::default()).map_err(|e| e.to_string())?;
    ensure!(r.verdict == Verdict::Universal, "verdict {:?}", r.verdict);
    ensure!(r.commutant_dim == 132, "commutantDim {}", r.commutant_dim);
    ensure!(r.gap_ratio >= 1e4, "gapRatio {:.3e}", r.gap_ratio);
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "UNIVERSAL, dim 132, gap {:.2e}, {:.1?}",
        r.gap_ratio,
        start.elapsed()
    ))
}

fn clifford_fixture() -> Outcome {
    let opts = CheckOptions {
        diagnostics: Diagnostics::Closure,
        ..CheckOptions::default()
    };
    let r = check(&builtins(2, &["H", "S"]), &opts).map_err(|e| e.to_string())?;
    ensure!(r.verdict == Verdict::NotUniversal, "verdict {:?}", r.verdict);
    ensure!(r.commutant_dim == 187, "commutantDim {}", r.commutant_dim);
    let c = r.closure_diagnostics.ok_or("no closure diagnostics")?;
    ensure!(c.closure.order == Some(24), "closure order {:?}", c.closure.order);
    ensure!(
        c.character_commutant_dim == Some(187),
        "character dim {:?}",
        c.character_commutant_dim
    );
    let d3 = c.group_deltas.get(&3).ok_or("no δ(3)")?.value;
    let d6 = c.group_deltas.get(&6).ok_or("no δ(6)")?.value;
    ensure!(d3 <= 1e-8, "δ(3) = {d3:e}");
    ensure!(d6 >= 1.0 - 1e-8, "δ(6) = {d6}");
    Ok(format!(
        "NOT_UNIVERSAL, dim 187 = character sum over 24, δ(3) = {d3:.1e}, δ(6) = {d6:.9}"
    ))
}

fn necessary_condition_fixtures() -> Outcome {
    let pauli = builtins(2, &["X", "Z"]);
    let nc = necessary_condition(&pauli, DEFAULT_REL_TOL).map_err(|e| e.to_string())?;
    ensure!(nc.dimension == 4 && !nc.holds, "{{X,Z}}: dim {}", nc.dimension);
    let r = check(&pauli, &CheckOptions::default()).map_err(|e| e.to_string())?;
    ensure!(
        r.verdict == Verdict::NotUniversal,
        "{{X,Z}} verdict {:?}",
        r.verdict
    );
    // T ⊗ T̄ = diag(1, e^{-iπ/4}, e^{iπ/4}, 1): multiplicities 2, 1, 1, so
    // the commutant has dimension 4 + 1 + 1.
    let t = builtins(2, &["T"]);
    let nc = necessary_condition(&t, DEFAULT_REL_TOL).map_err(|e| e.to_string())?;
    let oracle = group_commutant_dim(&close_group(&t, DEFAULT_MAX_ELEMENTS).unwrap(), 1, 1).unwrap();
    ensure!(
        nc.dimension == 6 && oracle == 6 && !nc.holds,
        "{{T}}: dim {}, character sum {oracle}",
        nc.dimension
    );
    Ok("{X,Z}: 4 != 2, NOT_UNIVERSAL; {T}: 6 != 2 (character sum 6)".into())
}

fn qutrit_fixture() -> Outcome {
    let start = Instant::now();
    let gs = builtins(3, &["F", "PHASE(pi/4)"]);
    let opts = CheckOptions {
        backend: BackendChoice::Dense,
        ..CheckOptions::default()
    };
    let r = check(&gs, &opts).map_err(|e| e.to_string())?;
    ensure!(r.backend == Backend::Dense, "backend {:?}", r.backend);
    ensure!(r.verdict == Verdict::Universal, "verdict {:?}", r.verdict);
    ensure!(r.commutant_dim == 23, "commutantDim {}", r.commutant_dim);
    within(start.elapsed(), Duration::from_secs(15 * 60))?;
    Ok(format!("UNIVERSAL, dim 23, dense, {:.1?}", start.elapsed()))
}

fn split_invariance(gs: &GateSet, total: usize, backend: Backend) -> Result<usize, String> {
    let expected = (backend == Backend::MatrixFree).then(|| gram_rank(total, gs.d()).unwrap());
    let dims = (0..=total)
        .map(|t2| certified_dim(gs, total - t2, t2, backend, expected))
        .collect::<Result<Vec<_>, _>>()?;
    ensure!(
        dims.iter().all(|&k| k == dims[0]),
        "{:?} total {total}: {dims:?}",
        gs.labels()
    );
    Ok(dims[0])
}

fn basis_bijection(gs: &GateSet, t1: usize, t2: usize) -> Result<f64, String> {
    let n = t1 + t2;
    let d = gs.d();
    let mixed = commutant_basis_dense(gs, t1, t2, DEFAULT_REL_TOL).map_err(|e| e.to_string())?;
    let pure = commutant_basis_dense(gs, n, 0, DEFAULT_REL_TOL).map_err(|e| e.to_string())?;
    ensure!(
        mixed.len() == pure.len(),
        "basis sizes {} vs {}",
        mixed.len(),
        pure.len()
    );
    let mut worst: f64 = 0.0;
    for x in &mixed {
        let y = partial_transpose(x, n, t2, d).map_err(|e| e.to_string())?;
        ensure!(
            partial_transpose(&y, n, t2, d).unwrap() == *x,
            "partial transpose is not involutive"
        );
        worst = worst.max(commutator_residual(gs, &y, n, 0));
    }
    for y in &pure {
        let x = partial_transpose(y, n, t2, d).map_err(|e| e.to_string())?;
        worst = worst.max(commutator_residual(gs, &x, t1, t2));
    }
    ensure!(worst <= 1e-9, "{:?} ({t1},{t2}): residual {worst:e}", gs.labels());
    Ok(worst)
}

fn split_suite() -> Outcome {
    let mut sets = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..15 {
        let gs = random_qubit_set(seed);
        for total in 2..=4 {
            split_invariance(&gs, total, Backend::Dense)?;
        }
        worst = worst.max(basis_bijection(&gs, 1, 1)?);
        worst = worst.max(basis_bijection(&gs, 2, 2)?);
        sets += 1;
    }
    for seed in 100..106 {
        let gs = random_qutrit_set(seed);
        for total in 2..=3 {
            split_invariance(&gs, total, Backend::Dense)?;
        }
        split_invariance(&gs, 4, Backend::MatrixFree)?;
        worst = worst.max(basis_bijection(&gs, 1, 1)?);
        worst = worst.max(basis_bijection(&gs, 2, 1)?);
        sets += 1;
    }
    Ok(format!(
        "{sets} sets, all splits of 2..=4 agree, worst basis residual {worst:.1e}"
    ))
}

fn moment_suite() -> Outcome {
    for (t, tr) in [(1, 1.0), (2, 2.0), (3, 5.0)] {
        let p = HaarProjector::new(2, t).unwrap().to_dense();
        ensure!((p.trace().re - tr).abs() <= 1e-10, "tr P(t={t}) = {}", p.trace());
        ensure!(
            matmul(&p, &p).unwrap().max_abs_diff(&p) <= 1e-10,
            "P(t={t}) not idempotent"
        );
        ensure!(p.adjoint().max_abs_diff(&p) <= 1e-10, "P(t={t}) not Hermitian");
    }
    let opts = DeltaOptions {
        tol: 1e-12,
        ..DeltaOptions::default()
    };
    for seed in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 + (seed % 2) as usize;
        let k = 1 + (seed % 3) as usize;
        let gs = gate_set(d, haar_gates(&mut rng, d, k));
        for t in 1..=2 {
            let m = moment_operator(&gs, t).unwrap().matrix;
            let p = haar_moment_operator(d, t).unwrap().matrix;
            ensure!(
                matmul(&m, &p).unwrap().max_abs_diff(&p) <= 1e-10,
                "absorption fails (seed {seed}, t {t})"
            );
            let e = delta(&gs, t, &DeltaOptions::default()).unwrap().value;
            ensure!((0.0..=1.0 + 1e-9).contains(&e), "δ = {e}");
        }
        // Inverse-closed sets have a Hermitian moment operator, for which the
        // norm of a power is the power of the norm.
        let u = random_haar_unitary(2, &mut rng);
        let v = random_haar_unitary(2, &mut rng);
        let sym = gate_set(
            2,
            vec![
                Gate::new("U", u.clone()),
                Gate::new("U*", u.adjoint()),
                Gate::new("V", v.clone()),
                Gate::new("V*", v.adjoint()),
            ],
        );
        for t in 1..=2 {
            let haar = HaarProjector::new(2, t).unwrap();
            let base = delta(&sym, t, &opts).unwrap().value;
            for l in [2, 3] {
                let m = word_moment(&sym, t, l).unwrap().matrix;
                let dl = distance_to_haar(&m, &haar, &opts).unwrap().value;
                ensure!(
                    (dl - base.powi(l as i32)).abs() <= 1e-7,
                    "seed {seed}, t {t}, l {l}: {dl} vs {}",
                    base.powi(l as i32)
                );
            }
        }
    }
    Ok("projector, traces 1/2/5, absorption, δ range, convolution law".into())
}

fn backend_agreement() -> Outcome {
    for seed in 0..10u64 {
        let gs = if seed % 2 == 0 {
            random_qubit_set(200 + seed)
        } else {
            random_qutrit_set(200 + seed)
        };
        let mut pairs = vec![(1, 1), (2, 1)];
        if gs.d() == 2 {
            pairs.push((2, 2));
        }
        for (t1, t2) in pairs {
            let a = certified_dim(&gs, t1, t2, Backend::Dense, None)?;
            let b = certified_dim(&gs, t1, t2, Backend::MatrixFree, None)?;
            ensure!(
                a == b,
                "{:?} ({t1},{t2}): dense {a}, matrix-free {b}",
                gs.labels()
            );
        }
    }
    // A starved iteration must end INCONCLUSIVE, not in a wrong verdict.
    let starved = CheckOptions {
        backend: BackendChoice::MatrixFree,
        max_iters: 3,
        ..CheckOptions::default()
    };
    let r = check(&builtins(2, &["H", "T"]), &starved).map_err(|e| e.to_string())?;
    ensure!(
        r.verdict == Verdict::Inconclusive,
        "starved run gave {:?}",
        r.verdict
    );

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gs = gate_set(4, haar_gates(&mut rng, 4, 2));
    let target = gram_rank(4, 4).unwrap();
    let dim = certified_dim(&gs, 2, 2, Backend::MatrixFree, Some(target))?;
    ensure!(dim == 24, "d = 4 Haar pair: {dim}");
    within(start.elapsed(), Duration::from_secs(30 * 60))?;
    Ok(format!(
        "10 fixtures agree; starved run INCONCLUSIVE; d=4 pair 24 in {:.1?}",
        start.elapsed()
    ))
}

fn report(line: String) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Haar commutant constants", haar_constants),
        ("SU(2) decomposition of the 3-fold power", su2_decomposition),
        ("SU(3) multiplicities against the Gram rank", su3_consistency),
        ("{H,T} is universal", universal_qubit_fixture),
        ("{H,S} is not universal", clifford_fixture),
        (
            "necessary condition on {X,Z} and {T}",
            necessary_condition_fixtures,
        ),
        ("qutrit Fourier + phase is universal", qutrit_fixture),
        ("split invariance and partial transpose", split_suite),
        ("moment operators and δ", moment_suite),
        ("backend agreement", backend_agreement),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => report(format!("[{:>2}] PASS {name}: {detail} ({secs:.1} s)", i + 1)),
            Err(why) => {
                report(format!("[{:>2}] FAIL {name}: {why} ({secs:.1} s)", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
