//! The end-to-end universality check and the smaller reports behind each
//! CLI subcommand.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::closure::{
    close_group, group_commutant_dim, group_delta_exact, ClosureError, ClosureReport, ClosureStatus,
    DEFAULT_MAX_ELEMENTS, DICHOTOMY_TOL, RESIDUE_TOL,
};
use crate::commutant::{
    commutant_dim, Backend, Budget, Certainty, CommutantError, CommutantQuery, DEFAULT_GAP_TOL,
    DEFAULT_MAX_ITERS, FIXED_TOL, HAAR_ADJOINT_COMMUTANT_DIM, RESIDUAL_TOL,
};
use crate::gates::{GateError, GateSet, MergedGate};
use crate::haar_ref::{
    gram_rank, su2_decompose, su3_irrep_dim, su3_reference, target_dimension, HaarRefError, TargetDimension,
};
use crate::json::SCHEMA_VERSION;
use crate::moments::{
    delta, DeltaEstimate, DeltaOptions, HaarProjector, MomentsError, AT_ONE_TOL, MAX_HAAR_T,
};
use crate::numerics::{gram_resolution, matmul, CERTIFY_GAP, DEFAULT_NORM_TOL, DEFAULT_REL_TOL, DENSE_CAP};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Gates(#[from] GateError),
    #[error(transparent)]
    HaarRef(#[from] HaarRefError),
    #[error(transparent)]
    Commutant(#[from] CommutantError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Universal,
    NotUniversal,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackendChoice {
    /// Dense for `d ≤ 3`, matrix-free above.
    #[default]
    Auto,
    Dense,
    MatrixFree,
}

impl BackendChoice {
    pub fn resolve(self, d: usize) -> Backend {
        match self {
            Self::Auto if d <= 3 => Backend::Dense,
            Self::Auto => Backend::MatrixFree,
            Self::Dense => Backend::Dense,
            Self::MatrixFree => Backend::MatrixFree,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Diagnostics {
    #[default]
    None,
    Delta,
    Closure,
    All,
}

impl Diagnostics {
    fn delta(self) -> bool {
        matches!(self, Self::Delta | Self::All)
    }

    fn closure(self) -> bool {
        matches!(self, Self::Closure | Self::All)
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Overrides `t(d)`. Below `t(d)` a dimension match is not sufficient
    /// and yields INCONCLUSIVE.
    pub t: Option<usize>,
    pub rank_tol: f64,
    pub delta_tol: f64,
    pub backend: BackendChoice,
    /// Matrix-free budget in operator applies per probe.
    pub max_iters: usize,
    /// Closure budget for the closure diagnostic.
    pub max_elements: usize,
    pub diagnostics: Diagnostics,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            t: None,
            rank_tol: DEFAULT_REL_TOL,
            delta_tol: DEFAULT_NORM_TOL,
            backend: BackendChoice::Auto,
            max_iters: DEFAULT_MAX_ITERS,
            max_elements: DEFAULT_MAX_ELEMENTS,
            diagnostics: Diagnostics::None,
            seed: 0x5eed,
        }
    }
}

/// Every threshold that influenced a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances {
    pub rank_rel_tol: f64,
    /// Cutoff actually applied to the dense Gram route.
    pub effective_rank_tol: f64,
    pub certify_gap: f64,
    pub gap_tol: f64,
    pub fixed_tol: f64,
    pub residual_tol: f64,
    pub delta_tol: f64,
    pub at_one_tol: f64,
    pub unitarity_tol: f64,
    pub phase_tol: f64,
    pub dichotomy_tol: f64,
    pub residue_tol: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClosureDiagnostics {
    #[serde(flatten)]
    pub closure: ClosureReport,
    /// Character-sum commutant dimension at `(t, t)`, when finite.
    pub character_commutant_dim: Option<usize>,
    /// Exact group δ at `t` and at the design `t`, when finite and within
    /// the size cap. Always 0 or 1.
    pub group_deltas: BTreeMap<usize, DeltaEstimate>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UniversalityReport {
    pub schema_version: u32,
    pub d: usize,
    pub t_used: usize,
    pub verdict: Verdict,
    pub commutant_dim: usize,
    pub target_dim: usize,
    pub certainty: Certainty,
    pub gap_ratio: f64,
    pub backend: Backend,
    pub system_rank: Option<usize>,
    pub iterations: usize,
    pub necessary_condition_dim: usize,
    pub necessary_condition_holds: bool,
    pub gate_labels: Vec<String>,
    pub includes_identity: bool,
    pub merged: Vec<MergedGate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_diagnostics: Option<BTreeMap<usize, DeltaEstimate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure_diagnostics: Option<ClosureDiagnostics>,
    pub tolerances: Tolerances,
    /// Wall time per stage, in seconds.
    pub timings: BTreeMap<String, f64>,
}

impl UniversalityReport {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Universal => 0,
            Verdict::NotUniversal => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

/// The `t` of the design-based cross-check: 6 for qubits, 4 otherwise.
pub fn design_t(d: usize) -> usize {
    if d == 2 {
        6
    } else {
        4
    }
}

fn delta_feasible(d: usize, t: usize) -> bool {
    t >= 1 && t <= MAX_HAAR_T && d.checked_pow(2 * t as u32).is_some_and(|n| n <= DENSE_CAP)
}

fn tolerances(gs: &GateSet, opts: &CheckOptions, commutant_side: usize) -> Tolerances {
    let gs_opts = gs.options();
    Tolerances {
        rank_rel_tol: opts.rank_tol,
        effective_rank_tol: opts.rank_tol.max(gram_resolution(commutant_side)),
        certify_gap: CERTIFY_GAP,
        gap_tol: DEFAULT_GAP_TOL,
        fixed_tol: FIXED_TOL,
        residual_tol: RESIDUAL_TOL,
        delta_tol: opts.delta_tol,
        at_one_tol: AT_ONE_TOL,
        unitarity_tol: gs_opts.unitarity_tol,
        phase_tol: gs_opts.phase_tol,
        dichotomy_tol: DICHOTOMY_TOL,
        residue_tol: RESIDUE_TOL,
    }
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
    out
}

/// Decides universality of `gs` by comparing `dim C(S^{t,t})` with the
/// Haar value at `t = t(d)`.
pub fn check(gs: &GateSet, opts: &CheckOptions) -> Result<UniversalityReport, CheckError> {
    let d = gs.d();
    let mut timings = BTreeMap::new();
    let target = target_dimension(d)?;
    let t = opts.t.unwrap_or(target.t);
    let target_dim = timed(&mut timings, "targetDim", || {
        if t == target.t {
            Ok(target.dim)
        } else {
            gram_rank(2 * t, d)
        }
    })?;
    let backend = opts.backend.resolve(d);
    let budget = Budget {
        max_iters: opts.max_iters,
        gap_tol: DEFAULT_GAP_TOL,
        seed: opts.seed,
        expected_dim: None,
    };

    let necessary = timed(&mut timings, "necessaryCondition", || {
        let small = d.checked_pow(4).is_some_and(|n| n <= DENSE_CAP);
        let mut q = CommutantQuery::new(gs, 1, 1, if small { Backend::Dense } else { backend });
        q.rel_tol = opts.rank_tol;
        q.budget = Budget {
            expected_dim: Some(HAAR_ADJOINT_COMMUTANT_DIM),
            ..budget
        };
        commutant_dim(&q)
    })?;

    let result = timed(&mut timings, "commutant", || {
        let mut q = CommutantQuery::new(gs, t, t, backend);
        q.rel_tol = opts.rank_tol;
        q.budget = Budget {
            expected_dim: Some(target_dim),
            ..budget
        };
        commutant_dim(&q)
    })?;
    log::info!(
        "d = {d}, t = {t}: dim C = {} (target {target_dim}), {:?}, gap {:e}",
        result.dimension,
        result.certainty,
        result.gap_ratio
    );

    // An unfinished iteration may undercount; only a certified count below
    // the Haar value is a contradiction.
    let verdict = match (result.certainty, result.dimension.cmp(&target_dim)) {
        (Certainty::Uncertain, _) => Verdict::Inconclusive,
        (Certainty::Certified, std::cmp::Ordering::Less) => {
            return Err(CheckError::Inconsistent(format!(
                "commutant dimension {} is below the Haar value {target_dim}",
                result.dimension
            )))
        }
        (Certainty::Certified, std::cmp::Ordering::Greater) => Verdict::NotUniversal,
        // Below t(d) a match is necessary but not sufficient.
        (Certainty::Certified, std::cmp::Ordering::Equal) if t >= target.t => Verdict::Universal,
        (Certainty::Certified, std::cmp::Ordering::Equal) => Verdict::Inconclusive,
    };

    let delta_opts = DeltaOptions {
        tol: opts.delta_tol,
        seed: opts.seed,
        ..DeltaOptions::default()
    };
    let delta_diagnostics = if opts.diagnostics.delta() {
        let mut out = BTreeMap::new();
        timed(&mut timings, "delta", || -> Result<(), CheckError> {
            for dt in [t, design_t(d)] {
                if out.contains_key(&dt) {
                    continue;
                }
                if !delta_feasible(d, dt) {
                    log::info!("skipping δ({dt}) at d = {d}: beyond the size cap");
                    continue;
                }
                out.insert(dt, delta(gs, dt, &delta_opts)?);
            }
            Ok(())
        })?;
        Some(out)
    } else {
        None
    };

    let closure_diagnostics = if opts.diagnostics.closure() {
        let diag = timed(&mut timings, "closure", || -> Result<_, CheckError> {
            let closure = close_group(gs, opts.max_elements)?;
            if closure.status != ClosureStatus::Finite {
                return Ok(ClosureDiagnostics {
                    closure,
                    character_commutant_dim: None,
                    group_deltas: BTreeMap::new(),
                });
            }
            let character = group_commutant_dim(&closure, t, t)?;
            let mut group_deltas = BTreeMap::new();
            for dt in [t, design_t(d)] {
                if delta_feasible(d, dt) && !group_deltas.contains_key(&dt) {
                    group_deltas.insert(dt, group_delta_exact(&closure, dt, &delta_opts)?);
                }
            }
            Ok(ClosureDiagnostics {
                closure,
                character_commutant_dim: Some(character),
                group_deltas,
            })
        })?;
        if let Some(character) = diag.character_commutant_dim {
            if result.certainty == Certainty::Certified && character != result.dimension {
                return Err(CheckError::Inconsistent(format!(
                    "character oracle gives {character} but the commutant engine gave {}",
                    result.dimension
                )));
            }
            if verdict == Verdict::Universal {
                return Err(CheckError::Inconsistent(
                    "finite closure but the commutant test says universal".into(),
                ));
            }
        }
        Some(diag)
    } else {
        None
    };

    Ok(UniversalityReport {
        schema_version: SCHEMA_VERSION,
        d,
        t_used: t,
        verdict,
        commutant_dim: result.dimension,
        target_dim,
        certainty: result.certainty,
        gap_ratio: result.gap_ratio,
        backend: result.backend_used,
        system_rank: result.system_rank,
        iterations: result.iterations,
        necessary_condition_dim: necessary.dimension,
        necessary_condition_holds: necessary.dimension == HAAR_ADJOINT_COMMUTANT_DIM,
        gate_labels: gs.labels(),
        includes_identity: gs.includes_identity(),
        merged: gs.merged().to_vec(),
        delta_diagnostics,
        closure_diagnostics,
        tolerances: tolerances(gs, opts, d.pow(4 * t as u32)),
        timings,
    })
}

/// Which measure a δ value refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeltaMeasure {
    /// Uniform over the gate set.
    GateSet,
    /// Uniform over the finite closure of the gate set.
    Group,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DeltaReport {
    pub schema_version: u32,
    pub d: usize,
    pub gate_labels: Vec<String>,
    pub measure: DeltaMeasure,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_order: Option<usize>,
    #[serde(flatten)]
    pub delta: DeltaEstimate,
}

/// `δ(t, ν_S)` with its error bar; with `group_budget`, `δ(t, ν_G)` over
/// the closure instead (which must then be finite within the budget).
pub fn delta_report(
    gs: &GateSet,
    t: usize,
    opts: &DeltaOptions,
    group_budget: Option<usize>,
) -> Result<DeltaReport, CheckError> {
    let (measure, group_order, delta) = match group_budget {
        None => (DeltaMeasure::GateSet, None, delta(gs, t, opts)?),
        Some(max) => {
            let closure = close_group(gs, max)?;
            let est = group_delta_exact(&closure, t, opts)?;
            (DeltaMeasure::Group, closure.order, est)
        }
    };
    Ok(DeltaReport {
        schema_version: SCHEMA_VERSION,
        d: gs.d(),
        gate_labels: gs.labels(),
        measure,
        group_order,
        delta,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HaarDimReport {
    pub schema_version: u32,
    pub d: usize,
    pub t1: usize,
    pub t2: usize,
    pub dim: usize,
    /// The decision point for `d`, reported when `(t1, t2) = (t(d), t(d))`.
    pub target: Option<TargetDimension>,
}

/// `dim C(G_d^{t1,t2})` by exact Gram rank.
pub fn haar_dim_report(d: usize, t1: usize, t2: usize) -> Result<HaarDimReport, CheckError> {
    let dim = gram_rank(t1 + t2, d)?;
    let target = target_dimension(d)?;
    Ok(HaarDimReport {
        schema_version: SCHEMA_VERSION,
        d,
        t1,
        t2,
        dim,
        target: (t1 == target.t && t2 == target.t).then_some(target),
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClosureOutput {
    pub schema_version: u32,
    pub d: usize,
    pub gate_labels: Vec<String>,
    #[serde(flatten)]
    pub closure: ClosureReport,
}

pub fn closure_report(gs: &GateSet, max_elements: usize) -> Result<ClosureOutput, CheckError> {
    Ok(ClosureOutput {
        schema_version: SCHEMA_VERSION,
        d: gs.d(),
        gate_labels: gs.labels(),
        closure: close_group(gs, max_elements)?,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SelfTestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SelfTestReport {
    pub schema_version: u32,
    pub passed: bool,
    pub checks: Vec<SelfTestCheck>,
}

/// Startup identities: decision constants against the Gram rank, the
/// SU(2)/SU(3) multiplicity sums and Haar projector sanity.
pub fn selftest() -> SelfTestReport {
    let mut checks = Vec::new();
    let mut add = |name: &str, outcome: Result<(bool, String), CheckError>| {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, e.to_string()));
        checks.push(SelfTestCheck {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    for d in [2, 3, 4, 5] {
        add(
            &format!("target constant d={d}"),
            (|| {
                let target = target_dimension(d)?;
                let rank = gram_rank(2 * target.t, d)?;
                Ok((
                    rank == target.dim,
                    format!("t={} constant {} gram rank {rank}", target.t, target.dim),
                ))
            })(),
        );
    }
    add(
        "su2 multiplicities t=3",
        (|| {
            let m = su2_decompose(3)?;
            let sum = m.sum_of_squares();
            let dim = m.total_dimension(|l| u64::from(l) + 1);
            Ok((
                sum == 132 && dim == 64,
                format!("sum of squares {sum}, total dimension {dim}"),
            ))
        })(),
    );
    add(
        "su3 multiplicities t=2",
        (|| {
            let m = su3_reference();
            let sum = m.sum_of_squares();
            let dim = m.total_dimension(su3_irrep_dim);
            let rank = gram_rank(4, 3)?;
            Ok((
                sum == 23 && rank == 23 && dim == 81,
                format!("sum of squares {sum}, gram rank {rank}, total dimension {dim}"),
            ))
        })(),
    );
    for (d, t, trace) in [(2, 1, 1.0), (2, 2, 2.0), (2, 3, 5.0), (3, 2, 2.0)] {
        add(
            &format!("haar projector d={d} t={t}"),
            (|| {
                let p = HaarProjector::new(d, t)?.to_dense();
                let idem = matmul(&p, &p).map_err(MomentsError::from)?.max_abs_diff(&p);
                let herm = p.adjoint().max_abs_diff(&p);
                let tr = p.trace();
                let ok =
                    idem <= 1e-10 && herm <= 1e-10 && (tr.re - trace).abs() <= 1e-10 && tr.im.abs() <= 1e-10;
                Ok((
                    ok,
                    format!(
                        "idempotence {idem:.1e}, hermiticity {herm:.1e}, trace {:.12}",
                        tr.re
                    ),
                ))
            })(),
        );
    }
    let passed = checks.iter().all(|c| c.passed);
    SelfTestReport {
        schema_version: SCHEMA_VERSION,
        passed,
        checks,
    }
}
