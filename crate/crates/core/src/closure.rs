//! Budgeted projective closure of a gate set, and exact finite-group
//! oracles built on it.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gates::{projectively_equal, GateSet, ProjectiveClass};
use crate::moments::{
    distance_to_haar, DeltaEstimate, DeltaOptions, HaarProjector, LiftAverage, MomentsError,
};
use crate::numerics::{matmul, ComplexMatrix, NumericsError};

pub const DEFAULT_MAX_ELEMENTS: usize = 20_000;

/// Allowed distance of an exact group δ from 0 or 1.
pub const DICHOTOMY_TOL: f64 = 1e-6;

/// Allowed distance of a character sum from the nearest integer.
pub const RESIDUE_TOL: f64 = 1e-6;

const BUCKET_WIDTH: f64 = 1e-3;
const AXIOM_SAMPLES: usize = 100;
const AXIOM_SEED: u64 = 0xc105e;

#[derive(Debug, Error)]
pub enum ClosureError {
    #[error("maxElements = {max} is smaller than the gate set ({len} elements)")]
    BudgetTooSmall { max: usize, len: usize },
    #[error("closure did not finish within the budget")]
    NotFinite,
    #[error("group axiom check failed: {0}")]
    AxiomViolation(String),
    #[error("group δ(t = {t}) = {value} is neither 0 nor 1")]
    NotDichotomous { t: usize, value: f64 },
    #[error("character sum {value} is not an integer (residue {residue:e})")]
    NonIntegral { value: f64, residue: f64 },
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClosureStatus {
    Finite,
    BudgetExceeded,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClosureReport {
    pub status: ClosureStatus,
    #[serde(skip)]
    pub elements: Vec<ProjectiveClass>,
    /// Projective order, when finite.
    pub order: Option<usize>,
    /// Longest word needed to reach a new element.
    pub product_depth: usize,
    /// Classes found before stopping (equals the order when finite).
    pub explored: usize,
    #[serde(skip)]
    pub d: usize,
    #[serde(skip)]
    pub phase_tol: f64,
}

impl ClosureReport {
    pub fn is_finite(&self) -> bool {
        self.status == ClosureStatus::Finite
    }

    /// Membership up to a global phase (linear scan).
    pub fn contains(&self, u: &ComplexMatrix) -> bool {
        self.elements
            .iter()
            .any(|e| projectively_equal(e.representative(), u, self.phase_tol))
    }

    fn require_finite(&self) -> Result<(), ClosureError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(ClosureError::NotFinite)
        }
    }
}

/// Projective classes bucketed by `(|tr U|, |U_00|)`, both phase invariant.
struct ClassTable {
    phase_tol: f64,
    classes: Vec<ProjectiveClass>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl ClassTable {
    fn new(phase_tol: f64) -> Self {
        Self {
            phase_tol,
            classes: Vec::new(),
            buckets: HashMap::new(),
        }
    }

    fn key(u: &ComplexMatrix) -> (i64, i64) {
        let q = |x: f64| (x / BUCKET_WIDTH).floor() as i64;
        (q(u.trace().norm()), q(u[(0, 0)].norm()))
    }

    fn find(&self, u: &ComplexMatrix) -> Option<usize> {
        let (a, b) = Self::key(u);
        for da in -1..=1 {
            for db in -1..=1 {
                if let Some(ids) = self.buckets.get(&(a + da, b + db)) {
                    if let Some(&i) = ids
                        .iter()
                        .find(|&&i| projectively_equal(self.classes[i].representative(), u, self.phase_tol))
                    {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    /// Adds `u` unless already present; returns the new index.
    fn insert(&mut self, u: ComplexMatrix) -> Option<usize> {
        if self.find(&u).is_some() {
            return None;
        }
        let i = self.classes.len();
        self.buckets.entry(Self::key(&u)).or_default().push(i);
        self.classes.push(ProjectiveClass::new(u));
        Some(i)
    }
}

/// Breadth-first closure under right multiplication by the generators.
pub fn close_group(s: &GateSet, max_elements: usize) -> Result<ClosureReport, ClosureError> {
    if max_elements < s.len() {
        return Err(ClosureError::BudgetTooSmall {
            max: max_elements,
            len: s.len(),
        });
    }
    let phase_tol = s.options().phase_tol;
    let mut table = ClassTable::new(phase_tol);
    let mut frontier: Vec<usize> = s.matrices().filter_map(|m| table.insert(m.clone())).collect();
    let generators: Vec<&ComplexMatrix> = s.non_identity().map(|g| &g.matrix).collect();
    let mut depth = 1;
    let status = loop {
        let mut next = Vec::new();
        for &i in &frontier {
            for g in &generators {
                let p = matmul(table.classes[i].representative(), g)?;
                if let Some(k) = table.insert(p) {
                    next.push(k);
                }
            }
            if table.classes.len() > max_elements {
                break;
            }
        }
        if table.classes.len() > max_elements {
            break ClosureStatus::BudgetExceeded;
        }
        if next.is_empty() {
            break ClosureStatus::Finite;
        }
        depth += 1;
        frontier = next;
    };
    log::debug!(
        "closure: {status:?} after {} classes, depth {depth}",
        table.classes.len()
    );
    let explored = table.classes.len();
    if status == ClosureStatus::BudgetExceeded {
        return Ok(ClosureReport {
            status,
            elements: Vec::new(),
            order: None,
            product_depth: depth,
            explored,
            d: s.d(),
            phase_tol,
        });
    }
    check_axioms(&table)?;
    Ok(ClosureReport {
        status,
        order: Some(explored),
        elements: table.classes,
        product_depth: depth,
        explored,
        d: s.d(),
        phase_tol,
    })
}

/// Samples products and inverses and checks they stay in the table.
fn check_axioms(table: &ClassTable) -> Result<(), ClosureError> {
    let n = table.classes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(AXIOM_SEED);
    for _ in 0..AXIOM_SAMPLES {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let a = table.classes[i].representative();
        let b = table.classes[j].representative();
        if table.find(&matmul(a, b)?).is_none() {
            return Err(ClosureError::AxiomViolation(format!(
                "product of elements {i} and {j} is missing"
            )));
        }
        if table.find(&a.adjoint()).is_none() {
            return Err(ClosureError::AxiomViolation(format!(
                "inverse of element {i} is missing"
            )));
        }
    }
    Ok(())
}

/// `δ(t, ν_G)` by exact averaging over a finite closure; always 0 or 1.
pub fn group_delta_exact(
    report: &ClosureReport,
    t: usize,
    opts: &DeltaOptions,
) -> Result<DeltaEstimate, ClosureError> {
    report.require_finite()?;
    let avg = LiftAverage::new(
        report.elements.iter().map(ProjectiveClass::representative),
        report.d,
        t,
    );
    let haar = HaarProjector::new(report.d, t)?;
    let est = distance_to_haar(&avg, &haar, opts)?;
    if est.value.abs() > DICHOTOMY_TOL && (est.value - 1.0).abs() > DICHOTOMY_TOL {
        return Err(ClosureError::NotDichotomous { t, value: est.value });
    }
    Ok(est)
}

/// `dim C(G^{t1,t2}) = (1/|G|) Σ_g |tr g|^{2(t1+t2)}`.
pub fn group_commutant_dim(report: &ClosureReport, t1: usize, t2: usize) -> Result<usize, ClosureError> {
    report.require_finite()?;
    let power = 2 * (t1 + t2) as i32;
    let sum: f64 = report
        .elements
        .iter()
        .map(|e| e.representative().trace().norm().powi(power))
        .sum();
    let value = sum / report.elements.len() as f64;
    let rounded = value.round();
    let residue = (value - rounded).abs();
    if residue > RESIDUE_TOL {
        return Err(ClosureError::NonIntegral { value, residue });
    }
    Ok(rounded as usize)
}
