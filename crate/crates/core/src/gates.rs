//! Gate sets: validation, the builtin library, JSON ingestion and projective
//! equivalence.

use std::f64::consts::PI;
use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{polar_unitary, ComplexMatrix, NumericsError, C64};

pub const DEFAULT_UNITARITY_TOL: f64 = 1e-10;
pub const DEFAULT_PHASE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("malformed gate-set JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read gate-set source: {0}")]
    Io(#[from] std::io::Error),
    #[error("qudit dimension must be at least 2, got {0}")]
    DimensionTooSmall(i64),
    #[error("gate set is empty")]
    Empty,
    #[error("gate `{name}`: expected a {d}x{d} matrix, got {found}")]
    Shape { name: String, d: usize, found: String },
    #[error("gate `{name}` is not unitary: ‖U†U − I‖_max = {defect:e} > {tol:e}")]
    NotUnitary { name: String, defect: f64, tol: f64 },
    #[error("gate `{name}` has non-finite entries")]
    NonFinite { name: String },
    #[error("unknown builtin gate `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin gate `{name}` is not defined for d = {d}")]
    IncompatibleDimension { name: String, d: usize },
    #[error("gate `{0}` needs either a matrix or \"builtin\": true")]
    MissingMatrix(String),
    #[error("gate `{0}` gives both a matrix and \"builtin\": true")]
    AmbiguousEntry(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Validation knobs for building a [`GateSet`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GateSetOptions {
    pub unitarity_tol: f64,
    pub phase_tol: f64,
    /// Replace each matrix by its unitary polar factor before validation.
    pub project_unitary: bool,
}

impl Default for GateSetOptions {
    fn default() -> Self {
        Self {
            unitarity_tol: DEFAULT_UNITARITY_TOL,
            phase_tol: DEFAULT_PHASE_TOL,
            project_unitary: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Gate {
    pub label: String,
    pub matrix: ComplexMatrix,
}

impl Gate {
    pub fn new(label: impl Into<String>, matrix: ComplexMatrix) -> Self {
        Self {
            label: label.into(),
            matrix,
        }
    }
}

/// A gate dropped during normalization because it is projectively equal to
/// an earlier one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MergedGate {
    pub label: String,
    pub duplicate_of: String,
}

/// A validated, normalized set of `d×d` unitaries.
///
/// Normalization inserts the identity when no gate is projectively equal to
/// it, and drops gates projectively equal to an earlier one. The measure is
/// uniform over the remaining gates.
#[derive(Clone, Debug)]
pub struct GateSet {
    d: usize,
    gates: Vec<Gate>,
    identity_index: usize,
    includes_identity: bool,
    merged: Vec<MergedGate>,
    options: GateSetOptions,
}

impl GateSet {
    pub fn new(d: usize, gates: Vec<Gate>, options: GateSetOptions) -> Result<Self, GateError> {
        if d < 2 {
            return Err(GateError::DimensionTooSmall(d as i64));
        }
        if gates.is_empty() {
            return Err(GateError::Empty);
        }
        let mut validated = Vec::with_capacity(gates.len());
        for mut g in gates {
            if !g.matrix.is_square() || g.matrix.rows() != d {
                return Err(GateError::Shape {
                    name: g.label,
                    d,
                    found: format!("{}x{}", g.matrix.rows(), g.matrix.cols()),
                });
            }
            if options.project_unitary {
                g.matrix = polar_unitary(&g.matrix)?;
            }
            let defect = g.matrix.unitarity_defect();
            if !(defect <= options.unitarity_tol) {
                return Err(GateError::NotUnitary {
                    name: g.label,
                    defect,
                    tol: options.unitarity_tol,
                });
            }
            validated.push(g);
        }

        let identity = ComplexMatrix::identity(d);
        let mut kept: Vec<Gate> = Vec::with_capacity(validated.len() + 1);
        let mut merged = Vec::new();
        for g in validated {
            match kept
                .iter()
                .find(|k| projectively_equal(&k.matrix, &g.matrix, options.phase_tol))
            {
                Some(k) => merged.push(MergedGate {
                    label: g.label,
                    duplicate_of: k.label.clone(),
                }),
                None => kept.push(g),
            }
        }
        let (identity_index, includes_identity) = match kept
            .iter()
            .position(|g| projectively_equal(&g.matrix, &identity, options.phase_tol))
        {
            Some(i) => (i, false),
            None => {
                kept.insert(0, Gate::new("I", identity));
                (0, true)
            }
        };
        Ok(Self {
            d,
            gates: kept,
            identity_index,
            includes_identity,
            merged,
            options,
        })
    }

    /// Convenience constructor from builtin names with default options.
    pub fn from_builtins(d: usize, names: &[&str]) -> Result<Self, GateError> {
        let gates = names
            .iter()
            .map(|n| Ok(Gate::new(*n, builtin(n, d)?)))
            .collect::<Result<Vec<_>, GateError>>()?;
        Self::new(d, gates, GateSetOptions::default())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.gates.iter().map(|g| &g.matrix)
    }

    /// Gates other than the identity.
    pub fn non_identity(&self) -> impl Iterator<Item = &Gate> {
        let skip = self.identity_index;
        self.gates
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != skip)
            .map(|(_, g)| g)
    }

    /// True when the identity was added during normalization.
    pub fn includes_identity(&self) -> bool {
        self.includes_identity
    }

    pub fn merged(&self) -> &[MergedGate] {
        &self.merged
    }

    pub fn options(&self) -> GateSetOptions {
        self.options
    }

    pub fn labels(&self) -> Vec<String> {
        self.gates.iter().map(|g| g.label.clone()).collect()
    }

    /// `S ∪ S†`, projectively de-duplicated.
    pub fn symmetrized(&self) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> = self.matrices().cloned().collect();
        for g in self.matrices() {
            let inv = g.adjoint();
            if !out
                .iter()
                .any(|k| projectively_equal(k, &inv, self.options.phase_tol))
            {
                out.push(inv);
            }
        }
        out
    }
}

/// `|tr(U†V)| ≥ d − phase_tol`: equality up to a global phase.
pub fn projectively_equal(u: &ComplexMatrix, v: &ComplexMatrix, phase_tol: f64) -> bool {
    if u.rows() != v.rows() || u.cols() != v.cols() {
        return false;
    }
    overlap(u, v).norm() >= u.rows() as f64 - phase_tol
}

/// `tr(U†V)` without forming the product.
pub fn overlap(u: &ComplexMatrix, v: &ComplexMatrix) -> C64 {
    u.as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| a.conj() * b)
        .sum()
}

/// A unitary scaled so that its largest-magnitude entry (first in row-major
/// order among near-ties) is real and positive.
#[derive(Clone, Debug)]
pub struct ProjectiveClass {
    representative: ComplexMatrix,
}

impl ProjectiveClass {
    pub fn new(u: ComplexMatrix) -> Self {
        let max = u.max_abs();
        let pivot = u
            .as_slice()
            .iter()
            .find(|z| z.norm() >= max * (1.0 - 1e-9))
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        Self {
            representative: u.scale(phase),
        }
    }

    pub fn representative(&self) -> &ComplexMatrix {
        &self.representative
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.representative
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Parses angles such as `0.25`, `pi`, `-pi/8`, `3*pi/4`.
fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, s),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    let num = if let Some(k) = num.strip_suffix("pi") {
        let k = k.trim().trim_end_matches('*').trim();
        if k.is_empty() {
            PI
        } else {
            k.parse::<f64>().ok()? * PI
        }
    } else {
        num.parse::<f64>().ok()?
    };
    let v = sign * num / den;
    v.is_finite().then_some(v)
}

/// The standard matrix for a builtin gate name.
///
/// `X` and `Z` are the generalized shift and clock at any `d`; `F` is the
/// Fourier matrix `ω^{jk}/√d`; `PHASE(θ)` is `diag(1, …, 1, e^{iθ})`.
/// `Y`, `H`, `S`, `T` are qubit gates and `CNOT` needs `d = 4`.
pub fn builtin(name: &str, d: usize) -> Result<ComplexMatrix, GateError> {
    let incompatible = || GateError::IncompatibleDimension {
        name: name.to_string(),
        d,
    };
    if d < 2 {
        return Err(GateError::DimensionTooSmall(d as i64));
    }
    let omega = |k: usize| C64::from_polar(1.0, 2.0 * PI * (k % d) as f64 / d as f64);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let m = match name {
        "I" => ComplexMatrix::identity(d),
        "X" => ComplexMatrix::from_fn(d, d, |i, j| {
            if i == (j + 1) % d {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }),
        "Z" => ComplexMatrix::from_diag(&(0..d).map(omega).collect::<Vec<_>>()),
        "F" => {
            let norm = 1.0 / (d as f64).sqrt();
            ComplexMatrix::from_fn(d, d, |i, j| omega(i * j) * norm)
        }
        "Y" if d == 2 => ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])?,
        "H" if d == 2 => ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]),
        "S" if d == 2 => ComplexMatrix::from_diag(&[c(1.0, 0.0), c(0.0, 1.0)]),
        "T" if d == 2 => ComplexMatrix::from_diag(&[c(1.0, 0.0), C64::from_polar(1.0, PI / 4.0)]),
        "CNOT" if d == 4 => ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]),
        "Y" | "H" | "S" | "T" | "CNOT" => return Err(incompatible()),
        _ => {
            let angle = name
                .strip_prefix("PHASE(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(parse_angle)
                .ok_or_else(|| GateError::UnknownBuiltin(name.to_string()))?;
            let mut diag = vec![c(1.0, 0.0); d];
            diag[d - 1] = C64::from_polar(1.0, angle);
            ComplexMatrix::from_diag(&diag)
        }
    };
    Ok(m)
}

/// Haar-random unitary via Gram–Schmidt on a complex Ginibre matrix.
pub fn random_haar_unitary(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    c(re, im)
                })
                .collect()
        })
        .collect();
    for k in 0..d {
        for _ in 0..2 {
            for j in 0..k {
                let proj: C64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a.conj() * b).sum();
                let (head, tail) = cols.split_at_mut(k);
                for (x, q) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= proj * q;
                }
            }
        }
        let n = cols[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols[k].iter_mut().for_each(|z| *z /= n);
    }
    ComplexMatrix::from_fn(d, d, |i, j| cols[j][i])
}

/// On-disk gate-set format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSetFile {
    pub d: i64,
    pub gates: Vec<GateEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub builtin: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

impl GateEntry {
    pub fn from_matrix(name: impl Into<String>, m: &ComplexMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Self {
            name: name.into(),
            builtin: false,
            matrix: Some(rows),
        }
    }

    pub fn builtin(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            builtin: true,
            matrix: None,
        }
    }
}

impl GateSetFile {
    pub fn into_gate_set(self, options: GateSetOptions) -> Result<GateSet, GateError> {
        if self.d < 2 {
            return Err(GateError::DimensionTooSmall(self.d));
        }
        let d = self.d as usize;
        let gates = self
            .gates
            .into_iter()
            .map(|entry| entry_to_gate(entry, d))
            .collect::<Result<Vec<_>, _>>()?;
        GateSet::new(d, gates, options)
    }
}

fn entry_to_gate(entry: GateEntry, d: usize) -> Result<Gate, GateError> {
    let GateEntry {
        name,
        builtin: is_builtin,
        matrix,
    } = entry;
    match (is_builtin, matrix) {
        (true, Some(_)) => Err(GateError::AmbiguousEntry(name)),
        (true, None) => {
            let m = builtin(&name, d)?;
            Ok(Gate::new(name, m))
        }
        (false, None) => Err(GateError::MissingMatrix(name)),
        (false, Some(rows)) => {
            let shape_err = |found: String| GateError::Shape {
                name: name.clone(),
                d,
                found,
            };
            if rows.len() != d {
                return Err(shape_err(format!("{} rows", rows.len())));
            }
            let mut data = Vec::with_capacity(d * d);
            for row in &rows {
                if row.len() != d {
                    return Err(shape_err(format!("a row of length {}", row.len())));
                }
                data.extend(row.iter().map(|&[re, im]| c(re, im)));
            }
            let m = ComplexMatrix::new(d, d, data).map_err(|e| match e {
                NumericsError::NonFinite => GateError::NonFinite { name: name.clone() },
                other => GateError::Numerics(other),
            })?;
            Ok(Gate::new(name, m))
        }
    }
}

/// Reads and validates a gate set in the JSON file format.
pub fn parse_gate_set(mut source: impl Read, options: GateSetOptions) -> Result<GateSet, GateError> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    let file: GateSetFile = serde_json::from_slice(&buf)?;
    file.into_gate_set(options)
}
