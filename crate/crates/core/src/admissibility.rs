//! Load admissibility and load-reversal factors.
//!
//! A macro strain `ε` is admissible when, for every relation,
//! `ε = γᵢ Tᵢ ε Tᵢᵗ` with `γᵢ = ±1`. Subspace computations run on Mandel
//! vectors, where `ε ↦ T ε Tᵗ` is an orthogonal matrix; results are reported
//! as engineering-strain Voigt vectors.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::cellspec::CellSpec;
use crate::equivalence::{Dim, EquivalenceRelation, Gamma, SymTensor, ORTHO_TOL};
use crate::voigt;

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Singular values below this fraction of the largest count as zero.
pub const NULLSPACE_RTOL: f64 = 1e-10;

/// Largest relation count accepted by [`enumerate_load_cases`].
pub const MAX_RELATIONS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmissibilityError {
    #[error("strain is {strain}, cell is {cell}")]
    DimMismatch { strain: Dim, cell: Dim },
    #[error("relation {label}: transform is not orthogonal (residual {residual:e})")]
    NotOrthogonal { label: String, residual: f64 },
    #[error("{0} relations exceed the enumeration bound of {MAX_RELATIONS}")]
    TooManyRelations(usize),
    #[error("expected {expected} load reversal factors, got {got}")]
    GammaCount { expected: usize, got: usize },
}

/// Per-relation signs with their residuals `‖ε − γᵢTᵢεTᵢᵗ‖∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaAssignment {
    pub labels: Vec<String>,
    pub gammas: Vec<Gamma>,
    pub residuals: Vec<f64>,
}

/// Witness of an inadmissible strain: the worst relation and both residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inadmissible {
    pub label: String,
    pub residual_plus: f64,
    pub residual_minus: f64,
    pub tolerance: f64,
}

impl Inadmissible {
    pub fn residual(&self) -> f64 {
        self.residual_plus.min(self.residual_minus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Admissibility {
    Admissible(GammaAssignment),
    Inadmissible(Inadmissible),
}

impl Admissibility {
    pub fn assignment(&self) -> Option<&GammaAssignment> {
        match self {
            Admissibility::Admissible(a) => Some(a),
            Admissibility::Inadmissible(_) => None,
        }
    }
}

/// Admissible strain subspace together with its signs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadCase {
    pub gammas: Vec<Gamma>,
    /// Orthonormal (Mandel metric) basis, as engineering-strain Voigt vectors
    /// scaled to unit Euclidean length.
    pub basis: Vec<Vec<f64>>,
    #[serde(skip)]
    dim: Dim,
    #[serde(skip)]
    mandel: DMatrix<f64>,
}

impl LoadCase {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Orthonormal Mandel basis as matrix columns.
    pub fn mandel_basis(&self) -> &DMatrix<f64> {
        &self.mandel
    }

    /// Voigt labels of components touched by the subspace.
    pub fn components(&self) -> Vec<&'static str> {
        let labels = voigt::labels(self.dim);
        (0..self.dim.voigt_len())
            .filter(|&k| self.basis.iter().any(|b| b[k].abs() > 1e-12))
            .map(|k| labels[k])
            .collect()
    }

    /// Whether `eps` lies in the subspace to relative tolerance `tol`.
    pub fn contains(&self, eps: &SymTensor, tol: f64) -> bool {
        let m = DVector::from_vec(voigt::strain_to_mandel(self.dim, &eps.to_voigt_strain()));
        let proj = &self.mandel * (self.mandel.transpose() * &m);
        (m - proj).amax() <= tol * eps.norm_inf().max(f64::MIN_POSITIVE)
    }
}

fn check_spec(spec: &CellSpec) -> Result<(), AdmissibilityError> {
    for r in &spec.relations {
        let residual = r.transform.orthogonality_residual();
        if residual > ORTHO_TOL {
            return Err(AdmissibilityError::NotOrthogonal {
                label: r.label.clone(),
                residual,
            });
        }
    }
    Ok(())
}

fn residual(rel: &EquivalenceRelation, gamma: Gamma, eps: &SymTensor) -> f64 {
    eps.sub(&rel.transform_strain(gamma, eps)).norm_inf()
}

/// Finds the load-reversal factor of every relation for `eps`.
///
/// Ties (both signs pass, i.e. the relation annihilates `eps`) resolve to +1.
pub fn check_admissibility(
    spec: &CellSpec,
    eps: &SymTensor,
    tol: f64,
) -> Result<Admissibility, AdmissibilityError> {
    if eps.dim() != spec.dim {
        return Err(AdmissibilityError::DimMismatch {
            strain: eps.dim(),
            cell: spec.dim,
        });
    }
    check_spec(spec)?;
    let bound = tol * eps.norm_inf();
    let mut out = GammaAssignment {
        labels: Vec::new(),
        gammas: Vec::new(),
        residuals: Vec::new(),
    };
    let mut worst: Option<Inadmissible> = None;
    for r in &spec.relations {
        let rp = residual(r, Gamma::Plus, eps);
        let rm = residual(r, Gamma::Minus, eps);
        let choice = if rp <= bound {
            Some((Gamma::Plus, rp))
        } else if rm <= bound {
            Some((Gamma::Minus, rm))
        } else {
            None
        };
        match choice {
            Some((g, res)) => {
                out.labels.push(r.label.clone());
                out.gammas.push(g);
                out.residuals.push(res);
            }
            None => {
                let cand = Inadmissible {
                    label: r.label.clone(),
                    residual_plus: rp,
                    residual_minus: rm,
                    tolerance: bound,
                };
                if worst.as_ref().is_none_or(|w| cand.residual() > w.residual()) {
                    worst = Some(cand);
                }
            }
        }
    }
    Ok(match worst {
        Some(w) => Admissibility::Inadmissible(w),
        None => Admissibility::Admissible(out),
    })
}

/// Matrix of `ε ↦ T ε Tᵗ` on engineering-strain Voigt vectors.
pub fn voigt_operator(rel: &EquivalenceRelation) -> DMatrix<f64> {
    voigt::strain_operator(&rel.transform)
}

/// Entries below this are rounding noise of unit-scaled operators.
const ZERO_OPERATOR: f64 = 1e-12;

/// Orthonormal basis (columns) of the null space of a unit-scaled operator `a`.
pub(crate) fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.ncols();
    if a.nrows() == 0 || a.amax() <= ZERO_OPERATOR {
        return DMatrix::identity(k, k);
    }
    // pad so the decomposition returns a full set of right singular vectors
    let rows = a.nrows().max(k);
    let mut padded = DMatrix::zeros(rows, k);
    padded.view_mut((0, 0), (a.nrows(), k)).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < NULLSPACE_RTOL * smax)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(k, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn mandel_ops(spec: &CellSpec) -> Vec<DMatrix<f64>> {
    spec.relations
        .iter()
        .map(|r| voigt::mandel_operator(&r.transform))
        .collect()
}

/// Orthonormal Mandel basis of `{ε : ε = γᵢTᵢεTᵢᵗ ∀i}` (columns; possibly none).
pub fn admissible_subspace(spec: &CellSpec, gammas: &[Gamma]) -> Result<DMatrix<f64>, AdmissibilityError> {
    if gammas.len() != spec.relations.len() {
        return Err(AdmissibilityError::GammaCount {
            expected: spec.relations.len(),
            got: gammas.len(),
        });
    }
    let m = spec.dim.voigt_len();
    let ops = mandel_ops(spec);
    let mut stacked = DMatrix::zeros(m * ops.len(), m);
    for (i, (op, g)) in ops.iter().zip(gammas).enumerate() {
        let block = DMatrix::identity(m, m) - op * g.value();
        stacked.view_mut((i * m, 0), (m, m)).copy_from(&block);
    }
    Ok(nullspace(&stacked))
}

/// Gram–Schmidt over the projector columns: coordinate subspaces come out as unit vectors.
fn canonical_basis(n: &DMatrix<f64>) -> DMatrix<f64> {
    let p = n * n.transpose();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..p.ncols() {
        let mut v = p.column(j).into_owned();
        for c in &cols {
            v -= c * c.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
        if cols.len() == n.ncols() {
            break;
        }
    }
    DMatrix::from_columns(&cols)
}

fn make_case(dim: Dim, gammas: Vec<Gamma>, basis: &DMatrix<f64>) -> LoadCase {
    let mandel = canonical_basis(basis);
    let basis = mandel
        .column_iter()
        .map(|c| {
            let v = voigt::mandel_to_strain(dim, c.as_slice());
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter()
                .map(|x| {
                    let y = x / norm;
                    if y.abs() < 1e-15 {
                        0.0
                    } else {
                        y
                    }
                })
                .collect()
        })
        .collect();
    LoadCase {
        gammas,
        basis,
        dim,
        mandel,
    }
}

fn search(
    ops: &[DMatrix<f64>],
    i: usize,
    current: &DMatrix<f64>,
    gammas: &mut Vec<Gamma>,
    found: &mut Vec<(Vec<Gamma>, DMatrix<f64>)>,
) {
    if i == ops.len() {
        found.push((gammas.clone(), current.clone()));
        return;
    }
    let m = current.nrows();
    for g in [Gamma::Plus, Gamma::Minus] {
        let a = (DMatrix::identity(m, m) - &ops[i] * g.value()) * current;
        let coeffs = nullspace(&a);
        if coeffs.ncols() == 0 {
            continue;
        }
        let next = current * coeffs;
        gammas.push(g);
        search(ops, i + 1, &next, gammas, found);
        gammas.pop();
    }
}

/// All maximal admissible load cases.
///
/// Sign vectors whose subspace is trivial are pruned during a depth-first
/// walk over `{±1}ⁿ`; the result matches exhaustive enumeration.
/// Ordered by descending subspace dimension, then sign vector (+1 before -1).
pub fn enumerate_load_cases(spec: &CellSpec) -> Result<Vec<LoadCase>, AdmissibilityError> {
    let n = spec.relations.len();
    if n > MAX_RELATIONS {
        return Err(AdmissibilityError::TooManyRelations(n));
    }
    check_spec(spec)?;
    let m = spec.dim.voigt_len();
    let ops = mandel_ops(spec);
    let mut found = Vec::new();
    search(&ops, 0, &DMatrix::identity(m, m), &mut Vec::with_capacity(n), &mut found);

    let projectors: Vec<DMatrix<f64>> = found.iter().map(|(_, b)| b * b.transpose()).collect();
    let mut keep = Vec::new();
    for (i, (g, b)) in found.iter().enumerate() {
        let dominated = found.iter().enumerate().any(|(j, (_, bj))| {
            j != i
                && bj.ncols() >= b.ncols()
                && (&projectors[j] * b - b).amax() <= 1e-9
                && (bj.ncols() > b.ncols() || j < i)
        });
        if !dominated {
            keep.push(make_case(spec.dim, g.clone(), b));
        }
    }
    keep.sort_by(|a, b| {
        b.dimension()
            .cmp(&a.dimension())
            .then_with(|| a.gammas.cmp(&b.gammas))
    });
    Ok(keep)
}
