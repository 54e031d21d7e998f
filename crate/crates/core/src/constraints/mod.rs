//! Multipoint constraints `u(A) − γ T u(Â) = −⟨ε⟩ T o` from resolved node pairs.

mod emit;

use std::collections::HashMap;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::admissibility::{check_admissibility, Admissibility, AdmissibilityError, DEFAULT_TOL};
use crate::cellspec::CellSpec;
use crate::equivalence::{Dim, Gamma, Point, SymTensor};
use crate::pairing::NodePair;

pub use emit::{emit, parse_json, Format};

/// Coefficients with magnitude below this are dropped from scalar rows.
pub const COEFF_EPS: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error(
        "load is not admissible: relation {label} fails with both signs (residuals {residual_plus:e} for +1, {residual_minus:e} for -1)"
    )]
    MissingGamma {
        label: String,
        residual_plus: f64,
        residual_minus: f64,
    },
    #[error(transparent)]
    Admissibility(#[from] AdmissibilityError),
    #[error("pair chain references unknown relation {0}")]
    UnknownRelation(String),
    #[error("expected {expected} load reversal factors, got {got}")]
    GammaCount { expected: usize, got: usize },
    #[error("invalid constraint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("strain is {strain}, cell is {cell}")]
    DimMismatch { strain: Dim, cell: Dim },
}

/// Vector constraint on the displacement of two nodes (or one, for self-pairs).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEquation {
    pub dim: Dim,
    pub slave: usize,
    pub master: usize,
    /// `γ T`, composed along the pair's chain (zero outside the active block).
    pub coeff: Matrix3<f64>,
    pub rhs: Point,
    pub gamma: Gamma,
    pub relation_chain: Vec<String>,
    pub self_pair: bool,
}

/// Scalar row `Σ cⱼ u[dofⱼ] = rhs`; the first term holds `slave_dof`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEquation {
    pub slave_dof: usize,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl ConstraintEquation {
    pub fn slave_dofs(&self) -> Vec<usize> {
        let d = self.dim.n();
        (0..d).map(|k| self.slave * d + k).collect()
    }

    pub fn master_dofs(&self) -> Vec<usize> {
        let d = self.dim.n();
        (0..d).map(|k| self.master * d + k).collect()
    }

    /// Left-hand operator acting on the slave node (`I − γT` for self-pairs, `I` otherwise).
    fn slave_block(&self) -> Matrix3<f64> {
        if self.self_pair {
            Matrix3::identity() - self.coeff
        } else {
            Matrix3::identity()
        }
    }

    /// Scalar rows in x, y, z order; trivial self-pair rows (`0 = 0`) are skipped.
    pub fn scalar_rows(&self) -> Vec<ScalarEquation> {
        let d = self.dim.n();
        let scale = self.rhs.amax().max(1.0);
        let sb = self.slave_block();
        let mut rows = Vec::with_capacity(d);
        for k in 0..d {
            let mut terms = Vec::new();
            for j in 0..d {
                let c = sb[(k, j)];
                if c.abs() > COEFF_EPS {
                    terms.push((self.slave * d + j, c));
                }
            }
            if !self.self_pair {
                for j in 0..d {
                    let c = -self.coeff[(k, j)];
                    if c.abs() > COEFF_EPS {
                        terms.push((self.master * d + j, c));
                    }
                }
            }
            if self.self_pair && terms.is_empty() && self.rhs[k].abs() <= COEFF_EPS * scale {
                continue;
            }
            // put the row's own component first when present
            if let Some(pos) = terms.iter().position(|(dof, _)| *dof == self.slave * d + k) {
                terms.swap(0, pos);
            }
            rows.push(ScalarEquation {
                slave_dof: terms.first().map_or(self.slave * d + k, |t| t.0),
                terms,
                rhs: self.rhs[k],
            });
        }
        rows
    }

    /// Residual `|lhs − rhs|∞` on a global displacement vector.
    pub fn residual(&self, u: &[f64]) -> f64 {
        self.scalar_rows()
            .iter()
            .map(|r| (r.terms.iter().map(|(dof, c)| c * u[*dof]).sum::<f64>() - r.rhs).abs())
            .fold(0.0, f64::max)
    }
}

/// Product of the signs along a pair's relation chain.
pub fn chain_gamma(pair: &NodePair, gammas: &HashMap<&str, Gamma>) -> Result<Gamma, ConstraintError> {
    pair.chain
        .iter()
        .map(|s| {
            gammas
                .get(s.relation.as_str())
                .copied()
                .ok_or_else(|| ConstraintError::UnknownRelation(s.relation.clone()))
        })
        .try_fold(Gamma::Plus, |acc, g| Ok(acc.times(g?)))
}

/// Builds equations for an explicit sign vector, without an admissibility check.
pub fn build_constraints_with_gammas(
    pairs: &[NodePair],
    spec: &CellSpec,
    gammas: &[Gamma],
    eps: &SymTensor,
) -> Result<Vec<ConstraintEquation>, ConstraintError> {
    if gammas.len() != spec.relations.len() {
        return Err(ConstraintError::GammaCount {
            expected: spec.relations.len(),
            got: gammas.len(),
        });
    }
    if eps.dim() != spec.dim {
        return Err(ConstraintError::DimMismatch {
            strain: eps.dim(),
            cell: spec.dim,
        });
    }
    let table: HashMap<&str, Gamma> = spec
        .relations
        .iter()
        .zip(gammas)
        .map(|(r, g)| (r.label.as_str(), *g))
        .collect();
    pairs
        .iter()
        .map(|p| {
            let gamma = chain_gamma(p, &table)?;
            let t = p.transform.matrix();
            let mut coeff = t * gamma.value();
            if spec.dim == Dim::Two {
                coeff[(2, 2)] = 0.0;
            }
            Ok(ConstraintEquation {
                dim: spec.dim,
                slave: p.slave,
                master: p.master,
                coeff,
                rhs: -eps.apply(&(t * p.offset)),
                gamma,
                relation_chain: p.chain.iter().map(|s| s.to_string()).collect(),
                self_pair: p.self_pair,
            })
        })
        .collect()
}

/// One vector equation per retained pair, with signs from the admissibility check.
pub fn build_constraints(
    pairs: &[NodePair],
    spec: &CellSpec,
    eps: &SymTensor,
) -> Result<Vec<ConstraintEquation>, ConstraintError> {
    match check_admissibility(spec, eps, DEFAULT_TOL)? {
        Admissibility::Admissible(a) => build_constraints_with_gammas(pairs, spec, &a.gammas, eps),
        Admissibility::Inadmissible(w) => Err(ConstraintError::MissingGamma {
            label: w.label,
            residual_plus: w.residual_plus,
            residual_minus: w.residual_minus,
        }),
    }
}
