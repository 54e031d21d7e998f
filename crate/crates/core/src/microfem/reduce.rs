//! Elimination of constrained DOFs: `u = R z + c`.
//!
//! Slaves follow their master, `u_s = γT u_m + rhs`. A master carrying
//! self-constraints `(I − γT) u_m = rhs` (and possibly the translation pin)
//! is parametrised as `u_m = N z_m + A⁺ r` with `N` the null space of the
//! stacked rows `A`. `R` depends only on the signs, so one reduction serves
//! every strain of a load case.

use nalgebra::{DMatrix, DVector, Matrix3};

use super::SolveError;
use crate::admissibility::nullspace;
use crate::constraints::ConstraintEquation;
use crate::equivalence::{Dim, Point, SymTensor};

/// Relative consistency tolerance of stacked self-constraints.
const SELF_CONSISTENCY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
enum RowSource {
    /// Component `comp` of equation `eq`'s right-hand side.
    Equation { eq: usize, comp: usize },
    /// `sᵗ ⟨ε⟩ x_pin` for translation direction `s`.
    Pin { dir: Point },
}

#[derive(Debug, Clone)]
struct Restricted {
    rows: Vec<RowSource>,
    a: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Free,
    Restricted(usize),
    Slave { eq: usize, master: usize },
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub dim: Dim,
    pub n_nodes: usize,
    pub n_reduced: usize,
    /// Per node: reduced DOF and the d-vector it multiplies.
    columns: Vec<Vec<(usize, Point)>>,
    kinds: Vec<NodeKind>,
    restricted: Vec<Restricted>,
    pub pin_node: usize,
    pub pin_dirs: Vec<Point>,
    eq_count: usize,
}

/// Unit translations compatible with every homogeneous constraint.
pub fn free_translations(dim: Dim, eqs: &[ConstraintEquation]) -> Vec<Point> {
    let d = dim.n();
    let mut blocks: Vec<Matrix3<f64>> = Vec::new();
    for e in eqs {
        let b = Matrix3::identity() - e.coeff;
        if !blocks.iter().any(|x| (x - b).amax() <= 1e-12) {
            blocks.push(b);
        }
    }
    let mut a = DMatrix::zeros(blocks.len() * d, d);
    for (k, b) in blocks.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                a[(k * d + i, j)] = b[(i, j)];
            }
        }
    }
    let n = nullspace(&a);
    n.column_iter()
        .map(|c| {
            let mut p = Point::zeros();
            for i in 0..d {
                p[i] = if c[i].abs() < 1e-15 { 0.0 } else { c[i] };
            }
            p
        })
        .collect()
}

fn embed(dim: Dim, v: &DVector<f64>) -> Point {
    let mut p = Point::zeros();
    for i in 0..dim.n() {
        p[i] = v[i];
    }
    p
}

impl Reduction {
    /// `pin_candidates` lists nodes in order of preference; the first non-slave is pinned.
    pub fn new(
        dim: Dim,
        n_nodes: usize,
        eqs: &[ConstraintEquation],
        pin_candidates: &[usize],
    ) -> Result<Reduction, SolveError> {
        let d = dim.n();
        let mut kinds = vec![NodeKind::Free; n_nodes];
        let mut self_rows: Vec<Vec<(usize, Matrix3<f64>)>> = vec![Vec::new(); n_nodes];
        for (k, e) in eqs.iter().enumerate() {
            if e.self_pair {
                self_rows[e.slave].push((k, Matrix3::identity() - e.coeff));
                continue;
            }
            if matches!(kinds[e.slave], NodeKind::Slave { .. }) {
                return Err(SolveError::DuplicateSlave(e.slave));
            }
            kinds[e.slave] = NodeKind::Slave {
                eq: k,
                master: e.master,
            };
        }
        for e in eqs.iter().filter(|e| !e.self_pair) {
            if matches!(kinds[e.master], NodeKind::Slave { .. }) {
                return Err(SolveError::ChainedSlave {
                    slave: e.slave,
                    master: e.master,
                });
            }
            if !self_rows[e.slave].is_empty() {
                return Err(SolveError::ChainedSlave {
                    slave: e.slave,
                    master: e.master,
                });
            }
        }

        let pin_dirs = free_translations(dim, eqs);
        let pin_node = pin_candidates
            .iter()
            .copied()
            .find(|&n| !matches!(kinds[n], NodeKind::Slave { .. }))
            .ok_or(SolveError::NoPinNode)?;

        let mut restricted = Vec::new();
        for node in 0..n_nodes {
            if matches!(kinds[node], NodeKind::Slave { .. }) {
                continue;
            }
            let mut rows = Vec::new();
            let mut blocks: Vec<Vec<f64>> = Vec::new();
            for (eq, b) in &self_rows[node] {
                for comp in 0..d {
                    rows.push(RowSource::Equation { eq: *eq, comp });
                    blocks.push((0..d).map(|j| b[(comp, j)]).collect());
                }
            }
            if node == pin_node {
                for s in &pin_dirs {
                    rows.push(RowSource::Pin { dir: *s });
                    blocks.push((0..d).map(|j| s[j]).collect());
                }
            }
            if rows.is_empty() {
                continue;
            }
            let flat: Vec<f64> = blocks.into_iter().flatten().collect();
            let a = DMatrix::from_row_slice(rows.len(), d, &flat);
            let pinv = a
                .clone()
                .pseudo_inverse(1e-10 * a.amax().max(1.0))
                .map_err(|e| SolveError::Internal(e.to_string()))?;
            kinds[node] = NodeKind::Restricted(restricted.len());
            restricted.push(Restricted { rows, a, pinv });
        }

        let mut columns: Vec<Vec<(usize, Point)>> = vec![Vec::new(); n_nodes];
        let mut next = 0;
        for node in 0..n_nodes {
            match &kinds[node] {
                NodeKind::Free => {
                    for k in 0..d {
                        let mut e = Point::zeros();
                        e[k] = 1.0;
                        columns[node].push((next, e));
                        next += 1;
                    }
                }
                NodeKind::Restricted(r) => {
                    let n = nullspace(&restricted[*r].a);
                    for c in n.column_iter() {
                        columns[node].push((next, embed(dim, &c.into_owned())));
                        next += 1;
                    }
                }
                NodeKind::Slave { .. } => {}
            }
        }
        for node in 0..n_nodes {
            if let NodeKind::Slave { eq, master } = kinds[node] {
                let g = eqs[eq].coeff;
                columns[node] = columns[master].iter().map(|(j, v)| (*j, g * v)).collect();
            }
        }
        Ok(Reduction {
            dim,
            n_nodes,
            n_reduced: next,
            columns,
            kinds,
            restricted,
            pin_node,
            pin_dirs,
            eq_count: eqs.len(),
        })
    }

    /// Non-zero entries of row `i` of `R`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let d = self.dim.n();
        let (node, comp) = (i / d, i % d);
        self.columns[node]
            .iter()
            .map(move |(j, v)| (*j, v[comp]))
            .filter(|(_, v)| *v != 0.0)
    }

    /// Constant part `c` for the equations of one strain (same signs as at construction).
    pub fn offsets(
        &self,
        eqs: &[ConstraintEquation],
        eps: &SymTensor,
        coords: &[Point],
    ) -> Result<Vec<Point>, SolveError> {
        if eqs.len() != self.eq_count {
            return Err(SolveError::Internal(format!(
                "reduction built for {} equations, got {}",
                self.eq_count,
                eqs.len()
            )));
        }
        let mut c = vec![Point::zeros(); self.n_nodes];
        for node in 0..self.n_nodes {
            if let NodeKind::Restricted(r) = self.kinds[node] {
                let rs = &self.restricted[r];
                let rhs = DVector::from_iterator(
                    rs.rows.len(),
                    rs.rows.iter().map(|src| match src {
                        RowSource::Equation { eq, comp } => eqs[*eq].rhs[*comp],
                        RowSource::Pin { dir } => dir.dot(&eps.apply(&coords[node])),
                    }),
                );
                let up = &rs.pinv * &rhs;
                let resid = (&rs.a * &up - &rhs).amax();
                let scale = rhs.amax().max(eps.norm_inf() * coords[node].amax()).max(f64::MIN_POSITIVE);
                if resid > SELF_CONSISTENCY_RTOL * scale && resid > 1e-14 {
                    let eq = rs.rows.iter().find_map(|s| match s {
                        RowSource::Equation { eq, .. } => Some(*eq),
                        RowSource::Pin { .. } => None,
                    });
                    return Err(SolveError::InconsistentSelfConstraint {
                        node,
                        relations: eq.map(|e| eqs[e].relation_chain.clone()).unwrap_or_default(),
                        residual: resid,
                    });
                }
                c[node] = embed(self.dim, &up);
            }
        }
        for node in 0..self.n_nodes {
            if let NodeKind::Slave { eq, master } = self.kinds[node] {
                c[node] = eqs[eq].coeff * c[master] + eqs[eq].rhs;
            }
        }
        Ok(c)
    }

    /// `u = R z + c`
    pub fn expand(&self, z: &[f64], c: &[Point]) -> Vec<Point> {
        (0..self.n_nodes)
            .map(|node| {
                self.columns[node]
                    .iter()
                    .fold(c[node], |acc, (j, v)| acc + v * z[*j])
            })
            .collect()
    }
}
