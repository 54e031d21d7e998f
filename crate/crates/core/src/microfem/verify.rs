//! Full unit cells assembled from transformed copies of a reduced cell, and
//! the point-wise check of the load-equivalence relations between them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::solver::{FieldSolution, SolveError};
use crate::cellspec::{BBox, CellSpec};
use crate::equivalence::{AffineMap, Dim, Gamma, Point, SymTensor, Transform};
use crate::mesh::Mesh;

/// Placement of reduced-cell copies forming a full cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcLayout {
    /// Relation chains; `["E1", "E2"]` applies the copy map of `E2` first.
    pub copies: Vec<Vec<String>>,
    /// Periodicity vectors of the assembled cell.
    pub periodicity: Vec<Vec<f64>>,
}

impl UcLayout {
    pub fn periodicity_points(&self, dim: Dim) -> Vec<Point> {
        self.periodicity
            .iter()
            .map(|v| {
                let mut p = Point::zeros();
                for (i, x) in v.iter().take(dim.n()).enumerate() {
                    p[i] = *x;
                }
                p
            })
            .collect()
    }
}

/// Map placing the reduced cell at a copy: composition of the chain's inverse relation maps.
pub fn copy_map(spec: &CellSpec, chain: &[String]) -> Result<AffineMap, SolveError> {
    let mut map = AffineMap::identity(spec.dim);
    for label in chain.iter().rev() {
        let rel = spec
            .relation(label)
            .ok_or_else(|| SolveError::Correspondence(format!("unknown relation {label} in copy chain")))?;
        map = rel.affine().inverse().after(&map);
    }
    Ok(map)
}

#[derive(Debug, Clone)]
pub struct UcAssembly {
    pub mesh: Mesh,
    pub bbox: BBox,
    pub maps: Vec<AffineMap>,
    /// Per assembled element: (copy, reduced-cell element).
    pub origin: Vec<(usize, usize)>,
}

fn quantize(p: &Point, h: f64) -> [i64; 3] {
    [(p[0] / h).round() as i64, (p[1] / h).round() as i64, (p[2] / h).round() as i64]
}

/// Point hash answering "which stored point lies within `tol`".
struct PointGrid {
    h: f64,
    tol: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Point>,
}

impl PointGrid {
    fn new(tol: f64) -> Self {
        PointGrid {
            h: 4.0 * tol,
            tol,
            cells: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn find(&self, p: &Point) -> Option<usize> {
        let c = quantize(p, self.h);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in ids {
                            let d = (self.points[i] - p).amax();
                            if d <= self.tol && best.is_none_or(|(_, bd)| d < bd) {
                                best = Some((i, d));
                            }
                        }
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn insert(&mut self, p: Point) -> usize {
        let i = self.points.len();
        self.cells.entry(quantize(&p, self.h)).or_default().push(i);
        self.points.push(p);
        i
    }

    fn find_or_insert(&mut self, p: Point) -> usize {
        self.find(&p).unwrap_or_else(|| self.insert(p))
    }
}

/// Local node order restoring positive orientation after a reflection.
fn mirrored_order(dim: Dim) -> &'static [usize] {
    match dim {
        Dim::Two => &[0, 3, 2, 1],
        Dim::Three => &[0, 3, 2, 1, 4, 7, 6, 5],
    }
}

/// Union of transformed copies with coincident nodes merged.
pub fn assemble_uc(ruc: &Mesh, spec: &CellSpec, layout: &UcLayout) -> Result<UcAssembly, SolveError> {
    let dim = ruc.dim;
    let maps = layout
        .copies
        .iter()
        .map(|c| copy_map(spec, c))
        .collect::<Result<Vec<_>, _>>()?;
    let tol = 1e-8 * spec.bbox.diagonal();
    let mut grid = PointGrid::new(tol);
    let mut elements = Vec::new();
    let mut materials = Vec::new();
    let mut origin = Vec::new();
    for (k, map) in maps.iter().enumerate() {
        let ids: Vec<usize> = ruc.nodes.iter().map(|x| grid.find_or_insert(map.apply(x))).collect();
        let flip = map.linear.det() < 0.0;
        for (e, conn) in ruc.elements.iter().enumerate() {
            let mapped: Vec<usize> = if flip {
                mirrored_order(dim).iter().map(|&a| ids[conn[a]]).collect()
            } else {
                conn.iter().map(|&n| ids[n]).collect()
            };
            elements.push(mapped);
            materials.push(ruc.materials[e]);
            origin.push((k, e));
        }
    }
    let mesh = Mesh {
        dim,
        nodes: grid.points,
        elements,
        materials,
    };
    let bbox = mesh.bbox();
    mesh.check_orientation()?;
    Ok(UcAssembly {
        mesh,
        bbox,
        maps,
        origin,
    })
}

/// Worst mismatch of the load-equivalence relations over corresponding Gauss points.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub matched_points: usize,
    pub copies: usize,
    /// Relative to the largest strain / stress component in the full-cell field.
    pub strain_residual: f64,
    pub stress_residual: f64,
    pub worst_copy: Vec<String>,
    pub worst_element: usize,
    pub worst_point: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

pub const EQUIVALENCE_TOL: f64 = 1e-8;

fn tensor_scale(samples: &[Vec<f64>]) -> f64 {
    samples
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE)
}

/// Checks `ε_UC(g x) = γ_g L ε(x) Lᵗ` (and likewise for stress) at every
/// reduced-cell Gauss point and every copy `g` with linear part `L`.
/// `gammas` overrides the signs stored in `ruc` (negative controls).
pub fn verify_equivalence(
    uc: &FieldSolution,
    ruc: &FieldSolution,
    spec: &CellSpec,
    layout: &UcLayout,
    gammas: Option<&[Gamma]>,
) -> Result<EquivalenceReport, SolveError> {
    let dim = spec.dim;
    if uc.dim != dim || ruc.dim != dim {
        return Err(SolveError::Correspondence("dimension mismatch".into()));
    }
    let gammas = gammas.unwrap_or(&ruc.gammas);
    if gammas.len() != spec.relations.len() {
        return Err(SolveError::Correspondence(format!(
            "{} signs for {} relations",
            gammas.len(),
            spec.relations.len()
        )));
    }
    let sign: HashMap<&str, Gamma> = spec
        .relations
        .iter()
        .zip(gammas)
        .map(|(r, g)| (r.label.as_str(), *g))
        .collect();
    let tol = 1e-8 * spec.bbox.diagonal();
    let mut grid = PointGrid::new(tol);
    let point = |x: &[f64]| {
        let mut p = Point::zeros();
        for (i, v) in x.iter().enumerate() {
            p[i] = *v;
        }
        p
    };
    for s in &uc.gauss {
        grid.insert(point(&s.x));
    }
    let strain_scale = tensor_scale(&uc.gauss.iter().map(|s| s.strain.clone()).collect::<Vec<_>>());
    let stress_scale = tensor_scale(&uc.gauss.iter().map(|s| s.stress.clone()).collect::<Vec<_>>());

    let mut report = EquivalenceReport {
        matched_points: 0,
        copies: layout.copies.len(),
        strain_residual: 0.0,
        stress_residual: 0.0,
        worst_copy: Vec::new(),
        worst_element: 0,
        worst_point: Vec::new(),
        tolerance: EQUIVALENCE_TOL,
        passed: false,
    };
    let mut worst = -1.0f64;
    for chain in &layout.copies {
        let map = copy_map(spec, chain)?;
        let gamma = Gamma::product(chain.iter().map(|l| sign[l.as_str()]));
        let l: Transform = map.linear;
        for s in &ruc.gauss {
            let y = map.apply(&point(&s.x));
            let j = grid.find(&y).ok_or_else(|| {
                SolveError::Correspondence(format!(
                    "no full-cell Gauss point at {:?} (copy {:?}, element {})",
                    (0..dim.n()).map(|k| y[k]).collect::<Vec<_>>(),
                    chain,
                    s.element
                ))
            })?;
            let target = &uc.gauss[j];
            let eps = SymTensor::from_voigt_strain(dim, &s.strain).expect("voigt length");
            let sig = SymTensor::from_voigt_stress(dim, &s.stress).expect("voigt length");
            let eps_t = eps.rotated(&l).scaled(gamma.value());
            let sig_t = sig.rotated(&l).scaled(gamma.value());
            let eps_uc = SymTensor::from_voigt_strain(dim, &target.strain).expect("voigt length");
            let sig_uc = SymTensor::from_voigt_stress(dim, &target.stress).expect("voigt length");
            let re = eps_uc.sub(&eps_t).norm_inf() / strain_scale;
            let rs = sig_uc.sub(&sig_t).norm_inf() / stress_scale;
            report.strain_residual = report.strain_residual.max(re);
            report.stress_residual = report.stress_residual.max(rs);
            if re.max(rs) > worst {
                worst = re.max(rs);
                report.worst_copy = chain.clone();
                report.worst_element = s.element;
                report.worst_point = (0..dim.n()).map(|k| y[k]).collect();
            }
            report.matched_points += 1;
        }
    }
    if report.matched_points != uc.gauss.len() {
        return Err(SolveError::Correspondence(format!(
            "{} mapped reduced-cell points for {} full-cell points",
            report.matched_points,
            uc.gauss.len()
        )));
    }
    report.passed = report.strain_residual <= EQUIVALENCE_TOL && report.stress_residual <= EQUIVALENCE_TOL;
    Ok(report)
}
