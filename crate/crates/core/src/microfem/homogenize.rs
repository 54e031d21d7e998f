//! Effective stiffness from unit macro strains.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use super::solver::{CaseSystem, Model, SolveError, SolveOptions};
use crate::admissibility::{check_admissibility, Admissibility};
use crate::cellspec::{CellSpec, MaterialField};
use crate::equivalence::{Dim, Gamma, SymTensor};
use crate::mesh::Mesh;
use crate::pairing::pair_mesh;
use crate::voigt;

/// Columns of `C_eff` are average stresses for unit engineering strains.
#[derive(Debug, Clone, Serialize)]
pub struct HomogenizedStiffness {
    pub dim: Dim,
    /// Symmetrized over the computed block.
    pub c: Vec<Vec<f64>>,
    pub raw: Vec<Vec<f64>>,
    /// `mask[j]`: column `j` was computable.
    pub mask: Vec<bool>,
    /// `max |C − Cᵗ| / max |C|` over the computed block.
    pub asymmetry: f64,
    /// Sign vector used for each column (`None` if masked).
    pub column_gammas: Vec<Option<Vec<Gamma>>>,
    /// Components not admissible under any load case, with the failing relation.
    pub missing: Vec<(String, String)>,
}

impl HomogenizedStiffness {
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.c.len();
        DMatrix::from_fn(m, m, |i, j| self.c[i][j])
    }

    pub fn raw_matrix(&self) -> DMatrix<f64> {
        let m = self.raw.len();
        DMatrix::from_fn(m, m, |i, j| self.raw[i][j])
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }
}

/// Solves every unit strain, one factorization per distinct sign vector.
pub fn homogenize(
    mesh: &Mesh,
    spec: &CellSpec,
    materials: &MaterialField,
    opts: &SolveOptions,
) -> Result<HomogenizedStiffness, SolveError> {
    let dim = spec.dim;
    let m = dim.voigt_len();
    let model = Model::new(mesh, &spec.bbox, materials, opts.plane)?;
    let pairs = pair_mesh(mesh, spec, opts.pair_tol)?;
    let labels = voigt::labels(dim);

    let mut groups: BTreeMap<Vec<i8>, (Vec<Gamma>, Vec<usize>)> = BTreeMap::new();
    let mut missing = Vec::new();
    let mut column_gammas = vec![None; m];
    for j in 0..m {
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        let eps = SymTensor::from_voigt_strain(dim, &v).expect("voigt length");
        match check_admissibility(spec, &eps, opts.adm_tol)? {
            Admissibility::Admissible(a) => {
                let key = a.gammas.iter().map(|g| g.value() as i8).collect();
                groups.entry(key).or_insert_with(|| (a.gammas.clone(), Vec::new())).1.push(j);
                column_gammas[j] = Some(a.gammas);
            }
            Admissibility::Inadmissible(w) => {
                log::warn!("unit strain {} is not admissible (relation {})", labels[j], w.label);
                missing.push((labels[j].to_string(), w.label));
            }
        }
    }

    let mut raw = DMatrix::zeros(m, m);
    let mut mask = vec![false; m];
    for (gammas, cols) in groups.values() {
        let system = CaseSystem::new(&model, spec, &pairs, gammas)?;
        log::info!(
            "load case {:?}: {} reduced dofs, components {:?}",
            gammas.iter().map(|g| g.value()).collect::<Vec<_>>(),
            system.reduced_dofs(),
            cols.iter().map(|&j| labels[j]).collect::<Vec<_>>()
        );
        for &j in cols {
            let mut v = vec![0.0; m];
            v[j] = 1.0;
            let eps = SymTensor::from_voigt_strain(dim, &v).expect("voigt length");
            let sol = system.solve(&eps)?;
            for (i, s) in sol.mean_stress.to_voigt_stress().into_iter().enumerate() {
                raw[(i, j)] = s;
            }
            mask[j] = true;
        }
    }

    let mut c = raw.clone();
    let mut asym = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if mask[i] && mask[j] {
                c[(i, j)] = 0.5 * (raw[(i, j)] + raw[(j, i)]);
                asym = asym.max((raw[(i, j)] - raw[(j, i)]).abs());
            }
        }
    }
    let scale = raw.amax();
    let to_rows = |a: &DMatrix<f64>| (0..m).map(|i| (0..m).map(|j| a[(i, j)]).collect()).collect();
    Ok(HomogenizedStiffness {
        dim,
        c: to_rows(&c),
        raw: to_rows(&raw),
        mask,
        asymmetry: if scale > 0.0 { asym / scale } else { 0.0 },
        column_gammas,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellspec::{classical_uc_spec, BBox, Material, PlaneMode};
    use crate::equivalence::Point;

    #[test]
    fn homogeneous_box_recovers_material() {
        let bb = BBox::new(Dim::Three, Point::zeros(), Point::new(1.0, 2.0, 1.0));
        let spec = classical_uc_spec(bb, &[Point::new(1.0, 0.0, 0.0), Point::new(0.0, 2.0, 0.0), Point::new(0.0, 0.0, 1.0)])
            .unwrap();
        let mesh = Mesh::structured(&bb, &[2, 3, 2], |_| 1);
        let mats = MaterialField::isotropic(1, 70.0, 0.33);
        let h = homogenize(&mesh, &spec, &mats, &SolveOptions::default()).unwrap();
        assert!(h.is_complete());
        let c = Material::Isotropic { e: 70.0, nu: 0.33 }.stiffness(1, Dim::Three, PlaneMode::Strain).unwrap();
        assert!((h.matrix() - &c).amax() < 1e-9 * c.amax());
        assert!(h.asymmetry < 1e-12);
    }

    #[test]
    fn layered_box_matches_voigt_reuss_in_limits() {
        // layers normal to x: E11 is the Reuss-like series value for nu = 0
        let bb = BBox::new(Dim::Two, Point::zeros(), Point::new(1.0, 1.0, 0.0));
        let spec = classical_uc_spec(bb, &[Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)]).unwrap();
        let mesh = Mesh::structured(&bb, &[4, 2], |p| if p.x < 0.5 { 1 } else { 2 });
        let mats = MaterialField::isotropic(1, 1.0, 0.0).with(2, Material::Isotropic { e: 3.0, nu: 0.0 });
        let h = homogenize(&mesh, &spec, &mats, &SolveOptions::default()).unwrap();
        let c = h.matrix();
        assert!((c[(0, 0)] - 1.5).abs() < 1e-12, "{}", c[(0, 0)]);
        assert!((c[(1, 1)] - 2.0).abs() < 1e-12, "{}", c[(1, 1)]);
    }
}
