use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::element::{self, GaussData};
use super::ldl::Ldl;
use super::reduce::Reduction;
use super::sparse::CsrMatrix;
use crate::admissibility::{admissible_subspace, check_admissibility, Admissibility, AdmissibilityError, DEFAULT_TOL};
use crate::cellspec::{BBox, CellSpec, MaterialError, MaterialField, PlaneMode};
use crate::constraints::{build_constraints_with_gammas, ConstraintEquation, ConstraintError};
use crate::equivalence::{Dim, Gamma, Point, SymTensor};
use crate::mesh::{Mesh, MeshError};
use crate::pairing::{pair_mesh, NodePair, PairingError};
use crate::voigt;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Admissibility(#[from] AdmissibilityError),
    #[error(
        "load is not admissible: relation {label} fails with both signs (residuals {residual_plus:e} for +1, {residual_minus:e} for -1)"
    )]
    Inadmissible {
        label: String,
        residual_plus: f64,
        residual_minus: f64,
    },
    #[error("element {element} has no material (tag {tag})")]
    MissingMaterial { element: usize, tag: u32 },
    #[error("reduced system is singular: {nullity} zero pivot(s) among {dofs} reduced DOFs")]
    Singular { nullity: usize, dofs: usize },
    #[error(
        "self-constraints at node {node} (relations {relations:?}) cannot all hold: residual {residual:e}; the load reversal factors do not match the load"
    )]
    InconsistentSelfConstraint {
        node: usize,
        relations: Vec<String>,
        residual: f64,
    },
    #[error("node {0} is the slave of two equations")]
    DuplicateSlave(usize),
    #[error("slave {slave} depends on constrained node {master}")]
    ChainedSlave { slave: usize, master: usize },
    #[error("no unconstrained node available to fix rigid translations")]
    NoPinNode,
    #[error("strain is {strain}, cell is {cell}")]
    DimMismatch { strain: Dim, cell: Dim },
    #[error("meshes do not correspond: {0}")]
    Correspondence(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub plane: PlaneMode,
    /// Relative node-matching tolerance; `None` uses the pairing default.
    pub pair_tol: Option<f64>,
    /// Relative admissibility tolerance.
    pub adm_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            plane: PlaneMode::Strain,
            pair_tol: None,
            adm_tol: DEFAULT_TOL,
        }
    }
}

/// Assembled stiffness with the element data needed for post-processing.
#[derive(Debug, Clone)]
pub struct Model {
    pub mesh: Mesh,
    pub cell: BBox,
    pub k: CsrMatrix,
    gauss: Vec<Vec<GaussData>>,
    stiffness: BTreeMap<u32, DMatrix<f64>>,
    pub mesh_volume: f64,
}

impl Model {
    /// Element stiffnesses are computed in parallel and scattered in element order.
    pub fn new(mesh: &Mesh, cell: &BBox, materials: &MaterialField, plane: PlaneMode) -> Result<Model, SolveError> {
        mesh.validate(cell)?;
        let dim = mesh.dim;
        let stiffness = materials.stiffness_map(dim, plane)?;
        for (e, tag) in mesh.materials.iter().enumerate() {
            if !stiffness.contains_key(tag) {
                return Err(SolveError::MissingMaterial { element: e, tag: *tag });
            }
        }
        let per_element: Vec<(Vec<GaussData>, DMatrix<f64>)> = (0..mesh.elements.len())
            .into_par_iter()
            .map(|e| {
                let coords = mesh.element_coords(e);
                let gauss = element::gauss_data(dim, &coords).map_err(|det| MeshError::Inverted { element: e, det })?;
                let c = &stiffness[&mesh.materials[e]];
                let nd = dim.n() * coords.len();
                let mut ke = DMatrix::zeros(nd, nd);
                for g in &gauss {
                    ke += g.b.transpose() * (c * &g.b) * g.weight;
                }
                Ok((gauss, ke))
            })
            .collect::<Result<_, MeshError>>()?;

        let d = dim.n();
        let mut triplets = Vec::new();
        let mut gauss = Vec::with_capacity(per_element.len());
        let mut mesh_volume = 0.0;
        for (e, (g, ke)) in per_element.into_iter().enumerate() {
            let dofs: Vec<usize> = mesh.elements[e]
                .iter()
                .flat_map(|&n| (0..d).map(move |k| n * d + k))
                .collect();
            for (a, &ra) in dofs.iter().enumerate() {
                for (b, &cb) in dofs.iter().enumerate() {
                    triplets.push((ra, cb, ke[(a, b)]));
                }
            }
            mesh_volume += g.iter().map(|p| p.weight).sum::<f64>();
            gauss.push(g);
        }
        let k = CsrMatrix::from_triplets(mesh.dof_count(), triplets);
        Ok(Model {
            mesh: mesh.clone(),
            cell: *cell,
            k,
            gauss,
            stiffness,
            mesh_volume,
        })
    }

    pub fn dim(&self) -> Dim {
        self.mesh.dim
    }

    /// Volume of the cell (bounding box), voids included.
    pub fn cell_volume(&self) -> f64 {
        self.cell.volume()
    }

    /// `(1/V) ∫ ε : C : ε dV` for the uniform strain `eps` (an upper bound on
    /// the homogenized energy density).
    pub fn uniform_strain_energy(&self, eps: &SymTensor) -> f64 {
        let v = DVector::from_vec(eps.to_voigt_strain());
        let mut total = 0.0;
        for (e, gauss) in self.gauss.iter().enumerate() {
            let w: f64 = gauss.iter().map(|g| g.weight).sum();
            total += v.dot(&(&self.stiffness[&self.mesh.materials[e]] * &v)) * w;
        }
        total / self.cell_volume()
    }

    /// Nodes ordered by distance to the local origin, ties by index.
    fn pin_candidates(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.mesh.nodes.len()).collect();
        order.sort_by(|&a, &b| {
            self.mesh.nodes[a]
                .norm()
                .total_cmp(&self.mesh.nodes[b].norm())
                .then(a.cmp(&b))
        });
        order
    }
}

/// Strain and stress at one integration point.
#[derive(Debug, Clone, Serialize)]
pub struct GaussSample {
    pub element: usize,
    pub x: Vec<f64>,
    pub weight: f64,
    /// Engineering-shear Voigt strain.
    pub strain: Vec<f64>,
    pub stress: Vec<f64>,
}

/// Solved displacement field with its derived quantities.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub dim: Dim,
    pub labels: Vec<String>,
    pub gammas: Vec<Gamma>,
    pub macro_strain: SymTensor,
    pub u: Vec<Point>,
    pub gauss: Vec<GaussSample>,
    pub mesh_volume: f64,
    pub cell_volume: f64,
    /// Material average of the strain field, projected on the admissible subspace.
    pub mean_strain: SymTensor,
    /// Cell average of the stress field, projected on the admissible subspace.
    pub mean_stress: SymTensor,
    pub raw_mean_strain: SymTensor,
    pub raw_mean_stress: SymTensor,
    /// `(1/V) ∫ σ:ε dV` over the cell volume.
    pub energy_density: f64,
    /// Largest component of the material-average infinitesimal rotation.
    pub mean_rotation: f64,
    /// `max |u − ⟨ε⟩x|` over nodes.
    pub fluctuation_max: f64,
    /// Largest constraint residual relative to `‖⟨ε⟩‖ · diag`.
    pub constraint_residual: f64,
    pub reduced_dofs: usize,
    pub pin_node: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub dim: usize,
    pub relations: Vec<String>,
    pub gammas: Vec<Gamma>,
    pub macro_strain: Vec<f64>,
    pub mean_strain: Vec<f64>,
    pub mean_stress: Vec<f64>,
    pub raw_mean_strain: Vec<f64>,
    pub raw_mean_stress: Vec<f64>,
    pub energy_density: f64,
    pub mean_rotation: f64,
    pub fluctuation_max: f64,
    pub constraint_residual: f64,
    pub mesh_volume: f64,
    pub cell_volume: f64,
    pub reduced_dofs: usize,
    pub pin_node: usize,
    pub displacements: Vec<Vec<f64>>,
}

impl FieldSolution {
    pub fn summary(&self) -> SolutionSummary {
        let d = self.dim.n();
        SolutionSummary {
            dim: d,
            relations: self.labels.clone(),
            gammas: self.gammas.clone(),
            macro_strain: self.macro_strain.to_voigt_strain(),
            mean_strain: self.mean_strain.to_voigt_strain(),
            mean_stress: self.mean_stress.to_voigt_stress(),
            raw_mean_strain: self.raw_mean_strain.to_voigt_strain(),
            raw_mean_stress: self.raw_mean_stress.to_voigt_stress(),
            energy_density: self.energy_density,
            mean_rotation: self.mean_rotation,
            fluctuation_max: self.fluctuation_max,
            constraint_residual: self.constraint_residual,
            mesh_volume: self.mesh_volume,
            cell_volume: self.cell_volume,
            reduced_dofs: self.reduced_dofs,
            pin_node: self.pin_node,
            displacements: self.u.iter().map(|p| (0..d).map(|k| p[k]).collect()).collect(),
        }
    }

    /// One row per Gauss point: element, coordinates, weight, strain, stress.
    pub fn gauss_csv(&self) -> String {
        let d = self.dim.n();
        let labels = voigt::labels(self.dim);
        let mut header = vec!["element".to_string()];
        header.extend(["x", "y", "z"][..d].iter().map(|s| s.to_string()));
        header.push("weight".into());
        header.extend(labels.iter().map(|l| format!("eps{l}")));
        header.extend(labels.iter().map(|l| format!("sig{l}")));
        let mut out = header.join(",");
        out.push('\n');
        for g in &self.gauss {
            let mut row = vec![g.element.to_string()];
            row.extend(g.x.iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", g.weight));
            row.extend(g.strain.iter().chain(&g.stress).map(|v| format!("{v:e}")));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Displacement vector in global DOF order.
    pub fn flat_u(&self) -> Vec<f64> {
        let d = self.dim.n();
        self.u.iter().flat_map(|p| (0..d).map(move |k| p[k])).collect()
    }
}

/// Reduced and factorized system for one sign vector; serves every strain of
/// the corresponding load case.
#[derive(Debug)]
pub struct CaseSystem<'m> {
    model: &'m Model,
    spec: &'m CellSpec,
    pairs: &'m [NodePair],
    pub gammas: Vec<Gamma>,
    reduction: Reduction,
    kr: CsrMatrix,
    ldl: Ldl,
    projector: DMatrix<f64>,
}

impl<'m> CaseSystem<'m> {
    pub fn new(
        model: &'m Model,
        spec: &'m CellSpec,
        pairs: &'m [NodePair],
        gammas: &[Gamma],
    ) -> Result<CaseSystem<'m>, SolveError> {
        let dim = model.dim();
        let zero = SymTensor::zero(dim);
        let eqs = build_constraints_with_gammas(pairs, spec, gammas, &zero)?;
        let reduction = Reduction::new(dim, model.mesh.nodes.len(), &eqs, &model.pin_candidates())?;

        let n = model.k.n;
        let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| reduction.row(i).collect()).collect();
        let mut triplets = Vec::new();
        for i in 0..n {
            if rows[i].is_empty() {
                continue;
            }
            for (j, kij) in model.k.row(i) {
                for &(a, ria) in &rows[i] {
                    for &(b, rjb) in &rows[j] {
                        triplets.push((a, b, ria * kij * rjb));
                    }
                }
            }
        }
        let kr = CsrMatrix::from_triplets(reduction.n_reduced, triplets);
        let ldl = Ldl::factor(&kr);
        log::debug!(
            "reduced system: {} dofs, {} nnz, factor nnz {}",
            kr.n,
            kr.nnz(),
            ldl.factor_nnz()
        );
        if ldl.is_singular() {
            return Err(SolveError::Singular {
                nullity: ldl.nullity,
                dofs: kr.n,
            });
        }
        let q = admissible_subspace(spec, gammas)?;
        let projector = &q * q.transpose();
        Ok(CaseSystem {
            model,
            spec,
            pairs,
            gammas: gammas.to_vec(),
            reduction,
            kr,
            ldl,
            projector,
        })
    }

    pub fn reduced_dofs(&self) -> usize {
        self.kr.n
    }

    fn project(&self, t: &SymTensor, stress: bool) -> SymTensor {
        let dim = t.dim();
        let m = if stress {
            voigt::stress_to_mandel(dim, &t.to_voigt_stress())
        } else {
            voigt::strain_to_mandel(dim, &t.to_voigt_strain())
        };
        let p = &self.projector * DVector::from_vec(m);
        let v = if stress {
            voigt::mandel_to_stress(dim, p.as_slice())
        } else {
            voigt::mandel_to_strain(dim, p.as_slice())
        };
        if stress {
            SymTensor::from_voigt_stress(dim, &v)
        } else {
            SymTensor::from_voigt_strain(dim, &v)
        }
        .expect("projection preserves the Voigt length")
    }

    pub fn solve(&self, eps: &SymTensor) -> Result<FieldSolution, SolveError> {
        let model = self.model;
        let dim = model.dim();
        if eps.dim() != dim {
            return Err(SolveError::DimMismatch {
                strain: eps.dim(),
                cell: dim,
            });
        }
        let d = dim.n();
        let eqs = build_constraints_with_gammas(self.pairs, self.spec, &self.gammas, eps)?;
        let c = self.reduction.offsets(&eqs, eps, &model.mesh.nodes)?;
        let c_flat: Vec<f64> = c.iter().flat_map(|p| (0..d).map(move |k| p[k])).collect();
        let kc = model.k.matvec(&c_flat);
        let mut fr = vec![0.0; self.kr.n];
        for (i, v) in kc.iter().enumerate() {
            for (j, r) in self.reduction.row(i) {
                fr[j] -= r * v;
            }
        }
        let z = self.ldl.solve_refined(&self.kr, &fr);
        let u = self.reduction.expand(&z, &c);
        Ok(self.post_process(eps, u, &eqs))
    }

    fn post_process(&self, eps: &SymTensor, u: Vec<Point>, eqs: &[ConstraintEquation]) -> FieldSolution {
        let model = self.model;
        let mesh = &model.mesh;
        let dim = mesh.dim;
        let d = dim.n();
        let m = dim.voigt_len();
        let per_element: Vec<(Vec<GaussSample>, Matrix3<f64>, f64)> = (0..mesh.elements.len())
            .into_par_iter()
            .map(|e| {
                let conn = &mesh.elements[e];
                let u = &u;
                let ue = DVector::from_iterator(conn.len() * d, conn.iter().flat_map(|&n| (0..d).map(move |k| u[n][k])));
                let c = &model.stiffness[&mesh.materials[e]];
                let mut samples = Vec::with_capacity(model.gauss[e].len());
                let mut rot = Matrix3::zeros();
                let mut energy = 0.0;
                for g in &model.gauss[e] {
                    let strain = &g.b * &ue;
                    let stress = c * &strain;
                    energy += strain.dot(&stress) * g.weight;
                    let mut h = Matrix3::zeros();
                    for (a, &n) in conn.iter().enumerate() {
                        for i in 0..d {
                            for j in 0..d {
                                h[(i, j)] += u[n][i] * g.dndx[a][j];
                            }
                        }
                    }
                    rot += (h - h.transpose()) * (0.5 * g.weight);
                    samples.push(GaussSample {
                        element: e,
                        x: (0..d).map(|k| g.x[k]).collect(),
                        weight: g.weight,
                        strain: strain.iter().copied().collect(),
                        stress: stress.iter().copied().collect(),
                    });
                }
                (samples, rot, energy)
            })
            .collect();

        let mut gauss = Vec::new();
        let mut strain_sum = vec![0.0; m];
        let mut stress_sum = vec![0.0; m];
        let mut rot = Matrix3::zeros();
        let mut energy = 0.0;
        for (samples, r, en) in per_element {
            for s in &samples {
                for k in 0..m {
                    strain_sum[k] += s.strain[k] * s.weight;
                    stress_sum[k] += s.stress[k] * s.weight;
                }
            }
            rot += r;
            energy += en;
            gauss.extend(samples);
        }
        let vm = model.mesh_volume;
        let vc = model.cell_volume();
        let raw_strain: Vec<f64> = strain_sum.iter().map(|v| v / vm).collect();
        let raw_stress: Vec<f64> = stress_sum.iter().map(|v| v / vc).collect();
        let raw_mean_strain = SymTensor::from_voigt_strain(dim, &raw_strain).expect("voigt length");
        let raw_mean_stress = SymTensor::from_voigt_stress(dim, &raw_stress).expect("voigt length");

        let flat: Vec<f64> = u.iter().flat_map(|p| (0..d).map(move |k| p[k])).collect();
        let scale = (eps.norm_inf() * model.cell.diagonal()).max(f64::MIN_POSITIVE);
        let constraint_residual = eqs.iter().map(|e| e.residual(&flat)).fold(0.0, f64::max) / scale;
        let fluctuation_max = u
            .iter()
            .zip(&mesh.nodes)
            .map(|(ui, x)| (ui - eps.apply(x)).amax())
            .fold(0.0, f64::max);

        FieldSolution {
            dim,
            labels: self.spec.labels(),
            gammas: self.gammas.clone(),
            macro_strain: *eps,
            mean_strain: self.project(&raw_mean_strain, false),
            mean_stress: self.project(&raw_mean_stress, true),
            raw_mean_strain,
            raw_mean_stress,
            energy_density: energy / vc,
            mean_rotation: (rot / vm).amax(),
            fluctuation_max,
            constraint_residual,
            reduced_dofs: self.kr.n,
            pin_node: self.reduction.pin_node,
            mesh_volume: vm,
            cell_volume: vc,
            u,
            gauss,
        }
    }
}

/// Solves with an explicit sign vector (no admissibility check).
pub fn solve_with_gammas(
    mesh: &Mesh,
    spec: &CellSpec,
    materials: &MaterialField,
    eps: &SymTensor,
    gammas: &[Gamma],
    opts: &SolveOptions,
) -> Result<FieldSolution, SolveError> {
    let model = Model::new(mesh, &spec.bbox, materials, opts.plane)?;
    let pairs = pair_mesh(mesh, spec, opts.pair_tol)?;
    CaseSystem::new(&model, spec, &pairs, gammas)?.solve(eps)
}

/// Solves the cell under macro strain `eps` with signs from the admissibility check.
pub fn solve_ruc(
    mesh: &Mesh,
    spec: &CellSpec,
    materials: &MaterialField,
    eps: &SymTensor,
    opts: &SolveOptions,
) -> Result<FieldSolution, SolveError> {
    match check_admissibility(spec, eps, opts.adm_tol)? {
        Admissibility::Admissible(a) => solve_with_gammas(mesh, spec, materials, eps, &a.gammas, opts),
        Admissibility::Inadmissible(w) => Err(SolveError::Inadmissible {
            label: w.label,
            residual_plus: w.residual_plus,
            residual_minus: w.residual_minus,
        }),
    }
}
