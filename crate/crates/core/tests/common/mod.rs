#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;

use ruc_core::admissibility::{admissible_subspace, enumerate_load_cases};
use ruc_core::cellspec::{classical_uc_spec, BBox, CellKind, CellSpec, Material, MaterialField};
use ruc_core::equivalence::{
    BoundaryRegion, Dim, EquivalenceRelation, Extent, Gamma, Point, SymTensor, Transform,
};
use ruc_core::fixtures::{full_cell, Checkerboard, Honeycomb, Woven};
use ruc_core::mesh::Mesh;
use ruc_core::voigt;

/// Random signed permutation matrix.
pub fn signed_permutation<R: Rng>(dim: Dim, rng: &mut R) -> Transform {
    let n = dim.n();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut m = Matrix3::zeros();
    for (i, &j) in perm.iter().enumerate() {
        m[(i, j)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    if n == 2 {
        m[(2, 2)] = 1.0;
    }
    Transform::from_matrix(dim, m)
}

/// Spec with `n` random signed-permutation relations; geometry is irrelevant
/// to the admissibility question.
pub fn random_spec<R: Rng>(dim: Dim, n: usize, rng: &mut R) -> CellSpec {
    let hi = if dim == Dim::Two { Point::new(1.0, 1.0, 0.0) } else { Point::new(1.0, 1.0, 1.0) };
    let relations = (0..n)
        .map(|k| EquivalenceRelation {
            label: format!("E{}", k + 1),
            transform: signed_permutation(dim, rng),
            offset: Point::zeros(),
            source: BoundaryRegion::new((0..dim.n()).map(|a| if a == 0 { Extent::Fixed(1.0) } else { Extent::Interval([0.0, 1.0]) }).collect()),
        })
        .collect();
    CellSpec {
        dim,
        bbox: BBox::new(dim, Point::zeros(), hi),
        kind: CellKind::RUC,
        periodicity: Vec::new(),
        relations,
        free_faces: Vec::new(),
    }
}

/// `T ε Tᵗ` by explicit index sums.
fn conjugate(t: &Matrix3<f64>, e: &Matrix3<f64>, n: usize) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += t[(i, k)] * e[(k, l)] * t[(j, l)];
                }
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Exhaustive search over `{±1}ⁿ`. `None` when no sign vector works,
/// otherwise per relation the sign shared by all working vectors (if unique).
pub fn brute_force(spec: &CellSpec, eps: &SymTensor, tol: f64) -> Option<Vec<Option<Gamma>>> {
    let n = spec.relations.len();
    let d = spec.dim.n();
    let e = *eps.matrix();
    let bound = tol * eps.norm_inf();
    let mut seen: Vec<Option<Vec<f64>>> = Vec::new();
    for mask in 0..(1u32 << n) {
        let signs: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let ok = spec.relations.iter().zip(&signs).all(|(r, g)| {
            let c = conjugate(r.transform.matrix(), &e, d) * *g;
            (0..d).all(|i| (0..d).all(|j| (e[(i, j)] - c[(i, j)]).abs() <= bound))
        });
        if ok {
            seen.push(Some(signs));
        }
    }
    if seen.is_empty() {
        return None;
    }
    Some(
        (0..n)
            .map(|i| {
                let first = seen[0].as_ref().unwrap()[i];
                if seen.iter().all(|s| s.as_ref().unwrap()[i] == first) {
                    Some(if first > 0.0 { Gamma::Plus } else { Gamma::Minus })
                } else {
                    None
                }
            })
            .collect(),
    )
}

/// Strain drawn from one of: a generic tensor, a sparse integer tensor, or a
/// random admissible subspace.
pub fn sample_strain<R: Rng>(spec: &CellSpec, rng: &mut R) -> SymTensor {
    let dim = spec.dim;
    let m = dim.voigt_len();
    match rng.random_range(0..3) {
        0 => {
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            SymTensor::from_voigt_strain(dim, &v).unwrap()
        }
        1 => {
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1i32..=1) as f64).collect();
            SymTensor::from_voigt_strain(dim, &v).unwrap()
        }
        _ => {
            let gammas: Vec<Gamma> = (0..spec.relations.len())
                .map(|_| if rng.random_bool(0.5) { Gamma::Plus } else { Gamma::Minus })
                .collect();
            let q = admissible_subspace(spec, &gammas).unwrap();
            if q.ncols() == 0 {
                return SymTensor::zero(dim);
            }
            let c = DVector::from_fn(q.ncols(), |_, _| rng.random_range(-1.0..1.0));
            let mandel = &q * c;
            SymTensor::from_voigt_strain(dim, &voigt::mandel_to_strain(dim, mandel.as_slice())).unwrap()
        }
    }
}

/// Random strain in the span of a load case.
pub fn case_strain<R: Rng>(spec: &CellSpec, case: usize, rng: &mut R) -> SymTensor {
    let cases = enumerate_load_cases(spec).unwrap();
    let q: &DMatrix<f64> = cases[case].mandel_basis();
    let c = DVector::from_fn(q.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let mandel = q * c;
    SymTensor::from_voigt_strain(spec.dim, &voigt::mandel_to_strain(spec.dim, mandel.as_slice())).unwrap()
}

/// A meshed cell with its materials.
pub struct Fixture {
    pub name: &'static str,
    pub spec: CellSpec,
    pub mesh: Mesh,
    pub materials: MaterialField,
    /// No voids, so mesh volume equals cell volume.
    pub solid: bool,
}

fn classical_box(dim: Dim) -> (CellSpec, Mesh) {
    let (hi, div): (Point, Vec<usize>) = match dim {
        Dim::Two => (Point::new(2.0, 1.0, 0.0), vec![6, 4]),
        Dim::Three => (Point::new(1.0, 1.5, 0.5), vec![3, 4, 2]),
    };
    let bb = BBox::new(dim, Point::zeros(), hi);
    let periods: Vec<Point> = (0..dim.n())
        .map(|a| {
            let mut p = Point::zeros();
            p[a] = hi[a];
            p
        })
        .collect();
    let spec = classical_uc_spec(bb, &periods).unwrap();
    let mesh = Mesh::structured(&bb, &div, |c| if c.x + 0.3 * c.y > 0.7 { 2 } else { 1 });
    (spec, mesh)
}

fn two_phase() -> MaterialField {
    MaterialField::isotropic(1, 1.0, 0.3).with(2, Material::Isotropic { e: 10.0, nu: 0.2 })
}

/// Every bundled cell, with two-phase materials where the mesh has two tags.
pub fn fixtures() -> Vec<Fixture> {
    let cb = Checkerboard::default();
    let (cb_uc_spec, cb_uc_mesh) = full_cell(&cb.mesh(16), &cb.spec(), &cb.layout()).unwrap();
    let hc = Honeycomb::default();
    let (hc_uc_spec, hc_uc_mesh) = full_cell(&hc.mesh(24, 28), &hc.spec(), &hc.layout()).unwrap();
    let woven = Woven::default();
    let (box2_spec, box2_mesh) = classical_box(Dim::Two);
    let (box3_spec, box3_mesh) = classical_box(Dim::Three);
    vec![
        Fixture { name: "checkerboard rUC", spec: cb.spec(), mesh: cb.mesh(16), materials: two_phase(), solid: true },
        Fixture { name: "checkerboard UC", spec: cb_uc_spec, mesh: cb_uc_mesh, materials: two_phase(), solid: true },
        Fixture { name: "honeycomb rUC", spec: hc.spec(), mesh: hc.mesh(24, 28), materials: Honeycomb::materials(), solid: false },
        Fixture { name: "honeycomb UC", spec: hc_uc_spec, mesh: hc_uc_mesh, materials: Honeycomb::materials(), solid: false },
        Fixture { name: "woven stacked rUC", spec: woven.stack_spec(), mesh: woven.mesh([4, 8, 2]), materials: two_phase(), solid: true },
        Fixture { name: "woven plate rUC", spec: woven.spec(), mesh: woven.mesh([4, 8, 2]), materials: two_phase(), solid: false },
        Fixture { name: "classical 2D box", spec: box2_spec, mesh: box2_mesh, materials: two_phase(), solid: true },
        Fixture { name: "classical 3D box", spec: box3_spec, mesh: box3_mesh, materials: two_phase(), solid: true },
    ]
}

/// Single-material field covering both tags.
pub fn homogeneous() -> (MaterialField, Material) {
    let m = Material::Isotropic { e: 7.0, nu: 0.25 };
    (MaterialField::new().with(1, m.clone()).with(2, m.clone()), m)
}
