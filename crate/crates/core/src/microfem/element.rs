//! Bilinear quadrilateral (Q4) and trilinear hexahedron (H8) with full Gauss integration.

use nalgebra::{DMatrix, Matrix3};

use crate::equivalence::{Dim, Point};

const Q4_NODES: [[f64; 3]; 4] = [
    [-1.0, -1.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
];

const H8_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

fn natural_nodes(dim: Dim) -> &'static [[f64; 3]] {
    match dim {
        Dim::Two => &Q4_NODES,
        Dim::Three => &H8_NODES,
    }
}

/// 2-point Gauss rule per direction: (natural coordinates, weight).
pub fn gauss_points(dim: Dim) -> Vec<([f64; 3], f64)> {
    let g = 1.0 / 3f64.sqrt();
    natural_nodes(dim)
        .iter()
        .map(|xi| ([xi[0] * g, xi[1] * g, xi[2] * g], 1.0))
        .collect()
}

/// Shape functions and their natural derivatives at `xi`.
pub fn shape(dim: Dim, xi: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let nodes = natural_nodes(dim);
    let mut n = Vec::with_capacity(nodes.len());
    let mut dn = Vec::with_capacity(nodes.len());
    match dim {
        Dim::Two => {
            for a in nodes {
                let (fx, fy) = (1.0 + a[0] * xi[0], 1.0 + a[1] * xi[1]);
                n.push(0.25 * fx * fy);
                dn.push([0.25 * a[0] * fy, 0.25 * a[1] * fx, 0.0]);
            }
        }
        Dim::Three => {
            for a in nodes {
                let (fx, fy, fz) = (1.0 + a[0] * xi[0], 1.0 + a[1] * xi[1], 1.0 + a[2] * xi[2]);
                n.push(0.125 * fx * fy * fz);
                dn.push([
                    0.125 * a[0] * fy * fz,
                    0.125 * a[1] * fx * fz,
                    0.125 * a[2] * fx * fy,
                ]);
            }
        }
    }
    (n, dn)
}

/// `J[i][j] = ∂x_j/∂ξ_i`, identity in the unused third direction for 2D.
fn jacobian(dim: Dim, coords: &[Point], dn: &[[f64; 3]]) -> Matrix3<f64> {
    let nd = dim.n();
    let mut j = Matrix3::zeros();
    for (p, d) in coords.iter().zip(dn) {
        for r in 0..nd {
            for c in 0..nd {
                j[(r, c)] += d[r] * p[c];
            }
        }
    }
    if dim == Dim::Two {
        j[(2, 2)] = 1.0;
    }
    j
}

/// Smallest Jacobian determinant over Gauss points and element corners.
pub fn min_jacobian(dim: Dim, coords: &[Point]) -> f64 {
    let gauss = gauss_points(dim).into_iter().map(|(xi, _)| xi);
    let corners = natural_nodes(dim).iter().copied();
    gauss
        .chain(corners)
        .map(|xi| jacobian(dim, coords, &shape(dim, &xi).1).determinant())
        .fold(f64::INFINITY, f64::min)
}

/// Physical point, integration weight `|J| w`, strain-displacement matrix and
/// physical shape-function gradients.
#[derive(Debug, Clone)]
pub struct GaussData {
    pub x: Point,
    pub weight: f64,
    pub b: DMatrix<f64>,
    pub dndx: Vec<[f64; 3]>,
}

/// Evaluates every Gauss point of the element; `Err(det)` for an inverted element.
pub fn gauss_data(dim: Dim, coords: &[Point]) -> Result<Vec<GaussData>, f64> {
    let nd = dim.n();
    let npe = coords.len();
    let m = dim.voigt_len();
    let mut out = Vec::with_capacity(npe);
    for (xi, w) in gauss_points(dim) {
        let (n, dn) = shape(dim, &xi);
        let j = jacobian(dim, coords, &dn);
        let det = j.determinant();
        if det.is_nan() || det <= 0.0 {
            return Err(det);
        }
        let jinv = j.try_inverse().ok_or(det)?;
        let mut b = DMatrix::zeros(m, nd * npe);
        let mut x = Point::zeros();
        let mut dndx = Vec::with_capacity(npe);
        for a in 0..npe {
            x += coords[a] * n[a];
            let mut g = [0.0; 3];
            for (r, gr) in g.iter_mut().enumerate().take(nd) {
                for c in 0..nd {
                    *gr += jinv[(r, c)] * dn[a][c];
                }
            }
            dndx.push(g);
            let col = a * nd;
            match dim {
                Dim::Two => {
                    b[(0, col)] = g[0];
                    b[(1, col + 1)] = g[1];
                    b[(2, col)] = g[1];
                    b[(2, col + 1)] = g[0];
                }
                Dim::Three => {
                    b[(0, col)] = g[0];
                    b[(1, col + 1)] = g[1];
                    b[(2, col + 2)] = g[2];
                    b[(3, col + 1)] = g[2];
                    b[(3, col + 2)] = g[1];
                    b[(4, col)] = g[2];
                    b[(4, col + 2)] = g[0];
                    b[(5, col)] = g[1];
                    b[(5, col + 1)] = g[0];
                }
            }
        }
        out.push(GaussData {
            x,
            weight: det * w,
            b,
            dndx,
        });
    }
    Ok(out)
}

/// `∫ Bᵗ C B dV`
pub fn stiffness(dim: Dim, coords: &[Point], c: &DMatrix<f64>) -> Result<DMatrix<f64>, f64> {
    let nd = dim.n() * coords.len();
    let mut k = DMatrix::zeros(nd, nd);
    for g in gauss_data(dim, coords)? {
        let cb = c * &g.b;
        k += g.b.transpose() * cb * g.weight;
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point> {
        Q4_NODES
            .iter()
            .map(|a| Point::new(0.5 * (a[0] + 1.0), 0.5 * (a[1] + 1.0), 0.0))
            .collect()
    }

    #[test]
    fn partition_of_unity() {
        for dim in [Dim::Two, Dim::Three] {
            let (n, dn) = shape(dim, &[0.3, -0.2, 0.7]);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for c in 0..dim.n() {
                assert!(dn.iter().map(|d| d[c]).sum::<f64>().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn volume_of_unit_cube() {
        let coords: Vec<Point> = H8_NODES
            .iter()
            .map(|a| Point::new(a[0] + 1.0, a[1] + 1.0, a[2] + 1.0))
            .collect();
        let v: f64 = gauss_data(Dim::Three, &coords).unwrap().iter().map(|g| g.weight).sum();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn translation_in_nullspace() {
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 2.0, 0.0, 0.0, 0.0, 0.75]);
        let k = stiffness(Dim::Two, &unit_square(), &c).unwrap();
        let t = nalgebra::DVector::from_fn(8, |i, _| if i % 2 == 0 { 1.0 } else { 0.0 });
        assert!((&k * t).amax() < 1e-14);
        assert!((&k - k.transpose()).amax() < 1e-15);
    }

    #[test]
    fn inverted_element_rejected() {
        let mut coords = unit_square();
        coords.reverse();
        assert!(gauss_data(Dim::Two, &coords).is_err());
        assert!(min_jacobian(Dim::Two, &coords) < 0.0);
    }
}
