//! Conforming Q4 / H8 meshes of a cell.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cellspec::BBox;
use crate::equivalence::{Dim, Point};
use crate::microfem::element;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("node {node}: expected {expected} coordinates, got {got}")]
    NodeShape {
        node: usize,
        expected: usize,
        got: usize,
    },
    #[error("element {element}: expected {expected} nodes, got {got}")]
    ElementShape {
        element: usize,
        expected: usize,
        got: usize,
    },
    #[error("element {element} references missing node {node}")]
    NodeIndex { element: usize, node: usize },
    #[error("{elements} elements but {tags} material tags")]
    MaterialCount { elements: usize, tags: usize },
    #[error("node {node} at {coords:?} lies outside the cell bounding box")]
    OutsideBBox { node: usize, coords: Vec<f64> },
    #[error("element {element} is inverted or degenerate (Jacobian determinant {det:e})")]
    Inverted { element: usize, det: f64 },
    #[error("mesh is {mesh}, cell is {cell}")]
    DimMismatch { mesh: Dim, cell: Dim },
    #[error("mesh has no elements")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: Dim,
    pub nodes: Vec<Point>,
    pub elements: Vec<Vec<usize>>,
    pub materials: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawMesh {
    dim: usize,
    nodes: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
    materials: Vec<u32>,
}

/// Local node lists of the boundary entities of one element.
fn element_faces(dim: Dim) -> &'static [&'static [usize]] {
    match dim {
        Dim::Two => &[&[0, 1], &[1, 2], &[2, 3], &[3, 0]],
        Dim::Three => &[
            &[0, 3, 2, 1],
            &[4, 5, 6, 7],
            &[0, 1, 5, 4],
            &[1, 2, 6, 5],
            &[2, 3, 7, 6],
            &[3, 0, 4, 7],
        ],
    }
}

impl Mesh {
    pub fn nodes_per_element(dim: Dim) -> usize {
        match dim {
            Dim::Two => 4,
            Dim::Three => 8,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, MeshError> {
        let raw: RawMesh = serde_json::from_str(s)?;
        let dim = Dim::from_n(raw.dim).map_err(|_| MeshError::BadDimension(raw.dim))?;
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for (i, c) in raw.nodes.iter().enumerate() {
            if c.len() != dim.n() {
                return Err(MeshError::NodeShape {
                    node: i,
                    expected: dim.n(),
                    got: c.len(),
                });
            }
            let mut p = Point::zeros();
            for (a, v) in c.iter().enumerate() {
                p[a] = *v;
            }
            nodes.push(p);
        }
        let mesh = Mesh {
            dim,
            nodes,
            elements: raw.elements,
            materials: raw.materials,
        };
        mesh.check_topology()?;
        Ok(mesh)
    }

    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        let s = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> String {
        let n = self.dim.n();
        let raw = RawMesh {
            dim: n,
            nodes: self.nodes.iter().map(|p| (0..n).map(|a| p[a]).collect()).collect(),
            elements: self.elements.clone(),
            materials: self.materials.clone(),
        };
        serde_json::to_string(&raw).expect("mesh serialization cannot fail")
    }

    fn check_topology(&self) -> Result<(), MeshError> {
        if self.elements.is_empty() {
            return Err(MeshError::Empty);
        }
        if self.materials.len() != self.elements.len() {
            return Err(MeshError::MaterialCount {
                elements: self.elements.len(),
                tags: self.materials.len(),
            });
        }
        let npe = Self::nodes_per_element(self.dim);
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.len() != npe {
                return Err(MeshError::ElementShape {
                    element: e,
                    expected: npe,
                    got: conn.len(),
                });
            }
            if let Some(&node) = conn.iter().find(|&&n| n >= self.nodes.len()) {
                return Err(MeshError::NodeIndex { element: e, node });
            }
        }
        Ok(())
    }

    /// Full check: topology, containment in `bbox` and element orientation.
    pub fn validate(&self, bbox: &BBox) -> Result<(), MeshError> {
        if bbox.dim != self.dim {
            return Err(MeshError::DimMismatch {
                mesh: self.dim,
                cell: bbox.dim,
            });
        }
        self.check_topology()?;
        let tol = 1e-9 * bbox.diagonal();
        if let Some((i, p)) = self.nodes.iter().enumerate().find(|(_, p)| !bbox.contains(p, tol)) {
            return Err(MeshError::OutsideBBox {
                node: i,
                coords: (0..self.dim.n()).map(|a| p[a]).collect(),
            });
        }
        self.check_orientation()
    }

    pub fn check_orientation(&self) -> Result<(), MeshError> {
        for e in 0..self.elements.len() {
            let det = element::min_jacobian(self.dim, &self.element_coords(e));
            if det.is_nan() || det <= 0.0 {
                return Err(MeshError::Inverted { element: e, det });
            }
        }
        Ok(())
    }

    pub fn element_coords(&self, e: usize) -> Vec<Point> {
        self.elements[e].iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn bbox(&self) -> BBox {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if self.dim == Dim::Two {
            lo[2] = 0.0;
            hi[2] = 0.0;
        }
        BBox::new(self.dim, lo, hi)
    }

    /// Nodes on element faces that are not shared by two elements.
    pub fn surface_nodes(&self) -> BTreeSet<usize> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for conn in &self.elements {
            for face in element_faces(self.dim) {
                let mut key: Vec<usize> = face.iter().map(|&i| conn[i]).collect();
                key.sort_unstable();
                *count.entry(key).or_default() += 1;
            }
        }
        count
            .into_iter()
            .filter(|(_, c)| *c == 1)
            .flat_map(|(k, _)| k)
            .collect()
    }

    /// Surface nodes lying on the cell's bounding box, ascending.
    pub fn boundary_nodes(&self, bbox: &BBox, tol: f64) -> Vec<usize> {
        self.surface_nodes()
            .into_iter()
            .filter(|&n| bbox.on_boundary(&self.nodes[n], tol))
            .collect()
    }

    /// Material tags of the elements incident to each node.
    pub fn node_tags(&self) -> Vec<BTreeSet<u32>> {
        let mut tags = vec![BTreeSet::new(); self.nodes.len()];
        for (conn, &m) in self.elements.iter().zip(&self.materials) {
            for &n in conn {
                tags[n].insert(m);
            }
        }
        tags
    }

    /// Structured grid of `divisions` cells per axis; `tag` maps element centroids to materials.
    pub fn structured(bbox: &BBox, divisions: &[usize], tag: impl Fn(&Point) -> u32) -> Mesh {
        let dim = bbox.dim;
        let n = dim.n();
        assert_eq!(divisions.len(), n, "one division count per axis");
        assert!(divisions.iter().all(|&d| d > 0), "divisions must be positive");
        let coord = |a: usize, i: usize| {
            if i == divisions[a] {
                bbox.hi[a]
            } else {
                bbox.lo[a] + bbox.extent(a) * i as f64 / divisions[a] as f64
            }
        };
        let (nx, ny) = (divisions[0], divisions[1]);
        let nz = if n == 3 { divisions[2] } else { 0 };
        let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        let mut nodes = Vec::new();
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    let z = if n == 3 { coord(2, k) } else { 0.0 };
                    nodes.push(Point::new(coord(0, i), coord(1, j), z));
                }
            }
        }
        let mut elements = Vec::new();
        let mut materials = Vec::new();
        let layers = if n == 3 { nz } else { 1 };
        for k in 0..layers {
            for j in 0..ny {
                for i in 0..nx {
                    let mut conn = vec![id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k)];
                    if n == 3 {
                        conn.extend([
                            id(i, j, k + 1),
                            id(i + 1, j, k + 1),
                            id(i + 1, j + 1, k + 1),
                            id(i, j + 1, k + 1),
                        ]);
                    }
                    let c = conn.iter().map(|&q| nodes[q]).sum::<Point>() / conn.len() as f64;
                    materials.push(tag(&c));
                    elements.push(conn);
                }
            }
        }
        Mesh {
            dim,
            nodes,
            elements,
            materials,
        }
    }

    /// Keeps the elements for which `keep` is true and drops orphaned nodes.
    pub fn retain_elements(&self, keep: impl Fn(usize) -> bool) -> Mesh {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        let mut materials = Vec::new();
        for (e, conn) in self.elements.iter().enumerate() {
            if !keep(e) {
                continue;
            }
            let new_conn = conn
                .iter()
                .map(|&n| {
                    if map[n] == usize::MAX {
                        map[n] = nodes.len();
                        nodes.push(self.nodes[n]);
                    }
                    map[n]
                })
                .collect();
            elements.push(new_conn);
            materials.push(self.materials[e]);
        }
        Mesh {
            dim: self.dim,
            nodes,
            elements,
            materials,
        }
    }

    pub fn dof_count(&self) -> usize {
        self.nodes.len() * self.dim.n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(dim: Dim) -> BBox {
        let hi = if dim == Dim::Two {
            Point::new(1.0, 1.0, 0.0)
        } else {
            Point::new(1.0, 1.0, 1.0)
        };
        BBox::new(dim, Point::zeros(), hi)
    }

    #[test]
    fn structured_counts_and_boundary() {
        let m = Mesh::structured(&unit_box(Dim::Two), &[3, 2], |_| 0);
        assert_eq!(m.nodes.len(), 12);
        assert_eq!(m.elements.len(), 6);
        assert_eq!(m.boundary_nodes(&unit_box(Dim::Two), 1e-12).len(), 10);
        m.validate(&unit_box(Dim::Two)).unwrap();

        let h = Mesh::structured(&unit_box(Dim::Three), &[2, 2, 2], |_| 0);
        assert_eq!(h.nodes.len(), 27);
        assert_eq!(h.boundary_nodes(&unit_box(Dim::Three), 1e-12).len(), 26);
        h.validate(&unit_box(Dim::Three)).unwrap();
    }

    #[test]
    fn json_round_trip_and_errors() {
        let m = Mesh::structured(&unit_box(Dim::Two), &[2, 2], |c| u32::from(c[0] > 0.5));
        let back = Mesh::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"dim":2,"nodes":[[0,0],[1,0],[1,1],[0,1]],"elements":[[0,1,2,9]],"materials":[0]}"#;
        assert!(matches!(Mesh::from_json_str(bad), Err(MeshError::NodeIndex { node: 9, .. })));
        let bad = r#"{"dim":2,"nodes":[[0,0],[1,0],[1,1],[0,1]],"elements":[[0,1,2,3]],"materials":[]}"#;
        assert!(matches!(Mesh::from_json_str(bad), Err(MeshError::MaterialCount { .. })));
    }

    #[test]
    fn inverted_element_detected() {
        let mut m = Mesh::structured(&unit_box(Dim::Two), &[1, 1], |_| 0);
        m.elements[0].reverse();
        assert!(matches!(m.check_orientation(), Err(MeshError::Inverted { element: 0, .. })));
    }

    #[test]
    fn retain_renumbers() {
        let m = Mesh::structured(&unit_box(Dim::Two), &[2, 1], |c| u32::from(c[0] > 0.5));
        let half = m.retain_elements(|e| m.materials[e] == 1);
        assert_eq!(half.nodes.len(), 4);
        assert_eq!(half.elements, vec![vec![0, 1, 2, 3]]);
        half.check_orientation().unwrap();
    }
}
