//! Bundled example cells: a 3D woven reduced cell, a honeycomb reduced cell
//! with its full cell, and a two-phase 2D checkerboard pair.
//!
//! Meshes are structured grids that are symmetry-compatible by construction.

use serde_json::json;

use crate::cellspec::{classical_uc_spec, BBox, CellSpec, Material, MaterialField};
use crate::equivalence::{Dim, Point};
use crate::mesh::Mesh;
use crate::microfem::{assemble_uc, SolveError, UcLayout};

/// Woven reduced cell: width `w` (x), length `l` (y), thickness `t` (z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Woven {
    pub w: f64,
    pub l: f64,
    pub t: f64,
}

impl Default for Woven {
    fn default() -> Self {
        Woven { w: 2.0, l: 4.0, t: 1.0 }
    }
}

fn parse(v: serde_json::Value) -> CellSpec {
    CellSpec::from_json_str(&v.to_string()).expect("bundled spec is valid")
}

impl Woven {
    fn relations(&self) -> Vec<serde_json::Value> {
        let (w, l) = (self.w, self.l);
        let neg = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let rot = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        vec![
            json!({"label": "E1", "T": neg, "offset": [w, -l / 2.0, 0.0], "source": {"x": w / 2.0, "y": [-l / 2.0, 0.0]}}),
            json!({"label": "E2", "T": id, "offset": [w, l / 2.0, 0.0], "source": {"x": w / 2.0, "y": [0.0, l / 2.0]}}),
            json!({"label": "E3", "T": rot, "offset": [0.0, l, 0.0], "source": {"y": l / 2.0}}),
            json!({"label": "E4", "T": rot, "offset": [-w, l / 2.0, 0.0], "source": {"x": -w / 2.0, "y": [0.0, l / 2.0]}}),
            json!({"label": "E5", "T": id, "offset": [-w, -l / 2.0, 0.0], "source": {"x": -w / 2.0, "y": [-l / 2.0, 0.0]}}),
            json!({"label": "E6", "T": neg, "offset": [0.0, -l, 0.0], "source": {"y": -l / 2.0}}),
        ]
    }

    fn bbox_json(&self) -> serde_json::Value {
        json!([[-self.w / 2.0, self.w / 2.0], [-self.l / 2.0, self.l / 2.0], [-self.t / 2.0, self.t / 2.0]])
    }

    /// Six relations; the faces normal to z are traction free.
    pub fn spec(&self) -> CellSpec {
        parse(json!({
            "dim": 3,
            "bbox": self.bbox_json(),
            "kind": "rUC",
            "relations": self.relations(),
            "free_faces": ["z-", "z+"],
        }))
    }

    /// Periodic stacking through the thickness instead of free faces (relation `E7`).
    pub fn stack_spec(&self) -> CellSpec {
        let mut rel = self.relations();
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        rel.push(json!({"label": "E7", "T": id, "offset": [0.0, 0.0, self.t], "source": {"z": self.t / 2.0}}));
        parse(json!({"dim": 3, "bbox": self.bbox_json(), "kind": "rUC", "relations": rel}))
    }

    /// Tag 2 marks yarn that crosses from the lower to the upper half
    /// between the bands `|y| < l/4` and `|y| > l/4`; tag 1 is matrix.
    pub fn mesh(&self, divisions: [usize; 3]) -> Mesh {
        let bbox = self.spec().bbox;
        let l = self.l;
        Mesh::structured(&bbox, &divisions, |c| {
            if (c.z < 0.0) == (c.y.abs() < l / 4.0) {
                2
            } else {
                1
            }
        })
    }
}

/// Honeycomb reduced cell `[-w/2, w/2] × [-l/2, l/2]` with walls of thickness `h`.
///
/// Hexagonal voids sit on the lattice `(-w/2, l/2) + i (2w, l) + j (0, 2l)`;
/// `w = √3/2 · l` gives regular hexagons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Honeycomb {
    pub w: f64,
    pub l: f64,
    pub h: f64,
}

impl Default for Honeycomb {
    fn default() -> Self {
        Honeycomb {
            w: 3f64.sqrt() / 2.0,
            l: 1.0,
            h: 0.16,
        }
    }
}

impl Honeycomb {
    pub fn spec(&self) -> CellSpec {
        let (w, l) = (self.w, self.l);
        parse(json!({
            "dim": 2,
            "bbox": [[-w / 2.0, w / 2.0], [-l / 2.0, l / 2.0]],
            "kind": "rUC",
            "relations": [
                {"label": "E1", "T": [[-1.0, 0.0], [0.0, -1.0]], "offset": [w, 0.0], "source": {"x": w / 2.0}},
                {"label": "E2", "T": [[-1.0, 0.0], [0.0, 1.0]], "offset": [-w, 0.0], "source": {"x": -w / 2.0}},
                {"label": "E3", "T": [[1.0, 0.0], [0.0, -1.0]], "offset": [0.0, -l], "source": {"y": -l / 2.0}},
            ],
            "free_faces": ["y+"],
        }))
    }

    /// Distance from `p` to the nearest cell wall mid-line.
    pub fn wall_distance(&self, p: &Point) -> f64 {
        let (w, l) = (self.w, self.l);
        let mut best = [(f64::INFINITY, Point::zeros()), (f64::INFINITY, Point::zeros())];
        for i in -3..=3 {
            for j in -3..=3 {
                let c = Point::new(-w / 2.0 + 2.0 * w * i as f64, l / 2.0 + l * i as f64 + 2.0 * l * j as f64, 0.0);
                let d2 = (p - c).norm_squared();
                if d2 < best[0].0 {
                    best[1] = best[0];
                    best[0] = (d2, c);
                } else if d2 < best[1].0 {
                    best[1] = (d2, c);
                }
            }
        }
        (best[1].0 - best[0].0) / (2.0 * (best[1].1 - best[0].1).norm())
    }

    /// Structured grid keeping the wall elements. In the column along the
    /// point-symmetric face `x = w/2` an element is kept when it or its
    /// mirror in `y` is wall, so that face's nodes pair up.
    pub fn mesh(&self, nx: usize, ny: usize) -> Mesh {
        let spec = self.spec();
        let dx = self.w / nx as f64;
        let full = Mesh::structured(&spec.bbox, &[nx, ny], |_| 1);
        let keep: Vec<bool> = full
            .elements
            .iter()
            .map(|conn| {
                let c = conn.iter().map(|&n| full.nodes[n]).sum::<Point>() / 4.0;
                let wall = |p: &Point| self.wall_distance(p) <= self.h / 2.0;
                wall(&c) || (c.x > self.w / 2.0 - dx && wall(&Point::new(c.x, -c.y, 0.0)))
            })
            .collect();
        full.retain_elements(|e| keep[e])
    }

    /// Eight copies forming the rectangular cell `[-3w/2, 5w/2] × [-3l/2, l/2]`.
    pub fn layout(&self) -> UcLayout {
        let chains: [&[&str]; 8] = [
            &[],
            &["E2"],
            &["E3"],
            &["E2", "E3"],
            &["E1"],
            &["E3", "E1"],
            &["E1", "E2"],
            &["E3", "E1", "E2"],
        ];
        UcLayout {
            copies: chains.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect(),
            periodicity: vec![vec![4.0 * self.w, 0.0], vec![0.0, 2.0 * self.l]],
        }
    }

    pub fn materials() -> MaterialField {
        MaterialField::isotropic(1, 1.0, 0.3)
    }
}

/// Two-phase square reduced cell `[0, a]²` whose four faces are each mapped
/// onto themselves by half-turns about their midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkerboard {
    pub a: f64,
    /// Height of the horizontal phase boundary, as a fraction of `a`.
    pub split: f64,
}

impl Default for Checkerboard {
    fn default() -> Self {
        Checkerboard { a: 1.0, split: 0.625 }
    }
}

impl Checkerboard {
    pub fn spec(&self) -> CellSpec {
        let a = self.a;
        let neg = [[-1.0, 0.0], [0.0, -1.0]];
        parse(json!({
            "dim": 2,
            "bbox": [[0.0, a], [0.0, a]],
            "kind": "rUC",
            "relations": [
                {"label": "E1", "T": neg, "offset": [2.0 * a, a], "source": {"x": a}},
                {"label": "E2", "T": neg, "offset": [a, 2.0 * a], "source": {"y": a}},
                {"label": "E3", "T": neg, "offset": [0.0, a], "source": {"x": 0.0}},
                {"label": "E4", "T": neg, "offset": [a, 0.0], "source": {"y": 0.0}},
            ],
        }))
    }

    /// Phase 2 fills the lower-left and upper-right blocks.
    pub fn tag(&self, p: &Point) -> u32 {
        let left = p.x < self.a / 2.0;
        let low = p.y < self.split * self.a;
        if left == low {
            2
        } else {
            1
        }
    }

    pub fn mesh(&self, n: usize) -> Mesh {
        Mesh::structured(&self.spec().bbox, &[n, n], |c| self.tag(c))
    }

    /// Four copies forming `[0, 2a]²`.
    pub fn layout(&self) -> UcLayout {
        let chains: [&[&str]; 4] = [&[], &["E1"], &["E2"], &["E1", "E4"]];
        UcLayout {
            copies: chains.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect(),
            periodicity: vec![vec![2.0 * self.a, 0.0], vec![0.0, 2.0 * self.a]],
        }
    }

    pub fn materials() -> MaterialField {
        MaterialField::isotropic(1, 1.0, 0.3).with(2, Material::Isotropic { e: 10.0, nu: 0.2 })
    }
}

/// Full cell assembled from copies of a reduced cell, with its classical spec.
pub fn full_cell(ruc_mesh: &Mesh, ruc_spec: &CellSpec, layout: &UcLayout) -> Result<(CellSpec, Mesh), SolveError> {
    let asm = assemble_uc(ruc_mesh, ruc_spec, layout)?;
    let dim = ruc_spec.dim;
    let bbox = full_bbox(ruc_spec, layout)?;
    let spec = classical_uc_spec(bbox, &layout.periodicity_points(dim))
        .map_err(|e| SolveError::Correspondence(e.to_string()))?;
    Ok((spec, asm.mesh))
}

/// Union of the copies' bounding boxes.
pub fn full_bbox(ruc_spec: &CellSpec, layout: &UcLayout) -> Result<BBox, SolveError> {
    let dim = ruc_spec.dim;
    let b = &ruc_spec.bbox;
    let mut lo = Point::repeat(f64::INFINITY);
    let mut hi = Point::repeat(f64::NEG_INFINITY);
    for chain in &layout.copies {
        let map = crate::microfem::copy_map(ruc_spec, chain)?;
        for corner in 0..(1usize << dim.n()) {
            let mut p = Point::zeros();
            for a in 0..dim.n() {
                p[a] = if corner >> a & 1 == 1 { b.hi[a] } else { b.lo[a] };
            }
            let q = map.apply(&p);
            for a in 0..dim.n() {
                lo[a] = lo[a].min(q[a]);
                hi[a] = hi[a].max(q[a]);
            }
        }
    }
    if dim == Dim::Two {
        lo[2] = 0.0;
        hi[2] = 0.0;
    }
    Ok(BBox::new(dim, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellspec::validate_with_mesh;
    use crate::pairing::pair_mesh;

    #[test]
    fn bundled_specs_validate() {
        let woven = Woven::default();
        for (spec, mesh) in [
            (woven.spec(), woven.mesh([4, 8, 2])),
            (woven.stack_spec(), woven.mesh([4, 8, 2])),
        ] {
            let r = validate_with_mesh(&spec, &mesh);
            assert!(r.is_valid(), "{:?}", r.messages());
            pair_mesh(&mesh, &spec, None).unwrap();
        }
        let hc = Honeycomb::default();
        let r = validate_with_mesh(&hc.spec(), &hc.mesh(24, 28));
        assert!(r.is_valid(), "{:?}", r.messages());
        let cb = Checkerboard::default();
        let r = validate_with_mesh(&cb.spec(), &cb.mesh(8));
        assert!(r.is_valid(), "{:?}", r.messages());
    }

    #[test]
    fn honeycomb_top_face_is_void() {
        let hc = Honeycomb::default();
        let mesh = hc.mesh(24, 28);
        assert!(mesh.nodes.iter().all(|p| p.y < hc.l / 2.0 - 1e-9));
        // the wall crosses the point-symmetric face around its midpoint
        assert!(mesh.nodes.iter().any(|p| (p.x - hc.w / 2.0).abs() < 1e-12 && p.y.abs() < 1e-12));
    }

    #[test]
    fn full_cells_have_expected_extent() {
        let hc = Honeycomb::default();
        let (spec, mesh) = full_cell(&hc.mesh(12, 14), &hc.spec(), &hc.layout()).unwrap();
        assert!((spec.bbox.extent(0) - 4.0 * hc.w).abs() < 1e-12);
        assert!((spec.bbox.extent(1) - 2.0 * hc.l).abs() < 1e-12);
        assert!(!mesh.elements.is_empty());
        pair_mesh(&mesh, &spec, None).unwrap();

        let cb = Checkerboard::default();
        let (spec, mesh) = full_cell(&cb.mesh(8), &cb.spec(), &cb.layout()).unwrap();
        assert_eq!(mesh.elements.len(), 4 * 64);
        assert_eq!(mesh.nodes.len(), 17 * 17);
        assert!((spec.bbox.volume() - 4.0).abs() < 1e-12);
    }
}
