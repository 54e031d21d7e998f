//! Declarative cell description: bounding box, periodicity vectors and the
//! relations linking adjacent equivalent sub-domains to the analysed cell.

mod classical;
mod material;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalence::{
    BoundaryRegion, Dim, EquivalenceError, EquivalenceRelation, Extent, Point, Transform,
};

pub use classical::classical_uc_spec;
pub use material::{Material, MaterialError, MaterialField, PlaneMode};
pub use validate::{
    validate, validate_with_mesh, Inconsistency, KindViolation, OrthogonalityFailure,
    UncoveredFacet, ValidationReport, DEFAULT_SAMPLES,
};

const AXES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Error)]
pub enum CellSpecError {
    #[error("invalid spec JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Equivalence(#[from] EquivalenceError),
    #[error("relation {label}: {msg}")]
    Relation { label: String, msg: String },
    #[error("bounding box: {0}")]
    BBox(String),
    #[error("unknown face {0:?} (expected x-, x+, y-, y+, z-, z+)")]
    Face(String),
    #[error("periodicity vectors are degenerate")]
    Degenerate,
    #[error("unsupported lattice: {0}")]
    UnsupportedLattice(String),
}

/// Cell category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    UC,
    OrUC,
    #[serde(rename = "rUC")]
    RUC,
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CellKind::UC => "UC",
            CellKind::OrUC => "OrUC",
            CellKind::RUC => "rUC",
        };
        f.write_str(s)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub dim: Dim,
    pub lo: Point,
    pub hi: Point,
}

impl BBox {
    pub fn new(dim: Dim, lo: Point, hi: Point) -> Self {
        BBox { dim, lo, hi }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn diagonal(&self) -> f64 {
        (0..self.dim.n())
            .map(|a| self.extent(a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim.n()).map(|a| self.extent(a)).product()
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        (0..self.dim.n()).all(|a| p[a] >= self.lo[a] - tol && p[a] <= self.hi[a] + tol)
    }

    /// True when `p` is inside and on at least one facet.
    pub fn on_boundary(&self, p: &Point, tol: f64) -> bool {
        self.contains(p, tol)
            && (0..self.dim.n())
                .any(|a| (p[a] - self.lo[a]).abs() <= tol || (p[a] - self.hi[a]).abs() <= tol)
    }

    pub fn faces(&self) -> Vec<Face> {
        (0..self.dim.n())
            .flat_map(|axis| [Face { axis, upper: false }, Face { axis, upper: true }])
            .collect()
    }

    pub fn face_coord(&self, face: Face) -> f64 {
        if face.upper {
            self.hi[face.axis]
        } else {
            self.lo[face.axis]
        }
    }

    /// Whole facet as a boundary region.
    pub fn face_region(&self, face: Face) -> BoundaryRegion {
        let extents = (0..self.dim.n())
            .map(|a| {
                if a == face.axis {
                    Extent::Fixed(self.face_coord(face))
                } else {
                    Extent::Interval([self.lo[a], self.hi[a]])
                }
            })
            .collect();
        BoundaryRegion::new(extents)
    }
}

/// One facet of the bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn parse(s: &str) -> Result<Face, CellSpecError> {
        let bad = || CellSpecError::Face(s.to_string());
        let mut chars = s.chars();
        let axis = match chars.next() {
            Some('x') => 0,
            Some('y') => 1,
            Some('z') => 2,
            _ => return Err(bad()),
        };
        let upper = match (chars.next(), chars.next()) {
            (Some('+'), None) => true,
            (Some('-'), None) => false,
            _ => return Err(bad()),
        };
        Ok(Face { axis, upper })
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", AXES[self.axis], if self.upper { '+' } else { '-' })
    }
}

/// Full description of a UC, OrUC or rUC.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub dim: Dim,
    pub bbox: BBox,
    pub kind: CellKind,
    pub periodicity: Vec<Point>,
    pub relations: Vec<EquivalenceRelation>,
    /// Traction-free facets with no equivalent partner (e.g. the outer
    /// surfaces of a plate-like cell); exempt from the coverage check.
    pub free_faces: Vec<Face>,
}

#[derive(Serialize, Deserialize)]
struct RawRelation {
    label: String,
    #[serde(rename = "T")]
    t: Vec<Vec<f64>>,
    offset: Vec<f64>,
    source: BTreeMap<String, Extent>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    dim: usize,
    bbox: Vec<[f64; 2]>,
    kind: CellKind,
    #[serde(default)]
    periodicity: Vec<Vec<f64>>,
    relations: Vec<RawRelation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    free_faces: Vec<String>,
}

fn point_from(dim: Dim, v: &[f64], what: &str) -> Result<Point, CellSpecError> {
    if v.len() != dim.n() {
        return Err(EquivalenceError::Shape {
            what: what.to_string(),
            expected: dim.n(),
            got: v.len(),
        }
        .into());
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EquivalenceError::NonFinite(what.to_string()).into());
    }
    let mut p = Point::zeros();
    for (i, x) in v.iter().enumerate() {
        p[i] = *x;
    }
    Ok(p)
}

pub(crate) fn point_vec(dim: Dim, p: &Point) -> Vec<f64> {
    (0..dim.n()).map(|i| p[i]).collect()
}

impl CellSpec {
    pub fn from_json_str(s: &str) -> Result<Self, CellSpecError> {
        let raw: RawSpec = serde_json::from_str(s)?;
        Self::from_raw(raw)
    }

    pub fn from_path(path: &Path) -> Result<Self, CellSpecError> {
        let s = std::fs::read_to_string(path).map_err(|source| CellSpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&s)
    }

    fn from_raw(raw: RawSpec) -> Result<Self, CellSpecError> {
        let dim = Dim::from_n(raw.dim)?;
        let n = dim.n();
        if raw.bbox.len() != n {
            return Err(CellSpecError::BBox(format!(
                "expected {n} [min,max] pairs, got {}",
                raw.bbox.len()
            )));
        }
        let mut lo = Point::zeros();
        let mut hi = Point::zeros();
        for (a, [l, h]) in raw.bbox.iter().enumerate() {
            if !(l.is_finite() && h.is_finite()) || h <= l {
                return Err(CellSpecError::BBox(format!(
                    "axis {} has non-positive extent [{l}, {h}]",
                    AXES[a]
                )));
            }
            lo[a] = *l;
            hi[a] = *h;
        }
        let bbox = BBox::new(dim, lo, hi);
        let periodicity = raw
            .periodicity
            .iter()
            .map(|v| point_from(dim, v, "periodicity vector"))
            .collect::<Result<Vec<_>, _>>()?;
        let mut relations = Vec::with_capacity(raw.relations.len());
        for r in raw.relations {
            let rel_err = |msg: String| CellSpecError::Relation {
                label: r.label.clone(),
                msg,
            };
            let transform =
                Transform::from_rows(dim, &r.t).map_err(|e| rel_err(e.to_string()))?;
            let offset = point_from(dim, &r.offset, "offset").map_err(|e| rel_err(e.to_string()))?;
            for key in r.source.keys() {
                if !AXES[..n].contains(&key.as_str()) {
                    return Err(rel_err(format!("unknown source axis {key:?}")));
                }
            }
            let extents = (0..n)
                .map(|a| {
                    let e = r
                        .source
                        .get(AXES[a])
                        .copied()
                        .unwrap_or(Extent::Interval([lo[a], hi[a]]));
                    if !(e.lo().is_finite() && e.hi().is_finite()) || e.hi() < e.lo() {
                        return Err(rel_err(format!("empty source range on {}", AXES[a])));
                    }
                    Ok(e)
                })
                .collect::<Result<Vec<_>, _>>()?;
            relations.push(EquivalenceRelation {
                label: r.label,
                transform,
                offset,
                source: BoundaryRegion::new(extents),
            });
        }
        let mut free_faces = raw
            .free_faces
            .iter()
            .map(|s| Face::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(f) = free_faces.iter().find(|f| f.axis >= n) {
            return Err(CellSpecError::Face(f.to_string()));
        }
        free_faces.sort();
        free_faces.dedup();
        Ok(CellSpec {
            dim,
            bbox,
            kind: raw.kind,
            periodicity,
            relations,
            free_faces,
        })
    }

    fn to_raw(&self) -> RawSpec {
        let n = self.dim.n();
        RawSpec {
            dim: n,
            bbox: (0..n).map(|a| [self.bbox.lo[a], self.bbox.hi[a]]).collect(),
            kind: self.kind,
            periodicity: self.periodicity.iter().map(|p| point_vec(self.dim, p)).collect(),
            relations: self
                .relations
                .iter()
                .map(|r| RawRelation {
                    label: r.label.clone(),
                    t: r.transform.rows(),
                    offset: point_vec(self.dim, &r.offset),
                    source: r
                        .source
                        .extents
                        .iter()
                        .enumerate()
                        .map(|(a, e)| (AXES[a].to_string(), *e))
                        .collect(),
                })
                .collect(),
            free_faces: self.free_faces.iter().map(|f| f.to_string()).collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("spec serialization cannot fail")
    }

    pub fn relation(&self, label: &str) -> Option<&EquivalenceRelation> {
        self.relations.iter().find(|r| r.label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.relations.iter().map(|r| r.label.clone()).collect()
    }

    /// Geometric tolerance used for coverage and consistency checks.
    pub fn geom_tol(&self) -> f64 {
        1e-9 * self.bbox.diagonal()
    }

    pub fn is_free(&self, p: &Point, tol: f64) -> bool {
        self.free_faces
            .iter()
            .any(|f| (p[f.axis] - self.bbox.face_coord(*f)).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WOVEN: &str = r#"{
        "dim": 3,
        "bbox": [[-1, 1], [-2, 2], [-0.5, 0.5]],
        "kind": "rUC",
        "relations": [
            {"label": "E1", "T": [[-1,0,0],[0,-1,0],[0,0,-1]], "offset": [2,-2,0], "source": {"x": 1, "y": [-2, 0]}}
        ],
        "free_faces": ["z-", "z+"]
    }"#;

    #[test]
    fn parse_fills_missing_axes() {
        let s = CellSpec::from_json_str(WOVEN).unwrap();
        assert_eq!(s.dim, Dim::Three);
        assert_eq!(s.kind, CellKind::RUC);
        let src = &s.relations[0].source;
        assert_eq!(src.extents[0], Extent::Fixed(1.0));
        assert_eq!(src.extents[2], Extent::Interval([-0.5, 0.5]));
        assert_eq!(s.free_faces.len(), 2);
    }

    #[test]
    fn json_round_trip() {
        let s = CellSpec::from_json_str(WOVEN).unwrap();
        let back = CellSpec::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn malformed_specs_rejected() {
        let bad_t = WOVEN.replace("[[-1,0,0],[0,-1,0],[0,0,-1]]", "[[-1,0],[0,-1]]");
        assert!(matches!(
            CellSpec::from_json_str(&bad_t),
            Err(CellSpecError::Relation { .. })
        ));
        let bad_box = WOVEN.replace("[-1, 1]", "[1, -1]");
        assert!(matches!(CellSpec::from_json_str(&bad_box), Err(CellSpecError::BBox(_))));
        let bad_face = WOVEN.replace("\"z-\"", "\"w-\"");
        assert!(matches!(CellSpec::from_json_str(&bad_face), Err(CellSpecError::Face(_))));
        let bad_axis = WOVEN.replace("\"x\": 1", "\"q\": 1");
        assert!(CellSpec::from_json_str(&bad_axis).is_err());
    }

    #[test]
    fn face_names() {
        assert_eq!(Face::parse("y+").unwrap(), Face { axis: 1, upper: true });
        assert_eq!(Face { axis: 2, upper: false }.to_string(), "z-");
        assert!(Face::parse("x").is_err());
    }
}
