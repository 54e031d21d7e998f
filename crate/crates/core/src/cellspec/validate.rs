use std::collections::HashSet;

use serde::Serialize;

use super::{point_vec, BBox, CellKind, CellSpec, Face};
use crate::equivalence::{BoundaryRegion, EquivalenceRelation, Point, ORTHO_TOL};
use crate::mesh::Mesh;

/// Sample points per facet edge for the coverage and consistency checks.
pub const DEFAULT_SAMPLES: usize = 17;

const MAX_RELATED_VISITS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityFailure {
    pub label: String,
    pub residual: f64,
    pub det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncoveredFacet {
    pub facet: String,
    pub uncovered_samples: usize,
    pub total_samples: usize,
    pub example: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inconsistency {
    pub first: String,
    pub second: String,
    pub point: Vec<f64>,
    pub image_first: Vec<f64>,
    pub image_second: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindViolation {
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffBoundary {
    pub label: String,
    pub point: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub orthogonality_failures: Vec<OrthogonalityFailure>,
    /// Labels of reflections (det T = -1); informational only.
    pub improper_transforms: Vec<String>,
    pub duplicate_labels: Vec<String>,
    pub source_off_boundary: Vec<String>,
    pub uncovered_facets: Vec<UncoveredFacet>,
    pub uncovered_nodes: Vec<usize>,
    pub inconsistencies: Vec<Inconsistency>,
    pub image_off_boundary: Vec<OffBoundary>,
    pub kind_violations: Vec<KindViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.orthogonality_failures.is_empty()
            && self.duplicate_labels.is_empty()
            && self.source_off_boundary.is_empty()
            && self.uncovered_facets.is_empty()
            && self.uncovered_nodes.is_empty()
            && self.inconsistencies.is_empty()
            && self.image_off_boundary.is_empty()
            && self.kind_violations.is_empty()
    }

    /// One human-readable line per failure.
    pub fn messages(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.orthogonality_failures {
            out.push(format!(
                "relation {}: transform not orthogonal (residual {:.3e}, det {})",
                f.label, f.residual, f.det
            ));
        }
        for l in &self.duplicate_labels {
            out.push(format!("relation label {l} used more than once"));
        }
        for l in &self.source_off_boundary {
            out.push(format!("relation {l}: source region is not a patch of the cell boundary"));
        }
        for u in &self.uncovered_facets {
            out.push(format!(
                "facet {} not covered by any relation ({} of {} samples, e.g. {:?})",
                u.facet, u.uncovered_samples, u.total_samples, u.example
            ));
        }
        if !self.uncovered_nodes.is_empty() {
            out.push(format!(
                "{} mesh boundary node(s) not covered by any relation, first {}",
                self.uncovered_nodes.len(),
                self.uncovered_nodes[0]
            ));
        }
        for c in &self.inconsistencies {
            out.push(format!(
                "relations {} and {} disagree at {:?}: images {:?} vs {:?} ({:.3e} apart)",
                c.first, c.second, c.point, c.image_first, c.image_second, c.distance
            ));
        }
        for o in &self.image_off_boundary {
            out.push(format!(
                "relation {} maps {:?} to a point {:.3e} off the cell boundary",
                o.label, o.point, o.distance
            ));
        }
        for k in &self.kind_violations {
            out.push(format!("relation {}: {}", k.label, k.reason));
        }
        out
    }
}

/// Evenly spaced samples of a region (degenerate axes contribute one value).
pub(crate) fn sample_region(region: &BoundaryRegion, per_axis: usize) -> Vec<Point> {
    let per_axis = per_axis.max(2);
    let mut pts = vec![Point::zeros()];
    for (a, e) in region.extents.iter().enumerate() {
        let values: Vec<f64> = if e.hi() > e.lo() {
            (0..per_axis)
                .map(|k| e.lo() + (e.hi() - e.lo()) * k as f64 / (per_axis - 1) as f64)
                .collect()
        } else {
            vec![e.lo()]
        };
        pts = pts
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p;
                    q[a] = *v;
                    q
                })
            })
            .collect();
    }
    pts
}

fn intersect(a: &BoundaryRegion, b: &BoundaryRegion, tol: f64) -> Option<BoundaryRegion> {
    let mut extents = Vec::with_capacity(a.extents.len());
    for (ea, eb) in a.extents.iter().zip(&b.extents) {
        let lo = ea.lo().max(eb.lo());
        let hi = ea.hi().min(eb.hi());
        if hi < lo - tol {
            return None;
        }
        extents.push(if hi - lo <= tol {
            crate::equivalence::Extent::Fixed(0.5 * (lo + hi))
        } else {
            crate::equivalence::Extent::Interval([lo, hi])
        });
    }
    Some(BoundaryRegion::new(extents))
}

/// Distance from `p` to the box surface (0 when on it).
pub(crate) fn boundary_distance(bbox: &BBox, p: &Point) -> f64 {
    let n = bbox.dim.n();
    let mut outside = 0.0f64;
    let mut inside = f64::INFINITY;
    for a in 0..n {
        outside = outside.max(bbox.lo[a] - p[a]).max(p[a] - bbox.hi[a]);
        inside = inside.min((p[a] - bbox.lo[a]).abs()).min((p[a] - bbox.hi[a]).abs());
    }
    if outside > 0.0 {
        outside
    } else {
        inside
    }
}

/// True if `p` is a source point or an image point of some relation.
pub(crate) fn is_covered(spec: &CellSpec, p: &Point, tol: f64) -> bool {
    spec.relations
        .iter()
        .any(|r| r.source.contains(p, tol) || r.source.contains(&r.inverse_map(p), tol))
}

fn neighbours(rels: &[EquivalenceRelation], q: &Point, tol: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for r in rels {
        if r.source.contains(q, tol) {
            out.push(r.map_point(q));
        }
        let pre = r.inverse_map(q);
        if r.source.contains(&pre, tol) {
            out.push(pre);
        }
    }
    out
}

/// Whether `a` reaches `b` through a sequence of relation moves.
fn related(rels: &[EquivalenceRelation], a: &Point, b: &Point, tol: f64) -> bool {
    let mut seen: Vec<Point> = vec![*a];
    let mut frontier = vec![*a];
    while let Some(q) = frontier.pop() {
        if (q - b).amax() <= tol {
            return true;
        }
        for nb in neighbours(rels, &q, tol) {
            if seen.iter().all(|s| (s - nb).amax() > tol) {
                if seen.len() >= MAX_RELATED_VISITS {
                    return false;
                }
                seen.push(nb);
                frontier.push(nb);
            }
        }
    }
    false
}

fn check_kind(spec: &CellSpec, tol: f64, report: &mut ValidationReport) {
    let lin_tol = 1e-12;
    for r in &spec.relations {
        match spec.kind {
            CellKind::RUC => {}
            CellKind::OrUC | CellKind::UC => {
                if !r.transform.is_identity(lin_tol) {
                    report.kind_violations.push(KindViolation {
                        label: r.label.clone(),
                        reason: format!("{} cells require T = I", spec.kind),
                    });
                    continue;
                }
                if spec.kind == CellKind::UC {
                    let matches = spec
                        .periodicity
                        .iter()
                        .any(|d| (r.offset - d).amax() <= tol || (r.offset + d).amax() <= tol);
                    if !matches {
                        report.kind_violations.push(KindViolation {
                            label: r.label.clone(),
                            reason: "UC offsets must equal a periodicity vector up to sign"
                                .to_string(),
                        });
                    }
                }
            }
        }
    }
}

fn check_source_on_boundary(spec: &CellSpec, tol: f64) -> Vec<String> {
    spec.relations
        .iter()
        .filter(|r| {
            let on_face = r.source.extents.iter().enumerate().any(|(a, e)| {
                e.is_degenerate(tol)
                    && ((e.lo() - spec.bbox.lo[a]).abs() <= tol
                        || (e.lo() - spec.bbox.hi[a]).abs() <= tol)
            });
            let inside = r.source.extents.iter().enumerate().all(|(a, e)| {
                e.lo() >= spec.bbox.lo[a] - tol && e.hi() <= spec.bbox.hi[a] + tol
            });
            !(on_face && inside)
        })
        .map(|r| r.label.clone())
        .collect()
}

fn check_coverage(spec: &CellSpec, samples: usize, tol: f64) -> Vec<UncoveredFacet> {
    let mut out = Vec::new();
    for face in spec.bbox.faces() {
        if spec.free_faces.contains(&face) {
            continue;
        }
        let pts = sample_region(&spec.bbox.face_region(face), samples);
        let total = pts.len();
        let missing: Vec<&Point> = pts
            .iter()
            .filter(|p| !spec.is_free(p, tol) && !is_covered(spec, p, tol))
            .collect();
        if let Some(first) = missing.first() {
            out.push(UncoveredFacet {
                facet: face_name(face),
                uncovered_samples: missing.len(),
                total_samples: total,
                example: point_vec(spec.dim, first),
            });
        }
    }
    out
}

fn face_name(face: Face) -> String {
    face.to_string()
}

fn check_consistency(spec: &CellSpec, samples: usize, tol: f64) -> Vec<Inconsistency> {
    let rels = &spec.relations;
    let mut out = Vec::new();
    for i in 0..rels.len() {
        for j in (i + 1)..rels.len() {
            let Some(shared) = intersect(&rels[i].source, &rels[j].source, tol) else {
                continue;
            };
            let mut worst: Option<Inconsistency> = None;
            for p in sample_region(&shared, samples) {
                let a = rels[i].map_point(&p);
                let b = rels[j].map_point(&p);
                let d = (a - b).norm();
                if d <= tol || related(rels, &a, &b, tol) {
                    continue;
                }
                if worst.as_ref().is_none_or(|w| d > w.distance) {
                    worst = Some(Inconsistency {
                        first: rels[i].label.clone(),
                        second: rels[j].label.clone(),
                        point: point_vec(spec.dim, &p),
                        image_first: point_vec(spec.dim, &a),
                        image_second: point_vec(spec.dim, &b),
                        distance: d,
                    });
                }
            }
            out.extend(worst);
        }
    }
    out
}

fn check_images(spec: &CellSpec, samples: usize, tol: f64) -> Vec<OffBoundary> {
    let mut out = Vec::new();
    for r in &spec.relations {
        let worst = sample_region(&r.source, samples)
            .into_iter()
            .map(|p| (p, boundary_distance(&spec.bbox, &r.map_point(&p))))
            .filter(|(_, d)| *d > tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((p, d)) = worst {
            out.push(OffBoundary {
                label: r.label.clone(),
                point: point_vec(spec.dim, &p),
                distance: d,
            });
        }
    }
    out
}

/// Checks orthogonality, boundary coverage, pairwise consistency and kind rules.
pub fn validate(spec: &CellSpec) -> ValidationReport {
    validate_impl(spec, None, DEFAULT_SAMPLES)
}

/// As [`validate`], additionally requiring every boundary node of `mesh` to be covered.
pub fn validate_with_mesh(spec: &CellSpec, mesh: &Mesh) -> ValidationReport {
    validate_impl(spec, Some(mesh), DEFAULT_SAMPLES)
}

fn validate_impl(spec: &CellSpec, mesh: Option<&Mesh>, samples: usize) -> ValidationReport {
    let tol = spec.geom_tol();
    let mut report = ValidationReport::default();
    let mut labels = HashSet::new();
    for r in &spec.relations {
        if !labels.insert(r.label.as_str()) && !report.duplicate_labels.contains(&r.label) {
            report.duplicate_labels.push(r.label.clone());
        }
        let residual = r.transform.orthogonality_residual();
        let det = r.transform.det();
        if residual > ORTHO_TOL || (det.abs() - 1.0).abs() > ORTHO_TOL {
            report.orthogonality_failures.push(OrthogonalityFailure {
                label: r.label.clone(),
                residual,
                det,
            });
        } else if det < 0.0 {
            report.improper_transforms.push(r.label.clone());
        }
    }
    report.source_off_boundary = check_source_on_boundary(spec, tol);
    report.uncovered_facets = check_coverage(spec, samples, tol);
    report.inconsistencies = check_consistency(spec, samples, tol);
    report.image_off_boundary = check_images(spec, samples, tol);
    check_kind(spec, tol, &mut report);
    if let Some(mesh) = mesh {
        let mtol = 1e-8 * spec.bbox.diagonal();
        report.uncovered_nodes = mesh
            .boundary_nodes(&spec.bbox, mtol)
            .into_iter()
            .filter(|&n| {
                let p = mesh.nodes[n];
                !spec.is_free(&p, mtol) && !is_covered(spec, &p, mtol)
            })
            .collect();
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::{Dim, Extent, Transform};

    fn box2() -> BBox {
        BBox::new(Dim::Two, Point::new(-1.0, -1.0, 0.0), Point::new(1.0, 1.0, 0.0))
    }

    #[test]
    fn sample_counts() {
        let r = box2().face_region(Face { axis: 0, upper: true });
        assert_eq!(sample_region(&r, 17).len(), 17);
        let r3 = BoundaryRegion::new(vec![
            Extent::Fixed(0.0),
            Extent::Interval([0.0, 1.0]),
            Extent::Interval([0.0, 1.0]),
        ]);
        assert_eq!(sample_region(&r3, 17).len(), 289);
    }

    #[test]
    fn boundary_distance_cases() {
        let b = box2();
        assert_eq!(boundary_distance(&b, &Point::new(1.0, 0.3, 0.0)), 0.0);
        assert!((boundary_distance(&b, &Point::new(0.5, 0.0, 0.0)) - 0.5).abs() < 1e-15);
        assert!((boundary_distance(&b, &Point::new(1.25, 0.0, 0.0)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn related_through_chain() {
        let rel = EquivalenceRelation {
            label: "P".into(),
            transform: Transform::identity(Dim::Two),
            offset: Point::new(2.0, 0.0, 0.0),
            source: box2().face_region(Face { axis: 0, upper: true }),
        };
        let a = Point::new(1.0, 0.5, 0.0);
        let b = Point::new(-1.0, 0.5, 0.0);
        assert!(related(std::slice::from_ref(&rel), &a, &b, 1e-12));
        assert!(!related(&[rel], &a, &Point::new(-1.0, 0.4, 0.0), 1e-12));
    }
}
