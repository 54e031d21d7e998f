use super::{BBox, CellKind, CellSpec, CellSpecError, Face};
use crate::equivalence::{BoundaryRegion, EquivalenceRelation, Extent, Point, Transform};

/// Builds the classical periodic spec (all `T = I`) of a box cell.
///
/// Each periodicity vector is attached to the axis along which it spans the
/// box. A vector with a shift along another axis (offset-reduced cells) is
/// split into patches so that every image stays on the opposite facet; the
/// vector of that other axis must then be axis-aligned.
pub fn classical_uc_spec(bbox: BBox, periodicity: &[Point]) -> Result<CellSpec, CellSpecError> {
    let dim = bbox.dim;
    let n = dim.n();
    let tol = 1e-9 * bbox.diagonal();
    if periodicity.len() != n {
        return Err(CellSpecError::UnsupportedLattice(format!(
            "{} periodicity vectors given for a {dim} cell",
            periodicity.len()
        )));
    }
    let mut m = nalgebra::Matrix3::identity();
    for (k, d) in periodicity.iter().enumerate() {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(CellSpecError::Degenerate);
        }
        for a in 0..n {
            m[(a, k)] = d[a];
        }
    }
    let scale: f64 = periodicity.iter().take(n).map(|d| d.norm()).product();
    if scale == 0.0 || m.determinant().abs() <= 1e-12 * scale {
        return Err(CellSpecError::Degenerate);
    }

    // axis -> index of the vector spanning it
    let mut owner = vec![None; n];
    for (k, d) in periodicity.iter().enumerate() {
        let hits: Vec<usize> = (0..n)
            .filter(|&a| (d[a].abs() - bbox.extent(a)).abs() <= tol)
            .collect();
        let axis = hits
            .into_iter()
            .find(|&a| owner[a].is_none())
            .ok_or_else(|| {
                CellSpecError::UnsupportedLattice(format!(
                    "vector {k} does not span the box along any free axis"
                ))
            })?;
        owner[axis] = Some(k);
    }
    let owner: Vec<usize> = owner.into_iter().map(|o| o.expect("all axes assigned")).collect();
    let aligned = |k: usize| {
        let d = &periodicity[k];
        (0..n).filter(|&a| d[a].abs() > tol).count() == 1
    };

    let mut relations = Vec::new();
    for (axis, &k) in owner.iter().enumerate() {
        let d = periodicity[k];
        let upper = d[axis] > 0.0;
        let face_coord = bbox.face_coord(Face { axis, upper });
        // per transverse axis: list of (source interval, offset component)
        let mut splits: Vec<Vec<(Extent, f64)>> = Vec::with_capacity(n);
        for b in 0..n {
            if b == axis {
                splits.push(vec![(Extent::Fixed(face_coord), d[axis])]);
                continue;
            }
            let ext = bbox.extent(b);
            let (lo, hi) = (bbox.lo[b], bbox.hi[b]);
            let mut r = d[b].rem_euclid(ext);
            if r > ext - tol {
                r = 0.0;
            }
            if r <= tol {
                splits.push(vec![(Extent::Interval([lo, hi]), 0.0)]);
                continue;
            }
            if !aligned(owner[b]) {
                return Err(CellSpecError::UnsupportedLattice(format!(
                    "vector {k} shifts along axis {b}, whose own vector is not axis-aligned"
                )));
            }
            splits.push(vec![
                (Extent::Interval([lo + r, hi]), r),
                (Extent::Interval([lo, lo + r]), r - ext),
            ]);
        }
        let mut combos: Vec<(Vec<Extent>, Point)> = vec![(Vec::new(), Point::zeros())];
        for (b, opts) in splits.iter().enumerate() {
            combos = combos
                .into_iter()
                .flat_map(|(ext, off)| {
                    opts.iter().map(move |(e, o)| {
                        let mut ext = ext.clone();
                        ext.push(*e);
                        let mut off = off;
                        off[b] = *o;
                        (ext, off)
                    })
                })
                .collect();
        }
        let multi = combos.len() > 1;
        for (i, (extents, offset)) in combos.into_iter().enumerate() {
            let label = if multi {
                format!("P{}{}", axis + 1, (b'a' + i as u8) as char)
            } else {
                format!("P{}", axis + 1)
            };
            relations.push(EquivalenceRelation {
                label,
                transform: Transform::identity(dim),
                offset,
                source: BoundaryRegion::new(extents),
            });
        }
    }
    let kind = if (0..n).all(aligned) {
        CellKind::UC
    } else {
        CellKind::OrUC
    };
    Ok(CellSpec {
        dim,
        bbox,
        kind,
        periodicity: periodicity.to_vec(),
        relations,
        free_faces: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellspec::validate;
    use crate::equivalence::Dim;

    fn square(w: f64, l: f64) -> BBox {
        BBox::new(
            Dim::Two,
            Point::new(-w / 2.0, -l / 2.0, 0.0),
            Point::new(w / 2.0, l / 2.0, 0.0),
        )
    }

    #[test]
    fn square_gives_two_relations() {
        let s = classical_uc_spec(
            square(2.0, 3.0),
            &[Point::new(2.0, 0.0, 0.0), Point::new(0.0, 3.0, 0.0)],
        )
        .unwrap();
        assert_eq!(s.relations.len(), 2);
        assert_eq!(s.kind, CellKind::UC);
        assert_eq!(s.relations[0].offset, Point::new(2.0, 0.0, 0.0));
        assert!(validate(&s).is_valid(), "{:?}", validate(&s).messages());
    }

    #[test]
    fn box_gives_three_relations() {
        let b = BBox::new(Dim::Three, Point::new(0.0, 0.0, 0.0), Point::new(1.0, 2.0, 3.0));
        let s = classical_uc_spec(
            b,
            &[
                Point::new(0.0, 0.0, 3.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, -2.0, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(s.relations.len(), 3);
        assert_eq!(s.kind, CellKind::UC);
        assert!(validate(&s).is_valid(), "{:?}", validate(&s).messages());
    }

    #[test]
    fn offset_reduced_square() {
        let (w, l) = (2.0, 2.0);
        let s = classical_uc_spec(
            square(w, l),
            &[Point::new(w, 0.0, 0.0), Point::new(w / 2.0, l, 0.0)],
        )
        .unwrap();
        assert_eq!(s.kind, CellKind::OrUC);
        assert!(s.relations.iter().all(|r| r.transform.is_identity(0.0)));
        let report = validate(&s);
        assert!(report.is_valid(), "{:?}", report.messages());
    }

    #[test]
    fn degenerate_vectors() {
        let err = classical_uc_spec(
            square(1.0, 1.0),
            &[Point::new(1.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0)],
        );
        assert!(matches!(err, Err(CellSpecError::Degenerate)));
        let err = classical_uc_spec(square(1.0, 1.0), &[Point::new(1.0, 0.0, 0.0)]);
        assert!(matches!(err, Err(CellSpecError::UnsupportedLattice(_))));
        let err = classical_uc_spec(
            square(1.0, 1.0),
            &[Point::new(0.5, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)],
        );
        assert!(matches!(err, Err(CellSpecError::UnsupportedLattice(_))));
    }
}
