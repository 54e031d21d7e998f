//! Voigt and Mandel vector forms of symmetric tensors.
//!
//! Component order is `(11, 22, 33, 23, 13, 12)` in 3D and `(11, 22, 12)` in
//! 2D. Strains use engineering shears (`γ12 = 2 ε12`), stresses do not.
//! Mandel vectors scale shears by `√2` in both cases, which makes the tensor
//! contraction the Euclidean dot product.

use nalgebra::DMatrix;

use crate::equivalence::{Dim, EquivalenceError, SymTensor, Transform};

const PAIRS_2D: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
const PAIRS_3D: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
const LABELS_2D: [&str; 3] = ["11", "22", "12"];
const LABELS_3D: [&str; 6] = ["11", "22", "33", "23", "13", "12"];

pub fn pairs(dim: Dim) -> &'static [(usize, usize)] {
    match dim {
        Dim::Two => &PAIRS_2D,
        Dim::Three => &PAIRS_3D,
    }
}

pub fn labels(dim: Dim) -> &'static [&'static str] {
    match dim {
        Dim::Two => &LABELS_2D,
        Dim::Three => &LABELS_3D,
    }
}

pub fn is_shear(dim: Dim, k: usize) -> bool {
    let (i, j) = pairs(dim)[k];
    i != j
}

pub(crate) fn check_len(dim: Dim, len: usize) -> Result<(), EquivalenceError> {
    if len != dim.voigt_len() {
        return Err(EquivalenceError::Shape {
            what: format!("{dim} Voigt vector"),
            expected: dim.voigt_len(),
            got: len,
        });
    }
    Ok(())
}

/// Engineering-strain Voigt vector to Mandel form.
pub fn strain_to_mandel(dim: Dim, v: &[f64]) -> Vec<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    v.iter()
        .enumerate()
        .map(|(k, x)| if is_shear(dim, k) { x * h } else { *x })
        .collect()
}

pub fn mandel_to_strain(dim: Dim, m: &[f64]) -> Vec<f64> {
    let s = std::f64::consts::SQRT_2;
    m.iter()
        .enumerate()
        .map(|(k, x)| if is_shear(dim, k) { x * s } else { *x })
        .collect()
}

pub fn stress_to_mandel(dim: Dim, v: &[f64]) -> Vec<f64> {
    mandel_to_strain(dim, v)
}

pub fn mandel_to_stress(dim: Dim, m: &[f64]) -> Vec<f64> {
    strain_to_mandel(dim, m)
}

/// Matrix of `ε ↦ T ε Tᵗ` acting on engineering-strain Voigt vectors.
pub fn strain_operator(t: &Transform) -> DMatrix<f64> {
    let dim = t.dim();
    let n = dim.voigt_len();
    let mut op = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = SymTensor::from_voigt_strain(dim, &e)
            .expect("unit vector has Voigt length")
            .rotated(t)
            .to_voigt_strain();
        for (i, v) in col.into_iter().enumerate() {
            op[(i, k)] = v;
        }
    }
    op
}

/// Matrix of `ε ↦ T ε Tᵗ` on Mandel vectors; orthogonal for orthogonal `T`.
pub fn mandel_operator(t: &Transform) -> DMatrix<f64> {
    let dim = t.dim();
    let n = dim.voigt_len();
    let mut op = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let strain = mandel_to_strain(dim, &e);
        let col = SymTensor::from_voigt_strain(dim, &strain)
            .expect("unit vector has Voigt length")
            .rotated(t)
            .to_voigt_strain();
        for (i, v) in strain_to_mandel(dim, &col).into_iter().enumerate() {
            op[(i, k)] = v;
        }
    }
    op
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_strain_and_stress() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = SymTensor::from_voigt_strain(Dim::Three, &v).unwrap();
        assert_eq!(t.get(0, 1), 3.0);
        assert_eq!(t.to_voigt_strain(), v.to_vec());
        let s = SymTensor::from_voigt_stress(Dim::Three, &v).unwrap();
        assert_eq!(s.get(0, 1), 6.0);
        assert_eq!(s.to_voigt_stress(), v.to_vec());
    }

    #[test]
    fn mandel_contraction_is_dot() {
        let e = [0.1, -0.2, 0.3];
        let s = [2.0, 1.0, -4.0];
        let et = SymTensor::from_voigt_strain(Dim::Two, &e).unwrap();
        let st = SymTensor::from_voigt_stress(Dim::Two, &s).unwrap();
        let dot: f64 = strain_to_mandel(Dim::Two, &e)
            .iter()
            .zip(stress_to_mandel(Dim::Two, &s))
            .map(|(a, b)| a * b)
            .sum();
        assert!((et.contract(&st) - dot).abs() < 1e-15);
        let voigt_dot: f64 = e.iter().zip(s).map(|(a, b)| a * b).sum();
        assert!((voigt_dot - dot).abs() < 1e-15);
    }

    #[test]
    fn mandel_operator_orthogonal() {
        let c = 0.6f64;
        let s = 0.8f64;
        let t = Transform::from_rows(
            Dim::Three,
            &[vec![c, -s, 0.0], vec![s, c, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let m = mandel_operator(&t);
        let err = (m.transpose() * &m - DMatrix::identity(6, 6)).amax();
        assert!(err < 1e-14);
    }

    #[test]
    fn strain_operator_of_mirror() {
        let t = Transform::diag(Dim::Two, &[-1.0, 1.0]);
        let op = strain_operator(&t);
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, -1.0]));
        assert_eq!(op, expected);
    }
}
