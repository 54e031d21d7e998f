//! Small-tensor algebra for equivalence relations between sub-domains.
//!
//! Every relation is stored in the frame of the analysed cell `E`: an
//! orthogonal transform `T` and the origin `o` of the equivalent sub-domain's
//! frame. A point `x̂` of the equivalent sub-domain that lies on the cell
//! boundary has its partner at `x = T (x̂ − o)`.
//!
//! Two-dimensional quantities are embedded in 3×3 storage: the third row and
//! column of a 2D transform are those of the identity and 2D points carry a
//! zero third coordinate. All comparisons only look at the active block.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::voigt;

/// Point or vector in the cell frame (third coordinate zero in 2D).
pub type Point = Vector3<f64>;

/// Orthogonality tolerance on `‖TᵗT − I‖∞`.
pub const ORTHO_TOL: f64 = 1e-12;

/// Symmetry tolerance of a [`SymTensor`].
pub const SYM_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquivalenceError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("{what}: expected {expected} entries, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("tensor is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Spatial dimension of an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Number of independent components of a symmetric tensor.
    pub fn voigt_len(self) -> usize {
        match self {
            Dim::Two => 3,
            Dim::Three => 6,
        }
    }

    pub fn from_n(n: usize) -> Result<Self, EquivalenceError> {
        match n {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            other => Err(EquivalenceError::BadDimension(other)),
        }
    }
}

impl TryFrom<usize> for Dim {
    type Error = EquivalenceError;
    fn try_from(n: usize) -> Result<Self, Self::Error> {
        Dim::from_n(n)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.n()
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D", self.n())
    }
}

/// Load reversal factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Gamma {
    Plus,
    Minus,
}

impl Gamma {
    pub fn value(self) -> f64 {
        match self {
            Gamma::Plus => 1.0,
            Gamma::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Gamma::Plus => Gamma::Minus,
            Gamma::Minus => Gamma::Plus,
        }
    }

    /// Product of two factors.
    pub fn times(self, other: Gamma) -> Gamma {
        if self == other {
            Gamma::Plus
        } else {
            Gamma::Minus
        }
    }

    pub fn product<I: IntoIterator<Item = Gamma>>(it: I) -> Gamma {
        it.into_iter().fold(Gamma::Plus, Gamma::times)
    }
}

impl TryFrom<i8> for Gamma {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Gamma::Plus),
            -1 => Ok(Gamma::Minus),
            other => Err(format!("load reversal factor must be 1 or -1, got {other}")),
        }
    }
}

impl From<Gamma> for i8 {
    fn from(g: Gamma) -> i8 {
        match g {
            Gamma::Plus => 1,
            Gamma::Minus => -1,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", i8::from(*self))
    }
}

fn block_inf_norm(m: &Matrix3<f64>, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max(m[(i, j)].abs());
        }
    }
    worst
}

/// Orthogonal transformation between two local frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    dim: Dim,
    m: Matrix3<f64>,
}

impl Transform {
    pub fn identity(dim: Dim) -> Self {
        Transform {
            dim,
            m: Matrix3::identity(),
        }
    }

    /// Builds a transform from a d×d row-major array.
    pub fn from_rows(dim: Dim, rows: &[Vec<f64>]) -> Result<Self, EquivalenceError> {
        let n = dim.n();
        if rows.len() != n {
            return Err(EquivalenceError::Shape {
                what: "transform rows".into(),
                expected: n,
                got: rows.len(),
            });
        }
        let mut m = Matrix3::identity();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(EquivalenceError::Shape {
                    what: format!("transform row {i}"),
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(EquivalenceError::NonFinite("transform".into()));
                }
                m[(i, j)] = *v;
            }
        }
        Ok(Transform { dim, m })
    }

    /// Diagonal transform, e.g. `diag(-1, 1)` for a mirror across a vertical line.
    pub fn diag(dim: Dim, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), dim.n(), "diagonal length must match dimension");
        let mut m = Matrix3::identity();
        for (i, v) in entries.iter().enumerate() {
            m[(i, i)] = *v;
        }
        Transform { dim, m }
    }

    /// Wraps a 3×3 matrix; for 2D only the leading 2×2 block is used.
    pub fn from_matrix(dim: Dim, m: Matrix3<f64>) -> Self {
        let mut m = m;
        if dim == Dim::Two {
            m[(0, 2)] = 0.0;
            m[(1, 2)] = 0.0;
            m[(2, 0)] = 0.0;
            m[(2, 1)] = 0.0;
            m[(2, 2)] = 1.0;
        }
        Transform { dim, m }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim.n();
        (0..n).map(|i| (0..n).map(|j| self.m[(i, j)]).collect()).collect()
    }

    pub fn transpose(&self) -> Self {
        Transform {
            dim: self.dim,
            m: self.m.transpose(),
        }
    }

    /// `self · other`
    pub fn compose(&self, other: &Transform) -> Self {
        Transform {
            dim: self.dim,
            m: self.m * other.m,
        }
    }

    pub fn apply(&self, v: &Point) -> Point {
        self.m * v
    }

    /// `‖TᵗT − I‖∞` over the active block.
    pub fn orthogonality_residual(&self) -> f64 {
        let r = self.m.transpose() * self.m - Matrix3::identity();
        block_inf_norm(&r, self.dim.n())
    }

    pub fn det(&self) -> f64 {
        // the embedded (3,3) entry is 1 in 2D, so the full determinant is the block one
        self.m.determinant()
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        self.orthogonality_residual() <= tol && (self.det().abs() - 1.0).abs() <= tol
    }

    pub fn is_proper(&self) -> bool {
        self.det() > 0.0
    }

    pub fn distance(&self, other: &Transform) -> f64 {
        block_inf_norm(&(self.m - other.m), self.dim.n())
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance(&Transform::identity(self.dim)) <= tol
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows()
            .iter()
            .map(|r| {
                let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        write!(f, "[{}]", rows.join(", "))
    }
}

/// Affine point map `x ↦ T x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub linear: Transform,
    pub shift: Point,
}

impl AffineMap {
    pub fn identity(dim: Dim) -> Self {
        AffineMap {
            linear: Transform::identity(dim),
            shift: Point::zeros(),
        }
    }

    pub fn apply(&self, x: &Point) -> Point {
        self.linear.apply(x) + self.shift
    }

    /// `self ∘ inner`
    pub fn after(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: self.linear.compose(&inner.linear),
            shift: self.linear.apply(&inner.shift) + self.shift,
        }
    }

    /// Inverse of an orthogonal affine map.
    pub fn inverse(&self) -> AffineMap {
        let lt = self.linear.transpose();
        AffineMap {
            linear: lt,
            shift: -lt.apply(&self.shift),
        }
    }

    pub fn is_identity(&self, lin_tol: f64, shift_tol: f64) -> bool {
        self.linear.is_identity(lin_tol) && self.shift.amax() <= shift_tol
    }

    /// Origin `o` such that the map reads `x ↦ T (x − o)`.
    pub fn origin(&self) -> Point {
        -self.linear.transpose().apply(&self.shift)
    }
}

/// One coordinate range of a [`BoundaryRegion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Extent {
    Fixed(f64),
    Interval([f64; 2]),
}

impl Extent {
    pub fn lo(&self) -> f64 {
        match self {
            Extent::Fixed(v) => *v,
            Extent::Interval([lo, _]) => *lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match self {
            Extent::Fixed(v) => *v,
            Extent::Interval([_, hi]) => *hi,
        }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo() - tol && v <= self.hi() + tol
    }

    pub fn is_degenerate(&self, tol: f64) -> bool {
        (self.hi() - self.lo()).abs() <= tol
    }
}

/// Axis-aligned face patch of the cell boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRegion {
    pub extents: Vec<Extent>,
}

impl BoundaryRegion {
    pub fn new(extents: Vec<Extent>) -> Self {
        BoundaryRegion { extents }
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.extents
            .iter()
            .enumerate()
            .all(|(i, e)| e.contains(p[i], tol))
    }

    pub fn is_empty(&self) -> bool {
        self.extents.iter().any(|e| e.hi() < e.lo())
    }

    /// The axis along which the patch is flat, if any.
    pub fn normal_axis(&self, tol: f64) -> Option<usize> {
        self.extents.iter().position(|e| e.is_degenerate(tol))
    }
}

/// Relation linking an adjacent, physically equivalent sub-domain to the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRelation {
    pub label: String,
    pub transform: Transform,
    /// Origin of the equivalent sub-domain's frame, in the cell frame.
    pub offset: Point,
    /// Boundary patch holding the points `x̂` this relation pairs.
    pub source: BoundaryRegion,
}

impl EquivalenceRelation {
    pub fn dim(&self) -> Dim {
        self.transform.dim()
    }

    /// `x = T (x̂ − o)`
    pub fn map_point(&self, x_hat: &Point) -> Point {
        self.transform.apply(&(x_hat - self.offset))
    }

    /// `x̂ = Tᵗ x + o`
    pub fn inverse_map(&self, x: &Point) -> Point {
        self.transform.transpose().apply(x) + self.offset
    }

    /// The point map in `x ↦ T x + b` form (`b = −T o`).
    pub fn affine(&self) -> AffineMap {
        AffineMap {
            linear: self.transform,
            shift: -self.transform.apply(&self.offset),
        }
    }

    /// `γ T ε̂ Tᵗ`
    pub fn transform_strain(&self, gamma: Gamma, eps_hat: &SymTensor) -> SymTensor {
        eps_hat.rotated(&self.transform).scaled(gamma.value())
    }

    /// `γ T û`
    pub fn transform_displacement(&self, gamma: Gamma, u_hat: &Point) -> Point {
        self.transform.apply(u_hat) * gamma.value()
    }
}

/// Symmetric second-order tensor (strain or stress).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor {
    dim: Dim,
    m: Matrix3<f64>,
}

impl SymTensor {
    pub fn zero(dim: Dim) -> Self {
        SymTensor {
            dim,
            m: Matrix3::zeros(),
        }
    }

    /// Accepts a matrix symmetric to [`SYM_TOL`]; the stored value is the symmetric part.
    pub fn from_matrix(dim: Dim, m: Matrix3<f64>) -> Result<Self, EquivalenceError> {
        let n = dim.n();
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > SYM_TOL {
            return Err(EquivalenceError::NotSymmetric(asym));
        }
        Ok(Self::symmetric_part(dim, &m))
    }

    /// `(m + mᵗ)/2`, restricted to the active block.
    pub fn symmetric_part(dim: Dim, m: &Matrix3<f64>) -> Self {
        let mut s = (m + m.transpose()) * 0.5;
        if dim == Dim::Two {
            for k in 0..3 {
                s[(2, k)] = 0.0;
                s[(k, 2)] = 0.0;
            }
        }
        SymTensor { dim, m: s }
    }

    /// From a Voigt strain vector with engineering shears.
    pub fn from_voigt_strain(dim: Dim, v: &[f64]) -> Result<Self, EquivalenceError> {
        voigt::check_len(dim, v.len())?;
        let mut m = Matrix3::zeros();
        for (k, &(i, j)) in voigt::pairs(dim).iter().enumerate() {
            let val = if i == j { v[k] } else { 0.5 * v[k] };
            m[(i, j)] = val;
            m[(j, i)] = val;
        }
        Ok(SymTensor { dim, m })
    }

    /// From a Voigt stress vector (no shear factor).
    pub fn from_voigt_stress(dim: Dim, v: &[f64]) -> Result<Self, EquivalenceError> {
        voigt::check_len(dim, v.len())?;
        let mut m = Matrix3::zeros();
        for (k, &(i, j)) in voigt::pairs(dim).iter().enumerate() {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
        }
        Ok(SymTensor { dim, m })
    }

    pub fn to_voigt_strain(&self) -> Vec<f64> {
        voigt::pairs(self.dim)
            .iter()
            .map(|&(i, j)| if i == j { self.m[(i, j)] } else { 2.0 * self.m[(i, j)] })
            .collect()
    }

    pub fn to_voigt_stress(&self) -> Vec<f64> {
        voigt::pairs(self.dim).iter().map(|&(i, j)| self.m[(i, j)]).collect()
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// `T · self · Tᵗ`
    pub fn rotated(&self, t: &Transform) -> Self {
        Self::symmetric_part(self.dim, &(t.matrix() * self.m * t.matrix().transpose()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        SymTensor {
            dim: self.dim,
            m: self.m * a,
        }
    }

    pub fn add(&self, other: &SymTensor) -> Self {
        SymTensor {
            dim: self.dim,
            m: self.m + other.m,
        }
    }

    pub fn sub(&self, other: &SymTensor) -> Self {
        SymTensor {
            dim: self.dim,
            m: self.m - other.m,
        }
    }

    /// Max-abs entry.
    pub fn norm_inf(&self) -> f64 {
        block_inf_norm(&self.m, self.dim.n())
    }

    /// `A : B`
    pub fn contract(&self, other: &SymTensor) -> f64 {
        self.m.component_mul(&other.m).sum()
    }

    /// `self · x`
    pub fn apply(&self, x: &Point) -> Point {
        self.m * x
    }
}
