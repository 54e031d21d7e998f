use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalence::Dim;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("invalid material JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("material {tag}: {msg}")]
    Invalid { tag: u32, msg: String },
    #[error("material tag {0} defined twice")]
    Duplicate(u32),
    #[error("no material defined for tag {0}")]
    Missing(u32),
}

/// 2D kinematic assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneMode {
    #[default]
    Strain,
    Stress,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Material {
    Isotropic { e: f64, nu: f64 },
    /// Full stiffness in Voigt form (engineering shear strains).
    Anisotropic(DMatrix<f64>),
}

impl Material {
    /// Voigt stiffness for the given dimension; 2D isotropic honours `mode`.
    pub fn stiffness(&self, tag: u32, dim: Dim, mode: PlaneMode) -> Result<DMatrix<f64>, MaterialError> {
        let bad = |msg: String| MaterialError::Invalid { tag, msg };
        let c = match self {
            Material::Isotropic { e, nu } => {
                let (e, nu) = (*e, *nu);
                if !(e > 0.0 && e.is_finite()) {
                    return Err(bad(format!("Young's modulus must be positive, got {e}")));
                }
                if !(nu > -1.0 && nu < 0.5) {
                    return Err(bad(format!("Poisson ratio must lie in (-1, 0.5), got {nu}")));
                }
                isotropic(dim, mode, e, nu)
            }
            Material::Anisotropic(c) => {
                let m = dim.voigt_len();
                if c.nrows() != m || c.ncols() != m {
                    return Err(bad(format!(
                        "stiffness must be {m}x{m} for a {dim} analysis, got {}x{}",
                        c.nrows(),
                        c.ncols()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(bad("stiffness has non-finite entries".into()));
                }
                let asym = (c - c.transpose()).amax();
                if asym > 1e-12 * c.amax() {
                    return Err(bad(format!("stiffness is not symmetric (asymmetry {asym:e})")));
                }
                c.clone()
            }
        };
        if c.clone().cholesky().is_none() {
            return Err(bad("stiffness is not positive definite".into()));
        }
        Ok(c)
    }
}

fn isotropic(dim: Dim, mode: PlaneMode, e: f64, nu: f64) -> DMatrix<f64> {
    let mu = e / (2.0 * (1.0 + nu));
    match (dim, mode) {
        (Dim::Two, PlaneMode::Stress) => {
            let f = e / (1.0 - nu * nu);
            DMatrix::from_row_slice(3, 3, &[f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, mu])
        }
        _ => {
            let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
            let m = dim.voigt_len();
            let nn = dim.n();
            let mut c = DMatrix::zeros(m, m);
            for i in 0..nn {
                for j in 0..nn {
                    c[(i, j)] = lam;
                }
                c[(i, i)] = lam + 2.0 * mu;
            }
            for k in nn..m {
                c[(k, k)] = mu;
            }
            c
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawMaterial {
    tag: u32,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voigt: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct RawField {
    materials: Vec<RawMaterial>,
}

/// Material per element tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterialField {
    pub materials: BTreeMap<u32, Material>,
}

impl MaterialField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: u32, material: Material) -> Self {
        self.materials.insert(tag, material);
        self
    }

    pub fn isotropic(tag: u32, e: f64, nu: f64) -> Self {
        Self::new().with(tag, Material::Isotropic { e, nu })
    }

    pub fn from_json_str(s: &str) -> Result<Self, MaterialError> {
        let raw: RawField = serde_json::from_str(s)?;
        let mut materials = BTreeMap::new();
        for m in raw.materials {
            let mat = match (m.e, m.nu, m.voigt) {
                (Some(e), Some(nu), None) => Material::Isotropic { e, nu },
                (None, None, Some(rows)) => {
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(MaterialError::Invalid {
                            tag: m.tag,
                            msg: "voigt stiffness must be square".into(),
                        });
                    }
                    let flat: Vec<f64> = rows.into_iter().flatten().collect();
                    Material::Anisotropic(DMatrix::from_row_slice(n, n, &flat))
                }
                _ => {
                    return Err(MaterialError::Invalid {
                        tag: m.tag,
                        msg: "give either E and nu, or voigt".into(),
                    })
                }
            };
            if materials.insert(m.tag, mat).is_some() {
                return Err(MaterialError::Duplicate(m.tag));
            }
        }
        Ok(MaterialField { materials })
    }

    pub fn from_path(path: &Path) -> Result<Self, MaterialError> {
        let s = std::fs::read_to_string(path).map_err(|source| MaterialError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawField {
            materials: self
                .materials
                .iter()
                .map(|(tag, m)| match m {
                    Material::Isotropic { e, nu } => RawMaterial {
                        tag: *tag,
                        e: Some(*e),
                        nu: Some(*nu),
                        voigt: None,
                    },
                    Material::Anisotropic(c) => RawMaterial {
                        tag: *tag,
                        e: None,
                        nu: None,
                        voigt: Some(c.row_iter().map(|r| r.iter().copied().collect()).collect()),
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("material serialization cannot fail")
    }

    /// Validated stiffness of every listed tag.
    pub fn stiffness_map(&self, dim: Dim, mode: PlaneMode) -> Result<BTreeMap<u32, DMatrix<f64>>, MaterialError> {
        self.materials
            .iter()
            .map(|(tag, m)| Ok((*tag, m.stiffness(*tag, dim, mode)?)))
            .collect()
    }
}
