use std::fmt;

use ruc_core::admissibility::AdmissibilityError;
use ruc_core::cellspec::{CellSpecError, MaterialError};
use ruc_core::constraints::ConstraintError;
use ruc_core::equivalence::EquivalenceError;
use ruc_core::mesh::MeshError;
use ruc_core::microfem::SolveError;
use ruc_core::pairing::PairingError;

/// Result of a verb: human text, JSON report, and whether the check passed.
pub struct Outcome {
    pub ok: bool,
    pub text: String,
    pub json: serde_json::Value,
}

impl Outcome {
    pub fn pass(text: String, json: serde_json::Value) -> Self {
        Outcome { ok: true, text, json }
    }
}

/// Input that parsed but failed a validity or admissibility check.
#[derive(Debug)]
pub struct Rejected {
    pub message: String,
    pub details: serde_json::Value,
}

impl fmt::Display for Rejected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Rejected {}

/// Writes to stdout, ignoring a closed pipe.
pub fn print(s: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes());
    let _ = out.flush();
}

pub fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

/// 2 for rejected input (invalid spec or mesh, inadmissible load, failed
/// pairing, singular system), 1 for I/O, parse and internal errors.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Rejected>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<CellSpecError>() {
            return match e {
                CellSpecError::Io { .. } | CellSpecError::Json(_) => 1,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<MeshError>() {
            return match e {
                MeshError::Io { .. } | MeshError::Json(_) => 1,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<MaterialError>() {
            return match e {
                MaterialError::Io { .. } | MaterialError::Json(_) => 1,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<ConstraintError>() {
            return match e {
                ConstraintError::Json(_) | ConstraintError::Csv(_) => 1,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<SolveError>() {
            return match e {
                SolveError::Internal(_) => 1,
                SolveError::Mesh(MeshError::Io { .. } | MeshError::Json(_)) => 1,
                _ => 2,
            };
        }
        if cause.is::<PairingError>() || cause.is::<AdmissibilityError>() || cause.is::<EquivalenceError>() {
            return 2;
        }
    }
    1
}
