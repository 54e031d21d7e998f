use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{ConstraintEquation, ConstraintError};
use crate::equivalence::{Dim, Gamma, Point};

/// Output formats for constraint sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Lossless JSON, readable by [`parse_json`].
    Json,
    /// One scalar equation per row: `slave_dof,terms,rhs` with `terms` as `dof:coef;...`.
    Csv,
    /// `*EQUATION` blocks for FE packages (1-based node and DOF numbers).
    Deck,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "deck" | "solver_deck" => Ok(Format::Deck),
            other => Err(format!("unknown format {other:?} (json, csv, deck)")),
        }
    }
}

/// Node set carrying the unit reference displacement that scales constant terms in decks.
pub const DECK_RHS_NSET: &str = "RUC_RHS";

#[derive(Serialize, Deserialize)]
struct RawEquation {
    slave: usize,
    master: usize,
    slave_dofs: Vec<usize>,
    master_dofs: Vec<usize>,
    coeff: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    gamma: Gamma,
    relation_chain: Vec<String>,
    self_pair: bool,
}

#[derive(Serialize, Deserialize)]
struct RawSet {
    dim: usize,
    equations: Vec<RawEquation>,
}

fn to_raw(dim: Dim, eqs: &[ConstraintEquation]) -> RawSet {
    let d = dim.n();
    RawSet {
        dim: d,
        equations: eqs
            .iter()
            .map(|e| RawEquation {
                slave: e.slave,
                master: e.master,
                slave_dofs: e.slave_dofs(),
                master_dofs: e.master_dofs(),
                coeff: (0..d).map(|i| (0..d).map(|j| e.coeff[(i, j)]).collect()).collect(),
                rhs: (0..d).map(|i| e.rhs[i]).collect(),
                gamma: e.gamma,
                relation_chain: e.relation_chain.clone(),
                self_pair: e.self_pair,
            })
            .collect(),
    }
}

/// Inverse of `emit(.., Format::Json)`.
pub fn parse_json(s: &str) -> Result<Vec<ConstraintEquation>, ConstraintError> {
    let raw: RawSet = serde_json::from_str(s)?;
    let dim = Dim::from_n(raw.dim).map_err(|e| serde::de::Error::custom(e.to_string()))
        .map_err(ConstraintError::Json)?;
    let d = dim.n();
    raw.equations
        .into_iter()
        .map(|r| {
            if r.coeff.len() != d || r.coeff.iter().any(|row| row.len() != d) || r.rhs.len() != d {
                return Err(ConstraintError::Json(serde::de::Error::custom(format!(
                    "equation for slave {} does not match dimension {d}",
                    r.slave
                ))));
            }
            let mut coeff = Matrix3::zeros();
            let mut rhs = Point::zeros();
            for i in 0..d {
                rhs[i] = r.rhs[i];
                for j in 0..d {
                    coeff[(i, j)] = r.coeff[i][j];
                }
            }
            Ok(ConstraintEquation {
                dim,
                slave: r.slave,
                master: r.master,
                coeff,
                rhs,
                gamma: r.gamma,
                relation_chain: r.relation_chain,
                self_pair: r.self_pair,
            })
        })
        .collect()
}

fn emit_csv(eqs: &[ConstraintEquation]) -> Result<String, ConstraintError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["slave_dof", "terms", "rhs"])?;
    for e in eqs {
        for row in e.scalar_rows() {
            let terms: Vec<String> = row.terms.iter().map(|(dof, c)| format!("{dof}:{c:e}")).collect();
            w.write_record([
                row.slave_dof.to_string(),
                terms.join(";"),
                format!("{:e}", row.rhs),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| ConstraintError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn emit_deck(dim: Dim, eqs: &[ConstraintEquation]) -> String {
    let d = dim.n();
    let rows: Vec<_> = eqs.iter().flat_map(|e| e.scalar_rows()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "** periodic constraints: {} scalar equations", rows.len());
    let _ = writeln!(
        out,
        "** constant terms act through node set {DECK_RHS_NSET}, dof 1, which must carry a prescribed unit displacement"
    );
    for row in rows {
        let mut terms: Vec<String> = row
            .terms
            .iter()
            .map(|(dof, c)| format!("{}, {}, {:.14e}", dof / d + 1, dof % d + 1, c))
            .collect();
        if row.rhs != 0.0 {
            terms.push(format!("{DECK_RHS_NSET}, 1, {:.14e}", -row.rhs));
        }
        let _ = writeln!(out, "*EQUATION");
        let _ = writeln!(out, "{}", terms.len());
        for chunk in terms.chunks(4) {
            let _ = writeln!(out, "{}", chunk.join(", "));
        }
    }
    out
}

/// Serializes a constraint set.
pub fn emit(eqs: &[ConstraintEquation], dim: Dim, format: Format) -> Result<String, ConstraintError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&to_raw(dim, eqs))?),
        Format::Csv => emit_csv(eqs),
        Format::Deck => Ok(emit_deck(dim, eqs)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ConstraintEquation> {
        vec![ConstraintEquation {
            dim: Dim::Two,
            slave: 3,
            master: 0,
            coeff: Matrix3::from_diagonal(&Point::new(1.0, 1.0, 0.0)),
            rhs: Point::new(-0.1 / 3.0, 0.0, 0.0),
            gamma: Gamma::Plus,
            relation_chain: vec!["P1".into()],
            self_pair: false,
        }]
    }

    #[test]
    fn empty_payloads_keep_headers() {
        assert_eq!(emit(&[], Dim::Two, Format::Csv).unwrap(), "slave_dof,terms,rhs\n");
        assert!(parse_json(&emit(&[], Dim::Three, Format::Json).unwrap()).unwrap().is_empty());
        assert!(emit(&[], Dim::Two, Format::Deck).unwrap().starts_with("**"));
    }

    #[test]
    fn json_round_trip_exact() {
        let eqs = sample();
        assert_eq!(parse_json(&emit(&eqs, Dim::Two, Format::Json).unwrap()).unwrap(), eqs);
    }

    #[test]
    fn csv_rows() {
        let text = emit(&sample(), Dim::Two, Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "6,6:1e0;0:-1e0,-3.333333333333333e-2");
        assert_eq!(lines[2], "7,7:1e0;1:-1e0,0e0");
    }

    #[test]
    fn deck_format() {
        let text = emit(&sample(), Dim::Two, Format::Deck).unwrap();
        assert!(text.contains("*EQUATION\n3\n4, 1, 1.00000000000000e0, 1, 1, -1.00000000000000e0, RUC_RHS, 1, 3.33333333333333e-2\n"));
        assert!(text.contains("*EQUATION\n2\n4, 2, 1.00000000000000e0, 1, 2, -1.00000000000000e0\n"));
        assert_eq!("deck".parse::<Format>().unwrap(), Format::Deck);
    }
}
