use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::json;

use ruc_core::admissibility::{check_admissibility, enumerate_load_cases, Admissibility};
use ruc_core::cellspec::{self, classical_uc_spec, validate_with_mesh, CellSpec, MaterialField};
use ruc_core::constraints::{build_constraints_with_gammas, emit, Format};
use ruc_core::equivalence::{Gamma, SymTensor};
use ruc_core::fixtures::{full_bbox, full_cell, Checkerboard, Honeycomb, Woven};
use ruc_core::mesh::Mesh;
use ruc_core::microfem::{homogenize as homogenize_cell, solve_ruc, verify_equivalence, UcLayout};
use ruc_core::pairing::{pair_boundary_nodes, pairs_to_json, resolve};
use ruc_core::voigt;

use crate::report::{Outcome, Rejected};
use crate::{CellArgs, Settings};

#[derive(Deserialize)]
struct LoadFile {
    macro_strain_voigt: Vec<f64>,
}

fn load_spec(path: &Path) -> Result<CellSpec> {
    CellSpec::from_path(path).with_context(|| format!("loading spec {}", path.display()))
}

fn load_mesh(path: &Path) -> Result<Mesh> {
    Mesh::from_path(path).with_context(|| format!("loading mesh {}", path.display()))
}

fn load_materials(path: &Path) -> Result<MaterialField> {
    MaterialField::from_path(path).with_context(|| format!("loading materials {}", path.display()))
}

fn load_strain(path: &Path, spec: &CellSpec) -> Result<SymTensor> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading load {}", path.display()))?;
    let load: LoadFile = serde_json::from_str(&text).with_context(|| format!("parsing load {}", path.display()))?;
    let eps = SymTensor::from_voigt_strain(spec.dim, &load.macro_strain_voigt)
        .with_context(|| format!("load {}", path.display()))?;
    Ok(eps)
}

fn load_layout(path: &Path) -> Result<UcLayout> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading layout {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing layout {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn sign_list(g: &[Gamma]) -> String {
    let parts: Vec<&str> = g.iter().map(|g| if g.value() > 0.0 { "+1" } else { "-1" }).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn admissible_signs(spec: &CellSpec, eps: &SymTensor, s: &Settings) -> Result<Vec<Gamma>> {
    match check_admissibility(spec, eps, s.tol)? {
        Admissibility::Admissible(a) => Ok(a.gammas),
        Admissibility::Inadmissible(w) => Err(Rejected {
            message: format!(
                "load is not admissible: relation {} fails with both signs (residual {:.3e} for +1, {:.3e} for -1)",
                w.label, w.residual_plus, w.residual_minus
            ),
            details: json!(w),
        }
        .into()),
    }
}

pub fn validate(spec_path: &Path, mesh_path: Option<&Path>) -> Result<Outcome> {
    let spec = load_spec(spec_path)?;
    let report = match mesh_path {
        Some(m) => validate_with_mesh(&spec, &load_mesh(m)?),
        None => cellspec::validate(&spec),
    };
    let ok = report.is_valid();
    let mut text = format!(
        "{} ({}D {}, {} relations): {}",
        spec_path.display(),
        spec.dim.n(),
        spec.kind,
        spec.relations.len(),
        if ok { "valid" } else { "INVALID" }
    );
    for m in report.messages() {
        let _ = write!(text, "\n  {m}");
    }
    if !report.improper_transforms.is_empty() {
        let _ = write!(text, "\n  note: reflections {:?}", report.improper_transforms);
    }
    Ok(Outcome {
        ok,
        text,
        json: json!({ "ok": ok, "messages": report.messages(), "report": report }),
    })
}

pub fn cases(spec_path: &Path) -> Result<Outcome> {
    let spec = load_spec(spec_path)?;
    let cases = enumerate_load_cases(&spec)?;
    let labels = spec.labels();
    let mut text = format!("relations {}\n", labels.join(" "));
    for (i, c) in cases.iter().enumerate() {
        let _ = writeln!(
            text,
            "case {}: gamma = {}  span {{{}}} (dimension {})",
            i + 1,
            sign_list(&c.gammas),
            c.components().join(", "),
            c.dimension()
        );
    }
    let rows: Vec<_> = cases
        .iter()
        .map(|c| json!({ "gammas": c.gammas, "components": c.components(), "dimension": c.dimension(), "basis": c.basis }))
        .collect();
    Ok(Outcome::pass(
        text.trim_end().to_string(),
        json!({ "ok": true, "relations": labels, "voigt_order": voigt::labels(spec.dim), "cases": rows }),
    ))
}

pub fn check(spec_path: &Path, load_path: &Path, s: &Settings) -> Result<Outcome> {
    let spec = load_spec(spec_path)?;
    let eps = load_strain(load_path, &spec)?;
    let verdict = check_admissibility(&spec, &eps, s.tol)?;
    let strain = eps.to_voigt_strain();
    Ok(match &verdict {
        Admissibility::Admissible(a) => Outcome::pass(
            format!(
                "admissible: gamma = {} for relations {}",
                sign_list(&a.gammas),
                a.labels.join(" ")
            ),
            json!({ "ok": true, "macro_strain_voigt": strain, "result": verdict }),
        ),
        Admissibility::Inadmissible(w) => Outcome {
            ok: false,
            text: format!(
                "not admissible: relation {} fails with both signs (residual {:.3e} for +1, {:.3e} for -1, tolerance {:.1e})",
                w.label, w.residual_plus, w.residual_minus, w.tolerance
            ),
            json: json!({ "ok": false, "macro_strain_voigt": strain, "result": verdict }),
        },
    })
}

pub fn pair(cell: &CellArgs, out: Option<&Path>, s: &Settings) -> Result<Outcome> {
    let spec = load_spec(&cell.spec)?;
    let mesh = load_mesh(&cell.mesh)?;
    let graph = pair_boundary_nodes(&mesh, &spec, s.pair_tol)?;
    let pairs = resolve(&graph)?;
    if let Some(path) = out {
        write(path, &pairs_to_json(&pairs))?;
    }
    let self_pairs = pairs.iter().filter(|p| p.self_pair).count();
    let mut text = format!(
        "{} pairs ({} self-pairs) from {} matched edges",
        pairs.len(),
        self_pairs,
        graph.edges.len()
    );
    if !graph.material_mismatches.is_empty() {
        let m = &graph.material_mismatches[0];
        let _ = write!(
            text,
            "\nnote: {} pairs touch different material tags, e.g. nodes {} and {} under {} ({:?} vs {:?})",
            graph.material_mismatches.len(),
            m.slave,
            m.master,
            m.relation,
            m.slave_tags,
            m.master_tags
        );
    }
    for p in pairs.iter().filter(|p| p.self_pair).take(5) {
        let chain: Vec<String> = p.chain.iter().map(|c| c.to_string()).collect();
        let _ = write!(text, "\nself-pair: node {} via {}", p.slave, chain.join(" "));
    }
    Ok(Outcome::pass(
        text,
        json!({
            "ok": true,
            "pairs": pairs.len(),
            "self_pairs": self_pairs,
            "edges": graph.edges.len(),
            "tolerance": graph.tol,
            "material_notes": graph.material_mismatches,
            "out": out.map(|p| p.display().to_string()),
        }),
    ))
}

pub fn constraints(cell: &CellArgs, load: &Path, format: Format, out: Option<&Path>, s: &Settings) -> Result<Outcome> {
    let spec = load_spec(&cell.spec)?;
    let mesh = load_mesh(&cell.mesh)?;
    let eps = load_strain(load, &spec)?;
    let gammas = admissible_signs(&spec, &eps, s)?;
    let pairs = resolve(&pair_boundary_nodes(&mesh, &spec, s.pair_tol)?)?;
    let eqs = build_constraints_with_gammas(&pairs, &spec, &gammas, &eps)?;
    let body = emit(&eqs, spec.dim, format)?;
    let self_pairs = eqs.iter().filter(|e| e.self_pair).count();
    let json = json!({
        "ok": true,
        "gammas": gammas,
        "equations": eqs.len(),
        "self_pairs": self_pairs,
        "out": out.map(|p| p.display().to_string()),
    });
    match out {
        Some(path) => {
            write(path, &body)?;
            Ok(Outcome::pass(
                format!(
                    "{} equations ({} self-pairs), gamma = {}, written to {}",
                    eqs.len(),
                    self_pairs,
                    sign_list(&gammas),
                    path.display()
                ),
                json,
            ))
        }
        None => {
            crate::report::print(&body);
            if !body.ends_with('\n') {
                crate::report::print("\n");
            }
            Ok(Outcome::pass(String::new(), json))
        }
    }
}

pub fn solve(
    cell: &CellArgs,
    load: &Path,
    material: &Path,
    out: Option<&Path>,
    gauss_csv: Option<&Path>,
    s: &Settings,
) -> Result<Outcome> {
    let spec = load_spec(&cell.spec)?;
    let mesh = load_mesh(&cell.mesh)?;
    let mats = load_materials(material)?;
    let eps = load_strain(load, &spec)?;
    let sol = solve_ruc(&mesh, &spec, &mats, &eps, &s.solve_options())?;
    let summary = sol.summary();
    if let Some(path) = out {
        write(path, &pretty(&summary))?;
    }
    if let Some(path) = gauss_csv {
        write(path, &sol.gauss_csv())?;
    }
    let mut text = String::new();
    let _ = writeln!(text, "gamma            {}", sign_list(&sol.gammas));
    let _ = writeln!(text, "macro strain     {}", fmt_vec(&summary.macro_strain));
    let _ = writeln!(text, "mean strain      {}", fmt_vec(&summary.mean_strain));
    let _ = writeln!(text, "mean stress      {}", fmt_vec(&summary.mean_stress));
    let _ = writeln!(text, "energy density   {:.6e}", summary.energy_density);
    let _ = writeln!(text, "mean rotation    {:.3e}", summary.mean_rotation);
    let _ = writeln!(text, "max fluctuation  {:.3e}", summary.fluctuation_max);
    let _ = writeln!(text, "constraint resid {:.3e}", summary.constraint_residual);
    let _ = write!(text, "reduced dofs     {} (pin node {})", summary.reduced_dofs, summary.pin_node);
    Ok(Outcome::pass(
        text,
        json!({
            "ok": true,
            "gammas": summary.gammas,
            "macro_strain": summary.macro_strain,
            "mean_strain": summary.mean_strain,
            "mean_stress": summary.mean_stress,
            "raw_mean_strain": summary.raw_mean_strain,
            "raw_mean_stress": summary.raw_mean_stress,
            "energy_density": summary.energy_density,
            "mean_rotation": summary.mean_rotation,
            "fluctuation_max": summary.fluctuation_max,
            "constraint_residual": summary.constraint_residual,
            "reduced_dofs": summary.reduced_dofs,
            "out": out.map(|p| p.display().to_string()),
        }),
    ))
}

fn matrix_text(rows: &[Vec<f64>], mask: &[bool]) -> String {
    let mut text = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, v)| if mask[i] && mask[j] { format!("{v:>14.6e}") } else { format!("{:>14}", "-") })
            .collect();
        let _ = writeln!(text, "  {}", cells.join(" "));
    }
    text
}

pub fn homogenize(cell: &CellArgs, material: &Path, out: Option<&Path>, s: &Settings) -> Result<Outcome> {
    let spec = load_spec(&cell.spec)?;
    let mesh = load_mesh(&cell.mesh)?;
    let mats = load_materials(material)?;
    let h = homogenize_cell(&mesh, &spec, &mats, &s.solve_options())?;
    if let Some(path) = out {
        write(path, &pretty(&h))?;
    }
    let mut text = format!("C_eff (Voigt order {}):\n", voigt::labels(spec.dim).join(" "));
    text.push_str(&matrix_text(&h.c, &h.mask));
    let _ = write!(text, "asymmetry {:.3e}", h.asymmetry);
    for (comp, rel) in &h.missing {
        let _ = write!(text, "\ncomponent {comp} not admissible (relation {rel})");
    }
    Ok(Outcome::pass(
        text,
        json!({
            "ok": true,
            "voigt_order": voigt::labels(spec.dim),
            "c_eff": h.c,
            "mask": h.mask,
            "asymmetry": h.asymmetry,
            "missing": h.missing,
            "column_gammas": h.column_gammas,
            "out": out.map(|p| p.display().to_string()),
        }),
    ))
}

pub struct VerifyArgs<'a> {
    pub cell: &'a CellArgs,
    pub layout: &'a Path,
    pub material: &'a Path,
    pub load: &'a Path,
    pub uc_mesh: Option<&'a Path>,
    pub gammas: Option<&'a [i8]>,
    pub stiffness: bool,
    pub out: Option<&'a Path>,
}

pub fn verify(a: &VerifyArgs, s: &Settings) -> Result<Outcome> {
    let spec = load_spec(&a.cell.spec)?;
    let mesh = load_mesh(&a.cell.mesh)?;
    let mats = load_materials(a.material)?;
    let layout = load_layout(a.layout)?;
    let eps = load_strain(a.load, &spec)?;
    let (uc_spec, uc_mesh) = match a.uc_mesh {
        Some(p) => {
            let bbox = full_bbox(&spec, &layout)?;
            let uc_spec = classical_uc_spec(bbox, &layout.periodicity_points(spec.dim))?;
            (uc_spec, load_mesh(p)?)
        }
        None => full_cell(&mesh, &spec, &layout)?,
    };
    let override_signs = match a.gammas {
        Some(g) => {
            let signs = g
                .iter()
                .map(|&v| Gamma::try_from(v).map_err(anyhow::Error::msg))
                .collect::<Result<Vec<_>>>()?;
            if signs.len() != spec.relations.len() {
                bail!("--gammas has {} entries for {} relations", signs.len(), spec.relations.len());
            }
            Some(signs)
        }
        None => None,
    };
    let opts = s.solve_options();
    let ruc = solve_ruc(&mesh, &spec, &mats, &eps, &opts).context("solving the reduced cell")?;
    let uc = solve_ruc(&uc_mesh, &uc_spec, &mats, &eps, &opts).context("solving the full cell")?;
    let rep = verify_equivalence(&uc, &ruc, &spec, &layout, override_signs.as_deref())?;
    let mut ok = rep.passed;
    let mut text = format!(
        "{} Gauss points over {} copies: strain residual {:.3e}, stress residual {:.3e} (tolerance {:.0e}) {}",
        rep.matched_points,
        rep.copies,
        rep.strain_residual,
        rep.stress_residual,
        rep.tolerance,
        if rep.passed { "PASS" } else { "FAIL" }
    );
    if !rep.passed {
        let _ = write!(
            text,
            "\nworst: copy {:?}, element {}, at {:?}",
            rep.worst_copy, rep.worst_element, rep.worst_point
        );
    }
    let mut stiffness = serde_json::Value::Null;
    if a.stiffness {
        let hr = homogenize_cell(&mesh, &spec, &mats, &opts)?;
        let hu = homogenize_cell(&uc_mesh, &uc_spec, &mats, &opts)?;
        let (cr, cu) = (hr.matrix(), hu.matrix());
        let dev = (&cr - &cu).amax() / cu.amax().max(f64::MIN_POSITIVE);
        let pass = dev <= rep.tolerance && hr.is_complete();
        ok &= pass;
        let _ = write!(
            text,
            "\nC_eff relative difference {dev:.3e} {}",
            if pass { "PASS" } else { "FAIL" }
        );
        stiffness = json!({ "ruc": hr.c, "uc": hu.c, "relative_difference": dev, "passed": pass });
    }
    let json = json!({
        "ok": ok,
        "gammas": override_signs.as_deref().unwrap_or(&ruc.gammas),
        "uc_dofs": uc_mesh.dof_count(),
        "equivalence": rep,
        "stiffness": stiffness,
    });
    if let Some(path) = a.out {
        write(path, &pretty(&json))?;
    }
    Ok(Outcome { ok, text, json })
}

fn load_json(v: &[f64]) -> String {
    pretty(&json!({ "macro_strain_voigt": v }))
}

pub fn fixtures(dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let woven = Woven::default();
    let hc = Honeycomb::default();
    let cb = Checkerboard::default();
    let two_phase = Checkerboard::materials();

    let hc_mesh = hc.mesh(24, 28);
    let (hc_uc_spec, hc_uc_mesh) = full_cell(&hc_mesh, &hc.spec(), &hc.layout())?;
    let cb_mesh = cb.mesh(16);
    let (cb_uc_spec, cb_uc_mesh) = full_cell(&cb_mesh, &cb.spec(), &cb.layout())?;

    let files: Vec<(&str, String)> = vec![
        ("woven3d.json", woven.spec().to_json_string()),
        ("woven3d_stack.json", woven.stack_spec().to_json_string()),
        ("woven3d_mesh.json", woven.mesh([4, 8, 2]).to_json_string()),
        ("woven3d_materials.json", two_phase.to_json_string()),
        ("woven3d_inplane.json", load_json(&[0.01, -0.004, 0.0, 0.0, 0.0, 0.002])),
        ("woven3d_transverse_shear.json", load_json(&[0.0, 0.0, 0.0, 0.01, 0.005, 0.0])),
        ("woven3d_mixed.json", load_json(&[0.01, 0.0, 0.0, 0.0, 0.01, 0.0])),
        ("honeycomb.json", hc.spec().to_json_string()),
        ("honeycomb_mesh.json", hc_mesh.to_json_string()),
        ("honeycomb_layout.json", pretty(&hc.layout())),
        ("honeycomb_uc.json", hc_uc_spec.to_json_string()),
        ("honeycomb_uc_mesh.json", hc_uc_mesh.to_json_string()),
        ("honeycomb_materials.json", Honeycomb::materials().to_json_string()),
        ("tension.json", load_json(&[0.01, 0.0, 0.0])),
        ("shear.json", load_json(&[0.0, 0.0, 0.01])),
        ("checkerboard_ruc.json", cb.spec().to_json_string()),
        ("checkerboard_ruc_mesh.json", cb_mesh.to_json_string()),
        ("checkerboard_uc.json", cb_uc_spec.to_json_string()),
        ("checkerboard_uc_mesh.json", cb_uc_mesh.to_json_string()),
        ("checkerboard_layout.json", pretty(&cb.layout())),
        ("checkerboard_materials.json", two_phase.to_json_string()),
        ("checkerboard_load.json", load_json(&[0.01, -0.004, 0.006])),
    ];
    let mut names = Vec::new();
    for (name, body) in &files {
        let body = if body.ends_with('\n') { body.clone() } else { format!("{body}\n") };
        write(&dir.join(name), &body)?;
        names.push(*name);
    }
    Ok(Outcome::pass(
        format!("wrote {} files to {}", names.len(), dir.display()),
        json!({ "ok": true, "dir": dir.display().to_string(), "files": names }),
    ))
}
