use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod report;

use report::{Outcome, Rejected};

#[derive(Parser, Debug)]
#[command(name = "ruc", version, about = "Reduced unit cell boundary conditions and verification")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Report format on stdout (`text`, `json`); for `constraints` the
    /// equation format (`json`, `csv`, `deck`).
    #[arg(long, global = true)]
    format: Option<String>,

    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    /// Worker threads for assembly and post-processing (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// 2D kinematic assumption.
    #[arg(long, global = true, value_enum, default_value_t = Plane::Strain)]
    plane: Plane,

    /// Relative tolerance of the admissibility test.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,

    /// Absolute node matching tolerance (default: 1e-6 of the cell diagonal).
    #[arg(long, global = true)]
    pair_tol: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Plane {
    Strain,
    Stress,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Check a cell spec, and optionally a mesh against it.
    Validate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// List the maximal admissible load cases.
    Cases {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Load reversal factors for one macro strain.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        load: PathBuf,
    },
    /// Pair boundary nodes of a mesh.
    Pair {
        #[command(flatten)]
        cell: CellArgs,
        /// Where to write the pairs.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Emit the constraint equations for one macro strain.
    Constraints {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        load: PathBuf,
        /// Equation file; printed to stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve the constrained elastic problem for one macro strain.
    Solve {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        load: PathBuf,
        #[arg(long)]
        material: PathBuf,
        /// Solution with averages and nodal displacements.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Gauss-point strain and stress table.
        #[arg(long)]
        gauss_csv: Option<PathBuf>,
    },
    /// Effective stiffness from unit macro strains.
    Homogenize {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        material: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare a reduced cell against the full cell assembled from its copies.
    Verify {
        #[command(flatten)]
        cell: CellArgs,
        /// Copy chains and periodicity of the full cell.
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        material: PathBuf,
        #[arg(long)]
        load: PathBuf,
        /// Full-cell mesh; assembled from the reduced mesh when omitted.
        #[arg(long)]
        uc_mesh: Option<PathBuf>,
        /// Override the load reversal factors used in the field comparison, e.g. `1,1,1`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        gammas: Option<Vec<i8>>,
        /// Also compare effective stiffnesses.
        #[arg(long)]
        stiffness: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write the bundled example cells, meshes, materials and loads.
    Fixtures {
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct CellArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
}

pub struct Settings {
    pub plane: ruc_core::cellspec::PlaneMode,
    pub tol: f64,
    pub pair_tol: Option<f64>,
}

impl Settings {
    pub fn solve_options(&self) -> ruc_core::microfem::SolveOptions {
        ruc_core::microfem::SolveOptions {
            plane: self.plane,
            pair_tol: self.pair_tol,
            adm_tol: self.tol,
        }
    }
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RUC_LOG", "warn"))
        .format_timestamp(None)
        .init();
}

fn settings(cli: &Cli) -> Result<Settings> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        bail!("--tol must be positive, got {}", cli.tol);
    }
    if let Some(t) = cli.pair_tol {
        if !(t > 0.0 && t.is_finite()) {
            bail!("--pair-tol must be positive, got {t}");
        }
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(Settings {
        plane: match cli.plane {
            Plane::Strain => ruc_core::cellspec::PlaneMode::Strain,
            Plane::Stress => ruc_core::cellspec::PlaneMode::Stress,
        },
        tol: cli.tol,
        pair_tol: cli.pair_tol,
    })
}

fn report_format(cli: &Cli) -> Result<ReportFormat> {
    if matches!(cli.verb, Verb::Constraints { .. }) {
        return Ok(ReportFormat::Text);
    }
    match cli.format.as_deref() {
        None | Some("text") => Ok(ReportFormat::Text),
        Some("json") => Ok(ReportFormat::Json),
        Some(other) => bail!("unknown report format {other:?} (text, json)"),
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let s = settings(cli)?;
    match &cli.verb {
        Verb::Validate { spec, mesh } => commands::validate(spec, mesh.as_deref()),
        Verb::Cases { spec } => commands::cases(spec),
        Verb::Check { spec, load } => commands::check(spec, load, &s),
        Verb::Pair { cell, out } => commands::pair(cell, out.as_deref(), &s),
        Verb::Constraints { cell, load, out } => {
            let format = cli.format.as_deref().unwrap_or("json").parse().map_err(anyhow::Error::msg)?;
            commands::constraints(cell, load, format, out.as_deref(), &s)
        }
        Verb::Solve {
            cell,
            load,
            material,
            out,
            gauss_csv,
        } => commands::solve(cell, load, material, out.as_deref(), gauss_csv.as_deref(), &s),
        Verb::Homogenize { cell, material, out } => commands::homogenize(cell, material, out.as_deref(), &s),
        Verb::Verify {
            cell,
            layout,
            material,
            load,
            uc_mesh,
            gammas,
            stiffness,
            out,
        } => commands::verify(
            &commands::VerifyArgs {
                cell,
                layout,
                material,
                load,
                uc_mesh: uc_mesh.as_deref(),
                gammas: gammas.as_deref(),
                stiffness: *stiffness,
                out: out.as_deref(),
            },
            &s,
        ),
        Verb::Fixtures { out } => commands::fixtures(out),
    }
}

fn write_report(path: &Path, json: &serde_json::Value) -> Result<()> {
    std::fs::write(path, report::to_json(json)).with_context(|| format!("writing report {}", path.display()))
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let format = match report_format(&cli) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let (json, text, code) = match run(&cli) {
        Ok(outcome) => {
            let code = if outcome.ok { 0 } else { 2 };
            (outcome.json, outcome.text, code)
        }
        Err(err) => {
            let code = report::exit_code(&err);
            let msg = format!("{err:#}");
            let json = serde_json::json!({
                "ok": false,
                "error": msg,
                "kind": if code == 2 { "rejected" } else { "internal" },
                "details": err.downcast_ref::<Rejected>().map(|r| r.details.clone()),
            });
            (json, format!("error: {msg}"), code)
        }
    };
    match format {
        ReportFormat::Text => {
            if code != 0 {
                eprintln!("{text}");
            } else if !text.is_empty() {
                report::print(&format!("{text}\n"));
            }
        }
        ReportFormat::Json => report::print(&report::to_json(&json)),
    }
    if let Some(path) = &cli.report {
        if let Err(e) = write_report(path, &json) {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code)
}
