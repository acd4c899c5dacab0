//! Command-line interface: validate structures, run elliptic and parabolic
//! solves, spectral semigroup evolutions, Poincare-constant estimates, and
//! regularity diagnostics over flat-file inputs/outputs.

mod io;

use clap::{Args, Parser, Subcommand};
use io::{
    ensure_out_dir, load_structure_arg, parse_spec, read_solution_csv, solution_csv, write_file,
};
use lowdim::assemble::assemble_system;
use lowdim::coeff::{load_coefficient, CoefficientMatrix};
use lowdim::dof::Field;
use lowdim::elliptic::{poincare_constant, solve_elliptic};
use lowdim::mesh::export_component_mesh;
use lowdim::parabolic::{asymptotic_check, energy, m_norm, solve_parabolic};
use lowdim::regularity::{
    continuity_check, cosserat_compatibility, cosserat_copy, h2_seminorm, split_field,
    trace_mismatch,
};
use lowdim::semigroup::{semigroup_apply, spectral_decompose, taylor_iterate};
use lowdim::{Discretization, Error as LibError};
use serde_json::json;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lowdim",
    about = "Elliptic and parabolic solvers on glued low-dimensional structures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Args)]
struct StructureArgs {
    /// Builtin name (cross_segments, cross_discs, disc_plus_segment) or a
    /// JSON config path.
    #[arg(long)]
    structure: String,
    /// Scale factor for builtin structures.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural conditions and report violations.
    Validate {
        #[command(flatten)]
        s: StructureArgs,
        /// Mesh size; required for --export-mesh.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Export per-component meshes (requires --h and --out).
        #[arg(long)]
        export_mesh: bool,
    },
    /// Solve the weak elliptic Neumann problem with group-mean constraints.
    SolveElliptic {
        #[command(flatten)]
        s: StructureArgs,
        /// Right-hand side: `expr` or `id:expr;id:expr`.
        #[arg(long)]
        rhs: String,
        #[arg(long)]
        h: f64,
        /// Constant coefficient matrix (JSON: {"matrix": [[..]x3], "lambda": l}).
        #[arg(long)]
        coeff: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Dump stiffness/mass matrices in coordinate-list form.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Time-step the weak parabolic problem with the theta scheme.
    SolveParabolic {
        #[command(flatten)]
        s: StructureArgs,
        /// Initial datum: `expr` or `id:expr;...`.
        #[arg(long)]
        u0: String,
        /// Forcing (may use `t`): `expr` or `id:expr;...`.
        #[arg(long, default_value = "0")]
        rhs: String,
        /// Time horizon.
        #[arg(long = "T", value_name = "T")]
        t_end: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        coeff: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also solve the stationary problem (time-independent rhs) and
        /// record the distance to it per step.
        #[arg(long)]
        stationary: bool,
    },
    /// Spectral decomposition and semigroup evolution.
    Semigroup {
        #[command(flatten)]
        s: StructureArgs,
        /// Initial datum: `expr` or `id:expr;...`.
        #[arg(long)]
        g: String,
        /// Comma-separated evolution times.
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// Number of spectral modes to keep (default: all).
        #[arg(long)]
        k: Option<usize>,
        /// Evolve with forward Taylor iterations instead of the spectral
        /// semigroup.
        #[arg(long)]
        taylor: bool,
        /// Taylor truncation tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-group Poincare constants of the stiffness/mass pencil.
    Poincare {
        #[command(flatten)]
        s: StructureArgs,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularity diagnostics of a stored solution.
    Diagnose {
        #[command(flatten)]
        s: StructureArgs,
        /// solution.csv produced by solve-elliptic/solve-parabolic with the
        /// same structure and --h.
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        h: f64,
        /// Comma-separated subset of: traces, cosserat, h2, continuity.
        #[arg(long, value_delimiter = ',', default_value = "traces,h2,continuity")]
        checks: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// CLI-level error with an exit class and a machine-readable code prefix.
#[derive(Debug)]
pub struct CliError {
    code: &'static str,
    message: String,
    internal: bool,
}

impl CliError {
    fn user(code: &'static str, message: String) -> Self {
        CliError {
            code,
            message,
            internal: false,
        }
    }

    fn internal(code: &'static str, message: String) -> Self {
        CliError {
            code,
            message,
            internal: true,
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        let msg = e.to_string();
        match e {
            LibError::Parse(_) => CliError::user("E_PARSE", msg),
            LibError::Validation(_) => CliError::user("E_VALID", msg),
            LibError::Incompatible(..) => CliError::user("E_COMPAT", msg),
            LibError::Geometry(_) => CliError::user("E_GEOM", msg),
            LibError::Mesh(_) => CliError::user("E_MESH", msg),
            LibError::Expr(_) => CliError::user("E_EXPR", msg),
            LibError::Eval(_) => CliError::user("E_EVAL", msg),
            LibError::InvalidArg(_) => CliError::user("E_ARGS", msg),
            LibError::Divergence(_) => CliError::user("E_DIVERGE", msg),
            LibError::Singular(_) => CliError::user("E_SINGULAR", msg),
            LibError::Solve(_) => CliError::internal("E_SOLVE", msg),
            LibError::Eigen(_) => CliError::internal("E_EIGEN", msg),
        }
    }
}

fn main() -> ExitCode {
    // Sequential dense kernels keep outputs byte-identical across runs.
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.code, e.message);
            if e.internal {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load_coeff_arg(path: &Option<PathBuf>) -> Result<CoefficientMatrix, CliError> {
    match path {
        None => Ok(CoefficientMatrix::Identity),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::user("E_IO", format!("cannot read '{}': {e}", p.display()))
            })?;
            Ok(load_coefficient(&text)?)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Validate {
            s,
            h,
            out,
            export_mesh,
        } => {
            let structure = load_structure_arg(&s.structure, s.scale)?;
            let report = structure.validate();
            if !quiet {
                println!("{report}");
            }
            if export_mesh {
                let (Some(h), Some(out)) = (h, out.as_ref()) else {
                    return Err(CliError::user(
                        "E_ARGS",
                        "--export-mesh needs both --h and --out".into(),
                    ));
                };
                let disc = Discretization::new(structure.clone(), h)?;
                ensure_out_dir(out)?;
                for (ci, c) in disc.structure.components.iter().enumerate() {
                    let text = export_component_mesh(&disc.ms, ci);
                    write_file(&out.join(format!("component_{}.mesh", c.id)), &text)?;
                }
            }
            if report.is_ok() {
                Ok(())
            } else {
                Err(CliError::user("E_VALID", report.to_string()))
            }
        }

        Command::SolveElliptic {
            s,
            rhs,
            h,
            coeff,
            out,
            dump_matrices,
        } => {
            let structure = load_structure_arg(&s.structure, s.scale)?;
            let disc = Discretization::new(structure, h)?;
            let coeff = load_coeff_arg(&coeff)?;
            let system = assemble_system(&disc.structure, &disc.ms, &disc.dm, &coeff)?;
            let spec = parse_spec(&rhs, &disc.structure, false)?;
            let f = spec.at_time(None);
            let sol = solve_elliptic(&disc, &system, &f);
            spec.check()?;
            let sol = sol?;
            ensure_out_dir(&out)?;
            write_file(&out.join("solution.csv"), &solution_csv(&disc, &sol.u))?;
            let summary = json!({
                "dofs": disc.dm.n_dofs,
                "groups": disc.dm.kernel_groups.len(),
                "residual": sol.residual,
                "group_means": sol.group_means,
                "energy": sol.energy,
            });
            write_file(&out.join("summary.json"), &format!("{summary:#}\n"))?;
            if dump_matrices {
                write_file(&out.join("K.coo"), &system.k.to_coo_text())?;
                write_file(&out.join("M.coo"), &system.m.to_coo_text())?;
            }
            if !quiet {
                println!(
                    "solved: {} dofs, residual {:.3e}, energy {:.6e}",
                    disc.dm.n_dofs, sol.residual, sol.energy
                );
            }
            Ok(())
        }

        Command::SolveParabolic {
            s,
            u0,
            rhs,
            t_end,
            dt,
            theta,
            h,
            coeff,
            out,
            stationary,
        } => {
            let structure = load_structure_arg(&s.structure, s.scale)?;
            let disc = Discretization::new(structure, h)?;
            let coeff = load_coeff_arg(&coeff)?;
            let system = assemble_system(&disc.structure, &disc.ms, &disc.dm, &coeff)?;

            let u0_spec = parse_spec(&u0, &disc.structure, false)?;
            let u0_field = lowdim::assemble::interpolate(
                &disc.structure,
                &disc.ms,
                &disc.dm,
                &u0_spec.at_time(None),
            );
            u0_spec.check()?;

            let rhs_spec = parse_spec(&rhs, &disc.structure, true)?;
            let forcing = |t: f64| {
                lowdim::assemble::interpolate(
                    &disc.structure,
                    &disc.ms,
                    &disc.dm,
                    &rhs_spec.at_time(Some(t)),
                )
            };
            let traj = solve_parabolic(&system, &u0_field, forcing, t_end, dt, theta)?;
            rhs_spec.check()?;

            let stationary_sol = if stationary {
                let f0 = rhs_spec.at_time(Some(0.0));
                Some(solve_elliptic(&disc, &system, &f0)?)
            } else {
                None
            };
            let dists = stationary_sol
                .as_ref()
                .map(|st| asymptotic_check(&system, &traj, &st.u))
                .transpose()?;

            ensure_out_dir(&out)?;
            let mut csv = String::from(if dists.is_some() {
                "step,t,energy,M_norm,dist_to_stationary\n"
            } else {
                "step,t,energy,M_norm\n"
            });
            for (n, t) in traj.times.iter().enumerate() {
                let mn = m_norm(&system.m, &traj.fields[n]);
                match &dists {
                    Some(rep) => {
                        let _ = writeln!(
                            csv,
                            "{n},{t},{},{mn},{}",
                            traj.energies[n], rep.distances[n]
                        );
                    }
                    None => {
                        let _ = writeln!(csv, "{n},{t},{},{mn}", traj.energies[n]);
                    }
                }
            }
            write_file(&out.join("trajectory.csv"), &csv)?;
            write_file(&out.join("solution.csv"), &solution_csv(&disc, traj.last()))?;
            if !quiet {
                println!(
                    "stepped {} intervals to T = {}, final energy {:.6e}",
                    traj.times.len() - 1,
                    traj.times.last().unwrap(),
                    traj.energies.last().unwrap()
                );
            }
            Ok(())
        }

        Command::Semigroup {
            s,
            g,
            t,
            k,
            taylor,
            tol,
            h,
            out,
        } => {
            let structure = load_structure_arg(&s.structure, s.scale)?;
            let disc = Discretization::new(structure, h)?;
            let system = assemble_system(
                &disc.structure,
                &disc.ms,
                &disc.dm,
                &CoefficientMatrix::Identity,
            )?;
            let spec = parse_spec(&g, &disc.structure, false)?;
            let g_field = lowdim::assemble::interpolate(
                &disc.structure,
                &disc.ms,
                &disc.dm,
                &spec.at_time(None),
            );
            spec.check()?;

            let basis = spectral_decompose(&system, k.unwrap_or(disc.dm.n_dofs))?;
            ensure_out_dir(&out)?;
            let mut modes = String::from("index,lambda\n");
            for (i, l) in basis.lambdas.iter().enumerate() {
                let _ = writeln!(modes, "{i},{l}");
            }
            write_file(&out.join("modes.csv"), &modes)?;

            let mut evolution = String::from("t,M_norm,energy\n");
            let mut times = t.clone();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &tv in &times {
                let state: Field = if taylor {
                    taylor_iterate(&system, tv, &g_field, tol)?.value
                } else {
                    semigroup_apply(&basis, tv, &g_field)?
                };
                let _ = writeln!(
                    evolution,
                    "{tv},{},{}",
                    m_norm(&system.m, &state),
                    energy(&system.k, &state)
                );
            }
            write_file(&out.join("evolution.csv"), &evolution)?;
            if !quiet {
                println!(
                    "decomposed {} modes (lambda_max = {:.6e})",
                    basis.len(),
                    basis.lambdas.last().unwrap()
                );
            }
            Ok(())
        }

        Command::Poincare { s, h, out } => {
            let structure = load_structure_arg(&s.structure, s.scale)?;
            let disc = Discretization::new(structure, h)?;
            let system = assemble_system(
                &disc.structure,
                &disc.ms,
                &disc.dm,
                &CoefficientMatrix::Identity,
            )?;
            let mut constants = Vec::new();
            for g in 0..disc.dm.kernel_groups.len() {
                let (c, _) = poincare_constant(&system, &disc.dm, g)?;
                if !quiet {
                    println!("group {g}: C = {c}");
                }
                constants.push(c);
            }
            if let Some(out) = out {
                ensure_out_dir(&out)?;
                let summary = json!({
                    "dofs": disc.dm.n_dofs,
                    "groups": disc.dm.kernel_groups.len(),
                    "constants": constants,
                    "group_measures": disc.dm.group_measures,
                });
                write_file(&out.join("summary.json"), &format!("{summary:#}\n"))?;
            }
            Ok(())
        }

        Command::Diagnose {
            s,
            solution,
            h,
            checks,
            out,
        } => {
            let structure = load_structure_arg(&s.structure, s.scale)?;
            let disc = Discretization::new(structure, h)?;
            let text = std::fs::read_to_string(&solution).map_err(|e| {
                CliError::user("E_IO", format!("cannot read '{}': {e}", solution.display()))
            })?;
            let u = read_solution_csv(&disc, &text)?;
            for c in &checks {
                if !["traces", "cosserat", "h2", "continuity"].contains(&c.as_str()) {
                    return Err(CliError::user("E_ARGS", format!("unknown check '{c}'")));
                }
            }

            let mut diagnostics = serde_json::Map::new();
            if checks.iter().any(|c| c == "traces") {
                let vals = split_field(&disc, &u);
                let mut rows = Vec::new();
                for (j, _) in disc.structure.junctions.iter().enumerate() {
                    let (max, l2) = trace_mismatch(&disc, &vals, j)?;
                    rows.push(json!({"junction": j, "max": max, "l2": l2}));
                }
                diagnostics.insert("trace_mismatch".into(), json!(rows));
            } else {
                diagnostics.insert("trace_mismatch".into(), serde_json::Value::Null);
            }
            if checks.iter().any(|c| c == "h2") {
                let mut per_component = serde_json::Map::new();
                for (ci, c) in disc.structure.components.iter().enumerate() {
                    per_component
                        .insert(c.id.to_string(), json!(h2_seminorm(&disc, &u, ci, None)));
                }
                diagnostics.insert("h2_seminorms".into(), per_component.into());
            } else {
                diagnostics.insert("h2_seminorms".into(), serde_json::Value::Null);
            }
            if checks.iter().any(|c| c == "continuity") {
                let jumps: Vec<f64> = continuity_check(&disc, &u)
                    .into_iter()
                    .map(|(_, j)| j)
                    .collect();
                diagnostics.insert("continuity_jumps".into(), json!(jumps));
            } else {
                diagnostics.insert("continuity_jumps".into(), serde_json::Value::Null);
            }
            if checks.iter().any(|c| c == "cosserat") {
                match cosserat_copy(&disc, &u)
                    .and_then(|b| cosserat_compatibility(&disc, &u, &b, 1e-8))
                {
                    Ok(rep) => {
                        diagnostics.insert("cosserat_pass".into(), json!(rep.pass));
                        diagnostics.insert(
                            "cosserat_mismatch".into(),
                            json!(rep.slot_mismatch.to_vec()),
                        );
                    }
                    Err(LibError::Geometry(msg)) => {
                        diagnostics.insert("cosserat_pass".into(), serde_json::Value::Null);
                        diagnostics.insert("cosserat_note".into(), json!(msg));
                    }
                    Err(e) => return Err(e.into()),
                }
            } else {
                diagnostics.insert("cosserat_pass".into(), serde_json::Value::Null);
            }

            ensure_out_dir(&out)?;
            let value = serde_json::Value::Object(diagnostics);
            write_file(&out.join("diagnostics.json"), &format!("{value:#}\n"))?;
            if !quiet {
                println!(
                    "diagnostics written to {}",
                    out.join("diagnostics.json").display()
                );
            }
            Ok(())
        }
    }
}
