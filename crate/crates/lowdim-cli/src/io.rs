//! Input plumbing shared by the subcommands: structure sources, expression
//! specs, and output writers.

use lowdim::assemble::ComponentFn;
use lowdim::dof::Field;
use lowdim::expr::{frame_vars, parse_expression, Expr};
use lowdim::structure::BuiltinName;
use lowdim::{Discretization, Structure};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::CliError;

/// Load a structure from a builtin name or a JSON config path.
pub fn load_structure_arg(spec: &str, scale: f64) -> Result<Structure, CliError> {
    if let Ok(name) = spec.parse::<BuiltinName>() {
        return lowdim::builtin(name, scale).map_err(CliError::from);
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|e| CliError::user("E_IO", format!("cannot read '{spec}': {e}")))?;
    let s = lowdim::load_structure(&text)?;
    let report = s.validate();
    if !report.is_ok() {
        return Err(CliError::user("E_VALID", report.to_string()));
    }
    Ok(s)
}

/// Parsed per-component expressions keyed by component index.
pub struct ExprSpec {
    pub exprs: BTreeMap<usize, Expr>,
    /// First evaluation failure (message), recorded during quadrature.
    pub eval_error: Arc<Mutex<Option<String>>>,
}

/// Parse a per-component expression spec: either one expression applied to
/// every component, or `id:expr` pairs separated by `;`.
pub fn parse_spec(
    spec: &str,
    structure: &Structure,
    with_time: bool,
) -> Result<ExprSpec, CliError> {
    let mut exprs = BTreeMap::new();
    let entries: Vec<&str> = spec.split(';').filter(|s| !s.trim().is_empty()).collect();
    let looks_keyed = entries
        .iter()
        .all(|e| e.split_once(':').map(|(k, _)| k.trim().parse::<u32>().is_ok()) == Some(true));
    if looks_keyed && !entries.is_empty() {
        for e in entries {
            let (id, text) = e.split_once(':').unwrap();
            let id: u32 = id.trim().parse().unwrap();
            let ci = structure
                .component_index(id)
                .ok_or_else(|| CliError::user("E_ARGS", format!("no component with id {id}")))?;
            let c = &structure.components[ci];
            let vars = frame_vars(c.dim, with_time);
            let expr = parse_expression(text.trim(), &vars)
                .map_err(|e| CliError::user("E_EXPR", e.to_string()))?;
            exprs.insert(ci, expr);
        }
    } else {
        for (ci, c) in structure.components.iter().enumerate() {
            let vars = frame_vars(c.dim, with_time);
            let expr = parse_expression(spec.trim(), &vars)
                .map_err(|e| CliError::user("E_EXPR", e.to_string()))?;
            exprs.insert(ci, expr);
        }
    }
    Ok(ExprSpec {
        exprs,
        eval_error: Arc::new(Mutex::new(None)),
    })
}

impl ExprSpec {
    /// Instantiate at a fixed time (or timeless) as assembly data. Evaluation
    /// failures poison the result with NaN and record the quadrature point.
    pub fn at_time<'a>(&'a self, t: Option<f64>) -> ComponentFn<'a> {
        let mut f = ComponentFn::new();
        for (&ci, expr) in &self.exprs {
            let err = Arc::clone(&self.eval_error);
            f = f.set(ci, move |frame: &[f64]| {
                let mut vars: Vec<f64> = frame.to_vec();
                if let Some(t) = t {
                    vars.push(t);
                }
                match expr.eval(&vars) {
                    Ok(v) => v,
                    Err(e) => {
                        let mut guard = err.lock().unwrap();
                        if guard.is_none() {
                            *guard = Some(e.to_string());
                        }
                        f64::NAN
                    }
                }
            });
        }
        f
    }

    /// Surface any recorded evaluation failure.
    pub fn check(&self) -> Result<(), CliError> {
        if let Some(msg) = self.eval_error.lock().unwrap().clone() {
            return Err(CliError::user("E_EVAL", msg));
        }
        Ok(())
    }
}

pub fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::user("E_IO", format!("cannot create '{}': {e}", out.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::user("E_IO", format!("cannot write '{}': {e}", path.display())))
}

/// solution.csv: `component_id,local_vertex,x,y,z,value`.
pub fn solution_csv(disc: &Discretization, u: &Field) -> String {
    let mut out = String::from("component_id,local_vertex,x,y,z,value\n");
    for (ci, c) in disc.structure.components.iter().enumerate() {
        let mesh = &disc.ms.meshes[ci];
        for (v, p) in mesh.vertices.iter().enumerate() {
            let x = c.embed(&p[..c.dim as usize]);
            let val = u.0[disc.dm.local_to_global[ci][v]];
            let _ = writeln!(out, "{},{},{},{},{},{}", c.id, v, x.x, x.y, x.z, val);
        }
    }
    out
}

/// Read a solution.csv back onto a matching discretization.
pub fn read_solution_csv(disc: &Discretization, text: &str) -> Result<Field, CliError> {
    let mut u = Field::zeros(disc.dm.n_dofs);
    let mut seen = vec![false; disc.dm.n_dofs];
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "component_id,local_vertex,x,y,z,value" {
                return Err(CliError::user("E_PARSE", "unexpected solution.csv header".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::user(
                "E_PARSE",
                format!("solution.csv line {}: expected 6 fields", lineno + 1),
            ));
        }
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| CliError::user("E_PARSE", format!("bad component id on line {}", lineno + 1)))?;
        let v: usize = fields[1]
            .parse()
            .map_err(|_| CliError::user("E_PARSE", format!("bad vertex id on line {}", lineno + 1)))?;
        let coords: Vec<f64> = fields[2..5]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::user("E_PARSE", format!("bad coordinates on line {}", lineno + 1)))?;
        let value: f64 = fields[5]
            .parse()
            .map_err(|_| CliError::user("E_PARSE", format!("bad value on line {}", lineno + 1)))?;
        let ci = disc
            .structure
            .component_index(id)
            .ok_or_else(|| CliError::user("E_PARSE", format!("unknown component {id}")))?;
        let mesh = &disc.ms.meshes[ci];
        if v >= mesh.n_vertices() {
            return Err(CliError::user(
                "E_VALID",
                format!("vertex {v} outside component {id} (remesh with the original --h?)"),
            ));
        }
        let c = &disc.structure.components[ci];
        let here = c.embed(&mesh.vertices[v][..c.dim as usize]);
        let given = nalgebra::Vector3::new(coords[0], coords[1], coords[2]);
        if (here - given).norm() > 1e-9 {
            return Err(CliError::user(
                "E_VALID",
                format!("vertex {v} of component {id} does not match the mesh (wrong --h?)"),
            ));
        }
        let g = disc.dm.local_to_global[ci][v];
        u.0[g] = value;
        seen[g] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(CliError::user("E_VALID", "solution.csv does not cover every dof".into()));
    }
    Ok(u)
}
