//! Variational solvers for elliptic and parabolic problems on
//! low-dimensional structures: unions of 1- and 2-dimensional flat
//! components glued along junctions in R^3, carrying the measure
//! sum_i theta_i * H^{dim S_i} restricted to S_i.
//!
//! The crate builds junction-conforming piecewise-linear finite elements
//! whose degree-of-freedom coupling follows the trace behaviour of the
//! underlying Sobolev space H^1_mu: components of equal dimension are glued
//! continuously across their intersection, components of different
//! dimensions stay decoupled. On top of the assembled stiffness/mass pencil
//! it provides constrained elliptic Neumann solves, theta-scheme parabolic
//! stepping, a spectral heat semigroup with forward Taylor iterations, and
//! regularity diagnostics (junction traces, inclusion-exclusion extension,
//! Cosserat copy fields, discrete H^2 seminorms).

pub mod assemble;
pub mod coeff;
pub mod dof;
pub mod elliptic;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod mesh;
pub mod parabolic;
pub mod quad;
pub mod regularity;
pub mod semigroup;
pub mod structure;

pub use dof::{build_dof_map, group_projection, kernel_groups, DofMap, Field};
pub use error::{Error, Result};
pub use mesh::{mesh, MeshSet};
pub use structure::{builtin, detect_junctions, load_structure, BuiltinName, Structure};

/// A validated structure together with its conforming mesh and dof map;
/// the shared context for assembly, solves, and diagnostics.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub structure: Structure,
    pub ms: MeshSet,
    pub dm: DofMap,
}

impl Discretization {
    pub fn new(structure: Structure, h: f64) -> Result<Self> {
        let ms = mesh(&structure, h)?;
        let dm = build_dof_map(&structure, &ms)?;
        Ok(Discretization { structure, ms, dm })
    }

    pub fn n_dofs(&self) -> usize {
        self.dm.n_dofs
    }

    pub fn h(&self) -> f64 {
        self.ms.h
    }
}
