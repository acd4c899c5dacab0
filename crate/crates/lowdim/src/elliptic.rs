//! Weak elliptic Neumann solves with kernel-group mean constraints,
//! Poincare-constant estimation, and convergence studies.
//!
//! The discrete problem is the saddle-point system
//!   [ K  C^T ] [u]   [F]
//!   [ C   0  ] [l] = [0]
//! where each row of C is the mu-weighted mean functional of one kernel
//! group. Data whose group integrals exceed the compatibility tolerance are
//! rejected, never silently projected.

use crate::assemble::{assemble_load, integrate_over, l2_error, ComponentFn, FemSystem, SparseSym};
use crate::coeff::CoefficientMatrix;
use crate::dof::{DofMap, Field};
use crate::error::{Error, Result};
use crate::linalg::{generalized_symmetric_eigen, solve_dense};
use crate::Discretization;
use nalgebra::DVector;

/// Group integrals of the right-hand side must vanish below this tolerance.
pub const COMPAT_TOL: f64 = 1e-9;

/// Per-group integrals int_group theta f (the compatibility residuals).
pub fn check_compatibility(disc: &Discretization, f: &ComponentFn) -> Vec<f64> {
    disc.dm
        .kernel_groups
        .iter()
        .map(|g| integrate_over(&disc.structure, &disc.ms, f, g))
        .collect()
}

/// Constrained solve result.
#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub u: Field,
    /// Euclidean norm of the kernel-orthogonal part of K u - F.
    pub residual: f64,
    /// Mu-integral of u over each kernel group.
    pub group_means: Vec<f64>,
    /// Dirichlet energy u^T K u.
    pub energy: f64,
    /// Lagrange multipliers, one per group.
    pub multipliers: Vec<f64>,
}

/// Rows of the constraint matrix: C_k = (M chi_k) restricted to group dofs.
fn constraint_rows(dm: &DofMap, m: &SparseSym) -> Vec<DVector<f64>> {
    dm.kernel_groups
        .iter()
        .enumerate()
        .map(|(g, _)| m.matvec(&dm.group_indicator(g).0))
        .collect()
}

/// Solve the weak elliptic Neumann problem for a compatible right-hand side.
pub fn solve_elliptic(
    disc: &Discretization,
    system: &FemSystem,
    f: &ComponentFn,
) -> Result<EllipticSolution> {
    let residuals = check_compatibility(disc, f);
    if residuals.iter().any(|r| r.abs() > COMPAT_TOL) {
        return Err(Error::Incompatible(residuals, COMPAT_TOL));
    }
    let load = assemble_load(&disc.structure, &disc.ms, &disc.dm, f);
    solve_constrained(disc, system, &load)
}

/// Solve the saddle-point system for an already assembled load vector.
pub fn solve_constrained(
    disc: &Discretization,
    system: &FemSystem,
    load: &Field,
) -> Result<EllipticSolution> {
    let n = disc.dm.n_dofs;
    let g = disc.dm.kernel_groups.len();
    let rows = constraint_rows(&disc.dm, &system.m);

    let mut full = faer::Mat::zeros(n + g, n + g);
    for r in 0..n {
        for kk in system.k.row_ptr[r]..system.k.row_ptr[r + 1] {
            full[(r, system.k.col_idx[kk])] = system.k.vals[kk];
        }
    }
    for (k, row) in rows.iter().enumerate() {
        for i in 0..n {
            full[(n + k, i)] = row[i];
            full[(i, n + k)] = row[i];
        }
    }

    let mut rhs = DVector::zeros(n + g);
    rhs.rows_mut(0, n).copy_from(&load.0);
    let sol = solve_dense(full, &rhs)?;

    let u = Field(sol.rows(0, n).into_owned());
    let multipliers: Vec<f64> = (0..g).map(|k| sol[n + k]).collect();

    let residual = kernel_orthogonal_residual(&system.k, &u, load, &disc.dm);
    let group_means: Vec<f64> = rows.iter().map(|r| r.dot(&u.0)).collect();
    let energy = system.k.quad_form(&u.0);
    Ok(EllipticSolution {
        u,
        residual,
        group_means,
        energy,
        multipliers,
    })
}

/// Euclidean norm of K u - F with the span of the group indicators removed.
pub fn kernel_orthogonal_residual(k: &SparseSym, u: &Field, f: &Field, dm: &DofMap) -> f64 {
    let mut r = k.matvec(&u.0) - &f.0;
    for g in 0..dm.kernel_groups.len() {
        let chi = dm.group_indicator(g).0;
        let denom = chi.dot(&chi);
        if denom > 0.0 {
            let c = chi.dot(&r) / denom;
            r -= chi * c;
        }
    }
    r.norm()
}

/// Discrete Poincare constant of one kernel group: the reciprocal of the
/// smallest nonzero eigenvalue of K v = lambda M v restricted to the group's
/// dofs, together with the minimizing field (M-normalized, zero off-group).
pub fn poincare_constant(
    system: &FemSystem,
    dm: &DofMap,
    group: usize,
) -> Result<(f64, Field)> {
    if group >= dm.kernel_groups.len() {
        return Err(Error::InvalidArg(format!("no kernel group {group}")));
    }
    let dofs = dm.group_dofs(group);
    let nd = dofs.len();
    if nd < 2 {
        return Err(Error::Eigen("group carries fewer than 2 dofs".into()));
    }
    let kg = faer::Mat::from_fn(nd, nd, |i, j| system.k.entry(dofs[i], dofs[j]));
    let mg = faer::Mat::from_fn(nd, nd, |i, j| system.m.entry(dofs[i], dofs[j]));
    let ge = generalized_symmetric_eigen(&kg, &mg)?;
    let scale = ge.lambdas.last().copied().unwrap_or(1.0).max(1.0);
    // Exactly one zero mode per (connected) group.
    let lam = ge.lambdas[1];
    if lam <= 1e-10 * scale {
        return Err(Error::Eigen(format!(
            "group {group} has a repeated zero eigenvalue (lambda_2 = {lam:.3e})"
        )));
    }
    let w = ge.vector(1);
    let mut field = Field::zeros(dm.n_dofs);
    for (i, &d) in dofs.iter().enumerate() {
        field.0[d] = w[i];
    }
    Ok((1.0 / lam, field))
}

/// Mesh-refinement study against an analytic reference.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// rates[i] = log2(errors[i] / errors[i+1]) for consecutive h halvings.
    pub rates: Vec<f64>,
}

pub fn convergence_study(
    structure: &crate::Structure,
    coeff: &CoefficientMatrix,
    f: &ComponentFn,
    oracle: &ComponentFn,
    h_list: &[f64],
) -> Result<ConvergenceTable> {
    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let disc = Discretization::new(structure.clone(), h)?;
        let system = crate::assemble::assemble_system(&disc.structure, &disc.ms, &disc.dm, coeff)?;
        let sol = solve_elliptic(&disc, &system, f)?;
        errors.push(l2_error(&disc.structure, &disc.ms, &disc.dm, &sol.u, oracle));
    }
    let rates = errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect();
    Ok(ConvergenceTable {
        h: h_list.to_vec(),
        errors,
        rates,
    })
}
