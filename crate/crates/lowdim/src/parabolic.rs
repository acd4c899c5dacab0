//! Theta-scheme time stepping for the weak parabolic problem, energy
//! monitoring, and asymptotic comparison against the stationary solution.
//!
//! One step solves
//!   (M + theta dt K) u_{n+1} = (M - (1-theta) dt K) u_n
//!                              + dt M (theta f_{n+1} + (1-theta) f_n),
//! with f given as nodal fields. The system matrix is factored once per
//! trajectory.

use crate::assemble::{FemSystem, SparseSym};
use crate::dof::{DofMap, Field};
use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;
use nalgebra::DVector;

/// Discrete Dirichlet energy u^T K u.
pub fn energy(k: &SparseSym, u: &Field) -> f64 {
    k.quad_form(&u.0)
}

/// M-norm sqrt(u^T M u).
pub fn m_norm(m: &SparseSym, u: &Field) -> f64 {
    m.quad_form(&u.0).max(0.0).sqrt()
}

fn step_matrix(system: &FemSystem, dt: f64, theta: f64) -> faer::Mat<f64> {
    let n = system.m.n;
    let mut a = faer::Mat::zeros(n, n);
    for r in 0..n {
        for k in system.m.row_ptr[r]..system.m.row_ptr[r + 1] {
            a[(r, system.m.col_idx[k])] += system.m.vals[k];
        }
        for k in system.k.row_ptr[r]..system.k.row_ptr[r + 1] {
            a[(r, system.k.col_idx[k])] += theta * dt * system.k.vals[k];
        }
    }
    a
}

/// A single theta step. Prefer [`Stepper`] for trajectories: it reuses the
/// factorization.
pub fn step_theta(
    system: &FemSystem,
    u: &Field,
    f_n: &Field,
    f_np1: &Field,
    dt: f64,
    theta: f64,
) -> Result<Field> {
    let stepper = Stepper::new(system, dt, theta)?;
    Ok(stepper.step(u, f_n, f_np1))
}

/// Reusable factorization of (M + theta dt K).
pub struct Stepper<'a> {
    system: &'a FemSystem,
    factor: CholeskyFactor,
    dt: f64,
    theta: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a FemSystem, dt: f64, theta: f64) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::InvalidArg("dt must be positive".into()));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArg("theta must lie in [0, 1]".into()));
        }
        let factor = CholeskyFactor::new(step_matrix(system, dt, theta))?;
        Ok(Stepper {
            system,
            factor,
            dt,
            theta,
        })
    }

    pub fn step(&self, u: &Field, f_n: &Field, f_np1: &Field) -> Field {
        let (dt, theta) = (self.dt, self.theta);
        let mut rhs = self.system.m.matvec(&u.0);
        if theta < 1.0 {
            rhs -= self.system.k.matvec(&u.0) * ((1.0 - theta) * dt);
        }
        let blend: DVector<f64> = &f_np1.0 * theta + &f_n.0 * (1.0 - theta);
        rhs += self.system.m.matvec(&blend) * dt;
        Field(self.factor.solve(&rhs))
    }
}

/// Trajectory of a theta-scheme run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub energies: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory holds the initial state")
    }
}

/// Time-step the parabolic problem from `u0` with nodal forcing `f(t)`.
/// Records ceil(T/dt) steps plus the initial state.
pub fn solve_parabolic(
    system: &FemSystem,
    u0: &Field,
    forcing: impl Fn(f64) -> Field,
    t_end: f64,
    dt: f64,
    theta: f64,
) -> Result<Trajectory> {
    if t_end <= 0.0 {
        return Err(Error::InvalidArg("horizon T must be positive".into()));
    }
    let stepper = Stepper::new(system, dt, theta)?;
    let n_steps = (t_end / dt).ceil() as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut fields = Vec::with_capacity(n_steps + 1);
    let mut energies = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    energies.push(energy(&system.k, u0));
    fields.push(u0.clone());
    let mut u = u0.clone();
    let mut f_n = forcing(0.0);
    for step in 1..=n_steps {
        let t = dt * step as f64;
        let f_np1 = forcing(t);
        u = stepper.step(&u, &f_n, &f_np1);
        f_n = f_np1;
        times.push(t);
        energies.push(energy(&system.k, &u));
        fields.push(u.clone());
    }
    Ok(Trajectory {
        times,
        fields,
        energies,
    })
}

/// Distance report of a trajectory against a stationary solution.
#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    /// d_n = ||u_n - u*||_M per recorded step.
    pub distances: Vec<f64>,
    /// e_n = (u_n - u*)^T K (u_n - u*) per recorded step.
    pub energy_gaps: Vec<f64>,
    /// Whether d_n is non-increasing within slack 1e-12.
    pub monotone: bool,
    pub final_distance: f64,
    pub final_energy_gap: f64,
}

pub fn asymptotic_check(
    system: &FemSystem,
    traj: &Trajectory,
    u_star: &Field,
) -> Result<AsymptoticReport> {
    if u_star.len() != system.m.n {
        return Err(Error::InvalidArg(
            "stationary field does not match the dof map".into(),
        ));
    }
    let mut distances = Vec::with_capacity(traj.fields.len());
    let mut energy_gaps = Vec::with_capacity(traj.fields.len());
    for u in &traj.fields {
        let d = Field(&u.0 - &u_star.0);
        distances.push(m_norm(&system.m, &d));
        energy_gaps.push(energy(&system.k, &d));
    }
    let monotone = distances.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(AsymptoticReport {
        monotone,
        final_distance: *distances.last().unwrap(),
        final_energy_gap: *energy_gaps.last().unwrap(),
        distances,
        energy_gaps,
    })
}

/// Mu-integral of u over each kernel group (conserved along trajectories
/// with group-compatible forcing).
pub fn group_integrals(system: &FemSystem, dm: &DofMap, u: &Field) -> Vec<f64> {
    (0..dm.kernel_groups.len())
        .map(|g| dm.group_indicator(g).0.dot(&system.m.matvec(&u.0)))
        .collect()
}
