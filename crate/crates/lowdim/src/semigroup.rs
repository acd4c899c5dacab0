//! The discrete generator L = -M^-1 K: its spectral heat semigroup,
//! forward Taylor iterations, and the bounded-iterate smoothness diagnostic.

use crate::assemble::{FemSystem, SparseSym};
use crate::dof::Field;
use crate::error::{Error, Result};
use crate::linalg::{generalized_symmetric_eigen, CholeskyFactor};
use crate::parabolic::m_norm;
use nalgebra::DVector;

/// M-orthonormal eigenpairs of K v = lambda M v, ascending.
pub struct SpectralBasis {
    pub lambdas: Vec<f64>,
    /// Eigenvectors as columns (n x k).
    pub vectors: Vec<DVector<f64>>,
    m: SparseSym,
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn mode(&self, j: usize) -> Field {
        Field(self.vectors[j].clone())
    }

    /// Coefficients of g in the M-orthonormal basis.
    pub fn coefficients(&self, g: &Field) -> Vec<f64> {
        let mg = self.m.matvec(&g.0);
        self.vectors.iter().map(|v| v.dot(&mg)).collect()
    }
}

/// Dense generalized symmetric eigensolve keeping the lowest `k` modes.
pub fn spectral_decompose(system: &FemSystem, k_modes: usize) -> Result<SpectralBasis> {
    let n = system.k.n;
    let k_modes = k_modes.min(n);
    if k_modes == 0 {
        return Err(Error::InvalidArg("requested zero spectral modes".into()));
    }
    let ge = generalized_symmetric_eigen(&system.k.to_dense(), &system.m.to_dense())?;
    let lambdas: Vec<f64> = ge.lambdas[..k_modes]
        .iter()
        .map(|l| l.max(0.0))
        .collect();
    let vectors: Vec<DVector<f64>> = (0..k_modes).map(|j| ge.vector(j)).collect();
    Ok(SpectralBasis {
        lambdas,
        vectors,
        m: system.m.clone(),
    })
}

/// S(t) g = sum_j e^{-lambda_j t} (v_j^T M g) v_j.
pub fn semigroup_apply(basis: &SpectralBasis, t: f64, g: &Field) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::InvalidArg("semigroup time must be nonnegative".into()));
    }
    let coeffs = basis.coefficients(g);
    let n = g.len();
    let mut out = DVector::zeros(n);
    for (j, c) in coeffs.iter().enumerate() {
        out += &basis.vectors[j] * (c * (-basis.lambdas[j] * t).exp());
    }
    Ok(Field(out))
}

/// Result of the forward Taylor iteration.
#[derive(Debug, Clone)]
pub struct TaylorResult {
    pub value: Field,
    /// Number of applications of L (the last added term's order).
    pub terms: usize,
    /// Largest intermediate term M-norm (roundoff indicator).
    pub max_term_norm: f64,
}

/// Partial sums sum_{k<=N} (t^k / k!) L^k g with L = -M^-1 K, truncated when
/// the term's M-norm drops below `tol`.
///
/// The iteration is the forward construction of the semigroup and is
/// intentionally exposed with its stiffness failure mode: when intermediate
/// terms grow so large that accumulated roundoff exceeds `tol`, or the term
/// count passes 1000, the divergence guard trips instead of returning a
/// polluted sum.
pub fn taylor_iterate(system: &FemSystem, t: f64, g: &Field, tol: f64) -> Result<TaylorResult> {
    if t < 0.0 {
        return Err(Error::InvalidArg("time must be nonnegative".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArg("tolerance must be positive".into()));
    }
    if t == 0.0 {
        return Ok(TaylorResult {
            value: g.clone(),
            terms: 0,
            max_term_norm: m_norm(&system.m, g),
        });
    }
    let m_factor = CholeskyFactor::new(system.m.to_dense())?;
    let mut sum = g.0.clone();
    let mut term = g.0.clone();
    let mut max_term_norm = m_norm(&system.m, g);
    for k in 1..=1000usize {
        // term <- (t / k) L term = -(t / k) M^-1 K term
        let kt = system.k.matvec(&term);
        term = m_factor.solve(&kt) * (-t / k as f64);
        sum += &term;
        let norm = m_norm(&system.m, &Field(term.clone()));
        max_term_norm = max_term_norm.max(norm);
        if max_term_norm >= tol / f64::EPSILON {
            return Err(Error::Divergence(format!(
                "forward iteration terms reached M-norm {max_term_norm:.3e}; roundoff \
                 exceeds tolerance {tol:.1e} (t lambda_max too large)"
            )));
        }
        if norm < tol {
            return Ok(TaylorResult {
                value: Field(sum),
                terms: k,
                max_term_norm,
            });
        }
    }
    Err(Error::Divergence(
        "forward iteration did not meet the tolerance within 1000 terms".into(),
    ))
}

/// Growth profile a_n = (s^n / n!) ||L^n g||_M for n <= n_max.
#[derive(Debug, Clone)]
pub struct SmoothnessReport {
    pub a: Vec<f64>,
    /// max_n a_n.
    pub bound: f64,
    /// True when the tail is dominated by the maximum (profile has turned
    /// over and decays).
    pub eventually_decreasing: bool,
}

/// Bounded-iterate diagnostic: reports the growth profile of the operator
/// iterates scaled by s^n / n! instead of gating on it.
pub fn smoothness_diagnostic(
    system: &FemSystem,
    g: &Field,
    s: f64,
    n_max: usize,
) -> Result<SmoothnessReport> {
    if n_max > 60 {
        return Err(Error::InvalidArg("n_max must be at most 60".into()));
    }
    if s <= 0.0 {
        return Err(Error::InvalidArg("horizon s must be positive".into()));
    }
    let m_factor = CholeskyFactor::new(system.m.to_dense())?;
    let mut a = Vec::with_capacity(n_max + 1);
    // Track log of the accumulated scale to avoid overflow; w stays normalized.
    let mut w = g.0.clone();
    let mut log_scale: f64 = 0.0;
    let n0 = m_norm(&system.m, g);
    if n0 > 0.0 {
        w /= n0;
        log_scale = n0.ln();
    }
    a.push(n0);
    for n in 1..=n_max {
        let kt = system.k.matvec(&w);
        w = m_factor.solve(&kt);
        w.neg_mut();
        let norm = m_norm(&system.m, &Field(w.clone()));
        if norm == 0.0 {
            for _ in n..=n_max {
                a.push(0.0);
            }
            break;
        }
        w /= norm;
        log_scale += norm.ln();
        let log_an = log_scale + (n as f64) * s.ln() - ln_factorial(n);
        a.push(log_an.exp());
    }
    let bound = a.iter().fold(0.0_f64, |m, &x| m.max(x));
    let peak = a
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let eventually_decreasing = peak + 1 < a.len()
        && a[peak + 1..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9))
        || a.iter().all(|&x| x == 0.0);
    Ok(SmoothnessReport {
        a,
        bound,
        eventually_decreasing,
    })
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Check of the semigroup law and contraction at (t, s).
#[derive(Debug, Clone)]
pub struct SemigroupCheck {
    /// ||S(t+s) g - S(t) S(s) g||_M.
    pub law_error: f64,
    /// ||S(t) g||_M - ||g||_M (contraction when <= 0 up to roundoff).
    pub contraction_excess: f64,
    pub pass: bool,
}

pub fn semigroup_property_check(
    system: &FemSystem,
    basis: &SpectralBasis,
    t: f64,
    s: f64,
    g: &Field,
    tol: f64,
) -> Result<SemigroupCheck> {
    let both = semigroup_apply(basis, t + s, g)?;
    let stepped = semigroup_apply(basis, t, &semigroup_apply(basis, s, g)?)?;
    let law_error = m_norm(&system.m, &Field(&both.0 - &stepped.0));
    let norm_g = m_norm(&system.m, g);
    let norm_tg = m_norm(&system.m, &semigroup_apply(basis, t, g)?);
    let contraction_excess = norm_tg - norm_g;
    Ok(SemigroupCheck {
        law_error,
        contraction_excess,
        pass: law_error <= tol && contraction_excess <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::{assemble_system, ComponentFn};
    use crate::coeff::CoefficientMatrix;
    use crate::structure::{builtin, BuiltinName, Component, Shape, Structure, Theta};
    use crate::Discretization;
    use nalgebra::Vector3;

    fn segment(h: f64) -> (Discretization, FemSystem) {
        let c = Component::new(
            1,
            Vector3::zeros(),
            vec![Vector3::y()],
            Shape::Interval { a: -1.0, b: 1.0 },
            Theta::Constant(1.0),
        )
        .unwrap();
        let s = Structure::new("segment", vec![c]).unwrap();
        let disc = Discretization::new(s, h).unwrap();
        let system = assemble_system(
            &disc.structure,
            &disc.ms,
            &disc.dm,
            &CoefficientMatrix::Identity,
        )
        .unwrap();
        (disc, system)
    }

    fn cross(h: f64) -> (Discretization, FemSystem) {
        let disc =
            Discretization::new(builtin(BuiltinName::CrossSegments, 1.0).unwrap(), h).unwrap();
        let system = assemble_system(
            &disc.structure,
            &disc.ms,
            &disc.dm,
            &CoefficientMatrix::Identity,
        )
        .unwrap();
        (disc, system)
    }

    fn xorshift(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    fn random_field(n: usize, seed: u64) -> Field {
        let mut r = xorshift(seed);
        Field(DVector::from_fn(n, |_, _| r()))
    }

    #[test]
    fn segment_spectrum_approaches_the_interval_spectrum() {
        let (_disc, system) = segment(0.02);
        let basis = spectral_decompose(&system, 4).unwrap();
        assert!(basis.lambdas[0].abs() < 1e-10);
        let exact = std::f64::consts::PI.powi(2) / 4.0;
        let got = basis.lambdas[1];
        assert!((got - exact).abs() / exact < 0.02, "{got} vs {exact}");
        // Residual and orthonormality invariants.
        for j in 0..basis.len() {
            let v = &basis.vectors[j];
            let res = &system.k.matvec(v) - &(system.m.matvec(v) * basis.lambdas[j]);
            let kn = system.k.matvec(v).norm().max(1e-12);
            assert!(res.norm() <= 1e-9 * kn.max(1.0), "mode {j}");
            for i in 0..basis.len() {
                let dot = basis.vectors[i].dot(&system.m.matvec(v));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_eigenvalue_count_matches_kernel_groups() {
        let disc =
            Discretization::new(builtin(BuiltinName::DiscPlusSegment, 1.0).unwrap(), 0.3).unwrap();
        let system = assemble_system(
            &disc.structure,
            &disc.ms,
            &disc.dm,
            &CoefficientMatrix::Identity,
        )
        .unwrap();
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();
        let zeros = basis.lambdas.iter().filter(|&&l| l < 1e-10).count();
        assert_eq!(zeros, 2);
        assert!(basis.lambdas[2] > 1e-6);
    }

    #[test]
    fn semigroup_identity_modes_and_indicators() {
        let (disc, system) = cross(0.1);
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();
        // S(0) acts as the identity on basis modes.
        for j in [0, 1, basis.len() - 1] {
            let v = basis.mode(j);
            let s0 = semigroup_apply(&basis, 0.0, &v).unwrap();
            assert!(m_norm(&system.m, &Field(&s0.0 - &v.0)) < 1e-10);
        }
        // Eigenmode decay.
        let t = 0.7;
        let j = 2;
        let v = basis.mode(j);
        let st = semigroup_apply(&basis, t, &v).unwrap();
        let expect = &v.0 * (-basis.lambdas[j] * t).exp();
        assert!(m_norm(&system.m, &Field(&st.0 - &expect)) < 1e-10);
        // Group indicators are fixed points.
        let chi = disc.dm.group_indicator(0);
        for t in [0.1, 1.0, 10.0] {
            let s = semigroup_apply(&basis, t, &chi).unwrap();
            assert!(
                m_norm(&system.m, &Field(&s.0 - &chi.0)) < 1e-9,
                "indicator moved at t = {t}"
            );
        }
    }

    #[test]
    fn semigroup_law_and_contraction() {
        let (disc, system) = cross(0.05);
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();
        let g = random_field(disc.dm.n_dofs, 17);
        let check = semigroup_property_check(&system, &basis, 0.3, 0.3, &g, 1e-10).unwrap();
        assert!(check.pass, "law {} contraction {}", check.law_error, check.contraction_excess);
        // Contraction along a time grid.
        let n0 = m_norm(&system.m, &g);
        for t in [0.01, 0.1, 1.0, 5.0, 50.0] {
            let st = semigroup_apply(&basis, t, &g).unwrap();
            assert!(m_norm(&system.m, &st) <= n0 * (1.0 + 1e-12));
        }
        // t = s = 0 is exact.
        let check0 = semigroup_property_check(&system, &basis, 0.0, 0.0, &g, 1e-14).unwrap();
        assert!(check0.law_error < 1e-12);
    }

    #[test]
    fn taylor_matches_the_spectral_route_for_small_t_lambda() {
        let (disc, system) = cross(0.1);
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();
        let lam_max = *basis.lambdas.last().unwrap();
        let tol = 1e-12;

        // t = 0 returns the datum exactly.
        let g = random_field(disc.dm.n_dofs, 3);
        let r0 = taylor_iterate(&system, 0.0, &g, tol).unwrap();
        assert_eq!(r0.terms, 0);
        assert_eq!(r0.value.0, g.0);

        // General datum with t lambda_max <= 1.
        let t = 0.9 / lam_max;
        let taylor = taylor_iterate(&system, t, &g, tol).unwrap();
        let spectral = semigroup_apply(&basis, t, &g).unwrap();
        let diff = m_norm(&system.m, &Field(&taylor.value.0 - &spectral.0));
        assert!(diff <= 10.0 * tol, "diff {diff}");

        // Eigenmode with t lambda_j <= 1. The mode sits at the top of the
        // spectrum: in floating point the iteration amplifies roundoff in
        // every mode at rate (t lambda_max)^k / k!, so only horizons with
        // t lambda_max of order one converge cleanly.
        let j = basis.len() - 1;
        let tj = 1.0 / basis.lambdas[j];
        let v = basis.mode(j);
        let taylor = taylor_iterate(&system, tj, &v, tol).unwrap();
        let expect = &v.0 * (-basis.lambdas[j] * tj).exp();
        assert!(m_norm(&system.m, &Field(&taylor.value.0 - &expect)) <= 10.0 * tol);
    }

    #[test]
    fn taylor_guard_trips_on_stiff_horizons() {
        let (disc, system) = cross(0.1);
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();
        let lam_max = *basis.lambdas.last().unwrap();
        let g = random_field(disc.dm.n_dofs, 11);
        let t = 50.0 / lam_max;
        match taylor_iterate(&system, t, &g, 1e-8) {
            Err(Error::Divergence(_)) => {}
            other => panic!("expected the divergence guard, got {other:?}"),
        }
    }

    #[test]
    fn smoothness_profiles() {
        let (disc, system) = cross(0.1);
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();

        // Group indicator: all iterates vanish (up to assembly roundoff,
        // which the scaled profile re-amplifies at rate (s lambda_max)^n/n!,
        // so probe with s lambda_max = 1).
        let lam_max = *basis.lambdas.last().unwrap();
        let chi = disc.dm.group_indicator(0);
        let rep = smoothness_diagnostic(&system, &chi, 1.0 / lam_max, 20).unwrap();
        for (n, a) in rep.a.iter().enumerate().skip(1) {
            assert!(*a < 1e-9, "a_{n} = {a}");
        }

        // Top eigenmode: a_n = (s lambda)^n / n! exactly (the top of the
        // spectrum is the one mode whose iterates do not get polluted by
        // faster-growing neighbours).
        let j = basis.len() - 1;
        let v = basis.mode(j);
        let lam = basis.lambdas[j];
        let s = 2.0 / lam;
        let rep = smoothness_diagnostic(&system, &v, s, 25).unwrap();
        let mut expect = 1.0;
        for n in 0..=25usize {
            if n > 0 {
                expect *= s * lam / n as f64;
            }
            assert!(
                (rep.a[n] - expect).abs() <= 1e-6 * expect.max(1e-12),
                "n = {n}: {} vs {expect}",
                rep.a[n]
            );
        }
        assert!(rep.eventually_decreasing);

        // Random field: dominated by the top of the spectrum.
        let g = random_field(disc.dm.n_dofs, 29);
        let s = 3.0 / lam_max;
        let rep = smoothness_diagnostic(&system, &g, s, 40).unwrap();
        let norm_g = m_norm(&system.m, &g);
        let mut bound = norm_g;
        for n in 0..=40usize {
            if n > 0 {
                bound *= s * lam_max / n as f64;
            }
            assert!(rep.a[n] <= bound * (1.0 + 1e-9), "n = {n}");
        }
        assert!(rep.eventually_decreasing);
    }

    #[test]
    fn generator_consistency_on_smooth_data() {
        let (disc, system) = cross(0.1);
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();
        // g in the span of the first few modes.
        let g = Field(
            &basis.vectors[1] * 0.8 + &basis.vectors[2] * 0.5 + &basis.vectors[3] * 0.25,
        );
        // L g = -sum lambda_j c_j v_j.
        let lg = Field(
            -(&basis.vectors[1] * (0.8 * basis.lambdas[1])
                + &basis.vectors[2] * (0.5 * basis.lambdas[2])
                + &basis.vectors[3] * (0.25 * basis.lambdas[3])),
        );
        let mut prev = f64::INFINITY;
        for k in 1..=4 {
            let dt = 0.1_f64 / 2.0_f64.powi(k);
            let sdt = semigroup_apply(&basis, dt, &g).unwrap();
            let quotient = (&sdt.0 - &g.0) / dt;
            let err = m_norm(&system.m, &Field(quotient - &lg.0));
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 0.05, "residual {prev}");
    }

    #[test]
    fn spectral_and_stepping_routes_agree() {
        let (disc, system) = cross(0.1);
        let basis = spectral_decompose(&system, disc.dm.n_dofs).unwrap();
        let g = random_field(disc.dm.n_dofs, 77);
        let dt = 0.01;
        let t_end = 0.5;
        let traj = crate::parabolic::solve_parabolic(
            &system,
            &g,
            |_| Field::zeros(disc.dm.n_dofs),
            t_end,
            dt,
            1.0,
        )
        .unwrap();
        let spectral = semigroup_apply(&basis, t_end, &g).unwrap();
        let diff = m_norm(&system.m, &Field(&traj.last().0 - &spectral.0));
        // Backward Euler is first order: the gap shrinks linearly in dt.
        assert!(diff < 1.0 * dt, "diff {diff}");
        let traj2 = crate::parabolic::solve_parabolic(
            &system,
            &g,
            |_| Field::zeros(disc.dm.n_dofs),
            t_end,
            dt / 2.0,
            1.0,
        )
        .unwrap();
        let diff2 = m_norm(&system.m, &Field(&traj2.last().0 - &spectral.0));
        assert!(diff2 < 0.75 * diff, "diff {diff} -> {diff2}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let (_disc, system) = segment(0.25);
        let g = Field::zeros(system.m.n);
        assert!(semigroup_apply(
            &spectral_decompose(&system, 2).unwrap(),
            -1.0,
            &g
        )
        .is_err());
        assert!(taylor_iterate(&system, -1.0, &g, 1e-8).is_err());
        assert!(smoothness_diagnostic(&system, &g, 1.0, 61).is_err());
        assert!(spectral_decompose(&system, 0).is_err());
    }
}
