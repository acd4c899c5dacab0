//! Fixed quadrature rules: Gauss on segments, a degree-4 rule on triangles,
//! and tensor Gauss panels in polar coordinates for exact disc geometry.

/// 3-point Gauss-Legendre on [0, 1]; exact for polynomials up to degree 5.
pub const GAUSS3_01: [(f64, f64); 3] = {
    // nodes (1 +- sqrt(3/5))/2, weights (5/18, 8/18, 5/18)
    [
        (0.112701665379258311, 0.277777777777777778),
        (0.5, 0.444444444444444444),
        (0.887298334620741689, 0.277777777777777778),
    ]
};

/// 5-point Gauss-Legendre on [0, 1]; exact up to degree 9.
pub const GAUSS5_01: [(f64, f64); 5] = [
    (0.046910077030668004, 0.118463442528094544),
    (0.230765344947158454, 0.239314335249683234),
    (0.5, 0.284444444444444444),
    (0.769234655052841546, 0.239314335249683234),
    (0.953089922969331996, 0.118463442528094544),
];

/// 6-point degree-4 rule on the reference triangle, in barycentric
/// coordinates; weights sum to 1 (scale by element area).
pub const TRI_DEG4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915965;
    const A0: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223381589678011;
    const B1: f64 = 0.091576213509771;
    const B0: f64 = 1.0 - 2.0 * B1;
    const W2: f64 = 0.109951743655322;
    [
        ([A0, A1, A1], W1),
        ([A1, A0, A1], W1),
        ([A1, A1, A0], W1),
        ([B0, B1, B1], W2),
        ([B1, B0, B1], W2),
        ([B1, B1, B0], W2),
    ]
};

/// Composite Gauss quadrature of `f` over the interval [a, b] split into `n`
/// panels (3-point rule per panel).
pub fn integrate_interval(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let x0 = a + h * k as f64;
        for (q, w) in GAUSS3_01 {
            acc += w * h * f(x0 + q * h);
        }
    }
    acc
}

/// Degree-4 quadrature of `f(u, v)` over a triangle given by its vertices.
pub fn integrate_triangle(
    p0: [f64; 2],
    p1: [f64; 2],
    p2: [f64; 2],
    mut f: impl FnMut(f64, f64) -> f64,
) -> f64 {
    let area = 0.5
        * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
    let mut acc = 0.0;
    for (bary, w) in TRI_DEG4 {
        let u = bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0];
        let v = bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1];
        acc += w * f(u, v);
    }
    acc * area
}

/// Quadrature of `f(u, v)` over the exact disc |p - center| <= r, using a
/// polar grid of `nr x na` panels with tensor 5-point Gauss per panel. The
/// angular grid starts at `theta0` so a prescribed diameter direction can be
/// aligned with panel edges.
pub fn integrate_disc(
    center: [f64; 2],
    r: f64,
    theta0: f64,
    nr: usize,
    na: usize,
    mut f: impl FnMut(f64, f64) -> f64,
) -> f64 {
    let nr = nr.max(1);
    let na = na.max(4);
    let dr = r / nr as f64;
    let da = std::f64::consts::TAU / na as f64;
    let mut acc = 0.0;
    for kr in 0..nr {
        let r0 = dr * kr as f64;
        for ka in 0..na {
            let a0 = theta0 + da * ka as f64;
            for (qr, wr) in GAUSS5_01 {
                let rr = r0 + qr * dr;
                for (qa, wa) in GAUSS5_01 {
                    let th = a0 + qa * da;
                    let u = center[0] + rr * th.cos();
                    let v = center[1] + rr * th.sin();
                    acc += wr * wa * dr * da * rr * f(u, v);
                }
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss3_exact_to_degree_5() {
        for d in 0..=5u32 {
            let exact = 1.0 / (d as f64 + 1.0);
            let got = integrate_interval(0.0, 1.0, 1, |x| x.powi(d as i32));
            assert!((got - exact).abs() < 1e-14, "degree {d}: {got} vs {exact}");
        }
        // Degree 6 should not be exact on one panel.
        let got = integrate_interval(0.0, 1.0, 1, |x| x.powi(6));
        assert!((got - 1.0 / 7.0).abs() > 1e-9);
    }

    #[test]
    fn triangle_rule_exact_to_degree_4() {
        // Reference triangle (0,0)-(1,0)-(0,1): int u^a v^b = a! b! / (a+b+2)!
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>().max(1.0);
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let got = integrate_triangle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], |u, v| {
                    u.powi(a as i32) * v.powi(b as i32)
                });
                assert!(
                    (got - exact).abs() < 1e-15,
                    "u^{a} v^{b}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn disc_rule_area_and_moments() {
        let area = integrate_disc([0.0, 0.0], 1.0, 0.0, 4, 16, |_, _| 1.0);
        assert!((area - PI).abs() < 1e-13);
        // int u^2 over unit disc = pi/4
        let m2 = integrate_disc([0.0, 0.0], 1.0, 0.3, 4, 16, |u, _| u * u);
        assert!((m2 - PI / 4.0).abs() < 1e-12);
        // Shifted center
        let m = integrate_disc([2.0, -1.0], 0.5, 0.0, 4, 16, |u, _| u);
        assert!((m - 2.0 * PI * 0.25).abs() < 1e-12);
    }

    #[test]
    fn disc_rule_handles_oscillatory_integrands() {
        // Radial function with zero integral: d/dr identity makes
        // int_0^1 (-4 pi sin(pi r^2) - 4 pi^2 r^2 cos(pi r^2)) r dr = 0.
        let laplacian = |u: f64, v: f64| {
            let r2 = u * u + v * v;
            -4.0 * PI * (PI * r2).sin() - 4.0 * PI * PI * r2 * (PI * r2).cos()
        };
        let got = integrate_disc([0.0, 0.0], 1.0, 0.0, 20, 126, laplacian);
        assert!(got.abs() < 1e-10, "got {got}");
    }
}
