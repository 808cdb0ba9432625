//! Gauss rules on the unit interval and on triangles.

/// Gauss–Legendre rule with `n` points on `[0,1]`; weights sum to one.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// Symmetric triangle rule in barycentric coordinates; weights sum to one.
#[derive(Clone, Copy, Debug)]
pub struct TriRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

const MID: [[f64; 3]; 3] = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
const MID_W: [f64; 3] = [1.0 / 3.0; 3];

const D4A: f64 = 0.445_948_490_915_965;
const D4B: f64 = 0.091_576_213_509_771;
const D4: [[f64; 3]; 6] = [
    [D4A, D4A, 1.0 - 2.0 * D4A],
    [D4A, 1.0 - 2.0 * D4A, D4A],
    [1.0 - 2.0 * D4A, D4A, D4A],
    [D4B, D4B, 1.0 - 2.0 * D4B],
    [D4B, 1.0 - 2.0 * D4B, D4B],
    [1.0 - 2.0 * D4B, D4B, D4B],
];
const D4_W: [f64; 6] = [
    0.223_381_589_678_011,
    0.223_381_589_678_011,
    0.223_381_589_678_011,
    0.109_951_743_655_322,
    0.109_951_743_655_322,
    0.109_951_743_655_322,
];

const D5A: f64 = 0.470_142_064_105_115;
const D5B: f64 = 0.101_286_507_323_456;
const D5: [[f64; 3]; 7] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [D5A, D5A, 1.0 - 2.0 * D5A],
    [D5A, 1.0 - 2.0 * D5A, D5A],
    [1.0 - 2.0 * D5A, D5A, D5A],
    [D5B, D5B, 1.0 - 2.0 * D5B],
    [D5B, 1.0 - 2.0 * D5B, D5B],
    [1.0 - 2.0 * D5B, D5B, D5B],
];
const D5_W: [f64; 7] = [
    0.225,
    0.132_394_152_788_506,
    0.132_394_152_788_506,
    0.132_394_152_788_506,
    0.125_939_180_544_827,
    0.125_939_180_544_827,
    0.125_939_180_544_827,
];

/// Smallest tabulated rule exact for polynomials of the given degree (≤ 5).
pub fn tri_rule(degree: usize) -> TriRule {
    match degree {
        0..=2 => TriRule { points: &MID, weights: &MID_W },
        3..=4 => TriRule { points: &D4, weights: &D4_W },
        5 => TriRule { points: &D5, weights: &D5_W },
        _ => panic!("no triangle rule of degree {degree}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_monomials() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    fn tri_monomial(a: i32, b: i32) -> f64 {
        // ∫ over the reference triangle of x^a y^b divided by its area 1/2.
        let fact = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
        2.0 * fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_rules_exact() {
        for deg in [2, 4, 5] {
            let r = tri_rule(deg);
            for a in 0..=deg as i32 {
                for b in 0..=(deg as i32 - a) {
                    let s: f64 = r
                        .points
                        .iter()
                        .zip(r.weights)
                        .map(|(l, w)| w * l[1].powi(a) * l[2].powi(b))
                        .sum();
                    assert!((s - tri_monomial(a, b)).abs() < 1e-12, "deg {deg} x^{a} y^{b}");
                }
            }
        }
    }
}
