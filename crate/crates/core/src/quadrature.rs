//! Quadrature on the reference triangle `(0,0), (1,0), (0,1)` and on intervals.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unsupported quadrature degree {0} (supported: 1..=10)")]
pub struct UnsupportedDegree(pub usize);

/// Points in reference coordinates with weights summing to the reference area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Highest total degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates `(1 - x - y, x, y)` of every point.
    pub fn barycentric(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&[x, y], &w)| ([1.0 - x - y, x, y], w))
    }

    /// Integral of `f` over the reference triangle.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

// Fully symmetric rules written as barycentric orbits, weights normalised to sum 1.
enum Orbit {
    Centroid(f64),
    /// `(a, a, 1 - 2a)` and permutations.
    Two(f64, f64),
    /// `(a, b, 1 - a - b)` and all six permutations.
    Three(f64, f64, f64),
}

const DEG2: &[Orbit] = &[Orbit::Two(1.0 / 6.0, 1.0 / 3.0)];

const DEG4: &[Orbit] = &[
    Orbit::Two(0.445_948_490_915_964_9, 0.223_381_589_678_011_47),
    Orbit::Two(0.091_576_213_509_770_74, 0.109_951_743_655_321_87),
];

const DEG5: &[Orbit] = &[
    Orbit::Centroid(0.225),
    Orbit::Two(0.470_142_064_105_115_1, 0.132_394_152_788_506_2),
    Orbit::Two(0.101_286_507_323_456_34, 0.125_939_180_544_827_15),
];

const DEG6: &[Orbit] = &[
    Orbit::Two(0.249_286_745_170_910_42, 0.116_786_275_726_379_37),
    Orbit::Two(0.063_089_014_491_502_23, 0.050_844_906_370_206_82),
    Orbit::Three(
        0.053_145_049_844_816_947,
        0.310_352_451_033_784_4,
        0.082_851_075_618_373_57,
    ),
];

const DEG8: &[Orbit] = &[
    Orbit::Centroid(0.144_315_607_677_787_17),
    Orbit::Two(0.459_292_588_292_723_2, 0.095_091_634_267_284_62),
    Orbit::Two(0.170_569_307_751_760_2, 0.103_217_370_534_718_25),
    Orbit::Two(0.050_547_228_317_030_98, 0.032_458_497_623_198_08),
    Orbit::Three(
        0.008_394_777_409_957_605,
        0.263_112_829_634_638_1,
        0.027_230_314_174_434_994,
    ),
];

fn from_orbits(orbits: &[Orbit], degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut push = |l: [f64; 3], w: f64| {
        points.push([l[1], l[2]]);
        weights.push(0.5 * w);
    };
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => push([1.0 / 3.0; 3], w),
            Orbit::Two(a, w) => {
                let b = 1.0 - 2.0 * a;
                for l in [[a, a, b], [a, b, a], [b, a, a]] {
                    push(l, w);
                }
            }
            Orbit::Three(a, b, w) => {
                let c = 1.0 - a - b;
                for l in [
                    [a, b, c],
                    [a, c, b],
                    [b, a, c],
                    [b, c, a],
                    [c, a, b],
                    [c, b, a],
                ] {
                    push(l, w);
                }
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Collapsed Gauss product rule averaged over the six vertex permutations.
fn symmetrised_collapsed(degree: usize) -> QuadratureRule {
    let n = (degree + 3) / 2;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            let l1 = u;
            let l2 = v * (1.0 - u);
            let l0 = 1.0 - l1 - l2;
            let wt = 0.25 * w[i] * w[j] * (1.0 - u) / 6.0;
            for l in [
                [l0, l1, l2],
                [l0, l2, l1],
                [l1, l0, l2],
                [l1, l2, l0],
                [l2, l0, l1],
                [l2, l1, l0],
            ] {
                points.push([l[1], l[2]]);
                weights.push(wt);
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Symmetric triangle rule exact for polynomials of total degree `degree`.
pub fn quad_rule(degree: usize) -> Result<QuadratureRule, UnsupportedDegree> {
    match degree {
        1 => Ok(QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree: 1,
        }),
        2 => Ok(from_orbits(DEG2, 2)),
        3 | 4 => Ok(from_orbits(DEG4, 4)),
        5 => Ok(from_orbits(DEG5, 5)),
        6 => Ok(from_orbits(DEG6, 6)),
        7 | 8 => Ok(from_orbits(DEG8, 8)),
        9 | 10 => Ok(symmetrised_collapsed(degree)),
        _ => Err(UnsupportedDegree(degree)),
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss points on the segment `a -> b`: `(parameter t in [0,1], point, weight * length)`.
pub fn segment_points(a: [f64; 2], b: [f64; 2], n: usize) -> Vec<(f64, [f64; 2], f64)> {
    let (x, w) = gauss_legendre(n);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| {
            let t = 0.5 * (xi + 1.0);
            (
                t,
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                0.5 * wi * len,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // Dirichlet integral over the reference triangle.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn centroid_rule_area() {
        let r = quad_rule(1).unwrap();
        assert_eq!(r.integrate(|_, _| 1.0), 0.5);
    }

    #[test]
    fn closed_form_monomials() {
        assert!(
            (quad_rule(6).unwrap().integrate(|x, y| x * x * y.powi(3)) - 1.0 / 420.0).abs() < 1e-15
        );
        assert!((quad_rule(2).unwrap().integrate(|x, _| x * x) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn every_rule_is_exact_to_its_degree() {
        for degree in 1..=10 {
            let r = quad_rule(degree).unwrap();
            assert!(r.degree >= degree);
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let got = r.integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    let want = monomial_exact(a, b);
                    assert!(
                        (got - want).abs() < 1e-14,
                        "degree {degree}: x^{a} y^{b}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn rules_are_symmetric() {
        for degree in 1..=10 {
            let r = quad_rule(degree).unwrap();
            // Swapping the two reference coordinates must map the rule onto itself.
            for (p, w) in r.points.iter().zip(&r.weights) {
                let found = r.points.iter().zip(&r.weights).any(|(q, v)| {
                    (q[0] - p[1]).abs() < 1e-14
                        && (q[1] - p[0]).abs() < 1e-14
                        && (v - w).abs() < 1e-15
                });
                assert!(found, "degree {degree} not symmetric");
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        assert_eq!(quad_rule(0), Err(UnsupportedDegree(0)));
        assert_eq!(quad_rule(11), Err(UnsupportedDegree(11)));
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let want = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                assert!((got - want).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
