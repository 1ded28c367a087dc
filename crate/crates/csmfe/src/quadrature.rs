//! Fixed integration rules on the reference triangle and on element edges.
//!
//! Area terms use a 13-point symmetric rule of polynomial degree 7; edge
//! integrals use Gauss-Legendre mapped to `[0, L]`.

use std::sync::OnceLock;

/// Quadrature rule on the reference triangle {r >= 0, s >= 0, r + s <= 1}.
///
/// Weights sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

/// Gauss rule on an edge of length `L`, parameterized by arc length in `[0, L]`.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// 13-point symmetric triangle rule, exact for polynomials of degree <= 7.
///
/// Orbit data normalized so that the weights sum to 1 before scaling by the
/// reference area; the centroid weight is negative, as published.
pub fn triangle_rule_13() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut points = Vec::with_capacity(13);
        let mut weights = Vec::with_capacity(13);
        let mut push = |l1: f64, l2: f64, l3: f64, w: f64| {
            // barycentric (l1, l2, l3) with vertex 1 at the origin: r = l2, s = l3
            debug_assert!((l1 + l2 + l3 - 1.0).abs() < 1e-14);
            points.push((l2, l3));
            weights.push(w * 0.5);
        };

        push(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, -0.149_570_044_467_670);

        let orbit3 = [
            (0.479_308_067_841_923, 0.260_345_966_079_038, 0.175_615_257_433_204),
            (0.869_739_794_195_568, 0.065_130_102_902_216, 0.053_347_235_608_839),
        ];
        for &(a, b, w) in &orbit3 {
            push(a, b, b, w);
            push(b, a, b, w);
            push(b, b, a, w);
        }

        let (a, b, c, w) = (
            0.638_444_188_569_809,
            0.312_865_496_004_875,
            0.048_690_315_425_316,
            0.077_113_760_890_257,
        );
        push(a, b, c, w);
        push(a, c, b, w);
        push(b, a, c, w);
        push(b, c, a, w);
        push(c, a, b, w);
        push(c, b, a, w);

        TriangleRule { points, weights }
    })
}

/// Gauss-Legendre rule with `n_points` nodes on `[0, length]`.
pub fn edge_rule(n_points: usize, length: f64) -> EdgeRule {
    assert!(n_points >= 1, "edge rule needs at least one point");
    let (nodes, weights) = gauss_legendre(n_points);
    EdgeRule {
        points: nodes.iter().map(|x| 0.5 * length * (x + 1.0)).collect(),
        weights: weights.iter().map(|w| 0.5 * length * w).collect(),
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], by Newton
/// iteration on the Legendre polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
