#![allow(dead_code)]

use ricci_union::geometry::{EvolvingMetric, ModelManifold};

/// Second differences along geodesics in an orthonormal frame at `x`: a
/// normal-coordinate Laplacian of `f` on one factor, in `g(t)` units.
pub fn fd_laplacian_at(metric: &EvolvingMetric, t: f64, x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let m: &ModelManifold = &metric.manifold;
    let s = metric.length_scale(t).unwrap();
    let f0 = f(x);
    let mut acc = 0.0;
    for e in m.tangent_basis(x) {
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        acc += f(&m.exp_map(x, &e, h)) + f(&m.exp_map(x, &neg, h)) - 2.0 * f0;
    }
    acc / (s * h).powi(2)
}

/// Product Laplacian `Δ_a + Δ_b` of `g(a, b)` by finite differences.
pub fn fd_product_laplacian(
    metric: &EvolvingMetric,
    t: f64,
    a: &[f64],
    b: &[f64],
    h: f64,
    g: impl Fn(&[f64], &[f64]) -> f64,
) -> f64 {
    fd_laplacian_at(metric, t, a, h, |x| g(x, b)) + fd_laplacian_at(metric, t, b, h, |y| g(a, y))
}

/// Metric distance at time `t` from unit-scale coordinates.
pub fn metric_distance(metric: &EvolvingMetric, t: f64, a: &[f64], b: &[f64]) -> f64 {
    metric.length_scale(t).unwrap() * metric.manifold.unit_distance(a, b)
}

/// Deterministic point stream for oracle loops.
pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
