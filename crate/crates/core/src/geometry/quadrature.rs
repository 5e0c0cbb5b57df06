//! Direction sets on the unit sphere `S^{k-1}` of `R^k`.
//!
//! Every set returned here carries nonnegative weights summing to one, so
//! quadrature against it is a convex combination.

use std::f64::consts::PI;

/// A unit vector in `R^k` with its quadrature weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub vector: Vec<f64>,
    pub weight: f64,
}

/// Number of Fibonacci-lattice nodes used on `S^2` for quadrature order `q`.
pub fn fibonacci_count(q: usize) -> usize {
    (q * q / 4).max(4)
}

/// Quadrature nodes for the uniform probability measure on `S^{k-1}`.
///
/// * `k = 1`: the two points `±1`.
/// * `k = 2`: `q` equally spaced angles (exact for trigonometric polynomials of degree `< q`).
/// * `k = 3`: a Fibonacci lattice with [`fibonacci_count`] nodes.
/// * `k >= 4`: a product midpoint rule in hyperspherical angles.
pub fn unit_directions(k: usize, q: usize) -> Vec<Direction> {
    assert!(k >= 1, "ambient dimension must be positive");
    assert!(q >= 2, "quadrature order must be at least 2");
    match k {
        1 => vec![
            Direction { vector: vec![1.0], weight: 0.5 },
            Direction { vector: vec![-1.0], weight: 0.5 },
        ],
        2 => {
            let w = 1.0 / q as f64;
            (0..q)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / q as f64;
                    Direction { vector: vec![a.cos(), a.sin()], weight: w }
                })
                .collect()
        }
        3 => fibonacci_sphere(fibonacci_count(q)),
        _ => hyperspherical_product(k, q),
    }
}

fn fibonacci_sphere(count: usize) -> Vec<Direction> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    let w = 1.0 / count as f64;
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Direction { vector: vec![rho * phi.cos(), rho * phi.sin(), z], weight: w }
        })
        .collect()
}

fn hyperspherical_product(k: usize, q: usize) -> Vec<Direction> {
    let polar = (q / 2).max(2);
    let azimuthal = q;
    // Angles theta_1..theta_{k-2} in (0, pi), density sin^{k-1-i}(theta_i).
    let thetas: Vec<f64> = (0..polar).map(|l| (l as f64 + 0.5) * PI / polar as f64).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; k - 2];
    loop {
        let mut w = 1.0;
        for (i, &l) in idx.iter().enumerate() {
            w *= thetas[l].sin().powi((k - 2 - i) as i32);
        }
        for a in 0..azimuthal {
            let phi = 2.0 * PI * a as f64 / azimuthal as f64;
            let mut v = Vec::with_capacity(k);
            let mut sin_prod = 1.0;
            for &l in &idx {
                v.push(sin_prod * thetas[l].cos());
                sin_prod *= thetas[l].sin();
            }
            v.push(sin_prod * phi.cos());
            v.push(sin_prod * phi.sin());
            out.push(Direction { vector: v, weight: w });
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                let total: f64 = out.iter().map(|d| d.weight).sum();
                for d in &mut out {
                    d.weight /= total;
                }
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < polar {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
