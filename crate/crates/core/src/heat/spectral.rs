//! Exact heat evolution by diagonalizing the Laplacian.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::grid::{GridField, Lattice};
use crate::error::{Error, Result};
use crate::geometry::EvolvingMetric;

/// Default maximal spherical-harmonic degree of the sphere oracle.
pub const DEFAULT_DEGREE_CAP: usize = 10;
/// Relative least-squares residual above which a sphere field counts as not band-limited.
pub const BAND_LIMIT_TOL: f64 = 1e-6;

/// Solve `∂u/∂t = Δ_{g(t)} u` on `[a, b]` from `field` (sampled at `a`).
pub fn spectral_oracle(metric: &EvolvingMetric, field: &GridField, window: (f64, f64)) -> Result<GridField> {
    spectral_oracle_with_cap(metric, field, window, DEFAULT_DEGREE_CAP)
}

pub fn spectral_oracle_with_cap(
    metric: &EvolvingMetric,
    field: &GridField,
    window: (f64, f64),
    degree_cap: usize,
) -> Result<GridField> {
    let (a, b) = window;
    if !(b >= a) {
        return Err(Error::InvalidParameter(format!("window ({a}, {b}) is reversed")));
    }
    field.lattice.check_manifold(&metric.manifold)?;
    metric.check_time(a)?;
    metric.check_time(b)?;
    // g(t) = λ(t) g(0) gives Δ_{g(t)} = Δ_{g(0)}/λ(t)
    let tau = metric.conformal_time(a, b)?;
    let s0 = metric.manifold.base_scale;
    let values = match &field.lattice {
        Lattice::Torus { dim, n } => torus_evolve(&field.values, *dim, *n, |k2| (-(2.0 * PI).powi(2) * k2 / (s0 * s0) * tau).exp()),
        Lattice::Sphere(_) => {
            let coeffs = fit_harmonics(&field.lattice, &field.values, degree_cap)?;
            let mut scaled = coeffs.clone();
            let mut idx = 0;
            for l in 0..=degree_cap {
                let f = (-((l * (l + 1)) as f64) / (s0 * s0) * tau).exp();
                for _ in 0..2 * l + 1 {
                    scaled[idx] *= f;
                    idx += 1;
                }
            }
            synthesize(&field.lattice, &scaled, degree_cap)
        }
    };
    GridField::new(field.component, field.lattice.clone(), values, b)
}

fn torus_evolve(values: &[f64], dim: usize, n: usize, multiplier: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let lines = |data: &mut Vec<Complex<f64>>, fft: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for axis in 0..dim {
            let stride = n.pow(axis as u32);
            for start in 0..data.len() {
                if (start / stride) % n != 0 {
                    continue;
                }
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = data[start + k * stride];
                }
                fft.process(&mut buf);
                for (k, b) in buf.iter().enumerate() {
                    data[start + k * stride] = *b;
                }
            }
        }
    };
    lines(&mut data, &fwd);
    let wave = |i: usize| -> f64 {
        let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        k * k
    };
    for (idx, c) in data.iter_mut().enumerate() {
        let mut k2 = 0.0;
        let mut r = idx;
        for _ in 0..dim {
            k2 += wave(r % n);
            r /= n;
        }
        *c *= multiplier(k2);
    }
    lines(&mut data, &inv);
    let scale = 1.0 / data.len() as f64;
    data.iter().map(|c| c.re * scale).collect()
}

/// Real spherical harmonics up to `cap` at the unit vector `p`, ordered by `(l, m = −l..=l)`.
///
/// Uses fully normalized associated Legendre functions, so every basis
/// function has mean square one over the sphere.
pub fn real_harmonics(p: &[f64], cap: usize) -> Vec<f64> {
    let (x, y, z) = (p[0], p[1], p[2]);
    let st = (x * x + y * y).sqrt();
    let phi = y.atan2(x);
    let size = cap + 1;
    let mut pl = vec![0.0; size * size];
    let at = |l: usize, m: usize| l * size + m;
    pl[at(0, 0)] = 1.0;
    for m in 1..=cap {
        let f = if m == 1 { 3.0_f64.sqrt() } else { ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() };
        pl[at(m, m)] = f * st * pl[at(m - 1, m - 1)];
    }
    for m in 0..cap {
        pl[at(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * z * pl[at(m, m)];
    }
    for m in 0..=cap {
        for l in m + 2..=cap {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            pl[at(l, m)] = a * (z * pl[at(l - 1, m)] - b * pl[at(l - 2, m)]);
        }
    }
    let mut out = Vec::with_capacity(size * size);
    for l in 0..=cap {
        for m in -(l as i64)..=(l as i64) {
            let am = m.unsigned_abs() as usize;
            let v = pl[at(l, am)];
            out.push(match m.cmp(&0) {
                std::cmp::Ordering::Equal => v,
                std::cmp::Ordering::Greater => v * (am as f64 * phi).cos(),
                std::cmp::Ordering::Less => v * (am as f64 * phi).sin(),
            });
        }
    }
    out
}

/// Least-squares harmonic coefficients of nodal values; errors unless the fit is exact to [`BAND_LIMIT_TOL`].
pub fn fit_harmonics(lattice: &Lattice, values: &[f64], cap: usize) -> Result<Vec<f64>> {
    let nb = (cap + 1) * (cap + 1);
    let n = lattice.node_count();
    if n < nb {
        return Err(Error::InvalidParameter(format!("{n} nodes cannot resolve degree {cap}")));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(vec![0.0; nb]);
    }
    let mut ata = DMatrix::<f64>::zeros(nb, nb);
    let mut atb = DVector::<f64>::zeros(nb);
    let mut rows = Vec::with_capacity(n);
    for (i, &v) in values.iter().enumerate() {
        let y = real_harmonics(&lattice.coords(i), cap);
        for r in 0..nb {
            atb[r] += y[r] * v;
            for c in 0..=r {
                ata[(r, c)] += y[r] * y[c];
            }
        }
        rows.push(y);
    }
    for r in 0..nb {
        for c in r + 1..nb {
            ata[(r, c)] = ata[(c, r)];
        }
    }
    let chol = ata
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("harmonic normal equations are singular".into()))?;
    let coeffs = chol.solve(&atb);
    let mut res = 0.0;
    for (y, &v) in rows.iter().zip(values) {
        let fit: f64 = y.iter().zip(coeffs.iter()).map(|(a, b)| a * b).sum();
        res += (fit - v) * (fit - v);
    }
    let residual = res.sqrt() / norm;
    if residual > BAND_LIMIT_TOL {
        return Err(Error::Truncation { residual, cap });
    }
    Ok(coeffs.iter().copied().collect())
}

fn synthesize(lattice: &Lattice, coeffs: &[f64], cap: usize) -> Vec<f64> {
    (0..lattice.node_count())
        .map(|i| real_harmonics(&lattice.coords(i), cap).iter().zip(coeffs).map(|(a, b)| a * b).sum())
        .collect()
}
