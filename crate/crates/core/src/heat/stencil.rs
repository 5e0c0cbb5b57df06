//! Discrete sphere-averaging operators.
//!
//! Every stencil is applied in difference form `out_i = f_i + Σ_j w_ij (f_j − f_i)`
//! with `w_ij ≥ 0` and `Σ_j w_ij ≤ 1`, which keeps constants exact and maps
//! `[min f, max f]` into itself.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::grid::Lattice;
use crate::error::Result;
use crate::geometry::{sphere_directions, sphere_sample_coords, EvolvingMetric};

#[derive(Debug, Clone)]
pub(crate) enum Stencil {
    /// Translation-invariant weights on integer node offsets.
    Torus { dim: usize, n: usize, offsets: Vec<(Vec<i64>, f64)> },
    /// Compressed sparse rows without the diagonal.
    Sparse { row_start: Vec<usize>, cols: Vec<u32>, weights: Vec<f64> },
}

/// Build the averaging stencil for radius `r` (in `g(t)` units) on `lattice`.
pub(crate) fn build(metric: &EvolvingMetric, t: f64, lattice: &Lattice, r: f64, q: usize) -> Result<Stencil> {
    lattice.check_manifold(&metric.manifold)?;
    match lattice {
        Lattice::Torus { dim, n } => {
            let origin = vec![0.0; *dim];
            let dirs = sphere_directions(metric, t, &origin, r, q)?;
            let len = r / metric.length_scale(t)? * *n as f64;
            let mut acc: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
            for d in &dirs {
                let g: Vec<f64> = d.vector.iter().map(|u| u * len).collect();
                let base: Vec<i64> = g.iter().map(|x| x.floor() as i64).collect();
                let frac: Vec<f64> = g.iter().zip(&base).map(|(x, b)| x - *b as f64).collect();
                for corner in 0..(1usize << dim) {
                    let mut w = d.weight;
                    let mut off = base.clone();
                    for a in 0..*dim {
                        if corner >> a & 1 == 1 {
                            off[a] += 1;
                            w *= frac[a];
                        } else {
                            w *= 1.0 - frac[a];
                        }
                    }
                    if w > 0.0 {
                        *acc.entry(off).or_insert(0.0) += w;
                    }
                }
            }
            let offsets = acc.into_iter().filter(|(o, _)| o.iter().any(|&x| x != 0)).collect();
            Ok(Stencil::Torus { dim: *dim, n: *n, offsets })
        }
        Lattice::Sphere(ico) => {
            let rows: Vec<Vec<(u32, f64)>> = (0..ico.node_count())
                .into_par_iter()
                .map(|i| -> Result<Vec<(u32, f64)>> {
                    let x = ico.vertex(i);
                    let samples = sphere_sample_coords(metric, t, &x, r, q)?;
                    let mut row: Vec<(u32, f64)> = Vec::with_capacity(samples.len() * 3);
                    for (y, w) in samples {
                        let (f, b) = ico.locate(&y);
                        for k in 0..3 {
                            if b[k] > 0.0 && f[k] as usize != i {
                                row.push((f[k], w * b[k]));
                            }
                        }
                    }
                    row.sort_by_key(|e| e.0);
                    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
                    for (c, w) in row {
                        match merged.last_mut() {
                            Some(last) if last.0 == c => last.1 += w,
                            _ => merged.push((c, w)),
                        }
                    }
                    Ok(merged)
                })
                .collect::<Result<_>>()?;
            let mut row_start = Vec::with_capacity(rows.len() + 1);
            let mut cols = Vec::new();
            let mut weights = Vec::new();
            row_start.push(0);
            for row in rows {
                for (c, w) in row {
                    cols.push(c);
                    weights.push(w);
                }
                row_start.push(cols.len());
            }
            Ok(Stencil::Sparse { row_start, cols, weights })
        }
    }
}

impl Stencil {
    pub(crate) fn apply(&self, input: &[f64], out: &mut [f64]) {
        match self {
            Stencil::Torus { dim, n, offsets } => {
                let n = *n;
                // per-offset, per-axis shifted strides
                let shifts: Vec<Vec<Vec<usize>>> = offsets
                    .iter()
                    .map(|(o, _)| {
                        let mut stride = 1;
                        o.iter()
                            .map(|&d| {
                                let s: Vec<usize> =
                                    (0..n).map(|k| (k as i64 + d).rem_euclid(n as i64) as usize * stride).collect();
                                stride *= n;
                                s
                            })
                            .collect()
                    })
                    .collect();
                let dim = *dim;
                out.par_chunks_mut(n).enumerate().for_each(|(row, chunk)| {
                    let mut hi = vec![0usize; dim];
                    let mut r = row;
                    for h in hi.iter_mut().skip(1) {
                        *h = r % n;
                        r /= n;
                    }
                    let base = row * n;
                    for (i0, o) in chunk.iter_mut().enumerate() {
                        let f0 = input[base + i0];
                        let mut acc = 0.0;
                        for (s, (_, w)) in shifts.iter().zip(offsets) {
                            let mut j = s[0][i0];
                            for a in 1..dim {
                                j += s[a][hi[a]];
                            }
                            acc += w * (input[j] - f0);
                        }
                        *o = f0 + acc;
                    }
                });
            }
            Stencil::Sparse { row_start, cols, weights } => {
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let f0 = input[i];
                    let mut acc = 0.0;
                    for k in row_start[i]..row_start[i + 1] {
                        acc += weights[k] * (input[cols[k] as usize] - f0);
                    }
                    *o = f0 + acc;
                });
            }
        }
    }
}
