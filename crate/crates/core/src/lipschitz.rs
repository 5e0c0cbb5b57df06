//! `Lip(u, t) = sup_{x≠y} |u(x) − u(y)| / D^t(x, y)` over lattice nodes of the union.
//!
//! The maximizing pair is reported with a deterministic tie-break: among pairs
//! with the maximal quotient the one with the smallest key
//! `(component_a, component_b, node_a, node_b)` wins, where `component_a ≤ component_b`
//! and `node_a < node_b` within a component.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{min_cross_separation, CoupledSpace, DistanceSnapshot};
use crate::error::{Error, Result};
use crate::heat::{heat_union, GridField, Lattice, SemigroupParams, UnionMetadata, UnionOptions};

/// Default relative tolerance on Lipschitz upticks.
pub const MONOTONE_TOL: f64 = 1e-3;
/// Tolerance on drops of the separation floor.
pub const FLOOR_TOL: f64 = 1e-10;

type Key = (usize, usize, u32, u32);

#[derive(Debug, Clone, Copy)]
struct Best {
    value: f64,
    key: Key,
}

impl Best {
    fn better(&self, other: &Best) -> bool {
        match self.value.partial_cmp(&other.value).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.key < other.key,
        }
    }
}

fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.better(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    WithinComponent,
    CrossComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRef {
    pub component: usize,
    pub node: usize,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AchievingPair {
    pub a: NodeRef,
    pub b: NodeRef,
    pub kind: PairKind,
    pub distance: f64,
    /// `|u(a) − u(b)|`.
    pub difference: f64,
    /// Within-component pair closer than twice the node spacing.
    pub gradient_regime: bool,
}

impl AchievingPair {
    pub fn quotient(&self) -> f64 {
        quotient(self.difference, self.distance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipEstimate {
    pub value: f64,
    pub pair: Option<AchievingPair>,
    /// Largest node spacing over components, in `g(t)` units.
    pub spacing: f64,
    /// `value · h / D(pair)`: size of the sub-grid gap the node sup can miss.
    pub discretization_gap: f64,
    pub pairs_evaluated: u64,
}

#[inline]
fn quotient(diff: f64, d: f64) -> f64 {
    if d > 0.0 {
        diff / d
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

struct Prepared<'a> {
    snap: DistanceSnapshot<'a>,
    coords: Vec<Vec<f64>>,
    stride: Vec<usize>,
    values: Vec<&'a [f64]>,
    spacing: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(space: &'a CoupledSpace, fields: &'a [GridField], t: f64) -> Result<Self> {
        if fields.len() != space.len() {
            return Err(Error::InvalidParameter(format!("{} fields for {} components", fields.len(), space.len())));
        }
        for (i, f) in fields.iter().enumerate() {
            if f.component != i {
                return Err(Error::InvalidParameter(format!("field {i} is tagged component {}", f.component)));
            }
            f.lattice.check_manifold(&space.component(i).manifold)?;
            if (f.time - t).abs() > 1e-9 * t.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!("field {i} is sampled at t = {}, not {t}", f.time)));
            }
        }
        let snap = space.at(t)?;
        let coords = fields.iter().map(|f| f.lattice.all_coords().concat()).collect();
        let stride = fields.iter().map(|f| space.component(f.component).manifold.ambient_len()).collect();
        let values = fields.iter().map(|f| f.values.as_slice()).collect();
        let spacing = fields.iter().map(|f| f.lattice.unit_spacing() * snap.length_scale(f.component)).collect();
        Ok(Self { snap, coords, stride, values, spacing })
    }

    #[inline]
    fn point(&self, c: usize, i: usize) -> &[f64] {
        let s = self.stride[c];
        &self.coords[c][i * s..(i + 1) * s]
    }

    #[inline]
    fn eval(&self, ca: usize, i: usize, cb: usize, j: usize) -> Option<f64> {
        let diff = (self.values[ca][i] - self.values[cb][j]).abs();
        let d = self.snap.distance(ca, self.point(ca, i), cb, self.point(cb, j));
        if d == 0.0 && diff == 0.0 {
            // coincident union points with equal values carry no information
            return None;
        }
        Some(quotient(diff, d))
    }

    fn finish(&self, best: Option<Best>, evaluated: u64) -> LipEstimate {
        let spacing = self.spacing.iter().copied().fold(0.0, f64::max);
        let Some(best) = best else {
            return LipEstimate { value: 0.0, pair: None, spacing, discretization_gap: 0.0, pairs_evaluated: evaluated };
        };
        let (ca, cb, i, j) = best.key;
        let (i, j) = (i as usize, j as usize);
        let distance = self.snap.distance(ca, self.point(ca, i), cb, self.point(cb, j));
        let kind = if ca == cb { PairKind::WithinComponent } else { PairKind::CrossComponent };
        let pair = AchievingPair {
            a: NodeRef { component: ca, node: i, coords: self.point(ca, i).to_vec() },
            b: NodeRef { component: cb, node: j, coords: self.point(cb, j).to_vec() },
            kind,
            distance,
            difference: (self.values[ca][i] - self.values[cb][j]).abs(),
            gradient_regime: kind == PairKind::WithinComponent && distance < 2.0 * self.spacing[ca],
        };
        let gap = if distance > 0.0 { best.value * spacing / distance } else { f64::INFINITY };
        LipEstimate { value: best.value, pair: Some(pair), spacing, discretization_gap: gap, pairs_evaluated: evaluated }
    }
}

/// Exact node sup by the canonical double loop over all unordered pairs.
pub fn lip_constant_exhaustive(space: &CoupledSpace, fields: &[GridField], t: f64) -> Result<LipEstimate> {
    let p = Prepared::new(space, fields, t)?;
    let k = space.len();
    let rows: Vec<(usize, usize)> = (0..k).flat_map(|c| (0..fields[c].len()).map(move |i| (c, i))).collect();
    let (best, evaluated) = rows
        .par_iter()
        .map(|&(ca, i)| {
            let mut best: Option<Best> = None;
            let mut n = 0u64;
            for cb in ca..k {
                let start = if cb == ca { i + 1 } else { 0 };
                for j in start..fields[cb].len() {
                    n += 1;
                    if let Some(q) = p.eval(ca, i, cb, j) {
                        best = merge(best, Some(Best { value: q, key: (ca, cb, i as u32, j as u32) }));
                    }
                }
            }
            (best, n)
        })
        .reduce(|| (None, 0), |a, b| (merge(a.0, b.0), a.1 + b.1));
    Ok(p.finish(best, evaluated))
}

struct Block {
    component: usize,
    center: Vec<f64>,
    /// In `g(t)` units.
    radius: f64,
    nodes: Vec<u32>,
    min: f64,
    max: f64,
}

fn cluster_centers(lattice: &Lattice) -> (Vec<Vec<f64>>, Vec<usize>) {
    match lattice {
        Lattice::Torus { dim, n } => {
            let b = (*n / 8).max(1);
            let nb = n.div_ceil(b);
            let blocks = nb.pow(*dim as u32);
            let centers = (0..blocks)
                .map(|id| {
                    let mut r = id;
                    (0..*dim)
                        .map(|_| {
                            let tile = r % nb;
                            r /= nb;
                            let lo = tile * b;
                            let hi = ((tile + 1) * b).min(*n) - 1;
                            (lo + hi) as f64 / (2.0 * *n as f64)
                        })
                        .collect()
                })
                .collect();
            let assign = (0..lattice.node_count())
                .map(|i| {
                    let mut r = i;
                    let mut id = 0;
                    let mut mul = 1;
                    for _ in 0..*dim {
                        id += (r % n / b) * mul;
                        mul *= nb;
                        r /= n;
                    }
                    id
                })
                .collect();
            (centers, assign)
        }
        Lattice::Sphere(ico) => {
            let count = 10 * 4usize.pow(ico.level().min(2) as u32) + 2;
            let centers: Vec<Vec<f64>> = (0..count).map(|i| ico.vertex(i).to_vec()).collect();
            let assign = (0..ico.node_count())
                .map(|i| {
                    let v = ico.vertex(i);
                    let mut best = 0;
                    let mut bd = f64::NEG_INFINITY;
                    for (c, x) in centers.iter().enumerate() {
                        let d = v[0] * x[0] + v[1] * x[1] + v[2] * x[2];
                        if d > bd {
                            bd = d;
                            best = c;
                        }
                    }
                    best
                })
                .collect();
            (centers, assign)
        }
    }
}

fn blocks_for(space: &CoupledSpace, p: &Prepared<'_>, fields: &[GridField]) -> Vec<Block> {
    let mut out = Vec::new();
    for (c, f) in fields.iter().enumerate() {
        let m = &space.component(c).manifold;
        let scale = p.snap.length_scale(c);
        let (centers, assign) = cluster_centers(&f.lattice);
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); centers.len()];
        for (i, &b) in assign.iter().enumerate() {
            members[b].push(i as u32);
        }
        for (center, nodes) in centers.into_iter().zip(members) {
            if nodes.is_empty() {
                continue;
            }
            let mut radius: f64 = 0.0;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &nodes {
                radius = radius.max(m.unit_distance(&center, p.point(c, i as usize)));
                let v = f.values[i as usize];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            out.push(Block { component: c, center, radius: radius * scale, nodes, min: lo, max: hi });
        }
    }
    out
}

/// Exact node sup with block pruning; returns the same value and pair as [`lip_constant_exhaustive`].
///
/// Nodes are grouped into blocks with a center and radius. A block pair is skipped
/// once its bound `oscillation / D_lower` falls below the best quotient found.
pub fn lip_constant(space: &CoupledSpace, fields: &[GridField], t: f64) -> Result<LipEstimate> {
    let p = Prepared::new(space, fields, t)?;
    let (lo, hi) = fields.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f.min()), hi.max(f.max())));
    if hi - lo == 0.0 {
        let evaluated = 1;
        let best = if fields[0].len() >= 2 { Some(Best { value: 0.0, key: (0, 0, 0, 1) }) } else { None };
        return Ok(p.finish(best, evaluated));
    }
    let blocks = blocks_for(space, &p, fields);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..blocks.len() {
        for b in a..blocks.len() {
            let (x, y) = (&blocks[a], &blocks[b]);
            let m = &space.component(x.component).manifold;
            let dc = p.snap.length_scale(x.component) * m.unit_distance(&x.center, &y.center);
            let dlb = (dc - x.radius - y.radius - 1e-12).max(0.0);
            let dlb = if x.component == y.component {
                dlb
            } else {
                let l = p.snap.separation(x.component, y.component);
                (l * l + dlb * dlb).sqrt()
            };
            let osc = (x.max - y.min).max(y.max - x.min).max(0.0);
            candidates.push((quotient(osc, dlb), a, b));
        }
    }
    candidates.sort_by(|u, v| v.0.partial_cmp(&u.0).unwrap_or(Ordering::Equal).then((u.1, u.2).cmp(&(v.1, v.2))));
    let mut best: Option<Best> = None;
    let mut evaluated = 0u64;
    for &(ub, a, b) in &candidates {
        if let Some(cur) = best {
            if ub * (1.0 + 1e-9) < cur.value {
                break;
            }
        }
        let (x, y) = (&blocks[a], &blocks[b]);
        let (ca, cb) = (x.component, y.component);
        let local = x
            .nodes
            .par_iter()
            .map(|&i| {
                let mut lb: Option<Best> = None;
                let mut n = 0u64;
                for &j in &y.nodes {
                    if a == b && j <= i {
                        continue;
                    }
                    n += 1;
                    let key = if ca == cb { (ca, cb, i.min(j), i.max(j)) } else { (ca, cb, i, j) };
                    if let Some(q) = p.eval(ca, i as usize, cb, j as usize) {
                        lb = merge(lb, Some(Best { value: q, key }));
                    }
                }
                (lb, n)
            })
            .reduce(|| (None, 0), |u, v| (merge(u.0, v.0), u.1 + v.1));
        best = merge(best, local.0);
        evaluated += local.1;
    }
    Ok(p.finish(best, evaluated))
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzTrace {
    pub times: Vec<f64>,
    pub lip_values: Vec<f64>,
    pub achieving_pairs: Vec<Option<AchievingPair>>,
    pub discretization_gaps: Vec<f64>,
    pub monotone_verdict: bool,
    /// `max_i Lip(t_i) / min_{k<i} Lip(t_k) − 1`, zero when never positive.
    pub max_uptick: f64,
    /// Grid index where the worst uptick occurs.
    pub uptick_index: Option<usize>,
    pub tolerance: f64,
    pub union_metadata: Vec<UnionMetadata>,
}

/// `steps + 1` equally spaced times covering `window`.
pub fn uniform_times(window: (f64, f64), steps: usize) -> Vec<f64> {
    let (a, b) = window;
    (0..=steps).map(|i| if i == steps { b } else { a + (b - a) * i as f64 / steps as f64 }).collect()
}

/// Worst relative increase of `values` over any earlier value.
pub fn max_uptick(values: &[f64]) -> (f64, Option<usize>) {
    let mut running = f64::INFINITY;
    let mut worst = 0.0;
    let mut at = None;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            let up = if running > 0.0 {
                v / running - 1.0
            } else if v > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if up > worst {
                worst = up;
                at = Some(i);
            }
        }
        running = running.min(v);
    }
    (worst, at)
}

/// Evolve `initial` (sampled at `window.0`) by [`heat_union`] and record `Lip` at every grid time.
///
/// Each grid interval is evolved with the full `params` (so `m` slices per interval).
pub fn monotonicity_trace(
    space: &CoupledSpace,
    initial: &[GridField],
    window: (f64, f64),
    params: &SemigroupParams,
    times: &[f64],
    tolerance: f64,
    options: &UnionOptions,
) -> Result<LipschitzTrace> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < window.0 || *times.last().unwrap() > window.1 {
        return Err(Error::InvalidParameter("time grid must increase within the window".into()));
    }
    let mut current: Vec<GridField> = initial.to_vec();
    let mut union_metadata = Vec::new();
    if times[0] > window.0 {
        let ev = heat_union(space, &current, (window.0, times[0]), params, options)?;
        current = ev.fields;
        union_metadata.push(ev.metadata);
    }
    let mut lip_values = Vec::with_capacity(times.len());
    let mut achieving_pairs = Vec::with_capacity(times.len());
    let mut discretization_gaps = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let ev = heat_union(space, &current, (times[i - 1], t), params, options)?;
            current = ev.fields;
            union_metadata.push(ev.metadata);
        }
        let est = lip_constant(space, &current, t)?;
        lip_values.push(est.value);
        achieving_pairs.push(est.pair);
        discretization_gaps.push(est.discretization_gap);
    }
    let (up, at) = max_uptick(&lip_values);
    Ok(LipschitzTrace {
        times: times.to_vec(),
        lip_values,
        achieving_pairs,
        discretization_gaps,
        monotone_verdict: up <= tolerance,
        max_uptick: up,
        uptick_index: at,
        tolerance,
        union_metadata,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub non_decreasing: bool,
    pub strictly_increasing: bool,
    /// Every value stays above the initial one minus the tolerance.
    pub floor_holds: bool,
    /// Largest drop between consecutive times (zero when none).
    pub max_drop: f64,
    pub tolerance: f64,
}

/// `min_cross_separation` on a time grid with monotonicity verdicts.
pub fn separation_floor_trace(space: &CoupledSpace, times: &[f64], tolerance: f64) -> Result<SeparationTrace> {
    let values = times.iter().map(|&t| min_cross_separation(space, t)).collect::<Result<Vec<_>>>()?;
    let mut max_drop: f64 = 0.0;
    let mut strictly = true;
    for w in values.windows(2) {
        max_drop = max_drop.max(w[0] - w[1]);
        if !(w[1] > w[0]) {
            strictly = false;
        }
    }
    let first = values.first().copied().unwrap_or(f64::INFINITY);
    let floor_holds = values.iter().all(|&v| v >= first - tolerance || v == f64::INFINITY);
    Ok(SeparationTrace {
        times: times.to_vec(),
        non_decreasing: max_drop <= tolerance,
        strictly_increasing: strictly && values.len() > 1,
        floor_holds,
        max_drop,
        tolerance,
        values,
    })
}
