//! Node lattices and sampled fields.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ManifoldKind, ModelManifold};

/// Geodesic lattice on `S²` from repeated 4-to-1 subdivision of the icosahedron.
///
/// Vertices are appended level by level, so the first `10·4^k + 2` vertices form
/// the level-`k` lattice. Faces are stored per level with children `4f..4f+4`.
pub struct IcoLattice {
    level: usize,
    vertices: Vec<[f64; 3]>,
    faces: Vec<Vec<[u32; 3]>>,
    mean_edge: f64,
}

impl fmt::Debug for IcoLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IcoLattice")
            .field("level", &self.level)
            .field("vertices", &self.vertices.len())
            .finish()
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: &[f64; 3], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    dot3(&cross(a, b), c)
}

impl IcoLattice {
    pub fn new(level: usize) -> Self {
        let p = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let mut vertices: Vec<[f64; 3]> = [
            [-1.0, p, 0.0],
            [1.0, p, 0.0],
            [-1.0, -p, 0.0],
            [1.0, -p, 0.0],
            [0.0, -1.0, p],
            [0.0, 1.0, p],
            [0.0, -1.0, -p],
            [0.0, 1.0, -p],
            [p, 0.0, -1.0],
            [p, 0.0, 1.0],
            [-p, 0.0, -1.0],
            [-p, 0.0, 1.0],
        ]
        .into_iter()
        .map(normalize)
        .collect();
        let mut top: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for f in &mut top {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            if det3(&a, &b, &c) < 0.0 {
                f.swap(1, 2);
            }
        }
        let mut faces = vec![top];
        for _ in 0..level {
            let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
            let prev = faces.last().unwrap();
            let mut next = Vec::with_capacity(prev.len() * 4);
            for &[a, b, c] in prev {
                let mut m = |i: u32, j: u32| -> u32 {
                    let key = (i.min(j), i.max(j));
                    *mid.entry(key).or_insert_with(|| {
                        let (x, y) = (vertices[i as usize], vertices[j as usize]);
                        vertices.push(normalize([x[0] + y[0], x[1] + y[1], x[2] + y[2]]));
                        (vertices.len() - 1) as u32
                    })
                };
                let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
                next.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            }
            faces.push(next);
        }
        let finest = faces.last().unwrap();
        let mut total = 0.0;
        for f in finest {
            let [a, b, _] = f.map(|i| vertices[i as usize]);
            total += dot3(&a, &b).clamp(-1.0, 1.0).acos();
        }
        let mean_edge = total / finest.len() as f64;
        Self { level, vertices, faces, mean_edge }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn node_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: usize) -> [f64; 3] {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    /// Faces of the level-`l` lattice.
    pub fn faces(&self, l: usize) -> &[[u32; 3]] {
        &self.faces[l]
    }

    /// Mean geodesic edge length at unit radius.
    pub fn mean_edge(&self) -> f64 {
        self.mean_edge
    }

    fn score(&self, f: &[u32; 3], p: &[f64]) -> f64 {
        let [a, b, c] = f.map(|i| self.vertices[i as usize]);
        dot3(&cross(&a, &b), p).min(dot3(&cross(&b, &c), p)).min(dot3(&cross(&c, &a), p))
    }

    /// Finest-level triangle containing the unit vector `p` and its gnomonic barycentric weights.
    ///
    /// Weights are clamped to be nonnegative and renormalized to sum to one.
    pub fn locate(&self, p: &[f64]) -> ([u32; 3], [f64; 3]) {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, f) in self.faces[0].iter().enumerate() {
            let s = self.score(f, p);
            if s > best_score {
                best_score = s;
                best = i;
            }
        }
        for l in 1..=self.level {
            let base = 4 * best;
            let mut pick = base;
            let mut pick_score = f64::NEG_INFINITY;
            for c in base..base + 4 {
                let s = self.score(&self.faces[l][c], p);
                if s > pick_score {
                    pick_score = s;
                    pick = c;
                }
            }
            best = pick;
        }
        let f = self.faces[self.level][best];
        let [a, b, c] = f.map(|i| self.vertices[i as usize]);
        let pp = [p[0], p[1], p[2]];
        let det = det3(&a, &b, &c);
        let mut w = [det3(&pp, &b, &c) / det, det3(&a, &pp, &c) / det, det3(&a, &b, &pp) / det];
        w.iter_mut().for_each(|x| *x = x.max(0.0));
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        (f, w)
    }
}

fn ico_cache() -> &'static Mutex<HashMap<usize, Arc<IcoLattice>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<IcoLattice>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes on which a [`GridField`] is sampled.
#[derive(Clone)]
pub enum Lattice {
    /// `n^dim` nodes at `idx / n`, axis 0 fastest.
    Torus { dim: usize, n: usize },
    Sphere(Arc<IcoLattice>),
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lattice::Torus { dim, n } => write!(f, "Torus({n}^{dim})"),
            Lattice::Sphere(l) => write!(f, "Sphere(level {})", l.level),
        }
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Lattice::Torus { dim: a, n: b }, Lattice::Torus { dim: c, n: d }) => a == c && b == d,
            (Lattice::Sphere(a), Lattice::Sphere(b)) => a.level == b.level,
            _ => false,
        }
    }
}

/// Serializable description of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeInfo {
    pub kind: ManifoldKind,
    pub dim: usize,
    /// Per-axis count (torus) or subdivision level (sphere).
    pub shape: usize,
    pub nodes: usize,
}

impl Lattice {
    pub fn torus(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 || n < 2 {
            return Err(Error::InvalidParameter(format!("torus grid needs dim >= 1 and n >= 2, got {n}^{dim}")));
        }
        n.checked_pow(dim as u32)
            .filter(|&c| c <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("torus grid {n}^{dim} is too large")))?;
        Ok(Lattice::Torus { dim, n })
    }

    /// Icosahedral lattice of `10·4^level + 2` nodes; built once per level and shared.
    pub fn sphere(level: usize) -> Result<Self> {
        if level > 8 {
            return Err(Error::InvalidParameter(format!("sphere lattice level {level} exceeds 8")));
        }
        let mut cache = ico_cache().lock().unwrap();
        let l = cache.entry(level).or_insert_with(|| Arc::new(IcoLattice::new(level))).clone();
        Ok(Lattice::Sphere(l))
    }

    /// Default lattice for a manifold: `n` per axis on the torus, level-`n` subdivision on the sphere.
    pub fn for_manifold(m: &ModelManifold, n: usize) -> Result<Self> {
        match m.kind {
            ManifoldKind::FlatTorus => Lattice::torus(m.dim, n),
            ManifoldKind::RoundSphere => {
                if m.dim != 2 {
                    return Err(Error::InvalidParameter(format!(
                        "sphere lattices exist for dim 2 only, got dim {}",
                        m.dim
                    )));
                }
                Lattice::sphere(n)
            }
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            Lattice::Torus { .. } => ManifoldKind::FlatTorus,
            Lattice::Sphere(_) => ManifoldKind::RoundSphere,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Lattice::Torus { dim, .. } => *dim,
            Lattice::Sphere(_) => 2,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Lattice::Torus { dim, n } => n.pow(*dim as u32),
            Lattice::Sphere(l) => l.node_count(),
        }
    }

    pub fn info(&self) -> LatticeInfo {
        LatticeInfo {
            kind: self.kind(),
            dim: self.dim(),
            shape: match self {
                Lattice::Torus { n, .. } => *n,
                Lattice::Sphere(l) => l.level,
            },
            nodes: self.node_count(),
        }
    }

    /// Node spacing at unit metric scale.
    pub fn unit_spacing(&self) -> f64 {
        match self {
            Lattice::Torus { n, .. } => 1.0 / *n as f64,
            Lattice::Sphere(l) => l.mean_edge,
        }
    }

    /// Ambient coordinates of node `i`.
    pub fn coords(&self, i: usize) -> Vec<f64> {
        match self {
            Lattice::Torus { dim, n } => {
                let mut c = Vec::with_capacity(*dim);
                let mut r = i;
                for _ in 0..*dim {
                    c.push((r % n) as f64 / *n as f64);
                    r /= n;
                }
                c
            }
            Lattice::Sphere(l) => l.vertices[i].to_vec(),
        }
    }

    /// All node coordinates in index order.
    pub fn all_coords(&self) -> Vec<Vec<f64>> {
        (0..self.node_count()).map(|i| self.coords(i)).collect()
    }

    pub fn check_manifold(&self, m: &ModelManifold) -> Result<()> {
        if self.kind() != m.kind || self.dim() != m.dim {
            return Err(Error::Domain(format!("lattice {self:?} does not discretize {:?} of dim {}", m.kind, m.dim)));
        }
        Ok(())
    }
}

/// A scalar field sampled on the nodes of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub component: usize,
    pub lattice: Lattice,
    pub values: Vec<f64>,
    /// Flow time at which the field is sampled.
    pub time: f64,
}

impl GridField {
    pub fn new(component: usize, lattice: Lattice, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != lattice.node_count() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a lattice of {} nodes",
                values.len(),
                lattice.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self { component, lattice, values, time })
    }

    pub fn from_fn(component: usize, lattice: Lattice, time: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..lattice.node_count()).map(|i| f(&lattice.coords(i))).collect();
        Self::new(component, lattice, values, time)
    }

    pub fn constant(component: usize, lattice: Lattice, time: f64, c: f64) -> Result<Self> {
        let n = lattice.node_count();
        Self::new(component, lattice, vec![c; n], time)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `max |self − other|` over nodes.
    pub fn sup_distance(&self, other: &GridField) -> Result<f64> {
        if self.lattice != other.lattice {
            return Err(Error::Domain("fields live on different lattices".into()));
        }
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}
