//! Model manifolds with closed-form Ricci flows.
//!
//! Two families are supported: the flat torus `R^n / Z^n` with metric
//! `s^2 δ` in the unit-cube coordinates, and the round sphere `S^n` of radius
//! `s`. Both evolve homothetically, `g(t) = λ(t) g(0)`, so every distance is
//! `d_t = s √λ(t) · d_unit` where `d_unit` is the coordinate (torus) or
//! angular (sphere) distance.

pub mod quadrature;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use quadrature::{unit_directions, Direction};

/// Tolerance for coordinate constraints on points.
pub const COORD_TOL: f64 = 1e-12;
/// Normalized distance below which a pair is treated as the cut locus or the diagonal.
pub const CUT_LOCUS_TOL: f64 = 1e-6;
/// Fraction of the injectivity radius accepted by [`sphere_sample`].
pub const INJECTIVITY_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    FlatTorus,
    RoundSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelManifold {
    pub kind: ManifoldKind,
    pub dim: usize,
    /// Torus: metric coefficient `s` in `g = s^2 δ`. Sphere: initial radius.
    pub base_scale: f64,
}

impl ModelManifold {
    /// Flat torus with coordinate scale `1/(2π)`.
    pub fn flat_torus(dim: usize) -> Self {
        Self { kind: ManifoldKind::FlatTorus, dim, base_scale: 1.0 / (2.0 * PI) }
    }

    /// Unit round sphere.
    pub fn round_sphere(dim: usize) -> Self {
        Self { kind: ManifoldKind::RoundSphere, dim, base_scale: 1.0 }
    }

    pub fn with_scale(mut self, base_scale: f64) -> Self {
        self.base_scale = base_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("manifold dimension must be at least 1".into()));
        }
        if !(self.base_scale > 0.0 && self.base_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "base scale must be positive, got {}",
                self.base_scale
            )));
        }
        Ok(())
    }

    /// Length of a coordinate vector.
    pub fn ambient_len(&self) -> usize {
        match self.kind {
            ManifoldKind::FlatTorus => self.dim,
            ManifoldKind::RoundSphere => self.dim + 1,
        }
    }

    pub fn validate_coords(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.ambient_len() {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.ambient_len(),
                coords.len()
            )));
        }
        match self.kind {
            ManifoldKind::FlatTorus => {
                if let Some(x) = coords.iter().find(|x| !(**x >= -COORD_TOL && **x < 1.0 + COORD_TOL)) {
                    return Err(Error::Domain(format!("torus coordinate {x} outside [0,1)")));
                }
            }
            ManifoldKind::RoundSphere => {
                let n = norm(coords);
                if (n - 1.0).abs() > COORD_TOL {
                    return Err(Error::Domain(format!("sphere point has norm {n}, expected 1")));
                }
            }
        }
        Ok(())
    }

    /// Distance at unit metric scale: wrapped coordinate distance (torus) or angle (sphere).
    pub fn unit_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let w = wrapped_diff(*x, *y);
                    w * w
                })
                .sum::<f64>()
                .sqrt(),
            ManifoldKind::RoundSphere => {
                let mut minus = 0.0;
                let mut plus = 0.0;
                for (x, y) in a.iter().zip(b) {
                    minus += (x - y) * (x - y);
                    plus += (x + y) * (x + y);
                }
                2.0 * minus.sqrt().atan2(plus.sqrt())
            }
        }
    }

    /// Unit-scale diameter.
    pub fn unit_diameter(&self) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus => 0.5 * (self.dim as f64).sqrt(),
            ManifoldKind::RoundSphere => PI,
        }
    }

    /// Unit-scale injectivity radius.
    pub fn unit_injectivity_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus => 0.5,
            ManifoldKind::RoundSphere => PI,
        }
    }

    /// Normalized gap between `b` and the cut locus of `a` (0 on the cut locus).
    pub fn cut_locus_gap(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus => a
                .iter()
                .zip(b)
                .map(|(x, y)| 0.5 - wrapped_diff(*x, *y))
                .fold(f64::INFINITY, f64::min),
            ManifoldKind::RoundSphere => (PI - self.unit_distance(a, b)) / PI,
        }
    }

    /// Unit-scale distance from `x` to its cut point along the unit direction `dir`.
    pub fn unit_cut_distance_along(&self, dir: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus => {
                let m = dir.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
                0.5 / m
            }
            ManifoldKind::RoundSphere => PI,
        }
    }

    /// Follow the geodesic from `x` in unit direction `dir` for unit-scale length `len`.
    ///
    /// For the sphere `dir` must be a unit tangent vector at `x` (ambient coordinates).
    pub fn exp_map(&self, x: &[f64], dir: &[f64], len: f64) -> Vec<f64> {
        match self.kind {
            ManifoldKind::FlatTorus => x.iter().zip(dir).map(|(a, u)| wrap_unit(a + len * u)).collect(),
            ManifoldKind::RoundSphere => {
                let (s, c) = len.sin_cos();
                let mut y: Vec<f64> = x.iter().zip(dir).map(|(a, u)| c * a + s * u).collect();
                let n = norm(&y);
                y.iter_mut().for_each(|v| *v /= n);
                y
            }
        }
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            ManifoldKind::FlatTorus => (0..self.dim).map(|_| rng.random::<f64>()).collect(),
            ManifoldKind::RoundSphere => loop {
                let v: Vec<f64> = (0..self.dim + 1).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&v);
                if n > 1e-8 {
                    break v.into_iter().map(|x| x / n).collect();
                }
            },
        }
    }

    /// Uniformly random unit tangent vector at `x`.
    pub fn random_direction<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..self.ambient_len()).map(|_| rng.sample(StandardNormal)).collect();
            if self.kind == ManifoldKind::RoundSphere {
                let p = dot(&v, x);
                v.iter_mut().zip(x).for_each(|(a, b)| *a -= p * b);
            }
            let n = norm(&v);
            if n > 1e-8 {
                break v.into_iter().map(|a| a / n).collect();
            }
        }
    }

    /// Orthonormal basis of the tangent space at `x`, in ambient coordinates.
    pub fn tangent_basis(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.kind {
            ManifoldKind::FlatTorus => (0..self.dim)
                .map(|i| {
                    let mut e = vec![0.0; self.dim];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            ManifoldKind::RoundSphere => {
                let len = x.len();
                let mut order: Vec<usize> = (0..len).collect();
                order.sort_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs()).then(i.cmp(&j)));
                let mut basis: Vec<Vec<f64>> = vec![x.to_vec()];
                for &i in &order {
                    if basis.len() == len {
                        break;
                    }
                    let mut e = vec![0.0; len];
                    e[i] = 1.0;
                    for b in &basis {
                        let p = dot(&e, b);
                        e.iter_mut().zip(b).for_each(|(a, c)| *a -= p * c);
                    }
                    let n = norm(&e);
                    if n > 1e-6 {
                        e.iter_mut().for_each(|a| *a /= n);
                        basis.push(e);
                    }
                }
                basis.remove(0);
                basis
            }
        }
    }

    /// Scalar curvature constant `c` with `Ric(g(0)) = c g(0)`.
    pub fn ricci_constant(&self) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus => 0.0,
            ManifoldKind::RoundSphere => (self.dim as f64 - 1.0) / (self.base_scale * self.base_scale),
        }
    }
}

/// Time dependence of the homothety factor `λ(t)` in `g(t) = λ(t) g(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ScaleLaw {
    Stationary,
    /// `λ(t) = 1 − rate · t`.
    Linear { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolvingMetric {
    pub manifold: ModelManifold,
    pub law: ScaleLaw,
}

impl EvolvingMetric {
    /// The exact Ricci flow starting at `manifold` (`∂g/∂t = −2 Ric`).
    pub fn ricci_flow(manifold: ModelManifold) -> Self {
        let c = manifold.ricci_constant();
        let law = if c == 0.0 { ScaleLaw::Stationary } else { ScaleLaw::Linear { rate: 2.0 * c } };
        Self { manifold, law }
    }

    pub fn with_law(manifold: ModelManifold, law: ScaleLaw) -> Self {
        Self { manifold, law }
    }

    pub fn lifetime(&self) -> f64 {
        match self.law {
            ScaleLaw::Stationary => f64::INFINITY,
            ScaleLaw::Linear { rate } if rate > 0.0 => 1.0 / rate,
            ScaleLaw::Linear { .. } => f64::INFINITY,
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let lifetime = self.lifetime();
        if !(t >= 0.0 && t < lifetime) {
            return Err(Error::FlowExpired { t, lifetime });
        }
        Ok(())
    }

    /// `λ(t)`.
    pub fn scale(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.law {
            ScaleLaw::Stationary => 1.0,
            ScaleLaw::Linear { rate } => 1.0 - rate * t,
        })
    }

    /// `λ'(t)`.
    pub fn scale_rate(&self) -> f64 {
        match self.law {
            ScaleLaw::Stationary => 0.0,
            ScaleLaw::Linear { rate } => -rate,
        }
    }

    /// Length scale `s √λ(t)` converting unit distances into `g(t)` distances.
    pub fn length_scale(&self, t: f64) -> Result<f64> {
        Ok(self.manifold.base_scale * self.scale(t)?.sqrt())
    }

    pub fn injectivity_radius(&self, t: f64) -> Result<f64> {
        Ok(self.length_scale(t)? * self.manifold.unit_injectivity_radius())
    }

    /// `∫_a^b ds / λ(s)`, the conformal time elapsed over `[a, b]`.
    pub fn conformal_time(&self, a: f64, b: f64) -> Result<f64> {
        self.check_time(a)?;
        self.check_time(b)?;
        Ok(match self.law {
            ScaleLaw::Stationary => b - a,
            ScaleLaw::Linear { rate } if rate == 0.0 => b - a,
            ScaleLaw::Linear { rate } => -((1.0 - rate * b) / (1.0 - rate * a)).ln() / rate,
        })
    }
}

/// A point of one component of a union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub component: usize,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(component: usize, coords: Vec<f64>) -> Self {
        Self { component, coords }
    }

    /// Build a point after checking the coordinate constraints of `manifold`.
    pub fn checked(manifold: &ModelManifold, component: usize, mut coords: Vec<f64>) -> Result<Self> {
        manifold.validate_coords(&coords)?;
        if manifold.kind == ManifoldKind::FlatTorus {
            coords.iter_mut().for_each(|x| *x = wrap_unit(*x));
        }
        Ok(Self { component, coords })
    }
}

/// Convention for derivatives of distance on the flat torus.
///
/// `Riemannian` evaluates `Δ d` and `|∇ d|²` of the metric distance itself
/// (checked against finite differences). `Coordinate` multiplies those terms
/// by `1 / s²`, which reproduces the values `Δ d = (2π)²/d` and
/// `|∇ d|² = 2(2π)²` written for the torus with `s = 1/(2π)`. The two agree
/// whenever `s = 1`, in particular on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    #[default]
    Riemannian,
    Coordinate,
}

impl Convention {
    pub fn factor(&self, manifold: &ModelManifold) -> f64 {
        match self {
            Convention::Riemannian => 1.0,
            Convention::Coordinate => 1.0 / (manifold.base_scale * manifold.base_scale),
        }
    }

    pub fn other(&self) -> Self {
        match self {
            Convention::Riemannian => Convention::Coordinate,
            Convention::Coordinate => Convention::Riemannian,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Convention::Riemannian => "riemannian",
            Convention::Coordinate => "coordinate",
        }
    }
}

/// `d_{g(t)}(a, b)` on a single component.
pub fn distance(metric: &EvolvingMetric, t: f64, a: &Point, b: &Point) -> Result<f64> {
    if a.component != b.component {
        return Err(Error::Domain(format!(
            "points lie on different components ({} and {})",
            a.component, b.component
        )));
    }
    let len = metric.manifold.ambient_len();
    if a.coords.len() != len || b.coords.len() != len {
        return Err(Error::Domain("point dimension does not match the manifold".into()));
    }
    Ok(metric.length_scale(t)? * metric.manifold.unit_distance(&a.coords, &b.coords))
}

fn check_pair_regular(manifold: &ModelManifold, a: &[f64], b: &[f64]) -> Result<f64> {
    let ud = manifold.unit_distance(a, b);
    if ud / manifold.unit_diameter() < CUT_LOCUS_TOL {
        return Err(Error::Singular(format!("points coincide (unit distance {ud:.3e})")));
    }
    let gap = manifold.cut_locus_gap(a, b);
    if gap < CUT_LOCUS_TOL {
        return Err(Error::Singular(format!("pair within {gap:.3e} of the cut locus")));
    }
    Ok(ud)
}

fn check_isometric(m1: &EvolvingMetric, m2: &EvolvingMetric) -> Result<()> {
    if m1 != m2 {
        return Err(Error::Domain("product Laplacian requires identical component metrics".into()));
    }
    Ok(())
}

/// Closed-form pieces of the distance function `d_t(a, b)` on `M^t × M^t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceDerivatives {
    /// `d_t(a, b)`.
    pub distance: f64,
    /// `Δ_{M^t×M^t} d_t`.
    pub laplacian: f64,
    /// `|∇^{M^t×M^t} d_t|²_{g(t)} = g_t^{ij} ∂_i d_t ∂_j d_t`.
    pub gradient_sq: f64,
    /// `d_t ∂d_t/∂t`.
    pub time_term: f64,
}

/// Distance derivatives on the product of two identical evolving model spaces.
pub fn distance_derivatives(
    metric1: &EvolvingMetric,
    metric2: &EvolvingMetric,
    t: f64,
    a: &[f64],
    b: &[f64],
    convention: Convention,
) -> Result<DistanceDerivatives> {
    check_isometric(metric1, metric2)?;
    let m = &metric1.manifold;
    let ud = check_pair_regular(m, a, b)?;
    let s = metric1.length_scale(t)?;
    let dt = s * ud;
    let kappa = convention.factor(m);
    let n1 = m.dim as f64 - 1.0;
    // Each factor contributes the one-point Laplacian of the distance function.
    let laplacian = match m.kind {
        ManifoldKind::FlatTorus => 2.0 * n1 / dt,
        ManifoldKind::RoundSphere => 2.0 * n1 * (ud.cos() / ud.sin()) / s,
    };
    let d0 = m.base_scale * ud;
    Ok(DistanceDerivatives {
        distance: dt,
        laplacian: kappa * laplacian,
        gradient_sq: kappa * 2.0,
        time_term: kappa * 0.5 * metric1.scale_rate() * d0 * d0,
    })
}

/// `Δ_{M₁ᵗ×M₂ᵗ} d_t(a, b)` for points `a ∈ M₁`, `b ∈ M₂` of isometric components.
pub fn laplacian_of_distance_product(
    metric1: &EvolvingMetric,
    metric2: &EvolvingMetric,
    t: f64,
    a: &Point,
    b: &Point,
    convention: Convention,
) -> Result<f64> {
    Ok(distance_derivatives(metric1, metric2, t, &a.coords, &b.coords, convention)?.laplacian)
}

/// Quadrature for the normalized surface measure on the geodesic sphere `∂B^t(x, r)`.
///
/// `r` is measured in `g(t)`. Returns points with nonnegative weights summing to one.
pub fn sphere_sample(
    metric: &EvolvingMetric,
    t: f64,
    x: &Point,
    r: f64,
    q: usize,
) -> Result<Vec<(Point, f64)>> {
    let coords = sphere_sample_coords(metric, t, &x.coords, r, q)?;
    Ok(coords.into_iter().map(|(c, w)| (Point::new(x.component, c), w)).collect())
}

/// Coordinate-level form of [`sphere_sample`].
pub fn sphere_sample_coords(
    metric: &EvolvingMetric,
    t: f64,
    x: &[f64],
    r: f64,
    q: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let dirs = sphere_directions(metric, t, x, r, q)?;
    let s = metric.length_scale(t)?;
    let m = &metric.manifold;
    let len = r / s;
    Ok(dirs.into_iter().map(|d| (m.exp_map(x, &d.vector, len), d.weight)).collect())
}

/// Check the radius and return the unit tangent directions (ambient coordinates) used by
/// [`sphere_sample`].
pub fn sphere_directions(
    metric: &EvolvingMetric,
    t: f64,
    x: &[f64],
    r: f64,
    q: usize,
) -> Result<Vec<Direction>> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!("quadrature order must be >= 2, got {q}")));
    }
    let limit = INJECTIVITY_FRACTION * metric.injectivity_radius(t)?;
    if !(r > 0.0) || r >= limit {
        return Err(Error::Radius { radius: r, limit });
    }
    let m = &metric.manifold;
    let dirs = unit_directions(m.dim, q);
    Ok(match m.kind {
        ManifoldKind::FlatTorus => dirs,
        ManifoldKind::RoundSphere => {
            let basis = m.tangent_basis(x);
            dirs.into_iter()
                .map(|d| {
                    let mut v = vec![0.0; x.len()];
                    for (c, e) in d.vector.iter().zip(&basis) {
                        v.iter_mut().zip(e).for_each(|(a, b)| *a += c * b);
                    }
                    Direction { vector: v, weight: d.weight }
                })
                .collect()
        }
    })
}

/// `μ(t)` with `∂g/∂t + 2 Ric(g(t)) = μ(t) g(0)`; zero for an exact Ricci flow.
pub fn supersolution_margin(metric: &EvolvingMetric, t: f64) -> Result<f64> {
    metric.check_time(t)?;
    // Ric is invariant under homothety, so Ric(g(t)) = Ric(g(0)) = c g(0).
    Ok(metric.scale_rate() + 2.0 * metric.manifold.ricci_constant())
}

/// Signed minimal difference on the unit circle, returned as a magnitude in `[0, 1/2]`.
#[inline]
pub fn wrapped_diff(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    let d = d - d.floor();
    d.min(1.0 - d)
}

#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus2() -> EvolvingMetric {
        EvolvingMetric::ricci_flow(ModelManifold::flat_torus(2))
    }

    fn sphere2() -> EvolvingMetric {
        EvolvingMetric::ricci_flow(ModelManifold::round_sphere(2))
    }

    #[test]
    fn torus_half_period_distance() {
        let m = torus2();
        let a = Point::new(0, vec![0.0, 0.0]);
        let b = Point::new(0, vec![0.5, 0.0]);
        for t in [0.0, 1.0, 123.0] {
            let d = distance(&m, t, &a, &b).unwrap();
            assert!((d - 0.5 / (2.0 * PI)).abs() < 1e-15);
            assert!((d - 0.0795775).abs() < 1e-7);
        }
    }

    #[test]
    fn sphere_antipodes_shrink_with_the_flow() {
        let m = sphere2();
        let a = Point::new(0, vec![0.0, 0.0, 1.0]);
        let b = Point::new(0, vec![0.0, 0.0, -1.0]);
        assert!((distance(&m, 0.0, &a, &b).unwrap() - PI).abs() < 1e-15);
        assert!((distance(&m, 0.375, &a, &b).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!(matches!(distance(&m, 0.5, &a, &b), Err(Error::FlowExpired { .. })));
        assert!(matches!(distance(&m, -0.1, &a, &b), Err(Error::FlowExpired { .. })));
    }

    #[test]
    fn distance_rejects_mismatched_components() {
        let m = torus2();
        let a = Point::new(0, vec![0.1, 0.1]);
        let b = Point::new(1, vec![0.2, 0.2]);
        assert!(matches!(distance(&m, 0.0, &a, &b), Err(Error::Domain(_))));
        let c = Point::new(0, vec![0.1, 0.1, 0.2]);
        assert!(matches!(distance(&m, 0.0, &a, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn checked_points_enforce_constraints() {
        let s = ModelManifold::round_sphere(2);
        assert!(Point::checked(&s, 0, vec![0.0, 0.0, 1.0 + 1e-9]).is_err());
        assert!(Point::checked(&s, 0, vec![0.6, 0.0, 0.8]).is_ok());
        let t = ModelManifold::flat_torus(2);
        assert!(Point::checked(&t, 0, vec![1.2, 0.0]).is_err());
        assert!(Point::checked(&t, 0, vec![0.0]).is_err());
    }

    #[test]
    fn sphere_laplacian_closed_forms() {
        let m = sphere2();
        let a = [0.0, 0.0, 1.0];
        let b = [1.0, 0.0, 0.0];
        let d = distance_derivatives(&m, &m, 0.0, &a, &b, Convention::Riemannian).unwrap();
        assert!((d.distance * d.laplacian).abs() < 1e-15);
        let q = PI / 4.0;
        let c = [q.sin(), 0.0, q.cos()];
        let d = distance_derivatives(&m, &m, 0.0, &a, &c, Convention::Riemannian).unwrap();
        assert!((d.distance * d.laplacian - PI / 2.0).abs() < 1e-14);
        // d_t Δ d_t = 2 d cot d at every time on the shrinking sphere.
        for t in [0.1, 0.3, 0.45] {
            let d = distance_derivatives(&m, &m, t, &a, &c, Convention::Coordinate).unwrap();
            assert!((d.distance * d.laplacian - 2.0 * q / q.tan()).abs() < 1e-13);
            assert!((d.time_term + q * q).abs() < 1e-14);
            assert!((d.gradient_sq - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn torus_conventions_differ_by_two_pi_squared() {
        let m = torus2();
        let a = Point::new(0, vec![0.1, 0.2]);
        let b = Point::new(1, vec![0.3, 0.35]);
        let d = distance(&m, 0.0, &a, &Point::new(0, b.coords.clone())).unwrap();
        let rie = laplacian_of_distance_product(&m, &m, 0.0, &a, &b, Convention::Riemannian).unwrap();
        let coo = laplacian_of_distance_product(&m, &m, 0.0, &a, &b, Convention::Coordinate).unwrap();
        assert!((d * rie - 2.0).abs() < 1e-13);
        let tp2 = (2.0 * PI).powi(2);
        assert!((d * coo - 2.0 * tp2).abs() < 1e-10);
    }

    #[test]
    fn laplacian_guards_cut_locus_and_diagonal() {
        let m = torus2();
        let a = Point::new(0, vec![0.1, 0.2]);
        let cut = Point::new(1, vec![0.6, 0.3]);
        let same = Point::new(1, vec![0.1, 0.2]);
        for b in [&cut, &same] {
            assert!(matches!(
                laplacian_of_distance_product(&m, &m, 0.0, &a, b, Convention::Riemannian),
                Err(Error::Singular(_))
            ));
        }
        let s = sphere2();
        let n = Point::new(0, vec![0.0, 0.0, 1.0]);
        let sp = Point::new(1, vec![0.0, 0.0, -1.0]);
        assert!(laplacian_of_distance_product(&s, &s, 0.0, &n, &sp, Convention::Riemannian).is_err());
        let other = EvolvingMetric::with_law(ModelManifold::round_sphere(2), ScaleLaw::Linear { rate: 1.0 });
        let e = Point::new(1, vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            laplacian_of_distance_product(&s, &other, 0.0, &n, &e, Convention::Riemannian),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sphere_sample_weights_and_moments() {
        let m = torus2();
        let x = Point::new(0, vec![0.5, 0.5]);
        let nodes = sphere_sample(&m, 0.0, &x, 0.01, 16).unwrap();
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = nodes.iter().map(|(p, w)| w * p.coords[0]).sum();
        assert!((mean - 0.5).abs() < 1e-12);
        for (p, _) in &nodes {
            let d = distance(&m, 0.0, &x, p).unwrap();
            assert!((d - 0.01).abs() < 1e-14);
        }

        // Height average over a latitude circle of geodesic radius r is cos(r / (s √λ)).
        let s = sphere2();
        let pole = Point::new(0, vec![0.0, 0.0, 1.0]);
        for (t, r) in [(0.0, 0.7), (0.2, 0.7), (0.4, 0.3)] {
            let nodes = sphere_sample(&s, t, &pole, r, 12).unwrap();
            let h: f64 = nodes.iter().map(|(p, w)| w * p.coords[2]).sum();
            let expected = (r / (1.0 - 2.0 * t as f64).sqrt()).cos();
            assert!((h - expected).abs() < 1e-14, "t={t}: {h} vs {expected}");
            for (p, _) in &nodes {
                assert!((distance(&s, t, &pole, p).unwrap() - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_sample_rejects_large_radius() {
        let m = torus2();
        let x = Point::new(0, vec![0.5, 0.5]);
        let inj = m.injectivity_radius(0.0).unwrap();
        assert!(matches!(sphere_sample(&m, 0.0, &x, 0.96 * inj, 8), Err(Error::Radius { .. })));
        assert!(sphere_sample(&m, 0.0, &x, 0.94 * inj, 8).is_ok());
        assert!(sphere_sample(&m, 0.0, &x, 0.0, 8).is_err());
        assert!(sphere_sample(&m, 0.0, &x, 0.01, 1).is_err());
        let s = sphere2();
        let p = Point::new(0, vec![1.0, 0.0, 0.0]);
        // injectivity radius shrinks with the flow
        assert!(sphere_sample(&s, 0.0, &p, 2.0, 8).is_ok());
        assert!(sphere_sample(&s, 0.4, &p, 2.0, 8).is_err());
    }

    #[test]
    fn supersolution_margins() {
        for t in [0.0, 1.0, 10.0] {
            assert_eq!(supersolution_margin(&torus2(), t).unwrap(), 0.0);
        }
        for t in [0.0, 0.25, 0.49] {
            assert_eq!(supersolution_margin(&sphere2(), t).unwrap(), 0.0);
        }
        let slow = EvolvingMetric::with_law(ModelManifold::round_sphere(2), ScaleLaw::Linear { rate: 1.0 });
        assert!((supersolution_margin(&slow, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert!(supersolution_margin(&sphere2(), 0.6).is_err());
    }

    #[test]
    fn conformal_time_on_shrinking_sphere() {
        let s = sphere2();
        let tau = s.conformal_time(0.0, 0.25).unwrap();
        assert!((tau - 0.5 * 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [
            EvolvingMetric::ricci_flow(ModelManifold::flat_torus(1)),
            torus2(),
            EvolvingMetric::ricci_flow(ModelManifold::flat_torus(3)),
            sphere2(),
            EvolvingMetric::ricci_flow(ModelManifold::round_sphere(3)),
        ] {
            for _ in 0..2000 {
                let p: Vec<Point> = (0..3).map(|_| Point::new(0, m.manifold.random_point(&mut rng))).collect();
                let t = 0.3 * rng.random::<f64>().min(0.9 * m.lifetime());
                let dab = distance(&m, t, &p[0], &p[1]).unwrap();
                let dba = distance(&m, t, &p[1], &p[0]).unwrap();
                let dac = distance(&m, t, &p[0], &p[2]).unwrap();
                let dcb = distance(&m, t, &p[2], &p[1]).unwrap();
                assert_eq!(dab, dba);
                assert!(dab <= dac + dcb + 1e-10);
                assert_eq!(distance(&m, t, &p[0], &p[0]).unwrap(), 0.0);
                let d0 = distance(&m, 0.0, &p[0], &p[1]).unwrap();
                assert!((dab - m.scale(t).unwrap().sqrt() * d0).abs() <= 1e-15 * d0.max(1.0));
            }
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let m = ModelManifold::round_sphere(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = m.random_point(&mut rng);
            let b = m.tangent_basis(&x);
            assert_eq!(b.len(), 3);
            for (i, u) in b.iter().enumerate() {
                assert!(dot(u, &x).abs() < 1e-12);
                for (j, v) in b.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(u, v) - e).abs() < 1e-12);
                }
            }
        }
    }
}
