//! The union distance `D^t` on `M₁ ⊔ … ⊔ M_k` and its evolution inequality.
//!
//! Components are isometric copies of one evolving model space identified by
//! the identity map `φ`. Within a component `D^t` is the Riemannian distance;
//! across components `D^t(a, b) = √(L(t)² + d_t(φ(a), b)²)` with a separation
//! profile `L` chosen per unordered pair of components.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, distance_derivatives, Convention, EvolvingMetric, Point};

/// Default tolerance for closed-form margins.
pub const CLOSED_FORM_TOL: f64 = 1e-8;
/// Relative tolerance for stencil cross-checks.
pub const STENCIL_REL_TOL: f64 = 5e-2;

type ProfileFn = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// A user-supplied separation `t ↦ (L(t), L'(t))`.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    eval: Arc<ProfileFn>,
}

impl CustomProfile {
    /// `eval` must return the value and its analytic derivative.
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(eval) }
    }
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Time-dependent offset `L(t)` between two components.
#[derive(Debug, Clone)]
pub enum SeparationProfile {
    /// `L(t) = l0 (1 + rate t)^exponent`. A zero exponent gives a constant profile.
    PowerLaw { l0: f64, rate: f64, exponent: f64 },
    /// `L(t) = √(l0² + 4n(2π)² t)`, so `L(0) = l0` and `L L' = 2n(2π)²`.
    TorusSolution { l0: f64, dim: usize },
    /// `L(t) = √(l0² + 2κ t)`, so `L L' = κ`.
    SphereCandidate { l0: f64, kappa: f64 },
    Custom(CustomProfile),
}

impl SeparationProfile {
    pub fn constant(l0: f64) -> Self {
        SeparationProfile::PowerLaw { l0, rate: 0.0, exponent: 0.0 }
    }

    /// `(L(t), L'(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            SeparationProfile::PowerLaw { l0, rate, exponent } => {
                if *exponent == 0.0 || *rate == 0.0 {
                    return (*l0, 0.0);
                }
                let base = 1.0 + rate * t;
                if base <= 0.0 {
                    return (f64::NAN, f64::NAN);
                }
                (l0 * base.powf(*exponent), l0 * exponent * rate * base.powf(exponent - 1.0))
            }
            SeparationProfile::TorusSolution { l0, dim } => {
                let c = 4.0 * *dim as f64 * (2.0 * PI).powi(2);
                let v = (l0 * l0 + c * t).sqrt();
                (v, 0.5 * c / v)
            }
            SeparationProfile::SphereCandidate { l0, kappa } => {
                let v = (l0 * l0 + 2.0 * kappa * t).sqrt();
                (v, kappa / v)
            }
            SeparationProfile::Custom(c) => (c.eval)(t),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn kind_name(&self) -> &str {
        match self {
            SeparationProfile::PowerLaw { .. } => "power-law",
            SeparationProfile::TorusSolution { .. } => "torus-solution",
            SeparationProfile::SphereCandidate { .. } => "sphere-candidate",
            SeparationProfile::Custom(c) => &c.name,
        }
    }

    fn checked_eval(&self, t: f64) -> Result<(f64, f64)> {
        let (l, dl) = self.eval(t);
        if !(l >= 0.0 && l.is_finite() && dl.is_finite()) {
            return Err(Error::Domain(format!("separation profile {} is invalid at t = {t}", self.kind_name())));
        }
        Ok((l, dl))
    }
}

/// Ordered components with a separation profile for every unordered pair.
#[derive(Debug, Clone)]
pub struct CoupledSpace {
    components: Vec<EvolvingMetric>,
    profiles: BTreeMap<(usize, usize), SeparationProfile>,
}

fn pair_key(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl CoupledSpace {
    /// Union of `components` (at least two, all identical) with `profile` on every pair.
    pub fn new(components: Vec<EvolvingMetric>, profile: SeparationProfile) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a coupled space needs at least two components, got {}",
                components.len()
            )));
        }
        for c in &components {
            c.manifold.validate()?;
        }
        if components.iter().any(|c| *c != components[0]) {
            return Err(Error::InvalidParameter(
                "components must be isometric copies of one evolving metric".into(),
            ));
        }
        let k = components.len();
        let mut profiles = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                profiles.insert((i, j), profile.clone());
            }
        }
        Ok(Self { components, profiles })
    }

    /// Single-component bypass: no cross pairs.
    pub fn single(metric: EvolvingMetric) -> Result<Self> {
        metric.manifold.validate()?;
        Ok(Self { components: vec![metric], profiles: BTreeMap::new() })
    }

    pub fn with_pair_profile(mut self, i: usize, j: usize, profile: SeparationProfile) -> Result<Self> {
        if i == j || i >= self.len() || j >= self.len() {
            return Err(Error::InvalidParameter(format!("invalid component pair ({i}, {j})")));
        }
        self.profiles.insert(pair_key(i, j), profile);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[EvolvingMetric] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &EvolvingMetric {
        &self.components[i]
    }

    pub fn profile(&self, i: usize, j: usize) -> Option<&SeparationProfile> {
        self.profiles.get(&pair_key(i, j))
    }

    /// Unordered component pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn component_pairs(&self) -> Vec<(usize, usize)> {
        self.profiles.keys().copied().collect()
    }

    pub fn lifetime(&self) -> f64 {
        self.components.iter().map(|c| c.lifetime()).fold(f64::INFINITY, f64::min)
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        self.components.iter().try_for_each(|c| c.check_time(t))
    }

    fn check_point(&self, p: &Point) -> Result<&EvolvingMetric> {
        let m = self
            .components
            .get(p.component)
            .ok_or_else(|| Error::Domain(format!("no component {}", p.component)))?;
        if p.coords.len() != m.manifold.ambient_len() {
            return Err(Error::Domain("point dimension does not match its component".into()));
        }
        Ok(m)
    }

    /// Precompute scales and separations at time `t` for repeated distance queries.
    pub fn at(&self, t: f64) -> Result<DistanceSnapshot<'_>> {
        self.check_time(t)?;
        let k = self.len();
        let scales = self.components.iter().map(|c| c.length_scale(t)).collect::<Result<Vec<_>>>()?;
        let mut seps = vec![0.0; k * k];
        for (&(i, j), p) in &self.profiles {
            let (l, _) = p.checked_eval(t)?;
            seps[i * k + j] = l;
            seps[j * k + i] = l;
        }
        Ok(DistanceSnapshot { space: self, t, scales, seps })
    }
}

/// [`CoupledSpace`] frozen at one time.
#[derive(Debug, Clone)]
pub struct DistanceSnapshot<'a> {
    space: &'a CoupledSpace,
    pub t: f64,
    scales: Vec<f64>,
    seps: Vec<f64>,
}

impl DistanceSnapshot<'_> {
    /// `D^t` between `a ∈ M_{ca}` and `b ∈ M_{cb}` given as coordinates.
    #[inline]
    pub fn distance(&self, ca: usize, a: &[f64], cb: usize, b: &[f64]) -> f64 {
        let m = &self.space.components[ca].manifold;
        let d = self.scales[ca] * m.unit_distance(a, b);
        if ca == cb {
            d
        } else {
            let l = self.seps[ca * self.space.len() + cb];
            (l * l + d * d).sqrt()
        }
    }

    pub fn separation(&self, ca: usize, cb: usize) -> f64 {
        self.seps[ca * self.space.len() + cb]
    }

    pub fn length_scale(&self, c: usize) -> f64 {
        self.scales[c]
    }

    pub fn space(&self) -> &CoupledSpace {
        self.space
    }
}

/// `D^t(a, b)`.
pub fn coupled_distance(space: &CoupledSpace, t: f64, a: &Point, b: &Point) -> Result<f64> {
    let ma = space.check_point(a)?;
    space.check_point(b)?;
    if a.component == b.component {
        return geometry::distance(ma, t, a, b);
    }
    space.check_time(t)?;
    let (l, _) = space.profile(a.component, b.component).expect("pair profile").checked_eval(t)?;
    let d = ma.length_scale(t)? * ma.manifold.unit_distance(&a.coords, &b.coords);
    Ok((l * l + d * d).sqrt())
}

/// `inf D^t` over cross-component pairs, attained at `φ`-identified points.
pub fn min_cross_separation(space: &CoupledSpace, t: f64) -> Result<f64> {
    space.check_time(t)?;
    let mut m = f64::INFINITY;
    for p in space.profiles.values() {
        m = m.min(p.checked_eval(t)?.0);
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomViolation {
    pub points: Vec<Point>,
    pub amount: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub t: f64,
    pub trials: usize,
    pub identity_ok: bool,
    pub symmetry_ok: bool,
    pub triangle_ok: bool,
    /// Largest `D(a,b) − D(a,c) − D(c,b)` seen (negative when every triangle is strict).
    pub worst_triangle_excess: f64,
    pub worst_triangle: Option<AxiomViolation>,
    pub identity_failures: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Check identity of indiscernibles, symmetry and the triangle inequality on sampled triples.
///
/// Triples cycle through every ordered combination of components.
pub fn validate_metric_axioms<R: Rng + ?Sized>(
    space: &CoupledSpace,
    t: f64,
    rng: &mut R,
    trials: usize,
    tolerance: f64,
) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let snap = space.at(t)?;
    let k = space.len();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_triangle = None;
    let mut symmetry_ok = true;
    let mut identity_failures = 0usize;
    for trial in 0..trials {
        let combo = [trial % k, (trial / k) % k, (trial / (k * k)) % k];
        let pts: Vec<Point> = combo
            .iter()
            .map(|&c| Point::new(c, space.components[c].manifold.random_point(rng)))
            .collect();
        let d = |a: &Point, b: &Point| snap.distance(a.component, &a.coords, b.component, &b.coords);
        for (x, y, z) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
            let (a, b, c) = (&pts[x], &pts[y], &pts[z]);
            let excess = d(a, b) - d(a, c) - d(c, b);
            if excess > worst {
                worst = excess;
                worst_triangle = Some(AxiomViolation { points: vec![a.clone(), b.clone(), c.clone()], amount: excess });
            }
            if d(a, b) != d(b, a) {
                symmetry_ok = false;
            }
        }
        for p in &pts {
            if d(p, p) != 0.0 {
                identity_failures += 1;
            }
        }
        // distinct union elements must be at positive distance, including φ-identified images
        for (x, y) in [(0, 1), (1, 2), (0, 2)] {
            let (a, b) = (&pts[x], &pts[y]);
            if (a.component != b.component || a.coords != b.coords) && d(a, b) <= 0.0 {
                identity_failures += 1;
            }
            if a.component != b.component {
                let image = Point::new(b.component, a.coords.clone());
                if d(a, &image) <= 0.0 {
                    identity_failures += 1;
                }
            }
        }
    }
    let triangle_ok = worst <= tolerance;
    let identity_ok = identity_failures == 0;
    Ok(AxiomReport {
        t,
        trials,
        identity_ok,
        symmetry_ok,
        triangle_ok,
        worst_triangle_excess: worst,
        worst_triangle,
        identity_failures,
        tolerance,
        passed: identity_ok && symmetry_ok && triangle_ok,
    })
}

/// Both sides of `∂_t D^t ≥ Δ D^t` at one cross pair, with the scaled margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginTerms {
    /// `∂D^t/∂t`.
    pub lhs: f64,
    /// `Δ_{M₁ᵗ×M₂ᵗ} D^t`.
    pub rhs: f64,
    /// `L L' + d_t ∂_t d_t − d_t Δ d_t − (1 − (d_t/D^t)²)|∇d_t|²`, equal to `D^t (lhs − rhs)`.
    pub margin: f64,
    pub d: f64,
    pub coupled: f64,
}

fn cross_profile<'a>(space: &'a CoupledSpace, a: &Point, b: &Point) -> Result<&'a SeparationProfile> {
    if a.component == b.component {
        return Err(Error::Domain("inequality terms need points in distinct components".into()));
    }
    space.check_point(a)?;
    space.check_point(b)?;
    Ok(space.profile(a.component, b.component).expect("pair profile"))
}

pub fn inequality_terms(
    space: &CoupledSpace,
    t: f64,
    a: &Point,
    b: &Point,
    convention: Convention,
) -> Result<MarginTerms> {
    let profile = cross_profile(space, a, b)?;
    let ma = space.component(a.component);
    let mb = space.component(b.component);
    let dd = distance_derivatives(ma, mb, t, &a.coords, &b.coords, convention)?;
    let (l, dl) = profile.checked_eval(t)?;
    let d = dd.distance;
    let big = (l * l + d * d).sqrt();
    let ratio_sq = (d / big) * (d / big);
    let lhs_num = l * dl + dd.time_term;
    let rhs_num = d * dd.laplacian + (1.0 - ratio_sq) * dd.gradient_sq;
    let rhs = (d / big) * dd.laplacian + dd.gradient_sq / big - d * d / (big * big * big) * dd.gradient_sq;
    Ok(MarginTerms { lhs: lhs_num / big, rhs, margin: lhs_num - rhs_num, d, coupled: big })
}

/// `Δ_{M₁ᵗ×M₂ᵗ} D^t` via `(d/D)Δd + |∇d|²/D − (d²/D³) g(∇d, ∇d)`.
pub fn laplacian_of_coupled_distance(
    space: &CoupledSpace,
    t: f64,
    a: &Point,
    b: &Point,
    convention: Convention,
) -> Result<f64> {
    Ok(inequality_terms(space, t, a, b, convention)?.rhs)
}

/// Scaled margin of the evolution inequality at a cross pair.
pub fn inequality_margin(space: &CoupledSpace, t: f64, a: &Point, b: &Point, convention: Convention) -> Result<f64> {
    Ok(inequality_terms(space, t, a, b, convention)?.margin)
}

/// Closed-form `∂D^t/∂t` at a cross pair (metric distances, no convention scaling).
pub fn coupled_time_derivative(space: &CoupledSpace, t: f64, a: &Point, b: &Point) -> Result<f64> {
    Ok(inequality_terms(space, t, a, b, Convention::Riemannian)?.lhs)
}

/// Finite-difference `∂D^t/∂t` with step `1e-5 · min(T, 1)`. Cross-check only.
pub fn coupled_time_derivative_fd(space: &CoupledSpace, t: f64, a: &Point, b: &Point) -> Result<f64> {
    let h = 1e-5 * space.lifetime().min(1.0);
    let f = |s: f64| coupled_distance(space, s, a, b);
    if t < h {
        // second-order forward difference at the left end of the flow
        return Ok((-3.0 * f(t)? + 4.0 * f(t + h)? - f(t + 2.0 * h)?) / (2.0 * h));
    }
    Ok((f(t + h)? - f(t - h)?) / (2.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairStratum {
    NearDiagonal,
    NearCut,
    Uniform,
}

/// Stratified sampler over cross-component pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSampler {
    pub near_diagonal: usize,
    pub near_cut: usize,
    pub uniform: usize,
    pub seed: u64,
}

impl PairSampler {
    /// Split `total` pairs as 1/4 near-diagonal, 1/4 near-cut, rest uniform.
    pub fn with_total(total: usize, seed: u64) -> Self {
        let q = total / 4;
        Self { near_diagonal: q, near_cut: q, uniform: total - 2 * q, seed }
    }

    pub fn total(&self) -> usize {
        self.near_diagonal + self.near_cut + self.uniform
    }

    /// Pairs `a ∈ M_p`, `b ∈ M_q`. Deterministic in `(seed, p, q)`.
    pub fn sample(&self, space: &CoupledSpace, p: usize, q: usize) -> Vec<(Point, Point, PairStratum)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ ((p as u64) << 32) ^ (q as u64).wrapping_mul(0x9E37_79B9));
        let m = space.component(p).manifold;
        let mut out = Vec::with_capacity(self.total());
        for _ in 0..self.near_diagonal {
            let a = m.random_point(&mut rng);
            let u = m.random_direction(&a, &mut rng);
            let len = 1e-3 * m.unit_injectivity_radius() * (0.5 + rng.random::<f64>());
            let b = m.exp_map(&a, &u, len);
            out.push((Point::new(p, a), Point::new(q, b), PairStratum::NearDiagonal));
        }
        for _ in 0..self.near_cut {
            let a = m.random_point(&mut rng);
            let u = m.random_direction(&a, &mut rng);
            let b = m.exp_map(&a, &u, 0.9 * m.unit_cut_distance_along(&u));
            out.push((Point::new(p, a), Point::new(q, b), PairStratum::NearCut));
        }
        for _ in 0..self.uniform {
            let a = m.random_point(&mut rng);
            let b = m.random_point(&mut rng);
            out.push((Point::new(p, a), Point::new(q, b), PairStratum::Uniform));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalitySample {
    pub components: (usize, usize),
    pub a: Point,
    pub b: Point,
    pub stratum: PairStratum,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `d_t / D^t`.
    pub ratio: f64,
    /// Margin under the other torus convention.
    pub alternate_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairVerdict {
    pub components: (usize, usize),
    pub min_margin: f64,
    pub evaluated: usize,
    pub verdict: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub samples: Vec<InequalitySample>,
    pub min_margin: f64,
    pub worst_sample: Option<usize>,
    pub verdict: bool,
    pub tolerance: f64,
    pub skipped: usize,
    pub pairwise: Vec<PairVerdict>,
    pub convention: Convention,
    pub alternate_min_margin: f64,
    pub convention_note: String,
}

/// Evaluate the evolution inequality over `times × sampled pairs` for every pair of components.
///
/// Samples landing on the cut locus or the diagonal are skipped and counted.
pub fn verify_inequality(
    space: &CoupledSpace,
    times: &[f64],
    sampler: &PairSampler,
    tolerance: f64,
    convention: Convention,
) -> Result<InequalityReport> {
    for &t in times {
        space.check_time(t)?;
    }
    let mut samples = Vec::new();
    let mut skipped = 0;
    let mut pairwise = Vec::new();
    for (p, q) in space.component_pairs() {
        let pairs = sampler.sample(space, p, q);
        let mut pair_min = f64::INFINITY;
        let mut evaluated = 0;
        for &t in times {
            for (a, b, stratum) in &pairs {
                let terms = match inequality_terms(space, t, a, b, convention) {
                    Ok(v) => v,
                    Err(Error::Singular(_)) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let alt = inequality_terms(space, t, a, b, convention.other())?;
                evaluated += 1;
                pair_min = pair_min.min(terms.margin);
                samples.push(InequalitySample {
                    components: (p, q),
                    a: a.clone(),
                    b: b.clone(),
                    stratum: *stratum,
                    t,
                    lhs: terms.lhs,
                    rhs: terms.rhs,
                    margin: terms.margin,
                    ratio: terms.d / terms.coupled,
                    alternate_margin: alt.margin,
                });
            }
        }
        pairwise.push(PairVerdict {
            components: (p, q),
            min_margin: pair_min,
            evaluated,
            verdict: evaluated > 0 && pair_min >= -tolerance,
        });
    }
    let mut worst_sample = None;
    let mut min_margin = f64::INFINITY;
    let mut alternate_min_margin = f64::INFINITY;
    for (i, s) in samples.iter().enumerate() {
        if s.margin < min_margin {
            min_margin = s.margin;
            worst_sample = Some(i);
        }
        alternate_min_margin = alternate_min_margin.min(s.alternate_margin);
    }
    let verdict = pairwise.iter().all(|p| p.verdict);
    let kappa = convention.factor(&space.component(0).manifold);
    let convention_note = format!(
        "margins use the {} convention (Δd and |∇d|² scaled by {:.6}); the {} convention gives min margin {:.6e}",
        convention.name(),
        kappa,
        convention.other().name(),
        alternate_min_margin
    );
    Ok(InequalityReport {
        samples,
        min_margin,
        worst_sample,
        verdict,
        tolerance,
        skipped,
        pairwise,
        convention,
        alternate_min_margin,
        convention_note,
    })
}
