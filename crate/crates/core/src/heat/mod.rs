//! Heat semigroup by iterated sphere averages.
//!
//! `σ_r f(x)` averages `f` over the geodesic sphere `∂B(x, r)`. On a frozen
//! metric `(σ_{√(2n𝚝/j)})^j f → e^{𝚝Δ} f` as `j → ∞`; an evolving metric is
//! handled by composing such products over `m` time slices.

mod field_io;
mod grid;
mod spectral;
mod stencil;

use serde::{Deserialize, Serialize};

pub use field_io::{read_field, write_field, MAGIC};
pub use grid::{GridField, IcoLattice, Lattice, LatticeInfo};
pub use spectral::{
    fit_harmonics, real_harmonics, spectral_oracle, spectral_oracle_with_cap, BAND_LIMIT_TOL, DEFAULT_DEGREE_CAP,
};

use crate::coupling::{min_cross_separation, verify_inequality, CoupledSpace, PairSampler, CLOSED_FORM_TOL};
use crate::error::{Error, Result};
use crate::geometry::{Convention, EvolvingMetric};
use stencil::Stencil;

/// Fraction of the flow lifetime an evolution window may reach.
pub const LIFETIME_FRACTION: f64 = 0.999;

/// Which end of a time slice the metric is frozen at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceEndpoint {
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemigroupParams {
    /// Averaging steps per time slice.
    pub j: usize,
    /// Time slices.
    pub m: usize,
    /// Quadrature order on each averaging sphere.
    pub q: usize,
    pub endpoint: SliceEndpoint,
}

impl Default for SemigroupParams {
    fn default() -> Self {
        Self { j: 64, m: 32, q: 32, endpoint: SliceEndpoint::Left }
    }
}

impl SemigroupParams {
    pub fn new(j: usize, m: usize, q: usize) -> Self {
        Self { j, m, q, endpoint: SliceEndpoint::Left }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 || self.m == 0 || self.q < 2 {
            return Err(Error::InvalidParameter(format!(
                "semigroup parameters need j >= 1, m >= 1, q >= 2 (got j={}, m={}, q={})",
                self.j, self.m, self.q
            )));
        }
        Ok(())
    }

    /// `√(2n·τ/j)` for a slice of heat time `τ` on an `n`-manifold.
    pub fn radius(&self, dim: usize, tau: f64) -> f64 {
        (2.0 * dim as f64 * tau / self.j as f64).sqrt()
    }
}

/// `σ_r f` with the metric frozen at `t`.
pub fn sphere_average(metric: &EvolvingMetric, t: f64, field: &GridField, r: f64, q: usize) -> Result<GridField> {
    let st = stencil::build(metric, t, &field.lattice, r, q)?;
    let mut out = vec![0.0; field.len()];
    st.apply(&field.values, &mut out);
    Ok(GridField { values: out, ..field.clone() })
}

fn apply_steps(st: &Stencil, values: &mut Vec<f64>, steps: usize) {
    let mut scratch = vec![0.0; values.len()];
    for _ in 0..steps {
        st.apply(values, &mut scratch);
        std::mem::swap(values, &mut scratch);
    }
}

/// `(σ^{t}_{√(2n𝚝/j)})^j f`: `j` averages with the metric frozen at `t_metric`.
///
/// The returned field's time is advanced by `heat_time`.
pub fn trotter_static(
    metric: &EvolvingMetric,
    t_metric: f64,
    field: &GridField,
    heat_time: f64,
    params: &SemigroupParams,
) -> Result<GridField> {
    params.validate()?;
    if !(heat_time > 0.0) {
        return Err(Error::InvalidParameter(format!("heat time must be positive, got {heat_time}")));
    }
    let r = params.radius(metric.manifold.dim, heat_time);
    let st = stencil::build(metric, t_metric, &field.lattice, r, params.q)?;
    let mut values = field.values.clone();
    apply_steps(&st, &mut values, params.j);
    Ok(GridField { values, time: field.time + heat_time, ..field.clone() })
}

fn check_window(metric: &EvolvingMetric, field: &GridField, window: (f64, f64)) -> Result<()> {
    let (a, b) = window;
    metric.check_time(a)?;
    let limit = LIFETIME_FRACTION * metric.lifetime();
    if !(b <= limit) {
        return Err(Error::FlowExpired { t: b, lifetime: metric.lifetime() });
    }
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("window ({a}, {b}) must satisfy a < b")));
    }
    if (field.time - a).abs() > 1e-12 * a.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "field is sampled at t = {} but the window starts at {a}",
            field.time
        )));
    }
    Ok(())
}

/// Slice boundaries `a = t_0 < … < t_m = b`.
fn slice_times(window: (f64, f64), m: usize) -> Vec<f64> {
    let (a, b) = window;
    (0..=m).map(|i| if i == m { b } else { a + (b - a) * i as f64 / m as f64 }).collect()
}

/// Time-dependent Trotter product over `window`, metric frozen per slice at the chosen endpoint.
pub fn trotter_evolving(
    metric: &EvolvingMetric,
    field: &GridField,
    window: (f64, f64),
    params: &SemigroupParams,
) -> Result<GridField> {
    params.validate()?;
    check_window(metric, field, window)?;
    field.lattice.check_manifold(&metric.manifold)?;
    let times = slice_times(window, params.m);
    let tau = (window.1 - window.0) / params.m as f64;
    let r = params.radius(metric.manifold.dim, tau);
    let mut values = field.values.clone();
    let mut cached: Option<(u64, Stencil)> = None;
    for i in 0..params.m {
        let tf = match params.endpoint {
            SliceEndpoint::Left => times[i],
            SliceEndpoint::Right => times[i + 1],
        };
        let key = metric.length_scale(tf)?.to_bits();
        if cached.as_ref().map(|c| c.0) != Some(key) {
            cached = Some((key, stencil::build(metric, tf, &field.lattice, r, params.q)?));
        }
        apply_steps(&cached.as_ref().unwrap().1, &mut values, params.j);
    }
    Ok(GridField { values, time: window.1, ..field.clone() })
}

/// What [`heat_union`] does when the evolution inequality fails on the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityPolicy {
    #[default]
    Warn,
    Refuse,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnionOptions {
    pub policy: InequalityPolicy,
    pub convention: Convention,
    /// Cross pairs per component pair for the inequality check.
    pub check_pairs: usize,
    pub seed: u64,
}

impl Default for UnionOptions {
    fn default() -> Self {
        Self { policy: InequalityPolicy::Warn, convention: Convention::default(), check_pairs: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnionMetadata {
    /// Averaging radius in `g(t)` units.
    pub radius: f64,
    /// Smallest cross-component separation over the slice boundaries (`∞` for one component).
    pub min_separation: f64,
    pub radius_ok: bool,
    pub policy: InequalityPolicy,
    /// `None` when the check was skipped.
    pub inequality_verdict: Option<bool>,
    pub inequality_min_margin: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct UnionEvolution {
    pub fields: Vec<GridField>,
    pub metadata: UnionMetadata,
}

/// Evolve heat on the union by evolving every component on its own.
///
/// Averaging balls must stay inside one component, so the slice radius has to be
/// below every cross separation `L(t)` on the window.
pub fn heat_union(
    space: &CoupledSpace,
    initial: &[GridField],
    window: (f64, f64),
    params: &SemigroupParams,
    options: &UnionOptions,
) -> Result<UnionEvolution> {
    params.validate()?;
    if initial.len() != space.len() {
        return Err(Error::InvalidParameter(format!(
            "{} initial fields for {} components",
            initial.len(),
            space.len()
        )));
    }
    for (i, f) in initial.iter().enumerate() {
        if f.component != i {
            return Err(Error::InvalidParameter(format!("initial field {i} is tagged component {}", f.component)));
        }
        check_window(space.component(i), f, window)?;
    }
    let times = slice_times(window, params.m);
    let tau = (window.1 - window.0) / params.m as f64;
    let radius = params.radius(space.component(0).manifold.dim, tau);
    let mut min_separation = f64::INFINITY;
    for &t in &times {
        min_separation = min_separation.min(min_cross_separation(space, t)?);
    }
    if !(min_separation > 0.0) {
        return Err(Error::CouplingRadius { radius, separation: min_separation });
    }
    if radius >= min_separation {
        return Err(Error::CouplingRadius { radius, separation: min_separation });
    }
    let mut warnings = Vec::new();
    let (mut verdict, mut margin) = (None, None);
    if options.policy != InequalityPolicy::Ignore && space.len() > 1 {
        let sampler = PairSampler::with_total(options.check_pairs, options.seed);
        let report = verify_inequality(space, &times, &sampler, CLOSED_FORM_TOL, options.convention)?;
        verdict = Some(report.verdict);
        margin = Some(report.min_margin);
        if !report.verdict {
            let msg = format!(
                "evolution inequality fails on the coupling (min margin {:.6e}, {} convention)",
                report.min_margin,
                options.convention.name()
            );
            if options.policy == InequalityPolicy::Refuse {
                return Err(Error::InequalityFailed(msg));
            }
            warnings.push(msg);
        }
    }
    let fields = initial
        .iter()
        .enumerate()
        .map(|(i, f)| trotter_evolving(space.component(i), f, window, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnionEvolution {
        fields,
        metadata: UnionMetadata {
            radius,
            min_separation,
            radius_ok: true,
            policy: options.policy,
            inequality_verdict: verdict,
            inequality_min_margin: margin,
            warnings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::SeparationProfile;
    use crate::geometry::ModelManifold;
    use std::f64::consts::PI;

    fn torus() -> EvolvingMetric {
        EvolvingMetric::ricci_flow(ModelManifold::flat_torus(2))
    }

    fn sphere() -> EvolvingMetric {
        EvolvingMetric::ricci_flow(ModelManifold::round_sphere(2))
    }

    /// `(1/N) Σ cos(2π ρ cos θ_k)` by a 4096-point rule, i.e. `J₀(2πρ)` to roundoff.
    fn circle_average_of_plane_wave(rho: f64) -> f64 {
        let n = 4096;
        (0..n).map(|k| (2.0 * PI * rho * (2.0 * PI * k as f64 / n as f64).cos()).cos()).sum::<f64>() / n as f64
    }

    #[test]
    fn constants_are_fixed_exactly() {
        for (m, l) in [(torus(), Lattice::torus(2, 32).unwrap()), (sphere(), Lattice::sphere(3).unwrap())] {
            let f = GridField::constant(0, l, 0.0, 7.0).unwrap();
            let out = sphere_average(&m, 0.0, &f, 0.03, 16).unwrap();
            assert!(out.values.iter().all(|&v| v == 7.0));
            let out = trotter_static(&m, 0.0, &f, 1e-3, &SemigroupParams::new(8, 1, 16)).unwrap();
            assert!(out.values.iter().all(|&v| v == 7.0));
        }
    }

    #[test]
    fn plane_wave_factor_matches_quadrature_oracle() {
        let m = torus();
        let l = Lattice::torus(2, 256).unwrap();
        let f = GridField::from_fn(0, l, 0.0, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let r = 0.02;
        let out = sphere_average(&m, 0.0, &f, r, 64).unwrap();
        let factor = circle_average_of_plane_wave(r * 2.0 * PI);
        assert!(factor < 1.0 && factor > -1.0);
        let err = out.values.iter().zip(&f.values).fold(0.0_f64, |e, (o, v)| e.max((o - factor * v).abs()));
        assert!(err < 1e-3, "err {err}");
        assert!(out.max() <= f.max() + 1e-9);
    }

    #[test]
    fn single_step_is_one_average() {
        let m = torus();
        let l = Lattice::torus(2, 32).unwrap();
        let f = GridField::from_fn(0, l, 0.0, |x| (2.0 * PI * x[1]).sin() + x[0]).unwrap();
        let a = trotter_static(&m, 0.0, &f, 2e-4, &SemigroupParams::new(1, 1, 16)).unwrap();
        let b = sphere_average(&m, 0.0, &f, (4.0 * 2e-4_f64).sqrt(), 16).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.time, 2e-4);
    }

    #[test]
    fn too_large_radius_is_rejected() {
        let f = GridField::constant(0, Lattice::torus(2, 8).unwrap(), 0.0, 1.0).unwrap();
        let r = trotter_static(&torus(), 0.0, &f, 1.0, &SemigroupParams::new(1, 1, 8));
        assert!(matches!(r, Err(Error::Radius { .. })));
    }

    #[test]
    fn stationary_evolving_equals_static() {
        let m = torus();
        let l = Lattice::torus(2, 32).unwrap();
        let f = GridField::from_fn(0, l, 0.0, |x| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin()).unwrap();
        let p = SemigroupParams::new(4, 5, 16);
        let ev = trotter_evolving(&m, &f, (0.0, 1e-3), &p).unwrap();
        let st = trotter_static(&m, 0.0, &f, 1e-3, &SemigroupParams::new(20, 1, 16)).unwrap();
        assert!(ev.sup_distance(&st).unwrap() < 1e-12);
    }

    #[test]
    fn sphere_evolution_matches_oracle() {
        let m = sphere();
        let l = Lattice::sphere(5).unwrap();
        let f = GridField::from_fn(0, l, 0.0, |p| p[2]).unwrap();
        let out = trotter_evolving(&m, &f, (0.0, 0.25), &SemigroupParams::new(2, 32, 32)).unwrap();
        let exact = spectral_oracle(&m, &f, (0.0, 0.25)).unwrap();
        let err = out.sup_distance(&exact).unwrap();
        assert!(err < 1e-2, "err {err}");
        assert!(matches!(
            trotter_evolving(&m, &f, (0.0, 0.4999), &SemigroupParams::new(2, 4, 8)),
            Err(Error::FlowExpired { .. })
        ));
    }

    #[test]
    fn union_requires_radius_below_separation() {
        let space = CoupledSpace::new(vec![torus(); 2], SeparationProfile::constant(0.01)).unwrap();
        let l = Lattice::torus(2, 16).unwrap();
        let init: Vec<_> = (0..2).map(|c| GridField::constant(c, l.clone(), 0.0, c as f64).unwrap()).collect();
        let p = SemigroupParams::new(1, 1, 8);
        let r = heat_union(&space, &init, (0.0, 1e-3), &p, &UnionOptions::default());
        assert!(matches!(r, Err(Error::CouplingRadius { .. })));
        let p = SemigroupParams::new(4, 4, 8);
        let r = heat_union(&space, &init, (0.0, 1e-4), &p, &UnionOptions::default()).unwrap();
        assert_eq!(r.metadata.inequality_verdict, Some(false));
        assert_eq!(r.metadata.warnings.len(), 1);
        assert_eq!(r.fields[1].values, init[1].values);
        let refuse = UnionOptions { policy: InequalityPolicy::Refuse, ..UnionOptions::default() };
        assert!(matches!(heat_union(&space, &init, (0.0, 1e-4), &p, &refuse), Err(Error::InequalityFailed(_))));
    }
}
