//! Scenario files (TOML).
//!
//! ```toml
//! name = "torus-paper"
//! seed = 7
//! convention = "coordinate"        # or "riemannian" (default)
//!
//! [[components]]
//! kind = "flat-torus"              # or "round-sphere"
//! dim = 2
//! count = 2                        # identical copies
//! # scale = 0.159...               # torus coefficient s or sphere radius
//! # flow = "ricci"                 # "ricci" | "stationary" | "linear" with rate = ...
//!
//! [profile]                        # default for every pair of components
//! kind = "torus-solution"          # constant | power-law | torus-solution | sphere-candidate
//! l0 = 0.1
//!
//! [[pair_profiles]]                # optional per-pair override
//! pair = [0, 2]
//! kind = "constant"
//! l0 = 0.3
//!
//! [[initial_data]]                 # first entry matching a component wins
//! components = [0]                 # omitted: every component
//! kind = "single-mode"             # constant | single-mode | bump | indicator | distance
//! wave = [1, 0]
//!
//! [window]
//! start = 0.0
//! end = 0.002
//!
//! [semigroup]
//! j = 8
//! m = 2
//! q = 16
//! grid = 32                        # nodes per axis (torus) or subdivision level (sphere)
//!
//! [sampling]
//! time_grid = 20                   # intervals
//! pairs = 200
//! triples = 10000
//!
//! [tolerances]
//! margin = 1e-8
//! monotone = 1e-3
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coupling::{CoupledSpace, SeparationProfile, CLOSED_FORM_TOL};
use crate::error::{Error, Result};
use crate::geometry::{Convention, EvolvingMetric, ManifoldKind, ModelManifold, ScaleLaw};
use crate::heat::{real_harmonics, GridField, InequalityPolicy, Lattice, SemigroupParams, SliceEndpoint, UnionOptions};
use crate::lipschitz::{uniform_times, FLOOR_TOL, MONOTONE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    #[default]
    Ricci,
    Stationary,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub kind: ManifoldKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default)]
    pub flow: FlowKind,
    /// `λ(t) = 1 − rate·t` for `flow = "linear"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Constant,
    PowerLaw,
    TorusSolution,
    SphereCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
    pub kind: ProfileKind,
    pub l0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl ProfileSpec {
    pub fn build(&self, default_dim: usize) -> Result<SeparationProfile> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Scenario(format!("profile kind {:?} needs `{name}`", self.kind)))
        };
        if !(self.l0 >= 0.0 && self.l0.is_finite()) {
            return Err(Error::Scenario(format!("profile l0 must be finite and nonnegative, got {}", self.l0)));
        }
        Ok(match self.kind {
            ProfileKind::Constant => SeparationProfile::constant(self.l0),
            ProfileKind::PowerLaw => SeparationProfile::PowerLaw {
                l0: self.l0,
                rate: need(self.rate, "rate")?,
                exponent: need(self.exponent, "exponent")?,
            },
            ProfileKind::TorusSolution => {
                SeparationProfile::TorusSolution { l0: self.l0, dim: self.dim.unwrap_or(default_dim) }
            }
            ProfileKind::SphereCandidate => {
                SeparationProfile::SphereCandidate { l0: self.l0, kappa: need(self.kappa, "kappa")? }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Constant,
    SingleMode,
    Bump,
    Indicator,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<usize>>,
    pub kind: InitialKind,
    /// `constant` and `indicator` level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Torus wave vector of `single-mode`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    /// Sphere harmonic degree and order of `single-mode`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<i64>,
    /// `bump` and `distance` center (ambient coordinates).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// `bump` width at unit metric scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Component carrying `value` for `indicator`; the others get zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default)]
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemigroupSpec {
    pub j: usize,
    pub m: usize,
    pub q: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    pub endpoint: SliceEndpoint,
}

impl Default for SemigroupSpec {
    fn default() -> Self {
        let p = SemigroupParams::default();
        Self { j: p.j, m: p.m, q: p.q, grid: None, endpoint: p.endpoint }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    pub time_grid: usize,
    pub pairs: usize,
    pub triples: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { time_grid: 20, pairs: 200, triples: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    pub margin: f64,
    pub monotone: f64,
    pub floor: f64,
    pub axioms: f64,
    pub oracle: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { margin: CLOSED_FORM_TOL, monotone: MONOTONE_TOL, floor: FLOOR_TOL, axioms: 1e-10, oracle: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSpec {
    pub policy: InequalityPolicy,
    pub check_pairs: usize,
}

impl Default for HeatSpec {
    fn default() -> Self {
        Self { policy: InequalityPolicy::Warn, check_pairs: 64 }
    }
}

/// A sphere profile `L = √(l0² + 2κt)` to tabulate, with its expected verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub name: String,
    pub kappa: f64,
    pub l0: f64,
    pub expect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub convention: Convention,
    pub components: Vec<ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pair_profiles: Vec<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_data: Vec<InitialDataSpec>,
    pub window: WindowSpec,
    #[serde(default)]
    pub semigroup: SemigroupSpec,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub heat: HeatSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateSpec>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.components.iter().all(|c| c.count == 0) {
            return Err(Error::Scenario("scenario lists no components".into()));
        }
        let first = &self.components[0];
        if self.components.iter().any(|c| c.kind != first.kind || c.dim != first.dim || c.scale != first.scale) {
            return Err(Error::Scenario("all components must be copies of one model space".into()));
        }
        if first.dim == 0 {
            return Err(Error::Scenario("component dimension must be positive".into()));
        }
        if !(self.window.end > self.window.start && self.window.start >= 0.0) {
            return Err(Error::Scenario(format!(
                "window ({}, {}) must satisfy 0 <= start < end",
                self.window.start, self.window.end
            )));
        }
        if self.sampling.time_grid == 0 {
            return Err(Error::Scenario("sampling.time_grid must be at least 1".into()));
        }
        if self.component_count() > 1 && self.profile.is_none() {
            return Err(Error::Scenario("a union of several components needs a [profile]".into()));
        }
        for p in &self.pair_profiles {
            if p.pair.is_none() {
                return Err(Error::Scenario("every [[pair_profiles]] entry needs `pair`".into()));
            }
        }
        self.params().validate().map_err(|e| Error::Scenario(e.to_string()))?;
        Ok(())
    }

    pub fn component_count(&self) -> usize {
        self.components.iter().map(|c| c.count).sum()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim
    }

    pub fn metrics(&self) -> Result<Vec<EvolvingMetric>> {
        let mut out = Vec::new();
        for c in &self.components {
            let mut m = match c.kind {
                ManifoldKind::FlatTorus => ModelManifold::flat_torus(c.dim),
                ManifoldKind::RoundSphere => ModelManifold::round_sphere(c.dim),
            };
            if let Some(s) = c.scale {
                m = m.with_scale(s);
            }
            m.validate().map_err(|e| Error::Scenario(e.to_string()))?;
            let metric = match c.flow {
                FlowKind::Ricci => EvolvingMetric::ricci_flow(m),
                FlowKind::Stationary => EvolvingMetric::with_law(m, ScaleLaw::Stationary),
                FlowKind::Linear => EvolvingMetric::with_law(
                    m,
                    ScaleLaw::Linear {
                        rate: c.rate.ok_or_else(|| Error::Scenario("flow = \"linear\" needs `rate`".into()))?,
                    },
                ),
            };
            out.extend(std::iter::repeat_n(metric, c.count));
        }
        Ok(out)
    }

    pub fn space(&self) -> Result<CoupledSpace> {
        let metrics = self.metrics()?;
        if metrics.len() == 1 {
            return CoupledSpace::single(metrics[0]);
        }
        let profile = self.profile.as_ref().expect("validated").build(self.dim())?;
        let mut space = CoupledSpace::new(metrics, profile)?;
        for p in &self.pair_profiles {
            let [i, j] = p.pair.expect("validated");
            space = space.with_pair_profile(i, j, p.build(self.dim())?)?;
        }
        Ok(space)
    }

    pub fn params(&self) -> SemigroupParams {
        SemigroupParams { j: self.semigroup.j, m: self.semigroup.m, q: self.semigroup.q, endpoint: self.semigroup.endpoint }
    }

    /// Nodes per axis (torus) or subdivision level (sphere).
    pub fn grid(&self) -> usize {
        self.semigroup.grid.unwrap_or(match self.components[0].kind {
            ManifoldKind::FlatTorus if self.dim() <= 2 => 128,
            ManifoldKind::FlatTorus => 32,
            ManifoldKind::RoundSphere => 5,
        })
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let m = self.metrics()?[0].manifold;
        Lattice::for_manifold(&m, self.grid())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.window.start, self.window.end)
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_times(self.window(), self.sampling.time_grid)
    }

    pub fn union_options(&self) -> UnionOptions {
        UnionOptions {
            policy: self.heat.policy,
            convention: self.convention,
            check_pairs: self.heat.check_pairs,
            seed: self.seed,
        }
    }

    /// Initial fields at `window.start`, one per component.
    pub fn initial_fields(&self) -> Result<Vec<GridField>> {
        if self.initial_data.is_empty() {
            return Err(Error::Scenario("scenario has no [[initial_data]]".into()));
        }
        let metrics = self.metrics()?;
        let lattice = self.lattice()?;
        let t0 = self.window.start;
        (0..metrics.len())
            .map(|c| {
                let spec = self
                    .initial_data
                    .iter()
                    .find(|d| d.components.as_ref().is_none_or(|v| v.contains(&c)))
                    .ok_or_else(|| Error::Scenario(format!("no initial data covers component {c}")))?;
                let f = generator(spec, &metrics[c], c, t0)?;
                GridField::from_fn(c, lattice.clone(), t0, f)
            })
            .collect()
    }
}

fn generator(spec: &InitialDataSpec, metric: &EvolvingMetric, c: usize, t0: f64) -> Result<Box<dyn Fn(&[f64]) -> f64>> {
    let m = metric.manifold;
    let amp = spec.amplitude.unwrap_or(1.0);
    let center = |spec: &InitialDataSpec| -> Result<Vec<f64>> {
        let x = spec.center.clone().ok_or_else(|| Error::Scenario(format!("{:?} data needs `center`", spec.kind)))?;
        m.validate_coords(&x).map_err(|e| Error::Scenario(e.to_string()))?;
        Ok(x)
    };
    Ok(match spec.kind {
        InitialKind::Constant => {
            let v = spec.value.unwrap_or(0.0);
            Box::new(move |_| v)
        }
        InitialKind::Indicator => {
            let v = spec.value.unwrap_or(1.0);
            let target = spec.target.unwrap_or(1);
            let level = if c == target { v } else { 0.0 };
            Box::new(move |_| level)
        }
        InitialKind::SingleMode => match m.kind {
            ManifoldKind::FlatTorus => {
                let mut k = spec.wave.clone().unwrap_or_default();
                if k.is_empty() {
                    k = vec![0; m.dim];
                    k[0] = 1;
                }
                if k.len() != m.dim {
                    return Err(Error::Scenario(format!("wave vector has {} entries for dim {}", k.len(), m.dim)));
                }
                let phase = spec.phase.unwrap_or(0.0);
                Box::new(move |x| {
                    let arg: f64 = k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
                    amp * (2.0 * PI * arg + phase).cos()
                })
            }
            ManifoldKind::RoundSphere => {
                let l = spec.degree.unwrap_or(1);
                let order = spec.order.unwrap_or(0);
                if order.unsigned_abs() as usize > l {
                    return Err(Error::Scenario(format!("harmonic order {order} exceeds degree {l}")));
                }
                let idx = (l * l) as i64 + l as i64 + order;
                Box::new(move |x| amp * real_harmonics(x, l)[idx as usize])
            }
        },
        InitialKind::Bump => {
            let x0 = center(spec)?;
            let w = spec.width.unwrap_or(0.1);
            if !(w > 0.0) {
                return Err(Error::Scenario("bump width must be positive".into()));
            }
            Box::new(move |x| {
                let d = m.unit_distance(x, &x0) / w;
                amp * (-d * d).exp()
            })
        }
        InitialKind::Distance => {
            let x0 = center(spec)?;
            let s = metric.length_scale(t0)?;
            Box::new(move |x| amp * s * m.unit_distance(x, &x0))
        }
    })
}

pub const TORUS_PAPER: &str = include_str!("../../scenarios/torus-paper.scn");
pub const TORUS_N: &str = include_str!("../../scenarios/torus-n.scn");
pub const SPHERE_CANDIDATES: &str = include_str!("../../scenarios/sphere-candidates.scn");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_round_trip() {
        for text in [TORUS_PAPER, TORUS_N, SPHERE_CANDIDATES] {
            let s = Scenario::parse(text).unwrap();
            let again = Scenario::parse(&s.to_toml()).unwrap();
            assert_eq!(s, again);
        }
    }

    #[test]
    fn empty_components_is_a_scenario_error() {
        let text = "name = \"x\"\ncomponents = []\n[window]\nend = 1.0\n";
        assert!(matches!(Scenario::parse(text), Err(Error::Scenario(_))));
        assert!(matches!(Scenario::parse("name = 3"), Err(Error::Scenario(_))));
    }
}
