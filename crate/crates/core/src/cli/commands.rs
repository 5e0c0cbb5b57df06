//! The work behind each subcommand. Every function returns a finished report;
//! numeric and scenario errors propagate to the caller, which maps them to exit codes.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::report::{
    CandidateVerdict, Check, HeatSection, IdentityRow, MarginRow, OracleComparison, ReproduceSection, RunReport,
    SnapshotSummary,
};
use super::scenario::{ProfileKind, ProfileSpec, Scenario};
use crate::coupling::{inequality_terms, verify_inequality, CoupledSpace, InequalityReport, PairSampler, SeparationProfile};
use crate::error::{Error, Result};
use crate::geometry::{Convention, Point};
use crate::heat::{heat_union, spectral_oracle, write_field, GridField, LIFETIME_FRACTION};
use crate::lipschitz::{monotonicity_trace, separation_floor_trace};

/// Relative tolerance for closed-form identities evaluated in floating point.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Relative tolerance when comparing sampled margins against their closed form.
pub const CLOSED_FORM_MARGIN_TOL: f64 = 1e-9;

struct Clock {
    start: Instant,
    phases: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        Self { start: Instant::now(), phases: Vec::new() }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.phases.push((name.into(), (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

fn new_report(command: &str, sc: &Scenario) -> RunReport {
    RunReport::new(command, &sc.name, sc.seed, sc.to_toml())
}

fn sampler(sc: &Scenario) -> PairSampler {
    PairSampler::with_total(sc.sampling.pairs, sc.seed)
}

/// Fail fast when the heat window reaches past the usable part of the flow.
fn check_heat_window(space: &CoupledSpace, sc: &Scenario) -> Result<()> {
    let (a, b) = sc.window();
    space.check_time(a)?;
    let lifetime = space.lifetime();
    if !(b <= LIFETIME_FRACTION * lifetime) {
        return Err(Error::FlowExpired { t: b, lifetime });
    }
    Ok(())
}

fn inequality_check(r: &InequalityReport) -> Check {
    Check::new(
        "evolution-inequality",
        r.verdict,
        format!(
            "min scaled margin {:.6e} over {} samples ({} convention, tolerance {:.1e})",
            r.min_margin,
            r.samples.len(),
            r.convention.name(),
            r.tolerance
        ),
    )
}

/// Metric axioms on sampled triples, the evolution inequality on sampled cross pairs,
/// and the cross-separation trace.
pub fn verify_coupling(sc: &Scenario) -> Result<RunReport> {
    let mut clock = Clock::new();
    let mut report = new_report("verify-coupling", sc);
    let space = sc.space()?;
    let times = sc.times();
    for &t in &times {
        space.check_time(t)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut axiom_times = vec![times[0]];
    if times.len() > 1 {
        axiom_times.push(*times.last().unwrap());
    }
    for &t in &axiom_times {
        report.axioms.push(crate::coupling::validate_metric_axioms(
            &space,
            t,
            &mut rng,
            sc.sampling.triples,
            sc.tolerances.axioms,
        )?);
    }
    clock.lap("axioms");
    let ok = report.axioms.iter().all(|a| a.passed);
    let worst = report.axioms.iter().map(|a| a.worst_triangle_excess).fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(Check::new(
        "metric-axioms",
        ok,
        format!("{} triples at {} times, worst triangle excess {worst:.3e}", sc.sampling.triples, axiom_times.len()),
    ));

    if space.len() > 1 {
        let r = verify_inequality(&space, &times, &sampler(sc), sc.tolerances.margin, sc.convention)?;
        clock.lap("inequality");
        report.checks.push(inequality_check(&r));
        report.inequality = Some(r);
        // reported alongside, but the exit code depends on the axioms and the inequality only
        report.separation = Some(separation_floor_trace(&space, &times, sc.tolerances.floor)?);
        clock.lap("separation");
    }
    report.timings = clock.phases;
    report.conclude();
    Ok(report)
}

/// Evolve the scenario's initial data and compare against the exact solver where one applies.
pub fn heat_evolve(sc: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    let mut clock = Clock::new();
    let mut report = new_report("heat-evolve", sc);
    let space = sc.space()?;
    check_heat_window(&space, sc)?;
    let initial = sc.initial_fields()?;
    let times = sc.times();
    let params = sc.params();
    let options = sc.union_options();
    clock.lap("setup");

    let mut snapshots = Vec::new();
    let mut union_metadata = Vec::new();
    let record = |index: usize, fields: &[GridField], snapshots: &mut Vec<SnapshotSummary>| -> Result<()> {
        for f in fields {
            let file = match out {
                Some(dir) => {
                    let name = format!("field-c{}-{index:03}.bin", f.component);
                    write_field(BufWriter::new(File::create(dir.join(&name))?), f)?;
                    Some(name)
                }
                None => None,
            };
            snapshots.push(SnapshotSummary {
                index,
                t: f.time,
                component: f.component,
                min: f.min(),
                max: f.max(),
                mean: f.mean(),
                file,
            });
        }
        Ok(())
    };
    record(0, &initial, &mut snapshots)?;
    let mut current = initial.clone();
    for i in 1..times.len() {
        let ev = heat_union(&space, &current, (times[i - 1], times[i]), &params, &options)?;
        current = ev.fields;
        union_metadata.push(ev.metadata);
        record(i, &current, &mut snapshots)?;
    }
    clock.lap("evolve");

    let mut oracle = Vec::new();
    for (c, f0) in initial.iter().enumerate() {
        let fin = &current[c];
        let entry = match spectral_oracle(space.component(c), f0, sc.window()) {
            Ok(exact) => OracleComparison {
                component: c,
                sup_error: Some(fin.sup_distance(&exact)?),
                sup_norm_initial: f0.sup_norm(),
                sup_norm_final: fin.sup_norm(),
                sup_norm_oracle: Some(exact.sup_norm()),
                note: "exact spectral solution".into(),
            },
            Err(Error::Truncation { residual, cap }) => OracleComparison {
                component: c,
                sup_error: None,
                sup_norm_initial: f0.sup_norm(),
                sup_norm_final: fin.sup_norm(),
                sup_norm_oracle: None,
                note: format!("no exact solver: field is not band-limited to degree {cap} (residual {residual:.2e})"),
            },
            Err(e) => return Err(e),
        };
        oracle.push(entry);
    }
    clock.lap("oracle");

    let applicable: Vec<f64> = oracle.iter().filter_map(|o| o.sup_error).collect();
    if !applicable.is_empty() {
        let worst = applicable.iter().copied().fold(0.0, f64::max);
        report.checks.push(Check::new(
            "oracle-agreement",
            worst <= sc.tolerances.oracle,
            format!("worst sup error {worst:.3e} against tolerance {:.1e}", sc.tolerances.oracle),
        ));
    }
    let mut principle = true;
    for (c, f0) in initial.iter().enumerate() {
        let slack = 1e-12 * f0.sup_norm().max(1.0);
        principle &= snapshots
            .iter()
            .filter(|s| s.component == c)
            .all(|s| s.max <= f0.max() + slack && s.min >= f0.min() - slack);
    }
    report.checks.push(Check::new(
        "maximum-principle",
        principle,
        "every snapshot stays within the initial range",
    ));
    report.heat = Some(HeatSection {
        nodes_per_component: initial[0].len(),
        snapshots,
        oracle,
        union_metadata,
    });
    report.timings = clock.phases;
    report.conclude();
    Ok(report)
}

/// `Lip(u_t)` on the time grid, with the inequality and separation context.
pub fn lipschitz_report(sc: &Scenario) -> Result<RunReport> {
    let mut clock = Clock::new();
    let mut report = new_report("lipschitz-report", sc);
    let space = sc.space()?;
    check_heat_window(&space, sc)?;
    let initial = sc.initial_fields()?;
    let times = sc.times();
    clock.lap("setup");
    if space.len() > 1 {
        report.inequality =
            Some(verify_inequality(&space, &times, &sampler(sc), sc.tolerances.margin, sc.convention)?);
        report.separation = Some(separation_floor_trace(&space, &times, sc.tolerances.floor)?);
        clock.lap("inequality");
    }
    let trace = monotonicity_trace(
        &space,
        &initial,
        sc.window(),
        &sc.params(),
        &times,
        sc.tolerances.monotone,
        &sc.union_options(),
    )?;
    clock.lap("trace");
    report.checks.push(Check::new(
        "lipschitz-monotone",
        trace.monotone_verdict,
        format!(
            "Lip {:.6e} -> {:.6e}, max uptick {:.3e} (tolerance {:.1e})",
            trace.lip_values[0],
            trace.lip_values.last().unwrap(),
            trace.max_uptick,
            trace.tolerance
        ),
    ));
    report.lipschitz = Some(trace);
    report.timings = clock.phases;
    report.conclude();
    Ok(report)
}

fn rel_error(value: f64, expected: f64) -> f64 {
    (value - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
}

/// Scaled margin for the flat torus solution: `L L' − f(2(n−1) + 2(1 − ρ²))`
/// with `f` the convention factor and `ρ = d/D`.
fn torus_margin_closed_form(space: &CoupledSpace, t: f64, ratio: f64, convention: Convention) -> f64 {
    let m = &space.component(0).manifold;
    let n = m.dim as f64;
    let (_, dl) = space.profile(0, 1).expect("pair").eval(t);
    let l = space.profile(0, 1).expect("pair").value(t);
    let f = convention.factor(m);
    l * dl - f * (2.0 * (n - 1.0) + 2.0 * (1.0 - ratio * ratio))
}

/// Check `L L' = 2n(2π)²` and the sampled margins of one torus-solution scenario.
fn torus_identities(sc: &Scenario, section: &mut ReproduceSection, checks: &mut Vec<Check>) -> Result<()> {
    let space = sc.space()?;
    let n = sc.dim();
    let expected = 2.0 * n as f64 * (2.0 * PI).powi(2);
    let profile = space.profile(0, 1).expect("two components").clone();
    if !matches!(profile, SeparationProfile::TorusSolution { .. }) {
        return Err(Error::Scenario("torus reproduction needs a torus-solution profile".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let t = i as f64 * 0.05;
        let (l, dl) = profile.eval(t);
        let row = IdentityRow { label: format!("n={n} L*L'"), t, value: l * dl, expected, rel_error: rel_error(l * dl, expected) };
        worst = worst.max(row.rel_error);
        section.identities.push(row);
    }
    let l0 = profile.value(0.0);
    let l0_expected = sc.profile.as_ref().map(|p| p.l0).unwrap_or(l0);
    let row = IdentityRow {
        label: format!("n={n} L(0)"),
        t: 0.0,
        value: l0,
        expected: l0_expected,
        rel_error: rel_error(l0, l0_expected),
    };
    worst = worst.max(row.rel_error);
    section.identities.push(row);
    checks.push(Check::new(
        &format!("identity-n{n}"),
        worst <= IDENTITY_TOL,
        format!("L L' = 2*{n}*(2pi)^2 = {expected:.12} at 20 times, worst relative error {worst:.2e}"),
    ));

    let r = verify_inequality(&space, &sc.times(), &sampler(sc), sc.tolerances.margin, sc.convention)?;
    let mut worst_closed: f64 = 0.0;
    for s in &r.samples {
        let want = torus_margin_closed_form(&space, s.t, s.ratio, sc.convention);
        worst_closed = worst_closed.max((s.margin - want).abs() / want.abs().max(1.0));
    }
    checks.push(Check::new(
        &format!("closed-form-margin-n{n}"),
        worst_closed <= CLOSED_FORM_MARGIN_TOL,
        format!(
            "sampled margins match LL' - f(2(n-1) + 2(1-rho^2)) ({} convention), worst relative deviation {worst_closed:.2e}",
            sc.convention.name()
        ),
    ));
    let mut ineq = inequality_check(&r);
    ineq.name = format!("evolution-inequality-n{n}");
    checks.push(ineq);
    section.inequality.push(r);
    Ok(())
}

pub fn reproduce_torus(sc: &Scenario) -> Result<RunReport> {
    let mut clock = Clock::new();
    let mut report = new_report("reproduce torus", sc);
    let mut section = empty_section("torus");
    torus_identities(sc, &mut section, &mut report.checks)?;
    clock.lap("torus");
    report.reproduce = Some(section);
    report.timings = clock.phases;
    report.conclude();
    Ok(report)
}

pub fn reproduce_torus_n(sc: &Scenario, dims: &[usize]) -> Result<RunReport> {
    let mut clock = Clock::new();
    let mut report = new_report("reproduce torus-n", sc);
    let mut section = empty_section("torus-n");
    for &n in dims {
        let mut s = sc.clone();
        for c in &mut s.components {
            c.dim = n;
        }
        if let Some(p) = &mut s.profile {
            p.dim = None;
        }
        s.validate()?;
        torus_identities(&s, &mut section, &mut report.checks)?;
        clock.lap(&format!("n={n}"));
    }
    report.reproduce = Some(section);
    report.timings = clock.phases;
    report.conclude();
    Ok(report)
}

/// Unit-sphere angles tabulated by `reproduce sphere`.
pub fn sphere_table_angles() -> Vec<f64> {
    let mut v = vec![1e-3, 1e-2, 0.1];
    v.extend((1..12).map(|i| PI * i as f64 / 12.0));
    v.push(PI - 0.05);
    v
}

pub fn reproduce_sphere(sc: &Scenario) -> Result<RunReport> {
    let mut clock = Clock::new();
    let mut report = new_report("reproduce sphere", sc);
    if sc.candidates.is_empty() {
        return Err(Error::Scenario("reproduce sphere needs [[candidates]]".into()));
    }
    let mut section = empty_section("sphere");
    let times = sc.times();
    for cand in &sc.candidates {
        let mut s = sc.clone();
        s.profile = Some(ProfileSpec {
            pair: None,
            kind: ProfileKind::SphereCandidate,
            l0: cand.l0,
            rate: None,
            exponent: None,
            dim: None,
            kappa: Some(cand.kappa),
        });
        s.pair_profiles.clear();
        let space = s.space()?;
        let profile = space.profile(0, 1).expect("two components").clone();
        let (l, dl) = profile.eval(0.0);
        section.identities.push(IdentityRow {
            label: format!("{} L*L'", cand.name),
            t: 0.0,
            value: l * dl,
            expected: cand.kappa,
            rel_error: if cand.kappa == 0.0 { (l * dl).abs() } else { rel_error(l * dl, cand.kappa) },
        });
        let mut table_min = f64::INFINITY;
        for &t in &times {
            for theta in sphere_table_angles() {
                let a = Point::new(0, vec![0.0, 0.0, 1.0]);
                let b = Point::new(1, vec![theta.sin(), 0.0, theta.cos()]);
                let margin = match inequality_terms(&space, t, &a, &b, sc.convention) {
                    Ok(terms) => terms.margin,
                    Err(Error::Singular(_)) => continue,
                    Err(e) => return Err(e),
                };
                table_min = table_min.min(margin);
                section.margin_table.push(MarginRow { candidate: cand.name.clone(), t, angle: theta, margin });
            }
        }
        let r = verify_inequality(&space, &times, &sampler(sc), sc.tolerances.margin, sc.convention)?;
        let verdict = r.verdict && table_min >= -sc.tolerances.margin;
        report.checks.push(Check::new(
            &format!("candidate-{}", cand.name),
            verdict == cand.expect,
            format!(
                "kappa = {}: table min {table_min:.6e}, sampled min {:.6e}, holds = {verdict}, expected {}",
                cand.kappa, r.min_margin, cand.expect
            ),
        ));
        section.candidates.push(CandidateVerdict {
            name: cand.name.clone(),
            kappa: cand.kappa,
            l0: cand.l0,
            table_min_margin: table_min,
            sampled_min_margin: r.min_margin,
            verdict,
            expected: cand.expect,
        });
        section.inequality.push(r);
        clock.lap(&cand.name);
    }
    report.reproduce = Some(section);
    report.timings = clock.phases;
    report.conclude();
    Ok(report)
}

fn empty_section(example: &str) -> ReproduceSection {
    ReproduceSection {
        example: example.into(),
        identities: Vec::new(),
        margin_table: Vec::new(),
        candidates: Vec::new(),
        inequality: Vec::new(),
    }
}
