//! Acceptance suite: one line per criterion, process exit status 1 if any fails.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use common::{fd_product_laplacian, metric_distance, rng};
use rand::Rng;
use ricci_union::cli::scenario::Scenario;
use ricci_union::coupling::{
    validate_metric_axioms, verify_inequality, CoupledSpace, PairSampler, SeparationProfile,
};
use ricci_union::geometry::{distance_derivatives, Convention, EvolvingMetric, ModelManifold, ScaleLaw};
use ricci_union::heat::{
    heat_union, spectral_oracle, trotter_evolving, trotter_static, GridField, Lattice, SemigroupParams,
};
use ricci_union::lipschitz::{
    lip_constant, lip_constant_exhaustive, monotonicity_trace, separation_floor_trace, uniform_times,
};

type Outcome = (bool, String);

fn torus(dim: usize) -> EvolvingMetric {
    EvolvingMetric::ricci_flow(ModelManifold::flat_torus(dim))
}

fn sphere() -> EvolvingMetric {
    EvolvingMetric::ricci_flow(ModelManifold::round_sphere(2))
}

fn kappa() -> f64 {
    (2.0 * PI).powi(2)
}

fn bundled(name: &str) -> Scenario {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scn"));
    Scenario::parse(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn ac1() -> Outcome {
    // closed form L(t) = 2π√(8t + c²) with c = L0/(2π), so L(0) = L0
    let l0 = 0.1;
    let c = l0 / (2.0 * PI);
    let profile = SeparationProfile::TorusSolution { l0, dim: 2 };
    let mut worst_id: f64 = 0.0;
    for i in 0..20 {
        let t = i as f64 * 0.05;
        let want_l = 2.0 * PI * (8.0 * t + c * c).sqrt();
        let want_dl = 2.0 * PI * 4.0 / (8.0 * t + c * c).sqrt();
        let (l, dl) = profile.eval(t);
        worst_id = worst_id
            .max(((l * dl) - 4.0 * kappa()).abs() / (4.0 * kappa()))
            .max((l - want_l).abs() / want_l)
            .max((dl - want_dl).abs() / want_dl);
    }
    let space = CoupledSpace::new(vec![torus(2); 2], profile).unwrap();
    let times = uniform_times((0.0, 1.0), 19);
    let r = verify_inequality(&space, &times, &PairSampler::with_total(200, 1), 1e-8, Convention::Coordinate).unwrap();
    let mut worst_cf: f64 = 0.0;
    for s in &r.samples {
        let want = 2.0 * kappa() * s.ratio * s.ratio;
        worst_cf = worst_cf.max((s.margin - want).abs());
    }
    let ok = worst_id <= 1e-12 && r.min_margin >= 0.0 && worst_cf <= 1e-9;
    (
        ok,
        format!(
            "LL' identity rel err {worst_id:.1e} (<= 1e-12); min margin {:.3e} (>= 0) over {} samples; |margin - 2(2pi)^2 rho^2| <= {worst_cf:.1e} (<= 1e-9)",
            r.min_margin,
            r.samples.len()
        ),
    )
}

fn ac2() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        let space = CoupledSpace::new(vec![torus(n); 2], SeparationProfile::TorusSolution { l0: 0.1, dim: n }).unwrap();
        let (l, dl) = space.profile(0, 1).unwrap().eval(0.3);
        let times = uniform_times((0.0, 1.0), 19);
        for conv in [Convention::Coordinate, Convention::Riemannian] {
            let r = verify_inequality(&space, &times, &PairSampler::with_total(200, n as u64), 1e-8, conv).unwrap();
            ok &= r.verdict && r.min_margin >= 0.0;
            if conv == Convention::Coordinate {
                parts.push(format!("n={n}: LL'/(2pi)^2 = {:.6}, min margin {:.2e}", l * dl / kappa(), r.min_margin));
            }
        }
    }
    (ok, parts.join("; "))
}

fn ac3() -> Outcome {
    let m = sphere();
    let man = m.manifold;
    let mut r = rng(33);
    let mut worst_lap: f64 = 0.0;
    let mut worst_time: f64 = 0.0;
    for &t in &[0.0, 0.2, 0.4] {
        let mut n = 0;
        while n < 100 {
            let a = man.random_point(&mut r);
            let b = man.random_point(&mut r);
            let ud = man.unit_distance(&a, &b);
            if !(0.05..PI - 0.05).contains(&ud) {
                continue;
            }
            let dd = distance_derivatives(&m, &m, t, &a, &b, Convention::Riemannian).unwrap();
            let closed_lap = dd.distance * dd.laplacian;
            let closed_time = dd.time_term;
            // independent closed forms in unit-sphere distance
            assert!((closed_lap - 2.0 * ud / ud.tan()).abs() < 1e-10);
            assert!((closed_time + ud * ud).abs() < 1e-12);
            let fd_lap = dd.distance * fd_product_laplacian(&m, t, &a, &b, 1e-3, |x, y| metric_distance(&m, t, x, y));
            let h = 1e-5;
            let dt = |s: f64| metric_distance(&m, s, &a, &b);
            let fd_time = dt(t) * (dt(t + h) - dt((t - h).max(0.0))) / (t + h - (t - h).max(0.0));
            worst_lap = worst_lap.max((fd_lap - closed_lap).abs() / closed_lap.abs().max(1e-2));
            worst_time = worst_time.max((fd_time - closed_time).abs() / closed_time.abs());
            n += 1;
        }
    }
    (
        worst_lap <= 0.02 && worst_time <= 0.02,
        format!("300 pairs: d dd/dt rel err {worst_time:.1e}, d Lap d rel err {worst_lap:.1e} (<= 2e-2)"),
    )
}

fn ac4() -> Outcome {
    let m = torus(2);
    let heat = 0.01;
    let err = |n: usize, j: usize| {
        let f = GridField::from_fn(0, Lattice::torus(2, n).unwrap(), 0.0, |x| {
            (2.0 * PI * x[0]).cos() + 0.5 * (2.0 * PI * x[1] + 1.0).cos()
        })
        .unwrap();
        let out = trotter_static(&m, 0.0, &f, heat, &SemigroupParams::new(j, 1, 32)).unwrap();
        let exact = spectral_oracle(&m, &f, (0.0, heat)).unwrap();
        (out.sup_distance(&exact).unwrap(), exact.sup_norm())
    };
    let (e0, scale) = err(128, 64);
    let (e1, _) = err(256, 128);
    let order = (e0 / e1).log2();
    (
        e0 <= 1e-2 && order >= 0.8,
        format!(
            "sup error {e0:.3e} (<= 1e-2) with oracle sup {scale:.3e}; refined error {e1:.3e}, empirical order {order:.3} (>= 0.8)"
        ),
    )
}

fn ac5() -> Outcome {
    let base = bundled("torus-paper");
    let space = base.space().unwrap();
    let lattice = base.lattice().unwrap();
    let bump = |c: [f64; 2], w: f64| {
        move |x: &[f64]| {
            let m = ModelManifold::flat_torus(2);
            (-(m.unit_distance(x, &c) / w).powi(2)).exp()
        }
    };
    let data: Vec<(&str, Vec<GridField>)> = vec![
        (
            "single-mode",
            vec![
                GridField::from_fn(0, lattice.clone(), 0.0, |x| (2.0 * PI * x[0]).cos()).unwrap(),
                GridField::from_fn(1, lattice.clone(), 0.0, |x| 0.5 * (2.0 * PI * (x[0] + x[1])).sin()).unwrap(),
            ],
        ),
        (
            "bump",
            vec![
                GridField::from_fn(0, lattice.clone(), 0.0, bump([0.3, 0.4], 0.15)).unwrap(),
                GridField::from_fn(1, lattice.clone(), 0.0, bump([0.7, 0.2], 0.25)).unwrap(),
            ],
        ),
        (
            "indicator",
            vec![
                GridField::constant(0, lattice.clone(), 0.0, 0.0).unwrap(),
                GridField::constant(1, lattice.clone(), 0.0, 2.0).unwrap(),
            ],
        ),
    ];
    let times = uniform_times(base.window(), 20);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, init) in &data {
        let tr = monotonicity_trace(&space, init, base.window(), &base.params(), &times, 1e-3, &base.union_options())
            .unwrap();
        ok &= tr.monotone_verdict && tr.max_uptick <= 1e-3;
        parts.push(format!("{name} uptick {:.1e}", tr.max_uptick));
    }

    let neg = bundled("negative-control");
    let nspace = neg.space().unwrap();
    let c = 1.0;
    let init = neg.initial_fields().unwrap();
    let ntimes = neg.times();
    let tr = monotonicity_trace(&nspace, &init, neg.window(), &neg.params(), &ntimes, 1e-3, &neg.union_options()).unwrap();
    let mut worst: f64 = 0.0;
    let mut strictly = true;
    for (i, &t) in ntimes.iter().enumerate() {
        let l = (1.0 - t).powi(4);
        worst = worst.max((tr.lip_values[i] - c / l).abs() / (c / l));
        if i > 0 {
            strictly &= tr.lip_values[i] > tr.lip_values[i - 1];
        }
    }
    ok &= !tr.monotone_verdict && strictly && worst <= 1e-6;
    parts.push(format!(
        "negative control: strictly increasing {strictly}, |Lip - c/L| rel {worst:.1e} (<= 1e-6), verdict {}",
        tr.monotone_verdict
    ));
    (ok, parts.join("; "))
}

fn ac6() -> Outcome {
    let metric = EvolvingMetric::with_law(ModelManifold::flat_torus(2), ScaleLaw::Stationary);
    let space = CoupledSpace::single(metric).unwrap();
    let lattice = Lattice::torus(2, 32).unwrap();
    let mut r = rng(66);
    let man = ModelManifold::flat_torus(2);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..10 {
        let a: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let x0 = man.random_point(&mut r);
        let f = GridField::from_fn(0, lattice.clone(), 0.0, |x| match k % 3 {
            0 => a[0] * (2.0 * PI * x[0]).cos() + a[1] * (2.0 * PI * (x[0] - 2.0 * x[1]) + a[2]).sin(),
            1 => a[0] * man.unit_distance(x, &x0) + a[3] * (4.0 * PI * x[1]).cos(),
            _ => (a[0] * (2.0 * PI * x[0]).sin()).abs() + a[1] * (2.0 * PI * x[1]).cos().max(0.0),
        })
        .unwrap();
        let before = lip_constant(&space, std::slice::from_ref(&f), 0.0).unwrap().value;
        for &heat in &[1e-4, 3e-4, 1e-3, 2e-3, 5e-3] {
            let out = trotter_static(&metric, 0.0, &f, heat, &SemigroupParams::new(8, 1, 16)).unwrap();
            let out = GridField { time: 0.0, ..out };
            let after = lip_constant(&space, &[out], 0.0).unwrap().value;
            worst = worst.max(after - before);
        }
    }
    (worst <= 1e-3, format!("50 runs: worst Lip(out) - Lip(in) = {worst:.3e} (<= 1e-3)"))
}

fn ac7() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["torus-paper", "three-torus", "sphere-shrinking"] {
        let sc = bundled(name);
        let space = sc.space().unwrap();
        let init = sc.initial_fields().unwrap();
        let params = sc.params();
        let ev = heat_union(&space, &init, sc.window(), &params, &sc.union_options()).unwrap();
        let mut same = true;
        for (i, f) in init.iter().enumerate() {
            let alone = trotter_evolving(space.component(i), f, sc.window(), &params).unwrap();
            same &= alone.values.len() == ev.fields[i].values.len()
                && alone.values.iter().zip(&ev.fields[i].values).all(|(a, b)| a.to_bits() == b.to_bits());
        }
        ok &= same;
        parts.push(format!("{name} ({} components) bit-identical {same}", space.len()));
    }
    (ok, parts.join("; "))
}

fn ac8() -> Outcome {
    let mut r = rng(88);
    let mut mismatches = 0;
    let mut cases = 0;
    for k in 0..20 {
        let n = [8, 16, 32][k % 3];
        let lattice = Lattice::torus(2, n).unwrap();
        let space = CoupledSpace::new(vec![torus(2); 2], SeparationProfile::constant(r.random_range(0.01..0.3))).unwrap();
        let fields: Vec<GridField> = (0..2)
            .map(|c| {
                let a: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
                let noise: Vec<f64> = (0..lattice.node_count()).map(|_| r.random_range(-1.0..1.0)).collect();
                let mut f = GridField::from_fn(c, lattice.clone(), 0.0, |x| {
                    a[0] * (2.0 * PI * x[0]).cos() + a[1] * (2.0 * PI * x[1]).sin() + a[2]
                })
                .unwrap();
                if k % 2 == 1 {
                    f.values.iter_mut().zip(&noise).for_each(|(v, e)| *v += 0.1 * e);
                }
                f
            })
            .collect();
        let p = lip_constant(&space, &fields, 0.0).unwrap();
        let e = lip_constant_exhaustive(&space, &fields, 0.0).unwrap();
        if p.value != e.value || p.pair != e.pair {
            mismatches += 1;
        }
        cases += 1;
    }
    (mismatches == 0, format!("{cases} fields on grids 8^2..32^2: {mismatches} mismatches (value and pair)"))
}

fn ac9() -> Outcome {
    let names = [
        "torus-paper",
        "torus-constant-L",
        "torus-n",
        "three-torus",
        "sphere-candidates",
        "sphere-shrinking",
        "negative-control",
        "torus-single-mode",
    ];
    let mut ok = true;
    let mut passing = Vec::new();
    for name in names {
        let sc = bundled(name);
        let space = sc.space().unwrap();
        let times = sc.times();
        let r = verify_inequality(&space, &times, &PairSampler::with_total(sc.sampling.pairs, sc.seed), sc.tolerances.margin, sc.convention)
            .unwrap();
        if r.verdict {
            let tr = separation_floor_trace(&space, &times, 1e-10).unwrap();
            ok &= tr.non_decreasing;
            passing.push(format!("{name}:{}", tr.non_decreasing));
        }
    }
    (ok && !passing.is_empty(), format!("non-decreasing floor on passing scenarios [{}]", passing.join(", ")))
}

fn ac10() -> Outcome {
    let mut r = rng(1010);
    let spaces = [
        ("torus x3", CoupledSpace::new(vec![torus(2); 3], SeparationProfile::TorusSolution { l0: 0.05, dim: 2 }).unwrap(), 0.3),
        ("sphere x2", CoupledSpace::new(vec![sphere(); 2], SeparationProfile::SphereCandidate { l0: 0.1, kappa: 5.0 }).unwrap(), 0.3),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, space, t) in &spaces {
        let rep = validate_metric_axioms(space, *t, &mut r, 10_000, 1e-10).unwrap();
        let worst = rep.worst_triangle_excess.max(0.0);
        ok &= rep.passed && worst <= 1e-10;
        parts.push(format!("{name}: worst violation {worst:.1e}"));
    }
    (ok, format!("10^4 triples each; {}", parts.join("; ")))
}

fn main() {
    let criteria: [(&str, &str, f64, fn() -> Outcome); 10] = [
        ("AC1", "torus reproduction", 5.0, ac1),
        ("AC2", "n-torus profiles", 10.0, ac2),
        ("AC3", "sphere closed forms vs finite differences", 30.0, ac3),
        ("AC4", "Trotter vs spectral oracle", 60.0, ac4),
        ("AC5", "Lipschitz monotonicity and negative control", 120.0, ac5),
        ("AC6", "von Renesse-Sturm contraction", 60.0, ac6),
        ("AC7", "union restricts to components bit-for-bit", 30.0, ac7),
        ("AC8", "pruned Lip equals exhaustive Lip", 30.0, ac8),
        ("AC9", "separation floor", 5.0, ac9),
        ("AC10", "metric axioms", 5.0, ac10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, name, budget, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| id.eq_ignore_ascii_case(p)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = f();
        let secs = start.elapsed().as_secs_f64();
        let in_budget = secs < budget;
        let pass = ok && in_budget;
        println!(
            "[{}] {id} {name}: {detail}; {secs:.2} s (budget {budget} s{})",
            if pass { "PASS" } else { "FAIL" },
            if in_budget { "" } else { ", exceeded" }
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {}", failed.join(", "));
        std::process::exit(1);
    }
}
