mod common;

use std::f64::consts::PI;

use common::{fd_product_laplacian, metric_distance, rng};
use ricci_union::coupling::{
    coupled_time_derivative, coupled_time_derivative_fd, laplacian_of_coupled_distance, CoupledSpace,
    SeparationProfile,
};
use ricci_union::geometry::{distance_derivatives, Convention, EvolvingMetric, ModelManifold, Point};
use ricci_union::heat::{
    heat_union, spectral_oracle, trotter_evolving, trotter_static, GridField, Lattice, SemigroupParams, UnionOptions,
};

fn torus2() -> EvolvingMetric {
    EvolvingMetric::ricci_flow(ModelManifold::flat_torus(2))
}

fn sphere2() -> EvolvingMetric {
    EvolvingMetric::ricci_flow(ModelManifold::round_sphere(2))
}

#[test]
fn torus_distance_laplacian_matches_finite_differences() {
    let m = torus2();
    let man = m.manifold;
    let mut r = rng(1);
    let mut checked = 0;
    while checked < 50 {
        let a = man.random_point(&mut r);
        let b = man.random_point(&mut r);
        if man.cut_locus_gap(&a, &b) < 0.05 || man.unit_distance(&a, &b) < 0.05 {
            continue;
        }
        let closed = distance_derivatives(&m, &m, 0.0, &a, &b, Convention::Riemannian).unwrap();
        let fd = fd_product_laplacian(&m, 0.0, &a, &b, 1e-3, |x, y| metric_distance(&m, 0.0, x, y));
        assert!((fd - closed.laplacian).abs() <= 1e-2 * closed.laplacian.abs(), "fd {fd} vs {}", closed.laplacian);
        // d Δd = 2(n − 1) in metric units, (2π)² times that in the coordinate reading
        assert!((closed.distance * closed.laplacian - 2.0).abs() < 1e-12);
        let coord = distance_derivatives(&m, &m, 0.0, &a, &b, Convention::Coordinate).unwrap();
        assert!((closed.distance * coord.laplacian - 2.0 * (2.0 * PI).powi(2)).abs() < 1e-9);
        assert!((coord.gradient_sq - 2.0 * (2.0 * PI).powi(2)).abs() < 1e-9);
        checked += 1;
    }
}

#[test]
fn sphere_distance_derivatives_match_finite_differences() {
    let m = sphere2();
    let man = m.manifold;
    let mut r = rng(2);
    for &t in &[0.0, 0.3] {
        let mut checked = 0;
        while checked < 30 {
            let a = man.random_point(&mut r);
            let b = man.random_point(&mut r);
            let ud = man.unit_distance(&a, &b);
            if !(0.1..PI - 0.1).contains(&ud) {
                continue;
            }
            let closed = distance_derivatives(&m, &m, t, &a, &b, Convention::Riemannian).unwrap();
            let fd = fd_product_laplacian(&m, t, &a, &b, 1e-3, |x, y| metric_distance(&m, t, x, y));
            let scale = closed.laplacian.abs().max(1e-2);
            assert!((fd - closed.laplacian).abs() <= 1e-2 * scale, "t={t}: fd {fd} vs {}", closed.laplacian);
            // d_t Δd_t = 2 d cot d in unit-sphere distance, independent of t
            assert!((closed.distance * closed.laplacian - 2.0 * ud / ud.tan()).abs() < 1e-10);
            assert!((closed.time_term + ud * ud).abs() < 1e-12);
            checked += 1;
        }
    }
}

#[test]
fn coupled_laplacian_matches_product_stencil() {
    let space = CoupledSpace::new(vec![torus2(); 2], SeparationProfile::TorusSolution { l0: 0.05, dim: 2 }).unwrap();
    let man = space.component(0).manifold;
    let mut r = rng(3);
    let mut checked = 0;
    while checked < 50 {
        let a = man.random_point(&mut r);
        let b = man.random_point(&mut r);
        if man.cut_locus_gap(&a, &b) < 0.05 || man.unit_distance(&a, &b) < 0.05 {
            continue;
        }
        let t = 0.01 * checked as f64;
        let l = space.profile(0, 1).unwrap().value(t);
        let m = space.component(0);
        let closed = laplacian_of_coupled_distance(&space, t, &Point::new(0, a.clone()), &Point::new(1, b.clone()), Convention::Riemannian).unwrap();
        let fd = fd_product_laplacian(m, t, &a, &b, 1e-3, |x, y| {
            let d = metric_distance(m, t, x, y);
            (l * l + d * d).sqrt()
        });
        assert!((fd - closed).abs() <= 2e-2 * closed.abs(), "fd {fd} vs {closed}");
        checked += 1;
    }
}

#[test]
fn coupled_time_derivative_matches_central_differences() {
    let space = CoupledSpace::new(vec![sphere2(); 2], SeparationProfile::SphereCandidate { l0: 0.2, kappa: 5.0 }).unwrap();
    let man = space.component(0).manifold;
    let mut r = rng(4);
    for i in 0..40 {
        let t = 0.45 * i as f64 / 40.0;
        let a = Point::new(0, man.random_point(&mut r));
        let b = Point::new(1, man.random_point(&mut r));
        let closed = coupled_time_derivative(&space, t, &a, &b).unwrap();
        let fd = coupled_time_derivative_fd(&space, t, &a, &b).unwrap();
        assert!((fd - closed).abs() <= 1e-6 * closed.abs().max(1.0), "t={t}: fd {fd} vs {closed}");
    }
}

fn degree_one(level: usize) -> GridField {
    GridField::from_fn(0, Lattice::sphere(level).unwrap(), 0.0, |x| x[2]).unwrap()
}

#[test]
fn time_slicing_converges_at_first_order() {
    let m = sphere2();
    let f = degree_one(4);
    let window = (0.0, 0.4);
    let run = |slices| trotter_evolving(&m, &f, window, &SemigroupParams::new(1, slices, 16)).unwrap();
    let (u4, u8, u16) = (run(4), run(8), run(16));
    let d1 = u4.sup_distance(&u8).unwrap();
    let d2 = u8.sup_distance(&u16).unwrap();
    let ratio = d1 / d2;
    assert!((1.5..3.0).contains(&ratio), "Cauchy ratio {ratio} ({d1:.3e}, {d2:.3e})");
    // the left-endpoint product lags the exact decay on a shrinking sphere
    let exact = spectral_oracle(&m, &f, window).unwrap();
    assert!(u16.sup_distance(&exact).unwrap() < u4.sup_distance(&exact).unwrap());
}

#[test]
fn torus_trotter_error_shrinks_with_refinement() {
    let m = torus2();
    let heat = 1e-4;
    let err = |n: usize, j: usize| {
        let f = GridField::from_fn(0, Lattice::torus(2, n).unwrap(), 0.0, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).cos()).unwrap();
        let out = trotter_static(&m, 0.0, &f, heat, &SemigroupParams::new(j, 1, 32)).unwrap();
        let exact = spectral_oracle(&m, &f, (0.0, heat)).unwrap();
        out.sup_distance(&exact).unwrap()
    };
    let coarse = err(32, 8);
    let fine = err(64, 16);
    assert!(fine < coarse, "coarse {coarse:.3e}, fine {fine:.3e}");
}

#[test]
fn union_evolution_obeys_the_maximum_principle() {
    let lattice = Lattice::torus(2, 32).unwrap();
    let space = CoupledSpace::new(vec![torus2(); 2], SeparationProfile::TorusSolution { l0: 0.1, dim: 2 }).unwrap();
    let mut fields = vec![
        GridField::from_fn(0, lattice.clone(), 0.0, |x| (-((x[0] - 0.5).powi(2) + (x[1] - 0.3).powi(2)) / 0.01).exp()).unwrap(),
        GridField::from_fn(1, lattice, 0.0, |x| 0.5 * (2.0 * PI * x[1]).sin()).unwrap(),
    ];
    let params = SemigroupParams::new(4, 2, 16);
    let sup = |fs: &[GridField]| fs.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
    let mut last = sup(&fields);
    for i in 0..5 {
        let w = (i as f64 * 4e-4, (i + 1) as f64 * 4e-4);
        fields = heat_union(&space, &fields, w, &params, &UnionOptions::default()).unwrap().fields;
        let now = sup(&fields);
        assert!(now <= last + 1e-12, "step {i}: {now} > {last}");
        last = now;
    }
}
