mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use potlib::parabolicity::{
    classify_parabolicity, polar_calibration, polar_grid, radial_shell_family, relative_p_capacity,
    rn_log_testfunction, strip_domain_generator, InnerEnd, StripResolution, Thresholds, Verdict,
};
use potlib::space_graph::{build_grid, Edge, Level};
use potlib::{p_energy, Error, Exponent, GraphSpace, Subdomain, VertexSet};
use proptest::prelude::*;

fn exp(p: f64) -> Exponent {
    Exponent::new(p).unwrap()
}

fn level(graph: GraphSpace, rim: VertexSet, inner: VertexSet, radius: Vec<f64>) -> Level {
    let n = graph.vertex_count();
    let interior: VertexSet = (0..n).filter(|&v| !rim.contains(v)).collect();
    let domain = Subdomain::new(Arc::new(graph), interior, rim.clone(), false).unwrap();
    let top = rim.iter().map(|v| radius[v]).fold(0.0, f64::max);
    Level { domain, outer_rim: rim, inner, log_radius: radius, rim_log_radius: top, rim_radius: top }
}

fn path_level(len: usize) -> Level {
    let g = GraphSpace::new(vec![1.0; len + 1], (0..len).map(|i| Edge::new(i, i + 1, 1.0, 1.0)).collect()).unwrap();
    level(g, [len].into_iter().collect(), [0].into_iter().collect(), (0..=len).map(|i| i as f64).collect())
}

/// Square grid level with rim where `rim` holds, restricted to vertices accepted by `keep`.
fn grid_level(extent: f64, keep: impl Fn(&[f64]) -> bool, rim: impl Fn(&[f64]) -> bool) -> Level {
    let g = build_grid(2, extent, 1.0, keep).unwrap();
    let n = g.graph().vertex_count();
    let rim_set: VertexSet = (0..n).filter(|&v| rim(&g.coords[v])).collect();
    let inner: VertexSet = (0..n).filter(|&v| g.coords[v].iter().all(|&c| c == 0.0)).collect();
    let radius = g.coords.iter().map(|x| x[0].abs().max(x[1].abs())).collect();
    level(g.graph().clone(), rim_set, inner, radius)
}

#[test]
fn empty_compact_set_has_zero_capacity() {
    let l = path_level(4);
    assert_eq!(relative_p_capacity(&VertexSet::new(), &l, exp(2.0), 1e-10).unwrap().value, 0.0);
}

#[test]
fn path_condenser_matches_linear_profile() {
    for len in [1usize, 3, 8] {
        for p in [1.5, 2.0, 3.0] {
            let l = path_level(len);
            let r = relative_p_capacity(&l.inner, &l, exp(p), 1e-12).unwrap();
            assert!((r.value - (len as f64).powf(1.0 - p)).abs() < 1e-8, "L={len} p={p}: {}", r.value);
            for v in 0..=len {
                assert!((r.minimizer.get(v) - (1.0 - v as f64 / len as f64)).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn compact_set_on_rim_is_a_geometry_error() {
    let l = path_level(3);
    assert!(matches!(relative_p_capacity(&[3].into_iter().collect(), &l, exp(2.0), 1e-10), Err(Error::Geometry(_))));
}

#[test]
fn radial_ball_condenser_in_three_dimensions() {
    let radius: f64 = 3.0;
    let fam = radial_shell_family(3, 2.0, &[radius.ln()], 1.0 / 32.0, 1.0, true, InnerEnd::Interior).unwrap();
    let l = fam.last();
    let r = relative_p_capacity(&l.inner, l, exp(2.0), 1e-12).unwrap();
    let exact = 4.0 * PI / (1.0 - 1.0 / radius);
    assert!((r.value / exact - 1.0).abs() < 0.05, "{} vs {exact}", r.value);
}

#[test]
fn classification_examples() {
    let th = Thresholds::default();
    let rims = [10.0, 1e2, 1e3, 1e4, 1e5, 1e6];
    let line = radial_shell_family(1, 2.0, &rims, 0.0, 1.1, false, InnerEnd::Interior).unwrap();
    let r = classify_parabolicity(&line, None, exp(2.0), 6, th, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::ParabolicEvidence);
    assert!(r.heuristic);
    for l in &r.levels {
        assert!((l.capacity * l.distance / 2.0 - 1.0).abs() < 1e-6, "{l:?}");
    }

    let plane = radial_shell_family(2, 2.0, &rims, 0.1, 1.2, true, InnerEnd::Interior).unwrap();
    let r = classify_parabolicity(&plane, None, exp(2.0), 6, th, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::ParabolicEvidence);
    for l in &r.levels {
        assert!((l.capacity / (2.0 * PI / l.distance) - 1.0).abs() < 1e-6, "{l:?}");
    }

    let space = radial_shell_family(3, 2.0, &rims, 0.0, 1.05, false, InnerEnd::Interior).unwrap();
    let r = classify_parabolicity(&space, None, exp(2.0), 6, th, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::HyperbolicEvidence);
    assert!((r.extrapolated_limit / (4.0 * PI) - 1.0).abs() < 0.01);

    assert!(matches!(classify_parabolicity(&space, None, exp(2.0), 2, th, 1e-10), Err(Error::Parameter(_))));
}

#[test]
fn log_test_function_energies() {
    let m = 8;
    let grid = polar_grid(64, m, 1.0, 5).unwrap();
    let cal = polar_calibration(m);
    for j in 1..=5 {
        let jf = j as f64;
        let t = rn_log_testfunction(1.0, jf, &grid, exp(2.0), 2).unwrap();
        assert!((t.analytic_energy - 2.0 * PI / jf).abs() < 1e-12);
        assert!(!t.truncated);
        assert!((t.calibration / cal - 1.0).abs() < 1e-9, "j={j}: {}", t.calibration);

        let t3 = rn_log_testfunction(1.0, jf, &grid, exp(3.0), 2).unwrap();
        let expect = 2.0 * PI * (1.0 - (-jf).exp()) / jf.powi(3);
        assert!((t3.analytic_energy - expect).abs() < 1e-12);

        for v in 0..grid.vertex_count() {
            let s = grid.log_radius[v];
            let u = t.field.get(v);
            if s <= 0.0 {
                assert_eq!(u, 1.0);
            }
            if s >= jf {
                assert_eq!(u, 0.0);
            }
            assert!((0.0..=1.0).contains(&u));
        }
    }
}

#[test]
fn test_function_energies_stay_near_analytic_above_the_dimension() {
    let m = 8;
    let grid = polar_grid(64, m, 1.0, 5).unwrap();
    for p in [2.5, 3.0, 4.0] {
        for j in 1..=5 {
            let t = rn_log_testfunction(1.0, j as f64, &grid, exp(p), 2).unwrap();
            let kappa = (polar_calibration(m) - 1.0).abs();
            assert!(t.discrete_energy <= (1.0 + 10.0 * kappa + 1e-3) * t.analytic_energy, "p={p} j={j}: {}", t.calibration);
            assert!(t.discrete_energy >= (1.0 - 1e-2) * t.analytic_energy, "p={p} j={j}: {}", t.calibration);
        }
    }
}

#[test]
fn strips_below_the_dimension_are_parabolic() {
    // capacities decay like |x̃|^{-1/2} for q = 0 and only like |x̃|^{-1/10} for q = 0.4
    for (q, step) in [(0.0, 1), (0.4, 5)] {
        let rims: Vec<f64> = (1..=7).map(|k| 10f64.powi(step * k)).collect();
        let res = StripResolution { rows: 1, columns_per_unit: 4, rims };
        let fam = strip_domain_generator(2, q, 1.0, &res).unwrap();
        let r = classify_parabolicity(&fam, None, exp(1.5), 7, Thresholds::default(), 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::ParabolicEvidence, "q={q}: {:?}", r.capacities());
        assert!(r.capacities().windows(2).all(|w| w[1] < w[0]));
    }
    let res = StripResolution { rows: 1, columns_per_unit: 4, rims: vec![10.0] };
    assert!(matches!(strip_domain_generator(2, 1.0, 1.0, &res), Err(Error::Parameter(_))));
}

#[test]
fn subset_levels_have_smaller_capacities() {
    for p in [1.5, 2.0, 3.0] {
        let extent = 4.0;
        let square = grid_level(extent, |_| true, |x| x[0].abs().max(x[1].abs()) == extent);
        let strip = grid_level(extent, |x| x[1].abs() <= 1.0, |x| x[0].abs() == extent);
        let cross = grid_level(extent, |x| x[1].abs() <= 1.0 || x[0].abs() <= 1.0, |x| x[0].abs().max(x[1].abs()) == extent);
        let c = |l: &Level| relative_p_capacity(&l.inner, l, exp(p), 1e-12).unwrap();
        let (cs, cc, cq) = (c(&strip), c(&cross), c(&square));
        assert!(cs.value <= cc.value + cs.certified_gap + cc.certified_gap, "p={p}");
        assert!(cc.value <= cq.value + cc.certified_gap + cq.certified_gap, "p={p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levels_decrease_and_carry_witnesses(
        n in 1usize..4,
        p in prop::sample::select(vec![1.5, 2.0, 3.0]),
        growth in 1.05f64..1.3,
    ) {
        let rims = [4.0, 16.0, 64.0, 256.0];
        let fam = radial_shell_family(n, p, &rims, 0.0, growth, false, InnerEnd::Interior).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..fam.len() {
            let l = fam.level(k);
            let r = relative_p_capacity(&l.inner, l, exp(p), 1e-10).unwrap();
            prop_assert!(r.value <= prev + r.certified_gap + 1e-10);
            prev = r.value;
            let u = &r.minimizer;
            prop_assert!(l.inner.iter().all(|v| u.get(v) == 1.0));
            prop_assert!(l.outer_rim.iter().all(|v| u.get(v) == 0.0));
            prop_assert!(u.values().iter().all(|x| (0.0..=1.0).contains(x)));
            let all: VertexSet = (0..l.vertex_count()).collect();
            let e = p_energy(u, l.graph(), &all, exp(p));
            prop_assert!((e - r.value).abs() <= 1e-9 * (1.0 + r.value));
        }
    }
}
