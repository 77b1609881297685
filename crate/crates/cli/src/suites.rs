//! Randomized property suites for `verify`.
//!
//! Every case draws its own seed from the run seed; failing cases report it for replay.

use std::sync::Arc;

use potlib::capacity::{sobolev_capacity, CapacitySpace};
use potlib::energy_obstacle::{check_obstacle_comparison, solve_obstacle, ObstacleSpec};
use potlib::harmonic::{is_superharmonic, p_harmonic_extension};
use potlib::perron::comparison_principle_check;
use potlib::space_graph::Edge;
use potlib::{discrete_upper_gradient, p_energy, Exponent, GraphSpace, ScalarField, Subdomain, VertexSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Settings;
use crate::output::Artifacts;
use crate::Failure;

pub const SUITES: &[&str] = &["gradients", "obstacle", "harmonic", "capacity", "comparison"];

#[derive(Debug, Clone, Serialize)]
pub struct CaseFailure {
    pub case: usize,
    pub seed: u64,
    pub properties: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub passed: usize,
    pub failures: Vec<CaseFailure>,
}

type Checks = Vec<(&'static str, bool)>;

pub fn verify(s: &Settings) -> Result<(Artifacts, Result<(), Failure>), Failure> {
    let suite = s
        .opts
        .suite
        .clone()
        .ok_or_else(|| Failure::Validation(format!("verify needs --suite, one of {}", SUITES.join(", "))))?;
    let check: fn(&mut ChaCha8Rng) -> Checks = match suite.as_str() {
        "gradients" => gradients,
        "obstacle" => obstacle,
        "harmonic" => harmonic,
        "capacity" => capacity,
        "comparison" => comparison,
        other => return Err(Failure::Validation(format!("unknown suite `{other}`, expected one of {}", SUITES.join(", ")))),
    };
    let cases = s.opts.cases.unwrap_or(200);
    if cases == 0 {
        return Err(Failure::Validation("cases must be positive".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(s.seed);
    let seeds: Vec<u64> = (0..cases).map(|_| master.gen()).collect();
    let failures: Vec<CaseFailure> = seeds
        .par_iter()
        .enumerate()
        .filter_map(|(case, &seed)| {
            let bad: Vec<String> = check(&mut ChaCha8Rng::seed_from_u64(seed))
                .into_iter()
                .filter(|(_, ok)| !ok)
                .map(|(name, _)| name.to_string())
                .collect();
            (!bad.is_empty()).then_some(CaseFailure { case, seed, properties: bad })
        })
        .collect();
    let report = SuiteReport { suite: suite.clone(), seed: s.seed, cases, passed: cases - failures.len(), failures };
    let verdict = if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Suite(format!("{} of {cases} cases of suite {suite} failed", report.failures.len())))
    };
    let artifacts = Artifacts::new(serde_json::json!({ "command": "verify", "settings": s, "result": report }))?;
    Ok((artifacts, verdict))
}

fn graph(rng: &mut ChaCha8Rng, n: usize) -> GraphSpace {
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !pairs.contains(&(a.min(b), a.max(b))) {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let edges = pairs.into_iter().map(|(a, b)| Edge::new(a, b, rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0))).collect();
    GraphSpace::new((0..n).map(|_| rng.gen_range(0.5..2.0)).collect(), edges).expect("valid random graph")
}

fn instance(rng: &mut ChaCha8Rng) -> Subdomain {
    let n = rng.gen_range(5..=14);
    let g = Arc::new(graph(rng, n));
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let b = rng.gen_range(1..=(n / 3).max(1));
    let boundary: VertexSet = ids[..b].iter().copied().collect();
    let interior: VertexSet = ids[b..].iter().copied().collect();
    Subdomain::new(g, interior, boundary, false).expect("valid random split")
}

fn field(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    ScalarField::from_fn(n, |_| rng.gen_range(-1.0..1.0))
}

fn exponent(rng: &mut ChaCha8Rng) -> Exponent {
    Exponent::new([1.5, 2.0, 3.0][rng.gen_range(0..3)]).expect("valid exponent")
}

fn gradients(rng: &mut ChaCha8Rng) -> Checks {
    let n = rng.gen_range(3..=20);
    let g = graph(rng, n);
    let p = Exponent::new(rng.gen_range(1.1..4.0)).expect("valid exponent");
    let (u, v) = (field(rng, n), field(rng, n));
    let gu = discrete_upper_gradient(&u, &g);
    let gv = discrete_upper_gradient(&v, &g);
    let sum = discrete_upper_gradient(&u.zip_with(&v, |a, b| a + b), &g);
    let m = g.edge_count();
    let alpha: f64 = rng.gen_range(-3.0..3.0);
    let scaled = discrete_upper_gradient(&u.map(|x| alpha * x), &g);
    let agree: VertexSet = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    let w = ScalarField::from_fn(n, |x| if agree.contains(x) { u.get(x) } else { v.get(x) });
    let gw = discrete_upper_gradient(&w, &g);
    let all: VertexSet = (0..n).collect();
    let t: f64 = rng.gen_range(0.0..1.0);
    let mix = u.zip_with(&v, |a, b| t * a + (1.0 - t) * b);
    let (eu, ev, em) = (p_energy(&u, &g, &all, p), p_energy(&v, &g, &all, p), p_energy(&mix, &g, &all, p));
    vec![
        ("subadditive", (0..m).all(|e| sum.get(e) <= gu.get(e) + gv.get(e) + 1e-12)),
        ("homogeneous", (0..m).all(|e| (scaled.get(e) - alpha.abs() * gu.get(e)).abs() <= 1e-12 * (1.0 + gu.get(e)))),
        (
            "local",
            g.edges()
                .iter()
                .enumerate()
                .filter(|(_, e)| agree.contains(e.a) && agree.contains(e.b))
                .all(|(id, _)| gw.get(id) == gu.get(id)),
        ),
        ("convex", em <= t * eu + (1.0 - t) * ev + 1e-12 * (1.0 + eu + ev)),
        ("constants", discrete_upper_gradient(&ScalarField::constant(n, alpha), &g).values().iter().all(|&x| x == 0.0)),
    ]
}

fn random_obstacle(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    ScalarField::from_fn(n, |_| if rng.gen_bool(0.7) { rng.gen_range(-0.5..1.5) } else { f64::NEG_INFINITY })
}

fn obstacle(rng: &mut ChaCha8Rng) -> Checks {
    let d = instance(rng);
    let n = d.graph().vertex_count();
    let p = exponent(rng);
    let f = field(rng, n);
    let psi = random_obstacle(rng, n);
    let lift: f64 = rng.gen_range(0.0..0.5);
    let spec = ObstacleSpec::new(d.clone(), psi.clone(), f.clone(), p).expect("valid spec");
    let higher = ObstacleSpec::new(d.clone(), psi.map(|x| x + lift), f.map(|x| x + lift), p).expect("valid spec");
    let tol = 1e-10;
    let Ok(sol) = solve_obstacle(&spec, tol) else {
        return vec![("solver", false)];
    };
    let u = &sol.solution;
    let comparison = check_obstacle_comparison(&spec, &higher, 1e-8).map(|c| c.holds).unwrap_or(false);
    let checks = vec![
        ("above obstacle", d.interior().iter().all(|v| u.get(v) >= psi.get(v) - 1e-9)),
        ("boundary data", d.boundary().iter().all(|v| u.get(v) == f.get(v))),
        ("superharmonic", is_superharmonic(u, &d, p, 1e-6)),
        ("kkt", sol.relative_residual <= 1e-8 || sol.error_bound <= 1e-8),
        ("comparison", comparison),
    ];
    checks
}

fn harmonic(rng: &mut ChaCha8Rng) -> Checks {
    let d = instance(rng);
    let n = d.graph().vertex_count();
    let p = exponent(rng);
    let f = field(rng, n);
    let g = f.map(|x| x + 0.25);
    let (Ok(h), Ok(hg)) = (p_harmonic_extension(&d, &f, p, 1e-10), p_harmonic_extension(&d, &g, p, 1e-10)) else {
        return vec![("solver", false)];
    };
    let (lo, hi) = d.boundary().iter().map(|v| f.get(v)).fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
    let u = &h.solution;
    let checks = vec![
        ("maximum principle", d.interior().iter().all(|v| u.get(v) >= lo - 1e-9 && u.get(v) <= hi + 1e-9)),
        ("superharmonic", is_superharmonic(u, &d, p, 1e-6)),
        ("subharmonic", is_superharmonic(&u.map(|x| -x), &d, p, 1e-6)),
        ("monotone data", u.max_excess_over(&hg.solution, d.interior()) <= 1e-8),
        (
            "translation",
            u.map(|x| x + 0.25).sup_distance(&hg.solution, d.interior()) <= 1e-8 + h.error_bound + hg.error_bound,
        ),
    ];
    checks
}

fn capacity(rng: &mut ChaCha8Rng) -> Checks {
    let n = rng.gen_range(4..=12);
    let g = graph(rng, n);
    let p = exponent(rng);
    let space = CapacitySpace::Whole(&g);
    let pick = |rng: &mut ChaCha8Rng| -> VertexSet { (0..n).filter(|_| rng.gen_bool(0.3)).collect() };
    let (a, b) = (pick(rng), pick(rng));
    let big = a.union(&b);
    let tol = 1e-10;
    let cap = |e: &VertexSet| sobolev_capacity(e, space, p, tol);
    let (Ok(ca), Ok(cb), Ok(cu)) = (cap(&a), cap(&b), cap(&big)) else {
        return vec![("solver", false)];
    };
    let slack = ca.certified_gap + cb.certified_gap + cu.certified_gap + 1e-8;
    let mass: f64 = a.iter().map(|v| g.measure(v)).sum();
    vec![
        ("monotone", ca.value <= cu.value + slack),
        ("subadditive", cu.value <= ca.value + cb.value + slack),
        ("measure bound", mass <= ca.value + slack),
        ("empty set", a.is_empty() <= (ca.value == 0.0)),
    ]
}

fn comparison(rng: &mut ChaCha8Rng) -> Checks {
    let d = instance(rng);
    let n = d.graph().vertex_count();
    let p = exponent(rng);
    let f = field(rng, n);
    let psi = random_obstacle(rng, n);
    let delta: f64 = rng.gen_range(0.01..0.5);
    let spec = ObstacleSpec::new(d.clone(), psi, f.clone(), p).expect("valid spec");
    let (Ok(u), Ok(v)) = (solve_obstacle(&spec, 1e-12), p_harmonic_extension(&d, &f.map(|x| x - delta), p, 1e-12))
    else {
        return vec![("solver", false)];
    };
    let c = comparison_principle_check(&u.solution, &v.solution, &d, p, 1e-7);
    vec![("comparison", c.map(|c| c.holds).unwrap_or(false))]
}
