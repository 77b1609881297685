//! `p`-harmonic extensions, the discrete `p`-Laplacian and superharmonicity tests.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy_obstacle::{
    run_convergence_sequence, solve_obstacle, Comparison, ConvergenceReport, ObstacleSpec,
};
use crate::error::{Error, Result};
use crate::space_graph::{Exponent, ScalarField, Subdomain, VertexSet};

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicSolution {
    pub solution: ScalarField,
    pub residual_sup: f64,
    pub energy: f64,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub error_bound: f64,
}

/// `Δ_p u(x) = Σ_{y∼x} w/ℓ^p |u(y) − u(x)|^{p−2} (u(y) − u(x))` at interior vertices, zero elsewhere.
pub fn p_laplacian(u: &ScalarField, domain: &Subdomain, p: Exponent) -> ScalarField {
    let g = domain.graph();
    let pp = p.get();
    ScalarField::from_fn(g.vertex_count(), |x| {
        if !domain.is_interior(x) {
            return 0.0;
        }
        let ux = u.get(x);
        g.neighbors(x)
            .iter()
            .map(|&(y, e)| {
                let d = u.get(y) - ux;
                if d == 0.0 {
                    0.0
                } else {
                    g.conductance(e, p) * d.abs().powf(pp - 1.0) * d.signum()
                }
            })
            .sum()
    })
}

/// Energy minimizer with boundary values `f` and no obstacle.
pub fn p_harmonic_extension(
    domain: &Subdomain,
    f: &ScalarField,
    p: Exponent,
    tol: f64,
) -> Result<HarmonicSolution> {
    let spec = ObstacleSpec::unconstrained(domain.clone(), f.clone(), p)?;
    let r = solve_obstacle(&spec, tol)?;
    Ok(HarmonicSolution {
        solution: r.solution,
        residual_sup: r.kkt_residual,
        energy: r.energy,
        error_bound: r.error_bound,
    })
}

/// Sign test `−Δ_p u ≥ −tol` at every interior vertex where `u` is finite.
///
/// Returns false when `u = −∞` somewhere in the domain or `u ≡ +∞` on a component.
pub fn is_superharmonic(u: &ScalarField, domain: &Subdomain, p: Exponent, tol: f64) -> bool {
    if domain.interior().iter().any(|v| u.get(v) == f64::NEG_INFINITY) {
        return false;
    }
    if domain
        .anchored_components()
        .iter()
        .any(|(comp, _)| comp.iter().all(|&v| u.get(v) == f64::INFINITY))
    {
        return false;
    }
    let lap = p_laplacian(u, domain, p);
    domain
        .interior()
        .iter()
        .filter(|&v| u.get(v).is_finite())
        .all(|v| -lap.get(v) >= -tol)
}

/// Result of the sampled comparison `H_{V'} u ≤ u` over subdomains `V' ⋐ Ω`.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessCheck {
    pub holds: bool,
    pub samples: usize,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub max_violation: f64,
}

/// Compares `u` with the `p`-harmonic extension of its own values on `∂V'` for
/// sampled hop balls `V'` compactly inside the domain.
pub fn superharmonic_witness(
    u: &ScalarField,
    domain: &Subdomain,
    p: Exponent,
    tol: f64,
    samples: usize,
    seed: u64,
) -> Result<WitnessCheck> {
    let g = domain.graph();
    let deep: Vec<usize> = domain
        .interior()
        .iter()
        .filter(|&v| g.neighbors(v).iter().all(|&(n, _)| domain.is_interior(n)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    let mut done = 0;
    let mut centers = deep.clone();
    centers.shuffle(&mut rng);
    let deep_mask = VertexSet::from(deep).mask(g.vertex_count());
    for (i, &c) in centers.iter().take(samples).enumerate() {
        let radius = 1 + i % 3;
        let mut ball = vec![c];
        let mut seen = vec![false; g.vertex_count()];
        seen[c] = true;
        let mut frontier = vec![c];
        for _ in 0..radius {
            let mut next = Vec::new();
            for &v in &frontier {
                for &(n, _) in g.neighbors(v) {
                    if !seen[n] && deep_mask[n] {
                        seen[n] = true;
                        next.push(n);
                    }
                }
            }
            ball.extend_from_slice(&next);
            frontier = next;
        }
        let sub = Subdomain::from_interior(domain.graph_arc().clone(), ball.into_iter().collect())?;
        if sub.closure().iter().any(|v| !u.get(v).is_finite()) {
            continue;
        }
        let h = p_harmonic_extension(&sub, u, p, (tol * 1e-2).max(1e-13))?;
        max_violation = max_violation.max(h.solution.max_excess_over(u, sub.interior()));
        done += 1;
    }
    Ok(WitnessCheck {
        holds: max_violation <= tol,
        samples: done,
        max_violation,
    })
}

/// Solves both Dirichlet problems and checks `H f_1 ≤ H f_2 + tol` on the domain.
pub fn check_hf_comparison(
    f1: &ScalarField,
    f2: &ScalarField,
    domain: &Subdomain,
    p: Exponent,
    tol: f64,
) -> Result<Comparison> {
    if domain.boundary().iter().any(|v| f1.get(v) > f2.get(v)) {
        return Err(Error::HypothesisViolated(
            "first boundary data exceeds the second".into(),
        ));
    }
    let solver_tol = (tol * 1e-2).max(1e-13);
    let (h1, h2) = rayon::join(
        || p_harmonic_extension(domain, f1, p, solver_tol),
        || p_harmonic_extension(domain, f2, p, solver_tol),
    );
    let (h1, h2) = (h1?, h2?);
    let max_violation = h1.solution.max_excess_over(&h2.solution, domain.interior());
    Ok(Comparison {
        holds: max_violation <= tol,
        max_violation,
    })
}

/// Extensions of a decreasing sequence of boundary data and of its limit.
pub fn decreasing_hf_sequence(
    data: &[ScalarField],
    limit: &ScalarField,
    domain: &Subdomain,
    p: Exponent,
    tol: f64,
) -> Result<ConvergenceReport> {
    let specs = data
        .iter()
        .map(|f| ObstacleSpec::unconstrained(domain.clone(), f.clone(), p))
        .collect::<Result<Vec<_>>>()?;
    let lim = ObstacleSpec::unconstrained(domain.clone(), limit.clone(), p)?;
    run_convergence_sequence(&specs, &lim, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_graph::{build_grid, Edge, GraphSpace};
    use std::sync::Arc;

    #[test]
    fn linear_is_harmonic_in_one_dimension() {
        let grid = build_grid(1, 5.0, 1.0, |_| true).unwrap();
        let u = ScalarField::from_fn(grid.coords.len(), |v| grid.coords[v][0]);
        for p in [1.5, 2.0, 4.0] {
            let lap = p_laplacian(&u, &grid.domain, Exponent::new(p).unwrap());
            assert!(lap.values().iter().all(|&x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn weighted_path_extension() {
        let g = GraphSpace::new(
            vec![1.0; 3],
            vec![Edge::new(0, 1, 1.0, 1.0), Edge::new(1, 2, 1.0, 2.0)],
        )
        .unwrap();
        let d = Subdomain::from_interior(Arc::new(g), [1].into_iter().collect()).unwrap();
        let f = ScalarField::new(vec![0.0, 0.0, 1.0]).unwrap();
        let h = p_harmonic_extension(&d, &f, Exponent::new(2.0).unwrap(), 1e-12).unwrap();
        assert!((h.solution[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constants_extend_to_constants() {
        let grid = build_grid(2, 2.0, 1.0, |_| true).unwrap();
        let f = ScalarField::constant(grid.coords.len(), 3.5);
        let h = p_harmonic_extension(&grid.domain, &f, Exponent::new(3.0).unwrap(), 1e-10).unwrap();
        assert!(h.solution.values().iter().all(|&x| (x - 3.5).abs() < 1e-12));
    }

    #[test]
    fn strict_local_minimum_is_not_superharmonic() {
        let grid = build_grid(2, 2.0, 1.0, |_| true).unwrap();
        let n = grid.coords.len();
        let centre = (0..n).find(|&v| grid.coords[v] == vec![0.0, 0.0]).unwrap();
        let u = ScalarField::from_fn(n, |v| if v == centre { -1.0 } else { 0.0 });
        assert!(!is_superharmonic(&u, &grid.domain, Exponent::new(2.0).unwrap(), 1e-12));
    }

    #[test]
    fn witness_accepts_superharmonic_and_rejects_dip() {
        let grid = build_grid(2, 4.0, 1.0, |_| true).unwrap();
        let n = grid.coords.len();
        let p = Exponent::new(2.0).unwrap();
        let cone = ScalarField::from_fn(n, |v| {
            -(grid.coords[v][0].powi(2) + grid.coords[v][1].powi(2)).sqrt()
        });
        assert!(is_superharmonic(&cone, &grid.domain, p, 1e-12));
        let w = superharmonic_witness(&cone, &grid.domain, p, 1e-9, 10, 1).unwrap();
        assert!(w.holds && w.samples > 0, "{w:?}");
        let bowl = cone.map(|x| -x);
        let w = superharmonic_witness(&bowl, &grid.domain, p, 1e-9, 10, 1).unwrap();
        assert!(!w.holds);
    }
}
