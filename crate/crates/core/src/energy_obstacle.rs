//! The obstacle problem: minimize the `p`-energy over functions above an obstacle
//! on the domain with prescribed boundary values.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::program::{ConvexProgram, Role, SolverOptions, Term};
use crate::space_graph::{p_energy, Exponent, ScalarField, Subdomain, VertexSet};

#[derive(Debug, Clone)]
pub struct ObstacleSpec {
    pub domain: Subdomain,
    /// Obstacle `ψ`; only its values on the interior matter, `-∞` means no constraint.
    pub obstacle: ScalarField,
    /// Boundary data `f`, finite on the closure of the domain.
    pub boundary_data: ScalarField,
    pub p: Exponent,
}

impl ObstacleSpec {
    pub fn new(
        domain: Subdomain,
        obstacle: ScalarField,
        boundary_data: ScalarField,
        p: Exponent,
    ) -> Result<Self> {
        let n = domain.graph().vertex_count();
        if obstacle.len() != n || boundary_data.len() != n {
            return Err(Error::Parameter(format!(
                "fields must have one value per vertex ({n})"
            )));
        }
        if let Some(v) = domain
            .closure()
            .iter()
            .find(|&v| !boundary_data.get(v).is_finite())
        {
            return Err(Error::Parameter(format!(
                "boundary data is not finite at vertex {v}"
            )));
        }
        Ok(ObstacleSpec {
            domain,
            obstacle,
            boundary_data,
            p,
        })
    }

    /// Spec without obstacle.
    pub fn unconstrained(domain: Subdomain, boundary_data: ScalarField, p: Exponent) -> Result<Self> {
        let n = domain.graph().vertex_count();
        Self::new(
            domain,
            ScalarField::constant(n, f64::NEG_INFINITY),
            boundary_data,
            p,
        )
    }

    fn program(&self) -> ConvexProgram {
        let g = self.domain.graph();
        let n = g.vertex_count();
        let mut roles = vec![Role::Inactive; n];
        for v in self.domain.boundary().iter() {
            roles[v] = Role::Fixed(self.boundary_data.get(v));
        }
        for v in self.domain.interior().iter() {
            roles[v] = Role::Free {
                lower: self.obstacle.get(v),
                upper: f64::INFINITY,
            };
        }
        let terms = g
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| self.domain.is_interior(e.a) || self.domain.is_interior(e.b))
            .map(|(id, e)| Term {
                a: e.a,
                b: e.b,
                coef: g.conductance(id, self.p),
            })
            .collect();

        let data_min = self
            .domain
            .boundary()
            .iter()
            .map(|v| self.boundary_data.get(v))
            .fold(f64::INFINITY, f64::min);
        let data_max = self
            .domain
            .boundary()
            .iter()
            .map(|v| self.boundary_data.get(v))
            .fold(f64::NEG_INFINITY, f64::max);
        let psi_max = self
            .domain
            .interior()
            .iter()
            .map(|v| self.obstacle.get(v))
            .fold(f64::NEG_INFINITY, f64::max);
        let top = data_max.max(psi_max);
        let bracket = (0..n)
            .map(|v| (self.obstacle.get(v).max(data_min), top))
            .collect();
        ConvexProgram {
            p: self.p,
            terms,
            mass: Vec::new(),
            roles,
            bracket: Some(bracket),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub solution: ScalarField,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub energy: f64,
    /// `max |min{−Δ_p u, u − ψ}|` over interior vertices.
    pub kkt_residual: f64,
    /// `kkt_residual` divided by the largest local flux magnitude (at least one).
    pub relative_residual: f64,
    /// Estimated Euclidean distance to the exact minimizer.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub error_bound: f64,
    /// Certified upper bound on `energy − min energy`.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub energy_gap: f64,
    pub iterations: usize,
    pub active_set: VertexSet,
}

/// Whether some admissible function exists: the obstacle must be below `+∞` on the interior.
///
/// Boundary values of the obstacle play no role.
pub fn feasibility(spec: &ObstacleSpec) -> bool {
    spec.domain
        .interior()
        .iter()
        .all(|v| spec.obstacle.get(v) < f64::INFINITY)
}

pub fn solve_obstacle(spec: &ObstacleSpec, tol: f64) -> Result<SolveReport> {
    solve_obstacle_from(spec, tol, None)
}

/// As [`solve_obstacle`], starting the iteration from `init`.
pub fn solve_obstacle_from(
    spec: &ObstacleSpec,
    tol: f64,
    init: Option<&ScalarField>,
) -> Result<SolveReport> {
    if let Some(v) = spec
        .domain
        .interior()
        .iter()
        .find(|&v| spec.obstacle.get(v) == f64::INFINITY)
    {
        return Err(Error::Infeasible(format!("obstacle is +∞ at interior vertex {v}")));
    }
    let prog = spec.program();
    let sol = prog.solve(init.map(|f| f.values()), SolverOptions::new(tol))?;
    let n = spec.domain.graph().vertex_count();
    let solution = ScalarField::from_fn(n, |v| {
        if spec.domain.is_interior(v) || spec.domain.is_boundary(v) {
            sol.values[v]
        } else {
            spec.boundary_data.get(v)
        }
    });
    let active_set = spec
        .domain
        .interior()
        .iter()
        .filter(|&v| solution.get(v) - spec.obstacle.get(v) <= tol)
        .collect();
    Ok(SolveReport {
        energy: p_energy(&solution, spec.domain.graph(), spec.domain.interior(), spec.p),
        solution,
        kkt_residual: sol.residual,
        relative_residual: sol.relative_residual(),
        error_bound: sol.error_bound,
        energy_gap: sol.objective_gap,
        iterations: sol.iterations,
        active_set,
    })
}

/// Lower semicontinuous regularization; the identity on graphs, since every vertex is an atom.
pub fn lsc_regularize(u: &ScalarField) -> ScalarField {
    u.clone()
}

/// Outcome of a pointwise comparison `u_1 ≤ u_2 + tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub holds: bool,
    /// `max (u_1 − u_2)` over the compared set; negative when strictly ordered.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub max_violation: f64,
}

impl Comparison {
    pub(crate) fn of(u1: &ScalarField, u2: &ScalarField, set: &VertexSet, tol: f64) -> Self {
        let max_violation = u1.max_excess_over(u2, set);
        Comparison {
            holds: max_violation <= tol,
            max_violation,
        }
    }
}

/// Solves both problems and compares solutions on the interior.
pub fn check_obstacle_comparison(
    spec1: &ObstacleSpec,
    spec2: &ObstacleSpec,
    tol: f64,
) -> Result<Comparison> {
    same_setting(spec1, spec2)?;
    let omega = spec1.domain.interior();
    if omega
        .iter()
        .any(|v| spec1.obstacle.get(v) > spec2.obstacle.get(v))
    {
        return Err(Error::HypothesisViolated(
            "first obstacle exceeds the second somewhere in the domain".into(),
        ));
    }
    if spec1
        .domain
        .boundary()
        .iter()
        .any(|v| spec1.boundary_data.get(v) > spec2.boundary_data.get(v))
    {
        return Err(Error::HypothesisViolated(
            "first boundary data exceeds the second on the boundary".into(),
        ));
    }
    let solver_tol = (tol * 1e-2).max(1e-13);
    let (r1, r2) = rayon::join(
        || solve_obstacle(spec1, solver_tol),
        || solve_obstacle(spec2, solver_tol),
    );
    Ok(Comparison::of(&r1?.solution, &r2?.solution, omega, tol))
}

fn same_setting(a: &ObstacleSpec, b: &ObstacleSpec) -> Result<()> {
    if a.p != b.p {
        return Err(Error::HypothesisViolated("exponents differ".into()));
    }
    if a.domain.interior() != b.domain.interior()
        || a.domain.boundary() != b.domain.boundary()
        || a.domain.graph() != b.domain.graph()
    {
        return Err(Error::HypothesisViolated("domains differ".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub solutions: Vec<ScalarField>,
    pub limit: ScalarField,
    /// `sup_Ω |u_j − u|` per index.
    #[serde(serialize_with = "crate::report::ext_reals")]
    pub gaps: Vec<f64>,
    /// Largest `u_{j+1} − u_j` over the domain and all indices.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub max_increase: f64,
    pub monotone: bool,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub final_gap: f64,
    /// Energies of `ψ_j − ψ` and `f_j − f` per index.
    #[serde(skip)]
    pub data_energies: Vec<(f64, f64)>,
}

/// Solves a decreasing sequence of obstacle problems and its limit problem.
pub fn run_convergence_sequence(
    specs: &[ObstacleSpec],
    limit: &ObstacleSpec,
    tol: f64,
) -> Result<ConvergenceReport> {
    for s in specs {
        same_setting(s, limit)?;
    }
    let closure = limit.domain.closure();
    let omega = limit.domain.interior();
    let chain: Vec<&ObstacleSpec> = specs.iter().chain(std::iter::once(limit)).collect();
    for (j, w) in chain.windows(2).enumerate() {
        if omega.iter().any(|v| w[1].obstacle.get(v) > w[0].obstacle.get(v)) {
            return Err(Error::HypothesisViolated(format!(
                "obstacles increase after index {j}"
            )));
        }
        if closure
            .iter()
            .any(|v| w[1].boundary_data.get(v) > w[0].boundary_data.get(v))
        {
            return Err(Error::HypothesisViolated(format!(
                "boundary data increase after index {j}"
            )));
        }
    }
    let graph = limit.domain.graph();
    let data_energies = specs
        .iter()
        .map(|s| {
            let dpsi = s.obstacle.zip_with(&limit.obstacle, |a, b| {
                if a == b {
                    0.0
                } else {
                    a - b
                }
            });
            let df = s.boundary_data.zip_with(&limit.boundary_data, |a, b| a - b);
            (
                p_energy(&dpsi, graph, omega, limit.p),
                p_energy(&df, graph, omega, limit.p),
            )
        })
        .collect();

    let solver_tol = (tol * 1e-2).max(1e-13);
    let solved: Vec<Result<SolveReport>> = chain
        .par_iter()
        .map(|s| solve_obstacle(s, solver_tol))
        .collect();
    let mut fields = solved
        .into_iter()
        .map(|r| r.map(|s| s.solution))
        .collect::<Result<Vec<_>>>()?;
    let limit_field = fields.pop().expect("limit solved");

    let gaps: Vec<f64> = fields
        .iter()
        .map(|u| u.sup_distance(&limit_field, omega))
        .collect();
    let max_increase = fields
        .windows(2)
        .map(|w| w[1].max_excess_over(&w[0], omega))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConvergenceReport {
        final_gap: gaps.last().copied().unwrap_or(0.0),
        monotone: max_increase <= tol,
        max_increase,
        gaps,
        solutions: fields,
        limit: limit_field,
        data_energies,
    })
}
