//! Sobolev capacity, the boundary-relative capacity `bar C_p(·; Ω)` and the
//! cutoff construction built from capacity witnesses.
//!
//! A subdomain is treated as a space of its own: masses live on the interior,
//! energy lives on edges with an endpoint in the interior, and values on the
//! boundary are a free trace carrying no mass.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::program::{ConvexProgram, Role, SolverOptions, Term};
use crate::space_graph::{
    edge_slope, DomainFamily, Exponent, GraphSpace, ScalarField, Subdomain, VertexSet,
};

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    #[serde(serialize_with = "crate::report::ext_real")]
    pub value: f64,
    /// Admissible function attaining `value`, clipped to `[0, 1]`.
    pub minimizer: ScalarField,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub certified_gap: f64,
}

impl CapacityResult {
    pub(crate) fn zero(n: usize) -> Self {
        CapacityResult {
            value: 0.0,
            minimizer: ScalarField::zeros(n),
            certified_gap: 0.0,
        }
    }

    /// Lower end of the certified interval.
    pub fn lower_bound(&self) -> f64 {
        (self.value - self.certified_gap).max(0.0)
    }
}

/// Ambient set of a capacity: the whole graph or a subdomain seen as a space.
#[derive(Debug, Clone, Copy)]
pub enum CapacitySpace<'a> {
    Whole(&'a GraphSpace),
    Sub(&'a Subdomain),
}

impl<'a> CapacitySpace<'a> {
    fn graph(&self) -> &'a GraphSpace {
        match self {
            CapacitySpace::Whole(g) => g,
            CapacitySpace::Sub(d) => d.graph(),
        }
    }

    fn has_mass(&self, v: usize) -> bool {
        match self {
            CapacitySpace::Whole(_) => true,
            CapacitySpace::Sub(d) => d.is_interior(v),
        }
    }

    fn counts_edge(&self, a: usize, b: usize) -> bool {
        match self {
            CapacitySpace::Whole(_) => true,
            CapacitySpace::Sub(d) => d.is_interior(a) || d.is_interior(b),
        }
    }

    fn in_scope(&self) -> Vec<bool> {
        let g = self.graph();
        let mut scope = vec![false; g.vertex_count()];
        for (v, s) in scope.iter_mut().enumerate() {
            *s = self.has_mass(v);
        }
        for e in g.edges() {
            if self.counts_edge(e.a, e.b) {
                scope[e.a] = true;
                scope[e.b] = true;
            }
        }
        scope
    }
}

/// `‖u‖^p = Σ μ |u|^p + Σ w g_u^p` over the space.
pub fn norm_power(u: &ScalarField, space: CapacitySpace<'_>, p: Exponent) -> f64 {
    let g = space.graph();
    let pp = p.get();
    let mass: f64 = (0..g.vertex_count())
        .filter(|&v| space.has_mass(v))
        .map(|v| g.measure(v) * u.get(v).abs().powf(pp))
        .sum();
    let energy: f64 = g
        .edges()
        .iter()
        .filter(|e| space.counts_edge(e.a, e.b))
        .map(|e| {
            let s = edge_slope(u.get(e.a), u.get(e.b), e.length);
            if s == 0.0 {
                0.0
            } else {
                e.weight * s.powf(pp)
            }
        })
        .sum();
    mass + energy
}

/// Minimizes the norm power over functions `≥ 1` on `ones` and `≥ floor_value` on `floor`.
fn solve_capacity(
    space: CapacitySpace<'_>,
    ones: &VertexSet,
    floor: &VertexSet,
    floor_value: f64,
    p: Exponent,
    tol: f64,
) -> Result<CapacityResult> {
    let g = space.graph();
    let n = g.vertex_count();
    let scope = space.in_scope();
    let ones_mask = ones.mask(n);
    let floor_mask = floor.mask(n);
    if ones.iter().all(|v| !scope[v]) && (floor.is_empty() || floor_value <= 0.0) {
        return Ok(CapacityResult {
            minimizer: ScalarField::from_fn(n, |v| if ones_mask[v] { 1.0 } else { 0.0 }),
            ..CapacityResult::zero(n)
        });
    }
    let roles: Vec<Role> = (0..n)
        .map(|v| {
            if !scope[v] {
                Role::Inactive
            } else if ones_mask[v] {
                Role::Fixed(1.0)
            } else if floor_mask[v] {
                Role::Free {
                    lower: floor_value,
                    upper: f64::INFINITY,
                }
            } else {
                Role::unbounded()
            }
        })
        .collect();
    let terms = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| space.counts_edge(e.a, e.b))
        .map(|(id, e)| Term {
            a: e.a,
            b: e.b,
            coef: g.conductance(id, p),
        })
        .collect();
    let mass = (0..n)
        .map(|v| if space.has_mass(v) { g.measure(v) } else { 0.0 })
        .collect();
    let prog = ConvexProgram {
        p,
        terms,
        mass,
        roles,
        bracket: Some(vec![(0.0, 1.0); n]),
    };
    let sol = prog.solve(None, SolverOptions::new(tol))?;
    // vertices outside the space cost nothing, so the set indicator is kept there
    let minimizer = ScalarField::from_fn(n, |v| match (scope[v], ones_mask[v]) {
        (true, _) => sol.values[v].clamp(0.0, 1.0),
        (false, true) => 1.0,
        (false, false) => 0.0,
    });
    let value = norm_power(&minimizer, space, p);
    Ok(CapacityResult {
        value,
        minimizer,
        certified_gap: sol.objective_gap,
    })
}

/// `C_p(E; A)`: least `‖u‖^p` over `u ≥ 1` on `E`.
pub fn sobolev_capacity(
    set: &VertexSet,
    space: CapacitySpace<'_>,
    p: Exponent,
    tol: f64,
) -> Result<CapacityResult> {
    if let CapacitySpace::Sub(d) = space {
        if let Some(v) = set.iter().find(|&v| !d.is_interior(v)) {
            return Err(Error::Parameter(format!(
                "vertex {v} of the set is not in the domain"
            )));
        }
    }
    solve_capacity(space, set, &VertexSet::new(), 0.0, p, tol)
}

/// `bar C_p(E; Ω)` for a set in the closure of a bounded domain.
///
/// Boundary points of `E` constrain the trace of `u` on the boundary.
pub fn bar_capacity(set: &VertexSet, domain: &Subdomain, p: Exponent, tol: f64) -> Result<CapacityResult> {
    let closure = domain.closure();
    if let Some(v) = set.iter().find(|&v| !closure.contains(v)) {
        return Err(Error::Parameter(format!(
            "vertex {v} of the set is outside the closure of the domain"
        )));
    }
    solve_capacity(CapacitySpace::Sub(domain), set, &VertexSet::new(), 0.0, p, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyCapacity {
    /// `(level, value, certified gap)`.
    pub levels: Vec<(usize, f64, f64)>,
    pub limit_estimate: f64,
    /// Difference of the last two level values.
    pub cauchy_gap: f64,
    /// First level at which the rim constraint is imposed.
    pub threshold_level: usize,
    pub minimizers: Vec<ScalarField>,
}

/// `bar C_p` along an exhaustion, optionally including the point at infinity.
///
/// `set` is given in level-0 vertex ids. With `at_infinity`, the rim of every level
/// is constrained by `u ≥ 1 − tol`.
pub fn bar_capacity_family(
    set: &VertexSet,
    at_infinity: bool,
    family: &DomainFamily,
    p: Exponent,
    tol: f64,
) -> Result<FamilyCapacity> {
    let results: Vec<Result<CapacityResult>> = (0..family.len())
        .into_par_iter()
        .map(|k| {
            let level = family.level(k);
            let map = family.embedding(0, k);
            let mapped: VertexSet = set.iter().map(|v| map[v]).collect();
            let rim = if at_infinity {
                level.outer_rim.clone()
            } else {
                VertexSet::new()
            };
            let closure = level.domain.closure();
            if let Some(v) = mapped.iter().find(|&v| !closure.contains(v)) {
                return Err(Error::Parameter(format!(
                    "vertex {v} of the set is outside level {k}"
                )));
            }
            solve_capacity(CapacitySpace::Sub(&level.domain), &mapped, &rim, 1.0 - tol, p, tol)
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let levels: Vec<(usize, f64, f64)> = results
        .iter()
        .enumerate()
        .map(|(k, r)| (k, r.value, r.certified_gap))
        .collect();
    let last = levels.last().map_or(0.0, |l| l.1);
    let cauchy_gap = if levels.len() >= 2 {
        (last - levels[levels.len() - 2].1).abs()
    } else {
        0.0
    };
    Ok(FamilyCapacity {
        levels,
        limit_estimate: last,
        cauchy_gap,
        threshold_level: 0,
        minimizers: results.into_iter().map(|r| r.minimizer).collect(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CapacityInequality {
    pub holds: bool,
    pub bar: f64,
    pub sobolev: f64,
}

/// Checks `bar C_p(E; Ω) ≤ C_p(E)` with the capacity on the right taken in the whole graph.
pub fn check_capacity_inequality(
    set: &VertexSet,
    domain: &Subdomain,
    p: Exponent,
    tol: f64,
) -> Result<CapacityInequality> {
    let (bar, whole) = rayon::join(
        || bar_capacity(set, domain, p, tol),
        || sobolev_capacity(set, CapacitySpace::Whole(domain.graph()), p, tol),
    );
    let (bar, whole) = (bar?, whole?);
    Ok(CapacityInequality {
        holds: bar.value <= whole.value + bar.certified_gap + whole.certified_gap + 2.0 * tol,
        bar: bar.value,
        sobolev: whole.value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffSequence {
    /// `ψ_j = Σ_{k>j} u_k` for `j = 0..=K`.
    pub psi: Vec<ScalarField>,
    /// `‖ψ_j‖`, bounded by `2^{-j}`.
    pub norms: Vec<f64>,
}

/// Sums capacity witnesses of decreasing sets `U_1 ⊇ U_2 ⊇ …` into cutoff functions.
///
/// `sets[k − 1]` is `U_k` and `witnesses[k − 1]` its capacity result, whose norm
/// power must be below `2^{−kp}`.
pub fn cutoff_sequence(
    sets: &[VertexSet],
    witnesses: &[Option<CapacityResult>],
    domain: &Subdomain,
    p: Exponent,
) -> Result<CutoffSequence> {
    if sets.len() != witnesses.len() {
        return Err(Error::Parameter("one witness per set is required".into()));
    }
    for w in sets.windows(2) {
        if !w[1].is_subset(&w[0]) {
            return Err(Error::Parameter("sets must be decreasing".into()));
        }
    }
    let n = domain.graph().vertex_count();
    let space = CapacitySpace::Sub(domain);
    let closure = domain.closure();
    let mut fields = Vec::with_capacity(sets.len());
    for (i, (set, w)) in sets.iter().zip(witnesses).enumerate() {
        let k = i + 1;
        let u = match w {
            Some(w) => &w.minimizer,
            None if set.is_empty() => {
                fields.push(ScalarField::zeros(n));
                continue;
            }
            None => {
                return Err(Error::CertificateMissing(format!("no witness for level {k}")));
            }
        };
        let bound = 2f64.powf(-(k as f64) * p.get());
        let np = norm_power(u, space, p);
        if !(np < bound) {
            return Err(Error::CertificateMissing(format!(
                "witness {k} has norm power {np:.3e}, not below {bound:.3e}"
            )));
        }
        if set.iter().filter(|&v| closure.contains(v)).any(|v| u.get(v) < 1.0) {
            return Err(Error::CertificateMissing(format!(
                "witness {k} is below 1 on its set"
            )));
        }
        if u.values().iter().any(|&x| x < 0.0) {
            return Err(Error::CertificateMissing(format!("witness {k} is negative")));
        }
        fields.push(u.clone());
    }
    let big_k = fields.len();
    let mut psi = vec![ScalarField::zeros(n); big_k + 1];
    for j in (0..big_k).rev() {
        psi[j] = psi[j + 1].zip_with(&fields[j], |a, b| a + b);
    }
    let norms = psi.iter().map(|f| norm_power(f, space, p).powf(1.0 / p.get())).collect();
    Ok(CutoffSequence { psi, norms })
}
