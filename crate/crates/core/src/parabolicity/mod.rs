//! Relative condenser capacities along exhaustions and parabolicity evidence.

mod generators;

pub use generators::{
    graded_positions, log_polar_family, polar_grid, radial_shell_family, strip_domain_generator,
    InnerEnd, StripResolution,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::CapacityResult;
use crate::error::{Error, Result};
use crate::program::{ConvexProgram, Role, SolverOptions, Term};
use crate::space_graph::{
    p_energy, surface_constant, DomainFamily, Exponent, Level, RadialGeometry, ScalarField,
    VertexSet,
};

/// Condenser capacity of `k` inside a level: least energy of `u` with `u = 1` on `k`,
/// `u = 0` on the outer rim and `0 ≤ u ≤ 1` elsewhere.
///
/// Vertices of the true boundary are left free, so the walls of the domain carry
/// no condition.
pub fn relative_p_capacity(k: &VertexSet, level: &Level, p: Exponent, tol: f64) -> Result<CapacityResult> {
    let g = level.graph();
    let n = g.vertex_count();
    if k.iter().any(|v| v >= n) {
        return Err(Error::Geometry("compact set lies outside the level".into()));
    }
    if k.iter().any(|v| level.outer_rim.contains(v)) {
        return Err(Error::Geometry("compact set meets the outer rim".into()));
    }
    if k.iter().any(|v| !level.domain.is_interior(v)) {
        return Err(Error::Geometry("compact set is not interior to the level".into()));
    }
    if k.is_empty() {
        return Ok(CapacityResult::zero(n));
    }
    let ones = k.mask(n);
    let rim = level.outer_rim.mask(n);
    let free: Vec<bool> = (0..n).map(|v| !ones[v] && !rim[v]).collect();
    let mut roles: Vec<Role> = (0..n)
        .map(|v| {
            if ones[v] {
                Role::Fixed(1.0)
            } else if rim[v] {
                Role::Fixed(0.0)
            } else {
                Role::unbounded()
            }
        })
        .collect();
    for comp in g.components(&free) {
        let anchored = comp
            .iter()
            .any(|&v| g.neighbors(v).iter().any(|&(w, _)| !free[w]));
        if !anchored {
            for v in comp {
                roles[v] = Role::Fixed(0.0);
            }
        }
    }
    let terms = g
        .edges()
        .iter()
        .enumerate()
        .map(|(id, e)| Term {
            a: e.a,
            b: e.b,
            coef: g.conductance(id, p),
        })
        .collect();
    let prog = ConvexProgram {
        p,
        terms,
        mass: Vec::new(),
        roles,
        bracket: Some(vec![(0.0, 1.0); n]),
    };
    let sol = prog.solve(None, SolverOptions::new(tol))?;
    let minimizer = ScalarField::from_fn(n, |v| sol.values[v].clamp(0.0, 1.0));
    let value = prog.objective(minimizer.values());
    Ok(CapacityResult {
        value,
        minimizer,
        certified_gap: sol.objective_gap,
    })
}

/// Condenser capacity of the unit ball inside the ball of radius `r` in `R^n`.
pub fn radial_condenser_capacity(n: usize, p: f64, r: f64) -> f64 {
    let c = surface_constant(n);
    let nf = n as f64;
    if (p - nf).abs() < 1e-12 {
        c * r.ln().powf(1.0 - p)
    } else {
        let e = (p - nf) / (p - 1.0);
        c * e.abs().powf(p - 1.0) * (r.powf(e) - 1.0).abs().powf(1.0 - p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Last capacity must fall below this for parabolic evidence.
    pub absolute: f64,
    /// Last capacity must stay above this for hyperbolic evidence.
    pub floor: f64,
    /// Log-log slope that counts as decay.
    pub slope: f64,
    /// Relative change between the last two levels that counts as Cauchy.
    pub cauchy: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            absolute: 1e-3,
            floor: 1e-2,
            slope: -0.02,
            cauchy: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ParabolicEvidence,
    HyperbolicEvidence,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::ParabolicEvidence => "parabolic-evidence",
            Verdict::HyperbolicEvidence => "hyperbolic-evidence",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelCapacity {
    pub level: usize,
    /// Radius of the rim in the family's coordinate.
    pub radius: f64,
    /// Metric distance from `K` to the rim.
    pub distance: f64,
    pub capacity: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicityReport {
    pub family: String,
    pub p: f64,
    pub levels: Vec<LevelCapacity>,
    pub verdict: Verdict,
    /// Always true: the verdict extrapolates finitely many levels.
    pub heuristic: bool,
    pub thresholds: Thresholds,
    pub slope: f64,
    /// Richardson extrapolation in `1/distance`, clamped at zero.
    pub extrapolated_limit: f64,
    pub oracle_comparison: Option<Vec<f64>>,
}

impl ParabolicityReport {
    pub fn capacities(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.capacity).collect()
    }

    /// Attaches the closed-form condenser capacities of the unit ball for radial families.
    pub fn with_radial_oracle(mut self, n: usize) -> Self {
        self.oracle_comparison = Some(
            self.levels
                .iter()
                .map(|l| radial_condenser_capacity(n, self.p, l.radius))
                .collect(),
        );
        self
    }

    /// Same, for families whose coordinate is `log |x|`.
    pub fn with_log_radial_oracle(mut self, n: usize) -> Self {
        let c = surface_constant(n);
        let p = self.p;
        self.oracle_comparison = Some(
            self.levels
                .iter()
                .map(|l| {
                    if (p - n as f64).abs() < 1e-12 {
                        c * l.radius.powf(1.0 - p)
                    } else {
                        radial_condenser_capacity(n, p, l.radius.exp())
                    }
                })
                .collect(),
        );
        self
    }
}

/// Computes condenser capacities of `k` (given in level-0 ids, default the family's
/// reference set) over the first `levels` levels and labels the trend.
pub fn classify_parabolicity(
    family: &DomainFamily,
    k: Option<&VertexSet>,
    p: Exponent,
    levels: usize,
    thresholds: Thresholds,
    tol: f64,
) -> Result<ParabolicityReport> {
    if levels < 3 {
        return Err(Error::Parameter("classification needs at least three levels".into()));
    }
    let count = levels.min(family.len());
    let base = k.cloned().unwrap_or_else(|| family.level(0).inner.clone());
    let rows = (0..count)
        .into_par_iter()
        .map(|i| {
            let level = family.level(i);
            let map = family.embedding(0, i);
            let ki: VertexSet = base.iter().map(|v| map[v]).collect();
            let cap = relative_p_capacity(&ki, level, p, tol)?;
            let dist = level.graph().distances_from(ki.as_slice());
            let distance = level
                .outer_rim
                .iter()
                .map(|v| dist[v])
                .fold(f64::INFINITY, f64::min);
            Ok(LevelCapacity {
                level: i,
                radius: level.rim_radius,
                distance,
                capacity: cap.value,
                gap: cap.certified_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let a = &rows[count - 2];
    let b = &rows[count - 1];
    let slope = if a.capacity > 0.0 && b.capacity > 0.0 {
        (b.capacity.ln() - a.capacity.ln()) / (b.distance.ln() - a.distance.ln())
    } else {
        f64::NEG_INFINITY
    };
    let extrapolated_limit =
        ((b.distance * b.capacity - a.distance * a.capacity) / (b.distance - a.distance)).max(0.0);
    let verdict = if b.capacity < thresholds.absolute && slope < thresholds.slope {
        Verdict::ParabolicEvidence
    } else if b.capacity > thresholds.floor
        && (b.capacity - a.capacity).abs() <= thresholds.cauchy * b.capacity
    {
        Verdict::HyperbolicEvidence
    } else {
        Verdict::Inconclusive
    };
    Ok(ParabolicityReport {
        family: family.name().to_string(),
        p: p.get(),
        levels: rows,
        verdict,
        heuristic: true,
        thresholds,
        slope,
        extrapolated_limit,
        oracle_comparison: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LogTestFunction {
    pub field: ScalarField,
    pub analytic_energy: f64,
    pub discrete_energy: f64,
    /// `discrete_energy / analytic_energy`.
    pub calibration: f64,
    /// The level does not reach radius `R e^j`; the field is cut at the rim.
    pub truncated: bool,
}

/// Samples `min{1, (1 − log(|x|/R)/j)_+}` on a level whose coordinate is `log |x|`.
pub fn rn_log_testfunction(r: f64, j: f64, level: &Level, p: Exponent, n: usize) -> Result<LogTestFunction> {
    if !(r > 0.0 && j > 0.0) {
        return Err(Error::Parameter("need R > 0 and j > 0".into()));
    }
    let a = r.ln();
    let field = ScalarField::from_fn(level.vertex_count(), |v| log_cutoff(level.log_radius[v], a, j));
    let g = level.graph();
    let all: VertexSet = (0..g.vertex_count()).collect();
    let discrete_energy = p_energy(&field, g, &all, p);
    let analytic_energy = RadialGeometry::Euclidean { n }.log_cutoff_energy(a, j, p.get());
    Ok(LogTestFunction {
        field,
        analytic_energy,
        discrete_energy,
        calibration: discrete_energy / analytic_energy,
        truncated: level.rim_log_radius < a + j,
    })
}

fn log_cutoff(s: f64, start: f64, span: f64) -> f64 {
    (1.0 - (s - start) / span).clamp(0.0, 1.0)
}

/// Calibration of the polar grid with `m` rings per unit of `log r` for log-linear fields at `p = 2`.
pub fn polar_calibration(rings_per_unit: usize) -> f64 {
    let h = 1.0 / rings_per_unit as f64;
    let q = h.exp();
    (q + 1.0) * h / (2.0 * (q - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub start: f64,
    pub span: f64,
    pub analytic_energy: f64,
    pub discrete_energy: f64,
}

/// Cutoffs `u_k = min{1, (1 − (s − k)/J_k)_+}` in a family's radial coordinate with
/// energy below `2^{−kp}`, and the barriers `η_j = Σ_{k≥j} (1 − u_k)`.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessFamily {
    pub p: f64,
    pub witnesses: Vec<Witness>,
    /// Bound on the omitted tail of every barrier sum.
    pub tail_bound: f64,
}

const WITNESS_SAFETY: f64 = 0.5;

impl WitnessFamily {
    pub fn cutoff(&self, k: usize, s: f64) -> f64 {
        let w = &self.witnesses[k - 1];
        log_cutoff(s, w.start, w.span)
    }

    pub fn barrier(&self, j: usize, s: f64) -> f64 {
        self.witnesses
            .iter()
            .skip(j.saturating_sub(1))
            .map(|w| 1.0 - log_cutoff(s, w.start, w.span))
            .sum()
    }

    pub fn barrier_field(&self, j: usize, level: &Level) -> ScalarField {
        ScalarField::from_fn(level.vertex_count(), |v| self.barrier(j, level.log_radius[v]))
    }
}

/// Builds witnesses until the remaining barrier terms are below `1e-15` on the last level.
pub fn parabolicity_witnesses(family: &DomainFamily, p: Exponent) -> Result<WitnessFamily> {
    let geometry = family.geometry().ok_or_else(|| {
        Error::MissingParabolicityWitness(format!("family {} has no radial geometry", family.name()))
    })?;
    let pp = p.get();
    if let RadialGeometry::Euclidean { n } = geometry {
        if pp < n as f64 - 1e-12 {
            return Err(Error::MissingParabolicityWitness(format!(
                "log cutoffs have unbounded energy for p = {pp} < n = {n}"
            )));
        }
    }
    let last = family.last();
    let s_max = last
        .log_radius
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1.0);
    let all: VertexSet = (0..last.vertex_count()).collect();
    let mut witnesses = Vec::new();
    let mut tail_bound = f64::INFINITY;
    for k in 1..=200usize {
        let start = k as f64;
        let target = WITNESS_SAFETY * 2f64.powf(-(k as f64) * pp);
        let energy = |span: f64| geometry.log_cutoff_energy(start, span, pp);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while energy(hi.exp()) > target {
            lo = hi;
            hi *= 2.0;
            if hi > 700.0 {
                return Err(Error::MissingParabolicityWitness(format!(
                    "no cutoff with energy below {target:e} at index {k}"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if energy(mid.exp()) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = hi.exp();
        let field = ScalarField::from_fn(last.vertex_count(), |v| log_cutoff(last.log_radius[v], start, span));
        witnesses.push(Witness {
            index: k,
            start,
            span,
            analytic_energy: energy(span),
            discrete_energy: p_energy(&field, last.graph(), &all, p),
        });
        if start >= s_max {
            tail_bound = 0.0;
            break;
        }
        // remaining terms are at most s_max / J_k each, shrinking at least geometrically
        let tail = s_max / span;
        if tail < 1e-15 {
            tail_bound = 2.0 * tail;
            break;
        }
    }
    Ok(WitnessFamily {
        p: pp,
        witnesses,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_graph::{Edge, GraphSpace, Subdomain};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn path_level(len: usize) -> Level {
        let g = GraphSpace::new(
            vec![1.0; len + 1],
            (0..len).map(|i| Edge::new(i, i + 1, 1.0, 1.0)).collect(),
        )
        .unwrap();
        let rim: VertexSet = [len].into_iter().collect();
        let d = Subdomain::new(Arc::new(g), (0..len).collect(), rim.clone(), true).unwrap();
        Level {
            domain: d,
            outer_rim: rim,
            inner: [0].into_iter().collect(),
            log_radius: (0..=len).map(|i| i as f64).collect(),
            rim_log_radius: len as f64,
            rim_radius: len as f64,
        }
    }

    #[test]
    fn path_capacity_closed_form() {
        let level = path_level(5);
        for p in [1.5, 2.0, 3.0] {
            let k: VertexSet = [0].into_iter().collect();
            let c = relative_p_capacity(&k, &level, Exponent::new(p).unwrap(), 1e-12).unwrap();
            assert!((c.value - 5f64.powf(1.0 - p)).abs() < 1e-9, "p={p}: {}", c.value);
        }
    }

    #[test]
    fn empty_set_and_rim_errors() {
        let level = path_level(3);
        let p = Exponent::new(2.0).unwrap();
        assert_eq!(relative_p_capacity(&VertexSet::new(), &level, p, 1e-9).unwrap().value, 0.0);
        let bad: VertexSet = [3].into_iter().collect();
        assert!(matches!(relative_p_capacity(&bad, &level, p, 1e-9), Err(Error::Geometry(_))));
    }

    #[test]
    fn radial_closed_forms() {
        assert!((radial_condenser_capacity(1, 2.0, 11.0) - 0.2).abs() < 1e-12);
        assert!((radial_condenser_capacity(3, 2.0, 2.0) - 8.0 * PI).abs() < 1e-9);
        assert!((radial_condenser_capacity(2, 3.0, 4.0) - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn cylinder_witness_spans() {
        let fam = log_polar_family(8, &[50.0, 100.0], 0.5, 1.3, InnerEnd::Interior).unwrap();
        let w = parabolicity_witnesses(&fam, Exponent::new(2.0).unwrap()).unwrap();
        assert!((w.witnesses[0].span - 16.0 * PI).abs() < 1e-6);
        for x in &w.witnesses {
            assert!(x.analytic_energy < 2f64.powf(-2.0 * x.index as f64));
        }
        assert_eq!(w.barrier(1, 0.5), 0.0);
        assert!(w.barrier(1, 100.0) > w.barrier(2, 100.0));
    }

    #[test]
    fn hyperbolic_family_has_no_witness() {
        let fam = radial_shell_family(3, 2.0, &[10.0, 100.0], 0.0, 1.2, false, InnerEnd::Interior).unwrap();
        assert!(matches!(
            parabolicity_witnesses(&fam, Exponent::new(2.0).unwrap()),
            Err(Error::MissingParabolicityWitness(_))
        ));
    }
}
