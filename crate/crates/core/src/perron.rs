//! Perron solutions on exhaustions of unbounded domains.
//!
//! Upper Perron solutions are approximated from above by obstacle solutions
//! `φ_j` whose obstacle and boundary values are `Hf + ψ_j + η_j`, where `Hf` is the
//! free-rim harmonic extension and `η_j` sums complements of parabolicity
//! cutoffs. Lower solutions are `−` the upper solution of `−f`. Families without
//! witnesses fall back to imposing the declared value at infinity on the rim.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::energy_obstacle::{solve_obstacle, Comparison, ObstacleSpec};
use crate::error::{Error, Result};
use crate::harmonic::{is_superharmonic, p_harmonic_extension, p_laplacian};
use crate::parabolicity::{parabolicity_witnesses, WitnessFamily};
use crate::space_graph::{DomainFamily, Exponent, Level, ScalarField, Subdomain, VertexSet};

/// Boundary data on every level together with the declared value at `∞`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryData {
    levels: Vec<ScalarField>,
    #[serde(serialize_with = "crate::report::ext_real")]
    at_infinity: f64,
}

impl BoundaryData {
    pub fn new(family: &DomainFamily, levels: Vec<ScalarField>, at_infinity: f64) -> Result<Self> {
        if levels.len() != family.len() {
            return Err(Error::Parameter("one field per level is required".into()));
        }
        for (k, (f, level)) in levels.iter().zip(family.levels()).enumerate() {
            if f.len() != level.vertex_count() {
                return Err(Error::Parameter(format!("field {k} has the wrong length")));
            }
            if let Some(v) = level.true_boundary().iter().find(|&v| !f.get(v).is_finite()) {
                return Err(Error::Parameter(format!(
                    "boundary data is not finite at vertex {v} of level {k}"
                )));
            }
        }
        if at_infinity.is_nan() {
            return Err(Error::Parameter("value at infinity is NaN".into()));
        }
        Ok(BoundaryData { levels, at_infinity })
    }

    /// Samples `f(level, vertex)` on every level.
    pub fn from_fn(
        family: &DomainFamily,
        f: impl Fn(&Level, usize) -> f64,
        at_infinity: f64,
    ) -> Result<Self> {
        let levels = family
            .levels()
            .iter()
            .map(|l| ScalarField::new((0..l.vertex_count()).map(|v| f(l, v)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(family, levels, at_infinity)
    }

    pub fn level(&self, k: usize) -> &ScalarField {
        &self.levels[k]
    }

    pub fn at_infinity(&self) -> f64 {
        self.at_infinity
    }

    pub fn with_infinity(&self, at_infinity: f64) -> Self {
        BoundaryData {
            levels: self.levels.clone(),
            at_infinity,
        }
    }

    pub fn negated(&self) -> Self {
        BoundaryData {
            levels: self.levels.iter().map(|f| f.map(|x| -x)).collect(),
            at_infinity: -self.at_infinity,
        }
    }

    fn map(&self, g: impl Fn(usize, usize, f64) -> f64) -> Self {
        BoundaryData {
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(k, f)| ScalarField::from_fn(f.len(), |v| g(k, v, f.get(v))))
                .collect(),
            at_infinity: self.at_infinity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerronMethod {
    /// Barrier when witnesses exist, rim Dirichlet otherwise.
    Auto,
    Barrier,
    RimDirichlet,
}

/// Extra obstacle term `ψ_j` for index `j` on a level.
pub type PsiHook = Arc<dyn Fn(usize, &Level) -> ScalarField + Send + Sync>;

#[derive(Clone)]
pub struct PerronControls {
    pub max_index: usize,
    pub tol: f64,
    pub core_tol: f64,
    pub method: PerronMethod,
    pub psi: Option<PsiHook>,
}

impl Default for PerronControls {
    fn default() -> Self {
        PerronControls {
            max_index: 8,
            tol: 1e-6,
            core_tol: 1e-4,
            method: PerronMethod::Auto,
            psi: None,
        }
    }
}

impl fmt::Debug for PerronControls {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerronControls")
            .field("max_index", &self.max_index)
            .field("tol", &self.tol)
            .field("core_tol", &self.core_tol)
            .field("method", &self.method)
            .field("psi", &self.psi.is_some())
            .finish()
    }
}

/// One member of an approximating sequence.
#[derive(Debug, Clone, Serialize)]
pub struct IndexRow {
    pub j: usize,
    pub level: usize,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub min_rim: f64,
    /// Sup over the interior of the change from the previous index.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub step: f64,
    pub superharmonic: bool,
    /// Least margin of the member over the data on the true boundary.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub boundary_margin: f64,
}

/// Upper Perron approximation; lower halves are stored already negated.
#[derive(Debug, Clone, Serialize)]
pub struct PerronHalf {
    pub method: PerronMethod,
    /// Members on the last level, by index.
    pub sequence: Vec<ScalarField>,
    pub limit: ScalarField,
    /// Final member on the previous level, in that level's ids.
    pub previous_level: ScalarField,
    pub rows: Vec<IndexRow>,
    /// Largest increase between consecutive members (decrease for lower halves).
    pub max_increase: f64,
    /// Minimum of the barrier on the rim of the last level, per index.
    pub barrier_rim_min: Vec<f64>,
}

impl PerronHalf {
    fn negated(mut self) -> Self {
        let neg = |f: &ScalarField| f.map(|x| -x);
        self.sequence = self.sequence.iter().map(neg).collect();
        self.limit = neg(&self.limit);
        self.previous_level = neg(&self.previous_level);
        for r in &mut self.rows {
            r.min_rim = -r.min_rim;
        }
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub j: usize,
    pub level: usize,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub upper_min_rim: f64,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub gap_sup: f64,
    pub core_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerronReport {
    pub family: String,
    pub p: f64,
    pub method: PerronMethod,
    pub upper: PerronHalf,
    pub lower: PerronHalf,
    /// Interior vertices of the last level where both halves are stable.
    pub core: VertexSet,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub gap_sup: f64,
    pub resolutive: bool,
    /// Free-rim harmonic extension on the last level.
    pub hf_reference: ScalarField,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub hf_gap: f64,
    /// Change of the free-rim extension between the last two levels on the core.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub hf_level_change: f64,
    pub rows: Vec<ConvergenceRow>,
    pub tol: f64,
    pub core_tol: f64,
    pub witnesses: Option<WitnessFamily>,
}

impl PerronReport {
    pub fn upper_limit(&self) -> &ScalarField {
        &self.upper.limit
    }

    pub fn lower_limit(&self) -> &ScalarField {
        &self.lower.limit
    }
}

fn free_rim_domain(level: &Level) -> Result<Subdomain> {
    let tb = level.true_boundary();
    if tb.is_empty() {
        return Err(Error::Parameter(
            "harmonic extension needs a nonempty true boundary".into(),
        ));
    }
    Subdomain::new(
        level.graph_arc().clone(),
        level.domain.interior().union(&level.outer_rim),
        tb,
        level.domain.has_infinity(),
    )
}

/// Harmonic extension of the data on the true boundary with free values on the rim.
pub fn free_rim_extension(level: &Level, f: &ScalarField, p: Exponent, tol: f64) -> Result<ScalarField> {
    let d = free_rim_domain(level)?;
    Ok(p_harmonic_extension(&d, f, p, tol)?.solution)
}

fn sup_diff(a: &ScalarField, b: &ScalarField, set: &VertexSet) -> f64 {
    set.iter()
        .map(|v| (a.get(v) - b.get(v)).abs())
        .fold(0.0, f64::max)
}

fn resolve_method(family: &DomainFamily, p: Exponent, method: PerronMethod) -> Result<(PerronMethod, Option<WitnessFamily>)> {
    match method {
        PerronMethod::RimDirichlet => Ok((PerronMethod::RimDirichlet, None)),
        PerronMethod::Barrier if !family.has_infinity() => Ok((PerronMethod::Barrier, None)),
        PerronMethod::Barrier => Ok((PerronMethod::Barrier, Some(parabolicity_witnesses(family, p)?))),
        PerronMethod::Auto if !family.has_infinity() => Ok((PerronMethod::Barrier, None)),
        PerronMethod::Auto => match parabolicity_witnesses(family, p) {
            Ok(w) => Ok((PerronMethod::Barrier, Some(w))),
            Err(Error::MissingParabolicityWitness(_)) => Ok((PerronMethod::RimDirichlet, None)),
            Err(e) => Err(e),
        },
    }
}

/// Sign-test tolerance; below `p = 2` a solution error `δ` moves `Δ_p` by about `δ^{p−1}`.
fn superharmonic_tol(tol: f64, p: Exponent) -> f64 {
    (1e2 * tol).max(1e-8).powf((p.get() - 1.0).min(1.0))
}

fn boundary_margin(u: &ScalarField, f: &ScalarField, level: &Level) -> f64 {
    level
        .true_boundary()
        .iter()
        .map(|v| u.get(v) - f.get(v))
        .fold(f64::INFINITY, f64::min)
}

fn rim_min(u: &ScalarField, level: &Level) -> f64 {
    level
        .outer_rim
        .iter()
        .map(|v| u.get(v))
        .fold(f64::INFINITY, f64::min)
}

fn barrier_member(
    level_index: usize,
    level: &Level,
    hf: &ScalarField,
    f: &ScalarField,
    j: usize,
    witnesses: Option<&WitnessFamily>,
    p: Exponent,
    controls: &PerronControls,
) -> Result<(ScalarField, f64)> {
    let n = level.vertex_count();
    let eta = match witnesses {
        Some(w) => w.barrier_field(j, level),
        None => ScalarField::zeros(n),
    };
    let mut h = hf.zip_with(&eta, |a, b| a + b);
    if let Some(psi) = &controls.psi {
        let extra = psi(j, level);
        h = h.zip_with(&extra, |a, b| a + b);
    }
    // the true boundary keeps the data itself
    for v in level.true_boundary().iter() {
        h.set(v, f.get(v) + eta.get(v));
    }
    let spec = ObstacleSpec::new(level.domain.clone(), h.clone(), h, p)?;
    let sol = solve_obstacle(&spec, controls.tol)
        .map_err(|e| annotate(e, format!("index {j}, level {level_index}")))?;
    Ok((sol.solution, rim_min(&eta, level)))
}

fn annotate(e: Error, at: String) -> Error {
    match e {
        Error::NotConverged(m) => Error::NotConverged(format!("{m} ({at})")),
        other => other,
    }
}

fn upper_half(
    family: &DomainFamily,
    f: &BoundaryData,
    p: Exponent,
    controls: &PerronControls,
    method: PerronMethod,
    witnesses: Option<&WitnessFamily>,
    hf: &[ScalarField],
) -> Result<PerronHalf> {
    let last = family.len() - 1;
    let prev = last.saturating_sub(1);
    let sh_tol = superharmonic_tol(controls.tol, p);
    match method {
        PerronMethod::Barrier | PerronMethod::Auto => {
            let jmax = controls.max_index.max(1);
            let mut jobs: Vec<(usize, usize)> = (1..=jmax).map(|j| (j, last)).collect();
            if last > 0 {
                jobs.push((jmax, prev));
            }
            let solved = jobs
                .par_iter()
                .map(|&(j, k)| {
                    let level = family.level(k);
                    let slot = if k == last { hf.len() - 1 } else { hf.len() - 2 };
                    barrier_member(k, level, &hf[slot], f.level(k), j, witnesses, p, controls)
                })
                .collect::<Result<Vec<_>>>()?;
            let level = family.last();
            let mut sequence = Vec::with_capacity(jmax);
            let mut barrier_rim_min = Vec::with_capacity(jmax);
            let mut rows = Vec::new();
            let mut max_increase: f64 = 0.0;
            for (idx, (u, eta_rim)) in solved.iter().take(jmax).enumerate() {
                let j = idx + 1;
                let step = if idx == 0 {
                    f64::INFINITY
                } else {
                    sup_diff(u, &sequence[idx - 1], level.domain.interior())
                };
                if idx > 0 {
                    let prev_u: &ScalarField = &sequence[idx - 1];
                    max_increase = max_increase.max(u.max_excess_over(prev_u, level.domain.interior()));
                }
                rows.push(IndexRow {
                    j,
                    level: last,
                    min_rim: rim_min(u, level),
                    step,
                    superharmonic: is_superharmonic(u, &level.domain, p, sh_tol),
                    boundary_margin: boundary_margin(u, f.level(last), level),
                });
                barrier_rim_min.push(*eta_rim);
                sequence.push(u.clone());
            }
            let previous_level = if last > 0 {
                let (u, _) = &solved[jmax];
                let pl = family.level(prev);
                rows.push(IndexRow {
                    j: jmax,
                    level: prev,
                    min_rim: rim_min(u, pl),
                    step: f64::NAN,
                    superharmonic: is_superharmonic(u, &pl.domain, p, sh_tol),
                    boundary_margin: boundary_margin(u, f.level(prev), pl),
                });
                u.clone()
            } else {
                sequence[jmax - 1].clone()
            };
            Ok(PerronHalf {
                method: PerronMethod::Barrier,
                limit: sequence[jmax - 1].clone(),
                sequence,
                previous_level,
                rows,
                max_increase,
                barrier_rim_min,
            })
        }
        PerronMethod::RimDirichlet => {
            let at_inf = f.at_infinity();
            if !at_inf.is_finite() {
                return Err(Error::Parameter(
                    "rim Dirichlet method needs a finite value at infinity".into(),
                ));
            }
            let solved = family
                .levels()
                .par_iter()
                .enumerate()
                .map(|(k, level)| {
                    let mut g = f.level(k).clone();
                    for v in level.outer_rim.iter() {
                        g.set(v, at_inf);
                    }
                    p_harmonic_extension(&level.domain, &g, p, controls.tol)
                        .map(|h| h.solution)
                        .map_err(|e| annotate(e, format!("level {k}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            let mut max_increase: f64 = 0.0;
            for (k, u) in solved.iter().enumerate() {
                let level = family.level(k);
                let step = if k == 0 {
                    f64::INFINITY
                } else {
                    let map = family.embedding(k - 1, k);
                    let prev_level = family.level(k - 1);
                    let mut s: f64 = 0.0;
                    for v in prev_level.domain.interior().iter() {
                        let d = u.get(map[v]) - solved[k - 1].get(v);
                        s = s.max(d.abs());
                        max_increase = max_increase.max(d);
                    }
                    s
                };
                rows.push(IndexRow {
                    j: k + 1,
                    level: k,
                    min_rim: rim_min(u, level),
                    step,
                    superharmonic: is_superharmonic(u, &level.domain, p, sh_tol),
                    boundary_margin: boundary_margin(u, f.level(k), level),
                });
            }
            let limit = solved[last].clone();
            let previous_level = solved[prev].clone();
            Ok(PerronHalf {
                method: PerronMethod::RimDirichlet,
                sequence: vec![limit.clone()],
                limit,
                previous_level,
                rows,
                max_increase,
                barrier_rim_min: Vec::new(),
            })
        }
    }
}

fn free_rim_pair(family: &DomainFamily, f: &BoundaryData, p: Exponent, tol: f64) -> Result<Vec<ScalarField>> {
    let last = family.len() - 1;
    let ks: Vec<usize> = if last > 0 { vec![last - 1, last] } else { vec![last] };
    ks.par_iter()
        .map(|&k| free_rim_extension(family.level(k), f.level(k), p, tol))
        .collect()
}

/// Upper Perron approximation of `f`.
pub fn upper_perron(
    family: &DomainFamily,
    f: &BoundaryData,
    p: Exponent,
    controls: &PerronControls,
) -> Result<PerronHalf> {
    let (method, witnesses) = resolve_method(family, p, controls.method)?;
    let hf = if method == PerronMethod::Barrier {
        free_rim_pair(family, f, p, controls.tol)?
    } else {
        Vec::new()
    };
    upper_half(family, f, p, controls, method, witnesses.as_ref(), &hf)
}

/// Lower Perron approximation, `−` the upper approximation of `−f`.
pub fn lower_perron(
    family: &DomainFamily,
    f: &BoundaryData,
    p: Exponent,
    controls: &PerronControls,
) -> Result<PerronHalf> {
    Ok(upper_perron(family, &f.negated(), p, controls)?.negated())
}

fn stable(half: &PerronHalf, family: &DomainFamily, tol: f64) -> Vec<bool> {
    let last = family.last();
    let n = last.vertex_count();
    let mut ok = last.domain.interior().mask(n);
    if half.method == PerronMethod::Barrier && half.sequence.len() > 1 {
        let a = &half.sequence[half.sequence.len() - 1];
        let b = &half.sequence[half.sequence.len() - 2];
        for v in 0..n {
            ok[v] &= (a.get(v) - b.get(v)).abs() <= tol;
        }
    }
    if family.len() > 1 {
        let k = family.len() - 1;
        let map = family.embedding(k - 1, k);
        let prev = family.level(k - 1);
        let mut seen = vec![false; n];
        for v in prev.domain.interior().iter() {
            let w = map[v];
            seen[w] = (half.limit.get(w) - half.previous_level.get(v)).abs() <= tol;
        }
        for v in 0..n {
            ok[v] &= seen[v];
        }
    }
    ok
}

fn row_table(report_upper: &PerronHalf, report_lower: &PerronHalf, family: &DomainFamily, core_tol: f64) -> Vec<ConvergenceRow> {
    let last = family.last();
    let interior = last.domain.interior();
    let mut rows = Vec::new();
    if report_upper.method == PerronMethod::Barrier {
        for (idx, (u, l)) in report_upper.sequence.iter().zip(&report_lower.sequence).enumerate() {
            let core: VertexSet = if idx == 0 {
                VertexSet::new()
            } else {
                let pu = &report_upper.sequence[idx - 1];
                let pl = &report_lower.sequence[idx - 1];
                interior
                    .iter()
                    .filter(|&v| (u.get(v) - pu.get(v)).abs() <= core_tol && (l.get(v) - pl.get(v)).abs() <= core_tol)
                    .collect()
            };
            rows.push(ConvergenceRow {
                j: idx + 1,
                level: family.len() - 1,
                upper_min_rim: report_upper.rows[idx].min_rim,
                gap_sup: if core.is_empty() { f64::NAN } else { sup_diff(u, l, &core) },
                core_size: core.len(),
            });
        }
    } else {
        for r in &report_upper.rows {
            rows.push(ConvergenceRow {
                j: r.j,
                level: r.level,
                upper_min_rim: r.min_rim,
                gap_sup: 0.0,
                core_size: if r.level + 1 == family.len() {
                    interior.len()
                } else {
                    family.level(r.level).domain.interior().len()
                },
            });
        }
    }
    rows
}

/// Upper and lower approximations, their stable core and the comparison with the free-rim `Hf`.
pub fn perron(family: &DomainFamily, f: &BoundaryData, p: Exponent, controls: &PerronControls) -> Result<PerronReport> {
    let (method, witnesses) = resolve_method(family, p, controls.method)?;
    let hf = free_rim_pair(family, f, p, controls.tol)?;
    let neg = f.negated();
    let (upper, lower) = rayon::join(
        || upper_half(family, f, p, controls, method, witnesses.as_ref(), &hf_for(method, &hf)),
        || {
            let nhf: Vec<ScalarField> = hf.iter().map(|h| h.map(|x| -x)).collect();
            upper_half(family, &neg, p, controls, method, witnesses.as_ref(), &hf_for(method, &nhf))
        },
    );
    let upper = upper?;
    let lower = lower?.negated();
    let last = family.last();
    let n = last.vertex_count();
    let su = stable(&upper, family, controls.core_tol);
    let sl = stable(&lower, family, controls.core_tol);
    let core: VertexSet = (0..n).filter(|&v| su[v] && sl[v]).collect();
    let gap_sup = if core.is_empty() {
        f64::INFINITY
    } else {
        core.iter()
            .map(|v| (upper.limit.get(v) - lower.limit.get(v)).max(0.0))
            .fold(0.0, f64::max)
    };
    let hf_reference = hf[hf.len() - 1].clone();
    let hf_gap = if core.is_empty() {
        f64::INFINITY
    } else {
        sup_diff(&upper.limit, &hf_reference, &core).max(sup_diff(&lower.limit, &hf_reference, &core))
    };
    let hf_level_change = if hf.len() > 1 {
        let map = family.embedding(family.len() - 2, family.len() - 1);
        let inv = inverse(&map, n);
        core.iter()
            .filter_map(|v| inv[v].map(|w| (hf_reference.get(v) - hf[0].get(w)).abs()))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let rows = row_table(&upper, &lower, family, controls.core_tol);
    Ok(PerronReport {
        family: family.name().to_string(),
        p: p.get(),
        method,
        resolutive: gap_sup <= controls.core_tol,
        upper,
        lower,
        core,
        gap_sup,
        hf_reference,
        hf_gap,
        hf_level_change,
        rows,
        tol: controls.tol,
        core_tol: controls.core_tol,
        witnesses,
    })
}

fn hf_for(method: PerronMethod, hf: &[ScalarField]) -> Vec<ScalarField> {
    if method == PerronMethod::Barrier {
        hf.to_vec()
    } else {
        Vec::new()
    }
}

fn inverse(map: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut inv = vec![None; n];
    for (v, &w) in map.iter().enumerate() {
        inv[w] = Some(v);
    }
    inv
}

/// Full report with `tol` as the per-level solver tolerance.
pub fn check_resolutive(family: &DomainFamily, f: &BoundaryData, p: Exponent, tol: f64) -> Result<PerronReport> {
    let controls = PerronControls {
        tol,
        ..PerronControls::default()
    };
    perron(family, f, p, &controls)
}

/// Checks `v ≤ u + tol` on the interior after verifying that `u` is superharmonic,
/// `v` subharmonic and `v ≤ u` on the boundary.
pub fn comparison_principle_check(
    u: &ScalarField,
    v: &ScalarField,
    domain: &Subdomain,
    p: Exponent,
    tol: f64,
) -> Result<Comparison> {
    if !is_superharmonic(u, domain, p, tol) {
        return Err(Error::HypothesisViolated("u is not superharmonic".into()));
    }
    if !is_superharmonic(&v.map(|x| -x), domain, p, tol) {
        return Err(Error::HypothesisViolated("v is not subharmonic".into()));
    }
    if let Some(x) = domain.boundary().iter().find(|&x| v.get(x) > u.get(x) + tol) {
        return Err(Error::HypothesisViolated(format!(
            "boundary inequality fails at vertex {x}"
        )));
    }
    let max_violation = v.max_excess_over(u, domain.interior());
    Ok(Comparison {
        holds: max_violation <= tol,
        max_violation,
    })
}

/// Levelwise comparison; rims count as boundary at every level.
pub fn comparison_principle_check_family(
    us: &[ScalarField],
    vs: &[ScalarField],
    family: &DomainFamily,
    p: Exponent,
    tol: f64,
) -> Result<Comparison> {
    if us.len() != family.len() || vs.len() != family.len() {
        return Err(Error::Parameter("one field per level is required".into()));
    }
    let mut worst = Comparison {
        holds: true,
        max_violation: f64::NEG_INFINITY,
    };
    for (k, level) in family.levels().iter().enumerate() {
        let c = comparison_principle_check(&us[k], &vs[k], &level.domain, p, tol)?;
        worst.max_violation = worst.max_violation.max(c.max_violation);
        worst.holds &= c.holds;
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationOutcome {
    pub holds: bool,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub max_difference: f64,
    pub core_size: usize,
}

/// Runs `f` and `f + h` and compares both envelopes on the common stable core.
///
/// `h` must vanish on every true boundary vertex; only its value at `∞` may differ from zero.
pub fn perturb_and_compare(
    family: &DomainFamily,
    f: &BoundaryData,
    h: &BoundaryData,
    p: Exponent,
    controls: &PerronControls,
) -> Result<PerturbationOutcome> {
    for (k, level) in family.levels().iter().enumerate() {
        if let Some(v) = level.true_boundary().iter().find(|&v| h.level(k).get(v) != 0.0) {
            return Err(Error::HypothesisViolated(format!(
                "perturbation is nonzero at boundary vertex {v} of level {k}, a set of positive capacity"
            )));
        }
    }
    let mut sum = f.map(|k, v, x| x + h.level(k).get(v));
    sum.at_infinity = f.at_infinity() + h.at_infinity();
    if sum.at_infinity.is_nan() {
        return Err(Error::Parameter("value at infinity of f + h is undefined".into()));
    }
    let a = perron(family, f, p, controls)?;
    let b = perron(family, &sum, p, controls)?;
    let core = a.core.intersection(&b.core);
    let max_difference = sup_diff(&a.upper.limit, &b.upper.limit, &core)
        .max(sup_diff(&a.lower.limit, &b.lower.limit, &core));
    Ok(PerturbationOutcome {
        holds: !core.is_empty() && max_difference <= 2.0 * controls.tol,
        max_difference,
        core_size: core.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineRow {
    pub j: usize,
    /// `|f_j − f| ≤ 1/j` on every true boundary vertex.
    pub sandwich: bool,
    /// Collar position beyond which `|f − α| < 1/(3j)`.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub collar: f64,
    #[serde(serialize_with = "crate::report::ext_real")]
    pub approximant_gap: f64,
    /// `uP f − lP f` on the common core.
    #[serde(serialize_with = "crate::report::ext_real")]
    pub gap: f64,
    pub bound: f64,
    /// `uP f ≤ P f_j + 1/j` and `lP f ≥ P f_j − 1/j` on the common core.
    pub squeezed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub rows: Vec<PipelineRow>,
    pub report: PerronReport,
    pub resolutive: bool,
}

/// Approximates continuous data with limit `α` at `∞` by data equal to `α` beyond
/// collars and squeezes the envelopes of `f` between theirs.
pub fn continuous_boundary_pipeline(
    family: &DomainFamily,
    f: &BoundaryData,
    p: Exponent,
    controls: &PerronControls,
    j_max: usize,
) -> Result<PipelineReport> {
    let alpha = f.at_infinity();
    if !alpha.is_finite() {
        return Err(Error::Parameter("value at infinity must be finite".into()));
    }
    for (k, level) in family.levels().iter().enumerate() {
        if let Some(v) = level.domain.closure().iter().find(|&v| !f.level(k).get(v).is_finite()) {
            return Err(Error::Parameter(format!("data is not finite at vertex {v} of level {k}")));
        }
    }
    // boundary vertices added by the last level must already be close to α
    if family.len() > 1 {
        let k = family.len() - 1;
        let map = family.embedding(k - 1, k);
        let old: VertexSet = family.level(k - 1).true_boundary().iter().map(|v| map[v]).collect();
        let fresh = family.level(k).true_boundary().difference(&old);
        let dev = fresh
            .iter()
            .map(|v| (f.level(k).get(v) - alpha).abs())
            .fold(0.0, f64::max);
        let limit = 1.0 / (3.0 * j_max.max(1) as f64);
        if dev >= limit {
            return Err(Error::NoLimitAtInfinity(format!(
                "new boundary values deviate from {alpha} by {dev:.3e} ≥ {limit:.3e}"
            )));
        }
    }
    let report = perron(family, f, p, controls)?;
    let mut rows = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let jf = j as f64;
        let collar = family
            .levels()
            .iter()
            .enumerate()
            .flat_map(|(k, level)| {
                level
                    .true_boundary()
                    .iter()
                    .filter(|&v| (f.level(k).get(v) - alpha).abs() >= 1.0 / (3.0 * jf))
                    .map(|v| level.log_radius[v])
                    .collect::<Vec<_>>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let fj = f.map(|k, v, x| {
            let s = family.level(k).log_radius[v];
            let cut = (collar + 1.0 - s).clamp(0.0, 1.0);
            (x - alpha) * cut + alpha
        });
        let sandwich = family.levels().iter().enumerate().all(|(k, level)| {
            level
                .true_boundary()
                .iter()
                .all(|v| (fj.level(k).get(v) - f.level(k).get(v)).abs() <= 1.0 / jf)
        });
        let rj = perron(family, &fj, p, controls)?;
        let core = report.core.intersection(&rj.core);
        let slack = 1.0 / jf + controls.core_tol;
        let squeezed = core.iter().all(|v| {
            report.upper.limit.get(v) <= rj.upper.limit.get(v) + slack
                && report.lower.limit.get(v) >= rj.lower.limit.get(v) - slack
        });
        let gap = core
            .iter()
            .map(|v| report.upper.limit.get(v) - report.lower.limit.get(v))
            .fold(0.0, f64::max);
        rows.push(PipelineRow {
            j,
            sandwich,
            collar,
            approximant_gap: rj.gap_sup,
            gap,
            bound: 2.0 / jf,
            squeezed,
        });
    }
    Ok(PipelineReport {
        resolutive: report.resolutive,
        rows,
        report,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropertyCheck {
    pub holds: bool,
    /// Worst signed excess over the allowed tolerance side (nonpositive when it holds).
    pub margin: f64,
}

impl PropertyCheck {
    fn at_most(excess: f64, tol: f64) -> Self {
        PropertyCheck {
            holds: excess <= tol,
            margin: excess,
        }
    }
}

/// Reports sharing the controls of `f`.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeInputs<'a> {
    pub f: &'a PerronReport,
    /// Report for `−f`.
    pub neg_f: Option<&'a PerronReport>,
    /// Report for data `h ≥ f`.
    pub h: Option<&'a PerronReport>,
    /// Reports for `min{f, k}` along increasing `k`.
    pub truncations: &'a [PerronReport],
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeProperties {
    pub ordering: PropertyCheck,
    pub duality: Option<PropertyCheck>,
    pub monotone: Option<PropertyCheck>,
    pub truncation: Option<PropertyCheck>,
    pub resolutive_order: Option<PropertyCheck>,
    /// Sup of `|Δ_p uP f|` on the stable core.
    pub harmonic_residual: PropertyCheck,
    /// The upper limit is `±∞` somewhere on the core.
    pub divergent: bool,
}

/// Checks envelope ordering, duality, monotonicity, truncation limits and harmonicity.
pub fn perron_envelope_properties(
    inputs: EnvelopeInputs<'_>,
    family: &DomainFamily,
    tol: f64,
) -> Result<EnvelopeProperties> {
    let r = inputs.f;
    let p = Exponent::new(r.p)?;
    let last = family.last();
    let ordering = PropertyCheck::at_most(r.lower.limit.max_excess_over(&r.upper.limit, &r.core), tol);
    let duality = inputs.neg_f.map(|nr| {
        let mut worst: f64 = 0.0;
        let mut identical = nr.upper.sequence.len() == r.lower.sequence.len();
        for (a, b) in nr.upper.sequence.iter().zip(&r.lower.sequence) {
            for (x, y) in a.values().iter().zip(b.values()) {
                identical &= (-x).to_bits() == y.to_bits();
                worst = worst.max((x + y).abs());
            }
        }
        PropertyCheck {
            holds: identical,
            margin: worst,
        }
    });
    let monotone = inputs.h.map(|hr| {
        let core = r.core.intersection(&hr.core);
        let a = r.lower.limit.max_excess_over(&hr.lower.limit, &core);
        let b = r.upper.limit.max_excess_over(&hr.upper.limit, &core);
        PropertyCheck::at_most(a.max(b), tol)
    });
    let resolutive_order = inputs.h.and_then(|hr| {
        (r.resolutive && hr.resolutive).then(|| {
            let core = r.core.intersection(&hr.core);
            PropertyCheck::at_most(r.upper.limit.max_excess_over(&hr.upper.limit, &core), tol)
        })
    });
    let truncation = (!inputs.truncations.is_empty()).then(|| {
        let mut excess: f64 = f64::NEG_INFINITY;
        for w in inputs.truncations.windows(2) {
            let core = w[0].core.intersection(&w[1].core);
            excess = excess.max(w[0].lower.limit.max_excess_over(&w[1].lower.limit, &core));
        }
        let tail = inputs.truncations.last().unwrap();
        let core = tail.core.intersection(&r.core);
        excess = excess.max(sup_diff(&tail.lower.limit, &r.lower.limit, &core));
        PropertyCheck::at_most(excess, tol)
    });
    let divergent = r.core.iter().any(|v| !r.upper.limit.get(v).is_finite());
    let lap = p_laplacian(&r.upper.limit, &last.domain, p);
    let residual = r.core.iter().map(|v| lap.get(v).abs()).fold(0.0, f64::max);
    Ok(EnvelopeProperties {
        ordering,
        duality,
        monotone,
        truncation,
        resolutive_order,
        harmonic_residual: PropertyCheck::at_most(residual, tol),
        divergent,
    })
}
