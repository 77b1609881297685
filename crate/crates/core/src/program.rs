//! Box-constrained minimization of discrete `p`-energies.
//!
//! The objective is `Σ_t c_t |u_a − u_b|^p + Σ_v m_v |u_v|^p`, minimized over the
//! free vertices subject to per-vertex bounds, with fixed vertices held at their
//! values. The solver is a projected Newton method: exact gradients, a Hessian
//! whose degenerate factor `|d|^{p−2}` is evaluated at `max(|d|, δ)` with `δ`
//! tied to the current residual, an active set built from near-bound vertices
//! whose gradient points outward, and an Armijo search along the projection arc.

use crate::error::{Error, Result};
use crate::linalg::{smallest_eigenvalue, EnvelopeCholesky, SymmetricMatrix};
use crate::space_graph::Exponent;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Role {
    Fixed(f64),
    Free { lower: f64, upper: f64 },
    /// Vertex outside the program; its value is reported as zero.
    Inactive,
}

impl Role {
    pub fn unbounded() -> Self {
        Role::Free {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub a: usize,
    pub b: usize,
    pub coef: f64,
}

#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub p: Exponent,
    pub terms: Vec<Term>,
    /// Per-vertex coefficient of `|u_v|^p`; empty means no mass term.
    pub mass: Vec<f64>,
    pub roles: Vec<Role>,
    /// Box known to contain the minimizer, used for the certified objective gap.
    pub bracket: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for the sup-norm solution error.
    pub tol: f64,
    pub max_iterations: usize,
}

impl SolverOptions {
    pub fn new(tol: f64) -> Self {
        SolverOptions {
            tol,
            max_iterations: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProgramSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    /// `max_v |x_v − clamp(x_v − ∂F/∂x_v / p)|` over free vertices.
    pub residual: f64,
    /// Largest per-vertex sum of absolute flux magnitudes; scales `residual`.
    pub flux_scale: f64,
    /// Residual-based estimate of the Euclidean distance to the minimizer.
    pub error_bound: f64,
    /// Frank–Wolfe gap over the bracket; `∞` without a bracket.
    pub objective_gap: f64,
    pub iterations: usize,
    /// Free vertices sitting on a bound.
    pub at_bound: Vec<usize>,
}

impl ProgramSolution {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.flux_scale.max(1.0)
    }
}

struct Layout {
    free: Vec<usize>,
    slot: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Terms with at least one free endpoint.
    live: Vec<Term>,
    mass: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl ConvexProgram {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let p = self.p.get();
        let mut f = 0.0;
        for t in &self.terms {
            let d = (x[t.a] - x[t.b]).abs();
            if d > 0.0 {
                f += t.coef * d.powf(p);
            }
        }
        for (v, &m) in self.mass.iter().enumerate() {
            if m > 0.0 && !matches!(self.roles[v], Role::Inactive) && x[v] != 0.0 {
                f += m * x[v].abs().powf(p);
            }
        }
        f
    }

    fn layout(&self) -> Result<Layout> {
        let n = self.roles.len();
        let mut slot = vec![NONE; n];
        let mut free = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (v, role) in self.roles.iter().enumerate() {
            match *role {
                Role::Free { lower: l, upper: u } => {
                    if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY
                    {
                        return Err(Error::Infeasible(format!(
                            "bounds [{l}, {u}] at vertex {v} admit no finite value"
                        )));
                    }
                    slot[v] = free.len();
                    free.push(v);
                    lower.push(l);
                    upper.push(u);
                }
                Role::Fixed(x) if !x.is_finite() => {
                    return Err(Error::Parameter(format!(
                        "fixed value at vertex {v} is not finite"
                    )));
                }
                _ => {}
            }
        }
        let mut live = Vec::new();
        for t in &self.terms {
            if t.a >= n || t.b >= n {
                return Err(Error::Parameter("program term references a missing vertex".into()));
            }
            let inactive = |v: usize| matches!(self.roles[v], Role::Inactive);
            if inactive(t.a) || inactive(t.b) {
                return Err(Error::Parameter(format!(
                    "program term {}–{} touches an inactive vertex",
                    t.a, t.b
                )));
            }
            if slot[t.a] != NONE || slot[t.b] != NONE {
                live.push(*t);
            }
        }
        let mass = free
            .iter()
            .map(|&v| self.mass.get(v).copied().unwrap_or(0.0))
            .collect();
        let layout = Layout {
            free,
            slot,
            lower,
            upper,
            live,
            mass,
        };
        self.check_anchoring(&layout)?;
        Ok(layout)
    }

    fn check_anchoring(&self, lay: &Layout) -> Result<()> {
        let k = lay.free.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut anchored = vec![false; k];
        for (i, &m) in lay.mass.iter().enumerate() {
            anchored[i] = m > 0.0;
        }
        for t in &lay.live {
            match (lay.slot[t.a], lay.slot[t.b]) {
                (NONE, j) | (j, NONE) => anchored[j] = true,
                (i, j) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
        let mut root_anchor = vec![false; k];
        for i in 0..k {
            let r = find(&mut parent, i);
            root_anchor[r] |= anchored[i];
        }
        for i in 0..k {
            let r = find(&mut parent, i);
            if !root_anchor[r] {
                return Err(Error::UnanchoredComponent {
                    vertex: lay.free[i],
                });
            }
        }
        Ok(())
    }

    /// Minimizes the program starting from `init` (projected onto the bounds).
    pub fn solve(&self, init: Option<&[f64]>, opts: SolverOptions) -> Result<ProgramSolution> {
        if !(opts.tol > 0.0) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        let lay = self.layout()?;
        let n = self.roles.len();
        let mut x = vec![0.0; n];
        let fixed: Vec<f64> = self
            .roles
            .iter()
            .filter_map(|r| match r {
                Role::Fixed(v) => Some(*v),
                _ => None,
            })
            .collect();
        let center = if fixed.is_empty() {
            0.0
        } else {
            fixed.iter().sum::<f64>() / fixed.len() as f64
        };
        for (v, role) in self.roles.iter().enumerate() {
            x[v] = match *role {
                Role::Fixed(val) => val,
                Role::Free { lower, upper } => {
                    let guess = init.map_or(center, |g| g[v]);
                    let guess = if guess.is_finite() { guess } else { center };
                    guess.clamp(lower, upper)
                }
                Role::Inactive => 0.0,
            };
        }
        if init.is_none() && (self.p.get() - 2.0).abs() > 1e-12 && !lay.free.is_empty() {
            let mut quad = self.clone();
            quad.p = Exponent::new(2.0).unwrap();
            quad.bracket = None;
            if let Ok(warm) = quad.solve(Some(&x), SolverOptions::new(1e-6)) {
                for &v in &lay.free {
                    x[v] = warm.values[v];
                }
            }
        }
        let scale = self.scale(&lay, &x);
        newton(self, &lay, x, scale, opts)
    }

    fn scale(&self, lay: &Layout, x: &[f64]) -> f64 {
        let mut s: f64 = 0.0;
        for role in &self.roles {
            if let Role::Fixed(v) = role {
                s = s.max(v.abs());
            }
        }
        for i in 0..lay.free.len() {
            for b in [lay.lower[i], lay.upper[i], x[lay.free[i]]] {
                if b.is_finite() {
                    s = s.max(b.abs());
                }
            }
        }
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

struct Eval {
    grad: Vec<f64>,
    flux: Vec<f64>,
}

fn gradient(prog: &ConvexProgram, lay: &Layout, x: &[f64]) -> Eval {
    let p = prog.p.get();
    let k = lay.free.len();
    let mut grad = vec![0.0; k];
    let mut flux = vec![0.0; k];
    for t in &lay.live {
        let d = x[t.a] - x[t.b];
        let ad = d.abs();
        if ad == 0.0 {
            continue;
        }
        let mag = t.coef * p * ad.powf(p - 1.0);
        let g = mag * d.signum();
        if lay.slot[t.a] != NONE {
            grad[lay.slot[t.a]] += g;
            flux[lay.slot[t.a]] += mag;
        }
        if lay.slot[t.b] != NONE {
            grad[lay.slot[t.b]] -= g;
            flux[lay.slot[t.b]] += mag;
        }
    }
    for i in 0..k {
        let m = lay.mass[i];
        let u = x[lay.free[i]];
        if m > 0.0 && u != 0.0 {
            let mag = m * p * u.abs().powf(p - 1.0);
            grad[i] += mag * u.signum();
            flux[i] += mag;
        }
    }
    Eval { grad, flux }
}

fn residual_vector(lay: &Layout, x: &[f64], grad: &[f64], p: f64) -> Vec<f64> {
    (0..lay.free.len())
        .map(|i| {
            let xi = x[lay.free[i]];
            (xi - (xi - grad[i] / p).clamp(lay.lower[i], lay.upper[i])).abs()
        })
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Regularized Hessian over the free vertices.
fn hessian(prog: &ConvexProgram, lay: &Layout, x: &[f64], delta: f64) -> SymmetricMatrix {
    let p = prog.p.get();
    let k = lay.free.len();
    let mut h = SymmetricMatrix::new(k);
    // below p = 2 the secant curvature majorizes |d|^p, so full steps descend
    let factor = if p < 2.0 { p } else { p * (p - 1.0) };
    let curv = |c: f64, d: f64| c * factor * d.abs().max(delta).powf(p - 2.0);
    for t in &lay.live {
        let c = curv(t.coef, x[t.a] - x[t.b]);
        let (sa, sb) = (lay.slot[t.a], lay.slot[t.b]);
        if sa != NONE {
            h.diag[sa] += c;
        }
        if sb != NONE {
            h.diag[sb] += c;
        }
        if sa != NONE && sb != NONE {
            h.off.push((sa, sb, -c));
        }
    }
    for i in 0..k {
        if lay.mass[i] > 0.0 {
            h.diag[i] += curv(lay.mass[i], x[lay.free[i]]);
        }
    }
    h
}

fn restrict(h: &SymmetricMatrix, keep: &[bool]) -> (SymmetricMatrix, Vec<usize>) {
    let mut map = vec![NONE; h.dim()];
    let mut ids = Vec::new();
    for i in 0..h.dim() {
        if keep[i] {
            map[i] = ids.len();
            ids.push(i);
        }
    }
    let mut r = SymmetricMatrix::new(ids.len());
    for (j, &i) in ids.iter().enumerate() {
        r.diag[j] = h.diag[i];
    }
    for &(i, j, v) in &h.off {
        if keep[i] && keep[j] {
            r.off.push((map[i], map[j], v));
        }
    }
    (r, ids)
}

fn newton(
    prog: &ConvexProgram,
    lay: &Layout,
    mut x: Vec<f64>,
    scale: f64,
    opts: SolverOptions,
) -> Result<ProgramSolution> {
    let p = prog.p.get();
    let k = lay.free.len();
    let mut f = prog.objective(&x);
    let mut ev = gradient(prog, lay, &x);
    let mut res = sup(&residual_vector(lay, &x, &ev.grad, p));
    let mut iterations = 0;
    let mut target_factor = 1.0;
    let mut stalled = false;
    // consecutive steps too small to matter; the gradient is only Hölder below p = 2
    let mut quiet = 0;
    let mut last_step = f64::INFINITY;
    // curvature floor above p = 2, relaxed while full Newton steps keep being accepted
    let mut floor_level = 1e-2;
    let mut fusion_tried = false;

    loop {
        let flux_scale = sup(&ev.flux) / p;
        let target = opts.tol * flux_scale.max(1.0) * target_factor;
        let polish_due = p < 2.0
            && res > opts.tol * flux_scale.max(1.0)
            && (quiet >= 3 || stalled || iterations >= opts.max_iterations || (iterations > 0 && iterations % 30 == 0));
        if polish_due {
            if let Some((xf, ff, ef, rf, _)) = fuse_plateaus(prog, lay, &x, scale, &[1e-9, 1e-6], opts) {
                let fs = sup(&ef.flux) / p;
                let bound = error_bound(prog, lay, &xf, &ef.grad, scale);
                return Ok(finish(prog, lay, xf, ff, &ef, rf, fs, bound, iterations));
            }
        }
        if p < 2.0 && quiet >= 3 {
            let bound = last_step / (p - 1.0);
            return Ok(finish(prog, lay, x, f, &ev, res, flux_scale, bound, iterations));
        }
        let done = res <= target || stalled || k == 0;
        if done {
            let bound = error_bound(prog, lay, &x, &ev.grad, scale);
            if p > 2.0 && bound > opts.tol && !fusion_tried {
                fusion_tried = true;
                // flat terms only pin differences to the power 1/(p−1) of the residual
                let reach = (10.0 * res / flux_scale.max(1.0)).powf(1.0 / (p - 1.0)).min(1e-2);
                if let Some((xf, ff, ef, rf, rb)) = fuse_plateaus(prog, lay, &x, scale, &[1e-9, 1e-6, reach], opts) {
                    let fs = sup(&ef.flux) / p;
                    return Ok(finish(prog, lay, xf, ff, &ef, rf, fs, rb.min(bound), iterations));
                }
            }
            let floor = 1e-14 * flux_scale.max(1.0) * (k.max(1) as f64).sqrt();
            if bound <= opts.tol || res <= floor || stalled || k == 0 || target_factor < 1e-6 {
                if res > opts.tol * flux_scale.max(1.0) && res > floor * 100.0 {
                    return Err(Error::NotConverged(format!(
                        "residual {res:.3e} stalled above target after {iterations} iterations"
                    )));
                }
                return Ok(finish(prog, lay, x, f, &ev, res, flux_scale, bound, iterations));
            }
            target_factor *= 1e-2;
            continue;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged(format!(
                "residual {res:.3e} above target {target:.3e} after {iterations} iterations"
            )));
        }
        iterations += 1;

        let rel = res / flux_scale.max(1.0);
        let delta = if p < 2.0 {
            scale * 1e-12
        } else {
            scale * rel.min(floor_level).clamp(1e-12, 1e-2)
        };
        let h = hessian(prog, lay, &x, delta);
        let lo: Vec<f64> = (0..k).map(|i| lay.lower[i] - x[lay.free[i]]).collect();
        let hi: Vec<f64> = (0..k).map(|i| lay.upper[i] - x[lay.free[i]]).collect();
        let dir = box_qp(&h, &ev.grad, &lo, &hi);

        let mut alpha: f64 = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let mut trial = x.clone();
            let mut decrease = 0.0;
            for i in 0..k {
                let v = lay.free[i];
                trial[v] = (x[v] + alpha * dir[i]).clamp(lay.lower[i], lay.upper[i]);
                decrease += ev.grad[i] * (trial[v] - x[v]);
            }
            let ft = prog.objective(&trial);
            if ft <= f + 1e-4 * decrease {
                accepted = Some((trial, ft));
                break;
            }
            if (ft - f).abs() <= 1e-13 * f.abs().max(f64::MIN_POSITIVE) {
                let et = gradient(prog, lay, &trial);
                let rt = sup(&residual_vector(lay, &trial, &et.grad, p));
                if rt < res {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, ft)) => {
                floor_level = if alpha == 1.0 {
                    (floor_level * 0.1).max(1e-12)
                } else {
                    (floor_level * 10.0).min(1e-2)
                };
                let moved = trial != x;
                last_step = (0..k)
                    .map(|i| (trial[lay.free[i]] - x[lay.free[i]]).abs())
                    .fold(0.0, f64::max);
                if last_step / (p - 1.0) <= 1e-2 * opts.tol {
                    quiet += 1;
                } else {
                    quiet = 0;
                }
                x = trial;
                f = ft;
                ev = gradient(prog, lay, &x);
                let new_res = sup(&residual_vector(lay, &x, &ev.grad, p));
                stalled = !moved;
                res = new_res;
            }
            None => stalled = true,
        }
    }
}

/// Merges free vertices joined by near-flat terms, pins massive vertices near zero,
/// and re-solves the smaller program.
///
/// Below `p = 2` the flux `|d|^{p−1}` is not Lipschitz at `d = 0`, so Newton stalls
/// next to minimizers that are constant on whole plateaus. The merged solution is
/// returned only when it meets the residual target of the original program.
fn fuse_plateaus(
    prog: &ConvexProgram,
    lay: &Layout,
    x: &[f64],
    scale: f64,
    taus: &[f64],
    opts: SolverOptions,
) -> Option<(Vec<f64>, f64, Eval, f64, f64)> {
    let n = prog.roles.len();
    let p = prog.p.get();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &tau in taus {
        let tau = tau * scale;
        let mut parent: Vec<usize> = (0..n).collect();
        let mut pinned: Vec<Option<f64>> = prog
            .roles
            .iter()
            .map(|r| match r {
                Role::Fixed(v) => Some(*v),
                _ => None,
            })
            .collect();
        let mut merged = false;
        for (i, &v) in lay.free.iter().enumerate() {
            if lay.mass[i] > 0.0 && x[v].abs() <= tau && lay.lower[i] <= 0.0 && 0.0 <= lay.upper[i] {
                pinned[v] = Some(0.0);
                merged = true;
            }
        }
        for t in &lay.live {
            if (x[t.a] - x[t.b]).abs() > tau {
                continue;
            }
            let (ra, rb) = (find(&mut parent, t.a), find(&mut parent, t.b));
            if ra == rb {
                continue;
            }
            let pin = match (pinned[ra], pinned[rb]) {
                (Some(a), Some(b)) if a != b => continue,
                (a, b) => a.or(b),
            };
            parent[ra] = rb;
            pinned[rb] = pin;
            merged = true;
        }
        if !merged {
            continue;
        }
        let mut cluster = vec![NONE; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            if matches!(prog.roles[v], Role::Inactive) {
                continue;
            }
            let r = find(&mut parent, v);
            if cluster[r] == NONE {
                cluster[r] = members.len();
                members.push(Vec::new());
            }
            cluster[v] = cluster[r];
            members[cluster[v]].push(v);
        }
        let m = members.len();
        let mut roles = Vec::with_capacity(m);
        let mut init = Vec::with_capacity(m);
        let mut mass = vec![0.0; m];
        let mut bracket = prog.bracket.as_ref().map(|_| vec![(f64::NEG_INFINITY, f64::INFINITY); m]);
        let mut feasible = true;
        for (c, vs) in members.iter().enumerate() {
            let root = find(&mut parent, vs[0]);
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for &v in vs {
                if let Role::Free { lower, upper } = prog.roles[v] {
                    lo = lo.max(lower);
                    hi = hi.min(upper);
                }
                mass[c] += prog.mass.get(v).copied().unwrap_or(0.0);
                if let (Some(b), Some(src)) = (bracket.as_mut(), prog.bracket.as_ref()) {
                    b[c].0 = b[c].0.max(src[v].0);
                    b[c].1 = b[c].1.min(src[v].1);
                }
            }
            match pinned[root] {
                Some(val) => {
                    feasible &= lo <= val && val <= hi;
                    roles.push(Role::Fixed(val));
                    init.push(val);
                }
                None => {
                    feasible &= lo <= hi;
                    roles.push(Role::Free { lower: lo, upper: hi });
                    let mean = vs.iter().map(|&v| x[v]).sum::<f64>() / vs.len() as f64;
                    init.push(mean.clamp(lo, hi));
                }
            }
        }
        if !feasible {
            continue;
        }
        if let Some(b) = bracket.as_mut() {
            for r in b.iter_mut() {
                if r.0 > r.1 {
                    *r = (f64::NEG_INFINITY, f64::INFINITY);
                }
            }
        }
        let terms = prog
            .terms
            .iter()
            .filter(|t| cluster[t.a] != cluster[t.b])
            .map(|t| Term {
                a: cluster[t.a],
                b: cluster[t.b],
                coef: t.coef,
            })
            .collect();
        let reduced = ConvexProgram {
            p: prog.p,
            terms,
            mass: if prog.mass.is_empty() { Vec::new() } else { mass },
            roles,
            bracket,
        };
        let Ok(sol) = reduced.solve(Some(&init), opts) else {
            continue;
        };
        let mut xf = x.to_vec();
        for v in 0..n {
            if cluster[v] != NONE {
                xf[v] = sol.values[cluster[v]];
            }
        }
        let ev = gradient(prog, lay, &xf);
        let flux_scale = sup(&ev.flux) / p;
        let res = sup(&residual_vector(lay, &xf, &ev.grad, p));
        if res <= opts.tol * flux_scale.max(1.0) {
            let f = prog.objective(&xf);
            return Some((xf, f, ev, res, sol.error_bound));
        }
    }
    None
}

/// Minimizes `½ dᵀHd + gᵀd` over `lo ≤ d ≤ hi` by primal-dual active sets.
///
/// `0` must be feasible. Falls back to the last feasible iterate if the active
/// sets keep changing.
fn box_qp(h: &SymmetricMatrix, g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let k = g.len();
    let mut d = vec![0.0; k];
    let mut mu = g.to_vec();
    let mut state = vec![0i8; k];
    for round in 0..60 {
        let next: Vec<i8> = (0..k)
            .map(|i| {
                let c = h.diag[i].max(f64::MIN_POSITIVE);
                let pred = d[i] - mu[i] / c;
                if pred < lo[i] {
                    -1
                } else if pred > hi[i] {
                    1
                } else {
                    0
                }
            })
            .collect();
        if round > 0 && next == state {
            break;
        }
        state = next;
        for i in 0..k {
            match state[i] {
                -1 => d[i] = lo[i],
                1 => d[i] = hi[i],
                _ => {}
            }
        }
        let keep: Vec<bool> = state.iter().map(|&s| s == 0).collect();
        let (hf, ids) = restrict(h, &keep);
        if !ids.is_empty() {
            let mut pinned = d.clone();
            for &i in &ids {
                pinned[i] = 0.0;
            }
            let coupling = h.mul(&pinned);
            let rhs: Vec<f64> = ids.iter().map(|&i| -g[i] - coupling[i]).collect();
            let step = match EnvelopeCholesky::factor(&hf) {
                Ok(ch) => ch.solve(&rhs),
                Err(_) => ids
                    .iter()
                    .zip(&rhs)
                    .map(|(&i, r)| r / h.diag[i].max(f64::MIN_POSITIVE))
                    .collect(),
            };
            for (j, &i) in ids.iter().enumerate() {
                d[i] = step[j];
            }
        }
        let hd = h.mul(&d);
        for i in 0..k {
            mu[i] = if state[i] == 0 { 0.0 } else { hd[i] + g[i] };
        }
    }
    for i in 0..k {
        d[i] = d[i].clamp(lo[i], hi[i]);
    }
    d
}

fn error_bound(prog: &ConvexProgram, lay: &Layout, x: &[f64], grad: &[f64], scale: f64) -> f64 {
    let k = lay.free.len();
    if k == 0 {
        return 0.0;
    }
    let p = prog.p.get();
    let r = residual_vector(lay, x, grad, p);
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let keep: Vec<bool> = (0..k)
        .map(|i| {
            let xi = x[lay.free[i]];
            xi > lay.lower[i] && xi < lay.upper[i]
        })
        .collect();
    let h = hessian(prog, lay, x, 1e-12 * scale);
    let (hf, _) = restrict(&h, &keep);
    if hf.dim() == 0 {
        return norm;
    }
    match EnvelopeCholesky::factor(&hf) {
        Ok(ch) => {
            let lam = smallest_eigenvalue(&hf, &ch, 60) / p;
            if lam > 0.0 {
                norm / lam
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prog: &ConvexProgram,
    lay: &Layout,
    x: Vec<f64>,
    objective: f64,
    ev: &Eval,
    residual: f64,
    flux_scale: f64,
    error_bound: f64,
    iterations: usize,
) -> ProgramSolution {
    let k = lay.free.len();
    let objective_gap = match &prog.bracket {
        Some(br) => {
            let mut gap = 0.0;
            for i in 0..k {
                let v = lay.free[i];
                let (lo, hi) = br[v];
                let lo = lo.max(lay.lower[i]);
                let hi = hi.min(lay.upper[i]);
                let g = ev.grad[i];
                let s = if g > 0.0 { lo } else { hi };
                if g != 0.0 {
                    gap += g * (x[v] - s);
                }
            }
            gap.max(0.0)
        }
        None => f64::INFINITY,
    };
    let at_bound = (0..k)
        .filter(|&i| {
            let xi = x[lay.free[i]];
            xi == lay.lower[i] || xi == lay.upper[i]
        })
        .map(|i| lay.free[i])
        .collect();
    ProgramSolution {
        values: x,
        objective,
        residual,
        flux_scale,
        error_bound,
        objective_gap,
        iterations,
        at_bound,
    }
}
