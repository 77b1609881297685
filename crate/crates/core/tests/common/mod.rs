#![allow(dead_code)]

use std::sync::Arc;

use potlib::space_graph::Edge;
use potlib::{GraphSpace, ScalarField, Subdomain, VertexSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph: a random spanning tree plus `extra` chords, all data in `[0.5, 2]`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> GraphSpace {
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.gen_range(0..v), v));
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !pairs.contains(&(a.min(b), a.max(b))) {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Edge::new(a, b, rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)))
        .collect();
    let measure = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    GraphSpace::new(measure, edges).unwrap()
}

/// Splits all vertices into a nonempty boundary of at most `max_boundary` vertices and the interior.
pub fn random_split(rng: &mut ChaCha8Rng, graph: Arc<GraphSpace>, max_boundary: usize) -> Subdomain {
    let n = graph.vertex_count();
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let b = rng.gen_range(1..=max_boundary.min(n - 1));
    let boundary: VertexSet = ids[..b].iter().copied().collect();
    let interior: VertexSet = ids[b..].iter().copied().collect();
    Subdomain::new(graph, interior, boundary, false).unwrap()
}

pub fn random_instance(rng: &mut ChaCha8Rng, min_n: usize, max_n: usize) -> Subdomain {
    let n = rng.gen_range(min_n..=max_n);
    let extra = rng.gen_range(0..=n);
    let g = Arc::new(random_graph(rng, n, extra));
    random_split(rng, g, (n / 3).max(1))
}

pub fn random_field(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> ScalarField {
    ScalarField::from_fn(n, |_| rng.gen_range(lo..hi))
}

/// Obstacle with finite values on a random part of the interior and `−∞` elsewhere.
pub fn random_obstacle(rng: &mut ChaCha8Rng, domain: &Subdomain) -> ScalarField {
    let n = domain.graph().vertex_count();
    ScalarField::from_fn(n, |_| {
        if rng.gen_bool(0.7) {
            rng.gen_range(-0.5..1.5)
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Gaussian elimination with partial pivoting on a dense row-major system.
pub fn dense_solve(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in col + 1..n {
            let m = a[row * n + col] / a[col * n + col];
            if m != 0.0 {
                for k in col..n {
                    a[row * n + k] -= m * a[col * n + k];
                }
                b[row] -= m * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Some(x)
}

fn conductance(e: &Edge, p: f64) -> f64 {
    e.weight / e.length.powf(p)
}

/// `Σ_y c_xy |u_x − u_y|^{p−2}(u_x − u_y)` at every vertex, i.e. `−Δ_p u`.
pub fn neg_p_laplacian(u: &[f64], graph: &GraphSpace, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for e in graph.edges() {
        let d = u[e.a] - u[e.b];
        let flux = conductance(e, p) * d.abs().powf(p - 2.0) * d;
        let flux = if d == 0.0 { 0.0 } else { flux };
        out[e.a] += flux;
        out[e.b] -= flux;
    }
    out
}

/// Energy of `u` over edges touching the interior.
pub fn energy(u: &[f64], domain: &Subdomain, p: f64) -> f64 {
    domain
        .graph()
        .edges()
        .iter()
        .filter(|e| domain.is_interior(e.a) || domain.is_interior(e.b))
        .map(|e| conductance(e, p) * (u[e.a] - u[e.b]).abs().powf(p))
        .sum()
}

/// Complementarity residual `max |min{−Δ_p u, u − ψ}|` over the interior.
pub fn kkt_residual(u: &[f64], psi: &ScalarField, domain: &Subdomain, p: f64) -> f64 {
    let r = neg_p_laplacian(u, domain.graph(), p);
    domain
        .interior()
        .iter()
        .map(|v| r[v].min(u[v] - psi.get(v)).abs())
        .fold(0.0, f64::max)
}

/// Exact `p = 2` obstacle solution by enumerating every active set.
pub fn active_set_qp(domain: &Subdomain, psi: &ScalarField, f: &ScalarField) -> Vec<f64> {
    let g = domain.graph();
    let n = g.vertex_count();
    let interior: Vec<usize> = domain.interior().iter().collect();
    let k = interior.len();
    assert!(k <= 16);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << k) {
        let active: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
        if (0..k).any(|i| active[i] && psi.get(interior[i]) == f64::NEG_INFINITY) {
            continue;
        }
        let mut u = vec![0.0; n];
        for v in domain.boundary().iter() {
            u[v] = f.get(v);
        }
        let free: Vec<usize> = (0..k).filter(|&i| !active[i]).map(|i| interior[i]).collect();
        for i in (0..k).filter(|&i| active[i]) {
            u[interior[i]] = psi.get(interior[i]);
        }
        let pos = |v: usize| free.iter().position(|&x| x == v);
        let m = free.len();
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        for e in g.edges() {
            let c = conductance(e, 2.0);
            for (x, y) in [(e.a, e.b), (e.b, e.a)] {
                if let Some(i) = pos(x) {
                    a[i * m + i] += c;
                    match pos(y) {
                        Some(j) => a[i * m + j] -= c,
                        None => b[i] += c * u[y],
                    }
                }
            }
        }
        let Some(x) = dense_solve(a, m, b) else { continue };
        for (i, &v) in free.iter().enumerate() {
            u[v] = x[i];
        }
        let above = free.iter().all(|&v| u[v] >= psi.get(v) - 1e-12);
        let r = neg_p_laplacian(&u, g, 2.0);
        let pushed = (0..k)
            .filter(|&i| active[i])
            .all(|i| r[interior[i]] >= -1e-12);
        if above && pushed {
            let e = energy(&u, domain, 2.0);
            if best.as_ref().map_or(true, |(be, _)| e < *be) {
                best = Some((e, u));
            }
        }
    }
    best.expect("some active set satisfies the optimality conditions").1
}

/// Projected gradient descent with Armijo backtracking; returns the final iterate and its energy.
pub fn projected_gradient(
    domain: &Subdomain,
    psi: &ScalarField,
    f: &ScalarField,
    p: f64,
    iterations: usize,
) -> (Vec<f64>, f64) {
    let g = domain.graph();
    let n = g.vertex_count();
    let interior: Vec<usize> = domain.interior().iter().collect();
    let mut u: Vec<f64> = (0..n)
        .map(|v| {
            if domain.is_interior(v) {
                psi.get(v).max(0.0)
            } else {
                f.get(v)
            }
        })
        .collect();
    let mut e = energy(&u, domain, p);
    let mut t = 1.0;
    for _ in 0..iterations {
        let grad = neg_p_laplacian(&u, g, p);
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = u.clone();
            let mut moved = 0.0;
            for &v in &interior {
                trial[v] = (u[v] - t * p * grad[v]).max(psi.get(v));
                moved += (trial[v] - u[v]).powi(2);
            }
            let et = energy(&trial, domain, p);
            if et <= e - 1e-4 * moved / t {
                u = trial;
                e = et;
                t *= 2.0;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (u, e)
}

/// Dense weighted Laplacian `L` with `(L u)_x = Σ_y c_xy (u_x − u_y)` at `p = 2`.
pub fn laplacian_matrix(graph: &GraphSpace) -> Vec<f64> {
    let n = graph.vertex_count();
    let mut l = vec![0.0; n * n];
    for e in graph.edges() {
        let c = conductance(e, 2.0);
        l[e.a * n + e.a] += c;
        l[e.b * n + e.b] += c;
        l[e.a * n + e.b] -= c;
        l[e.b * n + e.a] -= c;
    }
    l
}

/// Every simple path between distinct vertices, as vertex sequences.
pub fn simple_paths(graph: &GraphSpace) -> Vec<Vec<usize>> {
    fn extend(graph: &GraphSpace, path: &mut Vec<usize>, seen: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        for &(nb, _) in graph.neighbors(last) {
            if !seen[nb] {
                seen[nb] = true;
                path.push(nb);
                out.push(path.clone());
                extend(graph, path, seen, out);
                path.pop();
                seen[nb] = false;
            }
        }
    }
    let n = graph.vertex_count();
    let mut out = Vec::new();
    for s in 0..n {
        let mut seen = vec![false; n];
        seen[s] = true;
        extend(graph, &mut vec![s], &mut seen, &mut out);
    }
    out
}

/// Number of points of `h·Z^n` in `[-extent, extent]^n` accepted by `include`.
pub fn count_lattice_points(n: usize, extent: f64, h: f64, include: impl Fn(&[f64]) -> bool) -> usize {
    let half = (extent / h + 1e-9).floor() as i64;
    let mut count = 0;
    let mut idx = vec![-half; n];
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        if include(&x) {
            count += 1;
        }
        let mut d = 0;
        loop {
            if d == n {
                return count;
            }
            idx[d] += 1;
            if idx[d] <= half {
                break;
            }
            idx[d] = -half;
            d += 1;
        }
    }
}
