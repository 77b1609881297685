//! Symmetric positive definite solves: envelope Cholesky under reverse
//! Cuthill–McKee ordering for sparse systems, plus a small dense Cholesky.

use std::collections::VecDeque;

/// Sparse symmetric matrix given by its diagonal and strictly off-diagonal entries.
#[derive(Debug, Clone, Default)]
pub struct SymmetricMatrix {
    pub diag: Vec<f64>,
    /// `(i, j, value)` with `i != j`; each unordered pair at most once.
    pub off: Vec<(usize, usize, f64)>,
}

impl SymmetricMatrix {
    pub fn new(n: usize) -> Self {
        SymmetricMatrix {
            diag: vec![0.0; n],
            off: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(i, j, a) in &self.off {
            y[i] += a * x[j];
            y[j] += a * x[i];
        }
        y
    }
}

/// Reverse Cuthill–McKee permutation: `order[k]` is the original index placed at position `k`.
pub fn reverse_cuthill_mckee(n: usize, pairs: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in pairs {
        adj[i].push(j);
        adj[j].push(i);
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    for list in adj.iter_mut() {
        list.sort_unstable_by_key(|&v| (degree[v], v));
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_unstable_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &u in &adj[v] {
                if !visited[u] {
                    visited[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>]) -> usize {
    let mut current = seed;
    let mut best_depth = 0;
    for _ in 0..4 {
        let (far, depth) = farthest(current, adj);
        if depth <= best_depth {
            break;
        }
        best_depth = depth;
        current = far;
    }
    current
}

fn farthest(start: usize, adj: &[Vec<usize>]) -> (usize, usize) {
    let mut dist = std::collections::HashMap::new();
    dist.insert(start, 0usize);
    let mut queue = VecDeque::from([start]);
    let mut last = (start, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d > last.1 || (d == last.1 && adj[v].len() < adj[last.0].len()) {
            last = (v, d);
        }
        for &u in &adj[v] {
            if !dist.contains_key(&u) {
                dist.insert(u, d + 1);
                queue.push_back(u);
            }
        }
    }
    last
}

/// Envelope (skyline) Cholesky factor `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    order: Vec<usize>,
    position: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite;

impl EnvelopeCholesky {
    pub fn factor(a: &SymmetricMatrix) -> Result<Self, NotPositiveDefinite> {
        let n = a.dim();
        let pairs: Vec<(usize, usize)> = a.off.iter().map(|&(i, j, _)| (i, j)).collect();
        let order = reverse_cuthill_mckee(n, &pairs);
        let mut position = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in &a.off {
            let (pi, pj) = (position[i], position[j]);
            let (r, c) = if pi > pj { (pi, pj) } else { (pj, pi) };
            first[r] = first[r].min(c);
        }
        let mut start = vec![0; n + 1];
        for r in 0..n {
            start[r + 1] = start[r] + (r - first[r] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for (v, &d) in a.diag.iter().enumerate() {
            let r = position[v];
            values[start[r] + r - first[r]] += d;
        }
        for &(i, j, x) in &a.off {
            let (pi, pj) = (position[i], position[j]);
            let (r, c) = if pi > pj { (pi, pj) } else { (pj, pi) };
            values[start[r] + c - first[r]] += x;
        }

        for r in 0..n {
            let fr = first[r];
            for c in fr..r {
                let fc = first[c];
                let lo = fr.max(fc);
                let row_r = &values[start[r] + lo - fr..start[r] + c - fr];
                let row_c = &values[start[c] + lo - fc..start[c] + c - fc];
                let dot: f64 = row_r.iter().zip(row_c).map(|(x, y)| x * y).sum();
                let diag_c = values[start[c] + c - fc];
                let idx = start[r] + c - fr;
                values[idx] = (values[idx] - dot) / diag_c;
            }
            let row = &values[start[r]..start[r] + r - fr];
            let sq: f64 = row.iter().map(|x| x * x).sum();
            let idx = start[r] + r - fr;
            let d = values[idx] - sq;
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPositiveDefinite);
            }
            values[idx] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            order,
            position,
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.order.iter().map(|&v| b[v]).collect();
        for r in 0..n {
            let fr = self.first[r];
            let row = &self.values[self.start[r]..self.start[r + 1]];
            let s: f64 = row[..r - fr]
                .iter()
                .zip(&y[fr..r])
                .map(|(l, x)| l * x)
                .sum();
            y[r] = (y[r] - s) / row[r - fr];
        }
        for r in (0..n).rev() {
            let fr = self.first[r];
            let row = &self.values[self.start[r]..self.start[r + 1]];
            y[r] /= row[r - fr];
            let yr = y[r];
            for (c, l) in (fr..r).zip(&row[..r - fr]) {
                y[c] -= l * yr;
            }
        }
        (0..n).map(|v| y[self.position[v]]).collect()
    }

    /// Envelope size, i.e. the number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }
}

/// Smallest eigenvalue estimate of `a` by inverse iteration with its factor.
pub fn smallest_eigenvalue(a: &SymmetricMatrix, chol: &EnvelopeCholesky, iterations: usize) -> f64 {
    let n = a.dim();
    if n == 0 {
        return f64::INFINITY;
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut lambda = f64::INFINITY;
    for _ in 0..iterations {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        let y = chol.solve(&x);
        let ay = a.mul(&y);
        let num: f64 = y.iter().zip(&ay).map(|(u, v)| u * v).sum();
        let den: f64 = y.iter().map(|v| v * v).sum();
        let next = num / den;
        let settled = (next - lambda).abs() <= 1e-6 * next.abs();
        lambda = next;
        x = y;
        if settled {
            break;
        }
    }
    lambda
}

/// Dense Cholesky solve of a row-major `n × n` SPD matrix.
pub fn dense_cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>, NotPositiveDefinite> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return Err(NotPositiveDefinite);
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * y[k]).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let mut a = SymmetricMatrix::new(n);
        for i in 0..n {
            for j in 0..i {
                if rng.gen_bool(0.2) {
                    let w: f64 = rng.gen_range(0.1..2.0);
                    a.off.push((i, j, -w));
                    a.diag[i] += w;
                    a.diag[j] += w;
                }
            }
            a.diag[i] += rng.gen_range(0.01..1.0);
        }
        a
    }

    #[test]
    fn envelope_solve_matches_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 40, 120] {
            let a = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
            let r = a.mul(&x);
            for i in 0..n {
                assert!((r[i] - b[i]).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn dense_agrees_with_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let a = random_spd(n, &mut rng);
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = a.diag[i];
        }
        for &(i, j, v) in &a.off {
            dense[i * n + j] = v;
            dense[j * n + i] = v;
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x1 = dense_cholesky_solve(&dense, n, &b).unwrap();
        let x2 = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
        for i in 0..n {
            assert!((x1[i] - x2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn rcm_is_a_permutation_and_narrows_a_scrambled_path() {
        let n = 50;
        let perm: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        let pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (perm[i], perm[i + 1])).collect();
        let order = reverse_cuthill_mckee(n, &pairs);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let mut pos = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        let band = pairs
            .iter()
            .map(|&(i, j)| pos[i].abs_diff(pos[j]))
            .max()
            .unwrap();
        assert_eq!(band, 1);
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = SymmetricMatrix::new(2);
        a.diag = vec![1.0, 1.0];
        a.off.push((0, 1, 2.0));
        assert!(EnvelopeCholesky::factor(&a).is_err());
    }

    #[test]
    fn smallest_eigenvalue_of_diagonal() {
        let mut a = SymmetricMatrix::new(3);
        a.diag = vec![3.0, 0.5, 2.0];
        let c = EnvelopeCholesky::factor(&a).unwrap();
        assert!((smallest_eigenvalue(&a, &c, 50) - 0.5).abs() < 1e-6);
    }
}
