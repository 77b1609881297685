use super::{EdgeField, Exponent, GraphSpace, PathFamily};
use crate::error::{Error, Result};
use crate::linalg::dense_cholesky_solve;

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusResult {
    /// Energy of the returned admissible density; within `certified_gap` of the modulus.
    pub value: f64,
    pub density: EdgeField,
    /// Primal value minus the dual lower bound.
    pub certified_gap: f64,
}

/// `p`-modulus of a path family: the least `Σ w ρ^p` over densities with `Σ_{e∈γ} ρ(e) ℓ(e) ≥ 1`.
///
/// Solved through the Lagrange dual in the path multipliers `λ ≥ 0`, whose value
/// `Σ λ − Σ_e c_e a_e^{p'}` with `a_e = ℓ_e Σ_{γ∋e} λ_γ` bounds the modulus from below.
pub fn p_modulus(family: &PathFamily, graph: &GraphSpace, p: Exponent, tol: f64) -> Result<ModulusResult> {
    if !(tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let m = graph.edge_count();
    let k = family.len();
    if k == 0 {
        return Ok(ModulusResult {
            value: 0.0,
            density: EdgeField::new(vec![0.0; m])?,
            certified_gap: 0.0,
        });
    }
    let pp = p.get();
    let q = p.conjugate();
    let coef: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| (pp - 1.0) * e.weight * (pp * e.weight).powf(-q))
        .collect();

    let loads = |lambda: &[f64]| {
        let mut a = vec![0.0; m];
        for (i, &l) in lambda.iter().enumerate() {
            for &e in family.path_edges(i) {
                a[e] += l * graph.edge(e).length;
            }
        }
        a
    };
    // negative dual, minimized over λ ≥ 0
    let neg_dual = |lambda: &[f64]| {
        let a = loads(lambda);
        let s: f64 = a.iter().zip(&coef).map(|(a, c)| c * a.powf(q)).sum();
        s - lambda.iter().sum::<f64>()
    };
    let primal = |lambda: &[f64]| -> (Vec<f64>, f64) {
        let a = loads(lambda);
        let mut rho: Vec<f64> = graph
            .edges()
            .iter()
            .zip(&a)
            .map(|(e, &a)| (a / (pp * e.weight)).powf(1.0 / (pp - 1.0)))
            .collect();
        let reach = (0..k)
            .map(|i| {
                family
                    .path_edges(i)
                    .iter()
                    .map(|&e| rho[e] * graph.edge(e).length)
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        if reach > 0.0 && reach.is_finite() {
            rho.iter_mut().for_each(|r| *r /= reach);
        } else {
            rho = vec![0.0; m];
            for i in 0..k {
                for &e in family.path_edges(i) {
                    rho[e] = 1.0 / graph.edge(e).length;
                }
            }
        }
        let value = graph
            .edges()
            .iter()
            .zip(&rho)
            .map(|(e, r)| e.weight * r.powf(pp))
            .sum();
        (rho, value)
    };

    let mut lambda = vec![1.0 / k as f64; k];
    let mut fval = neg_dual(&lambda);
    let mut best = primal(&lambda);
    let mut gap = best.1 + fval;
    for _ in 0..500 {
        if gap <= tol {
            break;
        }
        let a = loads(&lambda);
        let amax = a.iter().copied().fold(0.0, f64::max);
        let delta = 1e-8 * amax.max(f64::MIN_POSITIVE);
        let mut grad = vec![-1.0; k];
        let mut hess = vec![0.0; k * k];
        for i in 0..k {
            for &e in family.path_edges(i) {
                let l = graph.edge(e).length;
                grad[i] += coef[e] * q * a[e].powf(q - 1.0) * l;
            }
        }
        for e in 0..m {
            if coef[e] == 0.0 {
                continue;
            }
            let h = coef[e] * q * (q - 1.0) * a[e].max(delta).powf(q - 2.0);
            let users: Vec<usize> = (0..k).filter(|&i| family.path_edges(i).contains(&e)).collect();
            let l = graph.edge(e).length;
            for &i in &users {
                for &j in &users {
                    hess[i * k + j] += h * l * l;
                }
            }
        }
        let pg: f64 = (0..k)
            .map(|i| (lambda[i] - (lambda[i] - grad[i]).max(0.0)).abs())
            .fold(0.0, f64::max);
        let eps = pg.min(1e-3);
        let active: Vec<bool> = (0..k).map(|i| lambda[i] <= eps && grad[i] > 0.0).collect();
        let ids: Vec<usize> = (0..k).filter(|&i| !active[i]).collect();
        let mut dir = vec![0.0; k];
        if !ids.is_empty() {
            let f = ids.len();
            let mut sub = vec![0.0; f * f];
            for (r, &i) in ids.iter().enumerate() {
                for (c, &j) in ids.iter().enumerate() {
                    sub[r * f + c] = hess[i * k + j];
                }
                sub[r * f + r] += 1e-14 * hess[i * k + i].abs().max(1.0);
            }
            let rhs: Vec<f64> = ids.iter().map(|&i| -grad[i]).collect();
            let step = dense_cholesky_solve(&sub, f, &rhs)
                .unwrap_or_else(|_| rhs.iter().map(|r| r * 1e-3).collect());
            for (r, &i) in ids.iter().enumerate() {
                dir[i] = step[r];
            }
        }
        for i in 0..k {
            if active[i] {
                dir[i] = -grad[i] / hess[i * k + i].max(1e-300);
            }
        }
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..k).map(|i| (lambda[i] + alpha * dir[i]).max(0.0)).collect();
            let dec: f64 = (0..k).map(|i| grad[i] * (trial[i] - lambda[i])).sum();
            let ft = neg_dual(&trial);
            if ft <= fval + 1e-4 * dec {
                moved = trial != lambda;
                lambda = trial;
                fval = ft;
                break;
            }
            alpha *= 0.5;
        }
        let cand = primal(&lambda);
        if cand.1 < best.1 {
            best = cand;
        }
        gap = best.1 + fval;
        if !moved {
            break;
        }
    }
    Ok(ModulusResult {
        value: best.1,
        density: EdgeField::new(best.0)?,
        certified_gap: gap.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_graph::Edge;

    fn graph() -> GraphSpace {
        GraphSpace::new(
            vec![1.0; 4],
            vec![Edge::new(0, 1, 1.0, 1.0), Edge::new(2, 3, 1.0, 1.0), Edge::new(1, 2, 1.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn empty_family_has_zero_modulus() {
        let g = graph();
        let r = p_modulus(&PathFamily::empty(), &g, Exponent::new(2.0).unwrap(), 1e-10).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn single_edge_path() {
        let g = graph();
        let fam = PathFamily::new(&g, vec![vec![0, 1]]).unwrap();
        for p in [1.5, 2.0, 4.0] {
            let r = p_modulus(&fam, &g, Exponent::new(p).unwrap(), 1e-12).unwrap();
            assert!((r.value - 1.0).abs() < 1e-10, "p={p}: {}", r.value);
        }
    }

    #[test]
    fn disjoint_paths_add() {
        let g = graph();
        let fam = PathFamily::new(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let r = p_modulus(&fam, &g, Exponent::new(2.0).unwrap(), 1e-12).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn series_path_of_two_edges() {
        // ρ ≡ 1/2 on both edges: energy 2·(1/2)^p
        let g = graph();
        let fam = PathFamily::new(&g, vec![vec![0, 1, 2]]).unwrap();
        let r = p_modulus(&fam, &g, Exponent::new(3.0).unwrap(), 1e-12).unwrap();
        assert!((r.value - 0.25).abs() < 1e-10);
    }
}
