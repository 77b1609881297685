use std::sync::Arc;

use super::{Edge, GraphSpace, Subdomain, VertexSet};
use crate::error::{Error, Result};

/// Lattice discretization of a Euclidean region.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: Subdomain,
    pub coords: Vec<Vec<f64>>,
    pub spacing: f64,
}

impl Grid {
    pub fn graph(&self) -> &GraphSpace {
        self.domain.graph()
    }

    pub fn graph_arc(&self) -> Arc<GraphSpace> {
        self.domain.graph_arc().clone()
    }
}

/// Builds the lattice graph over the points of `h·Z^n ∩ [-extent, extent]^n`
/// accepted by `include`.
///
/// Masses are `h^n`, lengths `h` and weights `h^n`. A vertex is interior when all
/// `2n` lattice neighbors are included; the remaining included points form the boundary.
pub fn build_grid(
    dimension: usize,
    extent: f64,
    spacing: f64,
    include: impl Fn(&[f64]) -> bool,
) -> Result<Grid> {
    if dimension == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Parameter("spacing must be positive".into()));
    }
    if !(extent >= spacing) {
        return Err(Error::Parameter("extent must be at least the spacing".into()));
    }
    let half = (extent / spacing + 1e-9).floor() as i64;
    let side = (2 * half + 1) as usize;
    let total = side
        .checked_pow(dimension as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| Error::Parameter("grid is too large".into()))?;

    let mut index = vec![usize::MAX; total];
    let mut coords = Vec::new();
    let mut multi = vec![0usize; dimension];
    let mut point = vec![0.0; dimension];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..dimension).rev() {
            multi[d] = rem % side;
            rem /= side;
        }
        for d in 0..dimension {
            point[d] = (multi[d] as i64 - half) as f64 * spacing;
        }
        if include(&point) {
            index[flat] = coords.len();
            coords.push(point.clone());
        }
    }
    if coords.is_empty() {
        return Err(Error::DegenerateDomain("no lattice point is included".into()));
    }

    let n = coords.len();
    let vol = spacing.powi(dimension as i32);
    let mut edges = Vec::new();
    let mut full_degree = vec![0usize; n];
    let mut stride = vec![1usize; dimension];
    for d in (0..dimension.saturating_sub(1)).rev() {
        stride[d] = stride[d + 1] * side;
    }
    for flat in 0..total {
        let v = index[flat];
        if v == usize::MAX {
            continue;
        }
        for d in 0..dimension {
            let pos = (flat / stride[d]) % side;
            if pos + 1 < side {
                let u = index[flat + stride[d]];
                if u != usize::MAX {
                    edges.push(Edge::new(v, u, spacing, vol));
                    full_degree[v] += 1;
                    full_degree[u] += 1;
                }
            }
        }
    }
    let interior: VertexSet = (0..n).filter(|&v| full_degree[v] == 2 * dimension).collect();
    if interior.is_empty() {
        return Err(Error::DegenerateDomain("grid has no interior vertex".into()));
    }
    let boundary: VertexSet = (0..n).filter(|&v| full_degree[v] < 2 * dimension).collect();
    let graph = Arc::new(GraphSpace::new(vec![vol; n], edges)?);
    let domain = Subdomain::new(graph, interior, boundary, false)?;
    Ok(Grid {
        domain,
        coords,
        spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_grid() {
        let g = build_grid(1, 2.0, 1.0, |_| true).unwrap();
        assert_eq!(g.graph().vertex_count(), 5);
        assert_eq!(g.graph().edge_count(), 4);
        let interior: Vec<f64> = g.domain.interior().iter().map(|v| g.coords[v][0]).collect();
        assert_eq!(interior, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn three_by_three() {
        let g = build_grid(2, 1.0, 1.0, |_| true).unwrap();
        assert_eq!(g.graph().vertex_count(), 9);
        assert_eq!(g.domain.interior().len(), 1);
        let c = g.domain.interior().iter().next().unwrap();
        assert_eq!(g.coords[c], vec![0.0, 0.0]);
    }

    #[test]
    fn degenerate_and_invalid() {
        assert!(matches!(
            build_grid(2, 1.0, 1.0, |x| x[0] == 0.0 && x[1] == 0.0),
            Err(Error::DegenerateDomain(_))
        ));
        assert!(build_grid(2, 0.5, 1.0, |_| true).is_err());
        assert!(build_grid(2, 1.0, 0.0, |_| true).is_err());
    }
}
