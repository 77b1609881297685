//! Discrete metric measure spaces.
//!
//! A [`GraphSpace`] stands in for a metric measure space: vertices carry a
//! positive mass, edges carry a length (the metric is the shortest-path
//! distance over lengths) and a weight (the measure used by energy integrals).
//! Functions live on vertices ([`ScalarField`]), gradients live on edges
//! ([`EdgeField`]), and curves are replaced by vertex paths ([`PathFamily`]).

mod family;
mod grid;
pub mod io;
mod modulus;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use family::{surface_constant, DomainFamily, Level, RadialGeometry};
pub use grid::{build_grid, Grid};
pub use modulus::{p_modulus, ModulusResult};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Exponent `p` of the energy, always strictly greater than one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 1.0 {
            Ok(Exponent(p))
        } else {
            Err(Error::Parameter("p must exceed 1".into()))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Hölder conjugate `p / (p - 1)`.
    pub fn conjugate(self) -> f64 {
        self.0 / (self.0 - 1.0)
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Exponent::new(p)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub length: f64,
    pub weight: f64,
}

impl Edge {
    pub fn new(a: VertexId, b: VertexId, length: f64, weight: f64) -> Self {
        Edge {
            a,
            b,
            length,
            weight,
        }
    }

    /// The endpoint opposite to `v`.
    #[inline]
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

/// Finite weighted graph with positive vertex masses, edge lengths and edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpace {
    measure: Vec<f64>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(VertexId, EdgeId)>>,
}

impl GraphSpace {
    pub fn new(measure: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        let n = measure.len();
        for (v, &m) in measure.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "vertex {v} has non-positive or non-finite measure {m}"
                )));
            }
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {id} references a missing vertex"
                )));
            }
            if e.a == e.b {
                return Err(Error::InvalidGraph(format!("edge {id} is a self-loop")));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge {id} has invalid length {}",
                    e.length
                )));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge {id} has invalid weight {}",
                    e.weight
                )));
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge between {} and {}",
                    e.a, e.b
                )));
            }
            adjacency[e.a].push((e.b, id));
            adjacency[e.b].push((e.a, id));
        }
        Ok(GraphSpace {
            measure,
            edges,
            adjacency,
        })
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.measure.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn measure(&self, v: VertexId) -> f64 {
        self.measure[v]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    #[inline]
    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` as `(neighbor, edge id)` pairs.
    #[inline]
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adjacency[v]
    }

    pub fn find_edge(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, e)| *e)
    }

    /// `w(e) / ℓ(e)^p`, the coefficient of `|Δu|^p` in the energy.
    #[inline]
    pub fn conductance(&self, e: EdgeId, p: Exponent) -> f64 {
        let edge = &self.edges[e];
        edge.weight / edge.length.powf(p.get())
    }

    /// Shortest-path distances over edge lengths from a set of sources.
    pub fn distances_from(&self, sources: &[VertexId]) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, VertexId);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
            }
        }

        let mut dist = vec![f64::INFINITY; self.vertex_count()];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(Item(0.0, s));
        }
        while let Some(Item(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(n, e) in &self.adjacency[v] {
                let nd = d + self.edges[e].length;
                if nd < dist[n] {
                    dist[n] = nd;
                    heap.push(Item(nd, n));
                }
            }
        }
        dist
    }

    /// Connected components of the subgraph induced by `mask`, as lists of vertices.
    pub fn components(&self, mask: &[bool]) -> Vec<Vec<VertexId>> {
        let mut label = vec![usize::MAX; self.vertex_count()];
        let mut out = Vec::new();
        for start in 0..self.vertex_count() {
            if !mask[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &(n, _) in &self.adjacency[v] {
                    if mask[n] && label[n] == usize::MAX {
                        label[n] = id;
                        comp.push(n);
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

/// Sorted set of vertex ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexSet(Vec<VertexId>);

impl VertexSet {
    pub fn new() -> Self {
        VertexSet(Vec::new())
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        VertexSet(
            mask.iter()
                .enumerate()
                .filter_map(|(v, &m)| m.then_some(v))
                .collect(),
        )
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.0
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &v in &self.0 {
            if v < n {
                m[v] = true;
            }
        }
        m
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        self.iter().filter(|&v| other.contains(v)).collect()
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        self.iter().filter(|&v| !other.contains(v)).collect()
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }

    pub fn max(&self) -> Option<VertexId> {
        self.0.last().copied()
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        let mut v: Vec<VertexId> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VertexSet(v)
    }
}

impl From<Vec<VertexId>> for VertexSet {
    fn from(v: Vec<VertexId>) -> Self {
        v.into_iter().collect()
    }
}

/// Extended-real function on the vertices of a graph.
///
/// `±∞` are ordinary values; `NaN` is rejected at construction.
///
/// Serializes as a map from vertex id to value, with infinities as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    finite_support_hint: Option<VertexSet>,
}

impl Serialize for ScalarField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.values.len()))?;
        for (v, x) in self.values.iter().enumerate() {
            map.serialize_entry(&v.to_string(), &crate::report::ExtReal(*x))?;
        }
        map.end()
    }
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().position(|x| x.is_nan()) {
            return Err(Error::Parameter(format!("field value at vertex {v} is NaN")));
        }
        Ok(ScalarField {
            values,
            finite_support_hint: None,
        })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        assert!(!c.is_nan());
        ScalarField {
            values: vec![c; n],
            finite_support_hint: None,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn from_fn(n: usize, f: impl FnMut(VertexId) -> f64) -> Self {
        let values: Vec<f64> = (0..n).map(f).collect();
        assert!(values.iter().all(|x| !x.is_nan()), "field value is NaN");
        ScalarField {
            values,
            finite_support_hint: None,
        }
    }

    pub fn with_support_hint(mut self, hint: VertexSet) -> Self {
        self.finite_support_hint = Some(hint);
        self
    }

    pub fn support_hint(&self) -> Option<&VertexSet> {
        self.finite_support_hint.as_ref()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, v: VertexId) -> f64 {
        self.values[v]
    }

    pub fn set(&mut self, v: VertexId, x: f64) {
        assert!(!x.is_nan());
        self.values[v] = x;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ScalarField {
        ScalarField::from_fn(self.len(), |v| f(self.values[v]))
    }

    pub fn zip_with(&self, other: &ScalarField, mut f: impl FnMut(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.len(), other.len());
        ScalarField::from_fn(self.len(), |v| f(self.values[v], other.values[v]))
    }

    /// Largest value of `self - other` over `set`; `-∞` for an empty set.
    pub fn max_excess_over(&self, other: &ScalarField, set: &VertexSet) -> f64 {
        set.iter()
            .map(|v| self.values[v] - other.values[v])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sup-norm distance on `set`.
    pub fn sup_distance(&self, other: &ScalarField, set: &VertexSet) -> f64 {
        set.iter()
            .map(|v| (self.values[v] - other.values[v]).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<VertexId> for ScalarField {
    type Output = f64;
    fn index(&self, v: VertexId) -> &f64 {
        &self.values[v]
    }
}

/// Nonnegative function on edges (gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField(Vec<f64>);

impl EdgeField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(e) = values.iter().position(|x| x.is_nan() || *x < 0.0) {
            return Err(Error::Parameter(format!(
                "edge field value at edge {e} is negative or NaN"
            )));
        }
        Ok(EdgeField(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn get(&self, e: EdgeId) -> f64 {
        self.0[e]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Index<EdgeId> for EdgeField {
    type Output = f64;
    fn index(&self, e: EdgeId) -> &f64 {
        &self.0[e]
    }
}

/// Finite family of simple vertex paths, each with at least one edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathFamily {
    paths: Vec<Vec<VertexId>>,
    edges: Vec<Vec<EdgeId>>,
}

impl PathFamily {
    pub fn new(graph: &GraphSpace, paths: Vec<Vec<VertexId>>) -> Result<Self> {
        let mut edges = Vec::with_capacity(paths.len());
        for (i, path) in paths.iter().enumerate() {
            if path.len() < 2 {
                return Err(Error::Parameter(format!("path {i} has no edge")));
            }
            let distinct: HashSet<_> = path.iter().collect();
            if distinct.len() != path.len() {
                return Err(Error::Parameter(format!("path {i} is not simple")));
            }
            let mut ids = Vec::with_capacity(path.len() - 1);
            for w in path.windows(2) {
                let e = graph.find_edge(w[0], w[1]).ok_or_else(|| {
                    Error::Parameter(format!("path {i}: {} and {} are not adjacent", w[0], w[1]))
                })?;
                ids.push(e);
            }
            edges.push(ids);
        }
        Ok(PathFamily { paths, edges })
    }

    pub fn empty() -> Self {
        PathFamily::default()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[Vec<VertexId>] {
        &self.paths
    }

    /// Edge ids traversed by path `i`.
    pub fn path_edges(&self, i: usize) -> &[EdgeId] {
        &self.edges[i]
    }
}

/// Open subset of a graph with its boundary.
#[derive(Debug, Clone)]
pub struct Subdomain {
    graph: Arc<GraphSpace>,
    interior: VertexSet,
    boundary: VertexSet,
    interior_mask: Vec<bool>,
    boundary_mask: Vec<bool>,
    has_infinity: bool,
}

impl Subdomain {
    pub fn new(
        graph: Arc<GraphSpace>,
        interior: VertexSet,
        boundary: VertexSet,
        has_infinity: bool,
    ) -> Result<Self> {
        let n = graph.vertex_count();
        if interior.max().is_some_and(|v| v >= n) || boundary.max().is_some_and(|v| v >= n) {
            return Err(Error::InvalidSubdomain("vertex id out of range".into()));
        }
        let interior_mask = interior.mask(n);
        let boundary_mask = boundary.mask(n);
        if let Some(v) = interior.iter().find(|&v| boundary_mask[v]) {
            return Err(Error::InvalidSubdomain(format!(
                "vertex {v} is both interior and boundary"
            )));
        }
        for v in interior.iter() {
            for &(nb, _) in graph.neighbors(v) {
                if !interior_mask[nb] && !boundary_mask[nb] {
                    return Err(Error::InvalidSubdomain(format!(
                        "edge from interior vertex {v} leaves to {nb}, which is not a boundary vertex"
                    )));
                }
            }
        }
        if boundary.is_empty() && interior.len() != n {
            return Err(Error::InvalidSubdomain(
                "boundary is empty although the domain is not the whole graph".into(),
            ));
        }
        Ok(Subdomain {
            graph,
            interior,
            boundary,
            interior_mask,
            boundary_mask,
            has_infinity,
        })
    }

    /// Subdomain whose boundary is every outside vertex adjacent to `interior`.
    pub fn from_interior(graph: Arc<GraphSpace>, interior: VertexSet) -> Result<Self> {
        let mask = interior.mask(graph.vertex_count());
        let boundary: VertexSet = interior
            .iter()
            .flat_map(|v| graph.neighbors(v).iter().map(|&(n, _)| n))
            .filter(|&n| !mask[n])
            .collect();
        Subdomain::new(graph, interior, boundary, false)
    }

    pub fn graph(&self) -> &GraphSpace {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<GraphSpace> {
        &self.graph
    }

    pub fn interior(&self) -> &VertexSet {
        &self.interior
    }

    pub fn boundary(&self) -> &VertexSet {
        &self.boundary
    }

    #[inline]
    pub fn is_interior(&self, v: VertexId) -> bool {
        self.interior_mask[v]
    }

    #[inline]
    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.boundary_mask[v]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    pub fn has_infinity(&self) -> bool {
        self.has_infinity
    }

    /// `Ω ∪ ∂Ω`.
    pub fn closure(&self) -> VertexSet {
        self.interior.union(&self.boundary)
    }

    /// Components of the interior, each flagged by whether it touches the boundary.
    pub fn anchored_components(&self) -> Vec<(Vec<VertexId>, bool)> {
        self.graph
            .components(&self.interior_mask)
            .into_iter()
            .map(|comp| {
                let anchored = comp.iter().any(|&v| {
                    self.graph
                        .neighbors(v)
                        .iter()
                        .any(|&(n, _)| self.boundary_mask[n])
                });
                (comp, anchored)
            })
            .collect()
    }
}

/// Edgewise slope `|u(x) - u(y)| / ℓ(e)`, the minimal upper gradient of `u` along graph paths.
///
/// Edges touching an infinite value get `+∞`.
pub fn discrete_upper_gradient(u: &ScalarField, graph: &GraphSpace) -> EdgeField {
    EdgeField(
        graph
            .edges()
            .iter()
            .map(|e| edge_slope(u.get(e.a), u.get(e.b), e.length))
            .collect(),
    )
}

#[inline]
pub(crate) fn edge_slope(a: f64, b: f64, length: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        f64::INFINITY
    } else {
        (a - b).abs() / length
    }
}

/// `Σ w(e) g_u(e)^p` over edges with at least one endpoint in `region`.
pub fn p_energy(u: &ScalarField, graph: &GraphSpace, region: &VertexSet, p: Exponent) -> f64 {
    let mask = region.mask(graph.vertex_count());
    energy_on_mask(u.values(), graph, &mask, p)
}

pub(crate) fn energy_on_mask(u: &[f64], graph: &GraphSpace, mask: &[bool], p: Exponent) -> f64 {
    graph
        .edges()
        .iter()
        .filter(|e| mask[e.a] || mask[e.b])
        .map(|e| {
            let g = edge_slope(u[e.a], u[e.b], e.length);
            if g == 0.0 {
                0.0
            } else {
                e.weight * g.powf(p.get())
            }
        })
        .sum()
}

/// Extension by zero of `u|_Ω`.
pub fn zero_extension(u: &ScalarField, domain: &Subdomain) -> ScalarField {
    ScalarField::from_fn(u.len(), |v| if domain.is_interior(v) { u.get(v) } else { 0.0 })
}
