use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GraphSpace, Subdomain, VertexId, VertexSet};
use crate::error::{Error, Result};

/// Geometry behind a family's radial coordinate, used for analytic witness energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadialGeometry {
    /// Euclidean `R^n`; the level coordinate is `log |x|`.
    Euclidean { n: usize },
    /// Flat cylinder `R × S^1`; the level coordinate is the axial position.
    Cylinder { circumference: f64 },
}

impl RadialGeometry {
    /// Continuum energy of the cutoff `min{1, (1 - (s - a)/J)_+}` in the level coordinate `s`,
    /// starting at `s = a`.
    pub fn log_cutoff_energy(&self, a: f64, span: f64, p: f64) -> f64 {
        match *self {
            RadialGeometry::Euclidean { n } => {
                let c = surface_constant(n);
                let n = n as f64;
                if (p - n).abs() < 1e-12 {
                    c * span.powf(1.0 - p)
                } else {
                    let lead = c * ((n - p) * a).exp() * span.powf(-p) / (n - p);
                    lead * (((n - p) * span).exp() - 1.0)
                }
            }
            RadialGeometry::Cylinder { circumference } => circumference * span.powf(1.0 - p),
        }
    }
}

/// Surface measure of the unit sphere in `R^n` (`2`, `2π`, `4π`, ...).
pub fn surface_constant(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * surface_constant(n - 2) / (n as f64 - 2.0),
    }
}

/// One truncation of an unbounded domain.
///
/// `domain.boundary()` is the union of the true boundary and the outer rim.
#[derive(Debug, Clone)]
pub struct Level {
    pub domain: Subdomain,
    pub outer_rim: VertexSet,
    /// Reference compact set `K` in level coordinates.
    pub inner: VertexSet,
    /// Radial coordinate per vertex (`log |x|` or the axial position).
    pub log_radius: Vec<f64>,
    /// Radial coordinate of the rim.
    pub rim_log_radius: f64,
    /// Euclidean radius of the rim reported in tables.
    pub rim_radius: f64,
}

impl Level {
    pub fn graph(&self) -> &GraphSpace {
        self.domain.graph()
    }

    pub fn graph_arc(&self) -> &Arc<GraphSpace> {
        self.domain.graph_arc()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph().vertex_count()
    }

    pub fn true_boundary(&self) -> VertexSet {
        self.domain.boundary().difference(&self.outer_rim)
    }
}

/// Increasing exhaustion of an unbounded domain by finite truncations.
#[derive(Debug, Clone)]
pub struct DomainFamily {
    name: String,
    levels: Vec<Level>,
    nesting: Vec<Vec<VertexId>>,
    geometry: Option<RadialGeometry>,
}

impl DomainFamily {
    /// `nesting[k][v]` is the image of vertex `v` of level `k` in level `k + 1`.
    pub fn new(
        name: impl Into<String>,
        levels: Vec<Level>,
        nesting: Vec<Vec<VertexId>>,
        geometry: Option<RadialGeometry>,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Parameter("a family needs at least one level".into()));
        }
        if nesting.len() + 1 != levels.len() {
            return Err(Error::Parameter(
                "need exactly one nesting map between consecutive levels".into(),
            ));
        }
        for (k, level) in levels.iter().enumerate() {
            if !level.outer_rim.is_subset(level.domain.boundary()) {
                return Err(Error::InvalidSubdomain(format!(
                    "level {k}: outer rim is not part of the boundary"
                )));
            }
            if !level.inner.is_subset(level.domain.interior()) {
                return Err(Error::InvalidSubdomain(format!(
                    "level {k}: reference set is not interior"
                )));
            }
            if level.log_radius.len() != level.vertex_count() {
                return Err(Error::Parameter(format!(
                    "level {k}: radial coordinate has wrong length"
                )));
            }
        }
        for (k, map) in nesting.iter().enumerate() {
            let (lo, hi) = (&levels[k], &levels[k + 1]);
            if map.len() != lo.vertex_count() {
                return Err(Error::Parameter(format!("nesting map {k} has wrong length")));
            }
            let mut hit = vec![false; hi.vertex_count()];
            for &t in map {
                if t >= hit.len() || hit[t] {
                    return Err(Error::Parameter(format!("nesting map {k} is not injective")));
                }
                hit[t] = true;
            }
            if lo.domain.interior().iter().any(|v| !hi.domain.is_interior(map[v])) {
                return Err(Error::InvalidSubdomain(format!(
                    "interior of level {k} does not map into the interior of level {}",
                    k + 1
                )));
            }
            let hi_true = hi.true_boundary();
            if lo.outer_rim.iter().any(|v| hi_true.contains(map[v])) {
                return Err(Error::InvalidSubdomain(format!(
                    "rim of level {k} meets the true boundary of level {}",
                    k + 1
                )));
            }
        }
        Ok(DomainFamily {
            name: name.into(),
            levels,
            nesting,
            geometry,
        })
    }

    /// Single-level family for a bounded domain (no point at infinity).
    pub fn finite(domain: Subdomain) -> Self {
        let n = domain.graph().vertex_count();
        let inner = domain.interior().clone();
        DomainFamily {
            name: "finite".into(),
            levels: vec![Level {
                domain,
                outer_rim: VertexSet::new(),
                inner,
                log_radius: vec![0.0; n],
                rim_log_radius: 0.0,
                rim_radius: 0.0,
            }],
            nesting: Vec::new(),
            geometry: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn last(&self) -> &Level {
        self.levels.last().expect("non-empty family")
    }

    pub fn geometry(&self) -> Option<RadialGeometry> {
        self.geometry
    }

    pub fn has_infinity(&self) -> bool {
        self.levels[0].domain.has_infinity()
    }

    /// Map from level `from` vertices into level `to >= from`.
    pub fn embedding(&self, from: usize, to: usize) -> Vec<VertexId> {
        assert!(from <= to && to < self.levels.len());
        let mut map: Vec<VertexId> = (0..self.levels[from].vertex_count()).collect();
        for k in from..to {
            for t in map.iter_mut() {
                *t = self.nesting[k][*t];
            }
        }
        map
    }

    /// Keeps the first `count` levels.
    pub fn truncated(&self, count: usize) -> DomainFamily {
        let count = count.clamp(1, self.levels.len());
        DomainFamily {
            name: self.name.clone(),
            levels: self.levels[..count].to_vec(),
            nesting: self.nesting[..count - 1].to_vec(),
            geometry: self.geometry,
        }
    }
}
