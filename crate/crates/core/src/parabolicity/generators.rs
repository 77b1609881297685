//! Exhaustions of unbounded model domains.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space_graph::{
    surface_constant, DomainFamily, Edge, GraphSpace, Level, RadialGeometry, Subdomain, VertexSet,
};

/// What the innermost node of a radial family represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerEnd {
    /// Part of the domain (the family exhausts `R^n` or the full cylinder end).
    Interior,
    /// Dirichlet boundary of an exterior domain.
    Boundary,
}

/// Node positions from `0` through every stop, with steps starting at `first` and
/// growing by `growth`; every stop is a node.
pub fn graded_positions(stops: &[f64], first: f64, growth: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    if !(first > 0.0 && growth >= 1.0) {
        return Err(Error::Parameter("grading needs first > 0 and growth ≥ 1".into()));
    }
    if stops.is_empty() || stops.windows(2).any(|w| w[1] <= w[0]) || stops[0] <= 0.0 {
        return Err(Error::Parameter("stops must be positive and increasing".into()));
    }
    let mut pos = vec![0.0];
    let mut idx = Vec::with_capacity(stops.len());
    let mut h = first;
    for &stop in stops {
        loop {
            let last = *pos.last().unwrap();
            if last + h >= stop || last + 1.5 * h >= stop {
                pos.push(stop);
                break;
            }
            pos.push(last + h);
            h *= growth;
        }
        idx.push(pos.len() - 1);
    }
    Ok((pos, idx))
}

fn dual_widths(pos: &[f64]) -> Vec<f64> {
    let n = pos.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 { pos[0] } else { 0.5 * (pos[i - 1] + pos[i]) };
            let hi = if i + 1 == n {
                pos[n - 1]
            } else {
                0.5 * (pos[i] + pos[i + 1])
            };
            hi - lo
        })
        .collect()
}

/// Builds nested levels over prefix graphs: level `k` keeps nodes `0..=cut[k]` of a
/// global chain of `per_node` vertices per position.
struct PrefixLevels<'a> {
    measure: &'a [f64],
    edges: &'a [Edge],
    per_node: usize,
    log_radius: &'a [f64],
    rim_radius: &'a dyn Fn(usize) -> f64,
    inner: VertexSet,
    true_boundary_nodes: usize,
}

impl PrefixLevels<'_> {
    fn build(&self, name: &str, cuts: &[usize], geometry: Option<RadialGeometry>) -> Result<DomainFamily> {
        let mut levels = Vec::with_capacity(cuts.len());
        let mut nesting = Vec::new();
        for (k, &cut) in cuts.iter().enumerate() {
            let nv = (cut + 1) * self.per_node;
            let graph = GraphSpace::new(
                self.measure[..nv].to_vec(),
                self.edges
                    .iter()
                    .filter(|e| e.a < nv && e.b < nv)
                    .copied()
                    .collect(),
            )?;
            let tb = self.true_boundary_nodes * self.per_node;
            let rim: VertexSet = (cut * self.per_node..nv).collect();
            let interior: VertexSet = (tb..cut * self.per_node).collect();
            let boundary: VertexSet = (0..tb).chain(cut * self.per_node..nv).collect();
            let domain = Subdomain::new(Arc::new(graph), interior, boundary, true)?;
            levels.push(Level {
                domain,
                outer_rim: rim,
                inner: self.inner.clone(),
                log_radius: self.log_radius[..nv].to_vec(),
                rim_log_radius: self.log_radius[cut * self.per_node],
                rim_radius: (self.rim_radius)(cut),
            });
            if k > 0 {
                nesting.push((0..(cuts[k - 1] + 1) * self.per_node).collect());
            }
        }
        DomainFamily::new(name, levels, nesting, geometry)
    }
}

/// Rotationally symmetric reduction of `R^n` (or `R^n` minus the unit ball) to a chain of shells.
///
/// With `log_coordinates` the node coordinate is `s = log r`, steps start at `first`
/// and grow by `growth`, and `rims` are given in `s`. Otherwise radii grow
/// geometrically by the ratio `growth` from `r = 1` and `rims` are radii.
/// Edge weights are exact shell measures of the energy density.
pub fn radial_shell_family(
    n: usize,
    p: f64,
    rims: &[f64],
    first: f64,
    growth: f64,
    log_coordinates: bool,
    inner: InnerEnd,
) -> Result<DomainFamily> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    let c = surface_constant(n);
    let nf = n as f64;
    let (coord, cuts) = if log_coordinates {
        graded_positions(rims, first, growth)?
    } else {
        if !(growth > 1.0) {
            return Err(Error::Parameter("radius ratio must exceed 1".into()));
        }
        let logs: Vec<f64> = rims
            .iter()
            .map(|&r| {
                if r > 1.0 {
                    Ok(r.ln())
                } else {
                    Err(Error::Parameter("rim radii must exceed 1".into()))
                }
            })
            .collect::<Result<_>>()?;
        let step = growth.ln();
        graded_positions(&logs, step, 1.0)?
    };
    let m = coord.len();
    let mut edges = Vec::with_capacity(m - 1);
    let (measure, log_radius): (Vec<f64>, Vec<f64>) = if log_coordinates {
        let dual = dual_widths(&coord);
        for i in 0..m - 1 {
            let ds = coord[i + 1] - coord[i];
            let w = if (nf - p).abs() < 1e-12 {
                c * ds
            } else {
                let a = nf - p;
                c * ((a * coord[i + 1]).exp() - (a * coord[i]).exp()) / a
            };
            edges.push(Edge::new(i, i + 1, ds, w));
        }
        (dual.iter().map(|d| c * d).collect(), coord.clone())
    } else {
        let r: Vec<f64> = coord.iter().map(|s| s.exp()).collect();
        for i in 0..m - 1 {
            let w = c * (r[i + 1].powf(nf) - r[i].powf(nf)) / nf;
            edges.push(Edge::new(i, i + 1, r[i + 1] - r[i], w));
        }
        let mass = (0..m)
            .map(|i| {
                let lo = match (i, inner) {
                    (0, InnerEnd::Interior) => 0.0,
                    (0, InnerEnd::Boundary) => r[0],
                    _ => 0.5 * (r[i - 1] + r[i]),
                };
                let hi = if i + 1 == m { r[i] } else { 0.5 * (r[i] + r[i + 1]) };
                c * (hi.powf(nf) - lo.powf(nf)) / nf
            })
            .collect();
        (mass, coord.clone())
    };
    let (inner_set, tb) = match inner {
        InnerEnd::Interior => ([0].into_iter().collect(), 0),
        InnerEnd::Boundary => ([1].into_iter().collect(), 1),
    };
    if cuts[0] <= tb + usize::from(inner == InnerEnd::Boundary) {
        return Err(Error::Parameter("first rim is too close to the inner end".into()));
    }
    let rim_radius = |cut: usize| {
        if log_coordinates {
            coord[cut]
        } else {
            coord[cut].exp()
        }
    };
    let geometry = if log_coordinates && (nf - p).abs() < 1e-12 {
        Some(RadialGeometry::Cylinder { circumference: c })
    } else {
        Some(RadialGeometry::Euclidean { n })
    };
    PrefixLevels {
        measure: &measure,
        edges: &edges,
        per_node: 1,
        log_radius: &log_radius,
        rim_radius: &rim_radius,
        inner: inner_set,
        true_boundary_nodes: tb,
    }
    .build(&format!("radial-shell n={n}"), &cuts, geometry)
}

/// Half cylinder `[0, ∞) × S^1` with `rays` vertices per ring, conformal to the
/// plane (minus the unit disk) through `s = log |x|`.
///
/// Rings are graded in `s` from spacing `first` by `growth`; `rims` are axial positions.
pub fn log_polar_family(
    rays: usize,
    rims: &[f64],
    first: f64,
    growth: f64,
    inner: InnerEnd,
) -> Result<DomainFamily> {
    if rays < 3 {
        return Err(Error::Parameter("need at least three rays".into()));
    }
    let (s, cuts) = graded_positions(rims, first, growth)?;
    let rings = s.len();
    let dtheta = 2.0 * PI / rays as f64;
    let dual = dual_widths(&s);
    let id = |i: usize, j: usize| i * rays + (j % rays);
    let mut measure = Vec::with_capacity(rings * rays);
    let mut log_radius = Vec::with_capacity(rings * rays);
    let mut edges = Vec::new();
    for i in 0..rings {
        for j in 0..rays {
            measure.push(dtheta * dual[i]);
            log_radius.push(s[i]);
            edges.push(Edge::new(id(i, j), id(i, j + 1), dtheta, dtheta * dual[i]));
            if i + 1 < rings {
                let ds = s[i + 1] - s[i];
                edges.push(Edge::new(id(i, j), id(i + 1, j), ds, dtheta * ds));
            }
        }
    }
    let (inner_set, tb) = match inner {
        InnerEnd::Interior => ((0..rays).collect(), 0),
        InnerEnd::Boundary => ((rays..2 * rays).collect(), 1),
    };
    if cuts[0] <= tb + 1 {
        return Err(Error::Parameter("first rim is too close to the inner end".into()));
    }
    let rim_radius = |cut: usize| s[cut];
    PrefixLevels {
        measure: &measure,
        edges: &edges,
        per_node: rays,
        log_radius: &log_radius,
        rim_radius: &rim_radius,
        inner: inner_set,
        true_boundary_nodes: tb,
    }
    .build(
        &format!("log-polar rays={rays}"),
        &cuts,
        Some(RadialGeometry::Cylinder {
            circumference: 2.0 * PI,
        }),
    )
}

/// Polar grid in the plane with rings `r_i = R e^{(i − m)/m}` for `i = 0..=m(e + 1)`,
/// reaching radius `R e^{e}`.
///
/// Radial edges carry `w = r_mid Δθ Δr`, angular edges `w = r_i Δθ` times the
/// dual radial width; masses are dual cell areas. The last ring is the rim.
pub fn polar_grid(rays: usize, rings_per_unit: usize, radius: f64, extent: usize) -> Result<Level> {
    if rays < 3 || rings_per_unit == 0 || !(radius > 0.0) {
        return Err(Error::Parameter("invalid polar grid parameters".into()));
    }
    let m = rings_per_unit;
    let count = m * (extent + 1) + 1;
    let r: Vec<f64> = (0..count)
        .map(|i| radius * ((i as f64 - m as f64) / m as f64).exp())
        .collect();
    let dtheta = 2.0 * PI / rays as f64;
    let id = |i: usize, j: usize| i * rays + (j % rays);
    let mut measure = Vec::with_capacity(count * rays);
    let mut log_radius = Vec::with_capacity(count * rays);
    let mut edges = Vec::new();
    for i in 0..count {
        let lo = if i == 0 { r[0] } else { 0.5 * (r[i - 1] + r[i]) };
        let hi = if i + 1 == count { r[i] } else { 0.5 * (r[i] + r[i + 1]) };
        let dual = hi - lo;
        for j in 0..rays {
            measure.push(r[i] * dtheta * dual);
            log_radius.push(r[i].ln());
            edges.push(Edge::new(id(i, j), id(i, j + 1), r[i] * dtheta, r[i] * dtheta * dual));
            if i + 1 < count {
                let dr = r[i + 1] - r[i];
                let mid = 0.5 * (r[i] + r[i + 1]);
                edges.push(Edge::new(id(i, j), id(i + 1, j), dr, mid * dtheta * dr));
            }
        }
    }
    let n = count * rays;
    let graph = Arc::new(GraphSpace::new(measure, edges)?);
    let rim: VertexSet = ((count - 1) * rays..n).collect();
    let interior: VertexSet = (0..(count - 1) * rays).collect();
    let domain = Subdomain::new(graph, interior, rim.clone(), true)?;
    let inner = (0..(m + 1) * rays).collect();
    Ok(Level {
        domain,
        outer_rim: rim,
        inner,
        rim_log_radius: r[count - 1].ln(),
        rim_radius: r[count - 1],
        log_radius,
    })
}

/// Resolution of the strip generator.
#[derive(Debug, Clone, PartialEq)]
pub struct StripResolution {
    /// Vertices across the strip.
    pub rows: usize,
    /// Columns per unit of `log |x̃|`.
    pub columns_per_unit: usize,
    /// Rim positions `|x̃|` of the levels.
    pub rims: Vec<f64>,
}

/// Domain `{(x', x̃) : 0 < x' < f(|x̃|)}` with `f(r) = C max(r, 1)^q`, reduced
/// radially in `x̃ ∈ R^{n−1}`.
///
/// Columns sit at geometrically spaced `|x̃| ≥ 1`; the column at `|x̃| = 1`
/// stands for the compact set `{|x̃| ≤ 1}`. The walls carry no boundary condition.
pub fn strip_domain_generator(
    n: usize,
    q: f64,
    c: f64,
    res: &StripResolution,
) -> Result<DomainFamily> {
    if q >= 1.0 {
        return Err(Error::Parameter(format!("strip exponent q = {q} must be below 1")));
    }
    if n < 2 {
        return Err(Error::Parameter("strip domains need n ≥ 2".into()));
    }
    if !(c > 0.0) || res.rows == 0 || res.columns_per_unit == 0 {
        return Err(Error::Parameter("invalid strip parameters".into()));
    }
    let logs = res
        .rims
        .iter()
        .map(|&r| {
            if r > 1.0 {
                Ok(r.ln())
            } else {
                Err(Error::Parameter("strip rims must exceed 1".into()))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let (s, cuts) = graded_positions(&logs, 1.0 / res.columns_per_unit as f64, 1.0)?;
    let r: Vec<f64> = s.iter().map(|x| x.exp()).collect();
    let cols = r.len();
    let m = res.rows;
    let sigma_const = surface_constant(n - 1);
    let sigma = |x: f64| sigma_const * x.powi(n as i32 - 2);
    let height = |x: f64| c * x.max(1.0).powf(q);
    let dual = dual_widths(&r);
    let id = |i: usize, k: usize| i * m + k;
    let mut measure = Vec::with_capacity(cols * m);
    let mut log_radius = Vec::with_capacity(cols * m);
    let mut edges = Vec::new();
    for i in 0..cols {
        let t = height(r[i]) / m as f64;
        for k in 0..m {
            measure.push(dual[i] * t * sigma(r[i]));
            log_radius.push(s[i]);
            if k + 1 < m {
                edges.push(Edge::new(id(i, k), id(i, k + 1), t, t * dual[i] * sigma(r[i])));
            }
            if i + 1 < cols {
                let dr = r[i + 1] - r[i];
                let mid = 0.5 * (r[i] + r[i + 1]);
                let tm = height(mid) / m as f64;
                edges.push(Edge::new(id(i, k), id(i + 1, k), dr, dr * tm * sigma(mid)));
            }
        }
    }
    let rim_radius = |cut: usize| r[cut];
    PrefixLevels {
        measure: &measure,
        edges: &edges,
        per_node: m,
        log_radius: &log_radius,
        rim_radius: &rim_radius,
        inner: (0..m).collect(),
        true_boundary_nodes: 0,
    }
    .build(&format!("strip n={n} q={q}"), &cuts, None)
}
