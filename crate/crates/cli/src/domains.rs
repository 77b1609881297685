//! Domains and exhaustions named in experiment settings.

use potlib::parabolicity::{log_polar_family, radial_shell_family, strip_domain_generator, InnerEnd, StripResolution};
use potlib::space_graph::build_grid;
use potlib::space_graph::io::read_graph;
use potlib::{DomainFamily, Subdomain};

use crate::config::Settings;
use crate::Failure;

/// A bounded domain, with lattice coordinates when generated.
#[derive(Debug, Clone)]
pub struct Finite {
    pub domain: Subdomain,
    pub coords: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Radial shells in `R^n`; `log` when the coordinate is `log |x|`.
    Radial { n: usize, log: bool },
    LogPolar { rays: usize },
    Strip,
    Finite,
}

#[derive(Debug, Clone)]
pub struct Family {
    pub family: DomainFamily,
    pub shape: Shape,
    /// Lattice coordinates of single-level families.
    pub coords: Option<Vec<Vec<f64>>>,
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn inner_end(s: &Settings, default: InnerEnd) -> Result<InnerEnd, Failure> {
    match s.opts.domain.inner.as_deref() {
        None => Ok(default),
        Some("interior") => Ok(InnerEnd::Interior),
        Some("boundary") => Ok(InnerEnd::Boundary),
        Some(other) => Err(invalid(format!("unknown inner end `{other}`"))),
    }
}

fn decades(levels: usize, step: i32) -> Vec<f64> {
    (1..=levels as i32).map(|k| 10f64.powi(step * k)).collect()
}

pub fn finite(s: &Settings, default: &str) -> Result<Finite, Failure> {
    let d = &s.opts.domain;
    match d.generator.as_deref().unwrap_or(default) {
        "grid" => {
            let n = d.n.unwrap_or(2);
            let extent = d.extent.unwrap_or(4.0);
            let spacing = d.spacing.unwrap_or(0.5);
            let g = match d.shape.as_deref().unwrap_or("box") {
                "box" => build_grid(n, extent, spacing, |_| true)?,
                "ball" => build_grid(n, extent, spacing, |x| {
                    x.iter().map(|c| c * c).sum::<f64>() <= extent * extent * (1.0 + 1e-12)
                })?,
                other => return Err(invalid(format!("unknown grid shape `{other}`"))),
            };
            Ok(Finite { domain: g.domain, coords: Some(g.coords) })
        }
        "file" => {
            let path = d.graph.as_ref().ok_or_else(|| invalid("the file generator needs --graph"))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read graph {}: {e}", path.display())))?;
            let domain = read_graph(&text)?
                .subdomain()?
                .ok_or_else(|| invalid(format!("graph {} declares no interior", path.display())))?;
            Ok(Finite { domain, coords: None })
        }
        other => Err(invalid(format!("generator `{other}` does not describe a bounded domain"))),
    }
}

pub fn family(s: &Settings, default: &str, inner: InnerEnd) -> Result<Family, Failure> {
    let d = &s.opts.domain;
    let generator = d.generator.as_deref().unwrap_or(default);
    match generator {
        "grid" | "file" => {
            let f = finite(s, generator)?;
            Ok(Family { family: DomainFamily::finite(f.domain), shape: Shape::Finite, coords: f.coords })
        }
        "rn-radial" => {
            let n = d.n.unwrap_or(2);
            let levels = d.levels.unwrap_or(6);
            let log = n >= 2 && (s.p - n as f64).abs() < 1e-12;
            let (first, growth) = if log {
                (d.first.unwrap_or(0.1), d.growth.unwrap_or(1.2))
            } else {
                (d.first.unwrap_or(0.1), d.growth.unwrap_or(1.05))
            };
            let family = radial_shell_family(n, s.p, &decades(levels, 1), first, growth, log, inner_end(s, inner)?)?;
            Ok(Family { family, shape: Shape::Radial { n, log }, coords: None })
        }
        "log-polar" => {
            let rays = d.rays.unwrap_or(16);
            let levels = d.levels.unwrap_or(3);
            let family = log_polar_family(
                rays,
                &decades(levels, 1),
                d.first.unwrap_or(0.1),
                d.growth.unwrap_or(1.25),
                inner_end(s, inner)?,
            )?;
            Ok(Family { family, shape: Shape::LogPolar { rays }, coords: None })
        }
        "strip" => {
            let res = StripResolution {
                rows: 1,
                columns_per_unit: d.columns.unwrap_or(4),
                rims: decades(d.levels.unwrap_or(6), 1),
            };
            let family = strip_domain_generator(d.n.unwrap_or(2), d.q.unwrap_or(0.0), d.width.unwrap_or(1.0), &res)?;
            Ok(Family { family, shape: Shape::Strip, coords: None })
        }
        other => Err(invalid(format!("unknown generator `{other}`"))),
    }
}
