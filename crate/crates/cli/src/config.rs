//! Experiment settings from a TOML file and command-line flags.
//!
//! Flags override file values. Generator parameters live in the `[domain]` table.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainOptions {
    /// Generator: grid, file, rn-radial, log-polar or strip.
    #[arg(long = "domain")]
    pub generator: Option<String>,
    /// Dimension of the model space.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of exhaustion levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Step ratio of graded radial grids.
    #[arg(long)]
    pub growth: Option<f64>,
    /// First step of graded grids in log coordinates.
    #[arg(long)]
    pub first: Option<f64>,
    /// Angular resolution of log-polar families.
    #[arg(long)]
    pub rays: Option<usize>,
    /// Half width of a grid box.
    #[arg(long)]
    pub extent: Option<f64>,
    /// Lattice spacing of a grid.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Grid shape: box or ball.
    #[arg(long)]
    pub shape: Option<String>,
    /// Inner end of radial families: interior or boundary.
    #[arg(long)]
    pub inner: Option<String>,
    /// Strip profile exponent.
    #[arg(long)]
    pub q: Option<f64>,
    /// Strip width constant.
    #[arg(long)]
    pub width: Option<f64>,
    /// Strip columns per unit of log radius.
    #[arg(long)]
    pub columns: Option<usize>,
    /// Graph text file for the file generator.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// TOML experiment file.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Boundary data: linear, radial, constant, random, cosine or green.
    #[arg(long)]
    pub data: Option<String>,
    /// Obstacle: bump, random or none.
    #[arg(long)]
    pub obstacle: Option<String>,
    /// Height of the bump obstacle or value of constant data.
    #[arg(long)]
    pub height: Option<f64>,
    /// Radius of the bump obstacle or of the capacity set.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Include the point at infinity in family capacities.
    #[arg(long)]
    pub with_infinity: Option<bool>,
    /// Declared boundary value at infinity (`inf` and `-inf` allowed).
    #[arg(long, allow_hyphen_values = true)]
    pub at_infinity: Option<f64>,
    /// Number of barrier indices in Perron runs.
    #[arg(long)]
    pub max_index: Option<usize>,
    /// Perron method: auto, barrier or rim-dirichlet.
    #[arg(long)]
    pub method: Option<String>,
    /// Closed-form comparison: radial, log-cutoff or none.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Property suite for verify.
    #[arg(long)]
    pub suite: Option<String>,
    /// Number of randomized cases.
    #[arg(long)]
    pub cases: Option<usize>,
    #[command(flatten)]
    #[serde(default)]
    pub domain: DomainOptions,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Options {
    /// Flags, then the file named by `--config`.
    pub fn resolve(mut self) -> Result<Options, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = load(&path)?;
        overlay!(self, file, p, tol, seed, out, data, obstacle, height, radius, with_infinity, at_infinity,
            max_index, method, oracle, suite, cases);
        overlay!(self.domain, file.domain, generator, n, levels, growth, first, rays, extent, spacing, shape,
            inner, q, width, columns);
        if self.domain.graph.is_none() {
            // relative graph paths are taken from the config file's directory
            self.domain.graph = file.domain.graph.map(|g| match path.parent() {
                Some(dir) if g.is_relative() => dir.join(g),
                _ => g,
            });
        }
        Ok(self)
    }
}

fn load(path: &Path) -> Result<Options, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Validation(format!("malformed config {}: {e}", path.display())))
}

/// Validated settings shared by all commands.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub p: f64,
    pub tol: f64,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(flatten)]
    pub opts: Options,
}

pub fn validate(opts: Options, default_p: f64) -> Result<Settings, Failure> {
    let p = opts.p.unwrap_or(default_p);
    if !(p.is_finite() && p > 1.0) {
        return Err(Failure::Validation("p must exceed 1".into()));
    }
    let tol = opts.tol.unwrap_or(1e-10);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Failure::Validation("tol must be positive".into()));
    }
    for (name, x) in [
        ("growth", opts.domain.growth),
        ("first", opts.domain.first),
        ("extent", opts.domain.extent),
        ("spacing", opts.domain.spacing),
        ("width", opts.domain.width),
        ("radius", opts.radius),
    ] {
        if let Some(x) = x {
            if !(x.is_finite() && x > 0.0) {
                return Err(Failure::Validation(format!("{name} must be positive")));
            }
        }
    }
    if opts.at_infinity.is_some_and(f64::is_nan) {
        return Err(Failure::Validation("at-infinity must not be NaN".into()));
    }
    Ok(Settings {
        p,
        tol,
        seed: opts.seed.unwrap_or(0),
        out: opts.out.clone().unwrap_or_else(|| PathBuf::from("potlib-out")),
        opts,
    })
}
