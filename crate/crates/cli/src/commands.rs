//! The experiment commands.

use clap::Subcommand;
use potlib::capacity::{bar_capacity, bar_capacity_family, check_capacity_inequality, sobolev_capacity, CapacitySpace};
use potlib::energy_obstacle::{solve_obstacle, ObstacleSpec};
use potlib::harmonic::p_harmonic_extension;
use potlib::parabolicity::{classify_parabolicity, InnerEnd, Thresholds};
use potlib::perron::{perron, BoundaryData, PerronControls, PerronMethod};
use potlib::report::cell;
use potlib::space_graph::io::write_graph;
use potlib::space_graph::RadialGeometry;
use potlib::{Exponent, ScalarField, VertexSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{validate, Options, Settings};
use crate::domains::{self, Finite, Shape};
use crate::output::{radial_table, Artifacts, PlotData};
use crate::{suites, Failure};

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// p-harmonic extension of boundary data on a bounded domain.
    Solve(Options),
    /// Obstacle problem on a bounded domain.
    Obstacle(Options),
    /// Sobolev and boundary capacities of a set, or along an exhaustion.
    Capacity(Options),
    /// Upper and lower Perron solutions along an exhaustion.
    Perron(Options),
    /// Condenser capacities along an exhaustion and a parabolicity verdict.
    Parabolicity(Options),
    /// Randomized property suite.
    Verify(Options),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Obstacle(_) => "obstacle",
            Command::Capacity(_) => "capacity",
            Command::Perron(_) => "perron",
            Command::Parabolicity(_) => "parabolicity",
            Command::Verify(_) => "verify",
        }
    }

    fn options(&self) -> &Options {
        match self {
            Command::Solve(o)
            | Command::Obstacle(o)
            | Command::Capacity(o)
            | Command::Perron(o)
            | Command::Parabolicity(o)
            | Command::Verify(o) => o,
        }
    }
}

/// Artifacts of a run and whether its checks passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub out: std::path::PathBuf,
    pub verdict: Result<(), Failure>,
}

pub fn run(cmd: &Command) -> Result<Outcome, Failure> {
    let s = validate(cmd.options().clone().resolve()?, 2.0)?;
    let p = Exponent::new(s.p)?;
    let (artifacts, verdict) = match cmd {
        Command::Solve(_) => (solve(&s, p)?, Ok(())),
        Command::Obstacle(_) => (obstacle(&s, p)?, Ok(())),
        Command::Capacity(_) => (capacity(&s, p)?, Ok(())),
        Command::Perron(_) => (perron_run(&s, p)?, Ok(())),
        Command::Parabolicity(_) => (parabolicity(&s, p)?, Ok(())),
        Command::Verify(_) => suites::verify(&s)?,
    };
    Ok(Outcome { artifacts, out: s.out.clone(), verdict })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    settings: &'a Settings,
    result: T,
}

fn envelope<T: Serialize>(command: &str, s: &Settings, result: T) -> Result<Artifacts, Failure> {
    Artifacts::new(Envelope { command, settings: s, result })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn needs_coords<'a>(f: &'a Finite, what: &str) -> Result<&'a [Vec<f64>], Failure> {
    f.coords
        .as_deref()
        .ok_or_else(|| Failure::Validation(format!("{what} needs lattice coordinates; use the grid generator")))
}

fn boundary_data(s: &Settings, f: &Finite, default: &str) -> Result<ScalarField, Failure> {
    let n = f.domain.graph().vertex_count();
    let kind = s.opts.data.as_deref().unwrap_or(if f.coords.is_some() { default } else { "random" });
    Ok(match kind {
        "linear" => {
            let c = needs_coords(f, "linear data")?;
            ScalarField::from_fn(n, |v| c[v][0])
        }
        "radial" => {
            let c = needs_coords(f, "radial data")?;
            ScalarField::from_fn(n, |v| norm(&c[v]))
        }
        "zero" => ScalarField::zeros(n),
        "constant" => ScalarField::constant(n, s.opts.height.unwrap_or(1.0)),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            ScalarField::from_fn(n, |_| rng.gen_range(-1.0..1.0))
        }
        other => return Err(Failure::Validation(format!("unknown boundary data `{other}`"))),
    })
}

fn solve(s: &Settings, p: Exponent) -> Result<Artifacts, Failure> {
    let f = domains::finite(s, "grid")?;
    let data = boundary_data(s, &f, "radial")?;
    let h = p_harmonic_extension(&f.domain, &data, p, s.tol)?;
    let mut a = envelope(
        "solve",
        s,
        json!({
            "vertices": f.domain.graph().vertex_count(),
            "interior": f.domain.interior().len(),
            "extension": h,
        }),
    )?;
    if let Some(c) = &f.coords {
        a.tables.push(radial_table(c, &h.solution));
    }
    a.files.push(("domain.graph".into(), write_graph(f.domain.graph(), Some(&f.domain))));
    Ok(a)
}

fn obstacle(s: &Settings, p: Exponent) -> Result<Artifacts, Failure> {
    let f = domains::finite(s, "grid")?;
    let n = f.domain.graph().vertex_count();
    let data = boundary_data(s, &f, "zero")?;
    let psi = match s.opts.obstacle.as_deref().unwrap_or("bump") {
        "bump" => {
            let c = needs_coords(&f, "the bump obstacle")?;
            let (height, radius) = (s.opts.height.unwrap_or(1.0), s.opts.radius.unwrap_or(1.5));
            ScalarField::from_fn(n, |v| {
                let r = norm(&c[v]) / radius;
                if r < 1.0 {
                    height * (1.0 - r * r)
                } else {
                    f64::NEG_INFINITY
                }
            })
        }
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed);
            ScalarField::from_fn(n, |_| {
                if rng.gen_bool(0.7) {
                    rng.gen_range(-0.5..1.5)
                } else {
                    f64::NEG_INFINITY
                }
            })
        }
        "none" => ScalarField::constant(n, f64::NEG_INFINITY),
        other => return Err(Failure::Validation(format!("unknown obstacle `{other}`"))),
    };
    let spec = ObstacleSpec::new(f.domain.clone(), psi, data, p)?;
    let sol = solve_obstacle(&spec, s.tol)?;
    let mut a = envelope("obstacle", s, json!({ "vertices": n, "solution": sol }))?;
    if let Some(c) = &f.coords {
        a.tables.push(radial_table(c, &sol.solution));
    }
    a.files.push(("domain.graph".into(), write_graph(f.domain.graph(), Some(&f.domain))));
    Ok(a)
}

fn capacity_table() -> PlotData {
    PlotData::new(
        "capacity.csv",
        &[
            ("level", "exhaustion level"),
            ("value", "boundary capacity of the set in the level"),
            ("gap", "certified bound on the excess of value over the exact capacity"),
        ],
    )
}

fn capacity(s: &Settings, p: Exponent) -> Result<Artifacts, Failure> {
    let generator = s.opts.domain.generator.as_deref().unwrap_or("grid");
    if matches!(generator, "grid" | "file") {
        let f = domains::finite(s, generator)?;
        let set: VertexSet = match &f.coords {
            Some(c) => {
                let r = s.opts.radius.unwrap_or(1.0);
                f.domain.interior().iter().filter(|&v| norm(&c[v]) <= r * (1.0 + 1e-12)).collect()
            }
            None => f.domain.interior().clone(),
        };
        let bar = bar_capacity(&set, &f.domain, p, s.tol)?;
        let inner = sobolev_capacity(&set, CapacitySpace::Sub(&f.domain), p, s.tol)?;
        let whole = check_capacity_inequality(&set, &f.domain, p, s.tol)?;
        let mut t = capacity_table();
        t.row_cells(vec!["0".into(), cell(bar.value), cell(bar.certified_gap)]);
        let mut a = envelope(
            "capacity",
            s,
            json!({
                "set_size": set.len(),
                "bar": { "value": bar.value, "gap": bar.certified_gap },
                "domain": { "value": inner.value, "gap": inner.certified_gap },
                "whole_graph": whole.sobolev,
                "bar_at_most_whole": whole.holds,
            }),
        )?;
        a.tables.push(t);
        return Ok(a);
    }
    let fam = domains::family(s, generator, InnerEnd::Interior)?;
    let with_infinity = s.opts.with_infinity.unwrap_or(false);
    let set = fam.family.level(0).inner.clone();
    let r = bar_capacity_family(&set, with_infinity, &fam.family, p, s.tol)?;
    let mut t = capacity_table();
    for &(k, v, g) in &r.levels {
        t.row_cells(vec![k.to_string(), cell(v), cell(g)]);
    }
    let mut a = envelope(
        "capacity",
        s,
        json!({
            "family": fam.family.name(),
            "set_size": set.len(),
            "with_infinity": with_infinity,
            "levels": r.levels,
            "limit_estimate": r.limit_estimate,
            "cauchy_gap": r.cauchy_gap,
        }),
    )?;
    a.tables.push(t);
    Ok(a)
}

fn perron_data(s: &Settings, fam: &domains::Family) -> Result<BoundaryData, Failure> {
    let at_inf = s.opts.at_infinity.unwrap_or(0.0);
    let default = match fam.shape {
        Shape::Radial { .. } => "green",
        Shape::Finite if fam.coords.is_some() => "linear",
        Shape::Finite => "random",
        _ => "cosine",
    };
    let p = s.p;
    let data = match (s.opts.data.as_deref().unwrap_or(default), fam.shape) {
        ("cosine", Shape::LogPolar { rays }) => BoundaryData::from_fn(
            &fam.family,
            |l, v| {
                let th = 2.0 * std::f64::consts::PI * (v % rays) as f64 / rays as f64;
                if l.log_radius[v] == 0.0 {
                    1.0 + th.cos()
                } else {
                    0.0
                }
            },
            at_inf,
        ),
        ("green", Shape::Radial { n, .. }) => BoundaryData::from_fn(
            &fam.family,
            |l, v| (l.log_radius[v] * (p - n as f64) / (p - 1.0)).exp(),
            at_inf,
        ),
        ("linear", Shape::Finite) if fam.coords.is_some() => {
            let c = fam.coords.as_ref().unwrap();
            BoundaryData::from_fn(&fam.family, |_, v| c[v][0], at_inf)
        }
        ("random", _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let levels = fam
                .family
                .levels()
                .iter()
                .map(|l| ScalarField::from_fn(l.vertex_count(), |_| rng.gen_range(-1.0..1.0)))
                .collect();
            BoundaryData::new(&fam.family, levels, at_inf)
        }
        (other, _) => {
            return Err(Failure::Validation(format!("data `{other}` is not available for this domain")));
        }
    };
    Ok(data?)
}

fn perron_run(s: &Settings, p: Exponent) -> Result<Artifacts, Failure> {
    let fam = domains::family(s, "log-polar", InnerEnd::Boundary)?;
    let f = perron_data(s, &fam)?;
    let method = match s.opts.method.as_deref().unwrap_or("auto") {
        "auto" => PerronMethod::Auto,
        "barrier" => PerronMethod::Barrier,
        "rim-dirichlet" => PerronMethod::RimDirichlet,
        other => return Err(Failure::Validation(format!("unknown Perron method `{other}`"))),
    };
    let controls = PerronControls {
        max_index: s.opts.max_index.unwrap_or(8),
        tol: s.tol,
        method,
        ..Default::default()
    };
    let r = perron(&fam.family, &f, p, &controls)?;
    let mut t = PlotData::new(
        "perron.csv",
        &[
            ("j", "approximation index"),
            ("level", "exhaustion level"),
            ("upper_min_rim", "least value of the upper approximation on the rim"),
            ("gap_sup", "sup of upper minus lower on the stable core"),
            ("core_size", "vertices in the stable core"),
        ],
    );
    for row in &r.rows {
        t.row_cells(vec![
            row.j.to_string(),
            row.level.to_string(),
            cell(row.upper_min_rim),
            cell(row.gap_sup),
            row.core_size.to_string(),
        ]);
    }
    let mut a = envelope("perron", s, &r)?;
    a.tables.push(t);
    Ok(a)
}

fn parabolicity(s: &Settings, p: Exponent) -> Result<Artifacts, Failure> {
    let fam = domains::family(s, "rn-radial", InnerEnd::Interior)?;
    let levels = s.opts.domain.levels.unwrap_or(fam.family.len());
    let r = classify_parabolicity(&fam.family, None, p, levels, Thresholds::default(), s.tol)?;
    let default_oracle = if matches!(fam.shape, Shape::Radial { .. }) { "radial" } else { "none" };
    let r = match (s.opts.oracle.as_deref().unwrap_or(default_oracle), fam.shape) {
        ("none", _) => r,
        ("radial", Shape::Radial { n, log: false }) => r.with_radial_oracle(n),
        ("radial", Shape::Radial { n, log: true }) => r.with_log_radial_oracle(n),
        ("log-cutoff", Shape::Radial { n, log }) => {
            let analytic = r
                .levels
                .iter()
                .map(|l| {
                    let span = if log { l.radius } else { l.radius.ln() };
                    RadialGeometry::Euclidean { n }.log_cutoff_energy(0.0, span, s.p)
                })
                .collect();
            potlib::parabolicity::ParabolicityReport { oracle_comparison: Some(analytic), ..r }
        }
        (other, _) => return Err(Failure::Validation(format!("oracle `{other}` is not available for this domain"))),
    };
    let mut t = PlotData::new(
        "parabolicity.csv",
        &[
            ("level", "exhaustion level"),
            ("radius", "rim position in the family coordinate"),
            ("capacity", "condenser capacity of the reference set"),
            ("gap", "certified bound on the excess of capacity"),
            ("analytic", "closed-form comparison value, empty without an oracle"),
        ],
    );
    for (i, l) in r.levels.iter().enumerate() {
        let analytic = r.oracle_comparison.as_ref().map_or(String::new(), |o| cell(o[i]));
        t.row_cells(vec![l.level.to_string(), cell(l.radius), cell(l.capacity), cell(l.gap), analytic]);
    }
    let mut a = envelope("parabolicity", s, json!({ "verdict": r.verdict.as_str(), "report": r }))?;
    a.tables.push(t);
    Ok(a)
}
