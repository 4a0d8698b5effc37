//! Benchmark problems and the driver that turns a run configuration into a
//! convergence table, fitted orders and a log-log plot.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::analysis::{
    afem_loop_with, fit_order_asymptotic, solve_and_measure_with, write_csv, ErrorReport,
};
use crate::error::Error;
use crate::mesh::{slit_square, unit_square_delaunay, Mesh, SLIT_ANGLE};
use crate::solver::ProblemSpec;
use crate::spaces::MAX_DEGREE;
use crate::Point;

/// `u = e^{x+y} sin(2πx) sin(πy)` on the unit square with `u = 0` on the boundary.
pub fn smooth_problem() -> ProblemSpec {
    smooth_problem_with_reaction(0.0)
}

/// The smooth problem for `−Δu + c u = f`; `c = 0` gives the Poisson problem.
pub fn smooth_problem_with_reaction(c: f64) -> ProblemSpec {
    let u = |x: Point| (x[0] + x[1]).exp() * (2.0 * PI * x[0]).sin() * (PI * x[1]).sin();
    let grad = |x: Point| {
        let e = (x[0] + x[1]).exp();
        let (s2, c2) = (2.0 * PI * x[0]).sin_cos();
        let (s1, c1) = (PI * x[1]).sin_cos();
        [e * s1 * (s2 + 2.0 * PI * c2), e * s2 * (s1 + PI * c1)]
    };
    let lap = |x: Point| {
        let e = (x[0] + x[1]).exp();
        let (s2, c2) = (2.0 * PI * x[0]).sin_cos();
        let (s1, c1) = (PI * x[1]).sin_cos();
        e * s1 * ((1.0 - 4.0 * PI * PI) * s2 + 4.0 * PI * c2)
            + e * s2 * ((1.0 - PI * PI) * s1 + 2.0 * PI * c1)
    };
    let spec = ProblemSpec::poisson(move |x: Point| c * u(x) - lap(x), |_: Point| 0.0)
        .with_exact(u, grad, lap);
    if c != 0.0 {
        spec.with_c(move |_: Point| c)
    } else {
        spec
    }
}

/// Exponent of the corner singularity for the slit opening `ω`.
pub fn corner_exponent(omega: f64) -> f64 {
    PI / (2.0 * PI - omega)
}

/// Polar angle measured from the lower slit face, in `[0, 2π − ω]` on the domain.
fn slit_angle(x: Point, omega: f64) -> f64 {
    let mut th = x[1].atan2(x[0]) - omega;
    if th < 0.0 {
        th += 2.0 * PI;
    }
    // points on the upper slit face may round into the excluded wedge
    if th > 2.0 * PI - omega / 2.0 {
        th -= 2.0 * PI;
    }
    th
}

/// `u = r^γ sin(γθ) − r²/4`, `γ = π/(2π − ω)`, on the square `[−1,1]²` with a
/// wedge of opening `ω` removed at the origin; `f = 1`.
pub fn corner_problem(omega: f64) -> ProblemSpec {
    let g = corner_exponent(omega);
    let u = move |x: Point| {
        let r = x[0].hypot(x[1]);
        r.powf(g) * (g * slit_angle(x, omega)).sin() - r * r / 4.0
    };
    let grad = move |x: Point| {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let phase = (g - 1.0) * slit_angle(x, omega) - omega;
        let a = g * r.powf(g - 1.0);
        [a * phase.sin() - x[0] / 2.0, a * phase.cos() - x[1] / 2.0]
    };
    ProblemSpec::poisson(|_: Point| 1.0, u).with_exact(u, grad, |_: Point| -1.0)
}

/// How the mesh sequence is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Refinement {
    /// Every triangle split into four similar children.
    Regular,
    /// Every triangle bisected twice by newest vertex bisection.
    Bisection,
    /// Dörfler marking on the recovery estimator.
    Adaptive,
}

impl FromStr for Refinement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "regular" => Ok(Refinement::Regular),
            "bisection" => Ok(Refinement::Bisection),
            "adaptive" => Ok(Refinement::Adaptive),
            _ => Err(Error::Config(format!(
                "unknown refinement '{s}' (regular|bisection|adaptive)"
            ))),
        }
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// 1 and 2 share the smooth problem, 3 is the corner problem.
    pub problem: u8,
    pub r: usize,
    pub refine: Refinement,
    pub levels: usize,
    pub max_ndof: usize,
    pub theta: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Initial mesh file, replacing the generated one.
    pub mesh: Option<PathBuf>,
    /// Quadrature degree for assembly and error norms.
    pub quad_degree: Option<usize>,
    /// Target triangle count of the generated initial mesh.
    pub initial_nt: usize,
    /// Reaction coefficient `c` added to Problems 1 and 2.
    pub reaction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: 1,
            r: 1,
            refine: Refinement::Regular,
            levels: 5,
            max_ndof: 200_000,
            theta: 0.3,
            seed: 0,
            out: PathBuf::from("out"),
            mesh: None,
            quad_degree: None,
            initial_nt: 86,
            reaction: 0.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl RunConfig {
    /// Defaults for a problem: Problem 3 runs adaptively on the slit square.
    pub fn for_problem(problem: u8) -> RunConfig {
        let mut c = RunConfig {
            problem,
            ..RunConfig::default()
        };
        match problem {
            2 => c.r = 2,
            3 => {
                c.refine = Refinement::Adaptive;
                c.initial_nt = 8;
            }
            _ => {}
        }
        c
    }

    /// Sets one option by name; names match the command-line flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "problem" => self.problem = parse(&key, value)?,
            "r" => self.r = parse(&key, value)?,
            "refine" => self.refine = value.parse()?,
            "levels" => self.levels = parse(&key, value)?,
            "max-ndof" => self.max_ndof = parse::<f64>(&key, value)? as usize,
            "theta" => self.theta = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            "mesh" => self.mesh = Some(PathBuf::from(value)),
            "quad-degree" => self.quad_degree = Some(parse(&key, value)?),
            "initial-nt" => self.initial_nt = parse(&key, value)?,
            "reaction" => self.reaction = parse(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_config(&mut self, text: &str) -> Result<(), Error> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(1..=3).contains(&self.problem) {
            return Err(Error::Config(format!(
                "problem must be 1, 2 or 3 (got {})",
                self.problem
            )));
        }
        if self.r > MAX_DEGREE {
            return Err(Error::Config(format!(
                "r must lie in 0..={MAX_DEGREE} (got {})",
                self.r
            )));
        }
        if self.refine != Refinement::Adaptive && self.levels == 0 {
            return Err(Error::Config("levels must be positive".into()));
        }
        if !(self.reaction >= 0.0) {
            return Err(Error::Config(format!(
                "reaction must be nonnegative (got {})",
                self.reaction
            )));
        }
        if self.refine == Refinement::Adaptive && !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!(
                "theta must lie in (0, 1) (got {})",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        match self.problem {
            3 => corner_problem(SLIT_ANGLE),
            _ => smooth_problem_with_reaction(self.reaction),
        }
    }

    pub fn initial_mesh(&self) -> Result<Mesh, Error> {
        if let Some(path) = &self.mesh {
            return Mesh::read_file(path);
        }
        Ok(match self.problem {
            3 => slit_square(self.initial_nt),
            _ => unit_square_delaunay(self.initial_nt, self.seed)?,
        })
    }
}

/// Solves on every level and returns one report per level.
pub fn run_levels(config: &RunConfig) -> Result<Vec<ErrorReport>, Error> {
    config.validate()?;
    let problem = config.problem_spec();
    let initial = config.initial_mesh()?;
    if config.refine == Refinement::Adaptive {
        let run = afem_loop_with(
            &problem,
            initial,
            config.r,
            config.theta,
            config.max_ndof,
            config.quad_degree,
        )?;
        return Ok(run.reports);
    }
    let mut mesh = initial;
    let mut reports = Vec::with_capacity(config.levels);
    for level in 0..config.levels {
        if level > 0 {
            mesh = match config.refine {
                Refinement::Regular => mesh.refine_regular(),
                _ => mesh.refine_bisection_uniform()?,
            };
        }
        let shared = Arc::new(mesh.clone());
        reports
            .push(solve_and_measure_with(&shared, config.r, &problem, config.quad_degree)?.report);
    }
    Ok(reports)
}

/// Columns for which orders are fitted, with accessors.
pub const ORDER_COLUMNS: [(&str, fn(&ErrorReport) -> f64); 8] = [
    ("e_p", |r| r.e_p),
    ("e_div", |r| r.e_div),
    ("e_close", |r| r.e_close),
    ("e_div_close", |r| r.e_div_close),
    ("e_rec", |r| r.e_rec),
    ("e_u", |r| r.e_u),
    ("e_u_close", |r| r.e_u_close),
    ("eta", |r| r.eta),
];

/// Fitted `p` per column (coarsest level excluded); `None` where a column has
/// non-positive entries or too few levels.
pub fn fitted_orders(reports: &[ErrorReport]) -> Vec<(&'static str, Option<f64>)> {
    let ndofs: Vec<f64> = reports.iter().map(|r| r.ndof as f64).collect();
    ORDER_COLUMNS
        .iter()
        .map(|(name, get)| {
            let errs: Vec<f64> = reports.iter().map(get).collect();
            (*name, fit_order_asymptotic(&errs, &ndofs).ok())
        })
        .collect()
}

/// The fitted order of one named column.
pub fn order_of(orders: &[(&str, Option<f64>)], name: &str) -> Option<f64> {
    orders
        .iter()
        .find(|(n, _)| *n == name)
        .and_then(|(_, p)| *p)
}

pub fn format_orders(orders: &[(&str, Option<f64>)]) -> String {
    let mut s = String::new();
    for (name, p) in orders {
        match p {
            Some(p) => writeln!(s, "{name} {p:.3}").unwrap(),
            None => writeln!(s, "{name} n/a").unwrap(),
        }
    }
    s
}

/// Log-log plot of the error columns against `ndof`.
pub fn convergence_svg(reports: &[ErrorReport], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let columns: [(&str, &str, fn(&ErrorReport) -> f64); 6] = [
        ("e_p", "#1f77b4", |r: &ErrorReport| r.e_p),
        ("e_close", "#ff7f0e", |r: &ErrorReport| r.e_close),
        ("e_rec", "#2ca02c", |r: &ErrorReport| r.e_rec),
        ("e_div", "#d62728", |r: &ErrorReport| r.e_div),
        ("e_u", "#9467bd", |r: &ErrorReport| r.e_u),
        ("eta", "#8c564b", |r: &ErrorReport| r.eta),
    ];
    let series: Vec<(&str, &str, Vec<(f64, f64)>)> = columns
        .into_iter()
        .map(|(n, c, get)| {
            let pts = reports
                .iter()
                .filter(|r| get(r) > 0.0 && r.ndof > 0)
                .map(|r| ((r.ndof as f64).log10(), get(r).log10()))
                .collect();
            (n, c, pts)
        })
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.2.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    )
    .unwrap();
    for d in (x0 as i32)..=(x1 as i32) {
        let x = sx(d as f64);
        writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#ddd"/>"##,
            M,
            H - M
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{d}</text>"#,
            H - M + 18.0
        )
        .unwrap();
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = sy(d as f64);
        writeln!(
            s,
            r##"<line x1="{M}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##,
            W - M
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"#,
            M - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">ndof</text>"#,
        W / 2.0,
        H - 16.0
    )
    .unwrap();
    for (i, (name, color, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        )
        .unwrap();
        for &(x, y) in pts {
            writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            )
            .unwrap();
        }
        let ly = M + 16.0 + 16.0 * i as f64;
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            W - M - 90.0,
            W - M - 70.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}">{name}</text>"#,
            W - M - 64.0,
            ly + 4.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<ErrorReport>,
    pub orders: Vec<(&'static str, Option<f64>)>,
}

/// Runs the configuration and writes `table.csv`, `orders.txt` and
/// `convergence.svg` into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunOutput, Error> {
    let reports = run_levels(config)?;
    let orders = fitted_orders(&reports);
    write_outputs(&config.out, config, &reports, &orders)?;
    Ok(RunOutput { reports, orders })
}

fn write_outputs(
    dir: &Path,
    config: &RunConfig,
    reports: &[ErrorReport],
    orders: &[(&str, Option<f64>)],
) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, reports)?;
    fs::write(dir.join("table.csv"), csv)?;
    fs::write(dir.join("orders.txt"), format_orders(orders))?;
    let title = format!(
        "Problem {}, RT_{}, {:?} refinement",
        config.problem, config.r, config.refine
    );
    fs::write(
        dir.join("convergence.svg"),
        convergence_svg(reports, &title),
    )?;
    Ok(())
}
