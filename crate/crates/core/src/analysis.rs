//! Error norms, the recovery-based estimator, Dörfler marking, the adaptive
//! loop and convergence-order fitting.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{AnalysisError, Error, QuadratureError};
use crate::mesh::Mesh;
use crate::quadrature::{triangle_rule, MAX_TRIANGLE_DEGREE};
use crate::recovery::recover;
use crate::solver::{
    assemble_mixed_with_degree, assembly_degree, solve_mixed, ExactSolution, MixedSolution,
    ProblemSpec,
};
use crate::spaces::{
    interpolate_rt, project_l2, LagrangeVecField, RtField, ScalarField, VectorField,
};

/// Quadrature degree for error norms of an RT_r solution.
pub fn error_degree(r: usize) -> usize {
    (2 * (r + 2) + 6).min(MAX_TRIANGLE_DEGREE)
}

/// Sums per-triangle values in index order.
fn ordered_sum(v: Vec<f64>) -> f64 {
    v.into_iter().sum()
}

/// `‖a − b‖_{0,Ω}` for two vector fields.
pub fn l2_error_vec(
    a: &(impl VectorField + ?Sized),
    b: &(impl VectorField + ?Sized),
    mesh: &Mesh,
    degree: usize,
) -> Result<f64, QuadratureError> {
    let rule = triangle_rule(degree)?;
    let per: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let area = mesh.area(t);
            rule.map_points(&mesh.triangle_vertices(t))
                .zip(&rule.weights)
                .map(|(x, w)| {
                    let (u, v) = (a.value(t, x), b.value(t, x));
                    area * w * ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2))
                })
                .sum()
        })
        .collect();
    Ok(ordered_sum(per).sqrt())
}

/// `‖a − b‖_{0,Ω}` for two scalar fields.
pub fn l2_error_scalar(
    a: &(impl ScalarField + ?Sized),
    b: &(impl ScalarField + ?Sized),
    mesh: &Mesh,
    degree: usize,
) -> Result<f64, QuadratureError> {
    let rule = triangle_rule(degree)?;
    let per: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let area = mesh.area(t);
            rule.map_points(&mesh.triangle_vertices(t))
                .zip(&rule.weights)
                .map(|(x, w)| area * w * (a.value(t, x) - b.value(t, x)).powi(2))
                .sum()
        })
        .collect();
    Ok(ordered_sum(per).sqrt())
}

/// Local estimator `η_T = ‖R p_h − p_h‖_{0,T}`.
pub fn estimator(p_h: &RtField, recovered: &LagrangeVecField) -> Vec<f64> {
    let mesh = p_h.mesh();
    let degree = (2 * recovered.degree().max(p_h.degree() + 1) + 2).min(MAX_TRIANGLE_DEGREE);
    let rule = triangle_rule(degree).expect("degree within table");
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let g = mesh.geometry(t);
            let s: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(b, w)| {
                    let x = g.point(*b);
                    let p = p_h.value_and_div(t, x).0;
                    let q = recovered.eval_bary(t, *b);
                    w * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                })
                .sum();
            (g.area * s).max(0.0).sqrt()
        })
        .collect()
}

/// `(Σ η_T²)^{1/2}`.
pub fn global_eta(etas: &[f64]) -> f64 {
    etas.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// Minimal Dörfler set: triangles in order of decreasing `η_T` (ties by index)
/// until the marked share of `Σ η_T²` reaches `theta`. Returned sorted by index.
pub fn dorfler_mark(etas: &[f64], theta: f64) -> Result<Vec<usize>, AnalysisError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(AnalysisError::InvalidTheta(theta));
    }
    let total: f64 = etas.iter().map(|e| e * e).sum();
    if total <= 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..etas.len()).collect();
    order.sort_by(|&a, &b| etas[b].abs().total_cmp(&etas[a].abs()).then(a.cmp(&b)));
    let goal = theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for t in order {
        if sum >= goal {
            break;
        }
        sum += etas[t] * etas[t];
        marked.push(t);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// One row of a convergence table.
///
/// Error entries are NaN when the problem carries no exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub nt: usize,
    /// Dimension of the mixed system.
    pub ndof: usize,
    /// `‖p − p_h‖`
    pub e_p: f64,
    /// `‖div(p − p_h)‖`
    pub e_div: f64,
    /// `‖Π p − p_h‖`
    pub e_close: f64,
    /// `‖div(Π p − p_h)‖`
    pub e_div_close: f64,
    /// `‖p − R p_h‖`
    pub e_rec: f64,
    /// `‖u − u_h‖`
    pub e_u: f64,
    /// `‖P u − u_h‖`
    pub e_u_close: f64,
    pub eta: f64,
    /// `eta / e_p`
    pub efficiency: f64,
}

impl ErrorReport {
    /// Measures a solution against the exact one, given the recovered flux and
    /// the local estimator values.
    pub fn compute(
        solution: &MixedSolution,
        ndof: usize,
        exact: Option<&ExactSolution>,
        recovered: &LagrangeVecField,
        etas: &[f64],
        degree: usize,
    ) -> Result<ErrorReport, Error> {
        let p_h = &solution.p;
        let mesh = p_h.mesh();
        let r = p_h.degree();
        let eta = global_eta(etas);
        let mut rep = ErrorReport {
            nt: mesh.num_triangles(),
            ndof,
            e_p: f64::NAN,
            e_div: f64::NAN,
            e_close: f64::NAN,
            e_div_close: f64::NAN,
            e_rec: f64::NAN,
            e_u: f64::NAN,
            e_u_close: f64::NAN,
            eta,
            efficiency: f64::NAN,
        };
        let Some(ex) = exact else { return Ok(rep) };
        let p = |x: crate::Point| (ex.p)(x);
        let div_p = |x: crate::Point| (ex.div_p)(x);
        let u = |x: crate::Point| (ex.u)(x);
        let pi_p = interpolate_rt(&p, mesh, r)?;
        let p_u = project_l2(&u, mesh, r)?;
        rep.e_p = l2_error_vec(&p, p_h, mesh, degree)?;
        let div_h = p_h.divergence_projection();
        rep.e_div = l2_error_scalar(&div_p, &div_h, mesh, degree)?;
        rep.e_close = l2_error_vec(&pi_p, p_h, mesh, degree)?;
        rep.e_div_close = l2_error_scalar(&pi_p.divergence_projection(), &div_h, mesh, degree)?;
        rep.e_rec = l2_error_vec(&p, recovered, mesh, degree)?;
        rep.e_u = l2_error_scalar(&u, &solution.u, mesh, degree)?;
        rep.e_u_close = l2_error_scalar(&p_u, &solution.u, mesh, degree)?;
        rep.efficiency = if rep.e_p > 0.0 { eta / rep.e_p } else { 0.0 };
        Ok(rep)
    }
}

/// Column headers of the CSV table.
pub const CSV_HEADER: &str = "level,nt,ndof,e_p,e_div,e_close,e_rec,e_u,eta,efficiency";

/// Writes reports as CSV with four significant digits.
pub fn write_csv(mut w: impl Write, reports: &[ErrorReport]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for (level, r) in reports.iter().enumerate() {
        writeln!(
            w,
            "{level},{},{},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e}",
            r.nt, r.ndof, r.e_p, r.e_div, r.e_close, r.e_rec, r.e_u, r.eta, r.efficiency
        )?;
    }
    Ok(())
}

/// `p` such that `error ≈ C ndof^{−p/2}`, by least squares in log-log scale.
pub fn fit_order(errors: &[f64], ndofs: &[f64]) -> Result<f64, AnalysisError> {
    if errors.len() != ndofs.len() {
        return Err(AnalysisError::LengthMismatch(errors.len(), ndofs.len()));
    }
    if errors.len() < 2 {
        return Err(AnalysisError::TooFewPoints(errors.len()));
    }
    if let Some(&bad) = errors.iter().chain(ndofs).find(|&&v| !(v > 0.0)) {
        return Err(AnalysisError::NonPositive(bad));
    }
    let xs: Vec<f64> = ndofs.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::TooFewPoints(1));
    }
    Ok(-2.0 * sxy / sxx)
}

/// [`fit_order`] without the coarsest level.
pub fn fit_order_asymptotic(errors: &[f64], ndofs: &[f64]) -> Result<f64, AnalysisError> {
    if errors.len() != ndofs.len() {
        return Err(AnalysisError::LengthMismatch(errors.len(), ndofs.len()));
    }
    if errors.len() < 3 {
        return fit_order(errors, ndofs);
    }
    fit_order(&errors[1..], &ndofs[1..])
}

/// Result of one solve with its recovery and estimate.
#[derive(Debug, Clone)]
pub struct Step {
    pub solution: MixedSolution,
    pub recovered: LagrangeVecField,
    pub etas: Vec<f64>,
    pub report: ErrorReport,
}

/// Solve, recover, estimate and measure on one mesh.
pub fn solve_and_measure(mesh: &Arc<Mesh>, r: usize, problem: &ProblemSpec) -> Result<Step, Error> {
    solve_and_measure_with(mesh, r, problem, None)
}

/// [`solve_and_measure`] with one quadrature degree for assembly and error
/// norms in place of the defaults.
pub fn solve_and_measure_with(
    mesh: &Arc<Mesh>,
    r: usize,
    problem: &ProblemSpec,
    quad_degree: Option<usize>,
) -> Result<Step, Error> {
    let system =
        assemble_mixed_with_degree(mesh, r, problem, quad_degree.unwrap_or(assembly_degree(r)))?;
    let solution = solve_mixed(&system)?;
    let recovered = recover(&solution.p)?;
    let etas = estimator(&solution.p, &recovered);
    let degree = quad_degree.unwrap_or(error_degree(r));
    let report = ErrorReport::compute(
        &solution,
        system.dim(),
        problem.exact.as_ref(),
        &recovered,
        &etas,
        degree,
    )?;
    Ok(Step {
        solution,
        recovered,
        etas,
        report,
    })
}

/// Output of [`afem_loop`].
#[derive(Debug, Clone)]
pub struct AfemRun {
    pub reports: Vec<ErrorReport>,
    /// The last mesh on which the problem was solved.
    pub mesh: Mesh,
}

/// SOLVE, ESTIMATE, MARK, REFINE until the system dimension exceeds `max_ndof`
/// or nothing gets marked.
pub fn afem_loop(
    problem: &ProblemSpec,
    initial: Mesh,
    r: usize,
    theta: f64,
    max_ndof: usize,
) -> Result<AfemRun, Error> {
    afem_loop_with(problem, initial, r, theta, max_ndof, None)
}

/// [`afem_loop`] with a quadrature override as in [`solve_and_measure_with`].
pub fn afem_loop_with(
    problem: &ProblemSpec,
    initial: Mesh,
    r: usize,
    theta: f64,
    max_ndof: usize,
    quad_degree: Option<usize>,
) -> Result<AfemRun, Error> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(AnalysisError::InvalidTheta(theta).into());
    }
    let mut mesh = Arc::new(initial);
    let mut reports = Vec::new();
    for iteration in 0.. {
        let wrap = |e: Error| Error::Afem {
            iteration,
            source: Box::new(e),
        };
        let step = solve_and_measure_with(&mesh, r, problem, quad_degree).map_err(wrap)?;
        let ndof = step.report.ndof;
        reports.push(step.report);
        if ndof > max_ndof {
            break;
        }
        let marked = dorfler_mark(&step.etas, theta).map_err(|e| wrap(e.into()))?;
        if marked.is_empty() {
            break;
        }
        let next = mesh.refine_adaptive(&marked).map_err(|e| wrap(e.into()))?;
        mesh = Arc::new(next);
    }
    let mesh = Arc::try_unwrap(mesh).unwrap_or_else(|m| (*m).clone());
    Ok(AfemRun { reports, mesh })
}
