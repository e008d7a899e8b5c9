//! Spline recovery through derivative moments.
//!
//! Integration by parts turns the moments of `f` into those of `f'`:
//! `<f', P_k> = f(1) P_k(1) - f(-1) P_k(-1) - sum_n alpha[k][n] <f, P_n>`.
//! Applied `r + 1` times to a degree-`r` spline this yields the moments of
//! the Dirac train of jumps of `f^(r)`, whose support is the knot set.
//!
//! Each step multiplies rounding errors by roughly `k^{3/2}` at index `k`, so
//! the top derivative moments are only usable up to some cutoff. The knots
//! are located by the pencil on the trustworthy prefix and then refined by a
//! damped Gauss-Newton fit of the spline model against the original moments
//! and the right-end values, the same data the recursion consumes. Knots
//! close to `x = 1` barely move the moments of a smooth spline, and the
//! right-end values pin them down.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{
    change_of_basis, derivative_matrix, eval_all, moments_of_spline, BasisKind, BasisSpec, MomentVector,
};
use crate::linalg::lstsq_real;
use crate::model::{poly_antiderivative, poly_eval, DiracMeasure, Spline};
use crate::quadrature::gauss_legendre_on;
use crate::spike::{recast_moments, solve_coefficients, Method, SolverOptions};
use crate::{Error, Result};

/// Relative moment mismatch accepted by the final forward check.
pub const MOMENT_TOL: f64 = 1e-6;
/// Boundary mismatch accepted at the right end, relative to `max(1, |f^(j)(1)|)`.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineProblem {
    pub y: MomentVector,
    pub degree: usize,
    /// `f^(j)(-1)` for `j = 0..=r`.
    pub boundary_left: Vec<Complex64>,
    /// `f^(j)(1)` for `j = 0..=r`.
    pub boundary_right: Vec<Complex64>,
}

impl SplineProblem {
    pub fn new(
        y: MomentVector,
        degree: usize,
        boundary_left: Vec<Complex64>,
        boundary_right: Vec<Complex64>,
    ) -> Result<Self> {
        if boundary_left.len() != degree + 1 || boundary_right.len() != degree + 1 {
            return Err(Error::Shape(format!(
                "boundary data of lengths {} and {} for degree {degree}; expected {}",
                boundary_left.len(),
                boundary_right.len(),
                degree + 1
            )));
        }
        Ok(Self { y, degree, boundary_left, boundary_right })
    }

    /// The problem generated by a known spline.
    pub fn from_spline(s: &Spline, basis: BasisSpec) -> Self {
        Self {
            y: moments_of_spline(s, basis),
            degree: s.degree(),
            boundary_left: s.boundary_left().to_vec(),
            boundary_right: s.boundary_right().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.y.degree()
    }
}

/// Moments of `f'` from those of `f` and the end values `f(-1)`, `f(1)`.
pub fn derivative_moments(y: &MomentVector, left_value: Complex64, right_value: Complex64) -> MomentVector {
    let basis = y.basis();
    let alpha = derivative_matrix(basis);
    let ay = alpha.apply(y.values());
    let at_right = eval_all(basis.kind, basis.degree, 1.0);
    let at_left = eval_all(basis.kind, basis.degree, -1.0);
    let values = (0..basis.len())
        .map(|k| right_value * at_right[k] - left_value * at_left[k] - ay[k])
        .collect();
    MomentVector::new(basis, values).expect("same shape")
}

/// Rebuilds the spline from the jumps of `f^(r)` and `f^(j)(-1)`, `j = 0..=r`.
pub fn integrate_back(jumps: &DiracMeasure, boundary_left: &[Complex64], degree: usize) -> Result<Spline> {
    if boundary_left.len() != degree + 1 {
        return Err(Error::Shape(format!(
            "{} boundary values for degree {degree}",
            boundary_left.len()
        )));
    }
    let knots = jumps.locations();
    // f^(r): piecewise constant
    let mut pieces: Vec<Vec<Complex64>> = Vec::with_capacity(knots.len() + 1);
    let mut level = boundary_left[degree];
    pieces.push(vec![level]);
    for atom in jumps.atoms() {
        level += atom.weight;
        pieces.push(vec![level]);
    }
    for j in (0..degree).rev() {
        let mut next: Vec<Vec<Complex64>> = pieces.iter().map(|p| poly_antiderivative(p)).collect();
        next[0][0] = boundary_left[j] - poly_eval(&next[0], -1.0);
        for m in 1..next.len() {
            let x = knots[m - 1];
            let target = poly_eval(&next[m - 1], x);
            next[m][0] = target - poly_eval(&next[m], x);
        }
        pieces = next;
    }
    Spline::with_tolerance(degree, knots, pieces, 1e-7)
}

/// Residuals of a candidate spline against a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `||moments(s) - y|| / ||y||` (absolute when `y = 0`).
    pub moment_residual: f64,
    /// `|s^(j)(-1) - f^(j)(-1)|` per order.
    pub boundary_left: Vec<f64>,
    /// `|s^(j)(1) - f^(j)(1)|` per order.
    pub boundary_right: Vec<f64>,
    pub continuity: f64,
}

impl ConsistencyReport {
    pub fn max_boundary(&self) -> f64 {
        self.boundary_left
            .iter()
            .chain(&self.boundary_right)
            .fold(0.0, |a, &b| a.max(b))
    }
}

pub fn consistency_check(s: &Spline, p: &SplineProblem) -> ConsistencyReport {
    let fwd = moments_of_spline(s, p.y.basis());
    let diff = fwd
        .values()
        .iter()
        .zip(p.y.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let norm = p.y.norm();
    let moment_residual = if norm > 0.0 { diff / norm } else { diff };
    let gap = |a: &[Complex64], b: &[Complex64]| -> Vec<f64> {
        (0..b.len())
            .map(|j| a.get(j).map_or(b[j].norm(), |v| (v - b[j]).norm()))
            .collect()
    };
    ConsistencyReport {
        moment_residual,
        boundary_left: gap(s.boundary_left(), &p.boundary_left),
        boundary_right: gap(s.boundary_right(), &p.boundary_right),
        continuity: s.continuity_residual(),
    }
}

/// Recovered spline with the cutoff and fit diagnostics.
#[derive(Debug, Clone)]
pub struct SplineRecovery {
    pub spline: Spline,
    pub report: ConsistencyReport,
    /// Number of derivative moments handed to the spike solver.
    pub cutoff: usize,
    pub refinement_iterations: usize,
}

pub fn recover_spline(p: &SplineProblem, opts: &SolverOptions) -> Result<Spline> {
    recover_spline_report(p, opts).map(|r| r.spline)
}

pub fn recover_spline_report(p: &SplineProblem, opts: &SolverOptions) -> Result<SplineRecovery> {
    opts.validate()?;
    let r = p.degree;
    if p.boundary_left.len() != r + 1 || p.boundary_right.len() != r + 1 {
        return Err(Error::Shape(format!("boundary data must have length {}", r + 1)));
    }
    let n = p.n();
    let cheb = change_of_basis(&p.y, BasisSpec::chebyshev(n))?;
    let base = integrate_back(&DiracMeasure::empty(), &p.boundary_left, r)?;
    let base_moments = moments_of_spline(&base, BasisSpec::chebyshev(n));
    let target: Vec<Complex64> = cheb
        .values()
        .iter()
        .zip(base_moments.values())
        .map(|(a, b)| a - b)
        .chain((0..=r).map(|j| p.boundary_right[j] - base.boundary_right()[j]))
        .collect();

    // no knots at all
    let report = consistency_check(&base, p);
    if accepted(&report, p) {
        return Ok(SplineRecovery { spline: base, report, cutoff: 0, refinement_iterations: 0 });
    }

    let mut top = cheb.clone();
    let mut bound = vec![4.0 * f64::EPSILON * max_abs(cheb.values()); n + 1];
    let alpha = derivative_matrix(BasisSpec::chebyshev(n)).entries;
    for j in 0..=r {
        let next = derivative_moments(&top, p.boundary_left[j], p.boundary_right[j]);
        let edge = f64::EPSILON * (p.boundary_left[j].norm() + p.boundary_right[j].norm());
        bound = (0..=n)
            .map(|k| {
                let (mut prop, mut round) = (0.0, 0.0);
                for i in 0..k {
                    let a = alpha[(k, i)];
                    if a != 0.0 {
                        prop += (a * bound[i]).powi(2);
                        round += (a * top.values()[i].norm()).abs();
                    }
                }
                prop.sqrt() + f64::EPSILON * round + edge
            })
            .collect();
        top = next;
    }
    let scale = max_abs(&top.values()[..n.min(8) + 1]).max(f64::MIN_POSITIVE);

    let mut last_err = Error::ReconstructionInconsistent("no knot candidates".into());
    let mut tried = Vec::new();
    for noise in [1e-11, 1e-9, 1e-7, 1e-5, 1e-3] {
        let cutoff = bound
            .iter()
            .position(|&b| b > noise * scale)
            .unwrap_or(n + 1)
            .saturating_sub(1);
        if cutoff < 2 || tried.contains(&cutoff) {
            continue;
        }
        tried.push(cutoff);
        let knots = match candidate_knots(&top, cutoff, noise, opts) {
            Ok(k) if !k.is_empty() => k,
            Ok(_) => continue,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        match refine(&knots, &target, r, n) {
            Ok((knots, jumps, iterations)) => {
                let measure = match DiracMeasure::new(knots.into_iter().zip(jumps)) {
                    Ok(m) => m,
                    Err(e) => {
                        last_err = e;
                        continue;
                    }
                };
                let spline = match integrate_back(&measure, &p.boundary_left, r) {
                    Ok(s) => s,
                    Err(e) => {
                        last_err = e;
                        continue;
                    }
                };
                let report = consistency_check(&spline, p);
                if accepted(&report, p) {
                    return Ok(SplineRecovery {
                        spline,
                        report,
                        cutoff,
                        refinement_iterations: iterations,
                    });
                }
                last_err = Error::ReconstructionInconsistent(format!(
                    "moment residual {:.3e}, right boundary residual {:.3e}",
                    report.moment_residual,
                    report.boundary_right.iter().fold(0.0f64, |a, &b| a.max(b))
                ));
            }
            Err(e) => last_err = e,
        }
    }
    Err(match last_err {
        e @ Error::ReconstructionInconsistent(_) => e,
        e => Error::ReconstructionInconsistent(e.to_string()),
    })
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn accepted(report: &ConsistencyReport, p: &SplineProblem) -> bool {
    report.moment_residual <= MOMENT_TOL
        && report
            .boundary_right
            .iter()
            .zip(&p.boundary_right)
            .all(|(d, b)| *d <= BOUNDARY_TOL * b.norm().max(1.0))
}

/// Knot estimates from the first `cutoff + 1` Chebyshev moments of the jumps.
fn candidate_knots(top: &MomentVector, cutoff: usize, noise: f64, opts: &SolverOptions) -> Result<Vec<f64>> {
    let prefix = top.truncated(cutoff);
    let spike_opts = SolverOptions {
        method: Method::Pencil,
        pencil_rank_tol: opts.pencil_rank_tol.max(30.0 * noise),
        max_model_order: None,
        ..*opts
    };
    let recast = recast_moments(&prefix)?;
    let t = crate::spike::pencil_nodes(&recast, &spike_opts)?;
    let xs: Vec<f64> = t
        .iter()
        .map(|t| t.cos())
        .filter(|x| x.abs() < 1.0 - 1e-12)
        .collect();
    if xs.is_empty() {
        return Ok(xs);
    }
    let w = solve_coefficients(&xs, &prefix)?.weights;
    let wmax = w.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut keep: Vec<f64> = xs
        .into_iter()
        .zip(w)
        .filter(|(_, c)| c.norm() > (1e3 * noise).min(1e-2) * wmax)
        .map(|(x, _)| x)
        .collect();
    keep.sort_by(f64::total_cmp);
    Ok(keep)
}

/// `int_xi^1 (x - xi)^p / p! T_k(x) dx`, `k = 0..=N`.
fn tail_moments(xi: f64, p: usize, n: usize, nodes: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let (xs, ws) = gauss_legendre_on(nodes, xi, 1.0);
    let fact: f64 = (1..=p).map(|i| i as f64).product();
    for (&x, &w) in xs.iter().zip(&ws) {
        let f = w * (x - xi).powi(p as i32) / fact;
        for (o, t) in out.iter_mut().zip(eval_all(BasisKind::Chebyshev, n, x)) {
            *o += f * t;
        }
    }
    out
}

/// Columns `g(xi_m)` and `dg/dxi (xi_m)` of the spline model
/// `sum_m a_m (x - xi_m)_+^r / r!`: its Chebyshev moments `k = 0..=N`
/// followed by its derivatives `j = 0..=r` at `x = 1`.
fn model_columns(knots: &[f64], r: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let nodes = (n + r + 1).div_ceil(2) + 1;
    let rows = n + 1 + r + 1;
    let mut g = DMatrix::zeros(rows, knots.len());
    let mut dg = DMatrix::zeros(rows, knots.len());
    let fact = |p: usize| (1..=p).map(|i| i as f64).product::<f64>();
    for (m, &xi) in knots.iter().enumerate() {
        for (k, v) in tail_moments(xi, r, n, nodes).into_iter().enumerate() {
            g[(k, m)] = v;
        }
        let d = if r == 0 {
            eval_all(BasisKind::Chebyshev, n, xi)
        } else {
            tail_moments(xi, r - 1, n, nodes)
        };
        for (k, v) in d.into_iter().enumerate() {
            dg[(k, m)] = -v;
        }
        let h = 1.0 - xi;
        for j in 0..=r {
            let p = r - j;
            g[(n + 1 + j, m)] = h.powi(p as i32) / fact(p);
            if p > 0 {
                dg[(n + 1 + j, m)] = -h.powi(p as i32 - 1) / fact(p - 1);
            }
        }
    }
    (g, dg)
}

fn residual(g: &DMatrix<f64>, a: &[Complex64], target: &[Complex64]) -> Vec<Complex64> {
    (0..target.len())
        .map(|k| {
            let mut acc = -target[k];
            for (m, &am) in a.iter().enumerate() {
                acc += am * g[(k, m)];
            }
            acc
        })
        .collect()
}

fn sq_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Levenberg-Marquardt on knots and jumps jointly; returns the refined
/// knots, the jumps of `f^(r)` and the iteration count.
pub(crate) fn refine(initial: &[f64], target: &[Complex64], r: usize, n: usize) -> Result<(Vec<f64>, Vec<Complex64>, usize)> {
    let m = initial.len();
    let mut knots = initial.to_vec();
    let (g, _) = model_columns(&knots, r, n);
    let mut jumps = lstsq_real(&g, target, 1e-13)
        .map_err(|e| Error::ReconstructionInconsistent(e.to_string()))?
        .solution;
    let mut res = residual(&g, &jumps, target);
    let mut cost = sq_norm(&res);
    let floor = (1e-15 * sq_norm(target).sqrt()).powi(2);
    let mut lambda: f64 = 1e-6;
    let len = target.len();
    let rows = 2 * len;
    let cols = 3 * m;
    let mut iterations = 0;
    while iterations < 200 && cost > floor {
        iterations += 1;
        let (g, dg) = model_columns(&knots, r, n);
        let mut j = DMatrix::zeros(rows, cols);
        for k in 0..len {
            for i in 0..m {
                let d = jumps[i] * dg[(k, i)];
                j[(k, i)] = d.re;
                j[(len + k, i)] = d.im;
                j[(k, m + i)] = g[(k, i)];
                j[(len + k, 2 * m + i)] = g[(k, i)];
            }
        }
        let f = DVector::from_iterator(rows, res.iter().map(|c| c.re).chain(res.iter().map(|c| c.im)));
        let scales: Vec<f64> = (0..cols).map(|c| j.column(c).norm().max(1e-300)).collect();
        let mut improved = false;
        for _ in 0..30 {
            let mut aug = DMatrix::zeros(rows + cols, cols);
            aug.view_mut((0, 0), (rows, cols)).copy_from(&j);
            for c in 0..cols {
                aug[(rows + c, c)] = lambda.sqrt() * scales[c];
            }
            let mut rhs = DVector::zeros(rows + cols);
            rhs.rows_mut(0, rows).copy_from(&(-&f));
            let step = aug
                .svd(true, true)
                .solve(&rhs, 1e-15)
                .map_err(|e| Error::ReconstructionInconsistent(e.to_string()))?;
            let trial_knots: Vec<f64> = (0..m).map(|i| knots[i] + step[i]).collect();
            let ordered = trial_knots.iter().all(|x| x.abs() < 1.0 - 1e-12)
                && trial_knots.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let trial_jumps: Vec<Complex64> = (0..m)
                    .map(|i| jumps[i] + Complex64::new(step[m + i], step[2 * m + i]))
                    .collect();
                let (tg, _) = model_columns(&trial_knots, r, n);
                let trial_res = residual(&tg, &trial_jumps, target);
                let trial_cost = sq_norm(&trial_res);
                if trial_cost < cost {
                    knots = trial_knots;
                    jumps = trial_jumps;
                    res = trial_res;
                    let gain = cost - trial_cost;
                    cost = trial_cost;
                    lambda = (lambda * 0.1).max(1e-15);
                    improved = gain > 1e-30 * cost.max(floor);
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    // final linear solve for the jumps at the converged knots
    let (g, _) = model_columns(&knots, r, n);
    if let Ok(fit) = lstsq_real(&g, target, 1e-13) {
        if sq_norm(&residual(&g, &fit.solution, target)) <= cost {
            jumps = fit.solution;
        }
    }
    Ok((knots, jumps, iterations))
}
