//! Mehrotra predictor–corrector interior-point method for
//! `min c'x  s.t.  A x = b, x >= 0`.
//!
//! The constraint matrix is abstracted behind [`Constraints`] so that the
//! signed split `[A, -A]` used for l1 minimization never has to be
//! materialized: its normal matrix is `A (D+ + D-) A'`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub trait Constraints {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`
    fn mul(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `A' y`
    fn tmul(&self, y: &DVector<f64>) -> DVector<f64>;
    /// `A diag(d) A'`
    fn normal(&self, d: &DVector<f64>) -> DMatrix<f64>;
}

/// A plain dense matrix.
pub struct Dense<'a>(pub &'a DMatrix<f64>);

/// The block matrix `[A, -A]`.
pub struct Signed<'a>(pub &'a DMatrix<f64>);

fn scaled_gram(a: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut b = a.clone();
    for (j, &dj) in d.iter().enumerate() {
        b.column_mut(j).scale_mut(dj.max(0.0).sqrt());
    }
    &b * b.transpose()
}

impl Constraints for Dense<'_> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0 * x
    }
    fn tmul(&self, y: &DVector<f64>) -> DVector<f64> {
        self.0.tr_mul(y)
    }
    fn normal(&self, d: &DVector<f64>) -> DMatrix<f64> {
        scaled_gram(self.0, d.as_slice())
    }
}

impl Constraints for Signed<'_> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        2 * self.0.ncols()
    }
    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.0.ncols();
        let diff = DVector::from_iterator(n, (0..n).map(|j| x[j] - x[n + j]));
        self.0 * diff
    }
    fn tmul(&self, y: &DVector<f64>) -> DVector<f64> {
        let half = self.0.tr_mul(y);
        let n = half.len();
        DVector::from_iterator(2 * n, (0..2 * n).map(|j| if j < n { half[j] } else { -half[j - n] }))
    }
    fn normal(&self, d: &DVector<f64>) -> DMatrix<f64> {
        let n = self.0.ncols();
        let sum: Vec<f64> = (0..n).map(|j| d[j] + d[n + j]).collect();
        scaled_gram(self.0, &sum)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    /// Relative duality gap `|c'x - b'y| / (1 + |c'x|)` at termination.
    pub gap_tol: f64,
    /// Relative primal and dual residuals at termination.
    pub feas_tol: f64,
    /// Residual above which a stalled run is declared infeasible.
    pub infeasible_tol: f64,
    pub max_iter: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            feas_tol: 1e-9,
            infeasible_tol: 1e-7,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    /// Equality-constraint multipliers.
    pub y: DVector<f64>,
    /// Reduced costs.
    pub s: DVector<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub primal_residual: f64,
    pub iterations: usize,
}

struct Factor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Factor {
    fn new(mut m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 1e-14 * scale;
        for _ in 0..12 {
            let mut trial = m.clone();
            for i in 0..n {
                trial[(i, i)] += reg;
            }
            if let Some(chol) = trial.cholesky() {
                return Ok(Self { chol });
            }
            reg *= 100.0;
        }
        for i in 0..n {
            m[(i, i)] += reg;
        }
        m.cholesky()
            .map(|chol| Self { chol })
            .ok_or_else(|| Error::NonConvergence { iterations: 0 })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

/// Solves the standard-form LP.
pub fn solve<A: Constraints>(
    a: &A,
    b: &DVector<f64>,
    c: &DVector<f64>,
    opts: &IpmOptions,
) -> Result<LpSolution> {
    let (m, n) = (a.nrows(), a.ncols());
    if b.len() != m || c.len() != n {
        return Err(Error::Shape(format!(
            "LP with {m} rows, {n} columns, |b| = {}, |c| = {}",
            b.len(),
            c.len()
        )));
    }
    let bnorm = b.norm();
    let cnorm = c.norm();

    // Mehrotra's starting point.
    let f0 = Factor::new(a.normal(&DVector::from_element(n, 1.0)))?;
    let mut x = a.tmul(&f0.solve(b));
    let mut y = f0.solve(&a.mul(c));
    let mut s = c - a.tmul(&y);
    let dx = (-1.5 * x.min()).max(0.0);
    let ds = (-1.5 * s.min()).max(0.0);
    x.add_scalar_mut(dx);
    s.add_scalar_mut(ds);
    let xs = x.dot(&s);
    let (sx, ss) = (x.sum(), s.sum());
    if xs > 0.0 && sx > 0.0 && ss > 0.0 {
        x.add_scalar_mut(0.5 * xs / ss);
        s.add_scalar_mut(0.5 * xs / sx);
    }
    for v in x.iter_mut().chain(s.iter_mut()) {
        if *v <= 1e-8 {
            *v = 1.0;
        }
    }

    let mut stalled = 0;
    let mut iterations = 0;
    loop {
        let rb = a.mul(&x) - b;
        let rc = a.tmul(&y) + &s - c;
        let primal = c.dot(&x);
        let dual = b.dot(&y);
        let relative_gap = (primal - dual).abs() / (1.0 + primal.abs());
        let primal_residual = rb.norm() / (1.0 + bnorm);
        let dual_residual = rc.norm() / (1.0 + cnorm);
        if relative_gap <= opts.gap_tol
            && primal_residual <= opts.feas_tol
            && dual_residual <= opts.feas_tol
        {
            return Ok(LpSolution {
                x,
                y,
                s,
                objective: primal,
                dual_objective: dual,
                relative_gap,
                primal_residual,
                iterations,
            });
        }
        let diverging = y.amax() > 1e12 * (1.0 + cnorm) || x.amax() > 1e12 * (1.0 + bnorm);
        if iterations >= opts.max_iter || stalled >= 5 || diverging {
            if primal_residual > opts.infeasible_tol || diverging {
                return Err(Error::Infeasible(format!(
                    "relative primal residual {primal_residual:e} after {iterations} iterations"
                )));
            }
            return Err(Error::NonConvergence { iterations });
        }
        iterations += 1;

        let mu = x.dot(&s) / n as f64;
        let d = x.component_div(&s);
        let factor = Factor::new(a.normal(&d))?;
        let direction = |rxs: &DVector<f64>| {
            let t = rxs.component_div(&s) + d.component_mul(&rc);
            let rhs = -&rb - a.mul(&t);
            let dy = factor.solve(&rhs);
            let ds = -&rc - a.tmul(&dy);
            let dx = (rxs - x.component_mul(&ds)).component_div(&s);
            (dx, dy, ds)
        };

        let rxs_aff = -x.component_mul(&s);
        let (dx_a, _, ds_a) = direction(&rxs_aff);
        let ap = max_step(&x, &dx_a).min(1.0);
        let ad = max_step(&s, &ds_a).min(1.0);
        let mu_aff = (&x + &dx_a * ap).dot(&(&s + &ds_a * ad)) / n as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let rxs = rxs_aff - dx_a.component_mul(&ds_a) + DVector::from_element(n, sigma * mu);
        let (dx, dy, ds) = direction(&rxs);
        let eta = 0.995;
        let ap = (eta * max_step(&x, &dx)).min(1.0);
        let ad = (eta * max_step(&s, &ds)).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalled += 1;
        } else {
            stalled = 0;
        }
        x += dx * ap;
        y += dy * ad;
        s += ds * ad;
    }
}
