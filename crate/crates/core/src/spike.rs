//! Spike recovery from moments: a matrix-pencil path on the cosine moments
//! and a grid linear program minimizing the TV norm.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{change_of_basis, eval_all, moments_of_dirac, BasisKind, BasisSpec, MomentVector};
use crate::linalg::{lstsq_real, residual_norm};
use crate::lp::{self, Dense, IpmOptions, Signed};
use crate::model::{clamp_unit, DiracMeasure};
use crate::{Error, Result};

/// Relative forward-model residual above which a recovery is rejected.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Eigenvalues farther than this from the unit circle make the input ill-posed.
pub const UNIT_CIRCLE_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pencil,
    Lp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pencil => "pencil",
            Method::Lp => "lp",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pencil" => Ok(Method::Pencil),
            "lp" => Ok(Method::Lp),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    /// Relative singular-value cutoff for model-order estimation.
    pub pencil_rank_tol: f64,
    /// Grid points for the LP; `None` means `16 N + 1`.
    pub lp_grid_size: Option<usize>,
    pub lp_nonnegative: bool,
    /// Atoms with smaller weight modulus are dropped.
    pub coefficient_tol: f64,
    /// Largest number of atoms the pencil may return; `None` means `(N - 1) / 2`.
    pub max_model_order: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Pencil,
            pencil_rank_tol: 1e-8,
            lp_grid_size: None,
            lp_nonnegative: false,
            coefficient_tol: 1e-10,
            max_model_order: None,
        }
    }
}

impl SolverOptions {
    pub fn lp() -> Self {
        Self { method: Method::Lp, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pencil_rank_tol > 0.0) || !(self.coefficient_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if matches!(self.lp_grid_size, Some(g) if g < 2) {
            return Err(Error::InvalidInput("lp_grid_size must be at least 2".into()));
        }
        Ok(())
    }

    pub fn grid_size(&self, n: usize) -> usize {
        self.lp_grid_size.unwrap_or(16 * n + 1)
    }

    pub fn model_order(&self, n: usize) -> usize {
        self.max_model_order.unwrap_or(n.saturating_sub(1) / 2)
    }
}

/// Cosine moments `s_k = sum_m c_m cos(k t_m)`, `t_m = arccos x_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecastMoments {
    pub n: usize,
    pub s: Vec<Complex64>,
}

/// Chebyshev moments are exactly the cosine moments of the recast problem.
pub fn recast_moments(y: &MomentVector) -> Result<RecastMoments> {
    let cheb = change_of_basis(y, BasisSpec::chebyshev(y.degree()))?;
    Ok(RecastMoments { n: y.degree(), s: cheb.into_values() })
}

struct PencilOutcome {
    t: Vec<f64>,
    rank: usize,
}

/// Nodes `t_m` of `s_k = sum_m c_m cos(k t_m)`, sorted increasing.
///
/// The sequence is extended symmetrically to `e_n = s_{|n - N|}` for
/// `n = 0..=2N`, an exponential sum with nodes `e^{+-i t_m}`, and the
/// Hankel pencil of `e` yields the nodes as eigenvalues. Atoms at the
/// interval ends (`t = 0` or `pi`) produce a single node and are returned as
/// `0` or `pi`.
pub fn matrix_pencil(s: &RecastMoments, opts: &SolverOptions) -> Result<Vec<f64>> {
    opts.validate()?;
    let max = opts.model_order(s.n);
    if s.n < 2 * max + 1 {
        return Err(Error::InvalidInput(format!(
            "N = {} too small for model order {max}",
            s.n
        )));
    }
    pencil(s, opts.pencil_rank_tol, max, true).map(|o| o.t)
}

/// [`matrix_pencil`] that clamps the order and skips off-circle nodes
/// instead of failing; used where a later residual check decides.
pub(crate) fn pencil_nodes(s: &RecastMoments, opts: &SolverOptions) -> Result<Vec<f64>> {
    pencil(s, opts.pencil_rank_tol, opts.model_order(s.n), false).map(|o| o.t)
}

fn pencil(s: &RecastMoments, rank_tol: f64, max_order: usize, strict: bool) -> Result<PencilOutcome> {
    let n = s.n;
    if s.s.len() != n + 1 {
        return Err(Error::Shape(format!("{} cosine moments for N = {n}", s.s.len())));
    }
    let zero = Complex64::new(0.0, 0.0);
    if n == 0 || s.s.iter().all(|v| *v == zero) {
        return Ok(PencilOutcome { t: vec![], rank: 0 });
    }
    let e = |i: usize| s.s[i.abs_diff(n)];
    let h = DMatrix::from_fn(n + 1, n + 1, |i, j| e(i + j));
    let svd = h.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[order[0]];
    if smax == 0.0 {
        return Ok(PencilOutcome { t: vec![], rank: 0 });
    }
    let mut rank = order
        .iter()
        .take_while(|&&i| svd.singular_values[i] > rank_tol * smax)
        .count();
    // an order of 2M + 1 arises with one endpoint atom
    let cap = 2 * max_order + 1;
    if rank > cap.min(n) {
        if strict {
            return Err(Error::OrderEstimation { estimated: rank.div_ceil(2), max: max_order });
        }
        rank = cap.min(n);
    }
    // The leading left singular vectors span the node Vandermonde. The
    // complex SVD leaves ~1e-5 of the complement in them, so one step of
    // subspace iteration cleans them up.
    let u_k = DMatrix::from_fn(n + 1, rank, |i, j| u[(i, order[j])]);
    let inv_sigma = |mut m: DMatrix<Complex64>| {
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col /= Complex64::new(svd.singular_values[order[j]], 0.0);
        }
        m
    };
    let v_k = inv_sigma(h.adjoint() * u_k);
    let w = inv_sigma(&h * v_k).qr().q();
    let w0 = w.rows(0, n).into_owned();
    let w1 = w.rows(1, n).into_owned();
    let qr = w0.qr();
    let psi = qr
        .r()
        .solve_upper_triangular(&(qr.q().adjoint() * &w1))
        .ok_or_else(|| Error::IllPosed("singular shifted subspace".into()))?;
    let (_, tri) = psi.schur().unpack();
    let end_tol = 1e-6;
    let mut t = Vec::with_capacity(rank);
    let (mut left_end, mut right_end) = (false, false);
    for k in 0..rank {
        let z = tri[(k, k)];
        if (z.norm() - 1.0).abs() > UNIT_CIRCLE_TOL {
            if strict {
                return Err(Error::IllPosed(format!("pencil node {z} is off the unit circle")));
            }
            continue;
        }
        let theta = z.arg();
        if theta.abs() <= end_tol {
            left_end = true;
        } else if theta.abs() >= PI - end_tol {
            right_end = true;
        } else if theta > 0.0 {
            t.push(theta);
        }
    }
    if left_end {
        t.push(0.0);
    }
    if right_end {
        t.push(PI);
    }
    t.sort_by(f64::total_cmp);
    Ok(PencilOutcome { t, rank })
}

/// Least-squares weights with their forward residual `||A c - y||`.
#[derive(Debug, Clone)]
pub struct CoefficientFit {
    pub weights: Vec<Complex64>,
    pub residual: f64,
}

/// `[P_k(x_m)] c = y` by QR.
pub fn solve_coefficients(locations: &[f64], y: &MomentVector) -> Result<CoefficientFit> {
    let basis = y.basis();
    if locations.len() > basis.len() {
        return Err(Error::DegenerateLocations(format!(
            "{} locations exceed {} moments",
            locations.len(),
            basis.len()
        )));
    }
    let xs: Vec<f64> = locations.iter().map(|&x| clamp_unit(x)).collect::<Result<_>>()?;
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[1] - w[0] <= 1e-14) {
        return Err(Error::DegenerateLocations("repeated locations".into()));
    }
    let a = collocation(basis, &xs);
    let fit = lstsq_real(&a, y.values(), 1e-12)?;
    Ok(CoefficientFit { weights: fit.solution, residual: fit.residual })
}

fn collocation(basis: BasisSpec, xs: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(basis.len(), xs.len());
    for (j, &x) in xs.iter().enumerate() {
        for (k, p) in eval_all(basis.kind, basis.degree, x).into_iter().enumerate() {
            a[(k, j)] = p;
        }
    }
    a
}

/// A recovered measure together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct SpikeRecovery {
    pub measure: DiracMeasure,
    /// `||moments(measure) - y|| / ||y||` in the input basis (0 for `y = 0`).
    pub relative_residual: f64,
    /// Pencil rank or LP iteration count.
    pub model_order: usize,
    pub lp_objective: Option<f64>,
}

/// Recovers the measure by the method selected in `opts`.
pub fn recover_spikes(y: &MomentVector, opts: &SolverOptions) -> Result<DiracMeasure> {
    recover_spikes_report(y, opts).map(|r| r.measure)
}

pub fn recover_spikes_report(y: &MomentVector, opts: &SolverOptions) -> Result<SpikeRecovery> {
    opts.validate()?;
    match opts.method {
        Method::Pencil => pencil_recover(y, opts),
        Method::Lp => {
            let lp = tv_lp_solve(y, opts)?;
            let relative_residual = forward_residual(&lp.measure, y);
            Ok(SpikeRecovery {
                measure: lp.measure,
                relative_residual,
                model_order: lp.iterations,
                lp_objective: Some(lp.objective),
            })
        }
    }
}

fn forward_residual(m: &DiracMeasure, y: &MomentVector) -> f64 {
    let fwd = moments_of_dirac(m, y.basis());
    let diff: f64 = fwd
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let norm = y.norm();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

fn pencil_recover(y: &MomentVector, opts: &SolverOptions) -> Result<SpikeRecovery> {
    let recast = recast_moments(y)?;
    let cheb = MomentVector::new(BasisSpec::chebyshev(y.degree()), recast.s.clone())?;
    let max = opts.model_order(recast.n);
    let outcome = pencil(&recast, opts.pencil_rank_tol, max, false)?;
    let mut xs: Vec<f64> = outcome.t.iter().map(|t| t.cos()).collect();
    let mut weights = if xs.is_empty() {
        vec![]
    } else {
        solve_coefficients(&xs, &cheb)?.weights
    };
    let keep: Vec<bool> = weights.iter().map(|w| w.norm() >= opts.coefficient_tol).collect();
    if keep.iter().any(|k| !k) {
        xs = xs.iter().zip(&keep).filter(|(_, &k)| k).map(|(&x, _)| x).collect();
        weights = if xs.is_empty() {
            vec![]
        } else {
            solve_coefficients(&xs, &cheb)?.weights
        };
    }
    let measure = DiracMeasure::new(
        xs.into_iter()
            .zip(weights)
            
    )?;
    let relative_residual = forward_residual(&measure, y);
    if relative_residual > RESIDUAL_TOL {
        return Err(Error::RecoveryInconsistent {
            residual: relative_residual,
            tolerance: RESIDUAL_TOL,
        });
    }
    Ok(SpikeRecovery {
        measure,
        relative_residual,
        model_order: outcome.rank,
        lp_objective: None,
    })
}

/// Full LP output on the grid.
#[derive(Debug, Clone)]
pub struct LpRecovery {
    /// Grid nodes in `t`, uniform on `[0, pi]`.
    pub grid_t: Vec<f64>,
    /// `cos(grid_t)`.
    pub grid_x: Vec<f64>,
    /// Signed grid weights `c+ - c-` (or `c` in nonnegative mode).
    pub raw: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Clustered atoms.
    pub measure: DiracMeasure,
}

/// `sum_j c_j delta_{grid_j}` of least TV norm matching `y`.
pub fn tv_lp_recover(y: &MomentVector, opts: &SolverOptions) -> Result<DiracMeasure> {
    tv_lp_solve(y, opts).map(|r| r.measure)
}

pub fn lp_grid(size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![PI / 2.0];
    }
    (0..size).map(|j| PI * j as f64 / (size - 1) as f64).collect()
}

pub fn tv_lp_solve(y: &MomentVector, opts: &SolverOptions) -> Result<LpRecovery> {
    opts.validate()?;
    let n = y.degree();
    let ynorm = y.norm();
    if !y.is_real(1e-12 * ynorm.max(1.0)) {
        return Err(Error::InvalidInput(
            "the LP path needs real moments; use the pencil path for complex weights".into(),
        ));
    }
    let size = opts.grid_size(n);
    let grid_t = lp_grid(size);
    let grid_x: Vec<f64> = grid_t.iter().map(|t| t.cos()).collect();
    if ynorm == 0.0 {
        return Ok(LpRecovery {
            grid_t,
            grid_x,
            raw: vec![0.0; size],
            objective: 0.0,
            iterations: 0,
            measure: DiracMeasure::empty(),
        });
    }
    let cheb = change_of_basis(y, BasisSpec::chebyshev(n))?;
    let b = DVector::from_iterator(n + 1, cheb.values().iter().map(|v| v.re));
    let a = DMatrix::from_fn(n + 1, size, |k, j| (k as f64 * grid_t[j]).cos());
    let ipm = IpmOptions::default();
    let (raw, sol) = if opts.lp_nonnegative {
        let sol = lp::solve(&Dense(&a), &b, &DVector::from_element(size, 1.0), &ipm)?;
        (sol.x.iter().copied().collect::<Vec<_>>(), sol)
    } else {
        let sol = lp::solve(&Signed(&a), &b, &DVector::from_element(2 * size, 1.0), &ipm)?;
        ((0..size).map(|j| sol.x[j] - sol.x[size + j]).collect(), sol)
    };
    let measure = cluster(&grid_t, &raw, &cheb, opts.coefficient_tol)?;
    Ok(LpRecovery {
        grid_t,
        grid_x,
        raw,
        objective: sol.objective,
        iterations: sol.iterations,
        measure,
    })
}

/// Groups runs of adjacent same-sign active grid points into atoms at their
/// mass-weighted centroid (in `t`), then refits the weights.
///
/// Interior-point solutions carry small residue next to true atoms, which can
/// chain neighbours together or leave isolated specks. Several activity
/// thresholds are tried and the sparsest refit that reproduces the moments wins.
fn cluster(grid_t: &[f64], raw: &[f64], cheb: &MomentVector, coefficient_tol: f64) -> Result<DiracMeasure> {
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(DiracMeasure::empty());
    }
    let scale = cheb.norm().max(f64::MIN_POSITIVE);
    let mut best: Option<(DiracMeasure, f64)> = None;
    for rel in [1e-7, 1e-5, 1e-3] {
        let active = (rel * peak).max(coefficient_tol * 1e-2);
        let (measure, residual) = cluster_at(grid_t, raw, cheb, active, coefficient_tol)?;
        let residual = residual / scale;
        best = match best {
            None => Some((measure, residual)),
            Some((b, r)) => {
                let sparser = measure.len() < b.len() && residual <= CLUSTER_FIT_TOL;
                if sparser || (r > CLUSTER_FIT_TOL && residual < r) {
                    Some((measure, residual))
                } else {
                    Some((b, r))
                }
            }
        };
    }
    Ok(best.expect("at least one threshold").0)
}

const CLUSTER_FIT_TOL: f64 = 1e-9;

fn cluster_at(
    grid_t: &[f64],
    raw: &[f64],
    cheb: &MomentVector,
    active: f64,
    coefficient_tol: f64,
) -> Result<(DiracMeasure, f64)> {
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut current: Option<(f64, f64, f64, usize)> = None;
    for (j, (&t, &v)) in grid_t.iter().zip(raw).enumerate() {
        if v.abs() <= active {
            continue;
        }
        match current {
            Some((mass, moment, weight, last)) if last + 1 == j && weight.signum() == v.signum() => {
                current = Some((mass + v.abs(), moment + v.abs() * t, weight + v, j));
            }
            _ => {
                if let Some((mass, moment, weight, _)) = current {
                    groups.push((moment / mass, weight));
                }
                current = Some((v.abs(), v.abs() * t, v, j));
            }
        }
    }
    if let Some((mass, moment, weight, _)) = current {
        groups.push((moment / mass, weight));
    }
    let xs: Vec<f64> = groups.iter().map(|(t, _)| t.cos()).collect();
    let fitted = solve_coefficients(&xs, cheb)
        .map(|f| f.weights)
        .unwrap_or_else(|_| groups.iter().map(|&(_, w)| Complex64::new(w, 0.0)).collect());
    let measure = DiracMeasure::new(
        xs.into_iter()
            .zip(fitted)
            .filter(|(_, w)| w.norm() >= coefficient_tol)
            .map(|(location, w)| (location, Complex64::new(w.re, 0.0))),
    )?;
    let residual = residual_norm(
        &collocation(cheb.basis(), &measure.locations()),
        &measure.weights(),
        cheb.values(),
    );
    Ok((measure, residual))
}

/// Reports whether `kind` is used with a degree where conversion is lossy.
pub fn basis_warning(basis: BasisSpec) -> Option<String> {
    (basis.kind == BasisKind::Monomial && basis.degree > crate::basis::MONOMIAL_ACCURATE_DEGREE).then(|| {
        format!(
            "monomial moments with N = {} > {} lose accuracy in conversion",
            basis.degree,
            crate::basis::MONOMIAL_ACCURATE_DEGREE
        )
    })
}
