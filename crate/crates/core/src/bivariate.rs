//! Two-dimensional counterparts on `[-1, 1]^2` with tensor Chebyshev moments.
//!
//! Separation is measured by the componentwise maximum of the arccos metric.
//! Two threshold constants are in circulation for the guarantee, `4.76 pi / N`
//! and `5.76 pi / N`; the larger one is the default here and the smaller can
//! be selected explicitly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{conversion_matrix, eval_all, BasisKind, BasisSpec};
use crate::certificate::{golden_max, CONDITION_WARNING};
use crate::kernel::JacksonKernel;
use crate::linalg::{lstsq_real, solve_equilibrated};
use crate::lp::{self, Dense, IpmOptions, Signed};
use crate::model::{clamp_unit, separation_window, CLAMP_TOL};
use crate::spike::{lp_grid, SolverOptions};
use crate::{Error, Result};

/// Threshold factor backed by the kernel bounds used in the construction.
pub const SAFE_FACTOR_2D: f64 = 5.76;
/// Smaller factor that also appears in statements of the 2D condition.
pub const STATED_FACTOR_2D: f64 = 4.76;
/// Degree from which the 2D guarantee applies.
pub const MIN_GUARANTEED_DEGREE_2D: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom2D {
    pub location: [f64; 2],
    pub weight: f64,
}

/// Real Dirac train on the square.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiracMeasure2D {
    atoms: Vec<Atom2D>,
}

impl DiracMeasure2D {
    /// Drops zero weights, clamps locations and rejects coincident points.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = ([f64; 2], f64)>,
    {
        let mut out: Vec<Atom2D> = Vec::new();
        for ([a, b], w) in atoms {
            if !w.is_finite() {
                return Err(Error::InvalidInput(format!("weight {w} is not finite")));
            }
            if w == 0.0 {
                continue;
            }
            out.push(Atom2D { location: [clamp_unit(a)?, clamp_unit(b)?], weight: w });
        }
        out.sort_by(|p, q| {
            p.location[0]
                .total_cmp(&q.location[0])
                .then(p.location[1].total_cmp(&q.location[1]))
        });
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                let (p, q) = (out[i].location, out[j].location);
                if (p[0] - q[0]).abs() <= CLAMP_TOL && (p[1] - q[1]).abs() <= CLAMP_TOL {
                    return Err(Error::InvalidInput(format!("duplicate location {p:?}")));
                }
            }
        }
        Ok(Self { atoms: out })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom2D] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn locations(&self) -> Vec<[f64; 2]> {
        self.atoms.iter().map(|a| a.location).collect()
    }

    pub fn tv_norm(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }
}

/// `P(x) = sum b[k1][k2] T_k1(x1) T_k2(x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePoly {
    pub degree: usize,
    pub cheb_coeffs: DMatrix<f64>,
}

impl BivariatePoly {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let t1 = eval_all(BasisKind::Chebyshev, self.degree, x[0]);
        let t2 = eval_all(BasisKind::Chebyshev, self.degree, x[1]);
        let v = &self.cheb_coeffs * DVector::from_vec(t2);
        t1.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
    }

    /// `Q(t1, t2) = P(cos t1, cos t2)`.
    pub fn eval_t(&self, t: [f64; 2]) -> f64 {
        self.eval([t[0].cos(), t[1].cos()])
    }

    /// Values on the tensor grid `t1 x t2`: `C1 B C2'`.
    pub fn eval_grid(&self, t1: &[f64], t2: &[f64]) -> DMatrix<f64> {
        let c1 = cos_matrix(t1, self.degree);
        let c2 = cos_matrix(t2, self.degree);
        &c1 * &self.cheb_coeffs * c2.transpose()
    }
}

/// `C[i][k] = cos(k t_i)`.
fn cos_matrix(t: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(t.len(), n + 1, |i, k| (k as f64 * t[i]).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport2D {
    pub satisfied: bool,
    pub factor: f64,
    /// `factor * pi / N`.
    pub threshold: f64,
    /// Smallest componentwise-max distance between two points.
    pub min_pair_distance: Option<f64>,
    pub domain_violations: Vec<[f64; 2]>,
    pub pair_violations: Vec<(usize, usize)>,
    pub below_theorem_degree: bool,
    /// Set when the factor is below [`SAFE_FACTOR_2D`].
    pub below_safe_factor: bool,
    pub window: (f64, f64),
}

/// `max(rho(x_i(1), x_j(1)), rho(x_i(2), x_j(2))) >= factor * pi / N` plus
/// the per-coordinate window.
pub fn check_separation_2d(locations: &[[f64; 2]], n: usize, factor: f64) -> Result<SeparationReport2D> {
    if n == 0 || !(factor > 0.0) {
        return Err(Error::InvalidInput("N and factor must be positive".into()));
    }
    let threshold = factor * PI / n as f64;
    let window = separation_window(n);
    let mut ts = Vec::with_capacity(locations.len());
    let mut domain_violations = Vec::new();
    for p in locations {
        let a = clamp_unit(p[0])?;
        let b = clamp_unit(p[1])?;
        let outside = |v: f64| v < window.0 - CLAMP_TOL || v > window.1 + CLAMP_TOL;
        if outside(a) || outside(b) {
            domain_violations.push(*p);
        }
        ts.push([a.acos(), b.acos()]);
    }
    let mut min_pair = None::<f64>;
    let mut pair_violations = Vec::new();
    for i in 0..ts.len() {
        for j in i + 1..ts.len() {
            let d = (ts[i][0] - ts[j][0]).abs().max((ts[i][1] - ts[j][1]).abs());
            min_pair = Some(min_pair.map_or(d, |m: f64| m.min(d)));
            if d < threshold - CLAMP_TOL {
                pair_violations.push((i, j));
            }
        }
    }
    Ok(SeparationReport2D {
        satisfied: domain_violations.is_empty() && pair_violations.is_empty(),
        factor,
        threshold,
        min_pair_distance: min_pair,
        domain_violations,
        pair_violations,
        below_theorem_degree: n < MIN_GUARANTEED_DEGREE_2D,
        below_safe_factor: factor < SAFE_FACTOR_2D,
        window,
    })
}

/// `Y[k1][k2] = sum_m c_m T_k1(x_m(1)) T_k2(x_m(2))`.
pub fn moments_2d(m: &DiracMeasure2D, n: usize) -> DMatrix<f64> {
    moments_2d_in(m, BasisSpec::chebyshev(n))
}

/// Tensor moments against `basis` on both axes.
pub fn moments_2d_in(m: &DiracMeasure2D, basis: BasisSpec) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(basis.len(), basis.len());
    for a in m.atoms() {
        let p1 = DVector::from_vec(eval_all(basis.kind, basis.degree, a.location[0]));
        let p2 = DVector::from_vec(eval_all(basis.kind, basis.degree, a.location[1]));
        y += (p1 * p2.transpose()) * a.weight;
    }
    y
}

/// Converts tensor moments between bases, `C Y C'` with the 1D conversion `C`.
pub fn change_of_basis_2d(y: &DMatrix<f64>, source: BasisSpec, target: BasisKind) -> Result<DMatrix<f64>> {
    if y.nrows() != source.len() || y.ncols() != source.len() {
        return Err(Error::Shape(format!(
            "{}x{} moments for degree {}",
            y.nrows(),
            y.ncols(),
            source.degree
        )));
    }
    let c = conversion_matrix(source, target);
    Ok(&c * y * c.transpose())
}

/// A 2D dual polynomial with construction diagnostics.
#[derive(Debug, Clone)]
pub struct Certificate2D {
    pub poly: BivariatePoly,
    pub separation: SeparationReport2D,
    pub kernel_degree: usize,
    pub condition: f64,
    /// Largest imaginary part discarded after the four-fold average.
    pub imaginary_residue: f64,
    pub warnings: Vec<String>,
}

fn check_signs(signs: &[f64]) -> Result<()> {
    for (i, s) in signs.iter().enumerate() {
        if (s.abs() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("sign {i} is {s}, expected +-1")));
        }
    }
    Ok(())
}

/// Construction gated by the safe separation factor.
pub fn build_certificate_2d(locations: &[[f64; 2]], signs: &[f64], n: usize) -> Result<Certificate2D> {
    build_certificate_2d_with(locations, signs, n, SAFE_FACTOR_2D)
}

pub fn build_certificate_2d_with(
    locations: &[[f64; 2]],
    signs: &[f64],
    n: usize,
    factor: f64,
) -> Result<Certificate2D> {
    let rep = check_separation_2d(locations, n, factor)?;
    if !rep.satisfied {
        return Err(Error::Separation(format!(
            "{} window violations, {} close pairs (threshold {factor} pi / N)",
            rep.domain_violations.len(),
            rep.pair_violations.len()
        )));
    }
    build_certificate_2d_unchecked(locations, signs, n, factor)
}

/// Reflect into four quadrants, interpolate with tensor kernels, average.
pub fn build_certificate_2d_unchecked(
    locations: &[[f64; 2]],
    signs: &[f64],
    n: usize,
    factor: f64,
) -> Result<Certificate2D> {
    if locations.is_empty() || locations.len() != signs.len() {
        return Err(Error::Shape(format!(
            "{} locations with {} signs",
            locations.len(),
            signs.len()
        )));
    }
    check_signs(signs)?;
    let separation = check_separation_2d(locations, n, factor)?;
    let kernel = JacksonKernel::new(n);
    let d = kernel.degree();
    if d == 0 {
        return Err(Error::InvalidInput(format!("degree {n} too small for the kernel")));
    }
    let mut warnings = Vec::new();
    if d != n {
        warnings.push(format!("kernel degree rounded down from {n} to {d}"));
    }
    if separation.below_theorem_degree {
        warnings.push(format!("N = {n} is below {MIN_GUARANTEED_DEGREE_2D}"));
    }
    if separation.below_safe_factor {
        warnings.push(format!("separation factor {factor} is below {SAFE_FACTOR_2D}"));
    }

    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(4 * locations.len());
    let mut vals: Vec<f64> = Vec::with_capacity(4 * locations.len());
    for (p, &s) in locations.iter().zip(signs) {
        let base = [-clamp_unit(p[0])?.acos(), -clamp_unit(p[1])?.acos()];
        for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            pts.push([a * base[0], b * base[1]]);
            vals.push(s);
        }
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (pts[i][0] - pts[j][0]).abs() < 1e-14 && (pts[i][1] - pts[j][1]).abs() < 1e-14 {
                return Err(Error::ReflectionCollision(pts[i][0]));
            }
        }
    }

    let p = pts.len();
    let mut sys = DMatrix::zeros(3 * p, 3 * p);
    for i in 0..p {
        for j in 0..p {
            let (a0, a1, a2) = kernel.eval3(pts[i][0] - pts[j][0]);
            let (b0, b1, b2) = kernel.eval3(pts[i][1] - pts[j][1]);
            let blocks = [
                [a0 * b0, a1 * b0, a0 * b1],
                [a1 * b0, a2 * b0, a1 * b1],
                [a0 * b1, a1 * b1, a0 * b2],
            ];
            for (r, row) in blocks.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    sys[(r * p + i, c * p + j)] = *v;
                }
            }
        }
    }
    let mut rhs: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    rhs.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(2 * p));
    let solved = solve_equilibrated(&sys, &rhs)?;
    if solved.condition > CONDITION_WARNING {
        warnings.push(format!(
            "interpolation system condition estimate {:.3e} exceeds {CONDITION_WARNING:e}",
            solved.condition
        ));
    }
    let z = &solved.solution;
    let (a, b, c) = (&z[..p], &z[p..2 * p], &z[2 * p..]);

    // q[k1][k2] = Kh(k1) Kh(k2) sum_j (a_j + i k1 b_j + i k2 c_j) e^{-i (k1 t_j1 + k2 t_j2)}
    let di = d as isize;
    let ks: Vec<isize> = (-di..=di).collect();
    let e = |axis: usize| {
        DMatrix::from_fn(ks.len(), p, |r, j| Complex64::from_polar(1.0, -(ks[r] as f64) * pts[j][axis]))
    };
    let (e1, e2) = (e(0), e(1));
    let weighted = |w: &[Complex64]| {
        let mut m = e1.clone();
        for (j, wj) in w.iter().enumerate() {
            for v in m.column_mut(j).iter_mut() {
                *v *= *wj;
            }
        }
        m * e2.transpose()
    };
    let qa = weighted(a);
    let qb = weighted(b);
    let qc = weighted(c);
    let mut coeffs = DMatrix::zeros(d + 1, d + 1);
    let mut imag = DMatrix::<f64>::zeros(d + 1, d + 1);
    for (r1, &k1) in ks.iter().enumerate() {
        let w1 = kernel.coeff(k1);
        for (r2, &k2) in ks.iter().enumerate() {
            let w = w1 * kernel.coeff(k2);
            if w == 0.0 {
                continue;
            }
            let i = Complex64::new(0.0, 1.0);
            let q = (qa[(r1, r2)] + i * (k1 as f64) * qb[(r1, r2)] + i * (k2 as f64) * qc[(r1, r2)]) * w;
            let (u, v) = (k1.unsigned_abs(), k2.unsigned_abs());
            coeffs[(u, v)] += q.re;
            imag[(u, v)] += q.im;
        }
    }
    let mut full = DMatrix::zeros(n + 1, n + 1);
    full.view_mut((0, 0), (d + 1, d + 1)).copy_from(&coeffs);
    Ok(Certificate2D {
        poly: BivariatePoly { degree: n, cheb_coeffs: full },
        separation,
        kernel_degree: d,
        condition: solved.condition,
        imaginary_residue: imag.amax(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions2D {
    pub grid_points_per_degree: usize,
    /// Componentwise-max radius; `None` means `(4 pi / N) / 100`.
    pub exclusion_radius: Option<f64>,
    pub interp_tol: f64,
    pub eval_tol: f64,
}

impl Default for VerifyOptions2D {
    fn default() -> Self {
        Self {
            grid_points_per_degree: 4,
            exclusion_radius: None,
            interp_tol: 1e-9,
            eval_tol: 1e-9,
        }
    }
}

/// Same semantics as the 1D report; `off_support_argmax` holds `[x1, x2]`.
pub type CertificateReport2D = crate::certificate::CertificateReport;

/// Tensor-grid scan in `(t1, t2)` with alternating golden-section refinement
/// of the larger local maxima.
pub fn verify_certificate_2d(
    p: &BivariatePoly,
    locations: &[[f64; 2]],
    signs: &[f64],
    opts: &VerifyOptions2D,
) -> Result<CertificateReport2D> {
    if locations.len() != signs.len() {
        return Err(Error::Shape(format!(
            "{} locations with {} signs",
            locations.len(),
            signs.len()
        )));
    }
    if opts.grid_points_per_degree < 4 {
        return Err(Error::InvalidInput("grid_points_per_degree must be >= 4".into()));
    }
    let n = p.degree.max(1);
    let radius = opts.exclusion_radius.unwrap_or(4.0 * PI / n as f64 / 100.0);
    let taus: Vec<[f64; 2]> = locations
        .iter()
        .map(|q| Ok([clamp_unit(q[0])?.acos(), clamp_unit(q[1])?.acos()]))
        .collect::<Result<_>>()?;
    let interpolation_residual = locations
        .iter()
        .zip(signs)
        .map(|(&x, &s)| (p.eval(x) - s).abs())
        .fold(0.0, f64::max);
    let dist = |t: [f64; 2]| {
        taus.iter()
            .map(|q| (t[0] - q[0]).abs().max((t[1] - q[1]).abs()))
            .fold(f64::INFINITY, f64::min)
    };

    let count = opts.grid_points_per_degree * n + 1;
    let h = PI / (count - 1) as f64;
    let grid: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
    let vals = p.eval_grid(&grid, &grid).map(f64::abs);

    let mut off_max = 0.0f64;
    let mut off_arg = None::<[f64; 2]>;
    let mut near_max = 0.0f64;
    let mut record = |t: [f64; 2], v: f64| {
        if dist(t) >= radius {
            if v > off_max {
                off_max = v;
                off_arg = Some(t);
            }
        } else {
            near_max = near_max.max(v);
        }
    };
    let mut maxima = Vec::new();
    for i in 0..count {
        for j in 0..count {
            let v = vals[(i, j)];
            record([grid[i], grid[j]], v);
            let mut is_max = true;
            'nb: for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= count as isize || b >= count as isize {
                        continue;
                    }
                    if vals[(a as usize, b as usize)] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                maxima.push((v, i, j));
            }
        }
    }
    // only maxima that could matter for the strict bound are refined
    let grid_top = maxima.iter().map(|m| m.0).fold(0.0, f64::max);
    maxima.retain(|m| m.0 >= 0.5 * grid_top.min(1.0));
    let refined = maxima.len();
    for &(_, i, j) in &maxima {
        let (t, v) = refine_2d(p, [grid[i], grid[j]], h);
        record(t, v);
    }
    for q in &taus {
        record(*q, p.eval_t(*q).abs());
        for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let t = [q[0] + a * radius, q[1] + b * radius];
            if (0.0..=PI).contains(&t[0]) && (0.0..=PI).contains(&t[1]) {
                record(t, p.eval_t(t).abs());
            }
        }
    }
    let near_knot_ok = near_max <= 1.0 + opts.eval_tol;
    let passed = interpolation_residual <= opts.interp_tol && off_max < 1.0 && near_knot_ok;
    Ok(CertificateReport2D {
        interpolation_residual,
        off_support_max: off_max,
        off_support_argmax: off_arg.map(|t| vec![t[0].cos(), t[1].cos()]),
        near_knot_max: near_max,
        near_knot_ok,
        grid_size: count * count,
        exclusion_radius: radius,
        refined_maxima: refined,
        passed,
    })
}

/// Alternating 1D golden-section searches on `|Q|` inside one grid cell.
fn refine_2d(p: &BivariatePoly, start: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let n = p.degree;
    let mut t = start;
    let lo = |v: f64| (v - h).max(0.0);
    let hi = |v: f64| (v + h).min(PI);
    let mut best = p.eval_t(t).abs();
    for _ in 0..8 {
        // axis 1 with t2 fixed: |T(cos t1) . (B T(cos t2))|
        let v = &p.cheb_coeffs * DVector::from_vec(eval_all(BasisKind::Chebyshev, n, t[1].cos()));
        let coeffs: Vec<Complex64> = v.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        let (a, _) = golden_max(
            |s| crate::certificate::clenshaw(&coeffs, s.cos()).norm(),
            lo(start[0]),
            hi(start[0]),
            1e-12,
        );
        t[0] = a;
        let w = p.cheb_coeffs.tr_mul(&DVector::from_vec(eval_all(BasisKind::Chebyshev, n, t[0].cos())));
        let coeffs: Vec<Complex64> = w.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        let (b, val) = golden_max(
            |s| crate::certificate::clenshaw(&coeffs, s.cos()).norm(),
            lo(start[1]),
            hi(start[1]),
            1e-12,
        );
        t[1] = b;
        if val - best <= 1e-15 {
            break;
        }
        best = val;
    }
    (t, p.eval_t(t).abs())
}

/// LP output in 2D.
#[derive(Debug, Clone)]
pub struct Recovery2D {
    pub measure: DiracMeasure2D,
    pub objective: f64,
    /// `||moments(measure) - Y||_F / ||Y||_F`.
    pub relative_residual: f64,
    /// Columns in the final restricted problem.
    pub working_set: usize,
    pub rounds: usize,
}

pub fn recover_spikes_2d(y: &DMatrix<f64>, opts: &SolverOptions) -> Result<DiracMeasure2D> {
    recover_spikes_2d_report(y, opts).map(|r| r.measure)
}

/// TV minimization over a tensor grid uniform in `(t1, t2)`, solved by
/// column generation: a greedy start makes the restricted problem feasible,
/// each restricted LP is solved on the row space of its columns, and grid
/// columns violating the dual constraint are added until none remain.
pub fn recover_spikes_2d_report(y: &DMatrix<f64>, opts: &SolverOptions) -> Result<Recovery2D> {
    opts.validate()?;
    let n1 = y.nrows();
    if n1 == 0 || y.ncols() != n1 {
        return Err(Error::Shape(format!("moment matrix {}x{} is not square", y.nrows(), y.ncols())));
    }
    let n = n1 - 1;
    let ynorm = y.norm();
    let size = opts.lp_grid_size.unwrap_or(2 * n + 1);
    if ynorm == 0.0 {
        return Ok(Recovery2D {
            measure: DiracMeasure2D::empty(),
            objective: 0.0,
            relative_residual: 0.0,
            working_set: 0,
            rounds: 0,
        });
    }
    let grid = lp_grid(size);
    let c = cos_matrix(&grid, n); // size x (N+1)
    let column = |i: usize, j: usize| -> DVector<f64> {
        DVector::from_fn(n1 * n1, |r, _| c[(i, r / n1)] * c[(j, r % n1)])
    };
    let yv = DVector::from_fn(n1 * n1, |r, _| y[(r / n1, r % n1)]);
    let nonneg = opts.lp_nonnegative;

    // greedy start
    let mut work: Vec<(usize, usize)> = Vec::new();
    let mut resid = y.clone();
    let limit = n1 * n1;
    while work.len() < limit {
        let corr = &c * &resid * c.transpose();
        let mut best = (0.0f64, 0usize, 0usize);
        for i in 0..size {
            for j in 0..size {
                let v = if nonneg { corr[(i, j)] } else { corr[(i, j)].abs() };
                if v > best.0 && !work.contains(&(i, j)) {
                    best = (v, i, j);
                }
            }
        }
        if best.0 == 0.0 {
            break;
        }
        work.push((best.1, best.2));
        let a = columns(&work, &column);
        let fit = lstsq_real(&a, &to_complex(&yv), 1e-12);
        let Ok(fit) = fit else {
            work.pop();
            break;
        };
        if fit.residual <= 1e-12 * ynorm {
            break;
        }
        let coef: Vec<f64> = fit.solution.iter().map(|z| z.re).collect();
        let r = &yv - &a * DVector::from_vec(coef);
        resid = DMatrix::from_fn(n1, n1, |i, j| r[i * n1 + j]);
    }

    let ipm = IpmOptions::default();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let a = columns(&work, &column);
        let qr = a.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let b = q.tr_mul(&yv);
        let m = work.len();
        let (weights, mu, objective) = if nonneg {
            let sol = lp::solve(&Dense(&r), &b, &DVector::from_element(m, 1.0), &ipm)?;
            (sol.x.iter().copied().collect::<Vec<_>>(), sol.y, sol.objective)
        } else {
            let sol = lp::solve(&Signed(&r), &b, &DVector::from_element(2 * m, 1.0), &ipm)?;
            ((0..m).map(|j| sol.x[j] - sol.x[m + j]).collect(), sol.y, sol.objective)
        };
        let lambda = &q * mu;
        let lam = DMatrix::from_fn(n1, n1, |i, j| lambda[i * n1 + j]);
        let score = &c * lam * c.transpose();
        let mut violators: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..size {
            for j in 0..size {
                let v = if nonneg { score[(i, j)] } else { score[(i, j)].abs() };
                if v > 1.0 + 1e-7 && !work.contains(&(i, j)) {
                    violators.push((v, i, j));
                }
            }
        }
        if violators.is_empty() || rounds >= 50 || work.len() >= limit {
            let measure = cluster_2d(&grid, &work, &weights, y, opts.coefficient_tol)?;
            let fwd = moments_2d(&measure, n);
            let relative_residual = (fwd - y).norm() / ynorm;
            return Ok(Recovery2D {
                measure,
                objective,
                relative_residual,
                working_set: work.len(),
                rounds,
            });
        }
        violators.sort_by(|p, q| q.0.total_cmp(&p.0));
        for &(_, i, j) in violators.iter().take(64) {
            work.push((i, j));
        }
    }
}

fn columns(work: &[(usize, usize)], column: &impl Fn(usize, usize) -> DVector<f64>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = work.iter().map(|&(i, j)| column(i, j)).collect();
    DMatrix::from_columns(&cols)
}

fn to_complex(v: &DVector<f64>) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Connected same-sign active cells become atoms at their mass-weighted
/// centroid in `t`; weights are refitted by least squares.
fn cluster_2d(
    grid: &[f64],
    work: &[(usize, usize)],
    weights: &[f64],
    y: &DMatrix<f64>,
    coefficient_tol: f64,
) -> Result<DiracMeasure2D> {
    let peak = weights.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(DiracMeasure2D::empty());
    }
    let active: Vec<usize> = (0..work.len())
        .filter(|&k| weights[k].abs() > 1e-7 * peak)
        .collect();
    let mut label = vec![usize::MAX; work.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &k in &active {
        if label[k] != usize::MAX {
            continue;
        }
        let g = groups.len();
        let mut stack = vec![k];
        label[k] = g;
        let mut members = Vec::new();
        while let Some(u) = stack.pop() {
            members.push(u);
            for &v in &active {
                if label[v] == usize::MAX
                    && weights[v].signum() == weights[u].signum()
                    && work[u].0.abs_diff(work[v].0) <= 1
                    && work[u].1.abs_diff(work[v].1) <= 1
                {
                    label[v] = g;
                    stack.push(v);
                }
            }
        }
        groups.push(members);
    }
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for members in &groups {
        let mass: f64 = members.iter().map(|&k| weights[k].abs()).sum();
        let t1: f64 = members.iter().map(|&k| weights[k].abs() * grid[work[k].0]).sum::<f64>() / mass;
        let t2: f64 = members.iter().map(|&k| weights[k].abs() * grid[work[k].1]).sum::<f64>() / mass;
        pts.push([t1.cos(), t2.cos()]);
        ws.push(members.iter().map(|&k| weights[k]).sum::<f64>());
    }
    let n1 = y.nrows();
    let n = n1 - 1;
    let cols: Vec<DVector<f64>> = pts
        .iter()
        .map(|p| {
            let a = eval_all(BasisKind::Chebyshev, n, p[0]);
            let b = eval_all(BasisKind::Chebyshev, n, p[1]);
            DVector::from_fn(n1 * n1, |r, _| a[r / n1] * b[r % n1])
        })
        .collect();
    if !cols.is_empty() {
        let a = DMatrix::from_columns(&cols);
        let yv: Vec<Complex64> = (0..n1 * n1).map(|r| Complex64::new(y[(r / n1, r % n1)], 0.0)).collect();
        if let Ok(fit) = lstsq_real(&a, &yv, 1e-12) {
            ws = fit.solution.iter().map(|z| z.re).collect();
        }
    }
    DiracMeasure2D::new(
        pts.into_iter()
            .zip(ws)
            .filter(|(_, w)| w.abs() >= coefficient_tol),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_examples() {
        let n = 512;
        let t = PI / 2.0;
        let p = [[t.cos(), 1.0f64.cos()], [(t + 4.76 * PI / n as f64).cos(), 1.0f64.cos()]];
        assert!(check_separation_2d(&p, n, STATED_FACTOR_2D).unwrap().satisfied);
        assert!(!check_separation_2d(&p, n, SAFE_FACTOR_2D).unwrap().satisfied);
        assert!(check_separation_2d(&[[0.0, 0.0]], n, SAFE_FACTOR_2D).unwrap().satisfied);
    }

    #[test]
    fn moment_examples() {
        let m = DiracMeasure2D::new([([0.0, 0.0], 1.0)]).unwrap();
        let y = moments_2d(&m, 8);
        for k1 in 0..=8 {
            for k2 in 0..=8 {
                let e = (k1 as f64 * PI / 2.0).cos() * (k2 as f64 * PI / 2.0).cos();
                assert!((y[(k1, k2)] - e).abs() < 1e-14);
            }
        }
        assert_eq!(moments_2d(&DiracMeasure2D::empty(), 4).amax(), 0.0);

        let m = DiracMeasure2D::new([([0.3, -0.2], 2.0), ([-0.7, 0.5], -1.5)]).unwrap();
        let y = moments_2d(&m, 10);
        for k1 in 0..=10 {
            for k2 in 0..=10 {
                let mut e = 0.0;
                for a in m.atoms() {
                    e += a.weight
                        * (k1 as f64 * a.location[0].acos()).cos()
                        * (k2 as f64 * a.location[1].acos()).cos();
                }
                assert!((y[(k1, k2)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn certificate_single_point() {
        let cert = build_certificate_2d_unchecked(&[[0.0, 0.0]], &[1.0], 64, SAFE_FACTOR_2D).unwrap();
        assert!((cert.poly.eval([0.0, 0.0]) - 1.0).abs() < 1e-8);
        assert!(cert.imaginary_residue < 1e-10);
        let opts = VerifyOptions2D { exclusion_radius: Some(1e-3), ..Default::default() };
        let rep = verify_certificate_2d(&cert.poly, &[[0.0, 0.0]], &[1.0], &opts).unwrap();
        assert!(rep.passed, "{rep:?}");

        let neg = build_certificate_2d_unchecked(&[[0.0, 0.0]], &[-1.0], 64, SAFE_FACTOR_2D).unwrap();
        assert!((&neg.poly.cheb_coeffs + &cert.poly.cheb_coeffs).amax() < 1e-14);
    }

    #[test]
    fn certificate_swap_symmetry() {
        let pts = [[0.3, -0.4], [-0.4, 0.3]];
        let cert = build_certificate_2d_unchecked(&pts, &[1.0, 1.0], 64, SAFE_FACTOR_2D).unwrap();
        let b = &cert.poly.cheb_coeffs;
        assert!((b - b.transpose()).amax() < 1e-10);
    }

    #[test]
    fn constant_polynomial_fails() {
        let mut b = DMatrix::zeros(9, 9);
        b[(0, 0)] = 1.0;
        let p = BivariatePoly { degree: 8, cheb_coeffs: b };
        let rep = verify_certificate_2d(&p, &[[0.0, 0.0]], &[1.0], &VerifyOptions2D::default()).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn lp_recovery_examples() {
        let n = 16;
        let size = 2 * n + 1;
        let grid = lp_grid(size);
        let opts = SolverOptions { lp_grid_size: Some(size), ..SolverOptions::lp() };
        let m = DiracMeasure2D::new([([grid[10].cos(), grid[20].cos()], 1.5)]).unwrap();
        let r = recover_spikes_2d(&moments_2d(&m, n), &opts).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.atoms()[0].weight - 1.5).abs() < 1e-7);

        let m = DiracMeasure2D::new([
            ([grid[8].cos(), grid[9].cos()], 1.0),
            ([grid[24].cos(), grid[22].cos()], -0.75),
        ])
        .unwrap();
        let r = recover_spikes_2d(&moments_2d(&m, n), &opts).unwrap();
        assert_eq!(r.len(), 2);
        for (a, b) in r.atoms().iter().zip(m.atoms()) {
            assert!((a.weight - b.weight).abs() < 1e-7);
            assert!((a.location[0] - b.location[0]).abs() < 1e-9);
        }
        assert!(recover_spikes_2d(&DMatrix::zeros(n + 1, n + 1), &opts).unwrap().is_empty());
    }
}
