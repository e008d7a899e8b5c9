//! Dual interpolating polynomials on [-1, 1].
//!
//! For separated knots `x_m` and unit-modulus values `u_m` the construction
//! maps the knots to `t~_m = -arccos(x_m)` in `[-pi, 0]`, mirrors them (and
//! their values) to a symmetric set on `[-pi, pi]`, interpolates with
//! translates of the Jackson kernel and its derivative, averages
//! `Q(t) = (Q~(t) + Q~(-t)) / 2` and reads the cosine coefficients of `Q` as
//! the Chebyshev coefficients of `P(x) = Q(arccos x)`.
//!
//! A polynomial with `P(x_m) = u_m` and `|P| < 1` elsewhere certifies that the
//! Dirac train on the knots is the unique TV-norm minimizer for its moments.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kernel::JacksonKernel;
use crate::linalg::solve_equilibrated;
use crate::model::{check_separation, clamp_unit, SeparationReport};
use crate::{Error, Result};

/// Condition estimate above which a construction carries a warning.
pub const CONDITION_WARNING: f64 = 1e12;

/// `sum_{k=-D}^{D} a_k e^{ikt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    pub fn new(degree: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * degree + 1 {
            return Err(Error::Shape(format!(
                "{} coefficients for degree {degree}",
                coeffs.len()
            )));
        }
        Ok(Self { degree, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `a_k` for `|k| <= D`.
    pub fn coeff(&self, k: isize) -> Complex64 {
        let idx = k + self.degree as isize;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Value and derivative at `t`.
    pub fn eval2(&self, t: f64) -> (Complex64, Complex64) {
        let d = self.degree as isize;
        let mut v = Complex64::new(0.0, 0.0);
        let mut dv = Complex64::new(0.0, 0.0);
        for k in -d..=d {
            let e = Complex64::from_polar(1.0, k as f64 * t);
            let a = self.coeff(k) * e;
            v += a;
            dv += a * Complex64::new(0.0, k as f64);
        }
        (v, dv)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.eval2(t).0
    }
}

/// `Q(t) = sum_{k=0}^{D} beta_k cos(kt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenTrigPoly {
    pub degree: usize,
    pub cos_coeffs: Vec<Complex64>,
}

impl EvenTrigPoly {
    pub fn eval(&self, t: f64) -> Complex64 {
        self.cos_coeffs
            .iter()
            .enumerate()
            .map(|(k, &b)| b * (k as f64 * t).cos())
            .sum()
    }
}

/// `P(x) = sum_{k=0}^{N} beta_k T_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicPoly {
    pub degree: usize,
    pub cheb_coeffs: Vec<Complex64>,
}

impl AlgebraicPoly {
    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> Complex64 {
        clenshaw(&self.cheb_coeffs, x)
    }

    /// `P(cos t) = Q(t)`.
    pub fn eval_t(&self, t: f64) -> Complex64 {
        self.eval(t.cos())
    }
}

pub(crate) fn clenshaw(c: &[Complex64], x: f64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    if c.is_empty() {
        return zero;
    }
    let (mut b1, mut b2) = (zero, zero);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + b1 * x - b2
}

/// Mirrors `t~` (in `(-pi, 0)`, increasing) to `t~ ++ reverse(-t~)` and the
/// values likewise, so `t_{2M-m+1} = -t_m` and `u_{2M-m+1} = u_m`.
pub fn reflect_knots(t_tilde: &[f64], u_tilde: &[Complex64]) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if t_tilde.is_empty() || t_tilde.len() != u_tilde.len() {
        return Err(Error::Shape(format!(
            "{} locations with {} values",
            t_tilde.len(),
            u_tilde.len()
        )));
    }
    for (i, &t) in t_tilde.iter().enumerate() {
        if t == 0.0 || t == -PI {
            return Err(Error::ReflectionCollision(t));
        }
        if !(t > -PI && t < 0.0) {
            return Err(Error::InvalidInput(format!("t = {t} outside (-pi, 0)")));
        }
        if i > 0 && t <= t_tilde[i - 1] {
            return Err(Error::InvalidInput("locations must be strictly increasing".into()));
        }
    }
    let t = t_tilde
        .iter()
        .copied()
        .chain(t_tilde.iter().rev().map(|&t| -t))
        .collect();
    let u = u_tilde
        .iter()
        .copied()
        .chain(u_tilde.iter().rev().copied())
        .collect();
    Ok((t, u))
}

/// Smallest wrap-around distance between points of `t`.
pub fn periodic_min_separation(t: &[f64]) -> Option<f64> {
    if t.len() < 2 {
        return None;
    }
    let mut s: Vec<f64> = t.iter().map(|&v| v.rem_euclid(2.0 * PI)).collect();
    s.sort_by(f64::total_cmp);
    let mut best = s[0] + 2.0 * PI - s[s.len() - 1];
    for w in s.windows(2) {
        best = best.min(w[1] - w[0]);
    }
    Some(best)
}

/// Result of the kernel interpolation.
#[derive(Debug, Clone)]
pub struct TrigCertificate {
    pub poly: TrigPoly,
    /// Degree that was asked for; `poly.degree()` is rounded down to a multiple of 4.
    pub requested_degree: usize,
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Interpolates `Q~(t_m) = u_m`, `Q~'(t_m) = 0` with
/// `Q~(t) = sum_m a_m K(t - t_m) + b_m K'(t - t_m)`.
pub fn build_trig_certificate(t: &[f64], u: &[Complex64], n: usize) -> Result<TrigCertificate> {
    let p = t.len();
    if p == 0 || p != u.len() {
        return Err(Error::Shape(format!("{p} locations with {} values", u.len())));
    }
    let kernel = JacksonKernel::new(n);
    let d = kernel.degree();
    if d == 0 {
        return Err(Error::InvalidInput(format!("degree {n} too small for the kernel")));
    }
    let mut warnings = Vec::new();
    if d != n {
        warnings.push(format!("kernel degree rounded down from {n} to {d}"));
    }
    let mut sys = DMatrix::zeros(2 * p, 2 * p);
    for j in 0..p {
        for m in 0..p {
            let (k0, k1, k2) = kernel.eval3(t[j] - t[m]);
            sys[(j, m)] = k0;
            sys[(j, p + m)] = k1;
            sys[(p + j, m)] = k1;
            sys[(p + j, p + m)] = k2;
        }
    }
    let mut rhs = u.to_vec();
    rhs.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(p));
    let solved = solve_equilibrated(&sys, &rhs)?;
    if solved.condition > CONDITION_WARNING {
        warnings.push(format!(
            "interpolation system condition estimate {:.3e} exceeds {CONDITION_WARNING:e}",
            solved.condition
        ));
    }
    let (a, b) = solved.solution.split_at(p);
    let di = d as isize;
    let coeffs = (-di..=di)
        .map(|k| {
            let kh = kernel.coeff(k);
            if kh == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let kf = k as f64;
            let s: Complex64 = (0..p)
                .map(|m| (a[m] + Complex64::new(0.0, kf) * b[m]) * Complex64::from_polar(1.0, -kf * t[m]))
                .sum();
            s * kh
        })
        .collect();
    Ok(TrigCertificate {
        poly: TrigPoly { degree: d, coeffs },
        requested_degree: n,
        condition: solved.condition,
        warnings,
    })
}

/// `Q(t) = (Q~(t) + Q~(-t)) / 2`, i.e. `beta_0 = a_0`, `beta_k = a_k + a_{-k}`.
pub fn symmetrize(q: &TrigPoly) -> EvenTrigPoly {
    let d = q.degree as isize;
    let cos_coeffs = (0..=d)
        .map(|k| if k == 0 { q.coeff(0) } else { q.coeff(k) + q.coeff(-k) })
        .collect();
    EvenTrigPoly { degree: q.degree, cos_coeffs }
}

/// `P(x) = Q(arccos x)`: cosine coefficients become Chebyshev coefficients.
pub fn to_algebraic(q: &EvenTrigPoly) -> AlgebraicPoly {
    AlgebraicPoly {
        degree: q.degree,
        cheb_coeffs: q.cos_coeffs.clone(),
    }
}

/// A constructed dual polynomial with its provenance.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub poly: AlgebraicPoly,
    pub separation: SeparationReport,
    pub kernel_degree: usize,
    pub condition: f64,
    pub warnings: Vec<String>,
}

pub(crate) fn check_unimodular(u: &[Complex64]) -> Result<()> {
    for (i, v) in u.iter().enumerate() {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "interpolation value {i} has modulus {}",
                v.norm()
            )));
        }
    }
    Ok(())
}

/// Full pipeline; fails with [`Error::Separation`] when the knots violate the
/// separation condition.
pub fn build_certificate(knots: &[f64], u_values: &[Complex64], n: usize) -> Result<Certificate> {
    let report = check_separation(knots, n)?;
    if !report.satisfied {
        return Err(Error::Separation(format!(
            "{} window violations, {} close pairs (threshold {:.6})",
            report.domain_violations.len(),
            report.pair_violations.len(),
            report.threshold
        )));
    }
    build_certificate_unchecked(knots, u_values, n)
}

/// [`build_certificate`] without the separation gate.
pub fn build_certificate_unchecked(knots: &[f64], u_values: &[Complex64], n: usize) -> Result<Certificate> {
    if knots.len() != u_values.len() {
        return Err(Error::Shape(format!(
            "{} knots with {} values",
            knots.len(),
            u_values.len()
        )));
    }
    check_unimodular(u_values)?;
    let separation = check_separation(knots, n)?;
    let mut pairs: Vec<(f64, Complex64)> = knots
        .iter()
        .map(|&x| clamp_unit(x))
        .zip(u_values.iter().copied())
        .map(|(x, u)| x.map(|x| (x, u)))
        .collect::<Result<_>>()?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t_tilde: Vec<f64> = pairs.iter().map(|(x, _)| -x.acos()).collect();
    let u_tilde: Vec<Complex64> = pairs.iter().map(|(_, u)| *u).collect();
    let (t, u) = reflect_knots(&t_tilde, &u_tilde)?;
    let trig = build_trig_certificate(&t, &u, n)?;
    let even = symmetrize(&trig.poly);
    let mut poly = to_algebraic(&even);
    poly.degree = n;
    poly.cheb_coeffs.resize(n + 1, Complex64::new(0.0, 0.0));
    Ok(Certificate {
        poly,
        separation,
        kernel_degree: trig.poly.degree(),
        condition: trig.condition,
        warnings: trig.warnings,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub grid_points_per_degree: usize,
    /// Radius in the arccos metric; `None` means `(4 pi / N) / 100`.
    pub exclusion_radius: Option<f64>,
    pub interp_tol: f64,
    pub eval_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            grid_points_per_degree: 16,
            exclusion_radius: None,
            interp_tol: 1e-9,
            eval_tol: 1e-9,
        }
    }
}

/// Numerical evidence for the two dual conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `max_m |P(x_m) - u_m|`.
    pub interpolation_residual: f64,
    /// `max |P|` over points at distance `>= exclusion_radius` from every knot.
    pub off_support_max: f64,
    /// Location (in x) where `off_support_max` is attained.
    pub off_support_argmax: Option<Vec<f64>>,
    /// `max |P|` inside the exclusion balls.
    pub near_knot_max: f64,
    pub near_knot_ok: bool,
    pub grid_size: usize,
    pub exclusion_radius: f64,
    pub refined_maxima: usize,
    pub passed: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of `f` on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Checks interpolation at the knots and `|P| < 1` away from them on a grid
/// uniform in `t = arccos x`, refining every grid-local maximum.
pub fn verify_certificate(
    p: &AlgebraicPoly,
    knots: &[f64],
    u_values: &[Complex64],
    opts: &VerifyOptions,
) -> Result<CertificateReport> {
    if knots.len() != u_values.len() {
        return Err(Error::Shape(format!(
            "{} knots with {} values",
            knots.len(),
            u_values.len()
        )));
    }
    if opts.grid_points_per_degree < 8 {
        return Err(Error::InvalidInput("grid_points_per_degree must be >= 8".into()));
    }
    let n = p.degree.max(1);
    let radius = opts.exclusion_radius.unwrap_or(4.0 * PI / n as f64 / 100.0);
    let taus: Vec<f64> = knots
        .iter()
        .map(|&x| clamp_unit(x).map(f64::acos))
        .collect::<Result<_>>()?;
    let interpolation_residual = knots
        .iter()
        .zip(u_values)
        .map(|(&x, &u)| (p.eval(x) - u).norm())
        .fold(0.0, f64::max);

    let dist = |t: f64| taus.iter().map(|&tau| (t - tau).abs()).fold(f64::INFINITY, f64::min);
    let mag = |t: f64| p.eval_t(t).norm();

    let count = opts.grid_points_per_degree * n + 1;
    let h = PI / (count - 1) as f64;
    let grid: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| mag(t)).collect();

    let mut off_max = 0.0f64;
    let mut off_arg = None::<f64>;
    let mut near_max = 0.0f64;
    let record = |t: f64, v: f64, off: &mut f64, arg: &mut Option<f64>, near: &mut f64| {
        if dist(t) >= radius {
            if v > *off {
                *off = v;
                *arg = Some(t);
            }
        } else {
            *near = near.max(v);
        }
    };
    for (&t, &v) in grid.iter().zip(&vals) {
        record(t, v, &mut off_max, &mut off_arg, &mut near_max);
    }
    let mut refined = 0;
    for i in 0..count {
        let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < count { vals[i + 1] } else { f64::NEG_INFINITY };
        if vals[i] >= left && vals[i] >= right {
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(count - 1)];
            let (t, v) = golden_max(mag, a, b, 1e-12);
            refined += 1;
            record(t, v, &mut off_max, &mut off_arg, &mut near_max);
        }
    }
    for &tau in &taus {
        near_max = near_max.max(mag(tau));
        for t in [tau - radius, tau + radius] {
            if (0.0..=PI).contains(&t) {
                record(t, mag(t), &mut off_max, &mut off_arg, &mut near_max);
            }
        }
    }
    let near_knot_ok = near_max <= 1.0 + opts.eval_tol;
    let passed = interpolation_residual <= opts.interp_tol && off_max < 1.0 && near_knot_ok;
    Ok(CertificateReport {
        interpolation_residual,
        off_support_max: off_max,
        off_support_argmax: off_arg.map(|t| vec![t.cos()]),
        near_knot_max: near_max,
        near_knot_ok,
        grid_size: count,
        exclusion_radius: radius,
        refined_maxima: refined,
        passed,
    })
}
