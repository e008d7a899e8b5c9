//! Polynomial bases of `V_N`, derivative expansions, basis conversion and
//! moment computation.
//!
//! Every basis is related to the Chebyshev basis by two exactly-recurred
//! matrices: `E` with `B_j = sum_k E[j][k] T_k` and `F` with
//! `T_j = sum_k F[j][k] B_k`. Moment conversion from a source to a target
//! basis is then `y_target = E_target * F_source * y_source`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{clamp_unit, DiracMeasure, Spline};
use crate::quadrature::gauss_legendre_on;
use crate::{Error, Result};

/// Above this degree converting monomial moments to an orthogonal basis
/// loses more than eight digits (roughly one digit per two degrees).
pub const MONOMIAL_ACCURATE_DEGREE: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Monomial,
    Chebyshev,
    Legendre,
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisKind::Monomial => "monomial",
            BasisKind::Chebyshev => "chebyshev",
            BasisKind::Legendre => "legendre",
        })
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monomial" => Ok(BasisKind::Monomial),
            "chebyshev" => Ok(BasisKind::Chebyshev),
            "legendre" => Ok(BasisKind::Legendre),
            other => Err(Error::InvalidInput(format!("unknown basis '{other}'"))),
        }
    }
}

/// A basis `{P_k}_{k=0..N}` of `V_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub degree: usize,
}

impl BasisSpec {
    pub fn new(kind: BasisKind, degree: usize) -> Self {
        Self { kind, degree }
    }

    pub fn chebyshev(degree: usize) -> Self {
        Self::new(BasisKind::Chebyshev, degree)
    }

    pub fn legendre(degree: usize) -> Self {
        Self::new(BasisKind::Legendre, degree)
    }

    pub fn monomial(degree: usize) -> Self {
        Self::new(BasisKind::Monomial, degree)
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The data `y_k = <f, P_k>`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    basis: BasisSpec,
    values: Vec<Complex64>,
}

impl MomentVector {
    pub fn new(basis: BasisSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} moments for degree {}",
                values.len(),
                basis.degree
            )));
        }
        Ok(Self { basis, values })
    }

    pub fn from_real(basis: BasisSpec, values: &[f64]) -> Result<Self> {
        Self::new(basis, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(basis: BasisSpec) -> Self {
        Self {
            basis,
            values: vec![Complex64::new(0.0, 0.0); basis.len()],
        }
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    /// Euclidean norm of the moments.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        self.values.iter().all(|v| v.im.abs() <= tol * scale.max(f64::MIN_POSITIVE))
    }

    /// First `k + 1` moments as a degree-`k` vector in the same basis family.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.basis.degree);
        Self {
            basis: BasisSpec::new(self.basis.kind, k),
            values: self.values[..=k].to_vec(),
        }
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            basis: self.basis,
            values: self.values.iter().map(|&v| v * a).collect(),
        }
    }
}

/// Row `k` holds the expansion `P'_k = sum_n alpha[k][n] P_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrix {
    pub basis: BasisSpec,
    pub entries: DMatrix<f64>,
}

impl DerivativeMatrix {
    /// `(alpha y)_k`.
    pub fn apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.entries.nrows();
        (0..n)
            .map(|k| {
                (0..n)
                    .filter(|&j| self.entries[(k, j)] != 0.0)
                    .map(|j| y[j] * self.entries[(k, j)])
                    .sum()
            })
            .collect()
    }
}

/// `P_0(x), ..., P_N(x)` by recurrence.
pub fn eval_all(kind: BasisKind, degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree == 0 {
        return out;
    }
    out.push(x);
    for k in 1..degree {
        let next = match kind {
            BasisKind::Monomial => out[k] * x,
            BasisKind::Chebyshev => 2.0 * x * out[k] - out[k - 1],
            BasisKind::Legendre => {
                let kf = k as f64;
                ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0)
            }
        };
        out.push(next);
    }
    out
}

/// `P_k(x)`.
pub fn eval_basis(basis: BasisSpec, k: usize, x: f64) -> Result<f64> {
    if k > basis.degree {
        return Err(Error::Index { k, degree: basis.degree });
    }
    let x = clamp_unit(x)?;
    Ok(match basis.kind {
        BasisKind::Monomial => x.powi(k as i32),
        _ => eval_all(basis.kind, k, x)[k],
    })
}

/// Exact derivative expansion coefficients.
///
/// Monomial: `(x^k)' = k x^{k-1}`. Chebyshev: `T'_k = 2k sum' T_j` over
/// `j = k-1, k-3, ...` with the `T_0` term halved. Legendre:
/// `P'_k = sum (2j+1) P_j` over `j = k-1, k-3, ...`.
pub fn derivative_matrix(basis: BasisSpec) -> DerivativeMatrix {
    let n = basis.len();
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        match basis.kind {
            BasisKind::Monomial => a[(k, k - 1)] = k as f64,
            BasisKind::Chebyshev => {
                for j in (0..k).rev().step_by(2) {
                    a[(k, j)] = if j == 0 { k as f64 } else { 2.0 * k as f64 };
                }
            }
            BasisKind::Legendre => {
                for j in (0..k).rev().step_by(2) {
                    a[(k, j)] = (2 * j + 1) as f64;
                }
            }
        }
    }
    DerivativeMatrix { basis, entries: a }
}

/// Expansion of basis functions in the Chebyshev basis (`E`).
fn to_chebyshev(kind: BasisKind, degree: usize) -> DMatrix<f64> {
    let n = degree + 1;
    let mut e = DMatrix::zeros(n, n);
    match kind {
        BasisKind::Chebyshev => return DMatrix::identity(n, n),
        BasisKind::Monomial => {
            e[(0, 0)] = 1.0;
            for j in 1..n {
                let prev: Vec<f64> = (0..n).map(|k| e[(j - 1, k)]).collect();
                let row = times_x_in_chebyshev(&prev);
                for k in 0..n {
                    e[(j, k)] = row[k];
                }
            }
        }
        BasisKind::Legendre => {
            e[(0, 0)] = 1.0;
            if n > 1 {
                e[(1, 1)] = 1.0;
            }
            for j in 1..n.saturating_sub(1) {
                let jf = j as f64;
                let prev: Vec<f64> = (0..n).map(|k| e[(j, k)]).collect();
                let xp = times_x_in_chebyshev(&prev);
                for k in 0..n {
                    e[(j + 1, k)] = ((2.0 * jf + 1.0) * xp[k] - jf * e[(j - 1, k)]) / (jf + 1.0);
                }
            }
        }
    }
    e
}

/// Chebyshev basis functions expanded in `kind` (`F`).
fn from_chebyshev(kind: BasisKind, degree: usize) -> DMatrix<f64> {
    let n = degree + 1;
    if kind == BasisKind::Chebyshev {
        return DMatrix::identity(n, n);
    }
    let mut f = DMatrix::zeros(n, n);
    f[(0, 0)] = 1.0;
    if n > 1 {
        f[(1, 1)] = 1.0;
    }
    for j in 1..n.saturating_sub(1) {
        let prev: Vec<f64> = (0..n).map(|k| f[(j, k)]).collect();
        let xp = match kind {
            BasisKind::Monomial => {
                let mut out = vec![0.0; n];
                for k in 0..n - 1 {
                    out[k + 1] = prev[k];
                }
                out
            }
            _ => times_x_in_legendre(&prev),
        };
        for k in 0..n {
            f[(j + 1, k)] = 2.0 * xp[k] - f[(j - 1, k)];
        }
    }
    f
}

/// Coefficients of `x * p` given Chebyshev coefficients of `p` (truncated to
/// the same length; callers never overflow the top degree).
fn times_x_in_chebyshev(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    for (k, &v) in c.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if k == 0 {
            if n > 1 {
                out[1] += v;
            }
        } else {
            if k + 1 < n {
                out[k + 1] += 0.5 * v;
            }
            out[k - 1] += 0.5 * v;
        }
    }
    out
}

/// `x P_k = ((k+1) P_{k+1} + k P_{k-1}) / (2k+1)`.
fn times_x_in_legendre(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    for (k, &v) in c.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let kf = k as f64;
        let d = 2.0 * kf + 1.0;
        if k + 1 < n {
            out[k + 1] += v * (kf + 1.0) / d;
        }
        if k > 0 {
            out[k - 1] += v * kf / d;
        }
    }
    out
}

/// Matrix `C` with `target_P_j = sum_k C[j][k] source_P_k`, so that moments
/// convert as `y_target = C y_source`.
pub fn conversion_matrix(source: BasisSpec, target: BasisKind) -> DMatrix<f64> {
    if source.kind == target {
        return DMatrix::identity(source.len(), source.len());
    }
    let e = to_chebyshev(target, source.degree);
    let f = from_chebyshev(source.kind, source.degree);
    match (source.kind, target) {
        (BasisKind::Chebyshev, _) => e,
        (_, BasisKind::Chebyshev) => f,
        _ => e * f,
    }
}

/// Re-expresses moments against another basis of the same degree.
pub fn change_of_basis(y: &MomentVector, target: BasisSpec) -> Result<MomentVector> {
    if y.basis.degree != target.degree {
        return Err(Error::Shape(format!(
            "cannot convert degree {} moments to degree {}",
            y.basis.degree, target.degree
        )));
    }
    if y.basis.kind == target.kind {
        return Ok(y.clone());
    }
    let c = conversion_matrix(y.basis, target.kind);
    let n = target.len();
    let values = (0..n)
        .map(|j| {
            (0..n)
                .filter(|&k| c[(j, k)] != 0.0)
                .map(|k| y.values[k] * c[(j, k)])
                .sum()
        })
        .collect();
    Ok(MomentVector { basis: target, values })
}

/// `y_k = sum_m c_m P_k(x_m)`.
pub fn moments_of_dirac(m: &DiracMeasure, basis: BasisSpec) -> MomentVector {
    let mut values = vec![Complex64::new(0.0, 0.0); basis.len()];
    for atom in m.atoms() {
        let p = eval_all(basis.kind, basis.degree, atom.location);
        for (v, pk) in values.iter_mut().zip(p) {
            *v += atom.weight * pk;
        }
    }
    MomentVector { basis, values }
}

/// Gauss–Legendre node count that integrates `P_k * p` exactly for
/// `deg(p) <= r`, `k <= N`.
pub fn quadrature_nodes(degree: usize, r: usize) -> usize {
    (degree + r + 1).div_ceil(2) + 1
}

/// `int_a^b p(x) P_k(x) dx` for every `k`, with `p` in monomial coefficients.
pub(crate) fn interval_moments(
    basis: BasisSpec,
    a: f64,
    b: f64,
    poly: &[Complex64],
    nodes: usize,
    out: &mut [Complex64],
) {
    if b <= a {
        return;
    }
    let (xs, ws) = gauss_legendre_on(nodes, a, b);
    for (&x, &w) in xs.iter().zip(&ws) {
        let fx = crate::model::poly_eval(poly, x) * w;
        if fx == Complex64::new(0.0, 0.0) {
            continue;
        }
        let p = eval_all(basis.kind, basis.degree, x);
        for (o, pk) in out.iter_mut().zip(p) {
            *o += fx * pk;
        }
    }
}

/// `y_k = int_{-1}^{1} s(x) P_k(x) dx`, exact up to rounding.
pub fn moments_of_spline(s: &Spline, basis: BasisSpec) -> MomentVector {
    let nodes = quadrature_nodes(basis.degree, s.degree());
    let mut values = vec![Complex64::new(0.0, 0.0); basis.len()];
    for (m, piece) in s.pieces().iter().enumerate() {
        let (a, b) = s.piece_interval(m);
        interval_moments(basis, a, b, piece, nodes, &mut values);
    }
    MomentVector { basis, values }
}
