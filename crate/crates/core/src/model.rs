//! Measures and splines on [-1, 1], the arccos metric and separation checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Inputs this far outside [-1, 1] are clamped instead of rejected.
pub const CLAMP_TOL: f64 = 1e-12;

/// Smallest degree for which the separation guarantee is stated.
pub const MIN_GUARANTEED_DEGREE: usize = 128;

/// Default continuity tolerance, relative to the largest piece coefficient.
pub const CONTINUITY_TOL: f64 = 1e-9;

pub(crate) fn clamp_unit(x: f64) -> Result<f64> {
    if !x.is_finite() || x < -1.0 - CLAMP_TOL || x > 1.0 + CLAMP_TOL {
        return Err(Error::Domain { value: x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// `rho(x, y) = |arccos x - arccos y|`.
pub fn cheb_distance(x: f64, y: f64) -> Result<f64> {
    let (x, y) = (clamp_unit(x)?, clamp_unit(y)?);
    Ok((x.acos() - y.acos()).abs())
}

/// One weighted point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: Complex64,
}

/// A finite Dirac train `sum_m c_m delta_{x_m}` with sorted, distinct support.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiracMeasure {
    atoms: Vec<Atom>,
}

impl DiracMeasure {
    /// Builds a measure, sorting by location and dropping zero weights.
    ///
    /// Locations closer than `1e-12` are rejected rather than merged.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Complex64)>,
    {
        let mut out = Vec::new();
        for (location, weight) in atoms {
            let location = clamp_unit(location)?;
            if !(weight.re.is_finite() && weight.im.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite weight at {location}")));
            }
            if weight == Complex64::new(0.0, 0.0) {
                continue;
            }
            out.push(Atom { location, weight });
        }
        out.sort_by(|a, b| a.location.total_cmp(&b.location));
        for w in out.windows(2) {
            if w[1].location - w[0].location < 1e-12 {
                return Err(Error::DuplicateLocation {
                    a: w[0].location,
                    b: w[1].location,
                });
            }
        }
        Ok(Self { atoms: out })
    }

    /// Real-weighted convenience constructor.
    pub fn from_real<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::new(atoms.into_iter().map(|(x, c)| (x, Complex64::new(c, 0.0))))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn locations(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.location).collect()
    }

    pub fn weights(&self) -> Vec<Complex64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// Multiplies every weight by `a`.
    pub fn scaled(&self, a: Complex64) -> Self {
        if a == Complex64::new(0.0, 0.0) {
            return Self::empty();
        }
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|at| Atom {
                    location: at.location,
                    weight: at.weight * a,
                })
                .collect(),
        }
    }

    /// True when every weight has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.atoms.iter().all(|a| a.weight.im == 0.0)
    }
}

/// `||f||_TV = sum_m |c_m|`.
pub fn tv_norm(m: &DiracMeasure) -> f64 {
    m.atoms.iter().map(|a| a.weight.norm()).sum()
}

/// Outcome of a separation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub satisfied: bool,
    /// Required minimal distance in radians.
    pub threshold: f64,
    /// Smallest pairwise distance; `None` with fewer than two points.
    pub min_pair_distance: Option<f64>,
    pub domain_violations: Vec<f64>,
    pub pair_violations: Vec<(usize, usize)>,
    /// Set when `N` is below the degree for which the guarantee holds.
    pub below_theorem_degree: bool,
    /// Admissible window `[cos(-pi + 2pi/N), cos(-2pi/N)]`.
    pub window: (f64, f64),
}

/// Admissible support window for degree `n`.
pub fn separation_window(n: usize) -> (f64, f64) {
    let edge = (2.0 * PI / n as f64).cos();
    (-edge, edge)
}

/// Checks `rho(x_i, x_j) >= 4 pi / N` and the window condition.
///
/// Comparisons carry an absolute slack of `1e-12` so that sets built exactly
/// at the threshold (through a `cos`/`arccos` round trip) are accepted.
pub fn check_separation(locations: &[f64], n: usize) -> Result<SeparationReport> {
    check_separation_with(locations, n, 4.0)
}

/// [`check_separation`] with threshold `factor * pi / N`.
pub fn check_separation_with(locations: &[f64], n: usize, factor: f64) -> Result<SeparationReport> {
    if n == 0 {
        return Err(Error::InvalidInput("separation needs N >= 1".into()));
    }
    let threshold = factor * PI / n as f64;
    let window = separation_window(n);
    let mut domain_violations = Vec::new();
    let mut ts = Vec::with_capacity(locations.len());
    for (i, &x) in locations.iter().enumerate() {
        let xc = clamp_unit(x)?;
        if xc < window.0 - CLAMP_TOL || xc > window.1 + CLAMP_TOL {
            domain_violations.push(x);
        }
        ts.push((xc.acos(), i));
    }
    ts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut min_pair = None::<f64>;
    for w in ts.windows(2) {
        let d = w[1].0 - w[0].0;
        min_pair = Some(min_pair.map_or(d, |m| m.min(d)));
    }
    let mut pair_violations = Vec::new();
    for a in 0..ts.len() {
        for b in a + 1..ts.len() {
            if ts[b].0 - ts[a].0 >= threshold - CLAMP_TOL {
                break;
            }
            let (i, j) = (ts[a].1, ts[b].1);
            pair_violations.push((i.min(j), i.max(j)));
        }
    }
    pair_violations.sort_unstable();

    Ok(SeparationReport {
        satisfied: domain_violations.is_empty() && pair_violations.is_empty(),
        threshold,
        min_pair_distance: min_pair,
        domain_violations,
        pair_violations,
        below_theorem_degree: n < MIN_GUARANTEED_DEGREE,
        window,
    })
}

// --- monomial helpers on global-x coefficient vectors -----------------------

pub(crate) fn poly_eval(coeffs: &[Complex64], x: f64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

pub(crate) fn poly_derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as f64)
        .collect()
}

pub(crate) fn poly_derivative_eval(coeffs: &[Complex64], order: usize, x: f64) -> Complex64 {
    let mut c = coeffs.to_vec();
    for _ in 0..order {
        c = poly_derivative(&c);
    }
    poly_eval(&c, x)
}

/// Antiderivative with zero constant term.
pub(crate) fn poly_antiderivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    out.push(Complex64::new(0.0, 0.0));
    out.extend(coeffs.iter().enumerate().map(|(i, &c)| c / (i + 1) as f64));
    out
}

/// A spline of degree `r` over `{-1, x_1, ..., x_M, 1}`.
///
/// Pieces are stored as monomial coefficients in the global variable `x`
/// (lowest order first). Knot `x_m` belongs to the piece on its right and
/// `x = 1` belongs to the last piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline {
    degree: usize,
    knots: Vec<f64>,
    pieces: Vec<Vec<Complex64>>,
    boundary_left: Vec<Complex64>,
    boundary_right: Vec<Complex64>,
}

impl Spline {
    /// Validates and builds a spline; boundary values are derived from the
    /// first and last pieces.
    pub fn new(degree: usize, knots: Vec<f64>, pieces: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::with_tolerance(degree, knots, pieces, CONTINUITY_TOL)
    }

    pub fn with_tolerance(
        degree: usize,
        knots: Vec<f64>,
        mut pieces: Vec<Vec<Complex64>>,
        continuity_tol: f64,
    ) -> Result<Self> {
        if pieces.len() != knots.len() + 1 {
            return Err(Error::Shape(format!(
                "{} pieces for {} knots",
                pieces.len(),
                knots.len()
            )));
        }
        for (i, &k) in knots.iter().enumerate() {
            if !(k > -1.0 && k < 1.0) {
                return Err(Error::InvalidInput(format!("knot {k} not inside (-1, 1)")));
            }
            if i > 0 && k <= knots[i - 1] {
                return Err(Error::InvalidInput("knots must be strictly increasing".into()));
            }
        }
        for p in pieces.iter_mut() {
            if p.len() > degree + 1 {
                if p[degree + 1..].iter().any(|c| c.norm() != 0.0) {
                    return Err(Error::Shape(format!(
                        "piece with {} coefficients exceeds degree {degree}",
                        p.len()
                    )));
                }
            }
            p.resize(degree + 1, Complex64::new(0.0, 0.0));
        }
        let scale = pieces
            .iter()
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let tol = continuity_tol * scale;
        for (m, &k) in knots.iter().enumerate() {
            for j in 0..degree {
                let left = poly_derivative_eval(&pieces[m], j, k);
                let right = poly_derivative_eval(&pieces[m + 1], j, k);
                if (left - right).norm() > tol {
                    return Err(Error::InvalidInput(format!(
                        "derivative {j} jumps by {:e} at knot {k}",
                        (left - right).norm()
                    )));
                }
            }
        }
        let first = &pieces[0];
        let last = &pieces[pieces.len() - 1];
        let boundary_left = (0..=degree).map(|j| poly_derivative_eval(first, j, -1.0)).collect();
        let boundary_right = (0..=degree).map(|j| poly_derivative_eval(last, j, 1.0)).collect();
        Ok(Self {
            degree,
            knots,
            pieces,
            boundary_left,
            boundary_right,
        })
    }

    /// Real-coefficient convenience constructor.
    pub fn from_real(degree: usize, knots: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        let pieces = pieces
            .into_iter()
            .map(|p| p.into_iter().map(|c| Complex64::new(c, 0.0)).collect())
            .collect();
        Self::new(degree, knots, pieces)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Vec<Complex64>] {
        &self.pieces
    }

    /// `f^(j)(-1)` for `j = 0..=r`.
    pub fn boundary_left(&self) -> &[Complex64] {
        &self.boundary_left
    }

    /// `f^(j)(1)` for `j = 0..=r`.
    pub fn boundary_right(&self) -> &[Complex64] {
        &self.boundary_right
    }

    /// Index of the piece whose half-open interval contains `x`.
    pub fn piece_index(&self, x: f64) -> usize {
        self.knots.partition_point(|&k| k <= x)
    }

    /// Interval `[a, b]` covered by piece `m`.
    pub fn piece_interval(&self, m: usize) -> (f64, f64) {
        let a = if m == 0 { -1.0 } else { self.knots[m - 1] };
        let b = if m == self.knots.len() { 1.0 } else { self.knots[m] };
        (a, b)
    }

    /// Largest difference of derivatives `0..r` across knots.
    pub fn continuity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (m, &k) in self.knots.iter().enumerate() {
            for j in 0..self.degree {
                let d = poly_derivative_eval(&self.pieces[m], j, k)
                    - poly_derivative_eval(&self.pieces[m + 1], j, k);
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// `f^(order)(x)` evaluated on the piece containing `x`.
    pub fn eval_derivative(&self, x: f64, order: usize) -> Result<Complex64> {
        let x = clamp_unit(x)?;
        Ok(poly_derivative_eval(&self.pieces[self.piece_index(x)], order, x))
    }
}

/// Evaluates the spline at `x`.
pub fn eval_spline(s: &Spline, x: f64) -> Result<Complex64> {
    let x = clamp_unit(x)?;
    Ok(poly_eval(&s.pieces[s.piece_index(x)], x))
}

/// Distributional derivative of a spline.
#[derive(Debug, Clone, PartialEq)]
pub enum SplineDerivative {
    /// Degree `r - 1` spline, for `r >= 1`.
    Spline(Spline),
    /// Jump train `sum_m (c_m - c_{m-1}) delta_{x_m}`, for `r = 0`.
    Diracs(DiracMeasure),
}

pub fn spline_distributional_derivative(s: &Spline) -> SplineDerivative {
    if s.degree == 0 {
        let jumps = s
            .knots
            .iter()
            .enumerate()
            .map(|(m, &k)| (k, s.pieces[m + 1][0] - s.pieces[m][0]));
        // knots are validated distinct and inside (-1, 1)
        return SplineDerivative::Diracs(DiracMeasure::new(jumps).expect("valid knots"));
    }
    let pieces: Vec<Vec<Complex64>> = s.pieces.iter().map(|p| poly_derivative(p)).collect();
    let scale = pieces.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    let spline = Spline {
        degree: s.degree - 1,
        knots: s.knots.clone(),
        boundary_left: s.boundary_left[1..].to_vec(),
        boundary_right: s.boundary_right[1..].to_vec(),
        pieces,
    };
    debug_assert!(spline.continuity_residual() <= 1e-6 * scale.max(1.0));
    SplineDerivative::Spline(spline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn step() -> Spline {
        Spline::from_real(0, vec![0.0], vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn cheb_distance_examples() {
        assert_abs_diff_eq!(cheb_distance(1.0, -1.0).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(cheb_distance(0.0, 1.0).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            cheb_distance(0.3f64.cos(), 0.7f64.cos()).unwrap(),
            0.4,
            epsilon = 1e-14
        );
        assert!(matches!(cheb_distance(1.1, 0.0), Err(Error::Domain { .. })));
        // within clamp tolerance
        assert_abs_diff_eq!(cheb_distance(1.0 + 1e-13, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn separation_examples() {
        let n = 128;
        let a = (-PI / 2.0).cos();
        let b = (-PI / 2.0 + 4.0 * PI / 128.0).cos();
        let rep = check_separation(&[a, b], n).unwrap();
        assert!(rep.satisfied);
        assert_abs_diff_eq!(rep.min_pair_distance.unwrap(), 4.0 * PI / 128.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.min_pair_distance.unwrap(), 0.09817, epsilon = 1e-5);

        let edge = (2.0 * PI / 128.0).cos();
        assert!(edge < 0.999 && (edge - 0.99880).abs() < 1e-5);
        let rep = check_separation(&[0.999], n).unwrap();
        assert_eq!(rep.domain_violations, vec![0.999]);
        assert!(!rep.satisfied);

        let rep = check_separation(&[0.0], n).unwrap();
        assert!(rep.satisfied && rep.min_pair_distance.is_none());

        let rep = check_separation(&[], n).unwrap();
        assert!(rep.satisfied);

        let rep = check_separation(&[0.0], 64).unwrap();
        assert!(rep.satisfied && rep.below_theorem_degree);
    }

    #[test]
    fn separation_reports_pairs_in_input_order() {
        let rep = check_separation(&[0.5, 0.0, 0.001], 128).unwrap();
        assert_eq!(rep.pair_violations, vec![(1, 2)]);
    }

    #[test]
    fn tv_norm_examples() {
        let m = DiracMeasure::new([(0.5, c(3.0, 4.0))]).unwrap();
        assert_eq!(tv_norm(&m), 5.0);
        assert_eq!(tv_norm(&DiracMeasure::empty()), 0.0);
        let m = DiracMeasure::from_real([(-0.2, 1.0), (0.3, -2.0)]).unwrap();
        assert_eq!(tv_norm(&m), 3.0);
    }

    #[test]
    fn measure_construction_invariants() {
        let m = DiracMeasure::from_real([(0.3, 1.0), (-0.2, 0.0), (-0.5, 2.0)]).unwrap();
        assert_eq!(m.locations(), vec![-0.5, 0.3]);
        assert!(matches!(
            DiracMeasure::from_real([(0.1, 1.0), (0.1 + 1e-14, 1.0)]),
            Err(Error::DuplicateLocation { .. })
        ));
        assert!(DiracMeasure::from_real([(1.5, 1.0)]).is_err());
    }

    #[test]
    fn eval_spline_half_open_convention() {
        let s = step();
        assert_eq!(eval_spline(&s, -0.5).unwrap(), c(0.0, 0.0));
        assert_eq!(eval_spline(&s, 0.0).unwrap(), c(1.0, 0.0));
        assert_eq!(eval_spline(&s, 1.0).unwrap(), c(1.0, 0.0));
        assert!(eval_spline(&s, 1.5).is_err());
    }

    #[test]
    fn derivative_examples() {
        match spline_distributional_derivative(&step()) {
            SplineDerivative::Diracs(m) => {
                assert_eq!(m.atoms(), &[Atom { location: 0.0, weight: c(1.0, 0.0) }]);
            }
            _ => panic!("expected diracs"),
        }
        // hat: slope +1 on [-1, 0), slope -1 on [0, 1]
        let hat = Spline::from_real(1, vec![0.0], vec![vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        match spline_distributional_derivative(&hat) {
            SplineDerivative::Spline(d) => {
                assert_eq!(d.degree(), 0);
                assert_eq!(d.pieces(), &[vec![c(1.0, 0.0)], vec![c(-1.0, 0.0)]]);
                assert_eq!(d.boundary_left(), &[c(1.0, 0.0)]);
                assert_eq!(d.boundary_right(), &[c(-1.0, 0.0)]);
            }
            _ => panic!("expected spline"),
        }
        let constant = Spline::from_real(0, vec![], vec![vec![2.0]]).unwrap();
        match spline_distributional_derivative(&constant) {
            SplineDerivative::Diracs(m) => assert!(m.is_empty()),
            _ => panic!("expected diracs"),
        }
    }

    #[test]
    fn spline_validation() {
        // discontinuous linear spline
        assert!(Spline::from_real(1, vec![0.0], vec![vec![0.0, 1.0], vec![1.0, 1.0]]).is_err());
        assert!(Spline::from_real(0, vec![0.0], vec![vec![1.0]]).is_err());
        assert!(Spline::from_real(0, vec![0.5, 0.2], vec![vec![1.0]; 3]).is_err());
        let s = Spline::from_real(2, vec![], vec![vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(s.boundary_left(), &[c(2.0, 0.0), c(-4.0, 0.0), c(6.0, 0.0)]);
        assert_eq!(s.boundary_right(), &[c(6.0, 0.0), c(8.0, 0.0), c(6.0, 0.0)]);
    }
}
