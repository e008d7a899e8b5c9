//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Solution of a square real system with a complex right-hand side.
#[derive(Debug, Clone)]
pub struct EquilibratedSolve {
    pub solution: Vec<Complex64>,
    /// 1-norm condition number of the column-equilibrated matrix.
    pub condition: f64,
}

/// Solves `A z = b` for real `A` and complex `b` by column-equilibrated LU.
pub fn solve_equilibrated(a: &DMatrix<f64>, b: &[Complex64]) -> Result<EquilibratedSolve> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Shape(format!(
            "system {}x{} with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let scales: Vec<f64> = (0..n)
        .map(|j| {
            let m = a.column(j).amax();
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let lu = scaled.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Construction("singular interpolation system".into()))?;
    let condition = norm1(&scaled) * norm1(&inv);
    if !condition.is_finite() {
        return Err(Error::Construction("singular interpolation system".into()));
    }
    let re = DVector::from_iterator(n, b.iter().map(|v| v.re));
    let im = DVector::from_iterator(n, b.iter().map(|v| v.im));
    let xr = &inv * re;
    let xi = &inv * im;
    let solution = (0..n)
        .map(|j| Complex64::new(xr[j], xi[j]) * scales[j])
        .collect();
    Ok(EquilibratedSolve { solution, condition })
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Least-squares fit of a real `m x n` matrix to a complex right-hand side.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: Vec<Complex64>,
    /// `||A z - b||_2`.
    pub residual: f64,
}

/// Householder-QR least squares; fails when a column is (numerically)
/// dependent on the others, judged by `|R_ii| < rank_tol * max |R_jj|`.
pub fn lstsq_real(a: &DMatrix<f64>, b: &[Complex64], rank_tol: f64) -> Result<LeastSquares> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::Shape(format!("rhs length {} for {m} rows", b.len())));
    }
    if n == 0 {
        let residual = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        return Ok(LeastSquares { solution: vec![], residual });
    }
    if n > m {
        return Err(Error::DegenerateLocations(format!(
            "{n} unknowns but only {m} equations"
        )));
    }
    // column scaling keeps the rank test meaningful for uneven columns
    let scales: Vec<f64> = (0..n)
        .map(|j| {
            let s = a.column(j).norm();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let qr = scaled.clone().qr();
    let r = qr.r();
    let rmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if let Some(i) = (0..n).find(|&i| r[(i, i)].abs() <= rank_tol * rmax || rmax == 0.0) {
        return Err(Error::DegenerateLocations(format!(
            "collocation matrix is rank deficient at column {i}"
        )));
    }
    let q = qr.q();
    let solve = |rhs: DVector<f64>| -> DVector<f64> {
        let qtb = q.transpose() * rhs;
        r.solve_upper_triangular(&qtb).expect("nonzero diagonal")
    };
    let re = solve(DVector::from_iterator(m, b.iter().map(|v| v.re)));
    let im = solve(DVector::from_iterator(m, b.iter().map(|v| v.im)));
    let solution: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(re[j], im[j]) * scales[j])
        .collect();
    let residual = residual_norm(a, &solution, b);
    Ok(LeastSquares { solution, residual })
}

/// `||A z - b||_2` for real `A`, complex `z` and `b`.
pub fn residual_norm(a: &DMatrix<f64>, z: &[Complex64], b: &[Complex64]) -> f64 {
    let (m, n) = a.shape();
    (0..m)
        .map(|i| {
            let mut acc = -b[i];
            for j in 0..n {
                acc += z[j] * a[(i, j)];
            }
            acc.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrated_solve_recovers_solution() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1e3, 0.0, 1.0, 3e3, 1.0, 0.0, 1e3, 2.0]);
        let z = [Complex64::new(1.0, -1.0), Complex64::new(0.5, 2.0), Complex64::new(-3.0, 0.0)];
        let b: Vec<Complex64> = (0..3)
            .map(|i| (0..3).map(|j| z[j] * a[(i, j)]).sum())
            .collect();
        let s = solve_equilibrated(&a, &b).unwrap();
        for (u, v) in s.solution.iter().zip(&z) {
            assert!((u - v).norm() < 1e-12);
        }
        assert!(s.condition >= 1.0);
    }

    #[test]
    fn singular_system_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve_equilibrated(&a, &[Complex64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn lstsq_detects_rank_deficiency() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            lstsq_real(&a, &[Complex64::new(1.0, 0.0); 3], 1e-10),
            Err(Error::DegenerateLocations(_))
        ));
    }
}
