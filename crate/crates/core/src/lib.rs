//! Super-resolution on the interval [-1, 1] with algebraic polynomials.
//!
//! A sparse Dirac train `f = sum_m c_m delta_{x_m}` (or a non-uniform spline
//! whose highest distributional derivative is such a train) is recovered from
//! its inner products `y_k = <f, P_k>` with a basis of polynomials of degree at
//! most `N`. Recovery is exact when the support is separated in the metric
//! `rho(x, y) = |arccos x - arccos y|`.
//!
//! Module map:
//!
//! * [`model`]: measures, splines, the arccos metric and separation checks.
//! * [`basis`]: monomial / Chebyshev / Legendre bases, derivative matrices,
//!   basis conversion and moment computation.
//! * [`certificate`]: dual interpolating polynomials built by reflection and
//!   symmetrization of a trigonometric interpolant, plus numerical verification.
//! * [`spike`]: matrix-pencil and linear-programming spike recovery.
//! * [`spline_recovery`]: derivative-moment recursion for splines.
//! * [`bivariate`]: the two-dimensional tensor-product counterparts.
//! * [`synth`]: seeded generation of separated test instances.

pub mod basis;
pub mod bivariate;
pub mod certificate;
mod error;
pub mod kernel;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod quadrature;
pub mod spike;
pub mod spline_recovery;
pub mod synth;

pub use error::{Error, Result};
pub use num_complex::Complex64;
