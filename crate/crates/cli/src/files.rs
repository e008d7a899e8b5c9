//! JSON schemas for problems, ground truth and solutions.
//!
//! Complex numbers are written as `[re, im]` everywhere. On input a bare
//! number is accepted as a real value.

use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};
use superres::basis::{BasisKind, BasisSpec, MomentVector};
use superres::bivariate::DiracMeasure2D;
use superres::certificate::CertificateReport;
use superres::model::{DiracMeasure, Spline};
use superres::spike::{Method, SolverOptions};
use superres::spline_recovery::{ConsistencyReport, SplineProblem};
use superres::Complex64;

use crate::error::CliError;

/// A complex number on the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cx(pub Complex64);

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.0.re)?;
        t.serialize_element(&self.0.im)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Cx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CxVisitor;

        impl<'de> Visitor<'de> for CxVisitor {
            type Value = Cx;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or an [re, im] pair")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Cx, E> {
                Ok(Cx(Complex64::new(v, 0.0)))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Cx, E> {
                self.visit_f64(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cx, E> {
                self.visit_f64(v as f64)
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Cx, A::Error> {
                let re: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(Cx(Complex64::new(re, im)))
            }
        }

        d.deserialize_any(CxVisitor)
    }
}

pub fn to_cx(v: &[Complex64]) -> Vec<Cx> {
    v.iter().copied().map(Cx).collect()
}

pub fn from_cx(v: &[Cx]) -> Vec<Complex64> {
    v.iter().map(|c| c.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Spikes,
    Spline,
    Spikes2d,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Spikes => "spikes",
            Kind::Spline => "spline",
            Kind::Spikes2d => "spikes2d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineMeta {
    pub degree_r: usize,
    pub boundary_left: Vec<Cx>,
    pub boundary_right: Vec<Cx>,
}

/// Moments of an unknown signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Kind,
    pub basis: BasisKind,
    #[serde(rename = "N")]
    pub n: usize,
    /// `N + 1` values, or `(N + 1)^2` row-major for `spikes2d`.
    pub moments: Vec<Cx>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spline: Option<SplineMeta>,
}

impl ProblemFile {
    pub fn basis_spec(&self) -> BasisSpec {
        BasisSpec::new(self.basis, self.n)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let len = self.n + 1;
        let expected = if self.kind == Kind::Spikes2d { len * len } else { len };
        if self.moments.len() != expected {
            return Err(CliError::Validation(format!(
                "{} moments for kind {} with N = {}; expected {expected}",
                self.moments.len(),
                self.kind,
                self.n
            )));
        }
        if self.moments.iter().any(|c| !c.0.re.is_finite() || !c.0.im.is_finite()) {
            return Err(CliError::Validation("moments must be finite".into()));
        }
        match (&self.spline, self.kind) {
            (Some(_), Kind::Spline) | (None, Kind::Spikes | Kind::Spikes2d) => {}
            (None, Kind::Spline) => return Err(CliError::Validation("kind spline needs a spline record".into())),
            (Some(_), _) => {
                return Err(CliError::Validation(format!("spline record given for kind {}", self.kind)))
            }
        }
        if let Some(meta) = &self.spline {
            let want = meta.degree_r + 1;
            if meta.boundary_left.len() != want || meta.boundary_right.len() != want {
                return Err(CliError::Validation(format!(
                    "boundary arrays of lengths {} and {}; degree {} needs {want}",
                    meta.boundary_left.len(),
                    meta.boundary_right.len(),
                    meta.degree_r
                )));
            }
        }
        if self.kind == Kind::Spikes2d && self.moments.iter().any(|c| c.0.im != 0.0) {
            return Err(CliError::Validation("2D moments must be real".into()));
        }
        Ok(())
    }

    pub fn moment_vector(&self) -> Result<MomentVector, CliError> {
        Ok(MomentVector::new(self.basis_spec(), from_cx(&self.moments))?)
    }

    pub fn spline_problem(&self) -> Result<SplineProblem, CliError> {
        let meta = self
            .spline
            .as_ref()
            .ok_or_else(|| CliError::Validation("missing spline record".into()))?;
        Ok(SplineProblem::new(
            self.moment_vector()?,
            meta.degree_r,
            from_cx(&meta.boundary_left),
            from_cx(&meta.boundary_right),
        )?)
    }

    pub fn moment_matrix(&self) -> nalgebra::DMatrix<f64> {
        let len = self.n + 1;
        nalgebra::DMatrix::from_fn(len, len, |i, j| self.moments[i * len + j].0.re)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRecord {
    pub x: f64,
    pub weight: Cx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom2DRecord {
    pub x: [f64; 2],
    pub weight: f64,
}

/// Piecewise polynomial; each piece lists monomial coefficients in `x`,
/// lowest order first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineRecord {
    pub degree_r: usize,
    pub knots: Vec<f64>,
    pub pieces: Vec<Vec<Cx>>,
}

pub fn atoms_to_records(m: &DiracMeasure) -> Vec<AtomRecord> {
    m.atoms().iter().map(|a| AtomRecord { x: a.location, weight: Cx(a.weight) }).collect()
}

pub fn records_to_atoms(r: &[AtomRecord]) -> Result<DiracMeasure, CliError> {
    Ok(DiracMeasure::new(r.iter().map(|a| (a.x, a.weight.0)).collect::<Vec<_>>())?)
}

pub fn atoms2d_to_records(m: &DiracMeasure2D) -> Vec<Atom2DRecord> {
    m.atoms().iter().map(|a| Atom2DRecord { x: a.location, weight: a.weight }).collect()
}

pub fn records_to_atoms2d(r: &[Atom2DRecord]) -> Result<DiracMeasure2D, CliError> {
    Ok(DiracMeasure2D::new(r.iter().map(|a| (a.x, a.weight)).collect::<Vec<_>>())?)
}

pub fn spline_to_record(s: &Spline) -> SplineRecord {
    SplineRecord {
        degree_r: s.degree(),
        knots: s.knots().to_vec(),
        pieces: s.pieces().iter().map(|p| to_cx(p)).collect(),
    }
}

pub fn record_to_spline(r: &SplineRecord) -> Result<Spline, CliError> {
    Ok(Spline::new(r.degree_r, r.knots.clone(), r.pieces.iter().map(|p| from_cx(p)).collect())?)
}

/// The signal behind a generated problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub kind: Kind,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms2d: Option<Vec<Atom2DRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spline: Option<SplineRecord>,
}

impl TruthFile {
    pub fn measure(&self) -> Result<DiracMeasure, CliError> {
        records_to_atoms(self.atoms.as_deref().ok_or_else(|| missing("atoms", self.kind))?)
    }

    pub fn measure2d(&self) -> Result<DiracMeasure2D, CliError> {
        records_to_atoms2d(self.atoms2d.as_deref().ok_or_else(|| missing("atoms2d", self.kind))?)
    }

    pub fn spline(&self) -> Result<Spline, CliError> {
        record_to_spline(self.spline.as_ref().ok_or_else(|| missing("spline", self.kind))?)
    }
}

fn missing(field: &str, kind: Kind) -> CliError {
    CliError::Validation(format!("truth file of kind {kind} has no '{field}' field"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// `validation`, `solver` or `io`.
    pub class: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

/// Output of `recover`; also written, with `status = error`, on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms2d: Option<Vec<Atom2DRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spline: Option<SplineRecord>,
    /// Relative forward-model residual `||moments(solution) - y|| / ||y||`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<SolverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

impl SolutionFile {
    pub fn empty(kind: Option<Kind>, status: Status) -> Self {
        Self {
            kind,
            status,
            method: None,
            atoms: None,
            atoms2d: None,
            spline: None,
            residual: None,
            consistency: None,
            lp_objective: None,
            options: None,
            timing_ms: None,
            warnings: Vec::new(),
            error: None,
        }
    }

    pub fn failure(kind: Option<Kind>, err: &CliError) -> Self {
        Self {
            error: Some(ErrorRecord { class: err.class().into(), message: err.to_string() }),
            ..Self::empty(kind, Status::Error)
        }
    }
}

/// Input of `certify`: 1D knots with unimodular values or 2D points with
/// signs. A truth file is accepted as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyInput {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Cx>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<f64>>,
}

/// Output of `certify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutput {
    pub dimension: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub separation_satisfied: bool,
    pub separation: serde_json::Value,
    pub constructed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CertificateReport>,
    pub passed: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("cannot parse {what}: {e}")))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_values_accept_bare_reals() {
        let v: Vec<Cx> = serde_json::from_str("[1.5, [2, -3], 4]").unwrap();
        assert_eq!(from_cx(&v), vec![Complex64::new(1.5, 0.0), Complex64::new(2.0, -3.0), Complex64::new(4.0, 0.0)]);
        assert_eq!(serde_json::to_string(&Cx(Complex64::new(1.0, 0.0))).unwrap(), "[1.0,0.0]");
        assert!(serde_json::from_str::<Cx>("[1, 2, 3]").is_err());
    }

    #[test]
    fn problem_lengths_are_checked() {
        let p = ProblemFile {
            kind: Kind::Spikes2d,
            basis: BasisKind::Chebyshev,
            n: 2,
            moments: vec![Cx(Complex64::new(1.0, 0.0)); 3],
            spline: None,
        };
        assert!(p.validate().is_err());
        let ok = ProblemFile { moments: vec![Cx(Complex64::new(1.0, 0.0)); 9], ..p.clone() };
        ok.validate().unwrap();
        let complex = ProblemFile { moments: vec![Cx(Complex64::new(1.0, 1.0)); 9], ..p };
        assert!(complex.validate().is_err());
    }

    #[test]
    fn unknown_basis_is_a_parse_error() {
        let err = parse::<ProblemFile>(r#"{"kind": "spikes", "basis": "hermite", "N": 1, "moments": [1, 2]}"#, "problem")
            .unwrap_err();
        assert!(err.to_string().contains("hermite"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}
