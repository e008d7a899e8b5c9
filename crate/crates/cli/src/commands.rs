use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use superres::basis::{moments_of_dirac, moments_of_spline, BasisKind, BasisSpec};
use superres::bivariate::{
    build_certificate_2d_unchecked, change_of_basis_2d, check_separation_2d, moments_2d_in, recover_spikes_2d_report,
    DiracMeasure2D, VerifyOptions2D, MIN_GUARANTEED_DEGREE_2D, SAFE_FACTOR_2D,
};
use superres::certificate::{build_certificate_unchecked, verify_certificate, VerifyOptions};
use superres::model::{cheb_distance, check_separation, DiracMeasure, MIN_GUARANTEED_DEGREE};
use superres::spike::{basis_warning, recover_spikes_report, Method, SolverOptions};
use superres::spline_recovery::recover_spline_report;
use superres::{synth, Complex64};

use crate::args::{CertifyArgs, GenArgs, Global, PhaseArgs, ProjectArgs};
use crate::error::CliError;
use crate::files::*;

/// Default separation factor in units of `pi / N` for one dimension.
pub const DEFAULT_FACTOR: f64 = 4.0;

/// Phase sweep: a trial succeeds when every location is this close in `rho`.
pub const PHASE_LOCATION_TOL: f64 = 1e-6;
/// Phase sweep: and every weight this close relatively.
pub const PHASE_WEIGHT_TOL: f64 = 1e-4;

pub const PHASE_HEADER: &str = "factor,sep_radians,pencil_success_rate,lp_success_rate,mean_runtime_ms";

pub fn read_text(path: Option<&Path>) -> Result<String, CliError> {
    let path = path.ok_or_else(|| CliError::Validation("--input is required".into()))?;
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Writes to `path`, or stdout when `None`.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Solver options from the global flags.
pub fn solver_options(g: &Global) -> Result<SolverOptions, CliError> {
    let mut opts = SolverOptions { method: g.method.unwrap_or(Method::Pencil), ..SolverOptions::default() };
    if let Some(tol) = g.tol {
        opts.pencil_rank_tol = tol;
    }
    opts.lp_grid_size = g.grid_size;
    opts.lp_nonnegative = g.nonnegative;
    opts.validate()?;
    Ok(opts)
}

// ---------------------------------------------------------------- gen

/// Seeded instance and its moments.
pub fn generate(g: &Global, a: &GenArgs) -> Result<(ProblemFile, TruthFile), CliError> {
    let mut rng = synth::rng(g.seed);
    let (n, m) = (a.n, a.m);
    if n == 0 {
        return Err(CliError::Validation("N must be positive".into()));
    }
    let basis = BasisSpec::new(a.basis, n);
    let positive = |w: f64| if g.nonnegative { w.abs() } else { w };
    let truth = match a.kind {
        Kind::Spikes => {
            let factor = a.factor.unwrap_or(DEFAULT_FACTOR);
            let measure = if a.on_grid {
                let size = g.grid_size.unwrap_or(16 * n + 1);
                synth::grid_spikes(&mut rng, m, n, factor, size, g.nonnegative)?
            } else if a.real || g.nonnegative {
                let x = synth::separated_locations(&mut rng, m, n, factor)?;
                DiracMeasure::from_real(x.into_iter().map(|x| (x, positive(synth::signed_weight(&mut rng)))).collect::<Vec<_>>())?
            } else {
                synth::complex_spikes(&mut rng, m, n, factor)?
            };
            TruthFile {
                kind: a.kind,
                n: Some(n),
                basis: Some(a.basis),
                atoms: Some(atoms_to_records(&measure)),
                atoms2d: None,
                spline: None,
            }
        }
        Kind::Spline => {
            let factor = a.factor.unwrap_or(DEFAULT_FACTOR);
            let s = synth::random_spline(&mut rng, a.r, m, n, factor)?;
            TruthFile {
                kind: a.kind,
                n: Some(n),
                basis: Some(a.basis),
                atoms: None,
                atoms2d: None,
                spline: Some(spline_to_record(&s)),
            }
        }
        Kind::Spikes2d => {
            let factor = a.factor.unwrap_or(SAFE_FACTOR_2D);
            let pts = if a.on_grid {
                synth::separated_grid_points_2d(&mut rng, m, n, factor, g.grid_size.unwrap_or(2 * n + 1))?
            } else {
                synth::separated_points_2d(&mut rng, m, n, factor)?
            };
            let atoms: Vec<([f64; 2], f64)> =
                pts.into_iter().map(|p| (p, positive(synth::signed_weight(&mut rng)))).collect();
            TruthFile {
                kind: a.kind,
                n: Some(n),
                basis: Some(a.basis),
                atoms: None,
                atoms2d: Some(atoms2d_to_records(&DiracMeasure2D::new(atoms)?)),
                spline: None,
            }
        }
    };
    let problem = project_truth(&truth, basis)?;
    Ok((problem, truth))
}

pub fn cmd_gen(g: &Global, a: &GenArgs) -> Result<(), CliError> {
    let (problem, truth) = generate(g, a)?;
    if let Some(path) = &a.truth {
        write_text(Some(path), &to_json(&truth))?;
    }
    write_text(g.output.as_deref(), &to_json(&problem))
}

// ---------------------------------------------------------------- project

/// Forward map from a ground truth to its moments in `basis`.
pub fn project_truth(truth: &TruthFile, basis: BasisSpec) -> Result<ProblemFile, CliError> {
    let (moments, spline) = match truth.kind {
        Kind::Spikes => (to_cx(moments_of_dirac(&truth.measure()?, basis).values()), None),
        Kind::Spline => {
            let s = truth.spline()?;
            let meta = SplineMeta {
                degree_r: s.degree(),
                boundary_left: to_cx(s.boundary_left()),
                boundary_right: to_cx(s.boundary_right()),
            };
            (to_cx(moments_of_spline(&s, basis).values()), Some(meta))
        }
        Kind::Spikes2d => {
            let y = moments_2d_in(&truth.measure2d()?, basis);
            let len = basis.len();
            let flat = (0..len * len).map(|i| Cx(Complex64::new(y[(i / len, i % len)], 0.0))).collect();
            (flat, None)
        }
    };
    Ok(ProblemFile { kind: truth.kind, basis: basis.kind, n: basis.degree, moments, spline })
}

pub fn cmd_project(g: &Global, a: &ProjectArgs) -> Result<(), CliError> {
    let truth: TruthFile = parse(&read_text(g.input.as_deref())?, "truth file")?;
    let n = a
        .n
        .or(truth.n)
        .ok_or_else(|| CliError::Validation("N is neither in the truth file nor given with -N".into()))?;
    let kind = a.basis.or(truth.basis).unwrap_or(BasisKind::Chebyshev);
    let problem = project_truth(&truth, BasisSpec::new(kind, n))?;
    write_text(g.output.as_deref(), &to_json(&problem))
}

// ---------------------------------------------------------------- recover

/// Runs the solver matching the problem kind.
pub fn solve(problem: &ProblemFile, opts: &SolverOptions, timing: bool) -> Result<SolutionFile, CliError> {
    problem.validate()?;
    let basis = problem.basis_spec();
    let mut out = SolutionFile::empty(Some(problem.kind), Status::Ok);
    out.warnings.extend(basis_warning(basis));
    let start = Instant::now();
    match problem.kind {
        Kind::Spikes => {
            if problem.n < MIN_GUARANTEED_DEGREE {
                out.warnings.push(format!(
                    "N = {} is below {MIN_GUARANTEED_DEGREE}, where the separation guarantee starts",
                    problem.n
                ));
            }
            let rec = recover_spikes_report(&problem.moment_vector()?, opts)?;
            let locs = rec.measure.locations();
            if !opts.lp_nonnegative && locs.len() > 1 && !check_separation(&locs, problem.n)?.satisfied {
                out.warnings.push("recovered support violates the separation condition; uniqueness is not guaranteed".into());
            }
            out.method = Some(opts.method);
            out.atoms = Some(atoms_to_records(&rec.measure));
            out.residual = Some(rec.relative_residual);
            out.lp_objective = rec.lp_objective;
        }
        Kind::Spline => {
            if opts.method == Method::Lp {
                out.warnings.push("spline knots are located by the pencil; --method lp is ignored".into());
            }
            if problem.n < MIN_GUARANTEED_DEGREE {
                out.warnings.push(format!(
                    "N = {} is below {MIN_GUARANTEED_DEGREE}, where the separation guarantee starts",
                    problem.n
                ));
            }
            let rec = recover_spline_report(&problem.spline_problem()?, opts)?;
            out.method = Some(Method::Pencil);
            out.spline = Some(spline_to_record(&rec.spline));
            out.residual = Some(rec.report.moment_residual);
            out.consistency = Some(rec.report);
        }
        Kind::Spikes2d => {
            if problem.n < MIN_GUARANTEED_DEGREE_2D {
                out.warnings.push(format!(
                    "N = {} is below {MIN_GUARANTEED_DEGREE_2D}, where the 2D separation guarantee starts",
                    problem.n
                ));
            }
            let cheb = change_of_basis_2d(&problem.moment_matrix(), basis, BasisKind::Chebyshev)?;
            let rec = recover_spikes_2d_report(&cheb, opts)?;
            let pts = rec.measure.locations();
            if !opts.lp_nonnegative && pts.len() > 1 && !check_separation_2d(&pts, problem.n, SAFE_FACTOR_2D)?.satisfied {
                out.warnings.push(format!(
                    "recovered support violates the 2D separation condition at factor {SAFE_FACTOR_2D}; uniqueness is not guaranteed"
                ));
            }
            out.method = Some(Method::Lp);
            out.atoms2d = Some(atoms2d_to_records(&rec.measure));
            out.residual = Some(rec.relative_residual);
            out.lp_objective = Some(rec.objective);
        }
    }
    if timing {
        out.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    out.options = Some(*opts);
    Ok(out)
}

pub fn cmd_recover(g: &Global) -> Result<(), CliError> {
    let mut kind = None;
    let result = (|| {
        let problem: ProblemFile = parse(&read_text(g.input.as_deref())?, "problem file")?;
        kind = Some(problem.kind);
        let mut opts = solver_options(g)?;
        let mut note = None;
        if problem.kind == Kind::Spikes2d {
            if g.method == Some(Method::Pencil) {
                note = Some("2D recovery always uses the LP; --method pencil is ignored".to_string());
            }
            opts.method = Method::Lp;
        }
        let mut sol = solve(&problem, &opts, g.timing)?;
        sol.warnings.extend(note);
        Ok(sol)
    })();
    match result {
        Ok(sol) => write_text(g.output.as_deref(), &to_json(&sol)),
        Err(e) => {
            // best effort: the original error is what the caller needs
            let _ = write_text(g.output.as_deref(), &to_json(&SolutionFile::failure(kind, &e)));
            Err(e)
        }
    }
}

// ---------------------------------------------------------------- certify

enum Target {
    One { n: usize, knots: Vec<f64>, values: Vec<Complex64> },
    Two { n: usize, points: Vec<[f64; 2]>, signs: Vec<f64> },
}

fn certify_target(text: &str, n_flag: Option<usize>) -> Result<Target, CliError> {
    let value: serde_json::Value = parse(text, "certify input")?;
    let need_n = |n: Option<usize>| {
        n_flag.or(n).ok_or_else(|| CliError::Validation("N is neither in the input nor given with -N".into()))
    };
    if value.get("kind").is_some() {
        let truth: TruthFile = parse(text, "truth file")?;
        let n = need_n(truth.n)?;
        return match truth.kind {
            Kind::Spikes => {
                let m = truth.measure()?;
                Ok(Target::One {
                    n,
                    knots: m.locations(),
                    values: m.weights().iter().map(|w| w / w.norm()).collect(),
                })
            }
            Kind::Spikes2d => {
                let m = truth.measure2d()?;
                Ok(Target::Two { n, points: m.locations(), signs: m.atoms().iter().map(|a| a.weight.signum()).collect() })
            }
            Kind::Spline => Err(CliError::Validation("certify takes spike truth files, not splines".into())),
        };
    }
    let input: CertifyInput = parse(text, "certify input")?;
    let n = need_n(input.n)?;
    match input {
        CertifyInput { knots: Some(knots), values: Some(values), points: None, signs: None, .. } => {
            Ok(Target::One { n, knots, values: from_cx(&values) })
        }
        CertifyInput { knots: None, values: None, points: Some(points), signs: Some(signs), .. } => {
            Ok(Target::Two { n, points, signs })
        }
        _ => Err(CliError::Validation("certify input needs either knots + values or points + signs".into())),
    }
}

fn csv_samples_1d(p: &superres::certificate::AlgebraicPoly, count: usize) -> String {
    let mut s = String::from("x,t,re_p,im_p,abs_p\n");
    for i in 0..count {
        let t = PI * i as f64 / (count - 1) as f64;
        let v = p.eval_t(t);
        let _ = writeln!(s, "{:?},{:?},{:?},{:?},{:?}", t.cos(), t, v.re, v.im, v.norm());
    }
    s
}

fn csv_samples_2d(p: &superres::bivariate::BivariatePoly, count: usize) -> String {
    let mut s = String::from("x1,x2,t1,t2,p,abs_p\n");
    let t: Vec<f64> = (0..count).map(|i| PI * i as f64 / (count - 1) as f64).collect();
    let grid = p.eval_grid(&t, &t);
    for (i, &a) in t.iter().enumerate() {
        for (j, &b) in t.iter().enumerate() {
            let v = grid[(i, j)];
            let _ = writeln!(s, "{:?},{:?},{:?},{:?},{:?},{:?}", a.cos(), b.cos(), a, b, v, v.abs());
        }
    }
    s
}

/// Builds and verifies the certificate. Returns the report and, separately,
/// samples for plotting when `sample_points` is set.
pub fn certify(text: &str, g: &Global, a: &CertifyArgs) -> Result<(CertifyOutput, Option<String>), CliError> {
    let samples_wanted = a.samples.is_some() || a.sample_points.is_some();
    match certify_target(text, a.n)? {
        Target::One { n, knots, values } => {
            if knots.len() != values.len() {
                return Err(CliError::Validation(format!("{} knots with {} values", knots.len(), values.len())));
            }
            if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| (v.norm() - 1.0).abs() > 1e-9) {
                return Err(CliError::Validation(format!("value {i} has modulus {}, expected 1", v.norm())));
            }
            let sep = check_separation(&knots, n)?;
            let mut out = CertifyOutput {
                dimension: 1,
                n,
                separation_satisfied: sep.satisfied,
                separation: serde_json::to_value(&sep).expect("plain data"),
                constructed: false,
                kernel_degree: None,
                condition: None,
                report: None,
                passed: false,
                warnings: Vec::new(),
            };
            if sep.below_theorem_degree {
                out.warnings.push(format!("N = {n} is below {MIN_GUARANTEED_DEGREE}, where the guarantee starts"));
            }
            if !sep.satisfied && !g.force {
                return Ok((out, None));
            }
            let cert = build_certificate_unchecked(&knots, &values, n)?;
            let gpd = a.grid_per_degree.unwrap_or(16);
            let opts = VerifyOptions { grid_points_per_degree: gpd, ..VerifyOptions::default() };
            let report = verify_certificate(&cert.poly, &knots, &values, &opts)?;
            out.constructed = true;
            out.kernel_degree = Some(cert.kernel_degree);
            out.condition = Some(cert.condition);
            out.passed = report.passed;
            out.report = Some(report);
            out.warnings.extend(cert.warnings.iter().cloned());
            let samples =
                samples_wanted.then(|| csv_samples_1d(&cert.poly, a.sample_points.unwrap_or(gpd * n + 1).max(2)));
            Ok((out, samples))
        }
        Target::Two { n, points, signs } => {
            if points.len() != signs.len() {
                return Err(CliError::Validation(format!("{} points with {} signs", points.len(), signs.len())));
            }
            if let Some((i, s)) = signs.iter().enumerate().find(|(_, s)| (s.abs() - 1.0).abs() > 1e-9) {
                return Err(CliError::Validation(format!("sign {i} is {s}, expected +1 or -1")));
            }
            let factor = a.factor.unwrap_or(SAFE_FACTOR_2D);
            let sep = check_separation_2d(&points, n, factor)?;
            let mut out = CertifyOutput {
                dimension: 2,
                n,
                separation_satisfied: sep.satisfied,
                separation: serde_json::to_value(&sep).expect("plain data"),
                constructed: false,
                kernel_degree: None,
                condition: None,
                report: None,
                passed: false,
                warnings: Vec::new(),
            };
            if sep.below_theorem_degree {
                out.warnings.push(format!("N = {n} is below {MIN_GUARANTEED_DEGREE_2D}, where the 2D guarantee starts"));
            }
            if sep.below_safe_factor {
                out.warnings.push(format!("separation factor {factor} is below the safe value {SAFE_FACTOR_2D}"));
            }
            if !sep.satisfied && !g.force {
                return Ok((out, None));
            }
            let cert = build_certificate_2d_unchecked(&points, &signs, n, factor)?;
            let gpd = a.grid_per_degree.unwrap_or(4);
            let opts = VerifyOptions2D { grid_points_per_degree: gpd, ..VerifyOptions2D::default() };
            let report = superres::bivariate::verify_certificate_2d(&cert.poly, &points, &signs, &opts)?;
            out.constructed = true;
            out.kernel_degree = Some(cert.kernel_degree);
            out.condition = Some(cert.condition);
            out.passed = report.passed;
            out.report = Some(report);
            for w in &cert.warnings {
                if !out.warnings.contains(w) {
                    out.warnings.push(w.clone());
                }
            }
            let samples = samples_wanted.then(|| csv_samples_2d(&cert.poly, a.sample_points.unwrap_or(101).max(2)));
            Ok((out, samples))
        }
    }
}

pub fn cmd_certify(g: &Global, a: &CertifyArgs) -> Result<(), CliError> {
    let text = read_text(g.input.as_deref())?;
    let (out, samples) = certify(&text, g, a)?;
    write_text(g.output.as_deref(), &to_json(&out))?;
    if let (Some(path), Some(csv)) = (&a.samples, samples) {
        write_text(Some(path), &csv)?;
    }
    if !out.separation_satisfied && !g.force {
        return Err(CliError::Validation("separation condition violated; pass --force to construct anyway".into()));
    }
    if !out.passed {
        return Err(CliError::Solver("certificate failed verification".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- phase

/// One sweep configuration.
#[derive(Debug, Clone)]
pub struct PhaseConfig {
    pub trials: usize,
    pub min_factor: f64,
    pub max_factor: f64,
    pub steps: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// LP grid and instance grid; `16 N + 1` when `None`.
    pub grid_size: Option<usize>,
    pub nonnegative: bool,
    pub parallelism: Option<usize>,
    pub timing: bool,
}

impl PhaseConfig {
    pub fn from_args(g: &Global, a: &PhaseArgs) -> Self {
        Self {
            trials: a.trials,
            min_factor: a.min_factor,
            max_factor: a.max_factor,
            steps: a.steps,
            n: a.n,
            m: a.m,
            seed: g.seed,
            grid_size: g.grid_size,
            nonnegative: g.nonnegative,
            parallelism: g.parallelism,
            timing: g.timing,
        }
    }

    pub fn factors(&self) -> Vec<f64> {
        let span = self.max_factor - self.min_factor;
        (0..self.steps)
            .map(|i| self.min_factor + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

/// Exact recovery up to the sweep tolerances.
pub fn recovered(got: &DiracMeasure, truth: &DiracMeasure) -> bool {
    got.len() == truth.len()
        && got.atoms().iter().zip(truth.atoms()).all(|(a, b)| {
            cheb_distance(a.location, b.location).is_ok_and(|d| d <= PHASE_LOCATION_TOL)
                && (a.weight - b.weight).norm() <= PHASE_WEIGHT_TOL * b.weight.norm()
        })
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    pencil: bool,
    lp: bool,
    ms: f64,
}

fn run_trial(cfg: &PhaseConfig, step: usize, trial: usize, factor: f64) -> Result<Trial, CliError> {
    let grid = cfg.grid_size.unwrap_or(16 * cfg.n + 1);
    let mut rng = synth::rng(synth::trial_seed(cfg.seed, step as u64, trial as u64));
    let truth = synth::grid_spikes(&mut rng, cfg.m, cfg.n, factor, grid, cfg.nonnegative)?;
    let y = moments_of_dirac(&truth, BasisSpec::chebyshev(cfg.n));
    let start = Instant::now();
    let pencil = superres::spike::recover_spikes(&y, &SolverOptions::default()).is_ok_and(|m| recovered(&m, &truth));
    let lp_opts = SolverOptions { lp_grid_size: Some(grid), lp_nonnegative: cfg.nonnegative, ..SolverOptions::lp() };
    let lp = superres::spike::recover_spikes(&y, &lp_opts).is_ok_and(|m| recovered(&m, &truth));
    Ok(Trial { pencil, lp, ms: start.elapsed().as_secs_f64() * 1e3 })
}

/// The sweep as CSV. Every trial has its own seed and results are
/// aggregated in trial order, so the output does not depend on scheduling.
pub fn phase_csv(cfg: &PhaseConfig) -> Result<String, CliError> {
    if cfg.steps < 2 {
        return Err(CliError::Validation("phase needs at least two steps".into()));
    }
    if cfg.trials == 0 || cfg.n == 0 {
        return Err(CliError::Validation("trials and N must be positive".into()));
    }
    if !(cfg.min_factor > 0.0) || !(cfg.max_factor >= cfg.min_factor) {
        return Err(CliError::Validation("need 0 < min-factor <= max-factor".into()));
    }
    let factors = cfg.factors();
    let jobs: Vec<(usize, usize)> = (0..cfg.steps).flat_map(|s| (0..cfg.trials).map(move |t| (s, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {:?} workers: {e}", cfg.parallelism)))?;
    let results: Vec<Result<Trial, CliError>> =
        pool.install(|| jobs.par_iter().map(|&(s, t)| run_trial(cfg, s, t, factors[s])).collect());
    let results: Vec<Trial> = results.into_iter().collect::<Result<_, _>>()?;

    let mut csv = format!("{PHASE_HEADER}\n");
    for (s, chunk) in results.chunks(cfg.trials).enumerate() {
        let count = chunk.len() as f64;
        let pencil = chunk.iter().filter(|t| t.pencil).count() as f64 / count;
        let lp = chunk.iter().filter(|t| t.lp).count() as f64 / count;
        let runtime = if cfg.timing { format!("{:?}", chunk.iter().map(|t| t.ms).sum::<f64>() / count) } else { String::new() };
        let f = factors[s];
        let _ = writeln!(csv, "{f:?},{:?},{pencil:?},{lp:?},{runtime}", f * PI / cfg.n as f64);
    }
    Ok(csv)
}

pub fn cmd_phase(g: &Global, a: &PhaseArgs) -> Result<(), CliError> {
    let csv = phase_csv(&PhaseConfig::from_args(g, a))?;
    write_text(g.output.as_deref(), &csv)
}
