//! The three commands behind the `sosblock` binary, as library functions
//! returning serializable reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use sosblock::certify::{
    combine_block_certificates, gram_to_sos_with_tol, verify_certificate, Certificate,
};
use sosblock::gram::{
    build_gram_problem, minimal_projection_partition, restrict_problem, GramProblem, ProjectionMask,
};
use sosblock::oracle::{full_support_sos, sparse_sos};
use sosblock::solver::{
    solve_feasibility, DualCertificate, SolveOutcome, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use sosblock::split::{extract_blocks, split_partition};
use sosblock::support::{half_newton_support, sigma, SupportError};
use sosblock::{
    parse_polynomial, BlockPartition, ExponentVector, PolyError, Polynomial, SupportSet,
};

pub const ODD_VERTEX_REASON: &str = "not SOS: odd Newton vertex";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(#[from] PolyError),
    #[error("{ODD_VERTEX_REASON} {0:?}")]
    OddVertex(ExponentVector),
    #[error("the zero polynomial has no Newton polytope")]
    ZeroPolynomial,
    #[error("invalid flag: {0}")]
    InvalidFlag(String),
    #[error("{0}")]
    Internal(String),
}

fn newton(f: &Polynomial) -> Result<SupportSet, CliError> {
    half_newton_support(f).map_err(|e| match e {
        SupportError::OddVertex(v) => CliError::OddVertex(v),
        SupportError::ZeroPolynomial => CliError::ZeroPolynomial,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub cells: Vec<SupportSet>,
    pub dropped: SupportSet,
    pub trivial: bool,
}

impl From<&BlockPartition> for PartitionReport {
    fn from(p: &BlockPartition) -> Self {
        PartitionReport {
            cells: p.cells().to_vec(),
            dropped: p.dropped().clone(),
            trivial: p.is_trivial(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableCounts {
    pub full: usize,
    /// `None` when the split cells lose a nonzero coefficient of `f`.
    pub split: Option<usize>,
    pub projection: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub polynomial: String,
    pub nvars: usize,
    pub support: SupportSet,
    pub half_newton: SupportSet,
    pub sigma: SupportSet,
    pub split: PartitionReport,
    pub projection: PartitionReport,
    pub projection_mask: Vec<Vec<u8>>,
    pub variables: VariableCounts,
}

pub fn cmd_analyze(input: &str) -> Result<AnalyzeReport, CliError> {
    let f = parse_polynomial(input)?;
    let q = newton(&f)?;
    let internal = |e: &dyn fmt::Display| CliError::Internal(e.to_string());
    let split = split_partition(&f, &q).map_err(|e| internal(&e))?;
    let projection = minimal_projection_partition(&f, &q).map_err(|e| internal(&e))?;
    let prob = build_gram_problem(&f, &q).map_err(|e| internal(&e))?;
    let mask =
        ProjectionMask::from_partition(prob.basis(), &projection).map_err(|e| internal(&e))?;
    let variables = VariableCounts {
        full: prob.num_variables(),
        split: restrict_problem(&prob, &split)
            .ok()
            .map(|r| r.num_variables()),
        projection: restrict_problem(&prob, &projection)
            .map_err(|e| internal(&e))?
            .num_variables(),
    };
    Ok(AnalyzeReport {
        polynomial: f.to_string(),
        nvars: f.nvars(),
        support: f.support(),
        sigma: sigma(&q),
        half_newton: q,
        split: (&split).into(),
        projection: (&projection).into(),
        projection_mask: mask.to_rows(),
        variables,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Split,
    Projection,
    None,
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "split" => Ok(Method::Split),
            "projection" => Ok(Method::Projection),
            "none" => Ok(Method::None),
            other => Err(CliError::InvalidFlag(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Sos,
    NotSos,
    Undetermined,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Sos => 0,
            Status::NotSos => 1,
            Status::Undetermined => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    pub method: Method,
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            method: Method::Projection,
            tol: DEFAULT_TOL,
            seed: 0,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualReport {
    pub multipliers: Vec<(ExponentVector, f64)>,
    pub max_eigenvalue: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeReport {
    pub status: Status,
    pub method: Method,
    pub tol: f64,
    pub seed: u64,
    pub certificate: Option<Certificate>,
    pub dual_certificate: Option<DualReport>,
    /// Number of independent blocks the certified problem was solved in.
    pub blocks: usize,
    /// The reduced problem was infeasible and the verdict comes from the
    /// unreduced one.
    pub confirmed_by_full_problem: bool,
    pub reason: Option<String>,
}

impl DecomposeReport {
    fn new(status: Status, opts: &DecomposeOptions) -> Self {
        DecomposeReport {
            status,
            method: opts.method,
            tol: opts.tol,
            seed: opts.seed,
            certificate: None,
            dual_certificate: None,
            blocks: 0,
            confirmed_by_full_problem: false,
            reason: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

enum Solved {
    Sos(Certificate),
    NotSos(DualCertificate, GramProblem),
    Undetermined(String),
}

/// Solves one Gram problem and turns the outcome into a checked verdict.
/// The solver runs at a tenth of `tol` so the factorization keeps the
/// certificate residual within `tol`.
fn solve_problem(prob: &GramProblem, f: &Polynomial, opts: &DecomposeOptions) -> Solved {
    match solve_feasibility(prob, opts.tol / 10.0, opts.max_iter) {
        SolveOutcome::Feasible(g) => match gram_to_sos_with_tol(&g, prob, opts.tol) {
            Ok(mut cert) => {
                let residual = verify_certificate(f, &mut cert);
                if residual <= opts.tol {
                    Solved::Sos(cert)
                } else {
                    Solved::Undetermined(format!("certificate residual {residual:e} exceeds tolerance"))
                }
            }
            Err(e) => Solved::Undetermined(e.to_string()),
        },
        SolveOutcome::Infeasible(y) => Solved::NotSos(y, prob.clone()),
        SolveOutcome::Undetermined { iterations, primal_residual, gap } => Solved::Undetermined(format!(
            "solver undetermined after {iterations} iterations (residual {primal_residual:e}, gap {gap:e})"
        )),
    }
}

fn dual_report(y: DualCertificate, prob: &GramProblem) -> DualReport {
    let check = y.verify(prob);
    DualReport {
        multipliers: y.multipliers,
        max_eigenvalue: check.max_eigenvalue,
        objective: check.objective,
    }
}

fn finish(report: &mut DecomposeReport, solved: Solved, blocks: usize) {
    match solved {
        Solved::Sos(cert) => {
            report.status = Status::Sos;
            report.certificate = Some(cert);
            report.blocks = blocks;
        }
        Solved::NotSos(y, prob) => {
            report.status = Status::NotSos;
            report.dual_certificate = Some(dual_report(y, &prob));
        }
        Solved::Undetermined(why) => {
            report.status = Status::Undetermined;
            report.reason = Some(why);
        }
    }
}

/// A reduced problem said "infeasible": settle it on the full problem,
/// so a wrong reduction can never turn into a wrong verdict.
fn confirm_with_full(
    report: &mut DecomposeReport,
    full: &GramProblem,
    f: &Polynomial,
    opts: &DecomposeOptions,
) {
    report.confirmed_by_full_problem = true;
    let solved = solve_problem(full, f, opts);
    if let Solved::Sos(_) = solved {
        log::warn!("reduced problem infeasible but full problem feasible");
    }
    finish(report, solved, 1);
}

pub fn cmd_decompose(input: &str, opts: &DecomposeOptions) -> Result<DecomposeReport, CliError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(CliError::InvalidFlag("tolerance must be positive".into()));
    }
    let f = parse_polynomial(input)?;
    let mut report = DecomposeReport::new(Status::Undetermined, opts);
    if f.is_zero() {
        report.status = Status::Sos;
        report.certificate = Some(Certificate::empty());
        return Ok(report);
    }
    let q = match newton(&f) {
        Ok(q) => q,
        Err(CliError::OddVertex(_)) => {
            report.status = Status::NotSos;
            report.reason = Some(ODD_VERTEX_REASON.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let internal = |e: &dyn fmt::Display| CliError::Internal(e.to_string());
    let full = build_gram_problem(&f, &q).map_err(|e| internal(&e))?;
    match opts.method {
        Method::None => finish(&mut report, solve_problem(&full, &f, opts), 1),
        Method::Projection => {
            let p = minimal_projection_partition(&f, &q).map_err(|e| internal(&e))?;
            let reduced = restrict_problem(&full, &p).map_err(|e| internal(&e))?;
            log::info!(
                "projection: {} cells, {} -> {} variables",
                p.num_cells(),
                full.num_variables(),
                reduced.num_variables()
            );
            match solve_problem(&reduced, &f, opts) {
                Solved::NotSos(..) => confirm_with_full(&mut report, &full, &f, opts),
                solved => finish(&mut report, solved, p.num_cells()),
            }
        }
        Method::Split => {
            let p = split_partition(&f, &q).map_err(|e| internal(&e))?;
            let blocks = extract_blocks(&f, &p).map_err(|e| internal(&e))?;
            log::info!("split: {} blocks", blocks.len());
            let mut parts = Vec::with_capacity(blocks.len());
            let mut failed = None;
            for (pi, _) in &blocks {
                if pi.is_zero() {
                    continue;
                }
                let (solved, basis) = match half_newton_support(pi) {
                    Err(_) => (
                        Solved::Undetermined("block has an odd Newton vertex".into()),
                        None,
                    ),
                    Ok(qi) => match build_gram_problem(pi, &qi) {
                        Ok(bp) => (solve_problem(&bp, pi, opts), Some(qi)),
                        Err(e) => (Solved::Undetermined(e.to_string()), None),
                    },
                };
                match solved {
                    Solved::Sos(mut cert) => {
                        cert.blocks = basis.map(|b| vec![b]);
                        parts.push(cert);
                    }
                    other => {
                        failed = Some(other);
                        break;
                    }
                }
            }
            match failed {
                None => {
                    let n = parts.len();
                    let cert = combine_block_certificates(&f, parts);
                    if cert.residual <= opts.tol {
                        finish(&mut report, Solved::Sos(cert), n);
                    } else {
                        finish(&mut report, solve_problem(&full, &f, opts), 1);
                    }
                }
                Some(Solved::Undetermined(_)) => {
                    finish(&mut report, solve_problem(&full, &f, opts), 1)
                }
                Some(_) => confirm_with_full(&mut report, &full, &f, opts),
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportClass {
    Full,
    Sparse,
}

impl FromStr for SupportClass {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "full" => Ok(SupportClass::Full),
            "sparse" => Ok(SupportClass::Sparse),
            other => Err(CliError::InvalidFlag(format!(
                "unknown support class '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CensusOptions {
    pub n: usize,
    pub degree: u32,
    pub samples: usize,
    pub support: SupportClass,
    pub density: f64,
    pub seed: u64,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions {
            n: 2,
            degree: 4,
            samples: 100,
            support: SupportClass::Full,
            density: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportDescriptor {
    Full { n: usize, degree: u32 },
    Sparse { n: usize, degree: u32, density: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    pub samples: usize,
    pub support_class: SupportDescriptor,
    pub trivial_split_fraction: f64,
    pub trivial_projection_fraction: f64,
    /// Number of projection cells ↦ number of samples.
    pub block_size_histogram: BTreeMap<usize, usize>,
    pub seed: u64,
}

struct Sample {
    split_trivial: bool,
    projection_trivial: bool,
    projection_cells: usize,
}

fn census_sample(opts: &CensusOptions, index: usize) -> Result<Sample, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(index as u64));
    let k = opts.degree / 2;
    let f = match opts.support {
        SupportClass::Full => full_support_sos(&mut rng, opts.n, k),
        SupportClass::Sparse => sparse_sos(&mut rng, opts.n, k, opts.density),
    };
    let q = newton(&f)?;
    let split = split_partition(&f, &q).map_err(|e| CliError::Internal(e.to_string()))?;
    let projection =
        minimal_projection_partition(&f, &q).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Sample {
        split_trivial: split.is_trivial(),
        projection_trivial: projection.is_trivial(),
        projection_cells: projection.num_cells(),
    })
}

pub fn cmd_census(opts: &CensusOptions) -> Result<CensusReport, CliError> {
    if opts.samples == 0 || opts.samples > 10_000 {
        return Err(CliError::InvalidFlag("samples must be in 1..=10000".into()));
    }
    if opts.n == 0 || opts.n > 4 {
        return Err(CliError::InvalidFlag("n must be in 1..=4".into()));
    }
    if opts.degree == 0 || opts.degree % 2 == 1 || opts.degree > 8 {
        return Err(CliError::InvalidFlag(
            "degree must be even and in 2..=8".into(),
        ));
    }
    if opts.support == SupportClass::Sparse && !(opts.density > 0.0 && opts.density <= 1.0) {
        return Err(CliError::InvalidFlag("density must be in (0, 1]".into()));
    }
    let results: Vec<Sample> = (0..opts.samples)
        .into_par_iter()
        .map(|i| census_sample(opts, i))
        .collect::<Result<_, _>>()?;
    let mut histogram = BTreeMap::new();
    for r in &results {
        *histogram.entry(r.projection_cells).or_insert(0) += 1;
    }
    let fraction = |pred: fn(&Sample) -> bool| {
        results.iter().filter(|r| pred(r)).count() as f64 / opts.samples as f64
    };
    Ok(CensusReport {
        samples: opts.samples,
        support_class: match opts.support {
            SupportClass::Full => SupportDescriptor::Full {
                n: opts.n,
                degree: opts.degree,
            },
            SupportClass::Sparse => SupportDescriptor::Sparse {
                n: opts.n,
                degree: opts.degree,
                density: opts.density,
            },
        },
        trivial_split_fraction: fraction(|r| r.split_trivial),
        trivial_projection_fraction: fraction(|r| r.projection_trivial),
        block_size_histogram: histogram,
        seed: opts.seed,
    })
}
