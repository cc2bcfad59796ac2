//! Ground truth without preprocessing, random instance generators, and a
//! sampling search for polynomials that defeat a candidate block support.
//!
//! [`falsify_block_support`] is one-sided: block SOS supports quantify over
//! *every* SOS polynomial with a given support, so `NoCounterexample` is
//! evidence, never proof.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gram::{build_gram_problem, restrict_problem, GramError};
use crate::partition::BlockPartition;
use crate::poly::{ExponentVector, Polynomial, SupportSet};
use crate::solver::{solve_feasibility, SolveOutcome, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::support::{half_newton_support, lambda_set, SupportError};

/// Weight of the full-support perturbation `ε (Σ_{Λ(k)} x^γ)²`.
pub const FULL_SUPPORT_EPSILON: (i64, i64) = (1, 1024);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Sos,
    NotSos,
    Undetermined,
}

impl Decision {
    pub fn from_outcome(o: &SolveOutcome) -> Self {
        match o.status() {
            Some(true) => Decision::Sos,
            Some(false) => Decision::NotSos,
            None => Decision::Undetermined,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Decision::Sos => Some(true),
            Decision::NotSos => Some(false),
            Decision::Undetermined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no sample reached the target support in {0} attempts")]
    SupportUnreachable(usize),
}

/// The unreduced Gram SDP over the half-Newton support.
pub fn brute_force_sos(f: &Polynomial) -> Decision {
    brute_force_sos_with(f, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn brute_force_sos_with(f: &Polynomial, tol: f64, max_iter: usize) -> Decision {
    let q = match half_newton_support(f) {
        Ok(q) => q,
        Err(SupportError::ZeroPolynomial) => return Decision::Sos,
        Err(SupportError::OddVertex(_)) => return Decision::NotSos,
    };
    let prob = build_gram_problem(f, &q).expect("half-Newton support covers f");
    Decision::from_outcome(&solve_feasibility(&prob, tol, max_iter))
}

/// SOS with every square supported inside one cell of `p`.
pub fn restricted_sos(f: &Polynomial, p: &BlockPartition) -> Decision {
    restricted_sos_with(f, p, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn restricted_sos_with(
    f: &Polynomial,
    p: &BlockPartition,
    tol: f64,
    max_iter: usize,
) -> Decision {
    if f.is_zero() {
        return Decision::Sos;
    }
    let prob = match build_gram_problem(f, p.ground()) {
        Ok(prob) => prob,
        Err(GramError::SupportNotCovered(_) | GramError::DimensionMismatch { .. }) => {
            return Decision::NotSos
        }
        Err(e) => unreachable!("{e}"),
    };
    match restrict_problem(&prob, p) {
        Ok(r) => Decision::from_outcome(&solve_feasibility(&r, tol, max_iter)),
        Err(GramError::InvalidPartition(_)) => Decision::NotSos,
        Err(e) => unreachable!("{e}"),
    }
}

/// Uniform rational in `[-3, 3]` with denominator at most 8, nonzero.
pub fn random_coefficient(rng: &mut impl Rng) -> BigRational {
    loop {
        let den: i64 = rng.gen_range(1..=8);
        let num: i64 = rng.gen_range(-3 * den..=3 * den);
        if num != 0 {
            return BigRational::new(num.into(), den.into());
        }
    }
}

/// A nonempty subset of `pool`, each element kept with probability `density`.
pub fn random_subset(
    rng: &mut impl Rng,
    pool: &[ExponentVector],
    density: f64,
) -> Vec<ExponentVector> {
    assert!(!pool.is_empty(), "empty pool");
    loop {
        let s: Vec<ExponentVector> = pool
            .iter()
            .filter(|_| rng.gen_bool(density))
            .cloned()
            .collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// A square of a polynomial with random coefficients on `support`.
pub fn random_square(rng: &mut impl Rng, nvars: usize, support: &[ExponentVector]) -> Polynomial {
    Polynomial::from_terms(
        nvars,
        support.iter().map(|e| (e.clone(), random_coefficient(rng))),
    )
    .square()
}

/// 1–4 squares, each on a random subset of `pool` (inclusion probability
/// `density`; one half gives uniform subsets).
pub fn random_sos_on(
    rng: &mut impl Rng,
    nvars: usize,
    pool: &[ExponentVector],
    density: f64,
) -> Polynomial {
    let count = rng.gen_range(1..=4);
    let mut f = Polynomial::zero(nvars);
    for _ in 0..count {
        let s = random_subset(rng, pool, density);
        f = &f + &random_square(rng, nvars, &s);
    }
    f
}

/// Random SOS with squares over uniform subsets of `Λ(k)`.
pub fn random_sos(rng: &mut impl Rng, n: usize, k: u32) -> Polynomial {
    random_sos_on(rng, n, &lambda_set(n, k).to_vec(), 0.5)
}

/// Random SOS plus `ε (Σ_{Λ(k)} x^γ)²`, resampled until `S(f) = Λ(2k)`.
pub fn full_support_sos(rng: &mut impl Rng, n: usize, k: u32) -> Polynomial {
    let lam = lambda_set(n, k);
    let all = Polynomial::from_terms(n, lam.iter().map(|e| (e.clone(), BigRational::one())));
    let eps = BigRational::new(FULL_SUPPORT_EPSILON.0.into(), FULL_SUPPORT_EPSILON.1.into());
    let bump = all.square().scale(&eps);
    let target = lambda_set(n, 2 * k);
    loop {
        let f = &random_sos(rng, n, k) + &bump;
        if f.support() == target {
            return f;
        }
    }
}

/// Random SOS whose squares draw each monomial of `Λ(k)` with probability
/// `density`.
pub fn sparse_sos(rng: &mut impl Rng, n: usize, k: u32, density: f64) -> Polynomial {
    random_sos_on(rng, n, &lambda_set(n, k).to_vec(), density)
}

/// A random point with small rational coordinates, none zero.
pub fn random_point(rng: &mut impl Rng, n: usize) -> Vec<BigRational> {
    (0..n)
        .map(|_| loop {
            let den: i64 = rng.gen_range(1..=4);
            let num: i64 = rng.gen_range(-2 * den..=2 * den);
            if num != 0 {
                break BigRational::new(num.into(), den.into());
            }
        })
        .collect()
}

/// A split-structured instance: a sum of polynomials in disjoint groups of
/// variables, each without constant term (so the groups share no monomial).
/// With `sos = false` one group is pushed negative at a random point by
/// lowering the coefficient of an even monomial, so `f` is not SOS.
pub fn split_structured(rng: &mut impl Rng, n: usize, k: u32, sos: bool) -> Polynomial {
    assert!(n >= 2, "need at least two variables");
    let mut vars: Vec<usize> = (0..n).collect();
    vars.shuffle(rng);
    let ngroups = rng.gen_range(2..=n.min(3));
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts[..ngroups - 1].to_vec();
    cuts.sort_unstable();
    cuts.push(n);
    let mut groups = Vec::new();
    let mut start = 0;
    for c in cuts {
        groups.push(vars[start..c].to_vec());
        start = c;
    }
    let mut parts: Vec<Polynomial> = groups
        .iter()
        .map(|g| {
            let pool: Vec<ExponentVector> = lambda_set(g.len(), k)
                .iter()
                .filter(|e| e.degree() > 0)
                .map(|e| {
                    let mut coords = vec![0u32; n];
                    for (i, &v) in g.iter().enumerate() {
                        coords[v] = e.coords()[i];
                    }
                    ExponentVector::new(coords)
                })
                .collect();
            random_sos_on(rng, n, &pool, 0.5)
        })
        .collect();
    if !sos {
        let i = rng.gen_range(0..parts.len());
        let point = random_point(rng, n);
        let even: Vec<ExponentVector> = parts[i]
            .support()
            .iter()
            .filter(|e| e.is_even())
            .cloned()
            .collect();
        let m = even.choose(rng).expect("an SOS has even monomials").clone();
        let value = parts[i].eval(&point);
        let mono = Polynomial::monomial(m, BigRational::one());
        let shift = (value + BigRational::one()) / mono.eval(&point);
        parts[i] = &parts[i] - &mono.scale(&shift);
    }
    parts.iter().fold(Polynomial::zero(n), |acc, p| &acc + p)
}

/// A random support set of `size` distinct points in `[0, max_coord]^n`.
pub fn random_support_set(rng: &mut impl Rng, n: usize, max_coord: u32, size: usize) -> SupportSet {
    let capacity = (max_coord as usize + 1).pow(n as u32);
    let size = size.min(capacity);
    let mut s = SupportSet::new(n);
    while s.len() < size {
        s.insert(ExponentVector::new(
            (0..n).map(|_| rng.gen_range(0..=max_coord)).collect(),
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    CounterexampleFound {
        counterexample: String,
        trial: usize,
    },
    NoCounterexample {
        trials: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsificationReport {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub candidate: BlockPartition,
    pub target_support: SupportSet,
    pub seed: u64,
    pub trials: usize,
    /// Samples that reached the target support but whose restricted SDP
    /// did not resolve.
    pub undetermined: usize,
    #[serde(skip)]
    pub counterexample: Option<Polynomial>,
}

/// Samples SOS polynomials `f` with `S(f) = T` and tests whether each is a
/// sum of squares supported in single cells of `p`; trial `t` draws from
/// the generator seeded with `seed + t`.
///
/// Square supports are drawn from subsets `S` of the half of `T` with
/// `S + S ⊆ T`, so that most samples can hit `T` at all; half of the
/// trials use ±1 coefficients, which tend to land on the boundary of the
/// cone.
pub fn falsify_block_support(
    t: &SupportSet,
    p: &BlockPartition,
    trials: usize,
    seed: u64,
) -> Result<FalsificationReport, OracleError> {
    assert!(trials > 0, "trials must be positive");
    let nvars = t.nvars();
    let halves: Vec<ExponentVector> = t.iter().filter_map(ExponentVector::half).collect();
    let mut reached = 0;
    let mut undetermined = 0;
    let report = |verdict, undetermined, cx| FalsificationReport {
        verdict,
        candidate: p.clone(),
        target_support: t.clone(),
        seed,
        trials,
        undetermined,
        counterexample: cx,
    };
    if halves.is_empty() {
        return Err(OracleError::SupportUnreachable(10 * trials));
    }
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let unit = rng.gen_bool(0.5);
        let Some(f) = (0..10).find_map(|_| sample_with_support(&mut rng, nvars, &halves, t, unit))
        else {
            continue;
        };
        reached += 1;
        match restricted_sos(&f, p) {
            Decision::NotSos => {
                let verdict = Verdict::CounterexampleFound {
                    counterexample: f.to_string(),
                    trial,
                };
                return Ok(report(verdict, undetermined, Some(f)));
            }
            Decision::Undetermined => undetermined += 1,
            Decision::Sos => {}
        }
    }
    if reached == 0 {
        return Err(OracleError::SupportUnreachable(10 * trials));
    }
    Ok(report(
        Verdict::NoCounterexample { trials },
        undetermined,
        None,
    ))
}

fn sample_with_support(
    rng: &mut impl Rng,
    nvars: usize,
    halves: &[ExponentVector],
    t: &SupportSet,
    unit: bool,
) -> Option<Polynomial> {
    let count = rng.gen_range(1..=4);
    let mut f = Polynomial::zero(nvars);
    for _ in 0..count {
        let s = loop {
            let s = random_subset(rng, halves, 0.5);
            if s.iter().all(|a| s.iter().all(|b| t.contains(&(a + b)))) {
                break s;
            }
        };
        let q = Polynomial::from_terms(
            nvars,
            s.into_iter().map(|e| {
                let c = if unit {
                    BigRational::from_integer(BigInt::from(if rng.gen_bool(0.5) { 1 } else { -1 }))
                } else {
                    random_coefficient(rng)
                };
                (e, c)
            }),
        );
        f = &f + &q.square();
    }
    (f.support() == *t).then_some(f)
}

/// Exact zero test for `f - Σ q_i²`.
pub fn is_exact_sos_expansion(f: &Polynomial, squares: &[Polynomial]) -> bool {
    squares
        .iter()
        .fold(f.clone(), |acc, q| &acc - &q.square())
        .terms()
        .all(|(_, c)| c.is_zero())
}
