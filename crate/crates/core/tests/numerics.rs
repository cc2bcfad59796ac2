use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sosblock::certify::{gram_to_sos, verify_certificate};
use sosblock::gram::{
    build_gram_problem, minimal_projection_partition, restrict_problem, GramProblem,
};
use sosblock::linalg::{min_eigenvalue, min_eigenvalue_bisection, project_psd};
use sosblock::oracle::{brute_force_sos, random_point, random_sos_on, restricted_sos, Decision};
use sosblock::solver::{
    solve_feasibility, GramMatrix, SolveOutcome, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use sosblock::support::{half_newton_support, lambda_set};
use sosblock::{BlockPartition, ExponentVector, Polynomial, SupportSet};

fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
    (&a + a.transpose()) * 0.5
}

#[test]
fn psd_projection_is_idempotent_and_nonexpansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(1..=7);
        let a = random_symmetric(&mut rng, n);
        let b = random_symmetric(&mut rng, n);
        let pa = project_psd(&a);
        let pb = project_psd(&b);
        assert!((&project_psd(&pa) - &pa).norm() <= 1e-10 * (1.0 + pa.norm()));
        assert!(min_eigenvalue(&pa) >= -1e-10);
        assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-10);
        // P(A) is at least as close to A as any other PSD matrix we have
        assert!((&a - &pa).norm() <= (&a - &pb).norm() + 1e-10);
    }
}

fn small_rational(rng: &mut impl Rng) -> BigRational {
    BigRational::new(
        BigInt::from(rng.gen_range(-6i64..=6)),
        BigInt::from(rng.gen_range(1i64..=3)),
    )
}

#[test]
fn gram_factorization_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let n = rng.gen_range(1..=2usize);
        let k = rng.gen_range(1..=2u32);
        let basis = lambda_set(n, k);
        let m = basis.len();
        let rank = rng.gen_range(1..=m);
        let rows: Vec<Vec<BigRational>> = (0..rank)
            .map(|_| (0..m).map(|_| small_rational(&mut rng)).collect())
            .collect();
        let squares: Vec<Polynomial> = rows
            .iter()
            .map(|r| Polynomial::from_terms(n, basis.iter().cloned().zip(r.iter().cloned())))
            .collect();
        let f = sosblock::expand_sum_of_squares(&squares).unwrap();
        if f.is_zero() {
            continue;
        }
        let prob = build_gram_problem(&f, &basis).unwrap();
        let l = DMatrix::from_fn(m, rank, |i, j| sosblock::poly::rational_to_f64(&rows[j][i]));
        let g = GramMatrix {
            basis: prob.basis().to_vec(),
            blocks: vec![(0..m).collect()],
            values: &l * l.transpose(),
        };
        let mut cert = gram_to_sos(&g, &prob).unwrap();
        assert!(cert.squares.len() <= m);
        let r = verify_certificate(&f, &mut cert);
        assert!(
            r <= 1e-6 * (1.0 + g.values.norm()),
            "trial {trial}: residual {r}"
        );
    }
}

#[test]
fn two_monomial_squares_keep_their_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut done = 0;
    while done < 20 {
        let n = rng.gen_range(1..=3usize);
        let a: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
        let b: Vec<u32> = a
            .iter()
            .map(|&x| (x as i32 + rng.gen_range(-1..=1)) as u32)
            .collect();
        if a == b {
            continue;
        }
        let (a, b) = (ExponentVector::new(a), ExponentVector::new(b));
        let q = &Polynomial::monomial(a.clone(), BigRational::one())
            + &Polynomial::monomial(b.clone(), BigRational::one());
        let f = q.square();
        let basis = half_newton_support(&f).unwrap();
        assert_eq!(basis, SupportSet::from_vectors(n, [a.clone(), b.clone()]));
        let prob = build_gram_problem(&f, &basis).unwrap();
        let SolveOutcome::Feasible(g) = solve_feasibility(&prob, DEFAULT_TOL, DEFAULT_MAX_ITER)
        else {
            panic!("{f} should be feasible");
        };
        let cert = gram_to_sos(&g, &prob).unwrap();
        assert!(cert.residual <= 1e-6);
        assert!(cert.squares.iter().all(|s| s.support().is_subset(&basis)));
        assert!(cert
            .squares
            .iter()
            .any(|s| s.coeff(&a).abs() > 1e-6 && s.coeff(&b).abs() > 1e-6));
        done += 1;
    }
}

/// Sparse random SOS, or (every third seed) one pushed negative at a point.
fn instance(seed: u64) -> Polynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=2usize);
    let k = rng.gen_range(1..=3u32);
    let pool = lambda_set(n, k).to_vec();
    let f = loop {
        let f = random_sos_on(&mut rng, n, &pool, 0.5);
        if !f.is_zero() {
            break f;
        }
    };
    if !seed.is_multiple_of(3) {
        return f;
    }
    let p = random_point(&mut rng, n);
    let shift = f.eval(&p) + BigRational::new(1.into(), 4.into());
    &f - &Polynomial::constant(n, shift)
}

fn problems(f: &Polynomial) -> (GramProblem, GramProblem) {
    let q = half_newton_support(f).unwrap();
    let full = build_gram_problem(f, &q).unwrap();
    let p = minimal_projection_partition(f, &q).unwrap();
    let reduced = restrict_problem(&full, &p).unwrap();
    (full, reduced)
}

#[test]
fn feasible_outcomes_reverify() {
    for seed in 0..30 {
        let f = instance(seed);
        let (full, reduced) = problems(&f);
        for prob in [&full, &reduced] {
            if let SolveOutcome::Feasible(g) =
                solve_feasibility(prob, DEFAULT_TOL, DEFAULT_MAX_ITER)
            {
                assert!(g.residual(prob) <= DEFAULT_TOL, "seed {seed}");
                for k in 0..g.blocks.len() {
                    let b = g.block(k);
                    let bisect = min_eigenvalue_bisection(&b);
                    assert!(
                        bisect >= -DEFAULT_TOL,
                        "seed {seed}: bisection λ_min {bisect}"
                    );
                    assert!((bisect - min_eigenvalue(&b)).abs() <= 1e-9 * (1.0 + b.norm()));
                }
            }
        }
    }
}

#[test]
fn full_and_restricted_problems_agree() {
    let mut resolved = 0;
    for seed in 0..30 {
        let f = instance(seed);
        let (full, reduced) = problems(&f);
        let a = solve_feasibility(&full, DEFAULT_TOL, DEFAULT_MAX_ITER).status();
        let b = solve_feasibility(&reduced, DEFAULT_TOL, DEFAULT_MAX_ITER).status();
        if let (Some(a), Some(b)) = (a, b) {
            assert_eq!(a, b, "seed {seed}: {f}");
            resolved += 1;
        }
    }
    assert!(resolved >= 25, "only {resolved} of 30 resolved");
}

#[test]
fn infeasible_outcomes_carry_valid_duals() {
    for seed in (0..30).filter(|s| s % 3 == 0) {
        let f = instance(seed);
        let (full, _) = problems(&f);
        match solve_feasibility(&full, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            SolveOutcome::Infeasible(d) => assert!(d.verify(&full).valid, "seed {seed}"),
            other => panic!("seed {seed}: {f} is negative somewhere, got {other:?}"),
        }
    }
}

#[test]
fn brute_force_matches_single_cell_restriction() {
    for seed in 100..150 {
        let f = instance(seed);
        let q = half_newton_support(&f).unwrap();
        let a = brute_force_sos(&f);
        let b = restricted_sos(&f, &BlockPartition::single_cell(q));
        if a != Decision::Undetermined && b != Decision::Undetermined {
            assert_eq!(a, b, "seed {seed}: {f}");
        }
        if seed % 3 != 0 {
            assert_ne!(a, Decision::NotSos, "seed {seed}: {f} is a sum of squares");
        }
    }
}
