//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sosblock::gram::{build_gram_problem, minimal_projection_partition, restrict_problem};
use sosblock::oracle::{
    brute_force_sos, falsify_block_support, random_point, random_sos_on, random_support_set,
    restricted_sos, split_structured, Decision, Verdict,
};
use sosblock::solver::{solve_feasibility, SolveOutcome, DEFAULT_MAX_ITER, DEFAULT_TOL};
use sosblock::split::{extract_blocks, PsiCache};
use sosblock::support::{half_newton_support, hulls_equal, lambda_set, sigma};
use sosblock::{parse_polynomial, BlockPartition, ExponentVector, Polynomial, SupportSet};
use sosblock_cli::{
    cmd_analyze, cmd_census, cmd_decompose, CensusOptions, DecomposeOptions, Method, Status,
    SupportClass,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(
        took < limit,
        format!("{what} took {took:?}, limit {limit:?}"),
    )
}

fn univariate(points: &[u32]) -> SupportSet {
    SupportSet::from_vectors(1, points.iter().map(|&p| ExponentVector::new(vec![p])))
}

fn cells(ground: &[u32], parts: &[&[u32]]) -> BlockPartition {
    BlockPartition::from_cells(
        univariate(ground),
        parts.iter().map(|c| univariate(c)).collect(),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = cmd_analyze("x1^8 - 2*x1^4 + 1").map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(1), "analyze")?;
    let expected_cells = vec![univariate(&[0, 4]), univariate(&[1, 3]), univariate(&[2])];
    ensure(
        report.projection.cells == expected_cells,
        format!("cells {:?}", report.projection.cells),
    )?;
    ensure(
        report.projection.dropped.is_empty(),
        "nothing should be dropped",
    )?;
    let expected_mask: Vec<Vec<u8>> = vec![
        vec![1, 0, 0, 0, 1],
        vec![0, 1, 0, 1, 0],
        vec![0, 0, 1, 0, 0],
        vec![0, 1, 0, 1, 0],
        vec![1, 0, 0, 0, 1],
    ];
    ensure(
        report.projection_mask == expected_mask,
        format!("mask {:?}", report.projection_mask),
    )?;
    Ok(format!(
        "cells {{0,4}},{{1,3}},{{2}}; mask exact; {:?}",
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let opts = DecomposeOptions::default();
    let mut notes = Vec::new();
    for text in ["x1^8 - 2*x1^4 + 1", "x1^8 + x1^4 + 1"] {
        let start = Instant::now();
        let report = cmd_decompose(text, &opts).map_err(|e| e.to_string())?;
        within(start, Duration::from_secs(5), text)?;
        ensure(
            report.status == Status::Sos,
            format!("{text}: status {:?}", report.status),
        )?;
        let cert = report
            .certificate
            .as_ref()
            .ok_or(format!("{text}: no certificate"))?;
        ensure(
            cert.residual <= 1e-6,
            format!("{text}: residual {}", cert.residual),
        )?;
        notes.push(format!("{text}: residual {:.1e}", cert.residual));
        if text.contains('-') {
            // boundary case: a single square ±(x^4 − 1)
            ensure(
                cert.squares.len() == 1,
                format!("{} squares", cert.squares.len()),
            )?;
            let q = &cert.squares[0];
            let (c0, c4) = (
                q.coeff(&ExponentVector::new(vec![0])),
                q.coeff(&ExponentVector::new(vec![4])),
            );
            ensure(
                (c0.abs() - 1.0).abs() < 1e-4 && (c4.abs() - 1.0).abs() < 1e-4 && c0 * c4 < 0.0,
                format!("square {q}"),
            )?;
        }
    }
    let f = parse_polynomial("x1^8 - 2*x1^4 + 1").unwrap();
    let start = Instant::now();
    let d = restricted_sos(&f, &cells(&[0, 2, 4], &[&[0, 4], &[2]]));
    within(start, Duration::from_secs(5), "restricted_sos")?;
    ensure(d == Decision::Sos, format!("restricted_sos gave {d:?}"))?;
    notes.push("restricted on {0,4},{2}: sos".into());
    Ok(notes.join("; "))
}

fn criterion_3() -> Outcome {
    let t = univariate(&[0, 4, 8]);
    let bad =
        falsify_block_support(&t, &cells(&[0, 4], &[&[0, 4]]), 50, 7).map_err(|e| e.to_string())?;
    let Verdict::CounterexampleFound {
        counterexample,
        trial,
    } = &bad.verdict
    else {
        return Err(format!("single cell: {:?}", bad.verdict));
    };
    let good = falsify_block_support(&t, &cells(&[0, 2, 4], &[&[0, 4], &[2]]), 50, 7)
        .map_err(|e| e.to_string())?;
    ensure(
        good.verdict == Verdict::NoCounterexample { trials: 50 },
        format!("two cells: {:?}", good.verdict),
    )?;
    Ok(format!(
        "single cell broken by {counterexample} at trial {trial}; two cells hold for 50 trials"
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mut sos = 0;
    for i in 0..50 {
        let n = rng.gen_range(2..=4usize);
        let k = rng.gen_range(1..=2u32);
        let f = split_structured(&mut rng, n, k, i % 2 == 0);
        let q = half_newton_support(&f).map_err(|e| e.to_string())?;
        let p = sosblock::split::split_partition(&f, &q).map_err(|e| e.to_string())?;
        let whole = brute_force_sos(&f);
        let mut parts = Decision::Sos;
        for (pi, _) in extract_blocks(&f, &p).map_err(|e| e.to_string())? {
            match brute_force_sos(&pi) {
                Decision::Sos => {}
                Decision::NotSos => parts = Decision::NotSos,
                Decision::Undetermined => {
                    if parts == Decision::Sos {
                        parts = Decision::Undetermined
                    }
                }
            }
        }
        ensure(
            whole != Decision::Undetermined && parts != Decision::Undetermined,
            format!("instance {i} unresolved: {f}"),
        )?;
        ensure(
            whole == parts,
            format!("instance {i}: whole {whole:?}, blocks {parts:?}: {f}"),
        )?;
        sos += (whole == Decision::Sos) as usize;
    }
    within(start, Duration::from_secs(120), "50 instances")?;
    Ok(format!(
        "50/50 agree ({sos} sos, {} not); {:?}",
        50 - sos,
        start.elapsed()
    ))
}

fn random_instance(rng: &mut impl Rng, negative: bool) -> Polynomial {
    let n = rng.gen_range(1..=3usize);
    let k = rng.gen_range(1..=if n == 3 { 2 } else { 3 });
    let pool = lambda_set(n, k).to_vec();
    let f = loop {
        let f = random_sos_on(rng, n, &pool, 0.4);
        if !f.is_zero() {
            break f;
        }
    };
    if !negative {
        return f;
    }
    let p = random_point(rng, n);
    let shift = f.eval(&p) + BigRational::new(1.into(), 4.into());
    &f - &Polynomial::constant(n, shift)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut both = 0;
    let mut reduced_vars = 0;
    let mut full_vars = 0;
    for i in 0..30 {
        let f = random_instance(&mut rng, i % 3 == 0);
        let q = half_newton_support(&f).map_err(|e| e.to_string())?;
        let full = build_gram_problem(&f, &q).map_err(|e| e.to_string())?;
        let p = minimal_projection_partition(&f, &q).map_err(|e| e.to_string())?;
        let reduced = restrict_problem(&full, &p).map_err(|e| e.to_string())?;
        full_vars += full.num_variables();
        reduced_vars += reduced.num_variables();
        let a = solve_feasibility(&full, DEFAULT_TOL, DEFAULT_MAX_ITER).status();
        let b = solve_feasibility(&reduced, DEFAULT_TOL, DEFAULT_MAX_ITER).status();
        if let (Some(a), Some(b)) = (a, b) {
            ensure(
                a == b,
                format!("instance {i}: full {a}, restricted {b}: {f}"),
            )?;
            both += 1;
        }
    }
    Ok(format!("{both}/30 resolved on both sides, 0 disagreements; variables {full_vars} -> {reduced_vars}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for i in 0..200 {
        let n = rng.gen_range(1..=3usize);
        let size = rng.gen_range(1..=12usize);
        let q = random_support_set(&mut rng, n, 6, size);
        ensure(hulls_equal(&q, &sigma(&q)), format!("instance {i}: {q:?}"))?;
    }
    within(start, Duration::from_secs(30), "200 hull checks")?;
    Ok(format!("200/200; {:?}", start.elapsed()))
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    for (n, degree) in [(1, 4), (1, 6), (2, 4)] {
        let opts = CensusOptions {
            n,
            degree,
            samples: 100,
            support: SupportClass::Full,
            density: 0.3,
            seed: 7,
        };
        let r = cmd_census(&opts).map_err(|e| e.to_string())?;
        ensure(
            r.trivial_split_fraction == 1.0 && r.trivial_projection_fraction == 1.0,
            format!(
                "(n={n}, 2k={degree}): split {}, projection {}",
                r.trivial_split_fraction, r.trivial_projection_fraction
            ),
        )?;
        notes.push(format!("({n},{degree})"));
    }
    Ok(format!("{}: both fractions 1.0", notes.join(" ")))
}

fn criterion_8() -> Outcome {
    let opts = DecomposeOptions::default();
    let start = Instant::now();
    let r = cmd_decompose("x1^2 + 1", &opts).map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(5), "x^2+1")?;
    let residual = r.certificate.as_ref().map_or(f64::NAN, |c| c.residual);
    ensure(
        r.status == Status::Sos && residual <= 1e-8,
        format!("x^2+1: {:?}, residual {residual}", r.status),
    )?;

    let motzkin = "1 + x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2";
    let start = Instant::now();
    let r = cmd_decompose(
        motzkin,
        &DecomposeOptions {
            method: Method::None,
            ..opts
        },
    )
    .map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(5), "Motzkin")?;
    ensure(
        r.status == Status::NotSos && r.dual_certificate.is_some(),
        format!("Motzkin: {:?}", r.status),
    )?;
    // re-check the dual independently of the command
    let f = parse_polynomial(motzkin).unwrap();
    let q = half_newton_support(&f).map_err(|e| e.to_string())?;
    let prob = build_gram_problem(&f, &q).map_err(|e| e.to_string())?;
    ensure(prob.basis().len() <= 15, "Gram size above 15")?;
    let SolveOutcome::Infeasible(dual) = solve_feasibility(&prob, DEFAULT_TOL, DEFAULT_MAX_ITER)
    else {
        return Err("Motzkin not rejected by the solver".into());
    };
    let check = dual.verify(&prob);
    ensure(check.valid, format!("dual check {check:?}"))?;
    Ok(format!(
        "x^2+1 residual {residual:.1e}; Motzkin dual λ_max {:.2e}, objective {:.2e}",
        check.max_eigenvalue, check.objective
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for i in 0..200 {
        let n = rng.gen_range(1..=2usize);
        let size = rng.gen_range(1..=10usize);
        let q = random_support_set(&mut rng, n, 4, size);
        let corners = sigma(&q);
        let mut cache = PsiCache::new(q.clone());
        for g in q.iter() {
            let psi = cache.psi(&g.double()).map_err(|e| e.to_string())?;
            ensure(
                psi.is_subset(&corners),
                format!("instance {i}: psi({:?}) = {psi:?}", g.double()),
            )?;
            checked += 1;
        }
    }
    Ok(format!("200 sets, {checked} points, 0 failures"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("projection cells and mask of x^8-2x^4+1", criterion_1),
        ("decompose boundary and interior cases", criterion_2),
        ("block support falsification", criterion_3),
        ("split blocks decide SOS", criterion_4),
        ("full vs restricted SDP agreement", criterion_5),
        ("hull of Q equals hull of sigma(Q)", criterion_6),
        ("full support census is trivial", criterion_7),
        ("solver sanity", criterion_8),
        ("psi lands in sigma", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
