//! Support-set combinatorics over the exponent lattice: Λ(k), σ(Q), exact
//! convex-hull membership and the halved Newton polytope.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::poly::{ExponentVector, Polynomial, SupportSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SupportError {
    #[error("the zero polynomial has no Newton polytope")]
    ZeroPolynomial,
    #[error("not SOS: odd Newton vertex {0:?}")]
    OddVertex(ExponentVector),
}

/// Λ(k): all exponent vectors of length `n` with coordinate sum at most `k`.
pub fn lambda_set(n: usize, k: u32) -> SupportSet {
    fn rec(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut SupportSet) {
        if prefix.len() == n {
            out.insert(ExponentVector::new(prefix.clone()));
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(n, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = SupportSet::new(n);
    rec(n, k, &mut Vec::with_capacity(n), &mut out);
    out
}

/// σ(Q): the elements of `Q` that are not the midpoint of two other elements.
pub fn sigma(q: &SupportSet) -> SupportSet {
    let mut out = SupportSet::new(q.nvars());
    for a in q {
        let twice = a.double();
        let is_midpoint = q
            .iter()
            .filter(|b| *b != a)
            .any(|b| twice.checked_sub(b).is_some_and(|c| q.contains(&c)));
        if !is_midpoint {
            out.insert(a.clone());
        }
    }
    out
}

/// Generators of a convex hull in ℚⁿ.
#[derive(Debug, Clone)]
pub struct HullQuery {
    pub points: SupportSet,
}

impl HullQuery {
    pub fn new(points: SupportSet) -> Self {
        HullQuery { points }
    }

    pub fn dimension(&self) -> usize {
        self.points.nvars()
    }
}

pub fn to_rational_point(v: &ExponentVector) -> Vec<BigRational> {
    v.coords()
        .iter()
        .map(|&c| BigRational::from_integer(BigInt::from(c)))
        .collect()
}

/// Whether `point` lies in the convex hull of the query's points, decided
/// exactly as feasibility of `Σ λᵢ pᵢ = point, Σ λᵢ = 1, λ ≥ 0`.
pub fn hull_contains(q: &HullQuery, point: &[BigRational]) -> bool {
    assert_eq!(
        point.len(),
        q.dimension(),
        "point dimension differs from hull dimension"
    );
    if q.points.is_empty() {
        return false;
    }
    // Bounding box rejects most outside points without an LP.
    for (d, x) in point.iter().enumerate() {
        let lo = q
            .points
            .iter()
            .map(|p| p.coords()[d])
            .min()
            .expect("nonempty");
        let hi = q
            .points
            .iter()
            .map(|p| p.coords()[d])
            .max()
            .expect("nonempty");
        if *x < BigRational::from_integer(lo.into()) || *x > BigRational::from_integer(hi.into()) {
            return false;
        }
    }
    if q.points.iter().any(|p| to_rational_point(p) == point) {
        return true;
    }
    let n = q.dimension();
    let cols: Vec<Vec<BigRational>> = q.points.iter().map(to_rational_point).collect();
    let mut a = vec![Vec::with_capacity(cols.len()); n + 1];
    for col in &cols {
        for d in 0..n {
            a[d].push(col[d].clone());
        }
        a[n].push(BigRational::one());
    }
    let mut b = point.to_vec();
    b.push(BigRational::one());
    lp_feasible(a, b)
}

/// conv(A) = conv(B), checked by mutual membership of the generators.
pub fn hulls_equal(a: &SupportSet, b: &SupportSet) -> bool {
    assert_eq!(a.nvars(), b.nvars());
    if a.is_empty() || b.is_empty() {
        return a.is_empty() && b.is_empty();
    }
    let ha = HullQuery::new(a.clone());
    let hb = HullQuery::new(b.clone());
    a.iter().all(|p| hull_contains(&hb, &to_rational_point(p)))
        && b.iter().all(|p| hull_contains(&ha, &to_rational_point(p)))
}

/// The vertices of conv(S): points not in the hull of the others.
pub fn hull_vertices(s: &SupportSet) -> SupportSet {
    let mut out = SupportSet::new(s.nvars());
    for p in s {
        let mut rest = s.clone();
        rest.remove(p);
        if !hull_contains(&HullQuery::new(rest), &to_rational_point(p)) {
            out.insert(p.clone());
        }
    }
    out
}

/// All lattice points of ½·conv(S(f)), the standard Gram basis for `f`.
pub fn half_newton_support(f: &Polynomial) -> Result<SupportSet, SupportError> {
    if f.is_zero() {
        return Err(SupportError::ZeroPolynomial);
    }
    let vertices = hull_vertices(&f.support());
    if let Some(odd) = vertices.iter().find(|v| !v.is_even()) {
        return Err(SupportError::OddVertex(odd.clone()));
    }
    let n = f.nvars();
    let lo: Vec<u32> = (0..n)
        .map(|d| {
            vertices
                .iter()
                .map(|v| v.coords()[d])
                .min()
                .expect("nonempty")
                / 2
        })
        .collect();
    let hi: Vec<u32> = (0..n)
        .map(|d| {
            vertices
                .iter()
                .map(|v| v.coords()[d])
                .max()
                .expect("nonempty")
                / 2
        })
        .collect();
    let hull = HullQuery::new(vertices);
    let mut out = SupportSet::new(n);
    let mut cur = lo.clone();
    loop {
        let p = ExponentVector::new(cur.clone());
        if hull_contains(&hull, &to_rational_point(&p.double())) {
            out.insert(p);
        }
        // odometer over the box
        let mut d = 0;
        loop {
            if d == n {
                return Ok(out);
            }
            if cur[d] < hi[d] {
                cur[d] += 1;
                break;
            }
            cur[d] = lo[d];
            d += 1;
        }
    }
}

/// Phase-one simplex with Bland's rule: is `{λ ≥ 0 | Aλ = b}` nonempty?
fn lp_feasible(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> bool {
    let m = a.len();
    let k = a.first().map_or(0, Vec::len);
    for i in 0..m {
        if b[i].is_negative() {
            b[i] = -b[i].clone();
            for x in a[i].iter_mut() {
                *x = -x.clone();
            }
        }
    }
    let width = k + m;
    let mut t: Vec<Vec<BigRational>> = (0..m)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..m).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            row.push(b[i].clone());
            row
        })
        .collect();
    let mut basis: Vec<usize> = (k..k + m).collect();
    // phase-one reduced costs; last entry is minus the artificial sum
    let mut cost: Vec<BigRational> = vec![BigRational::zero(); width + 1];
    for j in (0..k).chain(std::iter::once(width)) {
        cost[j] = -t
            .iter()
            .map(|row| row[j].clone())
            .fold(BigRational::zero(), |s, x| s + x);
    }
    loop {
        let Some(enter) = (0..width).find(|&j| cost[j].is_negative() && !basis.contains(&j)) else {
            return cost[width].is_zero();
        };
        let mut leave: Option<(usize, BigRational)> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            // phase one is bounded below by zero
            unreachable!("unbounded phase-one LP");
        };
        let pivot = t[r][enter].clone();
        for x in t[r].iter_mut() {
            *x /= &pivot;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && !row[enter].is_zero() {
                let factor = row[enter].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= &factor * p;
                }
            }
        }
        if !cost[enter].is_zero() {
            let factor = cost[enter].clone();
            for (x, p) in cost.iter_mut().zip(&pivot_row) {
                *x -= &factor * p;
            }
        }
        basis[r] = enter;
    }
}
