//! Exact multivariate polynomials over the rationals.
//!
//! Terms are keyed by [`ExponentVector`] and kept in graded-lexicographic
//! order. Nothing here touches floating point; the conversion to `f64`
//! happens at the Gram/SDP boundary.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("dimension mismatch: expected {expected} variables, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A point of ℕⁿ, used both as a monomial exponent and as a lattice point.
///
/// Ordered graded-lexicographically: total degree first, then the
/// coordinates lexicographically with `x1` most significant.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExponentVector {
    coords: Vec<u32>,
    degree: u32,
}

impl ExponentVector {
    pub fn new(coords: Vec<u32>) -> Self {
        let degree = coords.iter().sum();
        ExponentVector { coords, degree }
    }

    pub fn zero(nvars: usize) -> Self {
        ExponentVector::new(vec![0; nvars])
    }

    /// The unit vector `e_i` (0-based index).
    pub fn unit(nvars: usize, i: usize) -> Self {
        let mut coords = vec![0; nvars];
        coords[i] = 1;
        ExponentVector::new(coords)
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn nvars(&self) -> usize {
        self.coords.len()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Halves every coordinate, or returns `None` if some coordinate is odd.
    pub fn half(&self) -> Option<ExponentVector> {
        if self.coords.iter().any(|c| c % 2 != 0) {
            return None;
        }
        Some(ExponentVector::new(
            self.coords.iter().map(|c| c / 2).collect(),
        ))
    }

    pub fn double(&self) -> ExponentVector {
        ExponentVector::new(self.coords.iter().map(|c| 2 * c).collect())
    }

    /// Componentwise difference, `None` if it would leave ℕⁿ.
    pub fn checked_sub(&self, other: &ExponentVector) -> Option<ExponentVector> {
        debug_assert_eq!(self.nvars(), other.nvars());
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()?;
        Some(ExponentVector::new(coords))
    }

    pub fn is_even(&self) -> bool {
        self.coords.iter().all(|c| c % 2 == 0)
    }
}

impl Add for &ExponentVector {
    type Output = ExponentVector;

    fn add(self, rhs: &ExponentVector) -> ExponentVector {
        debug_assert_eq!(self.nvars(), rhs.nvars());
        ExponentVector::new(
            self.coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for ExponentVector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| self.coords.cmp(&other.coords))
    }
}

impl PartialOrd for ExponentVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for ExponentVector {
    fn from(coords: Vec<u32>) -> Self {
        ExponentVector::new(coords)
    }
}

impl<const N: usize> From<[u32; N]> for ExponentVector {
    fn from(coords: [u32; N]) -> Self {
        ExponentVector::new(coords.to_vec())
    }
}

impl Serialize for ExponentVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.coords.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExponentVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Vec::<u32>::deserialize(deserializer).map(ExponentVector::new)
    }
}

/// Writes `x1^a*x2^b...`; the empty monomial writes nothing.
pub(crate) fn write_monomial(f: &mut impl fmt::Write, ev: &ExponentVector) -> fmt::Result {
    let mut first = true;
    for (i, &c) in ev.coords().iter().enumerate() {
        if c == 0 {
            continue;
        }
        if !first {
            write!(f, "*")?;
        }
        first = false;
        write!(f, "x{}", i + 1)?;
        if c > 1 {
            write!(f, "^{c}")?;
        }
    }
    Ok(())
}

/// A finite set of exponent vectors of a common length.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    nvars: usize,
    elements: BTreeSet<ExponentVector>,
}

impl Serialize for SupportSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.elements.iter())
    }
}

impl SupportSet {
    pub fn new(nvars: usize) -> Self {
        SupportSet {
            nvars,
            elements: BTreeSet::new(),
        }
    }

    /// Panics if the vectors disagree on length.
    pub fn from_vectors(nvars: usize, vectors: impl IntoIterator<Item = ExponentVector>) -> Self {
        let mut s = SupportSet::new(nvars);
        for v in vectors {
            s.insert(v);
        }
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn insert(&mut self, v: ExponentVector) -> bool {
        assert_eq!(
            v.nvars(),
            self.nvars,
            "exponent vector length differs from support nvars"
        );
        self.elements.insert(v)
    }

    pub fn remove(&mut self, v: &ExponentVector) -> bool {
        self.elements.remove(v)
    }

    pub fn contains(&self, v: &ExponentVector) -> bool {
        self.elements.contains(v)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Elements in ascending graded-lex order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &ExponentVector> + ExactSizeIterator {
        self.elements.iter()
    }

    pub fn to_vec(&self) -> Vec<ExponentVector> {
        self.elements.iter().cloned().collect()
    }

    pub fn first(&self) -> Option<&ExponentVector> {
        self.elements.first()
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.elements.is_subset(&other.elements)
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let mut out = self.clone();
        for v in other.iter() {
            out.insert(v.clone());
        }
        out
    }

    /// The Minkowski sum `A + B`.
    pub fn minkowski_sum(&self, other: &SupportSet) -> SupportSet {
        let mut out = SupportSet::new(self.nvars);
        for a in self.iter() {
            for b in other.iter() {
                out.insert(a + b);
            }
        }
        out
    }

    /// Largest total degree, or `None` when empty.
    pub fn max_degree(&self) -> Option<u32> {
        self.elements.iter().map(|e| e.degree()).max()
    }
}

impl fmt::Debug for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.elements.iter()).finish()
    }
}

impl<'a> IntoIterator for &'a SupportSet {
    type Item = &'a ExponentVector;
    type IntoIter = std::collections::btree_set::Iter<'a, ExponentVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.iter()
    }
}

/// Multivariate polynomial with exact rational coefficients.
///
/// No stored coefficient is zero, so the zero polynomial has no terms.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<ExponentVector, BigRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        Polynomial::monomial(ExponentVector::zero(nvars), c)
    }

    pub fn monomial(ev: ExponentVector, c: BigRational) -> Self {
        let mut p = Polynomial::zero(ev.nvars());
        p.add_term(ev, c);
        p
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs; repeated
    /// exponents are summed.
    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (ExponentVector, BigRational)>,
    ) -> Self {
        let mut p = Polynomial::zero(nvars);
        for (ev, c) in terms {
            p.add_term(ev, c);
        }
        p
    }

    /// Convenience constructor with integer coefficients.
    pub fn from_int_terms(nvars: usize, terms: &[(&[u32], i64)]) -> Self {
        Polynomial::from_terms(
            nvars,
            terms.iter().map(|(e, c)| {
                (
                    ExponentVector::new(e.to_vec()),
                    BigRational::from_integer(BigInt::from(*c)),
                )
            }),
        )
    }

    pub fn add_term(&mut self, ev: ExponentVector, c: BigRational) {
        assert_eq!(ev.nvars(), self.nvars, "term has wrong number of variables");
        if c.is_zero() {
            return;
        }
        match self.terms.entry(ev) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `-1` for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.terms
            .keys()
            .map(|e| e.degree() as i64)
            .max()
            .unwrap_or(-1)
    }

    pub fn coeff(&self, ev: &ExponentVector) -> BigRational {
        self.terms
            .get(ev)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&ExponentVector, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// The support S(f): exponents with nonzero coefficient.
    pub fn support(&self) -> SupportSet {
        SupportSet::from_vectors(self.nvars, self.terms.keys().cloned())
    }

    pub fn scale(&self, s: &BigRational) -> Polynomial {
        if s.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
    }

    pub fn square(&self) -> Polynomial {
        self * self
    }

    /// Keeps only the terms whose exponent satisfies `keep`.
    pub fn filter_terms(&self, mut keep: impl FnMut(&ExponentVector) -> bool) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| keep(e))
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn eval(&self, point: &[BigRational]) -> BigRational {
        assert_eq!(point.len(), self.nvars);
        let mut acc = BigRational::zero();
        for (ev, c) in &self.terms {
            let mut t = c.clone();
            for (x, &k) in point.iter().zip(ev.coords()) {
                for _ in 0..k {
                    t *= x;
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars);
        self.terms
            .iter()
            .map(|(ev, c)| {
                let m: f64 = point
                    .iter()
                    .zip(ev.coords())
                    .map(|(x, &k)| x.powi(k as i32))
                    .product();
                rational_to_f64(c) * m
            })
            .sum()
    }

    /// Same polynomial regarded in more variables (new variables unused).
    pub fn with_nvars(&self, nvars: usize) -> Result<Polynomial, PolyError> {
        if nvars < self.nvars
            && self
                .terms
                .keys()
                .any(|e| e.coords()[nvars..].iter().any(|&c| c > 0))
        {
            return Err(PolyError::DimensionMismatch {
                expected: nvars,
                found: self.nvars,
            });
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut coords = e.coords().to_vec();
                coords.resize(nvars, 0);
                (ExponentVector::new(coords), c.clone())
            })
            .collect();
        Ok(Polynomial { nvars, terms })
    }

    fn check_same_nvars(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(
            self.nvars, rhs.nvars,
            "adding polynomials in different numbers of variables"
        );
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(
            self.nvars, rhs.nvars,
            "multiplying polynomials in different numbers of variables"
        );
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                out.add_term(ea + eb, ca * cb);
            }
        }
        out
    }
}

/// Σ qᵢ² in exact arithmetic. The empty sum is the zero polynomial in one
/// variable.
pub fn expand_sum_of_squares(qs: &[Polynomial]) -> Result<Polynomial, PolyError> {
    let Some(first) = qs.first() else {
        return Ok(Polynomial::zero(1));
    };
    let mut acc = Polynomial::zero(first.nvars);
    for q in qs {
        first.check_same_nvars(q)?;
        acc = &acc + &q.square();
    }
    Ok(acc)
}

/// Prints terms in descending graded-lex order, e.g. `x1^8 - 2*x1^4 + 1`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (ev, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = c.abs();
            if ev.degree() == 0 {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}*")?;
                }
                write_monomial(f, ev)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial[{}]({})", self.nvars, self)
    }
}

impl std::str::FromStr for Polynomial {
    type Err = PolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_polynomial(s)
    }
}

/// Parses `term (('+'|'-') term)*` where a term is an optional rational
/// coefficient followed by `x<i>[^k]` factors joined by `*`.
///
/// The number of variables is the largest index mentioned (at least one).
pub fn parse_polynomial(text: &str) -> Result<Polynomial, PolyError> {
    let terms = Parser::new(text).parse()?;
    let nvars = terms
        .iter()
        .flat_map(|(vars, _)| vars.keys().copied())
        .max()
        .unwrap_or(1)
        .max(1);
    Ok(assemble(nvars, terms))
}

/// Like [`parse_polynomial`] but in a fixed number of variables.
pub fn parse_polynomial_in(text: &str, nvars: usize) -> Result<Polynomial, PolyError> {
    let terms = Parser::new(text).parse()?;
    if let Some(found) = terms
        .iter()
        .flat_map(|(vars, _)| vars.keys().copied())
        .max()
    {
        if found > nvars {
            return Err(PolyError::DimensionMismatch {
                expected: nvars,
                found,
            });
        }
    }
    Ok(assemble(nvars.max(1), terms))
}

type RawTerm = (BTreeMap<usize, u32>, BigRational);

fn assemble(nvars: usize, terms: Vec<RawTerm>) -> Polynomial {
    Polynomial::from_terms(
        nvars,
        terms.into_iter().map(|(vars, c)| {
            let mut coords = vec![0u32; nvars];
            for (v, k) in vars {
                coords[v - 1] += k;
            }
            (ExponentVector::new(coords), c)
        }),
    )
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, PolyError> {
        Err(PolyError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn uint(&mut self) -> Result<BigInt, PolyError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected digits");
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(digits.parse::<BigInt>().expect("digit string parses"))
    }

    fn small_uint(&mut self, what: &str) -> Result<u64, PolyError> {
        let start = self.pos;
        let n = self.uint()?;
        n.to_u64().ok_or(PolyError::Syntax {
            pos: start,
            msg: format!("{what} too large"),
        })
    }

    fn parse(mut self) -> Result<Vec<RawTerm>, PolyError> {
        let mut terms = Vec::new();
        let mut negative = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        loop {
            let (vars, mut c) = self.term()?;
            if negative {
                c = -c;
            }
            terms.push((vars, c));
            match self.peek() {
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    negative = false;
                }
                Some(b'-') => {
                    self.pos += 1;
                    negative = true;
                }
                Some(other) => {
                    return self.err(format!("unexpected character '{}'", other as char))
                }
            }
        }
        Ok(terms)
    }

    fn term(&mut self) -> Result<RawTerm, PolyError> {
        let mut coeff = BigRational::one();
        let mut vars = BTreeMap::new();
        let mut saw_any = false;
        if matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            let num = self.uint()?;
            let den = if self.eat(b'/') {
                self.uint()?
            } else {
                BigInt::one()
            };
            if den.is_zero() {
                return self.err("zero denominator");
            }
            coeff = BigRational::new(num, den);
            saw_any = true;
            if !self.eat(b'*') {
                return Ok((vars, coeff));
            }
        }
        loop {
            match self.peek() {
                Some(b'x') => {
                    self.pos += 1;
                    let idx_pos = self.pos;
                    let idx = self.small_uint("variable index")? as usize;
                    if idx == 0 {
                        return Err(PolyError::Syntax {
                            pos: idx_pos,
                            msg: "variables are numbered from x1".into(),
                        });
                    }
                    let k = if self.eat(b'^') {
                        self.small_uint("exponent")? as u32
                    } else {
                        1
                    };
                    *vars.entry(idx).or_insert(0) += k;
                    saw_any = true;
                }
                _ if !saw_any => return self.err("expected a coefficient or a variable"),
                _ => return self.err("expected a variable after '*'"),
            }
            if !self.eat(b'*') {
                break;
            }
        }
        Ok((vars, coeff))
    }
}
