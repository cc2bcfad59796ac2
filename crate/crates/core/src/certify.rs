//! From Gram matrices to explicit sums of squares, and back.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::gram::GramProblem;
use crate::linalg::sym_eigen;
use crate::poly::{rational_to_f64, write_monomial, ExponentVector, Polynomial, SupportSet};
use crate::solver::{GramMatrix, DEFAULT_TOL};

/// Squares whose coefficient vector is shorter than this are noise.
pub const SQUARE_DROP_NORM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("Gram matrix is not PSD (minimum eigenvalue {0:e})")]
    NotPsd(f64),
}

/// A polynomial with floating-point coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    nvars: usize,
    terms: BTreeMap<ExponentVector, f64>,
}

impl RealPolynomial {
    pub fn new(nvars: usize, terms: impl IntoIterator<Item = (ExponentVector, f64)>) -> Self {
        let mut p = RealPolynomial {
            nvars,
            terms: BTreeMap::new(),
        };
        for (ev, c) in terms {
            assert_eq!(ev.nvars(), nvars, "exponent length");
            if c != 0.0 {
                *p.terms.entry(ev).or_insert(0.0) += c;
            }
        }
        p
    }

    pub fn from_exact(f: &Polynomial) -> Self {
        RealPolynomial::new(
            f.nvars(),
            f.terms().map(|(e, c)| (e.clone(), rational_to_f64(c))),
        )
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExponentVector, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn coeff(&self, ev: &ExponentVector) -> f64 {
        self.terms.get(ev).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> SupportSet {
        SupportSet::from_vectors(self.nvars, self.terms.keys().cloned())
    }

    pub fn coefficient_norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn add_square_into(&self, acc: &mut BTreeMap<ExponentVector, f64>) {
        let t: Vec<_> = self.terms.iter().collect();
        for (i, (a, ca)) in t.iter().enumerate() {
            *acc.entry(*a + *a).or_insert(0.0) += *ca * *ca;
            for (b, cb) in &t[i + 1..] {
                *acc.entry(*a + *b).or_insert(0.0) += 2.0 * *ca * *cb;
            }
        }
    }
}

impl fmt::Display for RealPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (ev, &c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            }
            if ev.degree() == 0 {
                write_magnitude(f, mag)?;
            } else {
                if mag != 1.0 {
                    write_magnitude(f, mag)?;
                    write!(f, "*")?;
                }
                write_monomial(f, ev)?;
            }
        }
        Ok(())
    }
}

fn write_magnitude(f: &mut fmt::Formatter<'_>, mag: f64) -> fmt::Result {
    if (1e-4..1e6).contains(&mag) {
        write!(f, "{mag}")
    } else {
        write!(f, "{mag:e}")
    }
}

/// `f ≈ Σ q_i²`, with the recorded residual `max_α |f_α − (Σ q_i²)_α|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub squares: Vec<RealPolynomial>,
    pub residual: f64,
    /// Cells that produced the squares, for block decompositions.
    pub blocks: Option<Vec<SupportSet>>,
}

impl Certificate {
    pub fn empty() -> Self {
        Certificate {
            squares: vec![],
            residual: 0.0,
            blocks: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("certificate serializes")
    }
}

impl Serialize for Certificate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Certificate", 3)?;
        let squares: Vec<String> = self.squares.iter().map(ToString::to_string).collect();
        st.serialize_field("squares", &squares)?;
        st.serialize_field("residual", &self.residual)?;
        st.serialize_field("blocks", &self.blocks)?;
        st.end()
    }
}

pub fn gram_to_sos(g: &GramMatrix, prob: &GramProblem) -> Result<Certificate, CertifyError> {
    gram_to_sos_with_tol(g, prob, DEFAULT_TOL)
}

/// Factors each block as `Σ λ_k v_k v_kᵀ` (negative eigenvalues clamped)
/// and reads off `q_k = √λ_k ⟨basis, v_k⟩`.
pub fn gram_to_sos_with_tol(
    g: &GramMatrix,
    prob: &GramProblem,
    tol: f64,
) -> Result<Certificate, CertifyError> {
    let nvars = prob.nvars().max(1);
    let mut squares = Vec::new();
    let mut min_eig = f64::INFINITY;
    for (k, block) in g.blocks.iter().enumerate() {
        let (vals, vecs) = sym_eigen(&g.block(k));
        if let Some(&lo) = vals.iter().next() {
            min_eig = min_eig.min(lo);
        }
        for (e, &lam) in vals.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            let s = lam.sqrt();
            let q = RealPolynomial::new(
                nvars,
                block
                    .iter()
                    .enumerate()
                    .map(|(r, &gi)| (g.basis[gi].clone(), s * vecs[(r, e)])),
            );
            if q.coefficient_norm() >= SQUARE_DROP_NORM {
                squares.push(q);
            }
        }
    }
    if min_eig < -tol {
        return Err(CertifyError::NotPsd(min_eig));
    }
    let full = g.blocks.len() == 1 && g.blocks[0].len() == g.basis.len();
    let blocks = (!full).then(|| {
        g.blocks
            .iter()
            .map(|b| SupportSet::from_vectors(nvars, b.iter().map(|&i| g.basis[i].clone())))
            .collect()
    });
    let mut cert = Certificate {
        squares,
        residual: f64::NAN,
        blocks,
    };
    verify_certificate(&prob.target_polynomial(), &mut cert);
    Ok(cert)
}

/// Recomputes and stores `max_α |f_α − (Σ q_i²)_α|`.
pub fn verify_certificate(f: &Polynomial, c: &mut Certificate) -> f64 {
    let mut acc: BTreeMap<ExponentVector, f64> = BTreeMap::new();
    for q in &c.squares {
        q.add_square_into(&mut acc);
    }
    for (ev, coef) in f.terms() {
        *acc.entry(ev.clone()).or_insert(0.0) -= rational_to_f64(coef);
    }
    c.residual = acc.values().map(|v| v.abs()).fold(0.0, f64::max);
    c.residual
}

/// Concatenates the certificates of the blocks of one split of `f` and
/// re-verifies the result against `f`.
pub fn combine_block_certificates(f: &Polynomial, parts: Vec<Certificate>) -> Certificate {
    let mut squares = Vec::new();
    let mut blocks = Some(Vec::new());
    for part in parts {
        squares.extend(part.squares);
        match (&mut blocks, part.blocks) {
            (Some(all), Some(bs)) => all.extend(bs),
            _ => blocks = None,
        }
    }
    let mut cert = Certificate {
        squares,
        residual: f64::NAN,
        blocks: blocks.filter(|b| !b.is_empty()),
    };
    verify_certificate(f, &mut cert);
    cert
}
