//! The Gram-matrix SDP of a polynomial and its coordinate-projection
//! reductions.
//!
//! For a polynomial `f` and Gram support `Q` (basis `b_0 < b_1 < ...`),
//! `f` is a sum of squares of polynomials supported on `Q` iff some PSD
//! matrix `X` satisfies, for every `α ∈ Q + Q`,
//!
//! ```text
//! Σ_{i ≤ j, b_i + b_j = α} w_ij X_ij = c_α,     w_ii = 1, w_ij = 2 (i ≠ j)
//! ```
//!
//! where `c_α` is the coefficient of `x^α` in `f`. Every entry `(i, j)` occurs
//! in exactly one constraint.
//!
//! A 0/1 mask that zeroes the entries between cells (and the rows of dropped
//! monomials) turns this into a block-diagonal problem; see
//! [`minimal_projection_partition`] and [`restrict_problem`].

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::BlockPartition;
use crate::poly::{ExponentVector, Polynomial, SupportSet};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GramError {
    #[error("monomial {0:?} of f is not a sum of two Gram basis elements")]
    SupportNotCovered(ExponentVector),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mask is not a sum of orthogonal 0/1 outer products (row {row})")]
    NotBlockStructured { row: usize },
    #[error("restriction removes every entry of constraint {0:?}, whose target is nonzero")]
    InvalidPartition(ExponentVector),
    #[error("partition ground support does not match the problem basis")]
    GroundMismatch,
    #[error("malformed problem: {0}")]
    Malformed(String),
}

/// One linear constraint `Σ w_ij X_ij = target` of the Gram SDP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub alpha: ExponentVector,
    pub target: BigRational,
    /// Index pairs `(i, j)`, `i ≤ j`, with `basis[i] + basis[j] = alpha`.
    pub pairs: Vec<(usize, usize)>,
}

/// The SDP "find PSD `X` with the Gram constraints of `f` over `basis`",
/// together with its variable pattern: `X` is block diagonal over `blocks`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GramProblem {
    basis: Vec<ExponentVector>,
    constraints: Vec<Constraint>,
    blocks: Vec<Vec<usize>>,
}

impl GramProblem {
    pub fn basis(&self) -> &[ExponentVector] {
        &self.basis
    }

    /// Constraints sorted by `alpha`.
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn constraint(&self, alpha: &ExponentVector) -> Option<&Constraint> {
        self.constraints
            .binary_search_by(|c| c.alpha.cmp(alpha))
            .ok()
            .map(|i| &self.constraints[i])
    }

    pub fn nvars(&self) -> usize {
        self.basis.first().map_or(0, ExponentVector::nvars)
    }

    /// Number of free scalar entries of the symmetric block pattern.
    pub fn num_variables(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.len() * (b.len() + 1) / 2)
            .sum()
    }

    pub fn basis_set(&self) -> SupportSet {
        SupportSet::from_vectors(self.nvars(), self.basis.iter().cloned())
    }

    /// `Σ c_α x^α` over the constraints: the polynomial being decomposed.
    pub fn target_polynomial(&self) -> Polynomial {
        let nvars = self.nvars().max(1);
        Polynomial::from_terms(
            nvars,
            self.constraints
                .iter()
                .filter(|c| c.alpha.nvars() == nvars)
                .map(|c| (c.alpha.clone(), c.target.clone())),
        )
    }

    fn block_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.basis.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            for &i in b {
                out[i] = Some(bi);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GramProblemJson::from(self)).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<GramProblem, GramError> {
        let raw: GramProblemJson =
            serde_json::from_str(text).map_err(|e| GramError::Malformed(e.to_string()))?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct ConstraintJson {
    alpha: ExponentVector,
    target: String,
    pairs: Vec<[usize; 2]>,
}

/// `{basis, constraints: [{alpha, target: "p/q", pairs}]}`; `blocks` is
/// written only for restricted patterns.
#[derive(Serialize, Deserialize)]
struct GramProblemJson {
    basis: Vec<ExponentVector>,
    constraints: Vec<ConstraintJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<Vec<usize>>>,
}

impl From<&GramProblem> for GramProblemJson {
    fn from(p: &GramProblem) -> Self {
        let full = p.blocks.len() == 1 && p.blocks[0].len() == p.basis.len();
        GramProblemJson {
            basis: p.basis.clone(),
            constraints: p
                .constraints
                .iter()
                .map(|c| ConstraintJson {
                    alpha: c.alpha.clone(),
                    target: c.target.to_string(),
                    pairs: c.pairs.iter().map(|&(i, j)| [i, j]).collect(),
                })
                .collect(),
            blocks: (!full).then(|| p.blocks.clone()),
        }
    }
}

impl TryFrom<GramProblemJson> for GramProblem {
    type Error = GramError;

    fn try_from(raw: GramProblemJson) -> Result<Self, GramError> {
        let m = raw.basis.len();
        let mut constraints = Vec::with_capacity(raw.constraints.len());
        for c in raw.constraints {
            let target: BigRational = c
                .target
                .parse()
                .map_err(|_| GramError::Malformed(format!("bad rational '{}'", c.target)))?;
            let mut pairs = Vec::with_capacity(c.pairs.len());
            for [i, j] in c.pairs {
                if i > j || j >= m || &raw.basis[i] + &raw.basis[j] != c.alpha {
                    return Err(GramError::Malformed(format!(
                        "pair ({i},{j}) does not sum to {:?}",
                        c.alpha
                    )));
                }
                pairs.push((i, j));
            }
            constraints.push(Constraint {
                alpha: c.alpha,
                target,
                pairs,
            });
        }
        constraints.sort_by(|a, b| a.alpha.cmp(&b.alpha));
        let blocks = raw.blocks.unwrap_or_else(|| vec![(0..m).collect()]);
        Ok(GramProblem {
            basis: raw.basis,
            constraints,
            blocks,
        })
    }
}

/// The Gram SDP of `f` over the support `q`, one constraint per `α ∈ Q + Q`.
pub fn build_gram_problem(f: &Polynomial, q: &SupportSet) -> Result<GramProblem, GramError> {
    if f.nvars() != q.nvars() {
        return Err(GramError::DimensionMismatch {
            expected: q.nvars(),
            found: f.nvars(),
        });
    }
    let basis = q.to_vec();
    let mut by_alpha: BTreeMap<ExponentVector, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..basis.len() {
        for j in i..basis.len() {
            by_alpha
                .entry(&basis[i] + &basis[j])
                .or_default()
                .push((i, j));
        }
    }
    if let Some((alpha, _)) = f.terms().find(|(a, _)| !by_alpha.contains_key(*a)) {
        return Err(GramError::SupportNotCovered(alpha.clone()));
    }
    let constraints = by_alpha
        .into_iter()
        .map(|(alpha, pairs)| Constraint {
            target: f.coeff(&alpha),
            alpha,
            pairs,
        })
        .collect();
    let blocks = if basis.is_empty() {
        vec![]
    } else {
        vec![(0..basis.len()).collect()]
    };
    Ok(GramProblem {
        basis,
        constraints,
        blocks,
    })
}

/// A symmetric 0/1 matrix used as an entrywise mask on the Gram matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionMask {
    size: usize,
    entries: Vec<bool>,
}

impl ProjectionMask {
    /// Errors unless `rows` is square, symmetric and 0/1.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, GramError> {
        let size = rows.len();
        let mut entries = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(GramError::DimensionMismatch {
                    expected: size,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 || v != rows[j][i] {
                    return Err(GramError::Malformed(format!(
                        "mask entry ({i},{j}) is not symmetric 0/1"
                    )));
                }
                entries.push(v == 1);
            }
        }
        Ok(ProjectionMask { size, entries })
    }

    pub fn zeros(size: usize) -> Self {
        ProjectionMask {
            size,
            entries: vec![false; size * size],
        }
    }

    pub fn ones(size: usize) -> Self {
        ProjectionMask {
            size,
            entries: vec![true; size * size],
        }
    }

    /// `Σ_k S_k S_kᵀ` for the indicator vectors of `blocks`.
    pub fn from_blocks(size: usize, blocks: &[Vec<usize>]) -> Self {
        let mut m = ProjectionMask::zeros(size);
        for b in blocks {
            for &i in b {
                for &j in b {
                    m.entries[i * size + j] = true;
                }
            }
        }
        m
    }

    /// The mask induced by a partition of `basis` (cells become blocks).
    pub fn from_partition(basis: &[ExponentVector], p: &BlockPartition) -> Result<Self, GramError> {
        let index: BTreeMap<&ExponentVector, usize> =
            basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
        let mut blocks = Vec::with_capacity(p.num_cells());
        for cell in p.cells() {
            let b = cell
                .iter()
                .map(|v| index.get(v).copied().ok_or(GramError::GroundMismatch))
                .collect::<Result<Vec<_>, _>>()?;
            blocks.push(b);
        }
        Ok(ProjectionMask::from_blocks(basis.len(), &blocks))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.size + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }
}

/// Decomposes a 0/1 mask as `Σ S_k S_kᵀ` with orthogonal 0/1 vectors `S_k`
/// and returns their supports; such a decomposition exists iff the mask is
/// PSD. Indices with a zero diagonal belong to no block.
pub fn psd01_blocks(m: &ProjectionMask) -> Result<Vec<Vec<usize>>, GramError> {
    let n = m.size();
    let mut assigned = vec![false; n];
    let mut blocks = Vec::new();
    for i in 0..n {
        if !m.get(i, i) {
            if (0..n).any(|j| m.get(i, j)) {
                return Err(GramError::NotBlockStructured { row: i });
            }
            continue;
        }
        if assigned[i] {
            continue;
        }
        let block: Vec<usize> = (0..n).filter(|&j| m.get(i, j)).collect();
        for &j in &block {
            let row_matches = (0..n).all(|k| m.get(j, k) == block.binary_search(&k).is_ok());
            if !row_matches {
                return Err(GramError::NotBlockStructured { row: j });
            }
            assigned[j] = true;
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// Indices whose diagonal entry is forced to zero on every PSD point that
/// agrees with the mask.
///
/// `γ` is forced when `c_{2γ} = 0` and every off-diagonal pair of the
/// constraint at `2γ` is masked out or touches an index already forced;
/// the diagonal entry is then the only survivor of a zero-target equation.
/// A zero diagonal in a PSD matrix zeroes the whole row and column.
fn forced_zero(
    prob: &GramProblem,
    masked_in: impl Fn(usize, usize) -> bool,
    alive: &[bool],
) -> Vec<bool> {
    let mut zero: Vec<bool> = alive.iter().map(|a| !a).collect();
    loop {
        let mut changed = false;
        for (g, b) in prob.basis.iter().enumerate() {
            if zero[g] {
                continue;
            }
            let c = prob
                .constraint(&b.double())
                .expect("diagonal pair has a constraint");
            let forced = c.target.is_zero()
                && c.pairs
                    .iter()
                    .filter(|(i, j)| i != j)
                    .all(|&(i, j)| zero[i] || zero[j] || !masked_in(i, j));
            if forced {
                zero[g] = true;
                changed = true;
            }
        }
        if !changed {
            return zero;
        }
    }
}

/// Whether the mask is a coordinate projection of the problem: it must be
/// PSD (equivalently block structured), every masked-out pair of a
/// nonzero-target constraint must touch a forced-zero index, and every
/// index the mask drops must itself be forced zero. The objective is zero,
/// so the adjoint condition holds trivially.
pub fn validate_coordinate_projection(
    m: &ProjectionMask,
    prob: &GramProblem,
) -> Result<bool, GramError> {
    if m.size() != prob.basis.len() {
        return Err(GramError::DimensionMismatch {
            expected: prob.basis.len(),
            found: m.size(),
        });
    }
    if psd01_blocks(m).is_err() {
        return Ok(false);
    }
    let alive = vec![true; m.size()];
    let zero = forced_zero(prob, |i, j| m.get(i, j), &alive);
    let pairs_ok = prob
        .constraints
        .iter()
        .filter(|c| !c.target.is_zero())
        .flat_map(|c| c.pairs.iter())
        .all(|&(i, j)| m.get(i, j) || zero[i] || zero[j]);
    let drops_ok = (0..m.size()).all(|i| m.get(i, i) || zero[i]);
    Ok(pairs_ok && drops_ok)
}

/// Block structure from a coordinate-projection fixpoint.
///
/// Alternates two steps until neither changes anything: merge the two
/// indices of every surviving pair of a nonzero-target constraint, then
/// drop every monomial that sits in no such pair and whose diagonal is
/// forced to zero once the entries between different cells are masked out.
/// Monomials anchored by a nonzero target stay, even when their diagonal is
/// forced (the middle cell of `x^8 - 2x^4 + 1`). Always yields a mask accepted
/// by [`validate_coordinate_projection`]; minimality is not guaranteed.
pub fn minimal_projection_partition(
    f: &Polynomial,
    q: &SupportSet,
) -> Result<BlockPartition, GramError> {
    let prob = build_gram_problem(f, q)?;
    let n = prob.basis.len();
    let mut alive = vec![true; n];
    let mut uf;
    loop {
        uf = UnionFind::new(n);
        for c in prob.constraints.iter().filter(|c| !c.target.is_zero()) {
            for &(i, j) in &c.pairs {
                if alive[i] && alive[j] {
                    uf.union(i, j);
                }
            }
        }
        let mut roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        roots.iter_mut().for_each(|r| *r = uf.find(*r));
        let zero = forced_zero(&prob, |i, j| roots[i] == roots[j], &alive);
        let mut anchored = vec![false; n];
        for c in prob.constraints.iter().filter(|c| !c.target.is_zero()) {
            for &(i, j) in &c.pairs {
                if alive[i] && alive[j] {
                    anchored[i] = true;
                    anchored[j] = true;
                }
            }
        }
        let newly_dropped: Vec<usize> = (0..n)
            .filter(|&i| alive[i] && zero[i] && !anchored[i])
            .collect();
        if newly_dropped.is_empty() {
            break;
        }
        for i in newly_dropped {
            alive[i] = false;
        }
    }
    let mut cells = Vec::new();
    let mut dropped = SupportSet::new(q.nvars());
    for class in uf.classes() {
        if alive[class[0]] {
            cells.push(SupportSet::from_vectors(
                q.nvars(),
                class.iter().map(|&i| prob.basis[i].clone()),
            ));
        } else {
            for i in class {
                dropped.insert(prob.basis[i].clone());
            }
        }
    }
    Ok(BlockPartition::new(q.clone(), cells, dropped).expect("fixpoint classes partition Q"))
}

/// Restricts the variable pattern to the entries inside one cell (and
/// inside one existing block), removing dropped monomials and fixing every
/// other entry to zero.
pub fn restrict_problem(prob: &GramProblem, p: &BlockPartition) -> Result<GramProblem, GramError> {
    if p.ground() != &prob.basis_set() {
        return Err(GramError::GroundMismatch);
    }
    let old_block = prob.block_of();
    // new block key: (cell, old block)
    let mut keys: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, b) in prob.basis.iter().enumerate() {
        if let (Some(cell), Some(ob)) = (p.cell_of(b), old_block[i]) {
            keys.entry((cell, ob)).or_default().push(i);
        }
    }
    let mut kept: Vec<usize> = keys.values().flatten().copied().collect();
    kept.sort_unstable();
    let mut new_index = vec![None; prob.basis.len()];
    for (ni, &oi) in kept.iter().enumerate() {
        new_index[oi] = Some(ni);
    }
    let mut key_of = vec![None; prob.basis.len()];
    for (k, members) in keys.values().enumerate() {
        for &i in members {
            key_of[i] = Some(k);
        }
    }
    let mut blocks: Vec<Vec<usize>> = keys
        .values()
        .map(|members| {
            members
                .iter()
                .map(|&i| new_index[i].expect("kept"))
                .collect()
        })
        .collect();
    blocks.sort();
    let mut constraints = Vec::new();
    for c in &prob.constraints {
        let pairs: Vec<(usize, usize)> = c
            .pairs
            .iter()
            .filter(|&&(i, j)| key_of[i].is_some() && key_of[i] == key_of[j])
            .map(|&(i, j)| (new_index[i].expect("kept"), new_index[j].expect("kept")))
            .collect();
        if pairs.is_empty() {
            if !c.target.is_zero() {
                return Err(GramError::InvalidPartition(c.alpha.clone()));
            }
            continue;
        }
        constraints.push(Constraint {
            alpha: c.alpha.clone(),
            target: c.target.clone(),
            pairs,
        });
    }
    let basis = kept.iter().map(|&i| prob.basis[i].clone()).collect();
    Ok(GramProblem {
        basis,
        constraints,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_polynomial;
    use crate::support::lambda_set;

    fn int(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    fn s(n: usize, pts: &[&[u32]]) -> SupportSet {
        SupportSet::from_vectors(n, pts.iter().map(|p| ExponentVector::new(p.to_vec())))
    }

    fn example_mask() -> ProjectionMask {
        ProjectionMask::from_rows(&[
            vec![1, 0, 0, 0, 1],
            vec![0, 1, 0, 1, 0],
            vec![0, 0, 1, 0, 0],
            vec![0, 1, 0, 1, 0],
            vec![1, 0, 0, 0, 1],
        ])
        .unwrap()
    }

    fn boundary() -> (Polynomial, GramProblem) {
        let f = parse_polynomial("x1^8 - 2*x1^4 + 1").unwrap();
        let prob = build_gram_problem(&f, &lambda_set(1, 4)).unwrap();
        (f, prob)
    }

    #[test]
    fn builds_boundary_problem() {
        let (_, prob) = boundary();
        assert_eq!(prob.constraints().len(), 9);
        let c0 = prob.constraint(&[0].into()).unwrap();
        assert_eq!(
            (c0.target.clone(), c0.pairs.clone()),
            (int(1), vec![(0, 0)])
        );
        let c4 = prob.constraint(&[4].into()).unwrap();
        assert_eq!(
            (c4.target.clone(), c4.pairs.clone()),
            (int(-2), vec![(0, 4), (1, 3), (2, 2)])
        );
        let c8 = prob.constraint(&[8].into()).unwrap();
        assert_eq!(
            (c8.target.clone(), c8.pairs.clone()),
            (int(1), vec![(4, 4)])
        );
        let c1 = prob.constraint(&[1].into()).unwrap();
        assert_eq!(
            (c1.target.clone(), c1.pairs.clone()),
            (int(0), vec![(0, 1)])
        );
        assert_eq!(prob.num_variables(), 15);
    }

    #[test]
    fn builds_small_problems() {
        let one = parse_polynomial("1").unwrap();
        let p1 = build_gram_problem(&one, &s(1, &[&[0]])).unwrap();
        assert_eq!(p1.constraints().len(), 1);
        assert_eq!(p1.constraints()[0].pairs, vec![(0, 0)]);
        let sq = parse_polynomial("x1^2 + 2*x1 + 1").unwrap();
        let p2 = build_gram_problem(&sq, &s(1, &[&[0], &[1]])).unwrap();
        let targets: Vec<_> = p2
            .constraints()
            .iter()
            .map(|c| (c.target.clone(), c.pairs.clone()))
            .collect();
        assert_eq!(
            targets,
            vec![
                (int(1), vec![(0, 0)]),
                (int(2), vec![(0, 1)]),
                (int(1), vec![(1, 1)])
            ]
        );
        let far = parse_polynomial("x1^3").unwrap();
        assert_eq!(
            build_gram_problem(&far, &s(1, &[&[0]])),
            Err(GramError::SupportNotCovered([3].into()))
        );
    }

    #[test]
    fn psd01_examples() {
        assert_eq!(
            psd01_blocks(&example_mask()).unwrap(),
            vec![vec![0, 4], vec![1, 3], vec![2]]
        );
        let id = ProjectionMask::from_blocks(5, &(0..5).map(|i| vec![i]).collect::<Vec<_>>());
        assert_eq!(psd01_blocks(&id).unwrap().len(), 5);
        let bad = ProjectionMask::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap();
        assert!(matches!(
            psd01_blocks(&bad),
            Err(GramError::NotBlockStructured { .. })
        ));
        // overlapping blocks: rows 0 and 1 disagree on column 2
        let chain =
            ProjectionMask::from_rows(&[vec![1, 1, 0], vec![1, 1, 1], vec![0, 1, 1]]).unwrap();
        assert!(psd01_blocks(&chain).is_err());
    }

    #[test]
    fn validates_projection_examples() {
        let (_, prob) = boundary();
        assert!(validate_coordinate_projection(&example_mask(), &prob).unwrap());
        assert!(validate_coordinate_projection(&ProjectionMask::ones(5), &prob).unwrap());
        let one = build_gram_problem(&parse_polynomial("1").unwrap(), &s(1, &[&[0]])).unwrap();
        assert!(!validate_coordinate_projection(&ProjectionMask::zeros(1), &one).unwrap());
        assert!(matches!(
            validate_coordinate_projection(&ProjectionMask::ones(2), &one),
            Err(GramError::DimensionMismatch { .. })
        ));
        // splitting {0,4} breaks the x^4 constraint
        let split04 = ProjectionMask::from_blocks(5, &[vec![0], vec![4], vec![1, 3], vec![2]]);
        assert!(!validate_coordinate_projection(&split04, &prob).unwrap());
    }

    #[test]
    fn boundary_projection_partition() {
        let (f, _) = boundary();
        let p = minimal_projection_partition(&f, &lambda_set(1, 4)).unwrap();
        assert_eq!(
            p.cells(),
            &[s(1, &[&[0], &[4]]), s(1, &[&[1], &[3]]), s(1, &[&[2]])]
        );
        assert!(p.dropped().is_empty());
        let mask = ProjectionMask::from_partition(&lambda_set(1, 4).to_vec(), &p).unwrap();
        assert_eq!(mask, example_mask());
    }

    #[test]
    fn quartic_projection_drops_cross_monomial() {
        let f = parse_polynomial("x1^4 + x2^4").unwrap();
        let q = s(2, &[&[2, 0], &[1, 1], &[0, 2]]);
        let p = minimal_projection_partition(&f, &q).unwrap();
        assert_eq!(p.cells(), &[s(2, &[&[0, 2]]), s(2, &[&[2, 0]])]);
        assert_eq!(p.dropped(), &s(2, &[&[1, 1]]));
    }

    #[test]
    fn zero_odd_coefficient_separates() {
        let f = parse_polynomial("1 + x1^2").unwrap();
        let p = minimal_projection_partition(&f, &s(1, &[&[0], &[1]])).unwrap();
        assert_eq!(p.cells(), &[s(1, &[&[0]]), s(1, &[&[1]])]);
    }

    #[test]
    fn restriction_counts_variables() {
        let (f, prob) = boundary();
        let p = minimal_projection_partition(&f, &lambda_set(1, 4)).unwrap();
        let r = restrict_problem(&prob, &p).unwrap();
        assert_eq!(r.num_variables(), 7);
        assert_eq!(r.blocks(), &[vec![0, 4], vec![1, 3], vec![2]]);
        let c4 = r.constraint(&[4].into()).unwrap();
        assert_eq!(c4.pairs, vec![(0, 4), (1, 3), (2, 2)]);
        // x^1 and x^7 only had cross-cell pairs
        assert!(r.constraint(&[1].into()).is_none());
        assert_eq!(r.constraint(&[2].into()).unwrap().pairs, vec![(1, 1)]);

        let single = BlockPartition::single_cell(lambda_set(1, 4));
        assert_eq!(restrict_problem(&prob, &single).unwrap(), prob);
    }

    #[test]
    fn restriction_of_separate_quartics() {
        let f = parse_polynomial("x1^4 + x2^4").unwrap();
        let q = s(2, &[&[2, 0], &[1, 1], &[0, 2]]);
        let prob = build_gram_problem(&f, &q).unwrap();
        let p = minimal_projection_partition(&f, &q).unwrap();
        let r = restrict_problem(&prob, &p).unwrap();
        assert_eq!(r.basis(), &[[0, 2].into(), [2, 0].into()]);
        assert_eq!(r.constraints().len(), 2);
        assert!(r
            .constraints()
            .iter()
            .all(|c| c.target == int(1) && c.pairs.len() == 1));
    }

    #[test]
    fn restriction_rejects_lost_targets() {
        let (_, prob) = boundary();
        let p = BlockPartition::from_cells(lambda_set(1, 4), vec![s(1, &[&[1], &[2], &[3], &[4]])])
            .unwrap();
        assert_eq!(
            restrict_problem(&prob, &p),
            Err(GramError::InvalidPartition([0].into()))
        );
        let other = BlockPartition::single_cell(lambda_set(1, 3));
        assert_eq!(
            restrict_problem(&prob, &other),
            Err(GramError::GroundMismatch)
        );
    }

    #[test]
    fn json_shape_and_round_trip() {
        let (f, prob) = boundary();
        let text = prob.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["basis"][4], serde_json::json!([4]));
        assert_eq!(
            v["constraints"][4],
            serde_json::json!({"alpha": [4], "target": "-2", "pairs": [[0, 4], [1, 3], [2, 2]]})
        );
        assert!(v.get("blocks").is_none());
        assert_eq!(GramProblem::from_json(&text).unwrap(), prob);

        let p = minimal_projection_partition(&f, &lambda_set(1, 4)).unwrap();
        let r = restrict_problem(&prob, &p).unwrap();
        assert_eq!(GramProblem::from_json(&r.to_json()).unwrap(), r);
        assert!(GramProblem::from_json(
            r#"{"basis":[[0]],"constraints":[{"alpha":[1],"target":"1","pairs":[[0,0]]}]}"#
        )
        .is_err());
    }
}
