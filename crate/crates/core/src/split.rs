//! Split-polynomial detection.
//!
//! `phi`, `psi` and the visited-set recursion `H_Q` locate, for each
//! monomial `x^α` of `Q + Q`, the corner monomials σ(Q) that any Gram
//! decomposition must touch to produce it. Classes of σ(Q) that never
//! interact give independent blocks: `p` is SOS iff each block polynomial
//! `p_i` is.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::partition::BlockPartition;
use crate::poly::{ExponentVector, Polynomial, SupportSet};
use crate::support::sigma;
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("{0:?} is not a sum of two elements of Q")]
    NotInSumSet(ExponentVector),
    #[error("monomial {0:?} of f is not covered by a single cell")]
    SupportNotCovered(ExponentVector),
}

/// φ_Q(α) = {β ∈ Q | α − β ∈ Q}.
pub fn phi(q: &SupportSet, alpha: &ExponentVector) -> Result<SupportSet, SplitError> {
    let out = SupportSet::from_vectors(
        q.nvars(),
        q.iter()
            .filter(|b| alpha.checked_sub(b).is_some_and(|c| q.contains(&c)))
            .cloned(),
    );
    if out.is_empty() {
        return Err(SplitError::NotInSumSet(alpha.clone()));
    }
    Ok(out)
}

/// `α` is a terminal of the H_Q recursion when φ_Q(α) = {α/2}.
fn terminal_half(phi_alpha: &SupportSet, alpha: &ExponentVector) -> Option<ExponentVector> {
    if phi_alpha.len() != 1 {
        return None;
    }
    let half = alpha.half()?;
    phi_alpha.contains(&half).then_some(half)
}

/// The literal recursion H_Q(α, R).
///
/// Exponential in |Q| in the worst case; [`PsiCache::psi`] computes
/// H_Q(α, ∅) by reachability instead and should be preferred.
pub fn h_recursive(
    q: &SupportSet,
    alpha: &ExponentVector,
    visited: &BTreeSet<ExponentVector>,
) -> Result<SupportSet, SplitError> {
    if visited.contains(alpha) {
        return Ok(SupportSet::new(q.nvars()));
    }
    let phi_alpha = phi(q, alpha)?;
    if let Some(half) = terminal_half(&phi_alpha, alpha) {
        return Ok(SupportSet::from_vectors(q.nvars(), [half]));
    }
    let mut next_visited = visited.clone();
    next_visited.insert(alpha.clone());
    let mut out = SupportSet::new(q.nvars());
    for beta in &phi_alpha {
        out = out.union(&h_recursive(q, &beta.double(), &next_visited)?);
    }
    Ok(out)
}

/// Memo of ψ_Q values for one ground support `Q`.
#[derive(Debug, Clone)]
pub struct PsiCache {
    ground: SupportSet,
    memo: HashMap<ExponentVector, SupportSet>,
}

impl PsiCache {
    pub fn new(ground: SupportSet) -> Self {
        PsiCache {
            ground,
            memo: HashMap::new(),
        }
    }

    pub fn ground(&self) -> &SupportSet {
        &self.ground
    }

    /// ψ_Q(α) = H_Q(α, ∅).
    ///
    /// H_Q follows edges `α → 2β` for `β ∈ φ_Q(α)` along paths that never
    /// revisit a node, stopping at terminals. Every walk contains a simple
    /// path with the same endpoints, so the result is the set of halves of
    /// the terminals reachable from `α`.
    pub fn psi(&mut self, alpha: &ExponentVector) -> Result<SupportSet, SplitError> {
        if let Some(hit) = self.memo.get(alpha) {
            return Ok(hit.clone());
        }
        let q = &self.ground;
        let mut out = SupportSet::new(q.nvars());
        let mut seen: BTreeSet<ExponentVector> = BTreeSet::from([alpha.clone()]);
        let mut queue = VecDeque::from([alpha.clone()]);
        while let Some(node) = queue.pop_front() {
            let phi_node = phi(q, &node)?;
            if let Some(half) = terminal_half(&phi_node, &node) {
                out.insert(half);
                continue;
            }
            for beta in &phi_node {
                let next = beta.double();
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        self.memo.insert(alpha.clone(), out.clone());
        Ok(out)
    }
}

/// Finest split of `f` over the Gram support `q`.
///
/// The σ(Q) classes start from the sets ψ_Q(α), α ∈ S(f), each of which
/// must sit inside one class. They are then closed under the rule that any
/// two members `α, β` of a block `Q_T = {γ ∈ Q | ψ_Q(2γ) ⊆ T}` have
/// ψ_Q(α + β) ⊆ T. Monomials whose ψ_Q(2γ) straddles several classes are
/// placed in `dropped`.
pub fn split_partition(f: &Polynomial, q: &SupportSet) -> Result<BlockPartition, SplitError> {
    let mut cache = PsiCache::new(q.clone());
    let corners: Vec<ExponentVector> = sigma(q).to_vec();
    let index = |v: &ExponentVector| corners.binary_search(v).expect("ψ values lie in σ(Q)");
    let mut uf = UnionFind::new(corners.len());

    let sum_set = q.minkowski_sum(q);
    for alpha in f.support().iter() {
        if !sum_set.contains(alpha) {
            return Err(SplitError::SupportNotCovered(alpha.clone()));
        }
        let psi = cache.psi(alpha)?;
        if psi.is_empty() {
            return Err(SplitError::SupportNotCovered(alpha.clone()));
        }
        uf.union_all(psi.iter().map(index));
    }

    let members: Vec<ExponentVector> = q.to_vec();
    let diag: Vec<Vec<usize>> = members
        .iter()
        .map(|g| {
            cache
                .psi(&g.double())
                .map(|s| s.iter().map(index).collect())
        })
        .collect::<Result<_, _>>()?;

    loop {
        let mut changed = false;
        let mut blocks: HashMap<usize, Vec<usize>> = HashMap::new();
        for (gi, d) in diag.iter().enumerate() {
            if let Some(&first) = d.first() {
                let root = uf.find(first);
                if d.iter().all(|&t| uf.find(t) == root) {
                    blocks.entry(root).or_default().push(gi);
                }
            }
        }
        let mut roots: Vec<usize> = blocks.keys().copied().collect();
        roots.sort_unstable();
        for root in roots {
            let block = &blocks[&root];
            for (i, &a) in block.iter().enumerate() {
                for &b in &block[i..] {
                    let psi = cache.psi(&(&members[a] + &members[b]))?;
                    changed |= uf.union_all(psi.iter().map(index));
                }
            }
        }
        if !changed {
            break;
        }
    }

    let classes = uf.classes();
    let mut class_of = vec![0usize; corners.len()];
    for (ci, class) in classes.iter().enumerate() {
        for &t in class {
            class_of[t] = ci;
        }
    }
    let mut cells = vec![SupportSet::new(q.nvars()); classes.len()];
    let mut dropped = SupportSet::new(q.nvars());
    for (gi, d) in diag.iter().enumerate() {
        let c = class_of[d[0]];
        if d.iter().all(|&t| class_of[t] == c) {
            cells[c].insert(members[gi].clone());
        } else {
            dropped.insert(members[gi].clone());
        }
    }
    Ok(BlockPartition::new(q.clone(), cells, dropped).expect("split cells partition Q"))
}

/// The block polynomials `p_i = Σ_{α ∈ S(f), ψ_Q(α) ⊆ T_i} c_α x^α` paired
/// with their cells `Q_i`, where `T_i = Q_i ∩ σ(Q)`.
pub fn extract_blocks(
    f: &Polynomial,
    p: &BlockPartition,
) -> Result<Vec<(Polynomial, SupportSet)>, SplitError> {
    let mut cache = PsiCache::new(p.ground().clone());
    let corners = sigma(p.ground());
    let corner_cells: Vec<SupportSet> = p
        .cells()
        .iter()
        .map(|c| {
            SupportSet::from_vectors(c.nvars(), c.iter().filter(|v| corners.contains(v)).cloned())
        })
        .collect();
    let mut blocks: Vec<Polynomial> = vec![Polynomial::zero(f.nvars()); p.num_cells()];
    for (alpha, c) in f.terms() {
        let psi = cache.psi(alpha)?;
        let owner = corner_cells
            .iter()
            .position(|t| !psi.is_empty() && psi.is_subset(t))
            .ok_or_else(|| SplitError::SupportNotCovered(alpha.clone()))?;
        blocks[owner].add_term(alpha.clone(), c.clone());
    }
    Ok(blocks.into_iter().zip(p.cells().iter().cloned()).collect())
}
