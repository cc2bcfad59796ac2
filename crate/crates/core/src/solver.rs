//! Dense PSD feasibility for Gram problems.
//!
//! Douglas–Rachford splitting between the PSD cone (per block) and the
//! affine constraint set. The constraint matrices have disjoint supports,
//! so the affine projection is a closed-form per-constraint shift.
//!
//! * Feasible points are read off the iterate directly, after an affine
//!   correction, or after a *polish*: restrict to the dominant eigenspace of
//!   the iterate and solve the constraints there by least squares. The
//!   polish is what settles boundary instances (rank-deficient Gram
//!   matrices), where splitting methods only converge sublinearly.
//! * On infeasible problems the difference between the two half-steps
//!   converges to the gap vector between the sets, which is a (PSD) combination
//!   of constraint matrices; negated, it is a Farkas certificate. It is made
//!   strict by tilting towards a moment vector and then checked
//!   independently.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::gram::GramProblem;
use crate::linalg::{max_eigenvalue, min_eigenvalue, sym_eigen};
use crate::poly::{rational_to_f64, ExponentVector};

pub use crate::linalg::project_psd;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// Strictness required of a dual certificate: `λ_max(Σ y_α A_α)` must be
/// below `-DUAL_MARGIN · max(1, max|y_α|)` with `Σ y_α c_α = 1`.
pub const DUAL_MARGIN: f64 = 1e-9;

const CHECK_EVERY: usize = 10;
const POLISH_EVERY: usize = 50;

/// A symmetric matrix on the problem basis, zero outside its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub basis: Vec<ExponentVector>,
    pub blocks: Vec<Vec<usize>>,
    pub values: DMatrix<f64>,
}

impl GramMatrix {
    pub fn block(&self, k: usize) -> DMatrix<f64> {
        let b = &self.blocks[k];
        DMatrix::from_fn(b.len(), b.len(), |r, c| self.values[(b[r], b[c])])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.blocks.len())
            .map(|k| min_eigenvalue(&self.block(k)))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_α |⟨A_α, X⟩ − c_α|`, recomputed from the problem's pairs.
    pub fn residual(&self, prob: &GramProblem) -> f64 {
        prob.constraints()
            .iter()
            .map(|c| {
                let s: f64 = c
                    .pairs
                    .iter()
                    .map(|&(i, j)| {
                        if i == j {
                            self.values[(i, i)]
                        } else {
                            2.0 * self.values[(i, j)]
                        }
                    })
                    .sum();
                (s - rational_to_f64(&c.target)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Multipliers `y_α` with `Σ y_α A_α ≺ 0` and `Σ y_α c_α > 0`: no PSD `X`
/// can satisfy the constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub multipliers: Vec<(ExponentVector, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualCheck {
    /// Largest eigenvalue of `Σ y_α A_α` over the problem's blocks.
    pub max_eigenvalue: f64,
    /// `Σ y_α c_α`.
    pub objective: f64,
    pub valid: bool,
}

impl DualCertificate {
    /// Rebuilds `Σ y_α A_α` on the problem's variable pattern and checks it.
    pub fn verify(&self, prob: &GramProblem) -> DualCheck {
        let y: BTreeMap<&ExponentVector, f64> =
            self.multipliers.iter().map(|(a, v)| (a, *v)).collect();
        let n = prob.basis().len();
        let mut s = DMatrix::zeros(n, n);
        let mut objective = 0.0;
        for c in prob.constraints() {
            let v = y.get(&c.alpha).copied().unwrap_or(0.0);
            objective += v * rational_to_f64(&c.target);
            for &(i, j) in &c.pairs {
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        let max_eig = prob
            .blocks()
            .iter()
            .map(|b| max_eigenvalue(&DMatrix::from_fn(b.len(), b.len(), |r, c| s[(b[r], b[c])])))
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = self
            .multipliers
            .iter()
            .map(|(_, v)| v.abs())
            .fold(1.0, f64::max);
        let max_eigenvalue = if prob.blocks().iter().all(|b| b.is_empty()) {
            f64::NEG_INFINITY
        } else {
            max_eig
        };
        DualCheck {
            max_eigenvalue,
            objective,
            valid: objective > 0.0 && max_eigenvalue < -DUAL_MARGIN * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Feasible(GramMatrix),
    Infeasible(DualCertificate),
    Undetermined {
        iterations: usize,
        primal_residual: f64,
        gap: f64,
    },
}

impl SolveOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveOutcome::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, SolveOutcome::Infeasible(_))
    }

    /// `Some(true)` / `Some(false)` when resolved.
    pub fn status(&self) -> Option<bool> {
        match self {
            SolveOutcome::Feasible(_) => Some(true),
            SolveOutcome::Infeasible(_) => Some(false),
            SolveOutcome::Undetermined { .. } => None,
        }
    }
}

struct Entry {
    block: usize,
    r: usize,
    c: usize,
}

struct Row {
    alpha: ExponentVector,
    target: f64,
    entries: Vec<Entry>,
    norm2: f64,
}

/// The problem in block-local coordinates.
struct Compiled {
    blocks: Vec<Vec<usize>>,
    rows: Vec<Row>,
}

type Blocks = Vec<DMatrix<f64>>;

impl Compiled {
    fn new(prob: &GramProblem) -> Self {
        let blocks: Vec<Vec<usize>> = prob
            .blocks()
            .iter()
            .filter(|b| !b.is_empty())
            .cloned()
            .collect();
        let mut pos = vec![None; prob.basis().len()];
        for (k, b) in blocks.iter().enumerate() {
            for (local, &g) in b.iter().enumerate() {
                pos[g] = Some((k, local));
            }
        }
        let rows = prob
            .constraints()
            .iter()
            .map(|c| {
                let entries: Vec<Entry> = c
                    .pairs
                    .iter()
                    .filter_map(|&(i, j)| match (pos[i], pos[j]) {
                        (Some((bi, r)), Some((bj, col))) if bi == bj => Some(Entry {
                            block: bi,
                            r,
                            c: col,
                        }),
                        _ => None,
                    })
                    .collect();
                let norm2 = entries
                    .iter()
                    .map(|e| if e.r == e.c { 1.0 } else { 2.0 })
                    .sum();
                Row {
                    alpha: c.alpha.clone(),
                    target: rational_to_f64(&c.target),
                    entries,
                    norm2,
                }
            })
            .collect();
        Compiled { blocks, rows }
    }

    fn zeros(&self) -> Blocks {
        self.blocks
            .iter()
            .map(|b| DMatrix::zeros(b.len(), b.len()))
            .collect()
    }

    fn apply_row(&self, row: &Row, x: &Blocks) -> f64 {
        row.entries
            .iter()
            .map(|e| {
                if e.r == e.c {
                    x[e.block][(e.r, e.r)]
                } else {
                    2.0 * x[e.block][(e.r, e.c)]
                }
            })
            .sum()
    }

    fn residual(&self, x: &Blocks) -> f64 {
        self.rows
            .iter()
            .map(|row| (self.apply_row(row, x) - row.target).abs())
            .fold(0.0, f64::max)
    }

    fn project_affine(&self, x: &mut Blocks) {
        for row in &self.rows {
            if row.entries.is_empty() {
                continue;
            }
            let shift = (self.apply_row(row, x) - row.target) / row.norm2;
            for e in &row.entries {
                x[e.block][(e.r, e.c)] -= shift;
                if e.r != e.c {
                    x[e.block][(e.c, e.r)] -= shift;
                }
            }
        }
    }

    fn adjoint(&self, y: &[f64]) -> Blocks {
        let mut s = self.zeros();
        for (row, &v) in self.rows.iter().zip(y) {
            for e in &row.entries {
                s[e.block][(e.r, e.c)] = v;
                s[e.block][(e.c, e.r)] = v;
            }
        }
        s
    }

    fn objective(&self, y: &[f64]) -> f64 {
        self.rows.iter().zip(y).map(|(row, v)| row.target * v).sum()
    }

    fn assemble(&self, prob: &GramProblem, x: &Blocks) -> GramMatrix {
        let n = prob.basis().len();
        let mut values = DMatrix::zeros(n, n);
        for (b, xb) in self.blocks.iter().zip(x) {
            for (r, &gr) in b.iter().enumerate() {
                for (c, &gc) in b.iter().enumerate() {
                    values[(gr, gc)] = xb[(r, c)];
                }
            }
        }
        GramMatrix {
            basis: prob.basis().to_vec(),
            blocks: self.blocks.clone(),
            values,
        }
    }

    fn certificate(&self, y: &[f64]) -> DualCertificate {
        DualCertificate {
            multipliers: self
                .rows
                .iter()
                .zip(y)
                .map(|(row, &v)| (row.alpha.clone(), v))
                .collect(),
        }
    }

    /// `m_α = mean over sample points p of p^α`; `A*(m)` is the (positive
    /// definite) moment matrix of each block.
    fn moments(&self, nvars: usize) -> Vec<f64> {
        let largest = self.blocks.iter().map(Vec::len).max().unwrap_or(0);
        let npts = 4 * largest + 16;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let pts: Vec<Vec<f64>> = (0..npts)
            .map(|_| (0..nvars).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        self.rows
            .iter()
            .map(|row| {
                let s: f64 = pts
                    .iter()
                    .map(|p| {
                        row.alpha
                            .coords()
                            .iter()
                            .zip(p)
                            .map(|(&e, &v)| v.powi(e as i32))
                            .product::<f64>()
                    })
                    .sum();
                s / npts as f64
            })
            .collect()
    }
}

fn max_eig_blocks(s: &Blocks) -> f64 {
    s.iter()
        .map(max_eigenvalue)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn min_eig_blocks(s: &Blocks) -> f64 {
    s.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
}

fn frob(x: &Blocks) -> f64 {
    x.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

/// Turns raw multipliers `y` with `A*(y) ⪯ 0` (approximately) and
/// `yᵀc > 0` into a strictly verifying certificate, if possible.
fn strict_certificate(
    comp: &Compiled,
    prob: &GramProblem,
    moments: &[f64],
    y: &[f64],
) -> Option<DualCertificate> {
    let obj = comp.objective(y);
    if obj.is_nan() || obj <= 0.0 || obj.is_infinite() {
        return None;
    }
    let y: Vec<f64> = y.iter().map(|v| v / obj).collect();
    let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mu = max_eig_blocks(&comp.adjoint(&y));
    let nu = min_eig_blocks(&comp.adjoint(moments));
    let mc = comp.objective(moments);
    let mut tilts = vec![0.0];
    if nu > 0.0 {
        let base = (mu.max(0.0) + 10.0 * DUAL_MARGIN * scale) / nu;
        tilts.extend([1.5, 4.0, 16.0].iter().map(|f| f * base));
    }
    for t in tilts {
        if t * mc >= 0.9 {
            continue;
        }
        let tilted: Vec<f64> = y.iter().zip(moments).map(|(a, m)| a - t * m).collect();
        let o = comp.objective(&tilted);
        let normalized: Vec<f64> = tilted.iter().map(|v| v / o).collect();
        let cert = comp.certificate(&normalized);
        if cert.verify(prob).valid {
            return Some(cert);
        }
    }
    None
}

/// Low-rank refinement: factor the iterate's dominant eigenspaces as
/// `L Lᵀ` and run Gauss–Newton on `A(L Lᵀ) = c`. The result is PSD by
/// construction, so only the constraint residual has to be checked.
fn polish(comp: &Compiled, x: &Blocks, tol: f64) -> Option<Blocks> {
    let eig: Vec<_> = x.iter().map(sym_eigen).collect();
    let top = eig
        .iter()
        .filter_map(|(v, _)| v.iter().copied().reduce(f64::max))
        .fold(0.0, f64::max);
    if top <= 0.0 {
        return None;
    }
    let active: Vec<&Row> = comp.rows.iter().filter(|r| !r.entries.is_empty()).collect();
    let mut tried = Vec::new();
    for rel in [1e-3, 1e-5, 1e-7] {
        let thr = rel * top;
        let ranks: Vec<usize> = eig
            .iter()
            .map(|(v, _)| v.iter().filter(|&&l| l > thr).count())
            .collect();
        if tried.contains(&ranks) {
            continue;
        }
        tried.push(ranks);
        let mut factors: Vec<DMatrix<f64>> = eig
            .iter()
            .map(|(vals, vecs)| {
                let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > thr).collect();
                DMatrix::from_fn(vecs.nrows(), keep.len(), |r, c| {
                    vecs[(r, keep[c])] * vals[keep[c]].sqrt()
                })
            })
            .collect();
        let mut offsets = Vec::with_capacity(factors.len());
        let mut nunk = 0;
        for l in &factors {
            offsets.push(nunk);
            nunk += l.len();
        }
        if nunk == 0 {
            continue;
        }
        for _ in 0..30 {
            let xs: Blocks = factors.iter().map(|l| l * l.transpose()).collect();
            let res = comp.residual(&xs);
            if res <= tol {
                return Some(xs);
            }
            let mut jac = DMatrix::zeros(active.len(), nunk);
            let mut rhs = DVector::zeros(active.len());
            for (ri, row) in active.iter().enumerate() {
                rhs[ri] = row.target - comp.apply_row(row, &xs);
                for e in &row.entries {
                    let l = &factors[e.block];
                    let off = offsets[e.block];
                    let rank = l.ncols();
                    // column-major index of L[(i, k)]
                    for k in 0..rank {
                        if e.r == e.c {
                            jac[(ri, off + k * l.nrows() + e.r)] += 2.0 * l[(e.r, k)];
                        } else {
                            jac[(ri, off + k * l.nrows() + e.r)] += 2.0 * l[(e.c, k)];
                            jac[(ri, off + k * l.nrows() + e.c)] += 2.0 * l[(e.r, k)];
                        }
                    }
                }
            }
            let svd = jac.svd(true, true);
            let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
            let Ok(step) = svd.solve(&rhs, 1e-13 * smax.max(1e-300)) else {
                break;
            };
            // backtrack: the step is only first-order accurate
            let mut scale = 1.0;
            let mut accepted = None;
            while scale > 1e-3 {
                let trial: Vec<DMatrix<f64>> = factors
                    .iter()
                    .enumerate()
                    .map(|(k, l)| {
                        let mut t = l.clone();
                        for (i, v) in t.as_mut_slice().iter_mut().enumerate() {
                            *v += scale * step[offsets[k] + i];
                        }
                        t
                    })
                    .collect();
                let tx: Blocks = trial.iter().map(|l| l * l.transpose()).collect();
                if comp.residual(&tx) < res {
                    accepted = Some(trial);
                    break;
                }
                scale *= 0.5;
            }
            match accepted {
                Some(t) => factors = t,
                None => break,
            }
        }
    }
    None
}

/// Decides whether some PSD matrix with the problem's block pattern
/// satisfies its constraints.
pub fn solve_feasibility(prob: &GramProblem, tol: f64, max_iter: usize) -> SolveOutcome {
    assert!(tol > 0.0, "tolerance must be positive");
    let comp = Compiled::new(prob);
    let nvars = prob.nvars();
    let moments = comp.moments(nvars);

    // constraints with no surviving entry: 0 = c
    if let Some(k) = comp
        .rows
        .iter()
        .position(|r| r.entries.is_empty() && r.target != 0.0)
    {
        let mut y = vec![0.0; comp.rows.len()];
        y[k] = 1.0 / comp.rows[k].target;
        if let Some(cert) = strict_certificate(&comp, prob, &moments, &y) {
            return SolveOutcome::Infeasible(cert);
        }
        return SolveOutcome::Undetermined {
            iterations: 0,
            primal_residual: comp.rows[k].target.abs(),
            gap: 0.0,
        };
    }
    if comp.blocks.is_empty() {
        return SolveOutcome::Feasible(comp.assemble(prob, &comp.zeros()));
    }

    let mut z = comp.zeros();
    for row in &comp.rows {
        for e in row.entries.iter().filter(|e| e.r == e.c) {
            z[e.block][(e.r, e.r)] = row.target;
        }
    }
    let mut residual = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for iter in 1..=max_iter {
        let x: Blocks = z.iter().map(project_psd).collect();
        let mut y: Blocks = x.iter().zip(&z).map(|(xb, zb)| 2.0 * xb - zb).collect();
        comp.project_affine(&mut y);
        for ((zb, yb), xb) in z.iter_mut().zip(&y).zip(&x) {
            *zb += yb - xb;
        }
        if iter % CHECK_EVERY != 0 && iter != max_iter {
            continue;
        }
        residual = comp.residual(&x);
        let d: Blocks = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        gap = frob(&d);
        log::trace!(target: "sosblock::solver", "iter={iter} residual={residual:.3e} gap={gap:.3e}");
        if residual <= tol {
            log::debug!(target: "sosblock::solver", "feasible at iter {iter} (iterate)");
            return SolveOutcome::Feasible(comp.assemble(prob, &x));
        }
        let mut xa = x.clone();
        comp.project_affine(&mut xa);
        if min_eig_blocks(&xa) >= -tol && comp.residual(&xa) <= tol {
            log::debug!(target: "sosblock::solver", "feasible at iter {iter} (affine correction)");
            return SolveOutcome::Feasible(comp.assemble(prob, &xa));
        }
        if iter % POLISH_EVERY == 0 || iter == max_iter {
            if let Some(p) = polish(&comp, &x, tol) {
                log::debug!(target: "sosblock::solver", "feasible at iter {iter} (polish)");
                return SolveOutcome::Feasible(comp.assemble(prob, &p));
            }
        }
        if gap > 0.0 {
            let eta: Vec<f64> = comp
                .rows
                .iter()
                .map(|row| {
                    let s: f64 = row
                        .entries
                        .iter()
                        .map(|e| {
                            if e.r == e.c {
                                d[e.block][(e.r, e.r)]
                            } else {
                                2.0 * d[e.block][(e.r, e.c)]
                            }
                        })
                        .sum();
                    if row.norm2 > 0.0 {
                        -s / row.norm2
                    } else {
                        0.0
                    }
                })
                .collect();
            if let Some(cert) = strict_certificate(&comp, prob, &moments, &eta) {
                log::debug!(target: "sosblock::solver", "infeasible at iter {iter}");
                return SolveOutcome::Infeasible(cert);
            }
        }
    }
    SolveOutcome::Undetermined {
        iterations: max_iter,
        primal_residual: residual,
        gap,
    }
}
