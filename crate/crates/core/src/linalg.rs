//! Small dense symmetric-matrix helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SymmetricTridiagonal};

/// Eigenvalues (ascending) and matching eigenvector columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(m).0[0]
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    let (v, _) = sym_eigen(m);
    v[v.len() - 1]
}

/// Number of eigenvalues of the tridiagonal `(d, e)` strictly below `x`,
/// by counting sign changes of the Sturm sequence.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for k in 1..d.len() {
        if q.abs() < tiny {
            q = if q < 0.0 { -tiny } else { tiny };
        }
        q = d[k] - x - e[k - 1] * e[k - 1] / q;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue by Householder tridiagonalization and Sturm-sequence
/// bisection; independent of the QR iteration behind [`min_eigenvalue`].
pub fn min_eigenvalue_bisection(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    if n == 1 {
        return m[(0, 0)];
    }
    let sym = (m + m.transpose()) * 0.5;
    let (diag, off) = SymmetricTridiagonal::new(sym).unpack_tridiagonal();
    let d: Vec<f64> = diag.iter().copied().collect();
    let e: Vec<f64> = off.iter().copied().collect();
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..n {
        let r = if k > 0 { e[k - 1].abs() } else { 0.0 } + if k + 1 < n { e[k].abs() } else { 0.0 };
        lo = lo.min(d[k] - r);
        hi = hi.max(d[k] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(1e-300);
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sturm_count(&d, &e, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Frobenius-nearest PSD matrix: clamp negative eigenvalues to zero.
pub fn project_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return a.clone();
    }
    let (values, vectors) = sym_eigen(a);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = values[k];
        if lam > 0.0 {
            let v = vectors.column(k);
            out += lam * v * v.transpose();
        }
    }
    (&out + out.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |r, c| rows[r][c])
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project_psd(&m(&[&[1.0, 0.0], &[0.0, -1.0]])),
            m(&[&[1.0, 0.0], &[0.0, 0.0]])
        );
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((project_psd(&id) - &id).norm() < 1e-14);
        let p = project_psd(&m(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert!((p - m(&[&[0.5, 0.5], &[0.5, 0.5]])).norm() < 1e-14);
    }

    #[test]
    fn bisection_matches_qr() {
        let a = m(&[
            &[4.0, 1.0, -2.0, 0.5],
            &[1.0, 2.0, 0.0, 1.0],
            &[-2.0, 0.0, 3.0, -1.0],
            &[0.5, 1.0, -1.0, -1.0],
        ]);
        let qr = min_eigenvalue(&a);
        let bis = min_eigenvalue_bisection(&a);
        assert!((qr - bis).abs() < 1e-12, "{qr} vs {bis}");
        assert_eq!(min_eigenvalue_bisection(&m(&[&[-3.0]])), -3.0);
        let diag = m(&[&[2.0, 0.0, 0.0], &[0.0, -5.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!((min_eigenvalue_bisection(&diag) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_is_sorted() {
        let (v, vecs) = sym_eigen(&m(&[&[2.0, 1.0], &[1.0, 2.0]]));
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
        assert!((vecs.column(0)[0] + vecs.column(0)[1]).abs() < 1e-12);
        assert_eq!(max_eigenvalue(&m(&[&[2.0, 1.0], &[1.0, 2.0]])).round(), 3.0);
    }
}
