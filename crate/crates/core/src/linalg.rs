//! Small dense linear algebra for desk-scale problems.

use crate::scalar::Scalar;

/// Solves `m · x = rhs` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `pivot_tol` (singular system).
pub(crate) fn solve<T: Scalar>(m: &[Vec<T>], rhs: &[T], pivot_tol: T) -> Option<Vec<T>> {
    let n = rhs.len();
    debug_assert_eq!(m.len(), n);
    let mut a: Vec<Vec<T>> = m
        .iter()
        .zip(rhs)
        .map(|(row, &b)| {
            let mut r = row.clone();
            r.push(b);
            r
        })
        .collect();
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col][col].abs();
        for (r, row) in a.iter().enumerate().skip(col + 1) {
            if row[col].abs() > best {
                best = row[col].abs();
                piv = r;
            }
        }
        if !(best > pivot_tol) {
            return None;
        }
        a.swap(col, piv);
        let (top, bottom) = a.split_at_mut(col + 1);
        let prow = &top[col];
        for row in bottom.iter_mut() {
            let f = row[col] / prow[col];
            if f != T::zero() {
                for k in col..=n {
                    row[k] = row[k] - f * prow[k];
                }
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = a[i][n];
        for k in i + 1..n {
            s = s - a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub(crate) fn symmetric_eigenvalues<T: Scalar>(m: &[Vec<T>]) -> Vec<T> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    ev
}

/// Whether `v` lies (numerically) in the row span of the orthonormal `basis`;
/// if not, pushes its normalized residual onto `basis` and returns `true`.
pub(crate) fn extend_orthonormal<T: Scalar>(basis: &mut Vec<Vec<T>>, v: &[T], tol: T) -> bool {
    let mut r = v.to_vec();
    for b in basis.iter() {
        let c: T = r.iter().zip(b).map(|(&x, &y)| x * y).sum();
        for (ri, &bi) in r.iter_mut().zip(b) {
            *ri = *ri - c * bi;
        }
    }
    let norm = r.iter().map(|&x| x * x).sum::<T>().sqrt();
    let scale = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if norm <= tol * (T::one() + scale) {
        return false;
    }
    basis.push(r.into_iter().map(|x| x / norm).collect());
    true
}
