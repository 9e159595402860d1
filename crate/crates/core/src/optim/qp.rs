//! Strictly convex quadratic programs `min y^T D y + q^T y  s.t.  A y <= h`
//! and their mixed-integer extension.

use super::milp::IntegerBox;
use super::simplex::solve_lp;
use super::{LinearProgram, RowSense, Solution, VarBound};
use crate::error::{Error, Result};
use crate::linalg::{extend_orthonormal, solve, symmetric_eigenvalues};
use crate::scalar::{dot, Scalar};

/// Largest constraint count the KKT-subset enumeration accepts.
pub const KKT_ENUMERATION_LIMIT: usize = 20;
const NODE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMixedProgram<T> {
    /// Symmetric positive definite quadratic form.
    pub d: Vec<Vec<T>>,
    pub linear: Vec<T>,
    /// Rows of `A` in `A y <= h`.
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub integers: IntegerBox,
}

impl<T: Scalar> QuadraticMixedProgram<T> {
    /// Validates shapes, symmetry (within 1e-12) and positive definiteness
    /// (smallest eigenvalue above 1e-10).
    pub fn new(
        d: Vec<Vec<T>>,
        linear: Vec<T>,
        rows: Vec<Vec<T>>,
        rhs: Vec<T>,
        integers: IntegerBox,
    ) -> Result<Self> {
        let n = linear.len();
        check_pd(&d, n)?;
        if rows.len() != rhs.len() {
            return Err(Error::Malformed("row/rhs count mismatch".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimMismatch {
                expected: n,
                found: r.len(),
            });
        }
        integers.validate(n)?;
        Ok(QuadraticMixedProgram {
            d,
            linear,
            rows,
            rhs,
            integers,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, y: &[T]) -> T {
        quad_value(&self.d, &self.linear, y)
    }
}

pub(crate) fn check_pd<T: Scalar>(d: &[Vec<T>], n: usize) -> Result<()> {
    if d.len() != n || d.iter().any(|r| r.len() != n) {
        return Err(Error::DimMismatch {
            expected: n,
            found: d.len(),
        });
    }
    let sym_tol = T::tol(1e-12);
    for i in 0..n {
        for j in 0..i {
            if (d[i][j] - d[j][i]).abs() > sym_tol {
                return Err(Error::Malformed("quadratic form is not symmetric".into()));
            }
        }
    }
    if n > 0 {
        let min_ev = symmetric_eigenvalues(d)[0];
        if !(min_ev > T::lit(1e-10)) {
            return Err(Error::Malformed(format!(
                "quadratic form is not positive definite (smallest eigenvalue {min_ev})"
            )));
        }
    }
    Ok(())
}

fn quad_value<T: Scalar>(d: &[Vec<T>], q: &[T], y: &[T]) -> T {
    let quad: T = d.iter().zip(y).map(|(row, &yi)| yi * dot(row, y)).sum();
    quad + dot(q, y)
}

/// Solves the equality-constrained KKT system for the working rows `w`:
/// `[2D A_w^T; A_w 0] [y; lambda] = [-q; h_w]`.
fn kkt_solve<T: Scalar>(
    d: &[Vec<T>],
    q: &[T],
    rows: &[Vec<T>],
    rhs_w: &[T],
    w: &[usize],
) -> Option<(Vec<T>, Vec<T>)> {
    let n = q.len();
    let k = w.len();
    let two = T::lit(2.0);
    let mut m = vec![vec![T::zero(); n + k]; n + k];
    let mut b = vec![T::zero(); n + k];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = two * d[i][j];
        }
        b[i] = -q[i];
    }
    for (r, &wi) in w.iter().enumerate() {
        for j in 0..n {
            m[n + r][j] = rows[wi][j];
            m[j][n + r] = rows[wi][j];
        }
        b[n + r] = rhs_w[r];
    }
    let x = solve(&m, &b, T::tol(1e-13))?;
    Some((x[..n].to_vec(), x[n..].to_vec()))
}

/// Primal active-set method started from a feasible point found by
/// simplex phase 1.
pub fn solve_convex_qp<T: Scalar>(
    d: &[Vec<T>],
    q: &[T],
    rows: &[Vec<T>],
    rhs: &[T],
) -> Result<Solution<T>> {
    let n = q.len();
    let feas_tol = T::tol(1e-9);
    let mut y = if rows.is_empty() {
        vec![T::zero(); n]
    } else {
        let mut lp = LinearProgram::new(
            vec![T::zero(); n],
            rows.to_vec(),
            rhs.to_vec(),
            vec![RowSense::Le; rows.len()],
        )?;
        lp.bounds = vec![VarBound::free(); n];
        match solve_lp(&lp)? {
            Solution::Optimal { point, .. } => point,
            _ => return Ok(Solution::Infeasible),
        }
    };

    let dep_tol = T::tol(1e-10);
    let mut working: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<T>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if working.len() == n {
            break;
        }
        let slack = rhs[i] - dot(row, &y);
        if slack.abs() <= feas_tol * (T::one() + rhs[i].abs())
            && extend_orthonormal(&mut basis, row, dep_tol)
        {
            working.push(i);
        }
    }

    let step_tol = T::tol(1e-12);
    let piv_tol = T::tol(1e-14);
    let max_iter = 50 * (rows.len() + n) + 1000;
    for _ in 0..max_iter {
        // Minimizer of the objective on the affine set of the working rows,
        // written as y + p.
        let hw: Vec<T> = working.iter().map(|&i| dot(&rows[i], &y)).collect();
        let Some((target, lambda)) = kkt_solve(d, q, rows, &hw, &working) else {
            return Err(Error::NumericalFailure("singular KKT system".into()));
        };
        let p: Vec<T> = target.iter().zip(&y).map(|(&t, &v)| t - v).collect();
        let pnorm = p.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let ynorm = y.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        if pnorm <= step_tol * (T::one() + ynorm) {
            // Stationary on the working set: check multiplier signs.
            let mut drop: Option<(usize, T)> = None;
            for (r, &l) in lambda.iter().enumerate() {
                if l < -T::tol(1e-12) && drop.is_none_or(|(_, dl)| l < dl) {
                    drop = Some((r, l));
                }
            }
            match drop {
                None => {
                    let value = quad_value(d, q, &y);
                    return Ok(Solution::Optimal { value, point: y });
                }
                Some((r, _)) => {
                    working.remove(r);
                }
            }
            continue;
        }
        let mut alpha = T::one();
        let mut blocking: Option<usize> = None;
        for (i, row) in rows.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap = dot(row, &p);
            if ap > piv_tol {
                let a_i = ((rhs[i] - dot(row, &y)) / ap).max(T::zero());
                if a_i < alpha {
                    alpha = a_i;
                    blocking = Some(i);
                }
            }
        }
        for (v, &pi) in y.iter_mut().zip(&p) {
            *v = *v + alpha * pi;
        }
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::NumericalFailure(
        "active-set iteration cap reached".into(),
    ))
}

/// Enumerates candidate active sets by increasing size and returns the
/// first KKT point (the unique optimum of a strictly convex program).
pub fn solve_qp_by_kkt_enumeration<T: Scalar>(
    d: &[Vec<T>],
    q: &[T],
    rows: &[Vec<T>],
    rhs: &[T],
) -> Result<Solution<T>> {
    let k = rows.len();
    if k > KKT_ENUMERATION_LIMIT {
        return Err(Error::ConstraintLimitExceeded {
            found: k,
            limit: KKT_ENUMERATION_LIMIT,
        });
    }
    let n = q.len();
    let feas_tol = T::tol(1e-9);
    let mult_tol = T::tol(1e-10);
    for size in 0..=k.min(n) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let hw: Vec<T> = subset.iter().map(|&i| rhs[i]).collect();
            if let Some((y, lambda)) = kkt_solve(d, q, rows, &hw, &subset) {
                let dual_ok = lambda.iter().all(|&l| l >= -mult_tol);
                let primal_ok = rows
                    .iter()
                    .zip(rhs)
                    .all(|(r, &h)| dot(r, &y) <= h + feas_tol * (T::one() + h.abs()));
                if dual_ok && primal_ok {
                    let value = quad_value(d, q, &y);
                    return Ok(Solution::Optimal { value, point: y });
                }
            }
            // next combination in lexicographic order
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if subset[i] < k - size + i {
                    subset[i] += 1;
                    for j in i + 1..size {
                        subset[j] = subset[j - 1] + 1;
                    }
                    i = usize::MAX;
                    break;
                }
            }
            if i != usize::MAX {
                break;
            }
        }
    }
    Ok(Solution::Infeasible)
}

type QpSolver<T> = fn(&[Vec<T>], &[T], &[Vec<T>], &[T]) -> Result<Solution<T>>;

/// Solves the continuous problem left after fixing the integer variables to
/// `values`, returning the full point.
pub(crate) fn fix_integers<T: Scalar>(
    qmp: &QuadraticMixedProgram<T>,
    values: &[T],
    solver: QpSolver<T>,
) -> Result<Solution<T>> {
    let n = qmp.num_vars();
    let mut fixed: Vec<Option<T>> = vec![None; n];
    for (&j, &v) in qmp.integers.vars.iter().zip(values) {
        fixed[j] = Some(v);
    }
    let cont: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let full = |yc: &[T]| -> Vec<T> {
        let mut y: Vec<T> = fixed.iter().map(|v| v.unwrap_or(T::zero())).collect();
        for (&j, &v) in cont.iter().zip(yc) {
            y[j] = v;
        }
        y
    };
    let base = full(&vec![T::zero(); cont.len()]);
    let two = T::lit(2.0);
    let dc: Vec<Vec<T>> = cont
        .iter()
        .map(|&i| cont.iter().map(|&j| qmp.d[i][j]).collect())
        .collect();
    let qc: Vec<T> = cont
        .iter()
        .map(|&i| qmp.linear[i] + two * dot(&qmp.d[i], &base))
        .collect();
    let rows_c: Vec<Vec<T>> = qmp
        .rows
        .iter()
        .map(|r| cont.iter().map(|&j| r[j]).collect())
        .collect();
    let rhs_c: Vec<T> = qmp
        .rows
        .iter()
        .zip(&qmp.rhs)
        .map(|(r, &h)| h - dot(r, &base))
        .collect();
    if cont.is_empty() {
        let tol = T::tol(1e-9);
        let ok = rhs_c.iter().all(|&s| s >= -tol * (T::one() + s.abs()));
        return Ok(if ok {
            Solution::Optimal {
                value: qmp.objective(&base),
                point: base,
            }
        } else {
            Solution::Infeasible
        });
    }
    match solver(&dc, &qc, &rows_c, &rhs_c)? {
        Solution::Optimal { point, .. } => {
            let y = full(&point);
            Ok(Solution::Optimal {
                value: qmp.objective(&y),
                point: y,
            })
        }
        other => Ok(other),
    }
}

/// Branch-and-bound with convex QP relaxations solved by the active-set
/// method; integer bounds enter the relaxations as rows.
pub fn solve_miqp<T: Scalar>(qmp: &QuadraticMixedProgram<T>) -> Result<Solution<T>> {
    let n = qmp.num_vars();
    let vars = &qmp.integers.vars;
    if vars.is_empty() {
        return solve_convex_qp(&qmp.d, &qmp.linear, &qmp.rows, &qmp.rhs);
    }
    let relax = |bounds: &[(i64, i64)]| {
        let mut rows = qmp.rows.clone();
        let mut rhs = qmp.rhs.clone();
        for (&j, &(lo, hi)) in vars.iter().zip(bounds) {
            let mut up = vec![T::zero(); n];
            up[j] = T::one();
            rows.push(up);
            rhs.push(T::lit(hi as f64));
            let mut down = vec![T::zero(); n];
            down[j] = -T::one();
            rows.push(down);
            rhs.push(T::lit(-(lo as f64)));
        }
        solve_convex_qp(&qmp.d, &qmp.linear, &rows, &rhs)
    };
    let int_tol = T::tol(1e-9);
    let mut incumbent: Option<(T, Vec<T>)> = None;
    let mut stack = vec![qmp.integers.bounds.clone()];
    let mut nodes = 0usize;
    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > NODE_CAP {
            return Err(Error::NumericalFailure(
                "branch-and-bound node cap reached".into(),
            ));
        }
        let Solution::Optimal { value, point } = relax(&node)? else {
            continue;
        };
        if let Some((best, _)) = &incumbent {
            if value >= *best - T::tol(1e-12) * (T::one() + best.abs()) {
                continue;
            }
        }
        let mut branch: Option<(usize, T)> = None;
        for (k, &j) in vars.iter().enumerate() {
            let frac = (point[j] - point[j].round()).abs();
            if frac > int_tol && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((k, frac));
            }
        }
        match branch {
            None => {
                let values: Vec<T> = vars.iter().map(|&j| point[j].round()).collect();
                if let Solution::Optimal { value, point } =
                    fix_integers(qmp, &values, solve_convex_qp)?
                {
                    if incumbent.as_ref().is_none_or(|(b, _)| value < *b) {
                        incumbent = Some((value, point));
                    }
                }
            }
            Some((k, _)) => {
                let fl = point[vars[k]].floor().to_i64().expect("integer in range");
                let (lo, hi) = node[k];
                let mut up = node.clone();
                up[k] = ((fl + 1).max(lo), hi);
                let mut down = node;
                down[k] = (lo, fl.min(hi));
                if up[k].0 <= up[k].1 {
                    stack.push(up);
                }
                if down[k].0 <= down[k].1 {
                    stack.push(down);
                }
            }
        }
    }
    Ok(match incumbent {
        Some((value, point)) => Solution::Optimal { value, point },
        None => Solution::Infeasible,
    })
}
