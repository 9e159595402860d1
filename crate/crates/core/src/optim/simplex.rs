//! Dense two-phase tableau simplex with Bland's rule.

use super::{LinearProgram, RowSense, Solution, PIVOT_CAP};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solution plus row multipliers for the original constraint rows.
///
/// Multipliers follow the convention `c - A^T u >= 0` on nonnegative
/// variables, so `u_i <= 0` on `<=` rows and `u_i >= 0` on `>=` rows of a
/// minimization. Multipliers of variable bounds are not reported.
#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome<T> {
    pub solution: Solution<T>,
    pub duals: Option<Vec<T>>,
}

pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<Solution<T>> {
    Ok(solve_lp_with_duals(lp)?.solution)
}

struct StdForm<T> {
    /// Per original variable: constant offset and `(std column, sign)` pairs.
    var_map: Vec<(T, Vec<(usize, T)>)>,
    cost: Vec<T>,
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    senses: Vec<RowSense>,
    /// Index of the original row, `None` for bound rows.
    origin: Vec<Option<usize>>,
}

fn standard_form<T: Scalar>(lp: &LinearProgram<T>) -> Option<StdForm<T>> {
    let mut var_map = Vec::with_capacity(lp.num_vars());
    let mut cost = Vec::new();
    let mut bound_rows: Vec<(usize, T)> = Vec::new();
    for (j, b) in lp.bounds.iter().enumerate() {
        let c = lp.objective[j];
        let k = cost.len();
        match (b.lower, b.upper) {
            (Some(l), Some(u)) => {
                if u < l {
                    return None;
                }
                cost.push(c);
                var_map.push((l, vec![(k, T::one())]));
                bound_rows.push((k, u - l));
            }
            (Some(l), None) => {
                cost.push(c);
                var_map.push((l, vec![(k, T::one())]));
            }
            (None, Some(u)) => {
                cost.push(-c);
                var_map.push((u, vec![(k, -T::one())]));
            }
            (None, None) => {
                cost.push(c);
                cost.push(-c);
                var_map.push((T::zero(), vec![(k, T::one()), (k + 1, -T::one())]));
            }
        }
    }
    let nstd = cost.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut senses = Vec::new();
    let mut origin = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let mut dense = vec![T::zero(); nstd];
        let mut b = lp.rhs[i];
        for (j, &a) in row.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            let (off, cols) = &var_map[j];
            b = b - a * *off;
            for &(k, s) in cols {
                dense[k] = dense[k] + a * s;
            }
        }
        rows.push(dense);
        rhs.push(b);
        senses.push(lp.senses[i]);
        origin.push(Some(i));
    }
    for (k, ub) in bound_rows {
        let mut dense = vec![T::zero(); nstd];
        dense[k] = T::one();
        rows.push(dense);
        rhs.push(ub);
        senses.push(RowSense::Le);
        origin.push(None);
    }
    Some(StdForm {
        var_map,
        cost,
        rows,
        rhs,
        senses,
        origin,
    })
}

struct Tableau<T> {
    /// `m` rows of `ncols + 1` entries, the last being the right-hand side.
    t: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    ncols: usize,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = T::one() / self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v = *v * inv;
        }
        self.t[r][c] = T::one();
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != T::zero() {
                for (v, &p) in row.iter_mut().zip(&prow) {
                    *v = *v - f * p;
                }
                row[c] = T::zero();
            }
        }
        let f = self.obj[c];
        if f != T::zero() {
            for (v, &p) in self.obj.iter_mut().zip(&prow) {
                *v = *v - f * p;
            }
            self.obj[c] = T::zero();
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs Bland's rule over columns `< allowed`. Returns `Ok(false)` on an
    /// unbounded ray.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        let rc_tol = T::tol(1e-10);
        let piv_tol = T::tol(1e-11);
        loop {
            if self.pivots > PIVOT_CAP {
                return Err(Error::NumericalFailure("simplex pivot cap reached".into()));
            }
            let Some(c) = (0..allowed).find(|&j| self.obj[j] < -rc_tol) else {
                return Ok(true);
            };
            let rhs = self.ncols;
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[c] > piv_tol {
                    let ratio = row[rhs] / row[c];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr || (ratio == lr && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves the program and reconstructs row multipliers from the final basis.
pub fn solve_lp_with_duals<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpOutcome<T>> {
    lp.validate()?;
    let infeasible = LpOutcome {
        solution: Solution::Infeasible,
        duals: None,
    };
    let Some(sf) = standard_form(lp) else {
        return Ok(infeasible);
    };
    let m = sf.rows.len();
    let nstd = sf.cost.len();

    // Normalize to nonnegative right-hand sides.
    let mut rows = sf.rows;
    let mut rhs = sf.rhs;
    let mut senses = sf.senses;
    let mut flipped = vec![false; m];
    for i in 0..m {
        if rhs[i] < T::zero() {
            flipped[i] = true;
            rhs[i] = -rhs[i];
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
            senses[i] = match senses[i] {
                RowSense::Le => RowSense::Ge,
                RowSense::Ge => RowSense::Le,
                RowSense::Eq => RowSense::Eq,
            };
        }
    }
    let n_slack = senses.iter().filter(|s| **s != RowSense::Eq).count();
    let n_art = senses.iter().filter(|s| **s != RowSense::Le).count();
    let art_start = nstd + n_slack;
    let ncols = art_start + n_art;

    let mut t = vec![vec![T::zero(); ncols + 1]; m];
    let mut basis = vec![0; m];
    // Column that formed the identity for each row at the start.
    let mut init_col = vec![0; m];
    let (mut s, mut a) = (nstd, art_start);
    for i in 0..m {
        t[i][..nstd].copy_from_slice(&rows[i]);
        t[i][ncols] = rhs[i];
        match senses[i] {
            RowSense::Le => {
                t[i][s] = T::one();
                basis[i] = s;
                init_col[i] = s;
                s += 1;
            }
            RowSense::Ge => {
                t[i][s] = -T::one();
                s += 1;
                t[i][a] = T::one();
                basis[i] = a;
                init_col[i] = a;
                a += 1;
            }
            RowSense::Eq => {
                t[i][a] = T::one();
                basis[i] = a;
                init_col[i] = a;
                a += 1;
            }
        }
    }

    let mut tab = Tableau {
        t,
        obj: vec![T::zero(); ncols + 1],
        basis,
        ncols,
        pivots: 0,
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for j in art_start..ncols {
            tab.obj[j] = T::one();
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                for j in 0..=ncols {
                    tab.obj[j] = tab.obj[j] - tab.t[i][j];
                }
            }
        }
        tab.optimize(ncols)?;
        let scale = T::one() + rhs.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let infeas = -tab.obj[ncols];
        if infeas > T::tol(1e-9) * scale {
            return Ok(infeasible);
        }
        // Drive basic artificials out where possible; rows where that is
        // impossible are redundant and stay inert.
        let piv_tol = T::tol(1e-11);
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| tab.t[i][j].abs() > piv_tol) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    // Phase 2.
    tab.obj = vec![T::zero(); ncols + 1];
    tab.obj[..nstd].copy_from_slice(&sf.cost);
    for i in 0..m {
        let cb = if tab.basis[i] < nstd {
            sf.cost[tab.basis[i]]
        } else {
            T::zero()
        };
        if cb != T::zero() {
            for j in 0..=ncols {
                tab.obj[j] = tab.obj[j] - cb * tab.t[i][j];
            }
        }
    }
    if !tab.optimize(art_start)? {
        return Ok(LpOutcome {
            solution: Solution::Unbounded,
            duals: None,
        });
    }

    let mut xstd = vec![T::zero(); ncols];
    for i in 0..m {
        xstd[tab.basis[i]] = tab.t[i][ncols].max(T::zero());
    }
    let point: Vec<T> = sf
        .var_map
        .iter()
        .map(|(off, cols)| cols.iter().fold(*off, |acc, &(k, s)| acc + s * xstd[k]))
        .collect();
    let value = lp.objective.iter().zip(&point).map(|(&c, &y)| c * y).sum();

    let mut duals = vec![T::zero(); lp.rows.len()];
    for i in 0..m {
        if let Some(orig) = sf.origin[i] {
            let u = -tab.obj[init_col[i]];
            duals[orig] = if flipped[i] { -u } else { u };
        }
    }
    Ok(LpOutcome {
        solution: Solution::Optimal { value, point },
        duals: Some(duals),
    })
}
