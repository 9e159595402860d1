//! Branch-and-bound for mixed-integer linear programs and the lattice
//! enumeration oracle shared with the quadratic case.

use super::qp::{fix_integers, solve_qp_by_kkt_enumeration, QuadraticMixedProgram};
use super::simplex::solve_lp;
use super::{LinearProgram, Solution, VarBound};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lattice points an oracle is willing to enumerate.
pub const ORACLE_BOX_LIMIT: u128 = 1_000_000;
const NODE_CAP: usize = 2_000_000;

/// Integer variable indices with their finite inclusive bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerBox {
    pub vars: Vec<usize>,
    pub bounds: Vec<(i64, i64)>,
}

impl IntegerBox {
    pub fn new(vars: Vec<usize>, bounds: Vec<(i64, i64)>) -> Self {
        IntegerBox { vars, bounds }
    }

    pub fn empty() -> Self {
        IntegerBox {
            vars: vec![],
            bounds: vec![],
        }
    }

    pub fn validate(&self, nvars: usize) -> Result<()> {
        if self.vars.len() != self.bounds.len() {
            return Err(Error::Malformed(
                "integer index/bound count mismatch".into(),
            ));
        }
        let mut seen = vec![false; nvars];
        for &j in &self.vars {
            if j >= nvars || seen[j] {
                return Err(Error::Malformed(format!("bad integer index {j}")));
            }
            seen[j] = true;
        }
        if let Some((lo, hi)) = self.bounds.iter().find(|(lo, hi)| lo > hi) {
            return Err(Error::Malformed(format!(
                "integer bounds [{lo},{hi}] empty"
            )));
        }
        Ok(())
    }

    pub fn volume(&self) -> u128 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| (hi - lo + 1) as u128)
            .fold(1u128, |a, b| a.saturating_mul(b))
    }

    /// Calls `f` on every lattice point in lexicographic order; stops early
    /// when `f` returns an error.
    pub(crate) fn for_each_point<F>(&self, mut f: F) -> Result<()>
    where
        F: FnMut(&[i64]) -> Result<()>,
    {
        let mut cur: Vec<i64> = self.bounds.iter().map(|b| b.0).collect();
        loop {
            f(&cur)?;
            let mut k = cur.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                if cur[k] < self.bounds[k].1 {
                    cur[k] += 1;
                    for (c, b) in cur[k + 1..].iter_mut().zip(&self.bounds[k + 1..]) {
                        *c = b.0;
                    }
                    break;
                }
            }
        }
    }
}

/// A linear program in which the variables of `integers` must take integer
/// values inside their box.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerProgram<T> {
    pub lp: LinearProgram<T>,
    pub integers: IntegerBox,
}

impl<T: Scalar> MixedIntegerProgram<T> {
    pub fn new(lp: LinearProgram<T>, integers: IntegerBox) -> Result<Self> {
        lp.validate()?;
        integers.validate(lp.num_vars())?;
        Ok(MixedIntegerProgram { lp, integers })
    }

    fn with_integer_bounds(&self, bounds: &[(i64, i64)]) -> LinearProgram<T> {
        let mut lp = self.lp.clone();
        for (&j, &(lo, hi)) in self.integers.vars.iter().zip(bounds) {
            lp.bounds[j] = VarBound::range(T::lit(lo as f64), T::lit(hi as f64));
        }
        lp
    }
}

fn most_fractional<T: Scalar>(vars: &[usize], point: &[T]) -> Option<usize> {
    let tol = T::tol(1e-9);
    let mut best: Option<(usize, T)> = None;
    for (k, &j) in vars.iter().enumerate() {
        let frac = (point[j] - point[j].round()).abs();
        if frac > tol && best.is_none_or(|(_, f)| frac > f) {
            best = Some((k, frac));
        }
    }
    best.map(|(k, _)| k)
}

/// Depth-first branch-and-bound on LP relaxations. Branches on the most
/// fractional integer variable (lowest index on ties); integral nodes are
/// re-solved with the integers fixed.
pub fn solve_milp<T: Scalar>(mip: &MixedIntegerProgram<T>) -> Result<Solution<T>> {
    if mip.integers.vars.is_empty() {
        return solve_lp(&mip.lp);
    }
    let vars = &mip.integers.vars;
    let mut incumbent: Option<(T, Vec<T>)> = None;
    let mut stack = vec![mip.integers.bounds.clone()];
    let mut nodes = 0usize;
    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > NODE_CAP {
            return Err(Error::NumericalFailure(
                "branch-and-bound node cap reached".into(),
            ));
        }
        match solve_lp(&mip.with_integer_bounds(&node))? {
            Solution::Infeasible => continue,
            Solution::Unbounded => {
                let Some(k) = node.iter().position(|&(lo, hi)| lo < hi) else {
                    return Ok(Solution::Unbounded);
                };
                let (lo, hi) = node[k];
                let mid = lo + (hi - lo) / 2;
                let mut up = node.clone();
                up[k] = (mid + 1, hi);
                let mut down = node;
                down[k] = (lo, mid);
                stack.push(up);
                stack.push(down);
            }
            Solution::Optimal { value, point } => {
                if let Some((best, _)) = &incumbent {
                    if value >= *best - T::tol(1e-12) * (T::one() + best.abs()) {
                        continue;
                    }
                }
                match most_fractional(vars, &point) {
                    None => {
                        let fixed: Vec<(i64, i64)> = vars
                            .iter()
                            .map(|&j| {
                                let v = point[j].round().to_i64().expect("integer in range");
                                (v, v)
                            })
                            .collect();
                        if let Solution::Optimal { value, point } =
                            solve_lp(&mip.with_integer_bounds(&fixed))?
                        {
                            if incumbent.as_ref().is_none_or(|(b, _)| value < *b) {
                                incumbent = Some((value, point));
                            }
                        }
                    }
                    Some(k) => {
                        let v = point[vars[k]];
                        let fl = v.floor().to_i64().expect("integer in range");
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
        }
    }
    Ok(match incumbent {
        Some((value, point)) => Solution::Optimal { value, point },
        None => Solution::Infeasible,
    })
}

/// Problems the lattice oracle accepts.
#[derive(Debug, Clone, Copy)]
pub enum OracleProblem<'a, T> {
    Linear(&'a MixedIntegerProgram<T>),
    Quadratic(&'a QuadraticMixedProgram<T>),
}

/// Ground truth by full enumeration of the integer box, solving the
/// continuous problem for every assignment (simplex for the linear case,
/// KKT-subset enumeration for the quadratic one).
pub fn enumerate_oracle<T: Scalar>(problem: OracleProblem<'_, T>) -> Result<Solution<T>> {
    let ints = match problem {
        OracleProblem::Linear(m) => &m.integers,
        OracleProblem::Quadratic(q) => &q.integers,
    };
    let volume = ints.volume();
    if volume > ORACLE_BOX_LIMIT {
        return Err(Error::BoxTooLarge {
            volume,
            limit: ORACLE_BOX_LIMIT,
        });
    }
    let mut best: Option<(T, Vec<T>)> = None;
    let mut unbounded = false;
    ints.for_each_point(|pt| {
        let sol = match problem {
            OracleProblem::Linear(m) => {
                let fixed: Vec<(i64, i64)> = pt.iter().map(|&v| (v, v)).collect();
                solve_lp(&m.with_integer_bounds(&fixed))?
            }
            OracleProblem::Quadratic(q) => {
                let values: Vec<T> = pt.iter().map(|&v| T::lit(v as f64)).collect();
                fix_integers(q, &values, solve_qp_by_kkt_enumeration)?
            }
        };
        match sol {
            Solution::Optimal { value, point } => {
                if best.as_ref().is_none_or(|(b, _)| value < *b) {
                    best = Some((value, point));
                }
            }
            Solution::Unbounded => unbounded = true,
            Solution::Infeasible => {}
        }
        Ok(())
    })?;
    if unbounded {
        return Ok(Solution::Unbounded);
    }
    Ok(match best {
        Some((value, point)) => Solution::Optimal { value, point },
        None => Solution::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::super::RowSense;
    use super::*;

    fn ceil_mip(rhs: f64) -> MixedIntegerProgram<f64> {
        let lp = LinearProgram::new(
            vec![0.0, 1.0],
            vec![vec![-1.0, 1.0]],
            vec![rhs],
            vec![RowSense::Eq],
        )
        .unwrap();
        MixedIntegerProgram::new(lp, IntegerBox::new(vec![1], vec![(0, 10)])).unwrap()
    }

    #[test]
    fn ceiling_examples() {
        let m = ceil_mip(1.2);
        assert_eq!(solve_milp(&m).unwrap().value(), Some(2.0));
        assert_eq!(
            enumerate_oracle(OracleProblem::Linear(&m)).unwrap().value(),
            Some(2.0)
        );
        let m = ceil_mip(-3.0);
        let sol = solve_milp(&m).unwrap();
        assert_eq!(sol.value(), Some(0.0));
        assert_eq!(sol.point().unwrap(), &[3.0, 0.0]);
    }

    #[test]
    fn no_integers_delegates_to_lp() {
        let lp = LinearProgram::new(
            vec![1.0, 1.0],
            vec![vec![1.0, -1.0]],
            vec![1.5],
            vec![RowSense::Eq],
        )
        .unwrap();
        let m = MixedIntegerProgram::new(lp.clone(), IntegerBox::empty()).unwrap();
        assert_eq!(solve_milp(&m).unwrap(), solve_lp(&lp).unwrap());
        assert_eq!(
            enumerate_oracle(OracleProblem::Linear(&m)).unwrap(),
            solve_lp(&lp).unwrap()
        );
    }

    #[test]
    fn infeasible_lattice() {
        // 2 y = 1 with y integer
        let lp =
            LinearProgram::new(vec![1.0], vec![vec![2.0]], vec![1.0], vec![RowSense::Eq]).unwrap();
        let m = MixedIntegerProgram::new(lp, IntegerBox::new(vec![0], vec![(0, 5)])).unwrap();
        assert_eq!(solve_milp(&m).unwrap(), Solution::Infeasible);
        assert_eq!(
            enumerate_oracle(OracleProblem::Linear(&m)).unwrap(),
            Solution::Infeasible
        );
    }

    #[test]
    fn unbounded_continuous_direction() {
        // min -y0 with y1 integer, y0 - y1 >= 0
        let lp = LinearProgram::new(
            vec![-1.0, 0.0],
            vec![vec![1.0, -1.0]],
            vec![0.0],
            vec![RowSense::Ge],
        )
        .unwrap();
        let m = MixedIntegerProgram::new(lp, IntegerBox::new(vec![1], vec![(0, 3)])).unwrap();
        assert_eq!(solve_milp(&m).unwrap(), Solution::Unbounded);
        assert_eq!(
            enumerate_oracle(OracleProblem::Linear(&m)).unwrap(),
            Solution::Unbounded
        );
    }

    #[test]
    fn box_validation_and_limit() {
        let lp = LinearProgram::new(vec![1.0; 3], vec![], vec![], vec![]).unwrap();
        assert!(
            MixedIntegerProgram::new(lp.clone(), IntegerBox::new(vec![3], vec![(0, 1)])).is_err()
        );
        assert!(
            MixedIntegerProgram::new(lp.clone(), IntegerBox::new(vec![0], vec![(2, 1)])).is_err()
        );
        let m = MixedIntegerProgram::new(
            lp,
            IntegerBox::new(vec![0, 1, 2], vec![(0, 100), (0, 100), (0, 100)]),
        )
        .unwrap();
        assert!(matches!(
            enumerate_oracle(OracleProblem::Linear(&m)),
            Err(Error::BoxTooLarge { .. })
        ));
    }

    #[test]
    fn lattice_iteration_order() {
        let b = IntegerBox::new(vec![0, 1], vec![(0, 1), (5, 6)]);
        let mut seen = vec![];
        b.for_each_point(|p| {
            seen.push(p.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0, 5], vec![0, 6], vec![1, 5], vec![1, 6]]);
        assert_eq!(b.volume(), 4);
    }
}
