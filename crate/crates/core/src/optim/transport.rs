//! Balanced transportation problems between two weight vectors.

use serde::{Deserialize, Serialize};

use super::simplex::solve_lp;
use super::{LinearProgram, RowSense, Solution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An optimal coupling: `(source, target, mass)` triples with positive mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransportPlan<T> {
    pub flows: Vec<(usize, usize, T)>,
    pub total_mass: T,
    pub cost: T,
}

impl<T: Scalar> TransportPlan<T> {
    /// Row and column sums of the plan.
    pub fn marginals(&self, n: usize, m: usize) -> (Vec<T>, Vec<T>) {
        let mut rows = vec![T::zero(); n];
        let mut cols = vec![T::zero(); m];
        for &(i, j, w) in &self.flows {
            rows[i] = rows[i] + w;
            cols[j] = cols[j] + w;
        }
        (rows, cols)
    }
}

fn check<T: Scalar>(supply: &[T], demand: &[T], cost: &[Vec<T>]) -> Result<T> {
    if supply.is_empty() || demand.is_empty() {
        return Err(Error::EmptySupport);
    }
    if cost.len() != supply.len() {
        return Err(Error::DimMismatch {
            expected: supply.len(),
            found: cost.len(),
        });
    }
    if let Some(r) = cost.iter().find(|r| r.len() != demand.len()) {
        return Err(Error::DimMismatch {
            expected: demand.len(),
            found: r.len(),
        });
    }
    if let Some(&w) = supply.iter().chain(demand).find(|w| **w < T::zero()) {
        return Err(Error::NegativeWeight(w.as_f64()));
    }
    if cost
        .iter()
        .flatten()
        .any(|c| !c.is_finite() || *c < T::zero())
    {
        return Err(Error::Malformed(
            "transport costs must be finite and nonnegative".into(),
        ));
    }
    let s: T = supply.iter().copied().sum();
    let d: T = demand.iter().copied().sum();
    if (s - d).abs() > T::tol(1e-9) * (T::one() + s) {
        return Err(Error::Malformed(format!(
            "unbalanced transport: {s} vs {d}"
        )));
    }
    Ok(s)
}

/// Successive shortest augmenting paths with Dijkstra on reduced costs.
/// Dense graph: super source, sources, targets, super sink.
pub fn solve_transport<T: Scalar>(
    supply: &[T],
    demand: &[T],
    cost: &[Vec<T>],
) -> Result<TransportPlan<T>> {
    let total = check(supply, demand, cost)?;
    let n = supply.len();
    let m = demand.len();
    let mass_tol = T::tol(1e-15) * (T::one() + total);
    let mut left: Vec<T> = supply.to_vec();
    let mut need: Vec<T> = demand.to_vec();
    let mut flow = vec![vec![T::zero(); m]; n];
    // node layout: 0 = source, 1..=n sources, n+1..=n+m targets, n+m+1 sink
    let nv = n + m + 2;
    let sink = nv - 1;
    let mut pot = vec![T::zero(); nv];
    let inf = T::infinity();
    let max_aug = 4 * (n + m) * (n + m) + 16;
    let mut rounds = 0;
    while left.iter().any(|&l| l > mass_tol) {
        rounds += 1;
        if rounds > max_aug {
            return Err(Error::NumericalFailure(
                "transport augmentation cap reached".into(),
            ));
        }
        let mut dist = vec![inf; nv];
        let mut prev = vec![usize::MAX; nv];
        let mut done = vec![false; nv];
        dist[0] = T::zero();
        loop {
            let mut u = usize::MAX;
            let mut best = inf;
            for v in 0..nv {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX || u == sink {
                break;
            }
            done[u] = true;
            let du = dist[u];
            let relax = |v: usize, c: T, dist: &mut [T], prev: &mut [usize]| {
                let rc = (c + pot[u] - pot[v]).max(T::zero());
                if du + rc < dist[v] {
                    dist[v] = du + rc;
                    prev[v] = u;
                }
            };
            if u == 0 {
                for i in 0..n {
                    if left[i] > mass_tol {
                        relax(1 + i, T::zero(), &mut dist, &mut prev);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    relax(1 + n + j, cost[i][j], &mut dist, &mut prev);
                }
            } else {
                let j = u - 1 - n;
                for i in 0..n {
                    if flow[i][j] > T::zero() {
                        relax(1 + i, -cost[i][j], &mut dist, &mut prev);
                    }
                }
                if need[j] > mass_tol {
                    relax(sink, T::zero(), &mut dist, &mut prev);
                }
            }
        }
        if dist[sink] == inf {
            let rest: T = left.iter().copied().sum();
            if rest <= T::tol(1e-9) * (T::one() + total) {
                break;
            }
            return Err(Error::NumericalFailure(
                "no augmenting path in transport".into(),
            ));
        }
        let dt = dist[sink];
        for v in 0..nv {
            pot[v] = pot[v] + dist[v].min(dt);
        }
        // bottleneck along the path
        let mut path = vec![sink];
        let mut v = sink;
        while v != 0 {
            v = prev[v];
            path.push(v);
        }
        path.reverse();
        let first = path[1] - 1;
        let last = path[path.len() - 2] - 1 - n;
        let mut delta = left[first].min(need[last]);
        for w in path[1..path.len() - 1].windows(2) {
            if w[0] > n {
                // target -> source along a reverse edge
                delta = delta.min(flow[w[1] - 1][w[0] - 1 - n]);
            }
        }
        for w in path[1..path.len() - 1].windows(2) {
            if w[0] > n {
                let (i, j) = (w[1] - 1, w[0] - 1 - n);
                flow[i][j] = flow[i][j] - delta;
                if flow[i][j] <= mass_tol {
                    flow[i][j] = T::zero();
                }
            } else {
                let (i, j) = (w[0] - 1, w[1] - 1 - n);
                flow[i][j] = flow[i][j] + delta;
            }
        }
        left[first] = left[first] - delta;
        need[last] = need[last] - delta;
    }
    Ok(plan_from(flow, total, cost))
}

fn plan_from<T: Scalar>(flow: Vec<Vec<T>>, total: T, cost: &[Vec<T>]) -> TransportPlan<T> {
    let mut flows = Vec::new();
    let mut value = T::zero();
    for (i, row) in flow.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > T::zero() {
                flows.push((i, j, w));
                value = value + w * cost[i][j];
            }
        }
    }
    TransportPlan {
        flows,
        total_mass: total,
        cost: value,
    }
}

/// Reference route: the transportation LP handed to the simplex solver.
pub fn transport_by_simplex<T: Scalar>(
    supply: &[T],
    demand: &[T],
    cost: &[Vec<T>],
) -> Result<TransportPlan<T>> {
    let total = check(supply, demand, cost)?;
    let n = supply.len();
    let m = demand.len();
    let objective: Vec<T> = cost.iter().flatten().copied().collect();
    let mut rows = Vec::with_capacity(n + m);
    for i in 0..n {
        let mut r = vec![T::zero(); n * m];
        r[i * m..(i + 1) * m].iter_mut().for_each(|v| *v = T::one());
        rows.push(r);
    }
    for j in 0..m {
        let mut r = vec![T::zero(); n * m];
        for i in 0..n {
            r[i * m + j] = T::one();
        }
        rows.push(r);
    }
    let rhs: Vec<T> = supply.iter().chain(demand).copied().collect();
    let lp = LinearProgram::new(objective, rows, rhs, vec![RowSense::Eq; n + m])?;
    let Solution::Optimal { point, .. } = solve_lp(&lp)? else {
        return Err(Error::NumericalFailure(
            "transport LP not solved to optimality".into(),
        ));
    };
    let flow: Vec<Vec<T>> = point
        .chunks(m)
        .map(|r| r.iter().map(|&w| w.max(T::zero())).collect())
        .collect();
    Ok(plan_from(flow, total, cost))
}
