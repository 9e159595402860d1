//! Probability metrics between finitely supported measures and
//! uniform-integrability diagnostics for families of them.
//!
//! Every metric orders its two arguments canonically before computing, so
//! `d(mu, nu)` and `d(nu, mu)` run the same arithmetic and agree bit for bit.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{lex_cmp, DiscreteMeasure, MERGE_TOL};
use crate::optim::{solve_transport, transport_by_simplex};
use crate::scalar::{euclidean_distance, euclidean_norm, Scalar};

fn same_dim<T: Scalar>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

fn measure_cmp<T: Scalar>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> Ordering {
    for (a, b) in mu.atoms().iter().zip(nu.atoms()) {
        let o = a
            .point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.as_f64().total_cmp(&y.as_f64()))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then(a.weight.as_f64().total_cmp(&b.weight.as_f64()));
        if o.is_ne() {
            return o;
        }
    }
    mu.len().cmp(&nu.len())
}

fn ordered<'a, T: Scalar>(
    mu: &'a DiscreteMeasure<T>,
    nu: &'a DiscreteMeasure<T>,
) -> (&'a DiscreteMeasure<T>, &'a DiscreteMeasure<T>) {
    if measure_cmp(mu, nu) == Ordering::Greater {
        (nu, mu)
    } else {
        (mu, nu)
    }
}

/// Union of the two supports with the signed weight `mu - nu` at each point.
fn signed_difference<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> (Vec<Vec<T>>, Vec<T>) {
    let (a, b) = (mu.atoms(), nu.atoms());
    let tol = T::lit(MERGE_TOL);
    let (mut i, mut j) = (0, 0);
    let mut points = Vec::with_capacity(a.len() + b.len());
    let mut diff = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        if i == a.len() {
            points.push(b[j].point.clone());
            diff.push(-b[j].weight);
            j += 1;
        } else if j == b.len() {
            points.push(a[i].point.clone());
            diff.push(a[i].weight);
            i += 1;
        } else {
            let close = a[i]
                .point
                .iter()
                .zip(&b[j].point)
                .all(|(&x, &y)| (x - y).abs() <= tol);
            if close {
                points.push(a[i].point.clone());
                diff.push(a[i].weight - b[j].weight);
                i += 1;
                j += 1;
            } else if lex_cmp(&a[i].point, &b[j].point) == Ordering::Less {
                points.push(a[i].point.clone());
                diff.push(a[i].weight);
                i += 1;
            } else {
                points.push(b[j].point.clone());
                diff.push(-b[j].weight);
                j += 1;
            }
        }
    }
    (points, diff)
}

/// Transport between the positive and negative parts of `mu - nu` under
/// `cost(i, j)` on union-support indices. Only valid for costs that
/// satisfy the triangle inequality.
fn cancelled_transport<T, C>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>, cost: C) -> Result<T>
where
    T: Scalar,
    C: Fn(&[Vec<T>], usize, usize) -> T,
{
    let (points, diff) = signed_difference(mu, nu);
    let pos: Vec<usize> = (0..diff.len()).filter(|&k| diff[k] > T::zero()).collect();
    let neg: Vec<usize> = (0..diff.len()).filter(|&k| diff[k] < T::zero()).collect();
    if pos.is_empty() || neg.is_empty() {
        return Ok(T::zero());
    }
    let supply: Vec<T> = pos.iter().map(|&k| diff[k]).collect();
    let demand: Vec<T> = neg.iter().map(|&k| -diff[k]).collect();
    let c: Vec<Vec<T>> = pos
        .iter()
        .map(|&i| neg.iter().map(|&j| cost(&points, i, j)).collect())
        .collect();
    Ok(solve_transport(&supply, &demand, &c)?.cost)
}

/// Bounded-Lipschitz distance `sup { int f d(mu - nu) : |f| <= 1, Lip(f) <= 1 }`.
///
/// Computed as the Kantorovich dual: optimal transport of `mu - nu` under
/// the truncated metric `min(||x - y||, 2)`.
pub fn bounded_lipschitz<T: Scalar>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> Result<T> {
    same_dim(mu, nu)?;
    let (mu, nu) = ordered(mu, nu);
    if mu.dim() == 1 {
        let (points, diff) = signed_difference(mu, nu);
        return Ok(bounded_lipschitz_on_line(&points, &diff));
    }
    let two = T::lit(2.0);
    cancelled_transport(mu, nu, |p, i, j| euclidean_distance(&p[i], &p[j]).min(two))
}

#[derive(Clone, Copy)]
struct SlopeKey<T>(T);

impl<T: Scalar> PartialEq for SlopeKey<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for SlopeKey<T> {}

impl<T: Scalar> PartialOrd for SlopeKey<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for SlopeKey<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.as_f64().total_cmp(&other.0.as_f64())
    }
}

/// Exact dual on sorted scalar points: maximize `sum s_k f_k` over
/// `|f_k| <= 1`, `|f_{k+1} - f_k| <= t_{k+1} - t_k`.
///
/// The value function `V_k(v)` of the prefix problem with `f_k = v` is
/// concave on `[-1, 1]` and is kept as segment lengths keyed by slope
/// (shifted by a running offset) together with `V_k(-1)`. Relaxing by a
/// gap `d` inserts a flat piece of length `2d` at the peak and trims `d`
/// from each end; adding `s v` moves every slope by `s`.
fn bounded_lipschitz_on_line<T: Scalar>(points: &[Vec<T>], diff: &[T]) -> T {
    let mut segments: BTreeMap<SlopeKey<T>, T> = BTreeMap::new();
    segments.insert(SlopeKey(T::zero()), T::lit(2.0));
    let mut offset = T::zero();
    let mut at_left = T::zero();
    for k in 0..points.len() {
        if k > 0 {
            let d = points[k][0] - points[k - 1][0];
            if d > T::zero() {
                let flat = segments.entry(SlopeKey(-offset)).or_insert(T::zero());
                *flat = *flat + d + d;
                let mut rest = d;
                while rest > T::zero() {
                    let Some(mut e) = segments.last_entry() else {
                        break;
                    };
                    let take = rest.min(*e.get());
                    at_left = at_left + (e.key().0 + offset) * take;
                    rest = rest - take;
                    if take == *e.get() {
                        e.remove();
                    } else {
                        let left = *e.get() - take;
                        *e.get_mut() = left;
                    }
                }
                let mut rest = d;
                while rest > T::zero() {
                    let Some(mut e) = segments.first_entry() else {
                        break;
                    };
                    let take = rest.min(*e.get());
                    rest = rest - take;
                    if take == *e.get() {
                        e.remove();
                    } else {
                        let left = *e.get() - take;
                        *e.get_mut() = left;
                    }
                }
            }
        }
        offset = offset + diff[k];
        at_left = at_left - diff[k];
    }
    let rise: T = segments
        .iter()
        .map(|(s, &len)| (s.0 + offset).max(T::zero()) * len)
        .sum();
    (at_left + rise).max(T::zero())
}

fn check_order<T: Scalar>(q: T) -> Result<()> {
    if !(q >= T::one()) || !q.is_finite() {
        return Err(Error::OutOfRange(format!(
            "metric order q = {q} must be >= 1"
        )));
    }
    Ok(())
}

/// Wasserstein distance of order `q >= 1`. One-dimensional measures use the
/// quantile coupling, higher dimensions an optimal transport plan.
pub fn wasserstein<T: Scalar>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>, q: T) -> Result<T> {
    same_dim(mu, nu)?;
    check_order(q)?;
    let (mu, nu) = ordered(mu, nu);
    if mu.dim() == 1 {
        return Ok(quantile_integral(mu, nu, q).powf(q.recip()));
    }
    let supply: Vec<T> = mu.atoms().iter().map(|a| a.weight).collect();
    let demand: Vec<T> = nu.atoms().iter().map(|a| a.weight).collect();
    let cost = power_costs(mu, nu, q);
    Ok(solve_transport(&supply, &demand, &cost)?
        .cost
        .max(T::zero())
        .powf(q.recip()))
}

/// Wasserstein distance through the transportation LP and the simplex
/// solver, in any dimension. Slow; meant as a cross-check.
pub fn wasserstein_lp<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    q: T,
) -> Result<T> {
    same_dim(mu, nu)?;
    check_order(q)?;
    let supply: Vec<T> = mu.atoms().iter().map(|a| a.weight).collect();
    let demand: Vec<T> = nu.atoms().iter().map(|a| a.weight).collect();
    let cost = power_costs(mu, nu, q);
    Ok(transport_by_simplex(&supply, &demand, &cost)?
        .cost
        .max(T::zero())
        .powf(q.recip()))
}

fn power_costs<T: Scalar>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>, q: T) -> Vec<Vec<T>> {
    mu.atoms()
        .iter()
        .map(|a| {
            nu.atoms()
                .iter()
                .map(|b| euclidean_distance(&a.point, &b.point).powf(q))
                .collect()
        })
        .collect()
}

/// `int_0^1 |F_mu^-1(b) - F_nu^-1(b)|^q db`, exact on step quantile functions.
fn quantile_integral<T: Scalar>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>, q: T) -> T {
    let (a, b) = (mu.atoms(), nu.atoms());
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (a[0].weight, b[0].weight);
    let mut prev = T::zero();
    let mut acc = T::zero();
    loop {
        let next = ca.min(cb);
        let gap = (a[i].point[0] - b[j].point[0]).abs();
        if gap > T::zero() {
            acc = acc + (next - prev) * gap.powf(q);
        }
        prev = next;
        if ca <= next {
            i += 1;
            if i == a.len() {
                break;
            }
            ca = ca + a[i].weight;
        }
        if cb <= next {
            j += 1;
            if j == b.len() {
                break;
            }
            cb = cb + b[j].weight;
        }
    }
    acc
}

/// Fortet-Mourier distance of order `q >= 1`: minimal transshipment of
/// `mu - nu` under `||x - y|| max(1, ||x||^(q-1), ||y||^(q-1))`, with the
/// cost closed under relays through the union support.
pub fn fortet_mourier<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    q: T,
) -> Result<T> {
    same_dim(mu, nu)?;
    check_order(q)?;
    let (mu, nu) = ordered(mu, nu);
    let (points, diff) = signed_difference(mu, nu);
    if diff.iter().all(|&w| w == T::zero()) {
        return Ok(T::zero());
    }
    let qm1 = q - T::one();
    let scale: Vec<T> = points
        .iter()
        .map(|p| euclidean_norm(p).powf(qm1).max(T::one()))
        .collect();
    let n = points.len();
    let mut c = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean_distance(&points[i], &points[j]) * scale[i].max(scale[j]);
            c[i][j] = v;
            c[j][i] = v;
        }
    }
    if q > T::one() {
        for k in 0..n {
            for i in 0..n {
                let cik = c[i][k];
                for j in 0..n {
                    let via = cik + c[k][j];
                    if via < c[i][j] {
                        c[i][j] = via;
                    }
                }
            }
        }
    }
    cancelled_transport(mu, nu, |_, i, j| c[i][j])
}

/// `bounded_lipschitz(mu, nu) + |moment(mu, q) - moment(nu, q)|`.
pub fn psi_metric<T: Scalar>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>, q: T) -> Result<T> {
    same_dim(mu, nu)?;
    if !(q > T::zero()) {
        return Err(Error::OutOfRange(format!(
            "gauge exponent q = {q} must be positive"
        )));
    }
    let (mu, nu) = ordered(mu, nu);
    Ok(bounded_lipschitz(mu, nu)? + (mu.moment(q) - nu.moment(q)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MomentCertificate<T> {
    pub epsilon: T,
    pub kappa: T,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UniformIntegrabilityReport<T> {
    pub q: T,
    pub a_grid: Vec<T>,
    /// `tails[k][g]`: tail functional of family member `k` at `a_grid[g]`.
    pub tails: Vec<Vec<T>>,
    pub sup_tail: Vec<T>,
    pub tolerance: T,
    pub verdict: bool,
    pub certificate: Option<MomentCertificate<T>>,
}

impl<T: Scalar> UniformIntegrabilityReport<T> {
    pub fn with_certificate(mut self, family: &[DiscreteMeasure<T>], epsilon: T, kappa: T) -> Self {
        self.certificate = Some(MomentCertificate {
            epsilon,
            kappa,
            holds: moment_bound_certificate(family, self.q, epsilon, kappa),
        });
        self
    }
}

/// Family-wide supremum of the `||.||^q` tail functional on `a_grid`. The
/// verdict passes when the supremum drops to `tolerance` at some grid point
/// and stays there.
pub fn diagnose_uniform_integrability<T: Scalar>(
    family: &[DiscreteMeasure<T>],
    q: T,
    a_grid: &[T],
    tolerance: T,
) -> Result<UniformIntegrabilityReport<T>> {
    let first = family.first().ok_or(Error::EmptySet)?;
    if let Some(m) = family.iter().find(|m| m.dim() != first.dim()) {
        return Err(Error::DimMismatch {
            expected: first.dim(),
            found: m.dim(),
        });
    }
    if !(q > T::zero()) {
        return Err(Error::OutOfRange(format!(
            "gauge exponent q = {q} must be positive"
        )));
    }
    if a_grid.is_empty() || a_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::OutOfRange(
            "threshold grid must be nonempty and increasing".into(),
        ));
    }
    let tails = family
        .iter()
        .map(|m| a_grid.iter().map(|&a| m.tail_functional(q, a)).collect())
        .collect::<Result<Vec<Vec<T>>>>()?;
    let sup_tail: Vec<T> = (0..a_grid.len())
        .map(|g| tails.iter().map(|t| t[g]).fold(T::zero(), T::max))
        .collect();
    let verdict = sup_tail.last().is_some_and(|&s| s <= tolerance);
    Ok(UniformIntegrabilityReport {
        q,
        a_grid: a_grid.to_vec(),
        tails,
        sup_tail,
        tolerance,
        verdict,
        certificate: None,
    })
}

/// True iff every member has `moment(., q + epsilon) <= kappa`. False for
/// nonpositive `epsilon` or `kappa`.
pub fn moment_bound_certificate<T: Scalar>(
    family: &[DiscreteMeasure<T>],
    q: T,
    epsilon: T,
    kappa: T,
) -> bool {
    if !(epsilon > T::zero() && kappa > T::zero()) {
        return false;
    }
    family.iter().all(|m| m.moment(q + epsilon) <= kappa)
}

/// `points` thresholds spaced geometrically from `lo` to `hi`.
pub fn geometric_grid<T: Scalar>(lo: T, hi: T, points: usize) -> Result<Vec<T>> {
    if !(lo > T::zero() && hi > lo) || points < 2 {
        return Err(Error::OutOfRange(format!(
            "geometric grid [{lo}, {hi}] with {points} points"
        )));
    }
    let step = (hi / lo).ln() / T::from_usize_lossy(points - 1);
    let mut g: Vec<T> = (0..points)
        .map(|k| lo * (step * T::from_usize_lossy(k)).exp())
        .collect();
    g[points - 1] = hi;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{solve_lp, LinearProgram, RowSense, Solution, VarBound};
    use proptest::prelude::*;

    fn d(pairs: &[(f64, f64)]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::from_scalars(pairs).unwrap()
    }

    fn dirac(x: f64) -> DiscreteMeasure<f64> {
        d(&[(x, 1.0)])
    }

    /// The defining supremum as an LP over function values on the union
    /// support: maximize sum f_k (mu_k - nu_k) with |f| <= 1 and
    /// |f_i - f_j| <= ||z_i - z_j||.
    fn bl_by_function_values(mu: &DiscreteMeasure<f64>, nu: &DiscreteMeasure<f64>) -> f64 {
        let (points, diff) = signed_difference(mu, nu);
        let n = points.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mut r = vec![0.0; n];
                    r[i] = 1.0;
                    r[j] = -1.0;
                    rows.push(r);
                    rhs.push(euclidean_distance(&points[i], &points[j]));
                }
            }
        }
        let senses = vec![RowSense::Le; rows.len()];
        let mut lp =
            LinearProgram::new(diff.iter().map(|w| -w).collect(), rows, rhs, senses).unwrap();
        for k in 0..n {
            lp = lp.with_bound(k, VarBound::range(-1.0, 1.0));
        }
        match solve_lp(&lp).unwrap() {
            Solution::Optimal { value, .. } => -value,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounded_lipschitz_examples() {
        assert_eq!(bounded_lipschitz(&dirac(0.0), &dirac(0.0)).unwrap(), 0.0);
        assert!((bounded_lipschitz(&dirac(0.0), &dirac(1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((bounded_lipschitz(&dirac(0.0), &dirac(3.0)).unwrap() - 2.0).abs() < 1e-15);
        assert!((bl_by_function_values(&dirac(0.0), &dirac(3.0)) - 2.0).abs() < 1e-12);
        let e = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            bounded_lipschitz(&dirac(0.0), &e),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn bounded_lipschitz_matches_function_value_lp() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let dim = rng.random_range(1..3);
            let mut draw = |n: usize| {
                DiscreteMeasure::canonicalize((0..n).map(|_| {
                    let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                    (p, rng.random_range(0.1..1.0))
                }))
                .unwrap()
            };
            let (mu, nu) = (draw(5), draw(6));
            let a = bounded_lipschitz(&mu, &nu).unwrap();
            let b = bl_by_function_values(&mu, &nu);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn line_dual_matches_truncated_transport() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let spread = rng.random_range(0.5..6.0);
            let mut draw = |n: usize| {
                DiscreteMeasure::canonicalize((0..n).map(|_| {
                    let x: f64 = rng.random_range(-spread..spread);
                    (vec![(x * 4.0).round() / 4.0], rng.random_range(0.1..1.0))
                }))
                .unwrap()
            };
            let (mu, nu) = (draw(25), draw(40));
            let fast = bounded_lipschitz(&mu, &nu).unwrap();
            let slow = cancelled_transport(&mu, &nu, |p, i, j| {
                euclidean_distance(&p[i], &p[j]).min(2.0)
            })
            .unwrap();
            assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        }
    }

    #[test]
    fn wasserstein_examples() {
        for q in [1.0, 2.0, 3.5] {
            assert!((wasserstein(&dirac(0.0), &dirac(1.0), q).unwrap() - 1.0).abs() < 1e-15);
        }
        let mu = d(&[(0.0, 0.5), (1.0, 0.5)]);
        let nu = dirac(0.5);
        assert!((wasserstein(&mu, &nu, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((wasserstein_lp(&mu, &nu, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(wasserstein(&mu, &mu, 2.0).unwrap(), 0.0);
        assert!(matches!(
            wasserstein(&mu, &nu, 0.5),
            Err(Error::OutOfRange(_))
        ));
        let p: DiscreteMeasure<f64> =
            DiscreteMeasure::canonicalize(vec![(vec![0.0, 0.0], 0.5), (vec![3.0, 4.0], 0.5)])
                .unwrap();
        let r = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        assert!((wasserstein(&p, &r, 1.0).unwrap() - 2.5).abs() < 1e-12);
        assert!((wasserstein(&p, &r, 2.0).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fortet_mourier_examples() {
        assert!((fortet_mourier(&dirac(2.0), &dirac(3.0), 2.0).unwrap() - 3.0).abs() < 1e-14);
        let mu = d(&[(0.0, 0.3), (2.0, 0.7)]);
        assert_eq!(fortet_mourier(&mu, &mu, 2.0).unwrap(), 0.0);
        // relaying through the shared atoms beats the direct route from -3 to 3
        let mu = d(&[(-3.0, 0.25), (-1.5, 0.25), (0.0, 0.25), (1.5, 0.25)]);
        let nu = d(&[(-1.5, 0.25), (0.0, 0.25), (1.5, 0.25), (3.0, 0.25)]);
        let fm = fortet_mourier(&mu, &nu, 3.0).unwrap();
        assert!((fm - 0.25 * (13.5 + 3.375 + 3.375 + 13.5)).abs() < 1e-12);
        assert!(fm < 0.25 * 6.0 * 9.0);
    }

    #[test]
    fn fortet_mourier_relays_stay_on_the_union_support() {
        let c = |x: f64, y: f64| (x - y).abs() * 1f64.max(x.abs()).max(y.abs());
        // an off-support relay at 2.5 would be cheaper, but only atoms of
        // the two measures are available as relays
        assert!(c(2.0, 2.5) + c(2.5, 3.0) < c(2.0, 3.0));
        assert!((fortet_mourier(&dirac(2.0), &dirac(3.0), 2.0).unwrap() - 3.0).abs() < 1e-14);
        let mu = d(&[(2.0, 0.5), (2.5, 0.5)]);
        let nu = d(&[(2.5, 0.5), (3.0, 0.5)]);
        let fm = fortet_mourier(&mu, &nu, 2.0).unwrap();
        assert!((fm - 0.5 * (c(2.0, 2.5) + c(2.5, 3.0))).abs() < 1e-14);
    }

    #[test]
    fn psi_examples() {
        assert!((psi_metric(&dirac(0.0), &dirac(1.0), 2.0).unwrap() - 2.0).abs() < 1e-15);
        let n = 100.0;
        let mu_n = d(&[(0.0, 1.0 - 1.0 / n), (n, 1.0 / n)]);
        let nu = dirac(0.0);
        assert!(bounded_lipschitz(&mu_n, &nu).unwrap() <= 2.0 / n + 1e-15);
        assert!(psi_metric(&mu_n, &nu, 1.0).unwrap() >= 1.0 - 1e-12);
        assert_eq!(psi_metric(&mu_n, &mu_n, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn integrability_examples() {
        let grid = geometric_grid(1.0, 1e6, 13).unwrap();
        let r = diagnose_uniform_integrability(&[dirac(0.0)], 1.0, &grid, 1e-9).unwrap();
        assert!(r.sup_tail.iter().all(|&s| s == 0.0));
        assert!(r.verdict);

        let family: Vec<_> = (1..=1000)
            .map(|n| {
                let n = n as f64;
                d(&[(0.0, 1.0 - 1.0 / n), (n, 1.0 / n)])
            })
            .collect();
        let below = geometric_grid(1.0, 999.0, 10).unwrap();
        let r = diagnose_uniform_integrability(&family, 1.0, &below, 1e-3).unwrap();
        assert!(r.sup_tail.iter().all(|&s| (s - 1.0).abs() < 1e-12));
        assert!(!r.verdict);
        assert!(r.sup_tail.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn markov_bound_on_moment_bounded_family() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (q, eps, kappa) = (1.0, 1.0, 10.0);
        let family: Vec<_> = (0..30)
            .map(|_| {
                let pairs: Vec<(f64, f64)> = (0..8)
                    .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.1..1.0)))
                    .collect();
                d(&pairs)
            })
            .collect();
        assert!(moment_bound_certificate(&family, q, eps, kappa));
        let grid = geometric_grid(0.5, 100.0, 20).unwrap();
        let r = diagnose_uniform_integrability(&family, q, &grid, 1e-9)
            .unwrap()
            .with_certificate(&family, eps, kappa);
        for (&a, &s) in grid.iter().zip(&r.sup_tail) {
            assert!(s <= kappa / a.powf(eps / q) + 1e-12);
        }
        assert!(r.verdict);
        assert!(r.certificate.unwrap().holds);
    }

    #[test]
    fn certificate_single_violation() {
        assert!(moment_bound_certificate(&[dirac(0.0)], 1.0, 0.5, 1e-6));
        assert!(!moment_bound_certificate(
            &[dirac(0.0), dirac(4.0)],
            1.0,
            1.0,
            15.0
        ));
        assert!(!moment_bound_certificate(&[dirac(0.0)], 1.0, 0.0, 1.0));
    }

    #[test]
    fn integrability_rejects_bad_grids() {
        assert!(diagnose_uniform_integrability(&[dirac(0.0)], 1.0, &[2.0, 1.0], 0.1).is_err());
        assert!(matches!(
            diagnose_uniform_integrability::<f64>(&[], 1.0, &[1.0], 0.1),
            Err(Error::EmptySet)
        ));
    }

    fn arb_measure(dim: usize) -> impl Strategy<Value = DiscreteMeasure<f64>> {
        prop::collection::vec(
            (prop::collection::vec(-5.0..5.0f64, dim), 0.01..1.0f64),
            1..20,
        )
        .prop_map(|atoms| DiscreteMeasure::canonicalize(atoms).unwrap())
    }

    fn arb_triple() -> impl Strategy<
        Value = (
            DiscreteMeasure<f64>,
            DiscreteMeasure<f64>,
            DiscreteMeasure<f64>,
        ),
    > {
        (1usize..3).prop_flat_map(|dim| (arb_measure(dim), arb_measure(dim), arb_measure(dim)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn metric_axioms((a, b, c) in arb_triple()) {
            type Metric = fn(&DiscreteMeasure<f64>, &DiscreteMeasure<f64>) -> Result<f64>;
            let metrics: [Metric; 3] = [
                bounded_lipschitz,
                |x, y| wasserstein(x, y, 2.0),
                |x, y| psi_metric(x, y, 1.5),
            ];
            let fm = |x, y| fortet_mourier(x, y, 2.0).unwrap();
            prop_assert_eq!(fm(&a, &b), fm(&b, &a));
            prop_assert!(fm(&a, &a).abs() < 1e-10);
            for m in metrics {
                prop_assert_eq!(m(&a, &b).unwrap(), m(&b, &a).unwrap());
                prop_assert!(m(&a, &a).unwrap().abs() < 1e-10);
                let (ab, bc, ac) = (m(&a, &b).unwrap(), m(&b, &c).unwrap(), m(&a, &c).unwrap());
                prop_assert!(ac <= ab + bc + 1e-8, "{} > {} + {}", ac, ab, bc);
            }
        }

        #[test]
        fn one_dimensional_wasserstein_matches_lp(a in arb_measure(1), b in arb_measure(1), q in 1.0..3.0f64) {
            let fast = wasserstein(&a, &b, q).unwrap();
            let lp = wasserstein_lp(&a, &b, q).unwrap();
            prop_assert!((fast - lp).abs() < 1e-9, "{} vs {}", fast, lp);
        }

        #[test]
        fn fortet_mourier_of_order_one_is_w1(a in arb_measure(1), b in arb_measure(1)) {
            let fm = fortet_mourier(&a, &b, 1.0).unwrap();
            let w = wasserstein(&a, &b, 1.0).unwrap();
            prop_assert!((fm - w).abs() < 1e-9);
        }

        #[test]
        fn bounded_lipschitz_is_capped_by_w1_and_two(a in arb_measure(2), b in arb_measure(2)) {
            let bl = bounded_lipschitz(&a, &b).unwrap();
            prop_assert!(bl <= 2.0 + 1e-12);
            prop_assert!(bl <= wasserstein(&a, &b, 1.0).unwrap() + 1e-9);
        }
    }
}
