//! Finitely supported probability measures on `R^d` and scalar
//! distributions on the real line.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sampler::PointSampler;
use crate::scalar::{euclidean_norm, Scalar};

/// Coordinate-wise absolute tolerance under which two atoms are the same point.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub point: Vec<T>,
    pub weight: T,
}

/// A Borel probability measure on `R^dim` with finite support.
///
/// Values are always canonical: positive weights summing to one, no two
/// atoms closer than [`MERGE_TOL`] in every coordinate, atoms sorted
/// lexicographically by point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawMeasure<T>",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct DiscreteMeasure<T> {
    dim: usize,
    atoms: Vec<Atom<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawMeasure<T> {
    dim: usize,
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> TryFrom<RawMeasure<T>> for DiscreteMeasure<T> {
    type Error = Error;

    fn try_from(raw: RawMeasure<T>) -> Result<Self> {
        let m = DiscreteMeasure::canonicalize(raw.atoms.into_iter().map(|a| (a.point, a.weight)))?;
        if m.dim != raw.dim {
            return Err(Error::DimMismatch {
                expected: raw.dim,
                found: m.dim,
            });
        }
        Ok(m)
    }
}

pub(crate) fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).expect("finite coordinates") {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

impl<T: Scalar> DiscreteMeasure<T> {
    /// Builds a canonical measure from raw `(point, weight)` pairs: zero
    /// weights are dropped, coincident points merged by weight addition and
    /// the total renormalized to one.
    pub fn canonicalize<I>(raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<T>, T)>,
    {
        let mut dim: Option<usize> = None;
        let mut atoms: Vec<Atom<T>> = Vec::new();
        for (point, weight) in raw {
            match dim {
                None => dim = Some(point.len()),
                Some(d) if d != point.len() => {
                    return Err(Error::DimMismatch {
                        expected: d,
                        found: point.len(),
                    })
                }
                _ => {}
            }
            if !weight.is_finite() {
                return Err(Error::NonFinite("weight"));
            }
            if weight < T::zero() {
                return Err(Error::NegativeWeight(weight.as_f64()));
            }
            if point.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("atom point"));
            }
            if weight > T::zero() {
                atoms.push(Atom { point, weight });
            }
        }
        let dim = dim.ok_or(Error::EmptySupport)?;
        if dim == 0 {
            return Err(Error::DimMismatch {
                expected: 1,
                found: 0,
            });
        }
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        atoms.sort_by(|a, b| lex_cmp(&a.point, &b.point));

        let tol = T::lit(MERGE_TOL);
        let mut merged: Vec<Atom<T>> = Vec::with_capacity(atoms.len());
        'outer: for atom in atoms {
            for rep in merged.iter_mut().rev() {
                if rep.point[0] < atom.point[0] - tol {
                    break;
                }
                let close = rep
                    .point
                    .iter()
                    .zip(&atom.point)
                    .all(|(&a, &b)| (a - b).abs() <= tol);
                if close {
                    rep.weight = rep.weight + atom.weight;
                    continue 'outer;
                }
            }
            merged.push(atom);
        }

        let total: T = merged.iter().map(|a| a.weight).sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::EmptySupport);
        }
        // Leave sums that are already one up to rounding untouched so that
        // canonicalization is idempotent bit for bit.
        let slack = T::epsilon() * T::lit(4.0) * T::from_usize_lossy(merged.len() + 1);
        if (total - T::one()).abs() > slack {
            for a in &mut merged {
                a.weight = a.weight / total;
            }
        }
        if let [only] = merged.as_mut_slice() {
            only.weight = T::one();
        }
        Ok(DiscreteMeasure { dim, atoms: merged })
    }

    pub fn dirac(point: Vec<T>) -> Result<Self> {
        Self::canonicalize([(point, T::one())])
    }

    /// One-dimensional measure from `(value, weight)` pairs.
    pub fn from_scalars(pairs: &[(T, T)]) -> Result<Self> {
        Self::canonicalize(pairs.iter().map(|&(v, w)| (vec![v], w)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `sum_i w_i ||z_i||^q`.
    pub fn moment(&self, q: T) -> T {
        self.atoms
            .iter()
            .map(|a| a.weight * euclidean_norm(&a.point).powf(q))
            .sum()
    }

    /// `sum_i w_i ||z_i||^q 1{||z_i||^q > a}`: the mass of the `||.||^q`
    /// integrand beyond level `a`.
    pub fn tail_functional(&self, q: T, a: T) -> Result<T> {
        if !(a >= T::zero()) {
            return Err(Error::OutOfRange(format!("tail level {a} must be >= 0")));
        }
        Ok(self
            .atoms
            .iter()
            .map(|atom| {
                let g = euclidean_norm(&atom.point).powf(q);
                if g > a {
                    atom.weight * g
                } else {
                    T::zero()
                }
            })
            .sum())
    }

    /// The convex combination `(1 - t) self + t other`.
    pub fn mix(&self, other: &Self, t: T) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::OutOfRange(format!("mixing weight {t} not in [0,1]")));
        }
        if t == T::zero() {
            return Ok(self.clone());
        }
        if t == T::one() {
            return Ok(other.clone());
        }
        let s = T::one() - t;
        Self::canonicalize(
            self.atoms
                .iter()
                .map(|a| (a.point.clone(), s * a.weight))
                .chain(other.atoms.iter().map(|a| (a.point.clone(), t * a.weight))),
        )
    }

    /// Image of the product measure `delta_x (x) self` under `f`, i.e. the
    /// law of `f(x, Z)` for `Z ~ self`.
    pub fn pushforward<F>(&self, x: &[T], f: &F) -> Result<ScalarDistribution<T>>
    where
        F: ValueFunction<T> + ?Sized,
    {
        let pairs = self
            .atoms
            .iter()
            .map(|a| Ok((f.value(x, &a.point)?, a.weight)))
            .collect::<Result<Vec<_>>>()?;
        ScalarDistribution::from_pairs(pairs)
    }

    /// Mass-preserving map of every atom through `g` (atoms that land on
    /// the same point are merged).
    pub fn map_points<G>(&self, g: G) -> Result<Self>
    where
        G: Fn(&[T]) -> Vec<T>,
    {
        Self::canonicalize(self.atoms.iter().map(|a| (g(&a.point), a.weight)))
    }

    /// View as a scalar distribution; requires `dim == 1`.
    pub fn to_scalar(&self) -> Result<ScalarDistribution<T>> {
        if self.dim != 1 {
            return Err(Error::DimMismatch {
                expected: 1,
                found: self.dim,
            });
        }
        Ok(ScalarDistribution::from_sorted_canonical(
            self.atoms.iter().map(|a| (a.point[0], a.weight)).collect(),
        ))
    }

    /// Stable SHA-256 digest of the atom content (hex, first 16 bytes).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for a in &self.atoms {
            for c in &a.point {
                h.update(c.as_f64().to_bits().to_le_bytes());
            }
            h.update(a.weight.as_f64().to_bits().to_le_bytes());
        }
        hex16(&h.finalize())
    }

    /// Inverse-CDF sampler over the atoms.
    pub fn sampler(&self) -> AtomSampler<'_, T> {
        let mut acc = T::zero();
        let cumulative = self
            .atoms
            .iter()
            .map(|a| {
                acc = acc + a.weight;
                acc
            })
            .collect();
        AtomSampler {
            measure: self,
            cumulative,
        }
    }
}

pub(crate) fn hex16(bytes: &[u8]) -> String {
    bytes.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Empirical measure of `n` i.i.d. draws, each of weight `1/n`.
///
/// Draw `i` uses its own ChaCha stream `i` under `seed`, so the result
/// does not depend on evaluation order.
pub fn empirical<T, S>(sampler: &S, n: usize, seed: u64) -> Result<DiscreteMeasure<T>>
where
    T: Scalar,
    S: PointSampler<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::OutOfRange("sample size must be >= 1".into()));
    }
    let w = T::one() / T::from_usize_lossy(n);
    let points = draw_points(sampler, n, seed);
    DiscreteMeasure::canonicalize(points.into_iter().map(|p| (p, w)))
}

/// Draws `n` points; draw `i` comes from ChaCha stream `i` under `seed`.
pub fn draw_points<T, S>(sampler: &S, n: usize, seed: u64) -> Vec<Vec<T>>
where
    T: Scalar,
    S: PointSampler<T> + ?Sized,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sampler.sample(&mut rng)
        })
        .collect()
}

/// Anything that can be evaluated as `f(x, z)`, in particular recourse
/// value functions.
pub trait ValueFunction<T> {
    fn value(&self, x: &[T], z: &[T]) -> Result<T>;
}

impl<T, F> ValueFunction<T> for F
where
    F: Fn(&[T], &[T]) -> Result<T>,
{
    fn value(&self, x: &[T], z: &[T]) -> Result<T> {
        self(x, z)
    }
}

pub struct AtomSampler<'a, T> {
    measure: &'a DiscreteMeasure<T>,
    cumulative: Vec<T>,
}

impl<T: Scalar> PointSampler<T> for AtomSampler<'_, T> {
    fn dim(&self) -> usize {
        self.measure.dim
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        let u = T::lit(rand::Rng::random::<f64>(rng));
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        self.measure.atoms[i].point.clone()
    }
}

/// A finitely supported law on the real line, with strictly increasing
/// values and precomputed cumulative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarDistribution<T> {
    values: Vec<T>,
    weights: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Scalar> ScalarDistribution<T> {
    /// Canonicalizes arbitrary `(value, weight)` pairs.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, T)>,
    {
        DiscreteMeasure::canonicalize(pairs.into_iter().map(|(v, w)| (vec![v], w)))?.to_scalar()
    }

    fn from_sorted_canonical(pairs: Vec<(T, T)>) -> Self {
        let mut acc = T::zero();
        let mut values = Vec::with_capacity(pairs.len());
        let mut weights = Vec::with_capacity(pairs.len());
        let mut cumulative = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            acc = acc + w;
            values.push(v);
            weights.push(w);
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = T::one();
        }
        ScalarDistribution {
            values,
            weights,
            cumulative,
        }
    }

    pub fn dirac(value: T) -> Self {
        Self::from_sorted_canonical(vec![(value, T::one())])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.values
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> T {
        self.iter().map(|(v, w)| v * w).sum()
    }

    pub fn min_value(&self) -> T {
        self.values[0]
    }

    pub fn max_value(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// `F(t) = P(Y <= t)`.
    pub fn cdf(&self, t: T) -> T {
        let k = self.values.partition_point(|&v| v <= t);
        if k == 0 {
            T::zero()
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Left-continuous quantile `inf { t : F(t) >= beta }` for `beta` in `(0,1)`.
    pub fn quantile(&self, beta: T) -> Result<T> {
        if !(beta > T::zero() && beta < T::one()) {
            return Err(Error::OutOfRange(format!(
                "quantile level {beta} not in (0,1)"
            )));
        }
        let i = self
            .cumulative
            .partition_point(|&c| c < beta)
            .min(self.values.len() - 1);
        Ok(self.values[i])
    }

    /// Law of `Y + t`.
    pub fn shift(&self, t: T) -> Result<Self> {
        Self::from_pairs(self.iter().map(|(v, w)| (v + t, w)))
    }

    /// The measure on `R^1` with the same atoms.
    pub fn to_measure(&self) -> DiscreteMeasure<T> {
        DiscreteMeasure {
            dim: 1,
            atoms: self
                .iter()
                .map(|(v, w)| Atom {
                    point: vec![v],
                    weight: w,
                })
                .collect(),
        }
    }
}
