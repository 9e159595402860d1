//! The composite objective `Q(x, nu)`, its minimum `phi(nu)` over a finite
//! decision set, and the tolerance argmin set.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measure::{hex16, DiscreteMeasure, ScalarDistribution};
use crate::recourse::{eval_recourse, RecourseModel};
use crate::risk::{evaluate_risk, RiskSpec};
use crate::scalar::{euclidean_distance, Scalar};

/// Absolute tolerance of [`argmin_set`] when none is given.
pub const DEFAULT_ARGMIN_TOL: f64 = 1e-8;

/// A finite, nonempty list of decisions of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawDecisions<T>",
    into = "RawDecisions<T>",
    bound = "T: Scalar"
)]
pub struct DecisionSet<T: Scalar> {
    points: Vec<Vec<T>>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
enum RawDecisions<T> {
    Points(Vec<Vec<T>>),
    Grid {
        lower: Vec<T>,
        upper: Vec<T>,
        counts: Vec<usize>,
    },
}

impl<T: Scalar> TryFrom<RawDecisions<T>> for DecisionSet<T> {
    type Error = Error;

    fn try_from(raw: RawDecisions<T>) -> Result<Self> {
        match raw {
            RawDecisions::Points(points) => DecisionSet::new(points),
            RawDecisions::Grid {
                lower,
                upper,
                counts,
            } => DecisionSet::grid(&lower, &upper, &counts),
        }
    }
}

impl<T: Scalar> From<DecisionSet<T>> for RawDecisions<T> {
    fn from(d: DecisionSet<T>) -> Self {
        RawDecisions::Points(d.points)
    }
}

impl<T: Scalar> DecisionSet<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let n = points.first().ok_or(Error::EmptySet)?.len();
        if n == 0 {
            return Err(Error::DimMismatch {
                expected: 1,
                found: 0,
            });
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimMismatch {
                expected: n,
                found: p.len(),
            });
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decision"));
        }
        Ok(DecisionSet { points })
    }

    /// Tensor grid over a box with `counts[i]` equispaced values on axis `i`
    /// (a count of one takes the lower end). Last axis varies fastest.
    pub fn grid(lower: &[T], upper: &[T], counts: &[usize]) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != counts.len() {
            return Err(Error::DimMismatch {
                expected: lower.len(),
                found: if upper.len() != lower.len() {
                    upper.len()
                } else {
                    counts.len()
                },
            });
        }
        if counts.contains(&0) || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::OutOfRange(
                "grid needs lower <= upper and counts >= 1".into(),
            ));
        }
        let axes: Vec<Vec<T>> = lower
            .iter()
            .zip(upper)
            .zip(counts)
            .map(|((&l, &u), &c)| {
                if c == 1 {
                    vec![l]
                } else {
                    let step = (u - l) / T::from_usize_lossy(c - 1);
                    (0..c)
                        .map(|k| {
                            if k + 1 == c {
                                u
                            } else {
                                l + step * T::from_usize_lossy(k)
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let mut points = vec![vec![]];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p: Vec<T>| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// `min_x R(law of f(x, Z))` over a finite decision set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct MeanRiskModel<T: Scalar> {
    pub recourse: RecourseModel<T>,
    pub risk: RiskSpec<T>,
    pub decisions: DecisionSet<T>,
    pub p: T,
    pub gamma: T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct RawModel<T: Scalar> {
    recourse: RecourseModel<T>,
    risk: RiskSpec<T>,
    decisions: DecisionSet<T>,
    p: Option<T>,
    gamma: Option<T>,
    gamma_v: Option<T>,
    gamma_k: Option<T>,
}

impl<'de, T: Scalar> Deserialize<'de> for MeanRiskModel<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawModel::<T>::deserialize(d)?;
        let p = raw.p.unwrap_or_else(|| raw.risk.order());
        let gamma = match raw.gamma {
            Some(g) => g,
            None => raw
                .recourse
                .growth_exponent(
                    raw.gamma_v.unwrap_or(T::zero()),
                    raw.gamma_k.unwrap_or(T::zero()),
                )
                .map_err(serde::de::Error::custom)?,
        };
        MeanRiskModel::new(raw.recourse, raw.risk, raw.decisions, p, gamma)
            .map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> MeanRiskModel<T> {
    pub fn new(
        recourse: RecourseModel<T>,
        risk: RiskSpec<T>,
        decisions: DecisionSet<T>,
        p: T,
        gamma: T,
    ) -> Result<Self> {
        let m = MeanRiskModel {
            recourse,
            risk,
            decisions,
            p,
            gamma,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.recourse.validate()?;
        self.risk.validate()?;
        if !(self.p >= T::one()) {
            return Err(Error::OutOfRange(format!("p = {} must be >= 1", self.p)));
        }
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::InvalidExponent(format!("gamma = {}", self.gamma)));
        }
        if self.decisions.dim() != self.recourse.x_dim() {
            return Err(Error::DimMismatch {
                expected: self.recourse.x_dim(),
                found: self.decisions.dim(),
            });
        }
        Ok(())
    }

    /// `gamma * p`, the moment exponent the stability theory works with.
    pub fn moment_exponent(&self) -> T {
        self.gamma * self.p
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON form (hex, first 16 bytes).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("model serializes");
        hex16(&Sha256::digest(json.as_bytes()))
    }

    fn check_measure(&self, nu: &DiscreteMeasure<T>) -> Result<()> {
        if nu.dim() != self.recourse.z_dim() {
            return Err(Error::DimMismatch {
                expected: self.recourse.z_dim(),
                found: nu.dim(),
            });
        }
        Ok(())
    }
}

/// Law of `f(x, Z)` for `Z ~ nu`, with the atoms evaluated in parallel.
pub fn pushforward_par<T: Scalar>(
    recourse: &RecourseModel<T>,
    x: &[T],
    nu: &DiscreteMeasure<T>,
) -> Result<ScalarDistribution<T>> {
    let pairs = nu
        .atoms()
        .par_iter()
        .map(|a| Ok((eval_recourse(recourse, x, &a.point)?, a.weight)))
        .collect::<Result<Vec<_>>>()?;
    ScalarDistribution::from_pairs(pairs)
}

/// `Q(x, nu)`: the risk of the recourse value under `nu` at decision `x`.
pub fn q_value<T: Scalar>(model: &MeanRiskModel<T>, x: &[T], nu: &DiscreteMeasure<T>) -> Result<T> {
    model.check_measure(nu)?;
    if x.len() != model.recourse.x_dim() {
        return Err(Error::DimMismatch {
            expected: model.recourse.x_dim(),
            found: x.len(),
        });
    }
    evaluate_risk(&model.risk, &pushforward_par(&model.recourse, x, nu)?)
}

pub fn phi<T: Scalar>(model: &MeanRiskModel<T>, nu: &DiscreteMeasure<T>) -> Result<T> {
    Evaluator::new(model).phi(nu)
}

pub fn argmin_set<T: Scalar>(
    model: &MeanRiskModel<T>,
    nu: &DiscreteMeasure<T>,
    tol: T,
) -> Result<Vec<Vec<T>>> {
    let ev = Evaluator::new(model);
    Ok(ev
        .argmin_indices(nu, tol)?
        .into_iter()
        .map(|i| model.decisions.points()[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MomentFeasibility<T> {
    pub feasible: bool,
    pub exponent: T,
    pub moment: T,
}

/// Finitely supported measures always have every moment; the value of the
/// `gamma p` moment is reported alongside.
pub fn moment_feasibility<T: Scalar>(
    model: &MeanRiskModel<T>,
    nu: &DiscreteMeasure<T>,
) -> MomentFeasibility<T> {
    let exponent = model.moment_exponent();
    let moment = nu.moment(exponent);
    MomentFeasibility {
        feasible: moment.is_finite(),
        exponent,
        moment,
    }
}

/// Evaluates `Q` over the decision set with a cache keyed by decision
/// index and measure content hash. Safe to share between threads.
pub struct Evaluator<'m, T: Scalar> {
    model: &'m MeanRiskModel<T>,
    cache: Mutex<HashMap<(usize, String), Result<T>>>,
}

impl<'m, T: Scalar> Evaluator<'m, T> {
    pub fn new(model: &'m MeanRiskModel<T>) -> Self {
        Evaluator {
            model,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &MeanRiskModel<T> {
        self.model
    }

    pub fn q_value(&self, i: usize, nu: &DiscreteMeasure<T>) -> Result<T> {
        self.q_keyed(i, nu, &nu.content_hash())
    }

    fn q_keyed(&self, i: usize, nu: &DiscreteMeasure<T>, hash: &str) -> Result<T> {
        let x = self
            .model
            .decisions
            .points()
            .get(i)
            .ok_or_else(|| Error::OutOfRange(format!("decision index {i}")))?;
        let key = (i, hash.to_string());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return v.clone();
        }
        let v = q_value(self.model, x, nu);
        self.cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| v.clone());
        v
    }

    /// `Q(x_i, nu)` for every decision, in decision order.
    pub fn q_all(&self, nu: &DiscreteMeasure<T>) -> Result<Vec<T>> {
        self.model.check_measure(nu)?;
        let hash = nu.content_hash();
        (0..self.model.decisions.len())
            .into_par_iter()
            .map(|i| self.q_keyed(i, nu, &hash))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    pub fn phi(&self, nu: &DiscreteMeasure<T>) -> Result<T> {
        Ok(self.q_all(nu)?.into_iter().fold(T::infinity(), T::min))
    }

    pub fn argmin_indices(&self, nu: &DiscreteMeasure<T>, tol: T) -> Result<Vec<usize>> {
        if !(tol >= T::zero()) {
            return Err(Error::OutOfRange(format!(
                "argmin tolerance {tol} must be >= 0"
            )));
        }
        let q = self.q_all(nu)?;
        let best = q.iter().copied().fold(T::infinity(), T::min);
        Ok((0..q.len()).filter(|&i| q[i] <= best + tol).collect())
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

/// One-sided Hausdorff excess `max_{c in candidate} min_{r in reference} ||c - r||`.
pub fn argmin_excess<T: Scalar>(candidate: &[Vec<T>], reference: &[Vec<T>]) -> Result<T> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(candidate
        .iter()
        .map(|c| {
            reference
                .iter()
                .map(|r| euclidean_distance(c, r))
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), T::max))
}
