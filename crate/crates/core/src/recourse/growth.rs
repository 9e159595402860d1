//! Empirical growth certificates `|f(x,z)| <= eta(x) (||z||^gamma + 1)`.
//!
//! A certificate is a falsification device: it records the largest ratio
//! seen on a finite sample and proves nothing about unsampled points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval_recourse, RecourseModel};
use crate::error::{Error, Result};
use crate::measure::draw_points;
use crate::sampler::PointSampler;
use crate::scalar::{euclidean_norm, Scalar};

/// Smallest reported `eta_hat`, so that identically zero functions still
/// get a positive certificate.
pub const ETA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GrowthCertificate<T> {
    pub gamma: T,
    pub decisions: Vec<Vec<T>>,
    /// `eta_hat[i]` is the largest sampled ratio at `decisions[i]`.
    pub eta_hat: Vec<T>,
    pub samples: usize,
    /// `||z||` of every sample.
    pub z_norms: Vec<T>,
    /// `ratios[i][j] = |f(x_i, z_j)| / (||z_j||^gamma + 1)`.
    pub ratios: Vec<Vec<T>>,
    /// Largest relative slack `(|f| - eta_hat (||z||^gamma + 1)) / (eta_hat (||z||^gamma + 1))`
    /// over the sample; nonpositive for a consistent certificate.
    pub max_residual_margin: T,
}

impl<T: Scalar> GrowthCertificate<T> {
    /// Largest ratio at decision `i` among samples whose norm satisfies `keep`.
    pub fn max_ratio_where<F: Fn(T) -> bool>(&self, i: usize, keep: F) -> Option<T> {
        self.ratios[i]
            .iter()
            .zip(&self.z_norms)
            .filter(|(_, &n)| keep(n))
            .map(|(&r, _)| r)
            .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.max(r))))
    }
}

/// Samples `n` scenarios from `sampler` (seeded as in
/// [`crate::measure::empirical`]) and records the growth ratios of `f`
/// at every decision in `decisions`.
pub fn certify_growth<T, S>(
    model: &RecourseModel<T>,
    decisions: &[Vec<T>],
    sampler: &S,
    gamma: T,
    n: usize,
    seed: u64,
) -> Result<GrowthCertificate<T>>
where
    T: Scalar,
    S: PointSampler<T> + ?Sized,
{
    if !(gamma > T::zero()) {
        return Err(Error::InvalidExponent(format!("gamma = {gamma}")));
    }
    if n == 0 {
        return Err(Error::OutOfRange("sample count must be >= 1".into()));
    }
    if decisions.is_empty() {
        return Err(Error::EmptySet);
    }
    let zs = draw_points(sampler, n, seed);
    let z_norms: Vec<T> = zs.iter().map(|z| euclidean_norm(z)).collect();
    let mut ratios = Vec::with_capacity(decisions.len());
    let mut eta_hat = Vec::with_capacity(decisions.len());
    let floor = T::lit(ETA_FLOOR);
    let mut margin = T::neg_infinity();
    for x in decisions {
        let values: Vec<Result<T>> = zs.par_iter().map(|z| eval_recourse(model, x, z)).collect();
        let row = values
            .into_iter()
            .zip(&z_norms)
            .map(|(f, &nz)| f.map(|f| f.abs() / (nz.powf(gamma) + T::one())))
            .collect::<Result<Vec<T>>>()?;
        let eta = row.iter().fold(floor, |a, &r| a.max(r));
        for &r in &row {
            margin = margin.max((r - eta) / eta);
        }
        eta_hat.push(eta);
        ratios.push(row);
    }
    Ok(GrowthCertificate {
        gamma,
        decisions: decisions.to_vec(),
        eta_hat,
        samples: n,
        z_norms,
        ratios,
        max_residual_margin: margin,
    })
}
