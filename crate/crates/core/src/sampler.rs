//! Seeded point generators used to build empirical measures.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::measure::DiscreteMeasure;
use crate::scalar::Scalar;

/// A generator of points in `R^dim` driven by a caller-supplied RNG.
pub trait PointSampler<T>: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T>;
}

/// Serializable catalogue of samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Sampler<T> {
    Constant {
        point: Vec<T>,
    },
    /// Independent uniform coordinates on `[lower_i, upper_i)`.
    UniformBox {
        lower: Vec<T>,
        upper: Vec<T>,
    },
    /// Independent normal coordinates.
    Normal {
        mean: Vec<T>,
        std: Vec<T>,
    },
    /// Uniform direction with a log-uniform radius in `[min_radius, max_radius]`.
    /// Covers many orders of magnitude of `||z||`, which is what growth
    /// certification needs.
    Radial {
        dim: usize,
        min_radius: T,
        max_radius: T,
    },
    /// Draws atoms of a discrete measure according to their weights.
    Atoms {
        measure: DiscreteMeasure<T>,
    },
}

impl<T: Scalar> PointSampler<T> for Sampler<T> {
    fn dim(&self) -> usize {
        match self {
            Sampler::Constant { point } => point.len(),
            Sampler::UniformBox { lower, .. } => lower.len(),
            Sampler::Normal { mean, .. } => mean.len(),
            Sampler::Radial { dim, .. } => *dim,
            Sampler::Atoms { measure } => measure.dim(),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        match self {
            Sampler::Constant { point } => point.clone(),
            Sampler::UniformBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| lo + (hi - lo) * T::lit(rng.random::<f64>()))
                .collect(),
            Sampler::Normal { mean, std } => mean
                .iter()
                .zip(std)
                .map(|(&m, &s)| {
                    let g: f64 = StandardNormal.sample(rng);
                    m + s * T::lit(g)
                })
                .collect(),
            Sampler::Radial {
                dim,
                min_radius,
                max_radius,
            } => {
                let dir: Vec<f64> = loop {
                    let g: Vec<f64> = (0..*dim).map(|_| StandardNormal.sample(rng)).collect();
                    let n = g.iter().map(|a| a * a).sum::<f64>().sqrt();
                    if n > 1e-300 {
                        break g.into_iter().map(|a| a / n).collect();
                    }
                };
                let (lo, hi) = (min_radius.as_f64().ln(), max_radius.as_f64().ln());
                let r = (lo + (hi - lo) * rng.random::<f64>()).exp();
                dir.into_iter().map(|d| T::lit(d * r)).collect()
            }
            Sampler::Atoms { measure } => measure.sampler().sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn radial_radius_in_range() {
        let s = Sampler::<f64>::Radial {
            dim: 2,
            min_radius: 1e-2,
            max_radius: 1e3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z = s.sample(&mut rng);
            let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
            assert!((1e-2 * (1.0 - 1e-9)..=1e3 * (1.0 + 1e-9)).contains(&r));
        }
    }

    #[test]
    fn uniform_box_bounds_and_json() {
        let s: Sampler<f64> =
            serde_json::from_str(r#"{"kind":"uniform_box","lower":[-1.0],"upper":[1.0]}"#).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let z = s.sample(&mut rng)[0];
            assert!((-1.0..1.0).contains(&z));
        }
        assert_eq!(s.dim(), 1);
    }
}
