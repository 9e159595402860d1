//! Law-invariant risk functionals evaluated directly on scalar
//! distributions, plus stochastic-order utilities.
//!
//! Every functional here is computed in closed form from the sorted atoms
//! and their cumulative weights; no random variables on an auxiliary
//! probability space are ever constructed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::ScalarDistribution;
use crate::scalar::Scalar;

/// The implemented risk functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum RiskSpec<T> {
    Expectation,
    /// Average value at risk at level `alpha`.
    #[serde(rename = "avar")]
    AVaR {
        alpha: T,
    },
    /// Mean upper semideviation of order `p`.
    #[serde(rename = "semidev")]
    SemiDev {
        a: T,
        p: T,
    },
    /// Mean upper semideviation of order `p` from the target `c`.
    #[serde(rename = "target_semidev")]
    TargetSemiDev {
        a: T,
        c: T,
        p: T,
    },
}

impl<T: Scalar> RiskSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |a: T| a >= T::zero() && a <= T::one();
        match *self {
            RiskSpec::Expectation => Ok(()),
            RiskSpec::AVaR { alpha } if alpha > T::zero() && alpha < T::one() => Ok(()),
            RiskSpec::AVaR { alpha } => {
                Err(Error::InvalidSpec(format!("alpha={alpha} not in (0,1)")))
            }
            RiskSpec::SemiDev { a, p } if unit(a) && p >= T::one() => Ok(()),
            RiskSpec::TargetSemiDev { a, c, p } if unit(a) && c > T::zero() && p >= T::one() => {
                Ok(())
            }
            _ => Err(Error::InvalidSpec(format!(
                "{self:?}: need a in [0,1], c > 0, p >= 1"
            ))),
        }
    }

    /// Integrability order `p` the functional needs (1 for the expectation
    /// and AV@R).
    pub fn order(&self) -> T {
        match *self {
            RiskSpec::Expectation | RiskSpec::AVaR { .. } => T::one(),
            RiskSpec::SemiDev { p, .. } | RiskSpec::TargetSemiDev { p, .. } => p,
        }
    }

    pub fn is_translation_equivariant(&self) -> bool {
        !matches!(self, RiskSpec::TargetSemiDev { .. })
    }

    pub fn evaluate(&self, dist: &ScalarDistribution<T>) -> Result<T> {
        evaluate_risk(self, dist)
    }
}

/// The risk value of `dist` under `spec`.
pub fn evaluate_risk<T: Scalar>(spec: &RiskSpec<T>, dist: &ScalarDistribution<T>) -> Result<T> {
    spec.validate()?;
    match *spec {
        RiskSpec::Expectation => Ok(dist.mean()),
        RiskSpec::AVaR { alpha } => avar(dist, alpha),
        RiskSpec::SemiDev { a, p } => semidev(dist, a, p),
        RiskSpec::TargetSemiDev { a, c, p } => target_semidev(dist, a, c, p),
    }
}

/// `1/(1-alpha) * integral_alpha^1 F^{<-}(beta) d beta`, summed exactly over
/// the quantile plateaus clipped to `(alpha, 1]`.
pub fn avar<T: Scalar>(dist: &ScalarDistribution<T>, alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::OutOfRange(format!("alpha={alpha} not in (0,1)")));
    }
    let mut prev = T::zero();
    let mut acc = T::zero();
    for (&v, &c) in dist.values().iter().zip(dist.cumulative()) {
        let lo = prev.max(alpha);
        let hi = c.max(alpha);
        if hi > lo {
            acc = acc + v * (hi - lo);
        }
        prev = c;
    }
    Ok(acc / (T::one() - alpha))
}

fn upper_deviation<T: Scalar>(dist: &ScalarDistribution<T>, center: T, p: T) -> T {
    let s: T = dist
        .iter()
        .map(|(v, w)| {
            let d = v - center;
            if d > T::zero() {
                w * d.powf(p)
            } else {
                T::zero()
            }
        })
        .sum();
    s.powf(T::one() / p)
}

/// `E[Y] + a (E[((Y - E[Y])^+)^p])^(1/p)`.
pub fn semidev<T: Scalar>(dist: &ScalarDistribution<T>, a: T, p: T) -> Result<T> {
    RiskSpec::SemiDev { a, p }.validate()?;
    let m = dist.mean();
    Ok(m + a * upper_deviation(dist, m, p))
}

/// `E[Y] + a (E[((Y - c)^+)^p])^(1/p)`; not translation-equivariant.
pub fn target_semidev<T: Scalar>(dist: &ScalarDistribution<T>, a: T, c: T, p: T) -> Result<T> {
    RiskSpec::TargetSemiDev { a, c, p }.validate()?;
    Ok(dist.mean() + a * upper_deviation(dist, c, p))
}

/// Stop-loss transform `E[(Y - t)^+]`.
pub fn stop_loss<T: Scalar>(dist: &ScalarDistribution<T>, t: T) -> T {
    dist.iter()
        .map(|(v, w)| if v > t { w * (v - t) } else { T::zero() })
        .sum()
}

/// AV@R through the minimization `min_t { t + E[(Y - t)^+] / (1 - alpha) }`
/// over the atom values. Independent of [`avar`]; used as an oracle.
pub fn avar_ru_oracle<T: Scalar>(dist: &ScalarDistribution<T>, alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::OutOfRange(format!("alpha={alpha} not in (0,1)")));
    }
    let k = T::one() / (T::one() - alpha);
    Ok(dist
        .values()
        .iter()
        .map(|&t| t + k * stop_loss(dist, t))
        .fold(T::infinity(), T::min))
}

/// Decides `mu <=_icx nu` by comparing stop-loss transforms at every atom of
/// either law. Both transforms are piecewise linear with kinks only at
/// atoms and share slope -1 to the left of all atoms, so the grid suffices.
pub fn icx_leq<T: Scalar>(mu: &ScalarDistribution<T>, nu: &ScalarDistribution<T>) -> bool {
    let tol = T::tol(1e-10);
    mu.values()
        .iter()
        .chain(nu.values())
        .all(|&t| stop_loss(mu, t) <= stop_loss(nu, t) + tol)
}

/// Law of `lambda F_mu^{<-}(U) + (1 - lambda) F_nu^{<-}(U)`, the comonotone
/// combination, built on the merged grid of cumulative weights.
pub fn comonotone_combination<T: Scalar>(
    mu: &ScalarDistribution<T>,
    nu: &ScalarDistribution<T>,
    lambda: T,
) -> Result<ScalarDistribution<T>> {
    let (cm, cn) = (mu.cumulative(), nu.cumulative());
    let (mut i, mut j) = (0, 0);
    let mut prev = T::zero();
    let mut pairs = Vec::with_capacity(cm.len() + cn.len());
    while i < cm.len() && j < cn.len() {
        let beta = cm[i].min(cn[j]);
        let (mv, nv) = (mu.values()[i], nu.values()[j]);
        let v = nv + lambda * (mv - nv);
        if beta > prev {
            pairs.push((v, beta - prev));
        }
        prev = beta;
        if cm[i] == beta {
            i += 1;
        }
        if cn[j] == beta {
            j += 1;
        }
    }
    ScalarDistribution::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(pairs: &[(f64, f64)]) -> ScalarDistribution<f64> {
        ScalarDistribution::from_pairs(pairs.iter().copied()).unwrap()
    }

    /// Midpoint Riemann sum of the quantile function over `(alpha, 1)`.
    fn riemann_avar(dist: &ScalarDistribution<f64>, alpha: f64, n: usize) -> f64 {
        let h = (1.0 - alpha) / n as f64;
        let s: f64 = (0..n)
            .map(|k| dist.quantile(alpha + (k as f64 + 0.5) * h).unwrap())
            .sum();
        s * h / (1.0 - alpha)
    }

    fn quarters() -> ScalarDistribution<f64> {
        d(&[(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)])
    }

    #[test]
    fn expectation_and_diracs() {
        let two = d(&[(0.0, 0.5), (2.0, 0.5)]);
        assert_eq!(evaluate_risk(&RiskSpec::Expectation, &two).unwrap(), 1.0);
        let c = ScalarDistribution::dirac(3.7);
        for spec in [
            RiskSpec::Expectation,
            RiskSpec::AVaR { alpha: 0.5 },
            RiskSpec::SemiDev { a: 0.7, p: 2.0 },
            RiskSpec::TargetSemiDev {
                a: 0.7,
                c: 5.0,
                p: 1.5,
            },
        ] {
            assert_eq!(evaluate_risk(&spec, &c).unwrap(), 3.7, "{spec:?}");
        }
        let spec = RiskSpec::SemiDev { a: 0.0, p: 2.0 };
        assert_eq!(evaluate_risk(&spec, &quarters()).unwrap(), 2.5);
    }

    #[test]
    fn invalid_specs() {
        let x = quarters();
        for spec in [
            RiskSpec::AVaR { alpha: 1.0 },
            RiskSpec::SemiDev { a: 1.5, p: 2.0 },
            RiskSpec::SemiDev { a: 0.5, p: 0.5 },
            RiskSpec::TargetSemiDev {
                a: 0.5,
                c: 0.0,
                p: 1.0,
            },
        ] {
            assert!(matches!(
                evaluate_risk(&spec, &x),
                Err(Error::InvalidSpec(_))
            ));
        }
        assert!(matches!(avar(&x, 0.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn avar_examples_against_riemann_oracle() {
        let two = d(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(avar(&two, 0.5).unwrap(), 1.0);
        assert!((riemann_avar(&two, 0.5, 1_000_000) - 1.0).abs() < 1e-6);
        let q = quarters();
        assert_eq!(avar(&q, 0.5).unwrap(), 3.5);
        assert!((riemann_avar(&q, 0.5, 1_000_000) - 3.5).abs() < 1e-6);
        assert_eq!(avar(&q, 0.75).unwrap(), 4.0);
        assert!((riemann_avar(&q, 0.75, 1_000_000) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn ru_oracle_examples() {
        assert_eq!(
            avar_ru_oracle(&ScalarDistribution::dirac(2.0), 0.3).unwrap(),
            2.0
        );
        assert_eq!(
            avar_ru_oracle(&d(&[(0.0, 0.5), (1.0, 0.5)]), 0.5).unwrap(),
            1.0
        );
        assert_eq!(avar_ru_oracle(&quarters(), 0.5).unwrap(), 3.5);
    }

    #[test]
    fn semideviation_examples() {
        let two = d(&[(0.0, 0.5), (2.0, 0.5)]);
        // direct sums: E = 1, E[(Y-1)^+] = 0.5, E[((Y-1)^+)^2] = 0.5
        assert_eq!(semidev(&two, 1.0, 1.0).unwrap(), 1.0 + 0.5);
        assert!((semidev(&two, 1.0, 2.0).unwrap() - (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
        assert!((semidev(&two, 1.0, 2.0).unwrap() - 1.70710678).abs() < 1e-8);
        assert_eq!(
            semidev(&ScalarDistribution::dirac(-2.0), 0.3, 3.0).unwrap(),
            -2.0
        );
    }

    #[test]
    fn target_semideviation_breaks_translation_equivariance() {
        let two = d(&[(0.0, 0.5), (2.0, 0.5)]);
        let r = target_semidev(&two, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r, 1.5);
        let shifted = two.shift(1.0).unwrap();
        let r1 = target_semidev(&shifted, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r1, 3.0);
        assert!((r1 - (r + 1.0)).abs() >= 0.5 - 1e-10);
        let below = d(&[(-1.0, 0.3), (0.5, 0.7)]);
        assert_eq!(target_semidev(&below, 0.9, 1.0, 2.0).unwrap(), below.mean());
    }

    #[test]
    fn icx_examples() {
        let mu = ScalarDistribution::dirac(1.0);
        let nu = d(&[(0.0, 0.5), (2.0, 0.5)]);
        assert!(icx_leq(&mu, &mu));
        assert!(icx_leq(&mu, &nu));
        // dense grid oracle for the same pair
        assert!((0..=4000)
            .map(|k| -1.0 + k as f64 * 1e-3)
            .all(|t| stop_loss(&mu, t) <= stop_loss(&nu, t) + 1e-12));
        assert!(!icx_leq(
            &ScalarDistribution::dirac(2.0),
            &ScalarDistribution::dirac(1.0)
        ));
    }

    #[test]
    fn json_encoding() {
        let s: RiskSpec<f64> = serde_json::from_str(r#"{"kind":"avar","alpha":0.9}"#).unwrap();
        assert_eq!(s, RiskSpec::AVaR { alpha: 0.9 });
        let s: RiskSpec<f64> =
            serde_json::from_str(r#"{"kind":"target_semidev","a":0.5,"c":1.0,"p":2.0}"#).unwrap();
        assert_eq!(
            s,
            RiskSpec::TargetSemiDev {
                a: 0.5,
                c: 1.0,
                p: 2.0
            }
        );
        assert_eq!(
            serde_json::to_string(&RiskSpec::<f64>::SemiDev { a: 0.5, p: 1.0 }).unwrap(),
            r#"{"kind":"semidev","a":0.5,"p":1.0}"#
        );
        let e: RiskSpec<f64> = serde_json::from_str(r#"{"kind":"expectation"}"#).unwrap();
        assert_eq!(e, RiskSpec::Expectation);
    }

    #[test]
    fn comonotone_combination_of_identical_laws() {
        let q = quarters();
        let c = comonotone_combination(&q, &q, 0.3).unwrap();
        assert_eq!(c.values(), q.values());
    }

    fn arb_dist() -> impl Strategy<Value = ScalarDistribution<f64>> {
        prop::collection::vec((-10.0f64..10.0, 0.01f64..1.0), 1..50)
            .prop_map(|v| ScalarDistribution::from_pairs(v).unwrap())
    }

    proptest! {
        #[test]
        fn avar_matches_ru_oracle(dist in arb_dist(), alpha in 0.01f64..0.99) {
            let a = avar(&dist, alpha).unwrap();
            let b = avar_ru_oracle(&dist, alpha).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }

        #[test]
        fn avar_between_mean_and_max(dist in arb_dist(), alpha in 0.01f64..0.99) {
            let a = avar(&dist, alpha).unwrap();
            prop_assert!(a >= dist.mean() - 1e-10 && a <= dist.max_value() + 1e-10);
        }
    }
}
