//! Candidate discontinuity set of mixed-integer linear recourse, and a
//! probe that reports which one-sided semicontinuity a function shows at a
//! point.

use super::{ParamMap, RecourseModel};
use crate::error::{Error, Result};
use crate::measure::ValueFunction;
use crate::scalar::{euclidean_norm, Scalar};

/// Boundary of the cone `{A_1 y_1 : y_1 >= 0}` in `R^k`, `k <= 2`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeBoundary<T> {
    /// The cone is the whole space.
    Empty,
    Origin,
    /// A line through the origin with unit direction.
    Line(Vec<T>),
    /// One or two rays from the origin with unit directions.
    Rays(Vec<Vec<T>>),
}

const ANGLE_TOL: f64 = 1e-12;

impl<T: Scalar> ConeBoundary<T> {
    /// Boundary of the cone generated by the columns of `a1` (`k x m1`).
    pub fn of_generators(a1: &[Vec<T>]) -> Result<Self> {
        let k = a1.len();
        let m1 = a1.first().map_or(0, |r| r.len());
        let gens: Vec<Vec<f64>> = (0..m1)
            .map(|j| a1.iter().map(|r| r[j].as_f64()).collect::<Vec<f64>>())
            .filter(|g| g.iter().any(|&v| v.abs() > ANGLE_TOL))
            .collect();
        match k {
            1 => {
                let pos = gens.iter().any(|g| g[0] > 0.0);
                let neg = gens.iter().any(|g| g[0] < 0.0);
                Ok(if pos && neg {
                    ConeBoundary::Empty
                } else {
                    ConeBoundary::Origin
                })
            }
            2 => {
                if gens.is_empty() {
                    return Ok(ConeBoundary::Origin);
                }
                let tau = std::f64::consts::TAU;
                let mut angles: Vec<f64> = gens
                    .iter()
                    .map(|g| g[1].atan2(g[0]).rem_euclid(tau))
                    .collect();
                angles.sort_by(|a, b| a.total_cmp(b));
                angles.dedup_by(|a, b| (*a - *b).abs() <= ANGLE_TOL);
                let n = angles.len();
                let (mut gap, mut at) = (-1.0, 0);
                for i in 0..n {
                    let next = if i + 1 < n {
                        angles[i + 1]
                    } else {
                        angles[0] + tau
                    };
                    if next - angles[i] > gap {
                        gap = next - angles[i];
                        at = i;
                    }
                }
                let unit = |t: f64| vec![T::lit(t.cos()), T::lit(t.sin())];
                let pi = std::f64::consts::PI;
                Ok(if gap < pi - ANGLE_TOL {
                    ConeBoundary::Empty
                } else if gap <= pi + ANGLE_TOL {
                    ConeBoundary::Line(unit(angles[at]))
                } else {
                    let other = angles[(at + 1) % n];
                    if (other - angles[at]).abs() <= ANGLE_TOL {
                        ConeBoundary::Rays(vec![unit(angles[at])])
                    } else {
                        ConeBoundary::Rays(vec![unit(angles[at]), unit(other)])
                    }
                })
            }
            _ => Err(Error::DimensionUnsupported(k)),
        }
    }

    /// Euclidean distance from `p` to the boundary (infinite when empty).
    pub fn distance(&self, p: &[T]) -> T {
        let proj = |d: &[T]| p.iter().zip(d).map(|(&a, &b)| a * b).sum::<T>();
        let perp = |d: &[T], t: T| {
            let r: Vec<T> = p.iter().zip(d).map(|(&a, &b)| a - t * b).collect();
            euclidean_norm(&r)
        };
        match self {
            ConeBoundary::Empty => T::infinity(),
            ConeBoundary::Origin => euclidean_norm(p),
            ConeBoundary::Line(d) => perp(d, proj(d)),
            ConeBoundary::Rays(rs) => rs
                .iter()
                .map(|d| {
                    let t = proj(d);
                    if t > T::zero() {
                        perp(d, t)
                    } else {
                        euclidean_norm(p)
                    }
                })
                .fold(T::infinity(), T::min),
        }
    }
}

/// Membership test for `h^{-1}(U_{y2} ({A_2 y_2} + boundary))`, the set
/// outside of which mixed-integer linear recourse is continuous. `y_2`
/// ranges over the model's integer box.
#[derive(Debug, Clone)]
pub struct MilpDiscontinuity<T> {
    h: ParamMap<T>,
    shifts: Vec<Vec<T>>,
    boundary: ConeBoundary<T>,
}

/// Distance below which a point is reported as a candidate.
pub const CANDIDATE_TOL: f64 = 1e-9;

impl<T: Scalar> MilpDiscontinuity<T> {
    pub fn new(model: &RecourseModel<T>) -> Result<Self> {
        let RecourseModel::Milp { a, m1, m2, h, .. } = model else {
            return Err(Error::InvalidSpec(format!(
                "discontinuity predicate needs a milp model, got {}",
                model.kind()
            )));
        };
        model.validate()?;
        let k = a.len();
        if k > 2 {
            return Err(Error::DimensionUnsupported(k));
        }
        if *m2 == 0 {
            return Ok(MilpDiscontinuity {
                h: h.clone(),
                shifts: vec![],
                boundary: ConeBoundary::Empty,
            });
        }
        let a1: Vec<Vec<T>> = a.iter().map(|r| r[..*m1].to_vec()).collect();
        let boundary = ConeBoundary::of_generators(&a1)?;
        let ints = model.integer_box();
        let mut shifts = Vec::new();
        ints.for_each_point(|y2| {
            let s: Vec<T> = a
                .iter()
                .map(|r| {
                    r[*m1..]
                        .iter()
                        .zip(y2)
                        .map(|(&c, &v)| c * T::lit(v as f64))
                        .sum()
                })
                .collect();
            shifts.push(s);
            Ok(())
        })?;
        Ok(MilpDiscontinuity {
            h: h.clone(),
            shifts,
            boundary,
        })
    }

    pub fn boundary(&self) -> &ConeBoundary<T> {
        &self.boundary
    }

    /// Distance of `h(x, z)` to the candidate set in `h`-space.
    pub fn candidate_distance(&self, x: &[T], z: &[T]) -> Result<T> {
        let t = self.h.eval(x, z)?;
        Ok(self
            .shifts
            .iter()
            .map(|s| {
                let p: Vec<T> = t.iter().zip(s).map(|(&a, &b)| a - b).collect();
                self.boundary.distance(&p)
            })
            .fold(T::infinity(), T::min))
    }

    pub fn is_candidate(&self, x: &[T], z: &[T]) -> Result<bool> {
        Ok(self.candidate_distance(x, z)? <= T::lit(CANDIDATE_TOL))
    }
}

/// Convenience wrapper for [`MilpDiscontinuity::new`].
pub fn milp_discontinuity_predicate<T: Scalar>(
    model: &RecourseModel<T>,
) -> Result<MilpDiscontinuity<T>> {
    MilpDiscontinuity::new(model)
}

/// Semicontinuity observed at a point from nearby probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semicontinuity {
    Continuous,
    LowerOnly,
    UpperOnly,
    Neither,
}

/// Compares `f(x, z)` with `f` at `probes` points along each coordinate
/// direction of `z`, at distances up to `radius`.
pub fn probe_semicontinuity<T, F>(
    f: &F,
    x: &[T],
    z: &[T],
    radius: T,
    probes: usize,
    tol: T,
) -> Result<Semicontinuity>
where
    T: Scalar,
    F: ValueFunction<T> + ?Sized,
{
    let f0 = f.value(x, z)?;
    let (mut lo, mut hi) = (f0, f0);
    let mut zz = z.to_vec();
    for j in 0..z.len() {
        for k in 1..=probes {
            let step = radius / T::from_usize_lossy(1 << (k - 1).min(60));
            for sign in [-T::one(), T::one()] {
                zz[j] = z[j] + sign * step;
                let v = f.value(x, &zz)?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        zz[j] = z[j];
    }
    let lower = lo >= f0 - tol;
    let upper = hi <= f0 + tol;
    Ok(match (lower, upper) {
        (true, true) => Semicontinuity::Continuous,
        (true, false) => Semicontinuity::LowerOnly,
        (false, true) => Semicontinuity::UpperOnly,
        (false, false) => Semicontinuity::Neither,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::simple_milp;
    use super::*;
    use crate::recourse::eval_recourse;

    #[test]
    fn ceiling_candidates() {
        let m = simple_milp(10);
        let p = milp_discontinuity_predicate(&m).unwrap();
        assert_eq!(p.boundary(), &ConeBoundary::Origin);
        for h in 0..=10 {
            assert!(p.is_candidate(&[0.0], &[h as f64]).unwrap());
        }
        assert!(!p.is_candidate(&[0.0], &[0.5]).unwrap());
        assert!((p.candidate_distance(&[0.0], &[0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(!p.is_candidate(&[0.0], &[-1.0]).unwrap());
    }

    #[test]
    fn jumps_sit_on_candidates() {
        let m = simple_milp(10);
        for h in 0..5 {
            let h = h as f64;
            let left = eval_recourse(&m, &[0.0], &[h - 1e-6]).unwrap();
            let right = eval_recourse(&m, &[0.0], &[h + 1e-6]).unwrap();
            assert!(right - left >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn continuous_part_has_no_candidates() {
        let mut m = simple_milp(10);
        if let RecourseModel::Milp {
            a,
            q,
            m1,
            m2,
            integer_bounds,
            ..
        } = &mut m
        {
            *a = vec![vec![-1.0, 1.0]];
            *q = vec![0.0, 1.0];
            *m1 = 2;
            *m2 = 0;
            integer_bounds.clear();
        }
        let p = milp_discontinuity_predicate(&m).unwrap();
        assert!(p.candidate_distance(&[0.0], &[0.0]).unwrap().is_infinite());
    }

    #[test]
    fn planar_cones() {
        let quadrant: ConeBoundary<f64> =
            ConeBoundary::of_generators(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(quadrant, ConeBoundary::Rays(ref r) if r.len() == 2));
        assert!((quadrant.distance(&[1.0, 2.0]) - 1.0).abs() < 1e-12);
        assert!((quadrant.distance(&[-3.0, -4.0]) - 5.0).abs() < 1e-12);
        let half: ConeBoundary<f64> =
            ConeBoundary::of_generators(&[vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(half, ConeBoundary::Line(_)));
        assert!((half.distance(&[5.0, -2.0]) - 2.0).abs() < 1e-12);
        let plane: ConeBoundary<f64> =
            ConeBoundary::of_generators(&[vec![1.0, -1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0]])
                .unwrap();
        assert_eq!(plane, ConeBoundary::Empty);
        let ray: ConeBoundary<f64> =
            ConeBoundary::of_generators(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(ray, ConeBoundary::Rays(ref r) if r.len() == 1));
        assert!(matches!(
            ConeBoundary::<f64>::of_generators(&[vec![1.0], vec![1.0], vec![1.0]]),
            Err(Error::DimensionUnsupported(3))
        ));
    }

    #[test]
    fn observed_semicontinuity_of_ceiling() {
        let m = simple_milp(10);
        // ceil jumps up immediately to the right of an integer
        let s = probe_semicontinuity(&m, &[0.0], &[1.0], 0.1, 10, 1e-9).unwrap();
        assert_eq!(s, Semicontinuity::LowerOnly);
        let s = probe_semicontinuity(&m, &[0.0], &[1.5], 0.1, 10, 1e-9).unwrap();
        assert_eq!(s, Semicontinuity::Continuous);
    }
}
