//! Recourse value functions `f(x, z)`: the optimal value of a second-stage
//! problem whose data depend on the decision `x` and the scenario `z`.

mod discontinuity;
mod growth;
mod param;

pub use discontinuity::{
    milp_discontinuity_predicate, probe_semicontinuity, ConeBoundary, MilpDiscontinuity,
    Semicontinuity,
};
pub use growth::{certify_growth, GrowthCertificate};
pub use param::{MapExpr, ParamMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::ValueFunction;
use crate::optim::{
    check_pd, solve_convex_mip, solve_lp, solve_milp, solve_miqp, ConvexExpr, ConvexMixedProgram,
    IntegerBox, LinearProgram, MixedIntegerProgram, QuadraticMixedProgram, RowSense, Solution,
};
use crate::scalar::{to_f64_vec, Scalar};

/// The four recourse problem classes. Integer variables always come last in
/// `y` and need explicit finite bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum RecourseModel<T> {
    /// `min q(x,z)^T y  s.t.  A y = h(x,z), y >= 0`.
    Linear {
        a: Vec<Vec<T>>,
        q: ParamMap<T>,
        h: ParamMap<T>,
    },
    /// `min q^T y  s.t.  A y = h(x,z), y >= 0, y in R^m1 x Z^m2`.
    /// `A` is assumed to have rational entries.
    Milp {
        a: Vec<Vec<T>>,
        q: Vec<T>,
        m1: usize,
        m2: usize,
        h: ParamMap<T>,
        integer_bounds: Vec<(i64, i64)>,
    },
    /// `min y^T D y + q(x,z)^T y  s.t.  A y <= h(x,z), y in R^m1 x Z^m2`
    /// with `D` symmetric positive definite.
    Miqp {
        d: Vec<Vec<T>>,
        a: Vec<Vec<T>>,
        q: ParamMap<T>,
        h: ParamMap<T>,
        m1: usize,
        m2: usize,
        integer_bounds: Vec<(i64, i64)>,
    },
    /// `min v(y)  s.t.  g(y) <= h(x,z), y in R^m1 x Z^m2`, the continuous
    /// part searched inside `continuous_box`.
    ConvexMip {
        v: ConvexExpr<T>,
        g: Vec<ConvexExpr<T>>,
        h: ParamMap<T>,
        m1: usize,
        m2: usize,
        integer_bounds: Vec<(i64, i64)>,
        continuous_box: Vec<(T, T)>,
    },
}

fn dims<T>(rows: &[Vec<T>], k: usize, m: usize, what: &str) -> Result<()> {
    if rows.len() != k {
        return Err(Error::Malformed(format!(
            "{what} has {} rows, expected {k}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::Malformed(format!(
            "{what} row has {} columns, expected {m}",
            r.len()
        )));
    }
    Ok(())
}

fn same_inputs<T: Scalar>(q: &ParamMap<T>, h: &ParamMap<T>) -> Result<()> {
    if q.x_dim() != h.x_dim() || q.z_dim() != h.z_dim() {
        return Err(Error::Malformed(
            "q and h maps read different (x, z) dimensions".into(),
        ));
    }
    Ok(())
}

fn positive<T: Scalar>(g: T, name: &str) -> Result<()> {
    if g > T::zero() && g.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!(
            "{name} = {g} must be positive"
        )))
    }
}

impl<T: Scalar> RecourseModel<T> {
    pub fn h_map(&self) -> &ParamMap<T> {
        match self {
            RecourseModel::Linear { h, .. }
            | RecourseModel::Milp { h, .. }
            | RecourseModel::Miqp { h, .. }
            | RecourseModel::ConvexMip { h, .. } => h,
        }
    }

    pub fn x_dim(&self) -> usize {
        self.h_map().x_dim()
    }

    pub fn z_dim(&self) -> usize {
        self.h_map().z_dim()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RecourseModel::Linear { .. } => "linear",
            RecourseModel::Milp { .. } => "milp",
            RecourseModel::Miqp { .. } => "miqp",
            RecourseModel::ConvexMip { .. } => "convex_mip",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.h_map();
        h.validate()?;
        let k = h.output_dim();
        match self {
            RecourseModel::Linear { a, q, .. } => {
                q.validate()?;
                same_inputs(q, h)?;
                dims(a, k, q.output_dim(), "A")?;
            }
            RecourseModel::Milp {
                a,
                q,
                m1,
                m2,
                integer_bounds,
                ..
            } => {
                if q.len() != m1 + m2 {
                    return Err(Error::Malformed(format!(
                        "q has length {}, expected {}",
                        q.len(),
                        m1 + m2
                    )));
                }
                dims(a, k, m1 + m2, "A")?;
                check_bounds(integer_bounds, *m2)?;
                if integer_bounds.iter().any(|b| b.0 < 0) {
                    return Err(Error::Malformed(
                        "MILP recourse variables are nonnegative".into(),
                    ));
                }
            }
            RecourseModel::Miqp {
                d,
                a,
                q,
                m1,
                m2,
                integer_bounds,
                ..
            } => {
                q.validate()?;
                same_inputs(q, h)?;
                let m = m1 + m2;
                if q.output_dim() != m {
                    return Err(Error::Malformed(format!(
                        "q has {} outputs, expected {m}",
                        q.output_dim()
                    )));
                }
                dims(a, k, m, "A")?;
                check_pd(d, m)?;
                check_bounds(integer_bounds, *m2)?;
            }
            RecourseModel::ConvexMip {
                v,
                g,
                m1,
                m2,
                integer_bounds,
                continuous_box,
                ..
            } => {
                if g.len() != k {
                    return Err(Error::Malformed(format!(
                        "{} constraints but h has {k} outputs",
                        g.len()
                    )));
                }
                let p = ConvexMixedProgram {
                    objective: v.clone(),
                    constraints: g.clone(),
                    rhs: vec![T::zero(); k],
                    n_continuous: *m1,
                    n_integer: *m2,
                    integer_bounds: integer_bounds.clone(),
                    continuous_box: continuous_box.clone(),
                };
                p.validate()?;
            }
        }
        Ok(())
    }

    /// The growth exponent promised for this class: `gq + gh` (linear),
    /// `gh` (MILP), `max(2 gq, 2 gh)` (MIQP), `gh (gk + 1)(gv + 1)` (convex).
    /// Only the exponents the class uses are checked.
    pub fn theoretical_exponent(
        &self,
        gamma_q: T,
        gamma_h: T,
        gamma_v: T,
        gamma_k: T,
    ) -> Result<T> {
        let two = T::lit(2.0);
        match self {
            RecourseModel::Linear { .. } => {
                positive(gamma_q, "gamma_q")?;
                positive(gamma_h, "gamma_h")?;
                Ok(gamma_q + gamma_h)
            }
            RecourseModel::Milp { .. } => {
                positive(gamma_h, "gamma_h")?;
                Ok(gamma_h)
            }
            RecourseModel::Miqp { .. } => {
                positive(gamma_q, "gamma_q")?;
                positive(gamma_h, "gamma_h")?;
                Ok((two * gamma_q).max(two * gamma_h))
            }
            RecourseModel::ConvexMip { .. } => {
                positive(gamma_h, "gamma_h")?;
                positive(gamma_k, "gamma_k")?;
                positive(gamma_v, "gamma_v")?;
                Ok(gamma_h * (gamma_k + T::one()) * (gamma_v + T::one()))
            }
        }
    }

    /// [`Self::theoretical_exponent`] with `gamma_q` and `gamma_h` read off
    /// the parameter maps.
    pub fn growth_exponent(&self, gamma_v: T, gamma_k: T) -> Result<T> {
        let gh = self.h_map().map_exponent()?;
        let gq = match self {
            RecourseModel::Linear { q, .. } | RecourseModel::Miqp { q, .. } => q.map_exponent()?,
            _ => T::one(),
        };
        self.theoretical_exponent(gq, gh, gamma_v, gamma_k)
    }

    /// Integer box of the second-stage variables (`m2` trailing indices).
    pub fn integer_box(&self) -> IntegerBox {
        match self {
            RecourseModel::Linear { .. } => IntegerBox::empty(),
            RecourseModel::Milp {
                m1,
                m2,
                integer_bounds,
                ..
            }
            | RecourseModel::Miqp {
                m1,
                m2,
                integer_bounds,
                ..
            }
            | RecourseModel::ConvexMip {
                m1,
                m2,
                integer_bounds,
                ..
            } => IntegerBox::new((*m1..m1 + m2).collect(), integer_bounds.clone()),
        }
    }

    /// Solves the second-stage problem at `(x, z)` and returns the optimal
    /// value and point.
    pub fn solve(&self, x: &[T], z: &[T]) -> Result<(T, Vec<T>)> {
        let hv = self.h_map().eval(x, z)?;
        let sol = match self {
            RecourseModel::Linear { a, q, .. } => {
                let qv = q.eval(x, z)?;
                let k = a.len();
                solve_lp(&LinearProgram::new(
                    qv,
                    a.clone(),
                    hv,
                    vec![RowSense::Eq; k],
                )?)?
            }
            RecourseModel::Milp { a, q, .. } => {
                let k = a.len();
                let lp = LinearProgram::new(q.clone(), a.clone(), hv, vec![RowSense::Eq; k])?;
                solve_milp(&MixedIntegerProgram::new(lp, self.integer_box())?)?
            }
            RecourseModel::Miqp { d, a, q, .. } => {
                let qmp = QuadraticMixedProgram {
                    d: d.clone(),
                    linear: q.eval(x, z)?,
                    rows: a.clone(),
                    rhs: hv,
                    integers: self.integer_box(),
                };
                solve_miqp(&qmp)?
            }
            RecourseModel::ConvexMip {
                v,
                g,
                m1,
                m2,
                integer_bounds,
                continuous_box,
                ..
            } => solve_convex_mip(&ConvexMixedProgram {
                objective: v.clone(),
                constraints: g.clone(),
                rhs: hv,
                n_continuous: *m1,
                n_integer: *m2,
                integer_bounds: integer_bounds.clone(),
                continuous_box: continuous_box.clone(),
            })?,
        };
        match sol {
            Solution::Optimal { value, point } => Ok((value, point)),
            Solution::Infeasible => Err(Error::RecourseInfeasible {
                x: to_f64_vec(x),
                z: to_f64_vec(z),
            }),
            Solution::Unbounded => Err(Error::RecourseUnbounded {
                x: to_f64_vec(x),
                z: to_f64_vec(z),
            }),
        }
    }
}

fn check_bounds(bounds: &[(i64, i64)], m2: usize) -> Result<()> {
    if bounds.len() != m2 {
        return Err(Error::Malformed(format!(
            "{} integer bounds for {m2} integer variables",
            bounds.len()
        )));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| lo > hi) {
        return Err(Error::Malformed(format!(
            "integer bounds [{lo},{hi}] empty"
        )));
    }
    Ok(())
}

/// Optimal value `f(x, z)` of the recourse problem.
pub fn eval_recourse<T: Scalar>(model: &RecourseModel<T>, x: &[T], z: &[T]) -> Result<T> {
    model.solve(x, z).map(|(v, _)| v)
}

impl<T: Scalar> ValueFunction<T> for RecourseModel<T> {
    fn value(&self, x: &[T], z: &[T]) -> Result<T> {
        eval_recourse(self, x, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{enumerate_oracle, OracleProblem};
    use rand::{Rng, SeedableRng};

    pub(crate) fn simple_linear() -> RecourseModel<f64> {
        RecourseModel::Linear {
            a: vec![vec![1.0, -1.0]],
            q: ParamMap::constant(vec![1.0, 1.0], 1, 1),
            h: ParamMap::affine(vec![vec![1.0]], vec![vec![-1.0]], vec![0.0]).unwrap(),
        }
    }

    pub(crate) fn simple_milp(hi: i64) -> RecourseModel<f64> {
        RecourseModel::Milp {
            a: vec![vec![-1.0, 1.0]],
            q: vec![0.0, 1.0],
            m1: 1,
            m2: 1,
            h: ParamMap::affine(vec![vec![0.0]], vec![vec![1.0]], vec![0.0]).unwrap(),
            integer_bounds: vec![(0, hi)],
        }
    }

    fn simple_miqp() -> RecourseModel<f64> {
        RecourseModel::Miqp {
            d: vec![vec![1.0]],
            a: vec![vec![-1.0]],
            q: ParamMap::constant(vec![0.0], 1, 1),
            h: ParamMap::affine(vec![vec![0.0]], vec![vec![1.0]], vec![0.0]).unwrap(),
            m1: 0,
            m2: 1,
            integer_bounds: vec![(-10, 10)],
        }
    }

    #[test]
    fn evaluation_examples() {
        let lin = simple_linear();
        lin.validate().unwrap();
        assert!((eval_recourse(&lin, &[2.0], &[0.5]).unwrap() - 1.5).abs() < 1e-12);
        let milp = simple_milp(10);
        milp.validate().unwrap();
        assert_eq!(eval_recourse(&milp, &[0.0], &[1.2]).unwrap(), 2.0);
        let miqp = simple_miqp();
        miqp.validate().unwrap();
        assert_eq!(eval_recourse(&miqp, &[0.0], &[-1.5]).unwrap(), 4.0);
    }

    #[test]
    fn simple_recourse_is_absolute_value() {
        let lin = simple_linear();
        for i in -20..=20 {
            let z = i as f64 * 0.37;
            let f = eval_recourse(&lin, &[0.4], &[z]).unwrap();
            assert!((f - (0.4 - z).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn milp_matches_lattice_oracle() {
        let milp = simple_milp(10);
        let RecourseModel::Milp { a, q, .. } = &milp else {
            unreachable!()
        };
        for i in -30..30 {
            let z = i as f64 * 0.31;
            let lp = LinearProgram::new(q.clone(), a.clone(), vec![z], vec![RowSense::Eq]).unwrap();
            let mip = MixedIntegerProgram::new(lp, milp.integer_box()).unwrap();
            let oracle = enumerate_oracle(OracleProblem::Linear(&mip))
                .unwrap()
                .value()
                .unwrap();
            assert_eq!(eval_recourse(&milp, &[0.0], &[z]).unwrap(), oracle);
            assert_eq!(oracle, z.ceil().max(0.0));
        }
    }

    #[test]
    fn failures_are_reported_per_point() {
        // y = h with y >= 0 has no solution for h < 0
        let m = RecourseModel::Linear {
            a: vec![vec![1.0]],
            q: ParamMap::constant(vec![1.0], 1, 1),
            h: ParamMap::affine(vec![vec![0.0]], vec![vec![1.0]], vec![0.0]).unwrap(),
        };
        let e = eval_recourse(&m, &[0.0], &[-1.0]).unwrap_err();
        assert_eq!(
            e,
            Error::RecourseInfeasible {
                x: vec![0.0],
                z: vec![-1.0]
            }
        );
        assert!(e.is_recourse_failure());
        // min -y1 s.t. y1 - y2 = z is unbounded
        let m = RecourseModel::Linear {
            a: vec![vec![1.0, -1.0]],
            q: ParamMap::constant(vec![-1.0, 0.0], 1, 1),
            h: ParamMap::affine(vec![vec![0.0]], vec![vec![1.0]], vec![0.0]).unwrap(),
        };
        assert!(matches!(
            eval_recourse(&m, &[0.0], &[1.0]),
            Err(Error::RecourseUnbounded { .. })
        ));
    }

    #[test]
    fn exponents() {
        let lin = simple_linear();
        assert_eq!(lin.theoretical_exponent(1.0, 1.0, 0.0, 0.0).unwrap(), 2.0);
        assert_eq!(
            simple_miqp()
                .theoretical_exponent(1.0, 2.0, 0.0, 0.0)
                .unwrap(),
            4.0
        );
        let conv = RecourseModel::ConvexMip {
            v: ConvexExpr::pow(2, ConvexExpr::var(0)),
            g: vec![ConvexExpr::affine(vec![-1.0], 0.0)],
            h: ParamMap::affine(vec![vec![0.0]], vec![vec![1.0]], vec![0.0]).unwrap(),
            m1: 1,
            m2: 0,
            integer_bounds: vec![],
            continuous_box: vec![(-10.0, 10.0)],
        };
        assert_eq!(conv.theoretical_exponent(0.0, 1.0, 2.0, 0.5).unwrap(), 4.5);
        assert!(matches!(
            lin.theoretical_exponent(0.0, 1.0, 0.0, 0.0),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            conv.theoretical_exponent(1.0, 1.0, 2.0, 0.0),
            Err(Error::InvalidExponent(_))
        ));
        assert_eq!(
            simple_milp(5)
                .theoretical_exponent(0.0, 1.0, 0.0, 0.0)
                .unwrap(),
            1.0
        );
        assert_eq!(lin.growth_exponent(1.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn milp_without_integers_agrees_with_linear() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            // A = [1, -1, a3] with positive costs keeps both problems finite
            let a3: f64 = rng.random_range(-2.0..2.0);
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..2.0)).collect();
            let h = ParamMap::affine(
                vec![vec![1.0]],
                vec![vec![rng.random_range(-1.0..1.0)]],
                vec![rng.random_range(-1.0..1.0)],
            )
            .unwrap();
            let a = vec![vec![1.0, -1.0, a3]];
            let milp = RecourseModel::Milp {
                a: a.clone(),
                q: q.clone(),
                m1: 3,
                m2: 0,
                h: h.clone(),
                integer_bounds: vec![],
            };
            let lin = RecourseModel::Linear {
                a,
                q: ParamMap::constant(q, 1, 1),
                h,
            };
            for _ in 0..5 {
                let x = [rng.random_range(-3.0..3.0)];
                let z = [rng.random_range(-3.0..3.0)];
                let f1 = eval_recourse(&milp, &x, &z).unwrap();
                let f2 = eval_recourse(&lin, &x, &z).unwrap();
                assert!((f1 - f2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_recourse_is_continuous() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a = vec![
                vec![1.0, -1.0, rng.random_range(-1.0..1.0)],
                vec![0.0, 1.0, rng.random_range(0.5..1.0)],
            ];
            let q = ParamMap::affine(
                vec![vec![0.0]; 3],
                vec![vec![0.1], vec![0.1], vec![0.1]],
                vec![
                    rng.random_range(2.0..3.0),
                    rng.random_range(2.0..3.0),
                    rng.random_range(2.0..3.0),
                ],
            )
            .unwrap();
            let h = ParamMap::affine(
                vec![vec![1.0], vec![0.5]],
                vec![vec![-1.0], vec![1.0]],
                vec![0.0, 3.0],
            )
            .unwrap();
            let m = RecourseModel::Linear { a, q, h };
            let x = [rng.random_range(-1.0..1.0)];
            let z = rng.random_range(-1.0..1.0);
            let f0 = eval_recourse(&m, &x, &[z]);
            let Ok(f0) = f0 else { continue };
            let mut prev_ratio = None;
            for e in 1..=6 {
                let r = 10f64.powi(-e);
                let osc = [z - r, z + r]
                    .iter()
                    .map(|&zz| (eval_recourse(&m, &x, &[zz]).unwrap() - f0).abs())
                    .fold(0.0, f64::max);
                let ratio = osc / r;
                assert!(ratio < 1e3, "oscillation ratio {ratio}");
                if let Some(p) = prev_ratio {
                    assert!(ratio <= 2.0 * p + 1e-6);
                }
                prev_ratio = Some(ratio);
            }
        }
    }

    #[test]
    fn miqp_lower_semicontinuity() {
        let m = simple_miqp();
        // jumps occur where -z crosses an integer
        for base in [-1.0, -2.0, 0.0, -0.5] {
            let f = eval_recourse(&m, &[0.0], &[base]).unwrap();
            for side in [-1.0, 1.0] {
                let tail: Vec<f64> = (1..=20)
                    .map(|l| eval_recourse(&m, &[0.0], &[base + side * 0.5f64.powi(l)]).unwrap())
                    .collect();
                let inf = tail[10..].iter().copied().fold(f64::INFINITY, f64::min);
                assert!(inf >= f - 1e-7);
            }
        }
    }

    #[test]
    fn json_schema() {
        let m = simple_milp(10);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains(r#""kind":"milp""#));
        assert!(s.contains(r#""integer_bounds":[[0,10]]"#));
        let back: RecourseModel<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let conv: RecourseModel<f64> = serde_json::from_str(
            r#"{"kind": "convex_mip", "v": ["pow", 2, ["var", 0]], "g": [["affine", [-1], 0]],
                "h": {"affine": {"x": [[0]], "z": [[1]], "c": [0]}}, "m1": 1, "m2": 0,
                "integer_bounds": [], "continuous_box": [[-10, 10]]}"#,
        )
        .unwrap();
        conv.validate().unwrap();
        assert!((eval_recourse(&conv, &[0.0], &[-2.0]).unwrap() - 4.0).abs() < 1e-7);
        assert!(eval_recourse(&conv, &[0.0], &[2.0]).unwrap().abs() < 1e-9);
    }
}
