//! Convex expressions built from a small grammar, and mixed-integer convex
//! programs solved by lattice enumeration plus a nested line search on the
//! continuous slice.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use super::Solution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Expression tree over `y`. Only trees accepted by [`ConvexExpr::curvature`]
/// are used as objectives or constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexExpr<T> {
    Const(T),
    Var(usize),
    /// `coeffs . y + constant`
    Affine {
        coeffs: Vec<T>,
        constant: T,
    },
    Sum(Vec<ConvexExpr<T>>),
    Max(Vec<ConvexExpr<T>>),
    Scale(T, Box<ConvexExpr<T>>),
    Abs(Box<ConvexExpr<T>>),
    /// Even power of an affine argument.
    Pow(u32, Box<ConvexExpr<T>>),
    /// Euclidean norm of a vector of affine arguments.
    Norm(Vec<ConvexExpr<T>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Affine,
    Convex,
}

impl<T: Scalar> ConvexExpr<T> {
    pub fn var(i: usize) -> Self {
        ConvexExpr::Var(i)
    }

    pub fn affine(coeffs: Vec<T>, constant: T) -> Self {
        ConvexExpr::Affine { coeffs, constant }
    }

    pub fn abs(e: Self) -> Self {
        ConvexExpr::Abs(Box::new(e))
    }

    pub fn pow(k: u32, e: Self) -> Self {
        ConvexExpr::Pow(k, Box::new(e))
    }

    pub fn scale(c: T, e: Self) -> Self {
        ConvexExpr::Scale(c, Box::new(e))
    }

    /// Checks the composition rules and reports the curvature, or an error
    /// naming the offending node.
    pub fn curvature(&self) -> Result<Curvature> {
        use ConvexExpr::*;
        let affine_child = |e: &ConvexExpr<T>, what: &str| -> Result<()> {
            match e.curvature()? {
                Curvature::Affine => Ok(()),
                Curvature::Convex => Err(Error::InvalidSpec(format!(
                    "{what} needs an affine argument"
                ))),
            }
        };
        match self {
            Const(c) => finite(*c).map(|_| Curvature::Affine),
            Var(_) => Ok(Curvature::Affine),
            Affine { coeffs, constant } => {
                for &c in coeffs.iter().chain(std::iter::once(constant)) {
                    finite(c)?;
                }
                Ok(Curvature::Affine)
            }
            Sum(es) => {
                let mut all_affine = true;
                for e in es {
                    all_affine &= e.curvature()? == Curvature::Affine;
                }
                Ok(if all_affine {
                    Curvature::Affine
                } else {
                    Curvature::Convex
                })
            }
            Max(es) => {
                if es.is_empty() {
                    return Err(Error::InvalidSpec("max of nothing".into()));
                }
                for e in es {
                    e.curvature()?;
                }
                Ok(Curvature::Convex)
            }
            Scale(c, e) => {
                finite(*c)?;
                let inner = e.curvature()?;
                if *c < T::zero() && inner == Curvature::Convex {
                    return Err(Error::InvalidSpec("negative scale of a convex term".into()));
                }
                Ok(inner)
            }
            Abs(e) => affine_child(e, "abs").map(|_| Curvature::Convex),
            Pow(k, e) => {
                if *k == 1 {
                    return e.curvature();
                }
                if *k == 0 || k % 2 == 1 {
                    return Err(Error::InvalidSpec(format!(
                        "power {k} is not an even integer"
                    )));
                }
                affine_child(e, "pow").map(|_| Curvature::Convex)
            }
            Norm(es) => {
                if es.is_empty() {
                    return Err(Error::InvalidSpec("norm of nothing".into()));
                }
                for e in es {
                    affine_child(e, "norm")?;
                }
                Ok(Curvature::Convex)
            }
        }
    }

    /// Number of variables referenced (largest index plus one).
    pub fn arity(&self) -> usize {
        use ConvexExpr::*;
        match self {
            Const(_) => 0,
            Var(i) => i + 1,
            Affine { coeffs, .. } => coeffs.len(),
            Sum(es) | Max(es) | Norm(es) => es.iter().map(|e| e.arity()).max().unwrap_or(0),
            Scale(_, e) | Abs(e) | Pow(_, e) => e.arity(),
        }
    }

    /// Evaluates at `y`; missing coordinates read as zero.
    pub fn eval(&self, y: &[T]) -> T {
        use ConvexExpr::*;
        match self {
            Const(c) => *c,
            Var(i) => y.get(*i).copied().unwrap_or(T::zero()),
            Affine { coeffs, constant } => coeffs
                .iter()
                .zip(y)
                .fold(*constant, |acc, (&c, &v)| acc + c * v),
            Sum(es) => es.iter().map(|e| e.eval(y)).sum(),
            Max(es) => es
                .iter()
                .map(|e| e.eval(y))
                .fold(T::neg_infinity(), |a, b| a.max(b)),
            Scale(c, e) => *c * e.eval(y),
            Abs(e) => e.eval(y).abs(),
            Pow(k, e) => e.eval(y).powi(*k as i32),
            Norm(es) => es.iter().map(|e| e.eval(y).powi(2)).sum::<T>().sqrt(),
        }
    }

    /// Prefix-array encoding, e.g. `["sum", ["pow", 2, ["var", 0]], ["const", 1]]`.
    pub fn to_json(&self) -> Value {
        use ConvexExpr::*;
        let f = |v: T| json!(v.as_f64());
        match self {
            Const(c) => json!(["const", f(*c)]),
            Var(i) => json!(["var", i]),
            Affine { coeffs, constant } => {
                let cs: Vec<f64> = coeffs.iter().map(|c| c.as_f64()).collect();
                json!(["affine", cs, f(*constant)])
            }
            Sum(es) | Max(es) | Norm(es) => {
                let tag = match self {
                    Sum(_) => "sum",
                    Max(_) => "max",
                    _ => "norm",
                };
                let mut arr = vec![json!(tag)];
                arr.extend(es.iter().map(|e| e.to_json()));
                Value::Array(arr)
            }
            Scale(c, e) => json!(["scale", f(*c), e.to_json()]),
            Abs(e) => json!(["abs", e.to_json()]),
            Pow(k, e) => json!(["pow", k, e.to_json()]),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let arr = v
            .as_array()
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::Parse(format!("expected a non-empty array, got {v}")))?;
        let tag = arr[0]
            .as_str()
            .ok_or_else(|| Error::Parse(format!("expected an operator name, got {}", arr[0])))?;
        let args = &arr[1..];
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "`{tag}` takes {n} arguments, got {}",
                    args.len()
                )))
            }
        };
        let list = || args.iter().map(Self::from_json).collect::<Result<Vec<_>>>();
        Ok(match tag {
            "const" => {
                want(1)?;
                ConvexExpr::Const(number(&args[0])?)
            }
            "var" => {
                want(1)?;
                ConvexExpr::Var(index(&args[0])?)
            }
            "affine" => {
                want(2)?;
                let coeffs = args[0]
                    .as_array()
                    .ok_or_else(|| Error::Parse("affine coefficients must be an array".into()))?
                    .iter()
                    .map(number)
                    .collect::<Result<Vec<T>>>()?;
                ConvexExpr::Affine {
                    coeffs,
                    constant: number(&args[1])?,
                }
            }
            "sum" => ConvexExpr::Sum(list()?),
            "max" => ConvexExpr::Max(list()?),
            "norm" => ConvexExpr::Norm(list()?),
            "scale" => {
                want(2)?;
                ConvexExpr::scale(number(&args[0])?, Self::from_json(&args[1])?)
            }
            "abs" => {
                want(1)?;
                ConvexExpr::abs(Self::from_json(&args[0])?)
            }
            "pow" => {
                want(2)?;
                let k = u32::try_from(index(&args[0])?)
                    .map_err(|_| Error::Parse("power too large".into()))?;
                ConvexExpr::pow(k, Self::from_json(&args[1])?)
            }
            other => return Err(Error::Parse(format!("unknown operator `{other}`"))),
        })
    }
}

fn finite<T: Scalar>(c: T) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("expression constant"))
    }
}

pub(crate) fn number<T: Scalar>(v: &Value) -> Result<T> {
    v.as_f64()
        .map(T::lit)
        .ok_or_else(|| Error::Parse(format!("expected a number, got {v}")))
}

pub(crate) fn index(v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|i| i as usize)
        .ok_or_else(|| Error::Parse(format!("expected a nonnegative integer, got {v}")))
}

impl<T: Scalar> Serialize for ConvexExpr<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ConvexExpr<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let e = Self::from_json(&v).map_err(D::Error::custom)?;
        e.curvature().map_err(D::Error::custom)?;
        Ok(e)
    }
}

/// `min v(y)  s.t.  g_i(y) <= rhs_i`, where `y` holds `n_continuous`
/// continuous coordinates (restricted to `continuous_box`) followed by
/// `n_integer` integer ones (restricted to `integer_bounds`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexMixedProgram<T> {
    pub objective: ConvexExpr<T>,
    pub constraints: Vec<ConvexExpr<T>>,
    pub rhs: Vec<T>,
    pub n_continuous: usize,
    pub n_integer: usize,
    pub integer_bounds: Vec<(i64, i64)>,
    pub continuous_box: Vec<(T, T)>,
}

impl<T: Scalar> ConvexMixedProgram<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_continuous + self.n_integer;
        self.objective.curvature()?;
        for g in &self.constraints {
            g.curvature()?;
        }
        if self.constraints.len() != self.rhs.len() {
            return Err(Error::Malformed("constraint/rhs count mismatch".into()));
        }
        let arity = std::iter::once(&self.objective)
            .chain(&self.constraints)
            .map(|e| e.arity())
            .max()
            .unwrap_or(0);
        if arity > n {
            return Err(Error::DimMismatch {
                expected: n,
                found: arity,
            });
        }
        if self.integer_bounds.len() != self.n_integer {
            return Err(Error::DimMismatch {
                expected: self.n_integer,
                found: self.integer_bounds.len(),
            });
        }
        if self.continuous_box.len() != self.n_continuous {
            return Err(Error::DimMismatch {
                expected: self.n_continuous,
                found: self.continuous_box.len(),
            });
        }
        if self.integer_bounds.iter().any(|(lo, hi)| lo > hi) {
            return Err(Error::Malformed("empty integer bounds".into()));
        }
        let box_ok = self
            .continuous_box
            .iter()
            .all(|&(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi);
        if !box_ok {
            return Err(Error::Malformed(
                "continuous box must be finite and nonempty".into(),
            ));
        }
        Ok(())
    }

    /// Constraint violation `max(0, max_i g_i(y) - rhs_i)`.
    pub fn violation(&self, y: &[T]) -> T {
        self.constraints
            .iter()
            .zip(&self.rhs)
            .fold(T::zero(), |acc, (g, &h)| acc.max(g.eval(y) - h))
    }
}

/// Violation below which a point counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
const GOLDEN_ITER_CAP: usize = 200;

/// Enumerates integer assignments; on each continuous slice, minimizes the
/// pair (excess violation, objective) lexicographically by nested
/// golden-section search. Both components are convex along every
/// coordinate after partial minimization, so the pair is unimodal and the
/// search is exact up to its bracket width.
pub fn solve_convex_mip<T: Scalar>(cmp: &ConvexMixedProgram<T>) -> Result<Solution<T>> {
    cmp.validate()?;
    let ints = super::IntegerBox::new((0..cmp.n_integer).collect(), cmp.integer_bounds.clone());
    let n = cmp.n_continuous + cmp.n_integer;
    let mut best: Option<(T, Vec<T>)> = None;
    let mut y = vec![T::zero(); n];
    ints.for_each_point(|pt| {
        for (k, &v) in pt.iter().enumerate() {
            y[cmp.n_continuous + k] = T::lit(v as f64);
        }
        let (excess, value) = minimize_slice(cmp, 0, &mut y);
        if excess == T::zero() && best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, y.clone()));
        }
        Ok(())
    })?;
    Ok(match best {
        Some((value, point)) => Solution::Optimal { value, point },
        None => Solution::Infeasible,
    })
}

type Pair<T> = (T, T);

fn lex_less<T: Scalar>(a: Pair<T>, b: Pair<T>) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn score<T: Scalar>(cmp: &ConvexMixedProgram<T>, y: &[T]) -> Pair<T> {
    let excess = (cmp.violation(y) - T::lit(FEASIBILITY_TOL)).max(T::zero());
    (excess, cmp.objective.eval(y))
}

/// Minimizes over coordinates `k..n_continuous` with the earlier ones held
/// fixed in `y`; leaves the minimizer in `y`.
fn minimize_slice<T: Scalar>(cmp: &ConvexMixedProgram<T>, k: usize, y: &mut [T]) -> Pair<T> {
    if k == cmp.n_continuous {
        return score(cmp, y);
    }
    let (mut a, mut b) = cmp.continuous_box[k];
    let eval = |t: T, y: &mut [T]| {
        y[k] = t;
        minimize_slice(cmp, k + 1, y)
    };
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let width_tol = T::lit(1e-12) * (T::one() + a.abs().max(b.abs()));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c, y);
    let mut fd = eval(d, y);
    let mut iter = 0;
    while b - a > width_tol && iter < GOLDEN_ITER_CAP {
        iter += 1;
        if lex_less(fc, fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, y);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, y);
        }
    }
    // The box ends are candidates too: golden-section never evaluates them.
    let lo = cmp.continuous_box[k].0;
    let hi = cmp.continuous_box[k].1;
    let mut best_t = c;
    let mut best = fc;
    for t in [d, lo, hi] {
        let f = eval(t, y);
        if lex_less(f, best) {
            best = f;
            best_t = t;
        }
    }
    eval(best_t, y)
}
