//! Parameter maps `(x, z) -> R^k` feeding the recourse data `q` and `h`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::optim::convex::{index, number};
use crate::scalar::{dot, Scalar};

/// General expression over the decision `x` and the scenario `z`.
#[derive(Debug, Clone, PartialEq)]
pub enum MapExpr<T> {
    Const(T),
    X(usize),
    Z(usize),
    Sum(Vec<MapExpr<T>>),
    Prod(Vec<MapExpr<T>>),
    Neg(Box<MapExpr<T>>),
    Abs(Box<MapExpr<T>>),
    /// `e^k` for integer `k`, `|e|^k` otherwise.
    Pow(T, Box<MapExpr<T>>),
    Max(Vec<MapExpr<T>>),
    Min(Vec<MapExpr<T>>),
    /// Euclidean norm of the arguments.
    Norm(Vec<MapExpr<T>>),
    Scale(T, Box<MapExpr<T>>),
}

impl<T: Scalar> MapExpr<T> {
    pub fn eval(&self, x: &[T], z: &[T]) -> T {
        use MapExpr::*;
        let fold = |es: &[MapExpr<T>], init: T, f: fn(T, T) -> T| {
            es.iter().fold(init, |a, e| f(a, e.eval(x, z)))
        };
        match self {
            Const(c) => *c,
            X(i) => x[*i],
            Z(j) => z[*j],
            Sum(es) => fold(es, T::zero(), |a, b| a + b),
            Prod(es) => fold(es, T::one(), |a, b| a * b),
            Neg(e) => -e.eval(x, z),
            Abs(e) => e.eval(x, z).abs(),
            Pow(k, e) => {
                let v = e.eval(x, z);
                if k.fract() == T::zero() {
                    v.powi(k.to_i32().unwrap_or(i32::MAX))
                } else {
                    v.abs().powf(*k)
                }
            }
            Max(es) => fold(es, T::neg_infinity(), T::max),
            Min(es) => fold(es, T::infinity(), T::min),
            Norm(es) => fold(es, T::zero(), |a, b| a + b * b).sqrt(),
            Scale(c, e) => *c * e.eval(x, z),
        }
    }

    /// Largest `x` and `z` indices used, plus one.
    fn arity(&self) -> (usize, usize) {
        use MapExpr::*;
        let merge = |es: &[MapExpr<T>]| {
            es.iter()
                .map(|e| e.arity())
                .fold((0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
        };
        match self {
            Const(_) => (0, 0),
            X(i) => (i + 1, 0),
            Z(j) => (0, j + 1),
            Sum(es) | Prod(es) | Max(es) | Min(es) | Norm(es) => merge(es),
            Neg(e) | Abs(e) | Pow(_, e) | Scale(_, e) => e.arity(),
        }
    }

    pub fn to_json(&self) -> Value {
        use MapExpr::*;
        let f = |v: &T| json!(v.as_f64());
        let list = |tag: &str, es: &[MapExpr<T>]| {
            let mut arr = vec![json!(tag)];
            arr.extend(es.iter().map(|e| e.to_json()));
            Value::Array(arr)
        };
        match self {
            Const(c) => json!(["const", f(c)]),
            X(i) => json!(["x", i]),
            Z(j) => json!(["z", j]),
            Sum(es) => list("sum", es),
            Prod(es) => list("prod", es),
            Max(es) => list("max", es),
            Min(es) => list("min", es),
            Norm(es) => list("norm", es),
            Neg(e) => json!(["neg", e.to_json()]),
            Abs(e) => json!(["abs", e.to_json()]),
            Pow(k, e) => json!(["pow", f(k), e.to_json()]),
            Scale(c, e) => json!(["scale", f(c), e.to_json()]),
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
        let list = || -> Result<Vec<Self>> {
            if args.is_empty() {
                return Err(Error::Parse(format!("`{tag}` needs arguments")));
            }
            args.iter().map(Self::from_json).collect()
        };
        let unary = |build: fn(Box<Self>) -> Self| -> Result<Self> {
            want(1)?;
            Ok(build(Box::new(Self::from_json(&args[0])?)))
        };
        use MapExpr::*;
        Ok(match tag {
            "const" => {
                want(1)?;
                Const(number(&args[0])?)
            }
            "x" => {
                want(1)?;
                X(index(&args[0])?)
            }
            "z" => {
                want(1)?;
                Z(index(&args[0])?)
            }
            "sum" => Sum(list()?),
            "prod" => Prod(list()?),
            "max" => Max(list()?),
            "min" => Min(list()?),
            "norm" => Norm(list()?),
            "neg" => unary(Neg)?,
            "abs" => unary(Abs)?,
            "pow" => {
                want(2)?;
                Pow(number(&args[0])?, Box::new(Self::from_json(&args[1])?))
            }
            "scale" => {
                want(2)?;
                Scale(number(&args[0])?, Box::new(Self::from_json(&args[1])?))
            }
            other => return Err(Error::Parse(format!("unknown operator `{other}`"))),
        })
    }
}

/// A map `(x, z) -> R^k`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamMap<T> {
    /// `x_matrix x + z_matrix z + constant`.
    Affine {
        x_matrix: Vec<Vec<T>>,
        z_matrix: Vec<Vec<T>>,
        constant: Vec<T>,
    },
    /// One expression per output coordinate. `exponent` is the user's
    /// claim that `||map(x, z)||` grows at most like `||z||^exponent`.
    Expression {
        outputs: Vec<MapExpr<T>>,
        x_dim: usize,
        z_dim: usize,
        exponent: Option<T>,
    },
}

impl<T: Scalar> ParamMap<T> {
    /// Constant map with the given input dimensions.
    pub fn constant(value: Vec<T>, x_dim: usize, z_dim: usize) -> Self {
        let k = value.len();
        ParamMap::Affine {
            x_matrix: vec![vec![T::zero(); x_dim]; k],
            z_matrix: vec![vec![T::zero(); z_dim]; k],
            constant: value,
        }
    }

    pub fn affine(x_matrix: Vec<Vec<T>>, z_matrix: Vec<Vec<T>>, constant: Vec<T>) -> Result<Self> {
        let m = ParamMap::Affine {
            x_matrix,
            z_matrix,
            constant,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ParamMap::Affine { constant, .. } => constant.len(),
            ParamMap::Expression { outputs, .. } => outputs.len(),
        }
    }

    pub fn x_dim(&self) -> usize {
        match self {
            ParamMap::Affine { x_matrix, .. } => x_matrix.first().map_or(0, |r| r.len()),
            ParamMap::Expression { x_dim, .. } => *x_dim,
        }
    }

    pub fn z_dim(&self) -> usize {
        match self {
            ParamMap::Affine { z_matrix, .. } => z_matrix.first().map_or(0, |r| r.len()),
            ParamMap::Expression { z_dim, .. } => *z_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParamMap::Affine {
                x_matrix,
                z_matrix,
                constant,
            } => {
                let k = constant.len();
                if k == 0 {
                    return Err(Error::Malformed("parameter map with no outputs".into()));
                }
                for mat in [x_matrix, z_matrix] {
                    if mat.len() != k {
                        return Err(Error::DimMismatch {
                            expected: k,
                            found: mat.len(),
                        });
                    }
                    let cols = mat[0].len();
                    if let Some(r) = mat.iter().find(|r| r.len() != cols) {
                        return Err(Error::DimMismatch {
                            expected: cols,
                            found: r.len(),
                        });
                    }
                }
                let finite = constant
                    .iter()
                    .chain(x_matrix.iter().flatten())
                    .chain(z_matrix.iter().flatten())
                    .all(|v| v.is_finite());
                if !finite {
                    return Err(Error::NonFinite("affine parameter map"));
                }
            }
            ParamMap::Expression {
                outputs,
                x_dim,
                z_dim,
                exponent,
            } => {
                if outputs.is_empty() {
                    return Err(Error::Malformed("parameter map with no outputs".into()));
                }
                for e in outputs {
                    let (nx, nz) = e.arity();
                    if nx > *x_dim || nz > *z_dim {
                        return Err(Error::Malformed(format!(
                            "expression reads x[{}] / z[{}] beyond declared dims {x_dim} / {z_dim}",
                            nx.saturating_sub(1),
                            nz.saturating_sub(1)
                        )));
                    }
                }
                if let Some(g) = exponent {
                    if !(*g > T::zero()) || !g.is_finite() {
                        return Err(Error::InvalidExponent(format!("declared exponent {g}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[T], z: &[T]) -> Result<Vec<T>> {
        if x.len() != self.x_dim() {
            return Err(Error::DimMismatch {
                expected: self.x_dim(),
                found: x.len(),
            });
        }
        if z.len() != self.z_dim() {
            return Err(Error::DimMismatch {
                expected: self.z_dim(),
                found: z.len(),
            });
        }
        Ok(match self {
            ParamMap::Affine {
                x_matrix,
                z_matrix,
                constant,
            } => constant
                .iter()
                .zip(x_matrix.iter().zip(z_matrix))
                .map(|(&c, (rx, rz))| c + dot(rx, x) + dot(rz, z))
                .collect(),
            ParamMap::Expression { outputs, .. } => outputs.iter().map(|e| e.eval(x, z)).collect(),
        })
    }

    /// Growth exponent of the map: 1 for affine maps, the declared value
    /// for expressions.
    pub fn map_exponent(&self) -> Result<T> {
        match self {
            ParamMap::Affine { .. } => Ok(T::one()),
            ParamMap::Expression { exponent, .. } => exponent.ok_or(Error::MissingDeclaredExponent),
        }
    }

    fn to_json(&self) -> Value {
        let f = |v: &[T]| v.iter().map(|c| c.as_f64()).collect::<Vec<_>>();
        match self {
            ParamMap::Affine {
                x_matrix,
                z_matrix,
                constant,
            } => json!({"affine": {
                "x": x_matrix.iter().map(|r| f(r)).collect::<Vec<_>>(),
                "z": z_matrix.iter().map(|r| f(r)).collect::<Vec<_>>(),
                "c": f(constant),
            }}),
            ParamMap::Expression {
                outputs,
                x_dim,
                z_dim,
                exponent,
            } => {
                let mut m = Map::new();
                m.insert(
                    "expr".into(),
                    Value::Array(outputs.iter().map(|e| e.to_json()).collect()),
                );
                m.insert("x_dim".into(), json!(x_dim));
                m.insert("z_dim".into(), json!(z_dim));
                if let Some(g) = exponent {
                    m.insert("exponent".into(), json!(g.as_f64()));
                }
                Value::Object(m)
            }
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Parse("parameter map must be an object".into()))?;
        let matrix = |v: Option<&Value>, what: &str| -> Result<Vec<Vec<T>>> {
            let rows = v
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Parse(format!("affine map needs `{what}`")))?;
            rows.iter()
                .map(|r| {
                    r.as_array()
                        .ok_or_else(|| Error::Parse(format!("`{what}` rows must be arrays")))?
                        .iter()
                        .map(number)
                        .collect()
                })
                .collect()
        };
        let m = if let Some(a) = obj.get("affine") {
            let c = a
                .get("c")
                .and_then(|c| c.as_array())
                .ok_or_else(|| Error::Parse("affine map needs `c`".into()))?
                .iter()
                .map(number)
                .collect::<Result<Vec<T>>>()?;
            ParamMap::Affine {
                x_matrix: matrix(a.get("x"), "x")?,
                z_matrix: matrix(a.get("z"), "z")?,
                constant: c,
            }
        } else if let Some(e) = obj.get("expr") {
            let outputs = e
                .as_array()
                .ok_or_else(|| Error::Parse("`expr` must list one expression per output".into()))?
                .iter()
                .map(MapExpr::from_json)
                .collect::<Result<Vec<_>>>()?;
            let dim = |key: &str| obj.get(key).map(index).transpose().map(|d| d.unwrap_or(0));
            ParamMap::Expression {
                outputs,
                x_dim: dim("x_dim")?,
                z_dim: dim("z_dim")?,
                exponent: obj.get("exponent").map(number).transpose()?,
            }
        } else {
            return Err(Error::Parse(
                "parameter map needs `affine` or `expr`".into(),
            ));
        };
        m.validate()?;
        Ok(m)
    }
}

impl<T: Scalar> Serialize for ParamMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ParamMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Self::from_json(&v).map_err(D::Error::custom)
    }
}
