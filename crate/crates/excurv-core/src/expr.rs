//! Analytic scalar expression trees: the on-disk format for metrics,
//! embeddings, conformal factors and test functions.
//!
//! JSON schema: `{"op": "<name>", "args": [...]}` | `{"var": i}` | `{"const": x}`.
//! `pow` carries its integer exponent as a trailing `{"const": k}` argument.

use serde_json::{json, Value};
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jets::Jet;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sqrt(Arc<Expr>),
    Exp(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Log(Arc<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Arc::new(a), Arc::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Arc::new(a), Arc::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Arc::new(a), Arc::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Arc::new(a), Arc::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Arc::new(a))
    }

    pub fn pow(a: Expr, k: i32) -> Expr {
        Expr::Pow(Arc::new(a), k)
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::Sqrt(Arc::new(a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Arc::new(a))
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::Sin(Arc::new(a))
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::Cos(Arc::new(a))
    }

    pub fn log(a: Expr) -> Expr {
        Expr::Log(Arc::new(a))
    }

    /// Largest variable index + 1.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Pow(a, _) => a.arity(),
            Expr::Neg(a)
            | Expr::Sqrt(a)
            | Expr::Exp(a)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Log(a) => a.arity(),
        }
    }

    pub fn check_arity(&self, dim: usize) -> Result<()> {
        match self {
            Expr::Var(i) if *i >= dim => Err(Error::Arity {
                index: *i,
                arity: dim,
            }),
            Expr::Const(_) | Expr::Var(_) => Ok(()),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.check_arity(dim)?;
                b.check_arity(dim)
            }
            Expr::Pow(a, _) => a.check_arity(dim),
            Expr::Neg(a)
            | Expr::Sqrt(a)
            | Expr::Exp(a)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Log(a) => a.check_arity(dim),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => {
                if *i >= x.len() {
                    return Err(Error::Arity {
                        index: *i,
                        arity: x.len(),
                    });
                }
                x[*i]
            }
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                a.eval(x)? / d
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Pow(a, k) => a.eval(x)?.powi(*k),
            Expr::Sqrt(a) => {
                let v = a.eval(x)?;
                if v <= 0.0 {
                    return Err(Error::Domain(format!("sqrt of nonpositive {v}")));
                }
                v.sqrt()
            }
            Expr::Exp(a) => a.eval(x)?.exp(),
            Expr::Sin(a) => a.eval(x)?.sin(),
            Expr::Cos(a) => a.eval(x)?.cos(),
            Expr::Log(a) => {
                let v = a.eval(x)?;
                if v <= 0.0 {
                    return Err(Error::Domain(format!("log of nonpositive {v}")));
                }
                v.ln()
            }
        })
    }

    /// Evaluate over the jet ring with the given variable jets.
    pub fn eval_jet(&self, vars: &[Jet]) -> Result<Jet> {
        let mut cache = std::collections::HashMap::new();
        self.eval_jet_cached(vars, &mut cache)
    }

    /// Evaluation with subtree memoization keyed by shared-node identity;
    /// metrics built from a common conformal factor hit the cache hard.
    pub fn eval_jet_cached(
        &self,
        vars: &[Jet],
        cache: &mut std::collections::HashMap<*const Expr, Jet>,
    ) -> Result<Jet> {
        let mut sub = |a: &Arc<Expr>| -> Result<Jet> {
            let key = Arc::as_ptr(a);
            if let Some(hit) = cache.get(&key) {
                return Ok(hit.clone());
            }
            let v = a.eval_jet_cached(vars, cache)?;
            cache.insert(key, v.clone());
            Ok(v)
        };
        Ok(match self {
            Expr::Const(c) => Jet::constant(vars[0].dim(), vars[0].order(), *c),
            Expr::Var(i) => {
                if *i >= vars.len() {
                    return Err(Error::Arity {
                        index: *i,
                        arity: vars.len(),
                    });
                }
                vars[*i].clone()
            }
            Expr::Add(a, b) => &sub(a)? + &sub(b)?,
            Expr::Sub(a, b) => &sub(a)? - &sub(b)?,
            Expr::Mul(a, b) => sub(a)?.mul_jet(&sub(b)?),
            Expr::Div(a, b) => sub(a)?.div_jet(&sub(b)?)?,
            Expr::Neg(a) => -sub(a)?,
            Expr::Pow(a, k) => sub(a)?.powi_jet(*k)?,
            Expr::Sqrt(a) => sub(a)?.sqrt_jet()?,
            Expr::Exp(a) => sub(a)?.exp_jet(),
            Expr::Sin(a) => sub(a)?.sin_jet(),
            Expr::Cos(a) => sub(a)?.cos_jet(),
            Expr::Log(a) => sub(a)?.log_jet()?,
        })
    }

    /// Taylor-expand at `point` to the given truncation order.
    pub fn lift(&self, point: &[f64], dim: usize, order: usize) -> Result<Jet> {
        if point.len() != dim {
            return Err(Error::Shape(format!(
                "point length {} != dim {}",
                point.len(),
                dim
            )));
        }
        self.check_arity(dim)?;
        let vars: Vec<Jet> = (0..dim)
            .map(|i| Jet::variable(dim, order, i, point[i]))
            .collect();
        self.eval_jet(&vars)
    }

    pub fn to_json(&self) -> Value {
        match self {
            Expr::Const(c) => json!({ "const": c }),
            Expr::Var(i) => json!({ "var": i }),
            Expr::Add(a, b) => json!({"op": "add", "args": [a.to_json(), b.to_json()]}),
            Expr::Sub(a, b) => json!({"op": "sub", "args": [a.to_json(), b.to_json()]}),
            Expr::Mul(a, b) => json!({"op": "mul", "args": [a.to_json(), b.to_json()]}),
            Expr::Div(a, b) => json!({"op": "div", "args": [a.to_json(), b.to_json()]}),
            Expr::Neg(a) => json!({"op": "neg", "args": [a.to_json()]}),
            Expr::Pow(a, k) => {
                json!({"op": "pow", "args": [a.to_json(), {"const": *k as f64}]})
            }
            Expr::Sqrt(a) => json!({"op": "sqrt", "args": [a.to_json()]}),
            Expr::Exp(a) => json!({"op": "exp", "args": [a.to_json()]}),
            Expr::Sin(a) => json!({"op": "sin", "args": [a.to_json()]}),
            Expr::Cos(a) => json!({"op": "cos", "args": [a.to_json()]}),
            Expr::Log(a) => json!({"op": "log", "args": [a.to_json()]}),
        }
    }

    /// Parse from JSON; `pointer` locates errors for schema reporting.
    pub fn from_json(v: &Value, pointer: &str) -> Result<Expr> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::schema(pointer, "expected object"))?;
        if let Some(c) = obj.get("const") {
            let c = c
                .as_f64()
                .ok_or_else(|| Error::schema(format!("{pointer}/const"), "expected number"))?;
            return Ok(Expr::Const(c));
        }
        if let Some(i) = obj.get("var") {
            let i = i
                .as_u64()
                .ok_or_else(|| Error::schema(format!("{pointer}/var"), "expected index"))?;
            return Ok(Expr::Var(i as usize));
        }
        let op = obj
            .get("op")
            .and_then(|o| o.as_str())
            .ok_or_else(|| Error::schema(pointer, "expected const, var or op node"))?;
        let args = obj
            .get("args")
            .and_then(|a| a.as_array())
            .ok_or_else(|| Error::schema(format!("{pointer}/args"), "expected array"))?;
        let arg = |k: usize| -> Result<Expr> {
            let a = args
                .get(k)
                .ok_or_else(|| Error::schema(format!("{pointer}/args/{k}"), "missing argument"))?;
            Expr::from_json(a, &format!("{pointer}/args/{k}"))
        };
        let binary = |f: fn(Expr, Expr) -> Expr| -> Result<Expr> {
            if args.len() != 2 {
                return Err(Error::schema(
                    format!("{pointer}/args"),
                    "expected 2 arguments",
                ));
            }
            Ok(f(arg(0)?, arg(1)?))
        };
        let unary = |f: fn(Expr) -> Expr| -> Result<Expr> {
            if args.len() != 1 {
                return Err(Error::schema(
                    format!("{pointer}/args"),
                    "expected 1 argument",
                ));
            }
            Ok(f(arg(0)?))
        };
        match op {
            "add" => binary(Expr::add),
            "sub" => binary(Expr::sub),
            "mul" => binary(Expr::mul),
            "div" => binary(Expr::div),
            "neg" => unary(Expr::neg),
            "sqrt" => unary(Expr::sqrt),
            "exp" => unary(Expr::exp),
            "sin" => unary(Expr::sin),
            "cos" => unary(Expr::cos),
            "log" => unary(Expr::log),
            "pow" => {
                if args.len() != 2 {
                    return Err(Error::schema(
                        format!("{pointer}/args"),
                        "expected base and integer exponent",
                    ));
                }
                let base = arg(0)?;
                let e = match arg(1)? {
                    Expr::Const(c) if c.fract() == 0.0 => c as i32,
                    _ => {
                        return Err(Error::schema(
                            format!("{pointer}/args/1"),
                            "pow exponent must be an integer constant",
                        ))
                    }
                };
                Ok(Expr::pow(base, e))
            }
            other => Err(Error::schema(
                format!("{pointer}/op"),
                format!("unknown op \"{other}\""),
            )),
        }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let e = Expr::exp(Expr::var(0) * Expr::constant(2.0))
            + Expr::pow(Expr::var(1), 3)
            + Expr::sqrt(Expr::constant(1.0) + Expr::var(2) * Expr::var(2));
        let j = e.to_json();
        let back = Expr::from_json(&j, "").unwrap();
        assert_eq!(back.to_json(), j);
        let x = [0.3, -0.5, 0.7];
        assert!((e.eval(&x).unwrap() - back.eval(&x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn unknown_op_reports_pointer() {
        let v = serde_json::json!({"op": "tan", "args": [{"var": 0}]});
        match Expr::from_json(&v, "/metric/comps/0/0") {
            Err(Error::Schema { pointer, .. }) => {
                assert_eq!(pointer, "/metric/comps/0/0/op");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn arity_guard() {
        let e = Expr::var(3);
        assert!(matches!(
            e.lift(&[0.0, 0.0], 2, 2),
            Err(Error::Arity { .. })
        ));
    }
}
