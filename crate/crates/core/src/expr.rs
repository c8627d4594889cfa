//! Scalar expressions in the chart coordinates `X1, X2, X3` and time `t`.

use meval::{ContextProvider, FuncEvalError};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// A parsed expression. Variables: `X1 X2 X3 t pi e`; functions:
/// `sin cos tan exp ln sqrt abs sinh cosh tanh atan atan2 pow`.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    expr: meval::Expr,
}

struct Vars {
    x: [f64; 3],
    t: f64,
}

impl ContextProvider for Vars {
    fn get_var(&self, name: &str) -> Option<f64> {
        match name {
            "X1" => Some(self.x[0]),
            "X2" => Some(self.x[1]),
            "X3" => Some(self.x[2]),
            "t" => Some(self.t),
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => None,
        }
    }

    fn eval_func(&self, name: &str, args: &[f64]) -> std::result::Result<f64, FuncEvalError> {
        let one = |f: fn(f64) -> f64| match args {
            [a] => Ok(f(*a)),
            _ => Err(FuncEvalError::NumberArgs(1)),
        };
        let two = |f: fn(f64, f64) -> f64| match args {
            [a, b] => Ok(f(*a, *b)),
            _ => Err(FuncEvalError::NumberArgs(2)),
        };
        match name {
            "sin" => one(f64::sin),
            "cos" => one(f64::cos),
            "tan" => one(f64::tan),
            "exp" => one(f64::exp),
            "ln" => one(f64::ln),
            "sqrt" => one(f64::sqrt),
            "abs" => one(f64::abs),
            "sinh" => one(f64::sinh),
            "cosh" => one(f64::cosh),
            "tanh" => one(f64::tanh),
            "atan" => one(f64::atan),
            "atan2" => two(f64::atan2),
            "pow" => two(f64::powf),
            _ => Err(FuncEvalError::UnknownFunction),
        }
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let err = |message: String| Error::Expression {
            expression: source.to_string(),
            message,
        };
        let expr: meval::Expr = source.parse().map_err(|e: meval::Error| err(e.to_string()))?;
        expr.eval_with_context(Vars { x: [0.1, 0.2, 0.3], t: 0.0 })
            .map_err(|e| err(e.to_string()))?;
        Ok(Self {
            source: source.to_string(),
            expr,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value at `(X, t)`; evaluation errors surface as NaN, which the field
    /// checks downstream reject.
    pub fn eval(&self, x: &Point, t: f64) -> f64 {
        self.expr.eval_with_context(Vars { x: *x, t }).unwrap_or(f64::NAN)
    }
}
