//! Arithmetic formulas in scenario files.
//!
//! Formulas use `+ - * / ^`, parentheses, `sin`, `cos`, `sqrt`, `abs`,
//! `atan2(y, x)`, `pi`, and `cantor(x, depth)`. Variables are bound per
//! evaluation: `n` in family formulas, `x`, `y`, `r` and `theta` in field
//! formulas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LaminaError, Result};

/// Devil's staircase on `[0, 1]`, exact to `depth` ternary digits and linear below.
pub fn cantor(x: f64, depth: u32) -> f64 {
    let (mut x, mut s, mut w) = (x.clamp(0.0, 1.0), 0.0, 0.5);
    for _ in 0..depth {
        if x < 1.0 / 3.0 {
            x *= 3.0;
        } else if x > 2.0 / 3.0 {
            s += w;
            x = 3.0 * x - 2.0;
        } else {
            return s + w;
        }
        w *= 0.5;
    }
    s + 2.0 * w * x
}

/// A parsed formula together with its source text.
#[derive(Clone)]
pub struct Formula {
    source: String,
    expr: meval::Expr,
}

impl Formula {
    pub fn parse(source: &str) -> Result<Self> {
        let expr = meval::Expr::from_str(source).map_err(|e| LaminaError::Expression(format!("{source:?}: {e}")))?;
        Ok(Formula {
            source: source.to_string(),
            expr,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self::parse(&format!("{v:?}")).expect("float literal")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, vars: &[(&str, f64)]) -> Result<f64> {
        let mut ctx = meval::Context::new();
        ctx.func2("cantor", |x, d| cantor(x, d.max(0.0) as u32));
        for &(k, v) in vars {
            ctx.var(k, v);
        }
        let v = self
            .expr
            .eval_with_context(ctx)
            .map_err(|e| LaminaError::Expression(format!("{:?}: {e}", self.source)))?;
        if v.is_nan() {
            return Err(LaminaError::Expression(format!("{:?} evaluates to NaN", self.source)));
        }
        Ok(v)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Formula({:?})", self.source)
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => Formula::parse(&s).map_err(serde::de::Error::custom),
            Raw::Number(v) => Ok(Formula::constant(v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let f = Formula::parse("0.5 + 0.25/n").unwrap();
        assert_eq!(f.eval(&[("n", 4.0)]).unwrap(), 0.5625);
        assert_eq!(f.eval(&[("n", f64::INFINITY)]).unwrap(), 0.5);
        let g = Formula::parse("sin(pi/2) - cos(0) * 2").unwrap();
        assert!((g.eval(&[]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(Formula::parse("1/2").unwrap().eval(&[]).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        assert!(Formula::parse("1 +").is_err());
        assert!(Formula::parse("m + 1").unwrap().eval(&[("n", 1.0)]).is_err());
        assert!(Formula::parse("0/0").unwrap().eval(&[]).is_err());
    }

    #[test]
    fn staircase() {
        let f = Formula::parse("cantor(x, 12)").unwrap();
        assert_eq!(f.eval(&[("x", 0.5)]).unwrap(), 0.5);
        assert_eq!(f.eval(&[("x", 0.0)]).unwrap(), 0.0);
        assert_eq!(f.eval(&[("x", 1.0)]).unwrap(), 1.0);
        assert!((cantor(0.25, 16) + cantor(0.75, 16) - 1.0).abs() < 1e-9);
        assert!((cantor(0.25, 16) - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn serde_roundtrip() {
        let f: Formula = serde_json::from_str("\"pi/2 + 1/n\"").unwrap();
        assert_eq!(serde_json::to_string(&f).unwrap(), "\"pi/2 + 1/n\"");
        let c: Formula = serde_json::from_str("0.25").unwrap();
        assert_eq!(c.eval(&[]).unwrap(), 0.25);
    }
}
