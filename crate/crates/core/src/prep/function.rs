use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::{Error, Result};

/// Right-hand side f. Constant and Polynomial (in x_1, constant along the other
/// axes) are integrated exactly; General falls back to composite quadrature.
#[derive(Clone)]
pub enum FunctionSpec {
    Constant(f64),
    Polynomial(Vec<f64>),
    General(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl FunctionSpec {
    pub fn general(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FunctionSpec::General(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FunctionSpec::Constant(c) => *c,
            FunctionSpec::Polynomial(cs) => horner(cs, x[0]),
            FunctionSpec::General(f) => f(x),
        }
    }

    /// Per-axis factor when f is a product of univariate functions.
    pub fn axis_factor(&self, axis: usize, t: f64) -> Option<f64> {
        match self {
            FunctionSpec::Constant(c) => Some(if axis == 0 { *c } else { 1.0 }),
            FunctionSpec::Polynomial(cs) => Some(if axis == 0 { horner(cs, t) } else { 1.0 }),
            FunctionSpec::General(_) => None,
        }
    }

    pub fn is_separable(&self) -> bool {
        !matches!(self, FunctionSpec::General(_))
    }

    /// Gauss points per axis so that f times a linear hat is integrated exactly.
    pub fn quad_points(&self) -> usize {
        match self {
            FunctionSpec::Polynomial(cs) => (cs.len() + 2).div_ceil(2).max(4),
            _ => 4,
        }
    }
}

fn horner(cs: &[f64], t: f64) -> f64 {
    cs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

impl fmt::Debug for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Constant(c) => write!(f, "const:{c}"),
            FunctionSpec::Polynomial(cs) => {
                let s: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", s.join(","))
            }
            FunctionSpec::General(_) => write!(f, "general"),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse function {s:?} (const:<c> or poly:<c0,c1,..>)"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match kind {
            "const" if nums.len() == 1 => Ok(FunctionSpec::Constant(nums[0])),
            "poly" if !nums.is_empty() => Ok(FunctionSpec::Polynomial(nums)),
            _ => Err(bad()),
        }
    }
}
