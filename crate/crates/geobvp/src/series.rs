//! Small multivariate polynomial/trigonometric series with exact derivatives.
//!
//! Coefficient tables of this form are the configuration format for custom
//! metrics, warped-product profiles and parametric boundary embeddings. Each
//! term is `coef * prod_f basis(u[f.var])` where the basis factor is a power,
//! a cosine or a sine.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    Pow { var: usize, exp: u32 },
    Cos { var: usize, freq: f64 },
    Sin { var: usize, freq: f64 },
}

impl Factor {
    fn eval(&self, u: &[f64]) -> f64 {
        match *self {
            Factor::Pow { var, exp } => u[var].powi(exp as i32),
            Factor::Cos { var, freq } => (freq * u[var]).cos(),
            Factor::Sin { var, freq } => (freq * u[var]).sin(),
        }
    }

    fn var(&self) -> usize {
        match *self {
            Factor::Pow { var, .. } | Factor::Cos { var, .. } | Factor::Sin { var, .. } => var,
        }
    }

    /// d/du_var of the factor, as (scale, replacement factors).
    fn derivative(&self) -> (f64, Vec<Factor>) {
        match *self {
            Factor::Pow { exp: 0, .. } => (0.0, vec![]),
            Factor::Pow { var, exp } => (exp as f64, vec![Factor::Pow { var, exp: exp - 1 }]),
            Factor::Cos { var, freq } => (-freq, vec![Factor::Sin { var, freq }]),
            Factor::Sin { var, freq } => (freq, vec![Factor::Cos { var, freq }]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub factors: Vec<Factor>,
}

/// Sum of polynomial/trigonometric terms in several variables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    pub terms: Vec<Term>,
}

impl Series {
    pub fn constant(c: f64) -> Self {
        Series {
            terms: vec![Term { coef: c, factors: vec![] }],
        }
    }

    pub fn zero() -> Self {
        Series { terms: vec![] }
    }

    /// The coordinate function `u[var]`.
    pub fn coordinate(var: usize) -> Self {
        Series {
            terms: vec![Term {
                coef: 1.0,
                factors: vec![Factor::Pow { var, exp: 1 }],
            }],
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.factors.iter().map(|f| f.eval(u)).product::<f64>())
            .sum()
    }

    /// Same series with every variable index shifted by `offset` (used when
    /// concatenating parameter spaces of product embeddings).
    pub fn shift_vars(&self, offset: usize) -> Series {
        let mut out = self.clone();
        for term in &mut out.terms {
            for f in &mut term.factors {
                match f {
                    Factor::Pow { var, .. } | Factor::Cos { var, .. } | Factor::Sin { var, .. } => {
                        *var += offset;
                    }
                }
            }
        }
        out
    }

    /// Exact partial derivative with respect to `u[var]`, as a new series.
    pub fn partial(&self, var: usize) -> Series {
        let mut out = Vec::new();
        for term in &self.terms {
            for (i, f) in term.factors.iter().enumerate() {
                if f.var() != var {
                    continue;
                }
                let (scale, repl) = f.derivative();
                if scale == 0.0 {
                    continue;
                }
                let mut factors = Vec::with_capacity(term.factors.len() + repl.len());
                factors.extend_from_slice(&term.factors[..i]);
                factors.extend(repl);
                factors.extend_from_slice(&term.factors[i + 1..]);
                out.push(Term { coef: term.coef * scale, factors });
            }
        }
        Series { terms: out }
    }
}
