//! Named function choices for problem files and custom payoffs.
//!
//! ```json
//! {"kind": "linear", "a": 0.0, "b": 0.05}
//! {"kind": "constant", "c": 0.03}
//! {"kind": "mollified-put", "n": 8, "K": 1.0}
//! {"kind": "custom-table", "points": [[0.5, 0.5], [1.0, 0.0], [2.0, 0.0]]}
//! ```
//!
//! `linear` is `a + b·x`. `custom-table` interpolates linearly between
//! points sorted by `x` and is held constant beyond the first and last.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use strongwalk_core::claim::{Claim, CustomPayoff, ScalarFn};
use strongwalk_core::feynman_kac::Fn1;
use strongwalk_core::mollifier::SmoothedPut;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FnSpec {
    Linear {
        #[serde(default)]
        a: f64,
        b: f64,
    },
    Constant {
        c: f64,
    },
    MollifiedPut {
        n: u32,
        #[serde(rename = "K")]
        strike: f64,
    },
    CustomTable {
        points: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone)]
struct Table {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Table {
    fn new(points: &[(f64, f64)]) -> Result<Self, CliError> {
        if points.len() < 2 {
            return Err(CliError::config("custom-table needs at least two points"));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(CliError::config("custom-table points must be finite"));
        }
        if pts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(CliError::config("custom-table x values must be distinct"));
        }
        Ok(Table { xs: pts.iter().map(|p| p.0).collect(), ys: pts.iter().map(|p| p.1).collect() })
    }

    /// Index `j` with `xs[j] ≤ x < xs[j+1]`, clamped to the interior.
    fn segment(&self, x: f64) -> usize {
        self.xs.partition_point(|&v| v <= x).saturating_sub(1).min(self.xs.len() - 2)
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let j = self.segment(x);
        let w = (x - self.xs[j]) / (self.xs[j + 1] - self.xs[j]);
        self.ys[j] + w * (self.ys[j + 1] - self.ys[j])
    }

    fn slope(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let j = self.segment(x);
        (self.ys[j + 1] - self.ys[j]) / (self.xs[j + 1] - self.xs[j])
    }
}

impl FnSpec {
    pub fn build(&self) -> Result<Fn1, CliError> {
        Ok(match self {
            FnSpec::Linear { a, b } => {
                let (a, b) = (*a, *b);
                Arc::new(move |x| a + b * x)
            }
            FnSpec::Constant { c } => {
                let c = *c;
                Arc::new(move |_| c)
            }
            FnSpec::MollifiedPut { n, strike } => {
                let g = SmoothedPut::new(*n, *strike)?;
                Arc::new(move |x| g.value(x))
            }
            FnSpec::CustomTable { points } => {
                let t = Table::new(points)?;
                Arc::new(move |x| t.eval(x))
            }
        })
    }

    /// The same function as a payoff, with whatever derivatives it has.
    pub fn claim(&self) -> Result<Claim, CliError> {
        Ok(match self {
            FnSpec::Linear { a, b } => Claim::Linear { intercept: *a, slope: *b },
            FnSpec::Constant { c } => Claim::Constant(*c),
            FnSpec::MollifiedPut { n, strike } => Claim::SmoothedPut(SmoothedPut::new(*n, *strike)?),
            FnSpec::CustomTable { points } => {
                let t = Arc::new(Table::new(points)?);
                let (v, d) = (t.clone(), t);
                Claim::Custom(CustomPayoff {
                    g: Arc::new(move |x| v.eval(x)),
                    derivatives: vec![Arc::new(move |x| d.slope(x)) as ScalarFn],
                })
            }
        })
    }

    /// `Some(b)` when the function is `b·x`.
    pub fn proportional(&self) -> Option<f64> {
        match self {
            FnSpec::Linear { a, b } if *a == 0.0 => Some(*b),
            FnSpec::Constant { c } if *c == 0.0 => Some(0.0),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use strongwalk_core::claim::Payoff;

    #[test]
    fn parses_catalog() {
        let f: FnSpec = serde_json::from_str(r#"{"kind":"mollified-put","n":8,"K":1.5}"#).unwrap();
        assert_eq!(f, FnSpec::MollifiedPut { n: 8, strike: 1.5 });
        let f: FnSpec = serde_json::from_str(r#"{"kind":"linear","b":2}"#).unwrap();
        assert_eq!(f.proportional(), Some(2.0));
        assert!(serde_json::from_str::<FnSpec>(r#"{"kind":"cubic"}"#).is_err());
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let f = FnSpec::CustomTable { points: vec![(2.0, 0.0), (0.0, 2.0), (1.0, 0.0)] };
        let g = f.build().unwrap();
        assert_eq!(g(-1.0), 2.0);
        assert_eq!(g(0.5), 1.0);
        assert_eq!(g(1.5), 0.0);
        assert_eq!(g(3.0), 0.0);
        let c = f.claim().unwrap();
        assert_eq!(c.derivative(1, 0.5), Some(-2.0));
        assert!(FnSpec::CustomTable { points: vec![(1.0, 1.0)] }.build().is_err());
    }
}
