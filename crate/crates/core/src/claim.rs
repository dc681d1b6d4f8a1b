//! European payoffs `g(S(T))`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::mollifier::SmoothedPut;

/// A payoff and whichever derivatives it can supply.
pub trait Payoff {
    fn eval(&self, s: f64) -> f64;

    /// `g^{(order)}(s)`, or `None` when the payoff does not provide it.
    /// Order 0 is the payoff itself.
    fn derivative(&self, order: u32, s: f64) -> Option<f64>;
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Polynomial bump `h·(1 - u²)^4`, `u = (s - c)/w`, zero for `|u| ≥ 1`.
/// It is `C³` with compact support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyBump {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

impl PolyBump {
    pub fn new(center: f64, half_width: f64, height: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter { name: "half_width", reason: "must be positive" });
        }
        if !center.is_finite() || !height.is_finite() {
            return Err(Error::InvalidParameter { name: "bump", reason: "must be finite" });
        }
        Ok(PolyBump { center, half_width, height })
    }

    fn derivative_unchecked(&self, order: u32, s: f64) -> f64 {
        let u = (s - self.center) / self.half_width;
        if !(u.abs() < 1.0) {
            return 0.0;
        }
        let v = 1.0 - u * u;
        let w = self.half_width;
        let h = self.height;
        match order {
            0 => h * v * v * v * v,
            1 => h * (-8.0 * u * v * v * v) / w,
            2 => h * (-8.0 * v * v * v + 48.0 * u * u * v * v) / (w * w),
            _ => h * (144.0 * u * v * v - 192.0 * u * u * u * v) / (w * w * w),
        }
    }
}

impl Payoff for PolyBump {
    fn eval(&self, s: f64) -> f64 {
        self.derivative_unchecked(0, s)
    }

    fn derivative(&self, order: u32, s: f64) -> Option<f64> {
        (order <= 3).then(|| self.derivative_unchecked(order, s))
    }
}

/// A user payoff, optionally with derivatives `g', g'', ...` in order.
#[derive(Clone)]
pub struct CustomPayoff {
    pub g: ScalarFn,
    pub derivatives: Vec<ScalarFn>,
}

impl fmt::Debug for CustomPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPayoff").field("derivatives", &self.derivatives.len()).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Claim {
    Call { strike: f64 },
    Put { strike: f64 },
    Constant(f64),
    /// `intercept + slope·s`
    Linear { intercept: f64, slope: f64 },
    Bump(PolyBump),
    SmoothedPut(SmoothedPut),
    Custom(CustomPayoff),
}

fn check_strike(strike: f64) -> Result<f64> {
    if strike > 0.0 && strike.is_finite() {
        Ok(strike)
    } else {
        Err(Error::InvalidParameter { name: "K", reason: "strike must be positive" })
    }
}

impl Claim {
    pub fn call(strike: f64) -> Result<Self> {
        Ok(Claim::Call { strike: check_strike(strike)? })
    }

    pub fn put(strike: f64) -> Result<Self> {
        Ok(Claim::Put { strike: check_strike(strike)? })
    }

    pub fn custom(g: ScalarFn) -> Self {
        Claim::Custom(CustomPayoff { g, derivatives: Vec::new() })
    }

    pub fn strike(&self) -> Option<f64> {
        match self {
            Claim::Call { strike } | Claim::Put { strike } => Some(*strike),
            Claim::SmoothedPut(p) => Some(p.strike()),
            _ => None,
        }
    }
}

impl Payoff for Claim {
    fn eval(&self, s: f64) -> f64 {
        match self {
            Claim::Call { strike } => (s - strike).max(0.0),
            Claim::Put { strike } => (strike - s).max(0.0),
            Claim::Constant(c) => *c,
            Claim::Linear { intercept, slope } => intercept + slope * s,
            Claim::Bump(b) => b.eval(s),
            Claim::SmoothedPut(p) => p.eval(s),
            Claim::Custom(c) => (c.g)(s),
        }
    }

    /// Calls and puts supply only the first derivative, with the midpoint
    /// value at the strike (`½` for the call, `-½` for the put).
    fn derivative(&self, order: u32, s: f64) -> Option<f64> {
        if order == 0 {
            return Some(self.eval(s));
        }
        match self {
            Claim::Call { strike } | Claim::Put { strike } => {
                if order > 1 {
                    return None;
                }
                let call = if s > *strike {
                    1.0
                } else if s < *strike {
                    0.0
                } else {
                    0.5
                };
                Some(if matches!(self, Claim::Call { .. }) { call } else { call - 1.0 })
            }
            Claim::Constant(_) => Some(0.0),
            Claim::Linear { slope, .. } => Some(if order == 1 { *slope } else { 0.0 }),
            Claim::Bump(b) => b.derivative(order, s),
            Claim::SmoothedPut(p) => p.derivative(order, s),
            Claim::Custom(c) => c.derivatives.get(order as usize - 1).map(|d| d(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanilla_payoffs() {
        let c = Claim::call(1.0).unwrap();
        let p = Claim::put(1.0).unwrap();
        assert_eq!(c.eval(1.5), 0.5);
        assert_eq!(p.eval(0.5), 0.5);
        assert_eq!(c.derivative(1, 1.0), Some(0.5));
        assert_eq!(p.derivative(1, 1.0), Some(-0.5));
        assert_eq!(p.derivative(1, 2.0), Some(0.0));
        assert_eq!(c.derivative(2, 1.0), None);
        assert!(Claim::call(0.0).is_err());
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = PolyBump::new(1.0, 0.4, 2.0).unwrap();
        let h = 1e-5;
        for i in 0..50 {
            let s = 0.55 + 0.018 * i as f64;
            for order in 1..=3 {
                let fd = (b.derivative(order - 1, s + h).unwrap() - b.derivative(order - 1, s - h).unwrap())
                    / (2.0 * h);
                let exact = b.derivative(order, s).unwrap();
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "order {order} at {s}");
            }
        }
        assert_eq!(b.eval(1.5), 0.0);
        assert_eq!(b.eval(1.0), 2.0);
        assert_eq!(b.derivative(4, 1.0), None);
    }

    #[test]
    fn custom_derivatives_by_order() {
        let g = Claim::Custom(CustomPayoff {
            g: Arc::new(|s| s * s),
            derivatives: alloc::vec![Arc::new(|s| 2.0 * s) as ScalarFn],
        });
        assert_eq!(g.derivative(0, 3.0), Some(9.0));
        assert_eq!(g.derivative(1, 3.0), Some(6.0));
        assert_eq!(g.derivative(2, 3.0), None);
    }
}
