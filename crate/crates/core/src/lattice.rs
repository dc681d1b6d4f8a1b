//! Pricing on the recombining level-`m` lattice.
//!
//! Node `(k, i)` is reached after `k` steps with `i` up-steps and carries
//! the asset price `s0·u_m^i·d_m^{k-i}`.

use alloc::vec::Vec;

use crate::claim::Payoff;
use crate::error::{Error, Result};
use crate::market::{MarketLevel, MarketParams};
use crate::math::{abs, binomial_pmf, binomial_upper_tail, ceil, exp, ln, normal_cdf, normal_pdf, sqrt, CompensatedSum};

/// Largest step count a full surface may have. The triangle holds
/// `(N+1)(N+2)/2` values, about 270 MB at this cap.
pub const DEFAULT_STEP_CAP: usize = 1 << 13;

/// Values `f_m(t_k, i)` on the whole triangle.
#[derive(Debug, Clone)]
pub struct PriceSurface {
    level: MarketLevel,
    values: Vec<f64>,
}

#[inline]
fn offset(k: usize) -> usize {
    k * (k + 1) / 2
}

impl PriceSurface {
    pub fn build(level: &MarketLevel, claim: &dyn Payoff) -> Result<Self> {
        Self::build_with_cap(level, claim, DEFAULT_STEP_CAP)
    }

    pub fn build_with_cap(level: &MarketLevel, claim: &dyn Payoff, cap: usize) -> Result<Self> {
        let n = level.n_steps;
        if n > cap {
            return Err(Error::StepCapExceeded { steps: n, cap });
        }
        let mut values = alloc::vec![0.0; offset(n + 1)];
        let base = offset(n);
        for i in 0..=n {
            values[base + i] = claim.eval(level.node_price(level.s0(), n, i));
        }
        let disc = 1.0 / level.r_m;
        let (qp, qm) = (level.q_plus, level.q_minus);
        for k in (0..n).rev() {
            let (head, tail) = values.split_at_mut(offset(k + 1));
            let row = &mut head[offset(k)..];
            let next = &tail[..k + 2];
            for i in 0..=k {
                row[i] = disc * (qp * next[i + 1] + qm * next[i]);
            }
        }
        Ok(PriceSurface { level: *level, values })
    }

    pub fn level(&self) -> &MarketLevel {
        &self.level
    }

    pub fn steps(&self) -> usize {
        self.level.n_steps
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[offset(k)..offset(k) + k + 1]
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[offset(k) + i]
    }

    pub fn node_price(&self, k: usize, i: usize) -> f64 {
        self.level.node_price(self.level.s0(), k, i)
    }

    pub fn root(&self) -> f64 {
        self.values[0]
    }

    /// Overwrites one node; used to exercise diagnostics.
    pub fn set_value(&mut self, k: usize, i: usize, v: f64) {
        self.values[offset(k) + i] = v;
    }
}

/// `r_m^{k-N} Σ_i C(N-k, i) q^i (1-q)^{N-k-i} g(x u^i d^{N-k-i})`.
pub fn price_explicit(level: &MarketLevel, claim: &dyn Payoff, k: usize, x: f64) -> f64 {
    let n = level.n_steps.saturating_sub(k);
    if n == 0 {
        return claim.eval(x);
    }
    let weights = binomial_pmf(n, level.q_plus);
    let sum: CompensatedSum = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| w * claim.eval(level.node_price(x, n, i)))
        .collect();
    level.discount(n) * sum.value()
}

/// Index of the first node at which a call with strike `K` pays,
/// clamped to `[0, n + 1]`.
pub fn strike_cutoff(level: &MarketLevel, strike: f64, n: usize, x: f64) -> usize {
    let raw = (ln(strike / x) - n as f64 * level.ln_d()) / (level.ln_u() - level.ln_d());
    let j = ceil(raw);
    if !(j > 0.0) {
        0
    } else if j > (n + 1) as f64 {
        n + 1
    } else {
        j as usize
    }
}

/// The classical binomial formula
/// `x·Bin(j; n, q̃) - r_m^{-n} K·Bin(j; n, q)` with `n = N - k`.
pub fn call_closed_binomial(level: &MarketLevel, strike: f64, k: usize, x: f64) -> f64 {
    let n = level.n_steps.saturating_sub(k);
    if n == 0 {
        return (x - strike).max(0.0);
    }
    let j = strike_cutoff(level, strike, n, x) as i64;
    // (u_m / r_m)·q^+, from the same logs the node prices use
    let q_tilde = level.q_plus * exp(level.ln_u() - level.ln_r());
    x * binomial_upper_tail(j, n, q_tilde) - level.discount(n) * strike * binomial_upper_tail(j, n, level.q_plus)
}

/// Put by discrete parity, `C - x + r_m^{k-N} K`.
pub fn put_price(level: &MarketLevel, strike: f64, k: usize, x: f64) -> f64 {
    let n = level.n_steps.saturating_sub(k);
    call_closed_binomial(level, strike, k, x) - x + level.discount(n) * strike
}

/// Closed-form European prices and sensitivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackScholes {
    pub r: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub strike: f64,
}

/// First-order partials of a price, used by the PDE operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub value: f64,
    pub dt: f64,
    pub dx: f64,
    pub dxx: f64,
}

impl BlackScholes {
    pub fn new(params: &MarketParams, strike: f64) -> Self {
        BlackScholes { r: params.r, sigma: params.sigma, horizon: params.horizon, strike }
    }

    pub fn d_plus(&self, tau: f64, x: f64) -> f64 {
        (ln(x / self.strike) + (self.r + 0.5 * self.sigma * self.sigma) * tau) / (self.sigma * sqrt(tau))
    }

    pub fn d_minus(&self, tau: f64, x: f64) -> f64 {
        self.d_plus(tau, x) - self.sigma * sqrt(tau)
    }

    fn tau(&self, t: f64) -> f64 {
        self.horizon - t
    }

    pub fn call(&self, t: f64, x: f64) -> f64 {
        let tau = self.tau(t);
        if tau <= 0.0 {
            return (x - self.strike).max(0.0);
        }
        x * normal_cdf(self.d_plus(tau, x)) - exp(-self.r * tau) * self.strike * normal_cdf(self.d_minus(tau, x))
    }

    pub fn put(&self, t: f64, x: f64) -> f64 {
        let tau = self.tau(t);
        if tau <= 0.0 {
            return (self.strike - x).max(0.0);
        }
        self.call(t, x) - x + exp(-self.r * tau) * self.strike
    }

    /// `a(t) = Φ(d_+)`.
    pub fn call_delta(&self, t: f64, x: f64) -> f64 {
        let tau = self.tau(t);
        if tau <= 0.0 {
            return if x > self.strike { 1.0 } else { 0.0 };
        }
        normal_cdf(self.d_plus(tau, x))
    }

    pub fn put_delta(&self, t: f64, x: f64) -> f64 {
        self.call_delta(t, x) - 1.0
    }

    /// Bond holding of the call hedge in units of `e^{rt}`:
    /// `b(t) = -K e^{-rT} Φ(d_-)`.
    pub fn call_bond(&self, t: f64, x: f64) -> f64 {
        let tau = self.tau(t);
        let tail = if tau <= 0.0 {
            if x > self.strike {
                1.0
            } else {
                0.0
            }
        } else {
            normal_cdf(self.d_minus(tau, x))
        };
        -self.strike * exp(-self.r * self.horizon) * tail
    }

    pub fn put_bond(&self, t: f64, x: f64) -> f64 {
        self.call_bond(t, x) + self.strike * exp(-self.r * self.horizon)
    }

    pub fn call_partials(&self, t: f64, x: f64) -> Partials {
        let tau = self.tau(t);
        let sq = sqrt(tau);
        let dp = self.d_plus(tau, x);
        let dm = dp - self.sigma * sq;
        let disc_k = exp(-self.r * tau) * self.strike;
        let value = x * normal_cdf(dp) - disc_k * normal_cdf(dm);
        Partials {
            value,
            dt: -x * normal_pdf(dp) * self.sigma / (2.0 * sq) - self.r * disc_k * normal_cdf(dm),
            dx: normal_cdf(dp),
            dxx: normal_pdf(dp) / (x * self.sigma * sq),
        }
    }

    pub fn put_partials(&self, t: f64, x: f64) -> Partials {
        let c = self.call_partials(t, x);
        let disc_k = exp(-self.r * self.tau(t)) * self.strike;
        Partials { value: c.value - x + disc_k, dt: c.dt + self.r * disc_k, dx: c.dx - 1.0, dxx: c.dxx }
    }

    /// `∂_t f + ½σ²x² ∂_xx f + r x ∂_x f - r f`.
    pub fn operator(&self, x: f64, p: &Partials) -> f64 {
        p.dt + 0.5 * self.sigma * self.sigma * x * x * p.dxx + self.r * x * p.dx - self.r * p.value
    }
}

/// Largest one-step conditional-expectation residual found, with its node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleReport {
    pub max_residual: f64,
    pub worst_node: Option<(usize, usize)>,
}

/// Checks `r_m^{-k} v(k, i) = r_m^{-k-1}(q^+ v(k+1, i+1) + q^- v(k+1, i))`
/// for `k < n_steps`. Residuals are relative to `max(1, |r_m^{-k} v(k, i)|)`.
pub fn martingale_residual(level: &MarketLevel, n_steps: usize, v: &dyn Fn(usize, usize) -> f64) -> MartingaleReport {
    let mut report = MartingaleReport { max_residual: 0.0, worst_node: None };
    for k in 0..n_steps {
        let dk = level.discount(k);
        let dk1 = level.discount(k + 1);
        for i in 0..=k {
            let here = dk * v(k, i);
            let ahead = dk1 * (level.q_plus * v(k + 1, i + 1) + level.q_minus * v(k + 1, i));
            let res = abs(here - ahead) / here.abs().max(1.0);
            if report.worst_node.is_none() || res > report.max_residual {
                report = MartingaleReport { max_residual: res, worst_node: Some((k, i)) };
            }
        }
    }
    report
}

pub fn martingale_check(surface: &PriceSurface) -> MartingaleReport {
    martingale_residual(surface.level(), surface.steps(), &|k, i| surface.value(k, i))
}

pub fn asset_martingale_check(level: &MarketLevel) -> MartingaleReport {
    martingale_residual(level, level.n_steps, &|k, i| level.node_price(level.s0(), k, i))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub m: u32,
    pub binomial: f64,
    pub bsm: f64,
    pub gap: f64,
}

/// `|C_m(0, s0) - C(0, s0)|` for each level.
pub fn demoivre_limit_check(params: &MarketParams, strike: f64, levels: &[u32]) -> Result<Vec<LimitRow>> {
    let bs = BlackScholes::new(params, strike);
    let bsm = bs.call(0.0, params.s0);
    levels
        .iter()
        .map(|&m| {
            let level = crate::market::build_level(params, m)?;
            let binomial = call_closed_binomial(&level, strike, 0, params.s0);
            Ok(LimitRow { m, binomial, bsm, gap: abs(binomial - bsm) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claim::Claim;
    use crate::market::build_level;

    fn one_step() -> MarketLevel {
        let p = MarketParams::new(0.0, 1.0, 0.0, 1.0, 0.25).unwrap();
        build_level(&p, 1).unwrap()
    }

    #[test]
    fn one_step_call() {
        let level = one_step();
        assert_eq!(level.n_steps, 1);
        let s = PriceSurface::build(&level, &Claim::call(1.0).unwrap()).unwrap();
        assert_eq!(s.root(), 0.25);
        assert_eq!(price_explicit(&level, &Claim::call(1.0).unwrap(), 0, 1.0), 0.25);
        assert!((call_closed_binomial(&level, 1.0, 0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_claim_discounts() {
        let p = MarketParams::new(0.1, 0.2, 0.05, 100.0, 1.0).unwrap();
        let level = build_level(&p, 2).unwrap();
        let s = PriceSurface::build(&level, &Claim::Constant(1.0)).unwrap();
        for k in 0..=16 {
            for &v in s.row(k) {
                assert!((v - level.discount(16 - k)).abs() < 1e-15);
            }
        }
        assert!((price_explicit(&level, &Claim::Constant(1.0), 3, 70.0) - level.discount(13)).abs() < 1e-15);
        assert_eq!(price_explicit(&level, &Claim::call(90.0).unwrap(), 16, 95.0), 5.0);
    }

    #[test]
    fn cap_guard() {
        let p = MarketParams::new(0.1, 0.2, 0.05, 100.0, 1.0).unwrap();
        let level = build_level(&p, 3).unwrap();
        let err = PriceSurface::build_with_cap(&level, &Claim::Constant(1.0), 32).unwrap_err();
        assert_eq!(err, Error::StepCapExceeded { steps: 64, cap: 32 });
    }

    #[test]
    fn closed_binomial_degenerate_cases() {
        let p = MarketParams::new(0.1, 0.2, 0.05, 100.0, 1.0).unwrap();
        let level = build_level(&p, 3).unwrap();
        let n = 64 - 10;
        let low = 100.0 * level.d_m.powi(n as i32) * 0.999;
        let c = call_closed_binomial(&level, low, 10, 100.0);
        assert!((c - (100.0 - level.discount(n) * low)).abs() < 1e-12);
        let high = 100.0 * level.u_m.powi(n as i32) * 1.001;
        assert_eq!(call_closed_binomial(&level, high, 10, 100.0), 0.0);
    }

    #[test]
    fn closed_binomial_matches_explicit() {
        let p = MarketParams::new(0.03, 0.25, 0.05, 100.0, 1.0).unwrap();
        let level = build_level(&p, 4).unwrap();
        for &strike in &[60.0, 95.0, 100.0, 103.7, 150.0] {
            let call = Claim::call(strike).unwrap();
            for &(k, x) in &[(0usize, 100.0), (17, 80.0), (200, 120.0)] {
                let a = call_closed_binomial(&level, strike, k, x);
                let b = price_explicit(&level, &call, k, x);
                assert!((a - b).abs() < 1e-10, "K={strike} k={k}: {a} vs {b}");
                let put = price_explicit(&level, &Claim::put(strike).unwrap(), k, x);
                assert!((put_price(&level, strike, k, x) - put).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn surface_matches_explicit_and_is_martingale() {
        let p = MarketParams::new(0.1, 0.3, 0.02, 1.0, 1.0).unwrap();
        let level = build_level(&p, 3).unwrap();
        let call = Claim::call(1.05).unwrap();
        let s = PriceSurface::build(&level, &call).unwrap();
        for k in 0..=64 {
            for i in 0..=k {
                let e = price_explicit(&level, &call, k, s.node_price(k, i));
                assert!((e - s.value(k, i)).abs() <= 1e-10 * e.abs().max(1e-3));
            }
        }
        assert!(martingale_check(&s).max_residual < 1e-13);
        assert!(asset_martingale_check(&level).max_residual < 1e-13);
    }

    #[test]
    fn corrupted_node_is_located() {
        let p = MarketParams::new(0.1, 0.3, 0.02, 1.0, 1.0).unwrap();
        let level = build_level(&p, 2).unwrap();
        let mut s = PriceSurface::build(&level, &Claim::put(1.0).unwrap()).unwrap();
        s.set_value(7, 3, s.value(7, 3) + 0.01);
        let report = martingale_check(&s);
        assert!(report.max_residual > 1e-3);
        let (k, i) = report.worst_node.unwrap();
        assert!(k == 7 || (k == 6 && (i == 2 || i == 3)), "{k},{i}");
    }

    #[test]
    fn black_scholes_shapes() {
        let p = MarketParams::new(0.05, 0.2, 0.05, 100.0, 1.0).unwrap();
        let bs = BlackScholes::new(&p, 100.0);
        let far = bs.call(0.0, 1e4);
        assert!((far - (1e4 - libm::exp(-0.05) * 100.0)).abs() < 1e-9);
        let flat = BlackScholes { r: 0.0, ..bs };
        let v = 0.2 * libm::sqrt(0.5);
        let expect = 100.0 * (normal_cdf(v / 2.0) - normal_cdf(-v / 2.0));
        assert!((flat.call(0.5, 100.0) - expect).abs() < 1e-12);
        assert_eq!(bs.call(1.0, 130.0), 30.0);
        assert_eq!(bs.put(1.0, 80.0), 20.0);
        // Hull's textbook value for this contract.
        assert!((bs.call(0.0, 100.0) - 10.450583572185565).abs() < 1e-9);
    }

    #[test]
    fn call_operator_vanishes() {
        let p = MarketParams::new(0.05, 0.2, 0.05, 100.0, 1.0).unwrap();
        let bs = BlackScholes::new(&p, 100.0);
        let part = bs.call_partials(0.5, 100.0);
        assert!(bs.operator(100.0, &part).abs() < 1e-10);
        let put = bs.put_partials(0.3, 85.0);
        assert!(bs.operator(85.0, &put).abs() < 1e-10);
    }
}
