//! Smoothing the put payoff `(K - s)_+` by convolution with a bump.
//!
//! `g_n(s) = ∫ g(s - u) n ψ(nu) du`, which equals `K - s` left of
//! `K - 1/n`, vanishes right of `K + 1/n`, and in between is
//! `∫_{n(s-K)}^1 (K - s + v/n) ψ(v) dv`.

use crate::claim::{Claim, Payoff};
use crate::error::{Error, Result};
use crate::hedging::{lattice_derivative, portfolio_at};
use crate::lattice::price_explicit;
use crate::market::MarketLevel;
use crate::math::{abs, binomial_pmf, exp, pow2, CompensatedSum};
use crate::quad::integrate;

const QUAD_TOL: f64 = 1e-13;

fn bump_shape(u: f64) -> f64 {
    if abs(u) < 1.0 {
        exp(-1.0 / (1.0 - u * u))
    } else {
        0.0
    }
}

/// `c` with `∫ c·exp(-1/(1 - u²)) du = 1` over `(-1, 1)`.
pub fn bump_constant() -> f64 {
    1.0 / integrate(bump_shape, -1.0, 1.0, 1e-15).value
}

/// `ψ(u) = c·exp(-1/(1 - u²))` on `(-1, 1)`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub c: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Bump::new()
    }
}

impl Bump {
    pub fn new() -> Self {
        Bump { c: bump_constant() }
    }

    pub fn psi(&self, u: f64) -> f64 {
        self.c * bump_shape(u)
    }

    /// `ψ'(u) = ψ(u)·(-2u/(1 - u²)²)`.
    pub fn psi_prime(&self, u: f64) -> f64 {
        if abs(u) < 1.0 {
            let v = 1.0 - u * u;
            self.psi(u) * (-2.0 * u / (v * v))
        } else {
            0.0
        }
    }

    /// `∫_w^1 ψ`.
    pub fn upper_mass(&self, w: f64) -> f64 {
        if w >= 1.0 {
            return 0.0;
        }
        if w <= -1.0 {
            return 1.0;
        }
        // integrate the shorter side for accuracy
        if w >= 0.0 {
            integrate(|v| self.psi(v), w, 1.0, QUAD_TOL).value
        } else {
            1.0 - integrate(|v| self.psi(v), -1.0, w, QUAD_TOL).value
        }
    }

    /// `∫_w^1 vψ(v) dv`.
    pub fn upper_moment(&self, w: f64) -> f64 {
        if abs(w) >= 1.0 {
            return 0.0;
        }
        // ψ is even, so ∫_{-1}^{1} vψ = 0 and ∫_w^1 vψ = ∫_{|w|}^1 vψ.
        integrate(|v| v * self.psi(v), abs(w), 1.0, QUAD_TOL).value
    }
}

/// The mollified put `g_n` and its first three derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedPut {
    n: u32,
    strike: f64,
    bump: Bump,
}

impl SmoothedPut {
    pub fn new(n: u32, strike: f64) -> Result<Self> {
        Self::with_bump(n, strike, Bump::new())
    }

    pub fn with_bump(n: u32, strike: f64, bump: Bump) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter { name: "n", reason: "must be at least 1" });
        }
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(Error::InvalidParameter { name: "K", reason: "strike must be positive" });
        }
        Ok(SmoothedPut { n, strike, bump })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    fn scaled(&self, s: f64) -> f64 {
        self.n as f64 * (s - self.strike)
    }

    pub fn value(&self, s: f64) -> f64 {
        let w = self.scaled(s);
        if w <= -1.0 {
            self.strike - s
        } else if w >= 1.0 {
            0.0
        } else {
            (self.strike - s) * self.bump.upper_mass(w) + self.bump.upper_moment(w) / self.n as f64
        }
    }

    pub fn first(&self, s: f64) -> f64 {
        -self.bump.upper_mass(self.scaled(s))
    }

    pub fn second(&self, s: f64) -> f64 {
        self.n as f64 * self.bump.psi(self.scaled(s))
    }

    pub fn third(&self, s: f64) -> f64 {
        let n = self.n as f64;
        n * n * self.bump.psi_prime(self.scaled(s))
    }

    /// `sup g_n'' = n·c/e`, attained at `s = K`.
    pub fn max_second(&self) -> f64 {
        self.n as f64 * self.bump.c * exp(-1.0)
    }
}

impl Payoff for SmoothedPut {
    fn eval(&self, s: f64) -> f64 {
        self.value(s)
    }

    fn derivative(&self, order: u32, s: f64) -> Option<f64> {
        match order {
            0 => Some(self.value(s)),
            1 => Some(self.first(s)),
            2 => Some(self.second(s)),
            3 => Some(self.third(s)),
            _ => None,
        }
    }
}

/// `P_m^{(n)}(t_k, x)`.
pub fn smoothed_put_price(level: &MarketLevel, put: &SmoothedPut, k: usize, x: f64) -> f64 {
    price_explicit(level, put, k, x)
}

/// Exact `Q_m`-probability that `|S_m(T) - K| ≤ band` given `S_m(t_k) = x`.
pub fn strike_band_probability(level: &MarketLevel, strike: f64, band: f64, k: usize, x: f64) -> f64 {
    let n = level.n_steps.saturating_sub(k);
    let weights = binomial_pmf(n, level.q_plus);
    let sum: CompensatedSum = weights
        .iter()
        .enumerate()
        .filter(|(i, _)| abs(level.node_price(x, n, *i) - strike) <= band)
        .map(|(_, w)| *w)
        .collect();
    sum.value().min(1.0)
}

/// `∂_x P_m^{(n)}(t_k, x)`.
pub fn smoothed_delta(level: &MarketLevel, put: &SmoothedPut, k: usize, x: f64) -> f64 {
    lattice_derivative(level, put, 1, k, x).expect("smoothed put supplies g'")
}

/// `∂_x P_m(t_k, x)` of the raw put, with `g'(K) = -½`.
pub fn raw_put_delta(level: &MarketLevel, strike: f64, k: usize, x: f64) -> f64 {
    lattice_derivative(level, &Claim::Put { strike }, 1, k, x).expect("put supplies g'")
}

/// Smallest `n` with `n³ ≥ 4^m`, i.e. `⌈2^{2m/3}⌉` computed exactly.
pub fn smoothing_index(m: u32) -> u32 {
    let target = 1u128 << (2 * m);
    let mut n = libm::ceil(libm::cbrt(target as f64)) as u128;
    while n > 1 && (n - 1).pow(3) >= target {
        n -= 1;
    }
    while n.pow(3) < target {
        n += 1;
    }
    n as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeScheduleRow {
    pub m: u32,
    pub n: u32,
    /// Raw put hedge ratio `a_m(t_k, x)`.
    pub a: f64,
    /// `∂_x P_m^{(n)}(t_{k+1}, x)`.
    pub smoothed_delta: f64,
    pub delta_gap: f64,
    /// `|b_m - r_m^{-k-1}(P_m(t_{k+1}, u x) - u x ∂_x P_m^{(n)}(t_{k+1}, x))|`.
    pub bond_gap: f64,
}

/// Compares the exact put hedge with the one read off the smoothed price,
/// using `n = ⌈2^{2m/3}⌉`. Fails unless `(1/K)(1/n + c1·2^{-m}) ≤ ½`.
pub fn european_hedge_schedule(level: &MarketLevel, strike: f64, c1: f64, k: usize, x: f64) -> Result<HedgeScheduleRow> {
    let n = smoothing_index(level.m);
    if (1.0 / n as f64 + c1 * pow2(-(level.m as i32))) / strike > 0.5 {
        return Err(Error::Precondition("band condition (1/K)(1/n + c1 2^-m) <= 1/2 fails"));
    }
    let put = SmoothedPut::new(n, strike)?;
    let raw = Claim::Put { strike };
    let (a, b) = portfolio_at(level, &raw, k, x)?;
    let sd = smoothed_delta(level, &put, k + 1, x);
    let ux = level.node_price(x, 1, 1);
    let b_ref = level.discount(k + 1) * (price_explicit(level, &raw, k + 1, ux) - ux * sd);
    Ok(HedgeScheduleRow { m: level.m, n, a, smoothed_delta: sd, delta_gap: abs(a - sd), bond_gap: abs(b - b_ref) })
}

/// `C_m^{(n)} = P_m^{(n)} + x - r_m^{k-N} K` and `∂_x C_m^{(n)} = ∂_x P_m^{(n)} + 1`.
pub fn smoothed_call(level: &MarketLevel, put: &SmoothedPut, k: usize, x: f64) -> (f64, f64) {
    let n = level.n_steps.saturating_sub(k);
    let price = smoothed_put_price(level, put, k, x) + x - level.discount(n) * put.strike();
    (price, smoothed_delta(level, put, k, x) + 1.0)
}
