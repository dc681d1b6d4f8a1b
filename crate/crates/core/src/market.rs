//! The level-`m` discrete market.
//!
//! One step multiplies the asset by `u_m = 1 + σ2^{-m} + μ2^{-2m}` or
//! `d_m = 1 - σ2^{-m} + μ2^{-2m}` and the bond by `r_m = 1 + r2^{-2m}`.
//! Prices and the Radon–Nikodym process are accumulated in log space from
//! up/down counts, so node `(k, i)` has the same value wherever it is
//! reached.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, ln_1p, pow2};
use crate::walk::{lattice_steps, PathEval, WalkPath};

/// Model constants shared by all levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub s0: f64,
    pub horizon: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, r: f64, s0: f64, horizon: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter { name: "mu", reason: "must be finite" });
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter { name: "sigma", reason: "must be positive" });
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter { name: "r", reason: "must be nonnegative" });
        }
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::InvalidParameter { name: "s0", reason: "must be positive" });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter { name: "horizon", reason: "must be positive" });
        }
        Ok(MarketParams { mu, sigma, r, s0, horizon })
    }

    /// `m0 = log2(|r - μ| / σ)`; `-∞` when `r = μ`.
    pub fn m0(&self) -> f64 {
        let gap = abs(self.r - self.mu);
        if gap == 0.0 {
            f64::NEG_INFINITY
        } else {
            libm::log2(gap / self.sigma)
        }
    }

    /// `(r - μ) / σ`, the market price of risk with the sign used by `Λ`.
    pub fn theta(&self) -> f64 {
        (self.r - self.mu) / self.sigma
    }
}

/// Constants of the level-`m` market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketLevel {
    pub params: MarketParams,
    pub m: u32,
    pub dt: f64,
    pub dx: f64,
    pub r_m: f64,
    pub u_m: f64,
    pub d_m: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    /// Number of steps to maturity, `horizon · 2^{2m}`.
    pub n_steps: usize,
    ln_u: f64,
    ln_d: f64,
    ln_r: f64,
}

/// Builds the level-`m` market, rejecting levels where `q_m^+ ∉ (0, 1)`
/// or `d_m ≤ 0`.
pub fn build_level(params: &MarketParams, m: u32) -> Result<MarketLevel> {
    let dx = pow2(-(m as i32));
    let dt = dx * dx;
    // m > m0  <=>  σ 2^m > |r - μ|, compared without taking logs.
    if !(params.sigma / dx > abs(params.r - params.mu)) {
        return Err(Error::LevelTooCoarse { m, m0: params.m0() });
    }
    let u_m = 1.0 + params.sigma * dx + params.mu * dt;
    let d_m = 1.0 - params.sigma * dx + params.mu * dt;
    if !(d_m > 0.0) {
        return Err(Error::NonPositiveDownFactor { m, d: d_m });
    }
    let n_steps = lattice_steps(params.horizon, m)?;
    let half_tilt = 0.5 * params.theta() * dx;
    let q_plus = 0.5 + half_tilt;
    let q_minus = 0.5 - half_tilt;
    Ok(MarketLevel {
        params: *params,
        m,
        dt,
        dx,
        r_m: 1.0 + params.r * dt,
        u_m,
        d_m,
        q_plus,
        q_minus,
        n_steps,
        ln_u: ln_1p(params.sigma * dx + params.mu * dt),
        ln_d: ln_1p(-params.sigma * dx + params.mu * dt),
        ln_r: ln_1p(params.r * dt),
    })
}

impl MarketLevel {
    pub fn s0(&self) -> f64 {
        self.params.s0
    }

    /// `t_k = k·2^{-2m}`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Lattice step of a continuous time, `⌊t·2^{2m}⌋`.
    pub fn step_of(&self, t: f64) -> usize {
        libm::floor(t / self.dt).max(0.0) as usize
    }

    pub fn ln_u(&self) -> f64 {
        self.ln_u
    }

    pub fn ln_d(&self) -> f64 {
        self.ln_d
    }

    pub fn ln_r(&self) -> f64 {
        self.ln_r
    }

    /// `x · u_m^{ups} · d_m^{steps - ups}`, evaluated in log space.
    pub fn node_price(&self, x: f64, steps: usize, ups: usize) -> f64 {
        debug_assert!(ups <= steps);
        x * exp(ups as f64 * self.ln_u + (steps - ups) as f64 * self.ln_d)
    }

    /// `r_m^{-n}`.
    pub fn discount(&self, n: usize) -> f64 {
        exp(-(n as f64) * self.ln_r)
    }

    /// `β_m(t_k) = r_m^k`.
    pub fn bond_price(&self, k: usize) -> f64 {
        exp(k as f64 * self.ln_r)
    }

    /// `|e^{rt} - β_m(t)|` with `β_m(t) = r_m^{⌊t 2^{2m}⌋}`.
    pub fn bond_gap(&self, t: f64) -> f64 {
        abs(exp(self.params.r * t) - self.bond_price(self.step_of(t)))
    }

    /// `(ln(2q^+), ln(2q^-))`.
    pub fn ln_two_q(&self) -> (f64, f64) {
        let tilt = self.params.theta() * self.dx;
        (ln_1p(tilt), ln_1p(-tilt))
    }

    /// `ln(u_m / d_m)`.
    pub fn ln_ud(&self) -> f64 {
        ln(self.u_m / self.d_m)
    }
}

/// `S_m(t_k)` along one walk path.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPath {
    pub m: u32,
    /// Cumulative up-step count at each step, `ups[0] = 0`.
    pub ups: Vec<usize>,
    pub values: Vec<f64>,
}

impl AssetPath {
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Lattice node index (number of up-steps) at step `k`.
    pub fn node(&self, k: usize) -> usize {
        self.ups[k]
    }

    /// Growth factor of step `k → k + 1`.
    pub fn is_up(&self, k: usize) -> bool {
        self.ups[k + 1] > self.ups[k]
    }
}

fn check_walk(level: &MarketLevel, walk: &WalkPath<'_>) -> Result<()> {
    if walk.level() != level.m {
        return Err(Error::Precondition("walk level differs from market level"));
    }
    if walk.steps() < level.n_steps {
        return Err(Error::InsufficientSteps { needed: level.n_steps, available: walk.steps() });
    }
    Ok(())
}

/// Solves `S_m(t_{k+1}) = S_m(t_k)(1 + μΔt + σΔB_m(t_{k+1}))` along `walk`.
pub fn asset_path(level: &MarketLevel, walk: &WalkPath<'_>) -> Result<AssetPath> {
    check_walk(level, walk)?;
    let n = level.n_steps;
    let ups: Vec<usize> = (0..=n).map(|k| walk.ups(k)).collect();
    let values = ups.iter().enumerate().map(|(k, &i)| level.node_price(level.s0(), k, i)).collect();
    Ok(AssetPath { m: level.m, ups, values })
}

/// `s0 · exp((μ - σ²/2)t + σB_m(t))`.
pub fn exp_reference(params: &MarketParams, walk: &dyn PathEval, t: f64) -> f64 {
    params.s0 * exp((params.mu - 0.5 * params.sigma * params.sigma) * t + params.sigma * walk.eval(t))
}

/// `sup_k |S_m(t_k) - exp_reference(t_k)|` over the lattice times.
pub fn reference_gap(level: &MarketLevel, path: &AssetPath, walk: &WalkPath<'_>) -> f64 {
    path.values
        .iter()
        .enumerate()
        .map(|(k, &s)| abs(s - exp_reference(&level.params, walk, level.time(k))))
        .fold(0.0, f64::max)
}

/// The Radon–Nikodym process `Λ_m(t_k)`, stored as logs.
#[derive(Debug, Clone, PartialEq)]
pub struct RnProcess {
    pub log_values: Vec<f64>,
}

impl RnProcess {
    pub fn value(&self, k: usize) -> f64 {
        exp(self.log_values[k])
    }

    pub fn terminal_log(&self) -> f64 {
        *self.log_values.last().unwrap_or(&0.0)
    }
}

/// `Λ_m(t_k) = (2q^+)^{#up(k)} (2q^-)^{#down(k)}`.
pub fn rn_process(level: &MarketLevel, walk: &WalkPath<'_>) -> Result<RnProcess> {
    check_walk(level, walk)?;
    let (lp, lm) = level.ln_two_q();
    let log_values = (0..=level.n_steps)
        .map(|k| {
            let ups = walk.ups(k);
            ups as f64 * lp + (k - ups) as f64 * lm
        })
        .collect();
    Ok(RnProcess { log_values })
}

/// `|log Λ_m(T) - (θB_m(T) - θ²T/2)|` with `θ = (r - μ)/σ`.
pub fn rn_log_gap(level: &MarketLevel, walk: &WalkPath<'_>) -> Result<f64> {
    let rn = rn_process(level, walk)?;
    let theta = level.params.theta();
    let horizon = level.params.horizon;
    let b = walk.at_step(level.n_steps);
    Ok(abs(rn.terminal_log() - (theta * b - 0.5 * theta * theta * horizon)))
}

/// `W_m(t) = B_m(t) + ((μ - r)/σ) t`.
pub fn drifted_walk(level: &MarketLevel, walk: &dyn PathEval, t: f64) -> f64 {
    walk.eval(t) - level.params.theta() * t
}
