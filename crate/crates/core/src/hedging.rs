//! Replicating portfolios and lattice sensitivities.

use alloc::vec::Vec;

use crate::claim::Payoff;
use crate::error::{Error, Result};
use crate::lattice::{price_explicit, BlackScholes, PriceSurface};
use crate::market::{AssetPath, MarketLevel};
use crate::math::{abs, binomial_pmf, exp, CompensatedSum};
use crate::walk::WalkPath;

/// Holdings `(a_m, b_m)` at every node of steps `0..N`; `b` counts units
/// of the bond `r_m^k`.
#[derive(Debug, Clone)]
pub struct PortfolioSurface {
    level: MarketLevel,
    a: Vec<f64>,
    b: Vec<f64>,
    root_value: f64,
}

#[inline]
fn offset(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Solves the one-step system
/// `a·S_up + b·r^{k+1} = V_up`, `a·S_dn + b·r^{k+1} = V_dn`.
fn solve_step(level: &MarketLevel, k: usize, s_up: f64, s_dn: f64, v_up: f64, v_dn: f64) -> (f64, f64) {
    debug_assert!(s_up > s_dn && s_dn > 0.0);
    let a = (v_up - v_dn) / (s_up - s_dn);
    let b = level.discount(k + 1) * (v_up - a * s_up);
    (a, b)
}

pub fn replicate(surface: &PriceSurface) -> PortfolioSurface {
    let level = *surface.level();
    let n = level.n_steps;
    let mut a = Vec::with_capacity(offset(n));
    let mut b = Vec::with_capacity(offset(n));
    for k in 0..n {
        for i in 0..=k {
            let (ak, bk) = solve_step(
                &level,
                k,
                surface.node_price(k + 1, i + 1),
                surface.node_price(k + 1, i),
                surface.value(k + 1, i + 1),
                surface.value(k + 1, i),
            );
            a.push(ak);
            b.push(bk);
        }
    }
    PortfolioSurface { level, a, b, root_value: surface.root() }
}

impl PortfolioSurface {
    pub fn level(&self) -> &MarketLevel {
        &self.level
    }

    pub fn a(&self, k: usize, i: usize) -> f64 {
        self.a[offset(k) + i]
    }

    pub fn b(&self, k: usize, i: usize) -> f64 {
        self.b[offset(k) + i]
    }

    pub fn root_value(&self) -> f64 {
        self.root_value
    }

    /// `a·x + b·r_m^k` at node `(k, i)`.
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.a(k, i) * self.level.node_price(self.level.s0(), k, i) + self.b(k, i) * self.level.bond_price(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeEntry {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    /// Portfolio value after rebalancing at step `k`.
    pub value: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeLedger {
    pub entries: Vec<HedgeEntry>,
    /// Largest `|new - old| / max(1, |old|)` over rebalances.
    pub max_self_financing: f64,
    pub terminal_value: f64,
    pub payoff: f64,
    /// `|V_m(T) - g(S_m(T))| / max(1, |g(S_m(T))|)`.
    pub terminal_error: f64,
}

/// Starts with the root price, holds `(a, b)` for one step and rebalances
/// at the node reached, all the way to maturity.
pub fn pathwise_hedge(portfolio: &PortfolioSurface, path: &AssetPath, claim: &dyn Payoff) -> Result<HedgeLedger> {
    let level = portfolio.level();
    if path.m != level.m {
        return Err(Error::Precondition("path level differs from portfolio level"));
    }
    let n = level.n_steps;
    if path.steps() < n {
        return Err(Error::InsufficientSteps { needed: n, available: path.steps() });
    }
    let mut entries = Vec::with_capacity(n);
    let mut max_sf: f64 = 0.0;
    let mut held: Option<(f64, f64)> = None;
    let mut value = portfolio.root_value();
    for k in 0..n {
        let price = path.values[k];
        let bond = level.bond_price(k);
        if let Some((a, b)) = held {
            value = a * price + b * bond;
        }
        let i = path.node(k);
        let (a, b) = (portfolio.a(k, i), portfolio.b(k, i));
        let rebalanced = a * price + b * bond;
        max_sf = max_sf.max(abs(rebalanced - value) / value.abs().max(1.0));
        entries.push(HedgeEntry { k, a, b, value: rebalanced, price });
        held = Some((a, b));
        value = rebalanced;
    }
    let price = path.values[n];
    if let Some((a, b)) = held {
        value = a * price + b * level.bond_price(n);
    }
    let payoff = claim.eval(price);
    Ok(HedgeLedger {
        entries,
        max_self_financing: max_sf,
        terminal_value: value,
        payoff,
        terminal_error: abs(value - payoff) / payoff.abs().max(1.0),
    })
}

/// `r_m^{k-N} Σ_i C(N-k, i) q^i (1-q)^{N-k-i} (s_i/x)^j g^{(j)}(s_i)`,
/// the `j`-th `x`-derivative of the lattice price.
pub fn lattice_derivative(level: &MarketLevel, claim: &dyn Payoff, j: u32, k: usize, x: f64) -> Result<f64> {
    let n = level.n_steps.saturating_sub(k);
    let weights = binomial_pmf(n, level.q_plus);
    let mut sum = CompensatedSum::new();
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let log_ratio = i as f64 * level.ln_u() + (n - i) as f64 * level.ln_d();
        let s = x * exp(log_ratio);
        let g = claim.derivative(j, s).ok_or(Error::DerivativeUnavailable { order: j })?;
        sum.add(w * exp(j as f64 * log_ratio) * g);
    }
    Ok(level.discount(n) * sum.value())
}

/// `(a_m(t_k, x), b_m(t_k, x))` for an arbitrary spot `x`, from explicit
/// prices at the two successors.
pub fn portfolio_at(level: &MarketLevel, claim: &dyn Payoff, k: usize, x: f64) -> Result<(f64, f64)> {
    if k >= level.n_steps {
        return Err(Error::Precondition("no rebalancing at maturity"));
    }
    let s_up = level.node_price(x, 1, 1);
    let s_dn = level.node_price(x, 1, 0);
    let v_up = price_explicit(level, claim, k + 1, s_up);
    let v_dn = price_explicit(level, claim, k + 1, s_dn);
    Ok(solve_step(level, k, s_up, s_dn, v_up, v_dn))
}

/// `|a_m(t_k, x) - ∂_x f_m(t_{k+1}, x)|`.
pub fn portfolio_vs_delta(level: &MarketLevel, claim: &dyn Payoff, k: usize, x: f64) -> Result<f64> {
    let (a, _) = portfolio_at(level, claim, k, x)?;
    let delta = lattice_derivative(level, claim, 1, k + 1, x)?;
    Ok(abs(a - delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vanilla {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousGap {
    pub m: u32,
    /// `sup_t |a_m(t^{(m)}) - a(t)|`.
    pub delta_gap: f64,
    /// `sup_t |b_m(t^{(m)}) - b(t)|` with `b` in bond units.
    pub bond_gap: f64,
}

/// Compares lattice holdings along a walk with the Black–Scholes hedge
/// `a(t) = Φ(d_+(T - t, S_m(t^{(m)})))` on a time grid.
pub fn convergence_to_continuous(
    level: &MarketLevel,
    kind: Vanilla,
    strike: f64,
    walk: &WalkPath<'_>,
    times: &[f64],
) -> Result<ContinuousGap> {
    let path = crate::market::asset_path(level, walk)?;
    let bs = BlackScholes::new(&level.params, strike);
    let claim = match kind {
        Vanilla::Call => crate::claim::Claim::call(strike)?,
        Vanilla::Put => crate::claim::Claim::put(strike)?,
    };
    let mut gap = ContinuousGap { m: level.m, delta_gap: 0.0, bond_gap: 0.0 };
    for &t in times {
        let k = level.step_of(t);
        if k >= level.n_steps {
            return Err(Error::Precondition("time grid must stay before maturity"));
        }
        let x = path.values[k];
        let (a, b) = portfolio_at(level, &claim, k, x)?;
        let (a_c, b_c) = match kind {
            Vanilla::Call => (bs.call_delta(t, x), bs.call_bond(t, x)),
            Vanilla::Put => (bs.put_delta(t, x), bs.put_bond(t, x)),
        };
        gap.delta_gap = gap.delta_gap.max(abs(a - a_c));
        gap.bond_gap = gap.bond_gap.max(abs(b - b_c));
    }
    Ok(gap)
}
