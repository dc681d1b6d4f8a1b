//! Discrete Feynman–Kac functionals of discrete Itô processes.
//!
//! Forward: `f(t_{k+1}, x) = ½e^{-r(x)Δt}(f(t_k, x⁺) + f(t_k, x⁻))`,
//! `f(0, ·) = g`, with `x^± = x + μ(x)Δt ± σ(x)Δx`.
//!
//! Backward: `f(t_{k-1}, x) = Σ_± p^± e^{-ρ(t_k, x^±)Δt} f(t_k, x^±)`,
//! `f(T, ·) = g`, with `x^± = x + μ(t_{k-1}, x)Δt + σ(t_{k-1}, x)(Δx)^±`.
//! The discount is charged at the state reached, matching the functional
//! `E[exp(-Σ_{i=k+1}^{N} ρ(t_i, S(t_i))Δt) g(S(T)) | S(t_k) = x]`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::claim::Payoff;
use crate::error::{Error, Result};
use crate::hedging::{lattice_derivative, Vanilla};
use crate::lattice::{price_explicit, BlackScholes};
use crate::market::MarketLevel;
use crate::math::{abs, exp, ln_1p, pow2, sqrt};

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Exact tree evaluation is used up to this depth.
pub const DEFAULT_TREE_CAP: usize = 22;

/// Declares `μ(x) = drift·x` and `σ(x) = vol·x`, which makes the process
/// recombine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplicative {
    pub drift: f64,
    pub vol: f64,
}

#[derive(Clone)]
pub struct FkForward {
    pub mu: Fn1,
    pub sigma: Fn1,
    pub r: Fn1,
    pub g: Fn1,
    pub m: u32,
    pub multiplicative: Option<Multiplicative>,
}

#[derive(Clone)]
pub struct FkBackward {
    pub mu: Fn2,
    pub sigma: Fn2,
    pub rho: Fn2,
    pub g: Fn1,
    pub step_up: f64,
    pub step_down: f64,
    pub p_plus: f64,
    pub m: u32,
    pub n_steps: usize,
    pub multiplicative: Option<Multiplicative>,
}

impl fmt::Debug for FkForward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FkForward").field("m", &self.m).field("multiplicative", &self.multiplicative).finish()
    }
}

impl fmt::Debug for FkBackward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FkBackward")
            .field("m", &self.m)
            .field("n_steps", &self.n_steps)
            .field("step_up", &self.step_up)
            .field("step_down", &self.step_down)
            .field("p_plus", &self.p_plus)
            .field("multiplicative", &self.multiplicative)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Tree,
    Lattice,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tree_cap: usize,
    /// Zero disables Monte Carlo.
    pub mc_samples: usize,
    pub seed: u64,
    /// Overrides automatic strategy selection.
    pub force: Option<Strategy>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tree_cap: DEFAULT_TREE_CAP, mc_samples: 100_000, seed: 0, force: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkSolution {
    pub value: f64,
    pub strategy: Strategy,
    /// Standard error of the estimate; zero for exact strategies.
    pub std_error: f64,
}

fn choose(depth: usize, recombines: bool, opts: &SolveOptions) -> Result<Strategy> {
    if let Some(s) = opts.force {
        if s == Strategy::Lattice && !recombines {
            return Err(Error::Precondition("lattice strategy needs multiplicative coefficients"));
        }
        if s == Strategy::MonteCarlo && opts.mc_samples == 0 {
            return Err(Error::Precondition("Monte Carlo needs a positive sample count"));
        }
        return Ok(s);
    }
    if recombines {
        Ok(Strategy::Lattice)
    } else if depth <= opts.tree_cap {
        Ok(Strategy::Tree)
    } else if opts.mc_samples > 0 {
        Ok(Strategy::MonteCarlo)
    } else {
        Err(Error::DepthExceeded { depth, cap: opts.tree_cap })
    }
}

fn coin_flip(rng: &mut ChaCha8Rng, p_plus: f64) -> bool {
    let u = (rng.next_u64() >> 11) as f64 * pow2(-53);
    u < p_plus
}

/// Mean and standard error of `n` draws.
fn monte_carlo(n: usize, mut draw: impl FnMut() -> f64) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 1..=n {
        let v = draw();
        let d = v - mean;
        mean += d / i as f64;
        m2 += d * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, sqrt(var / n as f64))
}

/// Fold a recombining lattice of depth `n` rooted at `x` back to its root.
/// `discount(j, s)` is the one-step factor charged for a move into a node
/// at depth `j` with price `s`.
fn fold_lattice(
    x: f64,
    n: usize,
    ln_up: f64,
    ln_dn: f64,
    p_plus: f64,
    terminal: &dyn Fn(f64) -> f64,
    discount: &dyn Fn(usize, f64) -> f64,
) -> f64 {
    let node = |j: usize, i: usize| x * exp(i as f64 * ln_up + (j - i) as f64 * ln_dn);
    let mut row: Vec<f64> = (0..=n).map(|i| terminal(node(n, i))).collect();
    for j in (0..n).rev() {
        for i in 0..=j {
            let up = discount(j + 1, node(j + 1, i + 1)) * row[i + 1];
            let dn = discount(j + 1, node(j + 1, i)) * row[i];
            row[i] = p_plus * up + (1.0 - p_plus) * dn;
        }
        row.truncate(j + 1);
    }
    row[0]
}

impl FkForward {
    pub fn dt(&self) -> f64 {
        pow2(-2 * self.m as i32)
    }

    pub fn dx(&self) -> f64 {
        pow2(-(self.m as i32))
    }

    pub fn successors(&self, x: f64) -> (f64, f64) {
        let centre = x + (self.mu)(x) * self.dt();
        let spread = (self.sigma)(x) * self.dx();
        (centre + spread, centre - spread)
    }

    fn tree(&self, k: usize, x: f64) -> f64 {
        if k == 0 {
            return (self.g)(x);
        }
        let (up, dn) = self.successors(x);
        0.5 * exp(-(self.r)(x) * self.dt()) * (self.tree(k - 1, up) + self.tree(k - 1, dn))
    }
}

/// `f_m(t_k, x)` of the forward problem.
pub fn fk_forward_solve(problem: &FkForward, k: usize, x: f64, opts: &SolveOptions) -> Result<FkSolution> {
    let strategy = choose(k, problem.multiplicative.is_some(), opts)?;
    let dt = problem.dt();
    let (value, std_error) = match strategy {
        Strategy::Tree => (problem.tree(k, x), 0.0),
        Strategy::Lattice => {
            let c = problem.multiplicative.expect("checked by choose");
            let ln_up = ln_1p(c.drift * dt + c.vol * problem.dx());
            let ln_dn = ln_1p(c.drift * dt - c.vol * problem.dx());
            // Forward discounting is charged at the node being left.
            let node = |j: usize, i: usize| x * exp(i as f64 * ln_up + (j - i) as f64 * ln_dn);
            let mut row: Vec<f64> = (0..=k).map(|i| (problem.g)(node(k, i))).collect();
            for j in (0..k).rev() {
                for i in 0..=j {
                    let here = node(j, i);
                    row[i] = 0.5 * exp(-(problem.r)(here) * dt) * (row[i + 1] + row[i]);
                }
                row.truncate(j + 1);
            }
            (row[0], 0.0)
        }
        Strategy::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            monte_carlo(opts.mc_samples, || {
                let mut s = x;
                let mut acc = 0.0;
                for _ in 0..k {
                    acc += (problem.r)(s) * dt;
                    let (up, dn) = problem.successors(s);
                    s = if coin_flip(&mut rng, 0.5) { up } else { dn };
                }
                exp(-acc) * (problem.g)(s)
            })
        }
    };
    Ok(FkSolution { value, strategy, std_error })
}

impl FkBackward {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: Fn2,
        sigma: Fn2,
        rho: Fn2,
        g: Fn1,
        steps: (f64, f64),
        p_plus: f64,
        m: u32,
        n_steps: usize,
    ) -> Result<Self> {
        if !(p_plus > 0.0 && p_plus < 1.0) {
            return Err(Error::InvalidParameter { name: "p_plus", reason: "must lie in (0, 1)" });
        }
        Ok(FkBackward {
            mu,
            sigma,
            rho,
            g,
            step_up: steps.0,
            step_down: steps.1,
            p_plus,
            m,
            n_steps,
            multiplicative: None,
        })
    }

    pub fn p_minus(&self) -> f64 {
        1.0 - self.p_plus
    }

    pub fn dt(&self) -> f64 {
        pow2(-2 * self.m as i32)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// States reached at step `k` from `x` at step `k - 1`.
    pub fn successors(&self, k: usize, x: f64) -> (f64, f64) {
        let t = self.time(k - 1);
        let centre = x + (self.mu)(t, x) * self.dt();
        let vol = (self.sigma)(t, x);
        (centre + vol * self.step_up, centre + vol * self.step_down)
    }

    fn tree(&self, k: usize, x: f64) -> f64 {
        if k >= self.n_steps {
            return (self.g)(x);
        }
        let (up, dn) = self.successors(k + 1, x);
        let t = self.time(k + 1);
        let dt = self.dt();
        self.p_plus * exp(-(self.rho)(t, up) * dt) * self.tree(k + 1, up)
            + self.p_minus() * exp(-(self.rho)(t, dn) * dt) * self.tree(k + 1, dn)
    }
}

/// `f_m(t_k, x)` of the backward problem.
pub fn fk_backward_solve(problem: &FkBackward, k: usize, x: f64, opts: &SolveOptions) -> Result<FkSolution> {
    if k > problem.n_steps {
        return Err(Error::Precondition("step beyond maturity"));
    }
    let depth = problem.n_steps - k;
    let strategy = choose(depth, problem.multiplicative.is_some(), opts)?;
    let dt = problem.dt();
    let (value, std_error) = match strategy {
        Strategy::Tree => (problem.tree(k, x), 0.0),
        Strategy::Lattice => {
            let c = problem.multiplicative.expect("checked by choose");
            let ln_up = ln_1p(c.drift * dt + c.vol * problem.step_up);
            let ln_dn = ln_1p(c.drift * dt + c.vol * problem.step_down);
            let g = |s: f64| (problem.g)(s);
            let disc = |j: usize, s: f64| exp(-(problem.rho)(problem.time(k + j), s) * dt);
            (fold_lattice(x, depth, ln_up, ln_dn, problem.p_plus, &g, &disc), 0.0)
        }
        Strategy::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            monte_carlo(opts.mc_samples, || {
                let mut s = x;
                let mut acc = 0.0;
                for j in k + 1..=problem.n_steps {
                    let (up, dn) = problem.successors(j, s);
                    s = if coin_flip(&mut rng, problem.p_plus) { up } else { dn };
                    acc += (problem.rho)(problem.time(j), s) * dt;
                }
                exp(-acc) * (problem.g)(s)
            })
        }
    };
    Ok(FkSolution { value, strategy, std_error })
}

/// The pricing problem of a level: drift `r·x`, volatility `σx`, walk steps
/// `±Δx + ((μ - r)/σ)Δt` with probabilities `q_m^±`, and `e^{-ρΔt} = r_m^{-1}`.
pub fn fk_bs_specialize<P: Payoff + Send + Sync + 'static>(level: &MarketLevel, claim: P) -> FkBackward {
    let p = level.params;
    let tilt = (p.mu - p.r) / p.sigma * level.dt;
    let rho = ln_1p(p.r * level.dt) / level.dt;
    let (r, sigma) = (p.r, p.sigma);
    FkBackward {
        mu: Arc::new(move |_, x| r * x),
        sigma: Arc::new(move |_, x| sigma * x),
        rho: Arc::new(move |_, _| rho),
        g: Arc::new(move |s| claim.eval(s)),
        step_up: level.dx + tilt,
        step_down: -level.dx + tilt,
        p_plus: level.q_plus,
        m: level.m,
        n_steps: level.n_steps,
        multiplicative: Some(Multiplicative { drift: r, vol: sigma }),
    }
}

/// `(f(t_k) - f(t_{k-1}))/Δt + r x ∂_x f + ½σ²x² ∂_xx f - r f` at `(t_k, x)`,
/// with lattice prices and lattice derivatives.
pub fn bs_residual(level: &MarketLevel, claim: &dyn Payoff, k: usize, x: f64) -> Result<f64> {
    if k == 0 || k > level.n_steps {
        return Err(Error::Precondition("residual needs 1 <= k <= N"));
    }
    if claim.derivative(3, x).is_none() {
        return Err(Error::DerivativeUnavailable { order: 3 });
    }
    let p = level.params;
    let f = price_explicit(level, claim, k, x);
    let f_prev = price_explicit(level, claim, k - 1, x);
    let d1 = lattice_derivative(level, claim, 1, k, x)?;
    let d2 = lattice_derivative(level, claim, 2, k, x)?;
    Ok((f - f_prev) / level.dt + p.r * x * d1 + 0.5 * p.sigma * p.sigma * x * x * d2 - p.r * f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeReport {
    pub max_abs: f64,
    pub worst: (f64, f64),
    pub points: usize,
}

/// The Black–Scholes operator on the closed-form price over `times × spots`.
pub fn bs_pde_limit_check(bs: &BlackScholes, kind: Vanilla, times: &[f64], spots: &[f64]) -> PdeReport {
    let mut report = PdeReport { max_abs: 0.0, worst: (f64::NAN, f64::NAN), points: 0 };
    for &t in times {
        for &x in spots {
            let partials = match kind {
                Vanilla::Call => bs.call_partials(t, x),
                Vanilla::Put => bs.put_partials(t, x),
            };
            let v = abs(bs.operator(x, &partials));
            report.points += 1;
            if report.points == 1 || v > report.max_abs {
                report.max_abs = v;
                report.worst = (t, x);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claim::Claim;
    use crate::market::{build_level, MarketParams};

    fn gbm(m: u32, r0: f64) -> FkForward {
        FkForward {
            mu: Arc::new(|x| 0.1 * x),
            sigma: Arc::new(|x| 0.3 * x),
            r: Arc::new(move |_| r0),
            g: Arc::new(|x| (x - 1.0).max(0.0)),
            m,
            multiplicative: None,
        }
    }

    #[test]
    fn forward_initial_and_mass() {
        let opts = SolveOptions::default();
        let p = gbm(2, 0.05);
        assert_eq!(fk_forward_solve(&p, 0, 1.5, &opts).unwrap().value, 0.5);
        let ones = FkForward { g: Arc::new(|_| 1.0), r: Arc::new(|_| 0.0), ..gbm(2, 0.0) };
        for k in [1, 5, 9] {
            assert!((fk_forward_solve(&ones, k, 0.7, &opts).unwrap().value - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_tree_matches_lattice() {
        let opts = SolveOptions::default();
        let tree = gbm(3, 0.04);
        let lattice = FkForward { multiplicative: Some(Multiplicative { drift: 0.1, vol: 0.3 }), ..tree.clone() };
        for k in [1usize, 4, 11] {
            let a = fk_forward_solve(&tree, k, 1.0, &opts).unwrap();
            let b = fk_forward_solve(&lattice, k, 1.0, &opts).unwrap();
            assert_eq!((a.strategy, b.strategy), (Strategy::Tree, Strategy::Lattice));
            assert!((a.value - b.value).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn depth_guard() {
        let opts = SolveOptions { tree_cap: 4, mc_samples: 0, ..SolveOptions::default() };
        let err = fk_forward_solve(&gbm(2, 0.0), 5, 1.0, &opts).unwrap_err();
        assert_eq!(err, Error::DepthExceeded { depth: 5, cap: 4 });
        let mc = SolveOptions { tree_cap: 4, mc_samples: 20_000, seed: 3, force: None };
        let sol = fk_forward_solve(&gbm(2, 0.0), 5, 1.0, &mc).unwrap();
        assert_eq!(sol.strategy, Strategy::MonteCarlo);
        let exact = fk_forward_solve(&gbm(2, 0.0), 5, 1.0, &SolveOptions::default()).unwrap().value;
        assert!((sol.value - exact).abs() < 4.0 * sol.std_error);
    }

    #[test]
    fn backward_boundary_and_mass() {
        let level = build_level(&MarketParams::new(0.1, 0.2, 0.05, 1.0, 0.25).unwrap(), 2).unwrap();
        let mut p = fk_bs_specialize(&level, Claim::Constant(1.0));
        let opts = SolveOptions::default();
        assert_eq!(fk_backward_solve(&p, 4, 1.7, &opts).unwrap().value, 1.0);
        p.rho = Arc::new(|_, _| 0.0);
        p.multiplicative = None;
        assert!((fk_backward_solve(&p, 0, 1.0, &opts).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn specialization_reproduces_one_step_call() {
        let level = build_level(&MarketParams::new(0.0, 1.0, 0.0, 1.0, 0.25).unwrap(), 1).unwrap();
        let p = fk_bs_specialize(&level, Claim::call(1.0).unwrap());
        let v = fk_backward_solve(&p, 0, 1.0, &SolveOptions::default()).unwrap().value;
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn specialization_tree_and_lattice_agree_with_pricer() {
        let level = build_level(&MarketParams::new(0.07, 0.25, 0.03, 1.0, 1.0).unwrap(), 2).unwrap();
        let claim = Claim::put(1.02).unwrap();
        let p = fk_bs_specialize(&level, claim.clone());
        let lat = fk_backward_solve(&p, 3, 0.95, &SolveOptions::default()).unwrap();
        let forced = SolveOptions { force: Some(Strategy::Tree), ..SolveOptions::default() };
        let tree = fk_backward_solve(&p, 3, 0.95, &forced).unwrap();
        let reference = price_explicit(&level, &claim, 3, 0.95);
        assert!((lat.value - reference).abs() < 1e-13);
        assert!((tree.value - reference).abs() < 1e-13);
    }

    #[test]
    fn residual_requires_third_derivative() {
        let level = build_level(&MarketParams::new(0.05, 0.2, 0.05, 1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(
            bs_residual(&level, &Claim::call(1.0).unwrap(), 5, 1.0),
            Err(Error::DerivativeUnavailable { order: 3 })
        );
    }

    #[test]
    fn affine_payoff_residual_vanishes() {
        let level = build_level(&MarketParams::new(0.0, 0.2, 0.0, 1.0, 1.0).unwrap(), 3).unwrap();
        let lin = Claim::Linear { intercept: 0.4, slope: 2.0 };
        assert!(bs_residual(&level, &lin, 20, 1.1).unwrap().abs() < 1e-10);
    }

    #[test]
    fn pde_affine_and_discount_solutions() {
        let bs = BlackScholes { r: 0.05, sigma: 0.2, horizon: 1.0, strike: 100.0 };
        let far = bs.call_partials(0.2, 1e5);
        assert!(bs.operator(1e5, &far).abs() < 1e-8);
        let pure = crate::lattice::Partials { value: libm::exp(0.05 * 0.3), dt: 0.05 * libm::exp(0.05 * 0.3), dx: 0.0, dxx: 0.0 };
        assert!(bs.operator(50.0, &pure).abs() < 1e-16);
    }
}
