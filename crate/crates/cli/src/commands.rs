//! Subcommand implementations. Each returns a [`Document`]; writing it is
//! left to the caller.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;
use strongwalk_core::claim::Claim;
use strongwalk_core::feynman_kac::{
    bs_residual, fk_backward_solve, fk_bs_specialize, fk_forward_solve, FkBackward, FkForward, FkSolution, Multiplicative,
    SolveOptions, Strategy,
};
use strongwalk_core::hedging::{pathwise_hedge, replicate};
use strongwalk_core::lattice::{call_closed_binomial, price_explicit, put_price, BlackScholes, PriceSurface};
use strongwalk_core::market::{asset_path, build_level, exp_reference, rn_process, MarketLevel, MarketParams};
use strongwalk_core::mollifier::{
    european_hedge_schedule, raw_put_delta, smoothed_delta, smoothed_put_price, smoothing_index, strike_band_probability,
    SmoothedPut,
};
use strongwalk_core::walk::{refinement_check, time_lag, NestedWalk};

use crate::args::{
    ClaimArgs, Cli, Command, FkCmd, FkMode, HedgeCmd, MarketArgs, MarketCmd, PriceCmd, SmoothCmd, StrategyArg, StudyCmd,
    WalkArgs,
};
use crate::catalog::FnSpec;
use crate::config::{StudyConfig, VanillaKind};
use crate::error::CliError;
use crate::output::{Cell, Document, Format, Table};
use crate::study::run_study;

/// Settings shared by every subcommand after merging flags and config.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: StudyConfig,
    pub seeds: Vec<u64>,
    /// Seeds given on the command line, if any.
    pub explicit_seeds: Option<Vec<u64>>,
    pub format: Format,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let config = match &cli.config {
            Some(path) => StudyConfig::load(path)?,
            None => StudyConfig::default(),
        };
        if let Some(list) = &cli.seed_list {
            if list.is_empty() {
                return Err(CliError::config("--seed-list: at least one seed is required"));
            }
        }
        let seeds = cli.seed_list.clone().unwrap_or_else(|| config.seeds.clone());
        let format = cli.format.unwrap_or(config.format);
        Ok(Context { config, seeds, explicit_seeds: cli.seed_list.clone(), format })
    }

    fn first_seed(&self) -> u64 {
        self.seeds.first().copied().unwrap_or(1)
    }

    fn market(&self, args: &MarketArgs) -> Result<MarketParams, CliError> {
        let mut spec = self.config.market;
        spec.mu = args.mu.unwrap_or(spec.mu);
        spec.sigma = args.sigma.unwrap_or(spec.sigma);
        spec.r = args.r.unwrap_or(spec.r);
        spec.s0 = args.s0.unwrap_or(spec.s0);
        spec.horizon = args.horizon.unwrap_or(spec.horizon);
        spec.params()
    }

    fn tree_cap(&self, flag: Option<usize>) -> usize {
        flag.unwrap_or(self.config.tree_cap)
    }

    fn mc_samples(&self, flag: Option<usize>) -> usize {
        flag.unwrap_or(self.config.mc_samples)
    }
}

pub fn run(cli: &Cli) -> Result<(Document, Format), CliError> {
    let ctx = Context::from_cli(cli)?;
    let doc = match &cli.command {
        Command::Walk(a) => walk(&ctx, a)?,
        Command::Market(a) => market(&ctx, a)?,
        Command::Price(a) => price(&ctx, a)?,
        Command::Hedge(a) => hedge(&ctx, a)?,
        Command::Smooth(a) => smooth(&ctx, a)?,
        Command::Fk(a) => fk(&ctx, a)?,
        Command::Study(a) => study(&ctx, a)?,
    };
    Ok((doc, ctx.format))
}

fn level_of(params: &MarketParams, m: u32) -> Result<MarketLevel, CliError> {
    build_level(params, m).map_err(|e| CliError::config(format!("--m: {e}")))
}

fn vanilla(args: &ClaimArgs, params: &MarketParams) -> Result<(Claim, f64), CliError> {
    let strike = args.strike.unwrap_or(params.s0);
    let claim = match args.claim {
        VanillaKind::Call => Claim::call(strike),
        VanillaKind::Put => Claim::put(strike),
    }
    .map_err(|e| CliError::config(format!("--strike: {e}")))?;
    Ok((claim, strike))
}

fn check_step(level: &MarketLevel, k: usize) -> Result<(), CliError> {
    if k > level.n_steps {
        return Err(CliError::config(format!("--k: {k} is beyond maturity (N = {})", level.n_steps)));
    }
    Ok(())
}

fn walk(ctx: &Context, a: &WalkArgs) -> Result<Document, CliError> {
    let horizon = a.horizon.unwrap_or(ctx.config.market.horizon);
    let seed = a.seed.unwrap_or_else(|| ctx.first_seed());
    let nested = NestedWalk::build(seed, a.m, horizon)?;

    let mut refinement = Table::new("refinement", &["seed", "m", "checked", "holds", "max_deviation", "max_time_lag"]);
    for m in 0..a.m {
        let (coarse, fine) = (nested.level(m).expect("built"), nested.level(m + 1).expect("built"));
        let k_max = coarse.steps().min(fine.bridges());
        let report = refinement_check(coarse, fine, k_max)?;
        let lag = (0..=k_max).filter_map(|k| time_lag(fine, k)).fold(0.0f64, |acc, v| acc.max(v.abs()));
        refinement.push(vec![
            seed.into(),
            m.into(),
            report.checked.into(),
            report.holds.to_string().into(),
            report.max_deviation.into(),
            lag.into(),
        ]);
    }
    let mut doc = Document::default();
    if !a.summary {
        let path = nested.path(a.m, horizon)?;
        let mut t = Table::new("walk", &["seed", "m", "k", "t", "b"]);
        for k in 0..=path.steps() {
            t.push(vec![seed.into(), a.m.into(), k.into(), (k as f64 * path.dt()).into(), path.at_step(k).into()]);
        }
        doc.tables.push(t);
    }
    doc.tables.push(refinement);
    Ok(doc)
}

fn market(ctx: &Context, a: &MarketCmd) -> Result<Document, CliError> {
    let params = ctx.market(&a.market)?;
    let lv = level_of(&params, a.m)?;
    let mut t = Table::new("level", &["m", "n_steps", "dt", "dx", "u", "d", "r_m", "q_plus", "q_minus", "m0"]);
    t.push(vec![
        lv.m.into(),
        lv.n_steps.into(),
        lv.dt.into(),
        lv.dx.into(),
        lv.u_m.into(),
        lv.d_m.into(),
        lv.r_m.into(),
        lv.q_plus.into(),
        lv.q_minus.into(),
        params.m0().into(),
    ]);
    let mut doc = Document::single(t);
    if a.path {
        let seed = a.seed.unwrap_or_else(|| ctx.first_seed());
        let nested = NestedWalk::build(seed, a.m, params.horizon)?;
        let walk = nested.path(a.m, params.horizon)?;
        let path = asset_path(&lv, &walk)?;
        let rn = rn_process(&lv, &walk)?;
        let mut p = Table::new("path", &["seed", "k", "t", "b", "s", "exp_reference", "rn"]);
        for k in 0..=lv.n_steps {
            let time = lv.time(k);
            p.push(vec![
                seed.into(),
                k.into(),
                time.into(),
                walk.at_step(k).into(),
                path.values[k].into(),
                exp_reference(&params, &walk, time).into(),
                rn.value(k).into(),
            ]);
        }
        doc.tables.push(p);
    }
    Ok(doc)
}

fn price(ctx: &Context, a: &PriceCmd) -> Result<Document, CliError> {
    let params = ctx.market(&a.market)?;
    let lv = level_of(&params, a.m)?;
    let (claim, strike) = vanilla(&a.claim, &params)?;
    if a.dump_surface {
        let surface = PriceSurface::build(&lv, &claim)?;
        let mut t = Table::new("surface", &["k", "i", "s", "value"]);
        for k in 0..=lv.n_steps {
            for (i, v) in surface.row(k).iter().enumerate() {
                t.push(vec![k.into(), i.into(), surface.node_price(k, i).into(), (*v).into()]);
            }
        }
        return Ok(Document::single(t));
    }
    check_step(&lv, a.k)?;
    let x = a.x.unwrap_or(params.s0);
    if !(x > 0.0) {
        return Err(CliError::config("--x: spot must be positive"));
    }
    let bs = BlackScholes::new(&params, strike);
    let t_k = lv.time(a.k);
    let (closed, continuous) = match a.claim.claim {
        VanillaKind::Call => (call_closed_binomial(&lv, strike, a.k, x), bs.call(t_k, x)),
        VanillaKind::Put => (put_price(&lv, strike, a.k, x), bs.put(t_k, x)),
    };
    let mut t = Table::new("price", &["m", "k", "x", "method", "value"]);
    let mut row = |method: &str, v: f64| t.push(vec![lv.m.into(), a.k.into(), x.into(), method.into(), v.into()]);
    row("explicit", price_explicit(&lv, &claim, a.k, x));
    row("closed", closed);
    row("black_scholes", continuous);
    Ok(Document::single(t))
}

fn hedge(ctx: &Context, a: &HedgeCmd) -> Result<Document, CliError> {
    let params = ctx.market(&a.market)?;
    let lv = level_of(&params, a.m)?;
    let (claim, _) = vanilla(&a.claim, &params)?;
    let surface = PriceSurface::build(&lv, &claim)?;
    let portfolio = replicate(&surface);
    let seeds: Vec<u64> = match &ctx.explicit_seeds {
        Some(list) => list.clone(),
        None => (0..a.paths).map(|j| a.seed.wrapping_add(j)).collect(),
    };
    let ledgers: Vec<_> = seeds
        .par_iter()
        .map(|&seed| -> Result<_, CliError> {
            let nested = NestedWalk::build(seed, a.m, params.horizon)?;
            let walk = nested.path(a.m, params.horizon)?;
            let path = asset_path(&lv, &walk)?;
            Ok((seed, pathwise_hedge(&portfolio, &path, &claim)?))
        })
        .collect();

    let mut summary = Table::new(
        "summary",
        &["seed", "price", "terminal_value", "payoff", "terminal_error", "max_self_financing"],
    );
    let mut steps = Table::new("ledger", &["seed", "k", "s", "a", "b", "value"]);
    for item in ledgers {
        let (seed, ledger) = item?;
        summary.push(vec![
            seed.into(),
            portfolio.root_value().into(),
            ledger.terminal_value.into(),
            ledger.payoff.into(),
            ledger.terminal_error.into(),
            ledger.max_self_financing.into(),
        ]);
        if a.ledger {
            for e in &ledger.entries {
                steps.push(vec![seed.into(), e.k.into(), e.price.into(), e.a.into(), e.b.into(), e.value.into()]);
            }
        }
    }
    let mut doc = Document::single(summary);
    if a.ledger {
        doc.tables.push(steps);
    }
    Ok(doc)
}

fn smooth(ctx: &Context, a: &SmoothCmd) -> Result<Document, CliError> {
    let params = ctx.market(&a.market)?;
    let lv = level_of(&params, a.m)?;
    if a.k >= lv.n_steps {
        return Err(CliError::config(format!("--k: must be below N = {}", lv.n_steps)));
    }
    let strike = a.strike.unwrap_or(params.s0);
    if !(strike > 0.0) {
        return Err(CliError::config("--strike: must be positive"));
    }
    let ns = a.n.clone().unwrap_or_else(|| vec![smoothing_index(a.m)]);
    let xs = a.x.clone().unwrap_or_else(|| vec![params.s0]);
    let mut t = Table::new(
        "smoothing",
        &[
            "n", "k", "x", "smoothed_price", "put_price", "price_gap", "band_probability", "price_bound",
            "smoothed_delta", "put_delta", "delta_gap", "delta_bound",
        ],
    );
    let raw = Claim::Put { strike };
    for &n in &ns {
        let put = SmoothedPut::new(n, strike).map_err(|e| CliError::config(format!("--n: {e}")))?;
        let band = 1.0 / n as f64;
        for &x in &xs {
            let q = strike_band_probability(&lv, strike, band, a.k, x);
            let sp = smoothed_put_price(&lv, &put, a.k, x);
            let p = price_explicit(&lv, &raw, a.k, x);
            let sd = smoothed_delta(&lv, &put, a.k, x);
            let pd = raw_put_delta(&lv, strike, a.k, x);
            t.push(vec![
                n.into(),
                a.k.into(),
                x.into(),
                sp.into(),
                p.into(),
                (sp - p).abs().into(),
                q.into(),
                (q / (2.0 * n as f64)).into(),
                sd.into(),
                pd.into(),
                (sd - pd).abs().into(),
                ((strike + band) / (2.0 * x) * q).into(),
            ]);
        }
    }
    let mut schedule = Table::new("hedge_schedule", &["m", "n", "k", "x", "a", "smoothed_delta", "delta_gap", "bond_gap"]);
    for &x in &xs {
        let row = european_hedge_schedule(&lv, strike, a.c1, a.k, x)?;
        schedule.push(vec![
            row.m.into(),
            row.n.into(),
            a.k.into(),
            x.into(),
            row.a.into(),
            row.smoothed_delta.into(),
            row.delta_gap.into(),
            row.bond_gap.into(),
        ]);
    }
    Ok(Document { tables: vec![t, schedule] })
}

/// Coefficients are functions of the state only.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForwardProblem {
    mu: FnSpec,
    sigma: FnSpec,
    r: FnSpec,
    g: FnSpec,
    m: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackwardProblem {
    mu: FnSpec,
    sigma: FnSpec,
    rho: FnSpec,
    g: FnSpec,
    step_up: f64,
    step_down: f64,
    p_plus: f64,
    n_steps: usize,
    m: Option<u32>,
}

fn read_problem<T: for<'de> Deserialize<'de>>(cmd: &FkCmd) -> Result<Option<T>, CliError> {
    let Some(path) = &cmd.problem else { return Ok(None) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn multiplicative(mu: &FnSpec, sigma: &FnSpec) -> Option<Multiplicative> {
    Some(Multiplicative { drift: mu.proportional()?, vol: sigma.proportional()? })
}

fn lift(f: strongwalk_core::feynman_kac::Fn1) -> strongwalk_core::feynman_kac::Fn2 {
    Arc::new(move |_, x| f(x))
}

fn solution_table(mode: &str, k: usize, rows: Vec<(f64, FkSolution, Option<f64>)>) -> Table {
    let mut t = Table::new("fk", &["mode", "k", "x", "strategy", "value", "std_error", "reference"]);
    for (x, s, reference) in rows {
        let strategy = match s.strategy {
            Strategy::Tree => "tree",
            Strategy::Lattice => "lattice",
            Strategy::MonteCarlo => "monte_carlo",
        };
        t.push(vec![
            mode.into(),
            k.into(),
            x.into(),
            strategy.into(),
            s.value.into(),
            s.std_error.into(),
            reference.map_or(Cell::Text(String::new()), Cell::Num),
        ]);
    }
    t
}

fn fk(ctx: &Context, a: &FkCmd) -> Result<Document, CliError> {
    let opts = SolveOptions {
        tree_cap: ctx.tree_cap(a.tree_cap),
        mc_samples: ctx.mc_samples(a.mc_samples),
        seed: a.seed,
        force: match a.strategy {
            StrategyArg::Auto => None,
            StrategyArg::Tree => Some(Strategy::Tree),
            StrategyArg::Lattice => Some(Strategy::Lattice),
            StrategyArg::Mc => Some(Strategy::MonteCarlo),
        },
    };
    let params = ctx.market(&a.market)?;
    let xs = a.x.clone().unwrap_or_else(|| vec![params.s0]);
    match a.mode {
        FkMode::Forward => {
            let p: ForwardProblem =
                read_problem(a)?.ok_or_else(|| CliError::config("--problem: forward mode needs a problem file"))?;
            let problem = FkForward {
                mu: p.mu.build()?,
                sigma: p.sigma.build()?,
                r: p.r.build()?,
                g: p.g.build()?,
                m: p.m.unwrap_or(a.m),
                multiplicative: multiplicative(&p.mu, &p.sigma),
            };
            let rows = xs
                .iter()
                .map(|&x| Ok((x, fk_forward_solve(&problem, a.k, x, &opts)?, None)))
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(Document::single(solution_table("forward", a.k, rows)))
        }
        FkMode::Backward => {
            let (problem, level) = match read_problem::<BackwardProblem>(a)? {
                Some(p) => {
                    let mut problem = FkBackward::new(
                        lift(p.mu.build()?),
                        lift(p.sigma.build()?),
                        lift(p.rho.build()?),
                        p.g.build()?,
                        (p.step_up, p.step_down),
                        p.p_plus,
                        p.m.unwrap_or(a.m),
                        p.n_steps,
                    )
                    .map_err(|e| CliError::config(format!("problem: {e}")))?;
                    problem.multiplicative = multiplicative(&p.mu, &p.sigma);
                    (problem, None)
                }
                None => {
                    let lv = level_of(&params, a.m)?;
                    let (claim, _) = vanilla(&a.claim, &params)?;
                    (fk_bs_specialize(&lv, claim), Some(lv))
                }
            };
            if a.k > problem.n_steps {
                return Err(CliError::config(format!("--k: {} is beyond maturity (N = {})", a.k, problem.n_steps)));
            }
            let claim = match &level {
                Some(_) => Some(vanilla(&a.claim, &params)?.0),
                None => None,
            };
            let rows = xs
                .iter()
                .map(|&x| {
                    let reference = level.as_ref().zip(claim.as_ref()).map(|(lv, c)| price_explicit(lv, c, a.k, x));
                    Ok((x, fk_backward_solve(&problem, a.k, x, &opts)?, reference))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(Document::single(solution_table("backward", a.k, rows)))
        }
        FkMode::Residual => {
            let lv = level_of(&params, a.m)?;
            if a.k == 0 || a.k > lv.n_steps {
                return Err(CliError::config(format!("--k: residual needs 1 <= k <= N = {}", lv.n_steps)));
            }
            let strike = a.claim.strike.unwrap_or(params.s0);
            let put = SmoothedPut::new(a.n, strike).map_err(|e| CliError::config(format!("--n/--strike: {e}")))?;
            let mut t = Table::new("fk_residual", &["m", "n", "k", "x", "residual"]);
            for &x in &xs {
                let v = bs_residual(&lv, &put, a.k, x)?;
                t.push(vec![lv.m.into(), a.n.into(), a.k.into(), x.into(), v.into()]);
            }
            Ok(Document::single(t))
        }
    }
}

fn study(ctx: &Context, a: &StudyCmd) -> Result<Document, CliError> {
    let mut cfg = ctx.config.clone();
    let market = &a.market;
    cfg.market.mu = market.mu.unwrap_or(cfg.market.mu);
    cfg.market.sigma = market.sigma.unwrap_or(cfg.market.sigma);
    cfg.market.r = market.r.unwrap_or(cfg.market.r);
    cfg.market.s0 = market.s0.unwrap_or(cfg.market.s0);
    cfg.market.horizon = market.horizon.unwrap_or(cfg.market.horizon);
    if let Some(kind) = a.claim {
        cfg.claim.kind = kind;
    }
    cfg.claim.strike = a.strike.or(cfg.claim.strike);
    cfg.m_lo = a.m_lo.unwrap_or(cfg.m_lo);
    cfg.m_hi = a.m_hi.unwrap_or(cfg.m_hi);
    cfg.m_ref = a.m_ref.unwrap_or(cfg.m_ref);
    cfg.delta = a.delta.or(cfg.delta);
    cfg.time_points = a.time_points.unwrap_or(cfg.time_points);
    cfg.seeds = ctx.seeds.clone();
    Ok(run_study(&cfg)?.to_document())
}
