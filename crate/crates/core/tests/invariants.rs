use proptest::prelude::*;
use strongwalk_core::claim::{Claim, Payoff, PolyBump};
use strongwalk_core::hedging::{pathwise_hedge, replicate};
use strongwalk_core::lattice::{price_explicit, put_price, call_closed_binomial, PriceSurface};
use strongwalk_core::market::{asset_path, build_level, MarketLevel, MarketParams};
use strongwalk_core::mollifier::SmoothedPut;
use strongwalk_core::rate::fit_rate;
use strongwalk_core::walk::refinement_check;
use strongwalk_core::NestedWalk;

/// Parameters for which level `m` is fine enough.
fn market() -> impl Strategy<Value = MarketParams> {
    (0.0f64..0.3, 0.1f64..0.5, 0.0f64..0.1, 0.5f64..2.0)
        .prop_map(|(mu, sigma, r, s0)| MarketParams::new(mu, sigma, r, s0, 1.0).unwrap())
}

fn level(p: &MarketParams, m: u32) -> MarketLevel {
    build_level(p, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_step_martingale_identity(p in market(), m in 2u32..5, frac in 0.0f64..1.0, x_rel in 0.5f64..2.0) {
        let lv = level(&p, m);
        prop_assert!((lv.q_plus * lv.u_m + lv.q_minus * lv.d_m - lv.r_m).abs() < 1e-15);
        let claim = Claim::Bump(PolyBump::new(p.s0, 0.5 * p.s0, 1.0).unwrap());
        let k = ((lv.n_steps - 1) as f64 * frac) as usize;
        let x = p.s0 * x_rel;
        let here = price_explicit(&lv, &claim, k, x);
        let up = price_explicit(&lv, &claim, k + 1, lv.node_price(x, 1, 1));
        let dn = price_explicit(&lv, &claim, k + 1, lv.node_price(x, 1, 0));
        prop_assert!((here - (lv.q_plus * up + lv.q_minus * dn) / lv.r_m).abs() < 1e-13);
    }

    #[test]
    fn asset_steps_are_up_or_down_factors(p in market(), m in 1u32..5, seed in any::<u64>()) {
        let lv = level(&p, m);
        let walk = NestedWalk::build(seed, m, 1.0).unwrap();
        let path = asset_path(&lv, &walk.path(m, 1.0).unwrap()).unwrap();
        for k in 0..lv.n_steps {
            let ratio = path.values[k + 1] / path.values[k];
            let want = if path.is_up(k) { lv.u_m } else { lv.d_m };
            prop_assert!((ratio - want).abs() < 1e-13, "k={} {} vs {}", k, ratio, want);
        }
    }

    #[test]
    fn put_call_parity(p in market(), m in 2u32..5, frac in 0.0f64..1.0, x_rel in 0.3f64..3.0, k_rel in 0.5f64..1.5) {
        let lv = level(&p, m);
        let k = (lv.n_steps as f64 * frac) as usize;
        let (x, strike) = (p.s0 * x_rel, p.s0 * k_rel);
        let c = price_explicit(&lv, &Claim::call(strike).unwrap(), k, x);
        let pp = price_explicit(&lv, &Claim::put(strike).unwrap(), k, x);
        let forward = x - lv.discount(lv.n_steps - k) * strike;
        prop_assert!((c - pp - forward).abs() < 1e-12 * x.max(1.0));
        prop_assert!((put_price(&lv, strike, k, x) - pp).abs() < 1e-11 * x.max(1.0));
        prop_assert!(c >= forward.max(0.0) - 1e-13 && c <= x + 1e-13);
        prop_assert!((call_closed_binomial(&lv, strike, k, x) - c).abs() < 1e-11 * x.max(1.0));
    }

    #[test]
    fn replication_is_exact(p in market(), m in 1u32..4, seed in any::<u64>(), k_rel in 0.7f64..1.3, put in any::<bool>()) {
        let lv = level(&p, m);
        let strike = p.s0 * k_rel;
        let claim = if put { Claim::put(strike).unwrap() } else { Claim::call(strike).unwrap() };
        let portfolio = replicate(&PriceSurface::build(&lv, &claim).unwrap());
        let walk = NestedWalk::build(seed, m, 1.0).unwrap();
        let path = asset_path(&lv, &walk.path(m, 1.0).unwrap()).unwrap();
        let ledger = pathwise_hedge(&portfolio, &path, &claim).unwrap();
        prop_assert!(ledger.max_self_financing < 1e-10);
        prop_assert!(ledger.terminal_error < 1e-9);
    }

    #[test]
    fn smoothed_put_is_uniformly_close(n in 1u32..200, strike in 0.5f64..2.0, s in 0.0f64..4.0) {
        let g = SmoothedPut::new(n, strike).unwrap();
        let raw = Claim::put(strike).unwrap();
        prop_assert!((g.value(s) - raw.eval(s)).abs() <= 0.5 / n as f64 + 1e-12);
        prop_assert!(g.second(s) <= g.max_second() * (1.0 + 1e-12));
    }

    #[test]
    fn walk_refinement_holds(seed in any::<u64>(), m in 0u32..5) {
        let walk = NestedWalk::build(seed, m + 1, 1.0).unwrap();
        let (coarse, fine) = (walk.level(m).unwrap(), walk.level(m + 1).unwrap());
        let report = refinement_check(coarse, fine, coarse.steps().min(fine.bridges())).unwrap();
        prop_assert!(report.holds);
        prop_assert_eq!(report.max_deviation, 0.0);
    }

    #[test]
    fn rate_fit_is_exact_on_geometric_data(slope in -3.0f64..-0.1, c in -5.0f64..5.0, lo in 0u32..6) {
        let points: Vec<(f64, f64)> = (lo..lo + 5).map(|m| (m as f64, (c + slope * m as f64).exp2())).collect();
        let fit = fit_rate(&points).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
    }
}
