//! Convergence studies over a range of levels and seeds.
//!
//! For each seed one nested walk is built up to `m_ref`; `B_{m_ref}` stands
//! in for Brownian motion. Each `(m, seed)` cell then records:
//!
//! * `walk_sup`: `sup_{[0,T]} |B_{m_ref} - B_m|`
//! * `asset_sup`: `sup_k |S_m(t_k) - s0 exp((μ - σ²/2)t_k + σB_{m_ref}(t_k))|`
//! * `price_gap`: `sup_t |f_m(t^{(m)}, S) - f(t, S)|` with `S = S_m(t^{(m)})`
//!   and `f` the Black–Scholes price
//! * `delta_gap`: `sup_t |a_m(t^{(m)}) - a(t)|` along the same path
//! * `fk_residual`: `sup_t` of the discrete Black–Scholes residual of the
//!   smoothed put at `(t^{(m)}, S)`
//!
//! where `t` runs over `time_points` evenly spaced times in `[0, T - delta]`.

use rayon::prelude::*;
use strongwalk_core::claim::Claim;
use strongwalk_core::feynman_kac::bs_residual;
use strongwalk_core::hedging::{convergence_to_continuous, Vanilla};
use strongwalk_core::lattice::{price_explicit, BlackScholes};
use strongwalk_core::market::{asset_path, build_level, reference_gap, MarketParams};
use strongwalk_core::mollifier::SmoothedPut;
use strongwalk_core::rate::{fit_rate, median, MIN_FIT_POINTS};
use strongwalk_core::walk::{sup_distance_levels, NestedWalk};
use strongwalk_core::RateFit;

use crate::config::{StudyConfig, VanillaKind};
use crate::error::CliError;
use crate::output::{Cell, Document, Table};

pub const METRICS: [&str; 5] = ["walk_sup", "asset_sup", "price_gap", "delta_gap", "fk_residual"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub m: u32,
    pub seed: u64,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub study: String,
    /// Ordered by seed (as listed), then level, then metric.
    pub samples: Vec<Sample>,
    /// `(metric, m, median over seeds)`.
    pub medians: Vec<(&'static str, u32, f64)>,
    /// Present only with at least four levels.
    pub fits: Vec<(&'static str, RateFit)>,
}

pub fn time_grid(horizon: f64, delta: f64, points: usize) -> Vec<f64> {
    let end = horizon - delta;
    if points == 1 {
        return vec![0.0];
    }
    (0..points).map(|j| end * j as f64 / (points - 1) as f64).collect()
}

fn seed_cells(cfg: &StudyConfig, params: &MarketParams, seed: u64, times: &[f64]) -> Result<Vec<Sample>, CliError> {
    let horizon = params.horizon;
    let walk = NestedWalk::build(seed, cfg.m_ref, horizon)?;
    let reference = walk.path(cfg.m_ref, horizon)?;
    let strike = cfg.strike();
    let (kind, claim) = match cfg.claim.kind {
        VanillaKind::Call => (Vanilla::Call, Claim::call(strike)?),
        VanillaKind::Put => (Vanilla::Put, Claim::put(strike)?),
    };
    let bs = BlackScholes::new(params, strike);
    let smoothed = SmoothedPut::new(cfg.smoothing_n, strike)?;
    let mut out = Vec::with_capacity(METRICS.len() * (cfg.m_hi - cfg.m_lo + 1) as usize);
    for m in cfg.m_lo..=cfg.m_hi {
        let level = build_level(params, m)?;
        let bm = walk.path(m, horizon)?;
        let path = asset_path(&level, &bm)?;
        let mut price_gap = 0.0f64;
        let mut fk = 0.0f64;
        for &t in times {
            let k = level.step_of(t);
            let x = path.values[k];
            let exact = match kind {
                Vanilla::Call => bs.call(t, x),
                Vanilla::Put => bs.put(t, x),
            };
            price_gap = price_gap.max((price_explicit(&level, &claim, k, x) - exact).abs());
            let kr = k.max(1);
            fk = fk.max(bs_residual(&level, &smoothed, kr, path.values[kr])?.abs());
        }
        let gap = convergence_to_continuous(&level, kind, strike, &bm, times)?;
        let values = [
            sup_distance_levels(&reference, &bm)?,
            reference_gap(&level, &path, &reference),
            price_gap,
            gap.delta_gap,
            fk,
        ];
        for (metric, value) in METRICS.iter().zip(values) {
            out.push(Sample { m, seed, metric, value });
        }
    }
    Ok(out)
}

/// Runs every `(m, seed)` cell and reduces them in a fixed order, so the
/// report does not depend on thread scheduling.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport, CliError> {
    let params = cfg.validate()?;
    let times = time_grid(params.horizon, cfg.delta(), cfg.time_points);
    // One walk per seed: levels share it, and memory stays bounded by the
    // pool size rather than the seed count.
    let per_seed: Vec<Result<Vec<Sample>, CliError>> =
        cfg.seeds.par_iter().map(|&seed| seed_cells(cfg, &params, seed, &times)).collect();
    let mut samples = Vec::new();
    for cells in per_seed {
        samples.extend(cells?);
    }

    let mut medians = Vec::new();
    let mut fits = Vec::new();
    let levels = (cfg.m_hi - cfg.m_lo + 1) as usize;
    for metric in METRICS {
        let mut points = Vec::with_capacity(levels);
        for m in cfg.m_lo..=cfg.m_hi {
            let vals: Vec<f64> = samples.iter().filter(|s| s.m == m && s.metric == metric).map(|s| s.value).collect();
            let med = median(&vals).unwrap_or(f64::NAN);
            medians.push((metric, m, med));
            points.push((m as f64, med));
        }
        if levels >= MIN_FIT_POINTS {
            fits.push((metric, fit_rate(&points)?));
        }
    }
    let study = match cfg.claim.kind {
        VanillaKind::Call => "call",
        VanillaKind::Put => "put",
    };
    Ok(StudyReport { study: study.to_string(), samples, medians, fits })
}

impl StudyReport {
    pub fn fit(&self, metric: &str) -> Option<&RateFit> {
        self.fits.iter().find(|(name, _)| *name == metric).map(|(_, f)| f)
    }

    pub fn to_document(&self) -> Document {
        let mut samples = Table::new("samples", &["study", "m", "seed", "metric", "value"]);
        for s in &self.samples {
            samples.push(vec![
                Cell::from(self.study.as_str()),
                s.m.into(),
                s.seed.into(),
                s.metric.into(),
                s.value.into(),
            ]);
        }
        let mut medians = Table::new("medians", &["study", "m", "metric", "median"]);
        for &(metric, m, v) in &self.medians {
            medians.push(vec![Cell::from(self.study.as_str()), m.into(), metric.into(), v.into()]);
        }
        let mut doc = Document { tables: vec![samples, medians] };
        if !self.fits.is_empty() {
            let mut fits = Table::new("fits", &["study", "metric", "slope", "intercept", "residual", "points"]);
            for (metric, f) in &self.fits {
                fits.push(vec![
                    Cell::from(self.study.as_str()),
                    (*metric).into(),
                    f.slope.into(),
                    f.intercept.into(),
                    f.residual.into(),
                    f.points.len().into(),
                ]);
            }
            doc.tables.push(fits);
        }
        doc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_up_to_the_cutoff() {
        let g = time_grid(1.0, 0.1, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.0);
        assert!((g[9] - 0.9).abs() < 1e-15);
        assert_eq!(time_grid(1.0, 0.1, 1), vec![0.0]);
    }

    #[test]
    fn single_level_has_no_fit() {
        let cfg = StudyConfig { m_lo: 3, m_hi: 3, m_ref: 6, seeds: vec![1, 2], ..Default::default() };
        let report = run_study(&cfg).unwrap();
        assert!(report.fits.is_empty());
        assert_eq!(report.samples.len(), 2 * METRICS.len());
        assert!(report.samples.iter().all(|s| s.value.is_finite() && s.value >= 0.0));
        assert!(report.to_document().table("fits").is_none());
    }
}
