//! Nested "twist and shrink" random walks.
//!
//! Level `m` is a simple symmetric walk `S̃_m` whose bridges between
//! consecutive stopping times are sign-flipped so that it visits the even
//! integers `2·S̃_{m-1}(0), 2·S̃_{m-1}(1), ...` in order. Shrinking by
//! `2^{-2m}` in time and `2^{-m}` in space gives `B_m`. All walk arithmetic
//! is exact integer arithmetic; floats only appear in [`WalkPath`].

use alloc::vec;
use alloc::vec::Vec;

use crate::coins::CoinMatrix;
use crate::error::{Error, Result};
use crate::math::{abs, floor, pow2};

/// One level of the nested construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkLevel {
    m: u32,
    /// `S̃_m(0..=n)`, starting at 0.
    partial_sums: Vec<i32>,
    /// `T_m(0..=bridges)`, starting at 0.
    stopping_times: Vec<usize>,
}

impl WalkLevel {
    fn empty(m: u32) -> Self {
        WalkLevel { m, partial_sums: vec![0], stopping_times: vec![0] }
    }

    /// Builds an untwisted level directly from ±1 increments. Stopping times
    /// are found by scanning; a trailing incomplete bridge is kept as steps.
    pub fn from_increments(m: u32, increments: &[i8]) -> Result<Self> {
        let mut partial_sums = Vec::with_capacity(increments.len() + 1);
        partial_sums.push(0i32);
        let mut s = 0i32;
        for &x in increments {
            if x != 1 && x != -1 {
                return Err(Error::InvalidParameter { name: "increments", reason: "entries must be +1 or -1" });
            }
            s += x as i32;
            partial_sums.push(s);
        }
        let stopping_times = scan_stopping_times(&partial_sums);
        Ok(WalkLevel { m, partial_sums, stopping_times })
    }

    pub fn level(&self) -> u32 {
        self.m
    }

    /// Number of steps `n` covered, i.e. `S̃_m(0..=n)` is known.
    pub fn steps(&self) -> usize {
        self.partial_sums.len() - 1
    }

    /// Number of completed bridges (stopping times beyond `T_m(0)`).
    pub fn bridges(&self) -> usize {
        self.stopping_times.len() - 1
    }

    pub fn partial_sums(&self) -> &[i32] {
        &self.partial_sums
    }

    pub fn stopping_times(&self) -> &[usize] {
        &self.stopping_times
    }

    /// Twisted increment `X̃_m(n)` for `1 ≤ n ≤ steps()`.
    pub fn increment(&self, n: usize) -> i8 {
        (self.partial_sums[n] - self.partial_sums[n - 1]) as i8
    }

    pub fn increments(&self) -> impl Iterator<Item = i8> + '_ {
        self.partial_sums.windows(2).map(|w| (w[1] - w[0]) as i8)
    }

    /// Number of up-steps among the first `n` increments.
    pub fn ups(&self, n: usize) -> usize {
        // S(n) = ups - downs and ups + downs = n.
        ((n as i64 + self.partial_sums[n] as i64) / 2) as usize
    }

    /// Appends one bridge: raw coins are drawn until the walk moves a net
    /// distance 2, and the whole bridge is negated unless it already moves
    /// by `2·target`.
    fn push_bridge(&mut self, target: i32, next_coin: &mut dyn FnMut(usize) -> Result<i8>) -> Result<()> {
        debug_assert!(target == 1 || target == -1);
        let start = self.partial_sums.len();
        let base = *self.partial_sums.last().unwrap_or(&0);
        let mut net = 0i32;
        while net.abs() != 2 {
            let x = next_coin(self.partial_sums.len() - 1)? as i32;
            net += x;
            self.partial_sums.push(base + net);
        }
        if net != 2 * target {
            for s in &mut self.partial_sums[start..] {
                *s = 2 * base - *s;
            }
        }
        self.stopping_times.push(self.partial_sums.len() - 1);
        Ok(())
    }

    /// Checks the walk invariants: unit increments, bridges of net size 2,
    /// and (given the previous level) `S̃_m(T_m(k)) = 2·S̃_{m-1}(k)`.
    pub fn validate(&self, prev: Option<&WalkLevel>) -> Result<()> {
        const BAD: Error = Error::Precondition("walk invariant violated");
        if self.partial_sums.first() != Some(&0) || self.stopping_times.first() != Some(&0) {
            return Err(BAD);
        }
        if self.partial_sums.windows(2).any(|w| (w[1] - w[0]).abs() != 1) {
            return Err(BAD);
        }
        for w in self.stopping_times.windows(2) {
            if w[1] <= w[0] || (self.partial_sums[w[1]] - self.partial_sums[w[0]]).abs() != 2 {
                return Err(BAD);
            }
        }
        if let Some(prev) = prev {
            let k_max = self.bridges().min(prev.steps());
            if (0..=k_max).any(|k| self.partial_sums[self.stopping_times[k]] != 2 * prev.partial_sums[k]) {
                return Err(BAD);
            }
        }
        Ok(())
    }
}

fn scan_stopping_times(partial_sums: &[i32]) -> Vec<usize> {
    let mut times = vec![0];
    let mut anchor = partial_sums[0];
    for (n, &s) in partial_sums.iter().enumerate().skip(1) {
        if (s - anchor).abs() == 2 {
            times.push(n);
            anchor = s;
        }
    }
    times
}

/// `T(0..=count)` for the walk with the given partial sums:
/// `T(0) = 0`, `T(k+1) = min{n > T(k) : |S(n) - S(T(k))| = 2}`.
pub fn stopping_times(partial_sums: &[i32], count: usize) -> Result<Vec<usize>> {
    if partial_sums.is_empty() {
        return Err(Error::InsufficientData { needed: 1, available: 0 });
    }
    let mut times = scan_stopping_times(partial_sums);
    if times.len() <= count {
        return Err(Error::InsufficientData { needed: count + 1, available: times.len() });
    }
    times.truncate(count + 1);
    Ok(times)
}

/// Twists `raw_coins` (row `m` of the coin matrix) into level `m` so that
/// it refines `prev` over its first `bridges` steps.
pub fn twist(prev: &WalkLevel, raw_coins: &[i8], bridges: usize) -> Result<WalkLevel> {
    if prev.steps() < bridges {
        return Err(Error::InsufficientData { needed: bridges, available: prev.steps() });
    }
    let mut level = WalkLevel::empty(prev.m + 1);
    let mut next = |n: usize| match raw_coins.get(n) {
        Some(&x) if x == 1 || x == -1 => Ok(x),
        Some(_) => Err(Error::InvalidParameter { name: "raw_coins", reason: "entries must be +1 or -1" }),
        None => Err(Error::InsufficientCoins { used: n, bridge: 0 }),
    };
    for k in 0..bridges {
        level.push_bridge(prev.increment(k + 1) as i32, &mut next).map_err(|e| match e {
            Error::InsufficientCoins { used, .. } => Error::InsufficientCoins { used, bridge: k },
            e => e,
        })?;
    }
    Ok(level)
}

/// The whole nested family `S̃_0, S̃_1, ...` for one coin matrix, grown on
/// demand. Levels depend on each other, so construction is sequential.
#[derive(Debug, Clone)]
pub struct NestedWalk {
    coins: CoinMatrix,
    levels: Vec<WalkLevel>,
}

impl NestedWalk {
    pub fn new(seed: u64) -> Self {
        Self::from_coins(CoinMatrix::new(seed))
    }

    pub fn from_coins(coins: CoinMatrix) -> Self {
        NestedWalk { coins, levels: Vec::new() }
    }

    /// Builds levels `0..=max_level`, each covering `horizon · 2^{2m}` steps.
    pub fn build(seed: u64, max_level: u32, horizon: f64) -> Result<Self> {
        let mut walk = Self::new(seed);
        for m in 0..=max_level {
            let n = lattice_steps(horizon, m)?;
            walk.ensure_steps(m, n)?;
        }
        Ok(walk)
    }

    pub fn seed(&self) -> u64 {
        self.coins.seed()
    }

    pub fn max_level(&self) -> Option<u32> {
        self.levels.len().checked_sub(1).map(|m| m as u32)
    }

    pub fn level(&self, m: u32) -> Option<&WalkLevel> {
        self.levels.get(m as usize)
    }

    /// Extends level `m` (and, recursively, coarser levels) to at least `n` steps.
    pub fn ensure_steps(&mut self, m: u32, n: usize) -> Result<()> {
        while self.levels.len() <= m as usize {
            let next = self.levels.len() as u32;
            self.levels.push(WalkLevel::empty(next));
        }
        let mi = m as usize;
        if self.levels[mi].steps() >= n {
            return Ok(());
        }
        if m == 0 {
            let raw = self.coins.row(0, n)?;
            let level = &mut self.levels[0];
            let have = level.steps();
            let mut s = *level.partial_sums.last().unwrap_or(&0);
            for &x in &raw[have..] {
                s += x as i32;
                level.partial_sums.push(s);
            }
            let last = *level.stopping_times.last().unwrap_or(&0);
            let mut anchor = level.partial_sums[last];
            for j in last + 1..level.partial_sums.len() {
                if (level.partial_sums[j] - anchor).abs() == 2 {
                    level.stopping_times.push(j);
                    anchor = level.partial_sums[j];
                }
            }
            return Ok(());
        }
        while self.levels[mi].steps() < n {
            let k = self.levels[mi].bridges();
            if self.levels[mi - 1].steps() < k + 1 {
                // Ask for a batch so the coarser level is not grown one step at a time.
                let missing = (n - self.levels[mi].steps()) / 4 + 1;
                self.ensure_steps(m - 1, k + missing.max(1))?;
            }
            let target = self.levels[mi - 1].increment(k + 1) as i32;
            let (levels, coins) = (&mut self.levels, &mut self.coins);
            let mut next = |j: usize| coins.coin(mi, j + 1);
            levels[mi].push_bridge(target, &mut next)?;
        }
        Ok(())
    }

    /// Extends level `m` until it has at least `count` complete bridges.
    pub fn ensure_bridges(&mut self, m: u32, count: usize) -> Result<()> {
        loop {
            let (steps, bridges) = self.level(m).map_or((0, 0), |l| (l.steps(), l.bridges()));
            if bridges >= count {
                return Ok(());
            }
            self.ensure_steps(m, steps + 4 * (count - bridges) + 4)?;
        }
    }

    /// `B_m` on `[0, horizon]`.
    pub fn path(&self, m: u32, horizon: f64) -> Result<WalkPath<'_>> {
        let level = self.level(m).ok_or(Error::InsufficientSteps { needed: 1, available: 0 })?;
        shrink(level, horizon)
    }
}

/// `horizon · 2^{2m}` as an exact step count.
pub fn lattice_steps(horizon: f64, m: u32) -> Result<usize> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter { name: "horizon", reason: "must be positive and finite" });
    }
    let scaled = horizon * pow2(2 * m as i32);
    if floor(scaled) != scaled || scaled > usize::MAX as f64 {
        return Err(Error::NonDyadicHorizon { horizon, m });
    }
    Ok(scaled as usize)
}

/// A path evaluator on `[0, horizon]` that is affine between its breakpoints.
pub trait PathEval {
    fn eval(&self, t: f64) -> f64;

    /// Smallest breakpoint strictly after `t`, if any.
    fn next_breakpoint(&self, _t: f64) -> Option<f64> {
        None
    }
}

impl<F: Fn(f64) -> f64> PathEval for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

/// The shrunken walk `B_m(t) = 2^{-m} S̃_m(t·2^{2m})`, linearly interpolated.
#[derive(Debug, Clone, Copy)]
pub struct WalkPath<'a> {
    m: u32,
    horizon: f64,
    sums: &'a [i32],
}

/// Shrinks level `m` onto `[0, horizon]`.
pub fn shrink(walk: &WalkLevel, horizon: f64) -> Result<WalkPath<'_>> {
    let n = lattice_steps(horizon, walk.m)?;
    if walk.steps() < n {
        return Err(Error::InsufficientSteps { needed: n, available: walk.steps() });
    }
    Ok(WalkPath { m: walk.m, horizon, sums: &walk.partial_sums[..=n] })
}

impl<'a> WalkPath<'a> {
    pub fn level(&self) -> u32 {
        self.m
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.sums.len() - 1
    }

    pub fn dt(&self) -> f64 {
        pow2(-2 * self.m as i32)
    }

    pub fn dx(&self) -> f64 {
        pow2(-(self.m as i32))
    }

    /// `S̃_m(k)` for `0 ≤ k ≤ steps()`.
    pub fn lattice_sum(&self, k: usize) -> i32 {
        self.sums[k]
    }

    /// `B_m(k·2^{-2m})`, exact.
    pub fn at_step(&self, k: usize) -> f64 {
        self.sums[k] as f64 * self.dx()
    }

    /// Number of up-steps among the first `k` increments.
    pub fn ups(&self, k: usize) -> usize {
        ((k as i64 + self.sums[k] as i64) / 2) as usize
    }

    pub fn increment(&self, k: usize) -> i8 {
        (self.sums[k] - self.sums[k - 1]) as i8
    }
}

impl PathEval for WalkPath<'_> {
    fn eval(&self, t: f64) -> f64 {
        let n = self.steps();
        let x = (t * pow2(2 * self.m as i32)).clamp(0.0, n as f64);
        let i = floor(x) as usize;
        if i >= n {
            return self.at_step(n);
        }
        let frac = x - i as f64;
        if frac == 0.0 {
            return self.at_step(i);
        }
        let lo = self.sums[i] as f64;
        let hi = self.sums[i + 1] as f64;
        (lo + frac * (hi - lo)) * self.dx()
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        let scale = pow2(2 * self.m as i32);
        let next = (floor(t * scale) + 1.0) / scale;
        (next <= self.horizon).then_some(next)
    }
}

/// Outcome of a refinement check between levels `m` and `m + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub holds: bool,
    pub checked: usize,
    /// Largest `|B_{m+1}(T_{m+1}(k)·2^{-2(m+1)}) - B_m(k·2^{-2m})|`.
    pub max_deviation: f64,
    pub first_failure: Option<usize>,
}

/// Verifies `S̃_{m+1}(T_{m+1}(k)) = 2·S̃_m(k)` for `k ≤ k_max`, which is the
/// refinement identity for the shrunken walks in exact integer form.
pub fn refinement_check(coarse: &WalkLevel, fine: &WalkLevel, k_max: usize) -> Result<RefinementReport> {
    if fine.m != coarse.m + 1 {
        return Err(Error::Precondition("levels must be consecutive"));
    }
    if coarse.steps() < k_max {
        return Err(Error::InsufficientData { needed: k_max, available: coarse.steps() });
    }
    if fine.bridges() < k_max {
        return Err(Error::InsufficientData { needed: k_max, available: fine.bridges() });
    }
    let mut worst = 0i64;
    let mut first_failure = None;
    for k in 0..=k_max {
        let gap = (fine.partial_sums[fine.stopping_times[k]] as i64 - 2 * coarse.partial_sums[k] as i64).abs();
        if gap != 0 && first_failure.is_none() {
            first_failure = Some(k);
        }
        worst = worst.max(gap);
    }
    Ok(RefinementReport {
        holds: first_failure.is_none(),
        checked: k_max + 1,
        max_deviation: worst as f64 * pow2(-(fine.m as i32)),
        first_failure,
    })
}

/// Time lag `T_{m+1}(k)·2^{-2(m+1)} - k·2^{-2m}` of the refinement.
pub fn time_lag(fine: &WalkLevel, k: usize) -> Option<f64> {
    let m1 = fine.m as i32;
    fine.stopping_times.get(k).map(|&t| t as f64 * pow2(-2 * m1) - k as f64 * pow2(-2 * (m1 - 1)))
}

/// `sup |B_fine - B_coarse|` over the shorter horizon. The coarse
/// breakpoints lie on the fine grid, so the fine grid suffices.
pub fn sup_distance_levels(fine: &WalkPath<'_>, coarse: &WalkPath<'_>) -> Result<f64> {
    if fine.m < coarse.m {
        return Err(Error::Precondition("first path must be the finer one"));
    }
    let horizon = fine.horizon.min(coarse.horizon);
    let n = lattice_steps(horizon, fine.m)?;
    let ratio = 1usize << (2 * (fine.m - coarse.m));
    let mut sup = 0.0f64;
    for k in 0..=n {
        let j = k / ratio;
        let frac = (k % ratio) as f64 / ratio as f64;
        let c = if frac == 0.0 {
            coarse.at_step(j)
        } else {
            coarse.at_step(j) + frac * (coarse.at_step(j + 1) - coarse.at_step(j))
        };
        sup = sup.max(abs(fine.at_step(k) - c));
    }
    Ok(sup)
}

/// `sup_{[0, horizon]} |f - g|` for piecewise-linear `f`, `g`: evaluated on
/// the union of both breakpoint sets and a uniform mesh of `mesh` points.
pub fn sup_distance(f: &dyn PathEval, g: &dyn PathEval, horizon: f64, mesh: usize) -> f64 {
    assert!(mesh >= 2, "mesh needs at least two points");
    let h = horizon / (mesh - 1) as f64;
    let next_mesh = |t: f64| {
        let mut j = floor(t / h) + 1.0;
        while j * h <= t {
            j += 1.0;
        }
        j * h
    };
    let mut t = 0.0;
    let mut sup = 0.0f64;
    loop {
        sup = sup.max(abs(f.eval(t) - g.eval(t)));
        if t >= horizon {
            break;
        }
        let mut next = next_mesh(t).min(horizon);
        if let Some(b) = f.next_breakpoint(t) {
            next = next.min(b);
        }
        if let Some(b) = g.next_breakpoint(t) {
            next = next.min(b);
        }
        t = next;
    }
    sup
}
