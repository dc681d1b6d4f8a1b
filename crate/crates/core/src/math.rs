//! Scalar special functions and summation helpers.
//!
//! `core` has no transcendental functions on `f64`, so everything routes
//! through `libm`.

use alloc::vec;
use alloc::vec::Vec;

pub use libm::{ceil, erfc, exp, expm1, fabs as abs, floor, log as ln, log1p as ln_1p, pow, sqrt};

pub const SQRT_2: f64 = core::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal distribution function Φ.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density φ.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * x * x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `2^e` for integer `e`, exact over the normal range.
pub fn pow2(e: i32) -> f64 {
    libm::ldexp(1.0, e)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if abs(self.sum) >= abs(v) {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Binomial(n, p) probabilities for i = 0..=n.
///
/// Built outward from the mode with the ratio recurrence and renormalized,
/// so there are no factorials and no cancellation. Far tails underflow to 0.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut w = vec![0.0; n + 1];
    let mode = (((n + 1) as f64 * p) as usize).min(n);
    let odds = p / (1.0 - p);
    w[mode] = 1.0;
    for i in mode..n {
        let next = w[i] * ((n - i) as f64 / (i + 1) as f64) * odds;
        if next == 0.0 {
            break;
        }
        w[i + 1] = next;
    }
    for i in (1..=mode).rev() {
        let prev = w[i] * (i as f64 / (n - i + 1) as f64) / odds;
        if prev == 0.0 {
            break;
        }
        w[i - 1] = prev;
    }
    let total: CompensatedSum = w.iter().copied().collect();
    let total = total.value();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function I_x(a, b), a, b > 0, 0 ≤ x ≤ 1.
pub fn inc_beta_reg(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // The continued fraction converges fast for x < (a+1)/(a+b+2).
    if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - inc_beta_reg(b, a, 1.0 - x)
    } else {
        let ln_front = a * ln(x) + b * ln_1p(-x) - ln_beta(a, b);
        exp(ln_front) * beta_cf(a, b, x) / a
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let max_iter = 1000 + 4 * sqrt(a.max(b)) as usize;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if abs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// `ln(n!) - ln(√(2πn)(n/e)^n)`, the Stirling remainder.
fn stirling_error(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * ln(n) + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// `x ln(x/np) + np - x`, evaluated without cancellation near `x = np`.
fn deviance(x: f64, np: f64) -> f64 {
    if abs(x - np) < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * ln(x / np) + np - x
    }
}

/// `C(n, j) p^j (1-p)^{n-j}` by the saddle-point expansion, accurate to a
/// few ulps even for large `n`.
pub fn binomial_pmf_at(j: usize, n: usize, p: f64) -> f64 {
    if j > n {
        return 0.0;
    }
    let q = 1.0 - p;
    if j == 0 {
        return exp(n as f64 * ln_1p(-p));
    }
    if j == n {
        return exp(n as f64 * ln(p));
    }
    let (x, nf) = (j as f64, n as f64);
    let lc = stirling_error(nf)
        - stirling_error(x)
        - stirling_error(nf - x)
        - deviance(x, nf * p)
        - deviance(nf - x, nf * q);
    let lf = ln(2.0 * core::f64::consts::PI) + ln(x) + ln_1p(-x / nf);
    exp(lc - 0.5 * lf)
}

/// Upper binomial tail `Bin(j; n, p) = Σ_{i=j}^{n} C(n,i) p^i (1-p)^{n-i}`.
///
/// This is `I_p(j, n - j + 1)`; the continued fraction's prefactor is a
/// binomial probability, taken from [`binomial_pmf_at`] rather than from
/// log-gamma differences. `Bin(j; n, p) = 1` for `j ≤ 0` and `0` for `j > n`.
pub fn binomial_upper_tail(j: i64, n: usize, p: f64) -> f64 {
    if j <= 0 {
        return 1.0;
    }
    if j as u64 > n as u64 {
        return 0.0;
    }
    let ju = j as usize;
    let a = j as f64;
    let b = (n - ju + 1) as f64;
    if p > (a + 1.0) / (a + b + 2.0) {
        1.0 - p * binomial_pmf_at(ju - 1, n, p) * beta_cf(b, a, 1.0 - p)
    } else {
        (1.0 - p) * binomial_pmf_at(ju, n, p) * beta_cf(a, b, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choose(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn normal_cdf_symmetry_and_center() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for i in 0..200 {
            let x = i as f64 * 0.05;
            assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() <= 1e-15);
            assert!(normal_cdf(x + 0.05) >= normal_cdf(x));
        }
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
    }

    #[test]
    fn pmf_matches_factorial_formula_for_small_n() {
        for &(n, p) in &[(1usize, 0.3), (7, 0.5), (12, 0.61), (30, 0.2)] {
            let w = binomial_pmf(n, p);
            for (i, wi) in w.iter().enumerate() {
                let direct = choose(n as u64, i as u64) * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
                assert!((wi - direct).abs() < 1e-15, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn pmf_large_n_sums_to_one() {
        let w = binomial_pmf(1 << 20, 0.5001);
        let s: CompensatedSum = w.iter().copied().collect();
        assert!((s.value() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn upper_tail_matches_direct_sum() {
        for &(n, p) in &[(5usize, 0.4), (12, 0.5), (40, 0.73), (256, 0.49)] {
            let w = binomial_pmf(n, p);
            for j in -1..=(n as i64 + 2) {
                let direct: f64 = w.iter().enumerate().filter(|(i, _)| *i as i64 >= j).map(|(_, v)| v).sum();
                let tail = binomial_upper_tail(j, n, p);
                assert!((tail - direct).abs() < 1e-13, "n={n} j={j}: {tail} vs {direct}");
            }
        }
    }

    #[test]
    fn pmf_at_matches_recurrence() {
        for &(n, p) in &[(1usize, 0.3), (7, 0.5), (30, 0.2), (600, 0.51), (5000, 0.4999)] {
            let w = binomial_pmf(n, p);
            for (j, &v) in w.iter().enumerate() {
                if v > 1e-30 {
                    let at = binomial_pmf_at(j, n, p);
                    assert!((at - v).abs() <= 1e-13 * v, "n={n} j={j}: {at} vs {v}");
                }
            }
        }
        assert!((binomial_pmf_at(3, 10, 0.25) - choose(10, 3) * 0.25f64.powi(3) * 0.75f64.powi(7)).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-14).abs() < 1e-26);
    }
}
