//! Log-log rate fitting for convergence studies.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ln, sqrt};

/// Minimum number of points for a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares fit of `log2(error)` against the level `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log2 units.
    pub residual: f64,
}

impl RateFit {
    /// Fitted error at level `m`.
    pub fn predict(&self, m: f64) -> f64 {
        libm::exp2(self.intercept + self.slope * m)
    }
}

/// Ordinary least squares on `(m, log2 error)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { min: MIN_FIT_POINTS, got: points.len() });
    }
    if let Some(&(m, value)) = points.iter().find(|(_, e)| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::NonPositiveError { m, value });
    }
    let n = points.len() as f64;
    let ys: Vec<f64> = points.iter().map(|&(_, e)| ln(e) / core::f64::consts::LN_2).collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("rate fit needs distinct levels"));
    }
    let sxy: f64 = points.iter().zip(&ys).map(|(p, y)| (p.0 - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().zip(&ys).map(|(p, y)| { let d = y - intercept - slope * p.0; d * d }).sum();
    Ok(RateFit { points: points.to_vec(), slope, intercept, residual: sqrt(sse / n) })
}



/// Median of a sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::pow2;

    #[test]
    fn exact_geometric_rates() {
        let pts: Vec<_> = (4..10).map(|m| (m as f64, pow2(-m))).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-14);
        assert!(fit.residual < 1e-13);
        let half: Vec<_> = (4..10).map(|m| (m as f64, libm::exp2(-(m as f64) / 2.0))).collect();
        assert!((fit_rate(&half).unwrap().slope + 0.5).abs() < 1e-14);
    }

    #[test]
    fn jittered_geometric_data() {
        // deterministic jitter in [-0.3, 0.3] on log2 scale
        let jitter = [0.21, -0.13, 0.3, -0.27, 0.05, -0.08, 0.17, -0.2];
        let pts: Vec<_> = (0..8).map(|i| ((i + 3) as f64, libm::exp2(-0.7 * (i + 3) as f64 + jitter[i]))).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 0.7).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(fit_rate(&[(1.0, 1.0)]), Err(Error::TooFewPoints { min: 4, got: 1 }));
        let pts = [(1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.1)];
        assert_eq!(fit_rate(&pts), Err(Error::NonPositiveError { m: 3.0, value: 0.0 }));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
