use alloc::vec::Vec;

use crate::{Error, Result};

/// Residuals at or below this are treated as stagnated at machine
/// precision and left out of the fit.
pub const RATE_FLOOR: f64 = 1e-14;

const SUBLINEAR_RATIO: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateEstimate {
    /// Slope of `ln e_{k+1}` against `ln e_k`.
    pub order: f64,
    /// Geometric mean of `e_{k+1} / e_k`.
    pub ratio: f64,
    pub sublinear: bool,
    pub pairs_used: usize,
    /// Residuals in the window at or below [`RATE_FLOOR`].
    pub excluded: usize,
}

/// Fits successive-residual ratios over the trailing `window` entries.
///
/// Flags sublinear convergence when the ratio is within `1e-3` of one or
/// the ratios drift upward across the window (second-half mean above the
/// first-half mean by more than a quarter of the remaining gap to one).
pub fn estimate_rate(residuals: &[f64], window: usize) -> Result<RateEstimate> {
    let tail = &residuals[residuals.len().saturating_sub(window)..];
    let excluded = tail.iter().filter(|&&e| !(e > RATE_FLOOR)).count();
    let pairs: Vec<(f64, f64)> = tail
        .windows(2)
        .filter(|p| p[0] > RATE_FLOOR && p[1] > RATE_FLOOR && p[0].is_finite() && p[1].is_finite())
        .map(|p| (libm::log(p[0]), libm::log(p[1])))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Precondition(alloc::format!(
            "need at least 2 usable residual pairs, found {}",
            pairs.len()
        )));
    }
    let m = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let order = if sxx > 0.0 { sxy / sxx } else { 1.0 };

    let log_ratios: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let ratio = libm::exp(log_ratios.iter().sum::<f64>() / m);
    let half = log_ratios.len() / 2;
    let mean_ratio = |s: &[f64]| s.iter().map(|v| libm::exp(*v)).sum::<f64>() / s.len() as f64;
    let first = mean_ratio(&log_ratios[..half]);
    let second = mean_ratio(&log_ratios[half..]);
    let drifting = first < 1.0 && second - first > 0.25 * (1.0 - first);
    Ok(RateEstimate {
        order,
        ratio,
        sublinear: ratio > SUBLINEAR_RATIO || drifting,
        pairs_used: pairs.len(),
        excluded,
    })
}
