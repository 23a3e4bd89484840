//! Empirical check that the robust loss tracks the true error: over the
//! post-warmup part of a run, `h1_error / sqrt_loss` should stay in a narrow
//! band and the two series should be strongly correlated.

use crate::error::{Error, Result};
use crate::train::HistoryRecord;

/// Fraction of the run discarded before comparing loss and error.
pub const WARMUP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessReport {
    pub pearson_corr: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub records_used: usize,
}

impl RobustnessReport {
    /// `ratio_max / ratio_min`.
    pub fn ratio_spread(&self) -> f64 {
        self.ratio_max / self.ratio_min
    }
}

pub fn robustness_monitor(history: &[HistoryRecord]) -> Result<RobustnessReport> {
    let last = history.iter().map(|r| r.iteration).max().unwrap_or(0);
    let cutoff = WARMUP_FRACTION * last as f64;
    let pairs: Vec<(f64, f64)> = history
        .iter()
        .filter(|r| r.iteration as f64 >= cutoff)
        .filter_map(|r| r.h1_error.map(|e| (r.sqrt_loss, e)))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::TooFewRecords(pairs.len()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let ratios = pairs.iter().map(|&(s, e)| e / s);
    let (ratio_min, ratio_max) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    Ok(RobustnessReport {
        pearson_corr: pearson(&xs, &ys),
        ratio_min,
        ratio_max,
        records_used: pairs.len(),
    })
}

/// Pearson correlation; 0 when either series has no spread.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Minimum of the loss over each sliding window of `window` records.
pub fn windowed_loss_minima(history: &[HistoryRecord], window: usize) -> Vec<f64> {
    history
        .windows(window.max(1))
        .map(|w| w.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Whether the sliding-window loss minimum never increases.
pub fn loss_trend_is_nonincreasing(history: &[HistoryRecord], window: usize) -> bool {
    windowed_loss_minima(history, window)
        .windows(2)
        .all(|w| w[1] <= w[0])
}
