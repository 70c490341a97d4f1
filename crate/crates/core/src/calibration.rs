//! Entropy-guided temperature selection for mapping raw rewards into
//! (0, 1) via σ(r/τ).
//!
//! The temperature is chosen to maximize the Shannon entropy of the
//! calibrated score histogram: a spread-out histogram means the mapped
//! scores use the unit interval instead of piling up near 0 or 1.
//! Because σ is strictly increasing for any fixed τ > 0, calibration
//! never reorders rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::sigmoid;

pub const DEFAULT_BINS: usize = 20;

/// Selected temperature with the histogram evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub tau: f64,
    #[serde(rename = "bins")]
    pub bin_count: usize,
    pub entropy: f64,
    /// Normalized equal-width histogram of σ(r/τ) over [0, 1].
    pub histogram: Vec<f64>,
}

/// σ(r/τ). Callers must ensure τ > 0.
pub fn apply_sigmoid(r: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0, "temperature must be positive");
    sigmoid(r / tau)
}

fn bin_index(value: f64, bins: usize) -> usize {
    ((value * bins as f64) as usize).min(bins - 1)
}

fn histogram(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::Contract(format!("need at least 2 bins, got {bins}")));
    }
    if values.is_empty() {
        return Err(Error::Contract("histogram of no values".to_string()));
    }
    let mut counts = vec![0.0; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("histogram value {v} outside [0, 1]")));
        }
        counts[bin_index(v, bins)] += 1.0;
    }
    let n = values.len() as f64;
    for c in &mut counts {
        *c /= n;
    }
    Ok(counts)
}

fn entropy_of(probabilities: &[f64]) -> f64 {
    -probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Shannon entropy (natural log) of the equal-width bin histogram.
/// Bin edges are [k/bins, (k+1)/bins) with the last bin closed.
pub fn histogram_entropy(values: &[f64], bins: usize) -> Result<f64> {
    Ok(entropy_of(&histogram(values, bins)?))
}

/// 200 log-spaced temperatures over [0.05, 20], endpoints included.
pub fn default_grid() -> Vec<f64> {
    const POINTS: usize = 200;
    let (lo, hi) = (0.05_f64.ln(), 20.0_f64.ln());
    (0..POINTS)
        .map(|k| (lo + (hi - lo) * k as f64 / (POINTS - 1) as f64).exp())
        .collect()
}

/// Pick the grid temperature whose calibrated histogram has maximal
/// entropy. Exact entropy ties go to the τ nearest 1.0, then to the
/// smaller τ, so degenerate inputs (constant rewards) land near the
/// identity temperature.
pub fn select_temperature(rewards: &[f64], bins: usize, grid: &[f64]) -> Result<CalibrationResult> {
    if rewards.len() < 2 {
        return Err(Error::Contract(format!(
            "temperature selection needs ≥ 2 rewards, got {}",
            rewards.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::Contract("temperature grid is empty".to_string()));
    }
    if let Some(&bad) = grid.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Contract(format!("temperature {bad} must be positive and finite")));
    }
    let mut best: Option<CalibrationResult> = None;
    for &tau in grid {
        let calibrated: Vec<f64> = rewards.iter().map(|&r| apply_sigmoid(r, tau)).collect();
        let hist = histogram(&calibrated, bins)?;
        let entropy = entropy_of(&hist);
        let better = match &best {
            None => true,
            Some(b) => {
                entropy > b.entropy
                    || (entropy == b.entropy
                        && ((tau - 1.0).abs() < (b.tau - 1.0).abs()
                            || ((tau - 1.0).abs() == (b.tau - 1.0).abs() && tau < b.tau)))
            }
        };
        if better {
            best = Some(CalibrationResult {
                tau,
                bin_count: bins,
                entropy,
                histogram: hist,
            });
        }
    }
    Ok(best.expect("grid is non-empty"))
}
