//! Empirical means with optimistic confidence radii, and the median-of-means
//! estimator used for aggregated (sum over users) rewards.

use crate::error::{Error, Result};

/// Running pull count and reward sum for one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    pub count: u64,
    pub sum: f64,
}

impl ArmStats {
    pub fn record(&mut self, reward: f64) {
        self.count += 1;
        self.sum += reward;
    }

    /// Sample mean, `0` before the first pull.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

/// Block layout of a median-of-means estimate over `samples` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MedianOfMeansPlan {
    pub blocks: usize,
    pub block_len: usize,
}

impl MedianOfMeansPlan {
    /// `m = max(1, min(floor(8 ln(1/delta)), floor(T/2)))`, `t = floor(T/m)`.
    pub fn new(samples: usize, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if samples == 0 {
            return Err(Error::EmptySequence);
        }
        let by_confidence = (8.0 * (1.0 / delta).ln()).floor() as usize;
        let blocks = by_confidence.min(samples / 2).max(1);
        Ok(Self { blocks, block_len: samples / blocks })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("delta = {delta} must lie in (0, 1)")))
    }
}

/// Hoeffding radius `sqrt(ln(2 T n k / delta) / count)` for one user-arm cell.
pub fn ucb_radius(count: u64, horizon: usize, n: usize, k: usize, delta: f64) -> Result<f64> {
    if count == 0 {
        return Err(Error::ZeroCount);
    }
    let scale = 2.0 * horizon as f64 * n as f64 * k as f64 / delta;
    Ok((scale.ln() / count as f64).sqrt())
}

/// Radius `sqrt(24 n ln(T k / delta) / count)` for an aggregated arm whose
/// samples lie in `[0, n]`.
pub fn robust_radius(count: u64, horizon: usize, n: usize, k: usize, delta: f64) -> Result<f64> {
    if count == 0 {
        return Err(Error::ZeroCount);
    }
    let log_term = (horizon as f64 * k as f64 / delta).ln();
    Ok((24.0 * n as f64 * log_term / count as f64).sqrt())
}

/// Median of contiguous block means. Samples past `blocks * block_len` are
/// dropped; with an even block count the two middle means are averaged.
pub fn median_of_means(samples: &[f64], delta: f64) -> Result<f64> {
    let plan = MedianOfMeansPlan::new(samples.len(), delta)?;
    let mut means: Vec<f64> = samples
        .chunks_exact(plan.block_len)
        .take(plan.blocks)
        .map(|block| block.iter().sum::<f64>() / plan.block_len as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let mid = means.len() / 2;
    Ok(if means.len() % 2 == 1 {
        means[mid]
    } else {
        0.5 * (means[mid - 1] + means[mid])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucb_radius_examples() {
        let r = ucb_radius(4, 10, 2, 2, 0.01).unwrap();
        assert!((r - (8000f64.ln() / 4.0).sqrt()).abs() < 1e-12);
        assert!((r - 1.4989).abs() < 1e-4);
        let quarter = ucb_radius(16, 10, 2, 2, 0.01).unwrap();
        assert!((quarter - r / 2.0).abs() < 1e-12);
        assert!(ucb_radius(4, 10, 2, 2, 0.001).unwrap() > r);
        assert_eq!(ucb_radius(0, 10, 2, 2, 0.01).unwrap_err(), Error::ZeroCount);
    }

    #[test]
    fn robust_radius_examples() {
        // count = 24 ln(Tk/delta) with T = 1, k = 2, delta = 2/e
        let r = robust_radius(24, 1, 1, 2, 2.0 / std::f64::consts::E).unwrap();
        assert!((r - 1.0).abs() < 1e-12);

        let base = robust_radius(9, 100, 1, 2, 0.05).unwrap();
        let quad = robust_radius(9, 100, 4, 2, 0.05).unwrap();
        assert!((quad - 2.0 * base).abs() < 1e-12);

        let r = robust_radius(6, 10, 4, 2, 0.1).unwrap();
        assert!((r - (16.0 * 200f64.ln()).sqrt()).abs() < 1e-12);
        assert!((r - 9.207).abs() < 1e-3);
        assert_eq!(robust_radius(0, 10, 4, 2, 0.1).unwrap_err(), Error::ZeroCount);
    }

    #[test]
    fn radii_are_monotone() {
        for count in 1..50u64 {
            assert!(ucb_radius(count + 1, 100, 3, 4, 0.1).unwrap() < ucb_radius(count, 100, 3, 4, 0.1).unwrap());
            assert!(
                robust_radius(count + 1, 100, 3, 4, 0.1).unwrap() < robust_radius(count, 100, 3, 4, 0.1).unwrap()
            );
        }
        assert!(ucb_radius(5, 200, 3, 4, 0.1).unwrap() > ucb_radius(5, 100, 3, 4, 0.1).unwrap());
        assert!(ucb_radius(5, 100, 3, 5, 0.1).unwrap() > ucb_radius(5, 100, 3, 4, 0.1).unwrap());
        assert!(robust_radius(5, 200, 3, 4, 0.1).unwrap() > robust_radius(5, 100, 3, 4, 0.1).unwrap());
        assert!(robust_radius(5, 100, 3, 5, 0.1).unwrap() > robust_radius(5, 100, 3, 4, 0.1).unwrap());
    }

    #[test]
    fn plan_layout() {
        assert_eq!(MedianOfMeansPlan::new(8, 0.5).unwrap(), MedianOfMeansPlan { blocks: 4, block_len: 2 });
        assert_eq!(MedianOfMeansPlan::new(1, 0.01).unwrap(), MedianOfMeansPlan { blocks: 1, block_len: 1 });
        // 8 ln(1/0.95) < 1 would give zero blocks
        assert_eq!(MedianOfMeansPlan::new(100, 0.95).unwrap().blocks, 1);
        assert!(MedianOfMeansPlan::new(10, 1.0).is_err());
        assert!(MedianOfMeansPlan::new(10, 0.0).is_err());
    }

    #[test]
    fn median_of_means_examples() {
        assert_eq!(median_of_means(&[0.3; 17], 0.01).unwrap(), 0.3);
        let xs = [0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(median_of_means(&xs, 0.5).unwrap(), 0.5);
        // single block: plain mean
        let xs = [0.1, 0.4, 0.7, 1.0];
        assert!((median_of_means(&xs, 0.9).unwrap() - 0.55).abs() < 1e-12);
        assert_eq!(median_of_means(&[], 0.5).unwrap_err(), Error::EmptySequence);
    }

    #[test]
    fn surplus_samples_are_dropped() {
        // T = 7, delta = 0.5 -> m = 3, t = 2; the final sample is ignored
        let xs = [0.0, 0.0, 1.0, 1.0, 0.5, 0.5, 100.0];
        assert_eq!(median_of_means(&xs, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn arm_stats_mean() {
        let mut s = ArmStats::default();
        assert_eq!(s.mean(), 0.0);
        s.record(0.0);
        s.record(1.0);
        assert_eq!(s.mean(), 0.5);
        assert_eq!(s.count, 2);
    }
}
