//! Small Monte Carlo helpers: binomial estimates with Wilson intervals,
//! running means, total-variation distance and least-squares slopes.

use serde::Serialize;

/// Normal quantile used for every reported interval (99.7% two-sided).
pub const Z_SCORE: f64 = 3.0;

/// A binomial proportion with its standard error and Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub mean: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64) -> Estimate {
        assert!(trials > 0 && successes <= trials);
        let t = trials as f64;
        let mean = successes as f64 / t;
        let (lower, upper) = wilson_interval(successes, trials, Z_SCORE);
        Estimate {
            successes,
            trials,
            mean,
            std_err: (mean * (1.0 - mean) / t).sqrt(),
            lower,
            upper,
        }
    }
}

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Running mean and standard error of a real-valued sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanEstimate {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanEstimate {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = MeanEstimate::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalized histogram of outcomes in `0..len`.
pub fn empirical_law(outcomes: impl IntoIterator<Item = u64>, len: usize) -> Vec<f64> {
    let mut counts = vec![0u64; len];
    let mut total = 0u64;
    for o in outcomes {
        counts[o as usize] += 1;
        total += 1;
    }
    counts.into_iter().map(|c| c as f64 / total.max(1) as f64).collect()
}

/// Standard error of the empirical TV distance to `p` from `samples` draws,
/// from the per-cell binomial errors: `½ Σ √(p(1−p)/N)`.
pub fn tv_noise(p: &[f64], samples: usize) -> f64 {
    0.5 * p.iter().map(|x| (x * (1.0 - x) / samples as f64).sqrt()).sum::<f64>()
}

/// Ordinary least-squares slope and intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_mean_and_clamps() {
        let e = Estimate::from_counts(30, 100);
        assert!(e.lower < 0.3 && 0.3 < e.upper);
        let e = Estimate::from_counts(0, 50);
        assert_eq!(e.lower, 0.0);
        assert!(e.upper > 0.0 && e.upper < 0.2);
        let e = Estimate::from_counts(50, 50);
        assert_eq!(e.upper, 1.0);
    }

    #[test]
    fn running_mean() {
        let m: MeanEstimate = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(m.mean, 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| -2.5 * x + 1.0).collect();
        let (s, c) = linear_fit(&xs, &ys);
        assert!((s + 2.5).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_basics() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[1.0, 0.0]), 0.5);
        assert_eq!(empirical_law([0, 1, 1, 3], 4), vec![0.25, 0.5, 0.0, 0.25]);
    }
}
