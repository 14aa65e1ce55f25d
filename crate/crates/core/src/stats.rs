//! Monte Carlo summaries.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation / sqrt(n)).
    pub std_error: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let std_error = if count > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, count }
    }

    /// `|a - b| <= k sqrt(se_a^2 + se_b^2)`.
    pub fn agrees_with(&self, other: &MeanSe, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * combined_se(self.std_error, other.std_error)
    }
}

pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// `sqrt(p (1 - p) / n)`.
pub fn bernoulli_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        (p * (1.0 - p) / n as f64).max(0.0).sqrt()
    }
}
