//! Batch-means statistics and Monte Carlo report records.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum number of batches used for standard errors.
pub const MIN_BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchStats {
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub batches: usize,
    pub samples: usize,
}

/// Mean, sample variance and batch-means standard error of `values`.
pub fn batch_means(values: &[f64], batches: usize) -> Result<BatchStats> {
    let n = values.len();
    if batches < 2 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 2 batches, got {batches}"
        )));
    }
    if n < batches {
        return Err(Error::InsufficientSamples(format!(
            "{n} samples cannot fill {batches} batches"
        )));
    }
    if !n.is_multiple_of(batches) {
        return Err(Error::InsufficientSamples(format!(
            "{batches} batches do not divide {n} samples"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let size = n / batches;
    let batch_avgs: Vec<f64> = values
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let spread = batch_avgs.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(BatchStats {
        mean,
        variance,
        stderr: (spread / batches as f64).sqrt(),
        batches,
        samples: n,
    })
}

/// Smallest batch count of at least [`MIN_BATCHES`] that divides `samples`
/// (falls back to one sample per batch).
pub fn default_batches(samples: usize) -> usize {
    (MIN_BATCHES..=samples)
        .find(|b| samples.is_multiple_of(*b))
        .unwrap_or(samples)
}

pub fn summarize(values: &[f64]) -> Result<BatchStats> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "{} samples is too few",
            values.len()
        )));
    }
    batch_means(values, default_batches(values.len()))
}

/// Ordinary least-squares line through `(xs, ys)`: returns (slope, intercept).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Two-sided tail P(|t| > threshold) of Student's t distribution with `dof`
/// degrees of freedom (numerical quadrature of the unnormalized density).
pub fn student_t_two_sided_tail(threshold: f64, dof: usize) -> f64 {
    let nu = dof as f64;
    let density = |x: f64| (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    // x = tan θ maps [0, ∞) to [0, π/2).
    let integral = |from: f64| {
        let (a, b) = (from.atan(), std::f64::consts::FRAC_PI_2);
        let steps = 20_000;
        let h = (b - a) / steps as f64;
        let f = |theta: f64| {
            let c = theta.cos();
            if c <= 0.0 {
                0.0
            } else {
                density(theta.tan()) / (c * c)
            }
        };
        let mut acc = f(a) + f(b);
        for k in 1..steps {
            acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    integral(threshold) / integral(0.0)
}

/// Outcome of a Monte Carlo gradient-variance (or related) experiment.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    pub quantity: String,
    pub estimate: f64,
    pub stderr: f64,
    pub prediction: Option<f64>,
    pub samples: usize,
    pub batches: usize,
    pub seed: u64,
    /// Largest |mean| / stderr over the real and imaginary parts of all
    /// gradient entries.
    pub gradient_mean_max_z: Option<f64>,
    pub extras: BTreeMap<String, f64>,
}

impl VarianceReport {
    pub fn from_stats(quantity: &str, stats: BatchStats, prediction: Option<f64>, seed: u64) -> Self {
        Self {
            quantity: quantity.to_string(),
            estimate: stats.mean,
            stderr: stats.stderr,
            prediction,
            samples: stats.samples,
            batches: stats.batches,
            seed,
            gradient_mean_max_z: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        self.prediction.map(|p| self.estimate / p)
    }

    /// True when |estimate - prediction| <= max(k * stderr, rel * |prediction|, abs).
    pub fn agrees(&self, k_stderr: f64, rel: f64, abs: f64) -> bool {
        match self.prediction {
            Some(p) => {
                let tol = (k_stderr * self.stderr).max(rel * p.abs()).max(abs);
                (self.estimate - p).abs() <= tol
            }
            None => false,
        }
    }
}

/// Largest |mean|/stderr over columns of per-sample gradient entries.
pub fn max_mean_z(columns: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for col in columns {
        let s = summarize(col)?;
        let z = if s.stderr > 0.0 {
            s.mean.abs() / s.stderr
        } else if s.mean.abs() < 1e-14 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    Ok(worst)
}
