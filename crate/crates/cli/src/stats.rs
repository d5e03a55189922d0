use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::statistics::Statistics;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("sample `{0}` is empty")]
    EmptySample(&'static str),
}

/// Below this size the normal approximation is questionable.
pub const MIN_RECOMMENDED_N: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct ZTest {
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub warning: Option<String>,
}

/// Sample standard deviation; 0 for a single observation.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        xs.std_dev()
    }
}

/// Two-sample Z test on means using the sample variances.
pub fn z_test_means(a: &[f64], b: &[f64]) -> Result<ZTest, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    let (mean_a, mean_b) = (a.mean(), b.mean());
    let se = (std_dev(a).powi(2) / a.len() as f64 + std_dev(b).powi(2) / b.len() as f64).sqrt();
    let diff = mean_a - mean_b;
    let z = if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        diff.signum() * f64::INFINITY
    } else {
        diff / se
    };
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2);
    let warning = (a.len().min(b.len()) < MIN_RECOMMENDED_N).then(|| {
        format!(
            "samples of size {} and {} are below {MIN_RECOMMENDED_N}; the normal approximation may be poor",
            a.len(),
            b.len()
        )
    });
    Ok(ZTest {
        z,
        p_value,
        n_a: a.len(),
        n_b: b.len(),
        mean_a,
        mean_b,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

/// Mean, sample standard deviation and normal 95% confidence interval of the
/// mean. `xs` must be non-empty.
pub fn summarize(xs: &[f64]) -> Summary {
    assert!(!xs.is_empty(), "summary of an empty sample");
    let mean = xs.mean();
    let std = std_dev(xs);
    let q = Normal::standard().inverse_cdf(0.975);
    let half = q * std / (xs.len() as f64).sqrt();
    Summary {
        n: xs.len(),
        mean,
        std,
        ci95_low: mean - half,
        ci95_high: mean + half,
    }
}
