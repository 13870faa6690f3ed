//! Statistical primitives for the Monte Carlo verification harness: running
//! moments with exact merging, Welch mean comparisons, Wilson intervals,
//! chi-square goodness of fit with bin pooling, and a Kolmogorov–Smirnov
//! distance.

use serde::Serialize;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Streaming mean/variance accumulator (Welford), mergeable so that
/// block-parallel accumulation gives the same result as a sequential pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let total = n1 + n2;
        self.mean += delta * n2 / total;
        self.m2 += other.m2 + delta * delta * n1 * n2 / total;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let mut m = Self::new();
        for &x in samples {
            m.push(x);
        }
        m
    }
}

/// One mean-comparison row of a Monte Carlo report.
#[derive(Debug, Clone, Serialize)]
pub struct McTestRow {
    pub name: String,
    pub m1: f64,
    pub m2: f64,
    pub se1: f64,
    pub se2: f64,
    pub n1: u64,
    pub n2: u64,
    /// Welch statistic |m1 − m2| / sqrt(se1² + se2²).
    pub z: f64,
    pub pass: bool,
}

/// A bundle of mean comparisons controlled by one z threshold.
#[derive(Debug, Clone, Serialize)]
pub struct McCompareReport {
    pub tests: Vec<McTestRow>,
    pub pass: bool,
    pub z_crit: f64,
    pub atol: f64,
    pub n: u64,
    pub seed: u64,
}

/// Compare two accumulated means: pass iff the Welch z stays at or below
/// z_crit, or the absolute difference is within atol (degenerate
/// zero-variance comparisons).
pub fn compare_moments(
    name: &str,
    a: &RunningMoments,
    b: &RunningMoments,
    z_crit: f64,
    atol: f64,
) -> McTestRow {
    let diff = (a.mean() - b.mean()).abs();
    let denom = (a.standard_error().powi(2) + b.standard_error().powi(2)).sqrt();
    let z = if denom > 0.0 {
        diff / denom
    } else if diff <= atol {
        0.0
    } else {
        f64::INFINITY
    };
    let pass = z <= z_crit || diff <= atol;
    McTestRow {
        name: name.to_string(),
        m1: a.mean(),
        m2: b.mean(),
        se1: a.standard_error(),
        se2: b.standard_error(),
        n1: a.count(),
        n2: b.count(),
        z,
        pass,
    }
}

/// Slice-facing wrapper around [`compare_moments`].
pub fn mc_mean_compare(
    name: &str,
    samples1: &[f64],
    samples2: &[f64],
    z_crit: f64,
    atol: f64,
) -> Result<McTestRow> {
    if samples1.is_empty() || samples2.is_empty() {
        return Err(Error::InvalidInput("sample sets must be nonempty".into()));
    }
    Ok(compare_moments(
        name,
        &RunningMoments::from_samples(samples1),
        &RunningMoments::from_samples(samples2),
        z_crit,
        atol,
    ))
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0, "interval needs at least one trial");
    assert!(hits <= n, "hits cannot exceed trials");
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Chi2Report {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bin count after pooling low-expectation bins.
    pub bins: usize,
}

/// Pearson goodness-of-fit test. Adjacent bins are pooled until every pooled
/// bin has expectation at least 5 (a trailing light bin merges backwards), and
/// the statistic is referred to chi-square with (bins − 1) degrees of freedom.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<Chi2Report> {
    if observed.len() != expected.len() {
        return Err(Error::InvalidInput(
            "observed and expected lengths differ".into(),
        ));
    }
    if observed.is_empty() {
        return Err(Error::InvalidInput("no bins".into()));
    }
    if expected.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::InvalidInput(
            "expected counts must be finite and nonnegative".into(),
        ));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc_obs = 0.0f64;
    let mut acc_exp = 0.0f64;
    for (&o, &e) in observed.iter().zip(expected) {
        acc_obs += o as f64;
        acc_exp += e;
        if acc_exp >= 5.0 {
            pooled.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            pooled.push((acc_obs, acc_exp));
        }
    }
    if pooled.len() < 2 {
        return Err(Error::Infeasible(
            "fewer than two bins remain after pooling".into(),
        ));
    }
    let statistic: f64 = pooled
        .iter()
        .map(|(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = pooled.len() - 1;
    // Survival function of chi-square(dof); the gamma routine rejects x = 0,
    // where the tail probability is exactly 1.
    let p_value = if statistic > 0.0 {
        gamma_ur(dof as f64 / 2.0, statistic / 2.0)
    } else {
        1.0
    };
    Ok(Chi2Report {
        statistic,
        dof,
        p_value,
        bins: pooled.len(),
    })
}

/// Kolmogorov–Smirnov sup-distance between an empirical sample and a
/// reference CDF. Sorts a copy of the sample.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!samples.is_empty(), "KS distance needs samples");
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n);
        d = d.max((i + 1) as f64 / n - f);
    }
    d
}
