//! Streaming moments, batch means and trend tests.

use alloc::vec::Vec;

use crate::special::normal_two_sided_p;

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n - 1) as f64
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Streaming batch means over a run of known length.
///
/// With `n` total values the batch size is `⌊n / ⌊√n⌋⌋`; trailing values that
/// do not fill a batch enter the overall mean but not the variance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchMeans {
    batch_size: u64,
    filled: u64,
    current: f64,
    total: Welford,
    batches: Welford,
}

impl BatchMeans {
    pub fn for_length(n: u64) -> Self {
        let nb = (n as f64).sqrt().floor().max(1.0) as u64;
        Self::with_batch_size((n / nb).max(1))
    }

    pub fn with_batch_size(batch_size: u64) -> Self {
        Self { batch_size: batch_size.max(1), filled: 0, current: 0.0, total: Welford::new(), batches: Welford::new() }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.total.push(x);
        self.current += x;
        self.filled += 1;
        if self.filled == self.batch_size {
            self.batches.push(self.current / self.batch_size as f64);
            self.current = 0.0;
            self.filled = 0;
        }
    }

    pub fn mean(&self) -> f64 {
        self.total.mean()
    }

    pub fn count(&self) -> u64 {
        self.total.count()
    }

    pub fn batch_count(&self) -> u64 {
        self.batches.count()
    }

    /// Batch-means standard error of [`mean`](Self::mean).
    pub fn std_error(&self) -> f64 {
        let b = self.batches.count();
        if b < 2 {
            return f64::INFINITY;
        }
        (self.batches.variance() / b as f64).sqrt()
    }
}

/// Batch-means estimate `(mean, std_error)` of a finished series.
pub fn batch_means(xs: &[f64]) -> (f64, f64) {
    let mut bm = BatchMeans::for_length(xs.len() as u64);
    xs.iter().for_each(|&x| bm.push(x));
    (bm.mean(), bm.std_error())
}

/// Sample autocorrelation at `lag`.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    if lag >= n || n < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum();
    cov / var
}

/// Median of pairwise slopes.
pub fn sen_slope(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut slopes = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            slopes.push((xs[j] - xs[i]) / (j - i) as f64);
        }
    }
    if slopes.is_empty() {
        return 0.0;
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    let k = slopes.len();
    if k % 2 == 1 {
        slopes[k / 2]
    } else {
        0.5 * (slopes[k / 2 - 1] + slopes[k / 2])
    }
}

/// Result of [`mann_kendall`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MannKendall {
    pub n: usize,
    pub s: f64,
    pub variance: f64,
    /// Variance inflation applied for serial correlation (≥ 1).
    pub inflation: f64,
    pub z: f64,
    pub p_value: f64,
    pub slope: f64,
}

impl MannKendall {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value < level
    }

    /// Two-sided p-value of the same statistic under another variance inflation.
    pub fn p_value_with_inflation(&self, inflation: f64) -> f64 {
        let sd = (self.variance / self.inflation * inflation).sqrt();
        let z = if self.n < 3 || self.s == 0.0 { 0.0 } else { (self.s - self.s.signum()) / sd };
        normal_two_sided_p(z)
    }
}

/// Mann–Kendall trend test with a lag-1 correction for serial correlation.
///
/// The series is detrended by Sen's slope; if the lag-1 autocorrelation `r` of
/// the residuals is positive the null variance is inflated by `(1 + r)/(1 − r)`.
pub fn mann_kendall(xs: &[f64]) -> MannKendall {
    let n = xs.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (xs[j] - xs[i]).signum() * ((xs[j] != xs[i]) as u8 as f64);
        }
    }
    let nf = n as f64;
    let mut variance = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    let slope = sen_slope(xs);
    let resid: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x - slope * i as f64).collect();
    let r = autocorrelation(&resid, 1).clamp(0.0, 0.95);
    let inflation = (1.0 + r) / (1.0 - r);
    variance *= inflation;
    let z = if n < 3 {
        0.0
    } else if s > 0.0 {
        (s - 1.0) / variance.sqrt()
    } else if s < 0.0 {
        (s + 1.0) / variance.sqrt()
    } else {
        0.0
    };
    MannKendall { n, s, variance, inflation, z, p_value: normal_two_sided_p(z), slope }
}

/// Kolmogorov–Smirnov distance of a sorted sample from a continuous CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Mean and standard error of a finished sample.
pub fn mean_std_error(xs: &[f64]) -> (f64, f64) {
    let mut w = Welford::new();
    xs.iter().for_each(|&x| w.push(x));
    (w.mean(), w.std_error())
}
