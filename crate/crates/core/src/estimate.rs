//! Estimates with error bars and the accumulators used to build them.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Streaming mean and variance (Welford), mergeable across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanAccumulator {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// One standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean,
            error: self.std_error(),
        }
    }
}

/// A value with one standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Estimate {
            value: self.value * c,
            error: self.error * c.abs(),
        }
    }

    /// True when `|self - other|` is within `k` combined standard errors, with
    /// an absolute floor for error-free comparisons.
    pub fn agrees_with(&self, other: &Estimate, k: f64, floor: f64) -> bool {
        let sigma = (self.error * self.error + other.error * other.error).sqrt();
        (self.value - other.value).abs() <= k * sigma + floor
    }
}

/// Partial sums of a truncated series together with their statistical and
/// truncation uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub value: f64,
    /// One standard error of `value` from the Monte Carlo terms.
    pub stat_error: f64,
    /// Magnitude of the last retained term, a heuristic for the omitted tail.
    pub truncation_error: f64,
    pub n_max: usize,
    pub terms: Vec<f64>,
    pub term_errors: Vec<f64>,
    pub samples: u64,
}

impl SeriesEstimate {
    /// Builds an estimate from independently estimated terms `0..=n_max`.
    pub fn from_terms(terms: Vec<Estimate>, samples: u64) -> Self {
        let n_max = terms.len().saturating_sub(1);
        let value = terms.iter().map(|t| t.value).collect::<KahanSum>().value();
        let stat_error = terms.iter().map(|t| t.error * t.error).sum::<f64>().sqrt();
        let truncation_error = terms.last().map(|t| t.value.abs()).unwrap_or(0.0);
        SeriesEstimate {
            value,
            stat_error,
            truncation_error,
            n_max,
            terms: terms.iter().map(|t| t.value).collect(),
            term_errors: terms.iter().map(|t| t.error).collect(),
            samples,
        }
    }

    pub fn exact(value: f64) -> Self {
        Self::from_terms(vec![Estimate::exact(value)], 0)
    }

    /// Statistical and truncation uncertainty combined in quadrature.
    pub fn total_error(&self) -> f64 {
        self.stat_error.hypot(self.truncation_error)
    }

    pub fn as_estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            error: self.total_error(),
        }
    }

    /// Multiplies every term (and the errors) by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        SeriesEstimate {
            value: self.value * c,
            stat_error: self.stat_error * c.abs(),
            truncation_error: self.truncation_error * c.abs(),
            n_max: self.n_max,
            terms: self.terms.iter().map(|t| t * c).collect(),
            term_errors: self.term_errors.iter().map(|t| t * c.abs()).collect(),
            samples: self.samples,
        }
    }

    /// Checks the stored value against the sum of its terms.
    pub fn is_consistent(&self) -> bool {
        let sum = self.terms.iter().copied().collect::<KahanSum>().value();
        (self.value - sum).abs() <= 1e-12 * self.value.abs().max(f64::MIN_POSITIVE)
            || self.value == sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_increments() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn merged_accumulators_match_single_pass() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let mut all = MeanAccumulator::new();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = MeanAccumulator::new();
        let mut b = MeanAccumulator::new();
        xs[..73].iter().for_each(|&x| a.push(x));
        xs[73..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count, all.count);
        assert!((a.mean - all.mean).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn series_value_matches_terms() {
        let s = SeriesEstimate::from_terms(
            vec![Estimate::exact(1.0), Estimate { value: -0.25, error: 0.01 }, Estimate { value: 0.05, error: 0.02 }],
            100,
        );
        assert!(s.is_consistent());
        assert_eq!(s.n_max, 2);
        assert!((s.value - 0.8).abs() < 1e-15);
        assert!((s.stat_error - (0.0005f64).sqrt()).abs() < 1e-15);
        assert_eq!(s.truncation_error, 0.05);
    }
}
