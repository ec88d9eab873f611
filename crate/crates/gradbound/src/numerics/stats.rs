//! Moment statistics over matrix entries.
//!
//! Population (biased) estimators throughout: sample sizes in this crate are
//! large enough that the bias is irrelevant and the formulas stay simple.

use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub std: f64,
    /// `None` when undefined (fewer than two values, or zero variance).
    pub skewness: Option<f64>,
    /// Excess kurtosis (normal = 0); `None` under the same conditions.
    pub excess_kurtosis: Option<f64>,
}

/// Population mean/std/skewness/excess-kurtosis over all entries.
pub fn sample_stats(m: &Matrix) -> SampleStats {
    stats_of(m.as_slice())
}

pub fn stats_of(values: &[f64]) -> SampleStats {
    assert!(!values.is_empty(), "stats of empty data");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    let (skewness, excess_kurtosis) = if values.len() < 2 || m2 == 0.0 {
        (None, None)
    } else {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    };
    SampleStats {
        mean,
        std,
        skewness,
        excess_kurtosis,
    }
}

/// Population standard deviation of each column.
pub fn column_std(m: &Matrix) -> Vec<f64> {
    let rows = m.rows() as f64;
    let mut sums = vec![0.0; m.cols()];
    let mut sq = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (j, &v) in m.row(i).iter().enumerate() {
            sums[j] += v;
            sq[j] += v * v;
        }
    }
    sums.iter()
        .zip(sq.iter())
        .map(|(&s, &q)| {
            let mean = s / rows;
            (q / rows - mean * mean).max(0.0).sqrt()
        })
        .collect()
}

/// Population standard deviation over all entries.
pub fn pooled_std(m: &Matrix) -> f64 {
    sample_stats(m).std
}

/// Pooled population standard deviation across several matrices.
pub fn pooled_std_many<'a>(mats: impl IntoIterator<Item = &'a Matrix>) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for m in mats {
        n += m.len();
        for &v in m.as_slice() {
            sum += v;
            sq += v * v;
        }
    }
    assert!(n > 0, "pooled std of no data");
    let mean = sum / n as f64;
    (sq / n as f64 - mean * mean).max(0.0).sqrt()
}

/// Streaming accumulator for pooled moment statistics.
#[derive(Debug, Clone, Default)]
pub struct MomentAccumulator {
    n: u64,
    sum: f64,
    sum2: f64,
    sum3: f64,
    sum4: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        let v2 = v * v;
        self.sum2 += v2;
        self.sum3 += v2 * v;
        self.sum4 += v2 * v2;
    }

    pub fn extend(&mut self, values: &[f64]) {
        for &v in values {
            self.push(v);
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        assert!(self.n > 0);
        self.sum / self.n as f64
    }

    pub fn std(&self) -> f64 {
        let n = self.n as f64;
        let mean = self.mean();
        (self.sum2 / n - mean * mean).max(0.0).sqrt()
    }

    pub fn stats(&self) -> SampleStats {
        let n = self.n as f64;
        let mean = self.mean();
        // Central moments from raw moments.
        let m2 = (self.sum2 / n - mean * mean).max(0.0);
        let m3 = self.sum3 / n - 3.0 * mean * self.sum2 / n + 2.0 * mean.powi(3);
        let m4 = self.sum4 / n - 4.0 * mean * self.sum3 / n + 6.0 * mean * mean * self.sum2 / n
            - 3.0 * mean.powi(4);
        let std = m2.sqrt();
        let (skewness, excess_kurtosis) = if self.n < 2 || m2 == 0.0 {
            (None, None)
        } else {
            (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
        };
        SampleStats {
            mean,
            std,
            skewness,
            excess_kurtosis,
        }
    }
}
