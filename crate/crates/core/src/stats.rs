//! Order-stable reductions for Monte Carlo output.
//!
//! Samples are always reduced in draw-index order with Neumaier compensated
//! summation, which makes results bit-identical across worker counts.

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self { count, mean: f64::NAN, variance: f64::NAN };
        }
        let mean = sum(xs.iter().copied()) / count as f64;
        let variance = if count > 1 {
            sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (count - 1) as f64
        } else {
            0.0
        };
        Self { count, mean, variance }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance / self.count as f64).sqrt()
    }
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mx = sum(xs.iter().copied()) / n as f64;
    let my = sum(ys.iter().copied()) / n as f64;
    sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my))) / (n - 1) as f64
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}
