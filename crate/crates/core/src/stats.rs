//! Small summary-statistics helpers shared by the kernels and diagnostics.

/// A Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateWithSE {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl EstimateWithSE {
    pub fn new(value: f64, std_error: f64, n_samples: usize) -> Self {
        EstimateWithSE {
            value,
            std_error: std_error.max(0.0),
            n_samples: n_samples.max(1),
        }
    }

    /// Sample mean and `s/√n` of i.i.d. draws.
    pub fn from_iid(samples: &[f64]) -> Self {
        let m = Moments::from_slice(samples);
        EstimateWithSE::new(m.mean(), m.std_error(), samples.len())
    }

    /// `value ≤ bound + k·SE`.
    pub fn at_most(&self, bound: f64, k: f64) -> bool {
        self.value <= bound + k * self.std_error
    }

    /// `value ≥ bound - k·SE`.
    pub fn at_least(&self, bound: f64, k: f64) -> bool {
        self.value >= bound - k * self.std_error
    }

    /// `|value - target| ≤ k·SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    /// Combined SE of a difference or sum of independent estimates.
    pub fn combined_se(&self, other: &EstimateWithSE) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Batch-means estimator for the mean of a correlated series.
#[derive(Clone, Debug)]
pub struct BatchMeans {
    batch_size: usize,
    current: Moments,
    batches: Moments,
}

impl BatchMeans {
    pub fn new(batch_size: usize) -> Self {
        BatchMeans {
            batch_size: batch_size.max(1),
            current: Moments::default(),
            batches: Moments::default(),
        }
    }

    /// Batch size giving roughly `n_batches` batches over `n` observations.
    pub fn for_length(n: usize, n_batches: usize) -> Self {
        Self::new((n / n_batches.max(1)).max(1))
    }

    pub fn push(&mut self, x: f64) {
        self.current.push(x);
        if self.current.count() == self.batch_size {
            self.batches.push(self.current.mean());
            self.current = Moments::default();
        }
    }

    /// Mean over complete batches with the batch-means standard error.
    pub fn estimate(&self) -> Option<EstimateWithSE> {
        if self.batches.count() < 2 {
            return None;
        }
        Some(EstimateWithSE::new(
            self.batches.mean(),
            self.batches.std_error(),
            self.batches.count() * self.batch_size,
        ))
    }
}
