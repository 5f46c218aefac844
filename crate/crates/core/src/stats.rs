//! Small summary-statistics helpers shared by the Monte Carlo routines.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
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

pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<KahanSum>().value()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two points).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: KahanSum = xs.iter().map(|x| (x - m) * (x - m)).collect();
    ss.value() / (xs.len() - 1) as f64
}

/// Mean and batch-means standard error of a correlated series.
///
/// Uses `floor(sqrt(N))` contiguous batches; for independent draws this
/// reduces to roughly the ordinary standard error.
pub fn batch_means(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(xs);
    if n < 2 {
        return (m, 0.0);
    }
    let batch = ((n as f64).sqrt().floor() as usize).max(1);
    let count = n / batch;
    if count < 2 {
        return (m, (variance(xs) / n as f64).sqrt());
    }
    let means: Vec<f64> = (0..count)
        .map(|b| mean(&xs[b * batch..(b + 1) * batch]))
        .collect();
    // variance of the overall mean = var(batch means) / count
    let se = (variance(&means) / count as f64).sqrt();
    (m, se)
}

/// Effective sample size implied by the batch-means variance estimate.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (_, se) = batch_means(xs);
    let v = variance(xs);
    if se <= 0.0 || v <= 0.0 {
        return n;
    }
    (v / (se * se)).min(n)
}

/// One-sample Kolmogorov-Smirnov statistic of `xs` against the uniform
/// distribution on `[lo, hi]`.
pub fn ks_uniform(xs: &[f64], lo: f64, hi: f64) -> f64 {
    let mut u: Vec<f64> = xs.iter().map(|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
    u.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| {
            let above = (i as f64 + 1.0) / n - v;
            let below = v - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// `log(sum(exp(xs)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: KahanSum = xs.iter().map(|x| (x - m).exp()).collect();
    m + s.value().ln()
}
