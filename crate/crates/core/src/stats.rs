//! Small counting-statistics helpers.

/// A binomial proportion k/n with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        Proportion { successes, trials }
    }

    /// None when there were no trials.
    pub fn value(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.successes as f64 / self.trials as f64)
    }

    /// Binomial standard error √(p(1−p)/n). With p at 0 or 1 this uses the
    /// rule-of-three style bound 1/n instead of reporting zero.
    pub fn stderr(&self) -> Option<f64> {
        let p = self.value()?;
        let n = self.trials as f64;
        let se = (p * (1.0 - p) / n).sqrt();
        Some(if se > 0.0 { se } else { 1.0 / n })
    }
}

/// Mean and standard error of the mean of a sample.
pub fn mean_and_stderr(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Some((mean, f64::NAN));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}
