//! Small running-moment accumulators used by the Monte-Carlo checks.

/// Welford accumulator for a real sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
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
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

/// Variance of a complex sample, `E|z - E z|^2`, with the unbiased divisor.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexStats {
    re: RunningStats,
    im: RunningStats,
}

impl ComplexStats {
    pub fn push(&mut self, z: num_complex::Complex64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn mean(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.mean(), self.im.mean())
    }

    pub fn variance(&self) -> f64 {
        self.re.variance() + self.im.variance()
    }

    pub fn real(&self) -> &RunningStats {
        &self.re
    }
}

/// `10 log10(x)`.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Inverse of [`db`].
pub fn from_db(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 0.25];
        let s: RunningStats = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean() - mean).abs() < 1e-12);
        assert!((s.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn db_round_trip() {
        assert!((from_db(db(36.06)) - 36.06).abs() < 1e-12);
        assert!((db(10.0) - 10.0).abs() < 1e-12);
    }
}
