//! Streaming sample statistics (Welford updates, Chan et al. merges).

/// Count, mean and sum of squared deviations of a scalar sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
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

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count += other.count;
    }

    /// Merges in iteration order.
    pub fn merge_all<'a>(parts: impl IntoIterator<Item = &'a RunningStats>) -> RunningStats {
        let mut total = RunningStats::new();
        for p in parts {
            total.merge(p);
        }
        total
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Component-wise [`RunningStats`] over fixed-length vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VecStats {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VecStats {
    pub fn new(len: usize) -> Self {
        VecStats {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta * inv;
            *s += delta * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &VecStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.clone_from(other);
            return;
        }
        let n = (self.count + other.count) as f64;
        let w = other.count as f64 / n;
        let cross = self.count as f64 * w;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * w;
            self.m2[i] += other.m2[i] + delta * delta * cross;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let c = self.count as f64;
        self.m2.iter().map(|s| (s / (c - 1.0) / c).sqrt()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass_formulas() {
        let xs = [1.0, 4.0, -2.0, 3.5, 0.25, 7.0, 7.0];
        let mut s = RunningStats::new();
        xs.iter().for_each(|&x| s.push(x));
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.variance() - var).abs() < 1e-13);
        assert!((s.standard_error() - (var / n).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn merge_equals_single_pass() {
        let xs: Vec<f64> = (0..37)
            .map(|k| ((k * 7919) % 101) as f64 * 0.1 - 3.0)
            .collect();
        let mut whole = RunningStats::new();
        xs.iter().for_each(|&x| whole.push(x));
        let parts: Vec<RunningStats> = xs
            .chunks(5)
            .map(|c| {
                let mut s = RunningStats::new();
                c.iter().for_each(|&x| s.push(x));
                s
            })
            .collect();
        let merged = RunningStats::merge_all(&parts);
        assert_eq!(merged.count(), whole.count());
        assert!((merged.mean() - whole.mean()).abs() < 1e-13);
        assert!((merged.variance() - whole.variance()).abs() < 1e-12);

        let mut v = VecStats::new(2);
        let mut a = VecStats::new(2);
        let mut b = VecStats::new(2);
        for (k, &x) in xs.iter().enumerate() {
            v.push(&[x, -2.0 * x]);
            if k < 20 {
                a.push(&[x, -2.0 * x])
            } else {
                b.push(&[x, -2.0 * x])
            }
        }
        a.merge(&b);
        assert!((a.means()[1] - v.means()[1]).abs() < 1e-13);
        assert!((a.standard_errors()[0] - whole.standard_error()).abs() < 1e-13);
    }

    #[test]
    fn degenerate_samples() {
        let mut s = RunningStats::new();
        assert_eq!(s.standard_error(), 0.0);
        s.push(3.0);
        assert_eq!(s.variance(), 0.0);
        s.push(3.0);
        assert_eq!(s.standard_error(), 0.0);
    }
}
