/// Streaming mean and variance (Welford), mergeable across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn merge(self, other: RunningStats) -> RunningStats {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        RunningStats {
            count,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * w,
        }
    }

    /// `(mean, standard error of the mean)`.
    pub(crate) fn mean_and_stderr(&self) -> (f64, f64) {
        if self.count < 2 {
            return (self.mean, 0.0);
        }
        let n = self.count as f64;
        (self.mean, (self.m2 / (n - 1.0) / n).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 + 1e6).collect();
        let mut all = RunningStats::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (RunningStats::default(), RunningStats::default());
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(b);
        let (m1, s1) = all.mean_and_stderr();
        let (m2, s2) = merged.mean_and_stderr();
        assert!((m1 - m2).abs() < 1e-9 && (s1 - s2).abs() < 1e-12);
    }
}
