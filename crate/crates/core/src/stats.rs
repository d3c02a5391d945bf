//! Cross-replication summary statistics.

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Independent replicate values of one quantity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Replicates(Vec<f64>);

impl Replicates {
    pub fn push(&mut self, value: f64) {
        self.0.push(value);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `None` with fewer than two samples.
    pub fn estimate(&self) -> Option<Estimate> {
        let n = self.0.len();
        if n < 2 {
            return None;
        }
        let mean = self.0.iter().sum::<f64>() / n as f64;
        let var = self.0.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some(Estimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        })
    }
}

impl FromIterator<f64> for Replicates {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Replicates(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let r: Replicates = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        let e = r.estimate().unwrap();
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(e.covers(2.5 + e.std_error, 1.0));
        assert!(!e.covers(2.5 + 2.0 * e.std_error, 1.5));
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(Replicates::default().estimate(), None);
        assert_eq!([1.0].into_iter().collect::<Replicates>().estimate(), None);
    }
}
