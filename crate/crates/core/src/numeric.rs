//! Small numeric helpers shared by the evaluation loops.

/// Neumaier compensated accumulator.
///
/// The sums over users run to 10^5 terms of mixed magnitude; compensation keeps
/// the result independent of summation order to well below 1e-10.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        acc.extend(iter);
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut values = vec![1e16, 1.0, -1e16];
        values.extend(std::iter::repeat_n(1e-3, 1000));
        assert!((compensated_sum(values.iter().copied()) - 2.0).abs() < 1e-15);
        let naive: f64 = values.iter().sum();
        assert!((naive - 2.0).abs() > 0.5);
    }

    #[test]
    fn order_independence() {
        let values: Vec<f64> = (1..=100_000).map(|i| 1.0 / i as f64).collect();
        let forward = compensated_sum(values.iter().copied());
        let backward = compensated_sum(values.iter().rev().copied());
        assert!((forward - backward).abs() < 1e-13);
    }

    #[test]
    fn positive_part_clamps() {
        assert_eq!(positive_part(-2.0), 0.0);
        assert_eq!(positive_part(3.5), 3.5);
        assert_eq!(positive_part(0.0), 0.0);
    }
}
