//! Order-insensitive floating-point accumulation.
//!
//! [`ExactSum`] keeps non-overlapping partials (Shewchuk's algorithm) and
//! rounds once at the end, so the result does not depend on the order in
//! which values arrive or on how a sweep was split across workers.

use serde::Serialize;

#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    special: f64,
    count: u64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        self.count += 1;
        if !value.is_finite() {
            self.special += value;
            return;
        }
        let mut x = value;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
            self.count -= 1;
        }
        self.special += other.special;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// The correctly rounded sum.
    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let p = &self.partials;
        let Some(mut k) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[k];
        let mut lo = 0.0;
        while k > 0 {
            k -= 1;
            let x = hi;
            let y = p[k];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // round-half-even correction across the remaining partials
        if k > 0 && ((lo < 0.0 && p[k - 1] < 0.0) || (lo > 0.0 && p[k - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Sum of `values`, independent of their order.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<ExactSum>().value()
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

/// Two-pass mean and standard error, `se = sd/√N` with the `N − 1` divisor.
pub fn mean_se(values: &[f64]) -> MeanSe {
    let count = values.len();
    if count == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            count,
        };
    }
    let mean = exact_sum(values.iter().copied()) / count as f64;
    let se = if count > 1 {
        let ss = exact_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (count - 1) as f64 / count as f64).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se, count }
}
