//! Natural-log-domain weights and a streaming log-sum-exp accumulator.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// A nonnegative weight stored as its natural logarithm. Zero weight is `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `ln(e^a + e^b)`.
    pub fn add(self, other: LogWeight) -> LogWeight {
        LogWeight(log_add_exp(self.0, other.0))
    }
}

impl From<f64> for LogWeight {
    fn from(v: f64) -> Self {
        LogWeight(v)
    }
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Streaming log-sum-exp. Terms are folded strictly left to right, keeping a
/// running maximum and a rescaled linear-domain sum, so the result depends
/// only on the order of `push` calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
    terms: u64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
            terms: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.terms += 1;
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    /// Folds another accumulator in as if its terms had been pushed here.
    /// Not bitwise identical to pushing them one by one, but deterministic.
    pub fn merge(&mut self, other: &LogSumExp) {
        self.terms += other.terms;
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    pub fn terms(&self) -> u64 {
        self.terms
    }

    pub fn value(&self) -> LogWeight {
        if self.max == f64::NEG_INFINITY {
            LogWeight::ZERO
        } else {
            LogWeight(self.max + self.scaled.ln())
        }
    }
}

impl Extend<f64> for LogSumExp {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

impl FromIterator<f64> for LogSumExp {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = LogSumExp::new();
        acc.extend(iter);
        acc
    }
}

/// `ln C(n, k)` through the log-gamma function. The edge cases `k = 0` and
/// `k = n` are exact zeros.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}
