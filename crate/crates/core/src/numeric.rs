//! Log-domain numeric helpers: log-gamma tables, streaming log-sum-exp,
//! and simple moment accumulation.
//!
//! All evidence arithmetic runs in log space; nothing here accumulates raw
//! probabilities.

/// Natural log of the gamma function, pinned to exact zeros at 1 and 2
/// (the Lanczos approximation returns ~1e-16 there, which would leak a
/// constant offset into every log-factorial table).
pub fn ln_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    statrs::function::gamma::ln_gamma(x)
}

/// Table of `ln Γ(base + t)` for integer offsets `t = 0..=max_offset`.
///
/// Built by the recurrence `ln Γ(x + 1) = ln Γ(x) + ln x`, so only the base
/// value goes through the Lanczos approximation; increments are exact log
/// sums. For `base = 1` the table is the log-factorial table.
#[derive(Debug, Clone)]
pub struct LnGammaTable {
    vals: Vec<f64>,
}

impl LnGammaTable {
    pub fn new(base: f64, max_offset: usize) -> Self {
        assert!(base > 0.0, "log-gamma table base must be positive");
        let mut vals = Vec::with_capacity(max_offset + 1);
        let mut v = ln_gamma(base);
        vals.push(v);
        for t in 0..max_offset {
            v += (base + t as f64).ln();
            vals.push(v);
        }
        LnGammaTable { vals }
    }

    #[inline]
    pub fn at(&self, offset: usize) -> f64 {
        self.vals[offset]
    }
}

/// Streaming log-sum-exp accumulator.
///
/// Keeps a running maximum and the sum of exponentials shifted by it, so the
/// result is stable for any magnitude of inputs. `-inf` terms are ignored.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    max: f64,
    scaled_sum: f64,
    count: u64,
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled_sum: 0.0,
            count: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        self.count += 1;
        if x <= self.max {
            self.scaled_sum += (x - self.max).exp();
        } else {
            if self.max == f64::NEG_INFINITY {
                self.scaled_sum = 1.0;
            } else {
                self.scaled_sum = self.scaled_sum * (self.max - x).exp() + 1.0;
            }
            self.max = x;
        }
    }

    /// Number of finite terms absorbed so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// `log Σ exp(x_i)`, or `-inf` when no finite term was added.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled_sum.ln()
        }
    }
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

/// A Monte-Carlo style estimate: sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Two-pass sample mean and standard error of the mean.
///
/// The reduction order is fixed by the slice order, so results are
/// independent of how the values were produced (worker count, scheduling).
pub fn mean_and_stderr(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    Estimate {
        mean,
        stderr: (var / n as f64).sqrt(),
    }
}
