//! The delayed exponential `exp_tau(b, t)`: a piecewise polynomial that is
//! `0` for `t < -tau`, `1` on `[-tau, 0]`, and on `[k tau, (k+1) tau)`
//!
//! ```text
//! 1 + sum_{j=1}^{k+1} b^j (t - (j-1) tau)^j / j!
//! ```
//!
//! It solves `x'(t) = b x(t - tau)` with unit history. [`DelayKernel`] folds
//! an instantaneous rate `a` into it and is the fundamental solution of
//! `u' = a u + b u(t - tau)`.

use crate::error::{Error, Result};

/// Above this magnitude of `b (t - (j-1) tau)` terms are formed in log space.
const LOG_SPACE_THRESHOLD: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedExp {
    b: f64,
    tau: f64,
}

impl DelayedExp {
    pub fn new(b: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("delay must be positive, got {tau}")));
        }
        if !b.is_finite() {
            return Err(Error::invalid(format!("rate must be finite, got {b}")));
        }
        Ok(Self { b, tau })
    }

    pub fn rate(&self) -> f64 {
        self.b
    }

    pub fn delay(&self) -> f64 {
        self.tau
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < -self.tau {
            return 0.0;
        }
        let k = (t / self.tau).floor() as i64;
        self.eval_segment_polynomial(k, t)
    }

    /// Number of polynomial terms beyond the constant, `floor(t / tau) + 1`.
    pub fn eval_segment_count(&self, t: f64) -> Result<usize> {
        if t < -self.tau {
            return Err(Error::domain(format!(
                "segment count undefined for t = {t} < -tau = {}",
                -self.tau
            )));
        }
        Ok(((t / self.tau).floor() as i64 + 1).max(0) as usize)
    }

    /// Polynomial of segment `k` (valid on `[k tau, (k+1) tau)`) evaluated
    /// at an arbitrary `t`.
    pub fn eval_segment_polynomial(&self, k: i64, t: f64) -> f64 {
        let mut sum = 1.0;
        let mut ln_fact = 0.0;
        for j in 1..=(k + 1).max(0) as usize {
            ln_fact += (j as f64).ln();
            let base = t - (j - 1) as f64 * self.tau;
            sum += power_term(self.b * base, j, ln_fact);
        }
        sum
    }
}

/// `x^j / j!` given `ln j!`.
fn power_term(x: f64, j: usize, ln_fact: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.abs() > LOG_SPACE_THRESHOLD || j > 150 {
        let sign = if x < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
        sign * (j as f64 * x.abs().ln() - ln_fact).exp()
    } else {
        x.powi(j as i32) / ln_fact.exp()
    }
}

/// Fundamental solution `K(t) = e^{a t} exp_tau(b e^{-a tau}, t - tau)` of
/// `u' = a u + b u(t - tau)`, i.e. `K = 0` for `t < 0`, `K(0) = 1`.
///
/// Evaluated term by term as `sum_j b^j (t - j tau)^j e^{a (t - j tau)} / j!`,
/// which keeps every term bounded when `a` is large and negative instead of
/// multiplying a huge polynomial by a tiny exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayKernel {
    a: f64,
    b: f64,
    tau: f64,
}

impl DelayKernel {
    pub fn new(a: f64, b: f64, tau: f64) -> Result<Self> {
        DelayedExp::new(b, tau)?;
        if !a.is_finite() {
            return Err(Error::invalid(format!("rate must be finite, got {a}")));
        }
        Ok(Self { a, b, tau })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let k = (t / self.tau).floor() as usize;
        self.sum_terms((0..=k).map(|j| t - j as f64 * self.tau))
    }

    /// `K(m h)` on a grid with `cells_per_tau` cells of width `h` per delay;
    /// segment boundaries come from integer arithmetic.
    pub fn eval_lag(&self, m: usize, cells_per_tau: usize, h: f64) -> f64 {
        let k = m / cells_per_tau;
        self.sum_terms((0..=k).map(|j| (m - j * cells_per_tau) as f64 * h))
    }

    fn sum_terms(&self, shifts: impl Iterator<Item = f64>) -> f64 {
        let mut sum = 0.0;
        let mut ln_fact = 0.0;
        for (j, s) in shifts.enumerate() {
            if j > 0 {
                ln_fact += (j as f64).ln();
            }
            if j == 0 {
                sum += (self.a * s).exp();
                continue;
            }
            let x = self.b * s;
            if x == 0.0 {
                continue;
            }
            let sign = if x < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
            sum += sign * (j as f64 * x.abs().ln() + self.a * s - ln_fact).exp();
        }
        sum
    }
}
