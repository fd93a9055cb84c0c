//! Scalar linear delay ODE
//!
//! ```text
//! u'(t) = a u(t) + b u(t - tau) + f(t),   t in (0, T]
//! u(0)  = u0,   u(t) = phi(t) on [-tau, 0)
//! ```
//!
//! solved two independent ways: the closed-form representation through the
//! fundamental solution [`DelayKernel`], and the method of steps (one scalar
//! Duhamel formula per delay interval). Each serves as the other's oracle.
//!
//! Both solvers work on a uniform grid with an even number of cells per
//! delay. The history is used on the closed interval `[-tau, 0]` inside the
//! integrals; the trajectory reports `u0` at `t = 0` and does not require
//! `phi(0) = u0`.

use crate::delayed_exp::DelayKernel;
use crate::error::{Error, Result};
use crate::numerics::{integrate_piece, integrate_prefix, UniformGrid};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub struct DelayOdeProblem {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub horizon: f64,
    pub u0: f64,
    pub history: Signal,
    /// Treated as zero beyond `horizon`.
    pub forcing: Signal,
}

impl DelayOdeProblem {
    /// Problem with zero history and zero forcing.
    pub fn new(a: f64, b: f64, tau: f64, horizon: f64, u0: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("delay must be positive, got {tau}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if !(a.is_finite() && b.is_finite() && u0.is_finite()) {
            return Err(Error::invalid("rates and initial value must be finite"));
        }
        Ok(Self {
            a,
            b,
            tau,
            horizon,
            u0,
            history: Signal::zero(),
            forcing: Signal::zero(),
        })
    }

    pub fn with_history(mut self, history: Signal) -> Self {
        self.history = history;
        self
    }

    pub fn with_forcing(mut self, forcing: Signal) -> Self {
        self.forcing = forcing;
        self
    }

    /// Number of delay intervals covering the horizon, `ceil(T / tau)`.
    pub fn n_intervals(&self) -> usize {
        ((self.horizon / self.tau) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    /// Solver grid on `[-tau, T']`, `T'` the first node at or after `T`.
    pub fn grid(&self, cells_per_tau: usize) -> Result<UniformGrid> {
        check_cells_per_tau(cells_per_tau)?;
        let h = self.tau / cells_per_tau as f64;
        let after = ((self.horizon / h) - 1e-9).ceil().max(1.0) as usize;
        UniformGrid::from_step(-self.tau, h, cells_per_tau + after)
    }

    fn history_samples(&self, cells_per_tau: usize, h: f64) -> Result<Vec<f64>> {
        let times = (0..=cells_per_tau).map(|j| {
            if j == cells_per_tau {
                0.0
            } else {
                -self.tau + j as f64 * h
            }
        });
        self.history.sample_at(times)
    }

    fn forcing_samples(&self, n_after: usize, h: f64) -> Result<Vec<f64>> {
        let cutoff = self.horizon * (1.0 + 1e-12);
        (0..=n_after)
            .map(|j| {
                let t = j as f64 * h;
                if t > cutoff {
                    Ok(0.0)
                } else {
                    self.forcing.eval(t)
                }
            })
            .collect()
    }
}

fn check_cells_per_tau(cells_per_tau: usize) -> Result<()> {
    if cells_per_tau < 2 || cells_per_tau % 2 != 0 {
        return Err(Error::invalid(format!(
            "cells per delay must be even and >= 2, got {cells_per_tau}"
        )));
    }
    Ok(())
}

/// Solution samples on a grid starting at `-tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: UniformGrid,
    pub cells_per_tau: usize,
    pub values: Vec<f64>,
}

impl Trajectory {
    /// Index of the node `t = 0`.
    pub fn zero_index(&self) -> usize {
        self.cells_per_tau
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    /// Node times, with `t = 0` and the knots `k tau` exact multiples of `h`.
    pub fn times(&self) -> Vec<f64> {
        let h = self.step();
        let m = self.cells_per_tau as f64;
        (0..self.values.len()).map(|i| (i as f64 - m) * h).collect()
    }

    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.cells_per_tau as f64) * self.step()
    }

    /// Values on `[0, T']`.
    pub fn forward(&self) -> &[f64] {
        &self.values[self.cells_per_tau..]
    }

    /// Value at a node time.
    pub fn at(&self, t: f64) -> Option<f64> {
        let pos = t / self.step() + self.cells_per_tau as f64;
        let i = pos.round();
        if i < 0.0 || (pos - i).abs() > 1e-6 || i as usize >= self.values.len() {
            return None;
        }
        Some(self.values[i as usize])
    }
}

fn validate_out_grid(p: &DelayOdeProblem, grid: &UniformGrid) -> Result<usize> {
    let h = grid.step();
    let ratio = p.tau / h;
    let m = ratio.round();
    if (ratio - m).abs() > 1e-9 * ratio || m < 2.0 || (m as usize) % 2 != 0 {
        return Err(Error::invalid(format!(
            "grid misalignment: step {h} does not split the delay {} into an even number of cells",
            p.tau
        )));
    }
    if (grid.start() + p.tau).abs() > 1e-9 * h {
        return Err(Error::invalid(format!(
            "grid misalignment: output grid must start at -tau = {}, starts at {}",
            -p.tau,
            grid.start()
        )));
    }
    let m = m as usize;
    if grid.n_cells() <= m {
        return Err(Error::invalid("output grid must extend beyond t = 0"));
    }
    Ok(m)
}

/// Integral of `values` split into smooth pieces at every index congruent
/// to `phase` modulo `period`.
fn piecewise_integral(values: &[f64], h: f64, period: usize, phase: usize) -> f64 {
    let last = values.len() - 1;
    let mut total = 0.0;
    let mut start = 0;
    let mut brk = phase % period;
    if brk == 0 {
        brk = period;
    }
    while brk < last {
        total += integrate_piece(&values[start..=brk], h);
        start = brk;
        brk += period;
    }
    total + integrate_piece(&values[start..], h)
}

/// Closed-form solution
///
/// ```text
/// u(t) = K(t) u0 + b int_{-tau}^{0} K(t - tau - s) phi(s) ds + int_0^t K(t - s) f(s) ds
/// ```
///
/// with `K(t) = e^{a t} exp_tau(b e^{-a tau}, t - tau)`. The integrals are
/// composite Simpson over the smooth pieces between the kernel's knots,
/// which are grid nodes.
pub fn solve_closed_form(p: &DelayOdeProblem, out_grid: &UniformGrid) -> Result<Trajectory> {
    let m = validate_out_grid(p, out_grid)?;
    let h = p.tau / m as f64;
    let n = out_grid.n_cells() - m;
    let hist = p.history_samples(m, h)?;
    let forcing = p.forcing_samples(n, h)?;
    let kernel = DelayKernel::new(p.a, p.b, p.tau)?;
    let k: Vec<f64> = (0..=n).map(|l| kernel.eval_lag(l, m, h)).collect();

    let mut values = Vec::with_capacity(m + n + 1);
    values.extend_from_slice(&hist[..m]);
    values.push(p.u0);
    let mut buf = Vec::with_capacity(n + 1);
    for i in 1..=n {
        let mut u = k[i] * p.u0;
        if p.b != 0.0 {
            let upper = i.min(m);
            buf.clear();
            buf.extend((0..=upper).map(|j| k[i - j] * hist[j]));
            u += p.b * piecewise_integral(&buf, h, m, i % m);
        }
        buf.clear();
        buf.extend((0..=i).map(|j| k[i - j] * forcing[j]));
        u += piecewise_integral(&buf, h, m, i % m);
        values.push(u);
    }
    Ok(Trajectory {
        grid: *out_grid,
        cells_per_tau: m,
        values,
    })
}

/// One method-of-steps interval: given `u` at the interval start, the
/// delayed samples `u(t - tau)` and the forcing on the interval's nodes,
/// returns `u` on those nodes via
/// `u(t) = e^{a (t - t_k)} u(t_k) + int_{t_k}^{t} e^{a (t - s)} (b u(s - tau) + f(s)) ds`.
///
/// Prefix integrals use Simpson with one trapezoid cell on odd prefixes.
pub fn step_segment(a: f64, b: f64, h: f64, u_start: f64, delayed: &[f64], forcing: &[f64]) -> Vec<f64> {
    let len = delayed.len().min(forcing.len());
    let g: Vec<f64> = delayed[..len]
        .iter()
        .zip(&forcing[..len])
        .map(|(d, f)| b * d + f)
        .collect();
    let decay: Vec<f64> = (0..len).map(|d| (a * d as f64 * h).exp()).collect();
    let mut out = Vec::with_capacity(len);
    out.push(u_start);
    let mut buf = Vec::with_capacity(len);
    for j in 1..len {
        buf.clear();
        buf.extend((0..=j).map(|l| decay[j - l] * g[l]));
        out.push(decay[j] * u_start + integrate_prefix(&buf, h));
    }
    out
}

/// Method of steps on the grid `p.grid(cells_per_tau)`.
pub fn solve_step_method(p: &DelayOdeProblem, cells_per_tau: usize) -> Result<Trajectory> {
    let grid = p.grid(cells_per_tau)?;
    let m = cells_per_tau;
    let h = p.tau / m as f64;
    let n = grid.n_cells() - m;
    let hist = p.history_samples(m, h)?;
    let forcing = p.forcing_samples(n, h)?;

    let mut values = Vec::with_capacity(m + n + 1);
    values.extend_from_slice(&hist[..m]);
    values.push(p.u0);
    let mut start = 0;
    while start < n {
        let len = (n - start).min(m) + 1;
        let delayed: Vec<f64> = if start == 0 {
            hist[..len].to_vec()
        } else {
            values[start..start + len].to_vec()
        };
        let seg = step_segment(p.a, p.b, h, values[m + start], &delayed, &forcing[start..start + len]);
        values.extend_from_slice(&seg[1..]);
        start += len - 1;
    }
    Ok(Trajectory {
        grid,
        cells_per_tau: m,
        values,
    })
}
