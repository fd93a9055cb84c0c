//! Short-pulse laser heating of a thin gold film.
//!
//! The electron temperature obeys the regularized delayed heat equation
//!
//! ```text
//! c_e theta_t = eps lambda theta_xx + lambda theta_xx(t - tau) - G (theta - theta_l) + f
//! ```
//!
//! on `(0, L)` with insulated (Neumann) surfaces and `theta = theta0` on
//! `[-tau, 0]`, where `f` is the absorbed laser power density. Quantities are
//! in SI units; temperature in Kelvin.

use crate::delay_ode::{DelayOdeProblem, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::simpson;
use crate::spectral_heat::{solve, BoundaryKind, DelayHeatProblem, SpectralBasis};

/// Cells used to project the source profile onto the basis.
pub const SOURCE_X_CELLS: usize = 2048;
/// Coefficient of the Gaussian time profile of the source.
pub const PULSE_SHAPE: f64 = 2.77;
/// Absorbed fraction prefactor of the source.
pub const ABSORPTION_PREFACTOR: f64 = 0.94;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    /// Electron heat-capacity slope, J m^-3 K^-2.
    pub gamma_heat: f64,
    /// Electron heat capacity, J m^-3 K^-1.
    pub c_e: f64,
    /// Delay, s.
    pub tau: f64,
    /// Thermal conductivity, W m^-1 K^-1.
    pub lambda_th: f64,
    /// Electron-lattice coupling, W m^-3 K^-1.
    pub g: f64,
    /// Reflectivity.
    pub r_f: f64,
    /// Pulse duration, s.
    pub t_p: f64,
    /// Inverse penetration depth, m^-1.
    pub alpha_pen: f64,
    /// Fluence, J m^-2.
    pub j_fluence: f64,
    /// Film thickness, m.
    pub length: f64,
    /// Lattice temperature, K.
    pub theta_l: f64,
    /// Initial temperature, K.
    pub theta0: f64,
    /// Regularization factor of the instantaneous conduction.
    pub eps: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            gamma_heat: 67.6e-3,
            c_e: 2.1e4,
            tau: 26e-15,
            lambda_th: 315.0,
            g: 2.6e16,
            r_f: 0.94,
            t_p: 96e-15,
            alpha_pen: 1.0 / 15e-9,
            j_fluence: 150.0,
            length: 50e-9,
            theta_l: 300.0,
            theta0: 300.0,
            eps: 1.0,
        }
    }
}

impl LaserConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_heat", self.gamma_heat),
            ("c_e", self.c_e),
            ("tau", self.tau),
            ("lambda_th", self.lambda_th),
            ("G", self.g),
            ("t_p", self.t_p),
            ("alpha_pen", self.alpha_pen),
            ("J_fluence", self.j_fluence),
            ("L", self.length),
            ("theta_l", self.theta_l),
            ("theta0", self.theta0),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.r_f > 0.0 && self.r_f < 1.0) {
            return Err(Error::invalid(format!("r_f must lie in (0, 1), got {}", self.r_f)));
        }
        Ok(())
    }

    pub fn basis(&self, modes: usize) -> Result<SpectralBasis> {
        SpectralBasis::new(BoundaryKind::Neumann, self.length, modes)
    }

    /// `lambda_th / c_e`, m^2 s^-1.
    pub fn diffusivity(&self) -> f64 {
        self.lambda_th / self.c_e
    }

    fn amplitude(&self) -> f64 {
        ABSORPTION_PREFACTOR * (1.0 - self.r_f) / self.t_p * self.alpha_pen * self.j_fluence
    }

    /// Time profile `exp(-2.77 (t / t_p)^2)`.
    pub fn pulse(&self, t: f64) -> f64 {
        let s = t / self.t_p;
        (-PULSE_SHAPE * s * s).exp()
    }
}

/// Absorbed power density `0.94 (1 - r_f) / t_p alpha J exp(-alpha x - 2.77 (t / t_p)^2)`.
pub fn source(cfg: &LaserConfig, t: f64, x: f64) -> Result<f64> {
    let slack = 1e-12 * cfg.length;
    if !(x >= -slack && x <= cfg.length + slack) {
        return Err(Error::domain(format!("x = {x} outside the film [0, {}]", cfg.length)));
    }
    Ok(cfg.amplitude() * (-cfg.alpha_pen * x).exp() * cfg.pulse(t))
}

/// Simpson projections `<source(0, .), phi_n>` of the depth profile at the
/// pulse maximum, `n = 1..=modes`; the source separates in `t` and `x`.
pub fn depth_profile_coefficients(cfg: &LaserConfig, modes: usize) -> Result<Vec<f64>> {
    let basis = cfg.basis(modes)?;
    let grid = basis.x_grid(SOURCE_X_CELLS)?;
    let xs = grid.nodes();
    let profile: Vec<f64> = xs.iter().map(|&x| source(cfg, 0.0, x)).collect::<Result<_>>()?;
    (1..=modes)
        .map(|n| {
            let w: Vec<f64> = xs
                .iter()
                .zip(&profile)
                .map(|(&x, p)| p * basis.eigenfunction(n, x))
                .collect();
            simpson(&w, grid.step())
        })
        .collect()
}

/// `<source(t, .), phi_n>` by Simpson over `[0, L]`.
pub fn modal_source(cfg: &LaserConfig, n: usize, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("mode index starts at 1"));
    }
    Ok(depth_profile_coefficients(cfg, n)?[n - 1] * cfg.pulse(t))
}

/// The approximate closed forms printed alongside the model, evaluated
/// literally (constant 277 and the sign of the `t^2` term as printed). Used
/// only for the comparison report.
pub fn printed_modal_source(cfg: &LaserConfig, n: usize, t: f64) -> f64 {
    let (a, l, tp) = (cfg.alpha_pen, cfg.length, cfg.t_p);
    let e = ((-a * tp * tp * l + 277.0 * t * t) / (tp * tp)).exp();
    if n == 1 {
        0.94 * cfg.j_fluence / (tp * l.sqrt()) * e * (cfg.r_f - 1.0) * ((a * l).exp() - 1.0)
    } else {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        1.33 * a * a * l.powf(1.5) / (tp * a * a * l * l + 9.87 * nf * nf)
            * e
            * (cfg.r_f - 1.0)
            * ((a * l).exp() + sign)
    }
}

/// Per-mode delay ODE data: `a_n = -(eps lambda / c_e) mu_n - G / c_e`,
/// `b_n = -(lambda / c_e) mu_n`, forcing `(<f, phi_n> + G theta_l <1, phi_n>) / c_e`,
/// constant initial and history state `theta0`.
pub fn build_problem(cfg: &LaserConfig, modes: usize, horizon: f64, cells_per_tau: usize) -> Result<DelayHeatProblem> {
    cfg.validate()?;
    let basis = cfg.basis(modes)?;
    let grid = DelayOdeProblem::new(0.0, 0.0, cfg.tau, horizon, 0.0)?.grid(cells_per_tau)?;
    let h = grid.step();
    let n_after = grid.n_cells() - cells_per_tau;
    let depth = depth_profile_coefficients(cfg, modes)?;
    let pulse: Vec<f64> = (0..=n_after).map(|j| cfg.pulse(j as f64 * h)).collect();
    let d = cfg.diffusivity();
    let sqrt_l = cfg.length.sqrt();
    let mut p = DelayHeatProblem {
        basis,
        tau: cfg.tau,
        horizon,
        cells_per_tau,
        a: Vec::with_capacity(modes),
        b: Vec::with_capacity(modes),
        forcing: Vec::with_capacity(modes),
        boundary: vec![vec![0.0; n_after + 1]; modes],
        initial: Vec::with_capacity(modes),
        history: Vec::with_capacity(modes),
    };
    for n in 1..=modes {
        let mu = basis.eigenvalue(n);
        p.a.push(-cfg.eps * d * mu - cfg.g / cfg.c_e);
        p.b.push(-d * mu);
        let one = if n == 1 { sqrt_l } else { 0.0 };
        let lattice = cfg.g * cfg.theta_l * one;
        p.forcing
            .push(pulse.iter().map(|s| (depth[n - 1] * s + lattice) / cfg.c_e).collect());
        let state = cfg.theta0 * one;
        p.initial.push(state);
        p.history.push(vec![state; cells_per_tau + 1]);
    }
    Ok(p)
}

/// Default horizon, s.
pub const DEFAULT_HORIZON: f64 = 400e-15;
pub const DEFAULT_CELLS_PER_TAU: usize = 40;
pub const DEFAULT_MODES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct LaserRun {
    pub basis: SpectralBasis,
    pub trajectories: Vec<Trajectory>,
    /// Node times `t >= 0`.
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// `field[i][j] = theta(times[i], x[j])`.
    pub field: Vec<Vec<f64>>,
}

impl LaserRun {
    /// Mode coefficients at time index `i` (counted from `t = 0`).
    pub fn modes_at(&self, i: usize) -> Vec<f64> {
        let m = self.trajectories[0].cells_per_tau;
        self.trajectories.iter().map(|tr| tr.values[m + i]).collect()
    }

    /// Temperature at `x[j]` over time.
    pub fn trace_at(&self, j: usize) -> Vec<f64> {
        self.field.iter().map(|row| row[j]).collect()
    }

    /// Film-averaged temperature `u_1 / sqrt(L)` over time.
    pub fn mean_trace(&self) -> Vec<f64> {
        let m = self.trajectories[0].cells_per_tau;
        let s = self.basis.length.sqrt();
        self.trajectories[0].values[m..].iter().map(|u| u / s).collect()
    }

    /// Euclidean norm of modes 2..=5 (or fewer) at time index `i`.
    pub fn high_mode_amplitude(&self, i: usize) -> f64 {
        self.modes_at(i)
            .iter()
            .skip(1)
            .take(4)
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }
}

/// Solves the modal problem and synthesizes the field on `x_cells + 1`
/// uniform points of the film.
pub fn simulate(
    cfg: &LaserConfig,
    modes: usize,
    horizon: f64,
    cells_per_tau: usize,
    x_cells: usize,
) -> Result<LaserRun> {
    let p = build_problem(cfg, modes, horizon, cells_per_tau)?;
    let trajectories = solve(&p, cells_per_tau)?;
    let x = p.basis.x_grid(x_cells)?.nodes();
    let phi: Vec<Vec<f64>> = (1..=modes)
        .map(|n| x.iter().map(|&xv| p.basis.eigenfunction(n, xv)).collect())
        .collect();
    let m = cells_per_tau;
    let len = trajectories[0].values.len();
    let times: Vec<f64> = (m..len).map(|i| trajectories[0].time(i)).collect();
    let field = (m..len)
        .map(|i| {
            (0..x.len())
                .map(|j| trajectories.iter().zip(&phi).map(|(tr, ph)| tr.values[i] * ph[j]).sum())
                .collect()
        })
        .collect();
    Ok(LaserRun {
        basis: p.basis,
        trajectories,
        times,
        x,
        field,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub t: f64,
    pub value: f64,
    /// Vertex of the parabola through the maximum and its neighbours, when
    /// the maximum is interior.
    pub refined: Option<(f64, f64)>,
}

/// Grid maximum of `values` within `[window.0, window.1]` (all samples when
/// `None`); ties go to the earliest time.
pub fn find_peak(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Result<Peak> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    let inside = |t: f64| window.map_or(true, |(a, b)| t >= a && t <= b);
    let mut best: Option<usize> = None;
    for (i, (&t, &v)) in times.iter().zip(values).enumerate() {
        if inside(t) && best.map_or(true, |b| v > values[b]) {
            best = Some(i);
        }
    }
    let index = best.ok_or_else(|| Error::invalid("empty trace"))?;
    let refined = if index > 0 && index + 1 < values.len() && inside(times[index - 1]) && inside(times[index + 1]) {
        let (y0, y1, y2) = (values[index - 1], values[index], values[index + 1]);
        let h = times[index + 1] - times[index];
        let denom = y0 - 2.0 * y1 + y2;
        if denom < 0.0 {
            let s = 0.5 * (y0 - y2) / denom;
            Some((times[index] + s * h, y1 - 0.25 * (y0 - y2) * s))
        } else {
            None
        }
    } else {
        None
    };
    Ok(Peak {
        index,
        t: times[index],
        value: values[index],
        refined,
    })
}
