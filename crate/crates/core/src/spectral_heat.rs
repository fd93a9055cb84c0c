//! Spectral solver for the 1D heat equation with a constant delay
//!
//! ```text
//! u_t = c_A u_xx + c0 u + c_At u_xx(t - tau) + c0t u(t - tau) + f
//! ```
//!
//! on `(0, L)` with Dirichlet or Neumann conditions. Expanding in the
//! eigenfunctions of `-d^2/dx^2` turns the equation into independent scalar
//! delay ODEs
//!
//! ```text
//! u_n' = a_n u_n + b_n u_n(t - tau) + <f, phi_n> - a_n <D gamma, phi_n>
//! ```
//!
//! with `a_n = -c_A mu_n + c0` and `b_n = -c_At mu_n + c0t`; each is solved
//! in closed form and the field is resynthesized from the modal series.
//! Inhomogeneous Dirichlet data enter through the linear lift `D gamma`.

use std::f64::consts::PI;

use crate::delay_ode::{solve_closed_form, DelayOdeProblem, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{simpson, UniformGrid};
use crate::signal::{SampledFn, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Eigenpairs `(mu_n, phi_n)`, `n = 1..=modes`, of `-d^2/dx^2` on `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBasis {
    pub kind: BoundaryKind,
    pub length: f64,
    pub modes: usize,
}

impl SpectralBasis {
    pub fn new(kind: BoundaryKind, length: f64, modes: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid(format!("domain length must be positive, got {length}")));
        }
        if modes == 0 {
            return Err(Error::invalid("basis needs at least one mode"));
        }
        Ok(Self { kind, length, modes })
    }

    /// Spatial frequency `k_n` with `mu_n = k_n^2`.
    fn wavenumber(&self, n: usize) -> f64 {
        let j = match self.kind {
            BoundaryKind::Dirichlet => n,
            BoundaryKind::Neumann => n - 1,
        };
        j as f64 * PI / self.length
    }

    /// `mu_n`, 1-based.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        let k = self.wavenumber(n);
        k * k
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.modes).map(|n| self.eigenvalue(n)).collect()
    }

    /// `phi_n(x)`, 1-based.
    pub fn eigenfunction(&self, n: usize, x: f64) -> f64 {
        let norm = (2.0 / self.length).sqrt();
        match self.kind {
            BoundaryKind::Dirichlet => norm * (self.wavenumber(n) * x).sin(),
            BoundaryKind::Neumann if n == 1 => 1.0 / self.length.sqrt(),
            BoundaryKind::Neumann => norm * (self.wavenumber(n) * x).cos(),
        }
    }

    /// Uniform grid on `[0, L]` suitable for projection.
    pub fn x_grid(&self, n_cells: usize) -> Result<UniformGrid> {
        UniformGrid::new(0.0, self.length, n_cells)
    }
}

/// Modal coefficients `c_n = int_0^L field phi_n dx` by Simpson.
pub fn project(samples: &[f64], x_grid: &UniformGrid, basis: &SpectralBasis) -> Result<Vec<f64>> {
    let tol = 1e-9 * basis.length;
    if x_grid.start().abs() > tol || (x_grid.end() - basis.length).abs() > tol {
        return Err(Error::invalid(format!(
            "projection grid [{}, {}] does not span [0, {}]",
            x_grid.start(),
            x_grid.end(),
            basis.length
        )));
    }
    if samples.len() != x_grid.len() {
        return Err(Error::invalid(format!(
            "{} samples for a grid of {} nodes",
            samples.len(),
            x_grid.len()
        )));
    }
    let xs = x_grid.nodes();
    let h = x_grid.step();
    let mut buf = vec![0.0; xs.len()];
    (1..=basis.modes)
        .map(|n| {
            for ((b, &x), &v) in buf.iter_mut().zip(&xs).zip(samples) {
                *b = v * basis.eigenfunction(n, x);
            }
            simpson(&buf, h)
        })
        .collect()
}

/// A field at one time on a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

/// Pointwise modal sum `sum_n c_n phi_n(x)`; the snapshot time is left at 0.
pub fn synthesize(coeffs: &[f64], basis: &SpectralBasis, x_nodes: &[f64]) -> FieldSnapshot {
    let values = x_nodes
        .iter()
        .map(|&x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * basis.eigenfunction(i + 1, x))
                .sum()
        })
        .collect();
    FieldSnapshot {
        t: 0.0,
        x: x_nodes.to_vec(),
        values,
    }
}

fn lift_cells(basis: &SpectralBasis) -> usize {
    (64 * basis.modes).max(2048)
}

/// Modal coefficients of the lift `D gamma(x) = g_l (1 - x/L) + g_r x/L`.
pub fn dirichlet_lift(gamma_left: f64, gamma_right: f64, basis: &SpectralBasis) -> Result<Vec<f64>> {
    if basis.kind != BoundaryKind::Dirichlet {
        return Err(Error::Unsupported("the Dirichlet lift needs a Dirichlet basis".into()));
    }
    let grid = basis.x_grid(lift_cells(basis))?;
    let l = basis.length;
    let samples: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| gamma_left * (1.0 - x / l) + gamma_right * x / l)
        .collect();
    project(&samples, &grid, basis)
}

/// Per-mode delay ODE data for the delayed heat equation.
///
/// Time samples live on the grid `t_j = j * tau / cells_per_tau`; forcing and
/// boundary samples start at `t = 0`, histories cover `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayHeatProblem {
    pub basis: SpectralBasis,
    pub tau: f64,
    pub horizon: f64,
    pub cells_per_tau: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub forcing: Vec<Vec<f64>>,
    /// `-a_n <D gamma(t), phi_n>`; all zero without boundary data.
    pub boundary: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub history: Vec<Vec<f64>>,
}

impl DelayHeatProblem {
    pub fn step(&self) -> f64 {
        self.tau / self.cells_per_tau as f64
    }

    fn check(&self) -> Result<()> {
        let n = self.basis.modes;
        let lens = [
            self.a.len(),
            self.b.len(),
            self.forcing.len(),
            self.boundary.len(),
            self.initial.len(),
            self.history.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::invalid(format!(
                "per-mode arrays must all have length {n}, got {lens:?}"
            )));
        }
        Ok(())
    }

    /// The scalar delay ODE of mode `n` (1-based), forcing `f_n + g_n`.
    pub fn mode_problem(&self, n: usize) -> Result<DelayOdeProblem> {
        self.check()?;
        let i = n - 1;
        let h = self.step();
        let f = &self.forcing[i];
        let g = &self.boundary[i];
        if f.len() != g.len() || f.len() < 2 {
            return Err(Error::invalid(format!(
                "mode {n}: forcing and boundary samples differ in length"
            )));
        }
        let forcing: Vec<f64> = f.iter().zip(g).map(|(x, y)| x + y).collect();
        let fgrid = UniformGrid::from_step(0.0, h, forcing.len() - 1)?;
        let hist = &self.history[i];
        if hist.len() != self.cells_per_tau + 1 {
            return Err(Error::invalid(format!(
                "mode {n}: history needs {} samples",
                self.cells_per_tau + 1
            )));
        }
        let hgrid = UniformGrid::new(-self.tau, 0.0, self.cells_per_tau)?;
        // The samples may run past the horizon to the end of the last step;
        // the scalar problem covers all of them.
        let sampled_end = (forcing.len() - 1) as f64 * h;
        Ok(DelayOdeProblem::new(
            self.a[i],
            self.b[i],
            self.tau,
            sampled_end.max(self.horizon),
            self.initial[i],
        )?
        .with_forcing(Signal::Table(SampledFn::new(fgrid, forcing)?))
        .with_history(Signal::Table(SampledFn::new(hgrid, hist.clone())?)))
    }
}

fn solve_mode(p: &DelayHeatProblem, n: usize, cells_per_tau: usize) -> Result<Trajectory> {
    let ode = p.mode_problem(n)?;
    solve_closed_form(&ode, &ode.grid(cells_per_tau)?)
}

/// Solves every mode with the closed-form delay ODE solver. Modes are
/// independent; the output order follows the mode index.
pub fn solve(p: &DelayHeatProblem, cells_per_tau: usize) -> Result<Vec<Trajectory>> {
    p.check()?;
    let modes = 1..=p.basis.modes;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        modes.into_par_iter().map(|n| solve_mode(p, n, cells_per_tau)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        modes.map(|n| solve_mode(p, n, cells_per_tau)).collect()
    }
}

/// Field at node `i` of the mode trajectories.
pub fn field_at(trajectories: &[Trajectory], basis: &SpectralBasis, i: usize, x_nodes: &[f64]) -> FieldSnapshot {
    let coeffs: Vec<f64> = trajectories.iter().map(|tr| tr.values[i]).collect();
    let mut snap = synthesize(&coeffs, basis, x_nodes);
    snap.t = trajectories.first().map_or(0.0, |tr| tr.time(i));
    snap
}

/// Constant PDE coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients {
    /// Instantaneous diffusivity, must be positive.
    pub c_a: f64,
    /// Instantaneous reaction rate.
    pub c0: f64,
    /// Delayed diffusivity.
    pub c_a_delayed: f64,
    /// Delayed reaction rate.
    pub c0_delayed: f64,
}

impl PdeCoefficients {
    pub fn modal_rates(&self, mu: f64) -> (f64, f64) {
        (-self.c_a * mu + self.c0, -self.c_a_delayed * mu + self.c0_delayed)
    }
}

type Field1 = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type Field2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Initial, history, forcing and boundary data. Unset entries are zero.
#[derive(Default)]
pub struct PdeData {
    initial: Option<Field1>,
    history: Option<Field2>,
    forcing: Option<Field2>,
    boundary: Option<Box<dyn Fn(f64) -> (f64, f64) + Send + Sync>>,
}

impl PdeData {
    pub fn new() -> Self {
        Self::default()
    }

    /// `u(0, x)`.
    pub fn initial(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Some(Box::new(f));
        self
    }

    /// `u(t, x)` for `t` in `[-tau, 0]`.
    pub fn history(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.history = Some(Box::new(f));
        self
    }

    /// `f(t, x)`.
    pub fn forcing(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.forcing = Some(Box::new(f));
        self
    }

    /// Dirichlet values `(gamma_left(t), gamma_right(t))`.
    pub fn boundary(mut self, f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        self.boundary = Some(Box::new(f));
        self
    }
}

/// Sampling resolution used when projecting data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub cells_per_tau: usize,
    pub x_cells: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            cells_per_tau: 40,
            x_cells: 512,
        }
    }
}

/// Builds the modal problem by projecting the data slice by slice in time.
pub fn assemble_from_pde(
    coeffs: PdeCoefficients,
    basis: SpectralBasis,
    tau: f64,
    horizon: f64,
    data: &PdeData,
    sampling: Sampling,
) -> Result<DelayHeatProblem> {
    if !(coeffs.c_a > 0.0) {
        return Err(Error::Ellipticity(coeffs.c_a));
    }
    let m = sampling.cells_per_tau;
    // Validates tau, horizon and the cell count.
    let tgrid = DelayOdeProblem::new(0.0, 0.0, tau, horizon, 0.0)?.grid(m)?;
    let h = tgrid.step();
    let n_after = tgrid.n_cells() - m;
    let xgrid = basis.x_grid(sampling.x_cells)?;
    let xs = xgrid.nodes();
    let n_modes = basis.modes;
    let rates: Vec<(f64, f64)> = basis
        .eigenvalues()
        .into_iter()
        .map(|mu| coeffs.modal_rates(mu))
        .collect();

    let project_fn = |g: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
        let samples: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        project(&samples, &xgrid, &basis)
    };

    let initial = match &data.initial {
        Some(f) => project_fn(f.as_ref())?,
        None => vec![0.0; n_modes],
    };

    let mut history = vec![Vec::with_capacity(m + 1); n_modes];
    for j in 0..=m {
        let t = if j == m { 0.0 } else { -tau + j as f64 * h };
        let c = match &data.history {
            Some(f) => project_fn(&|x| f(t, x))?,
            None => vec![0.0; n_modes],
        };
        for (hist, v) in history.iter_mut().zip(c) {
            hist.push(v);
        }
    }

    let mut forcing = vec![Vec::with_capacity(n_after + 1); n_modes];
    let mut boundary = vec![Vec::with_capacity(n_after + 1); n_modes];
    let lifts = match &data.boundary {
        Some(_) => Some((dirichlet_lift(1.0, 0.0, &basis)?, dirichlet_lift(0.0, 1.0, &basis)?)),
        None => None,
    };
    for j in 0..=n_after {
        let t = j as f64 * h;
        let c = match &data.forcing {
            Some(f) => project_fn(&|x| f(t, x))?,
            None => vec![0.0; n_modes],
        };
        for (fc, v) in forcing.iter_mut().zip(c) {
            fc.push(v);
        }
        for (i, bc) in boundary.iter_mut().enumerate() {
            let g = match (&data.boundary, &lifts) {
                (Some(gamma), Some((left, right))) => {
                    let (gl, gr) = gamma(t);
                    -rates[i].0 * (gl * left[i] + gr * right[i])
                }
                _ => 0.0,
            };
            bc.push(g);
        }
    }

    Ok(DelayHeatProblem {
        basis,
        tau,
        horizon,
        cells_per_tau: m,
        a: rates.iter().map(|r| r.0).collect(),
        b: rates.iter().map(|r| r.1).collect(),
        forcing,
        boundary,
        initial,
        history,
    })
}
