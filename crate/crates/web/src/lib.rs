//! Browser bindings: delayed exponential curves, a scalar delay ODE solved
//! two ways, and the laser heating trace at the film surface.

use delay_heat::delay_ode::{solve_closed_form, solve_step_method, DelayOdeProblem};
use delay_heat::delayed_exp::DelayedExp;
use delay_heat::laser::{self, find_peak, LaserConfig};
use delay_heat::numerics::UniformGrid;
use delay_heat::signal::Signal;
use wasm_bindgen::prelude::*;

/// Sampled curves sharing one time axis.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Curves {
    times: Vec<f64>,
    series: Vec<Vec<f64>>,
    peak: Option<(f64, f64)>,
}

#[wasm_bindgen]
impl Curves {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(js_name = seriesCount)]
    pub fn series_count(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self, k: usize) -> Vec<f64> {
        self.series.get(k).cloned().unwrap_or_default()
    }

    /// `[t, value]` of the maximum of the first series, empty when not computed.
    pub fn peak(&self) -> Vec<f64> {
        self.peak.map(|(t, v)| vec![t, v]).unwrap_or_default()
    }
}

pub fn delayed_exp_curves(bs: &[f64], tau: f64, t_end: f64, n_cells: usize) -> Result<Curves, String> {
    let grid = UniformGrid::new(-tau, t_end, n_cells).map_err(|e| e.to_string())?;
    let times = grid.nodes();
    let mut series = Vec::with_capacity(bs.len());
    for &b in bs {
        let d = DelayedExp::new(b, tau).map_err(|e| e.to_string())?;
        series.push(times.iter().map(|&t| d.eval(t)).collect());
    }
    Ok(Curves {
        times,
        series,
        peak: None,
    })
}

pub fn ode_curves(
    a: f64,
    b: f64,
    tau: f64,
    horizon: f64,
    forcing: &str,
    cells_per_tau: usize,
) -> Result<Curves, String> {
    let forcing: Signal = forcing.parse().map_err(|e: delay_heat::Error| e.to_string())?;
    let p = DelayOdeProblem::new(a, b, tau, horizon, 1.0)
        .map_err(|e| e.to_string())?
        .with_history(Signal::Constant(1.0))
        .with_forcing(forcing);
    let grid = p.grid(cells_per_tau).map_err(|e| e.to_string())?;
    let closed = solve_closed_form(&p, &grid).map_err(|e| e.to_string())?;
    let steps = solve_step_method(&p, cells_per_tau).map_err(|e| e.to_string())?;
    Ok(Curves {
        times: closed.times(),
        series: vec![closed.values, steps.values],
        peak: None,
    })
}

/// Temperature at `x = 0` and film average, times in femtoseconds.
pub fn laser_curves(eps: f64, modes: usize) -> Result<Curves, String> {
    let cfg = LaserConfig {
        eps,
        ..LaserConfig::default()
    };
    let run = laser::simulate(&cfg, modes, laser::DEFAULT_HORIZON, laser::DEFAULT_CELLS_PER_TAU, 10)
        .map_err(|e| e.to_string())?;
    let surface = run.trace_at(0);
    let peak = find_peak(&run.times, &surface, None).map_err(|e| e.to_string())?;
    Ok(Curves {
        times: run.times.iter().map(|t| t * 1e15).collect(),
        series: vec![surface, run.mean_trace()],
        peak: Some((peak.t * 1e15, peak.value)),
    })
}

#[wasm_bindgen(js_name = delayedExp)]
pub fn delayed_exp_js(bs: Vec<f64>, tau: f64, t_end: f64, n_cells: usize) -> Result<Curves, JsError> {
    delayed_exp_curves(&bs, tau, t_end, n_cells).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = delayOde)]
pub fn ode_js(a: f64, b: f64, tau: f64, horizon: f64, forcing: &str, cells_per_tau: usize) -> Result<Curves, JsError> {
    ode_curves(a, b, tau, horizon, forcing, cells_per_tau).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = laserTrace)]
pub fn laser_js(eps: f64, modes: usize) -> Result<Curves, JsError> {
    laser_curves(eps, modes).map_err(|e| JsError::new(&e))
}
