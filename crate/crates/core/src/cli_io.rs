//! Experiment runner: TOML configuration, CSV and key=value output, and one
//! runner per subcommand.
//!
//! A configuration file holds one table per experiment, named after the
//! subcommand, plus an optional `[numerics]` table:
//!
//! ```toml
//! [ode]
//! a = [-2, -1, 0, 1]
//! b = -1
//! tau = 0.2
//! T = 5
//! u0 = 1
//! history = "exp(1, -1)"
//! forcing = "sin-rational(1)"
//!
//! [numerics]
//! workers = 4
//! ```
//!
//! Unknown keys are rejected. Signals are strings in the syntax of
//! [`Signal`]'s `FromStr`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::delay_ode::{solve_closed_form, solve_step_method, DelayOdeProblem};
use crate::delayed_exp::DelayedExp;
use crate::error::{Error, Result};
use crate::illposed::{
    blowup_table, construct_eigenvalues, geometric_sweep, growth_scan_with, root_m1_with, root_m2, CharProblem,
    CharacteristicRoot, RootTolerances,
};
use crate::laser::{self, find_peak, LaserConfig};
use crate::numerics::{UniformGrid, DEFAULT_MAX_ITER, DEFAULT_REL_TOL};
use crate::signal::Signal;
use crate::spectral_heat::{
    assemble_from_pde, field_at, solve, BoundaryKind, PdeCoefficients, PdeData, Sampling, SpectralBasis,
};
use crate::stability::{
    build_certificate, build_certificate_with_eps, check_condition, empirical_check, fit_decay_rate, CoefficientBounds,
    EmpiricalSetup, DEFAULT_MARGIN,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DELAY_HEAT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    DelayedExp,
    Ode,
    Heat,
    Stability,
    Illposed,
    Laser,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::DelayedExp,
        Subcommand::Ode,
        Subcommand::Heat,
        Subcommand::Stability,
        Subcommand::Illposed,
        Subcommand::Laser,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::DelayedExp => "delayed-exp",
            Subcommand::Ode => "ode",
            Subcommand::Heat => "heat",
            Subcommand::Stability => "stability",
            Subcommand::Illposed => "illposed",
            Subcommand::Laser => "laser",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedExpSection {
    pub b: OneOrMany,
    pub tau: f64,
    pub t_start: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_curve_cells")]
    pub n_cells: usize,
}

fn default_curve_cells() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSection {
    pub a: OneOrMany,
    pub b: f64,
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub u0: f64,
    #[serde(default = "zero_signal")]
    pub history: String,
    #[serde(default = "zero_signal")]
    pub forcing: String,
    #[serde(default = "default_cells")]
    pub cells_per_tau: usize,
}

fn zero_signal() -> String {
    "0".into()
}

fn one_signal() -> String {
    "1".into()
}

fn default_cells() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSection {
    /// "dirichlet" or "neumann".
    pub boundary: String,
    pub length: f64,
    pub modes: usize,
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub c_a: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub c_a_delayed: f64,
    #[serde(default)]
    pub c0_delayed: f64,
    /// Initial profile in `x`.
    #[serde(default = "zero_signal")]
    pub initial: String,
    /// Time factor multiplying the initial profile on `[-tau, 0]`.
    #[serde(default = "one_signal")]
    pub history: String,
    /// Forcing `forcing_x(x) * forcing_t(t)`.
    #[serde(default = "zero_signal")]
    pub forcing_x: String,
    #[serde(default = "zero_signal")]
    pub forcing_t: String,
    pub gamma_left: Option<String>,
    pub gamma_right: Option<String>,
    #[serde(default = "default_x_cells")]
    pub x_cells: usize,
    #[serde(default = "default_cells")]
    pub cells_per_tau: usize,
    pub snapshots: Option<Vec<f64>>,
    #[serde(default = "default_field_points")]
    pub field_points: usize,
}

fn default_x_cells() -> usize {
    512
}

fn default_field_points() -> usize {
    65
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub kappa: f64,
    pub tilde_kappa: f64,
    pub tilde_lambda: f64,
    pub tau: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub eps: Option<f64>,
    #[serde(default)]
    pub simulate: bool,
    pub c_a: Option<f64>,
    pub c_a_delayed: Option<f64>,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_frequencies")]
    pub frequencies: Vec<f64>,
    #[serde(default = "default_horizon_taus")]
    pub horizon_taus: f64,
    #[serde(default = "default_stability_cells")]
    pub cells_per_tau: usize,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_amplitudes() -> Vec<f64> {
    vec![1.0, 0.5, 0.25]
}

fn default_frequencies() -> Vec<f64> {
    vec![0.5, 1.0, 1.5]
}

fn default_horizon_taus() -> f64 {
    10.0
}

fn default_stability_cells() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IllposedSection {
    /// "scan-m1", "root-m2" or "construct".
    pub mode: String,
    pub alpha: f64,
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default = "one")]
    pub tau: f64,
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub blowup_t: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_lambda_min() -> f64 {
    1e2
}

fn default_lambda_max() -> f64 {
    1e6
}

fn default_points() -> usize {
    5
}

fn default_m() -> u32 {
    2
}

fn default_k_max() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSection {
    pub gamma_heat: Option<f64>,
    pub c_e: Option<f64>,
    pub tau: Option<f64>,
    pub lambda_th: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    pub r_f: Option<f64>,
    pub t_p: Option<f64>,
    pub alpha_pen: Option<f64>,
    #[serde(rename = "J_fluence")]
    pub j_fluence: Option<f64>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub theta_l: Option<f64>,
    pub theta0: Option<f64>,
    pub eps: Option<f64>,
    #[serde(default = "default_laser_modes")]
    pub modes: usize,
    #[serde(rename = "T", default = "default_laser_horizon")]
    pub horizon: f64,
    #[serde(default = "default_laser_cells")]
    pub cells_per_tau: usize,
    #[serde(default = "default_laser_x_cells")]
    pub x_cells: usize,
}

fn default_laser_modes() -> usize {
    laser::DEFAULT_MODES
}

fn default_laser_horizon() -> f64 {
    laser::DEFAULT_HORIZON
}

fn default_laser_cells() -> usize {
    laser::DEFAULT_CELLS_PER_TAU
}

fn default_laser_x_cells() -> usize {
    50
}

impl LaserSection {
    pub fn to_config(&self) -> LaserConfig {
        let d = LaserConfig::default();
        LaserConfig {
            gamma_heat: self.gamma_heat.unwrap_or(d.gamma_heat),
            c_e: self.c_e.unwrap_or(d.c_e),
            tau: self.tau.unwrap_or(d.tau),
            lambda_th: self.lambda_th.unwrap_or(d.lambda_th),
            g: self.g.unwrap_or(d.g),
            r_f: self.r_f.unwrap_or(d.r_f),
            t_p: self.t_p.unwrap_or(d.t_p),
            alpha_pen: self.alpha_pen.unwrap_or(d.alpha_pen),
            j_fluence: self.j_fluence.unwrap_or(d.j_fluence),
            length: self.length.unwrap_or(d.length),
            theta_l: self.theta_l.unwrap_or(d.theta_l),
            theta0: self.theta0.unwrap_or(d.theta0),
            eps: self.eps.unwrap_or(d.eps),
        }
    }
}

/// Tolerances and parallelism shared by all subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// Worker threads; 0 lets the runtime decide.
    pub workers: usize,
    pub lambert_rel_tol: f64,
    pub lambert_max_iter: usize,
    /// Accepted characteristic residual relative to `max(1, lambda)`.
    pub residual_bound: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let t = RootTolerances::default();
        Self {
            workers: 0,
            lambert_rel_tol: DEFAULT_REL_TOL,
            lambert_max_iter: DEFAULT_MAX_ITER,
            residual_bound: t.residual_bound,
        }
    }
}

impl NumericsSection {
    fn root_tolerances(&self) -> RootTolerances {
        RootTolerances {
            lambert_rel_tol: self.lambert_rel_tol,
            lambert_max_iter: self.lambert_max_iter,
            residual_bound: self.residual_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "delayed-exp")]
    delayed_exp: Option<DelayedExpSection>,
    ode: Option<OdeSection>,
    heat: Option<HeatSection>,
    stability: Option<StabilitySection>,
    illposed: Option<IllposedSection>,
    laser: Option<LaserSection>,
    #[serde(default)]
    numerics: NumericsSection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    DelayedExp(DelayedExpSection),
    Ode(OdeSection),
    Heat(HeatSection),
    Stability(StabilitySection),
    Illposed(IllposedSection),
    Laser(LaserSection),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub numerics: NumericsSection,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn subcommand(&self) -> Subcommand {
        match self.experiment {
            Experiment::DelayedExp(_) => Subcommand::DelayedExp,
            Experiment::Ode(_) => Subcommand::Ode,
            Experiment::Heat(_) => Subcommand::Heat,
            Experiment::Stability(_) => Subcommand::Stability,
            Experiment::Illposed(_) => Subcommand::Illposed,
            Experiment::Laser(_) => Subcommand::Laser,
        }
    }
}

/// Parses the table for `sub` out of a TOML document. The output directory
/// defaults to `.`.
pub fn parse_config(text: &str, sub: Subcommand) -> Result<RunConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let missing = || Error::Config(format!("missing section [{}]", sub.name()));
    let experiment = match sub {
        Subcommand::DelayedExp => Experiment::DelayedExp(file.delayed_exp.ok_or_else(missing)?),
        Subcommand::Ode => Experiment::Ode(file.ode.ok_or_else(missing)?),
        Subcommand::Heat => Experiment::Heat(file.heat.ok_or_else(missing)?),
        Subcommand::Stability => Experiment::Stability(file.stability.ok_or_else(missing)?),
        Subcommand::Illposed => Experiment::Illposed(file.illposed.ok_or_else(missing)?),
        Subcommand::Laser => Experiment::Laser(file.laser.ok_or_else(missing)?),
    };
    Ok(RunConfig {
        experiment,
        numerics: file.numerics,
        output_dir: PathBuf::from("."),
    })
}

/// Shortest representation that parses back to the same `f64`, using
/// exponent notation outside `[1e-5, 1e16)`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Comma-separated file with one header line and `\n` line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::invalid(format!(
                "row {i} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let fields: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Flat `key=value` file, one pair per line in the given order.
pub fn write_key_values(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}={v}");
    }
    fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn kv(k: &str, v: f64) -> (String, String) {
    (k.to_string(), format_number(v))
}

fn parse_signal(key: &str, s: &str) -> Result<Signal> {
    s.parse::<Signal>()
        .map_err(|e| Error::Config(format!("key `{key}`: {e}")))
}

/// Runs the experiment and returns the written files in creation order.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::Io(format!("{}: {e}", cfg.output_dir.display())))?;
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.numerics.workers)
            .build()
            .map_err(|e| Error::Config(format!("numerics.workers: {e}")))?;
        pool.install(|| dispatch(cfg))
    }
    #[cfg(not(feature = "parallel"))]
    {
        dispatch(cfg)
    }
}

fn dispatch(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = &cfg.output_dir;
    match &cfg.experiment {
        Experiment::DelayedExp(s) => run_delayed_exp(s, out),
        Experiment::Ode(s) => run_ode(s, out),
        Experiment::Heat(s) => run_heat(s, out),
        Experiment::Stability(s) => run_stability(s, out),
        Experiment::Illposed(s) => run_illposed(s, &cfg.numerics, out),
        Experiment::Laser(s) => run_laser(s, out),
    }
}

fn run_delayed_exp(s: &DelayedExpSection, out: &Path) -> Result<Vec<PathBuf>> {
    let t0 = s.t_start.unwrap_or(-s.tau);
    let grid = UniformGrid::new(t0, s.t_end, s.n_cells)?;
    let mut rows = Vec::new();
    for b in s.b.values() {
        let d = DelayedExp::new(b, s.tau)?;
        rows.extend(grid.nodes().into_iter().map(|t| vec![b, t, d.eval(t)]));
    }
    let path = out.join("delayed_exp.csv");
    write_csv(&path, &["b", "t", "value"], &rows)?;
    Ok(vec![path])
}

fn run_ode(s: &OdeSection, out: &Path) -> Result<Vec<PathBuf>> {
    let history = parse_signal("history", &s.history)?;
    let forcing = parse_signal("forcing", &s.forcing)?;
    let mut rows = Vec::new();
    for a in s.a.values() {
        let p = DelayOdeProblem::new(a, s.b, s.tau, s.horizon, s.u0)?
            .with_history(history.clone())
            .with_forcing(forcing.clone());
        let closed = solve_closed_form(&p, &p.grid(s.cells_per_tau)?)?;
        let steps = solve_step_method(&p, s.cells_per_tau)?;
        for (i, t) in closed.times().into_iter().enumerate() {
            rows.push(vec![a, t, closed.values[i], steps.values[i]]);
        }
    }
    let path = out.join("ode.csv");
    write_csv(&path, &["a", "t", "closed_form", "method_of_steps"], &rows)?;
    Ok(vec![path])
}

fn run_heat(s: &HeatSection, out: &Path) -> Result<Vec<PathBuf>> {
    let kind = match s.boundary.as_str() {
        "dirichlet" => BoundaryKind::Dirichlet,
        "neumann" => BoundaryKind::Neumann,
        other => {
            return Err(Error::Config(format!(
                "key `boundary`: expected dirichlet or neumann, got `{other}`"
            )))
        }
    };
    let basis = SpectralBasis::new(kind, s.length, s.modes)?;
    let coeffs = PdeCoefficients {
        c_a: s.c_a,
        c0: s.c0,
        c_a_delayed: s.c_a_delayed,
        c0_delayed: s.c0_delayed,
    };
    let initial = parse_signal("initial", &s.initial)?;
    let history = parse_signal("history", &s.history)?;
    let fx = parse_signal("forcing_x", &s.forcing_x)?;
    let ft = parse_signal("forcing_t", &s.forcing_t)?;
    // Closed-form signals only: data are evaluated off any table grid.
    for (key, sig) in [
        ("initial", &initial),
        ("history", &history),
        ("forcing_x", &fx),
        ("forcing_t", &ft),
    ] {
        if matches!(sig, Signal::Table(_)) {
            return Err(Error::Config(format!(
                "key `{key}`: tables are not accepted for heat data"
            )));
        }
    }
    let ev = |sig: &Signal, t: f64| sig.eval(t).unwrap_or(0.0);
    let (i1, i2) = (initial.clone(), initial.clone());
    let mut data = PdeData::new()
        .initial(move |x| ev(&i1, x))
        .history(move |t, x| ev(&history, t) * ev(&i2, x))
        .forcing(move |t, x| ev(&ft, t) * ev(&fx, x));
    match (&s.gamma_left, &s.gamma_right) {
        (None, None) => {}
        (gl, gr) => {
            let gl = parse_signal("gamma_left", gl.as_deref().unwrap_or("0"))?;
            let gr = parse_signal("gamma_right", gr.as_deref().unwrap_or("0"))?;
            for (key, sig) in [("gamma_left", &gl), ("gamma_right", &gr)] {
                if matches!(sig, Signal::Table(_)) {
                    return Err(Error::Config(format!(
                        "key `{key}`: tables are not accepted for heat data"
                    )));
                }
            }
            data = data.boundary(move |t| (ev(&gl, t), ev(&gr, t)));
        }
    }
    let sampling = Sampling {
        cells_per_tau: s.cells_per_tau,
        x_cells: s.x_cells,
    };
    let p = assemble_from_pde(coeffs, basis, s.tau, s.horizon, &data, sampling)?;
    let trajs = solve(&p, s.cells_per_tau)?;
    let m = s.cells_per_tau;
    let len = trajs[0].values.len();

    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=s.modes).map(|n| format!("u{n}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|i| {
            let mut r = vec![trajs[0].time(i)];
            r.extend(trajs.iter().map(|tr| tr.values[i]));
            r
        })
        .collect();
    let modes_path = out.join("heat_modes.csv");
    write_csv(&modes_path, &header_refs, &rows)?;

    if s.field_points < 2 {
        return Err(Error::Config("key `field_points`: need at least 2".into()));
    }
    let xs = basis.x_grid(s.field_points - 1)?.nodes();
    let snapshots = s.snapshots.clone().unwrap_or_else(|| vec![0.0, s.horizon]);
    let h = p.step();
    let mut field_rows = Vec::new();
    for t in snapshots {
        let i = m as f64 + (t / h).round();
        if !(i >= m as f64 && (i as usize) < len) {
            return Err(Error::Config(format!("key `snapshots`: t = {t} outside [0, T]")));
        }
        let snap = field_at(&trajs, &basis, i as usize, &xs);
        field_rows.extend(snap.x.iter().zip(&snap.values).map(|(&x, &v)| vec![snap.t, x, v]));
    }
    let field_path = out.join("heat_field.csv");
    write_csv(&field_path, &["t", "x", "u"], &field_rows)?;
    Ok(vec![modes_path, field_path])
}

fn run_stability(s: &StabilitySection, out: &Path) -> Result<Vec<PathBuf>> {
    let b = CoefficientBounds::new(s.kappa, s.tilde_kappa, s.tilde_lambda, s.tau)?;
    if !(s.margin > 0.0 && s.margin < 1.0) {
        return Err(Error::Config(format!(
            "key `margin`: expected a value in (0, 1), got {}",
            s.margin
        )));
    }
    let cert = match s.eps {
        Some(eps) => build_certificate_with_eps(&b, s.margin, eps),
        None => build_certificate(&b, s.margin),
    };
    let mut pairs = vec![
        ("condition".to_string(), check_condition(&b).to_string()),
        ("feasible".to_string(), cert.feasible.to_string()),
        kv("eps", cert.eps),
        kv("rho_at_0", cert.rho_at_0),
        kv("rho_at_tau", cert.rho_at_tau),
        kv("rho0", cert.rho0),
        kv("alpha1", cert.alpha1),
        kv("alpha2", cert.alpha2),
        kv("beta", cert.beta),
        kv("omega", cert.omega),
        kv("C", cert.c),
        kv("C_equivalence", cert.equivalence_constant(b.tau)),
    ];
    let mut files = Vec::new();
    if s.simulate && cert.feasible {
        let setup = EmpiricalSetup {
            c_a: s.c_a.unwrap_or(s.kappa),
            c_a_delayed: s.c_a_delayed.unwrap_or(s.tilde_kappa),
            amplitudes: s.amplitudes.clone(),
            frequencies: s.frequencies.clone(),
            horizon_taus: s.horizon_taus,
            cells_per_tau: s.cells_per_tau,
        };
        let check = empirical_check(&b, &cert, &setup)?;
        let e0 = check.trace.energy[0];
        let c_eq = cert.equivalence_constant(b.tau);
        let rows: Vec<Vec<f64>> = check
            .trace
            .times
            .iter()
            .zip(&check.trace.energy)
            .zip(&check.bound)
            .map(|((&t, &e), &bd)| vec![t, e, bd, c_eq * (-2.0 * cert.omega * t).exp() * e0])
            .collect();
        let path = out.join("stability_energy.csv");
        write_csv(&path, &["t", "E", "bound", "bound_equivalence"], &rows)?;
        files.push(path);
        pairs.push(kv("worst_ratio", check.worst_ratio));
        pairs.push(("bound_holds".into(), (check.worst_ratio <= 1.0).to_string()));
        let t_end = *check.trace.times.last().unwrap_or(&0.0);
        if let Ok(rate) = fit_decay_rate(&check.trace, 0.0, t_end) {
            pairs.push(kv("fitted_rate", rate));
        }
    }
    let path = out.join("stability_certificate.txt");
    write_key_values(&path, &pairs)?;
    files.insert(0, path);
    Ok(files)
}

fn root_rows(roots: &[CharacteristicRoot]) -> Vec<Vec<f64>> {
    roots
        .iter()
        .map(|r| vec![r.problem.lambda, r.omega.re, r.omega.im, r.residual])
        .collect()
}

fn run_illposed(s: &IllposedSection, num: &NumericsSection, out: &Path) -> Result<Vec<PathBuf>> {
    let tol = num.root_tolerances();
    let lambdas = s
        .lambdas
        .clone()
        .unwrap_or_else(|| geometric_sweep(s.lambda_min, s.lambda_max, s.points));
    let mut files = Vec::new();
    let roots: Vec<CharacteristicRoot> = match s.mode.as_str() {
        "scan-m1" => {
            let scan = growth_scan_with(s.alpha, s.eps, s.tau, &lambdas, tol)?;
            let roots = lambdas
                .iter()
                .map(|&l| root_m1_with(&CharProblem::new(1, s.alpha, s.eps, s.tau, l)?, tol))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<Vec<f64>> = roots
                .iter()
                .zip(&scan)
                .map(|(r, e)| vec![e.lambda, r.omega.re, r.omega.im, r.residual, r.v.im, e.v_ratio])
                .collect();
            let path = out.join("illposed_scan_m1.csv");
            write_csv(
                &path,
                &["lambda", "re_omega", "im_omega", "residual", "im_v", "v_over_lambda"],
                &rows,
            )?;
            files.push(path);
            roots
        }
        "root-m2" => {
            if s.eps != 1.0 || s.tau != 1.0 {
                return Err(Error::Config("root-m2 works with eps = tau = 1".into()));
            }
            let roots = lambdas
                .iter()
                .map(|&l| root_m2(l, s.alpha))
                .collect::<Result<Vec<_>>>()?;
            for r in &roots {
                if r.residual > tol.residual_bound * r.problem.lambda.max(1.0) {
                    return Err(Error::Convergence {
                        iterations: 0,
                        last: r.omega.to_string(),
                        residual: r.residual,
                    });
                }
            }
            let path = out.join("illposed_root_m2.csv");
            write_csv(
                &path,
                &["lambda", "re_omega", "im_omega", "residual"],
                &root_rows(&roots),
            )?;
            files.push(path);
            roots
        }
        "construct" => {
            let built = construct_eigenvalues(s.m, s.alpha, s.eps, s.tau, 1..=s.k_max)?;
            for c in &built {
                if c.root.residual > 1e-8 * c.lambda {
                    return Err(Error::Convergence {
                        iterations: 0,
                        last: c.root.omega.to_string(),
                        residual: c.root.residual,
                    });
                }
            }
            let rows: Vec<Vec<f64>> = built
                .iter()
                .map(|c| vec![c.k as f64, c.x, c.lambda, c.root.residual, c.offset])
                .collect();
            let path = out.join("illposed_construct.csv");
            write_csv(&path, &["k", "x_k", "lambda_k", "residual", "offset"], &rows)?;
            files.push(path);
            built.into_iter().map(|c| c.root).collect()
        }
        other => {
            return Err(Error::Config(format!(
                "key `mode`: expected scan-m1, root-m2 or construct, got `{other}`"
            )))
        }
    };
    if let Some(t) = s.blowup_t {
        let table = blowup_table(&roots, t)?;
        let rows: Vec<Vec<f64>> = table.into_iter().map(|(l, g)| vec![l, g]).collect();
        let path = out.join("illposed_blowup.csv");
        write_csv(&path, &["lambda", "growth"], &rows)?;
        files.push(path);
    }
    Ok(files)
}

fn run_laser(s: &LaserSection, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = s.to_config();
    let run = laser::simulate(&cfg, s.modes, s.horizon, s.cells_per_tau, s.x_cells)?;

    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=s.modes).map(|n| format!("u{n}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mode_rows: Vec<Vec<f64>> = run
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut r = vec![t];
            r.extend(run.modes_at(i));
            r
        })
        .collect();
    let modes_path = out.join("laser_modes.csv");
    write_csv(&modes_path, &header_refs, &mode_rows)?;

    let field_rows: Vec<Vec<f64>> = run
        .times
        .iter()
        .zip(&run.field)
        .flat_map(|(&t, row)| run.x.iter().zip(row).map(move |(&x, &v)| vec![t, x, v]))
        .collect();
    let field_path = out.join("laser_field.csv");
    write_csv(&field_path, &["t", "x", "theta"], &field_rows)?;

    let at0 = find_peak(&run.times, &run.trace_at(0), None)?;
    let mean = find_peak(&run.times, &run.mean_trace(), None)?;
    let mut pairs = vec![
        kv("eps", cfg.eps),
        ("modes".into(), s.modes.to_string()),
        kv("horizon", s.horizon),
        ("cells_per_tau".into(), s.cells_per_tau.to_string()),
        kv("peak_x0_t", at0.t),
        kv("peak_x0_theta", at0.value),
    ];
    if let Some((t, v)) = at0.refined {
        pairs.push(kv("peak_x0_refined_t", t));
        pairs.push(kv("peak_x0_refined_theta", v));
    }
    pairs.push(kv("peak_mean_t", mean.t));
    pairs.push(kv("peak_mean_theta", mean.value));
    pairs.push(kv("high_mode_amplitude_at_peak", run.high_mode_amplitude(at0.index)));
    for n in 0..s.modes {
        let max = run.trajectories[n].values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        pairs.push(kv(&format!("mode_max_abs_{}", n + 1), max));
    }
    let flat = run.field.iter().flatten();
    pairs.push(kv("theta_min", flat.clone().cloned().fold(f64::INFINITY, f64::min)));
    pairs.push(kv("theta_max", flat.cloned().fold(f64::NEG_INFINITY, f64::max)));
    let summary_path = out.join("laser_summary.txt");
    write_key_values(&summary_path, &pairs)?;

    let depth = laser::depth_profile_coefficients(&cfg, s.modes)?;
    let mut cmp_rows = Vec::new();
    for k in 0..=4 {
        let t = k as f64 * cfg.t_p / 2.0;
        for n in 1..=s.modes {
            let quad = depth[n - 1] * cfg.pulse(t);
            cmp_rows.push(vec![t, n as f64, quad, laser::printed_modal_source(&cfg, n, t)]);
        }
    }
    let cmp_path = out.join("laser_printed_comparison.csv");
    write_csv(&cmp_path, &["t", "n", "quadrature", "printed"], &cmp_rows)?;
    Ok(vec![modes_path, field_path, summary_path, cmp_path])
}

/// Output directory: explicit flag, else the environment variable, else `.`.
pub fn resolve_output_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    }
}
