use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use delay_heat::delay_ode::{solve_closed_form, solve_step_method, DelayOdeProblem};
use delay_heat::delayed_exp::DelayedExp;
use delay_heat::illposed::{construct_eigenvalues, geometric_sweep, growth_scan, root_m2};
use delay_heat::laser::{self, find_peak, LaserConfig, LaserRun};
use delay_heat::signal::Signal;
use delay_heat::spectral_heat::{
    assemble_from_pde, solve, BoundaryKind, PdeCoefficients, PdeData, Sampling, SpectralBasis,
};
use delay_heat::stability::{
    build_certificate, empirical_check, energy_trace, CoefficientBounds, EmpiricalSetup, DEFAULT_MARGIN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn delayed_exp_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ratios = Vec::new();
    for _ in 0..100 {
        let tau: f64 = rng.gen_range(0.25..2.0);
        let b: f64 = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        // Segments 3..=5 so the third derivative does not vanish identically.
        let k = rng.gen_range(3..=5) as f64;
        let t = (k + rng.gen_range(0.1..0.9)) * tau;
        let d = DelayedExp::new(b, tau).unwrap();
        let exact = b * d.eval(t - tau);
        let err = |h: f64| ((d.eval(t + h) - d.eval(t - h)) / (2.0 * h) - exact).abs();
        ratios.push(err(1e-3) / err(1e-4));
    }
    let bad = ratios.iter().filter(|r| !(25.0..=400.0).contains(*r)).count();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    Outcome::new(
        bad == 0,
        format!("ratio range [{lo:.1}, {hi:.1}], {bad}/100 outside [25, 400]"),
    )
}

fn random_signal(rng: &mut ChaCha8Rng) -> Signal {
    match rng.gen_range(0..5) {
        0 => Signal::Constant(rng.gen_range(-1.0..1.0)),
        1 => Signal::Exp {
            amp: rng.gen_range(-1.0..1.0),
            rate: rng.gen_range(-1.0..1.0),
        },
        2 => Signal::Sin {
            amp: rng.gen_range(-1.0..1.0),
            freq: rng.gen_range(0.0..3.0),
            phase: rng.gen_range(0.0..3.0),
        },
        3 => Signal::GaussianPulse {
            amp: rng.gen_range(-1.0..1.0),
            center: rng.gen_range(0.0..3.0),
            width: rng.gen_range(0.3..1.0),
        },
        _ => Signal::SinRational {
            amp: rng.gen_range(-1.0..1.0),
        },
    }
}

fn closed_form_vs_steps() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_shrink = f64::INFINITY;
    for _ in 0..50 {
        let tau: f64 = rng.gen_range(0.2..1.5);
        let p = DelayOdeProblem::new(
            rng.gen_range(-2.0..1.0),
            rng.gen_range(-2.0..2.0),
            tau,
            // Horizons on a delay knot: forcing continued by zero inside the
            // last cell would limit both solvers to first order.
            tau * rng.gen_range(3..=6) as f64,
            rng.gen_range(-1.0..1.0),
        )
        .unwrap()
        .with_history(random_signal(&mut rng))
        .with_forcing(random_signal(&mut rng));
        let gap = |m: usize| {
            let c = solve_closed_form(&p, &p.grid(m).unwrap()).unwrap();
            let s = solve_step_method(&p, m).unwrap();
            let scale = c.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            c.values
                .iter()
                .zip(&s.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
                / scale
        };
        let (g200, g400) = (gap(200), gap(400));
        worst = worst.max(g200);
        worst_shrink = worst_shrink.min(g200 / g400);
    }
    Outcome::new(
        worst <= 1e-5 && worst_shrink >= 3.0,
        format!("max discrepancy {worst:.3e} at 200 cells/tau, smallest shrink factor {worst_shrink:.2}"),
    )
}

fn classical_limit() -> Outcome {
    let basis = SpectralBasis::new(BoundaryKind::Dirichlet, std::f64::consts::PI, 6).unwrap();
    let coeffs = PdeCoefficients {
        c_a: 1.0,
        c0: -0.2,
        c_a_delayed: 0.0,
        c0_delayed: 0.0,
    };
    let (tau, horizon, m) = (0.1, 2.0, 40);
    let profile = |x: f64| x * (std::f64::consts::PI - x) * (1.0 + x.sin());
    let data = PdeData::new().initial(profile).history(move |_, x| profile(x));
    let p = assemble_from_pde(
        coeffs,
        basis,
        tau,
        horizon,
        &data,
        Sampling {
            cells_per_tau: m,
            x_cells: 2048,
        },
    )
    .unwrap();
    let trajs = solve(&p, m).unwrap();
    let mut worst = 0.0f64;
    for (n, tr) in trajs.iter().enumerate() {
        let u0 = p.initial[n];
        for i in m..tr.values.len() {
            let exact = u0 * (p.a[n] * tr.time(i)).exp();
            worst = worst.max((tr.values[i] - exact).abs() / u0.abs().max(1e-300));
        }
    }
    let trace = energy_trace(&trajs, &vec![0.0; basis.modes]).unwrap();
    let a_max = p.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e0 = trace.energy[0];
    let energy_ok = trace
        .times
        .iter()
        .zip(&trace.energy)
        .all(|(&t, &e)| e <= (2.0 * a_max * t).exp() * e0 * (1.0 + 1e-12));
    Outcome::new(
        worst <= 1e-9 && energy_ok,
        format!("max relative modal error {worst:.2e}, energy bound holds: {energy_ok}"),
    )
}

fn certificate_soundness() -> Outcome {
    let worked = build_certificate(&CoefficientBounds::new(2.0, 1.0, 1.0, 1.0).unwrap(), 0.1);
    let worked_ok = (worked.omega - 0.012195121951219513).abs() <= 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut all_feasible = true;
    for _ in 0..20 {
        let kt: f64 = rng.gen_range(0.3..1.0);
        let lt = kt * rng.gen_range(1.0..1.5);
        let kappa = lt * (lt / kt).sqrt() * rng.gen_range(1.1..2.0);
        let b = CoefficientBounds::new(kappa, kt, lt, rng.gen_range(0.3..1.5)).unwrap();
        let cert = build_certificate(&b, DEFAULT_MARGIN);
        all_feasible &= cert.feasible;
        let setup = EmpiricalSetup {
            c_a: kappa * rng.gen_range(1.0..1.2),
            c_a_delayed: rng.gen_range(kt..=lt),
            amplitudes: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            frequencies: (0..3).map(|_| rng.gen_range(0.0..2.0)).collect(),
            horizon_taus: 10.0,
            cells_per_tau: 60,
        };
        worst = worst.max(empirical_check(&b, &cert, &setup).unwrap().worst_ratio);
    }
    Outcome::new(
        worked_ok && all_feasible && worst <= 1.0,
        format!(
            "worked omega {:.15}, worst E / bound over 20 draws {worst:.4}",
            worked.omega
        ),
    )
}

fn strictly(v: &[f64], increasing: bool) -> bool {
    v.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn illposed_scan() -> Outcome {
    let tau = 1.0;
    let lambdas = geometric_sweep(1e2, 1e6, 21);
    let mut notes = Vec::new();
    let mut pass = true;
    for alpha in [0.0, 0.5] {
        let scan = growth_scan(alpha, 1.0, tau, &lambdas).unwrap();
        let re: Vec<f64> = scan.iter().map(|e| e.re_omega).collect();
        let ratio: Vec<f64> = scan.iter().map(|e| e.v_ratio).collect();
        let last = scan.last().unwrap();
        let checks = [
            strictly(&re, true),
            last.re_omega >= 10.0 / tau,
            strictly(&ratio, false),
            (std::f64::consts::PI / tau - last.im_v).abs() <= 0.05,
            scan.iter().all(|e| e.residual <= 1e-9 * e.lambda.max(1.0)),
        ];
        pass &= checks.iter().all(|&c| c);
        notes.push(format!(
            "alpha={alpha}: final Re omega {:.4}, pi - Im v {:.4}, checks {checks:?}",
            last.re_omega,
            std::f64::consts::PI / tau - last.im_v
        ));
    }
    let eps = 0.5;
    let scan = growth_scan(1.0, eps, tau, &lambdas).unwrap();
    let cap = (1.0 / eps).ln() / tau + 1.0 / tau;
    let max_re = scan.iter().map(|e| e.re_omega).fold(f64::NEG_INFINITY, f64::max);
    let bounded = max_re <= cap && scan.iter().all(|e| e.residual <= 1e-9 * e.lambda.max(1.0));
    pass &= bounded;
    notes.push(format!("alpha=1: max Re omega {max_re:.4} <= {cap:.4}: {bounded}"));
    Outcome::new(pass, notes.join("; "))
}

fn higher_order() -> Outcome {
    let built = construct_eigenvalues(2, 0.5, 1.0, 1.0, 1..=10).unwrap();
    let in_interval = built
        .iter()
        .all(|c| c.x > c.interval.0 && c.x <= c.interval.1 && c.offset > 0.0);
    let lambdas: Vec<f64> = built.iter().map(|c| c.lambda).collect();
    let increasing = strictly(&lambdas, true);
    let worst = built.iter().map(|c| c.root.residual / c.lambda).fold(0.0, f64::max);
    let r = root_m2(200.0, 0.5).unwrap();
    let im_ok = r.omega.im >= std::f64::consts::FRAC_PI_2 && r.omega.im < std::f64::consts::PI;
    Outcome::new(
        in_interval && increasing && worst <= 1e-8 && im_ok && r.residual <= 1e-8,
        format!(
            "x_k in I_k: {in_interval}, lambda_k increasing: {increasing}, worst residual / lambda {worst:.2e}, root_m2 omega = {:.6} + {:.6}i (residual {:.1e})",
            r.omega.re, r.omega.im, r.residual
        ),
    )
}

fn laser_run(eps: f64, modes: usize) -> LaserRun {
    let cfg = LaserConfig {
        eps,
        ..LaserConfig::default()
    };
    laser::simulate(&cfg, modes, laser::DEFAULT_HORIZON, laser::DEFAULT_CELLS_PER_TAU, 50).unwrap()
}

fn laser_scenario() -> Outcome {
    let r5 = laser_run(1.0, 5);
    let r10 = laser_run(1.0, 10);
    let at0 = find_peak(&r5.times, &r5.trace_at(0), None).unwrap();
    let mean = find_peak(&r5.times, &r5.mean_trace(), None).unwrap();
    let peak_ok = (90e-15..=100e-15).contains(&at0.t);

    let scale = r10.field.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = r5
        .field
        .iter()
        .flatten()
        .zip(r10.field.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;
    let truncation_ok = diff < 1e-3;

    let high = |run: &LaserRun| {
        (0..run.times.len())
            .map(|i| run.high_mode_amplitude(i))
            .fold(0.0, f64::max)
    };
    let (h1, h15) = (high(&r5), high(&laser_run(1.5, 5)));
    let smooth_ok = h15 < h1;
    Outcome::new(
        peak_ok && truncation_ok && smooth_ok,
        format!(
            "x=0 peak {:.1} fs (film average {:.1} fs) in [90, 100]: {peak_ok}; N5 vs N10 {diff:.2e} < 1e-3: {truncation_ok}; high modes eps=1.5 {h15:.3e} < eps=1 {h1:.3e}: {smooth_ok}",
            at0.t * 1e15,
            mean.t * 1e15
        ),
    )
}

const CONFIGS: [(&str, &str, &str); 8] = [
    (
        "delayed-exp",
        "delayed_exp",
        include_str!("../../../configs/delayed_exp.toml"),
    ),
    ("ode", "ode", include_str!("../../../configs/ode.toml")),
    ("heat", "heat", include_str!("../../../configs/heat.toml")),
    (
        "stability",
        "stability",
        include_str!("../../../configs/stability.toml"),
    ),
    ("illposed", "illposed", include_str!("../../../configs/illposed.toml")),
    (
        "illposed",
        "illposed_construct",
        include_str!("../../../configs/illposed_construct.toml"),
    ),
    (
        "illposed",
        "illposed_m2",
        include_str!("../../../configs/illposed_m2.toml"),
    ),
    ("laser", "laser", include_str!("../../../configs/laser.toml")),
];

fn run_cli(sub: &str, config: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_delay-heat"))
        .args([sub, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (sub, name, text) in CONFIGS {
        let mut outputs = Vec::new();
        for (run, workers) in [1, 1, 4, 4].into_iter().enumerate() {
            let cfg = root.path().join(format!("{name}_{run}.toml"));
            fs::write(&cfg, format!("{text}\n[numerics]\nworkers = {workers}\n")).unwrap();
            let out = root.path().join(format!("{name}_{run}"));
            if !run_cli(sub, &cfg, &out) {
                mismatched.push(format!("{name} (run failed)"));
                break;
            }
            outputs.push(read_dir_sorted(&out));
        }
        if outputs.len() == 4 {
            files += outputs[0].len();
            if outputs.iter().any(|o| o != &outputs[0]) {
                mismatched.push(name.to_string());
            }
        }
    }
    Outcome::new(
        mismatched.is_empty(),
        format!(
            "{} configs, {files} files, workers 1 and 4, mismatches: {mismatched:?}",
            CONFIGS.len()
        ),
    )
}

type Criterion = (&'static str, f64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("delayed-exponential ODE law", 5.0, delayed_exp_law),
        ("closed form vs method of steps", 30.0, closed_form_vs_steps),
        ("classical limit", f64::INFINITY, classical_limit),
        ("stability certificate soundness", 60.0, certificate_soundness),
        ("ill-posedness scan m=1", 5.0, illposed_scan),
        ("higher-order construction", 5.0, higher_order),
        ("laser scenario", 60.0, laser_scenario),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut err = std::io::stderr();
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < budget;
        failed += usize::from(!pass);
        let limit = if budget.is_finite() {
            format!(", limit {budget} s")
        } else {
            String::new()
        };
        let _ = writeln!(
            err,
            "[{}] {} {name}: {} ({secs:.2} s{limit})",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            out.detail
        );
    }
    let _ = writeln!(err, "acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
