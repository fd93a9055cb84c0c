//! Exponential decay certificate for the delayed heat equation
//!
//! ```text
//! u_t = div(a grad u) + div(at grad u(t - tau))
//! ```
//!
//! with ellipticity bounds `kappa` for `a`, `kappa_t` for `at` and the
//! sup bound `lambda_t` of `at`. When `kappa > lambda_t sqrt(lambda_t / kappa_t)`
//! a linear weight `rho` on `[0, tau]` gives a Lyapunov functional and the
//! energy obeys `E(t) <= C e^{-2 omega t} E(0)`.

use crate::delay_ode::Trajectory;
use crate::error::{Error, Result};
use crate::numerics::simpson;
use crate::spectral_heat::{solve, BoundaryKind, DelayHeatProblem, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub kappa: f64,
    pub tilde_kappa: f64,
    pub tilde_lambda: f64,
    pub tau: f64,
}

impl CoefficientBounds {
    pub fn new(kappa: f64, tilde_kappa: f64, tilde_lambda: f64, tau: f64) -> Result<Self> {
        for (name, v) in [
            ("kappa", kappa),
            ("tilde_kappa", tilde_kappa),
            ("tilde_lambda", tilde_lambda),
            ("tau", tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if tilde_kappa > tilde_lambda {
            return Err(Error::invalid(format!(
                "tilde_kappa = {tilde_kappa} exceeds tilde_lambda = {tilde_lambda}"
            )));
        }
        Ok(Self {
            kappa,
            tilde_kappa,
            tilde_lambda,
            tau,
        })
    }
}

/// `kappa > lambda_t sqrt(lambda_t / kappa_t)`.
pub fn check_condition(b: &CoefficientBounds) -> bool {
    b.kappa > b.tilde_lambda * (b.tilde_lambda / b.tilde_kappa).sqrt()
}

/// Minimizer `sqrt(lambda_t / kappa_t)` of [`chi`].
pub fn optimal_epsilon(b: &CoefficientBounds) -> f64 {
    (b.tilde_lambda / b.tilde_kappa).sqrt()
}

/// `chi(eps) = lambda_t / 2 (eps + lambda_t / (eps kappa_t))`.
pub fn chi(b: &CoefficientBounds, eps: f64) -> f64 {
    b.tilde_lambda / 2.0 * (eps + b.tilde_lambda / (eps * b.tilde_kappa))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    pub feasible: bool,
    pub eps: f64,
    pub rho_at_0: f64,
    pub rho_at_tau: f64,
    pub rho0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub omega: f64,
    /// `rho(0) / rho(tau)`.
    pub c: f64,
}

impl StabilityCertificate {
    /// `max(1, 2 rho(0) / tau) / min(1, 2 rho(tau) / tau)`, the constant from
    /// the equivalence of the Lyapunov functional and the energy.
    pub fn equivalence_constant(&self, tau: f64) -> f64 {
        (2.0 * self.rho_at_0 / tau).max(1.0) / (2.0 * self.rho_at_tau / tau).min(1.0)
    }

    /// The certified bound `C e^{-2 omega t}` on `E(t) / E(0)`.
    pub fn bound(&self, t: f64) -> f64 {
        self.c * (-2.0 * self.omega * t).exp()
    }
}

pub const DEFAULT_MARGIN: f64 = 0.1;

/// Certificate with `eps = eps*`.
pub fn build_certificate(b: &CoefficientBounds, margin: f64) -> StabilityCertificate {
    build_certificate_with_eps(b, margin, optimal_epsilon(b))
}

/// Certificate for a given `eps`. `rho(tau)` sits `margin` above its lower
/// bound `tau/2 lambda_t / (eps kappa_t)`, `rho(0)` at the midpoint of
/// `(rho(tau), tau (kappa - lambda_t eps / 2) / lambda_t)`, `rho` linear.
pub fn build_certificate_with_eps(b: &CoefficientBounds, margin: f64, eps: f64) -> StabilityCertificate {
    let (kappa, kt, lt, tau) = (b.kappa, b.tilde_kappa, b.tilde_lambda, b.tau);
    let rho_at_tau = (1.0 + margin) * tau / 2.0 * lt / (eps * kt);
    let upper = tau * (kappa - lt * eps / 2.0) / lt;
    let rho_at_0 = 0.5 * (rho_at_tau + upper);
    let rho0 = (rho_at_0 - rho_at_tau) / (tau * tau);
    let alpha1 = kappa - lt * eps / 2.0 - lt * rho_at_0 / tau;
    let alpha2 = kt * rho_at_tau / tau - lt / (2.0 * eps);
    let beta = alpha1.min(alpha2).min(rho0);
    let omega = beta / 2.0 * (tau / (2.0 * rho_at_0)).min(1.0);
    let c = rho_at_0 / rho_at_tau;
    let feasible =
        eps > 0.0 && margin > 0.0 && upper > rho_at_tau && alpha1 > 0.0 && alpha2 > 0.0 && rho0 > 0.0 && omega > 0.0;
    StabilityCertificate {
        feasible,
        eps,
        rho_at_0,
        rho_at_tau,
        rho0,
        alpha1,
        alpha2,
        beta,
        omega,
        c,
    }
}

/// Energy samples at the grid times `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
}

/// `E(t_i) = 1/2 sum_n u_n(t_i)^2 + 1/2 int_{t_i - tau}^{t_i} sum_n w_n u_n(s)^2 ds`.
pub fn energy_at(trajectories: &[Trajectory], weights: &[f64], i: usize) -> Result<f64> {
    let first = trajectories.first().ok_or_else(|| Error::invalid("no trajectories"))?;
    let m = first.cells_per_tau;
    if i < m {
        return Err(Error::domain(format!(
            "energy at t = {} needs history before -tau",
            first.time(i)
        )));
    }
    if weights.len() != trajectories.len() {
        return Err(Error::invalid("one weight per trajectory required"));
    }
    let inst: f64 = trajectories.iter().map(|tr| tr.values[i] * tr.values[i]).sum();
    let window: Vec<f64> = (i - m..=i)
        .map(|j| {
            trajectories
                .iter()
                .zip(weights)
                .map(|(tr, w)| w * tr.values[j] * tr.values[j])
                .sum()
        })
        .collect();
    Ok(0.5 * inst + 0.5 * simpson(&window, first.step())?)
}

/// Energy at every grid time in `[0, T]`.
pub fn energy_trace(trajectories: &[Trajectory], weights: &[f64]) -> Result<EnergyTrace> {
    let first = trajectories.first().ok_or_else(|| Error::invalid("no trajectories"))?;
    let m = first.cells_per_tau;
    let idx: Vec<usize> = (m..first.values.len()).collect();
    let energy = idx
        .iter()
        .map(|&i| energy_at(trajectories, weights, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyTrace {
        times: idx.iter().map(|&i| first.time(i)).collect(),
        energy,
    })
}

/// Least-squares slope of `ln E` over `[t_start, t_end]`, divided by `-2`.
pub fn fit_decay_rate(trace: &EnergyTrace, t_start: f64, t_end: f64) -> Result<f64> {
    let mut pts = Vec::new();
    for (&t, &e) in trace.times.iter().zip(&trace.energy) {
        if t < t_start || t > t_end {
            continue;
        }
        if !(e > 0.0) {
            return Err(Error::domain(format!("nonpositive energy {e} at t = {t}")));
        }
        pts.push((t, e.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::invalid(format!(
            "fewer than two samples in [{t_start}, {t_end}]"
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    Ok(-sxy / sxx / 2.0)
}

/// Setup of a simulated constant-coefficient problem on `(0, pi)` with
/// Dirichlet conditions, where `mu_n = n^2 >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSetup {
    /// Instantaneous diffusivity, at least `kappa`.
    pub c_a: f64,
    /// Delayed diffusivity, within `[kappa_t, lambda_t]`.
    pub c_a_delayed: f64,
    /// History amplitudes per mode.
    pub amplitudes: Vec<f64>,
    /// History frequencies per mode: `phi_n(t) = amp_n cos(freq_n t)`.
    pub frequencies: Vec<f64>,
    pub horizon_taus: f64,
    pub cells_per_tau: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCheck {
    pub trace: EnergyTrace,
    /// `C e^{-2 omega t} E(0)` at the trace times.
    pub bound: Vec<f64>,
    /// `max_t E(t) / bound(t)`; the certificate holds when `<= 1`.
    pub worst_ratio: f64,
}

/// Simulates the setup and compares its energy with the certificate.
pub fn empirical_check(
    b: &CoefficientBounds,
    cert: &StabilityCertificate,
    s: &EmpiricalSetup,
) -> Result<EmpiricalCheck> {
    if s.c_a < b.kappa || s.c_a_delayed < b.tilde_kappa || s.c_a_delayed > b.tilde_lambda {
        return Err(Error::invalid("setup coefficients violate the stated bounds"));
    }
    if s.amplitudes.len() != s.frequencies.len() || s.amplitudes.is_empty() {
        return Err(Error::invalid("need one frequency per amplitude"));
    }
    let n_modes = s.amplitudes.len();
    let basis = SpectralBasis::new(BoundaryKind::Dirichlet, std::f64::consts::PI, n_modes)?;
    let mu = basis.eigenvalues();
    let m = s.cells_per_tau;
    let h = b.tau / m as f64;
    let horizon = s.horizon_taus * b.tau;
    let n_after = (horizon / h).ceil() as usize;
    let history = s
        .amplitudes
        .iter()
        .zip(&s.frequencies)
        .map(|(&amp, &w)| {
            (0..=m)
                .map(|j| amp * (w * (j as f64 * h - b.tau)).cos())
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>();
    let p = DelayHeatProblem {
        basis,
        tau: b.tau,
        horizon,
        cells_per_tau: m,
        a: mu.iter().map(|mu| -s.c_a * mu).collect(),
        b: mu.iter().map(|mu| -s.c_a_delayed * mu).collect(),
        forcing: vec![vec![0.0; n_after + 1]; n_modes],
        boundary: vec![vec![0.0; n_after + 1]; n_modes],
        initial: s.amplitudes.clone(),
        history,
    };
    let trajs = solve(&p, m)?;
    let weights: Vec<f64> = mu.iter().map(|mu| s.c_a_delayed * mu).collect();
    let trace = energy_trace(&trajs, &weights)?;
    let e0 = trace.energy[0];
    let bound: Vec<f64> = trace.times.iter().map(|&t| cert.bound(t) * e0).collect();
    let worst_ratio = trace.energy.iter().zip(&bound).map(|(e, b)| e / b).fold(0.0, f64::max);
    Ok(EmpiricalCheck {
        trace,
        bound,
        worst_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_ode::{solve_closed_form, DelayOdeProblem};
    use crate::signal::Signal;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bounds(kappa: f64, kt: f64, lt: f64, tau: f64) -> CoefficientBounds {
        CoefficientBounds::new(kappa, kt, lt, tau).unwrap()
    }

    #[test]
    fn condition_examples() {
        assert!(!check_condition(&bounds(1.0, 1.0, 1.0, 1.0)));
        assert!(check_condition(&bounds(2.0, 1.0, 1.0, 1.0)));
        assert!(check_condition(&bounds(1.0, 0.5, 0.5, 1.0)));
        assert!(CoefficientBounds::new(1.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(optimal_epsilon(&bounds(1.0, 1.0, 4.0, 1.0)), 2.0);
        assert_eq!(optimal_epsilon(&bounds(1.0, 3.0, 3.0, 1.0)), 1.0);
        // kappa_t <= lambda_t is required by the type, so check the formula directly.
        let raw = CoefficientBounds {
            kappa: 1.0,
            tilde_kappa: 4.0,
            tilde_lambda: 1.0,
            tau: 1.0,
        };
        assert_eq!(optimal_epsilon(&raw), 0.5);
    }

    #[test]
    fn worked_certificate() {
        let c = build_certificate(&bounds(2.0, 1.0, 1.0, 1.0), 0.1);
        assert!(c.feasible);
        assert_eq!(c.eps, 1.0);
        assert!((c.rho_at_tau - 0.55).abs() < 1e-15);
        assert!((c.rho_at_0 - 1.025).abs() < 1e-15);
        assert!((c.alpha1 - 0.475).abs() < 1e-15);
        assert!((c.alpha2 - 0.05).abs() < 1e-15);
        assert!((c.rho0 - 0.475).abs() < 1e-15);
        assert!((c.beta - 0.05).abs() < 1e-15);
        assert!((c.omega - 0.012195121951219513).abs() < 1e-12);
        assert!((c.c - 1.8636363636363635).abs() < 1e-12);
        assert!((c.equivalence_constant(1.0) - 2.05).abs() < 1e-12);
    }

    #[test]
    fn infeasible_at_boundary() {
        assert!(!build_certificate(&bounds(1.0, 1.0, 1.0, 1.0), 0.1).feasible);
    }

    #[test]
    fn fit_examples() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let trace = EnergyTrace {
            energy: times.iter().map(|t| (-4.0 * t).exp()).collect(),
            times: times.clone(),
        };
        assert!((fit_decay_rate(&trace, 0.0, 5.0).unwrap() - 2.0).abs() < 1e-10);
        let trace = EnergyTrace {
            energy: times.iter().map(|t| 5.0 * (-0.2 * t).exp()).collect(),
            times: times.clone(),
        };
        assert!((fit_decay_rate(&trace, 0.0, 5.0).unwrap() - 0.1).abs() < 1e-10);
        let bad = EnergyTrace {
            energy: vec![1.0, 0.0, 1.0],
            times: vec![0.0, 1.0, 2.0],
        };
        assert!(matches!(fit_decay_rate(&bad, 0.0, 2.0), Err(Error::Domain(_))));
    }

    fn mode_trajectory(a: f64, b: f64, tau: f64, horizon: f64, hist: Signal, u0: f64, m: usize) -> Trajectory {
        let p = DelayOdeProblem::new(a, b, tau, horizon, u0).unwrap().with_history(hist);
        solve_closed_form(&p, &p.grid(m).unwrap()).unwrap()
    }

    #[test]
    fn energy_examples() {
        let zero = mode_trajectory(-1.0, 0.0, 1.0, 2.0, Signal::zero(), 0.0, 10);
        let tr = energy_trace(&[zero], &[3.0]).unwrap();
        assert!(tr.energy.iter().all(|&e| e == 0.0));

        let neu = mode_trajectory(0.0, 0.0, 1.0, 2.0, Signal::Constant(2.0), 2.0, 10);
        let tr = energy_trace(&[neu.clone()], &[0.0]).unwrap();
        for (i, e) in tr.energy.iter().enumerate() {
            assert_eq!(*e, 0.5 * neu.values[i + 10].powi(2));
        }
        assert!(matches!(energy_at(&[neu], &[0.0], 3), Err(Error::Domain(_))));
    }

    #[test]
    fn energy_of_decaying_mode_matches_analytic_integral() {
        // u = e^{a t} for t >= -tau as history and solution.
        let (a, tau, w) = (-1.0, 0.5, 2.0);
        let tr = mode_trajectory(a, 0.0, tau, 2.0, Signal::Exp { amp: 1.0, rate: a }, 1.0, 200);
        let trace = energy_trace(&[tr], &[w]).unwrap();
        for (t, e) in trace.times.iter().zip(&trace.energy) {
            let tail = ((2.0 * a * t).exp() - (2.0 * a * (t - tau)).exp()) / (2.0 * a);
            let want = 0.5 * (2.0 * a * t).exp() + 0.5 * w * tail;
            assert!((e - want).abs() < 1e-8, "t = {t}: {e} vs {want}");
        }
    }

    #[test]
    fn epsilon_star_minimizes_chi() {
        let b = bounds(3.0, 0.7, 1.9, 1.0);
        let e = optimal_epsilon(&b);
        assert!(chi(&b, e + 1e-3) > chi(&b, e));
        assert!(chi(&b, e - 1e-3) > chi(&b, e));
    }

    #[test]
    fn simulated_energy_obeys_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let kt: f64 = rng.gen_range(0.3..1.0);
            let lt = kt * rng.gen_range(1.0..1.5);
            let kappa = lt * (lt / kt).sqrt() * rng.gen_range(1.1..2.0);
            let b = bounds(kappa, kt, lt, rng.gen_range(0.3..1.5));
            let cert = build_certificate(&b, DEFAULT_MARGIN);
            assert!(cert.feasible);
            let setup = EmpiricalSetup {
                c_a: kappa,
                c_a_delayed: rng.gen_range(kt..=lt),
                amplitudes: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                frequencies: (0..3).map(|_| rng.gen_range(0.0..2.0)).collect(),
                horizon_taus: 10.0,
                cells_per_tau: 60,
            };
            let check = empirical_check(&b, &cert, &setup).unwrap();
            assert!(check.worst_ratio <= 1.0, "{b:?}: ratio {}", check.worst_ratio);
            let rate = fit_decay_rate(&check.trace, 0.0, 10.0 * b.tau).unwrap();
            assert!(rate >= cert.omega);
        }
    }

    proptest! {
        #[test]
        fn feasible_certificates_are_consistent(kt in 0.1f64..2.0, ratio in 1.0f64..2.0, excess in 1.01f64..3.0, tau in 0.1f64..3.0, margin in 0.01f64..0.9) {
            let lt = kt * ratio;
            let b = bounds(lt * (lt / kt).sqrt() * excess, kt, lt, tau);
            prop_assert!(check_condition(&b));
            let c = build_certificate(&b, margin);
            if c.feasible {
                prop_assert!(c.rho_at_0 > c.rho_at_tau);
                prop_assert!(c.rho_at_tau > tau / 2.0 * (lt / kt).sqrt());
                prop_assert!(c.alpha1 > 0.0 && c.alpha2 > 0.0 && c.rho0 > 0.0 && c.omega > 0.0);
                prop_assert!(c.c >= 1.0);
            }
            // Recompute from the stored fields.
            prop_assert_eq!(c.alpha1, b.kappa - lt * c.eps / 2.0 - lt * c.rho_at_0 / tau);
            prop_assert_eq!(c.alpha2, kt * c.rho_at_tau / tau - lt / (2.0 * c.eps));
            prop_assert_eq!(c.rho0, (c.rho_at_0 - c.rho_at_tau) / (tau * tau));
            prop_assert_eq!(c.omega, c.beta / 2.0 * (tau / (2.0 * c.rho_at_0)).min(1.0));
        }

        #[test]
        fn feasibility_is_monotone_in_kappa(kt in 0.1f64..2.0, ratio in 1.0f64..2.0, kappa in 0.1f64..10.0, bump in 0.0f64..5.0) {
            let lt = kt * ratio;
            let b = bounds(kappa, kt, lt, 1.0);
            if check_condition(&b) {
                prop_assert!(check_condition(&bounds(kappa + bump, kt, lt, 1.0)));
            }
        }
    }
}
