//! Characteristic roots of the regularized delay equation
//!
//! ```text
//! d^m u/dt^m = -eps (-A)^alpha u + A u(t - tau)
//! ```
//!
//! restricted to an eigenvector of `A` with eigenvalue `-lambda`. The modal
//! ansatz `e^{omega t}` gives `omega^m + eps lambda^alpha + lambda e^{-tau omega} = 0`.
//! For `m = 1` and `alpha < 1`, `Re omega` grows without bound along the
//! spectrum; for `alpha = 1` it stays bounded. For `m >= 2` roots are built
//! from prescribed frequencies `x_k` on the ray `omega = x (1 + i beta)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{bisect, lambert_w_principal_log_with, lambert_w_real, DEFAULT_MAX_ITER, DEFAULT_REL_TOL};

/// Residual bound factor: roots satisfy their equation to `RESIDUAL_BOUND * max(1, lambda)`.
pub const RESIDUAL_BOUND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharProblem {
    pub m: u32,
    pub alpha: f64,
    pub eps: f64,
    pub tau: f64,
    pub lambda: f64,
}

impl CharProblem {
    pub fn new(m: u32, alpha: f64, eps: f64, tau: f64, lambda: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("time order must be at least 1"));
        }
        for (name, v) in [("eps", eps), ("tau", tau), ("lambda", lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must be at most 1, got {alpha}")));
        }
        Ok(Self {
            m,
            alpha,
            eps,
            tau,
            lambda,
        })
    }

    /// `eps lambda^alpha`.
    pub fn damping(&self) -> f64 {
        self.eps * self.lambda.powf(self.alpha)
    }

    /// `|omega^m + eps lambda^alpha + lambda e^{-tau omega}|`, with the last
    /// term formed in log space.
    pub fn residual(&self, omega: Complex64) -> f64 {
        let delayed = (self.lambda.ln() - self.tau * omega).exp();
        (omega.powu(self.m) + self.damping() + delayed).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicRoot {
    pub problem: CharProblem,
    /// Shifted root `omega + eps lambda^alpha` for `m = 1`; equal to `omega` otherwise.
    pub v: Complex64,
    pub omega: Complex64,
    pub residual: f64,
}

fn check_residual(p: &CharProblem, omega: Complex64, residual: f64, scale: f64) -> Result<()> {
    if residual <= scale * p.lambda.max(1.0) {
        Ok(())
    } else {
        Err(Error::Convergence {
            iterations: 0,
            last: omega.to_string(),
            residual,
        })
    }
}

/// Root of `v + Lambda e^{-tau v} = 0`, `Lambda = lambda e^{tau eps lambda^alpha}`,
/// via `tau v = W(-tau Lambda)` on the principal branch, so `Im v` lies in
/// `(0, pi / tau)`.
pub fn root_m1(p: &CharProblem) -> Result<CharacteristicRoot> {
    root_m1_with(p, RootTolerances::default())
}

/// Tolerances of the root solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerances {
    /// Relative residual target of the Lambert W iteration.
    pub lambert_rel_tol: f64,
    pub lambert_max_iter: usize,
    /// Accepted characteristic residual, relative to `max(1, lambda)`.
    pub residual_bound: f64,
}

impl Default for RootTolerances {
    fn default() -> Self {
        Self {
            lambert_rel_tol: DEFAULT_REL_TOL,
            lambert_max_iter: DEFAULT_MAX_ITER,
            residual_bound: RESIDUAL_BOUND,
        }
    }
}

pub fn root_m1_with(p: &CharProblem, tol: RootTolerances) -> Result<CharacteristicRoot> {
    if p.m != 1 {
        return Err(Error::invalid(format!("root_m1 needs m = 1, got m = {}", p.m)));
    }
    let ln_big = p.lambda.ln() + p.tau * p.damping();
    let ln_z = Complex64::new(p.tau.ln() + ln_big, std::f64::consts::PI);
    let w = lambert_w_principal_log_with(ln_z, tol.lambert_rel_tol, tol.lambert_max_iter)?;
    let v = w.value / p.tau;
    let residual = (v + (ln_big - p.tau * v).exp()).norm();
    let omega = v - p.damping();
    check_residual(p, omega, residual, tol.residual_bound)?;
    Ok(CharacteristicRoot {
        problem: *p,
        v,
        omega,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEntry {
    pub lambda: f64,
    pub re_omega: f64,
    pub im_v: f64,
    /// `|v| / lambda`.
    pub v_ratio: f64,
    pub residual: f64,
}

/// `m = 1` roots along an increasing sequence of eigenvalues.
pub fn growth_scan(alpha: f64, eps: f64, tau: f64, lambdas: &[f64]) -> Result<Vec<GrowthEntry>> {
    growth_scan_with(alpha, eps, tau, lambdas, RootTolerances::default())
}

pub fn growth_scan_with(
    alpha: f64,
    eps: f64,
    tau: f64,
    lambdas: &[f64],
    tol: RootTolerances,
) -> Result<Vec<GrowthEntry>> {
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("eigenvalue sweep must be strictly increasing"));
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let r = root_m1_with(&CharProblem::new(1, alpha, eps, tau, lambda)?, tol)?;
            Ok(GrowthEntry {
                lambda,
                re_omega: r.omega.re,
                im_v: r.v.im,
                v_ratio: r.v.norm() / lambda,
                residual: r.residual,
            })
        })
        .collect()
}

/// `n` points from `lo` to `hi` in geometric progression.
pub fn geometric_sweep(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo * (ratio * i as f64).exp() })
        .collect()
}

/// Real inverse of `y e^y`.
pub fn h1(z: f64) -> Result<f64> {
    lambert_w_real(z)
}

/// Inverse of `2y / sin y` on `[pi/2, pi)`, defined for `s >= pi`.
pub fn h2(s: f64) -> Result<f64> {
    use std::f64::consts::{FRAC_PI_2, PI};
    if !(s >= PI) || !s.is_finite() {
        return Err(Error::domain(format!("h2 needs a finite argument >= pi, got {s}")));
    }
    if s == PI {
        return Ok(FRAC_PI_2);
    }
    // 2y / sin y exceeds s once pi - y < 2 pi / s.
    let hi = (PI - PI / s).min(PI * (1.0 - f64::EPSILON));
    let g = |y: f64| 2.0 * y / y.sin() - s;
    if g(hi) < 0.0 {
        return Ok(hi);
    }
    bisect(g, FRAC_PI_2, hi, 1e-16)
}

/// Smallest `z` probed by [`root_m2`].
const M2_Z_MIN: f64 = 1e-12;

/// Root of `omega^2 + lambda^alpha + lambda e^{-omega} = 0` (`eps = tau = 1`)
/// with `omega = h1(z) + i h2(lambda / z)`, where `z` solves
/// `F(z) = h1(z)^2 - h2(lambda/z)^2 + lambda^alpha + lambda e^{-h1(z)} cos h2(lambda/z) = 0`
/// on `(0, lambda / pi)`. Bisection runs on `ln z`.
pub fn root_m2(lambda: f64, alpha: f64) -> Result<CharacteristicRoot> {
    use std::f64::consts::PI;
    let p = CharProblem::new(2, alpha, 1.0, 1.0, lambda)?;
    if alpha >= 1.0 {
        return Err(Error::invalid("root_m2 needs alpha < 1"));
    }
    let lam_a = lambda.powf(alpha);
    let y_of = |ln_z: f64| -> Result<(f64, f64)> {
        let z = ln_z.exp();
        Ok((h1(z)?, h2((lambda / z).max(PI))?))
    };
    let f = |ln_z: f64| -> f64 {
        match y_of(ln_z) {
            Ok((y1, y2)) => y1 * y1 - y2 * y2 + lam_a + lambda * (-y1).exp() * y2.cos(),
            Err(_) => f64::NAN,
        }
    };
    let lo = M2_Z_MIN.ln();
    let hi = (lambda / PI).ln();
    if !(hi > lo) {
        return Err(Error::Bracket {
            a: lo,
            b: hi,
            fa: f64::NAN,
            fb: f64::NAN,
        });
    }
    let ln_z = bisect(f, lo, hi, 1e-15 * hi.abs().max(1.0))?;
    let (y1, y2) = y_of(ln_z)?;
    let omega = Complex64::new(y1, y2);
    let residual = p.residual(omega);
    check_residual(&p, omega, residual, RESIDUAL_BOUND)?;
    Ok(CharacteristicRoot {
        problem: p,
        v: omega,
        omega,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructedRoot {
    pub k: usize,
    pub x: f64,
    /// Distance from `x_k` to the right endpoint of `I_k`, resolved beyond
    /// the precision of `x_k` itself.
    pub offset: f64,
    /// `I_k`.
    pub interval: (f64, f64),
    pub lambda: f64,
    pub root: CharacteristicRoot,
}

/// For each `k` in `ks`, the frequency `x_k` in
/// `I_k = ((pi + 4 k pi) / (2 tau beta), (pi + 2 k pi) / (tau beta))`, `beta = tan(pi / (2m))`,
/// solving `eps e^{alpha tau x} sin(tau beta x)^{1-alpha} = (1+beta^2)^{m(1-alpha)/2} x^{m(1-alpha)} (-cos(tau beta x))`,
/// and the eigenvalue `lambda_k = (1+beta^2)^{m/2} x_k^m e^{tau x_k} / sin(tau beta x_k)`
/// for which `omega = x_k (1 + i beta)` is a characteristic root.
pub fn construct_eigenvalues(
    m: u32,
    alpha: f64,
    eps: f64,
    tau: f64,
    ks: std::ops::RangeInclusive<usize>,
) -> Result<Vec<ConstructedRoot>> {
    use std::f64::consts::PI;
    if m < 2 {
        return Err(Error::invalid(format!("the construction needs m >= 2, got {m}")));
    }
    if !(alpha < 1.0) {
        return Err(Error::invalid(format!("the construction needs alpha < 1, got {alpha}")));
    }
    CharProblem::new(m, alpha, eps, tau, 1.0)?;
    let beta = (PI / (2.0 * m as f64)).tan();
    let mf = m as f64;
    let norm = 1.0 + beta * beta;
    ks.map(|k| {
        let kf = k as f64;
        let a = (PI + 4.0 * kf * PI) / (2.0 * tau * beta);
        let b = (PI + 2.0 * kf * PI) / (tau * beta);
        let mid = 0.5 * (a + b);
        let arg = tau * beta * mid;
        if !(arg.sin() > 0.0 && arg.cos() < 0.0) {
            return Err(Error::domain(format!(
                "interval {k} misses the sin > 0, cos < 0 quadrant"
            )));
        }
        // Parametrize by the phase distance d = tau beta (b - x) to the right
        // endpoint; roots crowd against it, far below the resolution of x.
        // Bisection runs on ln d in (ln d_min, ln(pi/2)).
        let x_of = |d: f64| b - d / (tau * beta);
        let g = |ln_d: f64| {
            let d = ln_d.exp();
            let x = x_of(d);
            let f1 = eps * (alpha * tau * x).exp() * d.sin().powf(1.0 - alpha);
            let f2 = norm.powf(mf * (1.0 - alpha) / 2.0) * x.powf(mf * (1.0 - alpha)) * d.cos();
            f1 - f2
        };
        let ln_d = bisect(g, f64::MIN_POSITIVE.ln(), std::f64::consts::FRAC_PI_2.ln(), 1e-15)?;
        let offset = ln_d.exp();
        let x = x_of(offset);
        let s = offset.sin();
        let ln_lambda = mf / 2.0 * norm.ln() + mf * x.ln() + tau * x - s.ln();
        let lambda = ln_lambda.exp();
        let p = CharProblem::new(m, alpha, eps, tau, lambda)?;
        let omega = Complex64::new(x, x * beta);
        let residual = p.residual(omega);
        Ok(ConstructedRoot {
            k,
            x,
            offset: offset / (tau * beta),
            interval: (a, b),
            lambda,
            root: CharacteristicRoot {
                problem: p,
                v: omega,
                omega,
                residual,
            },
        })
    })
    .collect()
}

/// `(lambda, e^{Re omega t})` per root: the modal solution norm at time `t`
/// for unit data.
pub fn blowup_table(roots: &[CharacteristicRoot], t: f64) -> Result<Vec<(f64, f64)>> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    Ok(roots
        .iter()
        .map(|r| (r.problem.lambda, (r.omega.re * t).exp()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    fn m1(alpha: f64, eps: f64, lambda: f64) -> CharacteristicRoot {
        root_m1(&CharProblem::new(1, alpha, eps, 1.0, lambda).unwrap()).unwrap()
    }

    #[test]
    fn m1_defining_residual_and_branch() {
        let r = m1(0.0, 1.0, 100.0);
        let direct = (r.v + 100.0 * E * (-r.v).exp()).norm();
        assert!(direct <= 1e-7, "{direct}");
        assert!(r.v.im > 0.0 && r.v.im < PI);
        // mpmath, 40 digits.
        assert!((r.v - Complex64::new(4.038773549273854, 2.574154299615757)).norm() < 1e-12);
    }

    #[test]
    fn m1_large_eigenvalue_matches_reference() {
        let r = m1(0.0, 1.0, 1e6);
        assert!((r.omega.re - 11.280222317183792).abs() < 1e-10);
        assert!((PI - r.v.im - 0.2325971735).abs() < 1e-9);
    }

    #[test]
    fn m1_rejects_other_orders() {
        assert!(root_m1(&CharProblem::new(2, 0.0, 1.0, 1.0, 10.0).unwrap()).is_err());
    }

    #[test]
    fn growth_for_lower_order_regularization() {
        let scan = growth_scan(0.5, 1.0, 1.0, &[1e2, 1e3, 1e4, 1e5, 1e6]).unwrap();
        let reference = [
            2.0850979477389111,
            3.3494027372530067,
            4.5601353383541615,
            5.7384315932414662,
            6.9008732500625054,
        ];
        for (e, want) in scan.iter().zip(reference) {
            assert!((e.re_omega - want).abs() < 1e-9, "{} vs {want}", e.re_omega);
            assert!(e.residual <= RESIDUAL_BOUND * e.lambda);
        }
        for w in scan.windows(2) {
            assert!(w[1].re_omega > w[0].re_omega);
            assert!(w[1].v_ratio < w[0].v_ratio);
            assert!(w[1].im_v >= w[0].im_v);
        }
        assert!(growth_scan(0.5, 1.0, 1.0, &[10.0, 5.0]).is_err());
    }

    #[test]
    fn bounded_for_same_order_regularization() {
        let sweep = geometric_sweep(1e2, 1e6, 9);
        let scan = growth_scan(1.0, 0.5, 1.0, &sweep).unwrap();
        assert!((scan[0].re_omega - 0.67783700333791187).abs() < 1e-9);
        assert!((scan[8].re_omega - 0.69314579424957864).abs() < 1e-9);
        for e in &scan {
            assert!(e.re_omega <= 2f64.ln() + 0.5);
            assert!(e.residual <= RESIDUAL_BOUND * e.lambda);
        }
    }

    #[test]
    fn nonpositive_alpha_grows() {
        let scan = growth_scan(-0.5, 1.0, 1.0, &geometric_sweep(1e2, 1e6, 5)).unwrap();
        assert!(scan.windows(2).all(|w| w[1].re_omega > w[0].re_omega));
    }

    #[test]
    fn h_inverses() {
        assert!((h1(E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(h2(PI).unwrap(), FRAC_PI_2);
        for y in [1.6, 2.0, 2.5, 3.0, 3.14] {
            let s = 2.0 * y / f64::sin(y);
            assert!((h2(s).unwrap() - y).abs() < 1e-12, "y = {y}");
        }
        assert!(h2(3.0).is_err());
    }

    #[test]
    fn m2_root_at_200() {
        let r = root_m2(200.0, 0.5).unwrap();
        assert!(r.residual <= 1e-8, "{}", r.residual);
        assert!(r.omega.im >= FRAC_PI_2 && r.omega.im < PI);
        // mpmath findroot.
        assert!((r.omega - Complex64::new(2.397261846832038, 2.442351269055043)).norm() < 1e-9);
    }

    #[test]
    fn m2_below_threshold_is_a_bracket_error() {
        assert!(matches!(root_m2(1.0, 0.5), Err(Error::Bracket { .. })));
    }

    #[test]
    fn construction_m2() {
        let roots = construct_eigenvalues(2, 0.5, 1.0, 1.0, 1..=10).unwrap();
        // mpmath bisection.
        assert!((roots[0].x - 9.4102793445585756).abs() < 1e-12);
        assert!((roots[0].lambda / 149195622.62877212 - 1.0).abs() < 1e-10);
        assert!((roots[9].x - 65.973445725385658).abs() < 1e-11);
        for r in &roots {
            let k = r.k as f64;
            assert!((r.interval.0 - (PI + 4.0 * k * PI) / 2.0).abs() < 1e-12);
            assert!((r.interval.1 - (PI + 2.0 * k * PI)).abs() < 1e-12);
            assert!(r.x > r.interval.0 && r.x <= r.interval.1);
            assert!(r.offset > 0.0 && r.offset < PI / 2.0);
            assert!(r.root.residual <= 1e-8 * r.lambda);
        }
        assert!(roots.windows(2).all(|w| w[1].lambda > w[0].lambda && w[1].x > w[0].x));
    }

    #[test]
    fn construction_general_order() {
        let roots = construct_eigenvalues(3, 0.0, 0.7, 0.5, 1..=4).unwrap();
        for r in &roots {
            assert!(r.root.residual <= 1e-8 * r.lambda);
        }
        assert!(construct_eigenvalues(1, 0.0, 1.0, 1.0, 1..=2).is_err());
    }

    #[test]
    fn blowup_examples() {
        let p = CharProblem::new(1, 0.0, 1.0, 1.0, 1.0).unwrap();
        let mk = |re: f64| CharacteristicRoot {
            problem: p,
            v: Complex64::new(re, 0.0),
            omega: Complex64::new(re, 0.0),
            residual: 0.0,
        };
        let t = blowup_table(&[mk(0.0), mk(2f64.ln())], 1.0).unwrap();
        assert_eq!(t[0].1, 1.0);
        assert!((t[1].1 - 2.0).abs() < 1e-15);
        let roots: Vec<_> = geometric_sweep(1e2, 1e6, 5)
            .into_iter()
            .map(|l| m1(0.5, 1.0, l))
            .collect();
        let t = blowup_table(&roots, 1.0).unwrap();
        let growth = (6.9008732500625054f64 - 2.0850979477389111).exp();
        assert!((t[4].1 / t[0].1 / growth - 1.0).abs() < 1e-8);
    }
}
