//! Shared numerical kernels: uniform grids, composite Simpson rules,
//! bisection, damped complex Newton and the principal branch of Lambert W.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative tolerance used by the iterative solvers.
pub const DEFAULT_REL_TOL: f64 = 1e-12;
/// Default iteration cap used by the iterative solvers.
pub const DEFAULT_MAX_ITER: usize = 100;

/// Equally spaced nodes `t0, t0 + h, ..., t1` with `h = (t1 - t0) / n_cells`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    t0: f64,
    t1: f64,
    n_cells: usize,
}

impl UniformGrid {
    pub fn new(t0: f64, t1: f64, n_cells: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::invalid("grid endpoints must be finite"));
        }
        if t1 <= t0 {
            return Err(Error::invalid(format!("grid needs t1 > t0, got [{t0}, {t1}]")));
        }
        if n_cells == 0 {
            return Err(Error::invalid("grid needs at least one cell"));
        }
        Ok(Self { t0, t1, n_cells })
    }

    /// Grid with a prescribed step; the right endpoint is `t0 + n_cells * h`.
    pub fn from_step(t0: f64, h: f64, n_cells: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid(format!("grid step must be positive, got {h}")));
        }
        Self::new(t0, h.mul_add(n_cells as f64, t0), n_cells)
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t1
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.t1 - self.t0) / self.n_cells as f64
    }

    /// Node `k`; the last node is pinned to `t1`.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_cells {
            self.t1
        } else {
            self.step().mul_add(k as f64, self.t0)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Index of the node that coincides with `t` up to `1e-9` of a step.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let pos = (t - self.t0) / self.step();
        let k = pos.round();
        if k < 0.0 || k > self.n_cells as f64 || (pos - k).abs() > 1e-9 {
            None
        } else {
            Some(k as usize)
        }
    }
}

/// Result of an iterative complex root solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRootResult {
    pub value: Complex64,
    /// Modulus of the defining equation at `value`.
    pub residual: f64,
    pub iterations: usize,
}

/// Composite Simpson rule over `2m + 1` equally spaced samples.
pub fn simpson(samples: &[f64], h: f64) -> Result<f64> {
    if samples.len() < 3 || samples.len() % 2 == 0 {
        return Err(Error::invalid(format!(
            "Simpson needs an odd number (>= 3) of samples, got {}",
            samples.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("Simpson step must be positive, got {h}")));
    }
    Ok(simpson_unchecked(samples, h))
}

fn simpson_unchecked(samples: &[f64], h: f64) -> f64 {
    let n = samples.len() - 1;
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, &v) in samples.iter().enumerate().take(n).skip(1) {
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (samples[0] + 4.0 * odd + 2.0 * even + samples[n])
}

/// Integral over a prefix of a uniform grid with any number of cells:
/// Simpson on an even cell count, Simpson plus one trapezoid on the last
/// cell otherwise. An empty prefix (one sample) integrates to zero.
pub fn integrate_prefix(samples: &[f64], h: f64) -> f64 {
    let n = samples.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (samples[0] + samples[1]),
        _ if n % 2 == 0 => simpson_unchecked(samples, h),
        _ => simpson_unchecked(&samples[..n], h) + 0.5 * h * (samples[n - 1] + samples[n]),
    }
}

/// Integral of a smooth piece sampled on any number of cells: Simpson on an
/// even count, Simpson plus the 3/8 rule on the last three cells on an odd
/// count, trapezoid on a single cell.
pub fn integrate_piece(samples: &[f64], h: f64) -> f64 {
    let n = samples.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (samples[0] + samples[1]),
        _ if n % 2 == 0 => simpson_unchecked(samples, h),
        3 => simpson_three_eighths(&samples[..4], h),
        _ => simpson_unchecked(&samples[..n - 2], h) + simpson_three_eighths(&samples[n - 3..], h),
    }
}

fn simpson_three_eighths(s: &[f64], h: f64) -> f64 {
    3.0 * h / 8.0 * (s[0] + 3.0 * s[1] + 3.0 * s[2] + s[3])
}

/// Outcome of a bisection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    pub iterations: usize,
    /// Width of the final bracket.
    pub width: f64,
}

/// Bisection for a continuous `f` with a sign change on `[a, b]`.
pub fn bisect<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    bisect_detailed(f, a, b, tol).map(|r| r.root)
}

/// Bisection returning the iteration count and final bracket width.
///
/// The bracket is halved each step; the left half is kept whenever the
/// midpoint value has the sign of `f(a)`. An exact zero at a midpoint ends
/// the search at that midpoint.
pub fn bisect_detailed<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Bisection> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "bisection tolerance must be positive, got {tol}"
        )));
    }
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(Bisection {
            root: lo,
            iterations: 0,
            width: 0.0,
        });
    }
    if fhi == 0.0 {
        return Ok(Bisection {
            root: hi,
            iterations: 0,
            width: 0.0,
        });
    }
    if !(flo * fhi < 0.0) {
        return Err(Error::Bracket {
            a: lo,
            b: hi,
            fa: flo,
            fb: fhi,
        });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(Bisection {
                root: mid,
                iterations,
                width: 0.0,
            });
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection {
        root: lo + 0.5 * (hi - lo),
        iterations,
        width: hi - lo,
    })
}

/// Stopping rule for [`newton_complex`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Converged once `|f(z)|` is at or below this value.
    pub residual_tol: f64,
    pub max_iter: usize,
}

/// Damped Newton iteration for an analytic `f`; `eval` returns `(f(z), f'(z))`.
///
/// A full step is accepted when it does not increase `|f|`; otherwise the
/// step is halved up to 30 times.
pub fn newton_complex<F>(eval: F, z0: Complex64, opts: NewtonOptions) -> Result<ComplexRootResult>
where
    F: Fn(Complex64) -> (Complex64, Complex64),
{
    let mut z = z0;
    let (mut fz, mut dfz) = eval(z);
    let mut residual = fz.norm();
    for it in 0..=opts.max_iter {
        if residual <= opts.residual_tol {
            return Ok(ComplexRootResult {
                value: z,
                residual,
                iterations: it,
            });
        }
        if it == opts.max_iter || !residual.is_finite() {
            break;
        }
        if dfz.norm() == 0.0 || !dfz.is_finite() {
            break;
        }
        let step = fz / dfz;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = z - step * scale;
            let (fc, dfc) = eval(cand);
            let rc = fc.norm();
            if rc.is_finite() && rc <= residual {
                z = cand;
                fz = fc;
                dfz = dfc;
                residual = rc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // Stalled at rounding level; take the full step once more to
            // escape a flat spot, then let the residual test decide.
            let cand = z - step;
            let (fc, dfc) = eval(cand);
            if !fc.norm().is_finite() {
                break;
            }
            z = cand;
            fz = fc;
            dfz = dfc;
            residual = fz.norm();
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        last: format!("{z}"),
        residual,
    })
}

/// Principal branch of the Lambert W function, `w e^w = z`.
///
/// The residual target is `1e-12 * max(1, |z|)`.
pub fn lambert_w_principal(z: Complex64) -> Result<ComplexRootResult> {
    lambert_w_principal_with(z, DEFAULT_REL_TOL, DEFAULT_MAX_ITER)
}

pub fn lambert_w_principal_with(z: Complex64, rel_tol: f64, max_iter: usize) -> Result<ComplexRootResult> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::invalid("lambert_w_principal needs z != 0"));
    }
    if !z.is_finite() {
        return Err(Error::invalid(format!("lambert_w_principal needs finite z, got {z}")));
    }
    let w0 = lambert_initial_guess(z);
    let opts = NewtonOptions {
        residual_tol: rel_tol * z.norm().max(1.0),
        max_iter,
    };
    newton_complex(
        |w| {
            let ew = w.exp();
            (w * ew - z, ew * (w + 1.0))
        },
        w0,
        opts,
    )
}

fn lambert_initial_guess(z: Complex64) -> Complex64 {
    let e = std::f64::consts::E;
    let near_branch = z * e + 1.0;
    if near_branch.norm() < 0.5 {
        // Series about the branch point -1/e.
        let p = (near_branch * 2.0).sqrt();
        return -1.0 + p - p * p / 3.0 + p * p * p * (11.0 / 72.0);
    }
    let r = z.norm();
    let series = z * (1.0 - z);
    let l1 = z.ln();
    let asymptotic = l1 - l1.ln();
    let mut guess = if r < 0.5 {
        series
    } else if r >= e {
        asymptotic
    } else {
        let theta = (r - 0.5) / (e - 0.5);
        series * (1.0 - theta) + asymptotic * theta
    };
    // On the cut a real start never leaves the real axis.
    if z.im == 0.0 && z.re < -1.0 / e && guess.im == 0.0 {
        guess.im = if z.im.is_sign_negative() { -1.0 } else { 1.0 };
    }
    guess
}

/// Principal Lambert W given `ln z` instead of `z`, for arguments whose
/// modulus overflows a double.
///
/// Solves `w + ln w = ln z`; the returned residual is the modulus of that
/// logarithmic equation. Small arguments fall back to [`lambert_w_principal`].
pub fn lambert_w_principal_log(ln_z: Complex64) -> Result<ComplexRootResult> {
    lambert_w_principal_log_with(ln_z, DEFAULT_REL_TOL, DEFAULT_MAX_ITER)
}

pub fn lambert_w_principal_log_with(ln_z: Complex64, rel_tol: f64, max_iter: usize) -> Result<ComplexRootResult> {
    if !ln_z.is_finite() {
        return Err(Error::invalid(format!("ln z must be finite, got {ln_z}")));
    }
    if ln_z.re < 20.0 {
        let z = ln_z.exp();
        let direct = lambert_w_principal_with(z, rel_tol, max_iter)?;
        let residual = (direct.value + direct.value.ln() - ln_z).norm();
        return Ok(ComplexRootResult { residual, ..direct });
    }
    let l2 = ln_z.ln();
    let w0 = ln_z - l2 + l2 / ln_z;
    let opts = NewtonOptions {
        residual_tol: rel_tol * ln_z.norm().max(1.0) * 1e-2,
        max_iter,
    };
    newton_complex(|w| (w + w.ln() - ln_z, 1.0 + 1.0 / w), w0, opts)
}

/// Real inverse of `y e^y` on `[0, inf)`.
pub fn lambert_w_real(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("real Lambert W needs finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut y = if x < 3.0 { x.ln_1p() } else { x.ln() - x.ln().ln() };
    for _ in 0..DEFAULT_MAX_ITER {
        let ey = y.exp();
        let f = y * ey - x;
        let df = ey * (y + 1.0);
        // Halley correction.
        let ddf = ey * (y + 2.0);
        let step = f / (df - 0.5 * f * ddf / df);
        y -= step;
        if step.abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            return Ok(y);
        }
    }
    Err(Error::Convergence {
        iterations: DEFAULT_MAX_ITER,
        last: y.to_string(),
        residual: (y * y.exp() - x).abs(),
    })
}
