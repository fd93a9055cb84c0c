//! Scalar input signals (histories, forcings, boundary traces, profiles):
//! a small family of named closed forms plus uniformly sampled tables.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::UniformGrid;

/// Uniform samples of a function.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl SampledFn {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "table has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a grid node; `None` when `t` is not a node.
    pub fn at_node(&self, t: f64) -> Option<f64> {
        self.grid.index_of(t).map(|k| self.values[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Constant(f64),
    /// `amp * exp(rate * t)`
    Exp {
        amp: f64,
        rate: f64,
    },
    /// `amp * sin(freq * t + phase)`
    Sin {
        amp: f64,
        freq: f64,
        phase: f64,
    },
    /// `amp * exp(-((t - center) / width)^2)`
    GaussianPulse {
        amp: f64,
        center: f64,
        width: f64,
    },
    /// `amp * sin(t) / (1 + t^2)`
    SinRational {
        amp: f64,
    },
    Table(SampledFn),
}

impl Default for Signal {
    fn default() -> Self {
        Signal::Constant(0.0)
    }
}

impl Signal {
    pub fn zero() -> Self {
        Signal::Constant(0.0)
    }

    /// Closed-form value; tables only answer at their nodes.
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(match *self {
            Signal::Constant(c) => c,
            Signal::Exp { amp, rate } => amp * (rate * t).exp(),
            Signal::Sin { amp, freq, phase } => amp * (freq * t + phase).sin(),
            Signal::GaussianPulse { amp, center, width } => {
                let z = (t - center) / width;
                amp * (-z * z).exp()
            }
            Signal::SinRational { amp } => amp * t.sin() / (1.0 + t * t),
            Signal::Table(ref table) => table.at_node(t).ok_or_else(|| {
                Error::invalid(format!("grid misalignment: t = {t} is not a node of the sampled table"))
            })?,
        })
    }

    /// Samples at the given times.
    pub fn sample_at(&self, times: impl IntoIterator<Item = f64>) -> Result<Vec<f64>> {
        times.into_iter().map(|t| self.eval(t)).collect()
    }

    pub fn sample(&self, grid: &UniformGrid) -> Result<Vec<f64>> {
        self.sample_at(grid.nodes())
    }
}

fn parse_args(name: &str, body: &str) -> Result<Vec<f64>> {
    body.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("signal `{name}`: `{s}` is not a number")))
        })
        .collect()
}

fn expect_arity(name: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::Config(format!(
            "signal `{name}` takes {n} argument(s), got {}",
            args.len()
        )));
    }
    Ok(())
}

impl FromStr for Signal {
    type Err = Error;

    /// Accepts a bare number, `constant(c)`, `exp(amp, rate)`,
    /// `sin(amp, freq, phase)`, `gaussian-pulse(amp, center, width)`,
    /// `sin-rational(amp)` or `table(t0, dt, v0, v1, ...)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(c) = s.parse::<f64>() {
            return Ok(Signal::Constant(c));
        }
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::Config(format!("cannot parse signal `{s}`")))?;
        let body = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::Config(format!("signal `{s}` is missing `)`")))?;
        let name = name.trim();
        let args = parse_args(name, body)?;
        match name {
            "constant" => {
                expect_arity(name, &args, 1)?;
                Ok(Signal::Constant(args[0]))
            }
            "exp" => {
                expect_arity(name, &args, 2)?;
                Ok(Signal::Exp {
                    amp: args[0],
                    rate: args[1],
                })
            }
            "sin" => {
                expect_arity(name, &args, 3)?;
                Ok(Signal::Sin {
                    amp: args[0],
                    freq: args[1],
                    phase: args[2],
                })
            }
            "gaussian-pulse" => {
                expect_arity(name, &args, 3)?;
                if !(args[2] > 0.0) {
                    return Err(Error::Config("gaussian-pulse width must be positive".into()));
                }
                Ok(Signal::GaussianPulse {
                    amp: args[0],
                    center: args[1],
                    width: args[2],
                })
            }
            "sin-rational" => {
                expect_arity(name, &args, 1)?;
                Ok(Signal::SinRational { amp: args[0] })
            }
            "table" => {
                if args.len() < 4 {
                    return Err(Error::Config("table needs t0, dt and at least two values".into()));
                }
                let grid = UniformGrid::from_step(args[0], args[1], args.len() - 3)
                    .map_err(|e| Error::Config(format!("table: {e}")))?;
                Ok(Signal::Table(SampledFn::new(grid, args[2..].to_vec())?))
            }
            other => Err(Error::Config(format!("unknown signal `{other}`"))),
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Constant(c) => write!(f, "constant({c})"),
            Signal::Exp { amp, rate } => write!(f, "exp({amp}, {rate})"),
            Signal::Sin { amp, freq, phase } => write!(f, "sin({amp}, {freq}, {phase})"),
            Signal::GaussianPulse { amp, center, width } => {
                write!(f, "gaussian-pulse({amp}, {center}, {width})")
            }
            Signal::SinRational { amp } => write!(f, "sin-rational({amp})"),
            Signal::Table(t) => {
                write!(f, "table({}, {}", t.grid().start(), t.grid().step())?;
                for v in t.values() {
                    write!(f, ", {v}")?;
                }
                write!(f, ")")
            }
        }
    }
}
