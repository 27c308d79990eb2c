//! Time profiles `a(t)` on the good season and spatial profiles `b(x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::quadrature::simpson_converged;
use crate::season::SeasonClock;

/// `a(t)`, evaluated at the phase `s ∈ (ρω, ω]` of the good season.
#[derive(Clone)]
pub enum TimeProfile {
    Constant(f64),
    /// `mean + amplitude·sin(2π·cycles·(s − ρω)/((1−ρ)ω))`.
    Sine {
        mean: f64,
        amplitude: f64,
        cycles: f64,
    },
    /// Values on a uniform lattice spanning `[ρω, ω]`, linearly interpolated.
    Table(Vec<f64>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Constant(c) => write!(f, "Constant({c})"),
            TimeProfile::Sine {
                mean,
                amplitude,
                cycles,
            } => write!(f, "Sine {{ mean: {mean}, amplitude: {amplitude}, cycles: {cycles} }}"),
            TimeProfile::Table(v) => write!(f, "Table({} values)", v.len()),
            TimeProfile::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TimeProfile {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeProfile::Custom(Arc::new(f))
    }

    /// Value at good-season phase `s`.
    pub fn eval(&self, s: f64, clock: &SeasonClock) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Sine {
                mean,
                amplitude,
                cycles,
            } => {
                let arg = 2.0 * std::f64::consts::PI * cycles * (s - clock.bad_length())
                    / clock.good_length();
                mean + amplitude * arg.sin()
            }
            TimeProfile::Table(values) => {
                if values.len() == 1 {
                    return values[0];
                }
                let m = values.len() - 1;
                let pos = ((s - clock.bad_length()) / clock.good_length()).clamp(0.0, 1.0)
                    * m as f64;
                let i = (pos.floor() as usize).min(m - 1);
                let w = pos - i as f64;
                (1.0 - w) * values[i] + w * values[i + 1]
            }
            TimeProfile::Custom(f) => f(s),
        }
    }

    /// Same profile plus a constant.
    pub fn shifted(&self, offset: f64) -> TimeProfile {
        match self {
            TimeProfile::Constant(c) => TimeProfile::Constant(c + offset),
            TimeProfile::Sine {
                mean,
                amplitude,
                cycles,
            } => TimeProfile::Sine {
                mean: mean + offset,
                amplitude: *amplitude,
                cycles: *cycles,
            },
            TimeProfile::Table(v) => TimeProfile::Table(v.iter().map(|x| x + offset).collect()),
            TimeProfile::Custom(f) => {
                let f = Arc::clone(f);
                TimeProfile::Custom(Arc::new(move |s| f(s) + offset))
            }
        }
    }

    /// Mean over the good season, `1/((1−ρ)ω) ∫_{ρω}^{ω} a(s) ds`.
    pub fn good_season_mean(&self, clock: &SeasonClock) -> Result<f64> {
        let (lo, hi) = (clock.bad_length(), clock.omega());
        let lattice = sample_phases(clock, 256);
        if lattice.iter().any(|&s| !self.eval(s, clock).is_finite()) {
            return Err(Error::InvalidParameter(
                "time profile produced a non-finite value".into(),
            ));
        }
        let mean = match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Table(v) if v.len() == 1 => v[0],
            TimeProfile::Table(v) => {
                let m = (v.len() - 1) as f64;
                let interior: f64 = v[1..v.len() - 1].iter().sum();
                (interior + 0.5 * (v[0] + v[v.len() - 1])) / m
            }
            _ => {
                let integral =
                    simpson_converged(|s| self.eval(s, clock), lo, hi, 64, 1 << 20, 1e-12);
                integral / (hi - lo)
            }
        };
        Ok(mean)
    }
}

/// `count + 1` phases evenly spanning `[ρω, ω]`.
pub(crate) fn sample_phases(clock: &SeasonClock, count: usize) -> Vec<f64> {
    let lo = clock.bad_length();
    let len = clock.good_length();
    (0..=count)
        .map(|j| lo + len * j as f64 / count as f64)
        .collect()
}

/// `b(x)` as a closed-form family or a table.
#[derive(Clone, Debug, PartialEq)]
pub enum SpatialProfile {
    Constant(f64),
    Linear {
        slope: f64,
        intercept: f64,
    },
    Gaussian {
        offset: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Cosine {
        offset: f64,
        amplitude: f64,
        wavelength: f64,
        phase: f64,
    },
    /// Piecewise-linear through `(xs[k], values[k])`, constant beyond the ends.
    Table { xs: Vec<f64>, values: Vec<f64> },
}

impl SpatialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SpatialProfile::Constant(c) => *c,
            SpatialProfile::Linear { slope, intercept } => intercept + slope * x,
            SpatialProfile::Gaussian {
                offset,
                amplitude,
                center,
                width,
            } => offset + amplitude * (-0.5 * ((x - center) / width).powi(2)).exp(),
            SpatialProfile::Cosine {
                offset,
                amplitude,
                wavelength,
                phase,
            } => offset + amplitude * (2.0 * std::f64::consts::PI * x / wavelength + phase).cos(),
            SpatialProfile::Table { xs, values } => {
                if x <= xs[0] {
                    return values[0];
                }
                let last = xs.len() - 1;
                if x >= xs[last] {
                    return values[last];
                }
                let k = xs.partition_point(|&p| p <= x) - 1;
                let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
                (1.0 - w) * values[k] + w * values[k + 1]
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            SpatialProfile::Gaussian { width, .. } if !(*width > 0.0) => {
                bad("gaussian profile width must be positive")
            }
            SpatialProfile::Cosine { wavelength, .. } if !(*wavelength > 0.0) => {
                bad("cosine profile wavelength must be positive")
            }
            SpatialProfile::Table { xs, values } => {
                if xs.is_empty() || xs.len() != values.len() {
                    return bad("profile table needs matching, non-empty x and value columns");
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("profile table x column must be strictly increasing");
                }
                if values.iter().chain(xs).any(|v| !v.is_finite()) {
                    return bad("profile table contains non-finite values");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, nodes: &[f64]) -> Field {
        Field::from_fn(nodes, |x| self.eval(x))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SpatialProfile::Constant(_))
    }
}
