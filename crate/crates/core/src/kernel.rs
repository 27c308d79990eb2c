//! Compactly supported dispersal kernels with unit mass on the real line.

use statrs::function::erf::erf;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum KernelFamily {
    /// `(1/γ)(1 − |z|/γ)`.
    Tent,
    /// `(3/(4γ))(1 − (z/γ)²)`.
    Epanechnikov,
    /// Gaussian with standard deviation `sigma`, cut at `±γ` and renormalized.
    TruncatedGaussian { sigma: f64 },
    /// Samples on a uniform lattice over `[−γ, γ]`, linearly interpolated.
    Tabulated { samples: Vec<f64> },
}

/// Dispersal kernel `J`, supported in `[−γ, γ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    gamma: f64,
    /// Multiplier that brings the raw shape to unit mass.
    scale: f64,
}

impl Kernel {
    pub fn tent(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Tent, gamma)
    }

    pub fn epanechnikov(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, gamma)
    }

    pub fn truncated_gaussian(gamma: f64, sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::TruncatedGaussian { sigma }, gamma)
    }

    pub fn tabulated(gamma: f64, samples: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Tabulated { samples }, gamma)
    }

    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "support radius gamma must be positive and finite (got {gamma})"
            )));
        }
        let scale = match &family {
            KernelFamily::Tent => 1.0 / gamma,
            KernelFamily::Epanechnikov => 0.75 / gamma,
            KernelFamily::TruncatedGaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "gaussian sigma must be positive (got {sigma})"
                    )));
                }
                let mass = sigma * (2.0 * std::f64::consts::PI).sqrt()
                    * erf(gamma / (sigma * std::f64::consts::SQRT_2));
                1.0 / mass
            }
            KernelFamily::Tabulated { samples } => {
                if samples.len() < 3 {
                    return Err(Error::InvalidKernel(
                        "tabulated kernel needs at least 3 samples".into(),
                    ));
                }
                if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidKernel(
                        "tabulated kernel samples must be finite and nonnegative".into(),
                    ));
                }
                // trapezoid is exact for the piecewise-linear interpolant
                let dz = 2.0 * gamma / (samples.len() - 1) as f64;
                let interior: f64 = samples[1..samples.len() - 1].iter().sum();
                let mass = dz * (interior + 0.5 * (samples[0] + samples[samples.len() - 1]));
                if mass <= 0.0 {
                    return Err(Error::InvalidKernel("tabulated kernel has zero mass".into()));
                }
                1.0 / mass
            }
        };
        let k = Kernel {
            family,
            gamma,
            scale,
        };
        if k.eval(0.0) <= 0.0 {
            return Err(Error::InvalidKernel("kernel must be positive at the origin".into()));
        }
        Ok(k)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `J(z)`; zero outside `[−γ, γ]`.
    pub fn eval(&self, z: f64) -> f64 {
        let r = z.abs();
        if r > self.gamma {
            return 0.0;
        }
        let s = r / self.gamma;
        let shape = match &self.family {
            KernelFamily::Tent => 1.0 - s,
            KernelFamily::Epanechnikov => 1.0 - s * s,
            KernelFamily::TruncatedGaussian { sigma } => (-0.5 * (r / sigma).powi(2)).exp(),
            KernelFamily::Tabulated { samples } => {
                let m = samples.len() - 1;
                let pos = (z + self.gamma) / (2.0 * self.gamma) * m as f64;
                let i = (pos.floor() as usize).min(m - 1);
                let w = pos - i as f64;
                (1.0 - w) * samples[i] + w * samples[i + 1]
            }
        };
        (self.scale * shape).max(0.0)
    }
}
