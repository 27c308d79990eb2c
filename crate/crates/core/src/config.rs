//! JSON run configuration: parsing, range validation and construction of the
//! numerical objects it describes.
//!
//! Relative file paths inside a config resolve against the config's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::ClassifyOptions;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{BoundaryMode, SpatialGrid};
use crate::growth::GrowthModel;
use crate::kernel::{Kernel, KernelFamily};
use crate::operator::DispersalOperator;
use crate::periodic::PeriodicOptions;
use crate::profile::{SpatialProfile, TimeProfile};
use crate::season::SeasonClock;
use crate::spectral::{EigenOptions, SweepBase};
use crate::system::SeasonalSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryMode,
}

fn default_boundary() -> BoundaryMode {
    BoundaryMode::Truncated
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Tent,
    Epanechnikov,
    TruncatedGaussian,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelKind,
    pub gamma: f64,
    /// Standard deviation for `truncated_gaussian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Inline samples for `tabulated`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    /// One-column file of samples for `tabulated`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub d: f64,
    /// Wrap mode: rescale rows to unit sum. Truncated mode: divide by the
    /// interior row sum.
    #[serde(default = "yes", rename = "normalize_rows", alias = "exact_row_normalization")]
    pub exact_row_normalization: bool,
}

fn yes() -> bool {
    true
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec {
            d: 1.0,
            exact_row_normalization: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonSpec {
    pub omega: f64,
    pub rho: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeShape {
    Sine { mean: f64, amplitude: f64, cycles: f64 },
    /// One column of values spanning the good season uniformly.
    Table { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Constant(f64),
    Shaped(TimeShape),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceShape {
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
        #[serde(default)]
        phase: f64,
    },
    /// Two columns `x, value`, interpolated linearly.
    Table { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSpec {
    Constant(f64),
    Shaped(SpaceShape),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Logistic,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    #[serde(default = "default_law", rename = "family", alias = "law")]
    pub law: LawKind,
    #[serde(default = "zero_time")]
    pub a: TimeSpec,
    pub b: SpaceSpec,
    #[serde(default = "one")]
    pub c_sat: f64,
    /// Overrides the derived saturation level.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "K0", alias = "k0")]
    pub k0: Option<f64>,
    /// Overrides the derived Lipschitz bound.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "K_lip", alias = "k_lip")]
    pub k_lip: Option<f64>,
}

fn default_law() -> LawKind {
    LawKind::Logistic
}

fn zero_time() -> TimeSpec {
    TimeSpec::Constant(0.0)
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// Good-season substeps; derived from the stability bound when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub periodic_tol: f64,
    pub max_sweeps: usize,
    pub max_periods: usize,
    pub periods: usize,
    pub extinct_threshold: f64,
    pub margin: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            substeps: None,
            eigen_tol: 1e-10,
            eigen_max_iter: 200_000,
            periodic_tol: 1e-8,
            max_sweeps: 500,
            max_periods: 5000,
            periods: 300,
            extinct_threshold: 1e-6,
            margin: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedSpec {
    Constant {
        value: f64,
    },
    /// `floor + amplitude·exp(−(x−center)²/(2·width²))`.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        #[serde(default)]
        floor: f64,
    },
    /// Two columns `x, value`, interpolated linearly onto the grid.
    Table {
        path: String,
    },
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Constant { value: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Write a `<out>.manifest.json` next to every result file.
    pub manifest: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { manifest: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub operator: OperatorSpec,
    pub season: SeasonSpec,
    pub growth: GrowthSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub seed: SeedSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Reads, parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    RunConfig::from_json_str(&text, base)
}

impl RunConfig {
    pub fn from_json_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<RunConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            Error::ConfigParse(format!(
                "at key `{key}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn referenced_paths(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        if let Some(p) = &self.kernel.path {
            out.push(("kernel.path", p.as_str()));
        }
        if let TimeSpec::Shaped(TimeShape::Table { path }) = &self.growth.a {
            out.push(("growth.a.path", path.as_str()));
        }
        if let SpaceSpec::Shaped(SpaceShape::Table { path }) = &self.growth.b {
            out.push(("growth.b.path", path.as_str()));
        }
        if let SeedSpec::Table { path } = &self.seed {
            out.push(("seed.path", path.as_str()));
        }
        out
    }

    /// Every range violation, in one error.
    pub fn validate(&self) -> Result<()> {
        let mut v: Vec<String> = Vec::new();
        let positive = |name: &str, x: f64, v: &mut Vec<String>| {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} must be positive (got {x})"));
            }
        };
        let g = &self.grid;
        if !(g.x_min.is_finite() && g.x_max.is_finite() && g.x_min < g.x_max) {
            v.push(format!(
                "grid.x_min must be below grid.x_max (got [{}, {}])",
                g.x_min, g.x_max
            ));
        }
        if g.n < 3 {
            v.push(format!("grid.n must be at least 3 (got {})", g.n));
        }
        let k = &self.kernel;
        positive("kernel.gamma", k.gamma, &mut v);
        match k.family {
            KernelKind::TruncatedGaussian => match k.sigma {
                Some(s) => positive("kernel.sigma", s, &mut v),
                None => v.push("kernel.sigma is required for truncated_gaussian".into()),
            },
            KernelKind::Tabulated => {
                if k.samples.is_some() == k.path.is_some() {
                    v.push("tabulated kernel needs exactly one of kernel.samples or kernel.path".into());
                }
            }
            _ => {
                if k.samples.is_some() || k.path.is_some() || k.sigma.is_some() {
                    v.push("kernel.sigma/samples/path do not apply to this family".into());
                }
            }
        }
        let h = (g.x_max - g.x_min) / g.n.max(1) as f64;
        if k.gamma > 0.0 && h.is_finite() && h > 0.0 {
            if k.gamma < h {
                v.push(Error::KernelUnresolved { gamma: k.gamma, h }.to_string());
            }
            if g.boundary == BoundaryMode::PeriodicWrap && 2.0 * k.gamma > g.x_max - g.x_min {
                v.push(
                    Error::WrapAliasing {
                        diameter: 2.0 * k.gamma,
                        length: g.x_max - g.x_min,
                    }
                    .to_string(),
                );
            }
        }
        positive("operator.d", self.operator.d, &mut v);
        let s = &self.season;
        positive("season.omega", s.omega, &mut v);
        if !(s.rho > 0.0 && s.rho < 1.0) {
            v.push(format!("season.rho must lie in (0,1) (got {})", s.rho));
        }
        positive("season.delta", s.delta, &mut v);
        let gr = &self.growth;
        if gr.law == LawKind::Logistic {
            positive("growth.c_sat", gr.c_sat, &mut v);
        }
        if let Some(k0) = gr.k0 {
            positive("growth.K0", k0, &mut v);
        }
        if let Some(kl) = gr.k_lip {
            positive("growth.K_lip", kl, &mut v);
        }
        match &gr.a {
            TimeSpec::Constant(c) if !c.is_finite() => v.push("growth.a must be finite".into()),
            TimeSpec::Shaped(TimeShape::Sine { mean, amplitude, cycles })
                if !(mean.is_finite() && amplitude.is_finite() && cycles.is_finite()) =>
            {
                v.push("growth.a sine parameters must be finite".into())
            }
            _ => {}
        }
        match &gr.b {
            SpaceSpec::Constant(c) if !c.is_finite() => v.push("growth.b must be finite".into()),
            SpaceSpec::Shaped(SpaceShape::Gaussian { width, .. }) => {
                positive("growth.b.width", *width, &mut v)
            }
            SpaceSpec::Shaped(SpaceShape::Cosine { wavelength, .. }) => {
                positive("growth.b.wavelength", *wavelength, &mut v)
            }
            _ => {}
        }
        let sv = &self.solver;
        if let Some(st) = sv.substeps {
            if st < 8 {
                v.push(format!("solver.substeps must be at least 8 (got {st})"));
            }
        }
        positive("solver.eigen_tol", sv.eigen_tol, &mut v);
        positive("solver.periodic_tol", sv.periodic_tol, &mut v);
        positive("solver.extinct_threshold", sv.extinct_threshold, &mut v);
        if !(sv.margin >= 0.0) {
            v.push(format!("solver.margin must be nonnegative (got {})", sv.margin));
        }
        for (name, val) in [
            ("solver.eigen_max_iter", sv.eigen_max_iter),
            ("solver.max_sweeps", sv.max_sweeps),
            ("solver.max_periods", sv.max_periods),
            ("solver.periods", sv.periods),
        ] {
            if val == 0 {
                v.push(format!("{name} must be at least 1"));
            }
        }
        match &self.seed {
            SeedSpec::Constant { value } if !(value.is_finite() && *value >= 0.0) => {
                v.push(format!("seed.value must be finite and nonnegative (got {value})"))
            }
            SeedSpec::Gaussian {
                amplitude,
                width,
                floor,
                ..
            } => {
                positive("seed.width", *width, &mut v);
                if !(*amplitude >= 0.0 && *floor >= 0.0) {
                    v.push("seed.amplitude and seed.floor must be nonnegative".into());
                }
            }
            _ => {}
        }
        for (key, p) in self.referenced_paths() {
            let full = self.resolve(p);
            if !full.is_file() {
                v.push(format!("{key}: file not found: {}", full.display()));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.x_min, self.grid.x_max, self.grid.n, self.grid.boundary)
    }

    pub fn clock(&self) -> Result<SeasonClock> {
        SeasonClock::new(self.season.omega, self.season.rho, self.season.delta)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let k = &self.kernel;
        let family = match k.family {
            KernelKind::Tent => KernelFamily::Tent,
            KernelKind::Epanechnikov => KernelFamily::Epanechnikov,
            KernelKind::TruncatedGaussian => KernelFamily::TruncatedGaussian {
                sigma: k.sigma.unwrap_or(f64::NAN),
            },
            KernelKind::Tabulated => {
                let samples = match (&k.samples, &k.path) {
                    (Some(s), _) => s.clone(),
                    (None, Some(p)) => read_columns(&self.resolve(p), 1)?.remove(0),
                    (None, None) => Vec::new(),
                };
                KernelFamily::Tabulated { samples }
            }
        };
        Kernel::new(family, k.gamma)
    }

    pub fn a_profile(&self) -> Result<TimeProfile> {
        Ok(match &self.growth.a {
            TimeSpec::Constant(c) => TimeProfile::Constant(*c),
            TimeSpec::Shaped(TimeShape::Sine {
                mean,
                amplitude,
                cycles,
            }) => TimeProfile::Sine {
                mean: *mean,
                amplitude: *amplitude,
                cycles: *cycles,
            },
            TimeSpec::Shaped(TimeShape::Table { path }) => {
                let values = read_columns(&self.resolve(path), 1)?.remove(0);
                if values.is_empty() {
                    return Err(Error::Config(vec![format!("growth.a table {path} is empty")]));
                }
                TimeProfile::Table(values)
            }
        })
    }

    /// `b` exactly as written (before the mean of `a` is folded in).
    pub fn b_profile(&self) -> Result<SpatialProfile> {
        let p = match &self.growth.b {
            SpaceSpec::Constant(c) => SpatialProfile::Constant(*c),
            SpaceSpec::Shaped(SpaceShape::Linear { slope, intercept }) => SpatialProfile::Linear {
                slope: *slope,
                intercept: *intercept,
            },
            SpaceSpec::Shaped(SpaceShape::Gaussian {
                offset,
                amplitude,
                center,
                width,
            }) => SpatialProfile::Gaussian {
                offset: *offset,
                amplitude: *amplitude,
                center: *center,
                width: *width,
            },
            SpaceSpec::Shaped(SpaceShape::Cosine {
                offset,
                amplitude,
                wavelength,
                phase,
            }) => SpatialProfile::Cosine {
                offset: *offset,
                amplitude: *amplitude,
                wavelength: *wavelength,
                phase: *phase,
            },
            SpaceSpec::Shaped(SpaceShape::Table { path }) => {
                let mut cols = read_columns(&self.resolve(path), 2)?;
                let values = cols.pop().unwrap_or_default();
                let xs = cols.pop().unwrap_or_default();
                SpatialProfile::Table { xs, values }
            }
        };
        p.validate()?;
        Ok(p)
    }

    pub fn operator(&self) -> Result<DispersalOperator> {
        DispersalOperator::assemble(
            &self.grid()?,
            &self.kernel()?,
            self.operator.d,
            self.operator.exact_row_normalization,
        )
    }

    pub fn build_system(&self) -> Result<SeasonalSystem> {
        let grid = self.grid()?;
        let op = DispersalOperator::assemble(
            &grid,
            &self.kernel()?,
            self.operator.d,
            self.operator.exact_row_normalization,
        )?;
        let clock = self.clock()?;
        let a = self.a_profile()?;
        let b = self.b_profile()?.sample(grid.nodes());
        let mut model = match self.growth.law {
            LawKind::Logistic => GrowthModel::logistic(&grid, clock, a, b, self.growth.c_sat)?,
            LawKind::Linear => GrowthModel::linear(&grid, clock, a, b)?,
        };
        if let Some(k0) = self.growth.k0 {
            model = model.with_k0(k0);
        }
        if let Some(kl) = self.growth.k_lip {
            model = model.with_k_lip(kl);
        }
        SeasonalSystem::new(op, model)
    }

    pub fn initial_state(&self, grid: &SpatialGrid) -> Result<Field> {
        let u = match &self.seed {
            SeedSpec::Constant { value } => Field::constant(grid.len(), *value),
            SeedSpec::Gaussian {
                amplitude,
                center,
                width,
                floor,
            } => Field::from_fn(grid.nodes(), |x| {
                floor + amplitude * (-0.5 * ((x - center) / width).powi(2)).exp()
            }),
            SeedSpec::Table { path } => {
                let mut cols = read_columns(&self.resolve(path), 2)?;
                let values = cols.pop().unwrap_or_default();
                let xs = cols.pop().unwrap_or_default();
                let p = SpatialProfile::Table { xs, values };
                p.validate()?;
                p.sample(grid.nodes())
            }
        };
        if !u.is_finite() || u.min() < 0.0 {
            return Err(Error::Config(vec![
                "seed must be finite and nonnegative on the grid".into(),
            ]));
        }
        Ok(u)
    }

    /// Same config with `δ` and `ρ` replaced.
    pub fn with_season(&self, delta: f64, rho: f64) -> RunConfig {
        let mut c = self.clone();
        c.season.delta = delta;
        c.season.rho = rho;
        c
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tol: self.solver.eigen_tol,
            max_iter: self.solver.eigen_max_iter,
        }
    }

    pub fn periodic_options(&self) -> PeriodicOptions {
        PeriodicOptions {
            tol: self.solver.periodic_tol,
            max_sweeps: self.solver.max_sweeps,
            max_periods: self.solver.max_periods,
            substeps: self.solver.substeps,
            upper_bound: None,
        }
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            periods: self.solver.periods,
            extinct_threshold: self.solver.extinct_threshold,
            margin: self.solver.margin,
            substeps: self.solver.substeps,
            eigen: self.eigen_options(),
            periodic: self.periodic_options(),
            ..ClassifyOptions::default()
        }
    }

    /// Domain-sweep ingredients at this config's cell width. The good-season
    /// mean of `a` is folded into `b`, matching the normalized model.
    pub fn sweep_base(&self) -> Result<SweepBase> {
        let clock = self.clock()?;
        let a_bar = self.a_profile()?.good_season_mean(&clock)?;
        let b = match self.b_profile()? {
            SpatialProfile::Constant(c) => SpatialProfile::Constant(c + a_bar),
            SpatialProfile::Linear { slope, intercept } => SpatialProfile::Linear {
                slope,
                intercept: intercept + a_bar,
            },
            SpatialProfile::Gaussian {
                offset,
                amplitude,
                center,
                width,
            } => SpatialProfile::Gaussian {
                offset: offset + a_bar,
                amplitude,
                center,
                width,
            },
            SpatialProfile::Cosine {
                offset,
                amplitude,
                wavelength,
                phase,
            } => SpatialProfile::Cosine {
                offset: offset + a_bar,
                amplitude,
                wavelength,
                phase,
            },
            SpatialProfile::Table { xs, values } => SpatialProfile::Table {
                xs,
                values: values.into_iter().map(|v| v + a_bar).collect(),
            },
        };
        Ok(SweepBase {
            kernel: self.kernel()?,
            d: self.operator.d,
            b,
            clock,
            h: self.grid()?.h(),
            eigen: self.eigen_options(),
        })
    }
}

/// Reads `count` numeric columns from a CSV file, skipping a header row if
/// its first field is not a number.
pub fn read_columns(path: &Path, count: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::ConfigParse(format!("{}: {other:?}", path.display())),
        })?;
    let mut cols = vec![Vec::new(); count];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < count {
            return Err(Error::ConfigParse(format!(
                "{}: row {} has {} columns, expected {count}",
                path.display(),
                line + 1,
                rec.len()
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            (0..count).map(|k| rec[k].parse::<f64>()).collect();
        match parsed {
            Ok(vals) => vals.into_iter().zip(cols.iter_mut()).for_each(|(v, c)| c.push(v)),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::ConfigParse(format!(
                    "{}: row {}: {e}",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    Ok(cols)
}
