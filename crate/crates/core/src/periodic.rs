//! Positive time-periodic solutions, built two ways: monotone iteration of
//! frozen-forcing linear problems started from a lower solution, and iteration
//! of the period map from an ordered pair of seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{check_step, flow_rhs, period_map, simulate, Rk4, SavePolicy, SimulateOptions, STAGE_OFFSETS};
use crate::field::Field;
use crate::spectral::SpectralResult;
use crate::system::SeasonalSystem;

/// Lower-solution checks tolerate this relative shortfall.
pub const SEED_TOLERANCE: f64 = 1e-10;
/// Successive monotone iterates may dip by at most this much (relative).
pub const MONOTONE_TOLERANCE: f64 = 1e-9;
/// Automatic halvings of `ε` before giving up on a lower seed.
pub const MAX_HALVINGS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitMethod {
    Monotone,
    Poincare,
}

impl OrbitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            OrbitMethod::Monotone => "monotone",
            OrbitMethod::Poincare => "poincare",
        }
    }
}

/// `U` over one period, sampled at `0`, `ρω` and every good-season substep.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicOrbit {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    /// `‖U(·,0) − U(·,ω)‖∞`.
    pub periodicity_defect: f64,
    pub method: OrbitMethod,
    pub iterations: usize,
}

impl PeriodicOrbit {
    /// `U(·, 0)`.
    pub fn start(&self) -> &Field {
        &self.states[0]
    }

    /// `U(·, ω)`.
    pub fn end(&self) -> &Field {
        &self.states[self.states.len() - 1]
    }

    /// Spatial mean of `U(·,0)` when it is flat to `1e−9` relative, else `None`.
    pub fn constant_value(&self) -> Option<f64> {
        let u = self.start();
        let spread = u.max() - u.min();
        (spread <= 1e-9 * u.sup_norm().max(f64::MIN_POSITIVE))
            .then(|| u.iter().sum::<f64>() / u.len() as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicOptions {
    /// Stopping tolerance, relative to the size of the orbit.
    pub tol: f64,
    pub max_sweeps: usize,
    pub max_periods: usize,
    /// Good-season substeps; `None` means the system default.
    pub substeps: Option<usize>,
    /// Optional bound on the initial data, raising the upper seed.
    pub upper_bound: Option<f64>,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            tol: 1e-8,
            max_sweeps: 500,
            max_periods: 5000,
            substeps: None,
            upper_bound: None,
        }
    }
}

impl PeriodicOptions {
    fn substeps(&self, sys: &SeasonalSystem) -> usize {
        self.substeps.unwrap_or_else(|| sys.default_substeps())
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "periodic tolerance must be positive (got {})",
                self.tol
            )));
        }
        if self.substeps.is_some_and(|s| s < 8) {
            return Err(Error::InvalidParameter("need at least 8 good-season substeps".into()));
        }
        Ok(())
    }
}

fn require_persistence(res: &SpectralResult) -> Result<()> {
    if res.lambda_p_omega >= 0.0 {
        return Err(Error::ExtinctionRegime {
            lambda_p_omega: res.lambda_p_omega,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedCheck {
    pub eps: f64,
    pub seed: Field,
    /// Period map of the seed.
    pub image: Field,
    /// `min_i (P(seed)_i − seed_i)`.
    pub min_margin: f64,
    pub valid: bool,
}

/// `ε·φ_p(·,0)` together with the one-period lower-solution check
/// `P(εφ_p) ≥ εφ_p`.
pub fn lower_solution_seed(
    res: &SpectralResult,
    sys: &SeasonalSystem,
    eps: f64,
    substeps: usize,
) -> Result<SeedCheck> {
    require_persistence(res)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lower-solution eps must be positive (got {eps})"
        )));
    }
    let seed = res.phi().scaled(eps);
    let image = period_map(&seed, sys, substeps)?;
    let min_margin = image.min_gap(&seed);
    let valid = min_margin >= -SEED_TOLERANCE * seed.sup_norm();
    Ok(SeedCheck {
        eps,
        seed,
        image,
        min_margin,
        valid,
    })
}

/// Lower seed starting at `ε = 1e−3·K0/max φ_p`, halving until valid.
/// Returns the accepted check and the number of halvings used.
pub fn find_lower_seed(
    res: &SpectralResult,
    sys: &SeasonalSystem,
    substeps: usize,
) -> Result<(SeedCheck, usize)> {
    require_persistence(res)?;
    let k0 = sys.model().k0();
    if !k0.is_finite() {
        return Err(Error::InvalidParameter(
            "periodic solutions need a finite saturation level K0".into(),
        ));
    }
    let mut eps = 1e-3 * k0 / res.phi().max();
    for halvings in 0..=MAX_HALVINGS {
        let check = lower_solution_seed(res, sys, eps, substeps)?;
        if check.valid {
            return Ok((check, halvings));
        }
        eps *= 0.5;
    }
    Err(Error::LowerSolution {
        halvings: MAX_HALVINGS,
        eps: eps * 2.0,
    })
}

/// One period of snapshots plus the stage forcing `f(Y) + K·Y` recorded at
/// every RK4 stage of every good-season substep.
struct Sweep {
    times: Vec<f64>,
    states: Vec<Field>,
    forcing: Vec<f64>,
}

/// Integrates one period. With `frozen = None` this is the nonlinear flow;
/// otherwise the good season solves `u' = dL[u] − K·u + g` with `g` taken
/// stage by stage from `frozen`.
fn sweep(
    u0: &Field,
    sys: &SeasonalSystem,
    substeps: usize,
    k: f64,
    frozen: Option<&[f64]>,
) -> Result<Sweep> {
    let n = sys.len();
    let clock = sys.clock();
    let model = sys.model();
    let op = sys.op();
    let dt = clock.good_length() / substeps as f64;
    let mut times = Vec::with_capacity(substeps + 2);
    let mut states = Vec::with_capacity(substeps + 2);
    let mut forcing = vec![0.0; substeps * 4 * n];
    times.push(0.0);
    states.push(u0.clone());

    let mut u = u0.scaled(clock.bad_season_factor()).into_vec();
    times.push(clock.bad_length());
    states.push(Field::new(u.clone()));

    let mut rk = Rk4::new(n);
    let mut next = vec![0.0; n];
    for j in 0..substeps {
        let s = clock.bad_length() + clock.good_length() * j as f64 / substeps as f64;
        rk.step(&u, dt, &mut next, |stage, y, out| {
            let phase = s + STAGE_OFFSETS[stage] * dt;
            let a_s = model.a(phase);
            let slot = &mut forcing[(j * 4 + stage) * n..(j * 4 + stage + 1) * n];
            for (i, g) in slot.iter_mut().enumerate() {
                *g = model.rate(i, phase, a_s, y[i]) + k * y[i];
            }
            match frozen {
                None => flow_rhs(sys, phase, y, out),
                Some(prev) => {
                    let g_prev = &prev[(j * 4 + stage) * n..(j * 4 + stage + 1) * n];
                    op.apply_into(y, out);
                    for i in 0..n {
                        out[i] += g_prev[i] - k * y[i];
                    }
                }
            }
        });
        let t = if j + 1 == substeps { clock.omega() } else { s + dt };
        check_step(&u, &next, t)?;
        std::mem::swap(&mut u, &mut next);
        times.push(t);
        states.push(Field::new(u.clone()));
    }
    Ok(Sweep {
        times,
        states,
        forcing,
    })
}

fn orbit_from(sweep: Sweep, method: OrbitMethod, iterations: usize) -> PeriodicOrbit {
    let periodicity_defect = sweep.states[0].distance(&sweep.states[sweep.states.len() - 1]);
    PeriodicOrbit {
        times: sweep.times,
        states: sweep.states,
        periodicity_defect,
        method,
        iterations,
    }
}

/// Monotone iteration from a lower solution `seed`.
///
/// `U_0` is the nonlinear trajectory from the seed. Sweep `k` solves the
/// linear problem with forcing `f(U_{k−1}) + K·U_{k−1}` frozen at the RK4
/// stages of the previous sweep and initial data `U_{k−1}(·,ω)`; a fixed
/// point of the sweep is exactly a periodic orbit of the discrete flow.
pub fn monotone_iteration(
    seed: &Field,
    sys: &SeasonalSystem,
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbit> {
    monotone_iteration_observed(seed, sys, opts, |_, _| {})
}

/// As [`monotone_iteration`], handing every iterate's snapshots
/// (`U_0`, `U_1`, ...) to `observe` as they are produced.
pub fn monotone_iteration_observed(
    seed: &Field,
    sys: &SeasonalSystem,
    opts: &PeriodicOptions,
    mut observe: impl FnMut(usize, &[Field]),
) -> Result<PeriodicOrbit> {
    opts.validate()?;
    seed.check_len(sys.len())?;
    if !seed.is_finite() || seed.min() < 0.0 || seed.max() <= 0.0 {
        return Err(Error::InvalidParameter(
            "monotone iteration needs a nonnegative, nonzero seed".into(),
        ));
    }
    let substeps = opts.substeps(sys);
    let k = sys.model().k_lip();
    let mut prev = sweep(seed, sys, substeps, k, None)?;
    observe(0, &prev.states);
    let shortfall = prev.states[prev.states.len() - 1].min_gap(seed);
    if shortfall < -SEED_TOLERANCE * seed.sup_norm() {
        return Err(Error::OrderViolation(format!(
            "seed is not a lower solution: one period lowers it by {:e}",
            -shortfall
        )));
    }
    let mut last_change = f64::INFINITY;
    for iteration in 1..=opts.max_sweeps {
        let start = prev.states[prev.states.len() - 1].clone();
        let next = sweep(&start, sys, substeps, k, Some(&prev.forcing))?;
        observe(iteration, &next.states);
        let mut min_inc = f64::INFINITY;
        let mut change = 0.0_f64;
        let mut scale = 0.0_f64;
        for (a, b) in next.states.iter().zip(&prev.states) {
            min_inc = min_inc.min(a.min_gap(b));
            change = change.max(a.distance(b));
            scale = scale.max(a.sup_norm());
        }
        if min_inc < -MONOTONE_TOLERANCE * scale.max(1.0) {
            return Err(Error::MonotonicityViolation {
                what: "monotone iteration",
                iteration,
                min_increment: min_inc,
            });
        }
        let converged = change <= opts.tol * next.states[0].sup_norm().max(f64::MIN_POSITIVE);
        last_change = change;
        prev = next;
        if converged {
            return Ok(orbit_from(prev, OrbitMethod::Monotone, iteration));
        }
    }
    Err(Error::NotConverged {
        what: "monotone iteration",
        iterations: opts.max_sweeps,
        error: last_change,
    })
}

/// `u0` advanced over one full period.
pub fn poincare_map(u0: &Field, sys: &SeasonalSystem, substeps: usize) -> Result<Field> {
    if u0.min() < 0.0 {
        return Err(Error::InvalidParameter(
            "period map needs nonnegative initial data".into(),
        ));
    }
    period_map(u0, sys, substeps)
}

/// Record of a sandwich iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichHistory {
    /// `‖upper − lower‖∞` after each period.
    pub gaps: Vec<f64>,
    pub lower: Field,
    pub upper: Field,
}

/// Iterates the period map on `lower ≤ upper`, asserting that the lower
/// iterates rise, the upper ones fall and the two stay ordered, until the gap
/// is below `tol` relative to the upper iterate.
pub fn sandwich(
    lower_seed: &Field,
    upper_seed: &Field,
    sys: &SeasonalSystem,
    opts: &PeriodicOptions,
) -> Result<SandwichHistory> {
    opts.validate()?;
    lower_seed.check_len(sys.len())?;
    upper_seed.check_len(sys.len())?;
    let substeps = opts.substeps(sys);
    let mut lower = lower_seed.clone();
    let mut upper = upper_seed.clone();
    if upper.min_gap(&lower) < 0.0 {
        return Err(Error::OrderViolation("upper seed lies below lower seed".into()));
    }
    let mut gaps = Vec::new();
    let mut last_gap = upper.distance(&lower);
    for period in 1..=opts.max_periods {
        let (lo, hi) = rayon::join(
            || poincare_map(&lower, sys, substeps),
            || poincare_map(&upper, sys, substeps),
        );
        let (lo, hi) = (lo?, hi?);
        let scale = hi.sup_norm().max(f64::MIN_POSITIVE);
        let slack = MONOTONE_TOLERANCE * scale;
        if lo.min_gap(&lower) < -slack {
            return Err(Error::MonotonicityViolation {
                what: "lower period-map iterates",
                iteration: period,
                min_increment: lo.min_gap(&lower),
            });
        }
        if upper.min_gap(&hi) < -slack {
            return Err(Error::MonotonicityViolation {
                what: "upper period-map iterates",
                iteration: period,
                min_increment: upper.min_gap(&hi),
            });
        }
        if hi.min_gap(&lo) < -slack {
            return Err(Error::OrderViolation(format!(
                "upper iterate fell below lower iterate at period {period}"
            )));
        }
        let gap = hi.distance(&lo);
        if gap > last_gap + slack {
            return Err(Error::OrderViolation(format!(
                "sandwich gap grew at period {period}: {last_gap:e} -> {gap:e}"
            )));
        }
        gaps.push(gap);
        last_gap = gap;
        lower = lo;
        upper = hi;
        if gap <= opts.tol * scale {
            return Ok(SandwichHistory { gaps, lower, upper });
        }
    }
    Err(Error::NotConverged {
        what: "period-map sandwich",
        iterations: opts.max_periods,
        error: last_gap,
    })
}

/// Upper seed `1.5·max{K0, bound}`.
pub fn upper_seed(sys: &SeasonalSystem, bound: Option<f64>) -> Result<Field> {
    let k0 = sys.model().k0();
    if !k0.is_finite() {
        return Err(Error::InvalidParameter(
            "periodic solutions need a finite saturation level K0".into(),
        ));
    }
    let top = bound.map_or(k0, |b| b.max(k0));
    Ok(Field::constant(sys.len(), 1.5 * top))
}

/// Periodic orbit from iterating the period map on `εφ_p ≤ U ≤ M`.
pub fn poincare_fixed_point(
    sys: &SeasonalSystem,
    res: &SpectralResult,
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbit> {
    opts.validate()?;
    let substeps = opts.substeps(sys);
    let (seed, _) = find_lower_seed(res, sys, substeps)?;
    let upper = upper_seed(sys, opts.upper_bound)?;
    poincare_fixed_point_from(&seed.seed, &upper, sys, opts)
}

/// As [`poincare_fixed_point`] from caller-supplied seeds.
pub fn poincare_fixed_point_from(
    lower: &Field,
    upper: &Field,
    sys: &SeasonalSystem,
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbit> {
    let history = sandwich(lower, upper, sys, opts)?;
    let mid: Field = history
        .lower
        .iter()
        .zip(history.upper.iter())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let substeps = opts.substeps(sys);
    let k = sys.model().k_lip();
    let s = sweep(&mid, sys, substeps, k, None)?;
    Ok(orbit_from(s, OrbitMethod::Poincare, history.gaps.len()))
}

/// Monotone iteration from an automatically chosen lower seed.
pub fn monotone_periodic(
    sys: &SeasonalSystem,
    res: &SpectralResult,
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbit> {
    opts.validate()?;
    let (seed, _) = find_lower_seed(res, sys, opts.substeps(sys))?;
    monotone_iteration(&seed.seed, sys, opts)
}

/// Re-simulates the orbit's start over one period and returns the largest
/// deviation from the stored states.
pub fn orbit_consistency(orbit: &PeriodicOrbit, sys: &SeasonalSystem, substeps: usize) -> Result<f64> {
    let opts = SimulateOptions {
        periods: 1,
        substeps,
        save: SavePolicy::Times(orbit.times.clone()),
    };
    let traj = simulate(orbit.start(), sys, &opts)?;
    Ok(traj
        .states
        .iter()
        .zip(&orbit.states)
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max))
}
