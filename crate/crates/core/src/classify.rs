//! Extinction/persistence experiments: long simulations compared against the
//! sign of the seasonal principal eigenvalue.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{simulate, theta_metric, SimulateOptions};
use crate::field::Field;
use crate::periodic::{poincare_fixed_point, PeriodicOptions};
use crate::season::SeasonClock;
use crate::spectral::{seasonal_principal, verify_floquet, EigenOptions};
use crate::system::SeasonalSystem;

/// Number of trailing periods used for rates and monotone-tail tests.
pub const TAIL_PERIODS: usize = 10;
/// Trailing period ends that must all be close to the orbit.
pub const PERSIST_PERIODS: usize = 3;
/// Period-end sup norms at or below this are treated as underflowed.
const UNDERFLOW_FLOOR: f64 = 1e-200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicted {
    Extinction,
    Persistence,
    Marginal,
}

impl Predicted {
    pub fn from_lambda(lambda_p_omega: f64, margin: f64) -> Self {
        if lambda_p_omega >= margin {
            Predicted::Extinction
        } else if lambda_p_omega <= -margin {
            Predicted::Persistence
        } else {
            Predicted::Marginal
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Predicted::Extinction => "extinction",
            Predicted::Persistence => "persistence",
            Predicted::Marginal => "marginal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observed {
    Extinct,
    Persistent,
    Undecided,
}

impl Observed {
    pub fn as_str(self) -> &'static str {
        match self {
            Observed::Extinct => "extinct",
            Observed::Persistent => "persistent",
            Observed::Undecided => "undecided",
        }
    }
}

/// Whether an observation confirms a prediction. Marginal predictions
/// confirm nothing.
pub fn agrees(predicted: Predicted, observed: Observed) -> bool {
    matches!(
        (predicted, observed),
        (Predicted::Extinction, Observed::Extinct) | (Predicted::Persistence, Observed::Persistent)
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    pub periods: usize,
    pub extinct_threshold: f64,
    pub margin: f64,
    /// Θ to the periodic orbit below which a period end counts as converged.
    pub theta_tol: f64,
    pub substeps: Option<usize>,
    pub eigen: EigenOptions,
    pub periodic: PeriodicOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            periods: 300,
            extinct_threshold: 1e-6,
            margin: 0.05,
            theta_tol: 1e-4,
            substeps: None,
            eigen: EigenOptions::default(),
            periodic: PeriodicOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyVerdict {
    pub lambda_p: f64,
    pub lambda_p_omega: f64,
    pub predicted: Predicted,
    pub observed: Observed,
    pub agreement: bool,
    /// Geometric mean of `sup u((i+1)ω)/sup u(iω)` over the last ten periods
    /// that have not underflowed.
    pub per_period_ratio: f64,
    /// `sup u(·, iω)` for `i = 0..=periods`.
    pub sup_history: Vec<f64>,
    /// `Θ(u(·,iω), U(·,0))` for each period end, when an orbit exists
    /// (`None` where a state is not strictly positive).
    pub theta_to_orbit: Option<Vec<Option<f64>>>,
    /// Why the periodic orbit could not be built, when one was attempted.
    pub orbit_error: Option<String>,
    /// Initial data identically zero.
    pub degenerate: bool,
    pub final_state: Field,
    pub orbit_start: Option<Field>,
}

/// `(sup[e]/sup[e−k])^{1/k}` for the last `k ≤ 10` steps ending at the last
/// entry above the underflow floor.
fn tail_ratio(sup: &[f64]) -> f64 {
    let Some(end) = sup.iter().rposition(|&s| s > UNDERFLOW_FLOOR) else {
        return 0.0;
    };
    if end == 0 {
        return if sup.len() > 1 { 0.0 } else { f64::NAN };
    }
    let k = end.min(TAIL_PERIODS);
    (sup[end] / sup[end - k]).powf(1.0 / k as f64)
}

/// Simulates `periods` periods from `u0` and classifies the outcome.
pub fn classify_run(sys: &SeasonalSystem, u0: &Field, opts: &ClassifyOptions) -> Result<DichotomyVerdict> {
    if opts.periods < 50 {
        return Err(Error::InvalidParameter(format!(
            "classification needs at least 50 periods (got {})",
            opts.periods
        )));
    }
    if !(opts.extinct_threshold > 0.0 && opts.margin >= 0.0 && opts.theta_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "classification thresholds must be positive".into(),
        ));
    }
    u0.check_len(sys.len())?;
    let res = seasonal_principal(sys, &opts.eigen)?;
    let predicted = Predicted::from_lambda(res.lambda_p_omega, opts.margin);
    let substeps = opts.substeps.unwrap_or_else(|| sys.default_substeps());
    let traj = simulate(u0, sys, &SimulateOptions::period_ends(opts.periods, substeps))?;
    let sup_history: Vec<f64> = traj.states.iter().map(Field::sup_norm).collect();
    let degenerate = sup_history[0] == 0.0;

    let (orbit_start, orbit_error) = if res.lambda_p_omega < 0.0 && !degenerate {
        let popts = PeriodicOptions {
            substeps: Some(substeps),
            upper_bound: Some(u0.max()),
            ..opts.periodic
        };
        match poincare_fixed_point(sys, &res, &popts) {
            Ok(orbit) => (Some(orbit.start().clone()), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let theta_to_orbit = orbit_start.as_ref().map(|orbit| {
        traj.states
            .iter()
            .map(|u| theta_metric(orbit, u).ok())
            .collect::<Vec<_>>()
    });

    let last = sup_history.len() - 1;
    let extinct = if degenerate {
        true
    } else {
        let below = sup_history[last] < opts.extinct_threshold * sup_history[0];
        let tail = &sup_history[last.saturating_sub(TAIL_PERIODS)..];
        let decreasing = tail
            .windows(2)
            .all(|w| w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0));
        below && decreasing
    };
    let persistent = theta_to_orbit.as_ref().is_some_and(|th| {
        th.len() >= PERSIST_PERIODS
            && th[th.len() - PERSIST_PERIODS..]
                .iter()
                .all(|t| t.is_some_and(|t| t < opts.theta_tol))
    });
    let observed = if extinct {
        Observed::Extinct
    } else if persistent {
        Observed::Persistent
    } else {
        Observed::Undecided
    };
    Ok(DichotomyVerdict {
        lambda_p: res.lambda_p(),
        lambda_p_omega: res.lambda_p_omega,
        predicted,
        observed,
        agreement: agrees(predicted, observed),
        per_period_ratio: tail_ratio(&sup_history),
        sup_history,
        theta_to_orbit,
        orbit_error,
        degenerate,
        final_state: traj.states[last].clone(),
        orbit_start,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRateReport {
    /// `None` when the check does not apply.
    pub skipped: Option<String>,
    /// `e^{−λ^ω ω}`.
    pub linear_rate: f64,
    pub measured: f64,
    pub slack: f64,
    pub passed: bool,
}

/// In an observed extinction, the nonlinear decay per period must be at
/// least as fast as the linearized multiplier, up to `+0.02`.
pub fn decay_rate_check(verdict: &DichotomyVerdict, clock: &SeasonClock) -> DecayRateReport {
    let linear_rate = (-verdict.lambda_p_omega * clock.omega()).exp();
    let slack = 0.02;
    let skipped = if verdict.predicted != Predicted::Extinction {
        Some(format!("prediction is {}", verdict.predicted.as_str()))
    } else if verdict.observed != Observed::Extinct {
        Some(format!("observation is {}", verdict.observed.as_str()))
    } else if verdict.degenerate {
        Some("zero initial data".to_string())
    } else {
        None
    };
    let measured = verdict.per_period_ratio;
    DecayRateReport {
        passed: skipped.is_some() || measured <= linear_rate + slack,
        skipped,
        linear_rate,
        measured,
        slack,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub delta: f64,
    pub rho: f64,
    pub lambda_p_omega: f64,
    /// `λ^ω` recovered from the one-period Floquet multiplier.
    pub lambda_p_omega_floquet: f64,
    pub predicted: Predicted,
    pub observed: Observed,
    pub agreement: bool,
    /// `|λ^ω| > margin`: agreement is mandatory.
    pub decisive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub delta: f64,
    pub rho: f64,
    pub outcome: std::result::Result<GridCell, String>,
}

/// Substeps used for the per-cell Floquet cross-check.
pub const FLOQUET_SUBSTEPS: usize = 1024;

/// Classifies every `(δ, ρ)` pair. `build` returns the system and initial
/// data for one cell; cells run in parallel and come back ordered by
/// `(δ, ρ)` as listed.
pub fn dichotomy_grid<F>(
    build: F,
    deltas: &[f64],
    rhos: &[f64],
    opts: &ClassifyOptions,
) -> Result<Vec<GridRow>>
where
    F: Fn(f64, f64) -> Result<(SeasonalSystem, Field)> + Sync,
{
    if deltas.len() < 2 || rhos.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "dichotomy grid needs at least 2x2 cells (got {}x{})",
            deltas.len(),
            rhos.len()
        )));
    }
    let cells: Vec<(f64, f64)> = deltas
        .iter()
        .flat_map(|&d| rhos.iter().map(move |&r| (d, r)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(delta, rho)| {
            let outcome = (|| {
                let (sys, u0) = build(delta, rho)?;
                let verdict = classify_run(&sys, &u0, opts)?;
                let res = seasonal_principal(&sys, &opts.eigen)?;
                let floquet = verify_floquet(&res, &sys, FLOQUET_SUBSTEPS)?;
                Ok::<_, Error>(GridCell {
                    delta,
                    rho,
                    lambda_p_omega: verdict.lambda_p_omega,
                    lambda_p_omega_floquet: floquet.measured_lambda_p_omega,
                    predicted: verdict.predicted,
                    observed: verdict.observed,
                    agreement: verdict.agreement,
                    decisive: verdict.lambda_p_omega.abs() > opts.margin,
                })
            })()
            .map_err(|e| e.to_string());
            GridRow { delta, rho, outcome }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_bands() {
        assert_eq!(Predicted::from_lambda(0.05, 0.05), Predicted::Extinction);
        assert_eq!(Predicted::from_lambda(-0.05, 0.05), Predicted::Persistence);
        assert_eq!(Predicted::from_lambda(0.0, 0.05), Predicted::Marginal);
        assert!(!agrees(Predicted::Marginal, Observed::Extinct));
    }

    #[test]
    fn tail_ratio_handles_underflow() {
        let sup: Vec<f64> = (0..30).map(|i| 0.5_f64.powi(i)).collect();
        assert!((tail_ratio(&sup) - 0.5).abs() < 1e-15);
        let mut under = sup.clone();
        under.extend([0.0; 5]);
        assert!((tail_ratio(&under) - 0.5).abs() < 1e-15);
        assert_eq!(tail_ratio(&[0.0, 0.0]), 0.0);
        let short = [1.0, 2.0, 4.0];
        assert!((tail_ratio(&short) - 2.0).abs() < 1e-15);
    }
}
