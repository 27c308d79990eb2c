//! Seasonal initial-value problem: closed-form decay through bad seasons,
//! classical RK4 through good seasons, plus order and part-metric utilities.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::season::{Season, SeasonClock};
use crate::system::SeasonalSystem;

/// Relative undershoot below zero tolerated before a step is rejected.
pub const UNDERSHOOT_TOLERANCE: f64 = 1e-9;

/// Which states `simulate` keeps.
#[derive(Clone, Debug, PartialEq)]
pub enum SavePolicy {
    /// `t = iω` for `i = 0..=periods`.
    PeriodEnds,
    /// `t = 0`, every bad-season end and every good-season substep.
    EverySubstep,
    /// Exactly these times (each within `[0, periods·ω]`).
    Times(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateOptions {
    pub periods: usize,
    pub substeps: usize,
    pub save: SavePolicy,
}

impl SimulateOptions {
    pub fn period_ends(periods: usize, substeps: usize) -> Self {
        SimulateOptions {
            periods,
            substeps,
            save: SavePolicy::PeriodEnds,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub seasons: Vec<Season>,
}

impl Trajectory {
    fn push(&mut self, clock: &SeasonClock, t: f64, state: Field) {
        self.times.push(t);
        self.seasons.push(clock.season_of(t));
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&Field> {
        self.states.last()
    }

    /// Largest value over every saved state.
    pub fn sup(&self) -> f64 {
        self.states.iter().map(Field::max).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest value over every saved state.
    pub fn inf(&self) -> f64 {
        self.states.iter().map(Field::min).fold(f64::INFINITY, f64::min)
    }
}

/// Exact solution of `u_t = −δu` over `[t0, t1]` inside one bad season.
pub fn decay_season(u: &Field, clock: &SeasonClock, t0: f64, t1: f64) -> Result<Field> {
    if t1 == t0 {
        return Ok(u.clone());
    }
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "decay interval must be increasing (got [{t0}, {t1}])"
        )));
    }
    let slack = clock.time_slack();
    let i = ((t0 + slack) / clock.omega()).floor();
    let start = i * clock.omega();
    if t0 < start - slack || t1 > start + clock.bad_length() + slack {
        return Err(Error::SeasonStraddle {
            t0,
            t1,
            season: "bad",
        });
    }
    Ok(u.scaled((-clock.delta() * (t1 - t0)).exp()))
}

/// Reusable RK4 stage buffers.
pub(crate) struct Rk4 {
    k: [Vec<f64>; 4],
    y: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Rk4 {
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            y: vec![0.0; n],
        }
    }

    /// One classical RK4 step. `rhs(stage, y, out)` is called for stages
    /// 0..4 at offsets 0, dt/2, dt/2, dt.
    pub(crate) fn step(
        &mut self,
        u: &[f64],
        dt: f64,
        out: &mut [f64],
        mut rhs: impl FnMut(usize, &[f64], &mut [f64]),
    ) {
        let [k0, k1, k2, k3] = &mut self.k;
        let y = &mut self.y;
        rhs(0, u, k0);
        for ((yi, ui), ki) in y.iter_mut().zip(u).zip(k0.iter()) {
            *yi = ui + 0.5 * dt * ki;
        }
        rhs(1, y, k1);
        for ((yi, ui), ki) in y.iter_mut().zip(u).zip(k1.iter()) {
            *yi = ui + 0.5 * dt * ki;
        }
        rhs(2, y, k2);
        for ((yi, ui), ki) in y.iter_mut().zip(u).zip(k2.iter()) {
            *yi = ui + dt * ki;
        }
        rhs(3, y, k3);
        for i in 0..u.len() {
            out[i] = u[i] + dt / 6.0 * (k0[i] + 2.0 * k1[i] + 2.0 * k2[i] + k3[i]);
        }
    }
}

/// Stage offsets of RK4 as fractions of `dt`.
pub(crate) const STAGE_OFFSETS: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

/// `out = d(W·y − y) + f(·, s, y)`.
#[inline]
pub(crate) fn flow_rhs(sys: &SeasonalSystem, s: f64, y: &[f64], out: &mut [f64]) {
    let model = sys.model();
    sys.op().apply_into(y, out);
    let a_s = model.a(s);
    for (i, (o, &v)) in out.iter_mut().zip(y).enumerate() {
        *o += model.rate(i, s, a_s, v);
    }
}

/// Rejects non-finite results and undershoots below `−1e−9·‖u‖∞`.
pub(crate) fn check_step(before: &[f64], after: &[f64], t: f64) -> Result<()> {
    let mut scale = 0.0_f64;
    let mut lowest = f64::INFINITY;
    for (&a, &b) in before.iter().zip(after) {
        if !b.is_finite() {
            return Err(Error::StepFailure {
                t,
                reason: "non-finite state (step too large)".into(),
            });
        }
        scale = scale.max(a.abs()).max(b.abs());
        lowest = lowest.min(b);
    }
    if lowest < -UNDERSHOOT_TOLERANCE * scale {
        return Err(Error::StepFailure {
            t,
            reason: format!("negative undershoot {lowest:e}; reduce dt"),
        });
    }
    Ok(())
}

/// One RK4 step of `u' = dL[u] + f(·,t,u)` from global time `t`.
pub fn good_season_step(u: &Field, sys: &SeasonalSystem, t: f64, dt: f64) -> Result<Field> {
    u.check_len(sys.len())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive (got {dt})")));
    }
    let clock = sys.clock();
    let slack = clock.time_slack();
    let i = ((t + slack) / clock.omega()).floor();
    let start = i * clock.omega();
    let s = t - start;
    if s < clock.bad_length() - slack || s + dt > clock.omega() + slack {
        return Err(Error::SeasonStraddle {
            t0: t,
            t1: t + dt,
            season: "good",
        });
    }
    let mut rk = Rk4::new(sys.len());
    let mut out = Field::zeros(sys.len());
    rk.step(u, dt, &mut out, |stage, y, k| {
        flow_rhs(sys, s + STAGE_OFFSETS[stage] * dt, y, k)
    });
    check_step(u, &out, t + dt)?;
    Ok(out)
}

/// Integrates one full good season of period `period`, calling
/// `observe(j, t_j, state_j, state_{j+1})` after every substep.
fn run_good_season(
    u: &mut Vec<f64>,
    sys: &SeasonalSystem,
    period: usize,
    substeps: usize,
    rk: &mut Rk4,
    mut observe: impl FnMut(usize, f64, &[f64], &[f64], &mut Rk4) -> Result<()>,
) -> Result<()> {
    let clock = sys.clock();
    let t0 = period as f64 * clock.omega();
    let dt = clock.good_length() / substeps as f64;
    let mut next = vec![0.0; u.len()];
    for j in 0..substeps {
        let s = clock.bad_length() + clock.good_length() * j as f64 / substeps as f64;
        rk.step(u, dt, &mut next, |stage, y, k| {
            flow_rhs(sys, s + STAGE_OFFSETS[stage] * dt, y, k)
        });
        let t_end = if j + 1 == substeps {
            t0 + clock.omega()
        } else {
            t0 + s + dt
        };
        check_step(u, &next, t_end)?;
        observe(j, t0 + s, u, &next, rk)?;
        std::mem::swap(u, &mut next);
    }
    Ok(())
}

/// State at `t = ω` from `u0` at `t = 0`: one bad season, one good season.
pub fn period_map(u0: &Field, sys: &SeasonalSystem, substeps: usize) -> Result<Field> {
    u0.check_len(sys.len())?;
    let mut u: Vec<f64> = u0.scaled(sys.clock().bad_season_factor()).into_vec();
    let mut rk = Rk4::new(sys.len());
    run_good_season(&mut u, sys, 0, substeps, &mut rk, |_, _, _, _, _| Ok(()))?;
    Ok(Field::new(u))
}

/// Solves the seasonal problem from `u0` over `periods` whole periods.
pub fn simulate(u0: &Field, sys: &SeasonalSystem, opts: &SimulateOptions) -> Result<Trajectory> {
    u0.check_len(sys.len())?;
    if !u0.is_finite() || u0.min() < 0.0 {
        return Err(Error::InvalidParameter(
            "initial state must be finite and nonnegative".into(),
        ));
    }
    if opts.substeps < 8 {
        return Err(Error::InvalidParameter(format!(
            "need at least 8 good-season substeps (got {})",
            opts.substeps
        )));
    }
    let clock = *sys.clock();
    let horizon = opts.periods as f64 * clock.omega();
    let slack = clock.time_slack();

    let mut wanted: Vec<f64> = match &opts.save {
        SavePolicy::Times(ts) => {
            if let Some(bad) = ts.iter().find(|t| !(**t >= 0.0 && **t <= horizon + slack)) {
                return Err(Error::InvalidParameter(format!(
                    "save time {bad} outside [0, {horizon}]"
                )));
            }
            let mut ts = ts.clone();
            ts.sort_by(f64::total_cmp);
            ts
        }
        _ => Vec::new(),
    };
    wanted.reverse(); // pop from the back in increasing order
    let every = opts.save == SavePolicy::EverySubstep;
    let by_time = matches!(opts.save, SavePolicy::Times(_));

    let mut traj = Trajectory::default();
    if by_time {
        while wanted.last().is_some_and(|&t| t <= slack) {
            let t = wanted.pop().unwrap_or(0.0);
            traj.push(&clock, t, u0.clone());
        }
    } else {
        traj.push(&clock, 0.0, u0.clone());
    }

    let mut u = u0.to_vec();
    let mut rk = Rk4::new(sys.len());
    let mut partial_rk = Rk4::new(sys.len());
    let mut partial = vec![0.0; sys.len()];
    let dt = clock.good_length() / opts.substeps as f64;
    for period in 0..opts.periods {
        let t0 = period as f64 * clock.omega();
        let bad_end = t0 + clock.bad_length();
        if by_time {
            while let Some(&t) = wanted.last() {
                if t > bad_end + slack {
                    break;
                }
                wanted.pop();
                let factor = (-clock.delta() * (t - t0).max(0.0)).exp();
                traj.push(&clock, t, Field::new(u.iter().map(|v| v * factor).collect()));
            }
        }
        let factor = clock.bad_season_factor();
        u.iter_mut().for_each(|v| *v *= factor);
        if every {
            traj.push(&clock, bad_end, Field::new(u.clone()));
        }

        run_good_season(&mut u, sys, period, opts.substeps, &mut rk, |j, t_j, before, after, _| {
            let t_next = if j + 1 == opts.substeps {
                t0 + clock.omega()
            } else {
                t_j + dt
            };
            while let Some(&t) = wanted.last().filter(|_| by_time) {
                if t > t_next + slack {
                    break;
                }
                wanted.pop();
                if (t - t_next).abs() <= slack {
                    traj.push(&clock, t, Field::new(after.to_vec()));
                } else {
                    // partial step from the last substep; the main integration is untouched
                    let h = t - t_j;
                    let s_j = t_j - t0;
                    partial_rk.step(before, h, &mut partial, |stage, y, k| {
                        flow_rhs(sys, s_j + STAGE_OFFSETS[stage] * h, y, k)
                    });
                    check_step(before, &partial, t)?;
                    traj.push(&clock, t, Field::new(partial.clone()));
                }
            }
            if every {
                traj.push(&clock, t_next, Field::new(after.to_vec()));
            }
            Ok(())
        })
        .map_err(|e| match e {
            Error::StepFailure { t, reason } => Error::StepFailure {
                t,
                reason: format!("{reason} (period {period})"),
            },
            other => other,
        })?;

        if opts.save == SavePolicy::PeriodEnds {
            traj.push(&clock, t0 + clock.omega(), Field::new(u.clone()));
        }
    }
    Ok(traj)
}

/// Part metric `inf{ln α ≥ 0 : u/α ≤ v ≤ αu} = max_i |ln(v_i/u_i)|`.
pub fn theta_metric(u: &Field, v: &Field) -> Result<f64> {
    v.check_len(u.len())?;
    let mut theta = 0.0_f64;
    for (i, (&a, &b)) in u.iter().zip(v.iter()).enumerate() {
        if !(a > 0.0) {
            return Err(Error::NonPositive { index: i, value: a });
        }
        if !(b > 0.0) {
            return Err(Error::NonPositive { index: i, value: b });
        }
        theta = theta.max((b / a).ln().abs());
    }
    Ok(theta)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderReport {
    /// `min (hi − lo)` over all snapshots and nodes.
    pub min_gap: f64,
    /// Snapshot and node where the minimum occurs.
    pub worst: (usize, usize),
    pub scale: f64,
    pub passed: bool,
}

/// Checks `hi ≥ lo` snapshot by snapshot, within `−1e−10·scale`.
pub fn check_order(hi: &Trajectory, lo: &Trajectory) -> Result<OrderReport> {
    if hi.times.len() != lo.times.len()
        || hi.times.iter().zip(&lo.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::InvalidParameter(
            "trajectories must share snapshot times".into(),
        ));
    }
    let mut min_gap = f64::INFINITY;
    let mut worst = (0, 0);
    let mut scale = 0.0_f64;
    for (k, (a, b)) in hi.states.iter().zip(&lo.states).enumerate() {
        b.check_len(a.len())?;
        scale = scale.max(a.sup_norm()).max(b.sup_norm());
        for (i, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            if x - y < min_gap {
                min_gap = x - y;
                worst = (k, i);
            }
        }
    }
    let scale = scale.max(f64::MIN_POSITIVE);
    Ok(OrderReport {
        min_gap,
        worst,
        scale,
        passed: min_gap >= -1e-10 * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryMode, SpatialGrid};
    use crate::growth::GrowthModel;
    use crate::kernel::Kernel;
    use crate::operator::DispersalOperator;
    use crate::profile::TimeProfile;

    fn wrap_system(b: f64, linear: bool, clock: SeasonClock) -> SeasonalSystem {
        let g = SpatialGrid::new(-5.0, 5.0, 40, BoundaryMode::PeriodicWrap).unwrap();
        let op = DispersalOperator::assemble(&g, &Kernel::tent(1.0).unwrap(), 1.0, true).unwrap();
        let bf = Field::constant(40, b);
        let m = if linear {
            GrowthModel::linear(&g, clock, TimeProfile::Constant(0.0), bf).unwrap()
        } else {
            GrowthModel::logistic(&g, clock, TimeProfile::Constant(0.0), bf, 1.0).unwrap()
        };
        SeasonalSystem::new(op, m).unwrap()
    }

    #[test]
    fn decay_halves_with_ln2() {
        let c = SeasonClock::new(2.0, 0.5, std::f64::consts::LN_2).unwrap();
        let u = Field::constant(4, 2.0);
        let v = decay_season(&u, &c, 0.0, 1.0).unwrap();
        for x in v.iter() {
            assert!((x - 1.0).abs() < 1e-15);
        }
        assert_eq!(decay_season(&u, &c, 0.3, 0.3).unwrap(), u);
    }

    #[test]
    fn decay_over_full_bad_season() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let v = decay_season(&Field::constant(2, 1.0), &c, 0.0, 1.0).unwrap();
        assert!((v[0] - 0.606_530_659_712_633_4).abs() < 1e-15);
        let v = decay_season(&Field::constant(2, 1.0), &c, 4.0, 5.0).unwrap();
        assert!((v[0] - (-0.5_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn decay_rejects_straddling_interval() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let err = decay_season(&Field::constant(2, 1.0), &c, 0.5, 1.5).unwrap_err();
        assert!(matches!(err, Error::SeasonStraddle { .. }));
    }

    #[test]
    fn zero_is_an_equilibrium_of_the_step() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        let v = good_season_step(&Field::zeros(40), &sys, 1.0, 0.1).unwrap();
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn step_matches_scalar_logistic() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let b = 1.3;
        let sys = wrap_system(b, false, c);
        let u0 = 0.4;
        for dt in [0.2, 0.1] {
            let v = good_season_step(&Field::constant(40, u0), &sys, 1.0, dt).unwrap();
            let e = (b * dt).exp();
            let exact = b * u0 * e / (b + u0 * (e - 1.0));
            // local error O(dt^5)
            assert!((v[7] - exact).abs() < 0.05 * dt.powi(5), "dt {dt}: {}", v[7] - exact);
        }
    }

    #[test]
    fn step_matches_exponential_for_linear_growth() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let b = 0.8;
        let sys = wrap_system(b, true, c);
        let dt = 0.1;
        let v = good_season_step(&Field::constant(40, 2.0), &sys, 1.2, dt).unwrap();
        let exact = 2.0 * (b * dt).exp();
        assert!((v[0] - exact).abs() < 2.0 * (b * dt).powi(5) / 120.0 * 1.1 + 1e-15);
    }

    #[test]
    fn step_rejects_bad_season_or_overshoot() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        let u = Field::constant(40, 1.0);
        assert!(good_season_step(&u, &sys, 0.5, 0.1).is_err());
        assert!(good_season_step(&u, &sys, 1.95, 0.1).is_err());
        assert!(good_season_step(&u, &sys, 1.9, 0.1).is_ok());
        assert!(good_season_step(&u, &sys, 1.0, 0.0).is_err());
    }

    #[test]
    fn huge_step_fails_loudly() {
        let c = SeasonClock::new(200.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        let mut u = Field::constant(40, 0.01);
        u[3] = 5.0;
        let err = good_season_step(&u, &sys, 100.0, 50.0).unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
    }

    #[test]
    fn trivial_horizons() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        let u0 = Field::constant(40, 0.3);
        let t = simulate(&u0, &sys, &SimulateOptions::period_ends(0, 16)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.states[0], u0);
        let z = simulate(&Field::zeros(40), &sys, &SimulateOptions::period_ends(3, 16)).unwrap();
        assert!(z.states.iter().all(|s| s.sup_norm() == 0.0));
        assert_eq!(z.times, vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn simulate_rejects_bad_inputs() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        assert!(simulate(&Field::constant(40, 1.0), &sys, &SimulateOptions::period_ends(1, 4)).is_err());
        assert!(simulate(&Field::constant(40, -1.0), &sys, &SimulateOptions::period_ends(1, 16)).is_err());
        assert!(simulate(&Field::constant(39, 1.0), &sys, &SimulateOptions::period_ends(1, 16)).is_err());
    }

    #[test]
    fn every_substep_layout() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        let opts = SimulateOptions { periods: 2, substeps: 8, save: SavePolicy::EverySubstep };
        let t = simulate(&Field::constant(40, 0.3), &sys, &opts).unwrap();
        assert_eq!(t.len(), 1 + 2 * (1 + 8));
        assert_eq!(t.times[1], 1.0);
        assert_eq!(t.seasons[1], Season::Bad);
        assert_eq!(t.times[9], 2.0);
        assert_eq!(t.seasons[9], Season::Good);
        assert!(t.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn explicit_times_hit_substeps_and_partial_steps() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        let u0 = Field::constant(40, 0.3);
        let all = simulate(&u0, &sys, &SimulateOptions { periods: 1, substeps: 8, save: SavePolicy::EverySubstep }).unwrap();
        let some = simulate(&u0, &sys, &SimulateOptions { periods: 1, substeps: 8, save: SavePolicy::Times(vec![1.25, 0.5, 2.0, 0.0]) }).unwrap();
        assert_eq!(some.times, vec![0.0, 0.5, 1.25, 2.0]);
        assert!((some.states[1][0] - 0.3 * (-0.25_f64).exp()).abs() < 1e-15);
        assert!(some.states[2].distance(&all.states[3]) < 1e-15);
        assert_eq!(some.states[3], *all.last().unwrap());
        let mid = simulate(&u0, &sys, &SimulateOptions { periods: 1, substeps: 8, save: SavePolicy::Times(vec![1.3]) }).unwrap();
        assert!(mid.states[0][0] > all.states[3][0] && mid.states[0][0] < all.states[4][0]);
        assert!(simulate(&u0, &sys, &SimulateOptions { periods: 1, substeps: 8, save: SavePolicy::Times(vec![2.5]) }).is_err());
    }

    #[test]
    fn theta_examples() {
        let u = Field::new(vec![1.0, 2.0]);
        assert_eq!(theta_metric(&u, &u).unwrap(), 0.0);
        assert!((theta_metric(&u, &u.scaled(2.0)).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = Field::new(vec![2.0, 1.0]);
        let th = theta_metric(&u, &v).unwrap();
        // brute-force scan of alpha
        let mut best = f64::INFINITY;
        for k in 0..=200_000 {
            let alpha = 1.0 + k as f64 * 1e-5;
            let ok = u.iter().zip(v.iter()).all(|(a, b)| a / alpha <= *b && *b <= alpha * a);
            if ok {
                best = alpha.ln();
                break;
            }
        }
        assert!((th - best).abs() < 1e-5);
        assert!((th - 2f64.ln()).abs() < 1e-15);
        assert!(theta_metric(&u, &Field::new(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn order_report_on_identical_and_scaled_runs() {
        let c = SeasonClock::new(2.0, 0.5, 0.5).unwrap();
        let sys = wrap_system(1.0, false, c);
        let lo = Field::from_fn(sys.grid().nodes(), |x| 0.2 + 0.1 * (x).sin().abs());
        let opts = SimulateOptions::period_ends(5, 16);
        let a = simulate(&lo, &sys, &opts).unwrap();
        let r = check_order(&a, &a).unwrap();
        assert_eq!(r.min_gap, 0.0);
        assert!(r.passed);
        let b = simulate(&lo.scaled(2.0), &sys, &opts).unwrap();
        assert!(check_order(&b, &a).unwrap().passed);
        assert!(!check_order(&a, &b).unwrap().passed);
        let short = simulate(&lo, &sys, &SimulateOptions::period_ends(4, 16)).unwrap();
        assert!(check_order(&a, &short).is_err());
    }
}
