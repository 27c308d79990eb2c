//! Growth nonlinearity `f(x,t,u)` of the good season, its linearization
//! `f_u(x,t,0) = a(t) + b(x)`, and sample-based condition checks.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::SpatialGrid;
use crate::profile::{sample_phases, TimeProfile};
use crate::season::{Season, SeasonClock};

/// Floor applied to `K0` when growth is never positive.
pub const K0_FLOOR: f64 = 1e-6;
/// Safety factor on the sampled Lipschitz bound.
pub const K_LIP_SAFETY: f64 = 1.1;
/// Phase samples per good season used for `K0`/`K_lip` defaults.
const DEFAULT_PHASE_SAMPLES: usize = 1024;

type CustomFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum GrowthLaw {
    /// `u(a(t) + b(x) − c_sat·u)`.
    Logistic { c_sat: f64 },
    /// `(a(t) + b(x))u`.
    Linear,
    /// Arbitrary `f(x, phase, u)`.
    Custom(CustomFn),
}

impl fmt::Debug for GrowthLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthLaw::Logistic { c_sat } => write!(f, "Logistic {{ c_sat: {c_sat} }}"),
            GrowthLaw::Linear => write!(f, "Linear"),
            GrowthLaw::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Splits `a_raw + b_raw` so that the time part has zero good-season mean.
///
/// Returns `(a_raw − ā, b_raw + ā, ā)`.
pub fn normalize_ab(
    a_raw: &TimeProfile,
    b_raw: &Field,
    clock: &SeasonClock,
) -> Result<(TimeProfile, Field, f64)> {
    if !b_raw.is_finite() {
        return Err(Error::InvalidParameter("b contains non-finite values".into()));
    }
    let a_bar = a_raw.good_season_mean(clock)?;
    Ok((a_raw.shifted(-a_bar), b_raw.shifted(a_bar), a_bar))
}

#[derive(Clone, Debug)]
pub struct GrowthModel {
    law: GrowthLaw,
    clock: SeasonClock,
    /// Normalized: zero mean over the good season.
    a: TimeProfile,
    b: Field,
    a_bar: f64,
    nodes: Vec<f64>,
    k0: f64,
    k_lip: f64,
    k0_floored: bool,
}

impl GrowthModel {
    pub fn logistic(
        grid: &SpatialGrid,
        clock: SeasonClock,
        a_raw: TimeProfile,
        b_raw: Field,
        c_sat: f64,
    ) -> Result<Self> {
        if !(c_sat.is_finite() && c_sat > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "growth.c_sat must be positive (got {c_sat})"
            )));
        }
        let mut m = Self::with_law(grid, clock, a_raw, b_raw, GrowthLaw::Logistic { c_sat })?;
        let (k0, k_lip, floored) = default_k0_k_lip(&m)?;
        m.k0 = k0;
        m.k_lip = k_lip;
        m.k0_floored = floored;
        Ok(m)
    }

    /// `f = (a(t) + b(x))u`. There is no saturation level, so `K0 = ∞`.
    pub fn linear(
        grid: &SpatialGrid,
        clock: SeasonClock,
        a_raw: TimeProfile,
        b_raw: Field,
    ) -> Result<Self> {
        let mut m = Self::with_law(grid, clock, a_raw, b_raw, GrowthLaw::Linear)?;
        m.k0 = f64::INFINITY;
        m.k_lip = K_LIP_SAFETY * m.max_abs_linear_rate();
        Ok(m)
    }

    /// User-supplied `f(x, phase, u)` with explicit `K0` and `K_lip`.
    /// The linearization is taken as `a ≡ 0`, `b ≡ 0`.
    pub fn custom(
        grid: &SpatialGrid,
        clock: SeasonClock,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        k0: f64,
        k_lip: f64,
    ) -> Result<Self> {
        let mut m = Self::with_law(
            grid,
            clock,
            TimeProfile::Constant(0.0),
            Field::zeros(grid.len()),
            GrowthLaw::Custom(Arc::new(f)),
        )?;
        m.k0 = k0;
        m.k_lip = k_lip;
        Ok(m)
    }

    fn with_law(
        grid: &SpatialGrid,
        clock: SeasonClock,
        a_raw: TimeProfile,
        b_raw: Field,
        law: GrowthLaw,
    ) -> Result<Self> {
        b_raw.check_len(grid.len())?;
        let (a, b, a_bar) = normalize_ab(&a_raw, &b_raw, &clock)?;
        Ok(GrowthModel {
            law,
            clock,
            a,
            b,
            a_bar,
            nodes: grid.nodes().to_vec(),
            k0: 0.0,
            k_lip: 0.0,
            k0_floored: false,
        })
    }

    pub fn with_k0(mut self, k0: f64) -> Self {
        self.k0 = k0;
        self.k0_floored = false;
        self
    }

    pub fn with_k_lip(mut self, k_lip: f64) -> Self {
        self.k_lip = k_lip;
        self
    }

    /// Same `a`, `b` and clock, with `f` replaced by its linearization at zero.
    pub fn linearized(&self) -> GrowthModel {
        let mut m = self.clone();
        m.law = GrowthLaw::Linear;
        m.k0 = f64::INFINITY;
        m.k_lip = K_LIP_SAFETY * m.max_abs_linear_rate();
        m
    }

    /// Same law and spatial data under a different seasonal clock.
    /// `ā` is recomputed for the new good season.
    pub fn with_clock(&self, clock: SeasonClock) -> Result<GrowthModel> {
        let a_raw = self.a.shifted(self.a_bar);
        let b_raw = self.b.shifted(-self.a_bar);
        let (a, b, a_bar) = normalize_ab(&a_raw, &b_raw, &clock)?;
        let mut m = GrowthModel {
            clock,
            a,
            b,
            a_bar,
            ..self.clone()
        };
        if matches!(m.law, GrowthLaw::Logistic { .. }) {
            let (k0, k_lip, floored) = default_k0_k_lip(&m)?;
            m.k0 = k0;
            m.k_lip = k_lip;
            m.k0_floored = floored;
        } else if matches!(m.law, GrowthLaw::Linear) {
            m.k_lip = K_LIP_SAFETY * m.max_abs_linear_rate();
        }
        Ok(m)
    }

    pub fn law(&self) -> &GrowthLaw {
        &self.law
    }

    pub fn clock(&self) -> &SeasonClock {
        &self.clock
    }

    pub fn a_profile(&self) -> &TimeProfile {
        &self.a
    }

    /// Normalized `a` at good-season phase `s`.
    pub fn a(&self, s: f64) -> f64 {
        self.a.eval(s, &self.clock)
    }

    pub fn b(&self) -> &Field {
        &self.b
    }

    pub fn a_bar(&self) -> f64 {
        self.a_bar
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn k_lip(&self) -> f64 {
        self.k_lip
    }

    /// True when no positive saturation level exists and `K0` was floored.
    pub fn k0_floored(&self) -> bool {
        self.k0_floored
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `f` at node `i`, good-season phase `s`.
    #[inline]
    pub(crate) fn rate(&self, i: usize, s: f64, a_s: f64, u: f64) -> f64 {
        match &self.law {
            GrowthLaw::Logistic { c_sat } => u * (a_s + self.b[i] - c_sat * u),
            GrowthLaw::Linear => (a_s + self.b[i]) * u,
            GrowthLaw::Custom(f) => f(self.nodes[i], s, u),
        }
    }

    /// `f(x_i, t, u)`; `t` must lie in a good season.
    pub fn eval_f(&self, x_index: usize, t: f64, u: f64) -> Result<f64> {
        if x_index >= self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: x_index + 1,
            });
        }
        if self.clock.season_of(t) != Season::Good {
            return Err(Error::BadSeasonEvaluation { t });
        }
        let s = self.clock.phase(t);
        Ok(self.rate(x_index, s, self.a(s), u))
    }

    fn max_abs_linear_rate(&self) -> f64 {
        let phases = sample_phases(&self.clock, DEFAULT_PHASE_SAMPLES);
        let (a_min, a_max) = phases.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            let v = self.a(s);
            (lo.min(v), hi.max(v))
        });
        (a_max + self.b.max()).abs().max((a_min + self.b.min()).abs())
    }

    /// Spot-checks the monostable structure on a node × phase × level lattice.
    pub fn validate_conditions(&self, samples: usize) -> Result<ConditionReport> {
        if samples < 10 {
            return Err(Error::InvalidParameter(format!(
                "validation needs at least 10 samples (got {samples})"
            )));
        }
        let n = self.len();
        let node_ids: Vec<usize> = if n <= samples {
            (0..n).collect()
        } else {
            (0..samples).map(|k| k * (n - 1) / (samples - 1)).collect()
        };
        let phases = sample_phases(&self.clock, samples);
        let level_top = if self.k0.is_finite() { self.k0 + 1.0 } else { 1.0 };
        let levels: Vec<f64> = (1..=samples)
            .map(|j| level_top * j as f64 / samples as f64)
            .collect();

        let mut zero = CheckAccumulator::new("f_zero_at_origin");
        let mut per_capita = CheckAccumulator::new("per_capita_decreasing");
        let mut lipschitz = CheckAccumulator::new("lipschitz_bound");
        let mut saturation = CheckAccumulator::new("nonpositive_above_k0");

        for &i in &node_ids {
            for &s in &phases {
                let a_s = self.a(s);
                let f = |u: f64| self.rate(i, s, a_s, u);

                let f0 = f(0.0);
                zero.observe(f0 == 0.0, -f0.abs(), Witness { node: i, phase: s, u: 0.0, value: f0 });

                let mut prev_u = 0.0;
                let mut prev_f = f0;
                let mut prev_ratio = f64::INFINITY;
                for &u in &levels {
                    let fu = f(u);
                    let ratio = fu / u;
                    // margin > 0 means strictly decreasing
                    let margin = prev_ratio - ratio;
                    per_capita.observe(margin > 0.0, margin, Witness { node: i, phase: s, u, value: ratio });
                    prev_ratio = ratio;

                    let q = (fu - prev_f).abs() / (u - prev_u);
                    lipschitz.observe(q <= self.k_lip, self.k_lip - q, Witness { node: i, phase: s, u, value: q });
                    prev_u = u;
                    prev_f = fu;
                }

                if self.k0.is_finite() {
                    for j in 0..=samples {
                        let u = self.k0 * (1.0 + j as f64 / samples as f64);
                        let fu = f(u);
                        saturation.observe(fu <= 0.0, -fu, Witness { node: i, phase: s, u, value: fu });
                    }
                } else {
                    saturation.observe(false, f64::NEG_INFINITY, Witness { node: i, phase: s, u: f64::INFINITY, value: f64::NAN });
                }
            }
        }
        Ok(ConditionReport {
            checks: vec![
                zero.finish(),
                per_capita.finish(),
                lipschitz.finish(),
                saturation.finish(),
            ],
        })
    }
}

/// Default saturation level and Lipschitz constant for the logistic law.
///
/// `K0 = max (a(t)+b(x))/c_sat` over nodes and sampled phases (floored at
/// [`K0_FLOOR`], flagged when the floor is hit); `K_lip` is
/// [`K_LIP_SAFETY`] times the sampled `sup |∂f/∂u|` on `[0, K0+1]`.
pub fn default_k0_k_lip(m: &GrowthModel) -> Result<(f64, f64, bool)> {
    let GrowthLaw::Logistic { c_sat } = m.law else {
        return Err(Error::InvalidParameter(
            "default K0/K_lip are only defined for the logistic law".into(),
        ));
    };
    let phases = sample_phases(&m.clock, DEFAULT_PHASE_SAMPLES);
    let (a_min, a_max) = phases.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        let v = m.a(s);
        (lo.min(v), hi.max(v))
    });
    let raw_k0 = (a_max + m.b.max()) / c_sat;
    let floored = raw_k0 <= K0_FLOOR;
    let k0 = raw_k0.max(K0_FLOOR);
    // ∂f/∂u = a + b − 2c·u is affine in u and in (a+b): extremes sit at corners
    let top = 2.0 * c_sat * (k0 + 1.0);
    let sup = [a_min + m.b.min(), a_max + m.b.max()]
        .iter()
        .flat_map(|r| [r.abs(), (r - top).abs()])
        .fold(0.0_f64, f64::max);
    Ok((k0, K_LIP_SAFETY * sup, floored))
}

/// Where a condition check was closest to (or furthest past) failing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub node: usize,
    pub phase: f64,
    pub u: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest margin observed; negative means violated.
    pub worst_margin: f64,
    pub worst: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct CheckAccumulator {
    name: &'static str,
    passed: bool,
    worst_margin: f64,
    worst: Option<Witness>,
}

impl CheckAccumulator {
    fn new(name: &'static str) -> Self {
        CheckAccumulator {
            name,
            passed: true,
            worst_margin: f64::INFINITY,
            worst: None,
        }
    }

    fn observe(&mut self, ok: bool, margin: f64, w: Witness) {
        self.passed &= ok;
        if margin < self.worst_margin || self.worst.is_none() {
            self.worst_margin = margin;
            self.worst = Some(w);
        }
    }

    fn finish(self) -> ConditionCheck {
        ConditionCheck {
            name: self.name,
            passed: self.passed,
            worst_margin: self.worst_margin,
            worst: self.worst,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryMode;
    use rand::{Rng, SeedableRng};

    fn grid(n: usize) -> SpatialGrid {
        SpatialGrid::new(-1.0, 1.0, n, BoundaryMode::Truncated).unwrap()
    }

    fn clock() -> SeasonClock {
        SeasonClock::new(2.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn constant_a_moves_into_b() {
        let g = grid(5);
        let b_raw = Field::from_fn(g.nodes(), |x| x);
        let (a, b, a_bar) = normalize_ab(&TimeProfile::Constant(0.7), &b_raw, &clock()).unwrap();
        assert_eq!(a_bar, 0.7);
        assert_eq!(a.eval(1.5, &clock()), 0.0);
        for i in 0..5 {
            assert!((b[i] - (b_raw[i] + 0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn full_sine_has_zero_mean() {
        let c = clock();
        let a_raw = TimeProfile::Sine { mean: 0.0, amplitude: 1.0, cycles: 1.0 };
        let (a, _, a_bar) = normalize_ab(&a_raw, &Field::zeros(3), &c).unwrap();
        assert!(a_bar.abs() < 1e-12);
        for k in 0..=20 {
            let s = 1.0 + k as f64 / 20.0;
            assert!((a.eval(s, &c) - a_raw.eval(s, &c)).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_ramp_mean_is_analytic() {
        // ∫_1^2 t dt / 1 = 1.5
        let (_, _, a_bar) =
            normalize_ab(&TimeProfile::custom(|t| t), &Field::zeros(3), &clock()).unwrap();
        assert!((a_bar - 1.5).abs() < 1e-12);
    }

    #[test]
    fn normalization_preserves_the_sum() {
        let c = SeasonClock::new(1.3, 0.35, 0.2).unwrap();
        let g = grid(11);
        let a_raw = TimeProfile::custom(|s| (3.0 * s).cos() + 0.4 * s);
        let b_raw = Field::from_fn(g.nodes(), |x| 1.0 - x * x);
        let m = GrowthModel::logistic(&g, c, a_raw.clone(), b_raw.clone(), 1.0).unwrap();
        assert!(m.a_profile().good_season_mean(&c).unwrap().abs() < 1e-10);
        for k in 0..=50 {
            let s = c.bad_length() + c.good_length() * k as f64 / 50.0;
            for i in 0..11 {
                let lhs = m.a(s) + m.b()[i];
                let rhs = a_raw.eval(s, &c) + b_raw[i];
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_values() {
        let g = grid(3);
        let m = GrowthModel::logistic(&g, clock(), TimeProfile::Constant(0.0), Field::constant(3, 1.0), 1.0).unwrap();
        assert_eq!(m.eval_f(0, 1.5, 1.0).unwrap(), 0.0);
        assert_eq!(m.eval_f(1, 1.5, 0.0).unwrap(), 0.0);
        let m2 = GrowthModel::logistic(&g, clock(), TimeProfile::Constant(0.0), Field::constant(3, 2.0), 1.0).unwrap();
        assert!((m2.eval_f(2, 1.5, 0.5).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn eval_in_bad_season_is_an_error() {
        let g = grid(3);
        let m = GrowthModel::logistic(&g, clock(), TimeProfile::Constant(0.0), Field::constant(3, 1.0), 1.0).unwrap();
        assert!(matches!(m.eval_f(0, 0.5, 1.0), Err(Error::BadSeasonEvaluation { .. })));
        assert!(matches!(m.eval_f(0, 1.0, 1.0), Err(Error::BadSeasonEvaluation { .. })));
        assert!(m.eval_f(0, 2.0, 1.0).is_ok());
    }

    #[test]
    fn default_constants_unit_logistic() {
        let g = grid(3);
        let m = GrowthModel::logistic(&g, clock(), TimeProfile::Constant(0.0), Field::constant(3, 1.0), 1.0).unwrap();
        assert!((m.k0() - 1.0).abs() < 1e-15);
        // 1.1 · max_{u∈[0,2]} |1 − 2u| = 3.3
        assert!((m.k_lip() - 3.3).abs() < 1e-12);
        assert!(!m.k0_floored());
    }

    #[test]
    fn default_k0_floored_without_growth() {
        let g = grid(3);
        let m = GrowthModel::logistic(&g, clock(), TimeProfile::Constant(0.0), Field::constant(3, -1.0), 1.0).unwrap();
        assert_eq!(m.k0(), K0_FLOOR);
        assert!(m.k0_floored());
    }

    #[test]
    fn default_k0_sees_the_seasonal_peak() {
        let g = grid(3);
        let a = TimeProfile::Sine { mean: 0.0, amplitude: 0.5, cycles: 1.0 };
        let m = GrowthModel::logistic(&g, clock(), a, Field::constant(3, 0.5), 1.0).unwrap();
        assert!((m.k0() - 1.0).abs() < 1e-12, "{}", m.k0());
    }

    #[test]
    fn logistic_passes_all_conditions() {
        let g = grid(15);
        let a = TimeProfile::Sine { mean: 0.2, amplitude: 0.5, cycles: 2.0 };
        let b = Field::from_fn(g.nodes(), |x| 1.0 + 0.5 * x);
        let m = GrowthModel::logistic(&g, clock(), a, b, 2.0).unwrap();
        let r = m.validate_conditions(20).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn quadratic_growth_fails_monotonicity_with_witness() {
        let g = grid(5);
        let m = GrowthModel::custom(&g, clock(), |_, _, u| u * u, 1.0, 10.0).unwrap();
        let r = m.validate_conditions(10).unwrap();
        let pc = r.get("per_capita_decreasing").unwrap();
        assert!(!pc.passed);
        let w = pc.worst.unwrap();
        assert!(w.u > 0.0);
        assert!(pc.worst_margin < 0.0);
        assert!(r.get("f_zero_at_origin").unwrap().passed);
    }

    #[test]
    fn saturation_check_touches_zero_at_k0() {
        let g = grid(3);
        let m = GrowthModel::logistic(&g, clock(), TimeProfile::Constant(0.0), Field::constant(3, 1.0), 1.0)
            .unwrap()
            .with_k0(1.0);
        let r = m.validate_conditions(10).unwrap();
        let sat = r.get("nonpositive_above_k0").unwrap();
        assert!(sat.passed);
        assert_eq!(sat.worst.unwrap().u, 1.0);
        assert_eq!(sat.worst.unwrap().value, 0.0);
        assert!((m.eval_f(0, 1.5, 1.5).unwrap() + 0.75).abs() < 1e-15);
    }

    #[test]
    fn validation_needs_enough_samples() {
        let g = grid(3);
        let m = GrowthModel::logistic(&g, clock(), TimeProfile::Constant(0.0), Field::constant(3, 1.0), 1.0).unwrap();
        assert!(m.validate_conditions(5).is_err());
    }

    #[test]
    fn logistic_lipschitz_on_random_triples() {
        let g = grid(9);
        let a = TimeProfile::Sine { mean: 0.0, amplitude: 0.8, cycles: 1.0 };
        let b = Field::from_fn(g.nodes(), |x| 0.5 + x);
        let m = GrowthModel::logistic(&g, clock(), a, b, 1.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let top = m.k0() + 1.0;
        for _ in 0..1000 {
            let i = rng.gen_range(0..9);
            let t = rng.gen_range(1.0001..2.0);
            let u1 = rng.gen_range(0.0..top);
            let u2 = rng.gen_range(0.0..top);
            let df = m.eval_f(i, t, u1).unwrap() - m.eval_f(i, t, u2).unwrap();
            assert!(df.abs() <= m.k_lip() * (u1 - u2).abs() + 1e-14);
        }
        for i in 0..9 {
            for k in 0..=40 {
                let t = 1.0 + k as f64 / 40.0 + 1e-9;
                for s in [0.0, 0.1, 1.0, 5.0] {
                    assert!(m.eval_f(i, t.min(2.0), m.k0() + s).unwrap() <= 1e-12);
                }
            }
        }
    }
}
