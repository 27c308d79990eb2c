//! Seasonal clock: each period `(iω, (i+1)ω]` opens with a bad season
//! `(iω, (i+ρ)ω]` of pure decay followed by a good season `((i+ρ)ω, (i+1)ω]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Bad,
    Good,
}

impl Season {
    pub fn as_str(self) -> &'static str {
        match self {
            Season::Bad => "bad",
            Season::Good => "good",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeasonClock {
    omega: f64,
    rho: f64,
    delta: f64,
}

impl SeasonClock {
    pub fn new(omega: f64, rho: f64, delta: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(omega.is_finite() && omega > 0.0) {
            problems.push(format!("season.omega must be positive (got {omega})"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            problems.push(format!("season.rho must lie in (0,1) (got {rho})"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            problems.push(format!("season.delta must be positive (got {delta})"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidParameter(problems.join("; ")));
        }
        Ok(SeasonClock { omega, rho, delta })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `ρω`.
    pub fn bad_length(&self) -> f64 {
        self.rho * self.omega
    }

    /// `(1−ρ)ω`.
    pub fn good_length(&self) -> f64 {
        (1.0 - self.rho) * self.omega
    }

    /// Decay factor across a whole bad season, `e^{−δρω}`.
    pub fn bad_season_factor(&self) -> f64 {
        (-self.delta * self.bad_length()).exp()
    }

    /// Season containing `t`. Boundaries belong to the interval they close,
    /// so `t = (i+ρ)ω` is bad and `t = iω` (including `t = 0`) is good.
    pub fn season_of(&self, t: f64) -> Season {
        let r = t.rem_euclid(self.omega);
        if r == 0.0 || r > self.bad_length() {
            Season::Good
        } else {
            Season::Bad
        }
    }

    /// Index `i` of the period `(iω, (i+1)ω]` containing `t`; `t ≤ 0` maps to 0.
    pub fn period_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        ((t / self.omega).ceil() as usize).saturating_sub(1)
    }

    /// Position of `t` inside its period, in `(0, ω]` (and `ω` for `t = 0`).
    pub fn phase(&self, t: f64) -> f64 {
        let r = t.rem_euclid(self.omega);
        if r == 0.0 {
            self.omega
        } else {
            r
        }
    }

    /// Tolerance used when matching times against season boundaries.
    pub(crate) fn time_slack(&self) -> f64 {
        1e-12 * self.omega.max(1.0)
    }
}
