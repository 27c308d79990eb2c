//! Principal eigenpair of `−dL − b`, the seasonal principal eigenvalue
//! `λ^ω = δρ + (1−ρ)λ_p`, the time-periodic eigenfunction and domain sweeps.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{simulate, SavePolicy, SimulateOptions};
use crate::field::Field;
use crate::grid::{BoundaryMode, SpatialGrid};
use crate::kernel::Kernel;
use crate::operator::DispersalOperator;
use crate::profile::SpatialProfile;
use crate::quadrature::adaptive_simpson;
use crate::season::SeasonClock;
use crate::system::SeasonalSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Bound on the eigen-residual `‖(−dL − b)φ − λφ‖∞` for `‖φ‖∞ = 1`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

/// Perron pair of `M = d(W − I) + diag(b)`, reported as `λ_p = −μ(M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalEigen {
    pub lambda_p: f64,
    /// Positive, `max = 1`.
    pub phi: Field,
    pub residual: f64,
    pub iterations: usize,
    /// `d − max_i(b_i + d·Σ_j W_ij)`.
    pub bound_lo: f64,
    /// `d − max_i b_i`.
    pub bound_hi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub eigen: PrincipalEigen,
    pub clock: SeasonClock,
    pub lambda_p_omega: f64,
}

impl SpectralResult {
    pub fn lambda_p(&self) -> f64 {
        self.eigen.lambda_p
    }

    pub fn phi(&self) -> &Field {
        &self.eigen.phi
    }
}

/// `δρ + (1−ρ)λ_p`.
pub fn lambda_p_omega(clock: &SeasonClock, lambda_p: f64) -> f64 {
    clock.delta() * clock.rho() + (1.0 - clock.rho()) * lambda_p
}

struct Metzler<'a> {
    op: &'a DispersalOperator,
    b: &'a [f64],
}

impl Metzler<'_> {
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply_into(x, out);
        for ((o, xi), bi) in out.iter_mut().zip(x).zip(self.b) {
            *o += bi * xi;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.b.len();
        let d = self.op.d();
        let w = self.op.weights();
        DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { self.b[i] - d } else { 0.0 };
            d * w[i * n + j] + diag
        })
    }
}

/// Collatz–Wielandt bracket `[min (Mx)_i/x_i, max (Mx)_i/x_i]` plus Rayleigh
/// quotient and residual, for positive `x` with `max x = 1`.
struct Estimate {
    lo: f64,
    hi: f64,
    mu: f64,
    residual: f64,
}

fn estimate(x: &[f64], mx: &[f64]) -> Estimate {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut num, mut den) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(mx) {
        let r = yi / xi;
        lo = lo.min(r);
        hi = hi.max(r);
        num += xi * yi;
        den += xi * xi;
    }
    let mu = num / den;
    let residual = x
        .iter()
        .zip(mx)
        .map(|(xi, yi)| (yi - mu * xi).abs())
        .fold(0.0, f64::max);
    Estimate {
        lo,
        hi,
        mu,
        residual,
    }
}

/// Scales to `max = 1`; fails if any entry is not strictly positive.
fn normalize_positive(x: &mut [f64], iteration: usize) -> Result<()> {
    let top = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::NotConverged {
            what: "principal eigenvector",
            iterations: iteration,
            error: f64::NAN,
        });
    }
    x.iter_mut().for_each(|v| *v /= top);
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive { index, value });
    }
    Ok(())
}

/// Principal eigenpair of `−dL[·] − b·` on the discretized domain.
///
/// A shifted power iteration on `M + sI` seeds a Collatz–Wielandt bracket
/// for the Perron root `μ` of `M`; the pair is then refined by power
/// iteration on the nonnegative resolvent `(σI − M)^{-1}` with `σ` just above
/// the bracket. Both iterations keep the iterate strictly positive.
pub fn principal_eigen(
    op: &DispersalOperator,
    b: &Field,
    opts: &EigenOptions,
) -> Result<PrincipalEigen> {
    b.check_len(op.len())?;
    if !b.is_finite() {
        return Err(Error::InvalidParameter("b contains non-finite values".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eigen tolerance must be positive (got {})",
            opts.tol
        )));
    }
    let n = op.len();
    let d = op.d();
    let m = Metzler { op, b };
    let bound_lo = d - op
        .row_sums()
        .iter()
        .zip(b.iter())
        .map(|(r, bi)| bi + d * r)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_hi = d - b.max();
    let scale = 1.0_f64.max(d).max(b.sup_norm());
    let rayleigh_tol = |mu: f64| 1e-13 * mu.abs().max(1.0);

    let min_diag = (0..n)
        .map(|i| d * op.weight(i, i) - d + b[i])
        .fold(f64::INFINITY, f64::min);
    let shift = d + (-min_diag).max(0.0) + 1.0;

    let mut x = vec![1.0; n];
    let mut mx = vec![0.0; n];
    let mut iterations = 0;
    let mut prev_mu = f64::NAN;
    let mut est;

    // Phase 1: a few shifted power steps; often exact already (constant rows).
    loop {
        m.mul(&x, &mut mx);
        est = estimate(&x, &mx);
        let converged = est.residual <= opts.tol
            && (est.hi - est.lo <= rayleigh_tol(est.mu) || (est.mu - prev_mu).abs() <= rayleigh_tol(est.mu));
        if converged || iterations >= 50.min(opts.max_iter) {
            if converged {
                return Ok(finish(x, est, iterations, bound_lo, bound_hi));
            }
            break;
        }
        prev_mu = est.mu;
        for (xi, yi) in x.iter_mut().zip(&mx) {
            *xi = yi + shift * *xi;
        }
        iterations += 1;
        normalize_positive(&mut x, iterations)?;
    }

    // Phase 2: resolvent power iteration.
    let dense = m.dense();
    let gap = |lo: f64, hi: f64| (1e-2 * (hi - lo)).max(1e-10 * scale);
    let factor = |sigma: f64| {
        let mut a = -dense.clone();
        for i in 0..n {
            a[(i, i)] += sigma;
        }
        a.lu()
    };
    let mut sigma = est.hi + gap(est.lo, est.hi);
    let mut lu = factor(sigma);
    let mut rhs = nalgebra::DVector::from_column_slice(&x);
    while iterations < opts.max_iter {
        if !lu.solve_mut(&mut rhs) {
            return Err(Error::NotConverged {
                what: "principal eigenvalue (singular resolvent)",
                iterations,
                error: est.residual,
            });
        }
        iterations += 1;
        x.copy_from_slice(rhs.as_slice());
        normalize_positive(&mut x, iterations)?;
        m.mul(&x, &mut mx);
        let next = estimate(&x, &mx);
        let stalled = (next.mu - est.mu).abs() <= rayleigh_tol(next.mu);
        est = next;
        if est.residual <= opts.tol && stalled {
            return Ok(finish(x, est, iterations, bound_lo, bound_hi));
        }
        // move the shift closer once the bracket has tightened a lot
        let target = est.hi + gap(est.lo, est.hi);
        if sigma - est.hi > 10.0 * (target - est.hi) {
            sigma = target;
            lu = factor(sigma);
        }
        rhs.as_mut_slice().copy_from_slice(&x);
    }
    Err(Error::NotConverged {
        what: "principal eigenvalue",
        iterations,
        error: est.residual,
    })
}

fn finish(x: Vec<f64>, est: Estimate, iterations: usize, bound_lo: f64, bound_hi: f64) -> PrincipalEigen {
    PrincipalEigen {
        lambda_p: -est.mu,
        phi: Field::new(x),
        residual: est.residual,
        iterations,
        bound_lo,
        bound_hi,
    }
}

/// Principal eigenpair of the system's linearization plus `λ^ω`.
pub fn seasonal_principal(sys: &SeasonalSystem, opts: &EigenOptions) -> Result<SpectralResult> {
    let eigen = principal_eigen(sys.op(), sys.model().b(), opts)?;
    let clock = *sys.clock();
    Ok(SpectralResult {
        lambda_p_omega: lambda_p_omega(&clock, eigen.lambda_p),
        eigen,
        clock,
    })
}

/// `∫_0^t σ(s) ds` with `σ = δ` on the bad season and `λ_p − a(s)` on the good one.
fn sigma_integral(res: &SpectralResult, sys: &SeasonalSystem, t: f64) -> f64 {
    let clock = &res.clock;
    let bad = clock.bad_length();
    if t <= bad {
        return clock.delta() * t;
    }
    let model = sys.model();
    let a_int = adaptive_simpson(|s| model.a(s), bad, t, 1e-13);
    clock.delta() * bad + res.lambda_p() * (t - bad) - a_int
}

/// `φ_p(x,t) = exp{λ^ω t − ∫_0^t σ}·φ_p(x)` for `t ∈ [0, ω]`.
pub fn periodic_eigenfunction(res: &SpectralResult, sys: &SeasonalSystem, t: f64) -> Result<Field> {
    let omega = res.clock.omega();
    if !(t >= 0.0 && t <= omega * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "eigenfunction time must lie in [0, {omega}] (got {t})"
        )));
    }
    let t = t.min(omega);
    let exponent = res.lambda_p_omega * t - sigma_integral(res, sys, t);
    Ok(res.phi().scaled(exponent.exp()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloquetReport {
    /// `‖u(ω) − e^{−λ^ω ω}φ‖∞ / ‖e^{−λ^ω ω}φ‖∞`.
    pub relative_error: f64,
    /// Worst relative deviation from `e^{−λ^ω t}φ_p(·,t)` over every substep.
    pub path_error: f64,
    pub predicted_multiplier: f64,
    /// Least-squares multiplier `⟨u(ω), φ⟩ / ⟨φ, φ⟩`.
    pub measured_multiplier: f64,
    /// `−ln(measured multiplier)/ω`.
    pub measured_lambda_p_omega: f64,
}

/// Propagates `φ_p(·,0)` through one period of the linearized equation and
/// compares with `e^{−λ^ω ω}φ_p(·,0)`.
pub fn verify_floquet(res: &SpectralResult, sys: &SeasonalSystem, substeps: usize) -> Result<FloquetReport> {
    verify_floquet_shifted(res, sys, substeps, 0.0)
}

/// As [`verify_floquet`] but comparing against `λ^ω + shift`.
pub fn verify_floquet_shifted(
    res: &SpectralResult,
    sys: &SeasonalSystem,
    substeps: usize,
    shift: f64,
) -> Result<FloquetReport> {
    let lin = sys.linearized();
    let omega = res.clock.omega();
    let phi = res.phi();
    let opts = SimulateOptions {
        periods: 1,
        substeps,
        save: SavePolicy::EverySubstep,
    };
    let traj = simulate(phi, &lin, &opts)?;
    let lam = res.lambda_p_omega + shift;
    let mut path_error = 0.0_f64;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let expected = periodic_eigenfunction(res, sys, *t)?.scaled((-lam * t).exp());
        path_error = path_error.max(u.distance(&expected) / expected.sup_norm());
    }
    let end = traj.last().cloned().unwrap_or_else(|| phi.clone());
    let predicted_multiplier = (-lam * omega).exp();
    let expected = phi.scaled(predicted_multiplier);
    let relative_error = end.distance(&expected) / expected.sup_norm();
    let dot = |a: &Field, b: &Field| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
    let measured_multiplier = dot(&end, phi) / dot(phi, phi);
    Ok(FloquetReport {
        relative_error,
        path_error,
        predicted_multiplier,
        measured_multiplier,
        measured_lambda_p_omega: -measured_multiplier.ln() / omega,
    })
}

/// Ingredients shared by every radius of a domain sweep.
#[derive(Clone, Debug)]
pub struct SweepBase {
    pub kernel: Kernel,
    pub d: f64,
    /// `b` after moving the good-season mean of `a` into it.
    pub b: SpatialProfile,
    pub clock: SeasonClock,
    /// Cell width, held fixed across radii.
    pub h: f64,
    pub eigen: EigenOptions,
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub radius: f64,
    pub cells: usize,
    pub outcome: std::result::Result<(PrincipalEigen, f64), String>,
}

impl SweepPoint {
    pub fn lambda_p(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|(e, _)| e.lambda_p)
    }

    pub fn lambda_p_omega(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|(_, l)| *l)
    }
}

#[derive(Clone, Debug)]
pub struct RadiusSweep {
    pub points: Vec<SweepPoint>,
    /// Aitken extrapolation of the `λ^ω(R)` tail (last value if fewer than three).
    pub lambda_p_omega_limit: Option<f64>,
    /// Last finite difference of the tail.
    pub error_bar: Option<f64>,
}

/// `x2 − (x2−x1)²/((x2−x1) − (x1−x0))`, falling back to `x2` when the
/// differences do not shrink geometrically.
pub fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let denom = d2 - d1;
    if denom == 0.0 || d1 == 0.0 || d2 / d1 <= 0.0 || d2 / d1 >= 1.0 {
        return x2;
    }
    x2 - d2 * d2 / denom
}

/// Principal eigenvalues on the truncated domains `[−R, R]` with common `h`.
pub fn sweep_radius(base: &SweepBase, radii: &[f64]) -> Result<RadiusSweep> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("radius list is empty".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(Error::InvalidParameter(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    if !(base.h > 0.0) {
        return Err(Error::InvalidParameter("sweep cell width must be positive".into()));
    }
    base.b.validate()?;
    let cells: Vec<usize> = radii.iter().map(|r| (2.0 * r / base.h).round() as usize).collect();
    if let Some((r, n)) = radii.iter().zip(&cells).find(|(_, n)| **n < 64) {
        return Err(Error::InvalidParameter(format!(
            "radius {r} gives only {n} cells at h = {}; need at least 64",
            base.h
        )));
    }
    let points: Vec<SweepPoint> = radii
        .par_iter()
        .zip(cells.par_iter())
        .map(|(&radius, &n)| {
            let outcome = (|| {
                let half = 0.5 * n as f64 * base.h;
                let grid = SpatialGrid::new(-half, half, n, BoundaryMode::Truncated)?;
                let op = DispersalOperator::assemble(&grid, &base.kernel, base.d, false)?;
                let b = base.b.sample(grid.nodes());
                let e = principal_eigen(&op, &b, &base.eigen)?;
                let l = lambda_p_omega(&base.clock, e.lambda_p);
                Ok::<_, Error>((e, l))
            })()
            .map_err(|e| e.to_string());
            SweepPoint {
                radius,
                cells: n,
                outcome,
            }
        })
        .collect();
    let tail: Vec<f64> = points.iter().filter_map(SweepPoint::lambda_p_omega).collect();
    let (limit, error_bar) = match tail.len() {
        0 => (None, None),
        1 => (Some(tail[0]), None),
        2 => (Some(tail[1]), Some((tail[1] - tail[0]).abs())),
        k => (
            Some(aitken(tail[k - 3], tail[k - 2], tail[k - 1])),
            Some((tail[k - 1] - tail[k - 2]).abs()),
        ),
    };
    Ok(RadiusSweep {
        points,
        lambda_p_omega_limit: limit,
        error_bar,
    })
}
