//! Randomized invariants of the discretization, the seasonal flow and the
//! principal eigenpair.

use proptest::prelude::*;
use seasonal_dispersal::growth::normalize_ab;
use seasonal_dispersal::*;

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    (0usize..3, 0.6f64..2.0, 0.3f64..1.0).prop_map(|(family, gamma, s)| match family {
        0 => Kernel::tent(gamma).unwrap(),
        1 => Kernel::epanechnikov(gamma).unwrap(),
        _ => Kernel::truncated_gaussian(gamma, s * gamma).unwrap(),
    })
}

fn boundary_strategy() -> impl Strategy<Value = BoundaryMode> {
    prop_oneof![Just(BoundaryMode::Truncated), Just(BoundaryMode::PeriodicWrap)]
}

fn field_strategy(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Field> {
    prop::collection::vec(lo..hi, n).prop_map(Field::new)
}

const N: usize = 32;

fn system(
    boundary: BoundaryMode,
    kernel: &Kernel,
    d: f64,
    clock: SeasonClock,
    b: Field,
    linear: bool,
) -> SeasonalSystem {
    let g = SpatialGrid::new(-4.0, 4.0, N, boundary).unwrap();
    let op = DispersalOperator::assemble(&g, kernel, d, true).unwrap();
    let a = TimeProfile::Sine {
        mean: 0.1,
        amplitude: 0.3,
        cycles: 1.0,
    };
    let m = if linear {
        GrowthModel::linear(&g, clock, a, b).unwrap()
    } else {
        GrowthModel::logistic(&g, clock, a, b, 1.0).unwrap()
    };
    SeasonalSystem::new(op, m).unwrap()
}

fn clock_strategy() -> impl Strategy<Value = SeasonClock> {
    (0.5f64..3.0, 0.1f64..0.9, 0.05f64..2.0)
        .prop_map(|(omega, rho, delta)| SeasonClock::new(omega, rho, delta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_are_symmetric_and_nonnegative(
        kernel in kernel_strategy(),
        boundary in boundary_strategy(),
        n in 12usize..40,
    ) {
        let g = SpatialGrid::new(-3.0, 3.0, n, boundary).unwrap();
        let op = DispersalOperator::assemble(&g, &kernel, 1.0, false).unwrap();
        for i in 0..n {
            prop_assert!(op.weight(i, i) > 0.0);
            for j in 0..n {
                prop_assert!(op.weight(i, j) >= 0.0);
                prop_assert!((op.weight(i, j) - op.weight(j, i)).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn truncated_dispersal_never_creates_mass(
        kernel in kernel_strategy(),
        u in field_strategy(30, 0.0, 5.0),
        d in 0.1f64..4.0,
    ) {
        let g = SpatialGrid::new(-3.0, 3.0, 30, BoundaryMode::Truncated).unwrap();
        let op = DispersalOperator::assemble(&g, &kernel, d, true).unwrap();
        let lu = op.apply(&u).unwrap();
        prop_assert!(lu.iter().sum::<f64>() <= 1e-12 * u.sup_norm().max(1.0));
    }

    #[test]
    fn normalized_wrap_annihilates_constants(kernel in kernel_strategy(), c in -5.0f64..5.0) {
        let g = SpatialGrid::new(-4.0, 4.0, 40, BoundaryMode::PeriodicWrap).unwrap();
        let op = DispersalOperator::assemble(&g, &kernel, 1.7, true).unwrap();
        let lu = op.apply(&Field::constant(40, c)).unwrap();
        prop_assert!(lu.sup_norm() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn normalization_leaves_the_sum_unchanged(
        clock in clock_strategy(),
        mean in -1.0f64..1.0,
        amplitude in 0.0f64..1.0,
        cycles in 0.3f64..3.0,
        b in field_strategy(10, -1.0, 2.0),
    ) {
        let a_raw = TimeProfile::Sine { mean, amplitude, cycles };
        let (a, b_new, a_bar) = normalize_ab(&a_raw, &b, &clock).unwrap();
        prop_assert!(a.good_season_mean(&clock).unwrap().abs() <= 1e-10);
        let start = clock.rho() * clock.omega();
        for k in 0..=20 {
            let s = start + clock.good_length() * k as f64 / 20.0;
            for (bi, bn) in b.iter().zip(b_new.iter()) {
                let before = a_raw.eval(s, &clock) + bi;
                let after = a.eval(s, &clock) + bn;
                prop_assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
            }
        }
        prop_assert!(a_bar.is_finite());
    }

    #[test]
    fn growth_is_nonpositive_above_k0(
        clock in clock_strategy(),
        b in field_strategy(N, -0.5, 1.5),
        extra in 0.0f64..3.0,
        frac in 0.0f64..1.0,
    ) {
        let g = SpatialGrid::new(-4.0, 4.0, N, BoundaryMode::Truncated).unwrap();
        let a = TimeProfile::Sine { mean: 0.0, amplitude: 0.4, cycles: 2.0 };
        let m = GrowthModel::logistic(&g, clock, a, b, 1.0).unwrap();
        let t = clock.rho() * clock.omega() + frac * clock.good_length() + 1e-9;
        for i in 0..N {
            prop_assert!(m.eval_f(i, t, m.k0() + extra).unwrap() <= 0.0);
        }
    }

    #[test]
    fn seasonal_flow_stays_positive_and_bounded(
        kernel in kernel_strategy(),
        boundary in boundary_strategy(),
        clock in clock_strategy(),
        b in field_strategy(N, -0.5, 1.5),
        u0 in field_strategy(N, 0.0, 3.0),
    ) {
        let sys = system(boundary, &kernel, 1.0, clock, b, false);
        let opts = SimulateOptions {
            periods: 3,
            substeps: sys.default_substeps(),
            save: SavePolicy::EverySubstep,
        };
        let traj = simulate(&u0, &sys, &opts).unwrap();
        let scale = u0.sup_norm().max(f64::MIN_POSITIVE);
        prop_assert!(traj.inf() >= -1e-10 * scale);
        let bound = u0.max().max(sys.model().k0()) + 1e-8;
        prop_assert!(traj.sup() <= bound, "{} > {}", traj.sup(), bound);
    }

    #[test]
    fn linear_flow_is_linear(
        kernel in kernel_strategy(),
        clock in clock_strategy(),
        b in field_strategy(N, -0.5, 1.0),
        u0 in field_strategy(N, 0.1, 2.0),
        alpha in 0.01f64..50.0,
    ) {
        let sys = system(BoundaryMode::PeriodicWrap, &kernel, 0.8, clock, b, true);
        let opts = SimulateOptions::period_ends(2, 32);
        let a = simulate(&u0, &sys, &opts).unwrap();
        let b = simulate(&u0.scaled(alpha), &sys, &opts).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            prop_assert!(y.distance(&x.scaled(alpha)) <= 1e-12 * y.sup_norm());
        }
    }

    #[test]
    fn theta_is_blind_to_the_bad_season(
        clock in clock_strategy(),
        u in field_strategy(N, 0.01, 3.0),
        v in field_strategy(N, 0.01, 3.0),
    ) {
        let t1 = clock.rho() * clock.omega();
        let before = theta_metric(&u, &v).unwrap();
        let du = decay_season(&u, &clock, 0.0, t1).unwrap();
        let dv = decay_season(&v, &clock, 0.0, t1).unwrap();
        let after = theta_metric(&du, &dv).unwrap();
        prop_assert!((after - before).abs() <= 1e-12 * before.max(1.0));
    }

    #[test]
    fn eigenpair_residual_and_bounds(
        kernel in kernel_strategy(),
        b in field_strategy(N, -1.0, 1.0),
        d in 0.2f64..3.0,
    ) {
        let g = SpatialGrid::new(-4.0, 4.0, N, BoundaryMode::Truncated).unwrap();
        let op = DispersalOperator::assemble(&g, &kernel, d, false).unwrap();
        let e = principal_eigen(&op, &b, &EigenOptions::default()).unwrap();
        prop_assert!(e.residual <= 1e-10);
        prop_assert!(e.phi.min() > 0.0);
        prop_assert!(e.bound_lo < e.lambda_p && e.lambda_p < e.bound_hi,
            "{} < {} < {}", e.bound_lo, e.lambda_p, e.bound_hi);
    }

    #[test]
    fn diagonal_shift_moves_only_the_eigenvalue(
        kernel in kernel_strategy(),
        boundary in boundary_strategy(),
        b in field_strategy(N, -1.0, 1.0),
        c in -2.0f64..2.0,
    ) {
        let g = SpatialGrid::new(-4.0, 4.0, N, boundary).unwrap();
        let op = DispersalOperator::assemble(&g, &kernel, 1.0, true).unwrap();
        let opts = EigenOptions { tol: 1e-12, ..EigenOptions::default() };
        let e0 = principal_eigen(&op, &b, &opts).unwrap();
        let e1 = principal_eigen(&op, &b.shifted(c), &opts).unwrap();
        prop_assert!((e1.lambda_p - (e0.lambda_p - c)).abs() <= 1e-12 * (1.0 + e0.lambda_p.abs()));
        prop_assert!(e1.phi.distance(&e0.phi) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn theta_contracts_over_each_good_season(
        kernel in kernel_strategy(),
        b in field_strategy(N, 0.0, 1.5),
        u0 in field_strategy(N, 0.05, 2.0),
        v0 in field_strategy(N, 0.05, 2.0),
    ) {
        let clock = SeasonClock::new(2.0, 0.5, 0.4).unwrap();
        let sys = system(BoundaryMode::PeriodicWrap, &kernel, 1.0, clock, b, false);
        let opts = SimulateOptions::period_ends(4, sys.default_substeps());
        let a = simulate(&u0, &sys, &opts).unwrap();
        let c = simulate(&v0, &sys, &opts).unwrap();
        let theta: Vec<f64> = a.states.iter().zip(&c.states)
            .map(|(x, y)| theta_metric(x, y).unwrap())
            .collect();
        for w in theta.windows(2) {
            if w[0] > 1e-9 {
                prop_assert!(w[0] - w[1] >= 1e-12, "{theta:?}");
            }
        }
    }
}

/// `dL[u]` for smooth `u` converges at second order in the cell width.
#[test]
fn dispersal_refines_at_second_order() {
    // for the unit tent, ∫J(z)cos(κ(x−z))dz = Ĵ(κ)cos(κx) with Ĵ(κ) = 2(1 − cos κ)/κ²
    let (k1, k2) = (0.7_f64, 1.9_f64);
    let hat = |k: f64| 2.0 * (1.0 - k.cos()) / (k * k);
    let u = |x: f64| (k1 * x).cos() + 0.3 * (k2 * x).sin();
    let exact = |x: f64| (hat(k1) - 1.0) * (k1 * x).cos() + 0.3 * (hat(k2) - 1.0) * (k2 * x).sin();
    let err = |n: usize| {
        let g = SpatialGrid::new(-8.0, 8.0, n, BoundaryMode::Truncated).unwrap();
        let op = DispersalOperator::assemble(&g, &Kernel::tent(1.0).unwrap(), 1.0, false).unwrap();
        let lu = op.apply(&Field::from_fn(g.nodes(), u)).unwrap();
        g.nodes()
            .iter()
            .zip(lu.iter())
            // interior only: the truncated integral is the full one for |x| ≤ 7
            .filter(|(x, _)| x.abs() < 6.0)
            .map(|(x, v)| (v - exact(*x)).abs())
            .fold(0.0, f64::max)
    };
    let (e0, e1, e2) = (err(64), err(128), err(256));
    let p1 = (e0 / e1).log2();
    let p2 = (e1 / e2).log2();
    assert!(p1 >= 1.8 && p2 >= 1.8, "orders {p1} {p2} from {e0:e} {e1:e} {e2:e}");
}
