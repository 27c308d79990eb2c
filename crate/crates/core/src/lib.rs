//! Nonlocal dispersal with seasonal succession on a bounded 1-D habitat:
//! discretization, seasonal integration, principal eigenvalues, periodic
//! solutions and the extinction/persistence classification.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod config;
pub mod error;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod growth;
pub mod kernel;
pub mod operator;
pub mod output;
pub mod periodic;
pub mod profile;
pub mod quadrature;
pub mod season;
pub mod spectral;
pub mod system;

pub use classify::{
    classify_run, decay_rate_check, dichotomy_grid, ClassifyOptions, DecayRateReport,
    DichotomyVerdict, GridCell, GridRow, Observed, Predicted,
};
pub use config::{load_config, RunConfig};
pub use error::{Error, ErrorClass, Result};
pub use evolve::{
    check_order, decay_season, good_season_step, period_map, simulate, theta_metric, OrderReport,
    SavePolicy, SimulateOptions, Trajectory,
};
pub use field::Field;
pub use grid::{BoundaryMode, SpatialGrid};
pub use growth::{GrowthLaw, GrowthModel};
pub use kernel::{Kernel, KernelFamily};
pub use operator::{DispersalOperator, H2Report};
pub use output::{write_csv, write_json, Cell, RunManifest, Table};
pub use periodic::{
    find_lower_seed, lower_solution_seed, monotone_iteration, monotone_iteration_observed,
    monotone_periodic,
    poincare_fixed_point, poincare_fixed_point_from, poincare_map, OrbitMethod, PeriodicOptions,
    PeriodicOrbit, SeedCheck,
};
pub use profile::{SpatialProfile, TimeProfile};
pub use season::{Season, SeasonClock};
pub use spectral::{
    lambda_p_omega, periodic_eigenfunction, principal_eigen, seasonal_principal, sweep_radius,
    verify_floquet, EigenOptions, FloquetReport, PrincipalEigen, RadiusSweep, SpectralResult,
    SweepBase, SweepPoint,
};
pub use system::SeasonalSystem;
