//! Uniform one-dimensional cell-centred meshes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the kernel integral treats the ends of the interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Integrate over the interval only; mass leaks out near the ends.
    Truncated,
    /// Wrap kernel distances around the interval (whole-line emulation).
    PeriodicWrap,
}

/// Uniform grid of `n` cells on `[x_min, x_max]`, sampled at cell midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    h: f64,
    nodes: Vec<f64>,
    boundary: BoundaryMode,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize, boundary: BoundaryMode) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bounds must be finite (got [{x_min}, {x_max}])"
            )));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "x_min must be below x_max (got [{x_min}, {x_max}])"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 cells (got {n})")));
        }
        let h = (x_max - x_min) / n as f64;
        let nodes = (0..n).map(|i| x_min + (i as f64 + 0.5) * h).collect();
        Ok(SpatialGrid {
            x_min,
            x_max,
            h,
            nodes,
            boundary,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Distance between nodes `i` and `j`, wrapped in periodic mode.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        // index arithmetic keeps wrapped distances exactly symmetric
        let n = self.len();
        let k = i.abs_diff(j);
        let k = match self.boundary {
            BoundaryMode::Truncated => k,
            BoundaryMode::PeriodicWrap => k.min(n - k),
        };
        k as f64 * self.h
    }
}
