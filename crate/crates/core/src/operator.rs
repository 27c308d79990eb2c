//! Dense midpoint-rule discretization of the nonlocal dispersal operator
//! `d·L[u](x) = d(∫_Ω J(x−y)u(y)dy − u(x))`.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{BoundaryMode, SpatialGrid};
use crate::kernel::Kernel;

#[derive(Clone, Debug)]
pub struct DispersalOperator {
    grid: SpatialGrid,
    kernel: Kernel,
    d: f64,
    /// Row-major `n×n`, `W[i][j] = J(dist(x_i, x_j))·h`.
    weights: Vec<f64>,
    row_sums: Vec<f64>,
    normalized: bool,
}

/// Outcome of the computable kernel/coefficient condition
/// `inf_y ∫_Ω J(x−y)dx > (b_M − b_m)/d`.
#[derive(Clone, Debug, PartialEq)]
pub struct H2Report {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// `Σ_k J(kh)·h` over the whole line: the row sum of an interior node.
fn discrete_mass(kernel: &Kernel, h: f64) -> f64 {
    let reach = (kernel.gamma() / h).floor() as i64;
    (-reach..=reach).map(|k| kernel.eval(k as f64 * h) * h).sum()
}

impl DispersalOperator {
    /// `W[i][j] = J(dist(x_i, x_j))·h`. With `exact_row_normalization`, wrap
    /// mode rescales every row to sum 1 and truncated mode divides by the
    /// interior row sum, so no row exceeds 1.
    pub fn assemble(
        grid: &SpatialGrid,
        kernel: &Kernel,
        d: f64,
        exact_row_normalization: bool,
    ) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dispersal rate d must be positive (got {d})"
            )));
        }
        let h = grid.h();
        let gamma = kernel.gamma();
        if gamma < h {
            return Err(Error::KernelUnresolved { gamma, h });
        }
        if grid.boundary() == BoundaryMode::PeriodicWrap && 2.0 * gamma > grid.length() {
            return Err(Error::WrapAliasing {
                diameter: 2.0 * gamma,
                length: grid.length(),
            });
        }
        // nearest-neighbour coupling is what makes the matrix irreducible
        if kernel.eval(h) <= 0.0 {
            return Err(Error::KernelUnresolved { gamma, h });
        }

        let n = grid.len();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                weights[i * n + j] = kernel.eval(grid.distance(i, j)) * h;
            }
        }
        let normalized =
            exact_row_normalization && grid.boundary() == BoundaryMode::PeriodicWrap;
        if normalized {
            for row in weights.chunks_mut(n) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|w| *w /= s);
            }
        } else if exact_row_normalization {
            // one common factor: interior rows sum to 1, boundary rows stay below
            let mass = discrete_mass(kernel, h);
            weights.iter_mut().for_each(|w| *w /= mass);
        }
        let row_sums = weights.chunks(n).map(|row| row.iter().sum()).collect();
        Ok(DispersalOperator {
            grid: grid.clone(),
            kernel: kernel.clone(),
            d,
            weights,
            row_sums,
            normalized,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn is_row_normalized(&self) -> bool {
        self.normalized
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.len() + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.len();
        let mut sums = vec![0.0; n];
        for row in self.weights.chunks(n) {
            for (s, w) in sums.iter_mut().zip(row) {
                *s += w;
            }
        }
        sums
    }

    /// `out = W·u`.
    pub(crate) fn mul_weights(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        for (o, row) in out.iter_mut().zip(self.weights.chunks(n)) {
            *o = row.iter().zip(u).map(|(w, v)| w * v).sum();
        }
    }

    /// `out = d·(W·u − u)` without bounds checks on the caller's side.
    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        self.mul_weights(u, out);
        for (o, v) in out.iter_mut().zip(u) {
            *o = self.d * (*o - v);
        }
    }

    /// `d·(W·u − u)`.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        u.check_len(self.len())?;
        let mut out = Field::zeros(self.len());
        self.apply_into(u, &mut out);
        Ok(out)
    }

    /// Checks `min_j Σ_i W[i][j] > (max b − min b)/d`. Advisory only.
    pub fn check_h2(&self, b: &Field) -> Result<H2Report> {
        b.check_len(self.len())?;
        let lhs = self
            .column_sums()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let rhs = (b.max() - b.min()) / self.d;
        Ok(H2Report {
            lhs,
            rhs,
            satisfied: lhs > rhs,
        })
    }
}
