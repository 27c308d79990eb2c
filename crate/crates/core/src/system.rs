use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::growth::GrowthModel;
use crate::operator::DispersalOperator;
use crate::season::SeasonClock;

/// Dispersal operator plus growth model: everything the seasonal flow needs.
#[derive(Clone, Debug)]
pub struct SeasonalSystem {
    op: DispersalOperator,
    model: GrowthModel,
}

impl SeasonalSystem {
    pub fn new(op: DispersalOperator, model: GrowthModel) -> Result<Self> {
        if op.len() != model.len() {
            return Err(Error::DimensionMismatch {
                expected: op.len(),
                got: model.len(),
            });
        }
        Ok(SeasonalSystem { op, model })
    }

    pub fn op(&self) -> &DispersalOperator {
        &self.op
    }

    pub fn model(&self) -> &GrowthModel {
        &self.model
    }

    pub fn clock(&self) -> &SeasonClock {
        self.model.clock()
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.op.grid()
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    /// Same operator with the growth term replaced by its linearization.
    pub fn linearized(&self) -> SeasonalSystem {
        SeasonalSystem {
            op: self.op.clone(),
            model: self.model.linearized(),
        }
    }

    pub fn with_clock(&self, clock: SeasonClock) -> Result<SeasonalSystem> {
        Ok(SeasonalSystem {
            op: self.op.clone(),
            model: self.model.with_clock(clock)?,
        })
    }

    /// Smallest substep count with `dt·(2d + K_lip) ≤ 0.5`, at least 8.
    pub fn default_substeps(&self) -> usize {
        let rate = 2.0 * self.op.d() + self.model.k_lip();
        let steps = (self.clock().good_length() * rate / 0.5).ceil();
        if steps.is_finite() {
            (steps as usize).max(8)
        } else {
            8
        }
    }
}
