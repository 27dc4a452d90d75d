use crate::error::Result;
use crate::grid::{CoefficientSpec, SpatialGrid, TimeGrid};
use crate::operator::DiscreteOperator;
use crate::solver::Propagator;

/// A discretised instance of the state equation: grid, time grid, operator
/// and the factored implicit step. Immutable and cheap to share.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: SpatialGrid,
    pub tg: TimeGrid,
    pub op: DiscreteOperator,
    pub prop: Propagator,
}

impl Model {
    pub fn new(grid: SpatialGrid, tg: TimeGrid, a: &CoefficientSpec) -> Result<Self> {
        let op = DiscreteOperator::assemble(&grid, a)?;
        Self::from_operator(grid, tg, op)
    }

    pub fn from_operator(grid: SpatialGrid, tg: TimeGrid, op: DiscreteOperator) -> Result<Self> {
        let prop = Propagator::new(&op, tg)?;
        Ok(Self { grid, tg, op, prop })
    }
}
