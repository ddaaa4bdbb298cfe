//! The free-surface problem as a differential-algebraic system
//! `F(ẏ, y, t) = 0`, its Jacobian, Newton's method and BDF time stepping.

mod bdf;
mod init;
mod newton;
mod problem;

pub use bdf::{Bdf, BdfSettings, StepReport};
pub use init::{reinit_position, reinit_velocity, steady_solve};
pub use newton::{newton_solve, NewtonConfig, NewtonReport};
pub use problem::{Geometry, TankProblem};

use crate::linalg::DenseMatrix;
use crate::Result;

/// How `∂F/∂y + c ∂F/∂ẏ` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianStrategy {
    /// Analytic linear blocks plus local finite differences of the
    /// geometry- and state-dependent terms.
    #[default]
    FiniteDifference,
    /// Central differences of the whole residual along every unknown.
    Directional,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub newton: NewtonConfig,
    pub bdf: BdfSettings,
    pub jacobian: JacobianStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton: NewtonConfig::default(),
            bdf: BdfSettings::default(),
            jacobian: JacobianStrategy::FiniteDifference,
        }
    }
}

/// A residual system whose unknowns are the `active` entries of `y`; the
/// remaining entries stay at their current values.
pub trait DaeSystem {
    fn dim(&self) -> usize;
    /// Indices of the unknowns, which are also the rows kept in the solve.
    fn active(&self) -> &[usize];
    fn residual(&self, ydot: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>>;
    /// `∂F/∂y + c ∂F/∂ẏ` on the active rows and columns.
    fn jacobian(&self, ydot: &[f64], y: &[f64], t: f64, c: f64) -> Result<DenseMatrix>;
}

pub(crate) fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

pub(crate) fn scatter(dst: &mut [f64], idx: &[usize], v: &[f64]) {
    for (&i, x) in idx.iter().zip(v) {
        dst[i] = *x;
    }
}

#[cfg(test)]
mod tests;
