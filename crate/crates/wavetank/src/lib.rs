//! Numerical towing tank for submerged bodies in potential flow.
//!
//! The boundary of the tank is discretized with bilinear quadrilaterals and the
//! Laplace problem is solved by collocation BEM. Free-surface evolution is
//! written as a differential-algebraic system `F(ẏ, y, t) = 0` that is either
//! integrated with BDF or, with `ẏ = 0`, solved directly for the steady state.

pub mod adaptivity;
pub mod bem;
pub mod dae;
pub mod driver;
mod error;
pub mod freesurface;
pub mod linalg;
pub mod meshkit;
mod par;
pub mod postproc;
pub mod quadrature;
pub mod scenario;

pub use error::{Error, Result};

/// Points and vectors in physical space, meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Configure the size of the worker pool used by the assemblies.
///
/// Only the first call has any effect; later calls are ignored.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}
