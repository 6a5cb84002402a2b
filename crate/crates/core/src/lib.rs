//! Volume-constrained capillarity energies on parametrized sphere-type surfaces.
//!
//! A surface is a piecewise-linear map from a fixed geodesic icosphere into
//! R^3. On top of that representation the crate evaluates the Dirichlet, area,
//! volume and anisotropy functionals (with exact discrete gradients), minimizes
//! `D + Q` at prescribed algebraic volume, and runs the experiments in [`lab`].
//!
//! Module map:
//! - [`mesh`]: reference icosphere, surface maps, canonical spheres, smoothing.
//! - [`field`]: the prescribed scalar field `K`, the radial potential `Q_K`,
//!   condition checks and ball integrals.
//! - [`functionals`]: `D`, `A`, `V`, `Q`, energies, gradients and residuals.
//! - [`solver`]: projected gradient descent on the constraint manifold.
//! - [`lab`]: scans, ratio minimization, gluing, nonexistence probe, I/O.

pub mod error;
pub mod field;
pub mod functionals;
pub mod lab;
pub mod mesh;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use field::{AnisotropyField, FieldCheckReport, SampleSpec};
pub use functionals::EnergyBreakdown;
pub use mesh::{SphereMesh, SurfaceMap};
pub use quadrature::GaussLegendre;
pub use solver::{SolveResult, SolveStatus, SolverConfig};

/// Points in R^3.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 real matrices.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// The isoperimetric constant `(36 pi)^(1/3)`.
pub fn isoperimetric_constant() -> f64 {
    (36.0 * std::f64::consts::PI).cbrt()
}

/// Volume of the unit ball.
pub const UNIT_BALL_VOLUME: f64 = 4.0 * std::f64::consts::PI / 3.0;
