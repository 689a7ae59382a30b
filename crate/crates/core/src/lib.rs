//! Anisotropic inverse mean curvature flow of spacelike radial graphs over a
//! geodesic disk of the hyperbolic space, with zero Neumann boundary data.
//!
//! The slice `X = u(x) x`, `x` on the hyperboloid, is evolved through the
//! scalar unknown `phi = log u`, either in flow time `t` or in the rescaled
//! time `s` where the exact radial solution becomes a fixed point. Along the
//! way every a-priori bound of the flow is audited by the monitor.

pub mod domain;
pub mod error;
pub mod exec;
pub mod field;
pub mod linalg;
pub mod curvature;
pub mod rescale;
pub mod flow;
pub mod monitor;
pub mod runner;

pub use error::{Error, Result};
