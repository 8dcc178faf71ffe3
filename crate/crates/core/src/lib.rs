//! Tangent and normal cones, subderivatives and subgradients at infinity.
//!
//! Exact polyhedral engines cover piecewise-affine functions and polyhedral
//! sets; everything else is estimated on deterministic radius/step ladders.

pub mod cones;
pub mod error;
pub mod estimators;
pub mod expr;
pub mod ext_real;
pub mod geometry;
pub mod ladder;
pub mod linalg;
pub mod lp;
pub mod optimality;
pub mod report;
pub mod subdiff;
pub mod tolerance;

pub use error::{Error, Result};
pub use expr::{parse_function, parse_set, FuncDesc, SetDesc};
pub use ext_real::{ext_add, ExtendedReal};
pub use geometry::{convex_hull, minkowski_contains_zero, PolyCone, PolyConvexSet};
pub use tolerance::Tolerance;
