//! Polyhedral cones and convex sets in generator form, with exact polar,
//! hull and Minkowski operations in low dimension.

mod cone;
mod convex_set;
pub(crate) mod hrep;

pub use cone::PolyCone;
pub use convex_set::{convex_hull, minkowski_contains_zero, MinkowskiCertificate, PolyConvexSet};
pub use hrep::HCone;

use crate::linalg::{normalize, Vector};

/// Ambient dimension cap of the exact polar engine.
pub const MAX_EXACT_DIM: usize = 4;

/// Fixed comparison grid: all nonzero vectors of `{-1, 0, 1}^n`, normalized,
/// in a deterministic order. Dimensions above 4 fall back to `±e_i`.
pub fn direction_grid(dim: usize) -> Vec<Vector> {
    if dim == 0 {
        return vec![];
    }
    if dim > 4 {
        let mut out = Vec::new();
        for i in 0..dim {
            out.push(crate::linalg::unit(dim, i));
            out.push(crate::linalg::neg(&crate::linalg::unit(dim, i)));
        }
        return out;
    }
    let total = 3usize.pow(dim as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let v: Vector = (0..dim)
            .map(|_| {
                let d = (c % 3) as f64 - 1.0;
                c /= 3;
                d
            })
            .collect();
        if let Some(u) = normalize(&v) {
            out.push(u);
        }
    }
    out
}
