//! Radial cut-off profiles used to localise fields on growing cubes.
//!
//! The base profile is
//!
//! ```text
//! theta(x) = 1                 for |x| <= 1/2
//! theta(x) = 0                 for |x| >= 3/4
//! theta(x) = 1 - s(4(|x| - 1/2))   in between,  s(t) = t^2 (3 - 2t)
//! ```
//!
//! with `s` the cubic smoothstep, so the bridge is C^1 at both junctions
//! and monotone in between. The scaled profile `theta_n(x) = theta(x / n)`
//! then satisfies `|grad theta_n| <= C / n` with `C = 6` independent of
//! `n`. The complementary profile `phi = 1 - theta` selects the tail.

use crate::error::LlbError;
use crate::field::VectorField;

/// Radius (relative to the scale) inside which the profile is exactly 1.
pub const INNER: f64 = 0.5;
/// Radius (relative to the scale) outside which the profile is exactly 0.
pub const OUTER: f64 = 0.75;

/// Value of the unscaled profile at distance `r` from the origin.
#[inline]
fn bridge(r: f64) -> f64 {
    if r <= INNER {
        1.0
    } else if r >= OUTER {
        0.0
    } else {
        let t = (r - INNER) / (OUTER - INNER);
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Scaled cut-off value `theta(x / scale)` at a point with norm `|x|`.
///
/// `scale` is typically the grid radius `n`, so the profile is 1 on the
/// inner half-cube `|x| <= n/2` and vanishes for `|x| >= 3n/4`.
pub fn theta(point: [f64; 2], scale: f64) -> f64 {
    let r = (point[0] * point[0] + point[1] * point[1]).sqrt();
    bridge(r / scale)
}

/// A radial profile at a fixed scale: either the plateau `theta` or its
/// complement `phi = 1 - theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    scale: f64,
    complement: bool,
}

impl CutoffProfile {
    /// The plateau profile `theta_scale`.
    pub fn theta(scale: f64) -> Result<Self, LlbError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(LlbError::invalid_parameter(
                "scale",
                format!("must be positive and finite, got {scale}"),
            ));
        }
        Ok(CutoffProfile {
            scale,
            complement: false,
        })
    }

    /// The tail profile `phi_scale = 1 - theta_scale`.
    pub fn phi(scale: f64) -> Result<Self, LlbError> {
        let mut p = Self::theta(scale)?;
        p.complement = true;
        Ok(p)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Profile value at a point.
    pub fn value(&self, point: [f64; 2]) -> f64 {
        let t = theta(point, self.scale);
        if self.complement {
            1.0 - t
        } else {
            t
        }
    }
}

/// Multiply a field pointwise by a profile. The output lives on the same
/// grid; boundary nodes keep whatever the product gives there (zero for
/// Dirichlet inputs since the field already vanishes).
pub fn apply_cutoff(field: &VectorField, profile: &CutoffProfile) -> VectorField {
    let grid = field.grid_arc().clone();
    let mut out = field.clone();
    for (idx, v) in out.values_mut().iter_mut().enumerate() {
        let c = profile.value(grid.point(idx));
        v[0] *= c;
        v[1] *= c;
        v[2] *= c;
    }
    out
}
