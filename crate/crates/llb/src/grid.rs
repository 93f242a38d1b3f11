//! Uniform tensor grids on the centred cube `[-n, n]^d`, d = 1 or 2.
//!
//! The cube is the computational domain: fields carry values at every node
//! including the boundary layer, and Dirichlet zero conditions are enforced
//! by keeping that layer at zero. The spacing must tile the edge exactly,
//! so `h * (points_per_axis - 1) = 2n` holds by construction: the grid
//! stores the interval count per axis and derives coordinates from it,
//! which keeps the endpoints at exactly `-n` and `n` and the centre at 0.

use crate::error::LlbError;
use serde::Serialize;

/// Relative slack used when checking that the requested spacing tiles the
/// edge `2n`. One part in 1e9 tolerates decimal spacings like 0.05 that are
/// not exactly representable without admitting genuinely non-tiling ones.
const TILING_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    dim: usize,
    radius: f64,
    /// Intervals per axis; points per axis is `intervals + 1`.
    intervals: usize,
    /// Effective spacing `2 * radius / intervals`.
    spacing: f64,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.radius == other.radius && self.intervals == other.intervals
    }
}

impl Grid {
    /// Build a grid for the cube `[-radius, radius]^dim` with the given
    /// target spacing. Fails if `dim` is not 1 or 2, if `radius` or
    /// `spacing` is not positive and finite, or if `spacing` does not tile
    /// the edge `2 * radius` (up to [`TILING_RTOL`]).
    pub fn new(dim: usize, radius: f64, spacing: f64) -> Result<Grid, LlbError> {
        if dim != 1 && dim != 2 {
            return Err(LlbError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(LlbError::InvalidGrid(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(LlbError::InvalidGrid(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        let ratio = 2.0 * radius / spacing;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > TILING_RTOL * ratio.max(1.0) {
            return Err(LlbError::InvalidGrid(format!(
                "spacing {spacing} does not tile the edge {}: 2n/h = {ratio} is not an integer",
                2.0 * radius
            )));
        }
        let intervals = intervals as usize;
        if intervals < 2 {
            return Err(LlbError::InvalidGrid(format!(
                "grid needs at least one interior point per axis, got {intervals} intervals"
            )));
        }
        Ok(Grid {
            dim,
            radius,
            intervals,
            spacing: 2.0 * radius / intervals as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn points_per_axis(&self) -> usize {
        self.intervals + 1
    }

    /// Total number of nodes, boundary included.
    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Split a flat node index into per-axis indices. The second entry is 0
    /// in one dimension. Flat layout is row-major: `idx = ix * ppa + iy`.
    #[inline]
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => {
                let ppa = self.points_per_axis();
                [idx / ppa, idx % ppa]
            }
        }
    }

    #[inline]
    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        match self.dim {
            1 => ix,
            _ => ix * self.points_per_axis() + iy,
        }
    }

    /// Coordinates of a node. The second component is 0 in one dimension.
    /// Endpoints land exactly on `-n` and `n`, the midpoint exactly on 0
    /// for even interval counts.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [ix, iy] = self.axis_indices(idx);
        [self.axis_coord(ix), if self.dim == 2 { self.axis_coord(iy) } else { 0.0 }]
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        let m = self.intervals as f64;
        (2.0 * i as f64 - m) * self.radius / m
    }

    /// Euclidean distance of a node from the origin.
    #[inline]
    pub fn radial(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// True when the node lies on the boundary layer of the cube.
    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        let [ix, iy] = self.axis_indices(idx);
        let last = self.intervals;
        ix == 0 || ix == last || (self.dim == 2 && (iy == 0 || iy == last))
    }

    /// Trapezoid quadrature weight of a node: `h^d` times one half per
    /// axis-endpoint the node touches.
    #[inline]
    pub fn quad_weight(&self, idx: usize) -> f64 {
        let [ix, iy] = self.axis_indices(idx);
        let last = self.intervals;
        let mut w = self.spacing;
        if ix == 0 || ix == last {
            w *= 0.5;
        }
        if self.dim == 2 {
            w *= self.spacing;
            if iy == 0 || iy == last {
                w *= 0.5;
            }
        }
        w
    }

    /// Index offset (in intervals per axis) of this grid's origin inside a
    /// larger concentric grid with the same spacing, used to zero-extend
    /// and restrict fields between expansion radii. Errors if dimensions or
    /// spacings differ or the radii do not nest on whole nodes.
    pub fn embedding_offset(&self, larger: &Grid) -> Result<usize, LlbError> {
        if self.dim != larger.dim {
            return Err(LlbError::GridMismatch(format!(
                "cannot embed dim {} grid into dim {}",
                self.dim, larger.dim
            )));
        }
        if self.spacing != larger.spacing {
            return Err(LlbError::GridMismatch(format!(
                "embedding needs equal spacings, got {} and {}",
                self.spacing, larger.spacing
            )));
        }
        if larger.intervals < self.intervals || (larger.intervals - self.intervals) % 2 != 0 {
            return Err(LlbError::GridMismatch(format!(
                "radii {} and {} do not nest on whole nodes",
                self.radius, larger.radius
            )));
        }
        Ok((larger.intervals - self.intervals) / 2)
    }
}
