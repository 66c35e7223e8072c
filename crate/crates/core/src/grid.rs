//! Uniform 2D sampling grid shared by profiles and mode fields.

use crate::{Error, Result};

/// Rectangular sampling grid in µm. Row `i` maps to `y = y0 + i·dy`,
/// column `j` to `x = x0 + j·dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x0: f64, y0: f64, dx: f64, dy: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(dx > 0.0) || !(dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::invalid(format!(
                "grid steps must be positive and finite (dx = {dx}, dy = {dy})"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid must be non-empty"));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Grid { x0, y0, dx, dy, nx, ny })
    }

    /// Grid centered on the origin with an odd number of samples per axis,
    /// spanning at least ±`half_width` / ±`half_height`. Coordinates are the
    /// bit-exact negation of their mirror samples.
    pub fn centered(half_width: f64, half_height: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::invalid("grid step must be positive"));
        }
        let cx = (half_width / step).ceil() as usize;
        let cy = (half_height / step).ceil() as usize;
        let nx = 2 * cx + 1;
        let ny = 2 * cy + 1;
        Grid::new(-(cx as f64) * step, -(cy as f64) * step, step, step, nx, ny)
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y0 + i as f64 * self.dy
    }

    /// Quadrature weight of one sample.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn width(&self) -> f64 {
        (self.nx - 1) as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        (self.ny - 1) as f64 * self.dy
    }

    /// True when both grids sample the same points to within `tol` (µm).
    pub fn same_geometry(&self, other: &Grid, tol: f64) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.x0 - other.x0).abs() <= tol
            && (self.y0 - other.y0).abs() <= tol
            && (self.dx - other.dx).abs() <= tol
            && (self.dy - other.dy).abs() <= tol
    }
}
