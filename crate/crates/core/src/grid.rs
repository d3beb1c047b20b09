//! Regular evaluation grids `G(R, h)`.

use serde::{Deserialize, Serialize};

use crate::pointset::Domain;
use crate::{Error, Point, Result};

/// Nodes `(x0 + i h, y0 + j h)` for `i < nx`, `j < ny`, stored row by row (x fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Grid over `rect`: first node at the lower-left corner, last node `<= x_max`.
    pub fn over(rect: &Domain, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::invalid(format!("grid step must be positive, got {step}")));
        }
        let count = |len: f64| (len / step + 1e-9).floor() as usize + 1;
        Ok(Grid { x0: rect.x_min, y0: rect.y_min, step, nx: count(rect.width()), ny: count(rect.height()) })
    }

    pub fn single(p: Point) -> Self {
        Grid { x0: p[0], y0: p[1], step: 1.0, nx: 1, ny: 1 }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, k: usize) -> Point {
        let (i, j) = (k % self.nx, k / self.nx);
        [self.x0 + i as f64 * self.step, self.y0 + j as f64 * self.step]
    }

    pub fn nodes(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }
}
