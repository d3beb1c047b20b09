//! Compactly supported radial weights.

use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Wendland's `phi_{3,1}(r) = (1 - r)_+^4 (4r + 1)`, C^2 with support `[0, 1)`.
#[inline]
pub fn wendland_31(r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - r;
    let s2 = s * s;
    s2 * s2 * (4.0 * r + 1.0)
}

/// Radial profile used by the quasi-interpolants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    #[serde(rename = "wendland_31")]
    Wendland31,
}

impl Kernel {
    pub fn id(&self) -> &'static str {
        match self {
            Kernel::Wendland31 => "wendland_31",
        }
    }

    /// Profile value at normalized radius `r >= 0`.
    pub fn profile(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::invalid(format!("kernel radius must be nonnegative, got {r}")));
        }
        Ok(self.profile_unchecked(r))
    }

    #[inline]
    pub(crate) fn profile_unchecked(&self, r: f64) -> f64 {
        match self {
            Kernel::Wendland31 => wendland_31(r),
        }
    }

    /// `phi(|x - site| / delta)`; zero whenever the distance reaches `delta`.
    pub fn weight(&self, x: &Point, site: &Point, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("support radius must be positive, got {delta}")));
        }
        Ok(self.weight_unchecked(x, site, delta))
    }

    #[inline]
    pub(crate) fn weight_unchecked(&self, x: &Point, site: &Point, delta: f64) -> f64 {
        let d = (x[0] - site[0]).hypot(x[1] - site[1]);
        if d >= delta {
            0.0
        } else {
            self.profile_unchecked(d / delta)
        }
    }
}

/// Checked `wendland_31` that rejects negative radii.
pub fn wendland(r: f64) -> Result<f64> {
    Kernel::Wendland31.profile(r)
}

/// Weight of `site` at `x` for support radius `delta`.
pub fn weight(x: &Point, site: &Point, delta: f64) -> Result<f64> {
    Kernel::Wendland31.weight(x, site, delta)
}
