//! Test fields used by the experiments.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::manifold::{euler_xyz, Rotation, SpdMatrix};
use crate::pointset::Domain;
use crate::Point;

/// Rectangle where [`ScalarFunction::Anomalous`] differs from `f`.
pub const ANOMALY_RECT: Domain = Domain { x_min: 0.1, x_max: 0.25, y_min: 0.2, y_max: 0.4 };
pub const ANOMALY_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarFunction {
    #[serde(rename = "h")]
    /// `5 exp(-x² - y²)`
    Gaussian,
    /// `sin(2x + 1) cos(3y + 1.5)`
    #[serde(rename = "f")]
    Smooth,
    /// `sin(4x) cos(5y)`
    #[serde(rename = "g")]
    Oscillatory,
    /// `Smooth` scaled by 1.01 on a small rectangle.
    #[serde(rename = "f_tilde")]
    Anomalous,
}

impl ScalarFunction {
    pub const ALL: [ScalarFunction; 4] =
        [ScalarFunction::Gaussian, ScalarFunction::Smooth, ScalarFunction::Oscillatory, ScalarFunction::Anomalous];

    pub fn id(&self) -> &'static str {
        match self {
            ScalarFunction::Gaussian => "h",
            ScalarFunction::Smooth => "f",
            ScalarFunction::Oscillatory => "g",
            ScalarFunction::Anomalous => "f_tilde",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ScalarFunction::ALL.into_iter().find(|f| f.id() == s)
    }

    pub fn eval(&self, p: &Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        match self {
            ScalarFunction::Gaussian => 5.0 * (-x * x - y * y).exp(),
            ScalarFunction::Smooth => smooth(x, y),
            ScalarFunction::Oscillatory => (4.0 * x).sin() * (5.0 * y).cos(),
            ScalarFunction::Anomalous => {
                let r = &ANOMALY_RECT;
                let inside = x >= r.x_min && x <= r.x_max && y >= r.y_min && y <= r.y_max;
                if inside {
                    ANOMALY_FACTOR * smooth(x, y)
                } else {
                    smooth(x, y)
                }
            }
        }
    }
}

fn smooth(x: f64, y: f64) -> f64 {
    (2.0 * x + 1.0).sin() * (3.0 * y + 1.5).cos()
}

/// Rotation field `R_x(1.2 sin(5x - 0.1)) R_y(y²/2 - sin 3x) R_z(1.5 cos 2x)`.
pub fn so3_field(p: &Point) -> Rotation {
    let (x, y) = (p[0], p[1]);
    euler_xyz(1.2 * (5.0 * x - 0.1).sin(), y * y / 2.0 - (3.0 * x).sin(), 1.5 * (2.0 * x).cos())
}

/// SPD field `G + Gᵀ` with `G = |cos 2y + 0.6| exp(-x² - y²) (5I + A) + I`.
pub fn spd_field(p: &Point) -> SpdMatrix {
    let (x, y) = (p[0], p[1]);
    let a = Matrix3::new((5.0 * y).sin(), y, x * y, 0.0, 0.0, y * y, 0.0, 0.0, 0.0);
    let s = ((2.0 * y).cos() + 0.6).abs() * (-x * x - y * y).exp();
    let g = (Matrix3::identity() * 5.0 + a) * s + Matrix3::identity();
    SpdMatrix::new(g + g.transpose()).expect("field is positive definite")
}
