//! Rotations. Tangent vectors at `p` are ambient matrices `p Ω` with `Ω`
//! skew; transport is left translation of the body-frame `Ω`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::Manifold;
use crate::{Error, Result};

/// Angles this close to `pi` have no unique logarithm.
pub const CUT_LOCUS_MARGIN: f64 = 1e-6;

const REPAIR_TOL: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-8;
const INVARIANT_TOL: f64 = 1e-10;

/// An orthonormal 3x3 matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let drift = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !(drift <= INVARIANT_TOL) || !((det - 1.0).abs() <= INVARIANT_TOL) {
            return Err(Error::NotRotation(format!("orthogonality drift {drift:.2e}, det {det}")));
        }
        Ok(Rotation(m))
    }

    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Re-orthonormalizes results of floating-point products.
    fn repaired(m: Matrix3<f64>) -> Result<Self> {
        let drift = (m.transpose() * m - Matrix3::identity()).norm();
        if drift <= REPAIR_TOL {
            return Ok(Rotation(m));
        }
        if drift > DRIFT_TOL {
            return Err(Error::NotRotation(format!("orthogonality drift {drift:.2e}")));
        }
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        Rotation::new(u * vt)
    }
}

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Axial vector of the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Closed-form matrix exponential of a skew matrix.
pub fn rodrigues(omega: &Matrix3<f64>) -> Matrix3<f64> {
    let w = vee(omega);
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(&w);
    let (a, b) = if theta < 1e-4 {
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

fn angle_of(r: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    // sin and cos of the angle from the skew part and the trace
    let w2 = vee(r);
    let s = w2.norm();
    let c = 0.5 * (r.trace() - 1.0);
    (s.atan2(c), w2)
}

/// Skew `Ω` with `expm(Ω) = r`.
pub fn so3_log_body(r: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let (theta, w2) = angle_of(r);
    if PI - theta < CUT_LOCUS_MARGIN {
        return Err(Error::CutLocus { angle: theta });
    }
    let s = w2.norm();
    let scale = if theta < 1e-4 { 1.0 + theta * theta / 6.0 } else { theta / s };
    Ok(hat(&(w2 * scale)))
}

fn skew_part(v: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let sym = (v + v.transpose()).norm() * 0.5;
    if sym > INVARIANT_TOL * v.norm().max(1.0) {
        return Err(Error::invalid(format!("tangent is not skew in the body frame (symmetric part {sym:.2e})")));
    }
    Ok((v - v.transpose()) * 0.5)
}

/// `p expm(pᵀ v)`.
pub fn so3_exp(p: &Rotation, v: &Matrix3<f64>) -> Result<Rotation> {
    let omega = skew_part(&(p.0.transpose() * v))?;
    Rotation::repaired(p.0 * rodrigues(&omega))
}

/// `p logm(pᵀ q)`.
pub fn so3_log(p: &Rotation, q: &Rotation) -> Result<Matrix3<f64>> {
    Ok(p.0 * so3_log_body(&(p.0.transpose() * q.0))?)
}

/// Rotation angle of `pᵀ q`.
pub fn so3_dist(p: &Rotation, q: &Rotation) -> f64 {
    angle_of(&(p.0.transpose() * q.0)).0
}

/// Left translation: the body-frame skew `pᵀ v` reattached at `q`.
pub fn so3_transport(p: &Rotation, q: &Rotation, v: &Matrix3<f64>) -> Matrix3<f64> {
    q.0 * (p.0.transpose() * v)
}

/// `R_x(a) R_y(b) R_z(c)` acting on column vectors.
pub fn euler_xyz(a: f64, b: f64, c: f64) -> Rotation {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rz = Matrix3::new(cc, -sc, 0.0, sc, cc, 0.0, 0.0, 0.0, 1.0);
    Rotation(rx * ry * rz)
}

/// SO(3) with the bi-invariant metric; distance is the rotation angle.
#[derive(Debug, Clone, Copy, Default)]
pub struct So3;

impl Manifold for So3 {
    type Point = Rotation;
    type Tangent = Matrix3<f64>;

    fn name(&self) -> &'static str {
        "so3"
    }

    fn exp(&self, p: &Rotation, v: &Matrix3<f64>) -> Result<Rotation> {
        so3_exp(p, v)
    }

    fn log(&self, p: &Rotation, q: &Rotation) -> Result<Matrix3<f64>> {
        so3_log(p, q)
    }

    fn dist(&self, p: &Rotation, q: &Rotation) -> Result<f64> {
        Ok(so3_dist(p, q))
    }

    fn norm(&self, _p: &Rotation, v: &Matrix3<f64>) -> f64 {
        v.norm() / std::f64::consts::SQRT_2
    }

    fn transport(&self, p: &Rotation, q: &Rotation, v: &Matrix3<f64>) -> Result<Matrix3<f64>> {
        Ok(so3_transport(p, q, v))
    }

    fn zero(&self, _p: &Rotation) -> Matrix3<f64> {
        Matrix3::zeros()
    }

    fn check_point(&self, p: &Rotation) -> Result<()> {
        Rotation::new(p.0).map(|_| ())
    }

    fn coords(&self, p: &Rotation) -> Vec<f64> {
        p.0.transpose().iter().copied().collect()
    }

    fn from_coords(&self, c: &[f64]) -> Result<Rotation> {
        if c.len() != 9 {
            return Err(Error::invalid(format!("rotation needs 9 entries, got {}", c.len())));
        }
        Rotation::new(Matrix3::from_row_slice(c))
    }
}
