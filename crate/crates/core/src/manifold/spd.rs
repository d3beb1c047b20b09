//! Symmetric positive definite 3x3 matrices with the affine-invariant metric.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{KarcherConfig, Manifold};
use crate::{Error, Result};

const REPAIR_TOL: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMatrix(Matrix3<f64>);

impl SpdMatrix {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let asym = (m - m.transpose()).norm();
        if !(asym <= DRIFT_TOL * m.norm().max(1.0)) {
            return Err(Error::NotSpd(format!("asymmetry {asym:.2e}")));
        }
        let s = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        let min = eig.eigenvalues.min();
        if !(min > 0.0) || !eig.eigenvalues.iter().all(|x| x.is_finite()) {
            return Err(Error::NotSpd(format!("smallest eigenvalue {min}")));
        }
        Ok(SpdMatrix(s))
    }

    pub fn identity() -> Self {
        SpdMatrix(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    fn repaired(m: Matrix3<f64>) -> Result<Self> {
        let asym = (m - m.transpose()).norm();
        if asym > DRIFT_TOL * m.norm().max(1.0) {
            return Err(Error::NotSpd(format!("asymmetry drift {asym:.2e}")));
        }
        if asym <= REPAIR_TOL {
            // exact symmetry still matters for the eigen solver downstream
            return SpdMatrix::new((m + m.transpose()) * 0.5);
        }
        SpdMatrix::new(m)
    }
}

fn apply(m: &Matrix3<f64>, f: impl Fn(f64) -> f64) -> Matrix3<f64> {
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let d = Vector3::from_iterator(eig.eigenvalues.iter().map(|&l| f(l)));
    let q = eig.eigenvectors;
    let out = q * Matrix3::from_diagonal(&d) * q.transpose();
    (out + out.transpose()) * 0.5
}

fn sym(m: Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

struct Roots {
    half: Matrix3<f64>,
    inv_half: Matrix3<f64>,
}

fn roots(x: &SpdMatrix) -> Roots {
    Roots { half: apply(&x.0, f64::sqrt), inv_half: apply(&x.0, |l| 1.0 / l.sqrt()) }
}

/// `X^{1/2} logm(X^{-1/2} Y X^{-1/2}) X^{1/2}`.
pub fn spd_log(x: &SpdMatrix, y: &SpdMatrix) -> Result<Matrix3<f64>> {
    let r = roots(x);
    let inner = apply(&sym(r.inv_half * y.0 * r.inv_half), f64::ln);
    Ok(sym(r.half * inner * r.half))
}

/// `X^{1/2} expm(X^{-1/2} V X^{-1/2}) X^{1/2}`.
pub fn spd_exp(x: &SpdMatrix, v: &Matrix3<f64>) -> Result<SpdMatrix> {
    let r = roots(x);
    let inner = apply(&sym(r.inv_half * v * r.inv_half), f64::exp);
    SpdMatrix::repaired(r.half * inner * r.half)
}

/// `|logm(X^{-1/2} Y X^{-1/2})|_F`.
pub fn spd_dist(x: &SpdMatrix, y: &SpdMatrix) -> f64 {
    let inv_half = apply(&x.0, |l| 1.0 / l.sqrt());
    let eig = SymmetricEigen::new(sym(inv_half * y.0 * inv_half));
    eig.eigenvalues.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
}

/// Parallel transport along the geodesic: `E V Eᵀ`.
pub fn spd_transport(x: &SpdMatrix, y: &SpdMatrix, v: &Matrix3<f64>) -> Matrix3<f64> {
    let r = roots(x);
    let mid = apply(&sym(r.inv_half * y.0 * r.inv_half), f64::sqrt);
    let e = r.half * mid * r.inv_half;
    sym(e * v * e.transpose())
}

/// Weighted Karcher mean with the damped Richardson step; starts at the
/// arithmetic mean.
pub fn karcher_mean_spd(points: &[SpdMatrix], weights: &[f64], cfg: &KarcherConfig) -> Result<SpdMatrix> {
    cfg.validate()?;
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::invalid("Karcher mean needs matching nonempty points and weights"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("SPD mean needs nonnegative weights with positive sum"));
    }
    let w: Vec<f64> = weights.iter().map(|a| a / total).collect();
    let init = points.iter().zip(&w).fold(Matrix3::zeros(), |acc, (p, a)| acc + p.0 * *a);
    let mut y = SpdMatrix::new(init)?;
    let mut moved = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let r = roots(&y);
        let mut step = Matrix3::zeros();
        let mut denom = 0.0;
        for (p, &a) in points.iter().zip(&w) {
            if a == 0.0 {
                continue;
            }
            let eig = SymmetricEigen::new(sym(r.inv_half * p.0 * r.inv_half));
            let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
            let c = hi / lo;
            denom += a * if c - 1.0 < 1e-12 { 2.0 } else { (c + 1.0) / (c - 1.0) * c.ln() };
            let logs = Vector3::from_iterator(eig.eigenvalues.iter().map(|l| l.ln()));
            step += eig.eigenvectors * Matrix3::from_diagonal(&logs) * eig.eigenvectors.transpose() * a;
        }
        let theta = 2.0 / denom;
        let step = sym(step * theta);
        moved = step.norm();
        let next = r.half * apply(&step, f64::exp) * r.half;
        y = SpdMatrix::repaired(sym(next))?;
        if moved < cfg.tolerance {
            return Ok(y);
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iterations, residual: moved })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Spd;

impl Manifold for Spd {
    type Point = SpdMatrix;
    type Tangent = Matrix3<f64>;

    fn name(&self) -> &'static str {
        "spd"
    }

    fn exp(&self, p: &SpdMatrix, v: &Matrix3<f64>) -> Result<SpdMatrix> {
        spd_exp(p, v)
    }

    fn log(&self, p: &SpdMatrix, q: &SpdMatrix) -> Result<Matrix3<f64>> {
        spd_log(p, q)
    }

    fn dist(&self, p: &SpdMatrix, q: &SpdMatrix) -> Result<f64> {
        Ok(spd_dist(p, q))
    }

    fn norm(&self, p: &SpdMatrix, v: &Matrix3<f64>) -> f64 {
        let inv_half = apply(&p.0, |l| 1.0 / l.sqrt());
        (inv_half * v * inv_half).norm()
    }

    fn transport(&self, p: &SpdMatrix, q: &SpdMatrix, v: &Matrix3<f64>) -> Result<Matrix3<f64>> {
        Ok(spd_transport(p, q, v))
    }

    fn zero(&self, _p: &SpdMatrix) -> Matrix3<f64> {
        Matrix3::zeros()
    }

    fn check_point(&self, p: &SpdMatrix) -> Result<()> {
        SpdMatrix::new(p.0).map(|_| ())
    }

    fn coords(&self, p: &SpdMatrix) -> Vec<f64> {
        p.0.transpose().iter().copied().collect()
    }

    fn from_coords(&self, c: &[f64]) -> Result<SpdMatrix> {
        if c.len() != 9 {
            return Err(Error::invalid(format!("SPD matrix needs 9 entries, got {}", c.len())));
        }
        SpdMatrix::new(Matrix3::from_row_slice(c))
    }

    fn mean(&self, points: &[SpdMatrix], weights: &[f64], cfg: &KarcherConfig, _nearest: usize) -> Result<SpdMatrix> {
        karcher_mean_spd(points, weights, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng) -> SpdMatrix {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        SpdMatrix::new(a * a.transpose() + Matrix3::identity() * 0.3).unwrap()
    }

    #[test]
    fn distance_to_scaled_identity() {
        let e = SpdMatrix::new(Matrix3::identity() * std::f64::consts::E).unwrap();
        assert!((spd_dist(&SpdMatrix::identity(), &e) - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_spd() {
        assert!(SpdMatrix::new(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 2.0))).is_err());
        assert!(SpdMatrix::new(Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn log_exp_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let (x, y) = (random_spd(&mut rng), random_spd(&mut rng));
            let v = spd_log(&x, &y).unwrap();
            let back = spd_exp(&x, &v).unwrap();
            assert!(spd_dist(&back, &y) < 1e-9);
            assert!((Spd.norm(&x, &v) - spd_dist(&x, &y)).abs() < 1e-9);
        }
    }

    #[test]
    fn commuting_means_are_geometric() {
        let a = SpdMatrix::new(Matrix3::from_diagonal(&Vector3::new(1.0, 4.0, 9.0))).unwrap();
        let b = SpdMatrix::new(Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0))).unwrap();
        let m = karcher_mean_spd(&[a, b], &[0.5, 0.5], &KarcherConfig::default()).unwrap();
        let want = Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 3.0));
        assert!((m.matrix() - want).norm() < 1e-9);
    }

    #[test]
    fn affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (x, y) = (random_spd(&mut rng), random_spd(&mut rng));
            let mut g: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if g.determinant().abs() < 0.1 {
                g += Matrix3::identity();
            }
            let gx = SpdMatrix::new(sym(g * x.matrix() * g.transpose())).unwrap();
            let gy = SpdMatrix::new(sym(g * y.matrix() * g.transpose())).unwrap();
            let (d0, d1): (f64, f64) = (spd_dist(&x, &y), spd_dist(&gx, &gy));
            assert!((d0 - d1).abs() < 1e-7 * d0.max(1.0), "{d0} vs {d1}");
        }
    }

    #[test]
    fn transport_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (x, y) = (random_spd(&mut rng), random_spd(&mut rng));
            let v = sym(Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let w = spd_transport(&x, &y, &v);
            assert!((Spd.norm(&x, &v) - Spd.norm(&y, &w)).abs() < 1e-8);
            let log_xy = spd_log(&x, &y).unwrap();
            let moved = spd_transport(&x, &y, &log_xy);
            let want = spd_log(&y, &x).unwrap() * -1.0;
            assert!((moved - want).norm() < 1e-8 * want.norm().max(1.0));
        }
    }

    #[test]
    fn coords_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_spd(&mut rng);
        assert_eq!(Spd.from_coords(&Spd.coords(&x)).unwrap(), x);
    }
}
