//! Riemannian toolbox: the manifold contract, the SO(3), SPD(3) and
//! Euclidean instances, and weighted Karcher means.

use std::fmt::Debug;
use std::ops::{Add, Mul};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::pointset::PointSet;
use crate::{Error, Result};

mod euclidean;
mod so3;
mod spd;

pub use euclidean::Euclidean;
pub use so3::{euler_xyz, hat, rodrigues, so3_dist, so3_exp, so3_log, so3_log_body, so3_transport, vee, Rotation, So3};
pub use spd::{karcher_mean_spd, spd_dist, spd_exp, spd_log, spd_transport, Spd, SpdMatrix};

/// Stopping rule of the Karcher fixed-point iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KarcherConfig {
    /// Stop once consecutive iterates are closer than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for KarcherConfig {
    fn default() -> Self {
        KarcherConfig { tolerance: 1e-10, max_iterations: 100 }
    }
}

impl KarcherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::invalid("Karcher tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// Operations every manifold instance provides.
///
/// Tangent vectors are plain values; the base point they belong to is
/// passed alongside (or carried by [`TangentAt`]).
pub trait Manifold: Sync + Send {
    type Point: Clone + Debug + Send + Sync;
    type Tangent: Clone + Debug + Send + Sync + Add<Output = Self::Tangent> + Mul<f64, Output = Self::Tangent>;

    fn name(&self) -> &'static str;

    /// `p ⊕ v`.
    fn exp(&self, p: &Self::Point, v: &Self::Tangent) -> Result<Self::Point>;

    /// `q ⊖ p`, a tangent vector at `p`.
    fn log(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Tangent>;

    fn dist(&self, p: &Self::Point, q: &Self::Point) -> Result<f64>;

    /// Norm of `v` in the metric at `p`.
    fn norm(&self, p: &Self::Point, v: &Self::Tangent) -> f64;

    /// Moves `v` from the tangent space at `p` to the one at `q`.
    fn transport(&self, p: &Self::Point, q: &Self::Point, v: &Self::Tangent) -> Result<Self::Tangent>;

    fn zero(&self, p: &Self::Point) -> Self::Tangent;

    fn check_point(&self, p: &Self::Point) -> Result<()>;

    /// Flat coordinates used for CSV output.
    fn coords(&self, p: &Self::Point) -> Vec<f64>;

    #[allow(clippy::wrong_self_convention)]
    fn from_coords(&self, c: &[f64]) -> Result<Self::Point>;

    /// Weighted Karcher mean started from `points[nearest]`.
    fn mean(&self, points: &[Self::Point], weights: &[f64], cfg: &KarcherConfig, nearest: usize) -> Result<Self::Point>
    where
        Self: Sized,
    {
        karcher_mean(self, points, weights, cfg, &points[nearest])
    }
}

/// A tangent vector tagged with its base point.
#[derive(Debug, Clone)]
pub struct TangentAt<P, T> {
    pub base: P,
    pub vector: T,
}

/// Samples of a manifold-valued field at scattered sites.
#[derive(Debug, Clone)]
pub struct ManifoldField<P> {
    pub sites: Arc<PointSet>,
    pub values: Vec<P>,
}

impl<P> ManifoldField<P> {
    pub fn new(sites: Arc<PointSet>, values: Vec<P>) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(Error::invalid(format!("{} values for {} sites", values.len(), sites.len())));
        }
        Ok(ManifoldField { sites, values })
    }

    /// Samples `f` at every site.
    pub fn sample<F>(sites: Arc<PointSet>, f: F) -> Self
    where
        F: Fn(&crate::Point) -> P + Sync,
        P: Send,
    {
        let values = crate::parallel::par_map(sites.sites(), |p| f(p));
        ManifoldField { sites, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn normalized(weights: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total.abs() > 0.0) || !total.is_finite() {
        return Err(Error::invalid("weights must have a nonzero finite sum"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// `sum_i a_i log(y, p_i)`.
pub fn weighted_log_sum<M: Manifold>(m: &M, y: &M::Point, points: &[M::Point], weights: &[f64]) -> Result<M::Tangent> {
    let mut acc = m.zero(y);
    for (p, &a) in points.iter().zip(weights) {
        if a != 0.0 {
            acc = acc + m.log(y, p)? * a;
        }
    }
    Ok(acc)
}

/// First-order optimality residual `|sum_i a_i log(y, p_i)|` of a weighted mean.
pub fn karcher_residual<M: Manifold>(m: &M, y: &M::Point, points: &[M::Point], weights: &[f64]) -> Result<f64> {
    let w = normalized(weights)?;
    Ok(m.norm(y, &weighted_log_sum(m, y, points, &w)?))
}

/// Fixed-point iteration `Y <- exp(Y, sum a_i log(Y, p_i) / sum a_i)`.
pub fn karcher_mean<M: Manifold>(
    m: &M,
    points: &[M::Point],
    weights: &[f64],
    cfg: &KarcherConfig,
    init: &M::Point,
) -> Result<M::Point> {
    cfg.validate()?;
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::invalid("Karcher mean needs matching nonempty points and weights"));
    }
    let w = normalized(weights)?;
    let mut y = init.clone();
    let mut moved = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let step = weighted_log_sum(m, &y, points, &w)?;
        moved = m.norm(&y, &step);
        y = m.exp(&y, &step)?;
        if moved < cfg.tolerance {
            return Ok(y);
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iterations, residual: moved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Rotation {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
        let angle = rng.random_range(0.0..max_angle);
        Rotation::new(rodrigues(&hat(&(axis * angle)))).unwrap()
    }

    #[test]
    fn single_point_mean() {
        let m = So3;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_rotation(&mut rng, 2.0);
        let y = karcher_mean(&m, &[p], &[1.0], &KarcherConfig::default(), &p).unwrap();
        assert!(m.dist(&y, &p).unwrap() < 1e-14);
    }

    #[test]
    fn two_point_so3_mean_is_geodesic_point() {
        let m = So3;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = KarcherConfig::default();
        for _ in 0..50 {
            let p1 = random_rotation(&mut rng, 3.0);
            let p2 = m.exp(&p1, &(p1.matrix() * hat(&(Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize() * rng.random_range(0.0..2.5))))).unwrap();
            let a: f64 = rng.random_range(0.05..0.95);
            let y = karcher_mean(&m, &[p1, p2], &[a, 1.0 - a], &cfg, &p1).unwrap();
            // closed form: p1 expm((1 - a) logm(p1^T p2))
            let omega = so3_log_body(&(p1.matrix().transpose() * p2.matrix())).unwrap();
            let want = p1.matrix() * rodrigues(&(omega * (1.0 - a)));
            assert!((y.matrix() - want).norm() < 1e-8);
            assert!(karcher_residual(&m, &y, &[p1, p2], &[a, 1.0 - a]).unwrap() <= 10.0 * cfg.tolerance);
        }
    }

    #[test]
    fn euclidean_mean_is_weighted_average() {
        let m = Euclidean::<3>;
        let pts = vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.0, 4.0), Vector3::new(0.5, 0.5, 0.5)];
        let w = [0.2, 0.3, 0.5];
        let y = karcher_mean(&m, &pts, &w, &KarcherConfig::default(), &pts[0]).unwrap();
        let want = pts[0] * 0.2 + pts[1] * 0.3 + pts[2] * 0.5;
        assert!((y - want).norm() < 1e-15);
    }

    #[test]
    fn nonconvergence_reports_last_step() {
        let m = So3;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Rotation> = (0..5).map(|_| random_rotation(&mut rng, 1.0)).collect();
        let cfg = KarcherConfig { tolerance: 1e-300, max_iterations: 3 };
        match karcher_mean(&m, &pts, &[0.2; 5], &cfg, &pts[0]) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mean_of_many_rotations_satisfies_first_order_condition() {
        let m = So3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let center = random_rotation(&mut rng, 3.0);
        let cfg = KarcherConfig::default();
        let pts: Vec<Rotation> = (0..30)
            .map(|_| Rotation::new(center.matrix() * random_rotation(&mut rng, 0.6).matrix()).unwrap())
            .collect();
        let w: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
        let y = karcher_mean(&m, &pts, &w, &cfg, &pts[0]).unwrap();
        assert!(karcher_residual(&m, &y, &pts, &w).unwrap() <= 10.0 * cfg.tolerance);
        m.check_point(&y).unwrap();
    }

    #[test]
    fn spd_generic_and_damped_solvers_agree() {
        let m = Spd;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = KarcherConfig::default();
        for _ in 0..20 {
            let pts: Vec<SpdMatrix> = (0..3)
                .map(|_| {
                    let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                    SpdMatrix::new(a * a.transpose() + Matrix3::identity() * 0.5).unwrap()
                })
                .collect();
            let w = [0.2, 0.5, 0.3];
            let damped = karcher_mean_spd(&pts, &w, &cfg).unwrap();
            let plain = karcher_mean(&m, &pts, &w, &cfg, &pts[0]).unwrap();
            assert!((damped.matrix() - plain.matrix()).norm() < 1e-8);
            assert!(karcher_residual(&m, &damped, &pts, &w).unwrap() <= 10.0 * cfg.tolerance);
        }
    }
}
