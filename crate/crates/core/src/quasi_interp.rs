//! Scalar quasi-interpolation: Shepard weights (degree 0) and moving least
//! squares of degree `m >= 1` with a basis shifted to the query point and
//! scaled by the support radius.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::parallel::par_map;
use crate::pointset::PointSet;
use crate::{Error, Point, Result};

/// Largest accepted condition estimate of the local Gram matrix.
pub const DEFAULT_GRAM_CONDITION_CAP: f64 = 1e12;

/// Neighborhood indices with their quasi-interpolation coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub indices: Vec<usize>,
    pub a: Vec<f64>,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.a.iter().sum()
    }
}

/// A frozen local operator: sites, values, support radius and reproduction degree.
#[derive(Debug, Clone)]
pub struct QuasiInterpolant {
    sites: Arc<PointSet>,
    values: Vec<f64>,
    delta: f64,
    degree: usize,
    kernel: Kernel,
    gram_condition_cap: f64,
}

/// Monomial exponents of total degree `<= m`, ordered by degree.
pub fn monomial_exponents(m: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity((m + 1) * (m + 2) / 2);
    for total in 0..=m as u32 {
        for ey in 0..=total {
            out.push((total - ey, ey));
        }
    }
    out
}

fn neighborhood(sites: &PointSet, x: &Point, delta: f64) -> Result<Vec<usize>> {
    let idx = sites.radius_query(x, delta);
    if idx.is_empty() {
        return Err(Error::EmptyNeighborhood { x: x[0], y: x[1], delta });
    }
    Ok(idx)
}

/// Shepard weights of `sites` at `x` without an operator around them.
pub fn shepard_weights_at(sites: &PointSet, x: &Point, delta: f64, kernel: Kernel) -> Result<WeightVector> {
    let indices = neighborhood(sites, x, delta)?;
    let pts = sites.sites();
    let w: Vec<f64> = indices.iter().map(|&i| kernel.weight_unchecked(x, &pts[i], delta)).collect();
    let total: f64 = w.iter().sum();
    let a = w.into_iter().map(|wi| wi / total).collect();
    Ok(WeightVector { indices, a })
}

impl QuasiInterpolant {
    pub fn new(sites: Arc<PointSet>, values: Vec<f64>, delta: f64, degree: usize) -> Result<Self> {
        if values.len() != sites.len() {
            return Err(Error::invalid(format!(
                "{} values for {} sites",
                values.len(),
                sites.len()
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("support radius must be positive, got {delta}")));
        }
        Ok(QuasiInterpolant {
            sites,
            values,
            delta,
            degree,
            kernel: Kernel::Wendland31,
            gram_condition_cap: DEFAULT_GRAM_CONDITION_CAP,
        })
    }

    pub fn with_condition_cap(mut self, cap: f64) -> Self {
        self.gram_condition_cap = cap;
        self
    }

    pub fn sites(&self) -> &Arc<PointSet> {
        &self.sites
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Coefficients at `x` for the operator's degree.
    pub fn weights(&self, x: &Point) -> Result<WeightVector> {
        if self.degree == 0 {
            self.shepard_weights(x)
        } else {
            self.mls_weights(x)
        }
    }

    fn neighborhood(&self, x: &Point) -> Result<Vec<usize>> {
        neighborhood(&self.sites, x, self.delta)
    }

    /// Normalized kernel weights `w_i(x) / sum_j w_j(x)`.
    pub fn shepard_weights(&self, x: &Point) -> Result<WeightVector> {
        shepard_weights_at(&self.sites, x, self.delta, self.kernel)
    }

    /// Moving least-squares coefficients `a_i = w_i(x) p(x_i)^T G^{-1} p(x)`.
    pub fn mls_weights(&self, x: &Point) -> Result<WeightVector> {
        let indices = self.neighborhood(x)?;
        let sites = self.sites.sites();
        let exps = monomial_exponents(self.degree);
        let q = exps.len();
        let basis = |y: &Point| -> DVector<f64> {
            let u = (y[0] - x[0]) / self.delta;
            let v = (y[1] - x[1]) / self.delta;
            DVector::from_iterator(q, exps.iter().map(|&(ex, ey)| u.powi(ex as i32) * v.powi(ey as i32)))
        };
        let w: Vec<f64> = indices
            .iter()
            .map(|&i| self.kernel.weight_unchecked(x, &sites[i], self.delta))
            .collect();
        let p: Vec<DVector<f64>> = indices.iter().map(|&i| basis(&sites[i])).collect();
        let mut gram = DMatrix::<f64>::zeros(q, q);
        for (pi, &wi) in p.iter().zip(&w) {
            gram.syger(wi, pi, pi, 1.0);
        }
        let eig = SymmetricEigen::new(gram);
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= self.gram_condition_cap) {
            return Err(Error::NonUnisolvent { condition });
        }
        // G^{-1} e_1, since the shifted basis evaluates to e_1 at x.
        let v = &eig.eigenvectors;
        let first_row = v.row(0).transpose();
        let scaled = first_row.component_div(&eig.eigenvalues);
        let lambda = v * scaled;
        let a = p.iter().zip(&w).map(|(pi, &wi)| wi * lambda.dot(pi)).collect();
        Ok(WeightVector { indices, a })
    }

    /// `sum_i a_i(x) v_i`.
    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        let wv = self.weights(x)?;
        Ok(wv.indices.iter().zip(&wv.a).map(|(&i, &a)| a * self.values[i]).sum())
    }

    /// Like [`evaluate`](Self::evaluate) but maps an empty neighborhood to `None`.
    pub fn try_evaluate(&self, x: &Point) -> Result<Option<f64>> {
        match self.evaluate(x) {
            Ok(v) => Ok(Some(v)),
            Err(Error::EmptyNeighborhood { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Evaluates at every grid node; uncovered nodes are `None`.
    pub fn evaluate_grid(&self, grid: &Grid) -> Result<Vec<Option<f64>>> {
        par_map(&grid.nodes(), |x| self.try_evaluate(x)).into_iter().collect()
    }

    /// Single-threaded grid evaluation (used for timing).
    pub fn evaluate_grid_sequential(&self, grid: &Grid) -> Result<Vec<Option<f64>>> {
        grid.nodes().iter().map(|x| self.try_evaluate(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{halton_tile, Domain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_set(sites: Vec<Point>) -> Arc<PointSet> {
        Arc::new(PointSet::new(sites, Domain::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 0.1).unwrap())
    }

    fn tiled(h: f64) -> Arc<PointSet> {
        Arc::new(halton_tile(&Domain::symmetric(1.0).unwrap(), h).unwrap())
    }

    #[test]
    fn shepard_single_and_symmetric() {
        let set = unit_set(vec![[0.0, 0.0], [1.5, 1.5]]);
        let op = QuasiInterpolant::new(set, vec![2.0, 5.0], 0.5, 0).unwrap();
        let wv = op.shepard_weights(&[0.0, 0.0]).unwrap();
        assert_eq!(wv.indices, vec![0]);
        assert_eq!(wv.a, vec![1.0]);

        let set = unit_set(vec![[-0.2, 0.0], [0.2, 0.0], [1.5, 1.5]]);
        let op = QuasiInterpolant::new(set, vec![1.0, 3.0, 9.0], 0.5, 0).unwrap();
        let wv = op.shepard_weights(&[0.0, 0.1]).unwrap();
        assert_eq!(wv.a, vec![0.5, 0.5]);
        assert_eq!(op.evaluate(&[0.0, 0.1]).unwrap(), 2.0);
    }

    #[test]
    fn shepard_empty_neighborhood_is_an_error() {
        let set = unit_set(vec![[0.0, 0.0]]);
        let op = QuasiInterpolant::new(set, vec![1.0], 0.5, 0).unwrap();
        match op.evaluate(&[1.0, 1.0]) {
            Err(Error::EmptyNeighborhood { x, y, delta }) => {
                assert_eq!((x, y, delta), (1.0, 1.0, 0.5));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(op.try_evaluate(&[1.0, 1.0]).unwrap(), None);
    }

    #[test]
    fn shepard_matches_naive_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sites: Vec<Point> = (0..20).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let values: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let delta = 0.9;
        let op = QuasiInterpolant::new(unit_set(sites.clone()), values.clone(), delta, 0).unwrap();
        for _ in 0..200 {
            let x = [rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)];
            let (mut num, mut den) = (0.0, 0.0);
            for (s, v) in sites.iter().zip(&values) {
                let r = ((x[0] - s[0]).powi(2) + (x[1] - s[1]).powi(2)).sqrt() / delta;
                let phi = if r < 1.0 { (1.0 - r).powi(4) * (4.0 * r + 1.0) } else { 0.0 };
                num += phi * v;
                den += phi;
            }
            if den == 0.0 {
                assert!(op.evaluate(&x).is_err());
                continue;
            }
            assert!((op.evaluate(&x).unwrap() - num / den).abs() < 1e-13);
        }
    }

    #[test]
    fn shepard_three_site_hand_computation() {
        let set = unit_set(vec![[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]]);
        let op = QuasiInterpolant::new(set, vec![1.0, 2.0, 4.0], 1.0, 0).unwrap();
        // distances from (0.25, 0): 0.25, 0.25, sqrt(0.3125)
        let w1 = 0.75f64.powi(4) * 2.0;
        let r3 = 0.3125f64.sqrt();
        let w3 = (1.0 - r3).powi(4) * (4.0 * r3 + 1.0);
        let want = (w1 * 1.0 + w1 * 2.0 + w3 * 4.0) / (2.0 * w1 + w3);
        assert!((op.evaluate(&[0.25, 0.0]).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn mls_symmetric_stencil_gives_equal_weights() {
        let set = unit_set(vec![[0.3, 0.0], [-0.3, 0.0], [0.0, 0.3], [0.0, -0.3]]);
        let op = QuasiInterpolant::new(set, vec![0.0; 4], 1.0, 1).unwrap();
        let wv = op.mls_weights(&[0.0, 0.0]).unwrap();
        for a in wv.a {
            assert!((a - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn mls_reproduces_quadratics() {
        let set = tiled(0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let delta = 0.5;
        let op = QuasiInterpolant::new(set.clone(), vec![0.0; set.len()], delta, 2).unwrap();
        let monomials: [fn(&Point) -> f64; 6] = [
            |_| 1.0,
            |p| p[0],
            |p| p[1],
            |p| p[0] * p[0],
            |p| p[0] * p[1],
            |p| p[1] * p[1],
        ];
        for _ in 0..200 {
            let x = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let wv = op.mls_weights(&x).unwrap();
            assert!(wv.indices.len() >= 12);
            for m in monomials {
                let s: f64 = wv.indices.iter().zip(&wv.a).map(|(&i, &a)| a * m(&set.sites()[i])).sum();
                assert!((s - m(&x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mls_linear_data_is_exact() {
        let set = tiled(0.2);
        let values: Vec<f64> = set.sites().iter().map(|p| 2.0 * p[0] - p[1]).collect();
        let op = QuasiInterpolant::new(set, values, 0.7, 1).unwrap();
        for x in [[0.0, 0.0], [0.2, -0.1], [-0.25, 0.3]] {
            assert!((op.evaluate(&x).unwrap() - (2.0 * x[0] - x[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn mls_degenerate_geometry_is_rejected() {
        let set = unit_set(vec![[-0.2, 0.0], [0.0, 0.0], [0.2, 0.0]]);
        let op = QuasiInterpolant::new(set, vec![1.0; 3], 1.0, 1).unwrap();
        assert!(matches!(op.evaluate(&[0.0, 0.1]), Err(Error::NonUnisolvent { .. })));
    }

    #[test]
    fn constants_are_reproduced() {
        let set = tiled(0.2);
        for m in 0..=2 {
            let op = QuasiInterpolant::new(set.clone(), vec![3.7; set.len()], 0.7, m).unwrap();
            for x in [[0.0, 0.0], [0.3, -0.2]] {
                assert!((op.evaluate(&x).unwrap() - 3.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_matches_pointwise() {
        let set = tiled(0.25);
        let values: Vec<f64> = set.sites().iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let op = QuasiInterpolant::new(set, values, 0.8, 0).unwrap();
        let grid = Grid::over(&Domain::symmetric(1.0).unwrap(), 0.1).unwrap();
        let field = op.evaluate_grid(&grid).unwrap();
        for (k, v) in field.iter().enumerate() {
            let want = op.try_evaluate(&grid.node(k)).unwrap();
            assert_eq!(v.map(f64::to_bits), want.map(f64::to_bits));
        }
        let single = op.evaluate_grid(&Grid::single([0.1, 0.2])).unwrap();
        assert_eq!(single, vec![Some(op.evaluate(&[0.1, 0.2]).unwrap())]);
    }

    #[test]
    fn locality_of_samples() {
        let set = tiled(0.25);
        let values: Vec<f64> = set.sites().iter().map(|p| p[0] * p[1]).collect();
        let delta = 0.6;
        let op = QuasiInterpolant::new(set.clone(), values.clone(), delta, 1).unwrap();
        let s = 7;
        let mut bumped = values;
        bumped[s] += 1.0;
        let op2 = QuasiInterpolant::new(set.clone(), bumped, delta, 1).unwrap();
        let site = set.sites()[s];
        let grid = Grid::over(&Domain::symmetric(1.0).unwrap(), 0.05).unwrap();
        for x in grid.nodes() {
            let far = (x[0] - site[0]).hypot(x[1] - site[1]) >= delta;
            if let (Ok(a), Ok(b)) = (op.evaluate(&x), op2.evaluate(&x)) {
                if far {
                    assert_eq!(a, b);
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn partition_of_unity_and_positivity(seed in 0u64..1000, m in 0usize..3) {
            let set = tiled(0.2);
            let op = QuasiInterpolant::new(set.clone(), vec![0.0; set.len()], 0.7, m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let wv = op.weights(&x).unwrap();
            proptest::prop_assert!((wv.sum() - 1.0).abs() <= 1e-10);
            if m == 0 {
                proptest::prop_assert!(wv.a.iter().all(|&a| a > 0.0 && a <= 1.0));
            }
        }
    }
}
