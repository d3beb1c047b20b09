//! Multiscale residual correction for manifold-valued fields.
//!
//! Residuals `e_j(x_i) = F(x_i) ⊖ F_j(x_i)` are stored in the tangent space
//! of the base function at `x_i`. A query at `x` with `b = B(x)` moves the
//! residuals to `T_b`, pushes them through `b ⊕ ·`, averages, pulls the mean
//! back with `⊖ b` and applies the transported correction to `F_{j-1}(x)`.

use std::io::Write;
use std::sync::Arc;

use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::manifold::{KarcherConfig, Manifold, ManifoldField};
use crate::multiscale::ErrorField;
use crate::parallel::{par_map, try_par_map};
use crate::pointset::{Domain, LevelSequence, PointSet};
use crate::quasi_interp::{shepard_weights_at, WeightVector};
use crate::{Error, Point, Result};

/// Coarse reference field anchoring the tangent-space bookkeeping.
#[derive(Debug, Clone)]
pub enum BaseFunction<P> {
    /// Value of the nearest anchor sample; ties go to the lowest index.
    Nearest(ManifoldField<P>),
    Constant(P),
}

impl<P: Clone> BaseFunction<P> {
    pub fn nearest(samples: ManifoldField<P>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("base function needs at least one sample"));
        }
        Ok(BaseFunction::Nearest(samples))
    }

    /// Anchor index (`None` for a constant base) and value at `x`.
    pub fn lookup(&self, x: &Point) -> (Option<usize>, &P) {
        match self {
            BaseFunction::Nearest(f) => {
                let (i, _) = f.sites.nearest(x);
                (Some(i), &f.values[i])
            }
            BaseFunction::Constant(p) => (None, p),
        }
    }

    pub fn at(&self, x: &Point) -> P {
        self.lookup(x).1.clone()
    }
}

fn nearest_in(sites: &PointSet, x: &Point, w: &WeightVector) -> usize {
    let pts = sites.sites();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &i) in w.indices.iter().enumerate() {
        let d = (pts[i][0] - x[0]).hypot(pts[i][1] - x[1]);
        if d < best_d || (d == best_d && i < w.indices[best]) {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Shepard-weighted Karcher mean of the samples within `delta` of `x`.
pub fn manifold_quasi_interp<M: Manifold>(
    m: &M,
    field: &ManifoldField<M::Point>,
    x: &Point,
    delta: f64,
    cfg: &KarcherConfig,
) -> Result<M::Point> {
    let w = shepard_weights_at(&field.sites, x, delta, Kernel::Wendland31)?;
    let pts: Vec<M::Point> = w.indices.iter().map(|&i| field.values[i].clone()).collect();
    let start = nearest_in(&field.sites, x, &w);
    m.mean(&pts, &w.a, cfg, start)
}

/// Like [`manifold_quasi_interp`] but an empty neighborhood yields `None`.
pub fn try_manifold_quasi_interp<M: Manifold>(
    m: &M,
    field: &ManifoldField<M::Point>,
    x: &Point,
    delta: f64,
    cfg: &KarcherConfig,
) -> Result<Option<M::Point>> {
    match manifold_quasi_interp(m, field, x, delta, cfg) {
        Ok(p) => Ok(Some(p)),
        Err(Error::EmptyNeighborhood { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
enum LevelData<P, T> {
    /// Raw samples of `F` on the first level.
    Samples(Vec<P>),
    /// Residuals at `B(x_i)` with the anchor index of each site.
    Residuals { tangents: Vec<T>, anchors: Vec<Option<usize>> },
}

#[derive(Debug, Clone)]
struct Level<P, T> {
    sites: Arc<PointSet>,
    delta: f64,
    data: LevelData<P, T>,
}

/// Fitted levels of the manifold multiscale scheme. Levels can be appended
/// one at a time with [`ManifoldMultiscaleModel::add_level`].
#[derive(Debug, Clone)]
pub struct ManifoldMultiscaleModel<M: Manifold> {
    manifold: M,
    base: BaseFunction<M::Point>,
    cfg: KarcherConfig,
    levels: Vec<Level<M::Point, M::Tangent>>,
}

impl<M: Manifold + Clone> ManifoldMultiscaleModel<M> {
    pub fn new(manifold: M, base: BaseFunction<M::Point>, cfg: KarcherConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ManifoldMultiscaleModel { manifold, base, cfg, levels: Vec::new() })
    }

    pub fn manifold(&self) -> &M {
        &self.manifold
    }

    pub fn base(&self) -> &BaseFunction<M::Point> {
        &self.base
    }

    pub fn karcher(&self) -> &KarcherConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn sites(&self, j: usize) -> &Arc<PointSet> {
        &self.levels[j].sites
    }

    /// Fits one more level to the samples `values` of `F` at `sites`.
    pub fn add_level(&mut self, sites: Arc<PointSet>, delta: f64, values: Vec<M::Point>) -> Result<()> {
        if values.len() != sites.len() {
            return Err(Error::invalid(format!("{} values for {} sites", values.len(), sites.len())));
        }
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("support radius must be positive, got {delta}")));
        }
        let level = self.levels.len() + 1;
        let data = if self.levels.is_empty() {
            LevelData::Samples(values)
        } else {
            let m = &self.manifold;
            let rows = try_par_map(sites.sites(), |i, p| {
                let fit = || -> Result<(M::Tangent, Option<usize>)> {
                    let current = self.evaluate(p)?.ok_or(Error::EmptyNeighborhood { x: p[0], y: p[1], delta })?;
                    let (anchor, b) = self.base.lookup(p);
                    let e = m.log(&current, &values[i])?;
                    Ok((m.transport(&current, b, &e)?, anchor))
                };
                fit().map_err(|e| e.at_level(level, i))
            })?;
            let (tangents, anchors) = rows.into_iter().unzip();
            LevelData::Residuals { tangents, anchors }
        };
        self.levels.push(Level { sites, delta, data });
        Ok(())
    }

    fn correction(&self, level: &Level<M::Point, M::Tangent>, x: &Point) -> Result<Option<M::Point>> {
        let w = match shepard_weights_at(&level.sites, x, level.delta, Kernel::Wendland31) {
            Ok(w) => w,
            Err(Error::EmptyNeighborhood { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let m = &self.manifold;
        let start = nearest_in(&level.sites, x, &w);
        let pts: Vec<M::Point> = match &level.data {
            LevelData::Samples(values) => w.indices.iter().map(|&i| values[i].clone()).collect(),
            LevelData::Residuals { tangents, anchors } => {
                let (anchor, b) = self.base.lookup(x);
                w.indices
                    .iter()
                    .map(|&i| {
                        let v = if anchors[i] == anchor {
                            tangents[i].clone()
                        } else {
                            let (_, bi) = match (&self.base, anchors[i]) {
                                (BaseFunction::Nearest(f), Some(k)) => (k, &f.values[k]),
                                _ => unreachable!("constant bases share the anchor"),
                            };
                            m.transport(bi, b, &tangents[i])?
                        };
                        m.exp(b, &v)
                    })
                    .collect::<Result<_>>()?
            }
        };
        m.mean(&pts, &w.a, &self.cfg, start).map(Some)
    }

    /// `[F_1(x), ..., F_n(x)]`; a hole at one level poisons the later ones.
    pub fn evaluate_levels(&self, x: &Point) -> Result<Vec<Option<M::Point>>> {
        let m = &self.manifold;
        let mut out: Vec<Option<M::Point>> = Vec::with_capacity(self.levels.len());
        let mut current: Option<M::Point> = None;
        for (j, level) in self.levels.iter().enumerate() {
            current = if j > 0 && current.is_none() {
                None
            } else {
                match self.correction(level, x)? {
                    None => None,
                    Some(s) => match &level.data {
                        LevelData::Samples(_) => Some(s),
                        LevelData::Residuals { .. } => {
                            let prev = current.as_ref().expect("checked above");
                            let b = self.base.lookup(x).1;
                            let c = m.log(b, &s)?;
                            let c = m.transport(b, prev, &c)?;
                            Some(m.exp(prev, &c)?)
                        }
                    },
                }
            };
            out.push(current.clone());
        }
        Ok(out)
    }

    /// `F_n(x)`.
    pub fn evaluate(&self, x: &Point) -> Result<Option<M::Point>> {
        Ok(self.evaluate_levels(x)?.pop().flatten())
    }
}

/// Fits every level of `levels` to the oracle `f`.
pub fn manifold_multiscale_fit<M, F>(
    manifold: M,
    f: F,
    levels: &LevelSequence,
    base: BaseFunction<M::Point>,
    cfg: KarcherConfig,
) -> Result<ManifoldMultiscaleModel<M>>
where
    M: Manifold + Clone,
    F: Fn(&Point) -> M::Point + Sync,
{
    let samples = levels.levels().iter().map(|set| par_map(set.sites(), |p| f(p))).collect();
    manifold_multiscale_fit_samples(manifold, samples, levels, base, cfg)
}

/// Fits from precomputed samples; `samples[j]` lives on the sites of level `j`.
pub fn manifold_multiscale_fit_samples<M: Manifold + Clone>(
    manifold: M,
    samples: Vec<Vec<M::Point>>,
    levels: &LevelSequence,
    base: BaseFunction<M::Point>,
    cfg: KarcherConfig,
) -> Result<ManifoldMultiscaleModel<M>> {
    if levels.is_empty() || samples.len() != levels.len() {
        return Err(Error::invalid(format!("{} sample sets for {} levels", samples.len(), levels.len())));
    }
    let mut model = ManifoldMultiscaleModel::new(manifold, base, cfg)?;
    for (j, values) in samples.into_iter().enumerate() {
        model.add_level(levels.level(j).clone(), levels.support_radii()[j], values)?;
    }
    Ok(model)
}

/// Base function from the samples of `f` on the first level.
pub fn base_from_first_level<P: Clone + Send, F>(levels: &LevelSequence, f: F) -> Result<BaseFunction<P>>
where
    F: Fn(&Point) -> P + Sync,
{
    BaseFunction::nearest(ManifoldField::sample(levels.level(0).clone(), f))
}

/// Max geodesic distance between `approx` and `reference` on `G(rect, h_grid)`.
pub fn manifold_linf_error<M, A, R>(m: &M, approx: A, reference: R, rect: &Domain, h_grid: f64) -> Result<ErrorField>
where
    M: Manifold,
    A: Fn(&Point) -> Result<Option<M::Point>> + Sync,
    R: Fn(&Point) -> M::Point + Sync,
{
    let grid = Grid::over(rect, h_grid)?;
    let nodes = grid.nodes();
    let values = try_par_map(&nodes, |_, p| approx(p))?;
    distance_field(m, grid, &nodes, &values, &reference)
}

fn distance_field<M, R>(m: &M, grid: Grid, nodes: &[Point], approx: &[Option<M::Point>], reference: &R) -> Result<ErrorField>
where
    M: Manifold,
    R: Fn(&Point) -> M::Point + Sync,
{
    let missing = approx.iter().filter(|v| v.is_none()).count();
    if missing > 0 {
        return Err(Error::MissingValues { count: missing });
    }
    let idx: Vec<usize> = (0..nodes.len()).collect();
    let values = try_par_map(&idx, |_, &k| m.dist(approx[k].as_ref().unwrap(), &reference(&nodes[k])))?;
    Ok(ErrorField::from_values(grid, values))
}

/// Error fields of `F_1..F_n` against `reference`, evaluated in one pass.
pub fn manifold_level_errors<M, R>(model: &ManifoldMultiscaleModel<M>, reference: R, grid: &Grid) -> Result<Vec<ErrorField>>
where
    M: Manifold + Clone,
    R: Fn(&Point) -> M::Point + Sync,
{
    let nodes = grid.nodes();
    let per_node = try_par_map(&nodes, |_, p| model.evaluate_levels(p))?;
    (0..model.len())
        .map(|j| {
            let approx: Vec<Option<M::Point>> = per_node.iter().map(|v| v[j].clone()).collect();
            distance_field(model.manifold(), *grid, &nodes, &approx, &reference)
        })
        .collect()
}

/// Writes `x,y,m00..m22` rows (or `c0..` for other coordinate counts), 9 decimals.
pub fn write_manifold_csv<M: Manifold, W: Write>(m: &M, points: &[Point], values: &[M::Point], mut w: W) -> std::io::Result<()> {
    let width = values.first().map(|v| m.coords(v).len()).unwrap_or(9);
    let names: Vec<String> = if width == 9 {
        (0..9).map(|k| format!("m{}{}", k / 3, k % 3)).collect()
    } else {
        (0..width).map(|k| format!("c{k}")).collect()
    };
    writeln!(w, "x,y,{}", names.join(","))?;
    for (p, v) in points.iter().zip(values) {
        let c: Vec<String> = m.coords(v).iter().map(|c| format!("{c:.9}")).collect();
        writeln!(w, "{:.16e},{:.16e},{}", p[0], p[1], c.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{euler_xyz, hat, rodrigues, so3_log_body, Euclidean, Rotation, So3, Spd, SpdMatrix};
    use crate::multiscale::multiscale_fit;
    use crate::pointset::build_level_sequence;
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_levels(n: usize) -> LevelSequence {
        build_level_sequence(&Domain::symmetric(0.95).unwrap(), 0.375, 0.8, 3.0, n).unwrap()
    }

    fn so3_field(p: &Point) -> Rotation {
        let (x, y) = (p[0], p[1]);
        euler_xyz(1.2 * (5.0 * x - 0.1).sin(), y * y / 2.0 - (3.0 * x).sin(), 1.5 * (2.0 * x).cos())
    }

    fn vec_field(p: &Point) -> Vector3<f64> {
        let (x, y) = (p[0], p[1]);
        Vector3::new(5.0 * (-x * x - y * y).exp(), (2.0 * x + 1.0).sin() * (3.0 * y + 1.5).cos(), (4.0 * x).sin() * (5.0 * y).cos())
    }

    #[test]
    fn base_function_is_nearest_sample() {
        let levels = small_levels(1);
        let base = base_from_first_level(&levels, vec_field).unwrap();
        let sites = levels.level(0).sites();
        assert_eq!(base.at(&sites[3]), vec_field(&sites[3]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = [rng.random_range(-0.95..0.95), rng.random_range(-0.95..0.95)];
            let mut best = 0;
            for (i, s) in sites.iter().enumerate() {
                let d = |s: &Point| (s[0] - x[0]).hypot(s[1] - x[1]);
                if d(s) < d(&sites[best]) {
                    best = i;
                }
            }
            assert_eq!(base.at(&x), vec_field(&sites[best]));
        }
        let single = BaseFunction::nearest(ManifoldField::new(
            Arc::new(PointSet::new(vec![[0.0, 0.0]], Domain::unit(), 0.1).unwrap()),
            vec![7.0],
        ).unwrap()).unwrap();
        assert_eq!(single.at(&[0.9, 0.9]), 7.0);
    }

    #[test]
    fn two_sample_neighborhood_is_geodesic_point() {
        let sites = Arc::new(PointSet::new(vec![[0.2, 0.5], [0.6, 0.5]], Domain::unit(), 0.05).unwrap());
        let (p1, p2) = (so3_field(&[0.1, 0.3]), so3_field(&[0.5, 0.6]));
        let field = ManifoldField::new(sites.clone(), vec![p1, p2]).unwrap();
        let x = [0.3, 0.5];
        let w = shepard_weights_at(&sites, &x, 0.5, Kernel::Wendland31).unwrap();
        let a = w.a[w.indices.iter().position(|&i| i == 0).unwrap()];
        let y = manifold_quasi_interp(&So3, &field, &x, 0.5, &KarcherConfig::default()).unwrap();
        let omega = so3_log_body(&(p1.matrix().transpose() * p2.matrix())).unwrap();
        let want = p1.matrix() * rodrigues(&(omega * (1.0 - a)));
        assert!((y.matrix() - want).norm() < 1e-8);
    }

    #[test]
    fn euclidean_reduction_matches_scalar_scheme() {
        let levels = small_levels(3);
        let base = base_from_first_level(&levels, vec_field).unwrap();
        let model = manifold_multiscale_fit(Euclidean::<3>, vec_field, &levels, base, KarcherConfig::default()).unwrap();
        let scalar: Vec<_> = (0..3)
            .map(|c| multiscale_fit(|p| vec_field(p)[c], &levels, 0).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
            let got = model.evaluate_levels(&x).unwrap();
            for (c, s) in scalar.iter().enumerate() {
                let want = s.evaluate_levels(&x).unwrap();
                for (g, w) in got.iter().zip(&want) {
                    assert!((g.unwrap()[c] - w.unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_field_is_fixed_point() {
        let levels = small_levels(3);
        let p = euler_xyz(0.3, -1.0, 2.0);
        let base = base_from_first_level(&levels, |_| p).unwrap();
        let model = manifold_multiscale_fit(So3, |_| p, &levels, base, KarcherConfig::default()).unwrap();
        for x in [[0.0, 0.0], [0.4, -0.3], [-0.7, 0.8]] {
            for v in model.evaluate_levels(&x).unwrap() {
                assert!(So3.dist(&v.unwrap(), &p).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_base_gives_same_first_level() {
        let levels = small_levels(2);
        let nearest = base_from_first_level(&levels, so3_field).unwrap();
        let a = manifold_multiscale_fit(So3, so3_field, &levels, nearest, KarcherConfig::default()).unwrap();
        let b = manifold_multiscale_fit(So3, so3_field, &levels, BaseFunction::Constant(Rotation::identity()), KarcherConfig::default())
            .unwrap();
        let x = [0.1, 0.2];
        let (la, lb) = (a.evaluate_levels(&x).unwrap(), b.evaluate_levels(&x).unwrap());
        assert!(So3.dist(la[0].as_ref().unwrap(), lb[0].as_ref().unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn linf_error_trivial_cases() {
        let rect = Domain::symmetric(0.5).unwrap();
        let zero = manifold_linf_error(&So3, |p| Ok(Some(so3_field(p))), so3_field, &rect, 0.1).unwrap();
        assert_eq!(zero.linf, 0.0);
        let shift = hat(&Vector3::new(0.3, 0.0, 0.0));
        let moved = manifold_linf_error(
            &So3,
            |p| Ok(Some(so3_field(p))),
            |p| Rotation::new(so3_field(p).matrix() * rodrigues(&shift)).unwrap(),
            &rect,
            0.1,
        )
        .unwrap();
        assert!((moved.linf - 0.3).abs() < 1e-12);
    }

    #[test]
    fn spd_diagonal_errors_match_log_coordinates() {
        let diag = |p: &Point| Vector3::new(1.0 + p[0] * p[0], (p[1]).exp(), 2.0 + (p[0] * p[1]).sin());
        let approx = |p: &Point| diag(&[p[0] + 0.01, p[1]]);
        let to_spd = |v: Vector3<f64>| SpdMatrix::new(Matrix3::from_diagonal(&v)).unwrap();
        let rect = Domain::symmetric(0.5).unwrap();
        let err = manifold_linf_error(&Spd, |p| Ok(Some(to_spd(approx(p)))), |p| to_spd(diag(p)), &rect, 0.1).unwrap();
        let grid = Grid::over(&rect, 0.1).unwrap();
        for (k, v) in err.values.iter().enumerate() {
            let p = grid.node(k);
            let d = approx(&p).map(f64::ln) - diag(&p).map(f64::ln);
            assert!((v - d.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_nodes_are_reported() {
        let rect = Domain::symmetric(0.5).unwrap();
        let r = manifold_linf_error(&So3, |p| Ok(if p[0] > 0.3 { None } else { Some(so3_field(p)) }), so3_field, &rect, 0.1);
        assert!(matches!(r, Err(Error::MissingValues { .. })));
    }

    #[test]
    fn site_values_are_reproduced_consistently() {
        let levels = small_levels(2);
        let base = base_from_first_level(&levels, so3_field).unwrap();
        let model = manifold_multiscale_fit(So3, so3_field, &levels, base.clone(), KarcherConfig::default()).unwrap();
        let mut partial = ManifoldMultiscaleModel::new(So3, base, KarcherConfig::default()).unwrap();
        partial.add_level(levels.level(0).clone(), levels.support_radii()[0], par_map(levels.level(0).sites(), so3_field)).unwrap();
        let x = levels.level(1).sites()[5];
        let full = model.evaluate_levels(&x).unwrap();
        let first = partial.evaluate(&x).unwrap().unwrap();
        assert_eq!(full[0].unwrap(), first);
    }

    #[test]
    fn csv_layout() {
        let pts = [[0.0, 1.0]];
        let mut out = Vec::new();
        write_manifold_csv(&So3, &pts, &[Rotation::identity()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,y,m00,m01,m02,m10,m11,m12,m20,m21,m22");
        assert!(lines.next().unwrap().ends_with("1.000000000,0.000000000,0.000000000,0.000000000,1.000000000,0.000000000,0.000000000,0.000000000,1.000000000"));
    }
}
