//! Site generation and geometry: Halton tiling, fill distance, separation
//! radius and fixed-radius neighbor queries.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::kdtree::KdTree;
use crate::parallel::par_map;
use crate::{Error, Point, Result};

/// Number of points in the Halton base set that gets tiled.
pub const HALTON_BASE_COUNT: usize = 400;

/// Tolerance below which two tiled sites are considered the same.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Axis-aligned rectangle in the parameter plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let all_finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !all_finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::invalid(format!(
                "degenerate domain [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Domain { x_min, x_max, y_min, y_max })
    }

    pub fn unit() -> Self {
        Domain { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }

    /// The square `[-a, a]^2`.
    pub fn symmetric(a: f64) -> Result<Self> {
        Domain::new(-a, a, -a, a)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    /// Shrinks every side by `d`.
    pub fn inset(&self, d: f64) -> Result<Self> {
        Domain::new(self.x_min + d, self.x_max - d, self.y_min + d, self.y_max - d)
    }
}

/// Radical inverse of `index` in `base`.
pub fn halton(index: u64, base: u64) -> f64 {
    assert!(base >= 2, "Halton base must be at least 2");
    let b = base as f64;
    let mut i = index;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Scattered sites with cached fill distance, separation radius and a k-d tree.
#[derive(Debug, Clone)]
pub struct PointSet {
    sites: Vec<Point>,
    domain: Domain,
    fill_distance: f64,
    separation_radius: f64,
    spacing_ratio: f64,
    tree: KdTree,
}

impl PointSet {
    /// Builds the set, estimating the fill distance on a probe grid of step `probe_h`.
    pub fn new(sites: Vec<Point>, domain: Domain, probe_h: f64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("point set is empty"));
        }
        if let Some(p) = sites.iter().find(|p| !domain.contains(p)) {
            return Err(Error::invalid(format!("site ({}, {}) lies outside the domain", p[0], p[1])));
        }
        let tree = KdTree::build(&sites);
        let (separation_radius, spacing_ratio) = if sites.len() >= 2 {
            let nn = nearest_neighbor_distances(&sites, &tree);
            let min = nn.iter().copied().fold(f64::INFINITY, f64::min);
            let max = nn.iter().copied().fold(0.0, f64::max);
            if min <= 0.0 {
                return Err(Error::invalid("duplicate sites: separation radius is zero"));
            }
            (0.5 * min, max / min)
        } else {
            (f64::INFINITY, f64::NAN)
        };
        let fill_distance = probe_fill_distance(&sites, &tree, &domain, probe_h)?;
        Ok(PointSet { sites, domain, fill_distance, separation_radius, spacing_ratio, tree })
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Probe-grid estimate of the fill distance over the domain.
    pub fn fill_distance(&self) -> f64 {
        self.fill_distance
    }

    /// Half the smallest pairwise distance (infinite for a single site).
    pub fn separation_radius(&self) -> f64 {
        self.separation_radius
    }

    /// Largest over smallest nearest-neighbor distance among the sites.
    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }

    /// Indices `i` with `|center - x_i| < radius`, in unspecified order.
    pub fn radius_query(&self, center: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.tree.within(&self.sites, center, radius, &mut out);
        out
    }

    /// Same as [`radius_query`](Self::radius_query) but reuses `out`.
    pub fn radius_query_into(&self, center: &Point, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        self.tree.within(&self.sites, center, radius, out);
    }

    /// Nearest site and its distance; ties go to the lowest index.
    pub fn nearest(&self, p: &Point) -> (usize, f64) {
        self.tree.nearest(&self.sites, p, None).expect("point set is nonempty")
    }

    /// Writes `x,y` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y")?;
        for p in &self.sites {
            writeln!(w, "{:.16e},{:.16e}", p[0], p[1])?;
        }
        Ok(())
    }
}

fn nearest_neighbor_distances(sites: &[Point], tree: &KdTree) -> Vec<f64> {
    (0..sites.len())
        .map(|i| tree.nearest(sites, &sites[i], Some(i)).map(|(_, d)| d).unwrap_or(f64::INFINITY))
        .collect()
}

/// Probe nodes along one axis: `n + 1` equispaced nodes including both ends, step <= `probe_h`.
fn probe_axis(lo: f64, hi: f64, probe_h: f64) -> Vec<f64> {
    let n = ((hi - lo) / probe_h).ceil().max(1.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn probe_fill_distance(sites: &[Point], tree: &KdTree, domain: &Domain, probe_h: f64) -> Result<f64> {
    if !(probe_h > 0.0) {
        return Err(Error::invalid(format!("probe step must be positive, got {probe_h}")));
    }
    let xs = probe_axis(domain.x_min, domain.x_max, probe_h);
    let ys = probe_axis(domain.y_min, domain.y_max, probe_h);
    let rows = par_map(&ys, |&y| {
        xs.iter()
            .map(|&x| tree.nearest(sites, &[x, y], None).map(|(_, d)| d).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    });
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// Probe-grid fill distance of `points` with a caller-chosen probe step.
pub fn fill_distance(points: &PointSet, probe_h: f64) -> Result<f64> {
    probe_fill_distance(&points.sites, &points.tree, &points.domain, probe_h)
}

/// Half the minimum pairwise distance.
pub fn separation_radius(points: &PointSet) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("separation radius needs at least two sites"));
    }
    Ok(points.separation_radius)
}

/// First `n` points of the 2-d Halton sequence with bases (2, 3), indices `1..=n`.
pub fn halton_points(n: usize) -> Vec<Point> {
    (1..=n as u64).map(|i| [halton(i, 2), halton(i, 3)]).collect()
}

/// The Halton base set on the unit square.
pub fn halton_base_set(n: usize) -> Result<PointSet> {
    if n < 3 {
        return Err(Error::invalid(format!("Halton base set needs at least 3 points, got {n}")));
    }
    let probe = 1.0 / (50.0 * (n as f64).sqrt());
    PointSet::new(halton_points(n), Domain::unit(), probe)
}

fn default_base() -> &'static PointSet {
    static BASE: OnceLock<PointSet> = OnceLock::new();
    BASE.get_or_init(|| halton_base_set(HALTON_BASE_COUNT).expect("base set is valid"))
}

/// Scales and translates the Halton base set to cover `domain` with fill distance near `target_h`.
///
/// Tiles are anchored at `(x_min, y_min)`; sites beyond the upper edges are clipped.
pub fn halton_tile(domain: &Domain, target_h: f64) -> Result<PointSet> {
    let domain = Domain::new(domain.x_min, domain.x_max, domain.y_min, domain.y_max)?;
    if !(target_h > 0.0) || target_h >= domain.diameter() {
        return Err(Error::invalid(format!(
            "target fill distance {target_h} must be in (0, {})",
            domain.diameter()
        )));
    }
    let base = default_base();
    let r = target_h / base.fill_distance();
    let nx = (domain.width() / r).ceil() as usize;
    let ny = (domain.height() / r).ceil() as usize;
    let mut sites = Vec::with_capacity(nx * ny * base.len());
    for i in 0..nx {
        for j in 0..ny {
            let ox = domain.x_min + r * i as f64;
            let oy = domain.y_min + r * j as f64;
            for p in base.sites() {
                let q = [r * p[0] + ox, r * p[1] + oy];
                if domain.contains(&q) {
                    sites.push(q);
                }
            }
        }
    }
    let sites = dedup(sites);
    PointSet::new(sites, domain, target_h / 10.0)
}

fn dedup(sites: Vec<Point>) -> Vec<Point> {
    let tree = KdTree::build(&sites);
    let mut near = Vec::new();
    let keep: Vec<bool> = (0..sites.len())
        .map(|i| {
            near.clear();
            tree.within(&sites, &sites[i], DUPLICATE_TOL, &mut near);
            !near.iter().any(|&j| j < i)
        })
        .collect();
    sites.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect()
}

/// Site sets with geometrically shrinking fill distance, one per level.
#[derive(Debug, Clone)]
pub struct LevelSequence {
    levels: Vec<Arc<PointSet>>,
    mu: f64,
    nu: f64,
    nominal_h: Vec<f64>,
    support_radii: Vec<f64>,
}

impl LevelSequence {
    pub fn levels(&self) -> &[Arc<PointSet>] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> &Arc<PointSet> {
        &self.levels[j]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Target fill distance per level, `h_1 mu^(j-1)`.
    pub fn nominal_h(&self) -> &[f64] {
        &self.nominal_h
    }

    /// Support radius per level, `nu` times the nominal fill distance.
    pub fn support_radii(&self) -> &[f64] {
        &self.support_radii
    }

    /// Keeps only the first `n` levels.
    pub fn truncated(&self, n: usize) -> LevelSequence {
        let n = n.min(self.len());
        LevelSequence {
            levels: self.levels[..n].to_vec(),
            mu: self.mu,
            nu: self.nu,
            nominal_h: self.nominal_h[..n].to_vec(),
            support_radii: self.support_radii[..n].to_vec(),
        }
    }

    /// Replaces the sites of level `j` (used by the denoising filter).
    pub fn with_level(&self, j: usize, set: PointSet) -> LevelSequence {
        let mut out = self.clone();
        out.levels[j] = Arc::new(set);
        out
    }

    /// Smallest Shepard neighborhood size over all sites and probe nodes of `domain`.
    pub fn min_neighborhood(&self, probe: &Domain, step: f64) -> usize {
        let xs = probe_axis(probe.x_min, probe.x_max, step);
        let ys = probe_axis(probe.y_min, probe.y_max, step);
        let mut min = usize::MAX;
        for (j, set) in self.levels.iter().enumerate() {
            let delta = self.support_radii[j];
            let mut buf = Vec::new();
            for &y in &ys {
                for &x in &xs {
                    set.radius_query_into(&[x, y], delta, &mut buf);
                    min = min.min(buf.len());
                }
            }
            if let Some(next) = self.levels.get(j + 1) {
                for p in next.sites() {
                    set.radius_query_into(p, delta, &mut buf);
                    min = min.min(buf.len());
                }
            }
        }
        min
    }
}

/// Builds `n` Halton-tiled levels with target fill distances `h1 mu^(j-1)` and radii `nu h_j`.
pub fn build_level_sequence(domain: &Domain, h1: f64, mu: f64, nu: f64, n: usize) -> Result<LevelSequence> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::invalid(format!("scaling factor mu must be in (0, 1), got {mu}")));
    }
    if !(nu > 1.0) {
        return Err(Error::invalid(format!("support factor nu must exceed 1, got {nu}")));
    }
    if n == 0 {
        return Err(Error::invalid("at least one level is required"));
    }
    let nominal_h: Vec<f64> = (0..n).map(|j| h1 * mu.powi(j as i32)).collect();
    let levels = nominal_h
        .iter()
        .map(|&h| halton_tile(domain, h).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let support_radii = nominal_h.iter().map(|h| nu * h).collect();
    Ok(LevelSequence { levels, mu, nu, nominal_h, support_radii })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Digit reversal written independently of `halton`.
    fn radical_inverse_oracle(index: u64, base: u64) -> f64 {
        let mut digits = Vec::new();
        let mut i = index;
        while i > 0 {
            digits.push(i % base);
            i /= base;
        }
        let mut num = 0u64;
        let mut den = 1u64;
        for d in digits {
            num = num * base + d;
            den *= base;
        }
        num as f64 / den as f64
    }

    #[test]
    fn halton_values() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
        assert!((halton(5, 3) - radical_inverse_oracle(5, 3)).abs() < 1e-15);
        assert_eq!(halton(0, 2), 0.0);
    }

    #[test]
    fn halton_in_unit_interval() {
        for b in [2, 3, 5] {
            for i in 0..=100_000u64 {
                let v = halton(i, b);
                assert!((0.0..1.0).contains(&v));
            }
        }
        for i in 1..2000 {
            for b in [2, 3, 5, 7] {
                assert!((halton(i, b) - radical_inverse_oracle(i, b)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn base_set_first_points() {
        let pts = halton_points(4);
        let want = [[0.5, 1.0 / 3.0], [0.25, 2.0 / 3.0], [0.75, 1.0 / 9.0], [0.125, 4.0 / 9.0]];
        for (p, w) in pts.iter().zip(want) {
            assert!((p[0] - w[0]).abs() < 1e-15 && (p[1] - w[1]).abs() < 1e-15);
        }
        assert!(halton_base_set(1).is_err());
    }

    #[test]
    fn fill_distance_simple_configurations() {
        let single = PointSet::new(vec![[0.5, 0.5]], Domain::unit(), 0.1).unwrap();
        assert!((single.fill_distance() - 0.5f64.sqrt()).abs() < 1e-12);
        let corners = PointSet::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            Domain::unit(),
            0.05,
        )
        .unwrap();
        assert!((corners.fill_distance() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((corners.separation_radius() - 0.5).abs() < 1e-15);
        assert!(PointSet::new(vec![], Domain::unit(), 0.1).is_err());
    }

    #[test]
    fn separation_radius_two_sites_and_duplicates() {
        let two = PointSet::new(vec![[0.0, 0.0], [1.0, 0.0]], Domain::unit(), 0.1).unwrap();
        assert_eq!(separation_radius(&two).unwrap(), 0.5);
        let dup = PointSet::new(vec![[0.2, 0.2], [0.2, 0.2]], Domain::unit(), 0.1);
        assert!(dup.is_err());
        let one = PointSet::new(vec![[0.2, 0.2]], Domain::unit(), 0.1).unwrap();
        assert!(separation_radius(&one).is_err());
    }

    #[test]
    fn base_set_separation_matches_brute_force() {
        let set = halton_base_set(400).unwrap();
        let s = set.sites();
        let mut min = f64::INFINITY;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                min = min.min(((s[i][0] - s[j][0]).powi(2) + (s[i][1] - s[j][1]).powi(2)).sqrt());
            }
        }
        assert_eq!(set.separation_radius(), min / 2.0);
    }

    #[test]
    fn base_set_fill_distance_matches_monte_carlo() {
        let set = halton_base_set(400).unwrap();
        let probe = 1.0 / (50.0 * 20.0);
        let s = set.sites();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sup: f64 = 0.0;
        for _ in 0..1_000_000 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let d = s
                .iter()
                .map(|p| (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            sup = sup.max(d);
        }
        let tol = probe * std::f64::consts::SQRT_2;
        assert!((set.fill_distance() - sup).abs() <= tol, "{} vs {}", set.fill_distance(), sup);
    }

    #[test]
    fn base_set_spacing_ratio_near_reference() {
        let set = halton_base_set(400).unwrap();
        let ratio = set.spacing_ratio();
        assert!((ratio - 4.01).abs() <= 0.15 * 4.01, "spacing ratio {ratio}");
    }

    #[test]
    fn tile_on_unit_square_reproduces_base() {
        let base = halton_base_set(400).unwrap();
        let tiled = halton_tile(&Domain::unit(), base.fill_distance()).unwrap();
        assert_eq!(tiled.sites(), base.sites());
    }

    #[test]
    fn tile_hits_target_and_keeps_ratio() {
        let domain = Domain::symmetric(0.95).unwrap();
        let base = halton_base_set(400).unwrap();
        let base_ratio = base.fill_distance() / base.separation_radius();
        for h in [0.375, 0.3, 0.2, 0.1] {
            let set = halton_tile(&domain, h).unwrap();
            assert!((set.fill_distance() - h).abs() <= 0.15 * h, "h {} vs {}", set.fill_distance(), h);
            let ratio = set.fill_distance() / set.separation_radius();
            assert!(ratio <= 1.15 * base_ratio, "ratio {ratio} vs base {base_ratio}");
            assert!(set.sites().iter().all(|p| domain.contains(p)));
        }
    }

    #[test]
    fn tile_is_deterministic() {
        let domain = Domain::new(-1.0, 0.5, 0.0, 2.0).unwrap();
        let a = halton_tile(&domain, 0.2).unwrap();
        let b = halton_tile(&domain, 0.2).unwrap();
        let bits = |s: &PointSet| s.sites().iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn tile_rejects_bad_input() {
        let d = Domain::unit();
        assert!(halton_tile(&d, 0.0).is_err());
        assert!(halton_tile(&d, 5.0).is_err());
        assert!(Domain::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn level_sequence_geometry() {
        let domain = Domain::symmetric(0.95).unwrap();
        let seq = build_level_sequence(&domain, 0.375, 0.8, 3.0, 5).unwrap();
        let want = [0.375, 0.3, 0.24, 0.192, 0.1536];
        for (h, w) in seq.nominal_h().iter().zip(want) {
            assert!((h - w).abs() < 1e-12);
        }
        for j in 1..seq.len() {
            let ratio = seq.level(j).fill_distance() / seq.level(j - 1).fill_distance();
            assert!((ratio - 0.8).abs() <= 0.1 * 0.8, "level {j}: ratio {ratio}");
            assert!(seq.support_radii()[j] < seq.support_radii()[j - 1]);
            let counts = seq.level(j).len() as f64 / seq.level(j - 1).len() as f64;
            assert!((counts - 0.8f64.powi(-2)).abs() <= 0.2 * 0.8f64.powi(-2), "count ratio {counts}");
        }
        let one = build_level_sequence(&domain, 0.375, 0.8, 3.0, 1).unwrap();
        assert_eq!(one.level(0).sites(), halton_tile(&domain, 0.375).unwrap().sites());
        assert!(build_level_sequence(&domain, 0.375, 1.2, 3.0, 2).is_err());
        assert!(build_level_sequence(&domain, 0.375, 0.8, 0.9, 2).is_err());
    }

    #[test]
    fn radius_query_edge_cases() {
        let set = halton_tile(&Domain::unit(), 0.1).unwrap();
        assert_eq!(set.radius_query(&[0.5, 0.5], 10.0).len(), set.len());
        let q = set.separation_radius();
        for p in set.sites().iter().take(50) {
            assert!(set.radius_query(p, q).len() <= 1);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let set = PointSet::new(vec![[0.1, 0.2], [0.3, 0.4]], Domain::unit(), 0.1).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y");
        assert_eq!(lines.len(), 3);
        let x: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(x, 0.1);
    }

    proptest::proptest! {
        #[test]
        fn separation_never_exceeds_fill(seed in 0u64..200, n in 2usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sites: Vec<Point> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
            let probe = 0.02;
            let set = PointSet::new(sites, Domain::unit(), probe).unwrap();
            proptest::prop_assert!(set.separation_radius() <= set.fill_distance() + probe * std::f64::consts::SQRT_2);
        }
    }
}
