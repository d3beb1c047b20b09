//! Static 2-d tree over a borrowed site list.
//!
//! The tree is stored implicitly: `order` is a permutation of the site
//! indices such that for every range `[lo, hi)` the median element
//! `mid = (lo + hi) / 2` splits the range on axis `depth % 2`.

use crate::Point;

const LEAF: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    order: Vec<usize>,
}

#[inline]
fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl KdTree {
    pub fn build(sites: &[Point]) -> Self {
        let mut order: Vec<usize> = (0..sites.len()).collect();
        split(sites, &mut order, 0);
        KdTree { order }
    }

    /// Indices `i` with `|center - sites[i]| < radius`, appended to `out`.
    pub fn within(&self, sites: &[Point], center: &Point, radius: f64, out: &mut Vec<usize>) {
        if radius <= 0.0 {
            return;
        }
        self.within_rec(sites, center, radius, radius * radius, 0, self.order.len(), 0, out);
    }

    #[allow(clippy::too_many_arguments)]
    fn within_rec(
        &self,
        sites: &[Point],
        c: &Point,
        r: f64,
        r2: f64,
        lo: usize,
        hi: usize,
        depth: usize,
        out: &mut Vec<usize>,
    ) {
        if hi - lo <= LEAF {
            for &i in &self.order[lo..hi] {
                if dist2(c, &sites[i]) < r2 {
                    out.push(i);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = depth % 2;
        let pivot = self.order[mid];
        if dist2(c, &sites[pivot]) < r2 {
            out.push(pivot);
        }
        let diff = c[axis] - sites[pivot][axis];
        if diff - r < 0.0 {
            self.within_rec(sites, c, r, r2, lo, mid, depth + 1, out);
        }
        if diff + r >= 0.0 {
            self.within_rec(sites, c, r, r2, mid + 1, hi, depth + 1, out);
        }
    }

    /// Nearest site to `center`, ties broken by lowest index. `skip` excludes one index.
    pub fn nearest(&self, sites: &[Point], center: &Point, skip: Option<usize>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.nearest_rec(sites, center, skip, 0, self.order.len(), 0, &mut best);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    #[allow(clippy::too_many_arguments)]
    fn nearest_rec(
        &self,
        sites: &[Point],
        c: &Point,
        skip: Option<usize>,
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut Option<(usize, f64)>,
    ) {
        let consider = |i: usize, best: &mut Option<(usize, f64)>| {
            if Some(i) == skip {
                return;
            }
            let d2 = dist2(c, &sites[i]);
            let better = match *best {
                None => true,
                Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
            };
            if better {
                *best = Some((i, d2));
            }
        };
        if hi - lo <= LEAF {
            for &i in &self.order[lo..hi] {
                consider(i, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = depth % 2;
        let pivot = self.order[mid];
        consider(pivot, best);
        let diff = c[axis] - sites[pivot][axis];
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(sites, c, skip, first.0, first.1, depth + 1, best);
        let reach = match *best {
            None => true,
            Some((_, bd)) => diff * diff <= bd,
        };
        if reach {
            self.nearest_rec(sites, c, skip, second.0, second.1, depth + 1, best);
        }
    }
}

fn split(sites: &[Point], order: &mut [usize], depth: usize) {
    if order.len() <= LEAF {
        return;
    }
    let axis = depth % 2;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| sites[a][axis].total_cmp(&sites[b][axis]));
    let (left, right) = order.split_at_mut(mid);
    split(sites, left, depth + 1);
    split(sites, &mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sites(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
    }

    #[test]
    fn radius_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for inst in 0..100 {
            let sites = random_sites(1 + inst * 7, inst as u64);
            let tree = KdTree::build(&sites);
            for _ in 0..20 {
                let c = [rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2)];
                let r = rng.random_range(0.0..0.5);
                let mut got = Vec::new();
                tree.within(&sites, &c, r, &mut got);
                got.sort_unstable();
                let want: Vec<usize> = (0..sites.len()).filter(|&i| dist2(&c, &sites[i]) < r * r).collect();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let sites = random_sites(500, 3);
        let tree = KdTree::build(&sites);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let c = [rng.random::<f64>(), rng.random::<f64>()];
            let (i, d) = tree.nearest(&sites, &c, None).unwrap();
            let (j, dj) = (0..sites.len())
                .map(|k| (k, dist2(&c, &sites[k])))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!(i, j);
            assert!((d - dj.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn nearest_tie_prefers_lowest_index() {
        let sites = vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]];
        let tree = KdTree::build(&sites);
        assert_eq!(tree.nearest(&sites, &[0.0, 0.0], None).unwrap().0, 0);
        assert_eq!(tree.nearest(&sites, &[0.0, 0.0], Some(0)).unwrap().0, 1);
    }

    #[test]
    fn boundary_is_open() {
        let sites = vec![[0.0, 0.0], [1.0, 0.0]];
        let tree = KdTree::build(&sites);
        let mut out = Vec::new();
        tree.within(&sites, &[0.0, 0.0], 1.0, &mut out);
        assert_eq!(out, vec![0]);
    }
}
