//! Exact k-nearest-neighbor search and construction of the training pairs.
//!
//! Neighbors are ordered by ascending distance with ties broken by ascending
//! index. Points coinciding with the query are never returned, and the radius
//! test is strict: `‖x_j - x_i‖ < r_max`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{PointCloud, SampleSet};
use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::dist2;

/// Above this dimension the index falls back to an exhaustive scan.
pub const MAX_TREE_DIM: usize = 10;

const LEAF_SIZE: usize = 12;

/// A neighbor found by a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index into the indexed cloud.
    pub index: usize,
    /// Euclidean distance to the query.
    pub distance: f64,
}

/// Bounded, sorted candidate list keyed by `(squared distance, index)`.
struct Candidates {
    k: usize,
    radius: f64,
    skip_coincident: bool,
    best: Vec<(f64, usize)>,
}

fn key_cmp(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl Candidates {
    fn new(k: usize, radius: f64, skip_coincident: bool) -> Self {
        Self {
            k,
            radius,
            skip_coincident,
            best: Vec::with_capacity(k + 1),
        }
    }

    fn full(&self) -> bool {
        self.best.len() == self.k
    }

    fn offer(&mut self, d2: f64, index: usize) {
        if (self.skip_coincident && d2 == 0.0) || !(libm::sqrt(d2) < self.radius) {
            return;
        }
        let key = (d2, index);
        if self.full() && key_cmp(&key, self.best.last().unwrap()) != Ordering::Less {
            return;
        }
        let pos = self
            .best
            .binary_search_by(|probe| key_cmp(probe, &key))
            .unwrap_or_else(|p| p);
        self.best.insert(pos, key);
        self.best.truncate(self.k);
    }

    /// Whether a region whose closest point is at squared distance `d2` may still matter.
    fn may_contain(&self, d2: f64) -> bool {
        libm::sqrt(d2) < self.radius && !(self.full() && d2 > self.best.last().unwrap().0)
    }

    fn finish(self) -> Vec<Neighbor> {
        self.best
            .into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: libm::sqrt(d2),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

/// Static kd-tree over a borrowed point cloud, with an axis-aligned bounding
/// box per node for pruning.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    cloud: &'a PointCloud,
    order: Vec<usize>,
    nodes: Vec<Node>,
    bounds: Vec<f64>,
}

impl<'a> KdTree<'a> {
    /// Builds the tree.
    pub fn new(cloud: &'a PointCloud) -> Self {
        let mut tree = Self {
            cloud,
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if !cloud.is_empty() {
            tree.build(0, cloud.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let dim = self.cloud.dim();
        let id = self.nodes.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[start..end] {
            for (a, &v) in self.cloud.point(i).iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);
        self.nodes.push(Node::Leaf { start, end });
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if end - start <= LEAF_SIZE || hi[axis] == lo[axis] {
            return id;
        }
        let mid = start + (end - start) / 2;
        let cloud = self.cloud;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            cloud.point(a)[axis].total_cmp(&cloud.point(b)[axis])
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { left, right };
        id
    }

    fn box_dist2(&self, node: usize, q: &[f64]) -> f64 {
        let dim = q.len();
        let b = &self.bounds[node * 2 * dim..(node + 1) * 2 * dim];
        let (lo, hi) = b.split_at(dim);
        q.iter()
            .enumerate()
            .map(|(a, &x)| {
                let t = if x < lo[a] {
                    lo[a] - x
                } else if x > hi[a] {
                    x - hi[a]
                } else {
                    0.0
                };
                t * t
            })
            .sum()
    }

    fn search(&self, node: usize, q: &[f64], cand: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    cand.offer(dist2(self.cloud.point(i), q), i);
                }
            }
            Node::Split { left, right } => {
                let dl = self.box_dist2(left, q);
                let dr = self.box_dist2(right, q);
                let (first, df, second, ds) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                if cand.may_contain(df) {
                    self.search(first, q, cand);
                }
                if cand.may_contain(ds) {
                    self.search(second, q, cand);
                }
            }
        }
    }

    fn query(&self, q: &[f64], cand: &mut Candidates) {
        if !self.nodes.is_empty() && cand.may_contain(self.box_dist2(0, q)) {
            self.search(0, q, cand);
        }
    }

    /// Number of tree nodes (diagnostics).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Exact neighbor index: a kd-tree in low dimension, a linear scan otherwise.
#[derive(Debug, Clone)]
pub enum NeighborIndex<'a> {
    /// Space-partitioning tree.
    Tree(KdTree<'a>),
    /// Exhaustive scan, used for `dim > MAX_TREE_DIM`.
    Scan(&'a PointCloud),
}

impl<'a> NeighborIndex<'a> {
    /// Indexes `cloud`.
    pub fn new(cloud: &'a PointCloud) -> Self {
        if cloud.dim() <= MAX_TREE_DIM {
            NeighborIndex::Tree(KdTree::new(cloud))
        } else {
            NeighborIndex::Scan(cloud)
        }
    }

    /// The indexed cloud.
    pub fn cloud(&self) -> &'a PointCloud {
        match self {
            NeighborIndex::Tree(t) => t.cloud,
            NeighborIndex::Scan(c) => c,
        }
    }

    /// Up to `k` points strictly within `radius` of `query`, nearest first.
    /// With `skip_coincident`, points at distance zero are ignored.
    pub fn knn(&self, query: &[f64], k: usize, radius: f64, skip_coincident: bool) -> Vec<Neighbor> {
        let mut cand = Candidates::new(k, radius, skip_coincident);
        if k == 0 {
            return Vec::new();
        }
        match self {
            NeighborIndex::Tree(t) => t.query(query, &mut cand),
            NeighborIndex::Scan(c) => {
                for (i, p) in c.iter().enumerate() {
                    cand.offer(dist2(p, query), i);
                }
            }
        }
        cand.finish()
    }

    /// Neighbors of point `i` of the indexed cloud, excluding every copy of it.
    pub fn neighbors_of(&self, i: usize, k: usize, radius: f64) -> Vec<Neighbor> {
        let cloud = self.cloud();
        self.knn(cloud.point(i), k, radius, true)
    }

    /// Nearest point to `query`, including exact matches; ties go to the lower index.
    pub fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        self.knn(query, 1, f64::INFINITY, false).into_iter().next()
    }
}

pub(crate) fn check_search_params(k_max: usize, r_max: f64) -> Result<()> {
    if k_max == 0 {
        return Err(invalid("k_max", "must be positive"));
    }
    if !(r_max > 0.0) {
        return Err(invalid("r_max", "must be positive (use infinity for no limit)"));
    }
    Ok(())
}

/// Indices `j` with `X[j] ≠ X[i]` among the `k_max` nearest neighbors of
/// `X[i]` and within `r_max`, nearest first.
pub fn nearest_neighbors(cloud: &PointCloud, i: usize, k_max: usize, r_max: f64) -> Result<Vec<usize>> {
    check_search_params(k_max, r_max)?;
    if i >= cloud.len() {
        return Err(invalid("point index", "out of range"));
    }
    Ok(NeighborIndex::new(cloud)
        .neighbors_of(i, k_max, r_max)
        .into_iter()
        .map(|n| n.index)
        .collect())
}

/// One directed training pair `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEntry {
    /// Base point index.
    pub i: usize,
    /// Neighbor index.
    pub j: usize,
    /// `‖X[j] - X[i]‖`.
    pub distance: f64,
}

/// Distance statistics gathered while building the pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    /// Shortest pair distance.
    pub min_distance: f64,
    /// Mean pair distance.
    pub mean_distance: f64,
    /// Longest pair distance.
    pub max_distance: f64,
    /// Sample points that received no admissible neighbor.
    pub isolated_points: usize,
}

/// The list `D` of directed pairs with cached loss rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPairs {
    input_dim: usize,
    output_dim: usize,
    entries: Vec<PairEntry>,
    bases: Vec<f64>,
    directions: Vec<f64>,
    deltas: Vec<f64>,
}

impl TrainingPairs {
    /// Number of pairs `|D|`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when `D` is empty.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Domain dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Codomain dimension `c`.
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Pair indices in current order.
    pub fn entries(&self) -> &[PairEntry] {
        &self.entries
    }

    /// `X[i]` for pair `p`.
    pub fn base(&self, p: usize) -> &[f64] {
        &self.bases[p * self.input_dim..(p + 1) * self.input_dim]
    }

    /// `u = (X[j] - X[i]) / ‖X[j] - X[i]‖` for pair `p`.
    pub fn direction(&self, p: usize) -> &[f64] {
        &self.directions[p * self.input_dim..(p + 1) * self.input_dim]
    }

    /// `v = (Y[j] - Y[i]) / ‖X[j] - X[i]‖` for pair `p`.
    pub fn delta(&self, p: usize) -> &[f64] {
        &self.deltas[p * self.output_dim..(p + 1) * self.output_dim]
    }

    /// Distance statistics over the current pairs.
    pub fn stats(&self, sample_count: usize) -> PairStats {
        let mut min = f64::INFINITY;
        let mut max: f64 = 0.0;
        let mut sum = 0.0;
        let mut seen = vec![false; sample_count];
        for e in &self.entries {
            min = min.min(e.distance);
            max = max.max(e.distance);
            sum += e.distance;
            if e.i < sample_count {
                seen[e.i] = true;
            }
        }
        PairStats {
            min_distance: min,
            mean_distance: sum / self.entries.len().max(1) as f64,
            max_distance: max,
            isolated_points: seen.iter().filter(|s| !**s).count(),
        }
    }

    fn permuted(&self, perm: &[usize]) -> Self {
        let (d, c) = (self.input_dim, self.output_dim);
        let mut out = Self {
            input_dim: d,
            output_dim: c,
            entries: Vec::with_capacity(perm.len()),
            bases: Vec::with_capacity(perm.len() * d),
            directions: Vec::with_capacity(perm.len() * d),
            deltas: Vec::with_capacity(perm.len() * c),
        };
        for &p in perm {
            out.entries.push(self.entries[p]);
            out.bases.extend_from_slice(self.base(p));
            out.directions.extend_from_slice(self.direction(p));
            out.deltas.extend_from_slice(self.delta(p));
        }
        out
    }

    /// Random permutation drawn from `rng`.
    pub fn shuffled_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..self.len()).collect();
        perm.shuffle(rng);
        self.permuted(&perm)
    }
}

/// Builds `D = ∪_i {(i, j) : j ∈ nearest_neighbors(X, i, k_max, r_max)}`,
/// ordered by ascending `i` then ascending distance.
pub fn build_pairs(samples: &SampleSet, k_max: usize, r_max: f64) -> Result<TrainingPairs> {
    check_search_params(k_max, r_max)?;
    let xs = samples.inputs();
    let ys = samples.outputs();
    if xs.len() < 2 {
        return Err(Error::Shape {
            what: "sample count (at least 2)",
            expected: 2,
            found: xs.len(),
        });
    }
    check_len("sample outputs", xs.len(), ys.len())?;
    let (d, c) = (xs.dim(), ys.dim());
    let index = NeighborIndex::new(xs);
    let mut pairs = TrainingPairs {
        input_dim: d,
        output_dim: c,
        entries: Vec::new(),
        bases: Vec::new(),
        directions: Vec::new(),
        deltas: Vec::new(),
    };
    for i in 0..xs.len() {
        let (xi, yi) = (xs.point(i), ys.point(i));
        for n in index.neighbors_of(i, k_max, r_max) {
            let (xj, yj) = (xs.point(n.index), ys.point(n.index));
            let norm = n.distance;
            pairs.entries.push(PairEntry {
                i,
                j: n.index,
                distance: norm,
            });
            pairs.bases.extend_from_slice(xi);
            pairs.directions.extend(xj.iter().zip(xi).map(|(b, a)| (b - a) / norm));
            pairs.deltas.extend(yj.iter().zip(yi).map(|(b, a)| (b - a) / norm));
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoTrainingPairs { k_max, r_max });
    }
    Ok(pairs)
}

/// Seeded random permutation of `D`.
pub fn shuffle_pairs(pairs: &TrainingPairs, seed: u64) -> TrainingPairs {
    pairs.shuffled_with(&mut ChaCha8Rng::seed_from_u64(seed))
}
