//! CURE agglomerative clustering.
//!
//! Every cluster is represented by up to `num_reps` well-scattered member
//! points, each moved a fraction `alpha` of the way towards the cluster
//! centroid. The distance between two clusters is the smallest distance
//! between their representatives, and the closest pair is merged until
//! `target_k` clusters remain.
//!
//! The merge loop keeps, for every live cluster, its nearest other cluster and
//! a min-heap of those nearest-neighbour distances with lazy invalidation
//! (entries carry a version stamp). A merge costs one distance evaluation per
//! live cluster plus a rescan for clusters whose nearest neighbour was one of
//! the merged pair, giving the usual `O(N^2 log N)` worst case.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::geometry::{mean_of, sq_dist, Point};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CureParams {
    /// Representatives per cluster.
    pub num_reps: usize,
    /// Shrinking factor towards the centroid, in `[0, 1]`.
    pub alpha: f64,
    pub target_k: usize,
    /// Fraction of points clustered directly; the rest are attached to the
    /// cluster of their nearest representative afterwards.
    pub sample_fraction: f64,
    /// Dissolve small clusters once a third of the clusters remain, and
    /// reattach their points at the end.
    pub outlier_elimination: bool,
    pub outlier_min_size: usize,
}

impl CureParams {
    pub fn new(num_reps: usize, alpha: f64, target_k: usize) -> Self {
        CureParams {
            num_reps,
            alpha,
            target_k,
            sample_fraction: 1.0,
            outlier_elimination: false,
            outlier_min_size: 3,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.num_reps == 0 {
            return Err(Error::domain("num_reps must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.target_k == 0 {
            return Err(Error::domain("target_k must be at least 1"));
        }
        if self.target_k > n {
            return Err(Error::domain(format!(
                "target_k = {} exceeds the {n} points",
                self.target_k
            )));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::domain("sample_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CureCluster {
    /// Indices into the input, ascending.
    pub members: Vec<usize>,
    pub centroid: Point,
    /// Input indices of the scattered points the representatives came from.
    pub scattered: Vec<usize>,
    /// Shrunken representatives, parallel to `scattered`.
    pub reps: Vec<Point>,
}

impl CureCluster {
    fn build(points: &[Point], members: Vec<usize>, num_reps: usize, alpha: f64) -> Self {
        let centroid = mean_of(points, &members);
        let scattered = select_representatives(points, &members, &centroid, num_reps);
        let chosen: Vec<Point> = scattered.iter().map(|&i| points[i]).collect();
        let reps = shrink_reps(&chosen, &centroid, alpha);
        CureCluster {
            members,
            centroid,
            scattered,
            reps,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Move each point a fraction `alpha` of the way to `centroid`.
pub fn shrink_reps(scattered: &[Point], centroid: &Point, alpha: f64) -> Vec<Point> {
    // (1 - a) p + a c is exact at both ends of [0, 1].
    scattered
        .iter()
        .map(|p| {
            let mut q = *p;
            for (v, c) in q.iter_mut().zip(centroid) {
                *v = (1.0 - alpha) * *v + alpha * c;
            }
            q
        })
        .collect()
}

/// Farthest-point traversal over `members`: start from the member farthest
/// from the centroid, then repeatedly take the member whose distance to the
/// nearest chosen point is largest. Ties go to the lowest index. Returns
/// `min(num_reps, members.len())` input indices.
pub fn select_representatives(
    points: &[Point],
    members: &[usize],
    centroid: &Point,
    num_reps: usize,
) -> Vec<usize> {
    let want = num_reps.min(members.len());
    let mut chosen = Vec::with_capacity(want);
    if want == 0 {
        return chosen;
    }
    let mut order: Vec<usize> = members.to_vec();
    order.sort_unstable();
    let mut taken = vec![false; order.len()];

    let mut first = 0;
    let mut best = f64::NEG_INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        let d = sq_dist(&points[i], centroid);
        if d > best {
            best = d;
            first = pos;
        }
    }
    taken[first] = true;
    chosen.push(order[first]);
    let mut min_d: Vec<f64> = order
        .iter()
        .map(|&i| sq_dist(&points[i], &points[order[first]]))
        .collect();

    while chosen.len() < want {
        let mut next = None;
        let mut best = f64::NEG_INFINITY;
        for pos in 0..order.len() {
            if !taken[pos] && min_d[pos] > best {
                best = min_d[pos];
                next = Some(pos);
            }
        }
        let pos = next.expect("fewer reps than members");
        taken[pos] = true;
        let c = points[order[pos]];
        chosen.push(order[pos]);
        for (d, &i) in min_d.iter_mut().zip(&order) {
            *d = d.min(sq_dist(&points[i], &c));
        }
    }
    chosen
}

fn rep_sq_dist(a: &[Point], b: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            let d = sq_dist(p, q);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Smallest Euclidean distance between a representative of `a` and one of `b`.
pub fn cluster_distance(a: &CureCluster, b: &CureCluster) -> f64 {
    rep_sq_dist(&a.reps, &b.reps).sqrt()
}

/// Heap entry: `(distance, lower id, higher id)` is the merge priority.
#[derive(Debug, Clone, Copy)]
struct Entry {
    d: f64,
    lo: usize,
    hi: usize,
    owner: usize,
    version: u32,
}

impl Entry {
    fn key(&self) -> (f64, usize, usize, usize) {
        (self.d, self.lo, self.hi, self.owner)
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    }
}

struct Node {
    cluster: CureCluster,
    /// Nearest live cluster and squared distance to it.
    closest: Option<(usize, f64)>,
    version: u32,
}

/// `(d, id)` ordering used when choosing nearest neighbours.
fn better(d: f64, id: usize, than: Option<(usize, f64)>) -> bool {
    match than {
        None => true,
        Some((cid, cd)) => d < cd || (d == cd && id < cid),
    }
}

struct Engine<'a> {
    points: &'a [Point],
    num_reps: usize,
    alpha: f64,
    nodes: Vec<Option<Node>>,
    heap: BinaryHeap<Reverse<Entry>>,
    alive: usize,
}

impl<'a> Engine<'a> {
    fn new(points: &'a [Point], ids: &[usize], num_reps: usize, alpha: f64) -> Self {
        let mut nodes: Vec<Option<Node>> = Vec::with_capacity(ids.len());
        for &i in ids {
            nodes.push(Some(Node {
                cluster: CureCluster::build(points, vec![i], num_reps, alpha),
                closest: None,
                version: 0,
            }));
        }
        let mut engine = Engine {
            points,
            num_reps,
            alpha,
            nodes,
            heap: BinaryHeap::new(),
            alive: ids.len(),
        };
        engine.rebuild_neighbours();
        engine
    }

    fn reps(&self, id: usize) -> &[Point] {
        &self.nodes[id].as_ref().expect("live cluster").cluster.reps
    }

    fn live_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_some())
            .map(|(i, _)| i)
    }

    fn push(&mut self, id: usize) {
        let node = self.nodes[id].as_ref().expect("live cluster");
        if let Some((other, d)) = node.closest {
            self.heap.push(Reverse(Entry {
                d,
                lo: id.min(other),
                hi: id.max(other),
                owner: id,
                version: node.version,
            }));
        }
    }

    fn rebuild_neighbours(&mut self) {
        let ids: Vec<usize> = self.live_ids().collect();
        let mut closest: Vec<Option<(usize, f64)>> = vec![None; self.nodes.len()];
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                let d = rep_sq_dist(self.reps(i), self.reps(j));
                if better(d, j, closest[i]) {
                    closest[i] = Some((j, d));
                }
                if better(d, i, closest[j]) {
                    closest[j] = Some((i, d));
                }
            }
        }
        self.heap.clear();
        for &i in &ids {
            let node = self.nodes[i].as_mut().expect("live cluster");
            node.closest = closest[i];
            node.version += 1;
            self.push(i);
        }
    }

    fn rescan(&self, id: usize) -> Option<(usize, f64)> {
        let mut best = None;
        let reps = self.reps(id);
        for j in self.live_ids() {
            if j != id {
                let d = rep_sq_dist(reps, self.reps(j));
                if better(d, j, best) {
                    best = Some((j, d));
                }
            }
        }
        best
    }

    fn pop_closest_pair(&mut self) -> Option<(usize, usize)> {
        while let Some(Reverse(e)) = self.heap.pop() {
            match &self.nodes[e.owner] {
                Some(node) if node.version == e.version => return Some((e.lo, e.hi)),
                _ => continue,
            }
        }
        None
    }

    /// Merge `v` into `u` (`u < v`); the union keeps id `u`.
    fn merge(&mut self, u: usize, v: usize) {
        let a = self.nodes[u].take().expect("live cluster");
        let b = self.nodes[v].take().expect("live cluster");
        let mut members = a.cluster.members;
        members.extend(b.cluster.members);
        members.sort_unstable();
        let merged = CureCluster::build(self.points, members, self.num_reps, self.alpha);
        self.nodes[u] = Some(Node {
            cluster: merged,
            closest: None,
            version: a.version.max(b.version) + 1,
        });
        self.alive -= 1;

        let ids: Vec<usize> = self.live_ids().filter(|&x| x != u).collect();
        let mut w_closest: Option<(usize, f64)> = None;
        for x in ids {
            let d = rep_sq_dist(self.reps(x), self.reps(u));
            if better(d, x, w_closest) {
                w_closest = Some((x, d));
            }
            let old = self.nodes[x].as_ref().expect("live cluster").closest;
            let new = match old {
                Some((c, od)) if c == u || c == v => {
                    // Everything else is at least `od` away.
                    if d < od {
                        Some((u, d))
                    } else {
                        self.rescan(x)
                    }
                }
                _ if better(d, u, old) => Some((u, d)),
                _ => continue,
            };
            let node = self.nodes[x].as_mut().expect("live cluster");
            node.closest = new;
            node.version += 1;
            self.push(x);
        }
        self.nodes[u].as_mut().expect("live cluster").closest = w_closest;
        self.push(u);
    }

    /// Dissolve up to `alive - keep` clusters smaller than `min_size`,
    /// smallest first. Returns the freed point indices.
    fn dissolve_small(&mut self, min_size: usize, keep: usize) -> Vec<usize> {
        let mut small: Vec<(usize, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|n| (n.cluster.len(), i)))
            .filter(|&(len, _)| len < min_size)
            .collect();
        small.sort_unstable();
        let budget = self.alive.saturating_sub(keep);
        let mut freed = Vec::new();
        for &(_, i) in small.iter().take(budget) {
            let node = self.nodes[i].take().expect("live cluster");
            freed.extend(node.cluster.members);
            self.alive -= 1;
        }
        if !freed.is_empty() {
            self.rebuild_neighbours();
        }
        freed
    }

    fn into_clusters(self) -> Vec<CureCluster> {
        self.nodes
            .into_iter()
            .flatten()
            .map(|n| n.cluster)
            .collect()
    }
}

/// Index of the cluster owning the representative nearest to `p`; ties go to
/// the earlier cluster.
fn nearest_cluster(p: &Point, clusters: &[CureCluster]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, cl) in clusters.iter().enumerate() {
        for r in &cl.reps {
            let d = sq_dist(p, r);
            if d < best.1 {
                best = (c, d);
            }
        }
    }
    best.0
}

/// Cluster `points` into `params.target_k` CURE clusters.
///
/// Clusters are returned ordered by their smallest member index. With
/// `sample_fraction = 1` and outlier elimination off the result does not
/// depend on `seed`.
pub fn cure_cluster(points: &[Point], params: &CureParams, seed: u64) -> Result<Vec<CureCluster>> {
    let n = points.len();
    params.validate(n)?;

    let mut ids: Vec<usize> = (0..n).collect();
    if params.sample_fraction < 1.0 {
        let size = ((params.sample_fraction * n as f64).ceil() as usize).clamp(params.target_k, n);
        let mut rng = seed::rng(seed::derive(seed, 0xC0E5));
        ids.shuffle(&mut rng);
        ids.truncate(size);
        ids.sort_unstable();
    }
    let sampled = ids.len();

    // Engine ids are positions in `ids`; map back to input indices at the end.
    let local: Vec<Point> = ids.iter().map(|&i| points[i]).collect();
    let positions: Vec<usize> = (0..sampled).collect();
    let mut engine = Engine::new(&local, &positions, params.num_reps, params.alpha);

    let checkpoint = sampled / 3;
    let mut checked = !params.outlier_elimination || checkpoint <= params.target_k;
    let mut outliers: Vec<usize> = Vec::new();
    while engine.alive > params.target_k {
        let (u, v) = engine
            .pop_closest_pair()
            .expect("a live pair exists while more than one cluster remains");
        engine.merge(u, v);
        if !checked && engine.alive <= checkpoint {
            checked = true;
            outliers = engine.dissolve_small(params.outlier_min_size, params.target_k);
        }
    }

    let mut clusters: Vec<CureCluster> = engine.into_clusters();
    for c in &mut clusters {
        for m in &mut c.members {
            *m = ids[*m];
        }
        for s in &mut c.scattered {
            *s = ids[*s];
        }
    }

    // Attach unsampled and dissolved points, then rebuild the affected clusters.
    let mut in_sample = vec![false; n];
    for &i in &ids {
        in_sample[i] = true;
    }
    let mut leftovers: Vec<usize> = (0..n).filter(|&i| !in_sample[i]).collect();
    leftovers.extend(outliers.iter().map(|&o| ids[o]));
    if !leftovers.is_empty() {
        let mut extra: Vec<Vec<usize>> = vec![Vec::new(); clusters.len()];
        for &i in &leftovers {
            extra[nearest_cluster(&points[i], &clusters)].push(i);
        }
        for (c, add) in clusters.iter_mut().zip(extra) {
            if add.is_empty() {
                continue;
            }
            let mut members = std::mem::take(&mut c.members);
            members.extend(add);
            members.sort_unstable();
            *c = CureCluster::build(points, members, params.num_reps, params.alpha);
        }
    }

    clusters.sort_by_key(|c| c.members[0]);
    Ok(clusters)
}

/// Per-point cluster index for a clustering of `n` points.
pub fn labels_of(clusters: &[CureCluster], n: usize) -> Vec<usize> {
    let mut labels = vec![usize::MAX; n];
    for (c, cl) in clusters.iter().enumerate() {
        for &m in &cl.members {
            labels[m] = c;
        }
    }
    labels
}
