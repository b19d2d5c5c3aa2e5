use std::cmp::Ordering;

use super::{Point3, PointCloud};

const LEAF_SIZE: usize = 8;

/// One k-NN result: the point index in the indexed cloud and its distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub sq_distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Balanced kd-tree over a fixed point cloud.
///
/// Results are exact and sorted by `(distance, index)`, so equal distances are
/// broken towards the smaller point index. The index is immutable after
/// construction and can be shared across threads.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points().to_vec())
    }

    pub(crate) fn from_points(points: Vec<Point3>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build_node(&points, &mut order, 0, &mut nodes);
        }
        Self {
            points,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// The `min(k, N)` nearest points to `q`, ascending.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<Neighbor> {
        self.knn_excluding(q, k, None)
    }

    /// Like [`knn`](Self::knn) but never returns `exclude`.
    pub fn knn_excluding(&self, q: &Point3, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let available = self.points.len() - usize::from(exclude.is_some_and(|e| e < self.len()));
        let k = k.min(available);
        if k == 0 {
            return Vec::new();
        }
        let mut best = Candidates::new(k);
        self.search(0, q, exclude, &mut best);
        best.items
            .into_iter()
            .map(|(sq, index)| Neighbor {
                index,
                distance: sq.sqrt(),
                sq_distance: sq,
            })
            .collect()
    }

    /// Nearest point to `q` (ties to the smaller index).
    pub fn nearest(&self, q: &Point3) -> Neighbor {
        self.knn(q, 1)[0]
    }

    /// All point indices with distance `< radius` from `q`, in ascending index order.
    pub fn within_radius(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_search(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn search(&self, node: usize, q: &Point3, exclude: Option<usize>, best: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    best.offer((self.points[i] - q).norm_squared(), i);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, exclude, best);
                // `<=` keeps subtrees that may hold an equidistant point with a smaller index.
                if !best.is_full() || diff * diff <= best.worst() {
                    self.search(far, q, exclude, best);
                }
            }
        }
    }

    fn radius_search(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| (self.points[i] - q).norm_squared() < r2),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff < r2 {
                    self.radius_search(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff < r2 {
                    self.radius_search(right, q, r2, out);
                }
            }
        }
    }
}

fn build_node(points: &[Point3], order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let mut lo = Point3::repeat(f64::INFINITY);
    let mut hi = Point3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let axis = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then(a.cmp(&b))
    });
    let value = points[order[mid]][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lower, upper) = order.split_at_mut(mid);
    let left = build_node(points, lower, offset, nodes);
    let right = build_node(points, upper, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

/// Bounded sorted candidate list keyed by `(sq_distance, index)`.
struct Candidates {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.0)
    }

    fn offer(&mut self, sq: f64, index: usize) {
        let key = (sq, index);
        if self.is_full() && cmp_key(&key, self.items.last().unwrap()) != Ordering::Less {
            return;
        }
        let pos = self
            .items
            .partition_point(|c| cmp_key(c, &key) == Ordering::Less);
        self.items.insert(pos, key);
        self.items.truncate(self.k);
    }
}

fn cmp_key(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - q).norm_squared()))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_point_finds_itself() {
        let c = PointCloud::from_arrays(&[[0.3, -1.0, 2.0]]).unwrap();
        let idx = NeighborIndex::build(&c);
        let r = idx.knn(&c.points()[0], 1);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].index, 0);
        assert_eq!(r[0].distance, 0.0);
    }

    #[test]
    fn collinear_points() {
        let c = PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
            .unwrap();
        let r = NeighborIndex::build(&c).knn(&Point3::zeros(), 2);
        assert_eq!(r.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(r.iter().map(|n| n.distance).collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn unit_square_corners() {
        let c = PointCloud::from_arrays(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ])
        .unwrap();
        let idx = NeighborIndex::build(&c);
        let r = idx.knn(&Point3::zeros(), 1);
        assert_eq!((r[0].index, r[0].distance), (0, 0.0));
        let r = idx.knn(&Point3::new(0.5, 0.5, 0.0), 4);
        assert_eq!(r.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(r.iter().all(|n| n.distance == r[0].distance));
    }

    #[test]
    fn ties_break_by_index_in_large_duplicate_sets() {
        // 40 coincident points force ties across several leaves.
        let pts: Vec<[f64; 3]> = (0..40).map(|_| [1.0, 1.0, 1.0]).collect();
        let c = PointCloud::from_arrays(&pts).unwrap();
        let r = NeighborIndex::build(&c).knn(&Point3::new(1.0, 1.0, 1.0), 5);
        assert_eq!(r.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn k_larger_than_n_clamps() {
        let c = random_cloud(5, 1);
        assert_eq!(NeighborIndex::build(&c).knn(&Point3::zeros(), 50).len(), 5);
    }

    #[test]
    fn exclusion_skips_the_point() {
        let c = random_cloud(100, 2);
        let idx = NeighborIndex::build(&c);
        let q = c.points()[17];
        let r = idx.knn_excluding(&q, 4, Some(17));
        assert!(r.iter().all(|n| n.index != 17));
        let full = idx.knn(&q, 5);
        assert_eq!(full[0].index, 17);
        assert_eq!(
            r.iter().map(|n| n.index).collect::<Vec<_>>(),
            full[1..].iter().map(|n| n.index).collect::<Vec<_>>()
        );
    }

    #[test]
    fn knn_matches_exhaustive_search_1000_points() {
        let c = random_cloud(1000, 3);
        let idx = NeighborIndex::build(&c);
        for q in c.points() {
            let got = idx.knn(q, 8);
            let want = brute_knn(c.points(), q, 8);
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.index, w.0);
                assert_eq!(g.sq_distance, w.1);
            }
        }
    }

    #[test]
    fn random_queries_match_exhaustive_search() {
        let c = random_cloud(200, 4);
        let idx = NeighborIndex::build(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let q = Point3::new(rng.random(), rng.random(), rng.random()) * 1.2;
            let k = rng.random_range(1..=20);
            let got: Vec<usize> = idx.knn(&q, k).iter().map(|n| n.index).collect();
            let want: Vec<usize> = brute_knn(c.points(), &q, k).iter().map(|w| w.0).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn radius_query_matches_brute_force() {
        let c = random_cloud(500, 6);
        let idx = NeighborIndex::build(&c);
        let q = Point3::new(0.5, 0.5, 0.5);
        let got = idx.within_radius(&q, 0.2);
        let want: Vec<usize> = (0..c.len())
            .filter(|&i| (c.points()[i] - q).norm_squared() < 0.04)
            .collect();
        assert_eq!(got, want);
    }
}
