use super::{closest_point_sq_distance, Point3, TriangleMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Point3::repeat(f64::INFINITY),
            hi: Point3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&mut self, other: &Aabb) {
        self.lo = self.lo.inf(&other.lo);
        self.hi = self.hi.sup(&other.hi);
    }

    fn sq_distance(&self, p: &Point3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let excess = (self.lo[k] - p[k]).max(p[k] - self.hi[k]).max(0.0);
            d += excess * excess;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding volume hierarchy over mesh triangles for exact closest-point queries.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    triangles: Vec<[Point3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Point3; 3]> = (0..mesh.faces().len()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Point3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            build_node(&triangles, &centroids, &mut order, 0, &mut nodes);
        }
        Self {
            triangles,
            order,
            nodes,
        }
    }

    /// Squared distance from `p` to the nearest triangle and that triangle's face index.
    pub fn closest(&self, p: &Point3) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![(0usize, self.nodes[0].bounds().sq_distance(p))];
        while let Some((node, bound)) = stack.pop() {
            if bound > best.0 {
                continue;
            }
            match &self.nodes[node] {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[*start..*end] {
                        let [a, b, c] = &self.triangles[f];
                        let d = closest_point_sq_distance(p, a, b, c);
                        if d < best.0 || (d == best.0 && f < best.1) {
                            best = (d, f);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().sq_distance(p);
                    let dr = self.nodes[*right].bounds().sq_distance(p);
                    // Push the farther child first so the nearer one is explored first.
                    if dl <= dr {
                        stack.push((*right, dr));
                        stack.push((*left, dl));
                    } else {
                        stack.push((*left, dl));
                        stack.push((*right, dr));
                    }
                }
            }
        }
        Some(best)
    }
}

fn build_node(
    triangles: &[[Point3; 3]],
    centroids: &[Point3],
    order: &mut [usize],
    offset: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &f in order.iter() {
        for v in &triangles[f] {
            bounds.grow(v);
        }
        cbounds.grow(&centroids[f]);
    }
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds,
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let axis = (cbounds.hi - cbounds.lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    nodes.push(Node::Leaf {
        bounds,
        start: 0,
        end: 0,
    });
    let (lower, upper) = order.split_at_mut(mid);
    let left = build_node(triangles, centroids, lower, offset, nodes);
    let right = build_node(triangles, centroids, upper, offset + mid, nodes);
    let mut merged = *nodes[left].bounds();
    merged.merge(nodes[right].bounds());
    nodes[id] = Node::Inner {
        bounds: merged,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::shapes;

    #[test]
    fn bvh_matches_exhaustive_scan() {
        let mesh = shapes::torus(1.0, 0.3, 20, 10);
        let bvh = TriangleBvh::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let p = Point3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-0.6..0.6),
            );
            let brute = (0..mesh.faces().len())
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    closest_point_sq_distance(&p, &a, &b, &c)
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(bvh.closest(&p).unwrap().0, brute);
        }
    }
}
