use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{triangle_area, NeighborIndex, Point3, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Area-weighted i.i.d. uniform samples.
    #[default]
    Uniform,
    /// Poisson-disk-like spacing via weighted sample elimination: draw 4n
    /// uniform candidates, then greedily remove the most crowded ones.
    BlueNoise,
}

const OVERSAMPLING: usize = 4;
const ELIMINATION_ALPHA: i32 = 8;
const ELIMINATION_BETA: f64 = 0.65;
const ELIMINATION_GAMMA: f64 = 1.5;

/// Samples `n` points on the mesh surface. Deterministic in `seed`.
pub fn sample_mesh(mesh: &TriangleMesh, n: usize, seed: u64, mode: SamplingMode) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let total_area = mesh.area();
    if !(total_area > 0.0) {
        return Err(Error::invalid("mesh has zero surface area"));
    }
    match mode {
        SamplingMode::Uniform => PointCloud::new(uniform_samples(mesh, n, seed)),
        SamplingMode::BlueNoise => {
            let candidates = uniform_samples(mesh, OVERSAMPLING * n, seed);
            PointCloud::new(eliminate(candidates, n, total_area))
        }
    }
}

fn uniform_samples(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<Point3> {
    let mut cdf = Vec::with_capacity(mesh.faces().len());
    let mut acc = 0.0;
    for f in 0..mesh.faces().len() {
        let [a, b, c] = mesh.triangle(f);
        acc += triangle_area(&a, &b, &c);
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.random::<f64>() * acc;
            let face = cdf.partition_point(|&c| c <= t).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(face);
            let s = rng.random::<f64>().sqrt();
            let r2 = rng.random::<f64>();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect()
}

#[derive(PartialEq)]
struct HeapEntry {
    weight: f64,
    index: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Weighted sample elimination on a 2-manifold of area `area`.
fn eliminate(candidates: Vec<Point3>, target: usize, area: f64) -> Vec<Point3> {
    let m = candidates.len();
    let r_max = (area / (2.0 * 3f64.sqrt() * target as f64)).sqrt();
    let r_min = r_max
        * (1.0 - (target as f64 / m as f64).powf(ELIMINATION_GAMMA))
        * ELIMINATION_BETA;
    let reach = 2.0 * r_max;
    let weight_of = |d: f64| (1.0 - d.max(r_min) / reach).powi(ELIMINATION_ALPHA);

    let index = NeighborIndex::from_points(candidates);
    let neighbors: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| {
            let p = index.points()[i];
            index
                .within_radius(&p, reach)
                .into_iter()
                .filter(|&j| j != i)
                .map(|j| (j, weight_of((index.points()[j] - p).norm())))
                .collect()
        })
        .collect();

    let mut weights: Vec<f64> = neighbors
        .iter()
        .map(|nb| nb.iter().map(|&(_, w)| w).sum())
        .collect();
    let mut alive = vec![true; m];
    let mut heap: BinaryHeap<HeapEntry> = (0..m)
        .map(|i| HeapEntry {
            weight: weights[i],
            index: i,
        })
        .collect();
    let mut remaining = m;
    while remaining > target {
        let Some(top) = heap.pop() else { break };
        // Lazy deletion: skip entries whose weight is stale.
        if !alive[top.index] || top.weight != weights[top.index] {
            continue;
        }
        alive[top.index] = false;
        remaining -= 1;
        for &(j, w) in &neighbors[top.index] {
            if alive[j] {
                weights[j] -= w;
                heap.push(HeapEntry {
                    weight: weights[j],
                    index: j,
                });
            }
        }
    }
    let points = index.points();
    (0..m).filter(|&i| alive[i]).map(|i| points[i]).collect()
}
