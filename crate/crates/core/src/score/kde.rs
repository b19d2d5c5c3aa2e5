use super::ScoreField;
use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, Point3, PointCloud};

/// Default number of nearest sources used per evaluation.
pub const KDE_NEIGHBORS: usize = 64;

/// Score of an isotropic Gaussian kernel density over a point set:
///
/// `S(q) = Σ_i w_i(q) (y_i − q) / h²`, `w = softmax_i(−‖q − y_i‖² / 2h²)`,
///
/// with the sum truncated to the nearest [`KDE_NEIGHBORS`] sources.
#[derive(Debug, Clone)]
pub struct KdeScore {
    index: NeighborIndex,
    bandwidth: f64,
    neighbors: usize,
}

impl KdeScore {
    pub fn new(cloud: &PointCloud, bandwidth: f64) -> Result<Self> {
        Self::with_neighbors(cloud, bandwidth, KDE_NEIGHBORS)
    }

    /// Uses `neighbors` nearest sources; `usize::MAX` evaluates the full sum.
    pub fn with_neighbors(cloud: &PointCloud, bandwidth: f64, neighbors: usize) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("KDE bandwidth must be positive, got {bandwidth}")));
        }
        if neighbors == 0 {
            return Err(Error::invalid("KDE neighbor count must be positive"));
        }
        Ok(Self {
            index: NeighborIndex::build(cloud),
            bandwidth,
            neighbors,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

impl ScoreField for KdeScore {
    fn score(&self, q: &Point3) -> Point3 {
        let nbrs = self.index.knn(q, self.neighbors);
        let inv_2h2 = 0.5 / (self.bandwidth * self.bandwidth);
        // Neighbors are sorted, so the first has the largest logit.
        let shift = nbrs[0].sq_distance;
        let mut norm = 0.0;
        let mut mean = Point3::zeros();
        for n in &nbrs {
            let w = (-(n.sq_distance - shift) * inv_2h2).exp();
            norm += w;
            mean += self.index.points()[n.index] * w;
        }
        (mean / norm - q) / (self.bandwidth * self.bandwidth)
    }

    fn backend(&self) -> &'static str {
        "kde"
    }
}
