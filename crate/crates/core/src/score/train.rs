//! Training loop for the network score backend.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::adam::Adam;
use super::network::{network_gradient, NetworkScore, NetworkWeights, Sample};
use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, Point3, PointCloud};
use crate::numeric::{keyed_rng, median};

/// Stream offset separating weight initialization from batch draws.
const INIT_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Perturbation scale at the first epoch, in unit-sphere units.
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub batch_points: usize,
    pub k_feat: usize,
    pub hidden_width: usize,
    pub seed: u64,
    /// Optimizer steps per epoch; `None` means one pass worth of points,
    /// `ceil(N / batch_points)`.
    pub steps_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 2e-4,
            weight_decay: 1e-4,
            sigma_max: 0.05,
            sigma_min: 0.005,
            batch_points: 4096,
            k_feat: 16,
            hidden_width: 64,
            seed: 0,
            steps_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_points == 0 || self.k_feat == 0 || self.hidden_width == 0 {
            return Err(Error::invalid("epochs, batch size, k_feat and hidden width must be positive"));
        }
        if self.steps_per_epoch == Some(0) {
            return Err(Error::invalid("steps per epoch must be positive"));
        }
        if !(self.sigma_min > 0.0 && self.sigma_max >= self.sigma_min && self.sigma_max.is_finite()) {
            return Err(Error::invalid(format!(
                "need sigma_max >= sigma_min > 0, got {} and {}",
                self.sigma_max, self.sigma_min
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        Ok(())
    }

    /// Linear annealing from `sigma_max` at epoch 0 to `sigma_min` at the last epoch.
    pub fn sigma_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.sigma_max;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.sigma_max + (self.sigma_min - self.sigma_max) * t
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("train.epochs".into(), self.epochs.to_string()),
            ("train.learning_rate".into(), self.learning_rate.to_string()),
            ("train.weight_decay".into(), self.weight_decay.to_string()),
            ("train.sigma_max".into(), self.sigma_max.to_string()),
            ("train.sigma_min".into(), self.sigma_min.to_string()),
            ("train.batch_points".into(), self.batch_points.to_string()),
            ("train.k_feat".into(), self.k_feat.to_string()),
            ("train.hidden_width".into(), self.hidden_width.to_string()),
            ("train.seed".into(), self.seed.to_string()),
            ("train.optimizer".into(), "adam-decoupled-weight-decay".into()),
        ];
        if let Some(s) = self.steps_per_epoch {
            kv.push(("train.steps_per_epoch".into(), s.to_string()));
        }
        kv
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub sigma_t: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: NetworkWeights,
    pub k_feat: usize,
    /// Feature scale of the training cloud.
    pub feature_scale: f64,
    pub history: Vec<EpochLoss>,
}

impl TrainOutcome {
    /// Score field over `cloud`, with the feature scale measured on `cloud`.
    pub fn field(&self, cloud: &PointCloud) -> Result<NetworkScore> {
        NetworkScore::new(self.weights.clone(), cloud, self.k_feat)
    }
}

/// Median over points of the mean distance to their `k` nearest other points.
pub fn feature_scale(cloud: &PointCloud, k: usize) -> Result<f64> {
    if cloud.len() <= k {
        return Err(Error::invalid(format!(
            "feature scale needs more than {k} points, got {}",
            cloud.len()
        )));
    }
    let index = NeighborIndex::build(cloud);
    let mut means: Vec<f64> = cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let nb = index.knn_excluding(p, k, Some(i));
            nb.iter().map(|n| n.distance).sum::<f64>() / k as f64
        })
        .collect();
    let f = median(&mut means);
    if !(f > 0.0) {
        return Err(Error::invalid("cloud has no spatial extent at the feature scale"));
    }
    Ok(f)
}

/// Trains a score network on `cloud`, which should already be normalized to
/// the unit sphere.
pub fn train_score_network(cloud: &PointCloud, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_score_network_with(cloud, cfg, |_| {})
}

/// As [`train_score_network`], calling `on_epoch` after every epoch.
pub fn train_score_network_with(
    cloud: &PointCloud,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = cloud.len();
    if n <= cfg.k_feat {
        return Err(Error::invalid(format!(
            "training needs more than k_feat = {} points, got {n}",
            cfg.k_feat
        )));
    }
    let scale = feature_scale(cloud, cfg.k_feat)?;
    let index = NeighborIndex::build(cloud);
    let mut weights = NetworkWeights::init(cfg.hidden_width, cfg.seed ^ INIT_STREAM);
    let mut opt = Adam::new(&weights, cfg.learning_rate, cfg.weight_decay);
    let steps = cfg.steps_per_epoch.unwrap_or(n.div_ceil(cfg.batch_points));
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let sigma_t = cfg.sigma_at(epoch);
        let mut epoch_loss = 0.0;
        for step in 0..steps {
            let stream = (epoch * steps + step) as u64;
            let batch = draw_batch(&index, cfg, sigma_t, cfg.seed, stream);
            let (loss, grad) = network_gradient(&weights, &batch, sigma_t, scale);
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            opt.update(&mut weights, &grad);
            epoch_loss += loss;
        }
        let record = EpochLoss {
            epoch,
            sigma_t,
            loss: epoch_loss / steps as f64,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainOutcome {
        weights,
        k_feat: cfg.k_feat,
        feature_scale: scale,
        history,
    })
}

/// Uniformly drawn source points, each perturbed by `σ_t·u`. The neighborhood
/// of a perturbed copy never contains the point it came from.
fn draw_batch(index: &NeighborIndex, cfg: &TrainConfig, sigma_t: f64, seed: u64, stream: u64) -> Vec<Sample> {
    let mut rng = keyed_rng(seed, stream);
    let n = index.len();
    let draws: Vec<(usize, Point3)> = (0..cfg.batch_points)
        .map(|_| {
            let i = rng.random_range(0..n);
            let u = Point3::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            (i, u)
        })
        .collect();
    draws
        .into_par_iter()
        .map(|(i, u)| {
            let q = index.points()[i] + u * sigma_t;
            let offsets = index
                .knn_excluding(&q, cfg.k_feat, Some(i))
                .iter()
                .map(|nb| index.points()[nb.index] - q)
                .collect();
            Sample { offsets, u }
        })
        .collect()
}
