//! Score estimation: `S(y) ≈ ∇_y log p(y)` from noisy samples only.
//!
//! Two backends implement [`ScoreField`]: an analytic Gaussian-kernel density
//! ([`KdeScore`]) and a small point network ([`NetworkScore`]) trained with the
//! amortized residual denoising objective ([`ar_dae_loss`]).

mod adam;
mod kde;
mod network;
mod train;

pub use adam::Adam;
pub use kde::{KdeScore, KDE_NEIGHBORS};
pub use network::{
    network_gradient, network_loss, read_weights, write_weights, Dense, NetworkScore, NetworkWeights,
    Sample,
};
pub use train::{
    feature_scale, train_score_network, train_score_network_with, EpochLoss, TrainConfig,
    TrainOutcome,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Anything that yields a score vector at a query point.
///
/// Implementations must be pure: evaluating the same point twice gives the
/// same vector.
pub trait ScoreField: Sync {
    fn score(&self, q: &Point3) -> Point3;

    /// Short backend identifier recorded in reports.
    fn backend(&self) -> &'static str;
}

impl<T: ScoreField + ?Sized> ScoreField for &T {
    fn score(&self, q: &Point3) -> Point3 {
        (**self).score(q)
    }

    fn backend(&self) -> &'static str {
        (**self).backend()
    }
}

/// A score field backed by a closure. Useful for exact analytic scores.
pub struct FnScore<F> {
    f: F,
    name: &'static str,
}

impl<F: Fn(&Point3) -> Point3 + Sync> FnScore<F> {
    pub fn new(name: &'static str, f: F) -> Self {
        Self { f, name }
    }
}

impl<F: Fn(&Point3) -> Point3 + Sync> ScoreField for FnScore<F> {
    fn score(&self, q: &Point3) -> Point3 {
        (self.f)(q)
    }

    fn backend(&self) -> &'static str {
        self.name
    }
}

/// The identically-zero field.
pub struct ZeroScore;

impl ScoreField for ZeroScore {
    fn score(&self, _q: &Point3) -> Point3 {
        Point3::zeros()
    }

    fn backend(&self) -> &'static str {
        "zero"
    }
}

/// One score per query, in query order.
pub fn evaluate_score(field: &dyn ScoreField, queries: &PointCloud) -> Vec<Point3> {
    queries.points().par_iter().map(|q| field.score(q)).collect()
}

/// Amortized residual denoising loss `(1/N) Σ ‖σ_t·S_i + u_i‖²`.
pub fn ar_dae_loss(predicted: &[Point3], u: &[Point3], sigma_t: f64) -> Result<f64> {
    if predicted.len() != u.len() {
        return Err(Error::invalid(format!(
            "score and noise batches differ in length ({} vs {})",
            predicted.len(),
            u.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let total: f64 = predicted
        .iter()
        .zip(u)
        .map(|(s, u)| (s * sigma_t + u).norm_squared())
        .sum();
    Ok(total / predicted.len() as f64)
}
