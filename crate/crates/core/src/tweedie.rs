//! One-step posterior-mean denoising.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::numeric::CompensatedSum;
use crate::score::{evaluate_score, ScoreField};

/// Noise level and score field for a denoising pass.
#[derive(Clone, Copy)]
pub struct DenoiseConfig<'a> {
    /// Absolute noise standard deviation in the cloud's current frame.
    pub sigma_abs: f64,
    pub field: &'a dyn ScoreField,
}

impl<'a> DenoiseConfig<'a> {
    pub fn new(field: &'a dyn ScoreField, sigma_abs: f64) -> Result<Self> {
        check_sigma(sigma_abs)?;
        Ok(Self { sigma_abs, field })
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        tweedie_denoise(cloud, self.field, self.sigma_abs)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise level must be positive and finite, got {sigma}")))
    }
}

/// `X̂_i = Y_i + σ² S(Y_i)`.
pub fn tweedie_denoise(cloud: &PointCloud, field: &dyn ScoreField, sigma_abs: f64) -> Result<PointCloud> {
    check_sigma(sigma_abs)?;
    let scores = evaluate_score(field, cloud);
    tweedie_from_scores(cloud, &scores, sigma_abs)
}

/// Tweedie update with scores already evaluated at every point of `cloud`.
pub fn tweedie_from_scores(cloud: &PointCloud, scores: &[Point3], sigma_abs: f64) -> Result<PointCloud> {
    check_sigma(sigma_abs)?;
    if scores.len() != cloud.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} points",
            scores.len(),
            cloud.len()
        )));
    }
    if let Some(index) = scores.iter().position(|s| !s.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFiniteScore { index });
    }
    let s2 = sigma_abs * sigma_abs;
    let out = cloud
        .points()
        .par_iter()
        .zip(scores)
        .map(|(y, s)| y + s * s2)
        .collect();
    PointCloud::new(out)
}

/// `E[X | Y = y]` for a uniform prior over `clean` and Gaussian noise `σ`,
/// with max-subtracted weights and compensated sums.
pub fn posterior_mean_oracle(y: &Point3, clean: &PointCloud, sigma_abs: f64) -> Point3 {
    let inv = 1.0 / (2.0 * sigma_abs * sigma_abs);
    let logits: Vec<f64> = clean.points().iter().map(|x| -(y - x).norm_squared() * inv).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = CompensatedSum::default();
    let mut acc = [CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default()];
    for (l, x) in logits.iter().zip(clean.points()) {
        let w = (l - max).exp();
        z.add(w);
        for k in 0..3 {
            acc[k].add(w * x[k]);
        }
    }
    let z = z.value();
    Point3::new(acc[0].value() / z, acc[1].value() / z, acc[2].value() / z)
}

/// Exact score of the Gaussian mixture `(1/M) Σ N(x_i, σ²I)`.
pub fn mixture_score(y: &Point3, clean: &PointCloud, sigma_abs: f64) -> Point3 {
    (posterior_mean_oracle(y, clean, sigma_abs) - y) / (sigma_abs * sigma_abs)
}
