//! Unsupervised point cloud denoising by score estimation and Tweedie's formula.
//!
//! A noisy cloud `Y = X + w`, `w ~ N(0, σ²I)`, is denoised in a single step with
//! the posterior mean `X̂ = Y + σ² ∇log p(Y)`. The score `∇log p(Y)` is estimated
//! from the noisy data alone, either analytically with a Gaussian kernel density
//! ([`score::KdeScore`]) or with a small point network trained on the amortized
//! residual denoising objective ([`score::train_score_network`]).
//!
//! When σ is unknown it is recovered by minimizing the point-cloud total variation
//! of the denoised result over σ ([`tvpc::estimate_sigma`]).
//!
//! ```no_run
//! use pcdenoise::prelude::*;
//!
//! # fn main() -> pcdenoise::Result<()> {
//! let mesh = shapes::icosphere(1.0, 5);
//! let clean = sample_mesh(&mesh, 10_000, 7, SamplingMode::Uniform)?;
//! let spec = NoiseSpec::gaussian(0.02, 11);
//! let (noisy, sigma) = add_gaussian_noise(&clean, &spec)?;
//!
//! let field = KdeScore::new(&noisy, sigma)?;
//! let denoised = tweedie_denoise(&noisy, &field, sigma)?;
//! println!("CD before {:.3e}, after {:.3e}",
//!     chamfer_distance(&noisy, &clean)?, chamfer_distance(&denoised, &clean)?);
//! # Ok(())
//! # }
//! ```

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod score;
pub mod tvpc;
pub mod tweedie;

mod numeric;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{
        normalize_to_unit_sphere, point_triangle_sq_distance, sample_mesh, shapes,
        NeighborIndex, Point3, PointCloud, SamplingMode, SphereTransform, TriangleMesh,
    };
    pub use crate::metrics::{chamfer_distance, point_to_mesh_distance, MetricReport};
    pub use crate::noise::{
        add_gaussian_noise, add_lidar_noise, bounding_scales, NoiseKind, NoiseSpec,
    };
    pub use crate::score::{
        ar_dae_loss, evaluate_score, train_score_network, KdeScore, NetworkScore,
        NetworkWeights, ScoreField, TrainConfig,
    };
    pub use crate::tvpc::{estimate_sigma, tv_pc, SigmaSearchConfig, TvpcConfig, WeightMode};
    pub use crate::tweedie::{posterior_mean_oracle, tweedie_denoise, DenoiseConfig};
}
