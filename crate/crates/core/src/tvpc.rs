//! Point-cloud total variation and blind noise-level search.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, Point3, PointCloud};
use crate::numeric::ordered_sum;
use crate::score::{evaluate_score, ScoreField};
use crate::tweedie::tweedie_from_scores;

const GRID_POINTS: usize = 20;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    #[default]
    Constant,
    Gaussian,
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMode::Constant => "constant",
            WeightMode::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(WeightMode::Constant),
            "gaussian" => Ok(WeightMode::Gaussian),
            other => Err(Error::invalid(format!("unknown weight mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvpcConfig {
    pub k: usize,
    pub epsilon: f64,
    pub weight_mode: WeightMode,
    /// Kernel scale for [`WeightMode::Gaussian`].
    pub gaussian_scale: f64,
    /// Count each unordered neighbor pair once instead of once per direction.
    pub symmetric: bool,
}

impl Default for TvpcConfig {
    fn default() -> Self {
        Self {
            k: 4,
            epsilon: 1e-4,
            weight_mode: WeightMode::Constant,
            gaussian_scale: 0.05,
            symmetric: false,
        }
    }
}

impl TvpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("TV neighbor count must be at least 1"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if self.weight_mode == WeightMode::Gaussian && !(self.gaussian_scale > 0.0 && self.gaussian_scale.is_finite()) {
            return Err(Error::invalid("gaussian weight scale must be positive"));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("tvpc.k".into(), self.k.to_string()),
            ("tvpc.epsilon".into(), self.epsilon.to_string()),
            ("tvpc.weight_mode".into(), self.weight_mode.to_string()),
            ("tvpc.gaussian_scale".into(), self.gaussian_scale.to_string()),
            ("tvpc.symmetric".into(), self.symmetric.to_string()),
        ]
    }

    fn edge(&self, a: &Point3, b: &Point3) -> f64 {
        let d2 = (a - b).norm_squared();
        let w = match self.weight_mode {
            WeightMode::Constant => 1.0,
            WeightMode::Gaussian => (-d2 / (2.0 * self.gaussian_scale * self.gaussian_scale)).exp(),
        };
        w * (d2 + self.epsilon * self.epsilon).sqrt()
    }
}

/// `Σ_i Σ_{j ∈ kNN(i)} w_ij √(‖p_i − p_j‖² + ε²)`, the point itself excluded
/// from its own neighbors.
pub fn tv_pc(cloud: &PointCloud, cfg: &TvpcConfig) -> Result<f64> {
    cfg.validate()?;
    if cloud.len() < 2 {
        return Err(Error::invalid("total variation needs at least two points"));
    }
    let index = NeighborIndex::build(cloud);
    let pts = cloud.points();
    let k = cfg.k.min(pts.len() - 1);
    if cfg.symmetric {
        let edges: BTreeSet<(usize, usize)> = pts
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                index
                    .knn_excluding(p, k, Some(i))
                    .into_iter()
                    .map(|n| (i.min(n.index), i.max(n.index)))
                    .collect::<Vec<_>>()
            })
            .flatten()
            .collect();
        let terms: Vec<f64> = edges.iter().map(|&(a, b)| cfg.edge(&pts[a], &pts[b])).collect();
        return Ok(ordered_sum(&terms));
    }
    let per_point: Vec<f64> = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .knn_excluding(p, k, Some(i))
                .iter()
                .map(|n| cfg.edge(p, &pts[n.index]))
                .sum()
        })
        .collect();
    Ok(ordered_sum(&per_point))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSearchConfig {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Stop once the bracket is narrower than this, in σ units.
    pub tolerance: f64,
    pub max_evals: usize,
}

impl Default for SigmaSearchConfig {
    fn default() -> Self {
        Self {
            sigma_lo: 1e-3,
            sigma_hi: 0.1,
            tolerance: 1e-4,
            max_evals: 60,
        }
    }
}

impl SigmaSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_lo > 0.0 && self.sigma_hi > self.sigma_lo && self.sigma_hi.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid search bracket [{}, {}]",
                self.sigma_lo, self.sigma_hi
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("search tolerance must be positive"));
        }
        if self.max_evals < GRID_POINTS {
            return Err(Error::invalid(format!("need at least {GRID_POINTS} evaluations")));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("search.sigma_lo".into(), self.sigma_lo.to_string()),
            ("search.sigma_hi".into(), self.sigma_hi.to_string()),
            ("search.tolerance".into(), self.tolerance.to_string()),
            ("search.max_evals".into(), self.max_evals.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    pub sigma_star: f64,
    /// Every evaluated `(σ, TV)` pair, sorted by σ.
    pub curve: Vec<(f64, f64)>,
    /// The grid pre-scan found the objective constant.
    pub flat: bool,
    /// The grid pre-scan was unimodal and golden-section refinement ran.
    pub unimodal: bool,
}

impl SigmaEstimate {
    pub fn write_curve_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "sigma,tvpc")?;
        for (s, g) in &self.curve {
            writeln!(out, "{s:.9e},{g:.9e}")?;
        }
        Ok(())
    }
}

/// Chooses σ minimizing the total variation of `Y + σ² S(Y)`.
pub fn estimate_sigma(
    cloud: &PointCloud,
    field: &dyn ScoreField,
    tv: &TvpcConfig,
    search: &SigmaSearchConfig,
) -> Result<SigmaEstimate> {
    tv.validate()?;
    search.validate()?;
    let scores = evaluate_score(field, cloud);
    estimate_sigma_from_scores(cloud, &scores, tv, search)
}

/// As [`estimate_sigma`] with scores already evaluated at every point.
pub fn estimate_sigma_from_scores(
    cloud: &PointCloud,
    scores: &[Point3],
    tv: &TvpcConfig,
    search: &SigmaSearchConfig,
) -> Result<SigmaEstimate> {
    tv.validate()?;
    search.validate()?;
    let g = |sigma: f64| -> Result<f64> { tv_pc(&tweedie_from_scores(cloud, scores, sigma)?, tv) };

    let (llo, lhi) = (search.sigma_lo.ln(), search.sigma_hi.ln());
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| (llo + (lhi - llo) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect();
    let mut curve = Vec::with_capacity(search.max_evals);
    for &s in &grid {
        curve.push((s, g(s)?));
    }
    let values: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if vmax - vmin <= 1e-12 * vmax.abs().max(f64::MIN_POSITIVE) {
        return Ok(SigmaEstimate {
            sigma_star: search.sigma_lo,
            curve,
            flat: true,
            unimodal: false,
        });
    }
    let best = argmin(&values);
    let unimodal = values[..=best].windows(2).all(|w| w[1] <= w[0]) && values[best..].windows(2).all(|w| w[1] >= w[0]);

    if unimodal {
        let mut a = grid[best.saturating_sub(1)].ln();
        let mut b = grid[(best + 1).min(GRID_POINTS - 1)].ln();
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut gc = g(c.exp())?;
        let mut gd = g(d.exp())?;
        curve.push((c.exp(), gc));
        curve.push((d.exp(), gd));
        while curve.len() < search.max_evals && b.exp() - a.exp() > search.tolerance {
            if gc <= gd {
                b = d;
                d = c;
                gd = gc;
                c = b - GOLDEN * (b - a);
                gc = g(c.exp())?;
                curve.push((c.exp(), gc));
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + GOLDEN * (b - a);
                gd = g(d.exp())?;
                curve.push((d.exp(), gd));
            }
        }
    }

    curve.sort_by(|x, y| x.0.total_cmp(&y.0));
    let values: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let sigma_star = curve[argmin(&values)].0;
    Ok(SigmaEstimate {
        sigma_star,
        curve,
        flat: false,
        unimodal,
    })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}
