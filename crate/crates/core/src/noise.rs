//! Synthetic corruption models.
//!
//! Gaussian noise is isotropic with standard deviation `level × sphere_radius`.
//! LiDAR-style noise perturbs each point along the ray from a virtual sensor by
//! a shared per-laser range bias plus independent per-ray range noise.
//!
//! All randomness is drawn from counter-based streams keyed by `(seed, point
//! index)` or `(seed, laser index)`, so outputs do not depend on iteration order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::numeric::keyed_rng;

/// Stream offset separating per-laser bias draws from per-point draws.
const LASER_STREAM_BASE: u64 = 1 << 62;

/// Sensor distance from the centroid, in bounding-sphere radii.
const SENSOR_DISTANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    Lidar,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Lidar => "lidar",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "lidar" => Ok(NoiseKind::Lidar),
            other => Err(Error::invalid(format!("unknown noise model '{other}'"))),
        }
    }
}

/// Noise model plus parameters relative to a reference scale of the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Gaussian: fraction of the bounding-sphere radius. LiDAR: per-ray range
    /// noise as a fraction of the bounding-box diagonal.
    pub level: f64,
    pub seed: u64,
    pub lidar_lasers: usize,
    /// Per-laser range bias std as a fraction of the bounding-box diagonal.
    pub lidar_bias_level: f64,
}

impl NoiseSpec {
    pub const DEFAULT_LASERS: usize = 64;
    pub const DEFAULT_BIAS_LEVEL: f64 = 0.005;

    pub fn gaussian(level: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            level,
            seed,
            lidar_lasers: Self::DEFAULT_LASERS,
            lidar_bias_level: Self::DEFAULT_BIAS_LEVEL,
        }
    }

    pub fn lidar(level: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Lidar,
            ..Self::gaussian(level, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::invalid(format!("noise level must be finite and >= 0, got {}", self.level)));
        }
        if !(self.lidar_bias_level >= 0.0 && self.lidar_bias_level.is_finite()) {
            return Err(Error::invalid("lidar bias level must be finite and >= 0"));
        }
        if self.lidar_lasers == 0 {
            return Err(Error::invalid("lidar laser count must be positive"));
        }
        Ok(())
    }

    /// Flat `key=value` lines, in a fixed order.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("noise.kind".into(), self.kind.to_string()),
            ("noise.level".into(), format!("{:?}", self.level)),
            ("noise.seed".into(), self.seed.to_string()),
            ("noise.lidar_lasers".into(), self.lidar_lasers.to_string()),
            ("noise.lidar_bias_level".into(), format!("{:?}", self.lidar_bias_level)),
        ]
    }

    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            map.get(k)
                .ok_or_else(|| Error::Manifest(format!("missing key '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Manifest(format!("bad number for '{k}'")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Manifest(format!("bad integer for '{k}'")))
        };
        Ok(Self {
            kind: get("noise.kind")?.parse()?,
            level: num("noise.level")?,
            seed: int("noise.seed")?,
            lidar_lasers: int("noise.lidar_lasers")? as usize,
            lidar_bias_level: num("noise.lidar_bias_level")?,
        })
    }
}

/// Bounding-sphere radius (max distance from the centroid) and the diagonal of
/// the axis-aligned bounding box.
pub fn bounding_scales(cloud: &PointCloud) -> (f64, f64) {
    let c = cloud.centroid();
    let mut radius = 0.0_f64;
    let mut lo = Point3::repeat(f64::INFINITY);
    let mut hi = Point3::repeat(f64::NEG_INFINITY);
    for p in cloud.points() {
        radius = radius.max((p - c).norm());
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (radius, (hi - lo).norm())
}

fn standard_normal3(rng: &mut impl rand::Rng) -> Point3 {
    Point3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

/// Adds i.i.d. isotropic Gaussian noise. Returns the noisy cloud and the
/// absolute standard deviation `level × sphere_radius`.
pub fn add_gaussian_noise(cloud: &PointCloud, spec: &NoiseSpec) -> Result<(PointCloud, f64)> {
    spec.validate()?;
    if spec.kind != NoiseKind::Gaussian {
        return Err(Error::invalid("add_gaussian_noise requires a gaussian noise spec"));
    }
    let (radius, _) = bounding_scales(cloud);
    let sigma = spec.level * radius;
    let points: Vec<Point3> = cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = keyed_rng(spec.seed, i as u64);
            p + standard_normal3(&mut rng) * sigma
        })
        .collect();
    Ok((PointCloud::new(points)?, sigma))
}

/// Per-point output of the LiDAR model, exposed for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct LidarTrace {
    pub sensor: Point3,
    /// Laser (elevation bin) of each point; `None` for points at the sensor.
    pub laser: Vec<Option<usize>>,
    /// Signed range displacement applied to each point.
    pub range_offset: Vec<f64>,
}

/// Simulated scanner noise: a virtual sensor sits `3 × sphere_radius` from the
/// centroid along +x; points are binned by elevation into `lidar_lasers` bins;
/// each bin shares one range bias and each point adds its own range noise, both
/// applied along the sensor-to-point direction.
pub fn add_lidar_noise(cloud: &PointCloud, spec: &NoiseSpec) -> Result<PointCloud> {
    Ok(add_lidar_noise_traced(cloud, spec)?.0)
}

pub fn add_lidar_noise_traced(cloud: &PointCloud, spec: &NoiseSpec) -> Result<(PointCloud, LidarTrace)> {
    spec.validate()?;
    if spec.kind != NoiseKind::Lidar {
        return Err(Error::invalid("add_lidar_noise requires a lidar noise spec"));
    }
    let (radius, diagonal) = bounding_scales(cloud);
    let sensor = cloud.centroid() + Point3::new(SENSOR_DISTANCE * radius, 0.0, 0.0);

    let elevation = |p: &Point3| -> Option<f64> {
        let d = p - sensor;
        (d.norm() > 0.0).then(|| d.z.atan2(d.x.hypot(d.y)))
    };
    let elevations: Vec<Option<f64>> = cloud.points().iter().map(elevation).collect();
    let (lo, hi) = elevations
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let lasers = spec.lidar_lasers;
    let bin_of = |e: f64| -> usize {
        if hi > lo {
            (((e - lo) / (hi - lo) * lasers as f64) as usize).min(lasers - 1)
        } else {
            0
        }
    };

    let bias_sigma = spec.lidar_bias_level * diagonal;
    let ray_sigma = spec.level * diagonal;
    let biases: Vec<f64> = (0..lasers)
        .map(|b| {
            let mut rng = keyed_rng(spec.seed, LASER_STREAM_BASE + b as u64);
            let z: f64 = StandardNormal.sample(&mut rng);
            z * bias_sigma
        })
        .collect();

    let results: Vec<(Point3, Option<usize>, f64)> = cloud
        .points()
        .par_iter()
        .zip(elevations.par_iter())
        .enumerate()
        .map(|(i, (p, elev))| match elev {
            None => (*p, None, 0.0),
            Some(e) => {
                let laser = bin_of(*e);
                let mut rng = keyed_rng(spec.seed, i as u64);
                let z: f64 = StandardNormal.sample(&mut rng);
                let offset = biases[laser] + z * ray_sigma;
                let dir = (p - sensor).normalize();
                (p + dir * offset, Some(laser), offset)
            }
        })
        .collect();

    let mut points = Vec::with_capacity(results.len());
    let mut laser = Vec::with_capacity(results.len());
    let mut range_offset = Vec::with_capacity(results.len());
    for (p, l, o) in results {
        points.push(p);
        laser.push(l);
        range_offset.push(o);
    }
    Ok((
        PointCloud::new(points)?,
        LidarTrace {
            sensor,
            laser,
            range_offset,
        },
    ))
}

/// Dispatches on `spec.kind`. Returns the noisy cloud and, for Gaussian noise,
/// the absolute σ.
pub fn apply_noise(cloud: &PointCloud, spec: &NoiseSpec) -> Result<(PointCloud, Option<f64>)> {
    match spec.kind {
        NoiseKind::Gaussian => add_gaussian_noise(cloud, spec).map(|(c, s)| (c, Some(s))),
        NoiseKind::Lidar => add_lidar_noise(cloud, spec).map(|c| (c, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_mesh, shapes, SamplingMode};

    fn unit_sphere_cloud(n: usize, seed: u64) -> PointCloud {
        // Points on the exact unit sphere: radius about the centroid is ~1.
        let c = sample_mesh(&shapes::icosphere(1.0, 4), n, seed, SamplingMode::Uniform).unwrap();
        c.map(|p| p.normalize()).unwrap()
    }

    #[test]
    fn single_point_scales_are_zero() {
        let c = PointCloud::from_arrays(&[[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(bounding_scales(&c), (0.0, 0.0));
    }

    #[test]
    fn cube_corner_scales() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let (r, d) = bounding_scales(&PointCloud::from_arrays(&pts).unwrap());
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((d - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn random_cloud_scales_match_direct_formula() {
        let c = unit_sphere_cloud(300, 4).map(|p| Point3::new(p.x * 2.0 + 1.0, p.y, p.z * 0.5)).unwrap();
        let (r, d) = bounding_scales(&c);
        let n = c.len() as f64;
        let cx: f64 = c.points().iter().map(|p| p.x).sum::<f64>() / n;
        let cy: f64 = c.points().iter().map(|p| p.y).sum::<f64>() / n;
        let cz: f64 = c.points().iter().map(|p| p.z).sum::<f64>() / n;
        let r_direct = c
            .points()
            .iter()
            .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2) + (p.z - cz).powi(2)).sqrt())
            .fold(0.0, f64::max);
        let ext = |f: fn(&Point3) -> f64| {
            let v: Vec<f64> = c.points().iter().map(f).collect();
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let d_direct = (ext(|p| p.x).powi(2) + ext(|p| p.y).powi(2) + ext(|p| p.z).powi(2)).sqrt();
        assert!((r - r_direct).abs() < 1e-12);
        assert!((d - d_direct).abs() < 1e-12);
    }

    #[test]
    fn zero_level_is_identity() {
        let c = unit_sphere_cloud(100, 1);
        let (out, sigma) = add_gaussian_noise(&c, &NoiseSpec::gaussian(0.0, 3)).unwrap();
        assert_eq!(sigma, 0.0);
        assert_eq!(out, c);
    }

    #[test]
    fn gaussian_moments_and_covariance() {
        let c = unit_sphere_cloud(100_000, 2);
        let (radius, _) = bounding_scales(&c);
        let (out, sigma) = add_gaussian_noise(&c, &NoiseSpec::gaussian(0.02, 5)).unwrap();
        assert!((sigma - 0.02 * radius).abs() < 1e-15);
        assert!((radius - 1.0).abs() < 1e-2);
        let disp: Vec<Point3> = out.points().iter().zip(c.points()).map(|(a, b)| a - b).collect();
        let n = disp.len() as f64;
        let mean: Point3 = disp.iter().sum::<Point3>() / n;
        let mut cov = nalgebra::Matrix3::<f64>::zeros();
        for d in &disp {
            let e = d - mean;
            cov += e * e.transpose();
        }
        cov /= n - 1.0;
        for k in 0..3 {
            let std = cov[(k, k)].sqrt();
            assert!((std - sigma).abs() / sigma < 0.03, "axis {k}: {std}");
            for l in 0..3 {
                if k != l {
                    assert!(cov[(k, l)].abs() <= 0.05 * sigma * sigma);
                }
            }
        }
    }

    #[test]
    fn gaussian_is_deterministic_and_preserves_order() {
        let c = unit_sphere_cloud(1000, 3);
        let spec = NoiseSpec::gaussian(0.01, 42);
        let (a, _) = add_gaussian_noise(&c, &spec).unwrap();
        let (b, _) = add_gaussian_noise(&c, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), c.len());
        // Point i only depends on (seed, i): a prefix cloud gets the same noise.
        let prefix = PointCloud::new(c.points()[..10].to_vec()).unwrap();
        let (p, _) = add_gaussian_noise(&prefix, &spec).unwrap();
        let (rp, _) = bounding_scales(&prefix);
        let (rc, _) = bounding_scales(&c);
        for i in 0..10 {
            let da = (a.points()[i] - c.points()[i]) / rc;
            let dp = (p.points()[i] - prefix.points()[i]) / rp;
            assert!((da - dp).norm() < 1e-12);
        }
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let c = unit_sphere_cloud(10, 3);
        assert!(add_gaussian_noise(&c, &NoiseSpec::lidar(0.01, 1)).is_err());
        assert!(add_lidar_noise(&c, &NoiseSpec::gaussian(0.01, 1)).is_err());
        assert!(add_gaussian_noise(&c, &NoiseSpec::gaussian(-0.01, 1)).is_err());
    }

    #[test]
    fn lidar_zero_levels_is_identity() {
        let c = unit_sphere_cloud(500, 4);
        let mut spec = NoiseSpec::lidar(0.0, 9);
        spec.lidar_bias_level = 0.0;
        assert_eq!(add_lidar_noise(&c, &spec).unwrap(), c);
    }

    #[test]
    fn lidar_single_bin_shares_bias() {
        let c = unit_sphere_cloud(500, 5);
        let mut spec = NoiseSpec::lidar(0.0, 9);
        spec.lidar_lasers = 1;
        let (out, trace) = add_lidar_noise_traced(&c, &spec).unwrap();
        let shift = trace.range_offset[0];
        assert!(shift != 0.0);
        for (i, (a, b)) in out.points().iter().zip(c.points()).enumerate() {
            assert_eq!(trace.laser[i], Some(0));
            let dir = (b - trace.sensor).normalize();
            assert!((a - b - dir * shift).norm() < 1e-14);
        }
    }

    #[test]
    fn lidar_per_ray_std_after_removing_bin_means() {
        let c = unit_sphere_cloud(100_000, 6);
        let (_, diagonal) = bounding_scales(&c);
        let spec = NoiseSpec::lidar(0.01, 77);
        let (out, trace) = add_lidar_noise_traced(&c, &spec).unwrap();
        assert_eq!(out.len(), c.len());
        let mut sums = vec![(0.0, 0usize); spec.lidar_lasers];
        for (l, o) in trace.laser.iter().zip(&trace.range_offset) {
            let l = l.unwrap();
            sums[l].0 += o;
            sums[l].1 += 1;
        }
        let mut ss = 0.0;
        let mut dof = 0usize;
        for (l, o) in trace.laser.iter().zip(&trace.range_offset) {
            let (s, n) = sums[l.unwrap()];
            ss += (o - s / n as f64).powi(2);
            dof += 1;
        }
        dof -= sums.iter().filter(|s| s.1 > 0).count();
        let std = (ss / dof as f64).sqrt();
        let want = 0.01 * diagonal;
        assert!((std - want).abs() / want < 0.03, "{std} vs {want}");
    }

    #[test]
    fn spec_kv_round_trip() {
        let spec = NoiseSpec::lidar(0.015, 1234);
        let map: BTreeMap<String, String> = spec.to_kv().into_iter().collect();
        assert_eq!(NoiseSpec::from_kv(&map).unwrap(), spec);
    }
}
